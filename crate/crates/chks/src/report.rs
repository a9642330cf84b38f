//! CSV serialization of report rows and envelope series. Fixed column order,
//! 17 significant digits, so identical runs produce byte-identical files.

use std::io::Write;
use std::path::Path;

use crate::diagnostics::StateReport;
use crate::error::Result;

pub const REPORT_COLUMNS: &[&str] = &[
    "t",
    "energy",
    "mass",
    "entropy",
    "min_sigma",
    "sigma_undershoot",
    "dissipation_residual",
    "phi_v",
    "phi_lap_l2",
    "phi_lap_l6",
    "phi_w26",
    "beta_hat_l1",
    "beta_l1",
    "beta_l3",
    "beta_l6",
    "beta_neg_l6",
    "sigma_l2",
    "sigma_l3",
    "sigma_v",
    "sigma_a14",
    "sigma_a34",
    "sigma_h2",
    "grad_mu",
    "mu_v",
    "mu_mean_abs",
    "product_radius",
];

fn fields_of(r: &StateReport) -> [f64; 26] {
    [
        r.t,
        r.energy,
        r.mass,
        r.entropy,
        r.min_sigma,
        r.sigma_undershoot,
        r.dissipation_residual,
        r.phi_v,
        r.phi_lap_l2,
        r.phi_lap_l6,
        r.phi_w26,
        r.beta_hat_l1,
        r.beta_l1,
        r.beta_l3,
        r.beta_l6,
        r.beta_neg_l6,
        r.sigma_l2,
        r.sigma_l3,
        r.sigma_v,
        r.sigma_a14,
        r.sigma_a34,
        r.sigma_h2,
        r.grad_mu,
        r.mu_v,
        r.mu_mean_abs,
        r.product_radius,
    ]
}

/// 17 significant digits round-trips every f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn report_csv(reports: &[StateReport]) -> String {
    let mut out = String::new();
    out.push_str(&REPORT_COLUMNS.join(","));
    out.push('\n');
    for r in reports {
        let row: Vec<String> = fields_of(r).iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_report_csv(path: &Path, reports: &[StateReport]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(report_csv(reports).as_bytes())?;
    Ok(())
}

/// Aggregate envelope CSV: per time, the ensemble maxima of energy and
/// product radius.
pub fn envelope_csv(times: &[f64], energy_env: &[f64], radius_env: &[f64]) -> String {
    let mut out = String::from("t,energy_max,product_radius_max\n");
    for i in 0..times.len() {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(times[i]),
            fmt_f64(energy_env[i]),
            fmt_f64(radius_env[i])
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_matches_field_count() {
        assert_eq!(REPORT_COLUMNS.len(), 26);
    }

    #[test]
    fn formatting_round_trips() {
        for v in [
            0.0,
            -1.5,
            1.0 / 3.0,
            1e-300,
            f64::MAX,
            -2.2250738585072014e-308,
        ] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, v, "{s}");
        }
    }
}
