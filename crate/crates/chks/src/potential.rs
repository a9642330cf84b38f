//! The singular configuration potential and its monotone-graph machinery.
//!
//! The convex part `beta_hat` lives on [-1, 1] with subdifferential `beta`;
//! the full potential is `F(r) = beta_hat(r) - (lambda/2) r^2` and its
//! derivative `f(r) = beta(r) - lambda r`. The implicit solver interacts with
//! `beta` only through the resolvent `y -> x` solving `x + tau beta(x) = y`,
//! which is single-valued, nonexpansive, and maps all of R strictly inside
//! the domain. The Yosida regularization `beta_eps` is derived from it.

use crate::error::{Error, Result};

pub const TWO_LOG_2: f64 = 2.0 * std::f64::consts::LN_2;

/// Which singular potential shape is in use.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// beta_hat(r) = (1+r) ln(1+r) + (1-r) ln(1-r); beta(r) = ln((1+r)/(1-r)).
    FloryHuggins,
    /// Steep smooth walls approximating the double obstacle:
    /// beta(r) = tan(pi r / 2), beta_hat(r) = -(2/pi) ln cos(pi r / 2).
    DoubleObstacleSmoothed,
    /// User-supplied monotone samples of beta on nodes inside [-1, 1],
    /// interpolated linearly, extended by vertical rays at the table ends.
    CustomTabulated { r: Vec<f64>, beta: Vec<f64> },
}

/// The potential with its nonconvexity coefficient and the regularization
/// parameter used when an explicit Yosida evaluation is requested.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub lambda: f64,
    pub yosida_eps: f64,
    /// Cumulative integrals of the tabulated beta at its nodes (empty otherwise).
    beta_hat_table: Vec<f64>,
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind, lambda: f64, yosida_eps: f64) -> Result<PotentialSpec> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Domain {
                what: "PotentialSpec::new",
                detail: format!("lambda must be >= 0 (got {lambda})"),
            });
        }
        if !(yosida_eps > 0.0) {
            return Err(Error::Domain {
                what: "PotentialSpec::new",
                detail: format!("yosida_eps must be > 0 (got {yosida_eps})"),
            });
        }
        let mut beta_hat_table = Vec::new();
        if let PotentialKind::CustomTabulated { r, beta } = &kind {
            validate_table(r, beta)?;
            // trapezoid prefix integrals of the interpolant, anchored so that
            // beta_hat(0) = 0
            beta_hat_table = vec![0.0; r.len()];
            for s in 1..r.len() {
                beta_hat_table[s] =
                    beta_hat_table[s - 1] + 0.5 * (beta[s - 1] + beta[s]) * (r[s] - r[s - 1]);
            }
            let at_zero = table_integral(r, beta, &beta_hat_table, 0.0);
            for v in &mut beta_hat_table {
                *v -= at_zero;
            }
        }
        Ok(PotentialSpec {
            kind,
            lambda,
            yosida_eps,
            beta_hat_table,
        })
    }

    pub fn flory_huggins(lambda: f64) -> PotentialSpec {
        PotentialSpec::new(PotentialKind::FloryHuggins, lambda, 1e-4)
            .expect("lambda >= 0 checked by caller")
    }

    /// Lower/upper ends of dom(beta).
    pub fn domain(&self) -> (f64, f64) {
        match &self.kind {
            PotentialKind::CustomTabulated { r, .. } => (r[0], *r.last().unwrap()),
            _ => (-1.0, 1.0),
        }
    }

    /// Convex part of the potential; the endpoint values are the continuous
    /// limits (x ln x -> 0 for Flory-Huggins, +inf for the obstacle walls).
    pub fn beta_hat(&self, r: f64) -> Result<f64> {
        self.check_closed_domain("beta_hat", r)?;
        Ok(match &self.kind {
            PotentialKind::FloryHuggins => xlogx(1.0 + r) + xlogx(1.0 - r),
            PotentialKind::DoubleObstacleSmoothed => {
                let c = (std::f64::consts::FRAC_PI_2 * r).cos();
                if c <= 0.0 {
                    f64::INFINITY
                } else {
                    -(2.0 / std::f64::consts::PI) * c.ln()
                }
            }
            PotentialKind::CustomTabulated { r: nodes, beta } => {
                table_integral(nodes, beta, &self.beta_hat_table, r)
            }
        })
    }

    /// The monotone term on the open interior of its domain.
    pub fn beta(&self, r: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(r > lo && r < hi) || !r.is_finite() {
            if r == lo || r == hi {
                return match &self.kind {
                    // the tabulated graph is finite up to its endpoints
                    PotentialKind::CustomTabulated { .. } => self.beta0(r),
                    _ => Err(Error::SingularEndpoint { what: "beta", r }),
                };
            }
            return Err(Error::Domain {
                what: "beta",
                detail: format!("r = {r} outside open domain ({lo}, {hi})"),
            });
        }
        Ok(self.beta_unchecked(r))
    }

    fn beta_unchecked(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::FloryHuggins => ((1.0 + r) / (1.0 - r)).ln(),
            PotentialKind::DoubleObstacleSmoothed => (std::f64::consts::FRAC_PI_2 * r).tan(),
            PotentialKind::CustomTabulated { r: nodes, beta } => table_interp(nodes, beta, r),
        }
    }

    /// Minimal section of the graph on the closed domain. For potentials whose
    /// beta blows up at the endpoints this is a distinct singular-endpoint error.
    pub fn beta0(&self, r: f64) -> Result<f64> {
        self.check_closed_domain("beta0", r)?;
        let (lo, hi) = self.domain();
        match &self.kind {
            PotentialKind::CustomTabulated { r: nodes, beta } => {
                if r <= nodes[0] {
                    // vertical ray (-inf, beta_0]: minimal modulus element
                    Ok(beta[0].min(0.0))
                } else if r >= *nodes.last().unwrap() {
                    // vertical ray [beta_end, +inf)
                    Ok(beta.last().unwrap().max(0.0))
                } else {
                    Ok(table_interp(nodes, beta, r))
                }
            }
            _ => {
                if r == lo || r == hi {
                    Err(Error::SingularEndpoint { what: "beta0", r })
                } else {
                    Ok(self.beta_unchecked(r))
                }
            }
        }
    }

    /// Derivative of beta where it is differentiable (interior; segment slope
    /// for the tabulated kind).
    pub fn beta_prime(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::FloryHuggins => 2.0 / (1.0 - r * r),
            PotentialKind::DoubleObstacleSmoothed => {
                let t = (std::f64::consts::FRAC_PI_2 * r).tan();
                std::f64::consts::FRAC_PI_2 * (1.0 + t * t)
            }
            PotentialKind::CustomTabulated { r: nodes, beta } => {
                let i = segment_index(nodes, r);
                let dr = nodes[i + 1] - nodes[i];
                (beta[i + 1] - beta[i]) / dr
            }
        }
    }

    /// f(r) = beta(r) - lambda r.
    pub fn f_value(&self, r: f64) -> Result<f64> {
        Ok(self.beta(r)? - self.lambda * r)
    }

    /// F(r) = beta_hat(r) - (lambda/2) r^2.
    pub fn big_f(&self, r: f64) -> Result<f64> {
        Ok(self.beta_hat(r)? - 0.5 * self.lambda * r * r)
    }

    /// The unique x with x + tau beta(x) = y; defined for every real y,
    /// nonexpansive, output strictly inside the open domain (for the
    /// tabulated kind the vertical rays make the table ends attainable).
    pub fn resolvent(&self, tau: f64, y: f64) -> Result<f64> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Domain {
                what: "resolvent",
                detail: format!("tau must be positive (got {tau})"),
            });
        }
        if !y.is_finite() {
            return Err(Error::Domain {
                what: "resolvent",
                detail: format!("y = {y}"),
            });
        }
        // largest f64 strictly below 1; arguments so extreme that the true
        // solution sits within one ulp of the endpoint saturate here
        const MAX_INTERIOR: f64 = 1.0 - f64::EPSILON / 2.0;
        Ok(match &self.kind {
            PotentialKind::FloryHuggins => {
                // x = tanh(u): solve tanh(u) + 2 tau u = y, smooth and coercive in u
                let u = solve_increasing(|u| u.tanh() + 2.0 * tau * u, y, 2.0 * tau);
                u.tanh().clamp(-MAX_INTERIOR, MAX_INTERIOR)
            }
            PotentialKind::DoubleObstacleSmoothed => {
                // x = (2/pi) atan(u): solve (2/pi) atan(u) + tau u = y
                let u = solve_increasing(
                    |u| (2.0 / std::f64::consts::PI) * u.atan() + tau * u,
                    y,
                    tau,
                );
                ((2.0 / std::f64::consts::PI) * u.atan()).clamp(-MAX_INTERIOR, MAX_INTERIOR)
            }
            PotentialKind::CustomTabulated { r: nodes, beta } => {
                // piecewise-linear g(x) = x + tau beta(x): exact segment solve
                let n = nodes.len();
                if y <= nodes[0] + tau * beta[0] {
                    nodes[0]
                } else if y >= nodes[n - 1] + tau * beta[n - 1] {
                    nodes[n - 1]
                } else {
                    let mut lo = 0;
                    let mut hi = n - 1;
                    while hi - lo > 1 {
                        let mid = (lo + hi) / 2;
                        if nodes[mid] + tau * beta[mid] <= y {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let g0 = nodes[lo] + tau * beta[lo];
                    let g1 = nodes[hi] + tau * beta[hi];
                    let t = if g1 > g0 { (y - g0) / (g1 - g0) } else { 0.0 };
                    nodes[lo] + t * (nodes[hi] - nodes[lo])
                }
            }
        })
    }

    /// Yosida approximation beta_eps(r) = (r - resolvent(eps, r)) / eps.
    pub fn yosida(&self, eps: f64, r: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(Error::Domain {
                what: "yosida",
                detail: format!("eps must be > 0 (got {eps})"),
            });
        }
        Ok((r - self.resolvent(eps, r)?) / eps)
    }

    fn check_closed_domain(&self, what: &'static str, r: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if r.is_finite() && (lo..=hi).contains(&r) {
            Ok(())
        } else {
            Err(Error::Domain {
                what,
                detail: format!("r = {r} outside [{lo}, {hi}]"),
            })
        }
    }
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Safeguarded Newton for g(u) = y with g increasing; `slope_min` bounds g'
/// from below. Converges for any starting bracket; residual driven to 1e-13
/// absolute (scaled by |y|).
fn solve_increasing(g: impl Fn(f64) -> f64, y: f64, slope_min: f64) -> f64 {
    let tol = 1e-13 * y.abs().max(1.0);
    if (g(0.0) - y).abs() <= tol {
        return 0.0;
    }
    // initial bracket: g(0) is -/+ depending on y's sign; the linear lower
    // bound gives the other end
    let (mut lo, mut hi) = if y >= 0.0 {
        (0.0, (y + 1.0) / slope_min)
    } else {
        ((y - 1.0) / slope_min, 0.0)
    };
    while g(hi) < y {
        hi *= 2.0;
    }
    while g(lo) > y {
        lo *= 2.0;
    }
    let mut u = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gu = g(u);
        let r = gu - y;
        if r.abs() <= tol {
            return u;
        }
        if r > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        // secant-free Newton via centered derivative estimate would cost an
        // extra evaluation; use the analytic floor plus bisection fallback
        let h = 1e-7 * u.abs().max(1.0);
        let d = ((g(u + h) - gu) / h).max(slope_min);
        let mut next = u - r / d;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        u = next;
    }
    u
}

fn validate_table(r: &[f64], beta: &[f64]) -> Result<()> {
    if r.len() < 2 || r.len() != beta.len() {
        return Err(Error::Domain {
            what: "CustomTabulated",
            detail: "need at least two (r, beta) samples of equal length".into(),
        });
    }
    if r[0] < -1.0 || *r.last().unwrap() > 1.0 {
        return Err(Error::Domain {
            what: "CustomTabulated",
            detail: "nodes must lie within [-1, 1]".into(),
        });
    }
    for w in r.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Domain {
                what: "CustomTabulated",
                detail: "nodes must be strictly increasing".into(),
            });
        }
    }
    for w in beta.windows(2) {
        if w[1] < w[0] {
            return Err(Error::Domain {
                what: "CustomTabulated",
                detail: "beta samples must be nondecreasing".into(),
            });
        }
    }
    if r[0] > 0.0 || *r.last().unwrap() < 0.0 {
        return Err(Error::Domain {
            what: "CustomTabulated",
            detail: "table must bracket r = 0 (normalization 0 in beta(0))".into(),
        });
    }
    let b0 = table_interp(r, beta, 0.0);
    if b0.abs() > 1e-9 {
        return Err(Error::Domain {
            what: "CustomTabulated",
            detail: format!("beta(0) = {b0:.3e}, expected 0"),
        });
    }
    Ok(())
}

fn segment_index(nodes: &[f64], r: f64) -> usize {
    let n = nodes.len();
    if r <= nodes[0] {
        return 0;
    }
    if r >= nodes[n - 1] {
        return n - 2;
    }
    let mut lo = 0;
    let mut hi = n - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if nodes[mid] <= r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn table_interp(nodes: &[f64], values: &[f64], r: f64) -> f64 {
    let i = segment_index(nodes, r);
    let t = (r - nodes[i]) / (nodes[i + 1] - nodes[i]);
    values[i] + t.clamp(0.0, 1.0) * (values[i + 1] - values[i])
}

/// Integral of the linear interpolant from the anchor, exact per segment.
fn table_integral(nodes: &[f64], beta: &[f64], prefix: &[f64], r: f64) -> f64 {
    let i = segment_index(nodes, r);
    let dr = r.clamp(nodes[0], *nodes.last().unwrap()) - nodes[i];
    let slope = (beta[i + 1] - beta[i]) / (nodes[i + 1] - nodes[i]);
    prefix[i] + beta[i] * dr + 0.5 * slope * dr * dr
}

/// A bounded, strictly positive coefficient function of (sigma, phi), either
/// constant or saturating in sigma: lo + (hi - lo) sigma / (sigma + scale).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoeffSpec {
    Constant(f64),
    Saturating { lo: f64, hi: f64, scale: f64 },
}

impl CoeffSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        let ok = match self {
            CoeffSpec::Constant(c) => c.is_finite() && *c > 0.0,
            CoeffSpec::Saturating { lo, hi, scale } => {
                lo.is_finite() && hi.is_finite() && *lo > 0.0 && *hi >= *lo && *scale > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "CoeffSpec",
                detail: format!("need 0 < lo <= hi and scale > 0 (got lo = {lo}, hi = {hi})"),
            })
        }
    }

    /// (lower, upper) bounds of the coefficient over its whole domain.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            CoeffSpec::Constant(c) => (*c, *c),
            CoeffSpec::Saturating { lo, hi, .. } => (*lo, *hi),
        }
    }

    pub fn eval(&self, sigma: f64, phi: f64) -> Result<f64> {
        if !(sigma >= 0.0) || phi.abs() > 1.0 {
            return Err(Error::Domain {
                what: "coefficient_eval",
                detail: format!("need sigma >= 0 and |phi| <= 1 (got {sigma}, {phi})"),
            });
        }
        Ok(self.eval_unchecked(sigma, phi))
    }

    /// Same formula without the domain check; used in inner loops where the
    /// state invariants already hold (tiny recorded sigma undershoots are
    /// clamped to zero here, matching the bounds guarantee).
    pub fn eval_unchecked(&self, sigma: f64, _phi: f64) -> f64 {
        match self {
            CoeffSpec::Constant(c) => *c,
            CoeffSpec::Saturating { lo, hi, scale } => {
                let s = sigma.max(0.0);
                lo + (hi - lo) * s / (s + scale)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn fh() -> PotentialSpec {
        PotentialSpec::flory_huggins(1.0)
    }

    #[test]
    fn beta_hat_values() {
        let p = fh();
        assert_eq!(p.beta_hat(0.0).unwrap(), 0.0);
        assert!((p.beta_hat(1.0).unwrap() - TWO_LOG_2).abs() < 1e-14);
        assert!((p.beta_hat(-1.0).unwrap() - TWO_LOG_2).abs() < 1e-14);
        let direct = 1.5 * 1.5_f64.ln() + 0.5 * 0.5_f64.ln();
        assert!((p.beta_hat(0.5).unwrap() - direct).abs() < 1e-14);
        assert!(p.beta_hat(1.2).is_err());
        assert!(p.beta_hat(-1.0000001).is_err());
    }

    #[test]
    fn beta_hat_range_and_symmetry() {
        let p = fh();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let r: f64 = rng.gen_range(-1.0..1.0);
            let v = p.beta_hat(r).unwrap();
            assert!((0.0..=TWO_LOG_2 + 1e-15).contains(&v));
            assert!((v - p.beta_hat(-r).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn beta_hat_convexity_by_second_differences() {
        let p = fh();
        let q = PotentialSpec::new(PotentialKind::DoubleObstacleSmoothed, 0.0, 1e-4).unwrap();
        for spec in [&p, &q] {
            for i in 1..99 {
                let r = -0.99 + 1.98 * i as f64 / 99.0;
                let h = 1e-3;
                let dd = spec.beta_hat(r - h).unwrap() - 2.0 * spec.beta_hat(r).unwrap()
                    + spec.beta_hat(r + h).unwrap();
                assert!(dd >= -1e-10);
            }
        }
    }

    #[test]
    fn beta_values_and_oddness() {
        let p = fh();
        assert_eq!(p.beta(0.0).unwrap(), 0.0);
        assert!((p.beta(0.5).unwrap() - 3.0_f64.ln()).abs() < 1e-14);
        assert!((p.beta(-0.5).unwrap() + 3.0_f64.ln()).abs() < 1e-14);
        assert!(matches!(p.beta(1.0), Err(Error::SingularEndpoint { .. })));
        assert!(matches!(p.beta(1.5), Err(Error::Domain { .. })));
        assert!(matches!(p.beta0(1.0), Err(Error::SingularEndpoint { .. })));
        assert!(p.beta0(0.3).is_ok());
    }

    #[test]
    fn beta_hat_recovered_from_beta_by_quadrature() {
        // adaptive Simpson of beta from 0 to r must reproduce beta_hat
        fn simpson(p: &PotentialSpec, a: f64, b: f64, fa: f64, fb: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let fm = p.beta(m).unwrap();
            let coarse = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = p.beta(lm).unwrap();
            let frm = p.beta(rm).unwrap();
            let fine = (b - a) / 12.0 * (fa + 4.0 * flm + 2.0 * fm + 4.0 * frm + fb);
            if depth == 0 || (fine - coarse).abs() < 1e-12 {
                fine
            } else {
                simpson(p, a, m, fa, fm, depth - 1) + simpson(p, m, b, fm, fb, depth - 1)
            }
        }
        let p = fh();
        for r in [-0.99, -0.6, -0.1, 0.2, 0.75, 0.99] {
            let (a, b) = if r >= 0.0 { (0.0, r) } else { (r, 0.0) };
            let integral = simpson(&p, a, b, p.beta(a).unwrap(), p.beta(b).unwrap(), 30);
            let integral = if r >= 0.0 { integral } else { -integral };
            assert!(
                (integral - p.beta_hat(r).unwrap()).abs() < 1e-8,
                "quadrature mismatch at r = {r}"
            );
        }
    }

    #[test]
    fn f_value_decomposition() {
        let p0 = PotentialSpec::flory_huggins(0.0);
        assert!((p0.f_value(0.5).unwrap() - 3.0_f64.ln()).abs() < 1e-14);
        let p2 = PotentialSpec::flory_huggins(2.0);
        assert_eq!(p2.f_value(0.0).unwrap(), 0.0);
        let p1 = PotentialSpec::flory_huggins(1.0);
        assert!((p1.f_value(0.5).unwrap() - (3.0_f64.ln() - 0.5)).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..100 {
            let r: f64 = rng.gen_range(-0.999..0.999);
            let lhs = p1.f_value(r).unwrap() + p1.lambda * r - p1.beta(r).unwrap();
            assert!(lhs.abs() <= 1e-14 * (1.0 + p1.beta(r).unwrap().abs()));
        }
    }

    #[test]
    fn resolvent_forward_values() {
        let p = fh();
        assert_eq!(p.resolvent(1.0, 0.0).unwrap(), 0.0);
        let y = 0.5 + 3.0_f64.ln();
        let x = p.resolvent(1.0, y).unwrap();
        assert!((x - 0.5).abs() < 1e-12);
        // residual check wherever evaluating beta at the rounded solution is
        // well conditioned (solution within [-0.999, 0.999]; beyond that the
        // ulp spacing near 1 dominates any re-evaluated residual)
        let edge = p.beta(0.999).unwrap();
        for tau in [1e-4, 1e-2, 1.0, 50.0] {
            for y in [0.0, -0.3, 0.7, -(0.999 + tau * edge), 0.999 + tau * edge] {
                let x = p.resolvent(tau, y).unwrap();
                assert!(x.abs() < 1.0, "resolvent left the open interval");
                let res = x + tau * p.beta(x).unwrap() - y;
                assert!(res.abs() <= 1e-12 * y.abs().max(1.0), "residual {res:.3e}");
            }
        }
        // saturating arguments still land strictly inside
        for y in [-1e9, 1e9] {
            let x = p.resolvent(1e-6, y).unwrap();
            assert!(x.abs() < 1.0);
        }
    }

    #[test]
    fn resolvent_is_nonexpansive_and_monotone() {
        let p = fh();
        let q = PotentialSpec::new(PotentialKind::DoubleObstacleSmoothed, 0.0, 1e-4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for spec in [&p, &q] {
            for _ in 0..300 {
                let y1: f64 = rng.gen_range(-20.0..20.0);
                let y2: f64 = rng.gen_range(-20.0..20.0);
                let tau: f64 = rng.gen_range(1e-4..10.0);
                let x1 = spec.resolvent(tau, y1).unwrap();
                let x2 = spec.resolvent(tau, y2).unwrap();
                assert!((x1 - x2).abs() <= (y1 - y2).abs() + 1e-12);
                if y1 > y2 {
                    assert!(x1 >= x2 - 1e-12);
                }
            }
        }
    }

    #[test]
    fn yosida_converges_to_beta_and_is_dominated() {
        let p = fh();
        assert_eq!(p.yosida(1e-6, 0.0).unwrap(), 0.0);
        let approx = p.yosida(1e-6, 0.5).unwrap();
        assert!((approx - 3.0_f64.ln()).abs() < 1e-4);
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..200 {
            let r: f64 = rng.gen_range(-0.99..0.99);
            let eps: f64 = rng.gen_range(1e-6..1.0);
            let be = p.yosida(eps, r).unwrap();
            let b = p.beta(r).unwrap();
            assert!(
                be.abs() <= b.abs() + 1e-10,
                "Yosida must be dominated by beta"
            );
            assert!(be * b >= -1e-12, "same sign");
        }
    }

    #[test]
    fn tabulated_potential_round_trip() {
        // tabulate Flory-Huggins beta and check the machinery agrees closely
        let nodes: Vec<f64> = (0..401).map(|i| -0.98 + 1.96 * i as f64 / 400.0).collect();
        let fhspec = fh();
        let beta: Vec<f64> = nodes.iter().map(|&r| fhspec.beta(r).unwrap()).collect();
        let p = PotentialSpec::new(
            PotentialKind::CustomTabulated {
                r: nodes.clone(),
                beta,
            },
            0.0,
            1e-4,
        )
        .unwrap();
        assert!((p.beta(0.5).unwrap() - 3.0_f64.ln()).abs() < 1e-4);
        assert!((p.beta_hat(0.5).unwrap() - fhspec.beta_hat(0.5).unwrap()).abs() < 1e-4);
        // resolvent lands exactly on the table under extreme pull
        assert_eq!(p.resolvent(1.0, 1e9).unwrap(), *nodes.last().unwrap());
        let x = p.resolvent(0.7, 0.9).unwrap();
        let res = x + 0.7 * p.beta(x).unwrap() - 0.9;
        assert!(res.abs() < 1e-12);
    }

    #[test]
    fn tabulated_rejects_bad_tables() {
        let mk = |r: Vec<f64>, b: Vec<f64>| {
            PotentialSpec::new(PotentialKind::CustomTabulated { r, beta: b }, 0.0, 1e-4)
        };
        assert!(mk(vec![-0.5, 0.0, 0.5], vec![-1.0, 0.0, -0.5]).is_err()); // not monotone
        assert!(mk(vec![0.1, 0.5], vec![0.0, 1.0]).is_err()); // misses 0
        assert!(mk(vec![-0.5, -0.5, 0.5], vec![-1.0, 0.0, 1.0]).is_err()); // not increasing
        assert!(mk(vec![-1.5, 0.0, 0.5], vec![-1.0, 0.0, 1.0]).is_err()); // outside [-1,1]
        assert!(mk(vec![-0.5, 0.0, 0.5], vec![-1.0, 0.5, 1.0]).is_err()); // beta(0) != 0
    }

    #[test]
    fn coefficient_eval_families() {
        let c = CoeffSpec::Constant(1.0);
        assert_eq!(c.eval(3.0, 0.2).unwrap(), 1.0);
        let s = CoeffSpec::Saturating {
            lo: 1.0,
            hi: 2.0,
            scale: 1.0,
        };
        assert!((s.eval(1.0, 0.0).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(s.eval(0.0, 0.0).unwrap(), 1.0);
        assert!(s.eval(-0.1, 0.0).is_err());
        assert!(s.eval(1.0, 1.5).is_err());
        assert!(CoeffSpec::Constant(0.0).validate().is_err());
        assert!(CoeffSpec::Saturating {
            lo: 2.0,
            hi: 1.0,
            scale: 1.0
        }
        .validate()
        .is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        for _ in 0..10_000 {
            let sigma: f64 = rng.gen_range(0.0..50.0);
            let phi: f64 = rng.gen_range(-1.0..1.0);
            let v = s.eval(sigma, phi).unwrap();
            let (lo, hi) = s.bounds();
            assert!((lo..=hi).contains(&v));
        }
    }
}
