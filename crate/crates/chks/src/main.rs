use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use chks::attractor::{self, Trajectory};
use chks::config::{self, InitConfig, RunConfig};
use chks::report;
use chks::snapshot;
use chks::spectral::SpectralPlan;
use chks::stepper::{self, State};
use chks::verify::{self, VerifyLevel};

/// Simulator and verification laboratory for a Cahn-Hilliard model coupled
/// to a Keller-Segel nutrient equation with logistic degradation.
#[derive(Parser)]
#[command(name = "chks", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single trajectory from a configuration file.
    Run {
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the sampler seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (unused for a single trajectory).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run an ensemble and aggregate envelopes, fits, and summaries.
    Ensemble {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: trajectories, capped by hardware).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run a built-in verification suite: operators | steppers | estimates.
    Verify { level: String },
}

// exit codes: 0 ok, 1 validation, 2 runtime/step failure, 3 verification failure
const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VERIFY: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            config, out, seed, ..
        } => cmd_run(&config, out, seed),
        Command::Ensemble {
            config,
            out,
            seed,
            workers,
        } => cmd_ensemble(&config, out, seed, workers),
        Command::Verify { level } => cmd_verify(&level),
    };
    match code {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

type CmdResult = Result<(), (u8, String)>;

fn load_config(
    path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    workers: Option<usize>,
) -> Result<(RunConfig, String), (u8, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        (
            EXIT_VALIDATION,
            format!("cannot read {}: {e}", path.display()),
        )
    })?;
    let mut cfg = config::parse_config(&text).map_err(|e| (EXIT_VALIDATION, e.to_string()))?;
    if let Some(dir) = out {
        cfg.out_dir = dir;
    }
    if let Some(s) = seed {
        if let InitConfig::Sampler { ref mut seed, .. } = cfg.init {
            *seed = s;
        }
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    let text = config::serialize(&cfg);
    Ok((cfg, text))
}

fn prepare_out_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir).map_err(|e| {
        (
            EXIT_VALIDATION,
            format!("output dir {}: {e}", dir.display()),
        )
    })?;
    // writability probe
    let probe = dir.join(".write_probe");
    std::fs::write(&probe, b"ok").map_err(|e| {
        (
            EXIT_VALIDATION,
            format!("output dir {} not writable: {e}", dir.display()),
        )
    })?;
    let _ = std::fs::remove_file(&probe);
    Ok(())
}

fn manifest_text(cfg_text: &str, cfg: &RunConfig, extra: &[String]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(cfg_text.as_bytes());
    let hash = hasher.finalize();
    let hash_hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    let compat = cfg
        .model_params()
        .map(|p| stepper::check_compatibility(&p))
        .map(|c| {
            format!(
                "{} (margin {} = 3 h_min - chi^2)",
                if c.pass { "pass" } else { "FAIL" },
                c.margin
            )
        })
        .unwrap_or_else(|e| format!("unavailable ({e})"));
    let mut s = String::new();
    s.push_str("# chks manifest\n");
    s.push_str(&format!("config_sha256 = {hash_hex}\n"));
    s.push_str(&format!("compatibility = {compat}\n"));
    for line in extra {
        s.push_str(line);
        s.push('\n');
    }
    s.push_str("\n# configuration echo\n");
    s.push_str(cfg_text);
    s
}

fn initial_state(cfg: &RunConfig, plan: &SpectralPlan) -> Result<State, (u8, String)> {
    match &cfg.init {
        InitConfig::Sampler { .. } => {
            let spec = cfg
                .ensemble_spec()
                .map_err(|e| (EXIT_VALIDATION, e.to_string()))?;
            let one = attractor::EnsembleSpec {
                n_samples: 1,
                ..spec
            };
            let pot = cfg
                .potential_spec()
                .map_err(|e| (EXIT_VALIDATION, e.to_string()))?;
            attractor::sample_initial_ball(plan, &pot, &one)
                .map(|mut v| v.remove(0))
                .map_err(|e| (EXIT_VALIDATION, e.to_string()))
        }
        InitConfig::Files { phi, sigma } => {
            let (phi, _) =
                snapshot::read_snapshot(phi).map_err(|e| (EXIT_VALIDATION, e.to_string()))?;
            let (sigma, _) =
                snapshot::read_snapshot(sigma).map_err(|e| (EXIT_VALIDATION, e.to_string()))?;
            let grid = cfg.grid().map_err(|e| (EXIT_VALIDATION, e.to_string()))?;
            if phi.grid() != grid || sigma.grid() != grid {
                return Err((
                    EXIT_VALIDATION,
                    "snapshot grids do not match the [grid] section".into(),
                ));
            }
            State::new(phi, sigma, 0.0).map_err(|e| (EXIT_VALIDATION, e.to_string()))
        }
    }
}

fn write_trajectory(dir: &Path, cfg: &RunConfig, traj: &Trajectory) -> CmdResult {
    std::fs::create_dir_all(dir).map_err(|e| (EXIT_RUNTIME, format!("{}: {e}", dir.display())))?;
    if cfg.csv {
        report::write_report_csv(&dir.join("report.csv"), &traj.reports)
            .map_err(|e| (EXIT_RUNTIME, e.to_string()))?;
    }
    if cfg.snapshots {
        for (i, s) in traj.snapshots.iter().enumerate() {
            snapshot::write_snapshot(&dir.join(format!("phi_{i:06}.chks")), &s.phi, s.t)
                .map_err(|e| (EXIT_RUNTIME, e.to_string()))?;
            snapshot::write_snapshot(&dir.join(format!("sigma_{i:06}.chks")), &s.sigma, s.t)
                .map_err(|e| (EXIT_RUNTIME, e.to_string()))?;
        }
    }
    Ok(())
}

fn cmd_run(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> CmdResult {
    let (cfg, cfg_text) = load_config(path, out, seed, None)?;
    prepare_out_dir(&cfg.out_dir)?;
    let grid = cfg.grid().map_err(|e| (EXIT_VALIDATION, e.to_string()))?;
    let plan = SpectralPlan::new(grid);
    let params = cfg
        .model_params()
        .map_err(|e| (EXIT_VALIDATION, e.to_string()))?;
    let initial = initial_state(&cfg, &plan)?;

    let traj =
        attractor::run_trajectory(&plan, initial, &params, cfg.t_end, cfg.stride, cfg.stepper);
    let extra = vec![
        format!("kind = run"),
        format!(
            "status = {}",
            match &traj.failure {
                None => "completed".to_string(),
                Some((t, why)) => format!("failed at t = {t}: {why}"),
            }
        ),
        format!("steps = {}", traj.reports.len().saturating_sub(1)),
    ];
    std::fs::write(
        cfg.out_dir.join("manifest.txt"),
        manifest_text(&cfg_text, &cfg, &extra),
    )
    .map_err(|e| (EXIT_RUNTIME, e.to_string()))?;
    write_trajectory(&cfg.out_dir, &cfg, &traj)?;
    match traj.failure {
        None => Ok(()),
        Some((t, why)) => Err((EXIT_RUNTIME, format!("trajectory failed at t = {t}: {why}"))),
    }
}

fn cmd_ensemble(
    path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    workers: Option<usize>,
) -> CmdResult {
    let (cfg, cfg_text) = load_config(path, out, seed, workers)?;
    prepare_out_dir(&cfg.out_dir)?;
    let grid = cfg.grid().map_err(|e| (EXIT_VALIDATION, e.to_string()))?;
    let plan = SpectralPlan::new(grid);
    let params = cfg
        .model_params()
        .map_err(|e| (EXIT_VALIDATION, e.to_string()))?;
    let spec = cfg
        .ensemble_spec()
        .map_err(|e| (EXIT_VALIDATION, e.to_string()))?;
    let hw = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let workers = if cfg.workers == 0 {
        spec.n_samples.min(hw)
    } else {
        cfg.workers
    };

    let trajectories = attractor::run_ensemble(&plan, &params, &spec, cfg.stepper, workers)
        .map_err(|e| (EXIT_VALIDATION, e.to_string()))?;

    let mut extra = vec![
        "kind = ensemble".to_string(),
        format!("workers = {workers}"),
        format!("n_samples = {}", spec.n_samples),
    ];
    for (i, t) in trajectories.iter().enumerate() {
        let status = match &t.failure {
            None => "completed".to_string(),
            Some((time, why)) => format!("failed at t = {time}: {why}"),
        };
        extra.push(format!("traj_{i:02} = {status} (traj_{i:02}/report.csv)"));
    }

    for (i, t) in trajectories.iter().enumerate() {
        write_trajectory(&cfg.out_dir.join(format!("traj_{i:02}")), &cfg, t)?;
    }

    // aggregate envelopes over the common prefix of the report series
    let n = trajectories
        .iter()
        .map(|t| t.reports.len())
        .min()
        .unwrap_or(0);
    if n > 0 {
        let times: Vec<f64> = trajectories[0].reports[..n].iter().map(|r| r.t).collect();
        let mut energy_env = vec![f64::NEG_INFINITY; n];
        let mut radius_env = vec![f64::NEG_INFINITY; n];
        for t in &trajectories {
            for i in 0..n {
                energy_env[i] = energy_env[i].max(t.reports[i].energy);
                radius_env[i] = radius_env[i].max(t.reports[i].product_radius);
            }
        }
        std::fs::write(
            cfg.out_dir.join("envelope.csv"),
            report::envelope_csv(&times, &energy_env, &radius_env),
        )
        .map_err(|e| (EXIT_RUNTIME, e.to_string()))?;
    }
    match attractor::absorbing_fit(&trajectories) {
        Ok(fit) => {
            let text = format!(
                "conclusive = {}\nkappa_hat = {}\nc_hat = {}\ne0_hat = {}\nr1_hat = {}\nt1_hat = {}\nre_exit = {}\n",
                fit.conclusive,
                report::fmt_f64(fit.kappa_hat),
                report::fmt_f64(fit.c_hat),
                report::fmt_f64(fit.e0_hat),
                report::fmt_f64(fit.r1_hat),
                report::fmt_f64(fit.t1_hat),
                fit.re_exit
            );
            std::fs::write(cfg.out_dir.join("fit.txt"), text)
                .map_err(|e| (EXIT_RUNTIME, e.to_string()))?;
        }
        Err(e) => extra.push(format!("fit = unavailable ({e})")),
    }
    std::fs::write(
        cfg.out_dir.join("manifest.txt"),
        manifest_text(&cfg_text, &cfg, &extra),
    )
    .map_err(|e| (EXIT_RUNTIME, e.to_string()))?;

    let failures: Vec<String> = trajectories
        .iter()
        .enumerate()
        .filter_map(|(i, t)| {
            t.failure
                .as_ref()
                .map(|(time, why)| format!("traj_{i:02} at t = {time}: {why}"))
        })
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err((
            EXIT_RUNTIME,
            format!(
                "{} trajectories failed: {}",
                failures.len(),
                failures.join("; ")
            ),
        ))
    }
}

fn cmd_verify(level: &str) -> CmdResult {
    let level = match level {
        "operators" => VerifyLevel::Operators,
        "steppers" => VerifyLevel::Steppers,
        "estimates" => VerifyLevel::Estimates,
        other => {
            return Err((
                EXIT_VALIDATION,
                format!("unknown level '{other}' (expected operators | steppers | estimates)"),
            ))
        }
    };
    let results = verify::run_level(level);
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{}/{} checks passed", results.len() - failed, results.len());
    if failed == 0 {
        Ok(())
    } else {
        Err((EXIT_VERIFY, format!("{failed} verification checks failed")))
    }
}
