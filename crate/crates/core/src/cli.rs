//! Command-line front end. [`run`] is the whole program minus process exit,
//! so tests drive it in-process.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::asymptotics::{
    asymptotic_law, centered_oracle, drifted_internals, drifted_oracle, predict, relative_gap,
    tilting_identity_check, CenteredAnalysis,
};
use crate::chain::{
    n_step_table, return_probabilities, verify_first_reflection_identity, verify_ladder_factorizations,
};
use crate::error::{Error, Result};
use crate::fluctuation::descent_joint_table;
use crate::law::{LatticeLaw, Regime, DRIFT_TOL};
use crate::montecarlo::{estimate_grid, estimate_nu, simulate, terminal_estimates, SimConfig};
use crate::numeric::format_significant;
use crate::reflection::{doeblin_kappa, stationary_nu};
use crate::wiener_hopf::{default_depth, factorize_at, ladder_laws, slopes};

const CSV_DIGITS: usize = 12;

#[derive(Debug, Parser)]
#[command(name = "reflectwalk", version, about = "Return probabilities of the reflected random walk")]
pub struct Cli {
    /// Write the run manifest to this file instead of standard error.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Hypotheses, moments and the tilt minimizing the generating function.
    Analyze {
        #[arg(long)]
        law: PathBuf,
    },
    /// Ladder laws, potentials and singularity slopes (of the tilted law
    /// when the input drifts).
    Ladder {
        #[arg(long)]
        law: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Also report dynamic-programming partial sums through this horizon.
        #[arg(long)]
        oracle: Option<usize>,
        /// Number of potential entries to print.
        #[arg(long, default_value_t = 10)]
        depth: usize,
    },
    /// Exact law of X_n from a dynamic program, as CSV.
    Exact {
        #[arg(long)]
        law: PathBuf,
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long)]
        n: usize,
        /// Only print the row for time n.
        #[arg(long)]
        final_only: bool,
    },
    /// Asymptotic constant with its extrapolation oracle.
    Constants {
        #[arg(long)]
        law: PathBuf,
        #[arg(long, default_value_t = 0)]
        x: usize,
        #[arg(long)]
        y: usize,
        /// Oracle horizon (default 4000 centered, 400 drifted).
        #[arg(long)]
        oracle_n: Option<usize>,
        #[arg(long)]
        dump_internals: bool,
    },
    /// Exact, predicted and simulated probabilities on a grid of times, as CSV.
    Compare {
        #[arg(long)]
        law: PathBuf,
        #[arg(long, default_value_t = 0)]
        x: usize,
        #[arg(long)]
        y: usize,
        #[arg(long, value_delimiter = ',', default_value = "25,50,100,200,400")]
        grid: Vec<usize>,
        #[arg(long, default_value_t = 20_000)]
        paths: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Monte Carlo estimates.
    Simulate {
        #[arg(long)]
        law: PathBuf,
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        paths: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Reflections discarded per path before counting targets.
        #[arg(long, default_value_t = 0)]
        burn_in: u64,
    },
    /// Identity and oracle checks with a pass/fail summary.
    Validate {
        #[arg(long)]
        law: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Analyze { .. } => "analyze",
            Command::Ladder { .. } => "ladder",
            Command::Exact { .. } => "exact",
            Command::Constants { .. } => "constants",
            Command::Compare { .. } => "compare",
            Command::Simulate { .. } => "simulate",
            Command::Validate { .. } => "validate",
        }
    }

    fn law_path(&self) -> &Path {
        match self {
            Command::Analyze { law }
            | Command::Ladder { law, .. }
            | Command::Exact { law, .. }
            | Command::Constants { law, .. }
            | Command::Compare { law, .. }
            | Command::Simulate { law, .. }
            | Command::Validate { law } => law,
        }
    }
}

#[derive(Debug, Serialize)]
struct RunManifest {
    command: &'static str,
    law_digest: String,
    parameters: Value,
    version: &'static str,
    wall_time_s: f64,
    stdout_sha256: String,
    exit_code: i32,
}

enum Outcome {
    Success(String),
    ValidationFailed(String),
}

fn load_law(path: &Path) -> Result<LatticeLaw> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidLaw(format!("cannot read {}: {e}", path.display())))?;
    LatticeLaw::from_json_str(&text).map_err(|e| match e {
        Error::InvalidLaw(msg) => Error::InvalidLaw(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn csv(x: f64) -> String {
    format_significant(x, CSV_DIGITS)
}

/// Runs the program on `args` (including the program name) and returns the
/// exit code: 0 success, 1 usage or input error, 2 failed validation.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let started = Instant::now();
    let law = match load_law(cli.command.law_path()) {
        Ok(law) => law,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
    };
    let (code, stdout) = match execute(&cli.command, &law) {
        Ok(Outcome::Success(s)) => (0, s),
        Ok(Outcome::ValidationFailed(s)) => (2, s),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            (1, String::new())
        }
    };
    let _ = out.write_all(stdout.as_bytes());

    let manifest = RunManifest {
        command: cli.command.name(),
        law_digest: law.digest(),
        parameters: serde_json::to_value(&cli.command).expect("serializable"),
        version: env!("CARGO_PKG_VERSION"),
        wall_time_s: started.elapsed().as_secs_f64(),
        stdout_sha256: hex::encode(Sha256::digest(stdout.as_bytes())),
        exit_code: code,
    };
    let line = serde_json::to_string(&manifest).expect("serializable");
    match &cli.manifest {
        Some(path) => {
            if let Err(e) = std::fs::write(path, format!("{line}\n")) {
                let _ = writeln!(err, "error: cannot write manifest {}: {e}", path.display());
                return 1;
            }
        }
        None => {
            let _ = writeln!(err, "{line}");
        }
    }
    code
}

fn execute(command: &Command, law: &LatticeLaw) -> Result<Outcome> {
    match command {
        Command::Analyze { .. } => analyze(law).map(Outcome::Success),
        Command::Ladder {
            format, oracle, depth, ..
        } => ladder(law, *format, *oracle, *depth).map(Outcome::Success),
        Command::Exact {
            start, n, final_only, ..
        } => exact(law, *start, *n, *final_only).map(Outcome::Success),
        Command::Constants {
            x,
            y,
            oracle_n,
            dump_internals,
            ..
        } => constants(law, *x, *y, *oracle_n, *dump_internals).map(Outcome::Success),
        Command::Compare {
            x,
            y,
            grid,
            paths,
            seed,
            ..
        } => compare(law, *x, *y, grid, *paths, *seed).map(Outcome::Success),
        Command::Simulate {
            start,
            n,
            paths,
            seed,
            burn_in,
            ..
        } => simulate_cmd(law, *start, *n, *paths, *seed, *burn_in).map(Outcome::Success),
        Command::Validate { .. } => validate(law),
    }
}

fn masses_json(law: &LatticeLaw) -> Value {
    Value::Array(
        law.support_window()
            .map(|(k, m)| json!({"k": k, "mass": m}))
            .collect(),
    )
}

fn analyze(law: &LatticeLaw) -> Result<String> {
    let moments = law.moments();
    let report = law.check_hypotheses(DRIFT_TOL);
    let tilt = law.minimize_mgf()?;
    Ok(json_text(&json!({
        "law": masses_json(law),
        "digest": law.digest(),
        "moments": moments,
        "hypotheses": report,
        "passes": report.passes(),
        "tilt": tilt,
    })))
}

/// The law the ladder machinery runs on: the input if centered, else its tilt.
fn working_law(law: &LatticeLaw) -> Result<(LatticeLaw, Option<f64>)> {
    let report = law.check_hypotheses(DRIFT_TOL);
    report.require()?;
    if report.regime == Regime::Centered {
        Ok((law.clone(), None))
    } else {
        let (tilted, tilt) = law.centered()?;
        Ok((tilted, Some(tilt.r0)))
    }
}

fn ladder(law: &LatticeLaw, format: Format, oracle: Option<usize>, depth: usize) -> Result<String> {
    let (work, r0) = working_law(law)?;
    let l = ladder_laws(&work, default_depth(&work, depth))?;
    let t = slopes(&work, &l)?;
    let a = l.a();
    let oracle_sums = match oracle {
        Some(n) => {
            let d = descent_joint_table(&work, n.max(1))?;
            Some(d.iter().map(|s| s.coeffs().iter().sum::<f64>()).collect::<Vec<f64>>())
        }
        None => None,
    };
    let depth = depth.min(l.depth());
    match format {
        Format::Json => {
            let mut v = json!({
                "law_used": if r0.is_some() { "tilted" } else { "input" },
                "r0": r0.unwrap_or(1.0),
                "sigma": l.sigma,
                "mean_ladder_minus": l.mean_ladder_minus,
                "factorization_residual": l.residual,
                "mu_minus": (1..=a).map(|w| json!({"k": -(w as i64), "mass": l.mu_minus[w - 1]})).collect::<Vec<_>>(),
                "mu_plus": l.mu_plus.iter().enumerate().map(|(j, m)| json!({"k": j, "mass": m})).collect::<Vec<_>>(),
                "u_minus": &l.u_minus[..=depth],
                "u_plus": &l.u_plus[..=depth],
                "slopes": {
                    "method": t.method,
                    "t_minus": t.t_minus,
                    "t_plus": t.t_plus,
                    "u_minus": &t.u_minus[..=depth],
                    "u_plus": &t.u_plus[..=depth],
                    "verified_window": t.verified_window,
                    "max_discrepancy": t.max_discrepancy,
                },
            });
            if let (Some(n), Some(sums)) = (oracle, &oracle_sums) {
                v["oracle"] = json!({
                    "n_max": n,
                    "mu_minus_partial": sums,
                    "gap": sums.iter().zip(&l.mu_minus).map(|(s, m)| m - s).collect::<Vec<f64>>(),
                });
            }
            Ok(json_text(&v))
        }
        Format::Csv => {
            let mut s = String::from("quantity,index,value\n");
            let mut row = |q: &str, i: i64, v: f64| s.push_str(&format!("{q},{i},{}\n", csv(v)));
            for w in 1..=a {
                row("mu_minus", -(w as i64), l.mu_minus[w - 1]);
            }
            for (j, &m) in l.mu_plus.iter().enumerate() {
                row("mu_plus", j as i64, m);
            }
            for k in 0..=depth {
                row("u_minus", -(k as i64), l.u_minus[k]);
            }
            for m in 0..=depth {
                row("u_plus", m as i64, l.u_plus[m]);
            }
            for w in 1..=a {
                row("slope_t_minus", -(w as i64), t.t_minus[w - 1]);
            }
            for (j, &v) in t.t_plus.iter().enumerate() {
                row("slope_t_plus", j as i64, v);
            }
            for k in 0..=depth {
                row("slope_u_minus", -(k as i64), t.u_minus[k]);
            }
            for m in 0..=depth {
                row("slope_u_plus", m as i64, t.u_plus[m]);
            }
            if let Some(sums) = &oracle_sums {
                for (w, &p) in sums.iter().enumerate() {
                    row("oracle_mu_minus", -(w as i64) - 1, p);
                }
            }
            Ok(s)
        }
    }
}

fn exact(law: &LatticeLaw, start: usize, n: usize, final_only: bool) -> Result<String> {
    let table = n_step_table(law, start, n)?;
    let mut s = String::from("n,y,probability\n");
    let first = if final_only { n } else { 0 };
    for step in first..=n {
        for (y, &p) in table.row(step).iter().enumerate() {
            if p > 0.0 {
                s.push_str(&format!("{step},{y},{}\n", csv(p)));
            }
        }
    }
    Ok(s)
}

fn constants(law: &LatticeLaw, x: usize, y: usize, oracle_n: Option<usize>, dump: bool) -> Result<String> {
    let asym = asymptotic_law(law, x, y)?;
    let oracle = match asym.regime {
        Regime::Centered => centered_oracle(law, x, y, oracle_n.unwrap_or(4000))?,
        _ => drifted_oracle(law, asym.rho, x, y, oracle_n.unwrap_or(400))?,
    };
    let mut v = json!({
        "regime": asym.regime,
        "rho": asym.rho,
        "beta": asym.beta,
        "C": asym.constant,
        "oracle_estimate": oracle.estimate,
        "oracle_n": oracle.n_max,
        "rel_gap": relative_gap(asym.constant, oracle.estimate),
        "x": x,
        "y": y,
        "provenance": asym.provenance,
    });
    if dump {
        v["internals"] = internals(law, x, y)?;
    }
    Ok(json_text(&v))
}

fn internals(law: &LatticeLaw, x: usize, y: usize) -> Result<Value> {
    let (work, _) = working_law(law)?;
    let x_max = x.max(work.a());
    let analysis = CenteredAnalysis::new(&work, x_max, y)?;
    let column = analysis.column(y)?;
    let mut v = json!({
        "law_used": if law.check_hypotheses(DRIFT_TOL).regime == Regime::Centered { "input" } else { "tilted" },
        "r_rows": analysis.core.r_rows,
        "nu": analysis.core.nu,
        "doeblin": analysis.core.doeblin,
        "r_tilde": analysis.core.r_tilde,
        "nu_r_tilde_h": analysis.core.nu_r_tilde_h(),
        "e_column": column,
    });
    if law.check_hypotheses(DRIFT_TOL).regime == Regime::PositiveDrift {
        let (d, _) = drifted_internals(law, y, x)?;
        v["conjugated"] = serde_json::to_value(&d).expect("serializable");
    }
    Ok(v)
}

fn compare(law: &LatticeLaw, x: usize, y: usize, grid: &[usize], paths: u64, seed: u64) -> Result<String> {
    let asym = asymptotic_law(law, x, y)?;
    let n_max = grid.iter().copied().max().unwrap_or(0);
    let exact = return_probabilities(law, x, &[y], n_max);
    let config = SimConfig {
        law: law.clone(),
        start: x,
        horizon: n_max,
        paths,
        seed,
    };
    let mc = estimate_grid(&config, y, grid)?;
    let mut s = String::from("n,exact,predicted,mc,mc_stderr\n");
    for (&n, e) in grid.iter().zip(&mc) {
        let predicted = if n == 0 { f64::NAN } else { predict(&asym, n as u64) };
        s.push_str(&format!(
            "{n},{},{},{},{}\n",
            csv(exact[n][0]),
            csv(predicted),
            csv(e.point),
            csv(e.stderr)
        ));
    }
    Ok(s)
}

fn simulate_cmd(law: &LatticeLaw, start: usize, n: usize, paths: u64, seed: u64, burn_in: u64) -> Result<String> {
    let config = SimConfig {
        law: law.clone(),
        start,
        horizon: n,
        paths,
        seed,
    };
    let result = simulate(&config)?;
    let terminal: Vec<Value> = terminal_estimates(&result)
        .iter()
        .enumerate()
        .filter(|(_, e)| e.point > 0.0)
        .map(|(y, e)| json!({"y": y, "point": e.point, "stderr": e.stderr}))
        .collect();
    let nu = match estimate_nu(&config, burn_in) {
        Ok(nu) => serde_json::to_value(nu).expect("serializable"),
        Err(Error::NoReflectionsObserved) => Value::Null,
        Err(e) => return Err(e),
    };
    Ok(json_text(&json!({
        "start": start,
        "n": n,
        "paths": paths,
        "seed": seed,
        "terminal": terminal,
        "never_reflected": result.never_reflected,
        "reflections": result.reflections,
        "first_reflection": result.first_reflection,
        "reflection_targets": nu,
    })))
}

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    value: f64,
    threshold: f64,
    passed: bool,
}

fn below(name: impl Into<String>, value: f64, threshold: f64) -> Check {
    Check {
        name: name.into(),
        value,
        threshold,
        passed: value < threshold,
    }
}

fn above(name: impl Into<String>, value: f64, threshold: f64) -> Check {
    Check {
        name: name.into(),
        value,
        threshold,
        passed: value >= threshold,
    }
}

fn validate(law: &LatticeLaw) -> Result<Outcome> {
    let (work, _) = working_law(law)?;
    let mut checks = Vec::new();

    let mut wh: f64 = 0.0;
    for s in [0.5, 0.9, 0.99, 1.0] {
        wh = wh.max(factorize_at(&work, s)?.residual);
    }
    checks.push(below("wiener_hopf_residual", wh, 1e-10));

    let (mut first, mut exc, mut refl): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for x in [0, 1, 3] {
        for y in [0, 1, 2] {
            first = first.max(verify_first_reflection_identity(law, x, y, 60)?);
            let (e, r) = verify_ladder_factorizations(law, x, y, 60)?;
            exc = exc.max(e);
            refl = refl.max(r.unwrap_or(0.0));
        }
    }
    checks.push(below("first_reflection_identity", first, 1e-12));
    checks.push(below("excursion_factorization", exc, 1e-12));
    checks.push(below("reflection_factorization", refl, 1e-12));

    let table = n_step_table(law, 0, 200)?;
    let stoch = (0..=200).map(|n| (table.row_sum(n) - 1.0).abs()).fold(0.0, f64::max);
    checks.push(below("n_step_stochasticity", stoch, 1e-12));

    let analysis = CenteredAnalysis::new(&work, 50, 2)?;
    checks.push(below("slope_discrepancy", analysis.slopes.max_discrepancy, 1e-3));
    checks.push(below("r_tilde_discrepancy", analysis.core.r_tilde.max_discrepancy, 1e-3));
    let nu = stationary_nu(&analysis.ladder)?;
    checks.push(below("stationarity_residual", nu.residual, 1e-10));
    let doeblin = doeblin_kappa(&analysis.ladder, 50);
    checks.push(above("doeblin_slack", doeblin.min_slack, -1e-14));
    checks.push(above("doeblin_kappa", doeblin.kappa, f64::MIN_POSITIVE));

    let asym = asymptotic_law(law, 0, 0)?;
    let (oracle, tol) = match asym.regime {
        Regime::Centered => (centered_oracle(law, 0, 0, 4000)?, 0.02),
        _ => (drifted_oracle(law, asym.rho, 0, 0, 400)?, 0.05),
    };
    checks.push(below("constant_vs_oracle", relative_gap(asym.constant, oracle.estimate), tol));

    checks.push(below("tilting_identity", tilting_identity_check(law, 6, 100, 0)?, 1e-14));

    let failed = checks.iter().filter(|c| !c.passed).count();
    let text = json_text(&json!({
        "digest": law.digest(),
        "checks": checks,
        "passed": checks.len() - failed,
        "failed": failed,
    }));
    Ok(if failed == 0 {
        Outcome::Success(text)
    } else {
        Outcome::ValidationFailed(text)
    })
}
