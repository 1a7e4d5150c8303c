//! Command-line front end.
//!
//! Settings come from an optional flat JSON file (`--config`) overridden by
//! flags. Every JSON artifact embeds the resolved settings; CSV artifacts get
//! a JSON sidecar. Exit codes: 0 pass, 1 tolerance failure, 2 usage or
//! configuration error, 3 diverged trajectory.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::distrib::{self, GridDistribution};
use crate::error::Error;
use crate::expr::{parse, TestFunction};
use crate::fokker_planck::{
    admissible_dt, cross_validate, fp_solve, ito_residual, weak_form_residual, FpParams,
};
use crate::grid::{Axis, GridFunction, GridLevel};
use crate::lemmas::verify_lemmas;
use crate::noise::{NoiseAlphabet, NoiseEnsemble, DEFAULT_CAP};
use crate::sde::{simulate_ensemble, solve_grid_ode, CauchyProblem, DensityAccumulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    Ito,
    Weakform,
    Crossval,
    Lemmas,
}

/// Resolved settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: u32,
    pub mode: Mode,
    pub samples: u64,
    pub seed: u64,
    pub f: Option<String>,
    pub h: Option<String>,
    pub phi: Option<String>,
    pub x0: f64,
    pub window: Option<f64>,
    pub slices: Option<Vec<f64>>,
    pub out: PathBuf,
    /// Worker count; never changes results, so it is not recorded.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
    pub levels: Option<Vec<u32>>,
    pub dx: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub tol: Option<f64>,
    pub dist: Option<String>,
    pub dist2: Option<String>,
    pub at: f64,
    pub time: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 8,
            mode: Mode::Exhaustive,
            samples: 100_000,
            seed: 0,
            f: None,
            h: None,
            phi: None,
            x0: 0.0,
            window: None,
            slices: None,
            out: PathBuf::from("."),
            threads: None,
            levels: None,
            dx: None,
            dt: None,
            t_end: None,
            tol: None,
            dist: None,
            dist2: None,
            at: 0.0,
            time: 0.5,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hypergrid", version, about = "Stochastic calculus on a finite grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate an ensemble and write the empirical density.
    Simulate,
    /// Check a result against its tolerance.
    Verify {
        #[arg(value_enum)]
        which: Check,
    },
    /// Residuals and solver distance across levels, with fitted decay rates.
    Convergence,
    /// Solve the Fokker-Planck equation by finite volumes.
    FpSolve,
    /// Pair a grid distribution with a test function.
    Pair,
    /// Compare two grid distributions on the default test family.
    Equivalent,
}

#[derive(Debug, Args)]
struct Flags {
    /// Grid level n (step 1/n).
    #[arg(long, global = true)]
    n: Option<u32>,
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Number of sampled paths.
    #[arg(long, global = true)]
    samples: Option<u64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Drift f(t,x).
    #[arg(long, global = true, allow_hyphen_values = true)]
    f: Option<String>,
    /// Diffusion h(t,x).
    #[arg(long, global = true, allow_hyphen_values = true)]
    h: Option<String>,
    /// Test function φ(t,x) built from bump envelopes.
    #[arg(long, global = true, allow_hyphen_values = true)]
    phi: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    x0: Option<f64>,
    /// Spatial half-width W of the window [-W, W).
    #[arg(long, global = true)]
    window: Option<f64>,
    /// Comma-separated times to store.
    #[arg(long, global = true, value_delimiter = ',')]
    slices: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Flat JSON file with any of the settings above.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Comma-separated levels for `convergence`.
    #[arg(long, global = true, value_delimiter = ',')]
    levels: Option<Vec<u32>>,
    /// Solver cell width.
    #[arg(long, global = true)]
    dx: Option<f64>,
    /// Solver time step (default: the largest stable one).
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    t_end: Option<f64>,
    /// Tolerance override for the checked quantity.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Distribution: dirac, split, dirac-derivative, or fn:<expr in x>.
    #[arg(long, global = true, allow_hyphen_values = true)]
    dist: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    dist2: Option<String>,
    /// Center of point distributions.
    #[arg(long, global = true, allow_hyphen_values = true)]
    at: Option<f64>,
    /// Time at which test functions are evaluated when pairing in space.
    #[arg(long, global = true)]
    time: Option<f64>,
}

enum Failure {
    Usage(String),
    Tolerance(String),
    Diverged(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Tolerance(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Diverged(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Tolerance(m) | Failure::Diverged(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Diverged { .. } => Failure::Diverged(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<crate::expr::ExprError> for Failure {
    fn from(e: crate::expr::ExprError) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = resolve(&cli.flags).and_then(|cfg| match cfg.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command, &cfg)),
            Err(e) => Err(Failure::Usage(format!("cannot build a pool of {t} threads: {e}"))),
        },
        None => dispatch(&cli.command, &cfg),
    });
    match outcome {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn resolve(flags: &Flags) -> std::result::Result<RunConfig, Failure> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::Usage(format!("invalid config {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    macro_rules! overlay {
        ($($field:ident),*) => {$(
            if let Some(v) = &flags.$field {
                cfg.$field = v.clone();
            }
        )*};
    }
    macro_rules! overlay_opt {
        ($($field:ident),*) => {$(
            if flags.$field.is_some() {
                cfg.$field = flags.$field.clone();
            }
        )*};
    }
    overlay!(n, mode, samples, seed, x0, out, at, time);
    overlay_opt!(f, h, phi, window, slices, threads, levels, dx, dt, t_end, tol, dist, dist2);
    Ok(cfg)
}

fn dispatch(command: &Command, cfg: &RunConfig) -> Outcome {
    match command {
        Command::Simulate => cmd_simulate(cfg),
        Command::Verify { which } => cmd_verify(cfg, *which),
        Command::Convergence => cmd_convergence(cfg),
        Command::FpSolve => cmd_fp_solve(cfg),
        Command::Pair => cmd_pair(cfg),
        Command::Equivalent => cmd_equivalent(cfg),
    }
}

fn level(cfg: &RunConfig, n: u32) -> std::result::Result<GridLevel, Failure> {
    Ok(match cfg.window {
        Some(w) => GridLevel::with_halfwidth_f64(n, w)?,
        None => GridLevel::new(n)?,
    })
}

fn ensemble(cfg: &RunConfig, level: GridLevel) -> std::result::Result<NoiseEnsemble, Failure> {
    Ok(match cfg.mode {
        Mode::Exhaustive => NoiseEnsemble::enumerate(level, NoiseAlphabet::white(), DEFAULT_CAP)?,
        Mode::Sampled => NoiseEnsemble::sample(level, NoiseAlphabet::white(), cfg.samples, cfg.seed)?,
    })
}

/// The problem from `--f`/`--h`; when `brownian` is set a missing
/// coefficient defaults to Brownian motion (`f = 0`, `h = 1`).
fn problem(cfg: &RunConfig, level: GridLevel, brownian: bool) -> std::result::Result<CauchyProblem, Failure> {
    let pick = |v: &Option<String>, flag: &str, default: &str| -> std::result::Result<String, Failure> {
        match v {
            Some(s) => Ok(s.clone()),
            None if brownian => Ok(default.to_string()),
            None => Err(Failure::Usage(format!("missing --{flag}\n\n{}", usage()))),
        }
    };
    let f = pick(&cfg.f, "f", "0")?;
    let h = pick(&cfg.h, "h", "1")?;
    Ok(CauchyProblem::from_sources(&f, &h, cfg.x0, level)?)
}

fn usage() -> String {
    use clap::CommandFactory;
    Cli::command().render_usage().to_string()
}

fn test_function(cfg: &RunConfig) -> std::result::Result<TestFunction, Failure> {
    Ok(match &cfg.phi {
        Some(s) => TestFunction::from_source(s)?,
        None => TestFunction::standard(),
    })
}

/// Grid time indices for `times`; with `snap` off they must lie on the grid.
fn time_indices(times: &[f64], n: u32, snap: bool) -> std::result::Result<Vec<usize>, Failure> {
    let nf = f64::from(n);
    times
        .iter()
        .map(|t| {
            let k = (t * nf).round();
            if !(0.0..=nf).contains(&k) || (!snap && (t * nf - k).abs() > 1e-9) {
                Err(Failure::Usage(format!("time {t} is not a grid time of level {n}")))
            } else {
                Ok(k as usize)
            }
        })
        .collect()
}

fn write_file(dir: &Path, name: &str, content: &str) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Outcome {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    write_file(dir, name, &(text + "\n"))
}

fn report_checks(checks: &[(String, bool)]) -> Outcome {
    for (name, ok) in checks {
        println!("{} {name}", if *ok { "PASS" } else { "FAIL" });
    }
    match checks.iter().find(|(_, ok)| !ok) {
        Some((name, _)) => Err(Failure::Tolerance(format!("tolerance failure: {name}"))),
        None => Ok(()),
    }
}

fn cmd_simulate(cfg: &RunConfig) -> Outcome {
    let level = level(cfg, cfg.n)?;
    let problem = problem(cfg, level, false)?;
    let ensemble = ensemble(cfg, level)?;
    let slices = match &cfg.slices {
        Some(ts) => time_indices(ts, cfg.n, false)?,
        None => (0..=cfg.n as usize).collect(),
    };
    let field = simulate_ensemble(&problem, &ensemble, || DensityAccumulator::new(level, &slices))?.finish();
    write_file(&cfg.out, "density.csv", &field.to_csv())?;
    write_json(
        &cfg.out,
        "density.json",
        &json!({ "config": cfg, "density": field.metadata(&problem, &ensemble) }),
    )
}

fn cmd_verify(cfg: &RunConfig, which: Check) -> Outcome {
    let level = level(cfg, cfg.n)?;
    let problem = problem(cfg, level, true)?;
    match which {
        Check::Lemmas => {
            if cfg.mode != Mode::Exhaustive {
                return Err(Failure::Usage("verify lemmas needs --mode exhaustive".into()));
            }
            let ensemble = ensemble(cfg, level)?;
            let tol = cfg.tol.unwrap_or(1e-10);
            let report = verify_lemmas(&problem, &ensemble, tol)?;
            write_json(&cfg.out, "lemmas.json", &json!({ "config": cfg, "report": report }))?;
            let mut checks = vec![(
                format!("{} exact identities within {tol:e} (max {:e})", report.checks.len(), report.max_relative_error),
                report.passed,
            )];
            checks.extend(report.failures().map(|c| (c.name.clone(), false)));
            report_checks(&checks)
        }
        Check::Weakform => {
            let ensemble = ensemble(cfg, level)?;
            let phi = test_function(cfg)?;
            let report = weak_form_residual(&problem, &ensemble, &phi)?;
            let tol = cfg.tol.unwrap_or(0.05);
            write_json(
                &cfg.out,
                "weakform.json",
                &json!({ "config": cfg, "tolerance": tol, "report": report }),
            )?;
            let mut checks = vec![
                (format!("residual |{:e}| <= {tol:e}", report.residual), report.residual.abs() <= tol),
                (
                    format!("decomposition error {:e} <= 1e-10", report.decomposition_error),
                    report.decomposition_error <= 1e-10,
                ),
            ];
            if ensemble.is_exhaustive() {
                checks.push((
                    format!("noise piece |{:e}| <= 1e-10", report.pieces.noise),
                    report.pieces.noise.abs() <= 1e-10,
                ));
            }
            report_checks(&checks)
        }
        Check::Ito => {
            let ensemble = ensemble(cfg, level)?;
            let phi = test_function(cfg)?;
            let tol = cfg.tol.unwrap_or(2.0 / f64::from(cfg.n).sqrt());
            let picks = ensemble.count().min(5);
            let mut reports = Vec::new();
            let mut checks = Vec::new();
            for i in 0..picks {
                let index = i * (ensemble.count() / picks);
                let tr = solve_grid_ode(&problem, Some(&ensemble.path(index)))?;
                let r = ito_residual(&phi, &tr, &problem)?;
                checks.push((format!("path {index}: max residual {:e} <= {tol:e}", r.max_abs), r.max_abs <= tol));
                checks.push((
                    format!("path {index}: max |dx/dt| {} <= n^(2/3) = {}", r.max_velocity, r.velocity_threshold),
                    !r.hypothesis_violated,
                ));
                reports.push(json!({ "path": index, "report": r }));
            }
            write_json(
                &cfg.out,
                "ito.json",
                &json!({ "config": cfg, "tolerance": tol, "ensemble": ensemble.descriptor(), "paths": reports }),
            )?;
            report_checks(&checks)
        }
        Check::Crossval => {
            let ensemble = ensemble(cfg, level)?;
            let times = cfg.slices.clone().unwrap_or_else(|| vec![0.5, 0.75, 1.0]);
            let ks = time_indices(&times, cfg.n, cfg.slices.is_none())?;
            let params = FpParams {
                halfwidth: level.halfwidth_f64(),
                dx: cfg.dx.unwrap_or(2.0 / f64::from(cfg.n)),
                dt: cfg.dt.unwrap_or(0.0),
                t_end: 1.0,
                slices: ks.iter().map(|k| level.coord(*k as i64)).collect(),
            };
            let report = cross_validate(&problem, &ensemble, &params)?;
            let tol = cfg.tol.unwrap_or(0.1);
            write_json(
                &cfg.out,
                "crossval.json",
                &json!({ "config": cfg, "tolerance": tol, "report": report }),
            )?;
            let checks: Vec<(String, bool)> = report
                .times
                .iter()
                .zip(&report.l1)
                .map(|(t, l1)| (format!("L1 at t = {t}: {l1:e} <= {tol:e}"), *l1 <= tol))
                .collect();
            report_checks(&checks)
        }
    }
}

/// Least-squares slope of `-ln|v|` against `ln n`; `None` if any value is 0.
pub fn decay_exponent(levels: &[u32], values: &[f64]) -> Option<f64> {
    if values.iter().any(|v| *v == 0.0 || !v.is_finite()) || levels.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = levels.iter().map(|n| f64::from(*n).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.abs().ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(-sxy / sxx)
}

fn cmd_convergence(cfg: &RunConfig) -> Outcome {
    let levels = cfg.levels.clone().unwrap_or_else(|| vec![16, 32, 64]);
    if levels.len() < 3 {
        return Err(Failure::Usage(format!(
            "convergence needs at least 3 levels, got {}",
            levels.len()
        )));
    }
    let phi = test_function(cfg)?;
    let mut csv = String::from("n,weakform_residual,ito_max_residual,l1_fp\n");
    let mut rows = Vec::new();
    let (mut weak, mut ito, mut l1) = (Vec::new(), Vec::new(), Vec::new());
    for &n in &levels {
        let level = level(cfg, n)?;
        let problem = problem(cfg, level, true)?;
        let ensemble = ensemble(cfg, level)?;
        let w = weak_form_residual(&problem, &ensemble, &phi)?;
        let path = NoiseEnsemble::sample(level, NoiseAlphabet::white(), 1, cfg.seed)?.path(0);
        let tr = solve_grid_ode(&problem, Some(&path))?;
        let r = ito_residual(&phi, &tr, &problem)?;
        let times = cfg.slices.clone().unwrap_or_else(|| vec![0.5, 0.75, 1.0]);
        let ks = time_indices(&times, n, true)?;
        let params = FpParams {
            halfwidth: level.halfwidth_f64(),
            dx: cfg.dx.unwrap_or(2.0 / f64::from(n)),
            dt: cfg.dt.unwrap_or(0.0),
            t_end: 1.0,
            slices: ks.iter().map(|k| level.coord(*k as i64)).collect(),
        };
        let cv = cross_validate(&problem, &ensemble, &params)?;
        csv.push_str(&format!("{n},{},{},{}\n", w.residual, r.max_abs, cv.max_l1));
        weak.push(w.residual);
        ito.push(r.max_abs);
        l1.push(cv.max_l1);
        rows.push(json!({
            "n": n,
            "weakform_residual": w.residual,
            "ito_max_residual": r.max_abs,
            "l1_fp": cv.max_l1,
            "ensemble": ensemble.descriptor(),
        }));
    }
    let exponents = json!({
        "weakform_residual": decay_exponent(&levels, &weak),
        "ito_max_residual": decay_exponent(&levels, &ito),
        "l1_fp": decay_exponent(&levels, &l1),
    });
    println!("decay exponents: {exponents}");
    write_file(&cfg.out, "convergence.csv", &csv)?;
    write_json(
        &cfg.out,
        "convergence.json",
        &json!({ "config": cfg, "rows": rows, "exponents": exponents }),
    )
}

fn cmd_fp_solve(cfg: &RunConfig) -> Outcome {
    let missing = |flag: &str| Failure::Usage(format!("missing --{flag}\n\n{}", usage()));
    let f = parse(cfg.f.as_deref().ok_or_else(|| missing("f"))?)?;
    let h = parse(cfg.h.as_deref().ok_or_else(|| missing("h"))?)?;
    let halfwidth = cfg.window.unwrap_or(8.0);
    let dx = cfg.dx.unwrap_or(1.0 / 64.0);
    let t_end = cfg.t_end.unwrap_or(1.0);
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => admissible_dt(&f, &h, halfwidth, dx, t_end)?,
    };
    let slices = cfg
        .slices
        .clone()
        .unwrap_or_else(|| (0..=8).map(|i| t_end * f64::from(i) / 8.0).collect());
    let params = FpParams {
        halfwidth,
        dx,
        dt,
        t_end,
        slices,
    };
    let sol = fp_solve(&f, &h, cfg.x0, &params)?;
    write_file(&cfg.out, "fp.csv", &sol.to_csv())?;
    let moments: Vec<_> = (0..sol.times.len())
        .map(|s| json!({ "t": sol.times[s], "mass": sol.mass[s], "mean": sol.mean(s), "variance": sol.variance(s) }))
        .collect();
    write_json(
        &cfg.out,
        "fp.json",
        &json!({
            "config": cfg,
            "f": sol.f, "h": sol.h, "x0": sol.x0, "halfwidth": sol.halfwidth,
            "dx": sol.dx, "dt": sol.dt, "steps": sol.steps,
            "max_mass_error": sol.max_mass_error, "min_value": sol.min_value,
            "slices": moments,
        }),
    )?;
    report_checks(&[
        (format!("mass error {:e} <= 1e-6", sol.max_mass_error), sol.max_mass_error <= 1e-6),
        (format!("min P {:e} >= -1e-12", sol.min_value), sol.min_value >= -1e-12),
    ])
}

fn distribution(spec: &str, level: GridLevel, at: f64) -> std::result::Result<GridDistribution, Failure> {
    Ok(match spec {
        "dirac" => distrib::dirac(level, Axis::Space, at)?,
        "split" => distrib::split_dirac(level, Axis::Space, at)?,
        "dirac-derivative" => distrib::dirac_derivative(level, Axis::Space, at)?,
        other => match other.strip_prefix("fn:") {
            Some(src) => {
                let e = parse(src)?;
                let grid = level.spatial_grid();
                let values = (0..grid.len())
                    .map(|j| e.eval(0.0, grid.point(j)))
                    .collect::<std::result::Result<Vec<f64>, _>>()?;
                let gf = GridFunction::new(level, Axis::Space, grid.first_index(), values);
                GridDistribution::new(gf?)
            }
            None => {
                return Err(Failure::Usage(format!(
                    "unknown distribution '{other}' (dirac, split, dirac-derivative, fn:<expr>)"
                )))
            }
        },
    })
}

fn cmd_pair(cfg: &RunConfig) -> Outcome {
    let level = level(cfg, cfg.n)?;
    let spec = cfg.dist.as_deref().unwrap_or("dirac");
    let d = distribution(spec, level, cfg.at)?;
    let phi = match &cfg.phi {
        Some(s) => TestFunction::from_source(s)?,
        None => TestFunction::bump_x(0.0, 1.0),
    };
    let value = distrib::pair(&d, &phi, cfg.time)?;
    println!("<{spec}, {}> = {value}", phi.expr);
    write_json(
        &cfg.out,
        "pair.json",
        &json!({ "config": cfg, "distribution": spec, "phi": phi.expr.to_string(), "value": value }),
    )
}

fn cmd_equivalent(cfg: &RunConfig) -> Outcome {
    let level = level(cfg, cfg.n)?;
    let missing = |flag: &str| Failure::Usage(format!("missing --{flag}\n\n{}", usage()));
    let a = cfg.dist.as_deref().ok_or_else(|| missing("dist"))?;
    let b = cfg.dist2.as_deref().ok_or_else(|| missing("dist2"))?;
    let d1 = distribution(a, level, cfg.at)?;
    let d2 = distribution(b, level, cfg.at)?;
    let tol = cfg.tol.unwrap_or(10.0 / f64::from(cfg.n));
    let report = distrib::equivalent(&d1, &d2, &distrib::default_family(), cfg.time, tol)?;
    write_json(&cfg.out, "equivalent.json", &json!({ "config": cfg, "report": report }))?;
    report_checks(&[(
        format!("max pairing discrepancy {:e} <= {tol:e}", report.max_discrepancy),
        report.equivalent,
    )])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_fit() {
        let levels = [16, 32, 64];
        let v: Vec<f64> = levels.iter().map(|n| 3.0 / f64::from(*n)).collect();
        assert!((decay_exponent(&levels, &v).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(decay_exponent(&levels, &[1.0, 0.0, 1.0]), None);
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"n": 12, "f": "-x", "seed": 4}"#).unwrap();
        let cli = Cli::try_parse_from(["hypergrid", "simulate", "--config", path.to_str().unwrap(), "--n", "6"]).unwrap();
        let cfg = resolve(&cli.flags).ok().unwrap();
        assert_eq!(cfg.n, 6);
        assert_eq!(cfg.f.as_deref(), Some("-x"));
        assert_eq!(cfg.seed, 4);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"level": 12}"#).unwrap();
        let code = run(["hypergrid", "simulate", "--config", path.to_str().unwrap()]);
        assert_eq!(code, 2);
    }

    #[test]
    fn grid_times() {
        assert_eq!(time_indices(&[0.0, 0.5, 1.0], 8, false).ok().unwrap(), vec![0, 4, 8]);
        assert!(time_indices(&[0.3], 8, false).is_err());
        assert_eq!(time_indices(&[0.3], 8, true).ok().unwrap(), vec![2]);
    }
}
