//! Exact finite-level identities of exhaustive white noise.
//!
//! On an exhaustive ensemble every conditional block `R_τ[t, 1]` has the same
//! size and contains each value of `ξ(t)` equally often, so the following
//! hold up to rounding rather than in the limit:
//!
//! * `E[ξ(t)] = 0`, `E[ξ(t)²] = n`, `E[ξ(t) ξ(s)] = 0` for `t ≠ s`;
//! * the tower identity `E[G] = E_τ E_{R_τ[t,1]}[G]` for any `G(t, x(t), ξ(t))`;
//! * `E[F(t, x(t)) ξ(t)] = 0` and `E[F(t, x(t)) ξ(t)²] = n E[F(t, x(t))]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::noise::{EnsembleDescriptor, NoiseEnsemble};
use crate::parallel;
use crate::sde::{simulate_ensemble, CauchyProblem, PathObserver, PathRecord, ProblemSpec};
use crate::sum::NeumaierSum;

/// One identity `lhs = rhs`, judged by `|lhs - rhs| / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub scale: f64,
    pub relative_error: f64,
    pub passed: bool,
}

impl IdentityCheck {
    fn new(name: String, lhs: f64, rhs: f64, scale: f64, tol: f64) -> Self {
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let relative_error = (lhs - rhs).abs() / scale;
        Self {
            name,
            lhs,
            rhs,
            scale,
            relative_error,
            passed: relative_error <= tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub tolerance: f64,
    pub passed: bool,
    pub max_relative_error: f64,
    pub checks: Vec<IdentityCheck>,
    pub problem: ProblemSpec,
    pub ensemble: EnsembleDescriptor,
}

impl LemmaReport {
    pub fn failures(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn require_exhaustive(ensemble: &NoiseEnsemble) -> Result<()> {
    if ensemble.is_exhaustive() {
        Ok(())
    } else {
        Err(Error::Unsupported("exact identities need an exhaustive ensemble".into()))
    }
}

/// First and second moments of the noise coordinates.
pub fn moment_checks(ensemble: &NoiseEnsemble, tol: f64) -> Result<Vec<IdentityCheck>> {
    require_exhaustive(ensemble)?;
    let len = ensemble.path_len();
    let n = f64::from(ensemble.level().n());
    let (first, second, _) = parallel::reduce_indices(
        ensemble.count(),
        || (vec![NeumaierSum::new(); len], vec![NeumaierSum::new(); len * len], vec![0.0; len]),
        |(first, second, buf), i| {
            ensemble.fill_path(i, buf);
            for k in 0..len {
                first[k].add(buf[k]);
                for j in k..len {
                    second[k * len + j].add(buf[k] * buf[j]);
                }
            }
            Ok(())
        },
        |a, b| {
            for (x, y) in a.0.iter_mut().zip(&b.0) {
                x.merge(y);
            }
            for (x, y) in a.1.iter_mut().zip(&b.1) {
                x.merge(y);
            }
        },
    )?;
    let count = ensemble.count() as f64;
    let mut out = Vec::new();
    for k in 0..len {
        out.push(IdentityCheck::new(
            format!("E[xi(t_{k})] = 0"),
            first[k].value() / count,
            0.0,
            n.sqrt(),
            tol,
        ));
        out.push(IdentityCheck::new(
            format!("E[xi(t_{k})^2] = n"),
            second[k * len + k].value() / count,
            n,
            n,
            tol,
        ));
        for j in k + 1..len {
            out.push(IdentityCheck::new(
                format!("E[xi(t_{k}) xi(t_{j})] = 0"),
                second[k * len + j].value() / count,
                0.0,
                n,
                tol,
            ));
        }
    }
    Ok(out)
}

type Functional = fn(f64, f64, f64) -> f64;

/// `G(t, x, ξ)` used for the tower identity.
const TOWER_FUNCTIONALS: [(&str, Functional); 3] = [
    ("x^2", |_, x, _| x * x),
    ("cos(x) xi", |_, x, xi| x.cos() * xi),
    ("exp(-x^2) + t x xi^2", |t, x, xi| (-x * x).exp() + t * x * xi * xi),
];

/// Tower identity at `t = k/n` for `k` in `times`: the plain mean against the
/// mean of conditional means over all prefixes on `[0, t)`.
pub fn tower_checks(problem: &CauchyProblem, ensemble: &NoiseEnsemble, times: &[usize], tol: f64) -> Result<Vec<IdentityCheck>> {
    require_exhaustive(ensemble)?;
    let level = problem.level;
    let n = level.n() as usize;
    let mut out = Vec::new();
    for &k in times {
        if k < problem.start || k > n {
            return Err(Error::Invalid(format!("time index {k} is outside the simulated range")));
        }
        let t = level.coord(k as i64);
        for (name, g) in TOWER_FUNCTIONALS {
            let eval = |values: &[f64]| -> f64 {
                let mut x = vec![0.0; n + 1 - problem.start];
                match problem.integrate_into(values, &mut x, 0) {
                    Ok(()) => g(t, x[k - problem.start], values[k]),
                    Err(_) => f64::NAN,
                }
            };
            let direct = ensemble.expectation(|v| eval(v.values))?;
            let blocks = ensemble.decompose(k)?;
            let mut nested = NeumaierSum::new();
            for b in &blocks {
                nested.add(b.expectation(|v| eval(v.values))?.mean);
            }
            let nested = nested.value() / blocks.len() as f64;
            let scale = ensemble.expectation(|v| eval(v.values).abs())?.mean;
            out.push(IdentityCheck::new(
                format!("tower {name} at t_{k} over {} prefixes", blocks.len()),
                direct.mean,
                nested,
                scale,
                tol,
            ));
        }
    }
    Ok(out)
}

struct TransferObserver<'a> {
    functions: &'a [Expr],
    len: usize,
    /// Per function and time: `F ξ`, `F ξ²`, `F`, `|F|`.
    sums: Vec<[NeumaierSum; 4]>,
}

impl PathObserver for TransferObserver<'_> {
    fn observe(&mut self, path: &PathRecord<'_>) -> Result<()> {
        let level = path.noise.len() - 1;
        for (i, f) in self.functions.iter().enumerate() {
            for k in path.start..=level {
                let t = k as f64 / level as f64;
                let v = f.eval(t, path.at(k))?;
                let xi = path.noise[k];
                let s = &mut self.sums[i * self.len + k];
                s[0].add(v * xi);
                s[1].add(v * xi * xi);
                s[2].add(v);
                s[3].add(v.abs());
            }
        }
        Ok(())
    }

    fn merge(&mut self, other: Self) {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        }
    }
}

/// Bounded functions of the state used for the transfer identities.
pub const TRANSFER_FUNCTIONS: [&str; 3] = ["cos(x)", "1/(1+x^2)", "sin(3*t+x)"];

/// `E[F ξ(t)] = 0` and `E[F ξ(t)²] = n E[F]` at every grid time.
pub fn transfer_checks(problem: &CauchyProblem, ensemble: &NoiseEnsemble, tol: f64) -> Result<Vec<IdentityCheck>> {
    require_exhaustive(ensemble)?;
    let functions: Vec<Expr> = TRANSFER_FUNCTIONS.iter().map(|s| parse(s)).collect::<std::result::Result<_, _>>()?;
    let len = ensemble.path_len();
    let obs = simulate_ensemble(problem, ensemble, || TransferObserver {
        functions: &functions,
        len,
        sums: vec![Default::default(); functions.len() * len],
    })?;
    let count = ensemble.count() as f64;
    let n = f64::from(problem.level.n());
    let mut out = Vec::new();
    for (i, name) in TRANSFER_FUNCTIONS.iter().enumerate() {
        for k in problem.start..len {
            let s = &obs.sums[i * len + k];
            let [fxi, fxi2, f, fabs] = [0, 1, 2, 3].map(|j| s[j].value() / count);
            out.push(IdentityCheck::new(format!("E[{name} xi(t_{k})] = 0"), fxi, 0.0, n.sqrt() * fabs, tol));
            out.push(IdentityCheck::new(
                format!("E[{name} xi(t_{k})^2] = n E[{name}]"),
                fxi2,
                n * f,
                n * fabs,
                tol,
            ));
        }
    }
    Ok(out)
}

/// All identities above; the tower identity is checked at `t = 1/n`, `1/2`
/// (rounded down to the grid) and `1`.
pub fn verify_lemmas(problem: &CauchyProblem, ensemble: &NoiseEnsemble, tol: f64) -> Result<LemmaReport> {
    let n = problem.level.n() as usize;
    let mut times = vec![1.max(problem.start), (n / 2).max(problem.start), n];
    times.dedup();
    let mut checks = moment_checks(ensemble, tol)?;
    checks.extend(tower_checks(problem, ensemble, &times, tol)?);
    checks.extend(transfer_checks(problem, ensemble, tol)?);
    let max_relative_error = checks.iter().map(|c| c.relative_error).fold(0.0, f64::max);
    Ok(LemmaReport {
        tolerance: tol,
        passed: checks.iter().all(|c| c.passed),
        max_relative_error,
        checks,
        problem: problem.spec(),
        ensemble: ensemble.descriptor(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridLevel;
    use crate::noise::{NoiseAlphabet, DEFAULT_CAP};

    fn setup(n: u32, f: &str, h: &str, alphabet: NoiseAlphabet) -> (CauchyProblem, NoiseEnsemble) {
        let l = GridLevel::new(n).unwrap();
        (
            CauchyProblem::from_sources(f, h, 0.1, l).unwrap(),
            NoiseEnsemble::enumerate(l, alphabet, DEFAULT_CAP).unwrap(),
        )
    }

    #[test]
    fn white_noise_identities() {
        let (p, e) = setup(6, "-x", "1+x^2/4", NoiseAlphabet::white());
        let r = verify_lemmas(&p, &e, 1e-10).unwrap();
        assert!(r.passed, "{:?}", r.failures().next());
        // 7 first moments, 28 second moments, 9 tower, 42 transfer
        assert_eq!(r.checks.len(), 7 + 28 + 9 + 42);
    }

    #[test]
    fn generalized_alphabet_identities() {
        let a = NoiseAlphabet::normalized(&[-2.0, 0.5, 1.5]).unwrap();
        let (p, e) = setup(4, "sin(x)", "1", a);
        let r = verify_lemmas(&p, &e, 1e-10).unwrap();
        assert!(r.passed, "{:?}", r.failures().next());
    }

    #[test]
    fn detects_wrong_identity() {
        let (_, e) = setup(4, "0", "1", NoiseAlphabet::white());
        let checks = moment_checks(&e, 1e-10).unwrap();
        let c = IdentityCheck::new("x".into(), checks[1].lhs, 5.0, 4.0, 1e-10);
        assert!(!c.passed);
    }

    #[test]
    fn sampled_is_rejected() {
        let l = GridLevel::new(4).unwrap();
        let p = CauchyProblem::from_sources("0", "1", 0.0, l).unwrap();
        let e = NoiseEnsemble::sample(l, NoiseAlphabet::white(), 100, 1).unwrap();
        assert!(matches!(verify_lemmas(&p, &e, 1e-10), Err(Error::Unsupported(_))));
    }
}
