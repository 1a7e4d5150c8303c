//! Noise alphabets and ensembles.
//!
//! White noise at level `n` is the set of all grid functions on `[0,1]` (all
//! `n+1` grid points) taking values `±√n`, so it has `2^(n+1)` members.
//! Generalized alphabets `{q_i √n}` are normalized to uniform mean 0 and mean
//! square 1 in symbol units, which makes a single coordinate have mean 0 and
//! mean square exactly `n`.
//!
//! Exhaustive ensembles enumerate every path in lexicographic order (first
//! coordinate most significant), so the paths sharing a prefix on `[0,s)` form
//! one contiguous index block. Sampled ensembles derive path `i` from a ChaCha
//! stream keyed by `(seed, i)`, independent of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridLevel;
use crate::parallel;
use crate::sum::NeumaierSum;

/// Default upper bound on the size of an exhaustive ensemble.
pub const DEFAULT_CAP: u128 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseAlphabet {
    symbols: Vec<f64>,
}

impl NoiseAlphabet {
    /// `{-1, +1}`.
    pub fn white() -> Self {
        Self {
            symbols: vec![-1.0, 1.0],
        }
    }

    /// Rescales `raw` so that its uniform mean square is 1. The raw symbols
    /// must already have zero sum (within `1e-12`).
    pub fn normalized(raw: &[f64]) -> Result<Self> {
        if raw.len() < 2 {
            return Err(Error::Invalid("an alphabet needs at least two symbols".into()));
        }
        if raw.iter().any(|q| !q.is_finite()) {
            return Err(Error::Invalid("alphabet symbols must be finite".into()));
        }
        let k = raw.len() as f64;
        let sum: f64 = raw.iter().sum();
        let scale = raw.iter().map(|q| q.abs()).fold(0.0, f64::max);
        if sum.abs() > 1e-12 * scale.max(1.0) {
            return Err(Error::Invalid(format!("alphabet symbols sum to {sum}, not 0")));
        }
        let mean_square = raw.iter().map(|q| q * q).sum::<f64>() / k;
        if mean_square == 0.0 {
            return Err(Error::Invalid("alphabet is identically zero".into()));
        }
        let norm = mean_square.sqrt();
        let mut symbols: Vec<f64> = raw.iter().map(|q| q / norm).collect();
        symbols.sort_by(f64::total_cmp);
        Ok(Self { symbols })
    }

    /// An alphabet given with `Σq = 0` and `Σq² = 1`; uniform choice over `k`
    /// such symbols has mean square `1/k`, so this rescales by `√k`.
    pub fn from_unit_sum_of_squares(q: &[f64]) -> Result<Self> {
        let ss: f64 = q.iter().map(|v| v * v).sum();
        if (ss - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("Σq² = {ss}, expected 1")));
        }
        Self::normalized(q)
    }

    pub fn symbols(&self) -> &[f64] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Symbols closed under negation, which makes odd moments vanish exactly.
    pub fn is_symmetric(&self) -> bool {
        self.symbols
            .iter()
            .zip(self.symbols.iter().rev())
            .all(|(a, b)| *a == -*b)
    }

    /// The noise value of symbol `i` at this level, `q_i √n`.
    #[inline]
    pub fn value(&self, i: usize, level: GridLevel) -> f64 {
        self.symbols[i] * f64::from(level.n()).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum EnsembleMode {
    Exhaustive,
    Sampled { samples: u64, seed: u64 },
}

/// Provenance record embedded in result files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDescriptor {
    #[serde(flatten)]
    pub mode: EnsembleMode,
    pub n: u32,
    pub alphabet: Vec<f64>,
    pub count: u64,
}

/// One noise path: `ξ(t_k)` for `k = 0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub level: GridLevel,
    pub index: u64,
    pub values: Vec<f64>,
}

impl NoisePath {
    /// Restriction to `[0, k/n)`.
    pub fn restrict(&self, k: usize) -> NoisePath {
        NoisePath {
            level: self.level,
            index: self.index,
            values: self.values[..k.min(self.values.len())].to_vec(),
        }
    }

    /// Path built from explicit values (e.g. the deterministic all-`+√n`
    /// path); `values` should hold `n+1` entries.
    pub fn from_values(level: GridLevel, values: Vec<f64>) -> NoisePath {
        NoisePath {
            level,
            index: 0,
            values,
        }
    }

    pub fn zero(level: GridLevel) -> NoisePath {
        Self::from_values(level, vec![0.0; level.n() as usize + 1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseEnsemble {
    level: GridLevel,
    alphabet: NoiseAlphabet,
    mode: EnsembleMode,
    count: u64,
}

/// Mean over an ensemble; `std_error` is reported in sampled mode only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub mean: f64,
    pub std_error: Option<f64>,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct MomentAcc {
    pub sum: NeumaierSum,
    pub sum_sq: NeumaierSum,
    pub count: u64,
}

impl MomentAcc {
    pub fn add(&mut self, v: f64) {
        self.sum.add(v);
        self.sum_sq.add(v * v);
        self.count += 1;
    }

    pub fn merge(&mut self, other: MomentAcc) {
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
        self.count += other.count;
    }

    pub fn finish(&self, sampled: bool) -> Expectation {
        let m = self.count as f64;
        let mean = self.sum.value() / m;
        let std_error = sampled.then(|| {
            if self.count < 2 {
                return f64::NAN;
            }
            let var = ((self.sum_sq.value() - m * mean * mean) / (m - 1.0)).max(0.0);
            (var / m).sqrt()
        });
        Expectation {
            mean,
            std_error,
            count: self.count,
        }
    }
}

impl NoiseEnsemble {
    /// Every path over the alphabet, in lexicographic order.
    pub fn enumerate(level: GridLevel, alphabet: NoiseAlphabet, cap: u128) -> Result<Self> {
        let count = exhaustive_count(level, &alphabet)
            .filter(|c| *c <= cap)
            .ok_or_else(|| Error::CapExceeded {
                count: exhaustive_count(level, &alphabet).unwrap_or(u128::MAX),
                cap,
            })?;
        Ok(Self {
            level,
            alphabet,
            mode: EnsembleMode::Exhaustive,
            count: count as u64,
        })
    }

    /// `samples` paths drawn uniformly, path `i` determined by `(seed, i)`.
    pub fn sample(level: GridLevel, alphabet: NoiseAlphabet, samples: u64, seed: u64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::Invalid("sampled ensembles need at least one path".into()));
        }
        Ok(Self {
            level,
            alphabet,
            mode: EnsembleMode::Sampled { samples, seed },
            count: samples,
        })
    }

    pub fn level(&self) -> GridLevel {
        self.level
    }

    pub fn alphabet(&self) -> &NoiseAlphabet {
        &self.alphabet
    }

    pub fn mode(&self) -> EnsembleMode {
        self.mode
    }

    pub fn is_exhaustive(&self) -> bool {
        self.mode == EnsembleMode::Exhaustive
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn descriptor(&self) -> EnsembleDescriptor {
        EnsembleDescriptor {
            mode: self.mode,
            n: self.level.n(),
            alphabet: self.alphabet.symbols.clone(),
            count: self.count,
        }
    }

    /// Number of coordinates in each path, `n + 1`.
    pub fn path_len(&self) -> usize {
        self.level.n() as usize + 1
    }

    /// Writes the symbol indices of path `index` into `out` (length `n+1`).
    pub fn fill_symbols(&self, index: u64, out: &mut [usize]) {
        let m = self.alphabet.len() as u64;
        match self.mode {
            EnsembleMode::Exhaustive => {
                let mut p = index;
                for slot in out.iter_mut().rev() {
                    *slot = (p % m) as usize;
                    p /= m;
                }
            }
            EnsembleMode::Sampled { seed, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(index);
                for slot in out.iter_mut() {
                    *slot = rng.gen_range(0..m as usize);
                }
            }
        }
    }

    /// Writes `ξ(t_k)` of path `index` into `out` (length `n+1`).
    pub fn fill_path(&self, index: u64, out: &mut [f64]) {
        let m = self.alphabet.len() as u64;
        let root_n = f64::from(self.level.n()).sqrt();
        let symbols = &self.alphabet.symbols;
        match self.mode {
            EnsembleMode::Exhaustive => {
                let mut p = index;
                for slot in out.iter_mut().rev() {
                    *slot = symbols[(p % m) as usize] * root_n;
                    p /= m;
                }
            }
            EnsembleMode::Sampled { seed, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(index);
                for slot in out.iter_mut() {
                    *slot = symbols[rng.gen_range(0..m as usize)] * root_n;
                }
            }
        }
    }

    pub fn path(&self, index: u64) -> NoisePath {
        let mut values = vec![0.0; self.path_len()];
        self.fill_path(index, &mut values);
        NoisePath {
            level: self.level,
            index,
            values,
        }
    }

    pub fn paths(&self) -> impl Iterator<Item = NoisePath> + '_ {
        (0..self.count).map(|i| self.path(i))
    }

    /// `|R[0, k/n)|`: the number of distinct restrictions to the first `k`
    /// coordinates.
    pub fn prefix_count(&self, k: usize) -> u128 {
        (self.alphabet.len() as u128).pow(k as u32)
    }

    /// The members agreeing with `prefix` on `[0, s)`, `s = prefix.len()/n`.
    pub fn conditional(&self, prefix: &NoisePath) -> Result<ConditionalEnsemble> {
        if !self.is_exhaustive() {
            return Err(Error::Unsupported(
                "conditioning a sampled ensemble on a prefix (a measure-zero event)".into(),
            ));
        }
        let k = prefix.values.len();
        if k > self.path_len() {
            return Err(Error::Invalid(format!(
                "prefix of length {k} is longer than the paths ({})",
                self.path_len()
            )));
        }
        let m = self.alphabet.len() as u64;
        let mut block = 0u64;
        for v in &prefix.values {
            let digit = (0..self.alphabet.len())
                .find(|i| self.alphabet.value(*i, self.level) == *v)
                .ok_or_else(|| Error::Invalid(format!("{v} is not a noise value at this level")))?;
            block = block * m + digit as u64;
        }
        let count = m.pow((self.path_len() - k) as u32);
        Ok(ConditionalEnsemble {
            parent: self.clone(),
            prefix_len: k,
            first_index: block * count,
            count,
        })
    }

    /// Every conditional ensemble for prefixes of length `k`, in order.
    pub fn decompose(&self, k: usize) -> Result<Vec<ConditionalEnsemble>> {
        if !self.is_exhaustive() {
            return Err(Error::Unsupported("decomposing a sampled ensemble".into()));
        }
        let blocks = self.prefix_count(k) as u64;
        let count = self.count / blocks;
        Ok((0..blocks)
            .map(|b| ConditionalEnsemble {
                parent: self.clone(),
                prefix_len: k,
                first_index: b * count,
                count,
            })
            .collect())
    }

    /// Uniform average of `phi` over the ensemble (sample mean with standard
    /// error in sampled mode).
    pub fn expectation<F>(&self, phi: F) -> Result<Expectation>
    where
        F: Fn(&NoisePathView<'_>) -> f64 + Sync,
    {
        expectation_over(self, 0, self.count, &phi)
    }
}

fn exhaustive_count(level: GridLevel, alphabet: &NoiseAlphabet) -> Option<u128> {
    (alphabet.len() as u128).checked_pow(level.n() + 1)
}

/// Borrowed view of one path handed to functionals.
pub struct NoisePathView<'a> {
    pub index: u64,
    pub values: &'a [f64],
}

fn expectation_over<F>(ens: &NoiseEnsemble, first: u64, count: u64, phi: &F) -> Result<Expectation>
where
    F: Fn(&NoisePathView<'_>) -> f64 + Sync,
{
    let len = ens.path_len();
    let acc = parallel::reduce_indices(
        count,
        || (MomentAcc::default(), vec![0.0; len]),
        |(acc, buf), i| {
            let index = first + i;
            ens.fill_path(index, buf);
            let v = phi(&NoisePathView { index, values: buf });
            if !v.is_finite() {
                return Err(Error::NonFiniteFunctional(index));
            }
            acc.add(v);
            Ok(())
        },
        |a, b| a.0.merge(b.0),
    )?;
    Ok(acc.0.finish(!ens.is_exhaustive()))
}

/// `R_τ[s, 1]`: the paths agreeing with a fixed prefix `τ` before `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalEnsemble {
    parent: NoiseEnsemble,
    prefix_len: usize,
    first_index: u64,
    count: u64,
}

impl ConditionalEnsemble {
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix_len
    }

    /// Indices of the members within the parent ensemble.
    pub fn indices(&self) -> std::ops::Range<u64> {
        self.first_index..self.first_index + self.count
    }

    pub fn members(&self) -> impl Iterator<Item = NoisePath> + '_ {
        self.indices().map(|i| self.parent.path(i))
    }

    pub fn expectation<F>(&self, phi: F) -> Result<Expectation>
    where
        F: Fn(&NoisePathView<'_>) -> f64 + Sync,
    {
        expectation_over(&self.parent, self.first_index, self.count, &phi)
    }
}
