use std::fmt::Write as _;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::{simulate_ensemble, CauchyProblem, PathObserver, PathRecord, ProblemSpec};
use crate::error::{Error, Result};
use crate::grid::GridLevel;
use crate::noise::{EnsembleDescriptor, NoiseEnsemble};

/// Window bin of `x`: bins are `[k/n, (k+1)/n)` over `[-W, W)`, indexed from
/// the left edge. Points on an edge belong to the bin on their right.
pub fn bin_index(level: GridLevel, x: f64) -> Option<usize> {
    if !x.is_finite() {
        return None;
    }
    let n = f64::from(level.n());
    let mut k = (x * n).floor() as i64;
    // x*n may round across an edge; settle against the edge coordinates
    if level.coord(k) > x {
        k -= 1;
    } else if level.coord(k + 1) <= x {
        k += 1;
    }
    let j = k + level.halfwidth_steps();
    (0..2 * level.halfwidth_steps()).contains(&j).then_some(j as usize)
}

/// Empirical density `ρ(t,x) = #{ξ : x <= x_ξ(t) < x + 1/n} / ((1/n) |R|)` on
/// selected time slices, with out-of-window trajectories counted as overflow.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    level: GridLevel,
    slices: Vec<usize>,
    counts: Vec<Vec<u64>>,
    overflow: Vec<u64>,
    total: u64,
}

impl DensityField {
    pub fn level(&self) -> GridLevel {
        self.level
    }

    /// Grid time indices of the stored slices.
    pub fn slices(&self) -> &[usize] {
        &self.slices
    }

    pub fn slice_position(&self, k: usize) -> Option<usize> {
        self.slices.iter().position(|s| *s == k)
    }

    pub fn bins(&self) -> usize {
        2 * self.level.halfwidth_steps() as usize
    }

    pub fn bin_left_edge(&self, j: usize) -> f64 {
        self.level.coord(j as i64 - self.level.halfwidth_steps())
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self, slice: usize) -> &[u64] {
        &self.counts[slice]
    }

    pub fn overflow(&self, slice: usize) -> u64 {
        self.overflow[slice]
    }

    pub fn overflow_fraction(&self, slice: usize) -> f64 {
        self.overflow[slice] as f64 / self.total as f64
    }

    /// `ρ` at stored slice `slice`, bin `j`.
    pub fn rho(&self, slice: usize, j: usize) -> f64 {
        self.counts[slice][j] as f64 * f64::from(self.level.n()) / self.total as f64
    }

    /// Probability mass in bin `j`, i.e. `ε ρ`.
    pub fn mass(&self, slice: usize, j: usize) -> f64 {
        self.counts[slice][j] as f64 / self.total as f64
    }

    /// `ε Σ ρ + overflow` as an exact ratio; always 1.
    pub fn normalization(&self, slice: usize) -> Ratio<u64> {
        let inside: u64 = self.counts[slice].iter().sum();
        Ratio::new(inside + self.overflow[slice], self.total)
    }

    /// Exact mass of the bins `range`, as a count ratio.
    pub fn bin_mass(&self, slice: usize, range: std::ops::Range<usize>) -> EventProbability {
        EventProbability {
            hits: self.counts[slice][range].iter().sum(),
            total: self.total,
        }
    }

    /// `ε Σ_x g(x) ρ(t,x)` with `g` evaluated at bin left edges.
    pub fn pair_slice(&self, slice: usize, mut g: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
        let mut acc = crate::sum::NeumaierSum::new();
        for (j, c) in self.counts[slice].iter().enumerate() {
            if *c > 0 {
                acc.add(g(self.bin_left_edge(j))? * *c as f64);
            }
        }
        Ok(acc.value() / self.total as f64)
    }

    /// Bin-aligned rebinning onto coarser cells of `factor` bins each.
    pub fn coarsened_rho(&self, slice: usize, factor: usize) -> Result<Vec<f64>> {
        if factor == 0 || self.bins() % factor != 0 {
            return Err(Error::Alignment(format!(
                "{} bins cannot be grouped by {factor}",
                self.bins()
            )));
        }
        let width = factor as f64 / f64::from(self.level.n());
        Ok(self.counts[slice]
            .chunks(factor)
            .map(|c| c.iter().sum::<u64>() as f64 / (self.total as f64 * width))
            .collect())
    }

    /// CSV with a header of bin left edges and one row per slice. Numbers use
    /// the shortest representation that round-trips.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for j in 0..self.bins() {
            write!(out, ",{}", self.bin_left_edge(j)).unwrap();
        }
        out.push('\n');
        for (s, k) in self.slices.iter().enumerate() {
            write!(out, "{}", self.level.coord(*k as i64)).unwrap();
            for j in 0..self.bins() {
                write!(out, ",{}", self.rho(s, j)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn metadata(&self, problem: &CauchyProblem, ensemble: &NoiseEnsemble) -> DensityMetadata {
        DensityMetadata {
            n: self.level.n(),
            halfwidth: self.level.halfwidth_f64(),
            bin_width: self.level.step_f64(),
            slices: self.slices.iter().map(|k| self.level.coord(*k as i64)).collect(),
            overflow: (0..self.slices.len()).map(|s| self.overflow_fraction(s)).collect(),
            total: self.total,
            problem: problem.spec(),
            ensemble: ensemble.descriptor(),
        }
    }
}

/// JSON sidecar written next to a density CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMetadata {
    pub n: u32,
    pub halfwidth: f64,
    pub bin_width: f64,
    pub slices: Vec<f64>,
    pub overflow: Vec<f64>,
    pub total: u64,
    pub problem: ProblemSpec,
    pub ensemble: EnsembleDescriptor,
}

/// Streaming bin counter for [`DensityField`].
#[derive(Debug, Clone)]
pub struct DensityAccumulator {
    level: GridLevel,
    slices: Vec<usize>,
    counts: Vec<Vec<u64>>,
    overflow: Vec<u64>,
    total: u64,
}

impl DensityAccumulator {
    pub fn new(level: GridLevel, slices: &[usize]) -> Self {
        let bins = 2 * level.halfwidth_steps() as usize;
        Self {
            level,
            slices: slices.to_vec(),
            counts: vec![vec![0; bins]; slices.len()],
            overflow: vec![0; slices.len()],
            total: 0,
        }
    }

    /// Counts one trajectory given as `x(t_k)` indexed by absolute `k`.
    pub fn add(&mut self, x_at: impl Fn(usize) -> f64) {
        for (s, k) in self.slices.iter().enumerate() {
            match bin_index(self.level, x_at(*k)) {
                Some(j) => self.counts[s][j] += 1,
                None => self.overflow[s] += 1,
            }
        }
        self.total += 1;
    }

    pub fn finish(self) -> DensityField {
        DensityField {
            level: self.level,
            slices: self.slices,
            counts: self.counts,
            overflow: self.overflow,
            total: self.total,
        }
    }
}

impl PathObserver for DensityAccumulator {
    fn observe(&mut self, path: &PathRecord<'_>) -> Result<()> {
        for k in &self.slices {
            if *k < path.start || *k - path.start >= path.x.len() {
                return Err(Error::Invalid(format!("slice {k} is outside the simulated range")));
            }
        }
        self.add(|k| path.at(k));
        Ok(())
    }

    fn merge(&mut self, other: Self) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.overflow.iter_mut().zip(other.overflow) {
            *a += b;
        }
        self.total += other.total;
    }
}

/// Density of a stream of trajectories (each `x(t_k)` for `k = 0..=n`).
pub fn density<'a>(
    trajectories: impl IntoIterator<Item = &'a [f64]>,
    level: GridLevel,
    slices: &[usize],
) -> DensityField {
    let mut acc = DensityAccumulator::new(level, slices);
    for tr in trajectories {
        acc.add(|k| tr[k]);
    }
    acc.finish()
}

/// `P(E) = |E| / |R|` as integer counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventProbability {
    pub hits: u64,
    pub total: u64,
}

impl EventProbability {
    pub fn ratio(&self) -> Ratio<u64> {
        Ratio::new(self.hits, self.total)
    }

    pub fn value(&self) -> f64 {
        self.hits as f64 / self.total as f64
    }
}

/// Counts trajectories with `a <= x(t_k) < b`.
#[derive(Debug, Clone)]
pub struct EventCounter {
    pub k: usize,
    pub a: f64,
    pub b: f64,
    hits: u64,
    total: u64,
}

impl EventCounter {
    pub fn new(k: usize, a: f64, b: f64) -> Self {
        Self {
            k,
            a,
            b,
            hits: 0,
            total: 0,
        }
    }

    pub fn probability(&self) -> EventProbability {
        EventProbability {
            hits: self.hits,
            total: self.total,
        }
    }
}

impl PathObserver for EventCounter {
    fn observe(&mut self, path: &PathRecord<'_>) -> Result<()> {
        let x = path.at(self.k);
        if self.a <= x && x < self.b {
            self.hits += 1;
        }
        self.total += 1;
        Ok(())
    }

    fn merge(&mut self, other: Self) {
        self.hits += other.hits;
        self.total += other.total;
    }
}

/// Probability that `x(t_k)` lies in `[a, b)`; `b` may be infinite.
pub fn event_probability(
    problem: &CauchyProblem,
    ensemble: &NoiseEnsemble,
    k: usize,
    a: f64,
    b: f64,
) -> Result<EventProbability> {
    if k < problem.start || k > problem.level.n() as usize {
        return Err(Error::Invalid(format!("time index {k} is outside the simulated range")));
    }
    let c = simulate_ensemble(problem, ensemble, || EventCounter::new(k, a, b))?;
    Ok(c.probability())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseAlphabet, DEFAULT_CAP};
    use crate::sde::solve_grid_ode;

    fn level(n: u32) -> GridLevel {
        GridLevel::new(n).unwrap()
    }

    fn choose(n: u64, k: u64) -> u64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn bins_are_half_open() {
        let l = level(8);
        assert_eq!(bin_index(l, 0.0), Some(32));
        assert_eq!(bin_index(l, -1e-300), Some(31));
        assert_eq!(bin_index(l, 0.125), Some(33));
        assert_eq!(bin_index(l, 0.12499999999999999), Some(32));
        assert_eq!(bin_index(l, -4.0), Some(0));
        assert_eq!(bin_index(l, 4.0), None);
        assert_eq!(bin_index(l, -4.0000001), None);
        assert_eq!(bin_index(l, f64::NAN), None);
        let l = level(10);
        for k in -50i64..50 {
            let x = l.coord(k);
            assert_eq!(bin_index(l, x), Some((k + 50) as usize), "edge {x}");
        }
    }

    fn brownian(n: u32) -> (CauchyProblem, NoiseEnsemble) {
        let l = level(n);
        (
            CauchyProblem::from_sources("0", "1", 0.0, l).unwrap(),
            NoiseEnsemble::enumerate(l, NoiseAlphabet::white(), DEFAULT_CAP).unwrap(),
        )
    }

    #[test]
    fn initial_slice_is_point_mass() {
        let (p, e) = brownian(8);
        let slices: Vec<usize> = (0..=8).collect();
        let d = simulate_ensemble(&p, &e, || DensityAccumulator::new(p.level, &slices))
            .unwrap()
            .finish();
        let j0 = bin_index(p.level, 0.0).unwrap();
        assert_eq!(d.rho(0, j0), 8.0);
        assert_eq!(d.counts(0).iter().sum::<u64>(), 512);
        for s in 0..=8 {
            assert_eq!(d.normalization(s), Ratio::from_integer(1));
        }
    }

    #[test]
    fn terminal_slice_is_binomial() {
        let (p, e) = brownian(8);
        let d = simulate_ensemble(&p, &e, || DensityAccumulator::new(p.level, &[8]))
            .unwrap()
            .finish();
        let l = p.level;
        for j in 0..=8u64 {
            let site = (2.0 * j as f64 - 8.0) / 8f64.sqrt();
            let bin = bin_index(l, site).unwrap();
            // each site in its own bin: 2/√8 > 1/8
            assert_eq!(d.counts(0)[bin], 2 * choose(8, j), "site {site}");
            assert_eq!(d.mass(0, bin), choose(8, j) as f64 / 256.0);
        }
        assert_eq!(d.overflow(0), 0);
    }

    #[test]
    fn event_probabilities() {
        let (p, e) = brownian(8);
        let whole = event_probability(&p, &e, 8, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        assert_eq!(whole.ratio(), Ratio::from_integer(1));
        let right = event_probability(&p, &e, 8, 0.0, f64::INFINITY).unwrap();
        assert_eq!(right.ratio(), Ratio::new(163, 256));
        let d = simulate_ensemble(&p, &e, || DensityAccumulator::new(p.level, &[8]))
            .unwrap()
            .finish();
        let (a, b) = (-1.0, 1.5);
        let aligned = event_probability(&p, &e, 8, a, b).unwrap();
        let ja = bin_index(p.level, a).unwrap();
        let jb = bin_index(p.level, b).unwrap();
        assert_eq!(aligned, d.bin_mass(0, ja..jb));
    }

    #[test]
    fn overflow_is_tracked() {
        let l = GridLevel::with_halfwidth_f64(4, 0.5).unwrap();
        let p = CauchyProblem::from_sources("0", "1", 0.0, l).unwrap();
        let e = NoiseEnsemble::enumerate(l, NoiseAlphabet::white(), DEFAULT_CAP).unwrap();
        let d = simulate_ensemble(&p, &e, || DensityAccumulator::new(l, &[4])).unwrap().finish();
        // sites -2,-1,0,1,2: only 0 is inside [-0.5, 0.5)
        assert_eq!(d.overflow_fraction(0), 1.0 - 6.0 / 16.0);
        assert_eq!(d.normalization(0), Ratio::from_integer(1));
    }

    #[test]
    fn streaming_and_direct_agree() {
        let (p, e) = brownian(6);
        let trs: Vec<Vec<f64>> = e.paths().map(|np| solve_grid_ode(&p, Some(&np)).unwrap().values).collect();
        let direct = density(trs.iter().map(|v| v.as_slice()), p.level, &[3, 6]);
        let streamed = simulate_ensemble(&p, &e, || DensityAccumulator::new(p.level, &[3, 6]))
            .unwrap()
            .finish();
        assert_eq!(direct, streamed);
    }

    #[test]
    fn csv_layout() {
        let (p, e) = brownian(2);
        let d = simulate_ensemble(&p, &e, || DensityAccumulator::new(p.level, &[0, 2]))
            .unwrap()
            .finish();
        let csv = d.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "t,-1,-0.5,0,0.5");
        assert_eq!(lines[1], "0,0,0,2,0");
        assert!(lines[2].starts_with("1,"));
    }
}
