//! Fixed-budget evolution of the latent sample set.
//!
//! Each step replaces a deterministic `round(L * beta)` of the `L` slots with
//! fresh kernel draws whose parents come from the full previous set; the
//! survivors age in place. Storage is exactly `L` states plus `L` birth tags
//! at every step, so memory and per-step time never depend on how long the
//! chain has run.
//!
//! Every sample carries the step at which it was drawn. The lag of a sample
//! at time `t` is its mixture component index: `t - birth + 1`, so the
//! freshest draws sit at lag 1 (their parents are the lag-0... the previous
//! step's set) and the untouched initial draws at time `t` sit at lag
//! `t + 1`. The histogram of lags is the empirical composition of the
//! transition mixture the set represents.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::models::{PriorSpec, State, TransitionKernelSpec};
use crate::rng::rng_from_seed;

/// Fixed-size set of `L` state samples with birth-step tags.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    samples: Vec<State>,
    birth: Vec<usize>,
    weights: Option<Vec<f64>>,
    t: usize,
    dim: usize,
}

impl Ensemble {
    /// Draw `l` independent samples from the prior at step 0.
    pub fn init<R: Rng + ?Sized>(l: usize, prior: &PriorSpec, rng: &mut R) -> Result<Self> {
        if l == 0 {
            return Err(Error::invalid_parameter("ensemble size must be >= 1"));
        }
        prior.validate()?;
        let samples: Vec<State> = (0..l).map(|_| prior.sample(rng)).collect();
        Ok(Ensemble {
            birth: vec![0; l],
            weights: None,
            t: 0,
            dim: prior.dim,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn samples(&self) -> &[State] {
        &self.samples
    }

    pub fn birth(&self) -> &[usize] {
        &self.birth
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Attach (or clear) importance weights. Weights must be nonnegative and
    /// sum to 1 within `1e-9`.
    pub fn set_weights(&mut self, weights: Option<Vec<f64>>) -> Result<()> {
        if let Some(w) = &weights {
            if w.len() != self.samples.len() {
                return Err(Error::invalid_parameter(format!(
                    "{} weights for {} samples",
                    w.len(),
                    self.samples.len()
                )));
            }
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::invalid_parameter(
                    "weights must be finite and nonnegative",
                ));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::NonNormalizable(format!(
                    "weights sum to {sum}, expected 1"
                )));
            }
        }
        self.weights = weights;
        Ok(())
    }

    /// Scalar view of the samples; defined for `d = 1` only.
    pub fn scalars(&self) -> Result<Vec<f64>> {
        if self.dim != 1 {
            return Err(Error::Unsupported(format!(
                "scalar view needs d = 1, ensemble has d = {}",
                self.dim
            )));
        }
        Ok(self.samples.iter().map(|s| s[0]).collect())
    }

    /// Histogram of mixture lags `t - birth + 1`.
    pub fn composition(&self) -> LagComposition {
        let mut counts = BTreeMap::new();
        for &b in &self.birth {
            let lag = self.t - b + 1;
            *counts.entry(lag).or_insert(0usize) += 1;
        }
        LagComposition { counts }
    }

    pub(crate) fn advance(&mut self, refreshed: &[usize], replacements: Vec<State>) {
        debug_assert_eq!(refreshed.len(), replacements.len());
        self.t += 1;
        for (&slot, value) in refreshed.iter().zip(replacements) {
            self.samples[slot] = value;
            self.birth[slot] = self.t;
        }
        self.weights = None;
        debug_assert!(self.birth.iter().all(|&b| b <= self.t));
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [State] {
        &mut self.samples
    }
}

/// Per-lag sample counts of an ensemble; lag 1 is the freshest component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LagComposition {
    counts: BTreeMap<usize, usize>,
}

impl LagComposition {
    #[cfg(test)]
    pub(crate) fn from_counts(counts: BTreeMap<usize, usize>) -> Self {
        LagComposition { counts }
    }

    pub fn counts(&self) -> &BTreeMap<usize, usize> {
        &self.counts
    }

    pub fn count(&self, lag: usize) -> usize {
        self.counts.get(&lag).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

/// Number of slots refreshed per step: `round(L * beta)`, half up.
pub fn refresh_count(l: usize, beta: f64) -> usize {
    ((l as f64 * beta) + 0.5).floor() as usize
}

/// Draw `l` prior samples at step 0; bit-identical per seed.
pub fn init_ensemble(l: usize, prior: &PriorSpec, seed: u64) -> Result<Ensemble> {
    Ensemble::init(l, prior, &mut rng_from_seed(seed))
}

/// Advance the ensemble one step.
///
/// `round(L * beta)` slot indices chosen uniformly without replacement are
/// overwritten with kernel draws; each draw's parent is chosen uniformly with
/// replacement from the full pre-step ensemble. Refreshed slots are tagged
/// with the new step; survivors keep their tags.
pub fn evolve_step<R: Rng + ?Sized>(
    ensemble: &mut Ensemble,
    kernel: &TransitionKernelSpec,
    beta: f64,
    rng: &mut R,
) -> Result<()> {
    if !beta.is_finite() || !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid_parameter(format!(
            "beta must lie in [0, 1], got {beta}"
        )));
    }
    kernel.validate()?;
    if kernel.dim != ensemble.dim {
        return Err(Error::invalid_parameter(format!(
            "kernel d = {} does not match ensemble d = {}",
            kernel.dim, ensemble.dim
        )));
    }
    let l = ensemble.len();
    let k = refresh_count(l, beta);

    let slots: Vec<usize> = rand::seq::index::sample(rng, l, k).into_vec();
    // Parents are read from the pre-step set, before any slot is overwritten.
    let parents: Vec<State> = (0..k)
        .map(|_| ensemble.samples[rng.random_range(0..l)].clone())
        .collect();
    let replacements: Vec<State> = parents.iter().map(|p| kernel.sample(p, rng)).collect();

    ensemble.advance(&slots, replacements);
    Ok(())
}

/// Parameters for a seeded chain run.
#[derive(Debug, Clone)]
pub struct ChainParams {
    pub particles: usize,
    pub prior: PriorSpec,
    pub kernel: TransitionKernelSpec,
    pub beta: f64,
    pub steps: usize,
    pub seed: u64,
}

/// Output of [`run_chain`]: the composition after each step and the final
/// sample set.
#[derive(Debug, Clone)]
pub struct ChainRun {
    pub compositions: Vec<LagComposition>,
    pub ensemble: Ensemble,
}

/// Run `steps` evolutions from a fresh prior ensemble, recording the lag
/// composition after each step. Deterministic given the seed.
pub fn run_chain(params: &ChainParams) -> Result<ChainRun> {
    if params.steps == 0 {
        return Err(Error::invalid_parameter("steps must be >= 1"));
    }
    let mut rng = rng_from_seed(params.seed);
    let mut ensemble = Ensemble::init(params.particles, &params.prior, &mut rng)?;
    let mut compositions = Vec::with_capacity(params.steps);
    for _ in 0..params.steps {
        evolve_step(&mut ensemble, &params.kernel, params.beta, &mut rng)?;
        debug_assert_eq!(ensemble.len(), params.particles);
        compositions.push(ensemble.composition());
    }
    Ok(ChainRun {
        compositions,
        ensemble,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_seed;

    fn normal_prior() -> PriorSpec {
        PriorSpec::normal(0.0, 1.0, 1)
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_ensemble(100, &normal_prior(), 7).unwrap();
        let b = init_ensemble(100, &normal_prior(), 7).unwrap();
        assert_eq!(a, b);
        assert!(a.birth().iter().all(|&x| x == 0));
        assert_eq!(a.t(), 0);
    }

    #[test]
    fn point_mass_prior() {
        let e = init_ensemble(1, &PriorSpec::point_mass(3.0, 1), 123).unwrap();
        assert_eq!(e.samples(), &[vec![3.0]]);
    }

    #[test]
    fn init_moments_near_standard_normal() {
        // standard-error bound ~ 3 / sqrt(L) = 0.03, asserted at 0.05
        let e = init_ensemble(10_000, &normal_prior(), 1).unwrap();
        let xs = e.scalars().unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.05, "std {}", var.sqrt());
    }

    #[test]
    fn fresh_ensemble_composition_is_all_lag_one() {
        let e = init_ensemble(10, &normal_prior(), 0).unwrap();
        let c = e.composition();
        assert_eq!(c.count(1), 10);
        assert_eq!(c.total(), 10);
    }

    #[test]
    fn beta_one_replaces_everything() {
        let mut e = init_ensemble(50, &normal_prior(), 5).unwrap();
        let kernel = TransitionKernelSpec::random_walk(1.0, 1);
        let mut rng = rng_from_seed(9);
        for _ in 0..3 {
            evolve_step(&mut e, &kernel, 1.0, &mut rng).unwrap();
            let c = e.composition();
            assert_eq!(c.count(1), 50);
        }
    }

    #[test]
    fn beta_zero_freezes_samples() {
        let mut e = init_ensemble(20, &normal_prior(), 2).unwrap();
        let before = e.samples().to_vec();
        let kernel = TransitionKernelSpec::random_walk(1.0, 1);
        let mut rng = rng_from_seed(3);
        evolve_step(&mut e, &kernel, 0.0, &mut rng).unwrap();
        assert_eq!(e.samples(), &before[..]);
        assert!(e.birth().iter().all(|&b| b == 0));
        assert_eq!(e.t(), 1);
    }

    #[test]
    fn one_step_refresh_count_from_rounding() {
        // k = round(10 * 0.3) = 3
        let mut e = init_ensemble(10, &normal_prior(), 4).unwrap();
        let kernel = TransitionKernelSpec::identity(1);
        let mut rng = rng_from_seed(8);
        evolve_step(&mut e, &kernel, 0.3, &mut rng).unwrap();
        let c = e.composition();
        assert_eq!(c.count(1), 3);
        assert_eq!(c.count(2), 7);
    }

    #[test]
    fn refresh_count_rounds_half_up() {
        assert_eq!(refresh_count(10, 0.25), 3);
        assert_eq!(refresh_count(10, 0.24), 2);
        assert_eq!(refresh_count(1000, 0.5), 500);
        assert_eq!(refresh_count(7, 1.0), 7);
        assert_eq!(refresh_count(7, 0.0), 0);
    }

    #[test]
    fn exactly_k_fresh_tags_and_constant_storage() {
        let mut e = init_ensemble(101, &normal_prior(), 6).unwrap();
        let kernel = TransitionKernelSpec::random_walk(0.5, 1);
        let mut rng = rng_from_seed(10);
        for step in 1..=20 {
            evolve_step(&mut e, &kernel, 0.37, &mut rng).unwrap();
            assert_eq!(e.len(), 101);
            assert_eq!(e.birth().len(), 101);
            assert_eq!(e.t(), step);
            let fresh = e.birth().iter().filter(|&&b| b == step).count();
            assert_eq!(fresh, refresh_count(101, 0.37));
            assert_eq!(e.composition().total(), 101);
        }
    }

    #[test]
    fn run_chain_single_step_beta_one() {
        let run = run_chain(&ChainParams {
            particles: 32,
            prior: normal_prior(),
            kernel: TransitionKernelSpec::identity(1),
            beta: 1.0,
            steps: 1,
            seed: 0,
        })
        .unwrap();
        assert_eq!(run.compositions.len(), 1);
        assert_eq!(run.compositions[0].count(1), 32);
    }

    #[test]
    fn run_chain_lag_one_is_deterministic() {
        let run = run_chain(&ChainParams {
            particles: 1000,
            prior: normal_prior(),
            kernel: TransitionKernelSpec::identity(1),
            beta: 0.5,
            steps: 20,
            seed: 77,
        })
        .unwrap();
        assert_eq!(run.compositions[19].count(1), 500);
    }

    #[test]
    fn run_chain_frozen_keeps_initial_tags() {
        let run = run_chain(&ChainParams {
            particles: 100,
            prior: normal_prior(),
            kernel: TransitionKernelSpec::identity(1),
            beta: 0.0,
            steps: 20,
            seed: 1,
        })
        .unwrap();
        // untouched initial draws sit at lag t + 1
        assert_eq!(run.compositions[19].count(21), 100);
    }

    #[test]
    fn run_chain_is_reproducible() {
        let params = ChainParams {
            particles: 64,
            prior: normal_prior(),
            kernel: TransitionKernelSpec::random_walk(0.3, 1),
            beta: 0.6,
            steps: 10,
            seed: 21,
        };
        let a = run_chain(&params).unwrap();
        let b = run_chain(&params).unwrap();
        assert_eq!(a.ensemble, b.ensemble);
        assert_eq!(a.compositions, b.compositions);
    }

    #[test]
    fn mean_lag_counts_follow_geometric_law() {
        // E[count at lag m] = L beta (1-beta)^(m-1); averaged over seeded runs
        let l = 100;
        let beta = 0.5;
        let runs = 400;
        let lags = 3;
        let mut sums = vec![0.0; lags];
        let mut sumsq = vec![0.0; lags];
        for r in 0..runs {
            let run = run_chain(&ChainParams {
                particles: l,
                prior: normal_prior(),
                kernel: TransitionKernelSpec::identity(1),
                beta,
                steps: 12,
                seed: derive_seed(1000, r),
            })
            .unwrap();
            let comp = run.compositions.last().unwrap();
            for (m, slot) in (1..=lags).zip(0..) {
                let c = comp.count(m) as f64;
                sums[slot] += c;
                sumsq[slot] += c * c;
            }
        }
        for m in 1..=lags {
            let mean = sums[m - 1] / runs as f64;
            let var = (sumsq[m - 1] / runs as f64 - mean * mean).max(0.0);
            let se = (var / runs as f64).sqrt().max(1e-9);
            let expected = l as f64 * beta * (1.0 - beta).powi(m as i32 - 1);
            let z = (mean - expected) / se;
            assert!(z.abs() < 4.0, "lag {m}: mean {mean}, expected {expected}, z {z}");
        }
    }
}
