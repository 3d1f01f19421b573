//! Importance filter over the recency-weighted mixture predictive.
//!
//! Each step weighs the predictive ensemble by the observation likelihood,
//! summarizes the weighted posterior, then rebuilds the next predictive set
//! by refreshing a `beta` fraction of slots with transition draws whose
//! parents come from the weighted posterior, and finally perturbs every
//! particle with the system noise. With `beta = 1`, zero noise, and the
//! identity kernel this is exactly multinomial importance resampling of a
//! first-order chain.
//!
//! Weights live in log space until normalization; a step whose weights all
//! collapse aborts with [`Error::DegenerateWeights`] and leaves the filter
//! state untouched.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::chain::{refresh_count, Ensemble};
use crate::error::{Error, Result};
use crate::mixing::DecaySpec;
use crate::models::{
    ObservationModelSpec, ObservationRecord, PriorSpec, State, TransitionKernelSpec,
};
use crate::rng::rng_from_seed;

/// How refreshed slots draw from the weighted posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resampling {
    /// Independent draws with replacement.
    #[default]
    Multinomial,
    /// Stratified positions over the cumulative weights; lower variance.
    Systematic,
}

/// Full specification of a filter run.
#[derive(Debug, Clone)]
pub struct FilterConfig {
    pub particles: usize,
    pub decay: DecaySpec,
    /// Zero-mean Gaussian system noise std, applied per dimension to every
    /// particle after resampling.
    pub noise_std: f64,
    pub prior: PriorSpec,
    pub kernel: TransitionKernelSpec,
    pub obs_model: ObservationModelSpec,
    pub resampling: Resampling,
    pub seed: u64,
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::invalid_parameter("particle count must be >= 1"));
        }
        if !self.noise_std.is_finite() || self.noise_std < 0.0 {
            return Err(Error::invalid_parameter(format!(
                "system noise std must be >= 0, got {}",
                self.noise_std
            )));
        }
        self.prior.validate()?;
        self.kernel.validate()?;
        self.obs_model.validate()?;
        if self.prior.dim != self.kernel.dim || self.prior.dim != self.obs_model.dim {
            return Err(Error::invalid_parameter(format!(
                "dimension mismatch: prior d={}, kernel d={}, observation d={}",
                self.prior.dim, self.kernel.dim, self.obs_model.dim
            )));
        }
        Ok(())
    }
}

/// Predictive ensemble between observations. Weights are never carried
/// across steps: the predictive set is equally weighted by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    ensemble: Ensemble,
}

impl FilterState {
    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn t(&self) -> usize {
        self.ensemble.t()
    }
}

/// Normalized importance weights plus the marginal-likelihood increment the
/// normalization would otherwise discard.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceWeights {
    values: Vec<f64>,
    log_marginal_increment: f64,
}

impl ImportanceWeights {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `log` of the mean unnormalized likelihood over particles.
    pub fn log_marginal_increment(&self) -> f64 {
        self.log_marginal_increment
    }
}

/// Moment summary of one weighted posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub ess: f64,
    pub log_marginal_increment: f64,
}

/// Likelihood-weigh the ensemble against an observation.
///
/// Weights are computed in log space, stabilized by the maximum
/// log-likelihood, and normalized to sum 1. If every weight vanishes even
/// after stabilization the step is not salvageable and
/// [`Error::DegenerateWeights`] is returned.
pub fn weigh(
    ensemble: &Ensemble,
    y: &[f64],
    obs_model: &ObservationModelSpec,
) -> Result<ImportanceWeights> {
    let log_liks: Vec<f64> = ensemble
        .samples()
        .iter()
        .map(|z| obs_model.log_likelihood(y, z))
        .collect::<Result<_>>()?;
    let max = log_liks.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !max.is_finite() {
        return Err(Error::DegenerateWeights(format!(
            "max log-likelihood is {max}; no particle explains the observation"
        )));
    }
    let mut values: Vec<f64> = log_liks.iter().map(|ll| (ll - max).exp()).collect();
    let sum: f64 = values.iter().sum();
    if !sum.is_finite() || sum <= 0.0 {
        return Err(Error::DegenerateWeights(format!(
            "stabilized weights sum to {sum}"
        )));
    }
    for v in &mut values {
        *v /= sum;
    }
    let log_marginal_increment = max + (sum / ensemble.len() as f64).ln();
    Ok(ImportanceWeights {
        values,
        log_marginal_increment,
    })
}

/// Weighted moments of the posterior the weights represent.
pub fn summarize(ensemble: &Ensemble, weights: &ImportanceWeights) -> PosteriorSummary {
    let dim = ensemble.dim();
    let w = weights.values();
    let mut mean = vec![0.0; dim];
    for (z, &wl) in ensemble.samples().iter().zip(w) {
        for (m, zi) in mean.iter_mut().zip(z) {
            *m += wl * zi;
        }
    }
    let mut var = vec![0.0; dim];
    for (z, &wl) in ensemble.samples().iter().zip(w) {
        for ((v, zi), m) in var.iter_mut().zip(z).zip(&mean) {
            let d = zi - m;
            *v += wl * d * d;
        }
    }
    let std = var.iter().map(|v| v.max(0.0).sqrt()).collect();
    let sum_sq: f64 = w.iter().map(|x| x * x).sum();
    let ess = (1.0 / sum_sq).clamp(1.0, ensemble.len() as f64);
    PosteriorSummary {
        mean,
        std,
        ess,
        log_marginal_increment: weights.log_marginal_increment(),
    }
}

/// Rebuild the predictive ensemble from the weighted posterior.
///
/// `round(L * beta)` slots chosen uniformly without replacement are refreshed
/// with transition draws whose parents come from the weighted posterior
/// (multinomial or systematic); refreshed slots are tagged with the new step.
/// System noise is then added to all `L` particles, survivors included, so
/// the whole set random-walks each step as the update rule prescribes.
pub fn resample_mix<R: Rng + ?Sized>(
    ensemble: &mut Ensemble,
    weights: &[f64],
    beta: f64,
    kernel: &TransitionKernelSpec,
    noise_std: f64,
    scheme: Resampling,
    rng: &mut R,
) -> Result<()> {
    if !beta.is_finite() || !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid_parameter(format!(
            "beta must lie in [0, 1], got {beta}"
        )));
    }
    if weights.len() != ensemble.len() {
        return Err(Error::invalid_parameter(format!(
            "{} weights for {} particles",
            weights.len(),
            ensemble.len()
        )));
    }
    let l = ensemble.len();
    let k = refresh_count(l, beta);

    let slots: Vec<usize> = rand::seq::index::sample(rng, l, k).into_vec();
    let parent_indices = match scheme {
        Resampling::Multinomial => multinomial_indices(weights, k, rng)?,
        Resampling::Systematic => systematic_indices(weights, k, rng),
    };
    let replacements: Vec<State> = parent_indices
        .iter()
        .map(|&p| kernel.sample(&ensemble.samples()[p], rng))
        .collect();
    ensemble.advance(&slots, replacements);

    if noise_std > 0.0 {
        let noise = rand_distr::Normal::new(0.0, noise_std).expect("validated");
        for sample in ensemble.samples_mut() {
            for x in sample.iter_mut() {
                *x += rand_distr::Distribution::sample(&noise, rng);
            }
        }
    }
    Ok(())
}

fn multinomial_indices<R: Rng + ?Sized>(
    weights: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let dist = rand::distr::weighted::WeightedIndex::new(weights)
        .map_err(|e| Error::invalid_parameter(format!("bad weights: {e}")))?;
    Ok((0..k)
        .map(|_| rand_distr::Distribution::sample(&dist, rng))
        .collect())
}

fn systematic_indices<R: Rng + ?Sized>(weights: &[f64], k: usize, rng: &mut R) -> Vec<usize> {
    if k == 0 {
        return Vec::new();
    }
    let offset: f64 = rng.random::<f64>() / k as f64;
    let mut indices = Vec::with_capacity(k);
    let mut cumulative = weights[0];
    let mut idx = 0usize;
    for i in 0..k {
        let position = offset + i as f64 / k as f64;
        while position > cumulative && idx + 1 < weights.len() {
            idx += 1;
            cumulative += weights[idx];
        }
        indices.push(idx);
    }
    indices
}

/// A running filter: configuration, current predictive state, and the
/// seeded generator. Single-writer; clone to fork deterministically.
#[derive(Debug, Clone)]
pub struct Filter {
    config: FilterConfig,
    state: FilterState,
    rng: ChaCha12Rng,
}

impl Filter {
    /// Initialize the particle set from the prior. Per the update rule, the
    /// initial set serves directly as the first prediction: no noise is
    /// applied before the first observation is weighed.
    pub fn new(config: FilterConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_from_seed(config.seed);
        let ensemble = Ensemble::init(config.particles, &config.prior, &mut rng)?;
        Ok(Filter {
            config,
            state: FilterState { ensemble },
            rng,
        })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn state(&self) -> &FilterState {
        &self.state
    }

    /// One observation update: weigh, summarize, then rebuild the
    /// predictive set. The summary reflects the posterior before system
    /// noise. On error the state is left exactly as it was.
    pub fn step(&mut self, y: &[f64]) -> Result<PosteriorSummary> {
        let weights = weigh(&self.state.ensemble, y, &self.config.obs_model)?;
        let summary = summarize(&self.state.ensemble, &weights);
        resample_mix(
            &mut self.state.ensemble,
            weights.values(),
            self.config.decay.beta,
            &self.config.kernel,
            self.config.noise_std,
            self.config.resampling,
            &mut self.rng,
        )?;
        Ok(summary)
    }
}

/// One trace entry of a filter run.
#[derive(Debug, Clone)]
pub struct StepSummary {
    /// Timestamp of the observation record that produced this step.
    pub t: u64,
    pub summary: PosteriorSummary,
    /// Per-dimension absolute error of the posterior mean, when the record
    /// carried ground truth.
    pub abs_error: Option<Vec<f64>>,
}

/// Run the filter over an observation stream, one summary per record.
/// Deterministic given the config seed.
pub fn run_filter(config: FilterConfig, records: &[ObservationRecord]) -> Result<Vec<StepSummary>> {
    if records.is_empty() {
        return Err(Error::NoData);
    }
    let mut filter = Filter::new(config)?;
    let dim = filter.config.obs_model.dim;
    let mut trace = Vec::with_capacity(records.len());
    for (idx, record) in records.iter().enumerate() {
        if record.y.len() != dim {
            return Err(Error::input(
                idx + 1,
                format!("observation has d={}, filter expects d={dim}", record.y.len()),
            ));
        }
        if record.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::input(idx + 1, "non-finite observation"));
        }
        let summary = filter.step(&record.y)?;
        let abs_error = record.truth.as_ref().map(|truth| {
            truth
                .iter()
                .zip(&summary.mean)
                .map(|(t, m)| (t - m).abs())
                .collect()
        });
        trace.push(StepSummary {
            t: record.t,
            summary,
            abs_error,
        });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::init_ensemble;
    use crate::mixing::Horizon;
    use crate::models::GeneratorKind;

    fn ensemble_of(values: &[f64]) -> Ensemble {
        let mut e = init_ensemble(values.len(), &PriorSpec::point_mass(0.0, 1), 0).unwrap();
        for (slot, v) in e.samples_mut().iter_mut().zip(values) {
            slot[0] = *v;
        }
        e
    }

    fn config(beta: f64, particles: usize, noise_std: f64, seed: u64) -> FilterConfig {
        FilterConfig {
            particles,
            decay: DecaySpec::new(beta, Horizon::Unbounded).unwrap(),
            noise_std,
            prior: PriorSpec::normal(0.0, 1.0, 1),
            kernel: TransitionKernelSpec::identity(1),
            obs_model: ObservationModelSpec::gaussian(1.0, 1),
            resampling: Resampling::Multinomial,
            seed,
        }
    }

    #[test]
    fn weigh_two_particles_hand_computed() {
        // normalize exp(-0.5) against exp(0)
        let e = ensemble_of(&[0.0, 1.0]);
        let w = weigh(&e, &[1.0], &ObservationModelSpec::gaussian(1.0, 1)).unwrap();
        assert!((w.values()[0] - 0.37754066879814546).abs() < 1e-12);
        assert!((w.values()[1] - 0.6224593312018546).abs() < 1e-12);
        let sum: f64 = w.values().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weigh_identical_particles_uniform() {
        let e = ensemble_of(&[2.0; 10]);
        let w = weigh(&e, &[0.3], &ObservationModelSpec::gaussian(1.0, 1)).unwrap();
        assert!(w.values().iter().all(|&x| (x - 0.1).abs() < 1e-12));
    }

    #[test]
    fn weigh_single_particle_is_unit() {
        let e = ensemble_of(&[4.0]);
        let w = weigh(&e, &[0.0], &ObservationModelSpec::gaussian(1.0, 1)).unwrap();
        assert_eq!(w.values(), &[1.0]);
    }

    #[test]
    fn summarize_ess_cases() {
        let e = ensemble_of(&[1.0, 2.0, 3.0]);
        let uniform = ImportanceWeights {
            values: vec![1.0 / 3.0; 3],
            log_marginal_increment: 0.0,
        };
        assert!((summarize(&e, &uniform).ess - 3.0).abs() < 1e-9);

        let one_hot = ImportanceWeights {
            values: vec![0.0, 1.0, 0.0],
            log_marginal_increment: 0.0,
        };
        let s = summarize(&e, &one_hot);
        assert_eq!(s.ess, 1.0);
        assert_eq!(s.mean, vec![2.0]);
        assert_eq!(s.std, vec![0.0]);

        let skewed = ImportanceWeights {
            values: vec![0.5, 0.25, 0.25],
            log_marginal_increment: 0.0,
        };
        // 1 / 0.375
        assert!((summarize(&e, &skewed).ess - 2.6666666666666665).abs() < 1e-9);
    }

    #[test]
    fn resample_beta_zero_keeps_particles() {
        let mut e = ensemble_of(&[1.0, 2.0, 3.0, 4.0]);
        let before = e.samples().to_vec();
        let mut rng = rng_from_seed(5);
        resample_mix(
            &mut e,
            &[0.97, 0.01, 0.01, 0.01],
            0.0,
            &TransitionKernelSpec::identity(1),
            0.0,
            Resampling::Multinomial,
            &mut rng,
        )
        .unwrap();
        assert_eq!(e.samples(), &before[..]);
        assert_eq!(e.t(), 1);
    }

    #[test]
    fn resample_one_hot_half_beta() {
        // k = 2 slots become copies of the single weighted particle; the
        // other two keep their values
        for scheme in [Resampling::Multinomial, Resampling::Systematic] {
            let mut e = ensemble_of(&[1.0, 2.0, 3.0, 4.0]);
            let before = e.samples().to_vec();
            let mut rng = rng_from_seed(9);
            resample_mix(
                &mut e,
                &[0.0, 0.0, 1.0, 0.0],
                0.5,
                &TransitionKernelSpec::identity(1),
                0.0,
                scheme,
                &mut rng,
            )
            .unwrap();
            let fresh: Vec<usize> = (0..4).filter(|&i| e.birth()[i] == 1).collect();
            assert_eq!(fresh.len(), 2);
            for i in 0..4 {
                if fresh.contains(&i) {
                    assert_eq!(e.samples()[i][0], 3.0);
                } else {
                    assert_eq!(e.samples()[i], before[i]);
                }
            }
        }
    }

    #[test]
    fn beta_one_composition_all_fresh() {
        let mut filter = Filter::new(config(1.0, 200, 0.1, 3)).unwrap();
        for i in 0..5 {
            filter.step(&[i as f64 * 0.1]).unwrap();
            let comp = filter.state().ensemble().composition();
            assert_eq!(comp.count(1), 200);
        }
    }

    #[test]
    fn degenerate_weights_leave_state_untouched() {
        // particles so far out that the squared residual overflows: every
        // log-likelihood is -inf and stabilization cannot recover
        let cfg = FilterConfig {
            particles: 4,
            decay: DecaySpec::new(0.5, Horizon::Unbounded).unwrap(),
            noise_std: 0.0,
            prior: PriorSpec::point_mass(1e200, 1),
            kernel: TransitionKernelSpec::identity(1),
            obs_model: ObservationModelSpec::gaussian(1.0, 1),
            resampling: Resampling::Multinomial,
            seed: 1,
        };
        let mut filter = Filter::new(cfg).unwrap();
        let before = filter.state().clone();
        let err = filter.step(&[0.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateWeights(_)));
        assert_eq!(filter.state(), &before);
    }

    #[test]
    fn point_mass_prior_exact_tracking() {
        // particles at the truth, zero noise, beta = 1: the filter is exact
        let cfg = FilterConfig {
            particles: 64,
            decay: DecaySpec::new(1.0, Horizon::Unbounded).unwrap(),
            noise_std: 0.0,
            prior: PriorSpec::point_mass(2.5, 1),
            kernel: TransitionKernelSpec::identity(1),
            obs_model: ObservationModelSpec::gaussian(1.0, 1),
            resampling: Resampling::Multinomial,
            seed: 4,
        };
        let mut filter = Filter::new(cfg).unwrap();
        for _ in 0..10 {
            let s = filter.step(&[2.0]).unwrap();
            assert_eq!(s.mean, vec![2.5]);
            assert_eq!(s.std, vec![0.0]);
        }
    }

    #[test]
    fn run_filter_single_observation_matches_manual_cycle() {
        let cfg = config(1.0, 128, 0.0, 8);
        let record = ObservationRecord {
            t: 0,
            y: vec![0.7],
            truth: None,
        };
        let trace = run_filter(cfg.clone(), std::slice::from_ref(&record)).unwrap();

        let mut rng = rng_from_seed(cfg.seed);
        let ensemble = Ensemble::init(cfg.particles, &cfg.prior, &mut rng).unwrap();
        let weights = weigh(&ensemble, &record.y, &cfg.obs_model).unwrap();
        let expected = summarize(&ensemble, &weights);
        assert_eq!(trace.len(), 1);
        assert_eq!(trace[0].summary, expected);
    }

    #[test]
    fn run_filter_is_bit_deterministic() {
        let spec = crate::models::GeneratorSpec {
            kind: GeneratorKind::Drift { std: 0.4 },
            obs_std: 0.5,
            steps: 30,
            seed: 77,
        };
        let records = crate::models::generate(&spec).unwrap();
        let a = run_filter(config(0.7, 300, 0.2, 21), &records).unwrap();
        let b = run_filter(config(0.7, 300, 0.2, 21), &records).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.summary, y.summary);
            assert_eq!(x.abs_error, y.abs_error);
        }
    }

    #[test]
    fn run_filter_empty_stream_is_no_data() {
        assert!(matches!(
            run_filter(config(0.5, 10, 0.0, 0), &[]),
            Err(Error::NoData)
        ));
    }

    #[test]
    fn stationary_stream_converges_to_kalman_fixed_point() {
        let cfg = FilterConfig {
            particles: 2000,
            decay: DecaySpec::new(0.8, Horizon::Unbounded).unwrap(),
            noise_std: 0.15,
            prior: PriorSpec::normal(1.0, 1.0, 1),
            kernel: TransitionKernelSpec::identity(1),
            obs_model: ObservationModelSpec::gaussian(1.0, 1),
            resampling: Resampling::Multinomial,
            seed: 13,
        };
        let records: Vec<ObservationRecord> = (0..150)
            .map(|t| ObservationRecord {
                t,
                y: vec![0.0],
                truth: Some(vec![0.0]),
            })
            .collect();
        let trace = run_filter(cfg, &records).unwrap();
        for step in trace.iter().skip(100) {
            assert!(
                step.summary.mean[0].abs() < 0.1,
                "t={} mean={}",
                step.t,
                step.summary.mean[0]
            );
        }
    }

    #[test]
    fn ess_and_weight_sums_within_bounds_along_run() {
        let spec = crate::models::GeneratorSpec {
            kind: GeneratorKind::Sinusoid {
                amp: 2.0,
                period: 25.0,
            },
            obs_std: 0.5,
            steps: 60,
            seed: 5,
        };
        let records = crate::models::generate(&spec).unwrap();
        let l = 500;
        let trace = run_filter(config(0.6, l, 0.3, 2), &records).unwrap();
        for s in &trace {
            assert!(s.summary.ess >= 1.0 && s.summary.ess <= l as f64);
            assert!(s.summary.std[0] >= 0.0);
        }
    }
}
