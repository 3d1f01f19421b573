//! Ground-truth machinery for validating the constant-memory approximation.
//!
//! Two references live here. The explicit mixture keeps every past sample
//! set and rebuilds each step literally from the decayed mixture over all
//! stored history, so its memory grows linearly with time; the fixed-budget
//! chain must match it distributionally. The scalar Kalman recursion is the
//! closed-form posterior for the linear-Gaussian identity model and pins
//! down what the `beta = 1` filter must track.

use rand::Rng;

use crate::chain::{evolve_step, Ensemble};
use crate::error::{Error, Result};
use crate::metrics::wasserstein1;
use crate::mixing::{allocate_samples, effective_horizon, mixing_weights, DecaySpec, Horizon};
use crate::models::{PriorSpec, State, TransitionKernelSpec};
use crate::rng::{derive_seed, rng_from_seed};

/// Tail mass discarded when truncating an unbounded decay for the explicit
/// construction.
const ORACLE_TAIL_EPSILON: f64 = 1e-6;

/// Full per-step sample history; bank `j` holds the `L` samples drawn at
/// step `j`. Storage grows by one bank per step.
#[derive(Debug, Clone)]
pub struct HistoryBank {
    banks: Vec<Vec<State>>,
    l: usize,
}

impl HistoryBank {
    /// Start history with `l` prior draws at step 0.
    pub fn init<R: Rng + ?Sized>(l: usize, prior: &PriorSpec, rng: &mut R) -> Result<Self> {
        if l == 0 {
            return Err(Error::invalid_parameter("bank size must be >= 1"));
        }
        prior.validate()?;
        let bank: Vec<State> = (0..l).map(|_| prior.sample(rng)).collect();
        Ok(HistoryBank {
            banks: vec![bank],
            l,
        })
    }

    /// Current step index; equals the number of evolutions applied.
    pub fn t(&self) -> usize {
        self.banks.len() - 1
    }

    pub fn bank_count(&self) -> usize {
        self.banks.len()
    }

    pub fn bank_size(&self) -> usize {
        self.l
    }

    /// Total stored samples across all banks: the linearly growing cost.
    pub fn total_samples(&self) -> usize {
        self.banks.iter().map(Vec::len).sum()
    }

    pub fn bank(&self, step: usize) -> Option<&[State]> {
        self.banks.get(step).map(Vec::as_slice)
    }

    pub fn latest(&self) -> &[State] {
        self.banks.last().expect("nonempty by construction")
    }

    fn push(&mut self, bank: Vec<State>) {
        debug_assert_eq!(bank.len(), self.l);
        self.banks.push(bank);
    }
}

/// Draw the next sample set literally from the decayed mixture over the
/// stored history.
///
/// The sample budget `l` is apportioned across lags by the normalized decay
/// weights (horizon truncated to the available history, with the weights
/// renormalized); the lag-`m` share is produced by applying the kernel to
/// parents drawn uniformly from the bank `m` steps back. Component sizes
/// equal the deterministic allocation exactly.
pub fn explicit_mixture<R: Rng + ?Sized>(
    history: &HistoryBank,
    spec: &DecaySpec,
    l: usize,
    kernel: &TransitionKernelSpec,
    rng: &mut R,
) -> Result<Vec<State>> {
    if history.bank_count() == 0 {
        return Err(Error::InvalidState("history is empty".into()));
    }
    if l == 0 {
        return Err(Error::invalid_parameter("sample budget must be >= 1"));
    }
    kernel.validate()?;
    let available = history.bank_count();
    let target = match spec.horizon {
        Horizon::Finite(m) => m,
        Horizon::Unbounded => effective_horizon(spec.beta, ORACLE_TAIL_EPSILON)?,
    };
    let m = target.min(available);
    let weights = mixing_weights(&DecaySpec::with_theta0(
        spec.beta,
        spec.theta0,
        Horizon::Finite(m),
    )?)?;
    let allocation = allocate_samples(l, &weights)?;

    let newest = history.bank_count() - 1;
    let mut out = Vec::with_capacity(l);
    for (lag, &count) in (1..=m).zip(allocation.counts()) {
        let bank = history.bank(newest + 1 - lag).expect("lag within history");
        for _ in 0..count {
            let parent = &bank[rng.random_range(0..bank.len())];
            out.push(kernel.sample(parent, rng));
        }
    }
    debug_assert_eq!(out.len(), l);
    Ok(out)
}

/// Evolve the explicit construction for `steps` steps, storing every bank.
pub fn run_oracle(
    l: usize,
    prior: &PriorSpec,
    kernel: &TransitionKernelSpec,
    spec: &DecaySpec,
    steps: usize,
    seed: u64,
) -> Result<HistoryBank> {
    let mut rng = rng_from_seed(seed);
    let mut history = HistoryBank::init(l, prior, &mut rng)?;
    for _ in 0..steps {
        let bank = explicit_mixture(&history, spec, l, kernel, &mut rng)?;
        history.push(bank);
    }
    Ok(history)
}

/// Per-step distances from [`oracle_vs_chain_distance`].
#[derive(Debug, Clone, Copy)]
pub struct DistanceRow {
    pub t: usize,
    /// Wasserstein-1 between the fixed-budget chain and one explicit run.
    pub distance: f64,
    /// Wasserstein-1 between two independent explicit runs: the Monte Carlo
    /// noise floor at this sample size.
    pub baseline: f64,
}

/// Parameters for the chain-versus-oracle comparison.
#[derive(Debug, Clone)]
pub struct CompareParams {
    pub particles: usize,
    pub prior: PriorSpec,
    pub kernel: TransitionKernelSpec,
    pub beta: f64,
    pub steps: usize,
    pub seed: u64,
}

/// Run the fixed-budget chain and the explicit construction side by side
/// with independent randomness and report the per-step Wasserstein-1
/// distance, plus the self-distance baseline between two independent
/// explicit runs. Scalar state only.
pub fn oracle_vs_chain_distance(params: &CompareParams) -> Result<Vec<DistanceRow>> {
    if params.prior.dim != 1 || params.kernel.dim != 1 {
        return Err(Error::Unsupported(
            "exact Wasserstein-1 comparison is defined for d = 1 only".into(),
        ));
    }
    if params.steps == 0 {
        return Err(Error::invalid_parameter("steps must be >= 1"));
    }
    let spec = DecaySpec::new(params.beta, Horizon::Unbounded)?;

    let mut chain_rng = rng_from_seed(derive_seed(params.seed, 1));
    let mut ensemble = Ensemble::init(params.particles, &params.prior, &mut chain_rng)?;

    let mut oracle_rngs = [
        rng_from_seed(derive_seed(params.seed, 2)),
        rng_from_seed(derive_seed(params.seed, 3)),
    ];
    let mut histories = Vec::new();
    for rng in &mut oracle_rngs {
        histories.push(HistoryBank::init(params.particles, &params.prior, rng)?);
    }

    let mut rows = Vec::with_capacity(params.steps);
    for step in 1..=params.steps {
        evolve_step(&mut ensemble, &params.kernel, params.beta, &mut chain_rng)?;
        for (history, rng) in histories.iter_mut().zip(&mut oracle_rngs) {
            let bank = explicit_mixture(history, &spec, params.particles, &params.kernel, rng)?;
            history.push(bank);
        }
        let chain_scalars = ensemble.scalars()?;
        let flat =
            |bank: &[State]| -> Vec<f64> { bank.iter().map(|s| s[0]).collect::<Vec<f64>>() };
        let oracle_a = flat(histories[0].latest());
        let oracle_b = flat(histories[1].latest());
        rows.push(DistanceRow {
            t: step,
            distance: wasserstein1(&chain_scalars, &oracle_a)?,
            baseline: wasserstein1(&oracle_a, &oracle_b)?,
        });
    }
    Ok(rows)
}

/// Scalar Gaussian belief of the reference filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBelief {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianBelief {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance < 0.0 {
            return Err(Error::invalid_parameter(format!(
                "belief needs finite mean and variance >= 0, got ({mean}, {variance})"
            )));
        }
        Ok(GaussianBelief { mean, variance })
    }

    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// One predict-update step of the scalar Kalman recursion for the identity
/// transition: inflate by the process noise, then correct toward the
/// observation with the optimal gain.
pub fn kalman_step(
    belief: &GaussianBelief,
    y: f64,
    obs_noise: f64,
    process_noise: f64,
) -> Result<GaussianBelief> {
    if !y.is_finite() {
        return Err(Error::invalid_parameter("observation must be finite"));
    }
    if !obs_noise.is_finite() || obs_noise <= 0.0 {
        return Err(Error::invalid_parameter(format!(
            "observation noise variance must be > 0, got {obs_noise}"
        )));
    }
    if !process_noise.is_finite() || process_noise < 0.0 {
        return Err(Error::invalid_parameter(format!(
            "process noise variance must be >= 0, got {process_noise}"
        )));
    }
    let predicted = belief.variance + process_noise;
    let gain = predicted / (predicted + obs_noise);
    GaussianBelief::new(
        belief.mean + gain * (y - belief.mean),
        predicted * (1.0 - gain),
    )
}
