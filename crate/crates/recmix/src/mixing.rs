//! Recency-decay mixing coefficients and integer sample allocation.
//!
//! A high-order transition mixture weighs the component conditioned on the
//! state `m` steps back by a geometrically decaying coefficient. This module
//! computes those coefficients, normalized over a finite horizon or in closed
//! form over an unbounded one, and apportions a fixed sample budget across
//! the components deterministically.

use crate::error::{Error, Result};

/// Horizon of the mixture: how many past states may contribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    /// Exactly `M` lags, `M >= 1`.
    Finite(usize),
    /// Geometric tail over all past states.
    Unbounded,
}

/// Parameters of the geometric recency decay.
///
/// `beta` is the rate of decrease: larger values concentrate mass on recent
/// states; `beta = 1` puts all mass at lag 1 and `beta = 0` freezes decay
/// entirely (admitted only with a finite horizon, where it yields equal
/// weights). `theta0` is the base coefficient of the decay curve; it cancels
/// under normalization and is retained only so configurations can state it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecaySpec {
    pub beta: f64,
    pub theta0: f64,
    pub horizon: Horizon,
}

impl DecaySpec {
    /// Decay with the default base coefficient `theta0 = 1`.
    pub fn new(beta: f64, horizon: Horizon) -> Result<Self> {
        Self::with_theta0(beta, 1.0, horizon)
    }

    pub fn with_theta0(beta: f64, theta0: f64, horizon: Horizon) -> Result<Self> {
        if !beta.is_finite() || !(0.0..=1.0).contains(&beta) {
            return Err(Error::invalid_parameter(format!(
                "beta must lie in [0, 1], got {beta}"
            )));
        }
        if !theta0.is_finite() || theta0 <= 0.0 {
            return Err(Error::invalid_parameter(format!(
                "theta0 must be positive, got {theta0}"
            )));
        }
        if let Horizon::Finite(m) = horizon {
            if m == 0 {
                return Err(Error::invalid_parameter("horizon must be >= 1"));
            }
        }
        if horizon == Horizon::Unbounded && beta == 0.0 {
            return Err(Error::NonNormalizable(
                "beta = 0 over an unbounded horizon has no normalization".into(),
            ));
        }
        Ok(DecaySpec {
            beta,
            theta0,
            horizon,
        })
    }

    /// Beta = 0 keeps every sample forever: the chain never refreshes.
    pub fn is_frozen(&self) -> bool {
        self.beta == 0.0
    }
}

/// Normalized mixing coefficients; index 0 holds the lag-1 weight.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingWeights {
    weights: Vec<f64>,
}

impl MixingWeights {
    /// Wrap a weight vector, validating normalization.
    ///
    /// Weights must be finite, in `[0, 1]`, and sum to 1 within `1e-9`
    /// (geometric constructions are exact to `1e-12`; the looser bound admits
    /// hand-built vectors). Zero entries are allowed so the `beta = 1`
    /// boundary `(1, 0, ...)` is representable.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid_parameter("weights must be nonempty"));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || !(0.0..=1.0).contains(&w) {
                return Err(Error::invalid_parameter(format!(
                    "weight at lag {} out of [0, 1]: {w}",
                    i + 1
                )));
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NonNormalizable(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(MixingWeights { weights })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Weight of lag `m` (1-based).
    pub fn lag(&self, m: usize) -> Option<f64> {
        if m == 0 {
            return None;
        }
        self.weights.get(m - 1).copied()
    }
}

/// Integer sample counts per lag; sums exactly to the requested budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    counts: Vec<usize>,
}

impl Allocation {
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Normalized mixing weights for a decay specification.
///
/// Over a finite horizon `M` the decay curve `theta0 * (1 - beta)^m`,
/// `m = 1..=M`, is normalized to sum 1 (the base coefficient cancels). Over
/// an unbounded horizon the closed form `beta * (1 - beta)^(m-1)` is returned
/// truncated where its tail mass drops below `1e-12`, so the sum invariant
/// still holds. The two routes agree after normalization at every horizon;
/// the closed form is the limit of the finite one.
pub fn mixing_weights(spec: &DecaySpec) -> Result<MixingWeights> {
    match spec.horizon {
        Horizon::Finite(m) => {
            if spec.beta == 1.0 {
                // All decay terms vanish; the limit puts full mass at lag 1.
                let mut w = vec![0.0; m];
                w[0] = 1.0;
                return MixingWeights::new(w);
            }
            let ratio = 1.0 - spec.beta;
            let mut terms = Vec::with_capacity(m);
            let mut term = ratio;
            for _ in 0..m {
                terms.push(term);
                term *= ratio;
            }
            let sum: f64 = terms.iter().sum();
            if sum <= 0.0 || !sum.is_finite() {
                return Err(Error::NonNormalizable(format!(
                    "decay terms sum to {sum} for beta {}",
                    spec.beta
                )));
            }
            for t in &mut terms {
                *t /= sum;
            }
            MixingWeights::new(terms)
        }
        Horizon::Unbounded => {
            let m = effective_horizon(spec.beta, 1e-12)?;
            MixingWeights::new(closed_form_weights(spec.beta, m)?)
        }
    }
}

/// First `len` terms of the unbounded closed form `beta * (1 - beta)^(m-1)`.
///
/// Not renormalized: the values are the exact infinite-horizon coefficients,
/// so a short prefix sums to less than 1.
pub fn closed_form_weights(beta: f64, len: usize) -> Result<Vec<f64>> {
    if !beta.is_finite() || !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid_parameter(format!(
            "beta must lie in [0, 1], got {beta}"
        )));
    }
    if beta == 0.0 {
        return Err(Error::NonNormalizable(
            "beta = 0 has no closed-form weights".into(),
        ));
    }
    if len == 0 {
        return Err(Error::invalid_parameter("requested length must be >= 1"));
    }
    let ratio = 1.0 - beta;
    let mut out = Vec::with_capacity(len);
    let mut value = beta;
    for _ in 0..len {
        out.push(value);
        value *= ratio;
    }
    Ok(out)
}

/// Split a sample budget of `l` across components by largest-remainder
/// apportionment.
///
/// Every count is within 1 of its real-valued share `theta_m * l`, the counts
/// sum to `l` exactly, and remainder ties go to the lower lag so recency wins
/// deterministically.
pub fn allocate_samples(l: usize, weights: &MixingWeights) -> Result<Allocation> {
    if l == 0 {
        return Err(Error::invalid_parameter("sample budget must be >= 1"));
    }
    let shares: Vec<f64> = weights.as_slice().iter().map(|w| w * l as f64).collect();
    let mut counts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let leftover = l - assigned;

    let mut order: Vec<usize> = (0..shares.len()).collect();
    // Stable sort: equal remainders keep index order, i.e. lower lag first.
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.partial_cmp(&fa).expect("finite remainders")
    });
    for &idx in order.iter().take(leftover) {
        counts[idx] += 1;
    }

    debug_assert_eq!(counts.iter().sum::<usize>(), l);
    Ok(Allocation { counts })
}

/// Smallest `M` whose geometric tail mass `(1 - beta)^M` drops below
/// `epsilon`; the truncation horizon that loses less than `epsilon` of the
/// unbounded mixture.
pub fn effective_horizon(beta: f64, epsilon: f64) -> Result<usize> {
    if !beta.is_finite() || beta < 0.0 || beta > 1.0 {
        return Err(Error::invalid_parameter(format!(
            "beta must lie in [0, 1], got {beta}"
        )));
    }
    if beta == 0.0 {
        return Err(Error::NonNormalizable(
            "beta = 0 has unbounded tail mass".into(),
        ));
    }
    if !epsilon.is_finite() || epsilon <= 0.0 || epsilon >= 1.0 {
        return Err(Error::invalid_parameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let ratio = 1.0 - beta;
    if ratio == 0.0 {
        return Ok(1);
    }
    let tail = |m: usize| ratio.powi(m.min(i32::MAX as usize) as i32);
    let mut m = (epsilon.ln() / ratio.ln()).ceil().max(1.0) as usize;
    while m > 1 && tail(m - 1) < epsilon {
        m -= 1;
    }
    while tail(m) >= epsilon {
        m += 1;
    }
    Ok(m)
}
