//! Plug-in transition kernels, observation likelihoods, priors, and
//! synthetic ground-truth stream generators.
//!
//! States are dense vectors in `R^d`; the scalar case `d = 1` is the primary
//! supported dimension, and kernels and likelihoods treat their parameters
//! per-dimension.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// A latent state: a point in `R^d`.
pub type State = Vec<f64>;

/// Initial distribution for ensembles and particle sets.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub kind: PriorKind,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorKind {
    Normal { mean: f64, std: f64 },
    PointMass { value: f64 },
}

impl PriorSpec {
    pub fn normal(mean: f64, std: f64, dim: usize) -> Self {
        PriorSpec {
            kind: PriorKind::Normal { mean, std },
            dim,
        }
    }

    pub fn point_mass(value: f64, dim: usize) -> Self {
        PriorSpec {
            kind: PriorKind::PointMass { value },
            dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid_parameter("prior dimension must be >= 1"));
        }
        match self.kind {
            PriorKind::Normal { mean, std } => {
                if !mean.is_finite() || !std.is_finite() || std < 0.0 {
                    return Err(Error::invalid_parameter(format!(
                        "normal prior needs finite mean and std >= 0, got ({mean}, {std})"
                    )));
                }
            }
            PriorKind::PointMass { value } => {
                if !value.is_finite() {
                    return Err(Error::invalid_parameter("point-mass value must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        match self.kind {
            PriorKind::Normal { mean, std } => {
                let dist = Normal::new(mean, std).expect("validated");
                (0..self.dim).map(|_| dist.sample(rng)).collect()
            }
            PriorKind::PointMass { value } => vec![value; self.dim],
        }
    }
}

/// State transition kernel `p(z_t | z_parent)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernelSpec {
    pub kind: KernelKind,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    /// Child equals parent.
    Identity,
    /// Child is `a * parent`, deterministic.
    Linear { a: f64 },
    /// Child is `parent + N(0, std^2)` per dimension.
    RandomWalk { std: f64 },
}

impl TransitionKernelSpec {
    pub fn identity(dim: usize) -> Self {
        TransitionKernelSpec {
            kind: KernelKind::Identity,
            dim,
        }
    }

    pub fn linear(a: f64, dim: usize) -> Self {
        TransitionKernelSpec {
            kind: KernelKind::Linear { a },
            dim,
        }
    }

    pub fn random_walk(std: f64, dim: usize) -> Self {
        TransitionKernelSpec {
            kind: KernelKind::RandomWalk { std },
            dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid_parameter("kernel dimension must be >= 1"));
        }
        match self.kind {
            KernelKind::Identity => Ok(()),
            KernelKind::Linear { a } => {
                if a.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid_parameter("linear coefficient must be finite"))
                }
            }
            KernelKind::RandomWalk { std } => {
                if std.is_finite() && std >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid_parameter(format!(
                        "random-walk std must be >= 0, got {std}"
                    )))
                }
            }
        }
    }

    /// Draw a child state conditioned on `parent`.
    pub fn sample<R: Rng + ?Sized>(&self, parent: &[f64], rng: &mut R) -> State {
        debug_assert_eq!(parent.len(), self.dim);
        match self.kind {
            KernelKind::Identity => parent.to_vec(),
            KernelKind::Linear { a } => parent.iter().map(|x| a * x).collect(),
            KernelKind::RandomWalk { std } => {
                if std == 0.0 {
                    return parent.to_vec();
                }
                let dist = Normal::new(0.0, std).expect("validated");
                parent.iter().map(|x| x + dist.sample(rng)).collect()
            }
        }
    }
}

/// Observation likelihood `p(y | z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModelSpec {
    pub kind: ObservationKind,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObservationKind {
    /// `y = z + N(0, std^2)` per dimension.
    Gaussian { std: f64 },
    /// Binary `y` with `P(y = 1) = sigmoid(z)` per dimension.
    BernoulliLogit,
}

impl ObservationModelSpec {
    pub fn gaussian(std: f64, dim: usize) -> Self {
        ObservationModelSpec {
            kind: ObservationKind::Gaussian { std },
            dim,
        }
    }

    pub fn bernoulli_logit(dim: usize) -> Self {
        ObservationModelSpec {
            kind: ObservationKind::BernoulliLogit,
            dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid_parameter(
                "observation dimension must be >= 1",
            ));
        }
        if let ObservationKind::Gaussian { std } = self.kind {
            if !std.is_finite() || std <= 0.0 {
                return Err(Error::invalid_parameter(format!(
                    "gaussian observation std must be > 0, got {std}"
                )));
            }
        }
        Ok(())
    }

    /// Log-likelihood of observation `y` under state `z`, summed over
    /// dimensions.
    pub fn log_likelihood(&self, y: &[f64], z: &[f64]) -> Result<f64> {
        if y.len() != self.dim || z.len() != self.dim {
            return Err(Error::invalid_parameter(format!(
                "dimension mismatch: model d={}, y d={}, z d={}",
                self.dim,
                y.len(),
                z.len()
            )));
        }
        if y.iter().chain(z.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid_parameter(
                "log_likelihood requires finite inputs",
            ));
        }
        match self.kind {
            ObservationKind::Gaussian { std } => {
                let norm = (std * (2.0 * PI).sqrt()).ln();
                let ll = y
                    .iter()
                    .zip(z)
                    .map(|(yi, zi)| {
                        let r = yi - zi;
                        -r * r / (2.0 * std * std) - norm
                    })
                    .sum();
                Ok(ll)
            }
            ObservationKind::BernoulliLogit => {
                let mut ll = 0.0;
                for (yi, zi) in y.iter().zip(z) {
                    if *yi != 0.0 && *yi != 1.0 {
                        return Err(Error::invalid_parameter(format!(
                            "bernoulli observation must be 0 or 1, got {yi}"
                        )));
                    }
                    // log sigmoid(z) = -softplus(-z); log(1 - sigmoid(z)) = -softplus(z)
                    ll -= if *yi == 1.0 {
                        softplus(-zi)
                    } else {
                        softplus(*zi)
                    };
                }
                Ok(ll)
            }
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// One timestamped observation, with ground truth when synthetic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub t: u64,
    #[serde(with = "scalar_or_vec")]
    pub y: State,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "opt_scalar_or_vec"
    )]
    pub truth: Option<State>,
}

// JSONL keeps scalars as plain numbers; vectors round-trip as arrays.
mod scalar_or_vec {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Wire {
        Scalar(f64),
        Vector(Vec<f64>),
    }

    pub fn serialize<S: Serializer>(value: &[f64], ser: S) -> Result<S::Ok, S::Error> {
        if value.len() == 1 {
            Wire::Scalar(value[0]).serialize(ser)
        } else {
            Wire::Vector(value.to_vec()).serialize(ser)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<f64>, D::Error> {
        match Wire::deserialize(de)? {
            Wire::Scalar(v) => Ok(vec![v]),
            Wire::Vector(v) if !v.is_empty() => Ok(v),
            Wire::Vector(_) => Err(D::Error::custom("empty observation vector")),
        }
    }
}

mod opt_scalar_or_vec {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Option<Vec<f64>>, ser: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => super::scalar_or_vec::serialize(v, ser),
            None => ser.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Option<Vec<f64>>, D::Error> {
        #[derive(Deserialize)]
        struct Helper(#[serde(with = "super::scalar_or_vec")] Vec<f64>);
        Ok(Option::<Helper>::deserialize(de)?.map(|h| h.0))
    }
}

/// Synthetic scalar ground-truth stream with Gaussian observation noise.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub obs_std: f64,
    pub steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorKind {
    /// Piecewise-constant truth: `levels[j]` applies from `times[j-1]`
    /// (inclusive) up to `times[j]`. `times` must be strictly increasing and
    /// one shorter than `levels`.
    Changepoint { levels: Vec<f64>, times: Vec<u64> },
    /// Random-walk truth starting at 0.
    Drift { std: f64 },
    /// `truth_t = -amp * cos(2*pi*t / period)`: starts at the trough, so the
    /// first half period sweeps the full `2*amp` swing.
    Sinusoid { amp: f64, period: f64 },
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid_parameter("generator length must be >= 1"));
        }
        if !self.obs_std.is_finite() || self.obs_std < 0.0 {
            return Err(Error::invalid_parameter(format!(
                "observation noise std must be >= 0, got {}",
                self.obs_std
            )));
        }
        match &self.kind {
            GeneratorKind::Changepoint { levels, times } => {
                if levels.is_empty() {
                    return Err(Error::invalid_parameter("changepoint needs >= 1 level"));
                }
                if times.len() + 1 != levels.len() {
                    return Err(Error::invalid_parameter(format!(
                        "changepoint needs exactly one time per level change: {} levels, {} times",
                        levels.len(),
                        times.len()
                    )));
                }
                if !times.windows(2).all(|w| w[0] < w[1]) {
                    return Err(Error::invalid_parameter(
                        "changepoint times must be strictly increasing",
                    ));
                }
                if levels.iter().any(|l| !l.is_finite()) {
                    return Err(Error::invalid_parameter("levels must be finite"));
                }
            }
            GeneratorKind::Drift { std } => {
                if !std.is_finite() || *std < 0.0 {
                    return Err(Error::invalid_parameter(format!(
                        "drift std must be >= 0, got {std}"
                    )));
                }
            }
            GeneratorKind::Sinusoid { amp, period } => {
                if !amp.is_finite() || !period.is_finite() || *period <= 0.0 {
                    return Err(Error::invalid_parameter(format!(
                        "sinusoid needs finite amp and period > 0, got ({amp}, {period})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Generate the observation stream for a spec; bit-identical per seed.
///
/// Records are indexed `t = 0..steps-1` and always carry the latent truth.
pub fn generate(spec: &GeneratorSpec) -> Result<Vec<ObservationRecord>> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let noise = if spec.obs_std > 0.0 {
        Some(Normal::new(0.0, spec.obs_std).expect("validated"))
    } else {
        None
    };
    let mut records = Vec::with_capacity(spec.steps);
    let mut drift_level = 0.0;
    for t in 0..spec.steps as u64 {
        let truth = match &spec.kind {
            GeneratorKind::Changepoint { levels, times } => {
                let idx = times.iter().take_while(|&&c| c <= t).count();
                levels[idx]
            }
            GeneratorKind::Drift { std } => {
                if t > 0 && *std > 0.0 {
                    drift_level += Normal::new(0.0, *std).expect("validated").sample(&mut rng);
                }
                drift_level
            }
            GeneratorKind::Sinusoid { amp, period } => -amp * (TAU * t as f64 / period).cos(),
        };
        let y = truth + noise.as_ref().map_or(0.0, |n| n.sample(&mut rng));
        records.push(ObservationRecord {
            t,
            y: vec![y],
            truth: Some(vec![truth]),
        });
    }
    Ok(records)
}
