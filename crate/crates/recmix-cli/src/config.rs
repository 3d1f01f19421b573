//! Flag parsing helpers and the optional TOML config file.
//!
//! Any flag can also be set by a config file passed with `--config`;
//! explicit flags win over file values, which win over defaults.

use std::path::PathBuf;
use std::str::FromStr;

use recmix::filter::Resampling;
use recmix::models::{
    GeneratorKind, KernelKind, ObservationKind, ObservationModelSpec, PriorKind, PriorSpec,
    TransitionKernelSpec,
};
use recmix::{Error, Result};
use serde::Deserialize;

/// String form of a transition kernel: `identity`, `linear:A`, or
/// `random-walk:STD`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelArg(pub TransitionKernelSpec);

impl FromStr for KernelArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = split_spec(s);
        let kind = match name {
            "identity" => {
                require_no_arg(arg, "identity")?;
                KernelKind::Identity
            }
            "linear" => KernelKind::Linear {
                a: parse_field(arg, "linear kernel coefficient")?,
            },
            "random-walk" | "random_walk" => KernelKind::RandomWalk {
                std: parse_field(arg, "random-walk kernel std")?,
            },
            other => {
                return Err(Error::invalid_parameter(format!(
                    "unknown kernel {other:?}; expected identity, linear:A, or random-walk:STD"
                )))
            }
        };
        let spec = TransitionKernelSpec { kind, dim: 1 };
        spec.validate()?;
        Ok(KernelArg(spec))
    }
}

impl KernelArg {
    pub fn canonical(&self) -> String {
        match self.0.kind {
            KernelKind::Identity => "identity".to_string(),
            KernelKind::Linear { a } => format!("linear:{a}"),
            KernelKind::RandomWalk { std } => format!("random-walk:{std}"),
        }
    }
}

/// String form of a prior: `normal:MEAN,STD` or `point:VALUE`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorArg(pub PriorSpec);

impl FromStr for PriorArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = split_spec(s);
        let kind = match name {
            "normal" => {
                let arg = arg.ok_or_else(|| {
                    Error::invalid_parameter("normal prior needs normal:MEAN,STD")
                })?;
                let parts: Vec<&str> = arg.split(',').collect();
                if parts.len() != 2 {
                    return Err(Error::invalid_parameter(
                        "normal prior needs normal:MEAN,STD",
                    ));
                }
                PriorKind::Normal {
                    mean: parse_field(Some(parts[0]), "prior mean")?,
                    std: parse_field(Some(parts[1]), "prior std")?,
                }
            }
            "point" => PriorKind::PointMass {
                value: parse_field(arg, "point-mass value")?,
            },
            other => {
                return Err(Error::invalid_parameter(format!(
                    "unknown prior {other:?}; expected normal:MEAN,STD or point:VALUE"
                )))
            }
        };
        let spec = PriorSpec { kind, dim: 1 };
        spec.validate()?;
        Ok(PriorArg(spec))
    }
}

impl PriorArg {
    pub fn canonical(&self) -> String {
        match self.0.kind {
            PriorKind::Normal { mean, std } => format!("normal:{mean},{std}"),
            PriorKind::PointMass { value } => format!("point:{value}"),
        }
    }
}

/// Observation model name: `gaussian` (std taken from `--obs-std`) or
/// `bernoulli-logit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelArg {
    Gaussian,
    BernoulliLogit,
}

impl FromStr for ModelArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(ModelArg::Gaussian),
            "bernoulli-logit" | "bernoulli_logit" => Ok(ModelArg::BernoulliLogit),
            other => Err(Error::invalid_parameter(format!(
                "unknown observation model {other:?}; expected gaussian or bernoulli-logit"
            ))),
        }
    }
}

impl ModelArg {
    pub fn to_spec(self, obs_std: f64) -> Result<ObservationModelSpec> {
        let spec = match self {
            ModelArg::Gaussian => ObservationModelSpec {
                kind: ObservationKind::Gaussian { std: obs_std },
                dim: 1,
            },
            ModelArg::BernoulliLogit => ObservationModelSpec {
                kind: ObservationKind::BernoulliLogit,
                dim: 1,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn canonical(&self) -> &'static str {
        match self {
            ModelArg::Gaussian => "gaussian",
            ModelArg::BernoulliLogit => "bernoulli-logit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResamplingArg(pub Resampling);

impl FromStr for ResamplingArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multinomial" => Ok(ResamplingArg(Resampling::Multinomial)),
            "systematic" => Ok(ResamplingArg(Resampling::Systematic)),
            other => Err(Error::invalid_parameter(format!(
                "unknown resampling scheme {other:?}; expected multinomial or systematic"
            ))),
        }
    }
}

impl ResamplingArg {
    pub fn canonical(&self) -> &'static str {
        match self.0 {
            Resampling::Multinomial => "multinomial",
            Resampling::Systematic => "systematic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorArg {
    Changepoint,
    Drift,
    Sinusoid,
}

impl FromStr for GeneratorArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "changepoint" => Ok(GeneratorArg::Changepoint),
            "drift" => Ok(GeneratorArg::Drift),
            "sinusoid" => Ok(GeneratorArg::Sinusoid),
            other => Err(Error::invalid_parameter(format!(
                "unknown generator {other:?}; expected changepoint, drift, or sinusoid"
            ))),
        }
    }
}

impl GeneratorArg {
    pub fn canonical(&self) -> &'static str {
        match self {
            GeneratorArg::Changepoint => "changepoint",
            GeneratorArg::Drift => "drift",
            GeneratorArg::Sinusoid => "sinusoid",
        }
    }

    pub fn to_kind(
        self,
        levels: Option<Vec<f64>>,
        times: Option<Vec<u64>>,
        drift_std: Option<f64>,
        amp: Option<f64>,
        period: Option<f64>,
    ) -> Result<GeneratorKind> {
        match self {
            GeneratorArg::Changepoint => Ok(GeneratorKind::Changepoint {
                levels: levels
                    .ok_or_else(|| Error::invalid_parameter("changepoint needs --levels"))?,
                times: times.ok_or_else(|| Error::invalid_parameter("changepoint needs --times"))?,
            }),
            GeneratorArg::Drift => Ok(GeneratorKind::Drift {
                std: drift_std
                    .ok_or_else(|| Error::invalid_parameter("drift needs --drift-std"))?,
            }),
            GeneratorArg::Sinusoid => Ok(GeneratorKind::Sinusoid {
                amp: amp.ok_or_else(|| Error::invalid_parameter("sinusoid needs --amp"))?,
                period: period
                    .ok_or_else(|| Error::invalid_parameter("sinusoid needs --period"))?,
            }),
        }
    }
}

fn split_spec(s: &str) -> (&str, Option<&str>) {
    match s.split_once(':') {
        Some((name, arg)) => (name, Some(arg)),
        None => (s, None),
    }
}

fn require_no_arg(arg: Option<&str>, name: &str) -> Result<()> {
    if arg.is_some() {
        return Err(Error::invalid_parameter(format!(
            "{name} takes no argument"
        )));
    }
    Ok(())
}

fn parse_field(arg: Option<&str>, what: &str) -> Result<f64> {
    let raw = arg.ok_or_else(|| Error::invalid_parameter(format!("{what} is required")))?;
    raw.trim()
        .parse()
        .map_err(|e| Error::invalid_parameter(format!("bad {what} {raw:?}: {e}")))
}

/// Keys a `--config` TOML file may set; mirrors the flag names.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub beta: Option<f64>,
    pub betas: Option<Vec<f64>>,
    pub particles: Option<usize>,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub runs: Option<usize>,
    pub max_lag: Option<usize>,
    pub noise_std: Option<f64>,
    pub obs_std: Option<f64>,
    pub kernel: Option<String>,
    pub prior: Option<String>,
    pub model: Option<String>,
    pub resampling: Option<String>,
    pub generator: Option<String>,
    pub levels: Option<Vec<f64>>,
    pub times: Option<Vec<u64>>,
    pub drift_std: Option<f64>,
    pub amp: Option<f64>,
    pub period: Option<f64>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&std::path::Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text)
            .map_err(|e| Error::input(0, format!("bad config file {}: {e}", path.display())))
    }

    pub fn kernel_arg(&self) -> Result<Option<KernelArg>> {
        self.kernel.as_deref().map(KernelArg::from_str).transpose()
    }

    pub fn prior_arg(&self) -> Result<Option<PriorArg>> {
        self.prior.as_deref().map(PriorArg::from_str).transpose()
    }

    pub fn model_arg(&self) -> Result<Option<ModelArg>> {
        self.model.as_deref().map(ModelArg::from_str).transpose()
    }

    pub fn resampling_arg(&self) -> Result<Option<ResamplingArg>> {
        self.resampling
            .as_deref()
            .map(ResamplingArg::from_str)
            .transpose()
    }

    pub fn generator_arg(&self) -> Result<Option<GeneratorArg>> {
        self.generator
            .as_deref()
            .map(GeneratorArg::from_str)
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_round_trip() {
        for s in ["identity", "linear:0.5", "random-walk:0.3"] {
            let k: KernelArg = s.parse().unwrap();
            assert_eq!(k.canonical(), s);
        }
        assert!("linear".parse::<KernelArg>().is_err());
        assert!("nope:1".parse::<KernelArg>().is_err());
        assert!("random-walk:-1".parse::<KernelArg>().is_err());
    }

    #[test]
    fn prior_round_trip() {
        for s in ["normal:0,1", "point:3"] {
            let p: PriorArg = s.parse().unwrap();
            assert_eq!(p.canonical(), s);
        }
        assert!("normal:1".parse::<PriorArg>().is_err());
    }

    #[test]
    fn file_config_parses_known_keys() {
        let cfg: FileConfig = toml::from_str(
            r#"
            beta = 0.5
            particles = 100
            kernel = "random-walk:0.2"
            levels = [0.0, 5.0]
            times = [50]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.beta, Some(0.5));
        assert_eq!(cfg.kernel_arg().unwrap().unwrap().canonical(), "random-walk:0.2");
        assert_eq!(cfg.levels, Some(vec![0.0, 5.0]));
    }

    #[test]
    fn file_config_rejects_unknown_keys() {
        assert!(toml::from_str::<FileConfig>("betaa = 0.5").is_err());
    }
}
