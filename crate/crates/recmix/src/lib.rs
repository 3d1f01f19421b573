//! Recency-weighted high-order Markov state estimation with a fixed sample
//! budget.
//!
//! A first-order latent chain conditions each state only on its predecessor.
//! This crate implements the alternative where the transition is a mixture
//! over the past `M` states with geometrically decaying weights, represented
//! at constant cost by a set of `L` samples of which a `beta` fraction is
//! refreshed every step. On top of that representation sits an importance
//! filter: weigh the predictive set by the observation likelihood, refresh a
//! `beta` fraction of slots from the weighted posterior, add system noise.
//!
//! Module map:
//! - [`mixing`]: decay weights and deterministic integer sample allocation
//! - [`chain`]: fixed-budget evolution of the latent sample set
//! - [`filter`]: the importance filter over that representation
//! - [`models`]: kernels, likelihoods, priors, synthetic stream generators
//! - [`oracle`]: explicit full-history mixture and scalar Kalman references
//! - [`metrics`]: Wasserstein-1, KS, RMSE, composition-law deviations
//! - [`io`]: observation ingestion and trace file formats
//! - [`bench`]: constant-cost measurement harness
//!
//! ```
//! use recmix::filter::{run_filter, FilterConfig, Resampling};
//! use recmix::mixing::{DecaySpec, Horizon};
//! use recmix::models::{
//!     generate, GeneratorKind, GeneratorSpec, ObservationModelSpec, PriorSpec,
//!     TransitionKernelSpec,
//! };
//!
//! let records = generate(&GeneratorSpec {
//!     kind: GeneratorKind::Changepoint { levels: vec![0.0, 5.0], times: vec![50] },
//!     obs_std: 1.0,
//!     steps: 100,
//!     seed: 7,
//! })?;
//! let trace = run_filter(
//!     FilterConfig {
//!         particles: 500,
//!         decay: DecaySpec::new(0.9, Horizon::Unbounded)?,
//!         noise_std: 0.2,
//!         prior: PriorSpec::normal(0.0, 2.0, 1),
//!         kernel: TransitionKernelSpec::identity(1),
//!         obs_model: ObservationModelSpec::gaussian(1.0, 1),
//!         resampling: Resampling::Multinomial,
//!         seed: 7,
//!     },
//!     &records,
//! )?;
//! assert_eq!(trace.len(), 100);
//! # Ok::<(), recmix::Error>(())
//! ```

pub mod bench;
pub mod chain;
pub mod error;
pub mod filter;
pub mod io;
pub mod metrics;
pub mod mixing;
pub mod models;
pub mod oracle;
pub mod rng;

pub use error::{Error, Result};
