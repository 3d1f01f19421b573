//! Constant-cost measurement: per-step latency of a long filter run and the
//! memory contrast against the explicit-history oracle.
//!
//! The filter's per-step work touches exactly `L` particles regardless of
//! how many steps have elapsed, so the median step latency late in a long
//! run should match the median early on. The explicit construction keeps
//! one bank per step and is run here (at a small bank size) to report its
//! linear growth next to the filter's flat storage.

use std::time::Instant;

use serde::Serialize;

use crate::error::Result;
use crate::filter::{Filter, FilterConfig, Resampling};
use crate::mixing::{DecaySpec, Horizon};
use crate::models::{
    generate, GeneratorKind, GeneratorSpec, ObservationModelSpec, PriorSpec, TransitionKernelSpec,
};
use crate::oracle::run_oracle;
use crate::rng::derive_seed;

/// Bank size for the oracle contrast run; kept small so the linear growth
/// is observable without ballooning the benchmark itself.
const ORACLE_CONTRAST_BANK: usize = 8;

#[derive(Debug, Clone)]
pub struct BenchParams {
    pub particles: usize,
    pub beta: f64,
    pub steps: usize,
    pub noise_std: f64,
    pub obs_std: f64,
    pub seed: u64,
}

/// Everything deterministic about a bench run: the inputs and the
/// structural facts. Byte-stable across reruns of the same config.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BenchStructure {
    pub particles: usize,
    pub beta: f64,
    pub steps: usize,
    pub seed: u64,
    /// True iff the ensemble held exactly `particles` samples after every
    /// step.
    pub ensemble_len_constant: bool,
    /// Flat storage of the filter ensemble: `L` state vectors plus `L`
    /// birth tags.
    pub ensemble_bytes: usize,
    /// Banks held by the explicit-history oracle after its run: grows as
    /// steps + 1.
    pub oracle_banks: usize,
    pub oracle_bank_size: usize,
    pub oracle_total_samples: usize,
}

/// Wall-clock measurements; inherently run-to-run noisy.
#[derive(Debug, Clone, Serialize)]
pub struct BenchTiming {
    /// Median step latency over steps 10..=20.
    pub early_median_ns: u64,
    /// Median step latency over the last 11 steps.
    pub late_median_ns: u64,
    pub late_early_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub structure: BenchStructure,
    pub timing: BenchTiming,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn median_ns(window: &[u64]) -> u64 {
    let mut sorted = window.to_vec();
    sorted.sort_unstable();
    sorted[sorted.len() / 2]
}

/// Run a scalar filter for `steps` observations, timing every step, and run
/// the oracle contrast. Requires enough steps for disjoint early and late
/// windows.
pub fn bench_filter(params: &BenchParams) -> Result<BenchReport> {
    if params.steps < 100 {
        return Err(crate::error::Error::invalid_parameter(
            "bench needs at least 100 steps for stable windows",
        ));
    }
    let stream = generate(&GeneratorSpec {
        kind: GeneratorKind::Drift { std: 0.2 },
        obs_std: params.obs_std,
        steps: params.steps,
        seed: derive_seed(params.seed, 101),
    })?;
    let config = FilterConfig {
        particles: params.particles,
        decay: DecaySpec::new(params.beta, Horizon::Unbounded)?,
        noise_std: params.noise_std,
        prior: PriorSpec::normal(0.0, 1.0, 1),
        kernel: TransitionKernelSpec::identity(1),
        obs_model: ObservationModelSpec::gaussian(params.obs_std.max(0.1), 1),
        resampling: Resampling::Multinomial,
        seed: params.seed,
    };
    let mut filter = Filter::new(config)?;

    let mut latencies = Vec::with_capacity(params.steps);
    let mut len_constant = true;
    for record in &stream {
        let start = Instant::now();
        filter.step(&record.y)?;
        latencies.push(start.elapsed().as_nanos() as u64);
        len_constant &= filter.state().ensemble().len() == params.particles;
    }

    let early = &latencies[9..20];
    let late = &latencies[params.steps - 11..];
    let early_median_ns = median_ns(early);
    let late_median_ns = median_ns(late);

    let oracle = run_oracle(
        ORACLE_CONTRAST_BANK,
        &PriorSpec::normal(0.0, 1.0, 1),
        &TransitionKernelSpec::identity(1),
        &DecaySpec::new(params.beta, Horizon::Unbounded)?,
        params.steps,
        derive_seed(params.seed, 102),
    )?;

    let dim = 1usize;
    let ensemble_bytes =
        params.particles * dim * std::mem::size_of::<f64>() + params.particles * 8;
    Ok(BenchReport {
        structure: BenchStructure {
            particles: params.particles,
            beta: params.beta,
            steps: params.steps,
            seed: params.seed,
            ensemble_len_constant: len_constant,
            ensemble_bytes,
            oracle_banks: oracle.bank_count(),
            oracle_bank_size: oracle.bank_size(),
            oracle_total_samples: oracle.total_samples(),
        },
        timing: BenchTiming {
            early_median_ns,
            late_median_ns,
            late_early_ratio: late_median_ns as f64 / early_median_ns.max(1) as f64,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_is_deterministic_and_linear_in_oracle() {
        let params = BenchParams {
            particles: 200,
            beta: 0.5,
            steps: 300,
            noise_std: 0.1,
            obs_std: 1.0,
            seed: 5,
        };
        let a = bench_filter(&params).unwrap();
        let b = bench_filter(&params).unwrap();
        assert_eq!(a.structure, b.structure);
        assert!(a.structure.ensemble_len_constant);
        assert_eq!(a.structure.oracle_banks, 301);
        assert_eq!(a.structure.oracle_total_samples, 301 * ORACLE_CONTRAST_BANK);
    }

    #[test]
    fn rejects_short_runs() {
        let params = BenchParams {
            particles: 10,
            beta: 0.5,
            steps: 50,
            noise_std: 0.0,
            obs_std: 1.0,
            seed: 0,
        };
        assert!(bench_filter(&params).is_err());
    }
}
