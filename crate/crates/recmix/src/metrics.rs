//! Evaluation quantities: empirical distances, error metrics, and the
//! composition-law deviation check.

use std::io::Write;

use serde::Serialize;

use crate::chain::LagComposition;
use crate::error::{Error, Result};

/// Exact Wasserstein-1 distance between two equal-size scalar sample sets:
/// the mean absolute difference of the sorted sequences.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid_parameter(format!(
            "sample sets must have equal size, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::invalid_parameter("sample sets must be nonempty"));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let sum: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / xs.len() as f64)
}

/// Two-sample Kolmogorov-Smirnov statistic: the supremum of the difference
/// between the empirical CDFs. Always in `[0, 1]`; sizes may differ.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid_parameter("sample sets must be nonempty"));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(sup.min(1.0))
}

/// Root mean squared error between estimate and truth sequences.
pub fn rmse(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::invalid_parameter(format!(
            "sequences must have equal length, got {} and {}",
            estimates.len(),
            truths.len()
        )));
    }
    if estimates.is_empty() {
        return Err(Error::invalid_parameter("sequences must be nonempty"));
    }
    let ms: f64 = estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| (e - t) * (e - t))
        .sum::<f64>()
        / estimates.len() as f64;
    Ok(ms.sqrt())
}

/// Deviation of observed lag counts from the geometric composition law at
/// one lag.
#[derive(Debug, Clone, Serialize)]
pub struct LagDeviation {
    pub lag: usize,
    pub observed_mean: f64,
    pub expected: f64,
    pub standard_error: f64,
    pub z: f64,
}

/// Compare per-run lag compositions against the expected law
/// `L * beta * (1 - beta)^(m - 1)` for lags `1..=max_lag`.
///
/// `compositions` holds one composition per independent run, all taken at
/// the same step `t > max_lag`. The z-score at each lag is the deviation of
/// the run mean from the law in units of the standard error across runs; a
/// zero spread with zero deviation scores 0, a zero spread with any
/// deviation scores infinite.
pub fn composition_deviation(
    compositions: &[LagComposition],
    beta: f64,
    l: usize,
    max_lag: usize,
) -> Result<Vec<LagDeviation>> {
    if compositions.is_empty() {
        return Err(Error::invalid_parameter("need at least one composition"));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid_parameter(format!(
            "beta must lie in [0, 1], got {beta}"
        )));
    }
    if max_lag == 0 {
        return Err(Error::invalid_parameter("max_lag must be >= 1"));
    }
    let runs = compositions.len() as f64;
    let mut out = Vec::with_capacity(max_lag);
    for lag in 1..=max_lag {
        let counts: Vec<f64> = compositions.iter().map(|c| c.count(lag) as f64).collect();
        let mean = counts.iter().sum::<f64>() / runs;
        let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / runs;
        let se = (var / runs).sqrt();
        let expected = l as f64 * beta * (1.0 - beta).powi(lag as i32 - 1);
        let diff = mean - expected;
        let z = if diff == 0.0 {
            0.0
        } else if se == 0.0 {
            f64::INFINITY * diff.signum()
        } else {
            diff / se
        };
        out.push(LagDeviation {
            lag,
            observed_mean: mean,
            expected,
            standard_error: se,
            z,
        });
    }
    Ok(out)
}

/// One filter-trace step, as reported in metric output.
#[derive(Debug, Clone, Serialize)]
pub struct MetricRow {
    pub t: u64,
    pub mean: f64,
    pub std: f64,
    pub ess: f64,
    pub log_marginal_increment: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_error: Option<f64>,
}

/// Summary metrics over a scalar filter run.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    /// Root mean squared error of the posterior mean against truth, when
    /// every step carried ground truth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    pub mean_ess: f64,
    pub min_ess: f64,
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    pub fn from_rows(rows: Vec<MetricRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid_parameter("report needs at least one row"));
        }
        let n = rows.len() as f64;
        let mean_ess = rows.iter().map(|r| r.ess).sum::<f64>() / n;
        let min_ess = rows.iter().map(|r| r.ess).fold(f64::INFINITY, f64::min);
        let rmse = if rows.iter().all(|r| r.abs_error.is_some()) {
            let ms = rows
                .iter()
                .map(|r| {
                    let e = r.abs_error.unwrap();
                    e * e
                })
                .sum::<f64>()
                / n;
            Some(ms.sqrt())
        } else {
            None
        };
        Ok(MetricReport {
            rmse,
            mean_ess,
            min_ess,
            rows,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Per-step rows as CSV, one line per step.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,mean,std,ess,log_marginal_increment,abs_error")?;
        for r in &self.rows {
            match r.abs_error {
                Some(e) => writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    r.t, r.mean, r.std, r.ess, r.log_marginal_increment, e
                )?,
                None => writeln!(
                    w,
                    "{},{},{},{},{},",
                    r.t, r.mean, r.std, r.ess, r.log_marginal_increment
                )?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{run_chain, ChainParams};
    use crate::models::{PriorSpec, TransitionKernelSpec};
    use proptest::prelude::*;

    #[test]
    fn wasserstein_identity_and_point_transport() {
        let x = vec![0.4, -1.0, 2.5];
        assert_eq!(wasserstein1(&x, &x).unwrap(), 0.0);
        assert_eq!(wasserstein1(&[0.0], &[1.0]).unwrap(), 1.0);
        // sorted pairwise diffs (1, 1), mean 1
        assert_eq!(wasserstein1(&[0.0, 1.0], &[1.0, 2.0]).unwrap(), 1.0);
    }

    #[test]
    fn wasserstein_size_mismatch_rejected() {
        assert!(wasserstein1(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ks_examples() {
        let x = vec![0.0, 1.0, 2.0];
        assert_eq!(ks_statistic(&x, &x).unwrap(), 0.0);
        assert_eq!(ks_statistic(&[0.0], &[1.0]).unwrap(), 1.0);
        // CDF steps enumerated by hand
        assert_eq!(ks_statistic(&[0.0, 2.0], &[1.0, 3.0]).unwrap(), 0.5);
    }

    #[test]
    fn rmse_examples() {
        let x = vec![1.0, 2.0, 3.0];
        assert_eq!(rmse(&x, &x).unwrap(), 0.0);
        let shifted: Vec<f64> = x.iter().map(|v| v + 2.0).collect();
        assert!((rmse(&shifted, &x).unwrap() - 2.0).abs() < 1e-15);
        // hand-computed sqrt((9 + 16) / 2)
        let got = rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((got - 3.5355339059327378).abs() < 1e-12);
    }

    #[test]
    fn composition_deviation_beta_one_is_exact() {
        let run = run_chain(&ChainParams {
            particles: 50,
            prior: PriorSpec::normal(0.0, 1.0, 1),
            kernel: TransitionKernelSpec::identity(1),
            beta: 1.0,
            steps: 10,
            seed: 3,
        })
        .unwrap();
        let comps = vec![run.compositions.last().unwrap().clone(); 5];
        let devs = composition_deviation(&comps, 1.0, 50, 5).unwrap();
        for d in devs {
            assert_eq!(d.z, 0.0, "lag {}", d.lag);
        }
    }

    #[test]
    fn composition_deviation_expected_values() {
        let comps = vec![LagComposition::from_counts(Default::default())];
        // beta = 0.5: (50, 25, 12.5, 6.25, 3.125); beta = 0.8: (80, 16, 3.2, 0.64, 0.128)
        let half = composition_deviation(&comps, 0.5, 100, 5).unwrap();
        let expected_half = [50.0, 25.0, 12.5, 6.25, 3.125];
        let eight = composition_deviation(&comps, 0.8, 100, 5).unwrap();
        let expected_eight = [80.0, 16.0, 3.2, 0.64, 0.128];
        for (d, want) in half.iter().zip(expected_half) {
            assert!((d.expected - want).abs() < 1e-12);
        }
        for (d, want) in eight.iter().zip(expected_eight) {
            assert!((d.expected - want).abs() < 1e-12);
        }
    }

    #[test]
    fn report_aggregates() {
        let rows = vec![
            MetricRow {
                t: 0,
                mean: 1.0,
                std: 0.1,
                ess: 100.0,
                log_marginal_increment: -1.0,
                abs_error: Some(3.0),
            },
            MetricRow {
                t: 1,
                mean: 1.5,
                std: 0.1,
                ess: 50.0,
                log_marginal_increment: -1.2,
                abs_error: Some(4.0),
            },
        ];
        let report = MetricReport::from_rows(rows).unwrap();
        assert_eq!(report.mean_ess, 75.0);
        assert_eq!(report.min_ess, 50.0);
        assert!((report.rmse.unwrap() - 3.5355339059327378).abs() < 1e-12);
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("t,mean,std,ess,log_marginal_increment,abs_error\n"));
        assert_eq!(text.lines().count(), 3);
    }

    proptest! {
        #[test]
        fn wasserstein_is_a_metric(
            a in prop::collection::vec(-50.0f64..50.0, 1..24),
            shuffle_seed in 0u64..1000,
        ) {
            let n = a.len();
            let b: Vec<f64> = a.iter().map(|x| x * 0.7 + (shuffle_seed as f64 % 7.0)).collect();
            let c: Vec<f64> = a.iter().rev().map(|x| x - 1.5).collect();
            prop_assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);
            let ab = wasserstein1(&a, &b).unwrap();
            let ba = wasserstein1(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            let ac = wasserstein1(&a, &c).unwrap();
            let cb = wasserstein1(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-9, "triangle violated on size {n}");
        }

        #[test]
        fn ks_stays_in_unit_interval(
            a in prop::collection::vec(-10.0f64..10.0, 1..32),
            b in prop::collection::vec(-10.0f64..10.0, 1..32),
        ) {
            let s = ks_statistic(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }
}
