use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{FitResult, FitStatus};
use crate::model::SmartDataset;
use crate::rng::{domain, substream};

/// What a bootstrap estimator hands back for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub values: Vec<f64>,
    pub status: FitStatus,
}

impl Estimate {
    /// A statistic with no iteration behind it.
    pub fn exact(values: Vec<f64>) -> Self {
        Estimate { values, status: FitStatus::Converged }
    }

    /// The shared block of a stacked fit.
    pub fn shared(fit: &FitResult) -> Self {
        Estimate { values: fit.theta_hat.psi().to_vec(), status: fit.status }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub point_estimate: f64,
    pub variance: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub converged: usize,
    pub max_iters_exceeded: usize,
    pub diverged: usize,
    /// Replicates whose fit returned an error or a non-finite estimate; these are
    /// left out of the variance and the interval.
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub params: Vec<ParamSummary>,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    pub status: StatusCounts,
}

/// `ceil(n^exponent)` clamped to `[2, n]`.
pub fn choose_m(n: usize, exponent: f64) -> Result<usize> {
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(Error::InvalidInput(format!("m exponent must lie in (0, 1], got {exponent}")));
    }
    let x = (n as f64).powf(exponent);
    // keep exact powers (e.g. 100^0.5) from rounding up past the integer
    let m = if (x - x.round()).abs() <= 1e-9 * x.max(1.0) { x.round() } else { x.ceil() } as usize;
    Ok(m.max(2).min(n))
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sample_variance(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64
}

/// m-out-of-n bootstrap of `fit` at the patient level.
///
/// Replicate `b` resamples `m` whole trajectories with replacement from its own
/// substream, so the summary does not depend on how replicates are scheduled.
/// Replicates that stop without converging are kept; the interval is
/// `theta_n - q/sqrt(n)` at the 97.5% and 2.5% quantiles `q` of `sqrt(m)(theta*_m - theta_n)`.
pub fn m_out_of_n_bootstrap<F>(
    data: &SmartDataset,
    names: &[String],
    fit: F,
    m: usize,
    b: usize,
    seed: u64,
) -> Result<BootstrapSummary>
where
    F: Fn(&SmartDataset) -> Result<Estimate> + Sync,
{
    let n = data.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if m == 0 || m > n {
        return Err(Error::InvalidInput(format!("m must lie in [1, n = {n}], got {m}")));
    }
    if b < 2 {
        return Err(Error::InvalidInput(format!("B must be at least 2 for a variance, got {b}")));
    }
    let point = fit(data)?;
    if point.values.len() != names.len() {
        return Err(Error::LayoutMismatch(format!("{} names for {} estimates", names.len(), point.values.len())));
    }
    let replicates: Vec<Result<Estimate>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, domain::BOOTSTRAP, r as u64);
            let idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
            fit(&data.select(&idx))
        })
        .collect();

    let mut status = StatusCounts::default();
    let mut kept: Vec<&[f64]> = Vec::with_capacity(b);
    for rep in &replicates {
        match rep {
            Ok(e) if e.values.len() == names.len() && e.values.iter().all(|v| v.is_finite()) => {
                match e.status {
                    FitStatus::Converged => status.converged += 1,
                    FitStatus::MaxItersExceeded => status.max_iters_exceeded += 1,
                    FitStatus::Diverged => status.diverged += 1,
                }
                kept.push(&e.values);
            }
            _ => status.failed += 1,
        }
    }
    if kept.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "only {} of {b} bootstrap replicates produced an estimate",
            kept.len()
        )));
    }
    let (sn, sm) = ((n as f64).sqrt(), (m as f64).sqrt());
    let params = names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let theta = point.values[k];
            let draws: Vec<f64> = kept.iter().map(|v| v[k]).collect();
            let mut roots: Vec<f64> = draws.iter().map(|d| sm * (d - theta)).collect();
            roots.sort_by(f64::total_cmp);
            ParamSummary {
                name: name.clone(),
                point_estimate: theta,
                variance: sample_variance(&draws),
                ci_low: theta - quantile(&roots, 0.975) / sn,
                ci_high: theta - quantile(&roots, 0.025) / sn,
            }
        })
        .collect();
    Ok(BootstrapSummary { params, n, m, b, seed, status })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn choose_m_examples() {
        assert_eq!(choose_m(300, 0.8).unwrap(), 96);
        assert_eq!(choose_m(300, 1.0).unwrap(), 300);
        assert_eq!(choose_m(2, 0.5).unwrap(), 2);
        assert_eq!(choose_m(100, 0.5).unwrap(), 10);
        assert!(choose_m(10, 0.0).is_err());
        assert!(choose_m(10, 1.5).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        let s = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&s, 0.5), 2.0);
        assert!((quantile(&s, 0.975) - 3.9).abs() < 1e-12);
        assert_eq!(sample_variance(&[1.0, 2.0, 3.0]), 1.0);
    }
}
