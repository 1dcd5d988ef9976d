//! Small statistics helpers shared by the growth fits and the Monte-Carlo
//! checks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordinary least-squares line `y ≈ intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r2: f64,
    pub n: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Insufficient("x and y lengths differ".into()));
    }
    if n < 3 {
        return Err(Error::Insufficient(format!(
            "{n} points are not enough for a line fit with an error bar"
        )));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Insufficient("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let slope_stderr = (ssr / (nf - 2.0) / sxx).sqrt();
    let r2 = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        r2,
        n,
    })
}

/// Bootstrap standard error of `Σ values / n_total`, where `values` lists
/// the non-zero terms of an i.i.d. sample of size `n_total` (the remaining
/// terms are zero).
///
/// Resampling `n_total` terms with replacement is equivalent to first drawing
/// how many non-zero terms are kept, then resampling those; this keeps the
/// cost proportional to the number of non-zero terms.
pub fn bootstrap_mean_stderr(values: &[f64], n_total: usize, resamples: usize, seed: u64) -> f64 {
    let k = values.len();
    if k == 0 || n_total == 0 || resamples < 2 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = (k as f64 / n_total as f64).min(1.0);
    let binom = Binomial::new(n_total as u64, p).expect("probability lies in [0, 1]");
    let mut est = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let m = binom.sample(&mut rng) as usize;
        let mut s = 0.0;
        for _ in 0..m {
            s += values[rng.gen_range(0..k)];
        }
        est.push(s / n_total as f64);
    }
    std_dev(&est)
}

/// Sample standard deviation (denominator `n − 1`).
pub fn std_dev(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / n as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
}
