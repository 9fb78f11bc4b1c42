//! Small statistics helpers shared by the experiment code and the tests.

use crate::bits::BitVector;

/// Lag-`k` autocorrelation of the ±1-mapped bit sequence.
/// Returns 0.0 when the sequence is too short or constant.
pub fn lag_autocorrelation(bits: &BitVector, lag: usize) -> f64 {
    let n = bits.len();
    if lag == 0 || n <= lag {
        return 0.0;
    }
    let mean = 2.0 * bits.ones_fraction() - 1.0;
    let mut num = 0.0;
    let mut den = 0.0;
    let x = |i: usize| if bits.get(i) { 1.0 } else { -1.0 };
    for i in 0..n {
        let d = x(i) - mean;
        den += d * d;
    }
    if den == 0.0 {
        return 0.0;
    }
    for i in 0..n - lag {
        num += (x(i) - mean) * (x(i + lag) - mean);
    }
    num / den
}

/// Kolmogorov-Smirnov statistic of a sample against U(0, 1).
pub fn ks_statistic_uniform(sample: &mut [f64]) -> f64 {
    let n = sample.len();
    assert!(n > 0);
    sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut d: f64 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        let lo = i as f64 / n as f64;
        let hi = (i + 1) as f64 / n as f64;
        d = d.max((x - lo).abs()).max((hi - x).abs());
    }
    d
}

/// Critical value of the one-sample KS statistic at significance `alpha`
/// (asymptotic formula; accurate for n >= 35).
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c / (n as f64).sqrt()
}

/// Mean and (population) standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Empirical skewness and excess kurtosis.
pub fn skewness_kurtosis(xs: &[f64]) -> (f64, f64) {
    let (mean, sd) = mean_std(xs);
    let n = xs.len() as f64;
    if sd == 0.0 {
        return (0.0, 0.0);
    }
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for x in xs {
        let z = (x - mean) / sd;
        m3 += z * z * z;
        m4 += z * z * z * z;
    }
    (m3 / n, m4 / n - 3.0)
}

/// Least-squares slope of y over x.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}
