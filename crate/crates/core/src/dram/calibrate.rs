//! Noise calibration for the stable-bit operating point.
//!
//! A cell with latent bias `b` reads 1 with probability `Φ(b/σ_n)`, so the
//! chance it is unanimous across `K` independent reads is
//! `q^K + (1-q)^K` with `q = Φ(b/σ_n)`. Averaging over the bias population
//! `b ~ N(0, σ_c)` gives the expected stable fraction as a function of the
//! single ratio `r = σ_n/σ_c`:
//!
//! `f(r, K) = ∫ φ(z) · (Φ(z/r)^K + Φ(-z/r)^K) dz`
//!
//! which is strictly decreasing in `r`. The calibration utility inverts it by
//! bisection to land the simulated array on a measured stable-bit percentage.

use crate::error::{Error, Result};
use crate::special::{normal_cdf, normal_pdf};

/// Expected fraction of cells unanimous across `reads` reads, for a per-read
/// noise of `noise_ratio` times the bias spread. Evaluated by Simpson
/// integration on a fine fixed grid (absolute accuracy well below 1e-8).
pub fn expected_stable_fraction(noise_ratio: f64, reads: usize) -> f64 {
    assert!(noise_ratio >= 0.0 && reads >= 1);
    if noise_ratio == 0.0 {
        return 1.0; // every cell deterministic
    }
    let k = reads as i32;
    let integrand = |z: f64| -> f64 {
        let q = normal_cdf(z / noise_ratio);
        normal_pdf(z) * (q.powi(k) + (1.0 - q).powi(k))
    };
    // [-9, 9] captures the bias population to ~1e-19; step resolves the
    // metastable window even for small ratios.
    let (lo, hi) = (-9.0, 9.0);
    let n = 18_000; // even
    let h = (hi - lo) / n as f64;
    let mut sum = integrand(lo) + integrand(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * integrand(lo + i as f64 * h);
    }
    (sum * h / 3.0).min(1.0)
}

/// Expected stable fraction when an aging drift of scale `sigma_drift` has
/// accumulated: drift widens the effective bias spread, so the ratio shrinks
/// to `sigma_noise / sqrt(sigma_cap^2 + sigma_drift^2)`.
pub fn expected_stable_fraction_with_drift(
    sigma_cap: f64,
    sigma_noise: f64,
    sigma_drift: f64,
    reads: usize,
) -> f64 {
    let sigma_eff = (sigma_cap * sigma_cap + sigma_drift * sigma_drift).sqrt();
    if sigma_eff == 0.0 {
        return 1.0;
    }
    expected_stable_fraction(sigma_noise / sigma_eff, reads)
}

/// Finds the `sigma_noise0` that puts the expected `reads`-read stable
/// fraction at `target` for the given bias spread, by bisection on the ratio.
pub fn calibrate_sigma_noise0(sigma_cap: f64, reads: usize, target: f64) -> Result<f64> {
    if sigma_cap.is_nan() || sigma_cap <= 0.0 {
        return Err(Error::InvalidArgument(
            "calibration needs sigma_cap > 0".into(),
        ));
    }
    if reads < 2 {
        return Err(Error::InvalidArgument(
            "calibration needs at least 2 reads".into(),
        ));
    }
    if !(0.0 < target && target < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target stable fraction must be in (0, 1), got {target}"
        )));
    }
    let mut lo = 1e-9; // f(lo) ~ 1
    let mut hi = 10.0; // f(hi) ~ 2^(1-reads)
    if expected_stable_fraction(hi, reads) > target {
        return Err(Error::InvalidArgument(format!(
            "target {target} unreachable: even ratio {hi} stays above it"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected_stable_fraction(mid, reads) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi.max(1e-12) {
            break;
        }
    }
    Ok(0.5 * (lo + hi) * sigma_cap)
}
