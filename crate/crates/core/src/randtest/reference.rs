//! Direct-from-definition implementations of every test statistic, kept
//! deliberately slow and simple: per-bit scans, explicit pattern
//! enumeration, full partial-sum vectors. They exist as an independent
//! cross-check of the optimized paths and must agree with them exactly on
//! any input (the property corpus runs both on everything up to 10^4 bits).

use crate::bits::BitVector;
use crate::special::{erfc, igamc, normal_cdf};

use super::CusumMode;

/// Frequency statistic by per-bit accumulation.
pub fn monobit(bits: &BitVector) -> (f64, f64) {
    let n = bits.len() as f64;
    let mut sum: i64 = 0;
    for b in bits.iter() {
        sum += if b { 1 } else { -1 };
    }
    let s_obs = (sum as f64).abs() / n.sqrt();
    (s_obs, erfc(s_obs / std::f64::consts::SQRT_2))
}

/// Block frequency by per-bit counting within each block.
pub fn block_frequency(bits: &BitVector, m: usize) -> (f64, f64) {
    let n = bits.len();
    let blocks = n / m;
    let mut sum = 0.0;
    for b in 0..blocks {
        let mut ones = 0usize;
        for i in b * m..(b + 1) * m {
            if bits.get(i) {
                ones += 1;
            }
        }
        let pi = ones as f64 / m as f64;
        sum += (pi - 0.5) * (pi - 0.5);
    }
    let chi = 4.0 * m as f64 * sum;
    (chi, igamc(blocks as f64 / 2.0, chi / 2.0))
}

/// Runs test with run counting by explicit scan.
pub fn runs(bits: &BitVector) -> (f64, f64) {
    let n = bits.len();
    let mut ones = 0usize;
    for b in bits.iter() {
        ones += b as usize;
    }
    let pi = ones as f64 / n as f64;
    let tau = 2.0 / (n as f64).sqrt();
    if (pi - 0.5).abs() >= tau {
        return (f64::NAN, 0.0);
    }
    let mut v = 1usize;
    for i in 0..n - 1 {
        if bits.get(i) != bits.get(i + 1) {
            v += 1;
        }
    }
    let v = v as f64;
    let num = (v - 2.0 * n as f64 * pi * (1.0 - pi)).abs();
    let den = 2.0 * (2.0 * n as f64).sqrt() * pi * (1.0 - pi);
    (v, erfc(num / den))
}

/// Longest-run test with naive per-block scanning.
pub fn longest_run(bits: &BitVector) -> (f64, f64) {
    let n = bits.len();
    let (m, v, pi): (usize, &[usize], &[f64]) = if n < 6272 {
        super::LONGEST_RUN_SMALL
    } else if n < 750_000 {
        super::LONGEST_RUN_MEDIUM
    } else {
        super::LONGEST_RUN_LARGE
    };
    let k = v.len() - 1;
    let blocks = n / m;
    let mut nu = vec![0usize; k + 1];
    for b in 0..blocks {
        let mut longest = 0usize;
        let mut run = 0usize;
        for i in b * m..(b + 1) * m {
            if bits.get(i) {
                run += 1;
                longest = longest.max(run);
            } else {
                run = 0;
            }
        }
        let idx = if longest <= v[0] {
            0
        } else if longest >= v[k] {
            k
        } else {
            longest - v[0]
        };
        nu[idx] += 1;
    }
    let nf = blocks as f64;
    let mut chi = 0.0;
    for i in 0..=k {
        let expected = nf * pi[i];
        let d = nu[i] as f64 - expected;
        chi += d * d / expected;
    }
    (chi, igamc(k as f64 / 2.0, chi / 2.0))
}

/// Cumulative sums with the full partial-sum vector materialized.
pub fn cusum(bits: &BitVector, mode: CusumMode) -> (f64, f64) {
    let n = bits.len();
    let seq: Vec<i64> = match mode {
        CusumMode::Forward => bits.iter().map(|b| if b { 1 } else { -1 }).collect(),
        CusumMode::Backward => bits
            .iter()
            .map(|b| if b { 1 } else { -1 })
            .rev()
            .collect(),
    };
    let mut partial = Vec::with_capacity(n);
    let mut s = 0i64;
    for x in seq {
        s += x;
        partial.push(s);
    }
    let z = partial.iter().map(|p| p.abs()).max().unwrap();
    let n_i = n as i64;
    let sqrt_n = (n as f64).sqrt();
    let zf = z as f64;
    let mut sum1 = 0.0;
    for k in (-n_i / z + 1) / 4..=(n_i / z - 1) / 4 {
        let k = k as f64;
        sum1 += normal_cdf((4.0 * k + 1.0) * zf / sqrt_n)
            - normal_cdf((4.0 * k - 1.0) * zf / sqrt_n);
    }
    let mut sum2 = 0.0;
    for k in (-n_i / z - 3) / 4..=(n_i / z - 1) / 4 {
        let k = k as f64;
        sum2 += normal_cdf((4.0 * k + 3.0) * zf / sqrt_n)
            - normal_cdf((4.0 * k + 1.0) * zf / sqrt_n);
    }
    (z as f64, (1.0 - sum1 + sum2).clamp(0.0, 1.0))
}

/// Counts one overlapping pattern by sliding over the circular extension and
/// comparing bit-by-bit (no rolling window).
fn count_pattern(bits: &BitVector, pattern: usize, m: usize) -> u64 {
    let n = bits.len();
    let mut count = 0u64;
    for start in 0..n {
        let mut matches = true;
        for j in 0..m {
            let bit = bits.get((start + j) % n);
            let want = (pattern >> (m - 1 - j)) & 1 == 1;
            if bit != want {
                matches = false;
                break;
            }
        }
        if matches {
            count += 1;
        }
    }
    count
}

fn psi_squared(bits: &BitVector, m: i32) -> f64 {
    if m <= 0 {
        return 0.0;
    }
    let m = m as usize;
    let n = bits.len();
    let mut sum_sq = 0.0;
    for pattern in 0..(1usize << m) {
        let c = count_pattern(bits, pattern, m);
        sum_sq += (c as f64) * (c as f64);
    }
    (2.0f64).powi(m as i32) / n as f64 * sum_sq - n as f64
}

/// Serial test by explicit pattern enumeration.
pub fn serial(bits: &BitVector, m: usize) -> (f64, f64, f64, f64) {
    let m = m as i32;
    let psi_m = psi_squared(bits, m);
    let psi_m1 = psi_squared(bits, m - 1);
    let psi_m2 = psi_squared(bits, m - 2);
    // the deltas are non-negative in exact arithmetic; rounding can leave
    // a tiny negative residue on near-degenerate inputs
    let d1 = (psi_m - psi_m1).max(0.0);
    let d2 = (psi_m - 2.0 * psi_m1 + psi_m2).max(0.0);
    let p1 = igamc((2.0f64).powi(m - 2), d1 / 2.0);
    let p2 = igamc((2.0f64).powi(m - 3), d2 / 2.0);
    (d1, p1, d2, p2)
}

/// Approximate entropy by explicit pattern enumeration.
pub fn approx_entropy(bits: &BitVector, m: usize) -> (f64, f64) {
    let n = bits.len() as f64;
    let phi = |mm: usize| -> f64 {
        if mm == 0 {
            return 0.0;
        }
        let mut s = 0.0;
        for pattern in 0..(1usize << mm) {
            let c = count_pattern(bits, pattern, mm);
            if c > 0 {
                let f = c as f64 / n;
                s += f * f.ln();
            }
        }
        s
    };
    let apen = phi(m) - phi(m + 1);
    let chi = (2.0 * n * (std::f64::consts::LN_2 - apen)).max(0.0);
    (chi, igamc((2.0f64).powi(m as i32 - 1), chi / 2.0))
}
