//! Power-supply-noise TRNG: a stochastic supply-voltage model (normally
//! distributed variation per supply profile, with optional slow wander), a
//! threshold comparator that turns samples into bits, and the
//! self-calibrating feedback loop that locks the ones-rate to one half.
//!
//! The feedback works integrate-and-dump: a precharged capacitor integrates
//! the bit history over a correction window; at each window boundary the
//! accumulated charge error adjusts the comparator reference through the
//! tuning element and the capacitor is precharged again. A one-way
//! acquire/track gain switch gives fast pull-in from a badly chosen initial
//! reference without disturbing the locked stream.

use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupplyProfile {
    pub name: String,
    pub mean_v: f64,
    pub noise_sigma_v: f64,
    /// Slow wander of the mean, volts per second.
    pub drift_v_per_s: f64,
    pub seed: u64,
}

impl SupplyProfile {
    pub fn new(name: &str, mean_v: f64, noise_sigma_v: f64, drift_v_per_s: f64, seed: u64) -> Self {
        SupplyProfile {
            name: name.to_string(),
            mean_v,
            noise_sigma_v,
            drift_v_per_s,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let noise_ok = self.noise_sigma_v.is_finite() && self.noise_sigma_v >= 0.0;
        if !self.mean_v.is_finite() || !noise_ok || !self.drift_v_per_s.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "supply profile {}: mean/noise/drift invalid",
                self.name
            )));
        }
        Ok(())
    }

    /// Mean voltage at time `t` (drift included, no noise).
    pub fn mean_at(&self, t: f64) -> f64 {
        self.mean_v + self.drift_v_per_s * t
    }
}

/// The four built-in supplies. Sigma values are illustrative defaults (the
/// named supplies come with no measured figures); the computer supply is the
/// one that wanders.
pub fn builtin_profiles() -> Vec<SupplyProfile> {
    vec![
        SupplyProfile::new("bench", 5.000, 0.002, 0.0, 0xb0),
        SupplyProfile::new("usb", 5.050, 0.008, 0.0, 0xb1),
        SupplyProfile::new("computer", 5.020, 0.005, 0.010, 0xb2),
        SupplyProfile::new("dc", 5.000, 0.003, 0.0, 0xb3),
    ]
}

pub fn builtin_profile(name: &str) -> Result<SupplyProfile> {
    builtin_profiles()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "unknown supply profile `{name}` (built-ins: bench, usb, computer, dc)"
            ))
        })
}

/// One voltage sample at time `t`: mean + drift·t + Normal(0, sigma).
/// Deterministic in (profile, t, rng_seed).
pub fn sample_supply(profile: &SupplyProfile, t: f64, rng_seed: u64) -> f64 {
    let mut stream = Stream::derived(
        profile.seed,
        "supply-sample",
        rng_seed ^ t.to_bits().rotate_left(17),
    );
    profile.mean_at(t) + stream.next_normal_scaled(profile.noise_sigma_v)
}

/// Threshold element: 1 when the sample exceeds the reference; exact ties
/// resolve to 0 (they have probability zero under the continuous model).
#[inline]
pub fn comparator_bit(v: f64, v_ref: f64) -> bool {
    v > v_ref
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct DvftParams {
    /// Reference correction per unit charge error per window (track mode).
    pub gain: f64,
    /// Acquire-mode gain multiplier; switches off once the loop locks.
    pub acquire_boost: f64,
    /// Capacitor charge step per bit (the integrator leak factor).
    pub charge_step: f64,
    /// Steps per correction window (the capacitor is precharged after each).
    pub window: u64,
    /// |charge error| below which the loop is considered locked.
    pub lock_threshold: f64,
    /// Seconds per step (sampling cadence).
    pub step_dt: f64,
}

impl Default for DvftParams {
    fn default() -> Self {
        DvftParams {
            gain: 2.0e-4,
            acquire_boost: 8.0,
            charge_step: 0.01,
            window: 128,
            lock_threshold: 0.1,
            step_dt: 1.0e-7,
        }
    }
}

impl DvftParams {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !finite_nonneg(self.gain)
            || !(self.acquire_boost.is_finite() && self.acquire_boost >= 1.0)
            || !(self.charge_step.is_finite() && self.charge_step > 0.0 && self.charge_step <= 1.0)
            || self.window == 0
            || !(self.lock_threshold.is_finite() && self.lock_threshold > 0.0)
            || !(self.step_dt.is_finite() && self.step_dt > 0.0)
        {
            return Err(Error::InvalidConfig("invalid DVFT parameters".into()));
        }
        Ok(())
    }
}

/// Feedback-loop state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DvftState {
    /// Comparator threshold being tuned.
    pub v_ref: f64,
    /// Integrator state, precharged to 0.5.
    pub cap_charge: f64,
    /// Track-mode gain.
    pub gain: f64,
    /// Running count of ones.
    pub history_ones: u64,
    pub step: u64,
    /// One-way acquire -> track switch.
    pub locked: bool,
}

impl DvftState {
    pub fn new(init_v_ref: f64, gain: f64) -> Self {
        DvftState {
            v_ref: init_v_ref,
            cap_charge: 0.5,
            gain,
            history_ones: 0,
            step: 0,
            locked: false,
        }
    }
}

/// Advances the loop by one bit: the capacitor integrates (bit - 1/2); at
/// each window boundary the charge error corrects v_ref and the capacitor is
/// precharged back to 1/2. cap_charge stays in [0, 1] throughout.
pub fn dvft_step(state: &DvftState, params: &DvftParams, bit: bool) -> DvftState {
    let mut next = *state;
    let delta = params.charge_step * (if bit { 0.5 } else { -0.5 });
    next.cap_charge = (next.cap_charge + delta).clamp(0.0, 1.0);
    next.history_ones += bit as u64;
    next.step += 1;

    if next.step.is_multiple_of(params.window) {
        let err = next.cap_charge - 0.5;
        if !next.locked && err.abs() < params.lock_threshold {
            next.locked = true;
        }
        let gain_eff = if next.locked {
            next.gain
        } else {
            next.gain * params.acquire_boost
        };
        next.v_ref += gain_eff * err;
        next.cap_charge = 0.5;
    }
    next
}

/// Per-step trace row.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DvftTraceRow {
    pub step: u64,
    pub voltage: f64,
    pub v_ref: f64,
    pub cap_charge: f64,
    pub bit: bool,
}

/// Trace CSV: `step,voltage,v_ref,cap_charge,bit`.
pub fn trace_csv(rows: &[DvftTraceRow]) -> String {
    let mut out = String::from("step,voltage,v_ref,cap_charge,bit\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.4},{}\n",
            r.step,
            r.voltage,
            r.v_ref,
            r.cap_charge,
            r.bit as u8
        ));
    }
    out
}

pub struct DvftRun {
    pub bits: BitVector,
    pub trace: Vec<DvftTraceRow>,
    pub final_state: DvftState,
}

/// Closed-loop run: sample -> comparator -> feedback, `n_bits` times.
/// `trace_every = 1` records every step; larger values decimate the trace
/// (step 0 is always recorded). `trace_every = 0` disables the trace.
pub fn run_dvft_with(
    profile: &SupplyProfile,
    params: &DvftParams,
    init_v_ref: f64,
    n_bits: usize,
    rng_seed: u64,
    trace_every: u64,
) -> Result<DvftRun> {
    profile.validate()?;
    params.validate()?;
    if n_bits == 0 {
        return Err(Error::InvalidArgument("n_bits must be >= 1".into()));
    }
    let mut state = DvftState::new(init_v_ref, params.gain);
    let mut bits = BitVector::with_capacity(n_bits);
    let mut trace = Vec::new();
    for i in 0..n_bits {
        let t = state.step as f64 * params.step_dt;
        let v = sample_supply(profile, t, derive_seed(rng_seed, "dvft-sample", i as u64));
        let bit = comparator_bit(v, state.v_ref);
        let recorded_v_ref = state.v_ref;
        state = dvft_step(&state, params, bit);
        bits.push(bit);
        if trace_every > 0 && (i as u64).is_multiple_of(trace_every) {
            trace.push(DvftTraceRow {
                step: i as u64,
                voltage: v,
                v_ref: recorded_v_ref,
                cap_charge: state.cap_charge,
                bit,
            });
        }
    }
    Ok(DvftRun {
        bits,
        trace,
        final_state: state,
    })
}

/// [`run_dvft_with`] with default parameters and a full per-step trace.
pub fn run_dvft(
    profile: &SupplyProfile,
    init_v_ref: f64,
    n_bits: usize,
    rng_seed: u64,
) -> Result<DvftRun> {
    run_dvft_with(profile, &DvftParams::default(), init_v_ref, n_bits, rng_seed, 1)
}
