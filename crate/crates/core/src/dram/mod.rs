//! Stochastic behavioral model of a DRAM array.
//!
//! Each cell carries a latent manufacturing bias (the capacitance mismatch
//! that tips the sense amplifier at the VDD/2 bias point), a leakage time
//! constant, and a normalized stored voltage in [0, 1] where 0.5 is the bias
//! point. Startup values, remanence decay, environmental stress, pattern
//! bias, and slow aging drift are all derived from explicit seeds, so every
//! experiment replays bit-exactly.

mod calibrate;

pub use calibrate::{
    calibrate_sigma_noise0, expected_stable_fraction, expected_stable_fraction_with_drift,
};

use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::special::normal_cdf;

pub const NOMINAL_TEMPERATURE_C: f64 = 25.0;
pub const NOMINAL_SUPPLY_V: f64 = 5.0;

/// Coupling of the latent bias into post-decay reads. Unity makes a fully
/// decayed read coincide with the startup read.
pub const READ_BIAS_COUPLING: f64 = 1.0;

/// Default per-read noise, expressed as a fraction of `sigma_cap`.
/// Produced by [`calibrate_sigma_noise0`] for 144 reads targeting the ~90%
/// stable-cell operating point; see that function for the derivation.
pub const DEFAULT_NOISE_RATIO: f64 = 0.047694018311439296;

/// Default aging-walk scale per sqrt-hour. Small enough that 18 simulated
/// months of drift keeps the 144-read stable fraction inside its band.
pub const DEFAULT_SIGMA_AGE: f64 = 4.0e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    pub word_width: usize,
}

impl ArrayGeometry {
    pub fn new(rows: usize, cols: usize, word_width: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || word_width == 0 {
            return Err(Error::InvalidConfig(format!(
                "geometry dimensions must all be >= 1 (got {rows}x{cols}x{word_width})"
            )));
        }
        Ok(ArrayGeometry {
            rows,
            cols,
            word_width,
        })
    }

    /// Total capacity in bits.
    #[inline]
    pub fn capacity(&self) -> usize {
        self.rows * self.cols * self.word_width
    }

    /// Linear index -> (row, col, bit-in-word).
    #[inline]
    pub fn position(&self, index: usize) -> (usize, usize, usize) {
        debug_assert!(index < self.capacity());
        let bits_per_row = self.cols * self.word_width;
        let row = index / bits_per_row;
        let rem = index % bits_per_row;
        (row, rem / self.word_width, rem % self.word_width)
    }

    /// (row, col, bit-in-word) -> linear index.
    #[inline]
    pub fn index(&self, row: usize, col: usize, bit: usize) -> usize {
        debug_assert!(row < self.rows && col < self.cols && bit < self.word_width);
        (row * self.cols + col) * self.word_width + bit
    }

    /// 64 x 64 x 16 = 65 536 bits; the fast test geometry.
    pub fn small() -> Self {
        ArrayGeometry {
            rows: 64,
            cols: 64,
            word_width: 16,
        }
    }

    /// 256 x 256 x 16 = 1 Mibit; the experiment-scale geometry.
    pub fn megabit() -> Self {
        ArrayGeometry {
            rows: 256,
            cols: 256,
            word_width: 16,
        }
    }
}

/// Which value the first pattern block reads as (the observed bitmaps start
/// with a zeros block, but not in every trial).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternPhase {
    #[default]
    ZerosFirst,
    OnesFirst,
}

impl PatternPhase {
    /// Sign of the architectural bias for linear cell index `i`.
    #[inline]
    pub fn sign(self, i: usize, period: usize) -> f64 {
        let odd_block = (i / period) % 2 == 1;
        match (self, odd_block) {
            (PatternPhase::ZerosFirst, true) | (PatternPhase::OnesFirst, false) => 1.0,
            _ => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProcessParams {
    /// Std-dev of the per-cell latent bias (capacitance mismatch).
    pub sigma_cap: f64,
    /// Per-read noise std-dev at nominal conditions.
    pub sigma_noise0: f64,
    /// Lognormal location of the per-cell decay time constant, in ln(seconds).
    pub leak_log_tau_mean: f64,
    /// Lognormal scale of the decay time constant.
    pub leak_log_tau_sigma: f64,
    /// Architectural pattern bias amplitude; 0 disables the pattern.
    pub pattern_strength: f64,
    /// Pattern block length in bits (the word width of the observed part).
    pub pattern_period: usize,
    pub pattern_phase: PatternPhase,
    /// Aging random-walk scale per sqrt-hour.
    pub sigma_age: f64,
}

impl Default for ProcessParams {
    fn default() -> Self {
        ProcessParams {
            sigma_cap: 0.1,
            sigma_noise0: 0.1 * DEFAULT_NOISE_RATIO,
            // median retention 100 ms, x2.2 spread per sigma
            leak_log_tau_mean: (0.1f64).ln(),
            leak_log_tau_sigma: 0.8,
            pattern_strength: 0.0,
            pattern_period: 16,
            pattern_phase: PatternPhase::ZerosFirst,
            sigma_age: DEFAULT_SIGMA_AGE,
        }
    }
}

impl ProcessParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("sigma_cap", self.sigma_cap),
            ("sigma_noise0", self.sigma_noise0),
            ("leak_log_tau_sigma", self.leak_log_tau_sigma),
            ("pattern_strength", self.pattern_strength),
            ("sigma_age", self.sigma_age),
        ];
        for (name, v) in nonneg {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if !self.leak_log_tau_mean.is_finite() {
            return Err(Error::InvalidConfig("leak_log_tau_mean must be finite".into()));
        }
        if self.pattern_period == 0 {
            return Err(Error::InvalidConfig("pattern_period must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvCondition {
    pub temperature_c: f64,
    pub supply_voltage: f64,
    /// Equivalent-aging hours associated with this condition (used by
    /// schedules; the device tracks its own accumulated age).
    pub age_hours: f64,
}

impl Default for EnvCondition {
    fn default() -> Self {
        EnvCondition::nominal()
    }
}

impl EnvCondition {
    pub fn nominal() -> Self {
        EnvCondition {
            temperature_c: NOMINAL_TEMPERATURE_C,
            supply_voltage: NOMINAL_SUPPLY_V,
            age_hours: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.supply_voltage.is_nan() || self.supply_voltage <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "supply_voltage must be > 0, got {}",
                self.supply_voltage
            )));
        }
        if !self.temperature_c.is_finite() || !self.age_hours.is_finite() || self.age_hours < 0.0 {
            return Err(Error::InvalidConfig(
                "temperature must be finite and age_hours finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Multiplier on the per-read noise; 1.0 at nominal, non-decreasing in
    /// |ΔT| and |ΔV|.
    pub fn noise_scale(&self) -> f64 {
        1.0 + 0.5 * (self.temperature_c - NOMINAL_TEMPERATURE_C).abs() / NOMINAL_TEMPERATURE_C
            + 0.5 * (self.supply_voltage - NOMINAL_SUPPLY_V).abs() / NOMINAL_SUPPLY_V
    }

    /// Multiplier on the decay time constants; 1.0 at nominal, halving per
    /// +20 C (leakage roughly doubles).
    pub fn leak_scale(&self) -> f64 {
        (2.0f64).powf(-(self.temperature_c - NOMINAL_TEMPERATURE_C) / 20.0)
    }
}

/// JSON-serializable device identity. Cell arrays are never serialized; they
/// are re-derived from the seed. A descriptor with `age_hours > 0`
/// reconstructs a device with an equivalent canonically-seeded aging state
/// (the marginal drift law depends only on total age).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeviceDescriptor {
    pub seed: u64,
    pub geometry: ArrayGeometry,
    pub params: ProcessParams,
    pub age_hours: f64,
}

#[derive(Clone, Debug)]
pub struct DramDevice {
    device_seed: u64,
    geometry: ArrayGeometry,
    params: ProcessParams,
    latent_bias: Vec<f64>,
    leak_tau: Vec<f64>,
    cell_state: Vec<f64>,
    aging_drift: Vec<f64>,
    powered: bool,
    age_hours: f64,
    /// Bumped when latent bias or aging drift change; keys the caches.
    bias_version: u64,
    startup_cache: Option<StartupCache>,
    read_cache: Option<ReadCache>,
}

#[derive(Clone, Debug)]
struct StartupCache {
    bias_version: u64,
    sigma_bits: u64,
    probs: Vec<f64>,
}

/// Read probabilities additionally depend on the stored charge; the cache is
/// validated by comparing the exact cell-state snapshot, so the repeated
/// write/decay/read cycles of remanence extraction reuse one computation.
#[derive(Clone, Debug)]
struct ReadCache {
    bias_version: u64,
    sigma_bits: u64,
    state_snapshot: Vec<f64>,
    probs: Vec<f64>,
}

impl DramDevice {
    /// Instantiates process variation from the seed. Latent biases are
    /// Normal(0, sigma_cap) plus the architectural pattern term; decay time
    /// constants are lognormal. Cells rest at the bias point, powered off.
    pub fn new(seed: u64, geometry: ArrayGeometry, params: ProcessParams) -> Result<Self> {
        ArrayGeometry::new(geometry.rows, geometry.cols, geometry.word_width)?;
        params.validate()?;
        let n = geometry.capacity();

        let mut bias_stream = Stream::derived(seed, "latent-bias", 0);
        let mut latent_bias = Vec::with_capacity(n);
        for i in 0..n {
            let mut b = bias_stream.next_normal_scaled(params.sigma_cap);
            if params.pattern_strength > 0.0 {
                b += params.pattern_strength
                    * params.pattern_phase.sign(i, params.pattern_period);
            }
            latent_bias.push(b);
        }

        let mut tau_stream = Stream::derived(seed, "leak-tau", 0);
        let mut leak_tau = Vec::with_capacity(n);
        for _ in 0..n {
            let z = tau_stream.next_normal();
            leak_tau.push((params.leak_log_tau_mean + params.leak_log_tau_sigma * z).exp());
        }

        Ok(DramDevice {
            device_seed: seed,
            geometry,
            params,
            latent_bias,
            leak_tau,
            cell_state: vec![0.5; n],
            aging_drift: vec![0.0; n],
            powered: false,
            age_hours: 0.0,
            bias_version: 0,
            startup_cache: None,
            read_cache: None,
        })
    }

    pub fn from_descriptor(d: &DeviceDescriptor) -> Result<Self> {
        let mut dev = DramDevice::new(d.seed, d.geometry, d.params)?;
        if d.age_hours > 0.0 {
            dev.age(d.age_hours, crate::rng::derive_seed(d.seed, "canonical-age", 0))?;
        }
        Ok(dev)
    }

    pub fn descriptor(&self) -> DeviceDescriptor {
        DeviceDescriptor {
            seed: self.device_seed,
            geometry: self.geometry,
            params: self.params,
            age_hours: self.age_hours,
        }
    }

    #[inline]
    pub fn seed(&self) -> u64 {
        self.device_seed
    }

    #[inline]
    pub fn geometry(&self) -> ArrayGeometry {
        self.geometry
    }

    #[inline]
    pub fn params(&self) -> &ProcessParams {
        &self.params
    }

    #[inline]
    pub fn capacity(&self) -> usize {
        self.latent_bias.len()
    }

    #[inline]
    pub fn is_powered(&self) -> bool {
        self.powered
    }

    #[inline]
    pub fn age_hours(&self) -> f64 {
        self.age_hours
    }

    pub fn latent_bias(&self) -> &[f64] {
        &self.latent_bias
    }

    pub fn leak_tau(&self) -> &[f64] {
        &self.leak_tau
    }

    pub fn cell_state(&self) -> &[f64] {
        &self.cell_state
    }

    /// Powers the array on without a startup read (used after a remanence
    /// delay, where the decayed charge is what the next read senses).
    pub fn power_on(&mut self) -> Result<()> {
        if self.powered {
            return Err(Error::Protocol("power_on on a powered device".into()));
        }
        self.powered = true;
        Ok(())
    }

    /// Powers off instantly (zero-delay decay).
    pub fn power_off(&mut self) -> Result<()> {
        if !self.powered {
            return Err(Error::Protocol("power_off on an unpowered device".into()));
        }
        self.powered = false;
        Ok(())
    }

    /// The off->on transition that produces startup values: each cell tips to
    /// 1 exactly when latent bias + aging drift + fresh read noise is
    /// positive. Leaves the device powered with cell values latched to rails.
    pub fn power_up_read(&mut self, env: &EnvCondition, rng_seed: u64) -> Result<BitVector> {
        env.validate()?;
        if self.powered {
            return Err(Error::Protocol(
                "startup values only exist at the off->on transition; device is already powered"
                    .into(),
            ));
        }
        let sigma = self.params.sigma_noise0 * env.noise_scale();
        let mut noise = Stream::derived(self.device_seed, "startup-noise", rng_seed);
        let n = self.capacity();
        let mut out = BitVector::with_capacity(n);

        if sigma == 0.0 {
            for i in 0..n {
                let bit = self.latent_bias[i] + self.aging_drift[i] > 0.0;
                out.push(bit);
                self.cell_state[i] = if bit { 1.0 } else { 0.0 };
            }
        } else {
            self.ensure_startup_cache(sigma);
            let probs = &self.startup_cache.as_ref().unwrap().probs;
            for (i, &p) in probs.iter().enumerate() {
                let bit = noise.next_f64() < p;
                out.push(bit);
                self.cell_state[i] = if bit { 1.0 } else { 0.0 };
            }
        }
        self.powered = true;
        Ok(out)
    }

    /// Writes the same bit to every cell (1 -> full rail, 0 -> ground).
    pub fn write_all(&mut self, value: bool) -> Result<()> {
        if !self.powered {
            return Err(Error::Protocol("write_all on an unpowered device".into()));
        }
        let level = if value { 1.0 } else { 0.0 };
        self.cell_state.fill(level);
        Ok(())
    }

    /// Powers the array off for `delay_ms`; every cell decays exponentially
    /// toward the 0.5 bias point with its own (temperature-scaled) time
    /// constant.
    pub fn power_off_delay(&mut self, delay_ms: f64, env: &EnvCondition) -> Result<()> {
        env.validate()?;
        if !self.powered {
            return Err(Error::Protocol(
                "power_off_delay on an unpowered device".into(),
            ));
        }
        if delay_ms.is_nan() || delay_ms < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "delay must be >= 0 ms, got {delay_ms}"
            )));
        }
        let delay_s = delay_ms / 1_000.0;
        let leak_scale = env.leak_scale();
        for (state, tau) in self.cell_state.iter_mut().zip(&self.leak_tau) {
            let f = (-delay_s / (tau * leak_scale)).exp();
            *state = 0.5 + (*state - 0.5) * f;
        }
        self.powered = false;
        Ok(())
    }

    /// Senses every cell while powered: a cell reads 1 exactly when its
    /// stored charge offset plus the coupled latent bias plus fresh noise is
    /// positive. Cell state is not modified (refresh implied).
    pub fn read(&mut self, env: &EnvCondition, rng_seed: u64) -> Result<BitVector> {
        env.validate()?;
        if !self.powered {
            return Err(Error::Protocol("read on an unpowered device".into()));
        }
        let sigma = self.params.sigma_noise0 * env.noise_scale();
        let mut noise = Stream::derived(self.device_seed, "read-noise", rng_seed);
        let n = self.capacity();
        let mut out = BitVector::with_capacity(n);

        if sigma == 0.0 {
            for i in 0..n {
                let margin =
                    (self.cell_state[i] - 0.5) + READ_BIAS_COUPLING * self.latent_bias[i];
                out.push(margin > 0.0);
            }
        } else {
            self.ensure_read_cache(sigma);
            let probs = &self.read_cache.as_ref().unwrap().probs;
            for &p in probs.iter() {
                out.push(noise.next_f64() < p);
            }
        }
        Ok(out)
    }

    /// Accumulates an aging random-walk increment of scale
    /// `sigma_age * sqrt(hours)` on every cell's drift term.
    pub fn age(&mut self, hours: f64, aging_seed: u64) -> Result<()> {
        if hours.is_nan() || hours < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "aging hours must be >= 0, got {hours}"
            )));
        }
        if hours == 0.0 || self.params.sigma_age == 0.0 {
            self.age_hours += hours;
            return Ok(());
        }
        let scale = self.params.sigma_age * hours.sqrt();
        let mut walk = Stream::derived(
            self.device_seed ^ aging_seed,
            "aging-walk",
            self.age_hours.to_bits(),
        );
        for d in self.aging_drift.iter_mut() {
            *d += walk.next_normal_scaled(scale);
        }
        self.age_hours += hours;
        self.bias_version += 1;
        Ok(())
    }

    /// Adds the architectural pattern term to the latent biases: blocks of
    /// `period` bits alternate sign, phase per the device's configuration.
    pub fn inject_pattern_bias(&mut self, period: usize, strength: f64) -> Result<()> {
        if period == 0 {
            return Err(Error::InvalidArgument("pattern period must be >= 1".into()));
        }
        if !strength.is_finite() {
            return Err(Error::InvalidArgument("pattern strength must be finite".into()));
        }
        if strength == 0.0 {
            return Ok(());
        }
        let phase = self.params.pattern_phase;
        for (i, b) in self.latent_bias.iter_mut().enumerate() {
            *b += strength * phase.sign(i, period);
        }
        self.bias_version += 1;
        Ok(())
    }

    fn ensure_startup_cache(&mut self, sigma: f64) {
        let sigma_bits = sigma.to_bits();
        let valid = self
            .startup_cache
            .as_ref()
            .is_some_and(|c| c.bias_version == self.bias_version && c.sigma_bits == sigma_bits);
        if !valid {
            let probs = self
                .latent_bias
                .iter()
                .zip(&self.aging_drift)
                .map(|(b, d)| normal_cdf((b + d) / sigma))
                .collect();
            self.startup_cache = Some(StartupCache {
                bias_version: self.bias_version,
                sigma_bits,
                probs,
            });
        }
    }

    fn ensure_read_cache(&mut self, sigma: f64) {
        let sigma_bits = sigma.to_bits();
        let valid = self.read_cache.as_ref().is_some_and(|c| {
            c.bias_version == self.bias_version
                && c.sigma_bits == sigma_bits
                && c.state_snapshot == self.cell_state
        });
        if !valid {
            let probs = self
                .cell_state
                .iter()
                .zip(&self.latent_bias)
                .map(|(s, b)| normal_cdf(((s - 0.5) + READ_BIAS_COUPLING * b) / sigma))
                .collect();
            self.read_cache = Some(ReadCache {
                bias_version: self.bias_version,
                sigma_bits,
                state_snapshot: self.cell_state.clone(),
                probs,
            });
        }
    }
}
