//! Startup-value PUF layer: stable-bit enrollment across repeated reads,
//! fingerprint generation, Hamming-distance authentication, and the
//! uniqueness/reliability metrics.

use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::dram::{ArrayGeometry, DramDevice, EnvCondition};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

pub const DEFAULT_ID_LENGTH: usize = 128;
pub const DEFAULT_ENROLL_READS: usize = 144;
pub const DEFAULT_AUTH_THRESHOLD: f64 = 0.2;

/// Stable-cell selection produced by enrollment. Indices are strictly
/// increasing and all below the source capacity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnrollmentMask {
    pub cell_indices: Vec<usize>,
    pub source_geometry: ArrayGeometry,
    pub readings_used: usize,
    pub conditions_used: Vec<EnvCondition>,
}

impl EnrollmentMask {
    pub fn len(&self) -> usize {
        self.cell_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cell_indices.is_empty()
    }

    /// FNV-1a digest over the mask contents, as lowercase hex. Binds a
    /// fingerprint to the exact cell selection that produced it.
    pub fn digest(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(self.source_geometry.rows as u64);
        eat(self.source_geometry.cols as u64);
        eat(self.source_geometry.word_width as u64);
        eat(self.readings_used as u64);
        for &i in &self.cell_indices {
            eat(i as u64);
        }
        format!("{h:016x}")
    }
}

/// A device identifier extracted through an enrollment mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub device_label: String,
    /// ID length in bits.
    pub id_length: usize,
    /// ID bits as lowercase hex (packed LSB-first).
    #[serde(with = "hex_bits")]
    pub bits: BitVector,
    pub mask_digest: String,
}

mod hex_bits {
    use super::BitVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(bits: &BitVector, s: S) -> Result<S::Ok, S::Error> {
        bits.to_hex().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BitVector, D::Error> {
        // Length is fixed up by Fingerprint::deserialize via id_length; here
        // we decode assuming the hex encodes whole bytes and trim later.
        let hex = String::deserialize(d)?;
        BitVector::from_hex(&hex, hex.len() * 4).map_err(serde::de::Error::custom)
    }
}

impl Fingerprint {
    /// Restores the exact bit length after JSON deserialization (hex encodes
    /// whole bytes).
    pub fn normalize(mut self) -> Result<Self> {
        if self.bits.len() < self.id_length {
            return Err(Error::Malformed(format!(
                "fingerprint hex holds {} bits, id_length says {}",
                self.bits.len(),
                self.id_length
            )));
        }
        self.bits = self.bits.truncated(self.id_length);
        Ok(self)
    }
}

/// Outcome of comparing a candidate fingerprint against a stored one.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AuthDecision {
    pub fractional_hd: f64,
    pub threshold: f64,
    pub accepted: bool,
}

/// Selects the cells whose value is identical across the readings.
///
/// With `min_stability` equal to the number of readings (the default
/// behavior) this is strict unanimity; smaller values accept cells whose
/// majority value occurs in at least `min_stability` readings.
pub fn enroll(readings: &[BitVector], min_stability: usize) -> Result<EnrollmentMask> {
    enroll_with_geometry(readings, min_stability, None)
}

/// [`enroll`], recording the source geometry in the mask.
pub fn enroll_with_geometry(
    readings: &[BitVector],
    min_stability: usize,
    geometry: Option<ArrayGeometry>,
) -> Result<EnrollmentMask> {
    if readings.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "enrollment needs at least 2 readings, got {}",
            readings.len()
        )));
    }
    if min_stability > readings.len() || min_stability == 0 {
        return Err(Error::InvalidArgument(format!(
            "min_stability {} out of range 1..={}",
            min_stability,
            readings.len()
        )));
    }
    let n = readings[0].len();
    for r in readings {
        if r.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: r.len(),
            });
        }
    }
    let mut ones = vec![0u32; n];
    for r in readings {
        for (count, bit) in ones.iter_mut().zip(r.iter()) {
            *count += bit as u32;
        }
    }
    let total = readings.len() as u32;
    let need = min_stability as u32;
    let cell_indices: Vec<usize> = (0..n)
        .filter(|&i| ones[i] >= need || (total - ones[i]) >= need)
        .collect();
    let geometry = geometry.unwrap_or(ArrayGeometry {
        rows: 1,
        cols: 1,
        word_width: n,
    });
    Ok(EnrollmentMask {
        cell_indices,
        source_geometry: geometry,
        readings_used: readings.len(),
        conditions_used: Vec::new(),
    })
}

/// Performs enrollment directly on a device: `reads` startup readings at the
/// given condition, unanimity rule. The device ends powered off.
pub fn enroll_device(
    device: &mut DramDevice,
    env: &EnvCondition,
    reads: usize,
    base_seed: u64,
) -> Result<EnrollmentMask> {
    let readings = collect_startup_reads(device, env, reads, base_seed)?;
    let mut mask = enroll_with_geometry(&readings, readings.len(), Some(device.geometry()))?;
    mask.conditions_used = vec![*env];
    Ok(mask)
}

/// Repeated full power cycles; the device ends powered off.
pub fn collect_startup_reads(
    device: &mut DramDevice,
    env: &EnvCondition,
    reads: usize,
    base_seed: u64,
) -> Result<Vec<BitVector>> {
    let mut out = Vec::with_capacity(reads);
    for k in 0..reads {
        if device.is_powered() {
            device.power_off()?;
        }
        let seed = derive_seed(base_seed, "startup-read", k as u64);
        out.push(device.power_up_read(env, seed)?);
    }
    if device.is_powered() {
        device.power_off()?;
    }
    Ok(out)
}

/// Extracts a fingerprint: one startup read, masked cells in index order,
/// truncated to `id_length` bits.
pub fn generate_id(
    device: &mut DramDevice,
    mask: &EnrollmentMask,
    env: &EnvCondition,
    id_length: usize,
    rng_seed: u64,
) -> Result<Fingerprint> {
    if mask.len() < id_length {
        return Err(Error::EnrollmentDeficit {
            required: id_length,
            available: mask.len(),
        });
    }
    if mask.source_geometry != device.geometry() {
        return Err(Error::InvalidArgument(format!(
            "mask geometry {:?} does not match device geometry {:?}",
            mask.source_geometry,
            device.geometry()
        )));
    }
    if device.is_powered() {
        device.power_off()?;
    }
    let reading = device.power_up_read(env, rng_seed)?;
    let bits = reading.select(&mask.cell_indices).truncated(id_length);
    Ok(Fingerprint {
        device_label: format!("device-{:016x}", device.seed()),
        id_length,
        bits,
        mask_digest: mask.digest(),
    })
}

/// Accepts when the fractional Hamming distance is at or below the threshold.
pub fn authenticate(
    candidate: &Fingerprint,
    stored: &Fingerprint,
    threshold: f64,
) -> Result<AuthDecision> {
    if !(0.0..=0.5).contains(&threshold) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be in [0, 0.5], got {threshold}"
        )));
    }
    let fractional_hd = candidate.bits.fractional_hd(&stored.bits)?;
    Ok(AuthDecision {
        fractional_hd,
        threshold,
        accepted: fractional_hd <= threshold,
    })
}

/// Mean pairwise fractional Hamming distance over repeated readings of one
/// device (reliability; 0 is perfect).
pub fn intra_hd(readings: &[BitVector]) -> Result<f64> {
    mean_pairwise_hd(readings)
}

/// Mean pairwise fractional Hamming distance across device fingerprints
/// (uniqueness; 0.5 is ideal).
pub fn inter_hd(fingerprints: &[Fingerprint]) -> Result<f64> {
    let bits: Vec<BitVector> = fingerprints.iter().map(|f| f.bits.clone()).collect();
    mean_pairwise_hd(&bits)
}

fn mean_pairwise_hd(items: &[BitVector]) -> Result<f64> {
    if items.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 vectors for a pairwise distance".into(),
        ));
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            sum += items[i].fractional_hd(&items[j])?;
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

/// One row of a stability report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityEntry {
    pub condition: EnvCondition,
    pub reads: usize,
    pub stable_fraction: f64,
}

/// Runs the schedule in order: at each entry the device is first aged up to
/// the entry's `age_hours` (if beyond its current age), then read `reads`
/// times at the entry's condition; the stable fraction is the share of cells
/// unanimous across those reads.
pub fn stability_report(
    device: &mut DramDevice,
    schedule: &[(EnvCondition, usize)],
    base_seed: u64,
) -> Result<Vec<StabilityEntry>> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("empty stability schedule".into()));
    }
    for (_, reads) in schedule {
        if *reads < 2 {
            return Err(Error::InvalidArgument(
                "each stability entry needs at least 2 reads".into(),
            ));
        }
    }
    let mut out = Vec::with_capacity(schedule.len());
    for (epoch, (env, reads)) in schedule.iter().enumerate() {
        env.validate()?;
        if env.age_hours > device.age_hours() {
            let hours = env.age_hours - device.age_hours();
            device.age(hours, derive_seed(base_seed, "epoch-aging", epoch as u64))?;
        }
        let readings = collect_startup_reads(
            device,
            env,
            *reads,
            derive_seed(base_seed, "stability-epoch", epoch as u64),
        )?;
        let mask = enroll(&readings, readings.len())?;
        out.push(StabilityEntry {
            condition: *env,
            reads: *reads,
            stable_fraction: mask.len() as f64 / device.capacity() as f64,
        });
    }
    Ok(out)
}

/// CSV rendering with header `condition,reads,stable_fraction`.
pub fn stability_csv(entries: &[StabilityEntry]) -> String {
    let mut out = String::from("condition,reads,stable_fraction\n");
    for e in entries {
        out.push_str(&format!(
            "{}C/{}V/{}h,{},{:.6}\n",
            e.condition.temperature_c,
            e.condition.supply_voltage,
            e.condition.age_hours,
            e.reads,
            e.stable_fraction
        ));
    }
    out
}
