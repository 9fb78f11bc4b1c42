//! Line-oriented experiment configuration: `section.key = value` pairs, `#`
//! comments, blank lines. Unknown keys are rejected with the offending key
//! and line number; an empty config is fully defaulted and valid.

use std::fmt;
use std::str::FromStr;

use silicon_entropy_core::dram::{
    ArrayGeometry, EnvCondition, PatternPhase, ProcessParams,
};
use silicon_entropy_core::randtest::SuiteConfig;
use silicon_entropy_core::trng::{DebiasSpec, DebiasStage, EmissionOrder, ExtractionMode};

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config line {line}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: Some(line),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    PufEnroll,
    PufAuth,
    TrngRemanence,
    TrngStartup,
    TrngDvft,
    Nist,
    AgingCampaign,
}

impl FromStr for ExperimentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "puf-enroll" => ExperimentKind::PufEnroll,
            "puf-auth" => ExperimentKind::PufAuth,
            "trng-remanence" => ExperimentKind::TrngRemanence,
            "trng-startup" => ExperimentKind::TrngStartup,
            "trng-dvft" => ExperimentKind::TrngDvft,
            "nist" => ExperimentKind::Nist,
            "aging-campaign" => ExperimentKind::AgingCampaign,
            other => return Err(format!("unknown experiment kind `{other}`")),
        })
    }
}

/// Which TRNG pipeline the `trng` subcommand drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrngSource {
    Remanence,
    Startup,
    Dvft,
}

impl FromStr for TrngSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "remanence" => TrngSource::Remanence,
            "startup" => TrngSource::Startup,
            "dvft" => TrngSource::Dvft,
            other => return Err(format!("unknown trng source `{other}` (remanence|startup|dvft)")),
        })
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub geometry: ArrayGeometry,
    pub params: ProcessParams,
    pub env: EnvCondition,
    pub kind: Option<ExperimentKind>,

    pub enroll_reads: usize,
    pub id_length: usize,
    pub auth_threshold: f64,

    pub trng_source: TrngSource,
    /// None selects the automatic knee sweep.
    pub trng_delay_ms: Option<f64>,
    pub trng_rounds: usize,
    pub trng_mode: ExtractionMode,
    pub trng_write_value: bool,
    /// None picks the source-appropriate default stack.
    pub trng_debias: Option<DebiasSpec>,
    pub trng_target_bits: usize,
    pub trng_trials_per_block: usize,
    pub trng_order: EmissionOrder,

    pub dvft_profile: String,
    pub dvft_init_offset_v: f64,
    pub dvft_gain: Option<f64>,
    pub dvft_trace_every: u64,

    pub suite: SuiteConfig,

    pub aging_epochs_hours: Vec<f64>,
    pub aging_reads: usize,

    pub bitmap_row_width: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            geometry: ArrayGeometry::small(),
            params: ProcessParams::default(),
            env: EnvCondition::nominal(),
            kind: None,
            enroll_reads: 144,
            id_length: 128,
            auth_threshold: 0.2,
            trng_source: TrngSource::Remanence,
            trng_delay_ms: None,
            trng_rounds: 3,
            trng_mode: ExtractionMode::XorConsecutive,
            trng_write_value: true,
            trng_debias: None,
            trng_target_bits: 1_000_000,
            trng_trials_per_block: 8,
            trng_order: EmissionOrder::CellMajor,
            dvft_profile: "bench".into(),
            dvft_init_offset_v: 0.0,
            dvft_gain: None,
            dvft_trace_every: 1_000,
            suite: SuiteConfig::default(),
            // pre-aging epoch plus eight aged epochs spanning 18 months of
            // equivalent hours (one month = 730 h of drift time)
            aging_epochs_hours: vec![
                0.0, 730.0, 4_380.0, 5_110.0, 5_840.0, 8_030.0, 8_760.0, 12_410.0, 13_140.0,
            ],
            aging_reads: 144,
            bitmap_row_width: 8_192,
        }
    }
}

/// Parses a debias stage list like `von-neumann,xor-fold(2)`; `identity` or
/// an empty string means no stages.
pub fn parse_debias(spec: &str) -> Result<DebiasSpec, String> {
    let spec = spec.trim();
    if spec.is_empty() || spec == "identity" {
        return Ok(DebiasSpec::identity());
    }
    let mut stages = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part == "von-neumann" {
            stages.push(DebiasStage::VonNeumann);
        } else if let Some(rest) = part.strip_prefix("xor-fold(") {
            let k = rest
                .strip_suffix(')')
                .ok_or_else(|| format!("malformed stage `{part}`"))?
                .parse::<usize>()
                .map_err(|e| format!("bad xor-fold width in `{part}`: {e}"))?;
            if k < 2 {
                return Err(format!("xor-fold needs k >= 2, got {k}"));
            }
            stages.push(DebiasStage::XorFold(k));
        } else {
            return Err(format!(
                "unknown debias stage `{part}` (von-neumann | xor-fold(k) | identity)"
            ));
        }
    }
    Ok(DebiasSpec { stages })
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(line_no, format!("expected `section.key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(key, value, line_no)?;
        }
        cfg.validate().map_err(|message| ConfigError {
            line: None,
            message,
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::from_text(&text)
    }

    fn apply(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        fn parse<T: FromStr>(value: &str, key: &str, line: usize) -> Result<T, ConfigError>
        where
            T::Err: fmt::Display,
        {
            value
                .parse::<T>()
                .map_err(|e| err(line, format!("bad value for {key}: {e}")))
        }

        match key {
            "device.seed" => self.seed = parse(value, key, line)?,
            "device.rows" => self.geometry.rows = parse(value, key, line)?,
            "device.cols" => self.geometry.cols = parse(value, key, line)?,
            "device.word_width" => self.geometry.word_width = parse(value, key, line)?,
            "device.sigma_cap" => self.params.sigma_cap = parse(value, key, line)?,
            "device.sigma_noise0" => self.params.sigma_noise0 = parse(value, key, line)?,
            "device.leak_log_tau_mean" => self.params.leak_log_tau_mean = parse(value, key, line)?,
            "device.leak_log_tau_sigma" => {
                self.params.leak_log_tau_sigma = parse(value, key, line)?
            }
            "device.pattern_strength" => self.params.pattern_strength = parse(value, key, line)?,
            "device.pattern_period" => self.params.pattern_period = parse(value, key, line)?,
            "device.pattern_phase" => {
                self.params.pattern_phase = match value {
                    "zeros-first" => PatternPhase::ZerosFirst,
                    "ones-first" => PatternPhase::OnesFirst,
                    other => {
                        return Err(err(
                            line,
                            format!("bad value for {key}: `{other}` (zeros-first|ones-first)"),
                        ))
                    }
                }
            }
            "device.sigma_age" => self.params.sigma_age = parse(value, key, line)?,
            "env.temperature" => self.env.temperature_c = parse(value, key, line)?,
            "env.supply_voltage" => self.env.supply_voltage = parse(value, key, line)?,
            "env.age_hours" => self.env.age_hours = parse(value, key, line)?,
            "experiment.kind" => {
                self.kind = Some(
                    value
                        .parse::<ExperimentKind>()
                        .map_err(|e| err(line, e))?,
                )
            }
            "enroll.reads" => self.enroll_reads = parse(value, key, line)?,
            "enroll.id_length" => self.id_length = parse(value, key, line)?,
            "auth.threshold" => self.auth_threshold = parse(value, key, line)?,
            "trng.source" => {
                self.trng_source = value.parse::<TrngSource>().map_err(|e| err(line, e))?
            }
            "trng.delay_ms" => {
                self.trng_delay_ms = if value == "auto" {
                    None
                } else {
                    Some(parse(value, key, line)?)
                }
            }
            "trng.rounds" => self.trng_rounds = parse(value, key, line)?,
            "trng.mode" => {
                self.trng_mode = match value {
                    "raw-read" => ExtractionMode::RawRead,
                    "flip-mask" => ExtractionMode::FlipMask,
                    "xor-consecutive" => ExtractionMode::XorConsecutive,
                    other => {
                        return Err(err(
                            line,
                            format!(
                                "bad value for {key}: `{other}` (raw-read|flip-mask|xor-consecutive)"
                            ),
                        ))
                    }
                }
            }
            "trng.write_value" => {
                self.trng_write_value = match value {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(err(line, format!("bad value for {key}: `{other}` (0|1)")))
                    }
                }
            }
            "trng.debias" => {
                self.trng_debias = Some(parse_debias(value).map_err(|e| err(line, e))?)
            }
            "trng.target_bits" => self.trng_target_bits = parse(value, key, line)?,
            "trng.trials_per_block" => self.trng_trials_per_block = parse(value, key, line)?,
            "trng.order" => {
                self.trng_order = match value {
                    "trial-major" => EmissionOrder::TrialMajor,
                    "cell-major" => EmissionOrder::CellMajor,
                    other => {
                        return Err(err(
                            line,
                            format!("bad value for {key}: `{other}` (trial-major|cell-major)"),
                        ))
                    }
                }
            }
            "dvft.profile" => self.dvft_profile = value.to_string(),
            "dvft.init_offset_v" => self.dvft_init_offset_v = parse(value, key, line)?,
            "dvft.gain" => self.dvft_gain = Some(parse(value, key, line)?),
            "dvft.trace_every" => self.dvft_trace_every = parse(value, key, line)?,
            "nist.alpha" => self.suite.alpha = parse(value, key, line)?,
            "nist.block_m" => self.suite.block_m = parse(value, key, line)?,
            "nist.serial_m" => self.suite.serial_m = parse(value, key, line)?,
            "nist.apen_m" => self.suite.apen_m = parse(value, key, line)?,
            "aging.epochs_hours" => {
                self.aging_epochs_hours = value
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<Result<Vec<f64>, _>>()
                    .map_err(|e| err(line, format!("bad value for {key}: {e}")))?
            }
            "aging.reads" => self.aging_reads = parse(value, key, line)?,
            "output.bitmap_row_width" => self.bitmap_row_width = parse(value, key, line)?,
            unknown => {
                return Err(err(line, format!("unknown config key `{unknown}`")));
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), String> {
        ArrayGeometry::new(self.geometry.rows, self.geometry.cols, self.geometry.word_width)
            .map_err(|e| e.to_string())?;
        self.params.validate().map_err(|e| e.to_string())?;
        self.env.validate().map_err(|e| e.to_string())?;
        if self.enroll_reads < 2 {
            return Err("enroll.reads must be >= 2".into());
        }
        if self.id_length == 0 {
            return Err("enroll.id_length must be >= 1".into());
        }
        if !(0.0..=0.5).contains(&self.auth_threshold) {
            return Err("auth.threshold must be in [0, 0.5]".into());
        }
        if self.trng_target_bits == 0 {
            return Err("trng.target_bits must be >= 1".into());
        }
        if self.trng_trials_per_block == 0 {
            return Err("trng.trials_per_block must be >= 1".into());
        }
        if self.aging_epochs_hours.is_empty() {
            return Err("aging.epochs_hours must not be empty".into());
        }
        if self
            .aging_epochs_hours
            .windows(2)
            .any(|w| w[1] < w[0])
        {
            return Err("aging.epochs_hours must be non-decreasing".into());
        }
        if self.aging_reads < 2 {
            return Err("aging.reads must be >= 2".into());
        }
        if self.bitmap_row_width == 0 {
            return Err("output.bitmap_row_width must be >= 1".into());
        }
        Ok(())
    }
}
