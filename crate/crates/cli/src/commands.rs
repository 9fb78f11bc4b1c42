//! Subcommand implementations. Every command is a pure function of its
//! config and seeds; outputs are byte-reproducible under --deterministic.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use silicon_entropy_core::bits::parse_bitstream;
use silicon_entropy_core::dram::{calibrate_sigma_noise0, DramDevice, EnvCondition};
use silicon_entropy_core::puf;
use silicon_entropy_core::randtest::{run_suite, SuiteConfig, SuiteReport};
use silicon_entropy_core::rng::derive_seed;
use silicon_entropy_core::supply::{builtin_profile, run_dvft_with, trace_csv, DvftParams};
use silicon_entropy_core::trng::{
    find_knee_delay, run_log_csv, run_pipeline, DebiasSpec, DebiasStage, PipelineSource,
    RemanenceConfig,
};

use crate::config::TrngSource;
use crate::{CliError, Ctx};

fn write_file(path: &Path, data: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, data).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable report");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn out_path(ctx: &Ctx, name: &str) -> PathBuf {
    ctx.out_dir.join(name)
}

fn timestamp_field(ctx: &Ctx) -> serde_json::Value {
    if ctx.deterministic {
        serde_json::Value::Null
    } else {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        json!(secs)
    }
}

fn build_device(ctx: &Ctx) -> Result<DramDevice, CliError> {
    Ok(DramDevice::new(ctx.cfg.seed, ctx.cfg.geometry, ctx.cfg.params)?)
}

pub fn simulate(ctx: &Ctx, bitmap: bool, row_width: Option<usize>) -> Result<u8, CliError> {
    let mut device = build_device(ctx)?;
    let descriptor = device.descriptor();
    write_json(&out_path(ctx, "device.json"), &descriptor)?;

    if bitmap {
        let env = ctx.cfg.env;
        let bits = device.power_up_read(&env, derive_seed(ctx.cfg.seed, "cli-simulate", 0))?;
        let width = row_width.unwrap_or(ctx.cfg.bitmap_row_width);
        let pgm = bits.to_pgm(width)?;
        write_file(&out_path(ctx, "startup.pgm"), &pgm)?;
    }
    println!(
        "{}",
        json!({
            "command": "simulate",
            "device": out_path(ctx, "device.json"),
            "bitmap": bitmap.then(|| out_path(ctx, "startup.pgm")),
            "capacity_bits": descriptor.geometry.capacity(),
            "generated_at_unix": timestamp_field(ctx),
        })
    );
    Ok(0)
}

pub fn enroll(ctx: &Ctx) -> Result<u8, CliError> {
    let mut device = build_device(ctx)?;
    let env = ctx.cfg.env;
    let mask = puf::enroll_device(
        &mut device,
        &env,
        ctx.cfg.enroll_reads,
        derive_seed(ctx.cfg.seed, "cli-enroll", 0),
    )?;
    let fingerprint = puf::generate_id(
        &mut device,
        &mask,
        &env,
        ctx.cfg.id_length,
        derive_seed(ctx.cfg.seed, "cli-enroll-id", 0),
    )?;
    write_json(&out_path(ctx, "mask.json"), &mask)?;
    write_json(&out_path(ctx, "fingerprint.json"), &fingerprint)?;
    println!(
        "{}",
        json!({
            "command": "enroll",
            "reads": ctx.cfg.enroll_reads,
            "stable_cells": mask.len(),
            "stable_fraction": mask.len() as f64 / device.capacity() as f64,
            "id_length": ctx.cfg.id_length,
            "mask": out_path(ctx, "mask.json"),
            "fingerprint": out_path(ctx, "fingerprint.json"),
            "generated_at_unix": timestamp_field(ctx),
        })
    );
    Ok(0)
}

pub fn auth(
    ctx: &Ctx,
    candidate_path: &Path,
    stored_path: &Path,
    threshold: Option<f64>,
) -> Result<u8, CliError> {
    let load = |path: &Path| -> Result<puf::Fingerprint, CliError> {
        let data = read_file(path)?;
        let parsed: puf::Fingerprint = serde_json::from_slice(&data)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Ok(parsed.normalize()?)
    };
    let candidate = load(candidate_path)?;
    let stored = load(stored_path)?;
    let threshold = threshold.unwrap_or(ctx.cfg.auth_threshold);
    // the library insists on thresholds at or below half distance; the CLI
    // additionally honors permissive operator overrides up to 1.0
    let decision = if threshold <= 0.5 {
        puf::authenticate(&candidate, &stored, threshold)?
    } else {
        if threshold > 1.0 {
            return Err(CliError::Usage(format!(
                "threshold must be in [0, 1], got {threshold}"
            )));
        }
        let fractional_hd = candidate.bits.fractional_hd(&stored.bits)?;
        puf::AuthDecision {
            fractional_hd,
            threshold,
            accepted: fractional_hd <= threshold,
        }
    };
    let report = json!({
        "command": "auth",
        "candidate": candidate_path,
        "stored": stored_path,
        "fractional_hd": decision.fractional_hd,
        "threshold": decision.threshold,
        "accepted": decision.accepted,
        "generated_at_unix": timestamp_field(ctx),
    });
    write_json(&out_path(ctx, "auth.json"), &report)?;
    println!("{report}");
    Ok(if decision.accepted { 0 } else { 1 })
}

pub fn trng(
    ctx: &Ctx,
    source_flag: Option<&str>,
    target_bits_flag: Option<usize>,
) -> Result<u8, CliError> {
    let source = match source_flag {
        Some(s) => s
            .parse::<TrngSource>()
            .map_err(CliError::Usage)?,
        None => ctx.cfg.trng_source,
    };
    let target_bits = target_bits_flag.unwrap_or(ctx.cfg.trng_target_bits);
    let env = ctx.cfg.env;

    let (bits, log_text) = match source {
        TrngSource::Remanence => {
            let mut device = build_device(ctx)?;
            let delay_ms = match ctx.cfg.trng_delay_ms {
                Some(d) => d,
                None => find_knee_delay(
                    &mut device,
                    &env,
                    derive_seed(ctx.cfg.seed, "cli-knee", 0),
                )?,
            };
            let cfg = RemanenceConfig {
                delay_ms,
                env,
                rounds: ctx.cfg.trng_rounds,
                extraction_mode: ctx.cfg.trng_mode,
                write_value: ctx.cfg.trng_write_value,
            };
            let debias = ctx.cfg.trng_debias.clone().unwrap_or_else(|| DebiasSpec {
                stages: vec![DebiasStage::VonNeumann],
            });
            let run = run_pipeline(
                &mut device,
                &PipelineSource::Remanence(cfg),
                &debias,
                target_bits,
                derive_seed(ctx.cfg.seed, "cli-trng", 0),
            )?;
            println!(
                "{}",
                json!({
                    "command": "trng",
                    "source": "remanence",
                    "delay_ms": delay_ms,
                    "bits": run.bits.len(),
                    "yield_ratio": run.yield_ratio,
                    "generated_at_unix": timestamp_field(ctx),
                })
            );
            (run.bits, run_log_csv(&run.log))
        }
        TrngSource::Startup => {
            let mut device = build_device(ctx)?;
            let source = PipelineSource::Startup {
                env,
                trials_per_block: ctx.cfg.trng_trials_per_block,
                order: ctx.cfg.trng_order,
            };
            let debias = ctx.cfg.trng_debias.clone().unwrap_or_else(|| DebiasSpec {
                stages: vec![DebiasStage::XorFold(2), DebiasStage::VonNeumann],
            });
            let run = run_pipeline(
                &mut device,
                &source,
                &debias,
                target_bits,
                derive_seed(ctx.cfg.seed, "cli-trng", 0),
            )?;
            println!(
                "{}",
                json!({
                    "command": "trng",
                    "source": "startup",
                    "bits": run.bits.len(),
                    "yield_ratio": run.yield_ratio,
                    "generated_at_unix": timestamp_field(ctx),
                })
            );
            (run.bits, run_log_csv(&run.log))
        }
        TrngSource::Dvft => {
            let profile = builtin_profile(&ctx.cfg.dvft_profile)?;
            let mut params = DvftParams::default();
            if let Some(gain) = ctx.cfg.dvft_gain {
                params.gain = gain;
            }
            let run = run_dvft_with(
                &profile,
                &params,
                profile.mean_v + ctx.cfg.dvft_init_offset_v,
                target_bits,
                derive_seed(ctx.cfg.seed, "cli-dvft", 0),
                ctx.cfg.dvft_trace_every,
            )?;
            println!(
                "{}",
                json!({
                    "command": "trng",
                    "source": "dvft",
                    "profile": profile.name,
                    "bits": run.bits.len(),
                    "final_v_ref": run.final_state.v_ref,
                    "locked": run.final_state.locked,
                    "generated_at_unix": timestamp_field(ctx),
                })
            );
            (run.bits, trace_csv(&run.trace))
        }
    };

    write_file(&out_path(ctx, "bitstream.bin"), &bits.to_packed_bytes())?;
    let log_name = match source {
        TrngSource::Dvft => "trace.csv",
        _ => "runlog.csv",
    };
    write_file(&out_path(ctx, log_name), log_text.as_bytes())?;
    Ok(0)
}

pub fn nist(
    ctx: &Ctx,
    inputs: &[PathBuf],
    alpha: Option<f64>,
    block_m: Option<usize>,
    serial_m: Option<usize>,
    apen_m: Option<usize>,
) -> Result<u8, CliError> {
    let mut suite = ctx.cfg.suite;
    if let Some(a) = alpha {
        suite.alpha = a;
    }
    if let Some(m) = block_m {
        suite.block_m = m;
    }
    if let Some(m) = serial_m {
        suite.serial_m = m;
    }
    if let Some(m) = apen_m {
        suite.apen_m = m;
    }
    if !(0.0 < suite.alpha && suite.alpha < 1.0) {
        return Err(CliError::Usage(format!(
            "alpha must be in (0, 1), got {}",
            suite.alpha
        )));
    }

    // independent inputs may be tested in parallel
    let reports: Vec<Result<(usize, SuiteReport), CliError>> = if ctx.jobs > 1 && inputs.len() > 1
    {
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for chunk in inputs.chunks(inputs.len().div_ceil(ctx.jobs)) {
                let offset = chunk.as_ptr() as usize - inputs.as_ptr() as usize;
                let base = offset / std::mem::size_of::<PathBuf>();
                handles.push(scope.spawn(move || {
                    chunk
                        .iter()
                        .enumerate()
                        .map(|(i, path)| run_one_suite(path, &suite).map(|r| (base + i, r)))
                        .collect::<Vec<_>>()
                }));
            }
            let mut all: Vec<_> = handles.into_iter().flat_map(|h| h.join().unwrap()).collect();
            all.sort_by_key(|r| r.as_ref().map(|(i, _)| *i).unwrap_or(usize::MAX));
            all
        })
    } else {
        inputs
            .iter()
            .enumerate()
            .map(|(i, path)| run_one_suite(path, &suite).map(|r| (i, r)))
            .collect()
    };

    let mut all_pass = true;
    for outcome in reports {
        let (index, report) = outcome?;
        let input = &inputs[index];
        let stem = input
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| format!("input{index}"));
        write_json(&out_path(ctx, &format!("{stem}.report.json")), &report)?;
        write_file(
            &out_path(ctx, &format!("{stem}.report.txt")),
            report.text_table().as_bytes(),
        )?;
        print!("{}", report.text_table());
        all_pass &= report.all_pass;
    }
    Ok(if all_pass { 0 } else { 1 })
}

fn run_one_suite(path: &Path, suite: &SuiteConfig) -> Result<SuiteReport, CliError> {
    let data = read_file(path)?;
    let bits = parse_bitstream(&data)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(run_suite(&bits, suite))
}

pub fn aging(ctx: &Ctx) -> Result<u8, CliError> {
    let mut device = build_device(ctx)?;
    let schedule: Vec<(EnvCondition, usize)> = ctx
        .cfg
        .aging_epochs_hours
        .iter()
        .map(|&hours| {
            (
                EnvCondition {
                    age_hours: hours,
                    ..ctx.cfg.env
                },
                ctx.cfg.aging_reads,
            )
        })
        .collect();
    let report = puf::stability_report(
        &mut device,
        &schedule,
        derive_seed(ctx.cfg.seed, "cli-aging", 0),
    )?;

    let mut csv = String::from("epoch,stable_fraction\n");
    for entry in &report {
        csv.push_str(&format!(
            "{},{:.6}\n",
            entry.condition.age_hours, entry.stable_fraction
        ));
    }
    write_file(&out_path(ctx, "aging.csv"), csv.as_bytes())?;
    println!(
        "{}",
        json!({
            "command": "aging",
            "epochs": report.len(),
            "reads_per_epoch": ctx.cfg.aging_reads,
            "stable_fractions": report.iter().map(|e| e.stable_fraction).collect::<Vec<f64>>(),
            "csv": out_path(ctx, "aging.csv"),
            "generated_at_unix": timestamp_field(ctx),
        })
    );
    Ok(0)
}

pub fn calibrate(ctx: &Ctx, target: f64, reads: usize, simulate: bool) -> Result<u8, CliError> {
    let sigma_cap = ctx.cfg.params.sigma_cap;
    let sigma_noise0 = calibrate_sigma_noise0(sigma_cap, reads, target)?;
    let predicted =
        silicon_entropy_core::dram::expected_stable_fraction(sigma_noise0 / sigma_cap, reads);

    let measured = if simulate {
        let mut params = ctx.cfg.params;
        params.sigma_noise0 = sigma_noise0;
        let mut device = DramDevice::new(ctx.cfg.seed, ctx.cfg.geometry, params)?;
        let readings = puf::collect_startup_reads(
            &mut device,
            &ctx.cfg.env,
            reads,
            derive_seed(ctx.cfg.seed, "cli-calibrate", 0),
        )?;
        let mask = puf::enroll(&readings, readings.len())?;
        Some(mask.len() as f64 / device.capacity() as f64)
    } else {
        None
    };

    let report = json!({
        "command": "calibrate",
        "sigma_cap": sigma_cap,
        "reads": reads,
        "target_stable_fraction": target,
        "sigma_noise0": sigma_noise0,
        "predicted_stable_fraction": predicted,
        "measured_stable_fraction": measured,
        "generated_at_unix": timestamp_field(ctx),
    });
    write_json(&out_path(ctx, "calibration.json"), &report)?;
    println!("{report}");
    Ok(0)
}
