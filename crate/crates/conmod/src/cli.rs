//! Command-line front end: dataset generation, training, rendering, grid and
//! long-sequence evaluation, and embedding interpolation.
//!
//! Value precedence is flags > config file > built-in defaults, with the
//! CONMOD_SEED environment variable overriding the training seed from the
//! config layer (explicit --seed flags still win). Every command writes the
//! fully resolved configuration next to its outputs so a run can be
//! reproduced from the artifacts alone.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    evaluate_grid, interpolate_embedding_render, long_sequence_eval, probe_render, EvalReport,
};
use crate::model::ConmodConfig;
use crate::oracle::{build_dataset_multi, DatasetManifest, EffectKind, MANIFEST_FILE};
use crate::signal::{generate_test_signal, wav_read, wav_write};
use crate::spectral::StftConfig;
use crate::train::{Checkpoint, TrainConfig, Trainer, CHECKPOINT_FILE};

pub const RESOLVED_CONFIG_FILE: &str = "run_config.json";
pub const SEED_ENV_VAR: &str = "CONMOD_SEED";
pub const GRID_REPORT_CSV: &str = "report.csv";
pub const GRID_REPORT_JSON: &str = "report.json";
pub const LONG_REPORT_CSV: &str = "long_esr.csv";

/// One reference effect in a dataset: an identifier plus optional full
/// settings. Omitted settings fall back to the defaults for the id prefix
/// ("phaser..." or "flanger...").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<EffectKind>,
}

impl EffectSpec {
    pub fn resolve(&self) -> Result<EffectKind> {
        match &self.settings {
            Some(kind) => Ok(kind.clone()),
            None => EffectKind::from_effect_id(&self.id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub effects: Vec<EffectSpec>,
    pub lfo_freqs_hz: Vec<f64>,
    pub feedback_pcts: Vec<f64>,
    pub lfo_phase_rad: f64,
    pub duration_s: f64,
    pub sample_rate: u32,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            effects: vec![EffectSpec {
                id: "phaser".to_string(),
                settings: None,
            }],
            lfo_freqs_hz: vec![1.0],
            feedback_pcts: vec![0.0],
            lfo_phase_rad: 0.0,
            duration_s: 2.0,
            sample_rate: 44100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub lfo_freqs_hz: Vec<f64>,
    pub feedback_pcts: Vec<f64>,
    pub test_duration_s: f64,
    pub test_seed: u64,
    /// Input lengths for eval-long, seconds, strictly ascending.
    pub long_durations_s: Vec<f64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            lfo_freqs_hz: vec![1.0],
            feedback_pcts: vec![0.0],
            test_duration_s: 10.0,
            test_seed: 777,
            long_durations_s: vec![10.0, 30.0, 60.0],
        }
    }
}

/// The JSON run configuration. Unknown keys are rejected to guard typos;
/// omitted keys take the defaults below.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub oracle: OracleSection,
    pub stft: StftConfig,
    pub model: ConmodConfig,
    pub train: TrainConfig,
    pub eval: EvalSection,
}

impl RunConfig {
    /// Parse the file (or take defaults), then apply the seed environment
    /// override. Flag overrides are applied by each command afterwards.
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let mut cfg = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    Error::invalid(format!("cannot read config {}: {e}", p.display()))
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    Error::invalid(format!("config {}: {e}", p.display()))
                })?
            }
        };
        apply_seed_override(&mut cfg, std::env::var(SEED_ENV_VAR).ok().as_deref())?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn apply_seed_override(cfg: &mut RunConfig, value: Option<&str>) -> Result<()> {
    if let Some(v) = value {
        cfg.train.seed = v
            .parse()
            .map_err(|_| Error::invalid(format!("{SEED_ENV_VAR} must be an integer, got {v:?}")))?;
    }
    Ok(())
}

#[derive(Debug, Parser)]
#[command(
    name = "conmod",
    version,
    about = "Neural emulation of LFO-driven modulation effects (phaser, flanger)"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a dry/wet training dataset from the reference effects.
    GenData(GenDataArgs),
    /// Train a model on a generated dataset.
    Train(TrainArgs),
    /// Render a wet signal from a checkpoint at one control setting.
    Render(RenderArgs),
    /// Score a checkpoint on a control grid against the reference effects.
    Eval(EvalArgs),
    /// Score a checkpoint across increasing input durations.
    EvalLong(EvalLongArgs),
    /// Render with an embedding interpolated between two trained effects.
    Interp(InterpArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// JSON run config; omitted keys use built-in defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for the manifest and WAV pairs.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the dataset duration in seconds.
    #[arg(long)]
    pub duration_s: Option<f64>,
    /// Override the sample rate.
    #[arg(long)]
    pub sample_rate: Option<u32>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON run config; omitted keys use built-in defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory produced by gen-data.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for checkpoints and metrics.
    #[arg(long)]
    pub out: PathBuf,
    /// Resume from an existing checkpoint file.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Override the epoch count.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Override the training seed (beats CONMOD_SEED).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dry input WAV.
    #[arg(long = "in", value_name = "WAV")]
    pub input: PathBuf,
    /// Wet output WAV.
    #[arg(long)]
    pub out: PathBuf,
    /// LFO rate in Hz (probed via the nearest bank entry's phase).
    #[arg(long)]
    pub lfo_freq: f64,
    /// Feedback in percent, 0 to 100.
    #[arg(long)]
    pub feedback: f64,
    /// Blend the two trained effect embeddings instead of picking one.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Effect id to render (required for multi-effect checkpoints).
    #[arg(long)]
    pub effect: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// JSON run config supplying the eval grid and oracle settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training dataset directory (supplies the seen/unseen flags).
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for report.csv / report.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Restrict to one effect id (default: every effect in the checkpoint).
    #[arg(long)]
    pub effect: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalLongArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// JSON run config supplying the duration ladder and oracle settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for long_esr.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Effect id (required for multi-effect checkpoints).
    #[arg(long)]
    pub effect: Option<String>,
    /// LFO rate in Hz (default: first eval grid frequency).
    #[arg(long)]
    pub lfo_freq: Option<f64>,
    /// Feedback in percent (default: first eval grid value).
    #[arg(long)]
    pub feedback: Option<f64>,
}

#[derive(Debug, Args)]
pub struct InterpArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Embedding blend weight in [0, 1]: 0 = first effect, 1 = second.
    #[arg(long)]
    pub alpha: f64,
    /// Dry input WAV.
    #[arg(long = "in", value_name = "WAV")]
    pub input: PathBuf,
    /// Wet output WAV.
    #[arg(long)]
    pub out: PathBuf,
    /// LFO rate in Hz.
    #[arg(long)]
    pub lfo_freq: f64,
    /// Feedback in percent, 0 to 100.
    #[arg(long)]
    pub feedback: f64,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => cmd_gen_data(a),
        Command::Train(a) => cmd_train(a),
        Command::Render(a) => cmd_render(a),
        Command::Eval(a) => cmd_eval(a),
        Command::EvalLong(a) => cmd_eval_long(a),
        Command::Interp(a) => cmd_interp(a),
    }
}

/// Reference settings for `effect_id`: the config's entry when listed,
/// otherwise the defaults inferred from the id prefix.
fn template_for(cfg: &RunConfig, effect_id: &str) -> Result<EffectKind> {
    for spec in &cfg.oracle.effects {
        if spec.id == effect_id {
            return spec.resolve();
        }
    }
    EffectKind::from_effect_id(effect_id)
}

fn check_feedback_pct(feedback: f64) -> Result<()> {
    if !(0.0..=100.0).contains(&feedback) {
        return Err(Error::invalid(format!(
            "feedback {feedback} outside [0, 100] percent"
        )));
    }
    Ok(())
}

/// Effect a single-effect flag-driven command acts on.
fn pick_effect(ckpt: &Checkpoint, flag: &Option<String>) -> Result<String> {
    match flag {
        Some(id) => {
            if !ckpt.effect_ids.iter().any(|e| e == id) {
                return Err(Error::invalid(format!(
                    "checkpoint holds {:?}, not {id:?}",
                    ckpt.effect_ids
                )));
            }
            Ok(id.clone())
        }
        None if ckpt.effect_ids.len() == 1 => Ok(ckpt.effect_ids[0].clone()),
        None => Err(Error::invalid(format!(
            "checkpoint holds multiple effects {:?}; pass --effect",
            ckpt.effect_ids
        ))),
    }
}

/// Reproducibility record for the flag-only commands (render, interp),
/// written next to the output WAV.
fn save_flag_record(out_wav: &Path, record: serde_json::Value) -> Result<()> {
    let path = out_wav.with_extension("run_config.json");
    std::fs::write(path, serde_json::to_string_pretty(&record)?)?;
    Ok(())
}

fn cmd_gen_data(a: GenDataArgs) -> Result<()> {
    let mut cfg = RunConfig::load(a.config.as_deref())?;
    if let Some(d) = a.duration_s {
        cfg.oracle.duration_s = d;
    }
    if let Some(sr) = a.sample_rate {
        cfg.oracle.sample_rate = sr;
    }
    let mut effects = Vec::with_capacity(cfg.oracle.effects.len());
    for spec in &mut cfg.oracle.effects {
        let kind = spec.resolve()?;
        spec.settings = Some(kind.clone()); // echo fully resolved settings
        effects.push((spec.id.clone(), kind));
    }
    let manifest = build_dataset_multi(
        &effects,
        &cfg.oracle.lfo_freqs_hz,
        &cfg.oracle.feedback_pcts,
        cfg.oracle.lfo_phase_rad,
        cfg.oracle.duration_s,
        cfg.oracle.sample_rate,
        &a.out,
    )?;
    cfg.save(&a.out.join(RESOLVED_CONFIG_FILE))?;
    println!(
        "wrote {} dry/wet pairs to {}",
        manifest.entries.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::load(a.config.as_deref())?;
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    let manifest = DatasetManifest::load(a.data.join(MANIFEST_FILE))?;
    let resume = a.resume.as_deref().map(Checkpoint::load).transpose()?;
    let trainer = Trainer::new(&manifest, cfg.model.clone(), cfg.stft.clone(), cfg.train.clone())?;
    std::fs::create_dir_all(&a.out)?;
    cfg.save(&a.out.join(RESOLVED_CONFIG_FILE))?;
    let ckpt = trainer.run(Some(&a.out), resume)?;
    println!(
        "trained to epoch {}; checkpoint at {}",
        ckpt.epoch,
        a.out.join(CHECKPOINT_FILE).display()
    );
    Ok(())
}

fn cmd_render(a: RenderArgs) -> Result<()> {
    check_feedback_pct(a.feedback)?;
    if a.alpha.is_some() && a.effect.is_some() {
        return Err(Error::invalid("pass either --effect or --alpha, not both"));
    }
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let dry = wav_read(&a.input)?;
    let wet = match a.alpha {
        Some(alpha) => interpolate_embedding_render(&ckpt, alpha, a.lfo_freq, a.feedback, &dry)?,
        None => {
            let effect_id = pick_effect(&ckpt, &a.effect)?;
            probe_render(&ckpt, &effect_id, a.lfo_freq, a.feedback, &dry)?
        }
    };
    wav_write(&a.out, &wet)?;
    save_flag_record(
        &a.out,
        serde_json::json!({
            "command": "render",
            "checkpoint": a.checkpoint,
            "in": a.input,
            "lfo_freq_hz": a.lfo_freq,
            "feedback_pct": a.feedback,
            "alpha": a.alpha,
            "effect": a.effect,
        }),
    )?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let cfg = RunConfig::load(a.config.as_deref())?;
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let manifest = DatasetManifest::load(a.data.join(MANIFEST_FILE))?;
    let test = generate_test_signal(
        cfg.eval.test_duration_s,
        ckpt.stft_cfg.sample_rate,
        cfg.eval.test_seed,
    )?;
    let ids: Vec<String> = match &a.effect {
        Some(id) => vec![id.clone()],
        None => ckpt.effect_ids.clone(),
    };
    let mut report: Option<EvalReport> = None;
    for id in &ids {
        let template = template_for(&cfg, id)?;
        let part = evaluate_grid(
            &ckpt,
            id,
            &template,
            &cfg.eval.lfo_freqs_hz,
            &cfg.eval.feedback_pcts,
            &test,
            &manifest,
        )?;
        match &mut report {
            None => report = Some(part),
            Some(acc) => acc.rows.extend(part.rows),
        }
    }
    let report = report.ok_or_else(|| Error::invalid("checkpoint lists no effects"))?;
    std::fs::create_dir_all(&a.out)?;
    report.save_csv(&a.out.join(GRID_REPORT_CSV))?;
    report.save_json(&a.out.join(GRID_REPORT_JSON))?;
    cfg.save(&a.out.join(RESOLVED_CONFIG_FILE))?;
    let valid = report.rows.iter().filter(|r| r.valid).count();
    println!(
        "scored {} grid points ({} valid) into {}",
        report.rows.len(),
        valid,
        a.out.display()
    );
    Ok(())
}

fn cmd_eval_long(a: EvalLongArgs) -> Result<()> {
    let cfg = RunConfig::load(a.config.as_deref())?;
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let effect_id = pick_effect(&ckpt, &a.effect)?;
    let template = template_for(&cfg, &effect_id)?;
    let freq = match a.lfo_freq {
        Some(f) => f,
        None => *cfg
            .eval
            .lfo_freqs_hz
            .first()
            .ok_or_else(|| Error::invalid("eval section lists no LFO frequencies"))?,
    };
    let feedback = match a.feedback {
        Some(f) => f,
        None => *cfg
            .eval
            .feedback_pcts
            .first()
            .ok_or_else(|| Error::invalid("eval section lists no feedback values"))?,
    };
    check_feedback_pct(feedback)?;
    let rows = long_sequence_eval(
        &ckpt,
        &effect_id,
        &template,
        freq,
        feedback,
        &cfg.eval.long_durations_s,
        cfg.eval.test_seed,
    )?;
    std::fs::create_dir_all(&a.out)?;
    let mut csv = String::from("duration_s,esr_pct\n");
    for (dur, esr_pct) in &rows {
        csv.push_str(&format!("{dur},{esr_pct}\n"));
        println!("{dur} s: ESR {esr_pct:.4}%");
    }
    std::fs::write(a.out.join(LONG_REPORT_CSV), csv)?;
    cfg.save(&a.out.join(RESOLVED_CONFIG_FILE))?;
    Ok(())
}

fn cmd_interp(a: InterpArgs) -> Result<()> {
    check_feedback_pct(a.feedback)?;
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let dry = wav_read(&a.input)?;
    let wet = interpolate_embedding_render(&ckpt, a.alpha, a.lfo_freq, a.feedback, &dry)?;
    wav_write(&a.out, &wet)?;
    save_flag_record(
        &a.out,
        serde_json::json!({
            "command": "interp",
            "checkpoint": a.checkpoint,
            "in": a.input,
            "alpha": a.alpha,
            "lfo_freq_hz": a.lfo_freq,
            "feedback_pct": a.feedback,
        }),
    )?;
    println!("wrote {}", a.out.display());
    Ok(())
}
