//! Reference effect implementations and dataset assembly.
//!
//! These sample-accurate renderers are the ground truth the neural emulator
//! is trained against. Both effects share the same control surface: a sine
//! LFO (frequency, phase), a feedback amount and a wet/dry mix.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{generate_chirp_train, wav_write, AudioBuffer};

/// Dry excitation used for every dataset entry: a sparse chirp train.
pub const CHIRP_PERIOD_S: f64 = 0.04;
pub const CHIRP_ALLPASS_STAGES: usize = 64;
pub const CHIRP_ALLPASS_COEFF: f64 = 0.9;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Longest flanger delay line supported, nominal delay times (1 + depth).
const FLANGER_MAX_DELAY_S: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaserOracleConfig {
    /// Number of cascaded first-order all-pass sections; must be even.
    pub stages: usize,
    /// Sweep center as a break frequency in Hz.
    pub center_hz: f64,
    /// Sweep extent: break frequency spans center·2^±sweep_octaves.
    pub sweep_octaves: f64,
    pub lfo_freq_hz: f64,
    pub lfo_phase: f64,
    /// Fraction of the cascade output fed back to its input, in [0, 0.95].
    pub feedback: f64,
    /// Wet fraction in [0, 1].
    pub mix: f64,
}

impl Default for PhaserOracleConfig {
    fn default() -> Self {
        PhaserOracleConfig {
            stages: 6,
            center_hz: 1300.0,
            sweep_octaves: 1.5,
            lfo_freq_hz: 0.0,
            lfo_phase: 0.0,
            feedback: 0.0,
            mix: 0.7,
        }
    }
}

impl PhaserOracleConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample_rate must be positive"));
        }
        if self.stages == 0 || self.stages % 2 != 0 {
            return Err(Error::invalid(format!(
                "phaser stages must be a positive even count, got {}",
                self.stages
            )));
        }
        for (name, v) in [
            ("center_hz", self.center_hz),
            ("sweep_octaves", self.sweep_octaves),
            ("lfo_freq_hz", self.lfo_freq_hz),
            ("lfo_phase", self.lfo_phase),
            ("feedback", self.feedback),
            ("mix", self.mix),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("phaser {name} must be finite")));
            }
        }
        if self.center_hz <= 0.0 {
            return Err(Error::invalid("phaser center_hz must be positive"));
        }
        if self.sweep_octaves < 0.0 {
            return Err(Error::invalid("phaser sweep_octaves must be >= 0"));
        }
        let nyquist = sample_rate as f64 / 2.0;
        let top = self.center_hz * self.sweep_octaves.exp2();
        if top >= nyquist {
            return Err(Error::invalid(format!(
                "phaser sweep reaches {top:.1} Hz, at or above Nyquist {nyquist:.1} Hz"
            )));
        }
        if self.lfo_freq_hz < 0.0 {
            return Err(Error::invalid("phaser lfo_freq_hz must be >= 0"));
        }
        if !(0.0..=0.95).contains(&self.feedback) {
            return Err(Error::invalid(format!(
                "phaser feedback must be in [0, 0.95], got {}",
                self.feedback
            )));
        }
        if !(0.0..=1.0).contains(&self.mix) {
            return Err(Error::invalid("phaser mix must be in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlangerOracleConfig {
    /// Nominal delay in milliseconds; the LFO sweeps around this value.
    pub base_delay_ms: f64,
    /// LFO depth as a fraction of the nominal delay, in [0, 1].
    pub lfo_amount: f64,
    pub lfo_freq_hz: f64,
    pub lfo_phase: f64,
    /// Feedback around the delay line input, in [0, 0.95].
    pub feedback: f64,
    /// Wet fraction in [0, 1].
    pub mix: f64,
}

impl Default for FlangerOracleConfig {
    fn default() -> Self {
        FlangerOracleConfig {
            base_delay_ms: 1.5,
            lfo_amount: 0.8,
            lfo_freq_hz: 0.0,
            lfo_phase: 0.0,
            feedback: 0.0,
            mix: 0.7,
        }
    }
}

impl FlangerOracleConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample_rate must be positive"));
        }
        for (name, v) in [
            ("base_delay_ms", self.base_delay_ms),
            ("lfo_amount", self.lfo_amount),
            ("lfo_freq_hz", self.lfo_freq_hz),
            ("lfo_phase", self.lfo_phase),
            ("feedback", self.feedback),
            ("mix", self.mix),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("flanger {name} must be finite")));
            }
        }
        if self.base_delay_ms <= 0.0 {
            return Err(Error::invalid("flanger base_delay_ms must be positive"));
        }
        if !(0.0..=1.0).contains(&self.lfo_amount) {
            return Err(Error::invalid("flanger lfo_amount must be in [0, 1]"));
        }
        let max_delay_s = self.base_delay_ms / 1000.0 * (1.0 + self.lfo_amount);
        if max_delay_s > FLANGER_MAX_DELAY_S {
            return Err(Error::invalid(format!(
                "flanger modulated delay peaks at {:.1} ms, beyond the {:.0} ms line capacity",
                max_delay_s * 1000.0,
                FLANGER_MAX_DELAY_S * 1000.0
            )));
        }
        if self.lfo_freq_hz < 0.0 {
            return Err(Error::invalid("flanger lfo_freq_hz must be >= 0"));
        }
        if !(0.0..=0.95).contains(&self.feedback) {
            return Err(Error::invalid(format!(
                "flanger feedback must be in [0, 0.95], got {}",
                self.feedback
            )));
        }
        if !(0.0..=1.0).contains(&self.mix) {
            return Err(Error::invalid("flanger mix must be in [0, 1]"));
        }
        Ok(())
    }
}

/// A renderable effect with its full settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffectKind {
    Phaser(PhaserOracleConfig),
    Flanger(FlangerOracleConfig),
}

impl EffectKind {
    /// Default settings for a well-known effect name. Names may carry a
    /// suffix ("phaser_a") so one dataset can hold several instances.
    pub fn from_effect_id(effect_id: &str) -> Result<Self> {
        if effect_id.starts_with("phaser") {
            Ok(EffectKind::Phaser(PhaserOracleConfig::default()))
        } else if effect_id.starts_with("flanger") {
            Ok(EffectKind::Flanger(FlangerOracleConfig::default()))
        } else {
            Err(Error::invalid(format!(
                "unknown effect id {effect_id:?}; expected a name starting with phaser or flanger"
            )))
        }
    }

    /// Copy of this effect with LFO and feedback overridden by a grid point.
    pub fn with_condition(&self, lfo_freq_hz: f64, lfo_phase: f64, feedback_pct: f64) -> Self {
        let mut e = self.clone();
        match &mut e {
            EffectKind::Phaser(c) => {
                c.lfo_freq_hz = lfo_freq_hz;
                c.lfo_phase = lfo_phase;
                c.feedback = feedback_pct / 100.0;
            }
            EffectKind::Flanger(c) => {
                c.lfo_freq_hz = lfo_freq_hz;
                c.lfo_phase = lfo_phase;
                c.feedback = feedback_pct / 100.0;
            }
        }
        e
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        match self {
            EffectKind::Phaser(c) => c.validate(sample_rate),
            EffectKind::Flanger(c) => c.validate(sample_rate),
        }
    }

    pub fn render(&self, x: &AudioBuffer) -> Result<AudioBuffer> {
        match self {
            EffectKind::Phaser(c) => render_phaser(x, c),
            EffectKind::Flanger(c) => render_flanger(x, c),
        }
    }
}

/// Per-sample time-varying phaser.
///
/// The LFO sweeps the shared break frequency of a cascade of first-order
/// all-pass sections exponentially around `center_hz`; the cascade output is
/// fed back to its own input one sample late.
pub fn render_phaser(x: &AudioBuffer, cfg: &PhaserOracleConfig) -> Result<AudioBuffer> {
    cfg.validate(x.sample_rate())?;
    let sr = x.sample_rate() as f64;
    let w_lfo = 2.0 * PI * cfg.lfo_freq_hz / sr;
    let mut ap_x1 = vec![0.0; cfg.stages];
    let mut ap_y1 = vec![0.0; cfg.stages];
    let mut d_prev = 0.0;
    let mut out = Vec::with_capacity(x.len());
    for (n, &xn) in x.samples().iter().enumerate() {
        let lfo = (w_lfo * n as f64 + cfg.lfo_phase).sin();
        let f_b = cfg.center_hz * (cfg.sweep_octaves * lfo).exp2();
        let t = (PI * f_b / sr).tan();
        let a = (t - 1.0) / (t + 1.0);
        let mut v = xn + cfg.feedback * d_prev;
        for s in 0..cfg.stages {
            let y = a * v + ap_x1[s] - a * ap_y1[s];
            ap_x1[s] = v;
            ap_y1[s] = y;
            v = y;
        }
        d_prev = v;
        out.push(cfg.mix * v + (1.0 - cfg.mix) * xn);
    }
    AudioBuffer::new(out, x.sample_rate())
}

/// Per-sample time-varying flanger.
///
/// Feedforward comb: the delay-line input is `w[n] = x[n] + feedback ·
/// w[n - D_nom]` with the feedback tap fixed at the nominal delay, while the
/// LFO modulates the fractional read position of the wet tap.
pub fn render_flanger(x: &AudioBuffer, cfg: &FlangerOracleConfig) -> Result<AudioBuffer> {
    cfg.validate(x.sample_rate())?;
    let sr = x.sample_rate() as f64;
    let w_lfo = 2.0 * PI * cfg.lfo_freq_hz / sr;
    let base_samps = cfg.base_delay_ms / 1000.0 * sr;
    let d_nom = (base_samps.round() as usize).max(1);
    let n = x.len();
    let mut w = vec![0.0; n];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let fb = if i >= d_nom { cfg.feedback * w[i - d_nom] } else { 0.0 };
        w[i] = x.samples()[i] + fb;
        let lfo = (w_lfo * i as f64 + cfg.lfo_phase).sin();
        let d = (base_samps * (1.0 + cfg.lfo_amount * lfo)).max(1.0);
        let pos = i as f64 - d;
        let wet = if pos < 0.0 {
            0.0
        } else {
            let k = pos.floor() as usize;
            let frac = pos - k as f64;
            let a = w[k];
            let b = if k + 1 <= i { w[k + 1] } else { 0.0 };
            a + frac * (b - a)
        };
        out.push(cfg.mix * wet + (1.0 - cfg.mix) * x.samples()[i]);
    }
    AudioBuffer::new(out, x.sample_rate())
}

// --- Dataset assembly -----------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionLabel {
    pub effect_id: String,
    pub lfo_freq_hz: f64,
    pub lfo_phase: f64,
    /// Feedback control as a percentage in [0, 95], as printed on the grid.
    pub feedback_pct: f64,
}

impl ConditionLabel {
    pub fn validate(&self) -> Result<()> {
        if self.effect_id.is_empty() {
            return Err(Error::invalid("effect_id must be non-empty"));
        }
        if !(self.lfo_freq_hz.is_finite() && self.lfo_freq_hz >= 0.0) {
            return Err(Error::invalid("lfo_freq_hz must be finite and >= 0"));
        }
        if !self.lfo_phase.is_finite() {
            return Err(Error::invalid("lfo_phase must be finite"));
        }
        if !(self.feedback_pct.is_finite() && (0.0..=95.0).contains(&self.feedback_pct)) {
            return Err(Error::invalid(format!(
                "feedback_pct must be in [0, 95], got {}",
                self.feedback_pct
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub effect_id: String,
    pub lfo_freq_hz: f64,
    pub lfo_phase: f64,
    pub feedback_pct: f64,
    pub dry_path: String,
    pub wet_path: String,
    pub duration_s: f64,
}

impl ManifestEntry {
    pub fn label(&self) -> ConditionLabel {
        ConditionLabel {
            effect_id: self.effect_id.clone(),
            lfo_freq_hz: self.lfo_freq_hz,
            lfo_phase: self.lfo_phase,
            feedback_pct: self.feedback_pct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub sample_rate: u32,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Structural checks that do not touch the filesystem.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "manifest schema_version {} unsupported (expected {MANIFEST_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::invalid("manifest sample_rate must be positive"));
        }
        let mut seen: Vec<(&str, u64, u64)> = Vec::new();
        for e in &self.entries {
            e.label().validate()?;
            if !(e.duration_s.is_finite() && e.duration_s > 0.0) {
                return Err(Error::invalid("entry duration_s must be positive"));
            }
            let key = (
                e.effect_id.as_str(),
                e.lfo_freq_hz.to_bits(),
                e.feedback_pct.to_bits(),
            );
            if seen.contains(&key) {
                return Err(Error::invalid(format!(
                    "duplicate grid point: effect {:?} lfo {} Hz feedback {}%",
                    e.effect_id, e.lfo_freq_hz, e.feedback_pct
                )));
            }
            seen.push(key);
        }
        Ok(())
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        self.validate()?;
        let path = dir.as_ref().join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, json)?;
        Ok(path)
    }

    /// Loads a manifest and rewrites relative audio paths against the
    /// manifest's own directory, checking that every referenced file exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut m: DatasetManifest = serde_json::from_str(&text)?;
        m.validate()?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for e in &mut m.entries {
            for p in [&mut e.dry_path, &mut e.wet_path] {
                let joined = if Path::new(p.as_str()).is_absolute() {
                    PathBuf::from(p.as_str())
                } else {
                    base.join(p.as_str())
                };
                if !joined.is_file() {
                    return Err(Error::invalid(format!(
                        "manifest references missing file {}",
                        joined.display()
                    )));
                }
                *p = joined.to_string_lossy().into_owned();
            }
        }
        Ok(m)
    }
}

/// Renders a training dataset for several effect instances over a shared
/// control grid and writes WAV pairs plus `manifest.json` into `out_dir`.
/// Every condition uses the same dry chirp train and the same LFO phase.
pub fn build_dataset_multi(
    effects: &[(String, EffectKind)],
    lfo_freqs: &[f64],
    feedback_pcts: &[f64],
    shared_phase: f64,
    duration_s: f64,
    sample_rate: u32,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    if effects.is_empty() || lfo_freqs.is_empty() || feedback_pcts.is_empty() {
        return Err(Error::invalid("effect and grid lists must be non-empty"));
    }
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;

    let dry = generate_chirp_train(
        duration_s,
        CHIRP_PERIOD_S,
        CHIRP_ALLPASS_STAGES,
        CHIRP_ALLPASS_COEFF,
        sample_rate,
    )?;
    let dry_name = "dry.wav".to_string();
    wav_write(out_dir.join(&dry_name), &dry)?;

    let mut entries = Vec::new();
    for (effect_id, template) in effects {
        for &freq in lfo_freqs {
            for &fb_pct in feedback_pcts {
                let label = ConditionLabel {
                    effect_id: effect_id.clone(),
                    lfo_freq_hz: freq,
                    lfo_phase: shared_phase,
                    feedback_pct: fb_pct,
                };
                label.validate()?;
                let effect = template.with_condition(freq, shared_phase, fb_pct);
                let wet = effect.render(&dry)?;
                let wet_name = format!("wet_{effect_id}_lfo{freq}_fb{fb_pct}.wav");
                wav_write(out_dir.join(&wet_name), &wet)?;
                entries.push(ManifestEntry {
                    effect_id: effect_id.clone(),
                    lfo_freq_hz: freq,
                    lfo_phase: shared_phase,
                    feedback_pct: fb_pct,
                    dry_path: dry_name.clone(),
                    wet_path: wet_name,
                    duration_s: dry.duration_s(),
                });
            }
        }
    }
    let manifest = DatasetManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        sample_rate,
        entries,
    };
    manifest.save(out_dir)?;
    // Reload so the returned entries carry resolved absolute paths.
    DatasetManifest::load(out_dir.join(MANIFEST_FILE))
}

/// Single-effect dataset over a control grid, with the effect's non-grid
/// settings taken from the defaults for `effect_id`.
pub fn build_dataset(
    effect_id: &str,
    lfo_freqs: &[f64],
    feedback_pcts: &[f64],
    shared_phase: f64,
    duration_s: f64,
    sample_rate: u32,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    let effect = EffectKind::from_effect_id(effect_id)?;
    build_dataset_multi(
        &[(effect_id.to_string(), effect)],
        lfo_freqs,
        feedback_pcts,
        shared_phase,
        duration_s,
        sample_rate,
        out_dir,
    )
}
