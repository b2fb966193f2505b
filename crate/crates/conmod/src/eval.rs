//! Evaluation protocols against the reference effects: control-grid ESR
//! tables with seen/unseen flags, long-sequence stability, embedding
//! interpolation, and spectrogram export for visual comparison.
//!
//! Unseen LFO frequencies are probed by overriding the trained z_a with
//! the probe frequency while keeping the nearest bank entry's phase; the
//! oracle ground truth is rendered with that same phase, so ESR measures
//! spectral fidelity rather than phase misalignment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::esr;
use crate::model::{ConditionVector, Renderer};
use crate::oracle::{DatasetManifest, EffectKind};
use crate::signal::AudioBuffer;
use crate::spectral::magnitude_spectrogram;
use crate::train::Checkpoint;

pub const EVAL_CSV_HEADER: &str = "effect_id,lfo_freq_hz,feedback_pct,seen,esr_pct";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub effect_id: String,
    pub lfo_freq_hz: f64,
    pub feedback_pct: f64,
    /// Whether this exact (frequency, feedback) pair was trained on.
    pub seen: bool,
    /// 100 x ESR; NaN when the row is invalid.
    pub esr_pct: f64,
    /// False when the oracle rejects the grid point (kept, not dropped).
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetadata {
    pub checkpoint_epoch: usize,
    /// Stable hash of the test signal's samples.
    pub test_signal_id: String,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub metadata: EvalMetadata,
}

impl EvalReport {
    /// CSV with the fixed header; invalid rows carry esr_pct = NaN.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(EVAL_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.effect_id, r.lfo_freq_hz, r.feedback_pct, r.seen, r.esr_pct
            ));
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn mean_seen_esr(&self) -> Option<f64> {
        mean(self.rows.iter().filter(|r| r.seen && r.valid).map(|r| r.esr_pct))
    }

    pub fn mean_unseen_esr(&self) -> Option<f64> {
        mean(
            self.rows
                .iter()
                .filter(|r| !r.seen && r.valid)
                .map(|r| r.esr_pct),
        )
    }
}

fn mean(it: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = it.collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// FNV-1a over the sample bit patterns: a stable test-signal identifier.
fn signal_id(x: &AudioBuffer) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &s in x.samples() {
        for b in s.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// Bank entry with z_a closest to `freq`: (0-based index, phase).
pub fn nearest_bank_phase(ckpt: &Checkpoint, freq: f64) -> Result<(usize, f64)> {
    let bank = ckpt.bank()?;
    let mut best = 0;
    for i in 1..bank.n() {
        if (bank.freqs_hz[i] - freq).abs() < (bank.freqs_hz[best] - freq).abs() {
            best = i;
        }
    }
    Ok((best, bank.phases_rad[best]))
}

fn condition_for(ckpt: &Checkpoint, effect_id: &str, feedback_pct: f64) -> Result<ConditionVector> {
    let c_fb = feedback_pct / 100.0;
    if ckpt.model_cfg.uses_embedding() {
        Ok(ConditionVector::with_embedding(
            c_fb,
            ckpt.embedding(effect_id)?,
        ))
    } else {
        Ok(ConditionVector::feedback_only(c_fb))
    }
}

/// Render the checkpointed model at an arbitrary LFO frequency: z_a is
/// overridden to the probe frequency, z_b comes from the nearest bank entry.
pub fn probe_render(
    ckpt: &Checkpoint,
    effect_id: &str,
    lfo_freq_hz: f64,
    feedback_pct: f64,
    dry: &AudioBuffer,
) -> Result<AudioBuffer> {
    let renderer = Renderer::new(ckpt.stft_cfg.clone(), ckpt.model_cfg.clone())?;
    let (_, phase) = nearest_bank_phase(ckpt, lfo_freq_hz)?;
    let cond = condition_for(ckpt, effect_id, feedback_pct)?;
    renderer.render_with_lfo(&ckpt.params, lfo_freq_hz, phase, &cond, dry)
}

fn pair_was_trained(
    manifest: &DatasetManifest,
    effect_id: &str,
    freq: f64,
    feedback_pct: f64,
) -> bool {
    manifest.entries.iter().any(|e| {
        e.effect_id == effect_id
            && e.lfo_freq_hz.to_bits() == freq.to_bits()
            && e.feedback_pct.to_bits() == feedback_pct.to_bits()
    })
}

/// ESR grid over (frequency, feedback) pairs. Ground truth comes from the
/// reference `template` at each grid point; the model is probed with z_a
/// overridden to the grid frequency. The checkpoint is never mutated.
pub fn evaluate_grid(
    ckpt: &Checkpoint,
    effect_id: &str,
    template: &EffectKind,
    lfo_freqs: &[f64],
    feedback_pcts: &[f64],
    test: &AudioBuffer,
    train_manifest: &DatasetManifest,
) -> Result<EvalReport> {
    if test.energy() == 0.0 {
        return Err(Error::invalid("evaluation test signal is silent"));
    }
    let renderer = Renderer::new(ckpt.stft_cfg.clone(), ckpt.model_cfg.clone())?;
    let mut rows = Vec::with_capacity(lfo_freqs.len() * feedback_pcts.len());
    for &freq in lfo_freqs {
        let (_, phase) = nearest_bank_phase(ckpt, freq)?;
        for &fb in feedback_pcts {
            let seen = pair_was_trained(train_manifest, effect_id, freq, fb);
            let oracle = template.with_condition(freq, phase, fb);
            let row = match oracle
                .validate(test.sample_rate())
                .and_then(|()| oracle.render(test))
            {
                Ok(truth) => {
                    let cond = condition_for(ckpt, effect_id, fb)?;
                    let pred = renderer.render_with_lfo(&ckpt.params, freq, phase, &cond, test)?;
                    EvalRow {
                        effect_id: effect_id.to_string(),
                        lfo_freq_hz: freq,
                        feedback_pct: fb,
                        seen,
                        esr_pct: 100.0 * esr(truth.samples(), pred.samples())?,
                        valid: true,
                    }
                }
                Err(e) => {
                    log::warn!("grid point ({freq} Hz, {fb}%) rejected by the oracle: {e}");
                    EvalRow {
                        effect_id: effect_id.to_string(),
                        lfo_freq_hz: freq,
                        feedback_pct: fb,
                        seen,
                        esr_pct: f64::NAN,
                        valid: false,
                    }
                }
            };
            rows.push(row);
        }
    }
    Ok(EvalReport {
        rows,
        metadata: EvalMetadata {
            checkpoint_epoch: ckpt.epoch,
            test_signal_id: signal_id(test),
            duration_s: test.duration_s(),
        },
    })
}

/// ESR at one condition over increasing input durations, each scored on a
/// fresh deterministic test signal of that length.
pub fn long_sequence_eval(
    ckpt: &Checkpoint,
    effect_id: &str,
    template: &EffectKind,
    lfo_freq_hz: f64,
    feedback_pct: f64,
    durations_s: &[f64],
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if durations_s.is_empty() {
        return Err(Error::invalid("need at least one duration"));
    }
    if durations_s.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("durations must be strictly ascending"));
    }
    let max = *durations_s.last().unwrap();
    if !(max.is_finite() && max <= 120.0) {
        return Err(Error::invalid("durations must stay at or below 120 s"));
    }
    let renderer = Renderer::new(ckpt.stft_cfg.clone(), ckpt.model_cfg.clone())?;
    let (_, phase) = nearest_bank_phase(ckpt, lfo_freq_hz)?;
    let cond = condition_for(ckpt, effect_id, feedback_pct)?;
    let oracle = template.with_condition(lfo_freq_hz, phase, feedback_pct);

    let mut out = Vec::with_capacity(durations_s.len());
    for (i, &dur) in durations_s.iter().enumerate() {
        let test = crate::signal::generate_test_signal(
            dur,
            ckpt.stft_cfg.sample_rate,
            seed.wrapping_add(i as u64),
        )?;
        oracle.validate(test.sample_rate())?;
        let truth = oracle.render(&test)?;
        let pred = renderer.render_with_lfo(&ckpt.params, lfo_freq_hz, phase, &cond, &test)?;
        out.push((dur, 100.0 * esr(truth.samples(), pred.samples())?));
    }
    Ok(out)
}

/// Render with the effect embedding blended as (1-alpha) e0 + alpha e1.
/// At the endpoints this is bitwise identical to the per-effect renders.
pub fn interpolate_embedding_render(
    ckpt: &Checkpoint,
    alpha: f64,
    lfo_freq_hz: f64,
    feedback_pct: f64,
    test: &AudioBuffer,
) -> Result<AudioBuffer> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    if ckpt.effect_ids.len() != 2 || !ckpt.model_cfg.uses_embedding() {
        return Err(Error::invalid(format!(
            "embedding interpolation needs a checkpoint trained on exactly 2 effects, found {}",
            ckpt.effect_ids.len()
        )));
    }
    let e0 = ckpt.embedding(&ckpt.effect_ids[0])?;
    let e1 = ckpt.embedding(&ckpt.effect_ids[1])?;
    let blended = [
        (1.0 - alpha) * e0[0] + alpha * e1[0],
        (1.0 - alpha) * e0[1] + alpha * e1[1],
    ];
    let renderer = Renderer::new(ckpt.stft_cfg.clone(), ckpt.model_cfg.clone())?;
    let (_, phase) = nearest_bank_phase(ckpt, lfo_freq_hz)?;
    let cond = ConditionVector::with_embedding(feedback_pct / 100.0, blended);
    renderer.render_with_lfo(&ckpt.params, lfo_freq_hz, phase, &cond, test)
}

/// Relative L1 distance between magnitude spectrograms at one fft size:
/// sum|A - B| / sum A.
pub fn spectral_l1_distance(a: &[f64], b: &[f64], fft_size: usize) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "spectral distance needs equal lengths, got {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let ma = magnitude_spectrogram(a, fft_size)?;
    let mb = magnitude_spectrogram(b, fft_size)?;
    let num = (&ma - &mb).mapv(f64::abs).sum();
    let den = ma.sum();
    if den <= 0.0 {
        return Err(Error::invalid("reference signal has no spectral energy"));
    }
    Ok(num / den)
}

/// Write a log-magnitude spectrogram as an 8-bit PGM image (low bins at
/// the bottom) plus a CSV of the raw matrix (frames as rows). Returns the
/// two paths written.
pub fn export_spectrogram(
    x: &AudioBuffer,
    out_stem: &Path,
    fft_size: usize,
) -> Result<(PathBuf, PathBuf)> {
    let mag = magnitude_spectrogram(x.samples(), fft_size)?;
    let logm = mag.mapv(f64::ln);
    let frames = logm.nrows();
    let bins = logm.ncols();

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in logm.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;

    let mut pgm = Vec::with_capacity(32 + frames * bins);
    pgm.extend_from_slice(format!("P5\n{frames} {bins}\n255\n").as_bytes());
    for row in 0..bins {
        let bin = bins - 1 - row;
        for m in 0..frames {
            let level = if span > 0.0 {
                ((logm[[m, bin]] - lo) / span * 255.0).round() as u8
            } else {
                0 // silence maps to a uniform minimum-level image
            };
            pgm.push(level);
        }
    }
    let pgm_path = out_stem.with_extension("pgm");
    std::fs::write(&pgm_path, pgm)?;

    let mut csv = String::new();
    for m in 0..frames {
        for k in 0..bins {
            if k > 0 {
                csv.push(',');
            }
            csv.push_str(&format!("{:.9e}", logm[[m, k]]));
        }
        csv.push('\n');
    }
    let csv_path = out_stem.with_extension("csv");
    std::fs::write(&csv_path, csv)?;
    Ok((pgm_path, csv_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConmodConfig;
    use crate::oracle::{build_dataset, build_dataset_multi, PhaserOracleConfig};
    use crate::signal::generate_test_signal;
    use crate::spectral::{StftConfig, WindowKind};
    use crate::train::{TrainConfig, Trainer};

    fn toy_stft() -> StftConfig {
        StftConfig {
            frame_size: 32,
            fft_size: 64,
            hop: 8,
            window: WindowKind::Hann,
            sample_rate: 8000,
        }
    }

    fn toy_model(cond_dim: usize) -> ConmodConfig {
        ConmodConfig {
            lstm_hidden: 4,
            mlp_hidden: 8,
            num_hidden_fc: 2,
            bins: 33,
            cond_dim,
            film_hidden: 4,
        }
    }

    fn toy_train(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            loss_weights: crate::loss::LossWeights {
                fft_sizes: vec![64, 128],
                ..Default::default()
            },
            seed: 5,
            checkpoint_every: 0,
            ..TrainConfig::default()
        }
    }

    fn single_effect_fixture() -> (Checkpoint, DatasetManifest, EffectKind) {
        let dir = tempfile::tempdir().unwrap();
        let manifest = build_dataset("phaser_x", &[0.5, 1.0], &[0.0, 50.0], 0.2, 0.12, 8000, dir.path())
            .unwrap();
        let trainer = Trainer::new(&manifest, toy_model(1), toy_stft(), toy_train(0)).unwrap();
        let ckpt = trainer.run(None, None).unwrap();
        let template = EffectKind::Phaser(PhaserOracleConfig::default());
        (ckpt, manifest, template)
    }

    fn dual_effect_fixture() -> (Checkpoint, DatasetManifest) {
        let dir = tempfile::tempdir().unwrap();
        let effects = vec![
            (
                "phaser_a".to_string(),
                EffectKind::Phaser(PhaserOracleConfig {
                    stages: 2,
                    ..Default::default()
                }),
            ),
            (
                "phaser_b".to_string(),
                EffectKind::Phaser(PhaserOracleConfig {
                    stages: 6,
                    ..Default::default()
                }),
            ),
        ];
        let manifest =
            build_dataset_multi(&effects, &[0.7], &[0.0], 0.2, 0.12, 8000, dir.path()).unwrap();
        let trainer = Trainer::new(&manifest, toy_model(3), toy_stft(), toy_train(0)).unwrap();
        (trainer.run(None, None).unwrap(), manifest)
    }

    #[test]
    fn grid_rows_flags_and_checkpoint_immutability() {
        let (ckpt, manifest, template) = single_effect_fixture();
        let before = ckpt.clone();
        let test = generate_test_signal(0.1, 8000, 9).unwrap();
        let report = evaluate_grid(
            &ckpt,
            "phaser_x",
            &template,
            &[0.5, 0.8],
            &[0.0, 50.0],
            &test,
            &manifest,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 4);
        // Trained pairs are flagged seen; the probe frequency is not.
        for r in &report.rows {
            let expect_seen = r.lfo_freq_hz == 0.5;
            assert_eq!(r.seen, expect_seen, "row {r:?}");
            assert!(r.valid);
            assert!(r.esr_pct.is_finite() && r.esr_pct >= 0.0);
        }
        assert_eq!(ckpt, before);
        assert_eq!(report.metadata.duration_s, test.duration_s());

        // Single source of truth: esr_pct is 100 x the raw ratio.
        let (_, phase) = nearest_bank_phase(&ckpt, 0.5).unwrap();
        let truth = template.with_condition(0.5, phase, 0.0).render(&test).unwrap();
        let renderer = Renderer::new(ckpt.stft_cfg.clone(), ckpt.model_cfg.clone()).unwrap();
        let pred = renderer
            .render_with_lfo(
                &ckpt.params,
                0.5,
                phase,
                &ConditionVector::feedback_only(0.0),
                &test,
            )
            .unwrap();
        let expect = 100.0 * esr(truth.samples(), pred.samples()).unwrap();
        assert_eq!(report.rows[0].esr_pct, expect);
    }

    #[test]
    fn unstable_grid_points_are_marked_invalid_not_dropped() {
        let (ckpt, manifest, template) = single_effect_fixture();
        let test = generate_test_signal(0.1, 8000, 9).unwrap();
        // Feedback 400% fails oracle validation.
        let report = evaluate_grid(
            &ckpt,
            "phaser_x",
            &template,
            &[0.5],
            &[0.0, 400.0],
            &test,
            &manifest,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows[0].valid);
        assert!(!report.rows[1].valid);
        assert!(report.rows[1].esr_pct.is_nan());
        let csv = report.to_csv();
        assert!(csv.contains("NaN"));
    }

    #[test]
    fn empty_frequency_list_gives_empty_report() {
        let (ckpt, manifest, template) = single_effect_fixture();
        let test = generate_test_signal(0.1, 8000, 9).unwrap();
        let report =
            evaluate_grid(&ckpt, "phaser_x", &template, &[], &[0.0], &test, &manifest).unwrap();
        assert!(report.rows.is_empty());
        let silent = AudioBuffer::silence(800, 8000).unwrap();
        assert!(
            evaluate_grid(&ckpt, "phaser_x", &template, &[0.5], &[0.0], &silent, &manifest)
                .is_err()
        );
    }

    #[test]
    fn csv_header_and_shape_are_stable() {
        let (ckpt, manifest, template) = single_effect_fixture();
        let test = generate_test_signal(0.1, 8000, 9).unwrap();
        let report =
            evaluate_grid(&ckpt, "phaser_x", &template, &[0.5], &[0.0], &test, &manifest).unwrap();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), EVAL_CSV_HEADER);
        let row = lines.next().unwrap();
        assert!(row.starts_with("phaser_x,0.5,0,"), "{row}");
        assert_eq!(row.split(',').count(), 5);

        let dir = tempfile::tempdir().unwrap();
        report.save_csv(&dir.path().join("r.csv")).unwrap();
        report.save_json(&dir.path().join("r.json")).unwrap();
        let back: EvalReport =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap())
                .unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn long_sequence_eval_scores_each_duration() {
        let (ckpt, _, template) = single_effect_fixture();
        let rows =
            long_sequence_eval(&ckpt, "phaser_x", &template, 0.5, 0.0, &[0.1, 0.2], 3).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].0, 0.1);
        assert!(rows.iter().all(|r| r.1.is_finite()));
        // Ordering and bounds violations.
        assert!(
            long_sequence_eval(&ckpt, "phaser_x", &template, 0.5, 0.0, &[0.2, 0.1], 3).is_err()
        );
        assert!(
            long_sequence_eval(&ckpt, "phaser_x", &template, 0.5, 0.0, &[10.0, 300.0], 3)
                .is_err()
        );
        // One frame at 8 kHz is 4 ms; a far shorter signal cannot be framed.
        assert!(
            long_sequence_eval(&ckpt, "phaser_x", &template, 0.5, 0.0, &[0.001], 3).is_err()
        );
    }

    #[test]
    fn interpolation_endpoints_are_bitwise_per_effect_renders() {
        let (ckpt, _) = dual_effect_fixture();
        let test = generate_test_signal(0.1, 8000, 21).unwrap();
        let renderer = Renderer::new(ckpt.stft_cfg.clone(), ckpt.model_cfg.clone()).unwrap();
        let (_, phase) = nearest_bank_phase(&ckpt, 0.7).unwrap();

        for (alpha, id) in [(0.0, "phaser_a"), (1.0, "phaser_b")] {
            let blend = interpolate_embedding_render(&ckpt, alpha, 0.7, 0.0, &test).unwrap();
            let cond =
                ConditionVector::with_embedding(0.0, ckpt.embedding(id).unwrap());
            let direct = renderer
                .render_with_lfo(&ckpt.params, 0.7, phase, &cond, &test)
                .unwrap();
            for (a, b) in blend.samples().iter().zip(direct.samples()) {
                assert_eq!(a.to_bits(), b.to_bits(), "alpha {alpha}");
            }
        }

        assert!(interpolate_embedding_render(&ckpt, 1.5, 0.7, 0.0, &test).is_err());
        assert!(interpolate_embedding_render(&ckpt, -0.1, 0.7, 0.0, &test).is_err());
        let (single, _, _) = single_effect_fixture();
        assert!(interpolate_embedding_render(&single, 0.5, 0.5, 0.0, &test).is_err());
    }

    #[test]
    fn spectral_distance_zero_iff_identical() {
        let x = generate_test_signal(0.2, 8000, 2).unwrap().into_samples();
        let y = generate_test_signal(0.2, 8000, 3).unwrap().into_samples();
        assert_eq!(spectral_l1_distance(&x, &x, 256).unwrap(), 0.0);
        assert!(spectral_l1_distance(&x, &y, 256).unwrap() > 1e-3);
        assert!(spectral_l1_distance(&x, &y[..100], 256).is_err());
    }

    #[test]
    fn spectrogram_export_silent_and_sine() {
        let dir = tempfile::tempdir().unwrap();
        // Silence: uniform minimum-level image.
        let silent = AudioBuffer::silence(4096, 44100).unwrap();
        let (pgm, _) = export_spectrogram(&silent, &dir.path().join("silent"), 1024).unwrap();
        let bytes = std::fs::read(pgm).unwrap();
        let header_end = bytes
            .windows(4)
            .position(|w| w == b"255\n")
            .unwrap()
            + 4;
        assert!(bytes[header_end..].iter().all(|&b| b == 0));

        // 1 kHz sine: per-frame argmax at bin round(1000 * 1024 / 44100).
        let sine: Vec<f64> = (0..8192)
            .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 44100.0).sin())
            .collect();
        let buf = AudioBuffer::new(sine, 44100).unwrap();
        let (_, csv) = export_spectrogram(&buf, &dir.path().join("sine"), 1024).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        for line in text.lines() {
            let vals: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            assert_eq!(vals.len(), 513);
            let argmax = vals
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(argmax, 23);
        }

        // CSV round trip against the in-memory matrix.
        let mag = magnitude_spectrogram(buf.samples(), 1024).unwrap();
        let logm = mag.mapv(f64::ln);
        let first_line = text.lines().next().unwrap();
        for (k, v) in first_line.split(',').enumerate() {
            let got: f64 = v.parse().unwrap();
            assert!((got - logm[[0, k]]).abs() < 1e-6);
        }
    }
}
