//! End-to-end acceptance suite. Each test prints one
//! `ACCEPTANCE C{n} PASS/FAIL` line and enforces its wall-clock budget.
//! The desk-scale convergence tests share one trained checkpoint through
//! a lazy fixture, so the training cost is paid once.

mod common;

use std::f64::consts::PI;

use ndarray::Array2;
use once_cell::sync::Lazy;
use tempfile::TempDir;

use common::{desk_model, desk_stft, dft_magnitudes, Cpx, Criterion};
use conmod::autodiff::finite_difference_check;
use conmod::eval::{evaluate_grid, interpolate_embedding_render, long_sequence_eval, probe_render, spectral_l1_distance};
use conmod::loss::{esr, LossPlan, LossWeights};
use conmod::model::{predict_transfer_graph, BoundParams, ConmodConfig};
use conmod::oracle::{
    build_dataset_multi, DatasetManifest, EffectKind, FlangerOracleConfig, PhaserOracleConfig,
};
use conmod::signal::{generate_test_signal, AudioBuffer};
use conmod::spectral::{SpectralBases, StftConfig, WindowKind};
use conmod::train::{Checkpoint, LfoInit, TrainConfig, Trainer};

/// Training recipe for the desk-scale criteria. The criteria pin the data,
/// model size, LFO init, and epoch count; the optimizer schedule and the
/// loss resolutions are tuning choices shared by every desk run.
///
/// The loss supervises at 2048 alone: the chirp-train dry has true silence
/// between chirps, and at resolutions 512 and 1024 a large share of target
/// STFT cells sit exactly at the magnitude floor, where the floored log
/// term turns synthesis tails into noise gradients that stall descent.
/// 2048 is the one resolution whose window always overlaps a chirp.
const DESK_LR: f64 = 0.002;
const DESK_GAMMA: f64 = 0.9997;
const DESK_FFT_SIZES: &[usize] = &[2048];
const DESK_EPOCHS: usize = 500;
const DESK_SEED: u64 = 11;
const DESK_PHASE: f64 = 0.3;
const TEST_SIGNAL_SEED: u64 = 777;

fn desk_phaser() -> EffectKind {
    EffectKind::Phaser(PhaserOracleConfig {
        stages: 2,
        ..Default::default()
    })
}

fn desk_train_cfg(epochs: usize, lfo_init: LfoInit) -> TrainConfig {
    TrainConfig {
        epochs,
        initial_lr: DESK_LR,
        lr_decay_gamma: DESK_GAMMA,
        loss_weights: LossWeights {
            fft_sizes: DESK_FFT_SIZES.to_vec(),
            ..Default::default()
        },
        seed: DESK_SEED,
        lfo_init,
        checkpoint_every: 0,
        ..Default::default()
    }
}

/// Dataset + one trained checkpoint for a condition grid of the desk
/// phaser. Temp dir kept alive so manifest paths stay valid.
struct DeskRun {
    _dir: TempDir,
    manifest: DatasetManifest,
    ckpt: Checkpoint,
    train_s: f64,
}

fn desk_run(freqs: &[f64], feedbacks: &[f64], epochs: usize, lfo_init: LfoInit) -> DeskRun {
    let dir = TempDir::new().expect("tempdir");
    let effects = vec![("phaser_desk".to_string(), desk_phaser())];
    let manifest =
        build_dataset_multi(&effects, freqs, feedbacks, DESK_PHASE, 2.0, 44100, dir.path())
            .expect("dataset");
    let trainer = Trainer::new(
        &manifest,
        desk_model(1),
        desk_stft(),
        desk_train_cfg(epochs, lfo_init),
    )
    .expect("trainer");
    let t0 = std::time::Instant::now();
    let ckpt = trainer.run(None, None).expect("training");
    DeskRun {
        _dir: dir,
        manifest,
        ckpt,
        train_s: t0.elapsed().as_secs_f64(),
    }
}

/// The converged single-condition desk model shared by criteria 4 and 9.
static DESK: Lazy<DeskRun> =
    Lazy::new(|| desk_run(&[1.0], &[0.0], DESK_EPOCHS, LfoInit::Exact));

fn held_out_probe_esr(run: &DeskRun, lfo_freq: f64, feedback_pct: f64, duration_s: f64) -> f64 {
    let test = generate_test_signal(duration_s, 44100, TEST_SIGNAL_SEED).expect("test signal");
    let report = evaluate_grid(
        &run.ckpt,
        "phaser_desk",
        &desk_phaser(),
        &[lfo_freq],
        &[feedback_pct],
        &test,
        &run.manifest,
    )
    .expect("evaluation");
    report.rows[0].esr_pct
}

#[test]
fn criterion_01_stft_round_trip() {
    let c = Criterion::start(1, 60.0);
    let cfg = StftConfig {
        frame_size: 1764,
        fft_size: 4096,
        hop: 441,
        window: WindowKind::Hann,
        sample_rate: 44100,
    };
    let bases = SpectralBases::build(cfg.clone()).expect("bases");
    let len = 22050;
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(100 + seed);
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-0.9..0.9)).collect();
        let spec = bases.stft(&x).expect("stft");
        let back = bases.istft(&spec, len).expect("istft");
        let err = x[cfg.frame_size..len - cfg.fft_size]
            .iter()
            .zip(&back[cfg.frame_size..len - cfg.fft_size])
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(err);
    }
    c.finish(
        worst < 1e-9,
        &format!("20 random signals, worst interior error {worst:.2e} (< 1e-9)"),
    );
}

#[test]
fn criterion_02_gradient_integrity() {
    let c = Criterion::start(2, 300.0);
    let stft = StftConfig {
        frame_size: 32,
        fft_size: 64,
        hop: 8,
        window: WindowKind::Hann,
        sample_rate: 8000,
    };
    let model = ConmodConfig {
        lstm_hidden: 4,
        mlp_hidden: 8,
        num_hidden_fc: 2,
        bins: stft.bins(),
        cond_dim: 3,
        film_hidden: 4,
    };
    let len = 88; // 8 frames
    let dry = generate_test_signal(len as f64 / 8000.0, 8000, 4).expect("dry");
    let wet = generate_test_signal(len as f64 / 8000.0, 8000, 5).expect("wet");
    let plan = LossPlan::new(LossWeights {
        fft_sizes: vec![64],
        ..Default::default()
    })
    .expect("plan");
    let prepared = plan.prepare(wet.samples()).expect("prepared");
    let bases = SpectralBases::build(stft.clone()).expect("bases");
    let dry_spec = bases.stft(dry.samples()).expect("dry spec");
    let mut ps = conmod::model::init_weights(&model, 19).expect("weights");
    // Probe at a conventional weight scale: the deliberately shrunk output
    // head gives near-zero upstream gradients, which drowns central
    // differences in roundoff regardless of step size.
    ps.get_mut("out.w")
        .expect("out.w")
        .mapv_inplace(|v| v * 100.0);
    let times: Vec<f64> = (0..8).map(|m| m as f64 * 8.0 / 8000.0).collect();

    let mut groups: Vec<String> = ps.names().map(String::from).collect();
    groups.extend(["z_a".into(), "z_b".into(), "c_emb".into()]);

    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for objective in ["esr", "mrsl", "total"] {
        for name in &groups {
            let probe: Array2<f64> = match name.as_str() {
                "z_a" => Array2::from_elem((1, 1), 1.3),
                "z_b" => Array2::from_elem((1, 1), 0.4),
                "c_emb" => Array2::from_shape_vec((1, 2), vec![0.1, -0.2]).unwrap(),
                n => ps.get(n).expect("group").clone(),
            };
            let err = finite_difference_check(
                |g, vars| {
                    let probe = vars[0];
                    let mut bound = Vec::new();
                    for (n, v) in ps.iter() {
                        let var = if n == name {
                            probe
                        } else {
                            g.constant(v.clone())
                        };
                        bound.push((n.to_string(), var));
                    }
                    let bp = BoundParams::from_vars(bound);
                    let z_a = if name == "z_a" { probe } else { g.scalar(1.3) };
                    let z_b = if name == "z_b" { probe } else { g.scalar(0.4) };
                    let emb = if name == "c_emb" {
                        probe
                    } else {
                        g.constant(Array2::from_shape_vec((1, 2), vec![0.1, -0.2]).unwrap())
                    };
                    let t = g.constant(
                        Array2::from_shape_vec((8, 1), times.clone()).unwrap(),
                    );
                    let lfo = t.mul(z_a)?.scale(2.0 * PI).add(z_b)?.sin();
                    let fb = g.constant(Array2::from_elem((1, 1), 0.5));
                    let cond = g.concat_cols(&[fb, emb])?;
                    let h = predict_transfer_graph(g, &bp, &model, lfo, cond)?;
                    let sd = bases.constant_spec(g, &dry_spec);
                    let prod = conmod::spectral::apply_transfer_graph(&sd, &h)?;
                    let pred = bases.istft_graph(g, &prod, len)?;
                    match objective {
                        "esr" => plan.esr_graph(g, &prepared, pred),
                        "mrsl" => plan.mrsl_graph(g, &prepared, pred),
                        _ => plan.total_graph(g, &prepared, pred),
                    }
                },
                &[probe],
                1e-4,
            )
            .expect("finite difference check");
            if err > worst {
                worst = err;
                worst_at = format!("{objective}/{name}");
            }
        }
    }
    c.finish(
        worst < 1e-3,
        &format!(
            "{} groups x 3 objectives, worst rel error {worst:.2e} at {worst_at} (< 1e-3)",
            groups.len()
        ),
    );
}

#[test]
fn criterion_03_stop_gradient_routing() {
    let c = Criterion::start(3, 300.0);
    let dir = TempDir::new().expect("tempdir");
    let effects = vec![("phaser_desk".to_string(), desk_phaser())];
    let freqs = [0.23, 0.73, 1.13];
    let fbs = [0.0, 25.0, 50.0, 75.0];
    let manifest =
        build_dataset_multi(&effects, &freqs, &fbs, DESK_PHASE, 2.0, 44100, dir.path())
            .expect("dataset");

    let snapshot = |params: &conmod::model::ParamSet| -> Vec<(u64, u64)> {
        (0..freqs.len())
            .map(|i| {
                let f = params.get(&format!("lfo.{i}.freq")).expect("freq")[[0, 0]];
                let p = params.get(&format!("lfo.{i}.phase")).expect("phase")[[0, 0]];
                (f.to_bits(), p.to_bits())
            })
            .collect()
    };

    // Same seed, zero epochs: recovers the exact initial bank state.
    let init = Trainer::new(
        &manifest,
        desk_model(1),
        desk_stft(),
        desk_train_cfg(0, LfoInit::Exact),
    )
    .expect("trainer")
    .run(None, None)
    .expect("init checkpoint");
    let mut prev = snapshot(&init.params);

    let trainer = Trainer::new(
        &manifest,
        desk_model(1),
        desk_stft(),
        desk_train_cfg(1, LfoInit::Exact),
    )
    .expect("trainer");
    let mut steps = 0usize;
    let mut touched = vec![0usize; freqs.len()];
    let mut ok = true;
    let mut detail = String::new();
    trainer
        .run_observed(None, None, |ev| {
            let cur = snapshot(ev.params);
            for j in 0..freqs.len() {
                let same = cur[j] == prev[j];
                if j == ev.bank_index && same {
                    ok = false;
                    detail = format!("step {} left active entry {j} unchanged", ev.step);
                }
                if j != ev.bank_index && !same {
                    ok = false;
                    detail = format!("step {} moved inactive entry {j}", ev.step);
                }
            }
            touched[ev.bank_index] += 1;
            prev = cur;
            steps += 1;
        })
        .expect("epoch");
    if steps != 12 {
        ok = false;
        detail = format!("expected 12 steps, saw {steps}");
    }
    if touched.iter().any(|&t| t != 4) {
        ok = false;
        detail = format!("uneven bank usage {touched:?}");
    }
    if ok {
        detail = "12 steps, inactive (z_a, z_b) bitwise frozen, active always moved".into();
    }
    c.finish(ok, &detail);
}

#[test]
fn criterion_04_desk_convergence() {
    let c = Criterion::start(4, 1800.0);
    let run = &*DESK;
    let esr_pct = held_out_probe_esr(run, 1.0, 0.0, 10.0);
    c.finish(
        esr_pct.is_finite() && esr_pct < 5.0,
        &format!(
            "held-out 10 s probe ESR {esr_pct:.2}% (< 5%), training {:.0}s",
            run.train_s
        ),
    );
}

#[test]
fn criterion_05_lfo_frequency_recovery() {
    let c = Criterion::start(5, 1800.0);
    let run = desk_run(
        &[1.0],
        &[0.0],
        DESK_EPOCHS,
        LfoInit::Perturbed { sigma_rel: 0.1 },
    );
    let bank = run.ckpt.bank().expect("bank");
    let z_a = bank.freqs_hz[0];
    c.finish(
        (z_a - 1.0).abs() < 0.02,
        &format!("perturbed init recovered z_a {z_a:.4} Hz (|z_a - 1| < 0.02)"),
    );
}

#[test]
fn criterion_06_parameter_count() {
    let c = Criterion::start(6, 10.0);
    let n = ConmodConfig::default().count_parameters();
    c.finish(
        (2_350_000..=2_450_000).contains(&n),
        &format!("default config has {n} parameters (2.35M..2.45M)"),
    );
}

#[test]
fn criterion_07_feedback_interpolation() {
    let c = Criterion::start(7, 2700.0);
    let run = desk_run(&[1.0], &[0.0, 50.0], DESK_EPOCHS, LfoInit::Exact);
    let test = generate_test_signal(10.0, 44100, TEST_SIGNAL_SEED).expect("test signal");
    let report = evaluate_grid(
        &run.ckpt,
        "phaser_desk",
        &desk_phaser(),
        &[1.0],
        &[0.0, 25.0, 50.0],
        &test,
        &run.manifest,
    )
    .expect("evaluation");
    let seen: Vec<f64> = report
        .rows
        .iter()
        .filter(|r| r.seen)
        .map(|r| r.esr_pct)
        .collect();
    let unseen: Vec<f64> = report
        .rows
        .iter()
        .filter(|r| !r.seen)
        .map(|r| r.esr_pct)
        .collect();
    let mean_seen = seen.iter().sum::<f64>() / seen.len() as f64;
    let ok = seen.len() == 2
        && unseen.len() == 1
        && unseen[0].is_finite()
        && unseen[0] <= 3.0 * mean_seen;
    c.finish(
        ok,
        &format!(
            "fb 25% ESR {:.2}% vs seen mean {mean_seen:.2}% (<= 3x), training {:.0}s",
            unseen.first().copied().unwrap_or(f64::NAN),
            run.train_s
        ),
    );
}

#[test]
fn criterion_08_multi_lfo_ablation() {
    let c = Criterion::start(8, 5400.0);
    let multi = desk_run(&[0.5, 1.5], &[0.0], DESK_EPOCHS, LfoInit::Exact);
    let single = desk_run(&[0.5], &[0.0], DESK_EPOCHS, LfoInit::Exact);
    let esr_multi = held_out_probe_esr(&multi, 1.0, 0.0, 10.0);
    let esr_single = held_out_probe_esr(&single, 1.0, 0.0, 10.0);
    c.finish(
        esr_multi.is_finite() && esr_single.is_finite() && esr_multi < esr_single,
        &format!(
            "probe 1.0 Hz ESR: {{0.5, 1.5}} Hz model {esr_multi:.2}% < {{0.5}} Hz model {esr_single:.2}%"
        ),
    );
}

#[test]
fn criterion_09_long_sequence_stability() {
    let run = &*DESK; // training cost accounted to criterion 4
    let c = Criterion::start(9, 600.0);
    let pairs = long_sequence_eval(
        &run.ckpt,
        "phaser_desk",
        &desk_phaser(),
        1.0,
        0.0,
        &[10.0, 60.0],
        TEST_SIGNAL_SEED,
    )
    .expect("long eval");
    let esr10 = pairs[0].1;
    let esr60 = pairs[1].1;
    c.finish(
        esr10.is_finite() && esr60.is_finite() && esr60 <= 1.5 * esr10,
        &format!("ESR 60 s {esr60:.2}% vs 10 s {esr10:.2}% (ratio {:.2} <= 1.5)", esr60 / esr10),
    );
}

#[test]
fn criterion_10_embedding_steering() {
    let c = Criterion::start(10, 7200.0);
    let dir = TempDir::new().expect("tempdir");
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
                stages: 4,
                ..Default::default()
            }),
        ),
    ];
    let freqs = [0.5, 1.5];
    let fbs = [0.0, 25.0, 50.0, 75.0];
    let manifest =
        build_dataset_multi(&effects, &freqs, &fbs, DESK_PHASE, 2.0, 44100, dir.path())
            .expect("dataset");
    let trainer = Trainer::new(
        &manifest,
        desk_model(3),
        desk_stft(),
        desk_train_cfg(DESK_EPOCHS, LfoInit::Exact),
    )
    .expect("trainer");
    let t0 = std::time::Instant::now();
    let ckpt = trainer.run(None, None).expect("training");
    let train_s = t0.elapsed().as_secs_f64();

    let test = generate_test_signal(10.0, 44100, TEST_SIGNAL_SEED).expect("test signal");
    let mut mean_by_effect = Vec::new();
    for (id, template) in &effects {
        let report = evaluate_grid(&ckpt, id, template, &freqs, &fbs, &test, &manifest)
            .expect("evaluation");
        let vals: Vec<f64> = report.rows.iter().map(|r| r.esr_pct).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        mean_by_effect.push(mean);
    }
    let converged = mean_by_effect.iter().all(|m| m.is_finite() && *m < 10.0);

    // Endpoint faithfulness and a genuinely intermediate alpha = 0.5.
    let probe = generate_test_signal(2.0, 44100, TEST_SIGNAL_SEED + 1).expect("probe signal");
    let end_a = probe_render(&ckpt, "phaser_a", 1.0, 25.0, &probe).expect("endpoint a");
    let end_b = probe_render(&ckpt, "phaser_b", 1.0, 25.0, &probe).expect("endpoint b");
    let alpha0 = interpolate_embedding_render(&ckpt, 0.0, 1.0, 25.0, &probe).expect("alpha 0");
    let alpha1 = interpolate_embedding_render(&ckpt, 1.0, 1.0, 25.0, &probe).expect("alpha 1");
    let bitwise = |x: &AudioBuffer, y: &AudioBuffer| {
        x.samples()
            .iter()
            .zip(y.samples())
            .all(|(a, b)| a.to_bits() == b.to_bits())
    };
    let endpoints_ok = bitwise(&alpha0, &end_a) && bitwise(&alpha1, &end_b);

    let mid = interpolate_embedding_render(&ckpt, 0.5, 1.0, 25.0, &probe).expect("alpha 0.5");
    let mix: Vec<f64> = end_a
        .samples()
        .iter()
        .zip(end_b.samples())
        .map(|(a, b)| 0.5 * a + 0.5 * b)
        .collect();
    let d_a = spectral_l1_distance(mid.samples(), end_a.samples(), 1024).expect("dist a");
    let d_b = spectral_l1_distance(mid.samples(), end_b.samples(), 1024).expect("dist b");
    let d_mix = spectral_l1_distance(mid.samples(), &mix, 1024).expect("dist mix");
    let distinct = d_a > 1e-3 && d_b > 1e-3 && d_mix > 1e-3;

    c.finish(
        converged && endpoints_ok && distinct,
        &format!(
            "per-effect ESR {:.2}%/{:.2}% (< 10%), endpoints bitwise {}, alpha 0.5 spectral L1 {:.2e}/{:.2e}/{:.2e} (> 1e-3), training {train_s:.0}s",
            mean_by_effect[0], mean_by_effect[1], endpoints_ok, d_a, d_b, d_mix
        ),
    );
}

#[test]
fn criterion_11_oracle_fidelity() {
    let c = Criterion::start(11, 60.0);
    let sr = 44100u32;
    let n = 8192usize;
    // The impulse sits past the longest modulated delay so the fractional
    // read never straddles the start of the recording; the response is
    // extracted aligned to the impulse.
    let t0 = 256usize;
    let mut impulse = vec![0.0; t0 + n];
    impulse[t0] = 1.0;
    let impulse = AudioBuffer::new(impulse, sr).expect("impulse");

    let phaser = |phase: f64, feedback: f64| {
        EffectKind::Phaser(PhaserOracleConfig {
            lfo_freq_hz: 0.0,
            lfo_phase: phase,
            feedback,
            ..Default::default()
        })
    };
    let flanger = |phase: f64, feedback: f64| {
        EffectKind::Flanger(FlangerOracleConfig {
            lfo_freq_hz: 0.0,
            lfo_phase: phase,
            feedback,
            ..Default::default()
        })
    };

    let closed_form = |kind: &EffectKind, k: usize| -> f64 {
        let w = 2.0 * PI * k as f64 / n as f64;
        let z1 = Cpx::delay(w);
        match kind {
            EffectKind::Phaser(cfg) => {
                let lfo = cfg.lfo_phase.sin();
                let fb_hz = cfg.center_hz * (cfg.sweep_octaves * lfo).exp2();
                let t = (PI * fb_hz / sr as f64).tan();
                let a = (t - 1.0) / (t + 1.0);
                let ac = Cpx::new(a, 0.0);
                let one = Cpx::new(1.0, 0.0);
                let ap = (ac + z1) / (one + ac * z1);
                let cascade = ap.powi(cfg.stages);
                let h = Cpx::new(1.0 - cfg.mix, 0.0)
                    + cascade.scale(cfg.mix)
                        / (one - (z1 * cascade).scale(cfg.feedback));
                h.abs()
            }
            EffectKind::Flanger(cfg) => {
                let base = cfg.base_delay_ms / 1000.0 * sr as f64;
                let lfo = cfg.lfo_phase.sin();
                let d = (base * (1.0 + cfg.lfo_amount * lfo)).max(1.0);
                let j = d.floor();
                let f = d - j;
                let tap = Cpx::delay(w * j).scale(1.0 - f)
                    + Cpx::delay(w * (j + 1.0)).scale(f);
                let d_nom = base.round().max(1.0);
                let one = Cpx::new(1.0, 0.0);
                let h = Cpx::new(1.0 - cfg.mix, 0.0)
                    + (tap / (one - Cpx::delay(w * d_nom).scale(cfg.feedback)))
                        .scale(cfg.mix);
                h.abs()
            }
        }
    };

    let mut worst_mag = 0.0f64;
    let mut worst_notch = 0usize;
    for kind in [
        phaser(0.0, 0.0),
        phaser(0.9, 0.5),
        flanger(0.0, 0.0),
        flanger(0.9, 0.5),
    ] {
        let response = kind.render(&impulse).expect("impulse response");
        let measured = dft_magnitudes(&response.samples()[t0..], n);
        let reference: Vec<f64> = (0..=n / 2).map(|k| closed_form(&kind, k)).collect();
        let peak = reference.iter().cloned().fold(0.0f64, f64::max);
        let mag_err = measured
            .iter()
            .zip(&reference)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / peak;
        let argmin = |v: &[f64]| {
            v.iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap()
        };
        let notch_gap = argmin(&measured).abs_diff(argmin(&reference));
        worst_mag = worst_mag.max(mag_err);
        worst_notch = worst_notch.max(notch_gap);
    }
    c.finish(
        worst_mag < 0.01 && worst_notch <= 1,
        &format!(
            "4 static configs: worst magnitude error {:.2}% of peak (< 1%), worst notch offset {worst_notch} bin (<= 1)",
            100.0 * worst_mag
        ),
    );
}

#[test]
fn criterion_12_loss_unit_identities() {
    let c = Criterion::start(12, 10.0);
    let y = generate_test_signal(0.4, 8000, 3).expect("signal");
    let zeros = vec![0.0; y.len()];
    let e_zero = esr(y.samples(), &zeros).expect("esr vs zero");

    let flat = vec![1.0; 5];
    let mut off = flat.clone();
    off[0] = 0.0;
    let e_hand = esr(&flat, &off).expect("esr hand case");

    let plan = LossPlan::new(LossWeights::default()).expect("plan");
    let m_self = plan.mrsl(y.samples(), y.samples()).expect("mrsl self");

    let pred: Vec<f64> = y.samples().iter().map(|v| 0.7 * v + 0.01).collect();
    let b = plan.total(y.samples(), &pred).expect("breakdown");
    let composed = plan.weights.lambda * b.esr + b.mrsl;

    let ok = (e_zero - 1.0).abs() < 1e-9
        && (e_hand - 0.2).abs() < 1e-10
        && m_self == 0.0
        && b.total == composed
        && plan.weights.lambda == 2.0;
    c.finish(
        ok,
        &format!(
            "esr(y,0)={e_zero:.9}, hand case {e_hand:.9}, mrsl(y,y)={m_self}, total == 2*esr+mrsl exactly"
        ),
    );
}
