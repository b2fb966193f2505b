//! Desk-scale convergence probe: times training steps and reports held-out
//! ESR through the grid evaluator's probe protocol (z_a overridden to the
//! probe frequency, phase taken from the nearest bank entry).
//!
//! Usage: desk_probe <epochs> [lr] [gamma] [perturb]

use std::time::Instant;

use conmod::eval::evaluate_grid;
use conmod::model::ConmodConfig;
use conmod::oracle::{build_dataset_multi, EffectKind, PhaserOracleConfig};
use conmod::signal::generate_test_signal;
use conmod::spectral::{StftConfig, WindowKind};
use conmod::train::{LfoInit, TrainConfig, Trainer};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(20);
    let lr: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.001);
    let gamma: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.9997);
    let perturb = args.iter().any(|a| a == "perturb");
    let fft_sizes: Vec<usize> = args
        .iter()
        .find_map(|a| a.strip_prefix("ffts="))
        .map(|s| s.split(',').map(|v| v.parse().unwrap()).collect())
        .unwrap_or_else(|| vec![512, 1024, 2048]);

    let tmp = tempfile::tempdir().unwrap();
    let template = EffectKind::Phaser(PhaserOracleConfig {
        stages: 2,
        ..Default::default()
    });
    let effects = vec![("phaser_desk".to_string(), template.clone())];
    let manifest =
        build_dataset_multi(&effects, &[1.0], &[0.0], 0.3, 2.0, 44100, tmp.path()).unwrap();

    let stft = StftConfig {
        frame_size: 440,
        fft_size: 1024,
        hop: 110,
        window: WindowKind::Hann,
        sample_rate: 44100,
    };
    let model = ConmodConfig {
        lstm_hidden: 16,
        mlp_hidden: 128,
        num_hidden_fc: 2,
        bins: 513,
        cond_dim: 1,
        film_hidden: 16,
    };
    let train = TrainConfig {
        epochs,
        initial_lr: lr,
        lr_decay_gamma: gamma,
        loss_weights: conmod::loss::LossWeights {
            fft_sizes,
            ..Default::default()
        },
        seed: 11,
        lfo_init: if perturb {
            LfoInit::Perturbed { sigma_rel: 0.1 }
        } else {
            LfoInit::Exact
        },
        checkpoint_every: 0,
        ..TrainConfig::default()
    };

    let trainer = Trainer::new(&manifest, model, stft, train).unwrap();
    let t0 = Instant::now();
    let ckpt = trainer.run(Some(tmp.path()), None).unwrap();
    let dt = t0.elapsed();
    println!(
        "{} epochs in {:?} ({:.3} s/epoch)",
        epochs,
        dt,
        dt.as_secs_f64() / epochs.max(1) as f64
    );

    let metrics = std::fs::read_to_string(tmp.path().join("metrics.ndjson")).unwrap();
    let n_lines = metrics.lines().count();
    for (i, line) in metrics.lines().enumerate() {
        if i % 50 != 0 && i != n_lines - 1 {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        println!(
            "epoch {} mean_loss {:.4} esr% {:.3} z_a {:?}",
            v["epoch"],
            v["mean_loss"].as_f64().unwrap(),
            v["per_condition"][0]["esr"].as_f64().unwrap() * 100.0,
            v["z_a"]
        );
    }
    let bank = ckpt.bank().unwrap();
    println!("trained bank: {:?} / {:?}", bank.freqs_hz, bank.phases_rad);

    for (dur, seed) in [(2.0, 777u64), (10.0, 777), (2.0, 42), (10.0, 42)] {
        let test = generate_test_signal(dur, 44100, seed).unwrap();
        let t1 = Instant::now();
        let report = evaluate_grid(
            &ckpt,
            "phaser_desk",
            &template,
            &[1.0],
            &[0.0],
            &test,
            &manifest,
        )
        .unwrap();
        println!(
            "held-out {dur} s seed {seed} probe ESR: {:.4}% (eval took {:?})",
            report.rows[0].esr_pct,
            t1.elapsed()
        );
    }
    let pairs =
        conmod::eval::long_sequence_eval(&ckpt, "phaser_desk", &template, 1.0, 0.0, &[10.0, 60.0], 777)
            .unwrap();
    println!(
        "long-sequence: 10 s {:.4}% / 60 s {:.4}% ratio {:.3}",
        pairs[0].1 * 100.0,
        pairs[1].1 * 100.0,
        pairs[1].1 / pairs[0].1
    );
}
