//! Loss baselines for the desk-scale condition: what the identity and zero
//! predictors score, and the ceiling of the per-frame transfer-function
//! model family (frame-wise least-squares H from the dry/wet STFT pair).

use conmod::loss::{esr, LossPlan, LossWeights};
use conmod::oracle::{build_dataset_multi, EffectKind, PhaserOracleConfig};
use conmod::signal::wav_read;
use conmod::spectral::{SpectralBases, StftConfig, WindowKind};

fn main() {
    if std::env::args().any(|a| a == "baselines") {
        burst_identity_baselines();
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let template = EffectKind::Phaser(PhaserOracleConfig {
        stages: 2,
        ..Default::default()
    });
    let effects = vec![("phaser_desk".to_string(), template)];
    let manifest =
        build_dataset_multi(&effects, &[1.0], &[0.0], 0.3, 2.0, 44100, tmp.path()).unwrap();
    let dry = wav_read(&manifest.entries[0].dry_path).unwrap();
    let wet = wav_read(&manifest.entries[0].wet_path).unwrap();

    let plan = LossPlan::new(LossWeights::default()).unwrap();
    let id = plan.total(wet.samples(), dry.samples()).unwrap();
    println!(
        "identity: esr {:.2}% mrsl {:.3} total {:.3}",
        id.esr * 100.0,
        id.mrsl,
        id.total
    );
    let zeros = vec![0.0; wet.len()];
    let z = plan.total(wet.samples(), &zeros).unwrap();
    println!(
        "zero:     esr {:.2}% mrsl {:.3} total {:.3}",
        z.esr * 100.0,
        z.mrsl,
        z.total
    );

    // Frame-model ceiling: per-frame per-bin H = S_wet conj(S_dry) / (|S_dry|^2 + delta),
    // rendered back through the same inverse pipeline the model uses.
    let stft = StftConfig {
        frame_size: 440,
        fft_size: 1024,
        hop: 110,
        window: WindowKind::Hann,
        sample_rate: 44100,
    };
    let bases = SpectralBases::build(stft.clone()).unwrap();
    let sd = bases.stft(dry.samples()).unwrap();
    let sw = bases.stft(wet.samples()).unwrap();
    for delta in [1e-6, 1e-3, 1e-1] {
        let mut h = sd.clone();
        let (m, b) = (sd.real.nrows(), sd.real.ncols());
        for i in 0..m {
            for k in 0..b {
                let (dr, di) = (sd.real[[i, k]], sd.imag[[i, k]]);
                let (wr, wi) = (sw.real[[i, k]], sw.imag[[i, k]]);
                let den = dr * dr + di * di + delta;
                h.real[[i, k]] = (wr * dr + wi * di) / den;
                h.imag[[i, k]] = (wi * dr - wr * di) / den;
            }
        }
        let prod = conmod::spectral::apply_transfer(&sd, &h).unwrap();
        let recon = bases.istft(&prod, wet.len()).unwrap();
        let e = esr(wet.samples(), &recon).unwrap();
        let l = plan.total(wet.samples(), &recon).unwrap();
        println!(
            "wiener delta {delta:.0e}: esr {:.4}% mrsl {:.4} total {:.4}",
            e * 100.0,
            l.mrsl,
            l.total
        );
    }

    // Frame silence profile of the training input.
    let frames = stft.num_frames(dry.len()).unwrap();
    let mut min_rms = f64::INFINITY;
    let mut quiet = 0usize;
    for mi in 0..frames {
        let start = mi * stft.hop;
        let seg = &dry.samples()[start..start + stft.frame_size];
        let rms = (seg.iter().map(|v| v * v).sum::<f64>() / seg.len() as f64).sqrt();
        min_rms = min_rms.min(rms);
        if rms < 1e-4 {
            quiet += 1;
        }
    }
    println!("frames {frames}, min frame rms {min_rms:.2e}, quiet frames {quiet}");

    // Fresh-init model prediction: loss breakdown per resolution and term,
    // against the identity prediction for reference.
    let model = conmod::model::ConmodConfig {
        lstm_hidden: 16,
        mlp_hidden: 128,
        num_hidden_fc: 2,
        bins: 513,
        cond_dim: 1,
        film_hidden: 16,
    };
    let ps = conmod::model::init_weights(&model, 11).unwrap();
    let bank = conmod::model::LfoBank::new(vec![1.0], vec![0.3]).unwrap();
    let renderer = conmod::model::Renderer::new(stft.clone(), model).unwrap();
    let cond = conmod::model::ConditionVector::feedback_only(0.0);
    let pred = renderer.render(&ps, &bank, 1, &cond, &dry).unwrap();
    let fresh = plan.total(wet.samples(), pred.samples()).unwrap();
    println!(
        "fresh-init model: esr {:.2}% mrsl {:.3} total {:.3}",
        fresh.esr * 100.0,
        fresh.mrsl,
        fresh.total
    );
    for &n in &[512usize, 1024, 2048] {
        for (label, p) in [("wet", None), ("dry", Some(dry.samples())), ("pred", Some(pred.samples()))] {
            let mw = conmod::spectral::magnitude_spectrogram(wet.samples(), n).unwrap();
            let mp = conmod::spectral::magnitude_spectrogram(p.unwrap_or(wet.samples()), n).unwrap();
            let cells = mw.len() as f64;
            let lin = (&mp - &mw).mapv(f64::abs).sum() / cells;
            let log = (mp.mapv(f64::ln) - mw.mapv(f64::ln))
                .mapv(f64::abs)
                .sum()
                / cells;
            let floored = mp.iter().filter(|&&v| v < 2e-6).count() as f64 / cells;
            if label == "wet" {
                println!("  fft {n}: wet floor fraction {floored:.3}");
            } else {
                println!(
                    "  fft {n} {label}: lin {lin:.4} log {log:.4} floor frac {floored:.3}"
                );
            }
        }
    }
}

// Identity baselines for the burst-family eval signals: how much does the
// desk phaser change each seeded probe signal.
#[allow(dead_code)]
fn burst_identity_baselines() {
    let tmpl = PhaserOracleConfig {
        stages: 2,
        lfo_freq_hz: 1.0,
        lfo_phase: 0.3,
        feedback: 0.0,
        ..Default::default()
    };
    for seed in [777u64, 42, 5, 99, 1234] {
        for dur in [2.0, 10.0] {
            let dry = conmod::signal::generate_test_signal(dur, 44100, seed).unwrap();
            let wet = EffectKind::Phaser(tmpl.clone()).render(&dry).unwrap();
            let e = esr(wet.samples(), dry.samples()).unwrap() * 100.0;
            println!("seed {seed} dur {dur}: identity ESR {e:.2}%");
        }
    }
}
