//! Scratch: per-group finite-difference errors for the MRSL objective on
//! the toy pipeline, plus the base-point spacing between predicted and
//! target magnitudes (L1 kink proximity).

use std::f64::consts::PI;

use conmod::autodiff::finite_difference_check;
use conmod::loss::{LossPlan, LossWeights};
use conmod::model::{init_weights, predict_transfer_graph, BoundParams, ConmodConfig};
use conmod::signal::generate_test_signal;
use conmod::spectral::{magnitude_spectrogram, SpectralBases, StftConfig, WindowKind};
use ndarray::Array2;

fn main() {
    let eps: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().unwrap())
        .unwrap_or(1e-5);
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
    let len = 88;
    let dry = generate_test_signal(len as f64 / 8000.0, 8000, 4).unwrap();
    let wet = generate_test_signal(len as f64 / 8000.0, 8000, 5).unwrap();
    let plan = LossPlan::new(LossWeights {
        fft_sizes: vec![64],
        ..Default::default()
    })
    .unwrap();
    let prepared = plan.prepare(wet.samples()).unwrap();
    let bases = SpectralBases::build(stft.clone()).unwrap();
    let dry_spec = bases.stft(dry.samples()).unwrap();
    let mut ps = init_weights(&model, 19).unwrap();
    // Probe at conventional weight scale so every group has gradients well
    // above f64 cancellation noise (init shrinks out.w for identity start).
    ps.get_mut("out.w").unwrap().mapv_inplace(|v| v * 100.0);
    let times: Vec<f64> = (0..8).map(|m| m as f64 * 8.0 / 8000.0).collect();

    // Base-point prediction and kink proximity.
    {
        let g = conmod::autodiff::Graph::new();
        let mut bound = Vec::new();
        for (n, v) in ps.iter() {
            bound.push((n.to_string(), g.constant(v.clone())));
        }
        let bp = BoundParams::from_vars(bound);
        let t = g.constant(Array2::from_shape_vec((8, 1), times.clone()).unwrap());
        let lfo = t
            .mul(g.scalar(1.3))
            .unwrap()
            .scale(2.0 * PI)
            .add(g.scalar(0.4))
            .unwrap()
            .sin();
        let fb = g.constant(Array2::from_elem((1, 1), 0.5));
        let emb = g.constant(Array2::from_shape_vec((1, 2), vec![0.1, -0.2]).unwrap());
        let cond = g.concat_cols(&[fb, emb]).unwrap();
        let h = predict_transfer_graph(&g, &bp, &model, lfo, cond).unwrap();
        let sd = bases.constant_spec(&g, &dry_spec);
        let prod = conmod::spectral::apply_transfer_graph(&sd, &h).unwrap();
        let pred = bases.istft_graph(&g, &prod, len).unwrap();
        let pred_samples: Vec<f64> = pred.value().row(0).to_vec();
        let mp = magnitude_spectrogram(&pred_samples, 64).unwrap();
        let mw = magnitude_spectrogram(wet.samples(), 64).unwrap();
        let mut min_gap = f64::INFINITY;
        let mut at_floor = 0;
        for (a, b) in mp.iter().zip(mw.iter()) {
            min_gap = min_gap.min((a - b).abs());
            if *a < 2e-6 || *b < 2e-6 {
                at_floor += 1;
            }
        }
        println!(
            "cells {} min |S_p - S_w| {min_gap:.3e}, near-floor {at_floor}",
            mp.len()
        );
    }

    let mut groups: Vec<String> = ps.names().map(String::from).collect();
    groups.extend(["z_a".into(), "z_b".into(), "c_emb".into()]);
    for name in &groups {
        let probe: Array2<f64> = match name.as_str() {
            "z_a" => Array2::from_elem((1, 1), 1.3),
            "z_b" => Array2::from_elem((1, 1), 0.4),
            "c_emb" => Array2::from_shape_vec((1, 2), vec![0.1, -0.2]).unwrap(),
            n => ps.get(n).unwrap().clone(),
        };
        let err = finite_difference_check(
            |g, vars| {
                let probe = vars[0];
                let mut bound = Vec::new();
                for (n, v) in ps.iter() {
                    let var = if n == name { probe } else { g.constant(v.clone()) };
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
                let t = g.constant(Array2::from_shape_vec((8, 1), times.clone()).unwrap());
                let lfo = t.mul(z_a)?.scale(2.0 * PI).add(z_b)?.sin();
                let fb = g.constant(Array2::from_elem((1, 1), 0.5));
                let cond = g.concat_cols(&[fb, emb])?;
                let h = predict_transfer_graph(g, &bp, &model, lfo, cond)?;
                let sd = bases.constant_spec(g, &dry_spec);
                let prod = conmod::spectral::apply_transfer_graph(&sd, &h)?;
                let pred = bases.istft_graph(g, &prod, len)?;
                plan.mrsl_graph(g, &prepared, pred)
            },
            &[probe],
            eps,
        )
        .unwrap();
        let flag = if err > 1e-3 { "  <-- FAIL" } else { "" };
        println!("mrsl {name}: {err:.3e}{flag}");
    }
}
