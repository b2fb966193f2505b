//! Scratch: attainability ceilings for the two-effect steering setup.
//! For each (stages, lfo freq, feedback) row, renders the burst probe
//! through (a) the closed-form phaser transfer function sampled at each
//! frame's LFO phase and (b) the per-frame Wiener solution, and reports
//! both ESRs against the oracle. (a) is what a perfectly learned model of
//! this family could reproduce; (b) is the signal-specific floor.

use conmod::loss::esr;
use conmod::oracle::{EffectKind, PhaserOracleConfig};
use conmod::signal::generate_test_signal;
use conmod::spectral::{apply_transfer, SpectralBases, StftConfig, WindowKind};
use std::f64::consts::PI;

#[derive(Clone, Copy)]
struct Cpx {
    re: f64,
    im: f64,
}

impl Cpx {
    fn new(re: f64, im: f64) -> Self {
        Cpx { re, im }
    }
    fn delay(w: f64) -> Self {
        Cpx::new(w.cos(), -w.sin())
    }
    fn scale(self, s: f64) -> Self {
        Cpx::new(self.re * s, self.im * s)
    }
    fn add(self, o: Cpx) -> Self {
        Cpx::new(self.re + o.re, self.im + o.im)
    }
    fn sub(self, o: Cpx) -> Self {
        Cpx::new(self.re - o.re, self.im - o.im)
    }
    fn mul(self, o: Cpx) -> Self {
        Cpx::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
    fn div(self, o: Cpx) -> Self {
        let d = o.re * o.re + o.im * o.im;
        Cpx::new(
            (self.re * o.re + self.im * o.im) / d,
            (self.im * o.re - self.re * o.im) / d,
        )
    }
    fn powi(self, n: usize) -> Self {
        let mut acc = Cpx::new(1.0, 0.0);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }
}

fn phaser_h(cfg: &PhaserOracleConfig, phase: f64, w: f64, sr: f64) -> Cpx {
    let lfo = phase.sin();
    let fb_hz = cfg.center_hz * (cfg.sweep_octaves * lfo).exp2();
    let t = (PI * fb_hz / sr).tan();
    let a = (t - 1.0) / (t + 1.0);
    let ac = Cpx::new(a, 0.0);
    let one = Cpx::new(1.0, 0.0);
    let z1 = Cpx::delay(w);
    let ap = ac.add(z1).div(one.add(ac.mul(z1)));
    let cascade = ap.powi(cfg.stages);
    Cpx::new(1.0 - cfg.mix, 0.0).add(
        cascade
            .scale(cfg.mix)
            .div(one.sub(z1.mul(cascade).scale(cfg.feedback))),
    )
}

fn main() {
    let sr = 44100u32;
    let stft = StftConfig {
        frame_size: 440,
        fft_size: 1024,
        hop: 110,
        window: WindowKind::Hann,
        sample_rate: sr,
    };
    let bases = SpectralBases::build(stft.clone()).unwrap();
    let dry = generate_test_signal(10.0, sr, 777).unwrap();
    let sd = bases.stft(dry.samples()).unwrap();
    let frames = sd.real.nrows();
    let bins = sd.real.ncols();

    for stages in [2usize, 4] {
        for freq in [0.5f64, 1.5] {
            for fb_pct in [0.0f64, 25.0, 50.0, 75.0] {
                let cfg = PhaserOracleConfig {
                    stages,
                    lfo_freq_hz: freq,
                    lfo_phase: 0.3,
                    feedback: fb_pct / 100.0,
                    ..Default::default()
                };
                let wet = EffectKind::Phaser(cfg.clone()).render(&dry).unwrap();

                let mut results = Vec::new();
                for center in [false, true] {
                    let mut h = sd.clone();
                    for m in 0..frames {
                        let off = if center {
                            stft.frame_size as f64 / 2.0
                        } else {
                            0.0
                        };
                        let t_m = (m as f64 * stft.hop as f64 + off) / sr as f64;
                        let phase = 2.0 * PI * freq * t_m + 0.3;
                        for k in 0..bins {
                            let w = 2.0 * PI * k as f64 / stft.fft_size as f64;
                            let v = phaser_h(&cfg, phase, w, sr as f64);
                            h.real[[m, k]] = v.re;
                            h.imag[[m, k]] = v.im;
                        }
                    }
                    let prod = apply_transfer(&sd, &h).unwrap();
                    let pred = bases.istft(&prod, wet.len()).unwrap();
                    results.push(100.0 * esr(wet.samples(), &pred).unwrap());
                }

                let sw = bases.stft(wet.samples()).unwrap();
                let mut h = sd.clone();
                for m in 0..frames {
                    for k in 0..bins {
                        let (dr, di) = (sd.real[[m, k]], sd.imag[[m, k]]);
                        let (wr, wi) = (sw.real[[m, k]], sw.imag[[m, k]]);
                        let den = dr * dr + di * di + 1e-6;
                        h.real[[m, k]] = (wr * dr + wi * di) / den;
                        h.imag[[m, k]] = (wi * dr - wr * di) / den;
                    }
                }
                let prod = apply_transfer(&sd, &h).unwrap();
                let pred = bases.istft(&prod, wet.len()).unwrap();
                let esr_w = 100.0 * esr(wet.samples(), &pred).unwrap();

                println!(
                    "stages {stages} freq {freq} fb {fb_pct:>4}: closed-form start {:.3}% center {:.3}% | wiener {:.3}%",
                    results[0], results[1], esr_w
                );
            }
        }
    }
}
