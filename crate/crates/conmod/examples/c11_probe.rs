//! Scratch: compare static oracle impulse-response spectra against the
//! closed-form responses, per config and per bin region.

use conmod::oracle::{EffectKind, FlangerOracleConfig, PhaserOracleConfig};
use conmod::signal::AudioBuffer;
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
    fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }
    fn scale(self, s: f64) -> Self {
        Cpx::new(self.re * s, self.im * s)
    }
    fn powi(self, n: usize) -> Self {
        let mut acc = Cpx::new(1.0, 0.0);
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }
}
impl std::ops::Add for Cpx {
    type Output = Cpx;
    fn add(self, o: Cpx) -> Cpx {
        Cpx::new(self.re + o.re, self.im + o.im)
    }
}
impl std::ops::Sub for Cpx {
    type Output = Cpx;
    fn sub(self, o: Cpx) -> Cpx {
        Cpx::new(self.re - o.re, self.im - o.im)
    }
}
impl std::ops::Mul for Cpx {
    type Output = Cpx;
    fn mul(self, o: Cpx) -> Cpx {
        Cpx::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}
impl std::ops::Div for Cpx {
    type Output = Cpx;
    fn div(self, o: Cpx) -> Cpx {
        let d = o.re * o.re + o.im * o.im;
        Cpx::new(
            (self.re * o.re + self.im * o.im) / d,
            (self.im * o.re - self.re * o.im) / d,
        )
    }
}

fn dft_mag(x: &[f64], n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n / 2 + 1);
    for k in 0..=n / 2 {
        let w = 2.0 * PI * k as f64 / n as f64;
        let rot = Cpx::delay(w);
        let mut phase = Cpx::new(1.0, 0.0);
        let mut acc = Cpx::new(0.0, 0.0);
        for &v in &x[..n] {
            acc = acc + phase.scale(v);
            phase = phase * rot;
        }
        out.push(acc.abs());
    }
    out
}

fn main() {
    let sr = 44100u32;
    let n = 8192usize;
    let mut imp = vec![0.0; n];
    imp[0] = 1.0;
    let imp = AudioBuffer::new(imp, sr).unwrap();

    let configs: Vec<(String, EffectKind)> = vec![
        (
            "phaser p0 fb0".into(),
            EffectKind::Phaser(PhaserOracleConfig {
                lfo_freq_hz: 0.0,
                lfo_phase: 0.0,
                feedback: 0.0,
                ..Default::default()
            }),
        ),
        (
            "phaser p.9 fb.5".into(),
            EffectKind::Phaser(PhaserOracleConfig {
                lfo_freq_hz: 0.0,
                lfo_phase: 0.9,
                feedback: 0.5,
                ..Default::default()
            }),
        ),
        (
            "flanger p0 fb0".into(),
            EffectKind::Flanger(FlangerOracleConfig {
                lfo_freq_hz: 0.0,
                lfo_phase: 0.0,
                feedback: 0.0,
                ..Default::default()
            }),
        ),
        (
            "flanger p.9 fb.5".into(),
            EffectKind::Flanger(FlangerOracleConfig {
                lfo_freq_hz: 0.0,
                lfo_phase: 0.9,
                feedback: 0.5,
                ..Default::default()
            }),
        ),
    ];

    for (label, kind) in &configs {
        let resp = kind.render(&imp).unwrap();
        let meas = dft_mag(resp.samples(), n);
        let cf: Vec<f64> = (0..=n / 2)
            .map(|k| {
                let w = 2.0 * PI * k as f64 / n as f64;
                let z1 = Cpx::delay(w);
                let one = Cpx::new(1.0, 0.0);
                match kind {
                    EffectKind::Phaser(cfg) => {
                        let lfo = cfg.lfo_phase.sin();
                        let fb_hz = cfg.center_hz * (cfg.sweep_octaves * lfo).exp2();
                        let t = (PI * fb_hz / sr as f64).tan();
                        let a = (t - 1.0) / (t + 1.0);
                        let ac = Cpx::new(a, 0.0);
                        let ap = (ac + z1) / (one + ac * z1);
                        let cascade = ap.powi(cfg.stages);
                        (Cpx::new(1.0 - cfg.mix, 0.0)
                            + cascade.scale(cfg.mix)
                                / (one - (z1 * cascade).scale(cfg.feedback)))
                        .abs()
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
                        (Cpx::new(1.0 - cfg.mix, 0.0)
                            + (tap / (one - Cpx::delay(w * d_nom).scale(cfg.feedback)))
                                .scale(cfg.mix))
                        .abs()
                    }
                }
            })
            .collect();
        let peak = cf.iter().cloned().fold(0.0f64, f64::max);
        let (mut worst, mut worst_k) = (0.0f64, 0usize);
        for k in 0..=n / 2 {
            let e = (meas[k] - cf[k]).abs();
            if e > worst {
                worst = e;
                worst_k = k;
            }
        }
        let argmin = |v: &[f64]| {
            v.iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap()
        };
        println!(
            "{label}: worst abs err {worst:.4} ({:.2}% of peak {peak:.3}) at k={worst_k}; meas {:.4} cf {:.4}; argmin meas {} cf {}",
            100.0 * worst / peak,
            meas[worst_k],
            cf[worst_k],
            argmin(&meas),
            argmin(&cf)
        );
        for k in [0usize, 64, 256, 1024, 3000] {
            println!("   k={k}: meas {:.5} cf {:.5}", meas[k], cf[k]);
        }
    }
}
