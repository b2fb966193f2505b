//! Shared helpers for the acceptance suite: criterion reporting with wall
//! clock budgets, a tiny complex type, a naive DFT, and the desk-scale
//! configuration used by the convergence criteria.

use std::time::Instant;

use conmod::model::ConmodConfig;
use conmod::spectral::{StftConfig, WindowKind};

/// One acceptance criterion: times itself, prints a single
/// `ACCEPTANCE C{n} PASS/FAIL` line, and fails the test if the check or
/// the runtime budget fails.
pub struct Criterion {
    n: usize,
    budget_s: f64,
    t0: Instant,
}

impl Criterion {
    pub fn start(n: usize, budget_s: f64) -> Self {
        Criterion {
            n,
            budget_s,
            t0: Instant::now(),
        }
    }

    pub fn elapsed_s(&self) -> f64 {
        self.t0.elapsed().as_secs_f64()
    }

    pub fn finish(self, ok: bool, detail: &str) {
        let elapsed = self.elapsed_s();
        let within = elapsed <= self.budget_s;
        let verdict = if ok && within { "PASS" } else { "FAIL" };
        println!(
            "ACCEPTANCE C{} {} {} ({elapsed:.1}s of {:.0}s budget)",
            self.n, verdict, detail, self.budget_s
        );
        assert!(
            ok,
            "criterion {} failed: {detail} ({elapsed:.1}s)",
            self.n
        );
        assert!(
            within,
            "criterion {} exceeded budget: {elapsed:.1}s > {:.0}s",
            self.n, self.budget_s
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cpx {
    pub re: f64,
    pub im: f64,
}

impl Cpx {
    pub fn new(re: f64, im: f64) -> Self {
        Cpx { re, im }
    }

    /// e^{-j w}
    pub fn delay(w: f64) -> Self {
        Cpx::new(w.cos(), -w.sin())
    }

    pub fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn scale(self, s: f64) -> Self {
        Cpx::new(self.re * s, self.im * s)
    }

    pub fn powi(self, n: usize) -> Self {
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

/// |DFT| of x at bins 0..=n/2, evaluated directly from the definition.
/// Quadratic cost; fine for the signal lengths the suite uses.
pub fn dft_magnitudes(x: &[f64], n: usize) -> Vec<f64> {
    assert!(x.len() >= n, "signal shorter than dft length");
    let mut out = Vec::with_capacity(n / 2 + 1);
    for k in 0..=n / 2 {
        let w = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
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

pub fn desk_stft() -> StftConfig {
    StftConfig {
        frame_size: 440,
        fft_size: 1024,
        hop: 110,
        window: WindowKind::Hann,
        sample_rate: 44100,
    }
}

pub fn desk_model(cond_dim: usize) -> ConmodConfig {
    ConmodConfig {
        lstm_hidden: 16,
        mlp_hidden: 128,
        num_hidden_fc: 2,
        bins: 513,
        cond_dim,
        film_hidden: 16,
    }
}
