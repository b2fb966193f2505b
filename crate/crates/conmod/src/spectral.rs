//! Windowed DFT analysis/synthesis that stays inside the autodiff substrate.
//!
//! The transforms are explicit matrix products against precomputed
//! cosine/sine bases, so every path is differentiable with exact linear-map
//! gradients and the whole pipeline is bit-deterministic. Analysis windows
//! only: synthesis overlap-adds raw inverse frames and divides by the
//! overlap sum of the analysis window, so a transfer function may lengthen
//! a frame's response up to `fft_size` without truncation.

use ndarray::{concatenate, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::autodiff::{complex_mul, Graph, Var};
use crate::error::{Error, Result};

/// Added under the square root of every magnitude so log and sqrt stay
/// differentiable at silence.
pub const EPS_MAG: f64 = 1e-12;

/// Overlap sums below this are treated as uncovered and synthesize zero.
const OLA_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Hann,
    Rect,
}

/// Periodic analysis window (periodic Hann satisfies constant overlap-add
/// at hop = frame/4 with sum exactly 2).
fn window_values(kind: WindowKind, n: usize) -> Vec<f64> {
    match kind {
        WindowKind::Hann => (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
            .collect(),
        WindowKind::Rect => vec![1.0; n],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StftConfig {
    pub frame_size: usize,
    pub fft_size: usize,
    pub hop: usize,
    pub window: WindowKind,
    pub sample_rate: u32,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            frame_size: 1764,
            fft_size: 4096,
            hop: 441,
            window: WindowKind::Hann,
            sample_rate: 44100,
        }
    }
}

impl StftConfig {
    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::invalid("stft sample_rate must be positive"));
        }
        if self.frame_size == 0 || self.hop == 0 {
            return Err(Error::invalid("stft frame_size and hop must be positive"));
        }
        if self.fft_size < self.frame_size {
            return Err(Error::invalid(format!(
                "fft_size {} must be >= frame_size {}",
                self.fft_size, self.frame_size
            )));
        }
        if self.fft_size % 2 != 0 {
            return Err(Error::invalid("fft_size must be even"));
        }
        if self.frame_size % self.hop != 0 {
            return Err(Error::invalid(format!(
                "hop {} must divide frame_size {}",
                self.hop, self.frame_size
            )));
        }
        // Constant overlap-add: on interior samples every hop offset must
        // collect the same window sum.
        let w = window_values(self.window, self.frame_size);
        let k = self.frame_size / self.hop;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for offset in 0..self.hop {
            let s: f64 = (0..k).map(|i| w[offset + i * self.hop]).sum();
            lo = lo.min(s);
            hi = hi.max(s);
        }
        if hi - lo > 1e-9 {
            return Err(Error::invalid(format!(
                "window violates constant overlap-add at hop {}: sum varies by {:.3e}",
                self.hop,
                hi - lo
            )));
        }
        Ok(())
    }

    /// Frame count for a signal of `len` samples: trailing samples that do
    /// not fill a whole frame are not analyzed.
    pub fn num_frames(&self, len: usize) -> Result<usize> {
        if len < self.frame_size {
            return Err(Error::invalid(format!(
                "signal of {len} samples is shorter than one frame ({})",
                self.frame_size
            )));
        }
        Ok((len - self.frame_size) / self.hop + 1)
    }
}

/// Complex spectrogram as separate real and imaginary M x bins matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub real: Array2<f64>,
    pub imag: Array2<f64>,
}

impl ComplexSpectrogram {
    pub fn new(real: Array2<f64>, imag: Array2<f64>) -> Result<Self> {
        if real.dim() != imag.dim() {
            return Err(Error::shape("complex spectrogram", real.dim(), imag.dim()));
        }
        Ok(ComplexSpectrogram { real, imag })
    }

    pub fn frames(&self) -> usize {
        self.real.nrows()
    }

    pub fn bins(&self) -> usize {
        self.real.ncols()
    }
}

/// Differentiable counterpart of [`ComplexSpectrogram`]: a (real, imag)
/// pair of graph variables.
#[derive(Clone, Copy)]
pub struct GraphSpec<'g> {
    pub re: Var<'g>,
    pub im: Var<'g>,
}

/// Per-entry complex product `S_dry * H` (4-term real formula).
pub fn apply_transfer(s: &ComplexSpectrogram, h: &ComplexSpectrogram) -> Result<ComplexSpectrogram> {
    if s.real.dim() != h.real.dim() {
        return Err(Error::shape("apply_transfer", s.real.dim(), h.real.dim()));
    }
    let real = &s.real * &h.real - &s.imag * &h.imag;
    let imag = &s.real * &h.imag + &s.imag * &h.real;
    ComplexSpectrogram::new(real, imag)
}

pub fn apply_transfer_graph<'g>(s: &GraphSpec<'g>, h: &GraphSpec<'g>) -> Result<GraphSpec<'g>> {
    let (re, im) = complex_mul((s.re, s.im), (h.re, h.im))?;
    Ok(GraphSpec { re, im })
}

/// Precomputed DFT bases for one [`StftConfig`].
///
/// `fwd` is frame_size x 2·bins (`[cos | -sin]` columns): windowed frames
/// times `fwd` gives `[Re | Im]`. `inv` is 2·bins x fft_size; `[Re | Im]`
/// times `inv` gives full-length synthesis frames. Zero-padding to
/// `fft_size` is implicit in using only frame_size basis rows. The sine
/// columns at DC and Nyquist are exactly zero, so spectra of real signals
/// keep exact-zero imaginary parts there.
pub struct SpectralBases {
    pub cfg: StftConfig,
    window: Array1<f64>,
    fwd: Array2<f64>,
    inv: Array2<f64>,
}

/// cos/sin of 2*pi*a*b/n with the product reduced mod n first, keeping
/// trig arguments small and exact for large index products.
fn trig(a: usize, b: usize, n: usize) -> (f64, f64) {
    let m = (a as u64 * b as u64) % (n as u64);
    let ang = 2.0 * std::f64::consts::PI * (m as f64) / (n as f64);
    (ang.cos(), ang.sin())
}

impl SpectralBases {
    pub fn build(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let frame = cfg.frame_size;
        let fft = cfg.fft_size;
        let bins = cfg.bins();
        let nyq = bins - 1;

        let mut fwd = Array2::zeros((frame, 2 * bins));
        for n in 0..frame {
            fwd[[n, 0]] = 1.0; // DC cosine; DC sine column stays exactly 0
            fwd[[n, nyq]] = if n % 2 == 0 { 1.0 } else { -1.0 }; // Nyquist
            for k in 1..nyq {
                let (c, s) = trig(n, k, fft);
                fwd[[n, k]] = c;
                fwd[[n, bins + k]] = -s;
            }
        }

        let mut inv = Array2::zeros((2 * bins, fft));
        let scale = 1.0 / fft as f64;
        for n in 0..fft {
            inv[[0, n]] = scale;
            inv[[nyq, n]] = if n % 2 == 0 { scale } else { -scale };
            for k in 1..nyq {
                let (c, s) = trig(k, n, fft);
                inv[[k, n]] = 2.0 * scale * c;
                inv[[bins + k, n]] = -2.0 * scale * s;
            }
        }

        Ok(SpectralBases {
            window: Array1::from(window_values(cfg.window, frame)),
            cfg,
            fwd,
            inv,
        })
    }

    pub fn bins(&self) -> usize {
        self.cfg.bins()
    }

    fn frames_matrix(&self, x: &[f64]) -> Result<Array2<f64>> {
        let m = self.cfg.num_frames(x.len())?;
        let hop = self.cfg.hop;
        let mut frames = Array2::from_shape_fn((m, self.cfg.frame_size), |(i, j)| x[i * hop + j]);
        frames *= &self.window.view().insert_axis(Axis(0));
        Ok(frames)
    }

    pub fn stft(&self, x: &[f64]) -> Result<ComplexSpectrogram> {
        let spec = self.frames_matrix(x)?.dot(&self.fwd);
        let bins = self.bins();
        ComplexSpectrogram::new(
            spec.slice(ndarray::s![.., ..bins]).to_owned(),
            spec.slice(ndarray::s![.., bins..]).to_owned(),
        )
    }

    /// Inverse DFT of each frame at full `fft_size` length, before
    /// overlap-add. Public for tests and diagnostics.
    pub fn inverse_frames(&self, s: &ComplexSpectrogram) -> Result<Array2<f64>> {
        if s.bins() != self.bins() {
            return Err(Error::shape(
                "inverse_frames",
                (s.frames(), s.bins()),
                (s.frames(), self.bins()),
            ));
        }
        let stacked = concatenate(Axis(1), &[s.real.view(), s.imag.view()])
            .expect("equal row counts");
        Ok(stacked.dot(&self.inv))
    }

    /// Sum of shifted analysis windows over `m` frames, length `out_len`.
    pub fn overlap_sum(&self, m: usize, out_len: usize) -> Vec<f64> {
        let mut ola = vec![0.0; out_len];
        for i in 0..m {
            let off = i * self.cfg.hop;
            for (j, &w) in self.window.iter().enumerate() {
                if off + j < out_len {
                    ola[off + j] += w;
                }
            }
        }
        ola
    }

    fn ola_norm(&self, m: usize, out_len: usize) -> Vec<f64> {
        self.overlap_sum(m, out_len)
            .into_iter()
            .map(|s| if s > OLA_EPS { 1.0 / s } else { 0.0 })
            .collect()
    }

    pub fn istft(&self, s: &ComplexSpectrogram, out_len: usize) -> Result<Vec<f64>> {
        self.check_out_len(s, out_len)?;
        let frames = self.inverse_frames(s)?;
        let mut out = vec![0.0; out_len];
        for i in 0..frames.nrows() {
            let off = i * self.cfg.hop;
            if off >= out_len {
                break;
            }
            let take = (out_len - off).min(frames.ncols());
            for j in 0..take {
                out[off + j] += frames[[i, j]];
            }
        }
        for (v, n) in out.iter_mut().zip(self.ola_norm(s.frames(), out_len)) {
            *v *= n;
        }
        Ok(out)
    }

    fn check_out_len(&self, s: &ComplexSpectrogram, out_len: usize) -> Result<()> {
        let cap = s.frames() * self.cfg.hop + self.cfg.fft_size;
        if out_len == 0 || out_len > cap {
            return Err(Error::invalid(format!(
                "out_len {out_len} outside (0, {cap}] for {} frames",
                s.frames()
            )));
        }
        Ok(())
    }

    // --- differentiable path ---------------------------------------------

    /// STFT of a 1 x len signal variable.
    pub fn stft_graph<'g>(&self, g: &'g Graph, x: Var<'g>) -> Result<GraphSpec<'g>> {
        let frames = g.gather_frames(x, self.cfg.frame_size, self.cfg.hop)?;
        let win = g.constant(
            self.window
                .view()
                .insert_axis(Axis(0))
                .to_owned(),
        );
        let windowed = frames.mul(win)?;
        let spec = windowed.matmul(g.constant(self.fwd.clone()))?;
        let bins = self.bins();
        Ok(GraphSpec {
            re: spec.slice_cols(0, bins)?,
            im: spec.slice_cols(bins, bins)?,
        })
    }

    /// Inverse STFT of a graph spectrogram into a 1 x out_len signal.
    pub fn istft_graph<'g>(
        &self,
        g: &'g Graph,
        s: &GraphSpec<'g>,
        out_len: usize,
    ) -> Result<Var<'g>> {
        let (m, bins) = s.re.shape();
        if bins != self.bins() || s.im.shape() != (m, bins) {
            return Err(Error::shape("istft_graph", s.re.shape(), (m, self.bins())));
        }
        let cap = m * self.cfg.hop + self.cfg.fft_size;
        if out_len == 0 || out_len > cap {
            return Err(Error::invalid(format!(
                "out_len {out_len} outside (0, {cap}] for {m} frames"
            )));
        }
        let stacked = g.concat_cols(&[s.re, s.im])?;
        let frames = stacked.matmul(g.constant(self.inv.clone()))?;
        let raw = g.overlap_add(frames, self.cfg.hop, out_len)?;
        let norm = Array2::from_shape_vec((1, out_len), self.ola_norm(m, out_len))
            .expect("norm shape");
        raw.mul(g.constant(norm))
    }

    /// Dry spectrogram lifted into a graph as constants.
    pub fn constant_spec<'g>(&self, g: &'g Graph, s: &ComplexSpectrogram) -> GraphSpec<'g> {
        GraphSpec {
            re: g.constant(s.real.clone()),
            im: g.constant(s.imag.clone()),
        }
    }
}

/// Magnitude-spectrogram plan: square window of `fft_size` at 75% overlap.
pub struct MagPlan {
    pub fft_size: usize,
    pub hop: usize,
    window: Array1<f64>,
    fwd: Array2<f64>,
}

impl MagPlan {
    pub fn new(fft_size: usize) -> Result<Self> {
        if fft_size == 0 || fft_size % 2 != 0 {
            return Err(Error::invalid("magnitude fft_size must be even and positive"));
        }
        if ![512, 1024, 2048].contains(&fft_size) {
            log::warn!("magnitude fft_size {fft_size} outside the usual {{512, 1024, 2048}}");
        }
        let bins = fft_size / 2 + 1;
        let nyq = bins - 1;
        let mut fwd = Array2::zeros((fft_size, 2 * bins));
        for n in 0..fft_size {
            fwd[[n, 0]] = 1.0;
            fwd[[n, nyq]] = if n % 2 == 0 { 1.0 } else { -1.0 };
            for k in 1..nyq {
                let (c, s) = trig(n, k, fft_size);
                fwd[[n, k]] = c;
                fwd[[n, bins + k]] = -s;
            }
        }
        Ok(MagPlan {
            fft_size,
            hop: fft_size / 4,
            window: Array1::from(window_values(WindowKind::Hann, fft_size)),
            fwd,
        })
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn num_frames(&self, len: usize) -> Result<usize> {
        if len < self.fft_size {
            return Err(Error::invalid(format!(
                "signal of {len} samples is shorter than one frame ({})",
                self.fft_size
            )));
        }
        Ok((len - self.fft_size) / self.hop + 1)
    }

    /// `sqrt(re^2 + im^2 + EPS_MAG)` per frame and bin.
    pub fn magnitude(&self, x: &[f64]) -> Result<Array2<f64>> {
        let m = self.num_frames(x.len())?;
        let mut frames = Array2::from_shape_fn((m, self.fft_size), |(i, j)| x[i * self.hop + j]);
        frames *= &self.window.view().insert_axis(Axis(0));
        let spec = frames.dot(&self.fwd);
        let bins = self.bins();
        let re = spec.slice(ndarray::s![.., ..bins]);
        let im = spec.slice(ndarray::s![.., bins..]);
        let mut mag = Array2::zeros((m, bins));
        ndarray::Zip::from(&mut mag)
            .and(&re)
            .and(&im)
            .for_each(|o, &r, &i| *o = (r * r + i * i + EPS_MAG).sqrt());
        Ok(mag)
    }

    /// Differentiable magnitude of a 1 x len signal variable.
    pub fn magnitude_graph<'g>(&self, g: &'g Graph, x: Var<'g>) -> Result<Var<'g>> {
        let frames = g.gather_frames(x, self.fft_size, self.hop)?;
        let win = g.constant(self.window.view().insert_axis(Axis(0)).to_owned());
        let windowed = frames.mul(win)?;
        let spec = windowed.matmul(g.constant(self.fwd.clone()))?;
        let bins = self.bins();
        let re = spec.slice_cols(0, bins)?;
        let im = spec.slice_cols(bins, bins)?;
        let power = re.mul(re)?.add(im.mul(im)?)?;
        Ok(power.add_scalar(EPS_MAG).sqrt())
    }
}

/// One-shot magnitude spectrogram (builds a plan internally).
pub fn magnitude_spectrogram(x: &[f64], fft_size: usize) -> Result<Array2<f64>> {
    MagPlan::new(fft_size)?.magnitude(x)
}
