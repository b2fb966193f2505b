//! The emulator network: a trainable sinusoid bank drives a single-layer
//! LSTM whose features pass through FiLM-conditioned fully-connected
//! layers, emitting one complex transfer-function row per STFT frame.
//!
//! Everything here is expressed over the autodiff graph; evaluation simply
//! binds weights as constants so no gradient state is kept.

use std::collections::HashMap;

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::signal::AudioBuffer;
use crate::spectral::{apply_transfer_graph, GraphSpec, SpectralBases, StftConfig};

pub const EMBEDDING_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConmodConfig {
    pub lstm_hidden: usize,
    pub mlp_hidden: usize,
    pub num_hidden_fc: usize,
    pub bins: usize,
    /// 1 = feedback scalar only; 3 = feedback plus a 2-d effect embedding.
    pub cond_dim: usize,
    pub film_hidden: usize,
}

impl Default for ConmodConfig {
    fn default() -> Self {
        ConmodConfig {
            lstm_hidden: 32,
            mlp_hidden: 512,
            num_hidden_fc: 2,
            bins: 2049,
            cond_dim: 1,
            film_hidden: 16,
        }
    }
}

impl ConmodConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lstm_hidden == 0
            || self.mlp_hidden == 0
            || self.num_hidden_fc == 0
            || self.bins == 0
            || self.film_hidden == 0
        {
            return Err(Error::invalid("model widths must be positive"));
        }
        if self.cond_dim != 1 && self.cond_dim != 1 + EMBEDDING_DIM {
            return Err(Error::invalid(format!(
                "cond_dim must be 1 or {}, got {}",
                1 + EMBEDDING_DIM,
                self.cond_dim
            )));
        }
        Ok(())
    }

    pub fn uses_embedding(&self) -> bool {
        self.cond_dim == 1 + EMBEDDING_DIM
    }

    /// Exact count of trainable network scalars. The LFO bank and effect
    /// embeddings are reported separately by the trainer.
    pub fn count_parameters(&self) -> usize {
        let h = self.lstm_hidden;
        let m = self.mlp_hidden;
        let lstm = 4 * h * (1 + h + 1); // w_ih + w_hh + bias, gate width 4h
        let fc0 = h * m + m;
        let fc_mid = (self.num_hidden_fc - 1) * (m * m + m);
        let out = m * 2 * self.bins + 2 * self.bins;
        let film_site =
            self.cond_dim * self.film_hidden + self.film_hidden + self.film_hidden * 2 * m + 2 * m;
        lstm + fc0 + fc_mid + out + self.num_hidden_fc * film_site
    }
}

/// Trainable LFO parameters: one (frequency, phase) pair per training
/// condition, used unchanged when rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfoBank {
    pub freqs_hz: Vec<f64>,
    pub phases_rad: Vec<f64>,
}

impl LfoBank {
    pub fn new(freqs_hz: Vec<f64>, phases_rad: Vec<f64>) -> Result<Self> {
        let bank = LfoBank {
            freqs_hz,
            phases_rad,
        };
        bank.validate()?;
        Ok(bank)
    }

    pub fn validate(&self) -> Result<()> {
        if self.freqs_hz.is_empty() || self.freqs_hz.len() != self.phases_rad.len() {
            return Err(Error::invalid(
                "lfo bank needs equal, nonzero frequency and phase counts",
            ));
        }
        if self
            .freqs_hz
            .iter()
            .chain(self.phases_rad.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("lfo bank entries must be finite"));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.freqs_hz.len()
    }
}

/// Conditioning input: normalized feedback, plus the effect embedding in
/// multi-effect mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionVector {
    pub c_fb: f64,
    pub c_emb: Option<[f64; EMBEDDING_DIM]>,
}

impl ConditionVector {
    pub fn feedback_only(c_fb: f64) -> Self {
        ConditionVector { c_fb, c_emb: None }
    }

    pub fn with_embedding(c_fb: f64, emb: [f64; EMBEDDING_DIM]) -> Self {
        ConditionVector {
            c_fb,
            c_emb: Some(emb),
        }
    }

    /// 1 x cond_dim row, checked against the model configuration.
    pub fn to_row(&self, cond_dim: usize) -> Result<Array2<f64>> {
        if !self.c_fb.is_finite() {
            return Err(Error::invalid("condition feedback must be finite"));
        }
        match (cond_dim, self.c_emb) {
            (1, None) => Ok(Array2::from_elem((1, 1), self.c_fb)),
            (d, Some(e)) if d == 1 + EMBEDDING_DIM => {
                let mut row = Vec::with_capacity(d);
                row.push(self.c_fb);
                row.extend_from_slice(&e);
                Ok(Array2::from_shape_vec((1, d), row).expect("cond row"))
            }
            _ => Err(Error::invalid(format!(
                "condition vector does not match cond_dim {cond_dim}: embedding {}",
                if self.c_emb.is_some() {
                    "present"
                } else {
                    "absent"
                }
            ))),
        }
    }
}

/// Named parameter tensors in stable insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, Array2<f64>)>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array2<f64>) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::invalid(format!("duplicate parameter {name}")));
        }
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push((name, value));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Array2<f64>> {
        self.index
            .get(name)
            .map(|&i| &self.entries[i].1)
            .ok_or_else(|| Error::invalid(format!("unknown parameter {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Array2<f64>> {
        match self.index.get(name) {
            Some(&i) => Ok(&mut self.entries[i].1),
            None => Err(Error::invalid(format!("unknown parameter {name}"))),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.entries.iter().map(|(n, v)| (n.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|(_, v)| v.len()).sum()
    }
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
}

/// Fresh network weights. FC and LSTM tensors draw uniform +-1/sqrt(fan_in)
/// (hidden width for the LSTM); each FiLM site starts as an exact identity:
/// its output weights are zero and its output bias is [1..1 | 0..0], so an
/// untrained network ignores the conditioning input.
pub fn init_weights(cfg: &ConmodConfig, seed: u64) -> Result<ParamSet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ps = ParamSet::new();
    let h = cfg.lstm_hidden;
    let m = cfg.mlp_hidden;

    let kl = 1.0 / (h as f64).sqrt();
    ps.insert("lstm.w_ih", uniform(&mut rng, 1, 4 * h, kl))?;
    ps.insert("lstm.w_hh", uniform(&mut rng, h, 4 * h, kl))?;
    ps.insert("lstm.b", uniform(&mut rng, 1, 4 * h, kl))?;

    for i in 0..cfg.num_hidden_fc {
        let fan_in = if i == 0 { h } else { m };
        let k = 1.0 / (fan_in as f64).sqrt();
        ps.insert(format!("fc{i}.w"), uniform(&mut rng, fan_in, m, k))?;
        ps.insert(format!("fc{i}.b"), uniform(&mut rng, 1, m, k))?;
        let kc = 1.0 / (cfg.cond_dim as f64).sqrt();
        ps.insert(
            format!("film{i}.w1"),
            uniform(&mut rng, cfg.cond_dim, cfg.film_hidden, kc),
        )?;
        ps.insert(format!("film{i}.b1"), uniform(&mut rng, 1, cfg.film_hidden, kc))?;
        ps.insert(format!("film{i}.w2"), Array2::zeros((cfg.film_hidden, 2 * m)))?;
        let mut b2 = Array2::zeros((1, 2 * m));
        b2.slice_mut(ndarray::s![.., ..m]).fill(1.0);
        ps.insert(format!("film{i}.b2"), b2)?;
    }

    // The transfer head starts near identity, mirroring the FiLM layers:
    // bias [1,..,1 | 0,..,0] puts H at 1+0j and the weights are shrunk a
    // hundredfold so the first prediction is the dry signal plus a small
    // perturbation instead of noise at full init scale. Keeping the
    // weights nonzero keeps every upstream gradient path live from the
    // first step.
    let k = 0.01 / (m as f64).sqrt();
    ps.insert("out.w", uniform(&mut rng, m, 2 * cfg.bins, k))?;
    let mut ob = Array2::zeros((1, 2 * cfg.bins));
    ob.slice_mut(ndarray::s![.., ..cfg.bins]).fill(1.0);
    ps.insert("out.b", ob)?;

    debug_assert_eq!(ps.num_scalars(), cfg.count_parameters());
    Ok(ps)
}

/// Parameter tensors lifted into a graph, addressable by name.
pub struct BoundParams<'g> {
    vars: Vec<(String, Var<'g>)>,
    index: HashMap<String, usize>,
}

impl<'g> BoundParams<'g> {
    /// Assemble from explicit (name, var) bindings. Lets callers mix
    /// trainable and constant tensors in one set, e.g. to probe a single
    /// group while freezing the rest.
    pub fn from_vars(vars: Vec<(String, Var<'g>)>) -> Self {
        let index = vars
            .iter()
            .enumerate()
            .map(|(i, (n, _))| (n.clone(), i))
            .collect();
        BoundParams { vars, index }
    }

    pub fn get(&self, name: &str) -> Result<Var<'g>> {
        self.index
            .get(name)
            .map(|&i| self.vars[i].1)
            .ok_or_else(|| Error::invalid(format!("unbound parameter {name}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var<'g>)> {
        self.vars.iter().map(|(n, v)| (n.as_str(), *v))
    }
}

/// Lift every tensor of `ps` into `g`; trainable bindings participate in
/// backward, constant bindings never allocate gradient state.
pub fn bind_params<'g>(g: &'g Graph, ps: &ParamSet, trainable: bool) -> BoundParams<'g> {
    let mut vars = Vec::with_capacity(ps.len());
    let mut index = HashMap::new();
    for (name, value) in ps.iter() {
        let var = if trainable {
            g.param(value.clone())
        } else {
            g.constant(value.clone())
        };
        index.insert(name.to_string(), vars.len());
        vars.push((name.to_string(), var));
    }
    BoundParams { vars, index }
}

/// Frame times m·hop/sample_rate as an M x 1 constant.
fn frame_times<'g>(g: &'g Graph, m: usize, hop: usize, sample_rate: u32) -> Var<'g> {
    let t: Vec<f64> = (0..m)
        .map(|i| i as f64 * hop as f64 / sample_rate as f64)
        .collect();
    g.constant(Array2::from_shape_vec((m, 1), t).expect("time column"))
}

/// Differentiable LFO sequence s[m] = sin(2π·f·t_m + φ) from 1x1 frequency
/// and phase variables.
pub fn lfo_frames_graph<'g>(
    g: &'g Graph,
    freq_hz: Var<'g>,
    phase_rad: Var<'g>,
    num_frames: usize,
    hop: usize,
    sample_rate: u32,
) -> Result<Var<'g>> {
    if num_frames == 0 || hop == 0 || sample_rate == 0 {
        return Err(Error::invalid("lfo sequence needs positive frames, hop, rate"));
    }
    if freq_hz.shape() != (1, 1) || phase_rad.shape() != (1, 1) {
        return Err(Error::invalid("lfo frequency and phase must be 1x1"));
    }
    let t = frame_times(g, num_frames, hop, sample_rate);
    Ok(t
        .mul(freq_hz)?
        .scale(2.0 * std::f64::consts::PI)
        .add(phase_rad)?
        .sin())
}

/// Plain LFO sequence for bank entry `index` (1-based, matching condition
/// numbering in datasets).
pub fn lfo_frames(
    bank: &LfoBank,
    index: usize,
    num_frames: usize,
    hop: usize,
    sample_rate: u32,
) -> Result<Vec<f64>> {
    bank.validate()?;
    if index == 0 || index > bank.n() {
        return Err(Error::invalid(format!(
            "lfo index {index} out of range 1..={}",
            bank.n()
        )));
    }
    let f = bank.freqs_hz[index - 1];
    let p = bank.phases_rad[index - 1];
    // Same operation order as the graph path so both agree bitwise.
    Ok((0..num_frames)
        .map(|m| {
            let t = m as f64 * hop as f64 / sample_rate as f64;
            (2.0 * std::f64::consts::PI * (t * f) + p).sin()
        })
        .collect())
}

/// Single-layer LSTM over an M x 1 sequence, zero initial state, gates in
/// i, f, g, o order.
fn lstm_forward<'g>(
    g: &'g Graph,
    bp: &BoundParams<'g>,
    cfg: &ConmodConfig,
    seq: Var<'g>,
) -> Result<Var<'g>> {
    let (m, w) = seq.shape();
    if w != 1 {
        return Err(Error::shape("lstm input", (m, w), (m, 1)));
    }
    let h = cfg.lstm_hidden;
    let w_ih = bp.get("lstm.w_ih")?;
    let w_hh = bp.get("lstm.w_hh")?;
    let b = bp.get("lstm.b")?;
    let mut hid = g.constant(Array2::zeros((1, h)));
    let mut cell = g.constant(Array2::zeros((1, h)));
    let mut rows = Vec::with_capacity(m);
    for step in 0..m {
        let x = seq.slice_rows(step, 1)?;
        let gates = x.matmul(w_ih)?.add(hid.matmul(w_hh)?)?.add(b)?;
        let i = gates.slice_cols(0, h)?.sigmoid();
        let f = gates.slice_cols(h, h)?.sigmoid();
        let c_hat = gates.slice_cols(2 * h, h)?.tanh();
        let o = gates.slice_cols(3 * h, h)?.sigmoid();
        cell = f.mul(cell)?.add(i.mul(c_hat)?)?;
        hid = o.mul(cell.tanh())?;
        rows.push(hid);
    }
    g.concat_rows(&rows)
}

/// One FiLM site: a two-layer conditioning net (tanh hidden) emits
/// [gamma | beta]; features are scaled and shifted per column.
fn film<'g>(
    g: &'g Graph,
    bp: &BoundParams<'g>,
    site: usize,
    feats: Var<'g>,
    cond: Var<'g>,
) -> Result<Var<'g>> {
    let _ = g;
    let width = feats.shape().1;
    let hidden = cond
        .matmul(bp.get(&format!("film{site}.w1"))?)?
        .add(bp.get(&format!("film{site}.b1"))?)?
        .tanh();
    let gamma_beta = hidden
        .matmul(bp.get(&format!("film{site}.w2"))?)?
        .add(bp.get(&format!("film{site}.b2"))?)?;
    if gamma_beta.shape().1 != 2 * width {
        return Err(Error::shape(
            "film output",
            gamma_beta.shape(),
            (1, 2 * width),
        ));
    }
    let gamma = gamma_beta.slice_cols(0, width)?;
    let beta = gamma_beta.slice_cols(width, width)?;
    feats.mul(gamma)?.add(beta)
}

/// Per-frame complex transfer function H (M x bins real and imaginary).
pub fn predict_transfer_graph<'g>(
    g: &'g Graph,
    bp: &BoundParams<'g>,
    cfg: &ConmodConfig,
    lfo: Var<'g>,
    cond: Var<'g>,
) -> Result<GraphSpec<'g>> {
    cfg.validate()?;
    if cond.shape() != (1, cfg.cond_dim) {
        return Err(Error::shape("condition row", cond.shape(), (1, cfg.cond_dim)));
    }
    let mut x = lstm_forward(g, bp, cfg, lfo)?;
    for i in 0..cfg.num_hidden_fc {
        x = x
            .matmul(bp.get(&format!("fc{i}.w"))?)?
            .add(bp.get(&format!("fc{i}.b"))?)?
            .tanh();
        x = film(g, bp, i, x, cond)?;
    }
    let out = x.matmul(bp.get("out.w")?)?.add(bp.get("out.b")?)?;
    Ok(GraphSpec {
        re: out.slice_cols(0, cfg.bins)?,
        im: out.slice_cols(cfg.bins, cfg.bins)?,
    })
}

/// Plain-value transfer prediction (weights bound as constants).
pub fn predict_transfer(
    params: &ParamSet,
    cfg: &ConmodConfig,
    lfo: &[f64],
    cond: &ConditionVector,
) -> Result<crate::spectral::ComplexSpectrogram> {
    let g = Graph::new();
    let bp = bind_params(&g, params, false);
    let lfo_var = g.constant(
        Array2::from_shape_vec((lfo.len(), 1), lfo.to_vec())
            .map_err(|_| Error::invalid("lfo sequence must be nonempty"))?,
    );
    let cond_var = g.constant(cond.to_row(cfg.cond_dim)?);
    let h = predict_transfer_graph(&g, &bp, cfg, lfo_var, cond_var)?;
    crate::spectral::ComplexSpectrogram::new(h.re.value(), h.im.value())
}

/// Frozen-weight renderer: dry in, emulated wet out.
pub struct Renderer {
    pub bases: SpectralBases,
    pub model_cfg: ConmodConfig,
}

impl Renderer {
    pub fn new(stft_cfg: StftConfig, model_cfg: ConmodConfig) -> Result<Self> {
        model_cfg.validate()?;
        if model_cfg.bins != stft_cfg.bins() {
            return Err(Error::invalid(format!(
                "model bins {} do not match stft bins {}",
                model_cfg.bins,
                stft_cfg.bins()
            )));
        }
        Ok(Renderer {
            bases: SpectralBases::build(stft_cfg)?,
            model_cfg,
        })
    }

    /// Render through bank entry `index` (1-based).
    pub fn render(
        &self,
        params: &ParamSet,
        bank: &LfoBank,
        index: usize,
        cond: &ConditionVector,
        dry: &AudioBuffer,
    ) -> Result<AudioBuffer> {
        bank.validate()?;
        if index == 0 || index > bank.n() {
            return Err(Error::invalid(format!(
                "lfo index {index} out of range 1..={}",
                bank.n()
            )));
        }
        self.render_with_lfo(
            params,
            bank.freqs_hz[index - 1],
            bank.phases_rad[index - 1],
            cond,
            dry,
        )
    }

    /// Render with an explicit LFO frequency and phase (evaluation probes).
    pub fn render_with_lfo(
        &self,
        params: &ParamSet,
        freq_hz: f64,
        phase_rad: f64,
        cond: &ConditionVector,
        dry: &AudioBuffer,
    ) -> Result<AudioBuffer> {
        if dry.sample_rate() != self.bases.cfg.sample_rate {
            return Err(Error::invalid(format!(
                "dry sample rate {} does not match pipeline rate {}",
                dry.sample_rate(),
                self.bases.cfg.sample_rate
            )));
        }
        let m = self.bases.cfg.num_frames(dry.len())?;
        let g = Graph::new();
        let bp = bind_params(&g, params, false);
        let lfo = lfo_frames_graph(
            &g,
            g.scalar(freq_hz),
            g.scalar(phase_rad),
            m,
            self.bases.cfg.hop,
            self.bases.cfg.sample_rate,
        )?;
        let cond_var = g.constant(cond.to_row(self.model_cfg.cond_dim)?);
        let h = predict_transfer_graph(&g, &bp, &self.model_cfg, lfo, cond_var)?;
        let dry_spec = self.bases.stft(dry.samples())?;
        let dry_vars = self.bases.constant_spec(&g, &dry_spec);
        let wet = apply_transfer_graph(&dry_vars, &h)?;
        let out = self.bases.istft_graph(&g, &wet, dry.len())?;
        let row = out.value();
        AudioBuffer::new(row.row(0).to_vec(), dry.sample_rate())
    }
}
