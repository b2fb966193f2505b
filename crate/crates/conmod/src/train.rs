//! Dataset-driven training: per-condition stop-gradient routing over the
//! LFO bank, Adam with per-epoch exponential learning-rate decay, pilot /
//! perturbed / exact LFO initialization, newline-delimited JSON metrics,
//! and binary checkpoints (JSON header + raw little-endian f64 payload).

use std::collections::BTreeMap;
use std::io::{Read, Write as IoWrite};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Graph;
use crate::error::{Error, Result};
use crate::loss::{LossPlan, LossWeights, PreparedTarget};
use crate::model::{
    bind_params, init_weights, lfo_frames_graph, predict_transfer_graph, ConmodConfig, LfoBank,
    ParamSet, EMBEDDING_DIM,
};
use crate::oracle::DatasetManifest;
use crate::spectral::{apply_transfer_graph, ComplexSpectrogram, SpectralBases, StftConfig};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;
const CHECKPOINT_MAGIC: &[u8; 8] = b"CONMODCK";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const METRICS_FILE: &str = "metrics.ndjson";

/// How the LFO bank starts relative to the dataset's labeled conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
pub enum LfoInit {
    /// Frequencies and phases taken from the labels unchanged.
    Exact,
    /// Labeled frequencies scaled by (1 + u), u uniform in +-sigma_rel.
    Perturbed { sigma_rel: f64 },
    /// A short single-condition fit per distinct frequency estimates
    /// (frequency, phase) before the joint run; phases start at zero.
    Pilot { epochs: usize },
}

impl Default for LfoInit {
    fn default() -> Self {
        LfoInit::Exact
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub initial_lr: f64,
    pub lr_decay_gamma: f64,
    /// Fixed at 1: the optimizer state is sequential per condition.
    pub batch_size: usize,
    pub loss_weights: LossWeights,
    pub seed: u64,
    pub lfo_init: LfoInit,
    /// Save a checkpoint every this many epochs (0 = final only).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10_000,
            initial_lr: 0.001,
            lr_decay_gamma: 0.9997,
            batch_size: 1,
            loss_weights: LossWeights::default(),
            seed: 0,
            lfo_init: LfoInit::Exact,
            checkpoint_every: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size != 1 {
            return Err(Error::invalid("batch_size is fixed at 1"));
        }
        if !(self.initial_lr.is_finite() && self.initial_lr > 0.0) {
            return Err(Error::invalid("initial_lr must be positive"));
        }
        if !(self.lr_decay_gamma > 0.0 && self.lr_decay_gamma <= 1.0) {
            return Err(Error::invalid("lr_decay_gamma must be in (0, 1]"));
        }
        if let LfoInit::Perturbed { sigma_rel } = self.lfo_init {
            if !(sigma_rel.is_finite() && sigma_rel >= 0.0) {
                return Err(Error::invalid("perturbation sigma_rel must be nonnegative"));
            }
        }
        self.loss_weights.validate()
    }
}

/// lr after `epoch` full epochs: initial_lr * gamma^epoch.
pub fn learning_rate(cfg: &TrainConfig, epoch: usize) -> f64 {
    cfg.initial_lr * cfg.lr_decay_gamma.powi(epoch as i32)
}

/// Adam moments for one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Array2<f64>,
    pub v: Array2<f64>,
    pub t: u64,
}

/// Adam keyed by parameter name. Parameters whose gradient is absent on a
/// step are skipped entirely: no moment decay, no step-count increment, so
/// a routed-away parameter stays bitwise untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub states: BTreeMap<String, AdamState>,
}

impl Default for Adam {
    fn default() -> Self {
        Adam::new()
    }
}

impl Adam {
    pub fn new() -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            states: BTreeMap::new(),
        }
    }

    pub fn apply(&mut self, name: &str, value: &mut Array2<f64>, grad: &Array2<f64>, lr: f64) {
        let st = self.states.entry(name.to_string()).or_insert_with(|| AdamState {
            m: Array2::zeros(grad.dim()),
            v: Array2::zeros(grad.dim()),
            t: 0,
        });
        st.t += 1;
        let b1 = self.beta1;
        let b2 = self.beta2;
        ndarray::Zip::from(&mut st.m)
            .and(grad)
            .for_each(|m, &g| *m = b1 * *m + (1.0 - b1) * g);
        ndarray::Zip::from(&mut st.v)
            .and(grad)
            .for_each(|v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
        let bc1 = 1.0 - b1.powi(st.t as i32);
        let bc2 = 1.0 - b2.powi(st.t as i32);
        let eps = self.eps;
        ndarray::Zip::from(value)
            .and(&st.m)
            .and(&st.v)
            .for_each(|w, &m, &v| *w -= lr * (m / bc1) / ((v / bc2).sqrt() + eps));
    }
}

/// Everything needed to resume training or run evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    pub model_cfg: ConmodConfig,
    pub stft_cfg: StftConfig,
    pub train_cfg: TrainConfig,
    /// Network weights plus `lfo.{i}.freq`, `lfo.{i}.phase`, `emb.{id}`.
    pub params: ParamSet,
    pub adam: BTreeMap<String, AdamState>,
    /// Dataset effect ids in first-appearance order.
    pub effect_ids: Vec<String>,
    /// Labeled (frequency, phase) per bank entry, before any training.
    pub bank_labels: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct AdamMeta {
    name: String,
    rows: usize,
    cols: usize,
    t: u64,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    schema_version: u32,
    epoch: usize,
    model_cfg: ConmodConfig,
    stft_cfg: StftConfig,
    train_cfg: TrainConfig,
    effect_ids: Vec<String>,
    bank_labels: Vec<(f64, f64)>,
    tensors: Vec<TensorMeta>,
    adam: Vec<AdamMeta>,
}

fn write_array(out: &mut Vec<u8>, a: &Array2<f64>) {
    for &v in a.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn read_array(
    bytes: &[u8],
    offset: &mut usize,
    rows: usize,
    cols: usize,
    path: &Path,
) -> Result<Array2<f64>> {
    let need = rows * cols * 8;
    if *offset + need > bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} is truncated: needed {} payload bytes at offset {}",
            path.display(),
            need,
            *offset
        )));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows * cols {
        let at = *offset + i * 8;
        data.push(f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()));
    }
    *offset += need;
    Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| Error::Checkpoint(format!("{}: bad tensor shape: {e}", path.display())))
}

impl Checkpoint {
    pub fn num_lfo(&self) -> usize {
        self.bank_labels.len()
    }

    /// Current (trained) LFO bank values.
    pub fn bank(&self) -> Result<LfoBank> {
        let n = self.num_lfo();
        let mut freqs = Vec::with_capacity(n);
        let mut phases = Vec::with_capacity(n);
        for i in 0..n {
            freqs.push(self.params.get(&format!("lfo.{i}.freq"))?[[0, 0]]);
            phases.push(self.params.get(&format!("lfo.{i}.phase"))?[[0, 0]]);
        }
        LfoBank::new(freqs, phases)
    }

    pub fn embedding(&self, effect_id: &str) -> Result<[f64; EMBEDDING_DIM]> {
        let e = self.params.get(&format!("emb.{effect_id}"))?;
        if e.dim() != (1, EMBEDDING_DIM) {
            return Err(Error::Checkpoint(format!(
                "embedding for {effect_id} has shape {:?}",
                e.dim()
            )));
        }
        Ok([e[[0, 0]], e[[0, 1]]])
    }

    /// Atomic save: temp file in the target directory, then rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = CheckpointHeader {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            epoch: self.epoch,
            model_cfg: self.model_cfg.clone(),
            stft_cfg: self.stft_cfg.clone(),
            train_cfg: self.train_cfg.clone(),
            effect_ids: self.effect_ids.clone(),
            bank_labels: self.bank_labels.clone(),
            tensors: self
                .params
                .iter()
                .map(|(n, a)| TensorMeta {
                    name: n.to_string(),
                    rows: a.nrows(),
                    cols: a.ncols(),
                })
                .collect(),
            adam: self
                .adam
                .iter()
                .map(|(n, s)| AdamMeta {
                    name: n.clone(),
                    rows: s.m.nrows(),
                    cols: s.m.ncols(),
                    t: s.t,
                })
                .collect(),
        };
        let header_json = serde_json::to_vec(&header)?;
        let mut payload = Vec::new();
        for (_, a) in self.params.iter() {
            write_array(&mut payload, a);
        }
        for s in self.adam.values() {
            write_array(&mut payload, &s.m);
            write_array(&mut payload, &s.v);
        }

        let mut bytes = Vec::with_capacity(16 + header_json.len() + payload.len());
        bytes.extend_from_slice(CHECKPOINT_MAGIC);
        bytes.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
        bytes.extend_from_slice(&header_json);
        bytes.extend_from_slice(&payload);

        let tmp = path.with_extension("bin.tmp");
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .map_err(|e| Error::Checkpoint(format!("cannot open {}: {e}", path.display())))?
            .read_to_end(&mut bytes)?;
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(format!(
                "{} is not a checkpoint (bad magic)",
                path.display()
            )));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        if 16 + header_len > bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} is truncated: header of {} bytes does not fit",
                path.display(),
                header_len
            )));
        }
        let header: CheckpointHeader = serde_json::from_slice(&bytes[16..16 + header_len])
            .map_err(|e| Error::Checkpoint(format!("{}: bad header: {e}", path.display())))?;
        if header.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::Checkpoint(format!(
                "{}: schema version {} (this build reads {})",
                path.display(),
                header.schema_version,
                CHECKPOINT_SCHEMA_VERSION
            )));
        }
        let mut offset = 16 + header_len;
        let mut params = ParamSet::new();
        for t in &header.tensors {
            params.insert(&t.name, read_array(&bytes, &mut offset, t.rows, t.cols, path)?)?;
        }
        let mut adam = BTreeMap::new();
        for a in &header.adam {
            let m = read_array(&bytes, &mut offset, a.rows, a.cols, path)?;
            let v = read_array(&bytes, &mut offset, a.rows, a.cols, path)?;
            adam.insert(a.name.clone(), AdamState { m, v, t: a.t });
        }
        if offset != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} has {} trailing bytes",
                path.display(),
                bytes.len() - offset
            )));
        }
        Ok(Checkpoint {
            epoch: header.epoch,
            model_cfg: header.model_cfg,
            stft_cfg: header.stft_cfg,
            train_cfg: header.train_cfg,
            params,
            adam,
            effect_ids: header.effect_ids,
            bank_labels: header.bank_labels,
        })
    }
}

/// One epoch's metrics record, appended as a JSON line.
#[derive(Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss: f64,
    pub per_condition: Vec<ConditionRecord>,
    pub z_a: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub effect_id: String,
    pub lfo_freq_hz: f64,
    pub feedback_pct: f64,
    pub loss: f64,
    pub esr: f64,
}

struct TrainEntry {
    label: String,
    effect_id: String,
    lfo_freq_hz: f64,
    feedback_pct: f64,
    bank_index: usize,
    c_fb: f64,
    prepared: PreparedTarget,
}

/// Loaded dataset plus designated configuration, ready to run.
pub struct Trainer {
    model_cfg: ConmodConfig,
    stft_cfg: StftConfig,
    train_cfg: TrainConfig,
    bases: SpectralBases,
    plan: LossPlan,
    dry: Vec<f64>,
    dry_spec: ComplexSpectrogram,
    num_frames: usize,
    entries: Vec<TrainEntry>,
    effect_ids: Vec<String>,
    bank_labels: Vec<(f64, f64)>,
}

struct StepStats {
    loss: f64,
    esr: f64,
}

/// Snapshot handed to a [`Trainer::run_observed`] callback after each
/// optimizer step. `params` reflects the state just written by that step;
/// `bank_index` is the LFO bank entry the active condition routes to.
pub struct StepEvent<'a> {
    pub epoch: usize,
    pub step: usize,
    pub effect_id: &'a str,
    pub lfo_freq_hz: f64,
    pub feedback_pct: f64,
    pub bank_index: usize,
    pub params: &'a ParamSet,
    pub loss: f64,
}

impl Trainer {
    pub fn new(
        manifest: &DatasetManifest,
        model_cfg: ConmodConfig,
        stft_cfg: StftConfig,
        train_cfg: TrainConfig,
    ) -> Result<Self> {
        manifest.validate()?;
        model_cfg.validate()?;
        stft_cfg.validate()?;
        train_cfg.validate()?;
        if model_cfg.bins != stft_cfg.bins() {
            return Err(Error::invalid(format!(
                "model bins {} do not match stft bins {}",
                model_cfg.bins,
                stft_cfg.bins()
            )));
        }

        let first = manifest
            .entries
            .first()
            .ok_or_else(|| Error::invalid("manifest has no conditions to train on"))?;
        if manifest
            .entries
            .iter()
            .any(|e| e.dry_path != first.dry_path)
        {
            return Err(Error::invalid(
                "all conditions must share one dry signal",
            ));
        }
        let dry_buf = crate::signal::wav_read(&first.dry_path)?;
        if dry_buf.sample_rate() != stft_cfg.sample_rate {
            return Err(Error::invalid(format!(
                "dataset rate {} does not match pipeline rate {}",
                dry_buf.sample_rate(),
                stft_cfg.sample_rate
            )));
        }
        let dry = dry_buf.into_samples();
        let num_frames = stft_cfg.num_frames(dry.len())?;

        let mut effect_ids: Vec<String> = Vec::new();
        let mut bank_labels: Vec<(f64, f64)> = Vec::new();
        for e in &manifest.entries {
            if !effect_ids.iter().any(|id| id == &e.effect_id) {
                effect_ids.push(e.effect_id.clone());
            }
            if let Some(prev) = bank_labels
                .iter()
                .position(|&(f, _)| f.to_bits() == e.lfo_freq_hz.to_bits())
            {
                if bank_labels[prev].1.to_bits() != e.lfo_phase.to_bits() {
                    log::warn!(
                        "conditions at {} Hz carry different phases; keeping the first",
                        e.lfo_freq_hz
                    );
                }
            } else {
                bank_labels.push((e.lfo_freq_hz, e.lfo_phase));
            }
        }
        let required_cond = if effect_ids.len() > 1 {
            1 + EMBEDDING_DIM
        } else {
            1
        };
        if model_cfg.cond_dim != required_cond {
            return Err(Error::invalid(format!(
                "dataset has {} effect(s), needing cond_dim {}, but model has {}",
                effect_ids.len(),
                required_cond,
                model_cfg.cond_dim
            )));
        }

        let plan = LossPlan::new(train_cfg.loss_weights.clone())?;
        let bases = SpectralBases::build(stft_cfg.clone())?;
        let dry_spec = bases.stft(&dry)?;

        let mut entries = Vec::with_capacity(manifest.entries.len());
        for e in &manifest.entries {
            let wet = crate::signal::wav_read(&e.wet_path)?;
            if wet.len() != dry.len() || wet.sample_rate() != stft_cfg.sample_rate {
                return Err(Error::invalid(format!(
                    "wet {} does not match the dry signal's length and rate",
                    e.wet_path
                )));
            }
            let bank_index = bank_labels
                .iter()
                .position(|&(f, _)| f.to_bits() == e.lfo_freq_hz.to_bits())
                .expect("bank label exists");
            entries.push(TrainEntry {
                label: format!(
                    "{} @ {} Hz, feedback {}%",
                    e.effect_id, e.lfo_freq_hz, e.feedback_pct
                ),
                effect_id: e.effect_id.clone(),
                lfo_freq_hz: e.lfo_freq_hz,
                feedback_pct: e.feedback_pct,
                bank_index,
                c_fb: e.feedback_pct / 100.0,
                prepared: plan.prepare(wet.samples())?,
            });
        }

        Ok(Trainer {
            model_cfg,
            stft_cfg,
            train_cfg,
            bases,
            plan,
            dry,
            dry_spec,
            num_frames,
            entries,
            effect_ids,
            bank_labels,
        })
    }

    pub fn num_lfo(&self) -> usize {
        self.bank_labels.len()
    }

    pub fn effect_ids(&self) -> &[String] {
        &self.effect_ids
    }

    fn uses_embedding(&self) -> bool {
        self.model_cfg.uses_embedding()
    }

    /// Initial LFO bank values under the configured strategy.
    fn init_bank(&self) -> Result<Vec<(f64, f64)>> {
        match self.train_cfg.lfo_init {
            LfoInit::Exact => Ok(self.bank_labels.clone()),
            LfoInit::Perturbed { sigma_rel } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.train_cfg.seed ^ 0x706572_74);
                Ok(self
                    .bank_labels
                    .iter()
                    .map(|&(f, p)| {
                        let u = rng.random_range(-sigma_rel..=sigma_rel);
                        (f * (1.0 + u), p)
                    })
                    .collect())
            }
            LfoInit::Pilot { epochs } => self.pilot_bank(epochs),
        }
    }

    /// One short fit per distinct frequency: fresh head, z_a at the label,
    /// z_b at zero, trained jointly on that frequency's lowest-feedback
    /// condition. Only the fitted (z_a, z_b) survive.
    fn pilot_bank(&self, epochs: usize) -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::with_capacity(self.bank_labels.len());
        for (i, &(freq, _)) in self.bank_labels.iter().enumerate() {
            let entry = self
                .entries
                .iter()
                .filter(|e| e.bank_index == i)
                .min_by(|a, b| a.feedback_pct.total_cmp(&b.feedback_pct))
                .ok_or_else(|| Error::invalid("bank entry without conditions"))?;
            let mut cfg = self.model_cfg.clone();
            cfg.cond_dim = 1; // the pilot head is discarded, no embedding
            let mut params = init_weights(&cfg, self.train_cfg.seed ^ (i as u64) << 8)?;
            params.insert("lfo.0.freq", Array2::from_elem((1, 1), freq))?;
            params.insert("lfo.0.phase", Array2::zeros((1, 1)))?;
            let mut adam = Adam::new();
            for e in 0..epochs {
                let lr = learning_rate(&self.train_cfg, e);
                self.step(&cfg, &mut params, &mut adam, entry, 0, 1, false, lr)
                    .map_err(|err| {
                        Error::invalid(format!("pilot fit for {freq} Hz failed: {err}"))
                    })?;
            }
            out.push((
                params.get("lfo.0.freq")?[[0, 0]],
                params.get("lfo.0.phase")?[[0, 0]],
            ));
            log::info!(
                "pilot fit {} Hz -> z_a {:.4}, z_b {:.4}",
                freq,
                out[i].0,
                out[i].1
            );
        }
        Ok(out)
    }

    fn fresh_checkpoint(&self) -> Result<Checkpoint> {
        let mut params = init_weights(&self.model_cfg, self.train_cfg.seed)?;
        for (i, &(f, p)) in self.init_bank()?.iter().enumerate() {
            params.insert(format!("lfo.{i}.freq"), Array2::from_elem((1, 1), f))?;
            params.insert(format!("lfo.{i}.phase"), Array2::from_elem((1, 1), p))?;
        }
        if self.uses_embedding() {
            let mut rng = ChaCha8Rng::seed_from_u64(self.train_cfg.seed ^ 0x656d62);
            for id in &self.effect_ids {
                let e = Array2::from_shape_fn((1, EMBEDDING_DIM), |_| rng.random_range(-1.0..1.0));
                params.insert(format!("emb.{id}"), e)?;
            }
        }
        Ok(Checkpoint {
            epoch: 0,
            model_cfg: self.model_cfg.clone(),
            stft_cfg: self.stft_cfg.clone(),
            train_cfg: self.train_cfg.clone(),
            params,
            adam: BTreeMap::new(),
            effect_ids: self.effect_ids.clone(),
            bank_labels: self.bank_labels.clone(),
        })
    }

    /// One forward/backward/update on `entry`. The LFO bank is routed so
    /// only entry `active` can receive gradient: every other bank entry
    /// joins the concatenated bank through a stop-gradient wrapper, and the
    /// optimizer skips parameters whose gradient is absent.
    #[allow(clippy::too_many_arguments)]
    fn step(
        &self,
        model_cfg: &ConmodConfig,
        params: &mut ParamSet,
        adam: &mut Adam,
        entry: &TrainEntry,
        active: usize,
        bank_n: usize,
        with_embedding: bool,
        lr: f64,
    ) -> Result<StepStats> {
        let g = Graph::new();
        let bp = bind_params(&g, params, true);

        let mut freq_cols = Vec::with_capacity(bank_n);
        let mut phase_cols = Vec::with_capacity(bank_n);
        for j in 0..bank_n {
            let f = bp.get(&format!("lfo.{j}.freq"))?;
            let p = bp.get(&format!("lfo.{j}.phase"))?;
            if j == active {
                freq_cols.push(f);
                phase_cols.push(p);
            } else {
                freq_cols.push(f.stop_gradient());
                phase_cols.push(p.stop_gradient());
            }
        }
        let z_a = g.concat_cols(&freq_cols)?.slice_cols(active, 1)?;
        let z_b = g.concat_cols(&phase_cols)?.slice_cols(active, 1)?;
        let lfo = lfo_frames_graph(
            &g,
            z_a,
            z_b,
            self.num_frames,
            self.stft_cfg.hop,
            self.stft_cfg.sample_rate,
        )?;

        let fb = g.constant(Array2::from_elem((1, 1), entry.c_fb));
        let cond = if with_embedding {
            let emb = bp.get(&format!("emb.{}", entry.effect_id))?;
            g.concat_cols(&[fb, emb])?
        } else {
            fb
        };

        let h = predict_transfer_graph(&g, &bp, model_cfg, lfo, cond)?;
        let dry_vars = self.bases.constant_spec(&g, &self.dry_spec);
        let wet = apply_transfer_graph(&dry_vars, &h)?;
        let pred = self.bases.istft_graph(&g, &wet, self.dry.len())?;
        let loss = self.plan.total_graph(&g, &entry.prepared, pred)?;

        let loss_val = loss.item()?;
        if !loss_val.is_finite() {
            let esr = crate::loss::esr_with_epsilon(
                &entry.prepared.samples,
                pred.value().row(0).as_slice().unwrap_or(&[]),
                self.train_cfg.loss_weights.esr_epsilon,
            )
            .unwrap_or(f64::NAN);
            return Err(Error::NonFinite(format!(
                "loss {loss_val} on condition {} (esr {esr})",
                entry.label
            )));
        }
        g.backward(loss)?;

        let esr = self
            .plan
            .esr_graph(&g, &entry.prepared, pred)?
            .item()?;

        let mut updates: Vec<(String, Array2<f64>)> = Vec::new();
        for (name, var) in bp.iter() {
            if let Some(grad) = var.grad() {
                updates.push((name.to_string(), grad));
            }
        }
        for (name, grad) in updates {
            adam.apply(&name, params.get_mut(&name)?, &grad, lr);
        }
        Ok(StepStats {
            loss: loss_val,
            esr,
        })
    }

    /// Run to `train_cfg.epochs`, optionally continuing from a checkpoint.
    /// Writes metrics and periodic checkpoints into `out_dir` when given.
    pub fn run(&self, out_dir: Option<&Path>, resume: Option<Checkpoint>) -> Result<Checkpoint> {
        self.run_observed(out_dir, resume, |_| {})
    }

    /// Same as [`Trainer::run`] but invokes `observer` after every optimizer
    /// step, with the freshly updated parameters. Useful for live progress
    /// reporting and for inspecting per-step behaviour such as which LFO
    /// bank entry a given condition touches.
    pub fn run_observed(
        &self,
        out_dir: Option<&Path>,
        resume: Option<Checkpoint>,
        mut observer: impl FnMut(&StepEvent),
    ) -> Result<Checkpoint> {
        let mut ckpt = match resume {
            Some(c) => {
                if c.model_cfg != self.model_cfg || c.stft_cfg != self.stft_cfg {
                    return Err(Error::Checkpoint(
                        "checkpoint configuration does not match this run".into(),
                    ));
                }
                if c.bank_labels != self.bank_labels {
                    return Err(Error::Checkpoint(
                        "checkpoint LFO bank does not match this dataset".into(),
                    ));
                }
                c
            }
            None => self.fresh_checkpoint()?,
        };

        let ckpt_path = out_dir.map(|d| d.join(CHECKPOINT_FILE));
        let mut metrics: Option<std::fs::File> = match out_dir {
            Some(d) => {
                std::fs::create_dir_all(d)?;
                Some(
                    std::fs::OpenOptions::new()
                        .create(true)
                        .append(true)
                        .open(d.join(METRICS_FILE))?,
                )
            }
            None => None,
        };

        let n = self.num_lfo();
        let with_emb = self.uses_embedding();
        let mut adam = Adam::new();
        adam.states = ckpt.adam.clone();

        for epoch in ckpt.epoch..self.train_cfg.epochs {
            let lr = learning_rate(&self.train_cfg, epoch);
            let mut order: Vec<usize> = (0..self.entries.len()).collect();
            // Per-epoch stream keyed by (seed, epoch) so a resumed run
            // shuffles identically to an uninterrupted one.
            let mut rng = ChaCha8Rng::seed_from_u64(
                self.train_cfg
                    .seed
                    .wrapping_add((epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            );
            order.shuffle(&mut rng);

            let mut records = Vec::with_capacity(order.len());
            let mut sum = 0.0;
            for &i in &order {
                let entry = &self.entries[i];
                let stats = self
                    .step(
                        &self.model_cfg,
                        &mut ckpt.params,
                        &mut adam,
                        entry,
                        entry.bank_index,
                        n,
                        with_emb,
                        lr,
                    )
                    .map_err(|e| match e {
                        Error::NonFinite(msg) => {
                            Error::NonFinite(format!("epoch {epoch}: {msg}"))
                        }
                        other => other,
                    })?;
                sum += stats.loss;
                observer(&StepEvent {
                    epoch,
                    step: records.len(),
                    effect_id: &entry.effect_id,
                    lfo_freq_hz: entry.lfo_freq_hz,
                    feedback_pct: entry.feedback_pct,
                    bank_index: entry.bank_index,
                    params: &ckpt.params,
                    loss: stats.loss,
                });
                records.push(ConditionRecord {
                    effect_id: entry.effect_id.clone(),
                    lfo_freq_hz: entry.lfo_freq_hz,
                    feedback_pct: entry.feedback_pct,
                    loss: stats.loss,
                    esr: stats.esr,
                });
            }

            ckpt.epoch = epoch + 1;
            ckpt.adam = adam.states.clone();

            if let Some(f) = metrics.as_mut() {
                let z_a = (0..n)
                    .map(|i| Ok(ckpt.params.get(&format!("lfo.{i}.freq"))?[[0, 0]]))
                    .collect::<Result<Vec<f64>>>()?;
                let rec = EpochRecord {
                    epoch: epoch + 1,
                    lr,
                    mean_loss: sum / order.len().max(1) as f64,
                    per_condition: records,
                    z_a,
                };
                writeln!(f, "{}", serde_json::to_string(&rec)?)?;
            }
            if let Some(p) = &ckpt_path {
                let every = self.train_cfg.checkpoint_every;
                if every > 0 && (epoch + 1) % every == 0 && epoch + 1 < self.train_cfg.epochs {
                    ckpt.save(p)?;
                }
            }
        }

        if let Some(p) = &ckpt_path {
            ckpt.save(p)?;
        }
        Ok(ckpt)
    }
}
