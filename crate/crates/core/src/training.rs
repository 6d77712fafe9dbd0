//! Single- and multi-problem training with RMSprop, validation-gap model
//! selection, early stopping and few-step fine-tuning.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassData, Instance};
use crate::encoding::{batch, HeteroGraph};
use crate::error::{Error, Result};
use crate::loss::{loss_and_grad, LossConfig};
use crate::metrics::evaluate;
use crate::model::{gradient, l2_norm, Checkpoint, Gradient, ModelParams};
use crate::problems::ProblemClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrainMode {
    #[serde(rename = "SINGLE")]
    Single,
    #[serde(rename = "MULTI_ERM")]
    MultiErm,
    #[serde(rename = "MULTI_STATIC")]
    MultiStatic,
    #[serde(rename = "MULTI_DYNAMIC")]
    MultiDynamic,
}

impl TrainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::Single => "SINGLE",
            TrainMode::MultiErm => "MULTI_ERM",
            TrainMode::MultiStatic => "MULTI_STATIC",
            TrainMode::MultiDynamic => "MULTI_DYNAMIC",
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrainMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SINGLE" => Ok(TrainMode::Single),
            "MULTI_ERM" => Ok(TrainMode::MultiErm),
            "MULTI_STATIC" => Ok(TrainMode::MultiStatic),
            "MULTI_DYNAMIC" => Ok(TrainMode::MultiDynamic),
            _ => Err(Error::Parameter(format!("unknown training mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub epochs: usize,
    /// Per class in the multi-problem modes.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_eps: f64,
    pub validate_every: usize,
    /// Consecutive non-improving validations tolerated before stopping.
    pub patience: usize,
    pub epsilon_dw: f64,
    pub seed: u64,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::single()
    }
}

impl TrainConfig {
    pub fn single() -> Self {
        Self {
            mode: TrainMode::Single,
            epochs: 50,
            batch_size: 64,
            learning_rate: 1e-3,
            rmsprop_decay: 0.99,
            rmsprop_eps: 1e-8,
            validate_every: 5,
            patience: 3,
            epsilon_dw: 1e-8,
            seed: 0,
            loss: LossConfig::default(),
        }
    }

    pub fn multi(mode: TrainMode) -> Self {
        Self { mode, epochs: 100, batch_size: 32, ..Self::single() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.validate_every == 0 || self.patience == 0 {
            return Err(Error::Config("epochs, batch_size, validate_every and patience must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.rmsprop_eps > 0.0) || !(self.epsilon_dw > 0.0) {
            return Err(Error::Config("learning rate and epsilons must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay) {
            return Err(Error::Config("rmsprop_decay must lie in [0, 1)".into()));
        }
        self.loss.validate()
    }
}

/// `w_k = mean(norms) / (norms_k + eps)`.
pub fn dynamic_weights(grad_norms: &[f64], eps: f64) -> Vec<f64> {
    let mean = grad_norms.iter().sum::<f64>() / grad_norms.len() as f64;
    grad_norms.iter().map(|g| mean / (g + eps)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightingState {
    pub grad_norms: Vec<f64>,
    pub mean_norm: f64,
    pub weights: Vec<f64>,
}

impl WeightingState {
    pub fn new(grad_norms: Vec<f64>, eps: f64) -> Self {
        let mean_norm = grad_norms.iter().sum::<f64>() / grad_norms.len() as f64;
        let weights = dynamic_weights(&grad_norms, eps);
        Self { grad_norms, mean_norm, weights }
    }
}

/// Plain RMSprop: `s ← ρs + (1−ρ)g²`, `p ← p − lr·g/(√s + ε)`.
pub fn rmsprop_step(params: &mut [f64], grads: &[f64], state: &mut [f64], cfg: &TrainConfig) -> Result<()> {
    if grads.len() != params.len() || state.len() != params.len() {
        return Err(Error::Dimension { expected: params.len(), got: grads.len().min(state.len()) });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical("non-finite gradient".into()));
    }
    for ((p, &g), s) in params.iter_mut().zip(grads).zip(state.iter_mut()) {
        *s = cfg.rmsprop_decay * *s + (1.0 - cfg.rmsprop_decay) * g * g;
        *p -= cfg.learning_rate * g / (s.sqrt() + cfg.rmsprop_eps);
    }
    Ok(())
}

/// Mean relaxed loss of a batch and its parameter gradient.
pub fn batch_gradient(params: &ModelParams, members: &[&Instance], loss: &LossConfig) -> Result<Gradient> {
    weighted_gradient(params, &[members.to_vec()], &[1.0], loss)
}

/// Gradient of `Σ_k w_k · mean-loss(batch_k)` from a single backward pass
/// over the union of all batches, with the weights held constant.
pub fn weighted_gradient(
    params: &ModelParams,
    batches: &[Vec<&Instance>],
    weights: &[f64],
    loss: &LossConfig,
) -> Result<Gradient> {
    if batches.len() != weights.len() || batches.iter().any(|b| b.is_empty()) {
        return Err(Error::Config("every weighted batch needs members and a weight".into()));
    }
    let mut members: Vec<HeteroGraph> = Vec::new();
    let mut scale: Vec<f64> = Vec::new();
    for (b, &w) in batches.iter().zip(weights) {
        for inst in b {
            members.push(inst.hetero.clone());
            scale.push(w / b.len() as f64);
        }
    }
    let union = batch(&members)?;
    gradient(params, &union.graph, |x| {
        let mut total = 0.0;
        let mut dx = vec![0.0; x.len()];
        for (k, h) in members.iter().enumerate() {
            let r = union.var_range(k);
            let (l, g) = loss_and_grad(h, &x[r.clone()], loss)?;
            total += scale[k] * l;
            for (d, gi) in dx[r].iter_mut().zip(g) {
                *d = scale[k] * gi;
            }
        }
        Ok((total, dx))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub class: ProblemClass,
    pub loss: f64,
    /// Wall-clock seconds since the run started.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub epoch: usize,
    pub ag: f64,
    pub class_gaps: Vec<(ProblemClass, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub validations: Vec<ValidationRecord>,
    pub best_epoch: Option<usize>,
    pub best_ag: Option<f64>,
    pub seconds: f64,
}

impl TrainHistory {
    /// Columns `epoch,class,loss,ag,wallclock`; `ag` is the class gap on
    /// validation epochs and empty otherwise.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,class,loss,ag,wallclock\n");
        for r in &self.epochs {
            let ag = self
                .validations
                .iter()
                .find(|v| v.epoch == r.epoch)
                .and_then(|v| v.class_gaps.iter().find(|(c, _)| *c == r.class))
                .map(|(_, g)| g.to_string())
                .unwrap_or_default();
            writeln!(out, "{},{},{},{},{:.3}", r.epoch, r.class, r.loss, ag, r.seconds).unwrap();
        }
        out
    }

    /// Copy with every wall-clock field zeroed.
    pub fn without_timing(&self) -> Self {
        let mut h = self.clone();
        h.seconds = 0.0;
        h.epochs.iter_mut().for_each(|r| r.seconds = 0.0);
        h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub losses: Vec<f64>,
    /// Per-class gradients' norms and weights in the dynamic mode.
    pub weighting: Option<WeightingState>,
    pub update: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ResumeState {
    epoch: usize,
    rms: Vec<f64>,
    best_params: Vec<f64>,
    best_ag: Option<f64>,
    best_epoch: Option<usize>,
    stale: usize,
    stopped: bool,
    history: TrainHistory,
}

pub struct Trainer<'a> {
    cfg: TrainConfig,
    data: &'a [ClassData],
    params: ModelParams,
    rms: Vec<f64>,
    epoch: usize,
    best_params: Vec<f64>,
    best_ag: Option<f64>,
    best_epoch: Option<usize>,
    stale: usize,
    stopped: bool,
    history: TrainHistory,
    start: Instant,
    elapsed_before: f64,
}

fn check_data(data: &[ClassData], cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    match (cfg.mode, data.len()) {
        (_, 0) => return Err(Error::Config("no training data".into())),
        (TrainMode::Single, 1) => {}
        (TrainMode::Single, k) => return Err(Error::Config(format!("SINGLE mode takes one class, got {k}"))),
        (m, 1) => return Err(Error::Config(format!("{m} needs at least two classes"))),
        _ => {}
    }
    for d in data {
        if d.train.is_empty() || d.val.is_empty() {
            return Err(Error::Config(format!("class {} needs non-empty train and validation splits", d.class)));
        }
        if let Some(inst) = d.train.iter().chain(&d.val).find(|i| i.class != d.class) {
            return Err(Error::Config(format!("instance {} is not a {} instance", inst.name, d.class)));
        }
        for inst in &d.val {
            inst.optimal_value()?;
        }
    }
    Ok(())
}

fn shuffled(n: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

/// Batch `t` of a permutation; classes with fewer batches wrap around.
fn batch_at(perm: &[usize], t: usize, size: usize) -> Vec<usize> {
    let n = perm.len();
    let start = t * size;
    if start < n {
        perm[start..(start + size).min(n)].to_vec()
    } else {
        (0..size.min(n)).map(|i| perm[(start + i) % n]).collect()
    }
}

impl<'a> Trainer<'a> {
    pub fn new(params: ModelParams, data: &'a [ClassData], cfg: TrainConfig) -> Result<Self> {
        check_data(data, &cfg)?;
        let n = params.len();
        Ok(Self {
            cfg,
            data,
            best_params: params.flat().to_vec(),
            params,
            rms: vec![0.0; n],
            epoch: 0,
            best_ag: None,
            best_epoch: None,
            stale: 0,
            stopped: false,
            history: TrainHistory::default(),
            start: Instant::now(),
            elapsed_before: 0.0,
        })
    }

    /// Continues a run from a checkpoint written by [`Trainer::checkpoint`].
    pub fn resume(ckpt: &Checkpoint, data: &'a [ClassData], cfg: TrainConfig) -> Result<Self> {
        let params = ckpt.model()?;
        let state: ResumeState = serde_json::from_value(
            ckpt.resume.clone().ok_or_else(|| Error::Checkpoint("checkpoint has no trainer state".into()))?,
        )
        .map_err(|e| Error::Checkpoint(format!("malformed trainer state: {e}")))?;
        if state.rms.len() != params.len() || state.best_params.len() != params.len() {
            return Err(Error::Checkpoint("trainer state does not match the parameter count".into()));
        }
        let mut t = Self::new(params, data, cfg)?;
        t.rms = state.rms;
        t.epoch = state.epoch;
        t.best_params = state.best_params;
        t.best_ag = state.best_ag;
        t.best_epoch = state.best_epoch;
        t.stale = state.stale;
        t.stopped = state.stopped;
        t.elapsed_before = state.history.seconds;
        t.history = state.history;
        Ok(t)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn history(&self) -> &TrainHistory {
        &self.history
    }

    pub fn is_finished(&self) -> bool {
        self.stopped || self.epoch >= self.cfg.epochs
    }

    fn elapsed(&self) -> f64 {
        self.elapsed_before + self.start.elapsed().as_secs_f64()
    }

    /// Per-class gradients and the combined update direction for one batch
    /// per class, without touching the parameters.
    pub fn combined_gradient(&self, batches: &[Vec<usize>]) -> Result<(Vec<f64>, Vec<f64>, Option<WeightingState>)> {
        if batches.len() != self.data.len() {
            return Err(Error::Config(format!("expected {} batches, got {}", self.data.len(), batches.len())));
        }
        let mut grads = Vec::with_capacity(batches.len());
        let mut losses = Vec::with_capacity(batches.len());
        for (d, idx) in self.data.iter().zip(batches) {
            let members: Vec<&Instance> = idx.iter().map(|&i| &d.train[i]).collect();
            let g = batch_gradient(&self.params, &members, &self.cfg.loss)?;
            losses.push(g.loss);
            grads.push(g.grad);
        }
        let k = grads.len() as f64;
        let (weights, state) = match self.cfg.mode {
            TrainMode::Single | TrainMode::MultiErm => (vec![1.0; grads.len()], None),
            TrainMode::MultiStatic => (vec![1.0 / k; grads.len()], None),
            TrainMode::MultiDynamic => {
                let s = WeightingState::new(grads.iter().map(|g| l2_norm(g)).collect(), self.cfg.epsilon_dw);
                (s.weights.clone(), Some(s))
            }
        };
        let mut combined = vec![0.0; self.params.len()];
        for (g, w) in grads.iter().zip(&weights) {
            for (c, gi) in combined.iter_mut().zip(g) {
                *c += w * gi;
            }
        }
        Ok((combined, losses, state))
    }

    /// One optimizer update from explicit batch indices (one list per class).
    pub fn step(&mut self, batches: &[Vec<usize>]) -> Result<StepReport> {
        let (combined, losses, weighting) = self.combined_gradient(batches)?;
        let before = self.params.flat().to_vec();
        rmsprop_step(self.params.flat_mut(), &combined, &mut self.rms, &self.cfg)?;
        let update = self.params.flat().iter().zip(&before).map(|(a, b)| a - b).collect();
        Ok(StepReport { losses, weighting, update })
    }

    /// Batches of the next epoch, in step order.
    pub fn epoch_batches(&self) -> Vec<Vec<Vec<usize>>> {
        let b = self.cfg.batch_size;
        let perms: Vec<Vec<usize>> = self
            .data
            .iter()
            .enumerate()
            .map(|(k, d)| shuffled(d.train.len(), self.cfg.seed, ((self.epoch as u64) << 8) | k as u64))
            .collect();
        let steps = perms.iter().map(|p| p.len().div_ceil(b)).max().unwrap_or(0);
        (0..steps).map(|t| perms.iter().map(|p| batch_at(p, t, b)).collect()).collect()
    }

    /// Validation gap of `params` per class and averaged over classes.
    pub fn validation_gap(&self, params: &ModelParams) -> Result<(f64, Vec<(ProblemClass, f64)>)> {
        let mut gaps = Vec::with_capacity(self.data.len());
        for d in self.data {
            let r = evaluate(params, &d.val)?;
            gaps.push((d.class, r.ag));
        }
        let ag = gaps.iter().map(|g| g.1).sum::<f64>() / gaps.len() as f64;
        Ok((ag, gaps))
    }

    pub fn run_epoch(&mut self) -> Result<()> {
        if self.is_finished() {
            return Ok(());
        }
        let batches = self.epoch_batches();
        let mut sums = vec![0.0; self.data.len()];
        for b in &batches {
            let r = self.step(b)?;
            for (s, l) in sums.iter_mut().zip(r.losses) {
                *s += l;
            }
        }
        self.epoch += 1;
        let seconds = self.elapsed();
        for (d, s) in self.data.iter().zip(sums) {
            let loss = s / batches.len() as f64;
            self.history.epochs.push(EpochRecord { epoch: self.epoch, class: d.class, loss, seconds });
        }
        log::info!("epoch {} done in {seconds:.1}s", self.epoch);
        if self.epoch % self.cfg.validate_every == 0 || self.epoch == self.cfg.epochs {
            let (ag, class_gaps) = self.validation_gap(&self.params)?;
            log::info!("epoch {} validation gap {ag:.4}", self.epoch);
            self.history.validations.push(ValidationRecord { epoch: self.epoch, ag, class_gaps });
            if self.best_ag.is_none_or(|b| ag < b) {
                self.best_ag = Some(ag);
                self.best_epoch = Some(self.epoch);
                self.best_params = self.params.flat().to_vec();
                self.stale = 0;
            } else {
                self.stale += 1;
                if self.stale >= self.cfg.patience {
                    self.stopped = true;
                }
            }
            self.history.best_ag = self.best_ag;
            self.history.best_epoch = self.best_epoch;
        }
        self.history.seconds = self.elapsed();
        Ok(())
    }

    pub fn best(&self) -> ModelParams {
        ModelParams::from_flat(*self.params.config(), self.best_params.clone()).expect("same shape")
    }

    /// Current parameters together with everything needed to resume.
    pub fn checkpoint(&self) -> Checkpoint {
        let state = ResumeState {
            epoch: self.epoch,
            rms: self.rms.clone(),
            best_params: self.best_params.clone(),
            best_ag: self.best_ag,
            best_epoch: self.best_epoch,
            stale: self.stale,
            stopped: self.stopped,
            history: self.history.clone(),
        };
        Checkpoint::new(&self.params, Some(serde_json::to_value(state).expect("serializable state")))
    }

    /// Trains until the epoch budget or early stopping; returns the
    /// parameters with the lowest validation gap.
    pub fn run(mut self) -> Result<(ModelParams, TrainHistory)> {
        while !self.is_finished() {
            self.run_epoch()?;
        }
        Ok((self.best(), self.history))
    }
}

pub fn train_single(params: ModelParams, data: &ClassData, cfg: &TrainConfig) -> Result<(ModelParams, TrainHistory)> {
    if cfg.mode != TrainMode::Single {
        return Err(Error::Config(format!("train_single needs SINGLE mode, got {}", cfg.mode)));
    }
    Trainer::new(params, std::slice::from_ref(data), *cfg)?.run()
}

pub fn train_multi(params: ModelParams, data: &[ClassData], cfg: &TrainConfig) -> Result<(ModelParams, TrainHistory)> {
    if cfg.mode == TrainMode::Single {
        return Err(Error::Config("train_multi needs a multi-problem mode".into()));
    }
    Trainer::new(params, data, *cfg)?.run()
}

/// Mean AR on `eval` after each of `steps` RMSprop updates on `train`, with
/// fresh optimizer state. The trace starts with the untouched parameters.
pub fn finetune(
    params: &ModelParams,
    train: &[Instance],
    eval: &[Instance],
    steps: usize,
    cfg: &TrainConfig,
) -> Result<(ModelParams, Vec<f64>)> {
    cfg.validate()?;
    if eval.is_empty() || (steps > 0 && train.is_empty()) {
        return Err(Error::Config("fine-tuning needs training and evaluation instances".into()));
    }
    let mean_ar = |p: &ModelParams| -> Result<f64> {
        let r = evaluate(p, eval)?;
        Ok(r.instances.iter().map(|m| m.ar).sum::<f64>() / r.instances.len() as f64)
    };
    let mut p = params.clone();
    let mut rms = vec![0.0; p.len()];
    let mut trace = vec![mean_ar(&p)?];
    let mut perm = Vec::new();
    let mut cursor = 0;
    let mut round = 0u64;
    for _ in 0..steps {
        let size = cfg.batch_size.min(train.len());
        if cursor + size > perm.len() {
            perm = shuffled(train.len(), cfg.seed, round);
            round += 1;
            cursor = 0;
        }
        let members: Vec<&Instance> = perm[cursor..cursor + size].iter().map(|&i| &train[i]).collect();
        cursor += size;
        let g = batch_gradient(&p, &members, &cfg.loss)?;
        rmsprop_step(p.flat_mut(), &g.grad, &mut rms, cfg)?;
        trace.push(mean_ar(&p)?);
    }
    Ok((p, trace))
}
