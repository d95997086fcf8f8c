//! Training: Adam, plateau learning-rate schedule, paired geometric
//! augmentation, patch extraction with a progressive-resolution schedule, and
//! the epoch loop.
//!
//! All randomness is derived from `TrainConfig::seed` through labelled
//! sub-seeds keyed by epoch and sample position, so a run is reproducible
//! bit-for-bit and resuming from a checkpoint replays the identical stream.

use std::collections::HashMap;
use std::path::Path;

use crate::checkpoint::{read_lpck, write_lpck, CheckpointData, OPT_M_PREFIX, OPT_V_PREFIX};
use crate::config::{KvMap, KvReader};
use crate::context::{Ctx, TapeCtx};
use crate::degrade::{self, DegradationConfig};
use crate::error::{Error, Result};
use crate::model::{LpienetConfig, Model};
use crate::objectives::{self, GradOperator, LossWeights};
use crate::ops::Dihedral;
use crate::rng::{derive_seed, derive_seed_indexed, Prng};
use crate::tensor::{Shape, Tensor};

/// Training recipe parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr0: f64,
    pub lr_min: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    /// Relative improvement below which an epoch counts as a plateau.
    pub plateau_threshold: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// (start_epoch, patch_size) pairs; patch size 0 means the full image.
    /// Empty = automatic progressive schedule (64, then 128, then full).
    pub patch_schedule: Vec<(usize, usize)>,
    pub loss: LossWeights,
    pub grad_operator: GradOperator,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 2e-3,
            lr_min: 1e-6,
            plateau_factor: 0.5,
            plateau_patience: 10,
            plateau_threshold: 1e-4,
            batch_size: 4,
            epochs: 500,
            patch_schedule: Vec::new(),
            loss: LossWeights::default(),
            grad_operator: GradOperator::ForwardDiff,
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_min > 0.0 && self.lr_min <= self.lr0) {
            return Err(Error::Config(format!(
                "need 0 < lr_min <= lr0, got lr_min={} lr0={}",
                self.lr_min, self.lr0
            )));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return Err(Error::Config(format!(
                "plateau_factor {} must lie in (0, 1)",
                self.plateau_factor
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        for &(_, size) in &self.patch_schedule {
            if size != 0 && size % 4 != 0 {
                return Err(Error::Config(format!(
                    "patch size {size} must be divisible by 4"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config(format!(
                "val_fraction {} must lie in [0, 1)",
                self.val_fraction
            )));
        }
        Ok(())
    }

    /// The automatic progressive-resolution schedule: 64 until 40% of the
    /// epochs, 128 until 80%, then full images.
    pub fn effective_schedule(&self) -> Vec<(usize, usize)> {
        if !self.patch_schedule.is_empty() {
            let mut s = self.patch_schedule.clone();
            s.sort_by_key(|&(e, _)| e);
            return s;
        }
        vec![
            (0, 64),
            (self.epochs * 2 / 5, 128),
            (self.epochs * 4 / 5, 0),
        ]
    }

    pub fn patch_size_for_epoch(&self, epoch: usize) -> usize {
        let mut size = 0;
        for &(start, s) in &self.effective_schedule() {
            if epoch >= start {
                size = s;
            }
        }
        size
    }

    pub fn to_kv(&self) -> KvMap {
        let mut m = KvMap::new();
        m.set("lr0", self.lr0);
        m.set("lr_min", self.lr_min);
        m.set("plateau_factor", self.plateau_factor);
        m.set("plateau_patience", self.plateau_patience);
        m.set("plateau_threshold", self.plateau_threshold);
        m.set("batch_size", self.batch_size);
        m.set("epochs", self.epochs);
        let sched = if self.patch_schedule.is_empty() {
            "auto".to_string()
        } else {
            self.patch_schedule
                .iter()
                .map(|(e, s)| {
                    if *s == 0 {
                        format!("{e}:full")
                    } else {
                        format!("{e}:{s}")
                    }
                })
                .collect::<Vec<_>>()
                .join(",")
        };
        m.set("patch_schedule", sched);
        m.set("alpha", self.loss.alpha);
        m.set("beta", self.loss.beta);
        m.set(
            "grad_operator",
            match self.grad_operator {
                GradOperator::ForwardDiff => "forward",
                GradOperator::Sobel => "sobel",
            },
        );
        m.set("val_fraction", self.val_fraction);
        m.set("seed", self.seed);
        m
    }

    pub fn from_reader(r: &mut KvReader) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        if let Some(v) = r.take_parse("lr0")? {
            cfg.lr0 = v;
        }
        if let Some(v) = r.take_parse("lr_min")? {
            cfg.lr_min = v;
        }
        if let Some(v) = r.take_parse("plateau_factor")? {
            cfg.plateau_factor = v;
        }
        if let Some(v) = r.take_parse("plateau_patience")? {
            cfg.plateau_patience = v;
        }
        if let Some(v) = r.take_parse("plateau_threshold")? {
            cfg.plateau_threshold = v;
        }
        if let Some(v) = r.take_parse("batch_size")? {
            cfg.batch_size = v;
        }
        if let Some(v) = r.take_parse("epochs")? {
            cfg.epochs = v;
        }
        if let Some(v) = r.take("patch_schedule") {
            if v != "auto" {
                let mut sched = Vec::new();
                for part in v.split(',') {
                    let Some((e, s)) = part.split_once(':') else {
                        return Err(Error::Config(format!(
                            "patch_schedule entry `{part}` is not epoch:size"
                        )));
                    };
                    let epoch: usize = e.trim().parse().map_err(|_| {
                        Error::Config(format!("bad epoch in patch_schedule `{part}`"))
                    })?;
                    let size: usize = if s.trim() == "full" {
                        0
                    } else {
                        s.trim().parse().map_err(|_| {
                            Error::Config(format!("bad size in patch_schedule `{part}`"))
                        })?
                    };
                    sched.push((epoch, size));
                }
                cfg.patch_schedule = sched;
            }
        }
        if let Some(v) = r.take_parse("alpha")? {
            cfg.loss.alpha = v;
        }
        if let Some(v) = r.take_parse("beta")? {
            cfg.loss.beta = v;
        }
        if let Some(v) = r.take("grad_operator") {
            cfg.grad_operator = match v.as_str() {
                "forward" => GradOperator::ForwardDiff,
                "sobel" => GradOperator::Sobel,
                other => {
                    return Err(Error::Config(format!(
                        "grad_operator `{other}` must be forward or sobel"
                    )))
                }
            };
        }
        if let Some(v) = r.take_parse("val_fraction")? {
            cfg.val_fraction = v;
        }
        if let Some(v) = r.take_parse("seed")? {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Adam hyperparameters (the conventional defaults).
#[derive(Debug, Clone, Copy)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates per parameter plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub moments: Vec<(String, Tensor<f32>, Tensor<f32>)>,
    pub step: u64,
}

impl AdamState {
    pub fn for_model(model: &Model<f32>) -> Self {
        let mut moments = Vec::new();
        model.visit_params(&mut |path, t| {
            moments.push((
                path.to_string(),
                Tensor::zeros(t.shape()),
                Tensor::zeros(t.shape()),
            ));
        });
        AdamState { moments, step: 0 }
    }
}

/// Bias-corrected Adam update of one tensor.
pub fn adam_update_tensor(
    param: &mut Tensor<f32>,
    grad: &Tensor<f32>,
    m: &mut Tensor<f32>,
    v: &mut Tensor<f32>,
    step: u64,
    lr: f64,
    hp: AdamHyper,
) {
    let b1 = hp.beta1 as f32;
    let b2 = hp.beta2 as f32;
    let bc1 = 1.0 - hp.beta1.powi(step as i32);
    let bc2 = 1.0 - hp.beta2.powi(step as i32);
    let lr = lr as f32;
    let eps = hp.eps as f32;
    let (bc1, bc2) = (bc1 as f32, bc2 as f32);
    for i in 0..param.len() {
        let g = grad.as_slice()[i];
        let mi = b1 * m.as_slice()[i] + (1.0 - b1) * g;
        let vi = b2 * v.as_slice()[i] + (1.0 - b2) * g * g;
        m.as_mut_slice()[i] = mi;
        v.as_mut_slice()[i] = vi;
        let m_hat = mi / bc1;
        let v_hat = vi / bc2;
        param.as_mut_slice()[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// One optimizer step over every model parameter. Parameters without a
/// recorded gradient are treated as having zero gradient.
pub fn adam_step(
    model: &mut Model<f32>,
    grads: &HashMap<String, Tensor<f32>>,
    state: &mut AdamState,
    lr: f64,
    hp: AdamHyper,
) {
    state.step += 1;
    let step = state.step;
    let mut idx = 0usize;
    model.visit_params_mut(&mut |path, param| {
        let (ref mpath, ref mut m, ref mut v) = state.moments[idx];
        debug_assert_eq!(mpath, path);
        let zero;
        let grad = match grads.get(path) {
            Some(g) => g,
            None => {
                zero = Tensor::zeros(param.shape());
                &zero
            }
        };
        adam_update_tensor(param, grad, m, v, step, lr, hp);
        idx += 1;
    });
}

/// Reduce-on-plateau learning-rate schedule with cooldown.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    pub lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub threshold: f64,
    pub lr_min: f64,
    pub best: Option<f64>,
    pub since_improve: usize,
    pub cooldown: usize,
}

impl PlateauScheduler {
    pub fn new(cfg: &TrainConfig) -> Self {
        PlateauScheduler {
            lr: cfg.lr0,
            factor: cfg.plateau_factor,
            patience: cfg.plateau_patience,
            threshold: cfg.plateau_threshold,
            lr_min: cfg.lr_min,
            best: None,
            since_improve: 0,
            cooldown: 0,
        }
    }

    /// Feed one validation loss; returns the learning rate to use next.
    pub fn observe(&mut self, val_loss: f64) -> f64 {
        match self.best {
            None => {
                self.best = Some(val_loss);
            }
            Some(best) => {
                let improved = val_loss < best - best.abs() * self.threshold;
                if improved {
                    self.best = Some(val_loss);
                    self.since_improve = 0;
                } else if self.cooldown > 0 {
                    self.cooldown -= 1;
                } else {
                    self.since_improve += 1;
                    if self.since_improve >= self.patience {
                        self.lr = (self.lr * self.factor).max(self.lr_min);
                        self.since_improve = 0;
                        self.cooldown = self.patience;
                    }
                }
            }
        }
        self.lr
    }
}

/// Stateless view: replay a validation-loss history and return the final lr.
pub fn plateau_schedule(history: &[f64], cfg: &TrainConfig) -> f64 {
    let mut s = PlateauScheduler::new(cfg);
    let mut lr = cfg.lr0;
    for &v in history {
        lr = s.observe(v);
    }
    lr
}

/// Apply one uniformly drawn dihedral transform to both images of a pair.
pub fn augment_pair(
    degraded: &Tensor<f32>,
    clean: &Tensor<f32>,
    rng: &mut Prng,
) -> (Tensor<f32>, Tensor<f32>) {
    let d = Dihedral::from_index(rng.below(8) as usize);
    (d.apply(degraded), d.apply(clean))
}

/// Non-overlapping tiling: floor(h/size) x floor(w/size) top-left anchored tiles.
pub fn grid_patches(image: &Tensor<f32>, size: usize) -> Result<Vec<Tensor<f32>>> {
    let s = image.shape();
    if size == 0 || size > s.h || size > s.w {
        return Err(Error::arg(
            "grid_patches",
            format!("patch {size} does not fit in {}x{}", s.h, s.w),
        ));
    }
    let mut out = Vec::new();
    for by in 0..s.h / size {
        for bx in 0..s.w / size {
            out.push(crop_at(image, by * size, bx * size, size, size));
        }
    }
    Ok(out)
}

/// One uniformly anchored crop.
pub fn random_patch(image: &Tensor<f32>, size: usize, rng: &mut Prng) -> Result<Tensor<f32>> {
    let s = image.shape();
    if size == 0 || size > s.h || size > s.w {
        return Err(Error::arg(
            "random_patch",
            format!("patch {size} does not fit in {}x{}", s.h, s.w),
        ));
    }
    let y = rng.below((s.h - size + 1) as u64) as usize;
    let x = rng.below((s.w - size + 1) as u64) as usize;
    Ok(crop_at(image, y, x, size, size))
}

fn crop_at(t: &Tensor<f32>, y0: usize, x0: usize, h: usize, w: usize) -> Tensor<f32> {
    let s = t.shape();
    Tensor::from_fn(Shape::new(s.n, s.c, h, w), |n, c, y, x| {
        t.at(n, c, y0 + y, x0 + x)
    })
}

/// Stack single-image tensors into one batch.
fn stack_batch(items: &[(Tensor<f32>, Tensor<f32>)]) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let s = items[0].0.shape();
    let n = items.len();
    let mut deg = Tensor::zeros(Shape::new(n, s.c, s.h, s.w));
    let mut cln = Tensor::zeros(Shape::new(n, s.c, s.h, s.w));
    let per = s.c * s.h * s.w;
    for (i, (d, c)) in items.iter().enumerate() {
        if d.shape() != s || c.shape() != s {
            return Err(Error::shape("stack_batch", "mixed patch shapes in one batch"));
        }
        deg.as_mut_slice()[i * per..(i + 1) * per].copy_from_slice(d.as_slice());
        cln.as_mut_slice()[i * per..(i + 1) * per].copy_from_slice(c.as_slice());
    }
    Ok((deg, cln))
}

/// Training data: pre-degraded pairs, or clean images degraded on the fly.
#[derive(Debug, Clone)]
pub enum Dataset {
    /// (degraded, clean) pairs.
    Paired(Vec<(Tensor<f32>, Tensor<f32>)>),
    OnTheFly {
        clean: Vec<Tensor<f32>>,
        degrade: DegradationConfig,
    },
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Paired(v) => v.len(),
            Dataset::OnTheFly { clean, .. } => clean.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn image_shape(&self, i: usize) -> Shape {
        match self {
            Dataset::Paired(v) => v[i].1.shape(),
            Dataset::OnTheFly { clean, .. } => clean[i].shape(),
        }
    }

    /// The (degraded, clean) pair for a whole image. On-the-fly degradation is
    /// seeded per index only, so validation inputs are identical every epoch.
    fn whole_pair(&self, i: usize, seed: u64) -> Result<(Tensor<f32>, Tensor<f32>)> {
        match self {
            Dataset::Paired(v) => Ok(v[i].clone()),
            Dataset::OnTheFly { clean, degrade } => {
                let cfg = degrade
                    .clone()
                    .with_seed(derive_seed_indexed(seed, "val-degrade", i as u64));
                Ok((degrade::apply(&clean[i], &cfg)?, clean[i].clone()))
            }
        }
    }
}

/// One epoch row of the machine-readable log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_psnr: f64,
    pub val_ssim: f64,
}

impl EpochLog {
    pub fn to_line(&self) -> String {
        format!(
            "epoch={} lr={:e} train_loss={:.6} val_loss={:.6} val_psnr={:.4} val_ssim={:.6}",
            self.epoch, self.lr, self.train_loss, self.val_loss, self.val_psnr, self.val_ssim
        )
    }
}

/// Complete training state at an epoch boundary; serializes to a checkpoint
/// so runs resume bit-exactly.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub model: Model<f32>,
    pub adam: AdamState,
    pub plateau: PlateauScheduler,
    pub next_epoch: usize,
    pub best_val_loss: f64,
    pub best_model: Model<f32>,
}

impl TrainState {
    pub fn init(model: Model<f32>, cfg: &TrainConfig) -> Self {
        TrainState {
            adam: AdamState::for_model(&model),
            plateau: PlateauScheduler::new(cfg),
            next_epoch: 0,
            best_val_loss: f64::INFINITY,
            best_model: model.clone(),
            model,
        }
    }

    pub fn to_checkpoint(&self) -> Result<CheckpointData> {
        let mut meta = self.model.config.to_kv();
        meta.set("train.next_epoch", self.next_epoch);
        meta.set("train.best_val_loss", self.best_val_loss);
        meta.set("adam.step", self.adam.step);
        meta.set("plateau.lr", self.plateau.lr);
        meta.set(
            "plateau.best",
            self.plateau
                .best
                .map(|b| b.to_string())
                .unwrap_or_else(|| "none".to_string()),
        );
        meta.set("plateau.since_improve", self.plateau.since_improve);
        meta.set("plateau.cooldown", self.plateau.cooldown);
        let mut tensors = self.model.param_map();
        for (path, m, v) in &self.adam.moments {
            tensors.push((format!("{OPT_M_PREFIX}{path}"), m.clone()));
            tensors.push((format!("{OPT_V_PREFIX}{path}"), v.clone()));
        }
        for (path, t) in self.best_model.param_map() {
            tensors.push((format!("best.{path}"), t));
        }
        Ok(CheckpointData { meta, tensors })
    }

    pub fn from_checkpoint(data: &CheckpointData, cfg: &TrainConfig) -> Result<Self> {
        let model = Model::from_checkpoint_data_filtered(data, &["best."])?;
        let mut adam = AdamState::for_model(&model);
        let mut m_map: HashMap<String, Tensor<f32>> = HashMap::new();
        let mut v_map: HashMap<String, Tensor<f32>> = HashMap::new();
        let mut best_params: Vec<(String, Tensor<f32>)> = Vec::new();
        for (name, t) in &data.tensors {
            if let Some(p) = name.strip_prefix(OPT_M_PREFIX) {
                m_map.insert(p.to_string(), t.clone());
            } else if let Some(p) = name.strip_prefix(OPT_V_PREFIX) {
                v_map.insert(p.to_string(), t.clone());
            } else if let Some(p) = name.strip_prefix("best.") {
                best_params.push((p.to_string(), t.clone()));
            }
        }
        for (path, m, v) in adam.moments.iter_mut() {
            if let Some(t) = m_map.remove(path) {
                *m = t;
            }
            if let Some(t) = v_map.remove(path) {
                *v = t;
            }
        }
        let meta = data.meta.clone();
        let take_f64 = |key: &str| -> Option<f64> { meta.get(key).and_then(|v| v.parse().ok()) };
        adam.step = meta
            .get("adam.step")
            .and_then(|v| v.parse().ok())
            .unwrap_or(0);
        let mut plateau = PlateauScheduler::new(cfg);
        if let Some(v) = take_f64("plateau.lr") {
            plateau.lr = v;
        }
        plateau.best = match meta.get("plateau.best") {
            Some("none") | None => None,
            Some(v) => v.parse().ok(),
        };
        if let Some(v) = meta.get("plateau.since_improve").and_then(|v| v.parse().ok()) {
            plateau.since_improve = v;
        }
        if let Some(v) = meta.get("plateau.cooldown").and_then(|v| v.parse().ok()) {
            plateau.cooldown = v;
        }
        let next_epoch = meta
            .get("train.next_epoch")
            .and_then(|v| v.parse().ok())
            .unwrap_or(0);
        let best_val_loss = take_f64("train.best_val_loss").unwrap_or(f64::INFINITY);
        let mut best_model = model.clone();
        if !best_params.is_empty() {
            best_model.load_param_map(&best_params)?;
        }
        Ok(TrainState {
            model,
            adam,
            plateau,
            next_epoch,
            best_val_loss,
            best_model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_lpck(path, &self.to_checkpoint()?)
    }

    pub fn load(path: &Path, cfg: &TrainConfig) -> Result<Self> {
        Self::from_checkpoint(&read_lpck(path)?, cfg)
    }
}

/// The deterministic train/validation index split.
pub fn split_indices(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = Prng::seed(derive_seed(seed, "split"));
    rng.shuffle(&mut idx);
    let mut val_count = ((n as f64) * val_fraction).round() as usize;
    if val_fraction > 0.0 && n >= 2 {
        val_count = val_count.clamp(1, n - 1);
    } else {
        val_count = 0;
    }
    let val = idx[..val_count].to_vec();
    let train = idx[val_count..].to_vec();
    (train, val)
}

fn floor_mult4(v: usize) -> usize {
    (v / 4) * 4
}

/// Largest usable patch edge for an image under the requested size
/// (0 = full image), kept a multiple of 4.
fn effective_patch(shape: Shape, requested: usize) -> usize {
    let full = floor_mult4(shape.h.min(shape.w));
    if requested == 0 {
        full
    } else {
        requested.min(full)
    }
}

/// Run epochs [state.next_epoch, until) of the recipe, mutating `state` and
/// appending log rows. `checkpoint_path`, when given, receives the full train
/// state after every validation improvement.
pub fn run_epochs(
    state: &mut TrainState,
    dataset: &Dataset,
    cfg: &TrainConfig,
    until: usize,
    checkpoint_path: Option<&Path>,
) -> Result<Vec<EpochLog>> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    let n = dataset.len();
    let (train_idx, val_idx) = split_indices(n, cfg.val_fraction, cfg.seed);
    // With no held-out images (tiny datasets / val_fraction 0) validate on
    // the training images.
    let val_idx = if val_idx.is_empty() {
        train_idx.clone()
    } else {
        val_idx
    };
    let val_pairs: Vec<(Tensor<f32>, Tensor<f32>)> = val_idx
        .iter()
        .map(|&i| dataset.whole_pair(i, cfg.seed))
        .collect::<Result<_>>()?;

    let mut log = Vec::new();
    for epoch in state.next_epoch..until {
        let lr = state.plateau.lr;
        let patch = cfg.patch_size_for_epoch(epoch);

        let mut order = train_idx.clone();
        let mut shuffle_rng = Prng::seed(derive_seed_indexed(cfg.seed, "shuffle", epoch as u64));
        shuffle_rng.shuffle(&mut order);

        let mut loss_sum = 0.0f64;
        let mut batch_count = 0usize;
        for (batch_no, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut items = Vec::with_capacity(chunk.len());
            for (j, &i) in chunk.iter().enumerate() {
                let pos = (batch_no * cfg.batch_size + j) as u64;
                let mut srng = Prng::seed(derive_seed_indexed(
                    cfg.seed,
                    "sample",
                    ((epoch as u64) << 32) | pos,
                ));
                let size = effective_patch(dataset.image_shape(i), patch);
                let pair = match dataset {
                    Dataset::Paired(v) => {
                        let (d, c) = &v[i];
                        let s = c.shape();
                        let y = srng.below((s.h - size + 1) as u64) as usize;
                        let x = srng.below((s.w - size + 1) as u64) as usize;
                        (crop_at(d, y, x, size, size), crop_at(c, y, x, size, size))
                    }
                    Dataset::OnTheFly { clean, degrade } => {
                        let s = clean[i].shape();
                        let y = srng.below((s.h - size + 1) as u64) as usize;
                        let x = srng.below((s.w - size + 1) as u64) as usize;
                        let patch_clean = crop_at(&clean[i], y, x, size, size);
                        let dcfg = degrade.clone().with_seed(derive_seed_indexed(
                            cfg.seed,
                            "train-degrade",
                            ((epoch as u64) << 32) | pos,
                        ));
                        (degrade::apply(&patch_clean, &dcfg)?, patch_clean)
                    }
                };
                let (d, c) = augment_pair(&pair.0, &pair.1, &mut srng);
                items.push((d, c));
            }
            let (deg, cln) = stack_batch(&items)?;

            let mut ctx = TapeCtx::<f32>::new();
            let x = ctx.input(&deg);
            let target = ctx.input(&cln);
            let out = state.model.forward_on(&mut ctx, &x)?;
            let loss =
                objectives::combined_loss_on(&mut ctx, &out, &target, cfg.loss, cfg.grad_operator)?;
            let loss_value = ctx.tape.value(loss).scalar_value() as f64;
            if !loss_value.is_finite() {
                let what = ctx
                    .tape
                    .first_non_finite()
                    .map(|(i, label)| format!("node {i} `{label}`"))
                    .unwrap_or_else(|| "loss".to_string());
                return Err(Error::NonFinite {
                    context: format!("epoch {epoch} batch {batch_no}: {what}"),
                });
            }
            ctx.tape.backward(loss)?;
            let mut grads: HashMap<String, Tensor<f32>> = HashMap::new();
            for path in ctx.param_paths().cloned().collect::<Vec<_>>() {
                if let Some(g) = ctx.param_grad(&path) {
                    grads.insert(path, g.clone());
                }
            }
            adam_step(&mut state.model, &grads, &mut state.adam, lr, AdamHyper::default());
            loss_sum += loss_value;
            batch_count += 1;
        }

        // Validation on whole held-out images.
        let mut val_loss = 0.0;
        let mut val_psnr = 0.0;
        let mut val_ssim = 0.0;
        for (d, c) in &val_pairs {
            let out = state.model.forward(d)?;
            val_loss +=
                objectives::combined_loss(&out, c, cfg.loss, cfg.grad_operator)?;
            let p = objectives::psnr(&out, c, 1.0)?;
            val_psnr += if p.is_finite() { p } else { 99.0 };
            val_ssim += objectives::ssim(&out, c, 1.0)?;
        }
        let nv = val_pairs.len() as f64;
        val_loss /= nv;
        val_psnr /= nv;
        val_ssim /= nv;

        if val_loss < state.best_val_loss {
            state.best_val_loss = val_loss;
            state.best_model = state.model.clone();
            if let Some(path) = checkpoint_path {
                state.next_epoch = epoch + 1;
                state.save(path)?;
            }
        }
        state.plateau.observe(val_loss);
        state.next_epoch = epoch + 1;

        log.push(EpochLog {
            epoch,
            lr,
            train_loss: if batch_count > 0 {
                loss_sum / batch_count as f64
            } else {
                0.0
            },
            val_loss,
            val_psnr,
            val_ssim,
        });
    }
    Ok(log)
}

/// Outcome of a full training run.
#[derive(Debug)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub log: Vec<EpochLog>,
}

/// Train from scratch for `cfg.epochs` epochs.
pub fn train_loop(
    model: Model<f32>,
    dataset: &Dataset,
    cfg: &TrainConfig,
    checkpoint_path: Option<&Path>,
) -> Result<TrainOutcome> {
    let mut state = TrainState::init(model, cfg);
    let log = run_epochs(&mut state, dataset, cfg, cfg.epochs, checkpoint_path)?;
    Ok(TrainOutcome { state, log })
}

impl Model<f32> {
    /// Load a model from checkpoint data, ignoring tensors under the given
    /// extra prefixes as well as optimizer state.
    pub fn from_checkpoint_data_filtered(
        data: &CheckpointData,
        extra_prefixes: &[&str],
    ) -> Result<Model<f32>> {
        let mut reader = data.meta.clone().reader();
        let config = LpienetConfig::from_reader(&mut reader)?;
        let params: Vec<(String, Tensor<f32>)> = data
            .tensors
            .iter()
            .filter(|(n, _)| {
                !n.starts_with(OPT_M_PREFIX)
                    && !n.starts_with(OPT_V_PREFIX)
                    && !extra_prefixes.iter().any(|p| n.starts_with(p))
            })
            .cloned()
            .collect();
        let mut model = Model::build(config, 0)?;
        model.load_param_map(&params)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_zero_grad_keeps_weights() {
        let mut p = Tensor::<f32>::full(Shape::new(1, 1, 1, 1), 1.5);
        let g = Tensor::<f32>::zeros(p.shape());
        let mut m = Tensor::zeros(p.shape());
        let mut v = Tensor::zeros(p.shape());
        adam_update_tensor(&mut p, &g, &mut m, &mut v, 1, 0.1, AdamHyper::default());
        assert_eq!(p.scalar_value(), 1.5);
    }

    #[test]
    fn adam_first_step_magnitude_is_lr() {
        let mut p = Tensor::<f32>::zeros(Shape::new(1, 1, 1, 1));
        let g = Tensor::<f32>::full(p.shape(), 1.0);
        let mut m = Tensor::zeros(p.shape());
        let mut v = Tensor::zeros(p.shape());
        adam_update_tensor(&mut p, &g, &mut m, &mut v, 1, 0.1, AdamHyper::default());
        assert!((p.scalar_value() + 0.1).abs() < 1e-6, "step {}", p.scalar_value());
    }

    #[test]
    fn adam_converges_on_quadratic() {
        // f(w) = (w - 3)^2, gradient 2 (w - 3).
        let mut p = Tensor::<f32>::zeros(Shape::new(1, 1, 1, 1));
        let mut m = Tensor::zeros(p.shape());
        let mut v = Tensor::zeros(p.shape());
        for step in 1..=100 {
            let g = Tensor::<f32>::full(p.shape(), 2.0 * (p.scalar_value() - 3.0));
            adam_update_tensor(&mut p, &g, &mut m, &mut v, step, 0.3, AdamHyper::default());
        }
        assert!((p.scalar_value() - 3.0).abs() < 0.1, "w = {}", p.scalar_value());
    }

    #[test]
    fn plateau_keeps_lr_while_improving() {
        let cfg = TrainConfig::default();
        let history: Vec<f64> = (0..30).map(|i| 1.0 / (i + 1) as f64).collect();
        assert_eq!(plateau_schedule(&history, &cfg), cfg.lr0);
    }

    #[test]
    fn plateau_halves_after_patience_flats() {
        let cfg = TrainConfig::default();
        let history = vec![1.0; cfg.plateau_patience + 1];
        assert_eq!(plateau_schedule(&history, &cfg), cfg.lr0 * 0.5);
    }

    #[test]
    fn plateau_floors_exactly_at_lr_min() {
        let cfg = TrainConfig::default();
        let history = vec![1.0; 1000];
        let lr = plateau_schedule(&history, &cfg);
        assert_eq!(lr, cfg.lr_min);
        // The decay path passes through 1e-3, 5e-4, ...
        let mut s = PlateauScheduler::new(&cfg);
        let mut seen = Vec::new();
        for _ in 0..1000 {
            let lr = s.observe(1.0);
            if seen.last() != Some(&lr) {
                seen.push(lr);
            }
        }
        assert_eq!(seen[0], 2e-3);
        assert_eq!(seen[1], 1e-3);
        assert_eq!(seen[2], 5e-4);
        assert_eq!(*seen.last().unwrap(), 1e-6);
    }

    #[test]
    fn augment_identity_draw_and_inverse() {
        let a = Tensor::<f32>::from_fn(Shape::new(1, 1, 4, 4), |_, _, y, x| (y * 4 + x) as f32);
        let b = a.map(|v| v * 2.0);
        // Find a seed whose first draw is the identity transform.
        let mut seed = 0;
        loop {
            let mut rng = Prng::seed(seed);
            if rng.below(8) == 0 {
                break;
            }
            seed += 1;
        }
        let mut rng = Prng::seed(seed);
        let (d, c) = augment_pair(&a, &b, &mut rng);
        assert_eq!(d, a);
        assert_eq!(c, b);
    }

    #[test]
    fn augment_draws_are_roughly_uniform() {
        let mut rng = Prng::seed(77);
        let mut counts = [0usize; 8];
        for _ in 0..8000 {
            counts[rng.below(8) as usize] += 1;
        }
        for (i, c) in counts.iter().enumerate() {
            assert!(
                (900..=1100).contains(c),
                "transform {i} drawn {c} times of 8000"
            );
        }
    }

    #[test]
    fn grid_patch_counts() {
        let img3000x2000 = Tensor::<f32>::zeros(Shape::new(1, 1, 3000, 2000));
        assert_eq!(grid_patches(&img3000x2000, 1000).unwrap().len(), 6);
        let img800 = Tensor::<f32>::zeros(Shape::new(1, 1, 800, 800));
        assert_eq!(grid_patches(&img800, 400).unwrap().len(), 4);
        let img64 = Tensor::<f32>::from_fn(Shape::new(1, 1, 64, 64), |_, _, y, x| {
            (y * 64 + x) as f32
        });
        let whole = grid_patches(&img64, 64).unwrap();
        assert_eq!(whole.len(), 1);
        assert_eq!(whole[0], img64);
    }

    #[test]
    fn split_is_seeded_and_disjoint() {
        let (t1, v1) = split_indices(10, 0.1, 42);
        let (t2, v2) = split_indices(10, 0.1, 42);
        assert_eq!((t1.clone(), v1.clone()), (t2, v2));
        assert_eq!(v1.len(), 1);
        assert_eq!(t1.len(), 9);
        let mut all: Vec<usize> = t1.iter().chain(v1.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn train_config_kv_roundtrip() {
        let mut cfg = TrainConfig {
            epochs: 17,
            patch_schedule: vec![(0, 16), (5, 32), (10, 0)],
            ..Default::default()
        };
        cfg.loss.alpha = 0.25;
        let kv = cfg.to_kv();
        let mut r = kv.reader();
        let back = TrainConfig::from_reader(&mut r).unwrap();
        r.finish().unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn schedule_resolution() {
        let cfg = TrainConfig {
            epochs: 100,
            ..Default::default()
        };
        assert_eq!(cfg.patch_size_for_epoch(0), 64);
        assert_eq!(cfg.patch_size_for_epoch(39), 64);
        assert_eq!(cfg.patch_size_for_epoch(40), 128);
        assert_eq!(cfg.patch_size_for_epoch(80), 0);
    }
}
