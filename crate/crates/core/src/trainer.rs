//! Joint clustering and representation learning.
//!
//! Each iteration draws a mini-batch (without replacement within an epoch),
//! assigns every sample to its nearest centroid using the head's current
//! features, and queues the `k_m` closest samples with their pseudo-labels.
//! Whenever `n_m` queued samples have accumulated, the head is fine-tuned on
//! them one SGD step per sample. Finally every sample of the mini-batch
//! updates its assigned centroid.
//!
//! Fine-tuning moves the features the centroids are built from. In `Full`
//! mode, once the head has been trained at least once, centroid updates use
//! features recomputed under the rolled-back weights `W + eta * dW` so that
//! they stay consistent with the previous iteration's representation.
//! `BaselineI` skips the rollback, `BaselineII` never trains the head, and
//! `BaselineIII` runs full-set Lloyd on frozen features: by default the
//! backbone output itself, so that a `Flatten` backbone gives plain k-means on
//! raw pixels.

use std::fmt;
use std::str::FromStr;

use crate::backbone::{Backbone, BackboneKind, BackboneSpec, Shape};
use crate::clustering::{lloyd_kmeans, seed_kmeanspp, Assignment, CentroidBank};
use crate::config::KvDoc;
use crate::dataio::{Checkpoint, Dataset, Progress};
use crate::error::{Error, Result};
use crate::head::{init_head, one_hot, sse_loss, FeatureHead};
use crate::metrics::nmi;
use crate::rng::SeededRng;
use crate::tensor::DenseVector;

/// Fine-tune losses above this abort the run.
pub const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Full,
    /// Joint training without drift compensation.
    BaselineI,
    /// Mini-batch k-means on the frozen initial head.
    BaselineII,
    /// Full-set Lloyd k-means on frozen features (see [`FullSetFeatures`]).
    BaselineIII,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::BaselineI => "baseline1",
            Mode::BaselineII => "baseline2",
            Mode::BaselineIII => "baseline3",
        }
    }

    fn trains_head(&self) -> bool {
        matches!(self, Mode::Full | Mode::BaselineI)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "baseline1" => Ok(Mode::BaselineI),
            "baseline2" => Ok(Mode::BaselineII),
            "baseline3" => Ok(Mode::BaselineIII),
            other => Err(Error::config(
                "mode",
                format!("unknown mode `{other}` (expected full|baseline1|baseline2|baseline3)"),
            )),
        }
    }
}

/// Which weights the drift compensation reconstructs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RollbackMode {
    /// Undo only the most recent SGD step (`W + eta * dW`).
    LastStep,
    /// Use the weights from before the most recent fine-tune pass.
    FullPass,
}

impl RollbackMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RollbackMode::LastStep => "last-step",
            RollbackMode::FullPass => "full-pass",
        }
    }
}

impl fmt::Display for RollbackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RollbackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last-step" => Ok(RollbackMode::LastStep),
            "full-pass" => Ok(RollbackMode::FullPass),
            other => Err(Error::config(
                "rollback",
                format!("unknown rollback `{other}` (expected last-step|full-pass)"),
            )),
        }
    }
}

/// Features clustered by `BaselineIII`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FullSetFeatures {
    /// Backbone output.
    Backbone,
    /// Hidden features of the randomly initialized, untrained head.
    Head,
}

impl FullSetFeatures {
    pub fn as_str(&self) -> &'static str {
        match self {
            FullSetFeatures::Backbone => "backbone",
            FullSetFeatures::Head => "head",
        }
    }
}

impl fmt::Display for FullSetFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FullSetFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backbone" => Ok(FullSetFeatures::Backbone),
            "head" => Ok(FullSetFeatures::Head),
            other => Err(Error::config(
                "baseline3_features",
                format!("unknown feature source `{other}` (expected backbone|head)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub k: usize,
    /// Mini-batch size; also the number of queued samples that triggers a
    /// fine-tune pass.
    pub n_m: usize,
    /// Samples per mini-batch admitted to the fine-tune queue.
    pub k_m: usize,
    pub eta: f64,
    pub epochs: usize,
    /// Optional cap on the total number of mini-batch iterations.
    pub max_iters: Option<u64>,
    pub mode: Mode,
    pub seed: u64,
    pub hidden_dim: usize,
    pub rollback: RollbackMode,
    pub lloyd_max_iters: usize,
    pub lloyd_tol: f64,
    pub baseline3_features: FullSetFeatures,
    /// Recompute centroid-update features from stored weight snapshots and
    /// record the largest deviation from the rollback reconstruction.
    pub verify_rollback: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            k: 10,
            n_m: 50,
            k_m: 10,
            eta: 0.01,
            epochs: 10,
            max_iters: None,
            mode: Mode::Full,
            seed: 0,
            hidden_dim: 128,
            rollback: RollbackMode::LastStep,
            lloyd_max_iters: 300,
            lloyd_tol: 1e-6,
            baseline3_features: FullSetFeatures::Backbone,
            verify_rollback: false,
        }
    }
}

/// Keys understood by [`TrainerConfig::apply_kv`].
pub const TRAINER_KEYS: &[&str] = &[
    "k",
    "nm",
    "km",
    "eta",
    "epochs",
    "max_iters",
    "mode",
    "seed",
    "hidden_dim",
    "rollback",
    "lloyd_max_iters",
    "lloyd_tol",
    "baseline3_features",
];

/// Backbone keys stored in the canonical run description.
pub const BACKBONE_KEYS: &[&str] = &[
    "backbone",
    "backbone_dim",
    "backbone_seed",
    "input_height",
    "input_width",
    "input_channels",
];

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::config("k", format!("need k >= 2, got {}", self.k)));
        }
        if self.n_m == 0 {
            return Err(Error::config("nm", "mini-batch size must be positive"));
        }
        if self.k_m == 0 || self.k_m > self.n_m {
            return Err(Error::config(
                "km",
                format!("need 1 <= km <= nm = {}, got {}", self.n_m, self.k_m),
            ));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::config(
                "eta",
                format!("need finite eta >= 0, got {}", self.eta),
            ));
        }
        if self.hidden_dim == 0 {
            return Err(Error::config("hidden_dim", "must be positive"));
        }
        if self.max_iters == Some(0) {
            return Err(Error::config("max_iters", "must be positive when set"));
        }
        if self.lloyd_tol.is_nan() || self.lloyd_tol < 0.0 {
            return Err(Error::config("lloyd_tol", "must be >= 0"));
        }
        Ok(())
    }

    /// Overrides fields from the trainer keys present in `doc`.
    pub fn apply_kv(&mut self, doc: &KvDoc) -> Result<()> {
        if let Some(v) = doc.parse_opt("k")? {
            self.k = v;
        }
        if let Some(v) = doc.parse_opt("nm")? {
            self.n_m = v;
        }
        if let Some(v) = doc.parse_opt("km")? {
            self.k_m = v;
        }
        if let Some(v) = doc.parse_opt("eta")? {
            self.eta = v;
        }
        if let Some(v) = doc.parse_opt("epochs")? {
            self.epochs = v;
        }
        if let Some(v) = doc.parse_opt::<u64>("max_iters")? {
            self.max_iters = (v > 0).then_some(v);
        }
        if let Some(v) = doc.parse_opt("mode")? {
            self.mode = v;
        }
        if let Some(v) = doc.parse_opt("seed")? {
            self.seed = v;
        }
        if let Some(v) = doc.parse_opt("hidden_dim")? {
            self.hidden_dim = v;
        }
        if let Some(v) = doc.parse_opt("rollback")? {
            self.rollback = v;
        }
        if let Some(v) = doc.parse_opt("lloyd_max_iters")? {
            self.lloyd_max_iters = v;
        }
        if let Some(v) = doc.parse_opt("lloyd_tol")? {
            self.lloyd_tol = v;
        }
        if let Some(v) = doc.parse_opt("baseline3_features")? {
            self.baseline3_features = v;
        }
        Ok(())
    }

    pub fn write_kv(&self, doc: &mut KvDoc) {
        doc.set("k", self.k);
        doc.set("nm", self.n_m);
        doc.set("km", self.k_m);
        doc.set("eta", self.eta);
        doc.set("epochs", self.epochs);
        doc.set("max_iters", self.max_iters.unwrap_or(0));
        doc.set("mode", self.mode);
        doc.set("seed", self.seed);
        doc.set("hidden_dim", self.hidden_dim);
        doc.set("rollback", self.rollback);
        doc.set("lloyd_max_iters", self.lloyd_max_iters);
        doc.set("lloyd_tol", self.lloyd_tol);
        doc.set("baseline3_features", self.baseline3_features);
    }
}

/// Canonical text describing a run: trainer config plus backbone spec.
pub fn canonical_config(config: &TrainerConfig, backbone: &BackboneSpec) -> String {
    let mut doc = KvDoc::new();
    config.write_kv(&mut doc);
    doc.set("backbone", backbone.kind);
    doc.set("backbone_dim", backbone.output_dim);
    doc.set("backbone_seed", backbone.seed);
    doc.set("input_height", backbone.input_shape.height);
    doc.set("input_width", backbone.input_shape.width);
    doc.set("input_channels", backbone.input_shape.channels);
    doc.to_text()
}

pub fn parse_canonical_config(text: &str) -> Result<(TrainerConfig, BackboneSpec)> {
    let doc = KvDoc::parse(text)?;
    let allowed: Vec<&str> = TRAINER_KEYS.iter().chain(BACKBONE_KEYS).copied().collect();
    doc.reject_unknown(&allowed)?;
    let mut config = TrainerConfig::default();
    config.apply_kv(&doc)?;
    let need = |key: &str| -> Result<usize> {
        doc.parse_opt(key)?
            .ok_or_else(|| Error::config(key, "missing from canonical config"))
    };
    let kind: BackboneKind = doc
        .parse_opt("backbone")?
        .ok_or_else(|| Error::config("backbone", "missing from canonical config"))?;
    let spec = BackboneSpec {
        kind,
        input_shape: Shape::new(
            need("input_height")?,
            need("input_width")?,
            need("input_channels")?,
        ),
        output_dim: need("backbone_dim")?,
        seed: doc.parse_opt("backbone_seed")?.unwrap_or(0),
    };
    Ok((config, spec))
}

/// Pending `(sample index, pseudo-label)` pairs awaiting a fine-tune pass.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FineTuneBuffer {
    items: Vec<(usize, usize)>,
    capacity: usize,
}

impl FineTuneBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            items: Vec::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, sample: usize, label: usize) {
        self.items.push((sample, label));
    }

    /// Removes and returns the oldest `capacity` items once that many are queued.
    pub fn take_full(&mut self) -> Option<Vec<(usize, usize)>> {
        (self.items.len() >= self.capacity).then(|| self.items.drain(..self.capacity).collect())
    }

    pub fn items(&self) -> &[(usize, usize)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub labels: Vec<usize>,
    /// NMI after each epoch (empty without ground truth).
    pub nmi_history: Vec<f64>,
    /// NMI of `labels` against ground truth, when available.
    pub final_nmi: Option<f64>,
    pub centroid_bank: CentroidBank,
    pub head: FeatureHead,
    pub finetunes: u64,
    pub batches: u64,
    /// Largest deviation between rollback features and features from stored
    /// pre-step weights, when `verify_rollback` is on and a check ran.
    pub max_rollback_error: Option<f64>,
}

/// Indices of the `k_m` smallest distances (ties to the lower index),
/// returned in ascending index order.
pub fn select_top_km(assignments: &[Assignment], k_m: usize) -> Result<Vec<usize>> {
    if k_m > assignments.len() {
        return Err(Error::invalid(format!(
            "k_m = {k_m} exceeds batch size {}",
            assignments.len()
        )));
    }
    let mut order: Vec<usize> = (0..assignments.len()).collect();
    order.sort_by(|&a, &b| {
        assignments[a]
            .distance
            .total_cmp(&assignments[b].distance)
            .then(a.cmp(&b))
    });
    let mut top = order[..k_m].to_vec();
    top.sort_unstable();
    Ok(top)
}

/// Iterative trainer for the mini-batch modes (`Full`, `BaselineI`,
/// `BaselineII`). Progress can be checkpointed between epochs.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainerConfig,
    backbone: BackboneSpec,
    inputs: Vec<DenseVector>,
    ground_truth: Option<Vec<usize>>,
    head: FeatureHead,
    bank: CentroidBank,
    rng: SeededRng,
    buffer: FineTuneBuffer,
    progress: Progress,
    pass_snapshot: Option<FeatureHead>,
    // Verification only; not checkpointed.
    before_last_step: Option<FeatureHead>,
    max_rollback_error: Option<f64>,
}

fn extract_all(dataset: &Dataset, spec: &BackboneSpec) -> Result<Vec<DenseVector>> {
    let backbone = Backbone::new(*spec)?;
    if backbone.spec().input_shape != dataset.shape() {
        return Err(Error::DimensionMismatch {
            context: "backbone input shape vs dataset",
            expected: backbone.spec().input_shape.len(),
            actual: dataset.shape().len(),
        });
    }
    (0..dataset.len())
        .map(|i| backbone.extract(&dataset.sample(i)))
        .collect()
}

fn check_run_inputs(
    dataset: &Dataset,
    config: &TrainerConfig,
    ground_truth: Option<&[usize]>,
) -> Result<()> {
    config.validate()?;
    if dataset.len() < config.k {
        return Err(Error::invalid(format!(
            "dataset has {} samples, fewer than k = {}",
            dataset.len(),
            config.k
        )));
    }
    if let Some(gt) = ground_truth {
        if gt.len() != dataset.len() {
            return Err(Error::Consistency(format!(
                "{} ground-truth labels for {} samples",
                gt.len(),
                dataset.len()
            )));
        }
    }
    Ok(())
}

impl Trainer {
    pub fn new(
        dataset: &Dataset,
        backbone: BackboneSpec,
        config: TrainerConfig,
        ground_truth: Option<&[usize]>,
    ) -> Result<Self> {
        check_run_inputs(dataset, &config, ground_truth)?;
        if config.mode == Mode::BaselineIII {
            return Err(Error::invalid("baseline3 is a full-set mode; use run()"));
        }
        let inputs = extract_all(dataset, &backbone)?;
        let mut rng = SeededRng::new(config.seed);
        let head = init_head(
            backbone.output_dim,
            config.hidden_dim,
            config.k,
            config.eta,
            &mut rng,
        )?;
        let features = inputs
            .iter()
            .map(|x| head.features(x))
            .collect::<Result<Vec<_>>>()?;
        let bank = seed_kmeanspp(&features, config.k, &mut rng)?;
        Ok(Self {
            buffer: FineTuneBuffer::new(config.n_m),
            config,
            backbone,
            inputs,
            ground_truth: ground_truth.map(<[usize]>::to_vec),
            head,
            bank,
            rng,
            progress: Progress::default(),
            pass_snapshot: None,
            before_last_step: None,
            max_rollback_error: None,
        })
    }

    /// Restores a trainer from a checkpoint taken on the same dataset.
    pub fn from_checkpoint(
        dataset: &Dataset,
        ckpt: Checkpoint,
        ground_truth: Option<&[usize]>,
    ) -> Result<Self> {
        let (config, backbone) = parse_canonical_config(&ckpt.config_text)?;
        check_run_inputs(dataset, &config, ground_truth)?;
        if config.mode == Mode::BaselineIII {
            return Err(Error::invalid("baseline3 runs cannot be resumed"));
        }
        if ckpt.head.k() != config.k || ckpt.bank.k() != config.k {
            return Err(Error::Consistency(
                "checkpoint k disagrees with its config".into(),
            ));
        }
        let inputs = extract_all(dataset, &backbone)?;
        let mut buffer = FineTuneBuffer::new(config.n_m);
        for &(s, l) in &ckpt.progress.buffer {
            if s >= dataset.len() || l >= config.k {
                return Err(Error::Consistency(format!(
                    "buffered item ({s}, {l}) out of range"
                )));
            }
            buffer.push(s, l);
        }
        Ok(Self {
            buffer,
            config,
            backbone,
            inputs,
            ground_truth: ground_truth.map(<[usize]>::to_vec),
            head: ckpt.head,
            bank: ckpt.bank,
            rng: ckpt.rng,
            progress: ckpt.progress,
            pass_snapshot: ckpt.pass_snapshot,
            before_last_step: None,
            max_rollback_error: None,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut progress = self.progress.clone();
        progress.buffer = self.buffer.items().to_vec();
        Checkpoint {
            format_version: crate::dataio::checkpoint::FORMAT_VERSION,
            config_text: canonical_config(&self.config, &self.backbone),
            head: self.head.clone(),
            bank: self.bank.clone(),
            rng: self.rng.clone(),
            progress,
            pass_snapshot: self.pass_snapshot.clone(),
        }
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn head(&self) -> &FeatureHead {
        &self.head
    }

    pub fn bank(&self) -> &CentroidBank {
        &self.bank
    }

    pub fn progress(&self) -> &Progress {
        &self.progress
    }

    pub fn is_done(&self) -> bool {
        self.progress.epochs_done >= self.config.epochs as u64
            || self
                .config
                .max_iters
                .is_some_and(|t| self.progress.batches_done >= t)
    }

    /// Runs one epoch (or what remains of the iteration budget).
    pub fn run_epoch(&mut self) -> Result<()> {
        let n = self.inputs.len();
        let mut order: Vec<usize> = (0..n).collect();
        self.rng.shuffle(&mut order);
        for batch in order.chunks(self.config.n_m) {
            if self
                .config
                .max_iters
                .is_some_and(|t| self.progress.batches_done >= t)
            {
                break;
            }
            self.process_batch(batch)?;
            self.progress.batches_done += 1;
        }
        self.progress.epochs_done += 1;
        if let Some(gt) = &self.ground_truth {
            let labels = self.current_labels()?;
            self.progress.nmi_history.push(nmi(gt, &labels)?);
        }
        Ok(())
    }

    pub fn run_to_end(mut self) -> Result<RunResult> {
        while !self.is_done() {
            self.run_epoch()?;
        }
        self.finish()
    }

    /// Final full assignment pass.
    pub fn finish(self) -> Result<RunResult> {
        let labels = self.current_labels()?;
        let final_nmi = self
            .ground_truth
            .as_ref()
            .map(|gt| nmi(gt, &labels))
            .transpose()?;
        Ok(RunResult {
            labels,
            nmi_history: self.progress.nmi_history,
            final_nmi,
            centroid_bank: self.bank,
            head: self.head,
            finetunes: self.progress.finetunes,
            batches: self.progress.batches_done,
            max_rollback_error: self.max_rollback_error,
        })
    }

    pub fn current_labels(&self) -> Result<Vec<usize>> {
        self.inputs
            .iter()
            .map(|x| Ok(self.bank.nearest(self.head.features(x)?.as_slice()).0))
            .collect()
    }

    fn features_under(&self, head: &FeatureHead, batch: &[usize]) -> Result<Vec<DenseVector>> {
        batch
            .iter()
            .map(|&i| head.features(&self.inputs[i]))
            .collect()
    }

    fn process_batch(&mut self, batch: &[usize]) -> Result<()> {
        let iteration = self.progress.batches_done + 1;
        let feats = self.features_under(&self.head, batch)?;
        let assigns = feats
            .iter()
            .map(|h| self.bank.assign(h))
            .collect::<Result<Vec<_>>>()?;

        let mut head_changed = false;
        if self.config.mode.trains_head() {
            let k_m = self.config.k_m.min(batch.len());
            for p in select_top_km(&assigns, k_m)? {
                self.buffer.push(batch[p], assigns[p].label);
            }
            while let Some(items) = self.buffer.take_full() {
                self.fine_tune(&items, iteration)?;
                head_changed = true;
            }
        }

        let compensate = self.config.mode == Mode::Full && self.progress.has_finetuned;
        let update_feats = if compensate {
            let previous = match self.config.rollback {
                RollbackMode::LastStep => self.head.rolled_back()?,
                RollbackMode::FullPass => self
                    .pass_snapshot
                    .clone()
                    .ok_or_else(|| Error::Consistency("missing fine-tune snapshot".into()))?,
            };
            let rolled = self.features_under(&previous, batch)?;
            if self.config.verify_rollback {
                self.verify_rollback(batch, &rolled)?;
            }
            rolled
        } else if head_changed {
            self.features_under(&self.head, batch)?
        } else {
            feats
        };

        for (a, h) in assigns.iter().zip(&update_feats) {
            self.bank.update_centroid(a.label, h)?;
        }
        Ok(())
    }

    fn verify_rollback(&mut self, batch: &[usize], rolled: &[DenseVector]) -> Result<()> {
        let reference = match self.config.rollback {
            RollbackMode::LastStep => self.before_last_step.as_ref(),
            RollbackMode::FullPass => self.pass_snapshot.as_ref(),
        };
        let Some(reference) = reference else {
            return Ok(());
        };
        let expected = self.features_under(reference, batch)?;
        let err = expected
            .iter()
            .zip(rolled)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        self.max_rollback_error = Some(self.max_rollback_error.unwrap_or(0.0).max(err));
        Ok(())
    }

    fn fine_tune(&mut self, items: &[(usize, usize)], iteration: u64) -> Result<()> {
        if self.config.rollback == RollbackMode::FullPass {
            self.pass_snapshot = Some(self.head.clone());
        }
        let last = items.len() - 1;
        for (n, &(sample, label)) in items.iter().enumerate() {
            if self.config.verify_rollback && n == last {
                self.before_last_step = Some(self.head.clone());
            }
            let x = &self.inputs[sample];
            let target = one_hot(self.config.k, label)?;
            let trace = self.head.forward(x)?;
            let loss = sse_loss(&trace.y, &target)?;
            if !loss.is_finite() || loss > DIVERGENCE_LOSS {
                return Err(Error::Divergence { iteration, loss });
            }
            let grads = self.head.backward(&trace, &target)?;
            self.head.sgd_step(grads).map_err(|e| match e {
                Error::NonFinite(_) => Error::Divergence {
                    iteration,
                    loss: f64::NAN,
                },
                other => other,
            })?;
        }
        self.progress.finetunes += 1;
        self.progress.has_finetuned = true;
        Ok(())
    }
}

/// Full method (`Full`) or any baseline, as selected by `config.mode`.
pub fn run(
    dataset: &Dataset,
    backbone: BackboneSpec,
    config: TrainerConfig,
    ground_truth: Option<&[usize]>,
) -> Result<RunResult> {
    match config.mode {
        Mode::BaselineIII => run_full_set(dataset, backbone, config, ground_truth),
        _ => Trainer::new(dataset, backbone, config, ground_truth)?.run_to_end(),
    }
}

/// The joint method with drift compensation; `config.mode` is ignored.
pub fn run_full(
    dataset: &Dataset,
    backbone: BackboneSpec,
    mut config: TrainerConfig,
    ground_truth: Option<&[usize]>,
) -> Result<RunResult> {
    config.mode = Mode::Full;
    run(dataset, backbone, config, ground_truth)
}

/// One of the three baselines; rejects `Mode::Full`.
pub fn run_baseline(
    dataset: &Dataset,
    backbone: BackboneSpec,
    config: TrainerConfig,
    ground_truth: Option<&[usize]>,
) -> Result<RunResult> {
    if config.mode == Mode::Full {
        return Err(Error::config("mode", "run_baseline needs a baseline mode"));
    }
    run(dataset, backbone, config, ground_truth)
}

fn run_full_set(
    dataset: &Dataset,
    backbone: BackboneSpec,
    config: TrainerConfig,
    ground_truth: Option<&[usize]>,
) -> Result<RunResult> {
    check_run_inputs(dataset, &config, ground_truth)?;
    let inputs = extract_all(dataset, &backbone)?;
    let mut rng = SeededRng::new(config.seed);
    let head = init_head(
        backbone.output_dim,
        config.hidden_dim,
        config.k,
        config.eta,
        &mut rng,
    )?;
    let features = match config.baseline3_features {
        FullSetFeatures::Backbone => inputs,
        FullSetFeatures::Head => inputs
            .iter()
            .map(|x| head.features(x))
            .collect::<Result<Vec<_>>>()?,
    };
    let lloyd = lloyd_kmeans(
        &features,
        config.k,
        &mut rng,
        config.lloyd_max_iters,
        config.lloyd_tol,
    )?;
    let final_nmi = ground_truth.map(|gt| nmi(gt, &lloyd.labels)).transpose()?;
    Ok(RunResult {
        labels: lloyd.labels,
        nmi_history: final_nmi.into_iter().collect(),
        final_nmi,
        centroid_bank: lloyd.bank,
        head,
        finetunes: 0,
        batches: 0,
        max_rollback_error: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::gen_blobs;

    fn assignments(d: &[f64]) -> Vec<Assignment> {
        d.iter()
            .map(|&distance| Assignment {
                label: 0,
                distance,
                gamma: 1.0,
            })
            .collect()
    }

    #[test]
    fn top_km_small_cases() {
        assert_eq!(
            select_top_km(&assignments(&[0.5, 0.1, 0.9, 0.3]), 2).unwrap(),
            vec![1, 3]
        );
        assert_eq!(
            select_top_km(&assignments(&[0.5, 0.1, 0.9]), 3).unwrap(),
            vec![0, 1, 2]
        );
        assert_eq!(
            select_top_km(&assignments(&[1.0, 1.0, 1.0]), 2).unwrap(),
            vec![0, 1]
        );
        assert!(select_top_km(&assignments(&[1.0]), 2).is_err());
    }

    #[test]
    fn top_km_matches_sort_oracle() {
        let mut rng = SeededRng::new(50);
        let d: Vec<f64> = (0..50).map(|_| rng.uniform(0.0, 10.0)).collect();
        let mut sorted: Vec<(f64, usize)> = d.iter().copied().zip(0..).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want: Vec<usize> = sorted[..10].iter().map(|p| p.1).collect();
        want.sort_unstable();
        assert_eq!(select_top_km(&assignments(&d), 10).unwrap(), want);
    }

    #[test]
    fn config_validation() {
        let ok = TrainerConfig::default();
        assert!(ok.validate().is_ok());
        for (key, cfg) in [
            (
                "km",
                TrainerConfig {
                    k_m: 0,
                    ..ok.clone()
                },
            ),
            (
                "km",
                TrainerConfig {
                    k_m: 51,
                    ..ok.clone()
                },
            ),
            ("k", TrainerConfig { k: 1, ..ok.clone() }),
            (
                "eta",
                TrainerConfig {
                    eta: -0.1,
                    ..ok.clone()
                },
            ),
            (
                "nm",
                TrainerConfig {
                    n_m: 0,
                    ..ok.clone()
                },
            ),
        ] {
            match cfg.validate() {
                Err(Error::Config { key: k, .. }) => assert_eq!(k, key),
                other => panic!("{key}: {other:?}"),
            }
        }
    }

    #[test]
    fn canonical_config_roundtrip() {
        let cfg = TrainerConfig {
            eta: 0.123456789,
            max_iters: Some(7),
            mode: Mode::BaselineI,
            rollback: RollbackMode::FullPass,
            baseline3_features: FullSetFeatures::Head,
            ..TrainerConfig::default()
        };
        let spec = BackboneSpec::random_projection(Shape::new(28, 28, 1), 64, 5);
        let text = canonical_config(&cfg, &spec);
        let (c2, s2) = parse_canonical_config(&text).unwrap();
        assert_eq!(c2, cfg);
        assert_eq!(s2, spec);
    }

    #[test]
    fn buffer_fires_at_capacity() {
        let mut b = FineTuneBuffer::new(3);
        b.push(0, 0);
        b.push(1, 1);
        assert!(b.take_full().is_none());
        b.push(2, 0);
        b.push(3, 1);
        assert_eq!(b.take_full().unwrap(), vec![(0, 0), (1, 1), (2, 0)]);
        assert_eq!(b.items(), &[(3, 1)]);
    }

    fn small_blobs(seed: u64) -> Dataset {
        gen_blobs(3, 40, 4, 10.0, 0.5, &mut SeededRng::new(seed)).unwrap()
    }

    fn small_config(mode: Mode) -> TrainerConfig {
        TrainerConfig {
            k: 3,
            n_m: 10,
            k_m: 2,
            epochs: 3,
            hidden_dim: 8,
            mode,
            seed: 4,
            ..TrainerConfig::default()
        }
    }

    #[test]
    fn zero_epochs_is_seeding_plus_assignment() {
        let data = small_blobs(1);
        let spec = BackboneSpec::flatten(data.shape());
        let cfg = TrainerConfig {
            epochs: 0,
            ..small_config(Mode::Full)
        };
        let trainer = Trainer::new(&data, spec, cfg.clone(), data.labels()).unwrap();
        let bank = trainer.bank().clone();
        let head = trainer.head().clone();
        let r = trainer.run_to_end().unwrap();
        assert_eq!(r.batches, 0);
        assert!(r.nmi_history.is_empty());
        for i in 0..data.len() {
            let x = DenseVector::new(data.sample(i)).unwrap();
            assert_eq!(
                r.labels[i],
                bank.assign(&head.features(&x).unwrap()).unwrap().label
            );
        }
    }

    #[test]
    fn rejects_small_dataset_and_bad_mode() {
        let data = gen_blobs(2, 1, 3, 5.0, 0.1, &mut SeededRng::new(0)).unwrap();
        let spec = BackboneSpec::flatten(data.shape());
        assert!(run(&data, spec, small_config(Mode::Full), None).is_err());
        let data = small_blobs(2);
        let spec = BackboneSpec::flatten(data.shape());
        assert!(run_baseline(&data, spec, small_config(Mode::Full), None).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let data = small_blobs(3);
        let spec = BackboneSpec::flatten(data.shape());
        let cfg = TrainerConfig {
            eta: 1e6,
            ..small_config(Mode::Full)
        };
        match run(&data, spec, cfg, None) {
            Err(Error::Divergence { iteration, .. }) => assert!(iteration >= 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn labels_in_range_and_deterministic() {
        let data = small_blobs(4);
        let spec = BackboneSpec::flatten(data.shape());
        for mode in [
            Mode::Full,
            Mode::BaselineI,
            Mode::BaselineII,
            Mode::BaselineIII,
        ] {
            let a = run(&data, spec, small_config(mode), data.labels()).unwrap();
            let b = run(&data, spec, small_config(mode), data.labels()).unwrap();
            assert_eq!(a.labels, b.labels, "{mode}");
            assert_eq!(a.nmi_history, b.nmi_history, "{mode}");
            assert_eq!(a.labels.len(), data.len());
            assert!(a.labels.iter().all(|&l| l < 3));
        }
    }

    #[test]
    fn max_iters_caps_batches() {
        let data = small_blobs(5);
        let spec = BackboneSpec::flatten(data.shape());
        let cfg = TrainerConfig {
            max_iters: Some(5),
            ..small_config(Mode::Full)
        };
        let r = run(&data, spec, cfg, None).unwrap();
        assert_eq!(r.batches, 5);
    }
}
