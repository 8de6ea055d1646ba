//! Experiment orchestration: grid search inside nested cross-validation,
//! repeated over seeds, with per-trial resource accounting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Optimizer, OptimizerKind, Tape};
use crate::classify::{nll_loss_var, ClassifierConfig, ClassifierModel, LayerKind};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::generate::{
    composite_loss_var, identity_baseline, GeneratorConfig, GeneratorModel, GeneratorVariant,
};
use crate::graph::Graph;
use crate::harness::folds::{
    stratified_folds, stratified_train_val, subject_folds, subject_train_val,
};
use crate::harness::report::{ExperimentReport, GridCell, GridSpec, TrialReport};
use crate::harness::train::{peak_rss_bytes, run_train_loop, TrainLoopCfg, TrainOutcome, TrialTask};
use crate::linalg::{Matrix, Rng};
use crate::metrics::{evaluate_pair, mean_report, EvalReport};

/// Seed stream for minibatch shuffling, distinct from model-init streams.
const SHUFFLE_STREAM: u64 = 0x5A;

/// Read-only random access to graphs. The harness addresses data only
/// through this trait so tests can interpose an access-logging wrapper
/// and audit test-fold isolation.
pub trait GraphSource: Sync {
    fn len(&self) -> usize;
    fn get(&self, idx: usize) -> &Graph;
}

impl GraphSource for Dataset {
    fn len(&self) -> usize {
        self.graphs.len()
    }

    fn get(&self, idx: usize) -> &Graph {
        &self.graphs[idx]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Classify,
    Generate,
}

/// Everything a run needs; deserializable from the CLI's JSON config.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub layer_kind: LayerKind,
    pub variant: GeneratorVariant,
    pub n_layers: usize,
    pub hidden_dim: usize,
    pub decoder_dim: usize,
    pub latent_dim: Option<usize>,
    pub ffn_hidden: usize,
    pub grid: GridSpec,
    /// None picks the task default: 500 (classification), 200 (generation).
    pub max_epochs: Option<usize>,
    pub patience: usize,
    pub batch_size: usize,
    pub n_folds: usize,
    pub val_fraction: f64,
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    /// 0 lets the worker pool pick the available parallelism.
    pub workers: usize,
    pub optimizer: OptimizerKind,
    pub lambda: (f64, f64, f64),
    pub add_self_loops: bool,
    pub target_radius: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: TaskKind::Classify,
            layer_kind: LayerKind::Rgc,
            variant: GeneratorVariant::Rgc,
            n_layers: 1,
            hidden_dim: 32,
            decoder_dim: 24,
            latent_dim: None,
            ffn_hidden: 64,
            grid: GridSpec::default(),
            max_epochs: None,
            patience: 5,
            batch_size: 32,
            n_folds: 3,
            val_fraction: 0.1,
            seeds: vec![0, 1, 2],
            master_seed: 0,
            workers: 0,
            optimizer: OptimizerKind::Adam,
            lambda: (1.0, 1.0, 1.0),
            add_self_loops: false,
            target_radius: 1.0,
        }
    }
}

impl ExperimentConfig {
    pub fn effective_max_epochs(&self) -> usize {
        self.max_epochs.unwrap_or(match self.task {
            TaskKind::Classify => 500,
            TaskKind::Generate => 200,
        })
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Ingestion(format!("cannot read config: {e}")))?;
        serde_json::from_str(&text).map_err(|e| Error::Ingestion(format!("bad config JSON: {e}")))
    }

    fn model_name(&self) -> String {
        match self.task {
            TaskKind::Classify => self.layer_kind.to_string(),
            TaskKind::Generate => format!("{}-transformer", self.variant),
        }
    }
}

// ---------------------------------------------------------------------------
// Classification trials

struct ClassifyTask<'a, S: GraphSource + ?Sized> {
    model: ClassifierModel,
    opt: Optimizer,
    source: &'a S,
    train_idx: Vec<usize>,
    val_idx: &'a [usize],
    batch_size: usize,
    shuffle_rng: Rng,
    grad_accum: Vec<Matrix>,
    best: Option<(ClassifierModel, f64)>,
    last_val_accuracy: f64,
}

/// Mean NLL and accuracy over `idx` in eval mode.
pub fn classifier_eval<S: GraphSource + ?Sized>(
    model: &mut ClassifierModel,
    source: &S,
    idx: &[usize],
) -> Result<(f64, f64)> {
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for &i in idx {
        let g = source.get(i);
        let label = g
            .label
            .ok_or_else(|| Error::Contract(format!("graph {i} has no label")))?;
        let probs = model.classify_forward(g)?;
        loss_sum += crate::classify::nll_loss(&probs, label)?;
        if crate::classify::argmax(&probs) == label {
            correct += 1;
        }
    }
    let n = idx.len().max(1) as f64;
    Ok((loss_sum / n, correct as f64 / n))
}

impl<S: GraphSource + ?Sized> TrialTask for ClassifyTask<'_, S> {
    fn train_epoch(&mut self, lr: f64) -> Result<f64> {
        self.shuffle_rng.shuffle(&mut self.train_idx);
        let mut loss_sum = 0.0;
        let indices = std::mem::take(&mut self.train_idx);
        for batch in indices.chunks(self.batch_size) {
            for &i in batch {
                let g = self.source.get(i);
                let label = g
                    .label
                    .ok_or_else(|| Error::Contract(format!("graph {i} has no label")))?;
                let tape = Tape::new();
                let bound = self.model.store.bind(&tape);
                let probs = self.model.forward_var(&bound, g, &tape, true)?;
                let loss = nll_loss_var(&probs, label)?;
                loss_sum += loss.scalar()?;
                loss.backward()?;
                self.model.store.accumulate_grads(
                    &bound,
                    &mut self.grad_accum,
                    1.0 / batch.len() as f64,
                )?;
            }
            self.model
                .store
                .apply_step(&mut self.opt, &mut self.grad_accum, lr)?;
        }
        let n = indices.len().max(1) as f64;
        self.train_idx = indices;
        Ok(loss_sum / n)
    }

    fn validation_loss(&mut self) -> Result<f64> {
        let (loss, acc) = classifier_eval(&mut self.model, self.source, self.val_idx)?;
        self.last_val_accuracy = acc;
        Ok(loss)
    }

    fn save_best(&mut self) {
        self.best = Some((self.model.clone(), self.last_val_accuracy));
    }

    fn restore_best(&mut self) {
        if let Some((model, _)) = &self.best {
            self.model = model.clone();
        }
    }
}

/// The winner of a grid search over one (train, val) split.
pub struct SelectedClassifier {
    pub model: ClassifierModel,
    pub cell: GridCell,
    pub outcome: TrainOutcome,
    /// Validation accuracy of the winning checkpoint (selection metric).
    pub val_accuracy: f64,
    pub cells_evaluated: usize,
    pub grid_wall_clock_s: f64,
}

fn classifier_config(cfg: &ExperimentConfig, cell: &GridCell, feature_dim: usize, n_classes: usize, seed: u64) -> ClassifierConfig {
    ClassifierConfig {
        layer_kind: cfg.layer_kind,
        n_layers: cfg.n_layers,
        feature_dim,
        n_classes,
        hidden_dim: cfg.hidden_dim,
        alpha: cell.alpha.unwrap_or(0.8),
        k: cell.k.unwrap_or(1),
        target_radius: cfg.target_radius,
        add_self_loops: cfg.add_self_loops,
        seed,
    }
}

/// Enumerate the grid once, train each cell on `train_idx`, early-stop on
/// `val_idx`, and keep the cell with the best validation accuracy. Only
/// `train_idx`/`val_idx` graphs are ever read.
pub fn classify_grid_search<S: GraphSource + ?Sized>(
    cfg: &ExperimentConfig,
    source: &S,
    train_idx: &[usize],
    val_idx: &[usize],
    feature_dim: usize,
    n_classes: usize,
    model_seed: u64,
) -> Result<SelectedClassifier> {
    let cells = cfg.grid.cells(cfg.layer_kind.uses_reservoir());
    let grid_start = std::time::Instant::now();
    let mut best: Option<SelectedClassifier> = None;
    let mut last_err: Option<Error> = None;
    let cells_evaluated = cells.len();
    for cell in cells {
        let model = ClassifierModel::new(classifier_config(cfg, &cell, feature_dim, n_classes, model_seed))?;
        let grad_accum = model.store.grad_buffers();
        let mut task = ClassifyTask {
            model,
            opt: Optimizer::new(cfg.optimizer),
            source,
            train_idx: train_idx.to_vec(),
            val_idx,
            batch_size: cfg.batch_size,
            shuffle_rng: Rng::new(Rng::derive_seed(model_seed, SHUFFLE_STREAM)),
            grad_accum,
            best: None,
            last_val_accuracy: 0.0,
        };
        let loop_cfg = TrainLoopCfg {
            max_epochs: cfg.effective_max_epochs(),
            patience: cfg.patience,
            lr0: cell.lr,
            scheduler_step: cell.scheduler_step,
        };
        match run_train_loop(&loop_cfg, &mut task) {
            Ok(outcome) => {
                let val_accuracy = task.best.as_ref().map_or(0.0, |(_, acc)| *acc);
                let candidate = SelectedClassifier {
                    model: task.model,
                    cell,
                    outcome,
                    val_accuracy,
                    cells_evaluated,
                    grid_wall_clock_s: 0.0,
                };
                let better = match &best {
                    None => true,
                    Some(b) => candidate.val_accuracy > b.val_accuracy,
                };
                if better {
                    best = Some(candidate);
                }
            }
            Err(e @ Error::Numeric(_)) => {
                log::warn!("grid cell {cell} failed numerically: {e}");
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    let mut best = best.ok_or_else(|| {
        last_err.unwrap_or_else(|| Error::Numeric("every grid cell failed".to_string()))
    })?;
    best.grid_wall_clock_s = grid_start.elapsed().as_secs_f64();
    Ok(best)
}

// ---------------------------------------------------------------------------
// Generation trials

struct GenerateTask<'a, S: GraphSource + ?Sized> {
    model: GeneratorModel,
    opt: Optimizer,
    source: &'a S,
    train_pairs: Vec<(usize, usize)>,
    val_pairs: &'a [(usize, usize)],
    lambda: (f64, f64, f64),
    batch_size: usize,
    shuffle_rng: Rng,
    grad_accum: Vec<Matrix>,
    best: Option<GeneratorModel>,
}

/// Mean composite loss over pairs, eval mode.
pub fn generator_eval<S: GraphSource + ?Sized>(
    model: &mut GeneratorModel,
    source: &S,
    pairs: &[(usize, usize)],
    lambda: (f64, f64, f64),
) -> Result<f64> {
    let mut sum = 0.0;
    for &(i, j) in pairs {
        let pred = model.predict_next(source.get(i))?;
        sum += crate::generate::composite_loss(&source.get(j).adjacency, &pred, lambda)?;
    }
    Ok(sum / pairs.len().max(1) as f64)
}

impl<S: GraphSource + ?Sized> TrialTask for GenerateTask<'_, S> {
    fn train_epoch(&mut self, lr: f64) -> Result<f64> {
        self.shuffle_rng.shuffle(&mut self.train_pairs);
        let pairs = std::mem::take(&mut self.train_pairs);
        let mut loss_sum = 0.0;
        for batch in pairs.chunks(self.batch_size) {
            for &(i, j) in batch {
                let tape = Tape::new();
                let bound = self.model.store.bind(&tape);
                let pred = self.model.forward_var(&bound, self.source.get(i), &tape, true)?;
                let loss = composite_loss_var(&self.source.get(j).adjacency, &pred, self.lambda)?;
                loss_sum += loss.scalar()?;
                loss.backward()?;
                self.model.store.accumulate_grads(
                    &bound,
                    &mut self.grad_accum,
                    1.0 / batch.len() as f64,
                )?;
            }
            self.model
                .store
                .apply_step(&mut self.opt, &mut self.grad_accum, lr)?;
        }
        let n = pairs.len().max(1) as f64;
        self.train_pairs = pairs;
        Ok(loss_sum / n)
    }

    fn validation_loss(&mut self) -> Result<f64> {
        generator_eval(&mut self.model, self.source, self.val_pairs, self.lambda)
    }

    fn save_best(&mut self) {
        self.best = Some(self.model.clone());
    }

    fn restore_best(&mut self) {
        if let Some(model) = &self.best {
            self.model = model.clone();
        }
    }
}

pub struct SelectedGenerator {
    pub model: GeneratorModel,
    pub cell: GridCell,
    pub outcome: TrainOutcome,
    /// Best validation composite loss (selection metric; lower wins).
    pub val_loss: f64,
    pub cells_evaluated: usize,
    pub grid_wall_clock_s: f64,
}

fn generator_config(cfg: &ExperimentConfig, cell: &GridCell, n_nodes: usize, feature_dim: usize, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        variant: cfg.variant,
        n_nodes,
        feature_dim,
        hidden_dim: cfg.hidden_dim,
        latent_dim: cfg.latent_dim.unwrap_or(n_nodes),
        decoder_dim: cfg.decoder_dim,
        ffn_hidden: cfg.ffn_hidden,
        alpha: cell.alpha.unwrap_or(0.8),
        k: cell.k.unwrap_or(1),
        target_radius: cfg.target_radius,
        lambda: cfg.lambda,
        seed,
    }
}

/// Grid search for the generator; selection by validation composite loss.
pub fn generate_grid_search<S: GraphSource + ?Sized>(
    cfg: &ExperimentConfig,
    source: &S,
    train_pairs: &[(usize, usize)],
    val_pairs: &[(usize, usize)],
    n_nodes: usize,
    feature_dim: usize,
    model_seed: u64,
) -> Result<SelectedGenerator> {
    let uses_reservoir = cfg.variant != GeneratorVariant::Gcn;
    let cells = cfg.grid.cells(uses_reservoir);
    let cells_evaluated = cells.len();
    let grid_start = std::time::Instant::now();
    let mut best: Option<SelectedGenerator> = None;
    let mut last_err: Option<Error> = None;
    for cell in cells {
        let model = GeneratorModel::new(generator_config(cfg, &cell, n_nodes, feature_dim, model_seed))?;
        let grad_accum = model.store.grad_buffers();
        let mut task = GenerateTask {
            model,
            opt: Optimizer::new(cfg.optimizer),
            source,
            train_pairs: train_pairs.to_vec(),
            val_pairs,
            lambda: cfg.lambda,
            batch_size: cfg.batch_size,
            shuffle_rng: Rng::new(Rng::derive_seed(model_seed, SHUFFLE_STREAM)),
            grad_accum,
            best: None,
        };
        let loop_cfg = TrainLoopCfg {
            max_epochs: cfg.effective_max_epochs(),
            patience: cfg.patience,
            lr0: cell.lr,
            scheduler_step: cell.scheduler_step,
        };
        match run_train_loop(&loop_cfg, &mut task) {
            Ok(outcome) => {
                let candidate = SelectedGenerator {
                    model: task.model,
                    cell,
                    outcome,
                    val_loss: outcome.best_val_loss,
                    cells_evaluated,
                    grid_wall_clock_s: 0.0,
                };
                let better = match &best {
                    None => true,
                    Some(b) => candidate.val_loss < b.val_loss,
                };
                if better {
                    best = Some(candidate);
                }
            }
            Err(e @ Error::Numeric(_)) => {
                log::warn!("grid cell {cell} failed numerically: {e}");
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    let mut best = best.ok_or_else(|| {
        last_err.unwrap_or_else(|| Error::Numeric("every grid cell failed".to_string()))
    })?;
    best.grid_wall_clock_s = grid_start.elapsed().as_secs_f64();
    Ok(best)
}

// ---------------------------------------------------------------------------
// Nested cross-validation

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

/// Nested 3-fold CV with grid search and seed repetition for graph
/// classification. Grid selection sees only train/validation indices;
/// each held-out fold is touched once, by the selected model.
pub fn nested_cv_classification(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<ExperimentReport> {
    let labels: Vec<usize> = dataset
        .graphs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            g.label
                .ok_or_else(|| Error::Contract(format!("graph {i} has no label")))
        })
        .collect::<Result<_>>()?;
    let n_classes = dataset
        .n_classes()
        .unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    let feature_dim = dataset.graphs[0].feature_dim();
    let folds = stratified_folds(&labels, cfg.n_folds, Rng::derive_seed(cfg.master_seed, 0xF01D))?;

    let mut jobs = Vec::new();
    for fold in 0..folds.len() {
        for &seed in &cfg.seeds {
            jobs.push((fold, seed));
        }
    }
    let pool = worker_pool(cfg.workers)?;
    let trials: Vec<TrialReport> = pool.install(|| {
        jobs.par_iter()
            .map(|&(fold, seed)| {
                let test_idx = &folds[fold];
                let pool_idx: Vec<usize> = (0..folds.len())
                    .filter(|&f| f != fold)
                    .flat_map(|f| folds[f].iter().copied())
                    .collect();
                let (train_idx, val_idx) = stratified_train_val(
                    &pool_idx,
                    |i| labels[i],
                    cfg.val_fraction,
                    Rng::derive_seed(cfg.master_seed, 0x1AB0 + fold as u64),
                );
                match classify_grid_search(
                    cfg, dataset, &train_idx, &val_idx, feature_dim, n_classes, seed,
                ) {
                    Ok(mut sel) => {
                        let (test_loss, test_acc) =
                            match classifier_eval(&mut sel.model, dataset, test_idx) {
                                Ok(v) => v,
                                Err(e) => return failed_trial(fold, seed, e.to_string()),
                            };
                        TrialReport {
                            fold,
                            seed,
                            cell: sel.cell,
                            cells_evaluated: sel.cells_evaluated,
                            best_epoch: sel.outcome.best_epoch,
                            epochs_run: sel.outcome.epochs_run,
                            stopped_early: sel.outcome.stopped_early,
                            train_loss: sel.outcome.last_train_loss,
                            val_metric: sel.val_accuracy,
                            test_accuracy: Some(test_acc),
                            test_loss: Some(test_loss),
                            test_eval: None,
                            identity_eval: None,
                            wall_clock_s: sel.outcome.wall_clock_s,
                            time_per_epoch_s: sel.outcome.time_per_epoch_s,
                            grid_wall_clock_s: sel.grid_wall_clock_s,
                            peak_rss_bytes: peak_rss_bytes(),
                            trainable_params: sel.model.trainable_param_count(),
                            failed: None,
                        }
                    }
                    Err(e) => failed_trial(fold, seed, e.to_string()),
                }
            })
            .collect()
    });

    let mut trials = trials;
    trials.sort_by_key(|t| (t.fold, t.seed));
    Ok(ExperimentReport {
        dataset: dataset.name.clone(),
        model: cfg.model_name(),
        n_layers: cfg.n_layers,
        trials,
    })
}

fn failed_trial(fold: usize, seed: u64, message: String) -> TrialReport {
    TrialReport {
        fold,
        seed,
        cell: GridCell {
            lr: 0.0,
            scheduler_step: 0,
            k: None,
            alpha: None,
        },
        cells_evaluated: 0,
        best_epoch: 0,
        epochs_run: 0,
        stopped_early: false,
        train_loss: f64::NAN,
        val_metric: f64::NAN,
        test_accuracy: None,
        test_loss: None,
        test_eval: None,
        identity_eval: None,
        wall_clock_s: 0.0,
        time_per_epoch_s: 0.0,
        grid_wall_clock_s: 0.0,
        peak_rss_bytes: peak_rss_bytes(),
        trainable_params: 0,
        failed: Some(message),
    }
}

/// Subject-level nested CV for temporal graph generation. Test evaluation
/// averages the six metrics over held-out transition pairs, alongside the
/// identity baseline on the same pairs.
pub fn nested_cv_generation(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<ExperimentReport> {
    if dataset.n_timepoints().is_none() {
        return Err(Error::Config("generation needs a longitudinal dataset".to_string()));
    }
    let subjects_of: Vec<usize> = dataset
        .graphs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            g.subject
                .ok_or_else(|| Error::Contract(format!("graph {i} has no subject")))
        })
        .collect::<Result<_>>()?;
    let n_nodes = dataset.graphs[0].node_count();
    let feature_dim = dataset.graphs[0].feature_dim();
    let folds = subject_folds(&subjects_of, cfg.n_folds, Rng::derive_seed(cfg.master_seed, 0xF01D))?;
    let all_pairs = dataset.transition_pairs();
    let pairs_in = |graph_idx: &[usize]| -> Vec<(usize, usize)> {
        let member: std::collections::HashSet<usize> = graph_idx.iter().copied().collect();
        all_pairs
            .iter()
            .copied()
            .filter(|(i, j)| member.contains(i) && member.contains(j))
            .collect()
    };

    let mut jobs = Vec::new();
    for fold in 0..folds.len() {
        for &seed in &cfg.seeds {
            jobs.push((fold, seed));
        }
    }
    let pool = worker_pool(cfg.workers)?;
    let trials: Vec<TrialReport> = pool.install(|| {
        jobs.par_iter()
            .map(|&(fold, seed)| {
                let test_pairs = pairs_in(&folds[fold]);
                let pool_idx: Vec<usize> = (0..folds.len())
                    .filter(|&f| f != fold)
                    .flat_map(|f| folds[f].iter().copied())
                    .collect();
                let pool_subjects: Vec<usize> =
                    pool_idx.iter().map(|&i| subjects_of[i]).collect();
                let (train_subjects, val_subjects) = subject_train_val(
                    &pool_subjects,
                    cfg.val_fraction,
                    Rng::derive_seed(cfg.master_seed, 0x1AB0 + fold as u64),
                );
                let train_set: std::collections::HashSet<usize> =
                    train_subjects.into_iter().collect();
                let val_set: std::collections::HashSet<usize> = val_subjects.into_iter().collect();
                let train_idx: Vec<usize> = pool_idx
                    .iter()
                    .copied()
                    .filter(|&i| train_set.contains(&subjects_of[i]))
                    .collect();
                let val_idx: Vec<usize> = pool_idx
                    .iter()
                    .copied()
                    .filter(|&i| val_set.contains(&subjects_of[i]))
                    .collect();
                let train_pairs = pairs_in(&train_idx);
                let val_pairs = pairs_in(&val_idx);

                match generate_grid_search(
                    cfg, dataset, &train_pairs, &val_pairs, n_nodes, feature_dim, seed,
                ) {
                    Ok(mut sel) => match generation_test_eval(&mut sel.model, dataset, &test_pairs) {
                        Ok((test_eval, identity_eval, test_loss)) => TrialReport {
                            fold,
                            seed,
                            cell: sel.cell,
                            cells_evaluated: sel.cells_evaluated,
                            best_epoch: sel.outcome.best_epoch,
                            epochs_run: sel.outcome.epochs_run,
                            stopped_early: sel.outcome.stopped_early,
                            train_loss: sel.outcome.last_train_loss,
                            val_metric: sel.val_loss,
                            test_accuracy: None,
                            test_loss: Some(test_loss),
                            test_eval: Some(test_eval),
                            identity_eval: Some(identity_eval),
                            wall_clock_s: sel.outcome.wall_clock_s,
                            time_per_epoch_s: sel.outcome.time_per_epoch_s,
                            grid_wall_clock_s: sel.grid_wall_clock_s,
                            peak_rss_bytes: peak_rss_bytes(),
                            trainable_params: sel.model.trainable_param_count(),
                            failed: None,
                        },
                        Err(e) => failed_trial(fold, seed, e.to_string()),
                    },
                    Err(e) => failed_trial(fold, seed, e.to_string()),
                }
            })
            .collect()
    });

    let mut trials = trials;
    trials.sort_by_key(|t| (t.fold, t.seed));
    Ok(ExperimentReport {
        dataset: dataset.name.clone(),
        model: cfg.model_name(),
        n_layers: 2,
        trials,
    })
}

/// Mean evaluation metrics of the model and the identity baseline over
/// held-out pairs, plus the model's mean composite test loss.
fn generation_test_eval<S: GraphSource + ?Sized>(
    model: &mut GeneratorModel,
    source: &S,
    pairs: &[(usize, usize)],
) -> Result<(EvalReport, EvalReport, f64)> {
    let mut model_reports = Vec::with_capacity(pairs.len());
    let mut identity_reports = Vec::with_capacity(pairs.len());
    let mut loss = 0.0;
    for &(i, j) in pairs {
        let truth = &source.get(j).adjacency;
        let pred = model.predict_next(source.get(i))?;
        loss += crate::generate::composite_loss(truth, &pred, model.cfg.lambda)?;
        model_reports.push(evaluate_pair(truth, &pred)?);
        identity_reports.push(evaluate_pair(truth, &identity_baseline(source.get(i)))?);
    }
    let model_mean = mean_report(&model_reports)
        .ok_or_else(|| Error::Contract("no test pairs".to_string()))?;
    let identity_mean = mean_report(&identity_reports).expect("same length");
    Ok((model_mean, identity_mean, loss / pairs.len().max(1) as f64))
}

/// Accuracy-vs-depth comparison across layer kinds (the over-smoothing
/// artifact): one nested-CV experiment per (kind, depth).
pub fn layer_depth_comparison(
    base: &ExperimentConfig,
    dataset: &Dataset,
    kinds: &[LayerKind],
    depths: &[usize],
) -> Result<Vec<ExperimentReport>> {
    let mut reports = Vec::new();
    for &kind in kinds {
        for &depth in depths {
            let mut cfg = base.clone();
            cfg.task = TaskKind::Classify;
            cfg.layer_kind = kind;
            cfg.n_layers = depth;
            reports.push(nested_cv_classification(&cfg, dataset)?);
        }
    }
    Ok(reports)
}

/// CSV for the depth comparison: one row per kind with accuracy at every
/// depth and the first-to-last drop.
pub fn write_depth_comparison_csv(
    reports: &[ExperimentReport],
    depths: &[usize],
    path: impl AsRef<std::path::Path>,
) -> Result<()> {
    let mut header = String::from("dataset,model");
    for d in depths {
        header.push_str(&format!(",accuracy_layers_{d},std_layers_{d}"));
    }
    header.push_str(",drop_first_to_last\n");
    let mut body = header;
    let mut by_model = std::collections::BTreeMap::<String, Vec<&ExperimentReport>>::new();
    for r in reports {
        by_model.entry(r.model.clone()).or_default().push(r);
    }
    for (model, rs) in by_model {
        let dataset = rs[0].dataset.clone();
        let mut row = format!("{dataset},{model}");
        let mut first = None;
        let mut last = None;
        for &d in depths {
            let acc = rs
                .iter()
                .find(|r| r.n_layers == d)
                .and_then(|r| r.accuracy());
            match acc {
                Some(a) => {
                    row.push_str(&format!(",{},{}", a.mean, a.std));
                    if first.is_none() {
                        first = Some(a.mean);
                    }
                    last = Some(a.mean);
                }
                None => row.push_str(",,"),
            }
        }
        let drop = match (first, last) {
            (Some(f), Some(l)) => (f - l).to_string(),
            _ => String::new(),
        };
        body.push_str(&format!("{row},{drop}\n"));
    }
    std::fs::write(path.as_ref(), body)?;
    Ok(())
}

