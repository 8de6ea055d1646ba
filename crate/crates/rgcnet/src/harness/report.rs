//! Per-trial records and experiment-level aggregation, with CSV export.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::{mean_report, EvalReport};

/// One grid-search point. `k`/`alpha` are absent for layer kinds without
/// a reservoir.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub lr: f64,
    pub scheduler_step: usize,
    pub k: Option<usize>,
    pub alpha: Option<f64>,
}

impl std::fmt::Display for GridCell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "lr={} step={}", self.lr, self.scheduler_step)?;
        if let Some(k) = self.k {
            write!(f, " k={k}")?;
        }
        if let Some(a) = self.alpha {
            write!(f, " alpha={a}")?;
        }
        Ok(())
    }
}

/// The hyperparameter grid; defaults to the published search lists.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GridSpec {
    pub lrs: Vec<f64>,
    pub scheduler_steps: Vec<usize>,
    pub ks: Vec<usize>,
    pub alphas: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lrs: vec![0.01, 0.005, 0.001],
            scheduler_steps: vec![500, 200, 100],
            ks: vec![3, 2, 1],
            alphas: vec![1.0, 0.9, 0.8, 0.7],
        }
    }
}

impl GridSpec {
    /// A single fixed cell (no search).
    pub fn fixed(lr: f64, scheduler_step: usize, k: usize, alpha: f64) -> Self {
        GridSpec {
            lrs: vec![lr],
            scheduler_steps: vec![scheduler_step],
            ks: vec![k],
            alphas: vec![alpha],
        }
    }

    /// Enumerate cells; reservoir hyperparameters are skipped for layer
    /// kinds that have none.
    pub fn cells(&self, uses_reservoir: bool) -> Vec<GridCell> {
        let mut out = Vec::new();
        for &lr in &self.lrs {
            for &scheduler_step in &self.scheduler_steps {
                if uses_reservoir {
                    for &k in &self.ks {
                        for &alpha in &self.alphas {
                            out.push(GridCell {
                                lr,
                                scheduler_step,
                                k: Some(k),
                                alpha: Some(alpha),
                            });
                        }
                    }
                } else {
                    out.push(GridCell {
                        lr,
                        scheduler_step,
                        k: None,
                        alpha: None,
                    });
                }
            }
        }
        out
    }
}

/// Outcome of one (fold, seed) trial: the winning grid cell's training
/// run, its held-out evaluation, and resource accounting.
#[derive(Clone, Debug, Serialize)]
pub struct TrialReport {
    pub fold: usize,
    pub seed: u64,
    pub cell: GridCell,
    pub cells_evaluated: usize,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub train_loss: f64,
    /// Validation metric used for selection (accuracy or composite loss).
    pub val_metric: f64,
    pub test_accuracy: Option<f64>,
    pub test_loss: Option<f64>,
    pub test_eval: Option<EvalReport>,
    pub identity_eval: Option<EvalReport>,
    /// Wall time of the winning cell's training run.
    pub wall_clock_s: f64,
    pub time_per_epoch_s: f64,
    /// Wall time of the whole grid search for this trial.
    pub grid_wall_clock_s: f64,
    pub peak_rss_bytes: Option<u64>,
    pub trainable_params: usize,
    /// Set when the trial aborted on a numeric failure.
    pub failed: Option<String>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    MeanStd {
        mean,
        std: var.sqrt(),
    }
}

/// All trials of one experiment plus its aggregates.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub model: String,
    pub n_layers: usize,
    pub trials: Vec<TrialReport>,
}

impl ExperimentReport {
    pub fn succeeded(&self) -> impl Iterator<Item = &TrialReport> {
        self.trials.iter().filter(|t| t.failed.is_none())
    }

    /// Mean +- std of test accuracy over successful (fold, seed) trials.
    pub fn accuracy(&self) -> Option<MeanStd> {
        let vals: Vec<f64> = self.succeeded().filter_map(|t| t.test_accuracy).collect();
        if vals.is_empty() {
            None
        } else {
            Some(mean_std(&vals))
        }
    }

    /// Per-metric mean of generation evaluations.
    pub fn eval_mean(&self) -> Option<EvalReport> {
        let reports: Vec<EvalReport> = self.succeeded().filter_map(|t| t.test_eval).collect();
        mean_report(&reports)
    }

    /// Per-metric mean of the identity baseline on the same test folds.
    pub fn identity_mean(&self) -> Option<EvalReport> {
        let reports: Vec<EvalReport> = self.succeeded().filter_map(|t| t.identity_eval).collect();
        mean_report(&reports)
    }

    pub fn wall_clock(&self) -> MeanStd {
        let vals: Vec<f64> = self.succeeded().map(|t| t.wall_clock_s).collect();
        mean_std(&vals)
    }

    pub fn time_per_epoch(&self) -> MeanStd {
        let vals: Vec<f64> = self.succeeded().map(|t| t.time_per_epoch_s).collect();
        mean_std(&vals)
    }

    pub fn epochs(&self) -> MeanStd {
        let vals: Vec<f64> = self.succeeded().map(|t| t.epochs_run as f64).collect();
        mean_std(&vals)
    }

    /// One row per trial.
    pub fn write_trials_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut body = String::from(
            "dataset,model,n_layers,fold,seed,lr,scheduler_step,k,alpha,cells_evaluated,\
             best_epoch,epochs_run,stopped_early,train_loss,val_metric,test_accuracy,test_loss,\
             mae,frobenius_distance,mae_node_strength,mae_clustering,mae_betweenness,mae_eigenvector,\
             identity_mae,wall_clock_s,time_per_epoch_s,grid_wall_clock_s,peak_rss_bytes,\
             trainable_params,failed\n",
        );
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for t in &self.trials {
            let eval = t.test_eval;
            let ev = |f: fn(&EvalReport) -> f64| eval.as_ref().map(f).map_or(String::new(), |x| x.to_string());
            body.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                self.dataset,
                self.model,
                self.n_layers,
                t.fold,
                t.seed,
                t.cell.lr,
                t.cell.scheduler_step,
                t.cell.k.map_or(String::new(), |k| k.to_string()),
                t.cell.alpha.map_or(String::new(), |a| a.to_string()),
                t.cells_evaluated,
                t.best_epoch,
                t.epochs_run,
                t.stopped_early,
                t.train_loss,
                t.val_metric,
                opt(t.test_accuracy),
                opt(t.test_loss),
                ev(|e| e.mae),
                ev(|e| e.frobenius_distance),
                ev(|e| e.mae_node_strength),
                ev(|e| e.mae_clustering),
                ev(|e| e.mae_betweenness),
                ev(|e| e.mae_eigenvector),
                t.identity_eval.as_ref().map(|e| e.mae.to_string()).unwrap_or_default(),
                t.wall_clock_s,
                t.time_per_epoch_s,
                t.grid_wall_clock_s,
                t.peak_rss_bytes.map_or(String::new(), |b| b.to_string()),
                t.trainable_params,
                t.failed.clone().unwrap_or_default(),
            ));
        }
        std::fs::write(path.as_ref(), body)?;
        Ok(())
    }
}

/// Aggregate several experiment reports into one comparison CSV with the
/// published tables' column layout (accuracy or the six generation
/// metrics, plus resource columns).
pub fn write_aggregate_csv(reports: &[ExperimentReport], path: impl AsRef<Path>) -> Result<()> {
    let mut body = String::from(
        "dataset,model,n_layers,accuracy_mean,accuracy_std,\
         mae,frobenius_distance,mae_node_strength,mae_clustering,mae_betweenness,mae_eigenvector,\
         identity_mae,identity_frobenius,training_time_s_mean,training_time_s_std,\
         time_per_epoch_s_mean,time_per_epoch_s_std,epochs_mean,epochs_std,\
         peak_rss_mb,trainable_params\n",
    );
    for r in reports {
        let acc = r.accuracy();
        let eval = r.eval_mean();
        let ident = r.identity_mean();
        let wall = r.wall_clock();
        let per_epoch = r.time_per_epoch();
        let epochs = r.epochs();
        let rss_mb = r
            .succeeded()
            .filter_map(|t| t.peak_rss_bytes)
            .max()
            .map(|b| format!("{:.1}", b as f64 / 1e6))
            .unwrap_or_default();
        let params = r
            .succeeded()
            .map(|t| t.trainable_params)
            .next()
            .map(|p| p.to_string())
            .unwrap_or_default();
        let opt_ms = |v: Option<MeanStd>| {
            v.map_or((String::new(), String::new()), |m| {
                (m.mean.to_string(), m.std.to_string())
            })
        };
        let (acc_m, acc_s) = opt_ms(acc);
        let evf = |f: fn(&EvalReport) -> f64| eval.as_ref().map(f).map_or(String::new(), |x| x.to_string());
        body.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.dataset,
            r.model,
            r.n_layers,
            acc_m,
            acc_s,
            evf(|e| e.mae),
            evf(|e| e.frobenius_distance),
            evf(|e| e.mae_node_strength),
            evf(|e| e.mae_clustering),
            evf(|e| e.mae_betweenness),
            evf(|e| e.mae_eigenvector),
            ident.as_ref().map(|e| e.mae.to_string()).unwrap_or_default(),
            ident
                .as_ref()
                .map(|e| e.frobenius_distance.to_string())
                .unwrap_or_default(),
            wall.mean,
            wall.std,
            per_epoch.mean,
            per_epoch.std,
            epochs.mean,
            epochs.std,
            rss_mb,
            params,
        ));
    }
    std::fs::write(path.as_ref(), body)?;
    Ok(())
}
