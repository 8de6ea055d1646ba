//! The shared training loop: learning-rate halving schedule, early
//! stopping on validation loss, best-epoch checkpointing, and wall-clock /
//! memory accounting.

use std::time::Instant;

use crate::error::{Error, Result};

/// One trainable trial, driven epoch by epoch.
pub trait TrialTask {
    /// Run one full training pass at the given learning rate; returns the
    /// mean training loss.
    fn train_epoch(&mut self, lr: f64) -> Result<f64>;
    /// Validation loss under the current parameters (lower is better).
    fn validation_loss(&mut self) -> Result<f64>;
    /// Capture the current parameters as the best-so-far checkpoint.
    fn save_best(&mut self);
    /// Restore the best checkpoint.
    fn restore_best(&mut self);
}

#[derive(Clone, Copy, Debug)]
pub struct TrainLoopCfg {
    pub max_epochs: usize,
    pub patience: usize,
    pub lr0: f64,
    pub scheduler_step: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct TrainOutcome {
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub best_val_loss: f64,
    pub last_train_loss: f64,
    pub wall_clock_s: f64,
    pub time_per_epoch_s: f64,
}

/// Learning rate at a 1-based epoch: halved after every
/// `scheduler_step` epochs.
pub fn scheduled_lr(lr0: f64, epoch: usize, scheduler_step: usize) -> f64 {
    let halvings = (epoch - 1) / scheduler_step.max(1);
    lr0 * 0.5_f64.powi(halvings as i32)
}

/// Train until validation loss stops improving for `patience` consecutive
/// epochs (strict improvement, min-delta 0) or `max_epochs` is reached.
/// The best-validation checkpoint is restored before returning. A
/// non-finite loss aborts with a numeric error.
pub fn run_train_loop(cfg: &TrainLoopCfg, task: &mut dyn TrialTask) -> Result<TrainOutcome> {
    let start = Instant::now();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut bad_streak = 0usize;
    let mut epochs_run = 0usize;
    let mut stopped_early = false;
    let mut last_train_loss = f64::NAN;

    for epoch in 1..=cfg.max_epochs {
        let lr = scheduled_lr(cfg.lr0, epoch, cfg.scheduler_step);
        last_train_loss = task.train_epoch(lr)?;
        if !last_train_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "training loss became non-finite at epoch {epoch}"
            )));
        }
        let val = task.validation_loss()?;
        if !val.is_finite() {
            return Err(Error::Numeric(format!(
                "validation loss became non-finite at epoch {epoch}"
            )));
        }
        epochs_run = epoch;
        if val < best_val {
            best_val = val;
            best_epoch = epoch;
            bad_streak = 0;
            task.save_best();
        } else {
            bad_streak += 1;
            if bad_streak >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    task.restore_best();
    let wall = start.elapsed().as_secs_f64();
    Ok(TrainOutcome {
        best_epoch,
        epochs_run,
        stopped_early,
        best_val_loss: best_val,
        last_train_loss,
        wall_clock_s: wall,
        time_per_epoch_s: wall / epochs_run.max(1) as f64,
    })
}

/// Monotonic wall-clock seconds since the first probe in this process,
/// and the OS-reported peak resident set size. Memory is `None` on
/// platforms without an RSS counter; it is never fabricated.
#[derive(Clone, Copy, Debug)]
pub struct ResourceProbe {
    pub wall_clock_s: f64,
    pub peak_rss_bytes: Option<u64>,
}

static PROCESS_EPOCH: std::sync::OnceLock<Instant> = std::sync::OnceLock::new();

pub fn resource_probe() -> ResourceProbe {
    let epoch = PROCESS_EPOCH.get_or_init(Instant::now);
    ResourceProbe {
        wall_clock_s: epoch.elapsed().as_secs_f64(),
        peak_rss_bytes: peak_rss_bytes(),
    }
}

/// Peak resident set size from /proc/self/status (VmHWM), in bytes.
pub fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("VmHWM:") {
            let kb: u64 = rest.trim().trim_end_matches("kB").trim().parse().ok()?;
            return Some(kb * 1024);
        }
    }
    None
}
