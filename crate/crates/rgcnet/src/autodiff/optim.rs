//! Parameter updates. Adam is the default; plain SGD is kept behind the
//! same interface for ablation.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Stateful optimizer over an ordered parameter list. The parameter order
/// must stay stable across steps.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step_count: u64,
    first_moment: Vec<Matrix>,
    second_moment: Vec<Matrix>,
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer {
            kind: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn sgd() -> Self {
        Optimizer {
            kind: OptimizerKind::Sgd,
            beta1: 0.0,
            beta2: 0.0,
            eps: 0.0,
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn new(kind: OptimizerKind) -> Self {
        match kind {
            OptimizerKind::Adam => Self::adam(),
            OptimizerKind::Sgd => Self::sgd(),
        }
    }

    /// Apply one update, then zero the gradient buffers.
    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &mut [Matrix], lr: f64) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Contract(format!(
                "optimizer got {} params but {} grads",
                params.len(),
                grads.len()
            )));
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads.iter()) {
                    if p.shape() != g.shape() {
                        return Err(Error::dimension("sgd_step", p.shape_string(), g.shape_string()));
                    }
                    for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                        *pv -= lr * gv;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.first_moment.is_empty() {
                    self.first_moment = params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
                    self.second_moment = self.first_moment.clone();
                }
                if self.first_moment.len() != params.len() {
                    return Err(Error::Contract(
                        "parameter list changed length between optimizer steps".to_string(),
                    ));
                }
                self.step_count += 1;
                let t = self.step_count as i32;
                let bc1 = 1.0 - self.beta1.powi(t);
                let bc2 = 1.0 - self.beta2.powi(t);
                for (i, (p, g)) in params.iter_mut().zip(grads.iter()).enumerate() {
                    if p.shape() != g.shape() {
                        return Err(Error::dimension("adam_step", p.shape_string(), g.shape_string()));
                    }
                    let m = &mut self.first_moment[i];
                    let v = &mut self.second_moment[i];
                    for ((pv, gv), (mv, vv)) in p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()))
                    {
                        *mv = self.beta1 * *mv + (1.0 - self.beta1) * gv;
                        *vv = self.beta2 * *vv + (1.0 - self.beta2) * gv * gv;
                        let m_hat = *mv / bc1;
                        let v_hat = *vv / bc2;
                        *pv -= lr * m_hat / (v_hat.sqrt() + self.eps);
                    }
                }
            }
        }
        for g in grads.iter_mut() {
            for gv in g.data_mut() {
                *gv = 0.0;
            }
        }
        Ok(())
    }
}
