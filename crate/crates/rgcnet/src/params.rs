//! Named parameter registry shared by models.
//!
//! Master copies live here as plain matrices. Each forward pass binds them
//! onto a fresh tape as leaves; after backward the trainer reads leaf
//! gradients back out by index. Frozen parameters are bound with
//! `requires_grad = false` and are never touched by the optimizer.

use crate::autodiff::{Optimizer, Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Index of one parameter in a `ParamStore`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub trainable: bool,
}

#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, value: Matrix, trainable: bool) -> ParamId {
        self.params.push(Param {
            name: name.into(),
            value,
            trainable,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].value
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    /// Number of scalar entries across trainable parameters.
    pub fn trainable_scalar_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.rows() * p.value.cols())
            .sum()
    }

    /// Bind every parameter onto `tape`; element i of the result is the
    /// leaf for parameter i.
    pub fn bind(&self, tape: &Tape) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| tape.leaf(p.value.clone(), p.trainable))
            .collect()
    }

    /// Zeroed gradient buffers, one per parameter (frozen ones stay unused).
    pub fn grad_buffers(&self) -> Vec<Matrix> {
        self.params
            .iter()
            .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
            .collect()
    }

    /// Add `scale` times each bound leaf's gradient into `accum`.
    pub fn accumulate_grads(&self, bound: &[Var], accum: &mut [Matrix], scale: f64) -> Result<()> {
        if bound.len() != self.params.len() || accum.len() != self.params.len() {
            return Err(Error::Contract(
                "binding/grad buffer length mismatch".to_string(),
            ));
        }
        for (i, var) in bound.iter().enumerate() {
            if !self.params[i].trainable {
                continue;
            }
            if let Some(g) = var.grad() {
                for (a, gv) in accum[i].data_mut().iter_mut().zip(g.data()) {
                    *a += scale * gv;
                }
            }
        }
        Ok(())
    }

    /// One optimizer step over the trainable subset; zeroes those buffers.
    pub fn apply_step(&mut self, opt: &mut Optimizer, accum: &mut [Matrix], lr: f64) -> Result<()> {
        let idx: Vec<usize> = (0..self.params.len())
            .filter(|&i| self.params[i].trainable)
            .collect();
        let mut grads: Vec<Matrix> = idx.iter().map(|&i| accum[i].clone()).collect();
        let mut values: Vec<Matrix> = idx
            .iter()
            .map(|&i| std::mem::replace(&mut self.params[i].value, Matrix::zeros(0, 0)))
            .collect();
        let outcome = {
            let mut refs: Vec<&mut Matrix> = values.iter_mut().collect();
            opt.step(&mut refs, &mut grads, lr)
        };
        for (&i, v) in idx.iter().zip(values) {
            self.params[i].value = v;
        }
        outcome?;
        for &i in &idx {
            for a in accum[i].data_mut() {
                *a = 0.0;
            }
        }
        Ok(())
    }

    /// Snapshot of all values (for best-epoch checkpointing).
    pub fn snapshot(&self) -> Vec<Matrix> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    /// Restore a snapshot taken from this store.
    pub fn restore(&mut self, snapshot: &[Matrix]) -> Result<()> {
        if snapshot.len() != self.params.len() {
            return Err(Error::Contract("snapshot length mismatch".to_string()));
        }
        for (p, s) in self.params.iter_mut().zip(snapshot) {
            p.value = s.clone();
        }
        Ok(())
    }
}
