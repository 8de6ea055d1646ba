//! The reservoir graph-convolution layer: a fixed random input transform,
//! a spectral-radius-adjusted reservoir applied as a k-step leaky
//! integrator over the normalized adjacency, and a trainable linear
//! output map. `trainable = true` turns the frozen variant into its
//! fully trainable counterpart.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::{spectral_radius, Matrix, Rng};
use crate::params::{ParamId, ParamStore};

/// Estimator settings used when adjusting reservoir weights.
const RADIUS_TOL: f64 = 1e-10;
const RADIUS_MAX_ITER: usize = 10_000;

/// Scale a square weight matrix so its spectral radius does not exceed
/// `target`; matrices already at or below radius 1 are returned unchanged
/// (bit-identical). Applied exactly once, after random initialization.
///
/// When the radius estimate fails to converge, the max-absolute-row-sum
/// upper bound stands in, which can only over-contract (never destabilize).
pub fn adjust_spectral_radius_to(w: &Matrix, target: f64) -> Result<Matrix> {
    if !w.is_square() {
        return Err(Error::dimension(
            "adjust_spectral_radius",
            w.shape_string(),
            "square matrix".to_string(),
        ));
    }
    if !(target > 0.0) {
        return Err(Error::Parameter(format!(
            "target radius must be > 0, got {target}"
        )));
    }
    let est = spectral_radius(w, RADIUS_TOL, RADIUS_MAX_ITER)?;
    let rho = if est.converged {
        est.value
    } else {
        let bound = w.max_abs_row_sum();
        log::warn!(
            "spectral radius estimate did not converge ({} after {} iters); \
             falling back to row-sum bound {}",
            est.value,
            est.iterations,
            bound
        );
        bound
    };
    if rho > 1.0 {
        Ok(w.scale(target / rho))
    } else {
        Ok(w.clone())
    }
}

/// `adjust_spectral_radius_to` with the standard target of 1.
pub fn adjust_spectral_radius(w: &Matrix) -> Result<Matrix> {
    adjust_spectral_radius_to(w, 1.0)
}

/// Serializable layer configuration.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ReservoirConfig {
    pub n_res: usize,
    pub alpha: f64,
    pub k: usize,
    pub trainable: bool,
    pub seed: u64,
    #[serde(default = "default_target_radius")]
    pub target_radius: f64,
}

fn default_target_radius() -> f64 {
    1.0
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        ReservoirConfig {
            n_res: 32,
            alpha: 0.8,
            k: 1,
            trainable: false,
            seed: 0,
            target_radius: 1.0,
        }
    }
}

fn validate_alpha_k(alpha: f64, k: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter(format!(
            "leaky rate alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if k == 0 {
        return Err(Error::Parameter("iteration count k must be >= 1".to_string()));
    }
    Ok(())
}

/// One reservoir layer. Weight matrices live in the shared `ParamStore`;
/// the layer keeps ids plus its scalar hyperparameters.
#[derive(Clone, Debug)]
pub struct ReservoirLayer {
    /// Input map, present only in the first layer of a stack.
    pub w_in: Option<ParamId>,
    pub w_res: ParamId,
    pub w_out: ParamId,
    pub alpha: f64,
    pub k: usize,
    pub trainable: bool,
    pub in_dim: usize,
    pub res_dim: usize,
    pub out_dim: usize,
}

impl ReservoirLayer {
    /// Random initialization: w_in and w_res uniform in [-1, 1) with the
    /// reservoir adjusted to the target radius; w_out scaled for a
    /// unit-variance-ish readout.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input_dim: Option<usize>,
        res_dim: usize,
        out_dim: usize,
        cfg: &ReservoirConfig,
        rng: &mut Rng,
    ) -> Result<Self> {
        validate_alpha_k(cfg.alpha, cfg.k)?;
        let w_in = match input_dim {
            Some(d) => {
                let m = rng.uniform_matrix(d, res_dim, -1.0, 1.0)?;
                Some(store.register(format!("{name}.w_in"), m, cfg.trainable))
            }
            None => None,
        };
        let raw = rng.uniform_matrix(res_dim, res_dim, -1.0, 1.0)?;
        let adjusted = adjust_spectral_radius_to(&raw, cfg.target_radius)?;
        let w_res = store.register(format!("{name}.w_res"), adjusted, cfg.trainable);
        let scale = 1.0 / (res_dim as f64).sqrt();
        let w_out_m = rng.uniform_matrix(res_dim, out_dim, -scale, scale)?;
        let w_out = store.register(format!("{name}.w_out"), w_out_m, true);
        Ok(ReservoirLayer {
            w_in,
            w_res,
            w_out,
            alpha: cfg.alpha,
            k: cfg.k,
            trainable: cfg.trainable,
            in_dim: input_dim.unwrap_or(res_dim),
            res_dim,
            out_dim,
        })
    }

    /// Build from explicit weight matrices (the reservoir is still put
    /// through the radius adjustment, preserving the construction
    /// invariant).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        store: &mut ParamStore,
        name: &str,
        w_in: Option<Matrix>,
        w_res: Matrix,
        w_out: Matrix,
        alpha: f64,
        k: usize,
        trainable: bool,
    ) -> Result<Self> {
        validate_alpha_k(alpha, k)?;
        let res_dim = w_res.rows();
        if !w_res.is_square() {
            return Err(Error::dimension(
                "reservoir",
                w_res.shape_string(),
                "square w_res".to_string(),
            ));
        }
        if let Some(ref m) = w_in {
            if m.cols() != res_dim {
                return Err(Error::Config(format!(
                    "w_in maps to {} but reservoir is {}",
                    m.cols(),
                    res_dim
                )));
            }
        }
        if w_out.rows() != res_dim {
            return Err(Error::Config(format!(
                "w_out consumes {} but reservoir is {}",
                w_out.rows(),
                res_dim
            )));
        }
        let in_dim = w_in.as_ref().map_or(res_dim, |m| m.rows());
        let out_dim = w_out.cols();
        let adjusted = adjust_spectral_radius(&w_res)?;
        let w_in = w_in.map(|m| store.register(format!("{name}.w_in"), m, trainable));
        let w_res = store.register(format!("{name}.w_res"), adjusted, trainable);
        let w_out = store.register(format!("{name}.w_out"), w_out, true);
        Ok(ReservoirLayer {
            w_in,
            w_res,
            w_out,
            alpha,
            k,
            trainable,
            in_dim,
            res_dim,
            out_dim,
        })
    }

    /// H^(0) = X (input map); requires this layer to own an input map.
    pub fn input_transform_var(&self, bound: &[Var], x: &Var) -> Result<Var> {
        let id = self.w_in.ok_or_else(|| {
            Error::Config("input_transform on a layer without an input map".to_string())
        })?;
        x.matmul(&bound[id.0])
    }

    /// k applications of the leaky-integrator convolution.
    pub fn reservoir_forward_var(&self, bound: &[Var], a_norm: &Var, h0: &Var) -> Result<Var> {
        reservoir_iterate_var(a_norm, h0, &bound[self.w_res.0], self.alpha, self.k)
    }

    /// Linear readout via w_out.
    pub fn output_transform_var(&self, bound: &[Var], h: &Var) -> Result<Var> {
        h.matmul(&bound[self.w_out.0])
    }

    /// Plain-matrix input transform (no recording).
    pub fn input_transform(&self, store: &ParamStore, x: &Matrix) -> Result<Matrix> {
        let tape = Tape::new();
        let bound = store.bind(&tape);
        let xv = tape.constant(x.clone());
        Ok(self.input_transform_var(&bound, &xv)?.value())
    }

    /// Plain-matrix reservoir forward (no recording).
    pub fn reservoir_forward(&self, store: &ParamStore, a_norm: &Matrix, h0: &Matrix) -> Result<Matrix> {
        reservoir_iterate(a_norm, h0, store.get(self.w_res), self.alpha, self.k)
    }

    /// Plain-matrix output transform (no recording).
    pub fn output_transform(&self, store: &ParamStore, h: &Matrix) -> Result<Matrix> {
        h.matmul(store.get(self.w_out))
    }

    /// Trainable scalar count for this layer alone.
    pub fn trainable_param_count(&self) -> usize {
        let w_out = self.res_dim * self.out_dim;
        if self.trainable {
            let w_in = self.w_in.map_or(0, |_| self.in_dim * self.res_dim);
            w_in + self.res_dim * self.res_dim + w_out
        } else {
            w_out
        }
    }
}

/// One step of the update, applied `k` times:
/// `H <- ReLU((1 - alpha) H + alpha * A_norm H W_res)`, recorded on tape.
pub fn reservoir_iterate_var(a_norm: &Var, h0: &Var, w_res: &Var, alpha: f64, k: usize) -> Result<Var> {
    let mut h = h0.clone();
    for _ in 0..k {
        let propagated = a_norm.matmul(&h)?.matmul(w_res)?.scale(alpha);
        h = h.scale(1.0 - alpha).add(&propagated)?.relu();
    }
    Ok(h)
}

/// Plain-matrix form of `reservoir_iterate_var`; also accepts alpha = 0
/// for limit checks.
pub fn reservoir_iterate(a_norm: &Matrix, h0: &Matrix, w_res: &Matrix, alpha: f64, k: usize) -> Result<Matrix> {
    if a_norm.cols() != h0.rows() {
        return Err(Error::dimension(
            "reservoir_forward",
            a_norm.shape_string(),
            h0.shape_string(),
        ));
    }
    let mut h = h0.clone();
    for _ in 0..k {
        let propagated = a_norm.matmul(&h)?.matmul(w_res)?.scale(alpha);
        h = h.scale(1.0 - alpha).add(&propagated)?.map(|x| x.max(0.0));
    }
    Ok(h)
}

/// A chain of reservoir layers: one input map, then per-layer
/// (reservoir -> output) with matching inter-layer dimensions.
#[derive(Clone, Debug)]
pub struct ReservoirStack {
    pub layers: Vec<ReservoirLayer>,
}

impl ReservoirStack {
    /// Uniform stack: `n_layers` layers of width `cfg.n_res`, final output
    /// dimension `out_dim`. `input_dim = None` omits the input transform
    /// (the first layer then consumes `n_res`-dimensional inputs directly).
    pub fn build(
        store: &mut ParamStore,
        name: &str,
        input_dim: Option<usize>,
        n_layers: usize,
        out_dim: usize,
        cfg: &ReservoirConfig,
        rng: &mut Rng,
    ) -> Result<Self> {
        if n_layers == 0 {
            return Err(Error::Config("stack needs at least one layer".to_string()));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let is_first = l == 0;
            let is_last = l == n_layers - 1;
            let layer_in = if is_first { input_dim } else { None };
            let layer_out = if is_last { out_dim } else { cfg.n_res };
            layers.push(ReservoirLayer::new(
                store,
                &format!("{name}.layer{l}"),
                layer_in,
                cfg.n_res,
                layer_out,
                cfg,
                rng,
            )?);
        }
        // Every layer consumes its predecessor's output.
        for w in layers.windows(2) {
            if w[0].out_dim != w[1].res_dim {
                return Err(Error::Config(format!(
                    "layer output {} does not match next reservoir {}",
                    w[0].out_dim, w[1].res_dim
                )));
            }
        }
        Ok(ReservoirStack { layers })
    }

    /// Recorded forward over the whole stack.
    pub fn forward_var(&self, bound: &[Var], a_norm: &Var, x: &Var) -> Result<Var> {
        let first = &self.layers[0];
        let mut h = if first.w_in.is_some() {
            first.input_transform_var(bound, x)?
        } else {
            x.clone()
        };
        for layer in &self.layers {
            h = layer.reservoir_forward_var(bound, a_norm, &h)?;
            h = layer.output_transform_var(bound, &h)?;
        }
        Ok(h)
    }

    /// Plain-matrix forward: node embeddings for one graph.
    pub fn forward(&self, store: &ParamStore, a_norm: &Matrix, x: &Matrix) -> Result<Matrix> {
        let tape = Tape::new();
        let bound = store.bind(&tape);
        let av = tape.constant(a_norm.clone());
        let xv = tape.constant(x.clone());
        Ok(self.forward_var(&bound, &av, &xv)?.value())
    }

    pub fn trainable_param_count(&self) -> usize {
        self.layers.iter().map(|l| l.trainable_param_count()).sum()
    }
}
