//! Temporal graph generation: an attention + reservoir encoder maps the
//! current graph to a latent row Z, and an FFN + reservoir decoder on an
//! identity adjacency expands Z into the predicted next-timepoint
//! adjacency via an inner-product edge readout.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, Graph};
use crate::layers::{BatchNorm, Ffn, GatLayer, GcnLayer};
use crate::linalg::{Matrix, Rng};
use crate::params::ParamStore;
use crate::reservoir::{ReservoirConfig, ReservoirStack};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorVariant {
    Rgc,
    Trgc,
    Gcn,
}

impl std::str::FromStr for GeneratorVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rgc" => Ok(GeneratorVariant::Rgc),
            "trgc" => Ok(GeneratorVariant::Trgc),
            "gcn" => Ok(GeneratorVariant::Gcn),
            other => Err(Error::Parameter(format!("unknown variant '{other}'"))),
        }
    }
}

impl std::fmt::Display for GeneratorVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            GeneratorVariant::Rgc => "rgc",
            GeneratorVariant::Trgc => "trgc",
            GeneratorVariant::Gcn => "gcn",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub variant: GeneratorVariant,
    pub n_nodes: usize,
    pub feature_dim: usize,
    /// Width of the GAT output / encoder stack.
    pub hidden_dim: usize,
    /// Length of Z; defaults to n_nodes when built from `for_nodes`.
    pub latent_dim: usize,
    /// Node-feature width the decoder FFN expands Z into.
    pub decoder_dim: usize,
    pub ffn_hidden: usize,
    pub alpha: f64,
    pub k: usize,
    pub target_radius: f64,
    /// Weights of the L1, node-strength, and Frobenius loss terms.
    pub lambda: (f64, f64, f64),
    pub seed: u64,
}

impl GeneratorConfig {
    /// Defaults for a connectome atlas of `n_nodes` regions.
    pub fn for_nodes(n_nodes: usize, feature_dim: usize) -> Self {
        GeneratorConfig {
            variant: GeneratorVariant::Rgc,
            n_nodes,
            feature_dim,
            hidden_dim: 24,
            latent_dim: n_nodes,
            decoder_dim: 24,
            ffn_hidden: 64,
            alpha: 0.8,
            k: 1,
            target_radius: 1.0,
            lambda: (1.0, 1.0, 1.0),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
enum GenStack {
    Reservoir(ReservoirStack),
    Gcn(Vec<GcnLayer>),
}

impl GenStack {
    fn forward_var(&self, bound: &[Var], a_norm: &Var, x: &Var) -> Result<Var> {
        match self {
            GenStack::Reservoir(stack) => stack.forward_var(bound, a_norm, x),
            GenStack::Gcn(layers) => {
                let mut h = x.clone();
                for layer in layers {
                    h = layer.forward_var(bound, a_norm, &h)?;
                }
                Ok(h)
            }
        }
    }
}

/// Encoder (GAT -> batch norm -> two conv layers -> mean pool) and decoder
/// (FFN -> two conv layers on identity adjacency -> H H^T readout).
#[derive(Clone, Debug)]
pub struct GeneratorModel {
    pub cfg: GeneratorConfig,
    pub store: ParamStore,
    gat: GatLayer,
    bn: BatchNorm,
    encoder: GenStack,
    expand: Ffn,
    decoder: GenStack,
}

impl GeneratorModel {
    pub fn new(cfg: GeneratorConfig) -> Result<Self> {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(cfg.seed);
        let gat = GatLayer::new(&mut store, "enc.gat", cfg.feature_dim, cfg.hidden_dim, &mut rng);
        let bn = BatchNorm::new(&mut store, "enc.bn", cfg.hidden_dim);
        let trainable = cfg.variant == GeneratorVariant::Trgc;
        let make_stack = |store: &mut ParamStore,
                          name: &str,
                          rng: &mut Rng,
                          width: usize,
                          out_dim: usize|
         -> Result<GenStack> {
            match cfg.variant {
                GeneratorVariant::Rgc | GeneratorVariant::Trgc => {
                    let rc = ReservoirConfig {
                        n_res: width,
                        alpha: cfg.alpha,
                        k: cfg.k,
                        trainable,
                        seed: cfg.seed,
                        target_radius: cfg.target_radius,
                    };
                    // The GAT / FFN ahead of the stack already projects into
                    // the reservoir width, so no input map is needed.
                    Ok(GenStack::Reservoir(ReservoirStack::build(
                        store, name, None, 2, out_dim, &rc, rng,
                    )?))
                }
                GeneratorVariant::Gcn => {
                    let l0 = GcnLayer::new(store, &format!("{name}.layer0"), width, width, rng);
                    let l1 = GcnLayer::new(store, &format!("{name}.layer1"), width, out_dim, rng);
                    Ok(GenStack::Gcn(vec![l0, l1]))
                }
            }
        };
        let encoder = make_stack(&mut store, "enc.conv", &mut rng, cfg.hidden_dim, cfg.latent_dim)?;
        let expand = Ffn::new(
            &mut store,
            "dec.expand",
            cfg.latent_dim,
            cfg.ffn_hidden,
            cfg.n_nodes * cfg.decoder_dim,
            &mut rng,
        );
        let decoder = make_stack(&mut store, "dec.conv", &mut rng, cfg.decoder_dim, cfg.decoder_dim)?;
        Ok(GeneratorModel {
            cfg,
            store,
            gat,
            bn,
            encoder,
            expand,
            decoder,
        })
    }

    fn check_nodes(&self, g: &Graph) -> Result<()> {
        if g.node_count() != self.cfg.n_nodes {
            return Err(Error::Config(format!(
                "graph has {} nodes, model is configured for {}",
                g.node_count(),
                self.cfg.n_nodes
            )));
        }
        if g.feature_dim() != self.cfg.feature_dim {
            return Err(Error::Config(format!(
                "graph features have dim {}, model expects {}",
                g.feature_dim(),
                self.cfg.feature_dim
            )));
        }
        Ok(())
    }

    /// Recorded encoder: latent row Z (1 x latent_dim).
    pub fn encode_var(&mut self, bound: &[Var], g: &Graph, tape: &Tape, train: bool) -> Result<Var> {
        self.check_nodes(g)?;
        let mask = GatLayer::attention_mask(&g.adjacency);
        let x = tape.constant(g.features.clone());
        let attended = self.gat.forward_var(bound, &mask, &x)?;
        let normed = if train {
            self.bn.forward_train_var(bound, &attended)?
        } else {
            self.bn.forward_eval_var(bound, &attended)?
        };
        let a_norm = tape.constant(normalize_adjacency(&g.adjacency)?);
        let h = self.encoder.forward_var(bound, &a_norm, &normed)?;
        Ok(h.mean_rows())
    }

    /// Recorded decoder: predicted adjacency (n x n), symmetric with a
    /// zero diagonal by construction.
    pub fn decode_var(&self, bound: &[Var], z: &Var, tape: &Tape) -> Result<Var> {
        let (r, c) = z.shape();
        if (r, c) != (1, self.cfg.latent_dim) {
            return Err(Error::Config(format!(
                "latent must be 1x{}, got {r}x{c}",
                self.cfg.latent_dim
            )));
        }
        let expanded = self
            .expand
            .forward_var(bound, z)?
            .reshape(self.cfg.n_nodes, self.cfg.decoder_dim)?;
        let identity = tape.constant(Matrix::identity(self.cfg.n_nodes));
        let h = self.decoder.forward_var(bound, &identity, &expanded)?;
        let gram = h.matmul(&h.transpose())?;
        let symmetric = gram.add(&gram.transpose())?.scale(0.5);
        symmetric.zero_diag()
    }

    /// Recorded end-to-end prediction for the next timepoint.
    pub fn forward_var(&mut self, bound: &[Var], g: &Graph, tape: &Tape, train: bool) -> Result<Var> {
        let z = self.encode_var(bound, g, tape, train)?;
        self.decode_var(bound, &z, tape)
    }

    /// Eval-mode latent representation.
    pub fn encode(&mut self, g: &Graph) -> Result<Matrix> {
        let tape = Tape::new();
        let bound = self.store.bind(&tape);
        Ok(self.encode_var(&bound, g, &tape, false)?.value())
    }

    /// Eval-mode decode.
    pub fn decode(&self, z: &Matrix) -> Result<Matrix> {
        let tape = Tape::new();
        let bound = self.store.bind(&tape);
        let zv = tape.constant(z.clone());
        Ok(self.decode_var(&bound, &zv, &tape)?.value())
    }

    /// Eval-mode prediction of the next adjacency.
    pub fn predict_next(&mut self, g: &Graph) -> Result<Matrix> {
        let tape = Tape::new();
        let bound = self.store.bind(&tape);
        Ok(self.forward_var(&bound, g, &tape, false)?.value())
    }

    pub fn trainable_param_count(&self) -> usize {
        self.store.trainable_scalar_count()
    }

    /// Batch-norm running statistics (mean, variance).
    pub fn bn_state(&self) -> (&[f64], &[f64]) {
        (&self.bn.running_mean, &self.bn.running_var)
    }

    pub fn set_bn_state(&mut self, mean: Vec<f64>, var: Vec<f64>) -> Result<()> {
        if mean.len() != self.bn.dim || var.len() != self.bn.dim {
            return Err(Error::Config("batch-norm state dimension mismatch".to_string()));
        }
        self.bn.running_mean = mean;
        self.bn.running_var = var;
        Ok(())
    }
}

/// The composite generation loss on plain matrices:
/// `lambda1 * mean|A - Ahat| + lambda2 * mean_i |strength_i - strength_hat_i|
///  + lambda3 * ||A - Ahat||_F`.
pub fn composite_loss(a_true: &Matrix, a_pred: &Matrix, lambda: (f64, f64, f64)) -> Result<f64> {
    if a_true.shape() != a_pred.shape() || !a_true.is_square() {
        return Err(Error::dimension(
            "composite_loss",
            a_true.shape_string(),
            a_pred.shape_string(),
        ));
    }
    let n = a_true.rows();
    let diff = a_true.sub(a_pred)?;
    let l1 = diff.data().iter().map(|x| x.abs()).sum::<f64>() / (n * n) as f64;
    let mut top = 0.0;
    for i in 0..n {
        let s_true: f64 = a_true.row(i).iter().sum();
        let s_pred: f64 = a_pred.row(i).iter().sum();
        top += (s_true - s_pred).abs();
    }
    top /= n as f64;
    let fro = diff.frobenius_norm();
    Ok(lambda.0 * l1 + lambda.1 * top + lambda.2 * fro)
}

/// Recorded form of `composite_loss`; `a_true` enters as a constant.
pub fn composite_loss_var(a_true: &Matrix, a_pred: &Var, lambda: (f64, f64, f64)) -> Result<Var> {
    let (r, c) = a_pred.shape();
    if a_true.shape() != (r, c) || r != c {
        return Err(Error::dimension(
            "composite_loss",
            a_true.shape_string(),
            format!("{r}x{c}"),
        ));
    }
    let tape = a_pred.tape();
    let truth = tape.constant(a_true.clone());
    let diff = truth.sub(a_pred)?;
    let l1 = diff.abs().mean_all();
    let top = truth
        .sum_cols()
        .sub(&a_pred.sum_cols())?
        .abs()
        .mean_all();
    let fro = diff.hadamard(&diff)?.sum_all().sqrt()?;
    l1.scale(lambda.0)
        .add(&top.scale(lambda.1))?
        .add(&fro.scale(lambda.2))
}

/// The no-op forecaster: next adjacency equals the current one.
pub fn identity_baseline(g: &Graph) -> Matrix {
    g.adjacency.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{permute, Permutation};

    fn connectome(seed: u64, n: usize, d: usize) -> Graph {
        let mut rng = Rng::new(seed);
        let raw = rng.uniform_matrix(n, n, 0.0, 1.0).unwrap();
        let mut a = raw.add(&raw.transpose()).unwrap().scale(0.5);
        for i in 0..n {
            a[(i, i)] = 0.0;
        }
        Graph::new(a, rng.uniform_matrix(n, d, -1.0, 1.0).unwrap()).unwrap()
    }

    fn small_model(variant: GeneratorVariant, latent: usize) -> GeneratorModel {
        let mut cfg = GeneratorConfig::for_nodes(6, 4);
        cfg.variant = variant;
        cfg.hidden_dim = 8;
        cfg.latent_dim = latent;
        cfg.decoder_dim = 6;
        cfg.ffn_hidden = 16;
        cfg.seed = 3;
        GeneratorModel::new(cfg).unwrap()
    }

    #[test]
    fn latent_length_matches_config() {
        for latent in [16, 35, 64] {
            let mut m = small_model(GeneratorVariant::Rgc, latent);
            let g = connectome(1, 6, 4);
            let z = m.encode(&g).unwrap();
            assert_eq!(z.shape(), (1, latent));
        }
    }

    #[test]
    fn encode_is_permutation_invariant() {
        for variant in [GeneratorVariant::Rgc, GeneratorVariant::Gcn] {
            let mut m = small_model(variant, 6);
            let g = connectome(2, 6, 4);
            let p = Permutation::random(6, &mut Rng::new(9));
            let pg = permute(&g, &p).unwrap();
            let z1 = m.encode(&g).unwrap();
            let z2 = m.encode(&pg).unwrap();
            let gap = z1.sub(&z2).unwrap().max_abs();
            assert!(gap < 1e-8, "{variant:?}: invariance gap {gap}");
        }
    }

    #[test]
    fn encode_is_deterministic() {
        let mut m = small_model(GeneratorVariant::Rgc, 6);
        let g = connectome(3, 6, 4);
        assert_eq!(m.encode(&g).unwrap(), m.encode(&g).unwrap());
    }

    #[test]
    fn decode_output_is_symmetric_with_zero_diagonal() {
        let m = small_model(GeneratorVariant::Rgc, 6);
        let z = Rng::new(4).uniform_matrix(1, 6, -1.0, 1.0).unwrap();
        let a = m.decode(&z).unwrap();
        assert_eq!(a.shape(), (6, 6));
        assert_eq!(a.sub(&a.transpose()).unwrap().max_abs(), 0.0);
        for i in 0..6 {
            assert_eq!(a[(i, i)], 0.0);
        }
    }

    #[test]
    fn decode_zero_latent_zero_biases_gives_zero_matrix() {
        let mut m = small_model(GeneratorVariant::Rgc, 6);
        for i in 0..m.store.len() {
            let id = crate::params::ParamId(i);
            let is_bias = {
                let name = &m.store.iter().nth(i).unwrap().name;
                name.ends_with(".bias") || name.ends_with(".beta")
            };
            if is_bias {
                let shape = m.store.get(id).shape();
                *m.store.get_mut(id) = Matrix::zeros(shape.0, shape.1);
            }
        }
        let z = Matrix::zeros(1, 6);
        let a = m.decode(&z).unwrap();
        assert_eq!(a, Matrix::zeros(6, 6));
    }

    #[test]
    fn decode_is_deterministic() {
        let m = small_model(GeneratorVariant::Trgc, 6);
        let z = Rng::new(5).uniform_matrix(1, 6, -1.0, 1.0).unwrap();
        assert_eq!(m.decode(&z).unwrap(), m.decode(&z).unwrap());
    }

    #[test]
    fn composite_loss_zero_iff_equal() {
        let a = connectome(6, 5, 1).adjacency;
        assert_eq!(composite_loss(&a, &a, (1.0, 1.0, 1.0)).unwrap(), 0.0);
        let b = a.map(|x| x + 0.01);
        assert!(composite_loss(&a, &b, (1.0, 1.0, 1.0)).unwrap() > 0.0);
    }

    #[test]
    fn composite_loss_hand_computed_2x2() {
        let ones = Matrix::filled(2, 2, 1.0);
        let zeros = Matrix::zeros(2, 2);
        // L1 = 1, node strength = 2, Frobenius = 2, total 5.
        let total = composite_loss(&ones, &zeros, (1.0, 1.0, 1.0)).unwrap();
        assert!((total - 5.0).abs() < 1e-12, "total {total}");
        let l1_only = composite_loss(&ones, &zeros, (1.0, 0.0, 0.0)).unwrap();
        assert!((l1_only - 1.0).abs() < 1e-12);
    }

    #[test]
    fn composite_loss_var_matches_plain() {
        let mut rng = Rng::new(7);
        let a = rng.uniform_matrix(4, 4, 0.0, 1.0).unwrap();
        let b = rng.uniform_matrix(4, 4, 0.0, 1.0).unwrap();
        let lambda = (1.0, 0.5, 2.0);
        let plain = composite_loss(&a, &b, lambda).unwrap();
        let tape = Tape::new();
        let pred = tape.leaf(b.clone(), true);
        let recorded = composite_loss_var(&a, &pred, lambda).unwrap();
        assert!((recorded.scalar().unwrap() - plain).abs() < 1e-12);
    }

    #[test]
    fn identity_baseline_is_the_input_adjacency() {
        let g = connectome(8, 5, 2);
        assert_eq!(identity_baseline(&g), g.adjacency);
        // On a static sequence the baseline is perfect.
        assert_eq!(
            composite_loss(&g.adjacency, &identity_baseline(&g), (1.0, 0.0, 0.0)).unwrap(),
            0.0
        );
    }

    #[test]
    fn trgc_has_more_trainable_params_than_rgc() {
        let rgc = small_model(GeneratorVariant::Rgc, 6);
        let trgc = small_model(GeneratorVariant::Trgc, 6);
        assert!(trgc.trainable_param_count() > rgc.trainable_param_count());
    }
}
