//! Graph classification: a convolution stack (reservoir, trainable
//! reservoir, GCN, or GAT) followed by batch normalization, ReLU, mean
//! global pooling, a feed-forward head, and softmax.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency_opts, Graph};
use crate::layers::{BatchNorm, Ffn, GatLayer, GcnLayer};
use crate::linalg::{Matrix, Rng};
use crate::params::ParamStore;
use crate::reservoir::{ReservoirConfig, ReservoirStack};

/// Which convolution fills the stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Rgc,
    Trgc,
    Gcn,
    Gat,
}

impl LayerKind {
    pub fn uses_reservoir(self) -> bool {
        matches!(self, LayerKind::Rgc | LayerKind::Trgc)
    }
}

impl std::str::FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rgc" => Ok(LayerKind::Rgc),
            "trgc" => Ok(LayerKind::Trgc),
            "gcn" => Ok(LayerKind::Gcn),
            "gat" => Ok(LayerKind::Gat),
            other => Err(Error::Parameter(format!("unknown layer kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for LayerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LayerKind::Rgc => "rgc",
            LayerKind::Trgc => "trgc",
            LayerKind::Gcn => "gcn",
            LayerKind::Gat => "gat",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub layer_kind: LayerKind,
    pub n_layers: usize,
    pub feature_dim: usize,
    pub n_classes: usize,
    /// Width of the conv stack (reservoir size for reservoir kinds).
    pub hidden_dim: usize,
    /// Leaky rate for reservoir kinds.
    pub alpha: f64,
    /// Reservoir iterations per layer.
    pub k: usize,
    pub target_radius: f64,
    pub add_self_loops: bool,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            layer_kind: LayerKind::Rgc,
            n_layers: 1,
            feature_dim: 1,
            n_classes: 2,
            hidden_dim: 32,
            alpha: 0.8,
            k: 1,
            target_radius: 1.0,
            add_self_loops: false,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
enum ConvStack {
    Reservoir(ReservoirStack),
    Gcn(Vec<GcnLayer>),
    Gat(Vec<GatLayer>),
}

/// The Fig.-3-shaped classifier.
#[derive(Clone, Debug)]
pub struct ClassifierModel {
    pub cfg: ClassifierConfig,
    pub store: ParamStore,
    conv: ConvStack,
    bn: BatchNorm,
    head: Ffn,
}

impl ClassifierModel {
    pub fn new(cfg: ClassifierConfig) -> Result<Self> {
        if cfg.n_layers == 0 {
            return Err(Error::Config("need at least one conv layer".to_string()));
        }
        if cfg.n_classes < 2 {
            return Err(Error::Config("need at least two classes".to_string()));
        }
        let mut store = ParamStore::new();
        let mut rng = Rng::new(cfg.seed);
        let conv = match cfg.layer_kind {
            LayerKind::Rgc | LayerKind::Trgc => {
                let rc = ReservoirConfig {
                    n_res: cfg.hidden_dim,
                    alpha: cfg.alpha,
                    k: cfg.k,
                    trainable: cfg.layer_kind == LayerKind::Trgc,
                    seed: cfg.seed,
                    target_radius: cfg.target_radius,
                };
                ConvStack::Reservoir(ReservoirStack::build(
                    &mut store,
                    "conv",
                    Some(cfg.feature_dim),
                    cfg.n_layers,
                    cfg.hidden_dim,
                    &rc,
                    &mut rng,
                )?)
            }
            LayerKind::Gcn => {
                let mut layers = Vec::with_capacity(cfg.n_layers);
                for l in 0..cfg.n_layers {
                    let in_dim = if l == 0 { cfg.feature_dim } else { cfg.hidden_dim };
                    layers.push(GcnLayer::new(
                        &mut store,
                        &format!("conv.layer{l}"),
                        in_dim,
                        cfg.hidden_dim,
                        &mut rng,
                    ));
                }
                ConvStack::Gcn(layers)
            }
            LayerKind::Gat => {
                let mut layers = Vec::with_capacity(cfg.n_layers);
                for l in 0..cfg.n_layers {
                    let in_dim = if l == 0 { cfg.feature_dim } else { cfg.hidden_dim };
                    layers.push(GatLayer::new(
                        &mut store,
                        &format!("conv.layer{l}"),
                        in_dim,
                        cfg.hidden_dim,
                        &mut rng,
                    ));
                }
                ConvStack::Gat(layers)
            }
        };
        let bn = BatchNorm::new(&mut store, "bn", cfg.hidden_dim);
        let head = Ffn::new(
            &mut store,
            "head",
            cfg.hidden_dim,
            cfg.hidden_dim,
            cfg.n_classes,
            &mut rng,
        );
        Ok(ClassifierModel {
            cfg,
            store,
            conv,
            bn,
            head,
        })
    }

    fn conv_forward_var(&self, bound: &[Var], g: &Graph, tape: &Tape) -> Result<Var> {
        if g.feature_dim() != self.cfg.feature_dim {
            return Err(Error::Config(format!(
                "graph features have dim {}, model expects {}",
                g.feature_dim(),
                self.cfg.feature_dim
            )));
        }
        let x = tape.constant(g.features.clone());
        match &self.conv {
            ConvStack::Reservoir(stack) => {
                let a_norm = normalize_adjacency_opts(&g.adjacency, self.cfg.add_self_loops)?;
                let av = tape.constant(a_norm);
                stack.forward_var(bound, &av, &x)
            }
            ConvStack::Gcn(layers) => {
                let a_norm = normalize_adjacency_opts(&g.adjacency, self.cfg.add_self_loops)?;
                let av = tape.constant(a_norm);
                let mut h = x;
                for layer in layers {
                    h = layer.forward_var(bound, &av, &h)?;
                }
                Ok(h)
            }
            ConvStack::Gat(layers) => {
                let mask = GatLayer::attention_mask(&g.adjacency);
                let mut h = x;
                for (l, layer) in layers.iter().enumerate() {
                    h = layer.forward_var(bound, &mask, &h)?;
                    if l + 1 < layers.len() {
                        h = h.relu();
                    }
                }
                Ok(h)
            }
        }
    }

    /// Node embeddings produced by the conv stack alone (eval, unrecorded).
    pub fn embed(&self, g: &Graph) -> Result<Matrix> {
        let tape = Tape::new();
        let bound = self.store.bind(&tape);
        Ok(self.conv_forward_var(&bound, g, &tape)?.value())
    }

    /// Recorded forward pass to the probability row (1 x n_classes).
    pub fn forward_var(&mut self, bound: &[Var], g: &Graph, tape: &Tape, train: bool) -> Result<Var> {
        let h = self.conv_forward_var(bound, g, tape)?;
        let normed = if train {
            self.bn.forward_train_var(bound, &h)?
        } else {
            self.bn.forward_eval_var(bound, &h)?
        };
        let pooled = normed.relu().mean_rows();
        let logits = self.head.forward_var(bound, &pooled)?;
        Ok(logits.row_softmax())
    }

    /// Eval-mode class probabilities.
    pub fn classify_forward(&mut self, g: &Graph) -> Result<Vec<f64>> {
        let tape = Tape::new();
        let bound = self.store.bind(&tape);
        let probs = self.forward_var(&bound, g, &tape, false)?;
        Ok(probs.value().data().to_vec())
    }

    /// Predicted class id: argmax probability, ties to the lowest index.
    pub fn predict(&mut self, g: &Graph) -> Result<usize> {
        let probs = self.classify_forward(g)?;
        Ok(argmax(&probs))
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

/// Index of the largest value; ties break to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Negative log-likelihood of the labelled class, with the probability
/// floored at 1e-12 before the log.
pub fn nll_loss(probs: &[f64], label: usize) -> Result<f64> {
    if label >= probs.len() {
        return Err(Error::Contract(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    Ok(-(probs[label].max(1e-12)).ln())
}

/// Recorded form of `nll_loss` over a 1 x n_classes probability row.
pub fn nll_loss_var(probs: &Var, label: usize) -> Result<Var> {
    let (r, c) = probs.shape();
    if r != 1 {
        return Err(Error::Contract(format!(
            "probability row expected, got {r}x{c}"
        )));
    }
    if label >= c {
        return Err(Error::Contract(format!(
            "label {label} out of range for {c} classes"
        )));
    }
    Ok(probs.clamp_min(1e-12).log()?.pick(0, label)?.scale(-1.0))
}
