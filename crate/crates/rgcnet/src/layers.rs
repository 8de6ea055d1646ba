//! Baseline and auxiliary trainable layers: graph convolution, single-head
//! graph attention, batch normalization, mean global pooling, and dense
//! feed-forward blocks.

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::params::{ParamId, ParamStore};

fn glorot(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    let s = (6.0 / (rows + cols) as f64).sqrt();
    rng.uniform_matrix(rows, cols, -s, s).expect("valid range")
}

/// Graph convolution: `ReLU(A_norm H W + b)`.
#[derive(Clone, Debug)]
pub struct GcnLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl GcnLayer {
    pub fn new(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let weight = store.register(format!("{name}.weight"), glorot(rng, in_dim, out_dim), true);
        let bias = store.register(format!("{name}.bias"), Matrix::zeros(1, out_dim), true);
        GcnLayer {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward_var(&self, bound: &[Var], a_norm: &Var, h: &Var) -> Result<Var> {
        a_norm
            .matmul(h)?
            .matmul(&bound[self.weight.0])?
            .add_row(&bound[self.bias.0])?
            .relu()
            .pipe_ok()
    }

    pub fn forward(&self, store: &ParamStore, a_norm: &Matrix, h: &Matrix) -> Result<Matrix> {
        let tape = Tape::new();
        let bound = store.bind(&tape);
        let av = tape.constant(a_norm.clone());
        let hv = tape.constant(h.clone());
        Ok(self.forward_var(&bound, &av, &hv)?.value())
    }

    pub fn trainable_param_count(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }
}

// Tiny helper so forward chains read top-down.
trait PipeOk: Sized {
    fn pipe_ok(self) -> Result<Self> {
        Ok(self)
    }
}
impl PipeOk for Var {}

/// Single-head graph attention layer with leaky-ReLU scoring (slope 0.2).
/// Every node always attends to itself: self-loops are added to the mask.
#[derive(Clone, Debug)]
pub struct GatLayer {
    pub weight: ParamId,
    pub att_src: ParamId,
    pub att_dst: ParamId,
    pub bias: ParamId,
    pub negative_slope: f64,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl GatLayer {
    pub fn new(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let weight = store.register(format!("{name}.weight"), glorot(rng, in_dim, out_dim), true);
        let att_src = store.register(format!("{name}.att_src"), glorot(rng, out_dim, 1), true);
        let att_dst = store.register(format!("{name}.att_dst"), glorot(rng, out_dim, 1), true);
        let bias = store.register(format!("{name}.bias"), Matrix::zeros(1, out_dim), true);
        GatLayer {
            weight,
            att_src,
            att_dst,
            bias,
            negative_slope: 0.2,
            in_dim,
            out_dim,
        }
    }

    /// Attention mask from an adjacency matrix: allowed pairs are nonzero
    /// entries plus the diagonal.
    pub fn attention_mask(adjacency: &Matrix) -> Matrix {
        let n = adjacency.rows();
        let mut mask = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i == j || adjacency[(i, j)] != 0.0 {
                    mask[(i, j)] = 1.0;
                }
            }
        }
        mask
    }

    /// Row-stochastic attention coefficients for the given mask, recorded.
    fn attention_var(&self, bound: &[Var], mask: &Matrix, transformed: &Var) -> Result<Var> {
        let n = transformed.shape().0;
        let tape = transformed.tape();
        let ones_row = tape.constant(Matrix::filled(1, n, 1.0));
        let ones_col = tape.constant(Matrix::filled(n, 1, 1.0));
        let src = transformed.matmul(&bound[self.att_src.0])?; // n x 1
        let dst = transformed.matmul(&bound[self.att_dst.0])?; // n x 1
        // scores[i][j] = src[i] + dst[j], via rank-1 broadcasts.
        let scores = src
            .matmul(&ones_row)?
            .add(&ones_col.matmul(&dst.transpose())?)?
            .leaky_relu(self.negative_slope);
        scores.masked_row_softmax(mask)
    }

    /// Attention-weighted aggregation of transformed features, plus bias.
    pub fn forward_var(&self, bound: &[Var], mask: &Matrix, h: &Var) -> Result<Var> {
        let transformed = h.matmul(&bound[self.weight.0])?;
        let attention = self.attention_var(bound, mask, &transformed)?;
        attention.matmul(&transformed)?.add_row(&bound[self.bias.0])
    }

    pub fn forward(&self, store: &ParamStore, mask: &Matrix, h: &Matrix) -> Result<Matrix> {
        let tape = Tape::new();
        let bound = store.bind(&tape);
        let hv = tape.constant(h.clone());
        Ok(self.forward_var(&bound, mask, &hv)?.value())
    }

    /// Attention coefficients as plain values (for inspection/tests).
    pub fn attention(&self, store: &ParamStore, mask: &Matrix, h: &Matrix) -> Result<Matrix> {
        let tape = Tape::new();
        let bound = store.bind(&tape);
        let hv = tape.constant(h.clone());
        let transformed = hv.matmul(&bound[self.weight.0])?;
        Ok(self.attention_var(&bound, mask, &transformed)?.value())
    }

    pub fn trainable_param_count(&self) -> usize {
        self.in_dim * self.out_dim + 2 * self.out_dim + self.out_dim
    }
}

/// Batch normalization over the node dimension (one statistic per feature
/// column) with running statistics for eval mode.
#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
    pub dim: usize,
}

impl BatchNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        let gamma = store.register(format!("{name}.gamma"), Matrix::filled(1, dim, 1.0), true);
        let beta = store.register(format!("{name}.beta"), Matrix::zeros(1, dim), true);
        BatchNorm {
            gamma,
            beta,
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum: 0.1,
            eps: 1e-5,
            dim,
        }
    }

    /// Training-mode forward: batch statistics drive the normalization and
    /// the running statistics get a momentum update.
    pub fn forward_train_var(&mut self, bound: &[Var], x: &Var) -> Result<Var> {
        let out = x.batch_norm(&bound[self.gamma.0], &bound[self.beta.0], None, self.eps)?;
        let v = x.value();
        let (n, d) = v.shape();
        for c in 0..d {
            let mut mean = 0.0;
            for r in 0..n {
                mean += v[(r, c)];
            }
            mean /= n as f64;
            let mut var = 0.0;
            for r in 0..n {
                var += (v[(r, c)] - mean).powi(2);
            }
            var /= n as f64;
            self.running_mean[c] = (1.0 - self.momentum) * self.running_mean[c] + self.momentum * mean;
            self.running_var[c] = (1.0 - self.momentum) * self.running_var[c] + self.momentum * var;
        }
        Ok(out)
    }

    /// Eval-mode forward: a deterministic affine map under the frozen
    /// running statistics.
    pub fn forward_eval_var(&self, bound: &[Var], x: &Var) -> Result<Var> {
        x.batch_norm(
            &bound[self.gamma.0],
            &bound[self.beta.0],
            Some((&self.running_mean, &self.running_var)),
            self.eps,
        )
    }

    pub fn trainable_param_count(&self) -> usize {
        2 * self.dim
    }
}

/// Column means of a non-empty matrix: the graph-level readout.
pub fn mean_pool(h: &Matrix) -> Result<Matrix> {
    if h.rows() == 0 {
        return Err(Error::Domain("mean_pool of an empty matrix".to_string()));
    }
    let mut out = Matrix::zeros(1, h.cols());
    for r in 0..h.rows() {
        for c in 0..h.cols() {
            out[(0, c)] += h[(r, c)];
        }
    }
    Ok(out.scale(1.0 / h.rows() as f64))
}

/// One dense layer `x W + b` (activation is the caller's choice).
#[derive(Clone, Debug)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Dense {
    pub fn new(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let weight = store.register(format!("{name}.weight"), glorot(rng, in_dim, out_dim), true);
        let bias = store.register(format!("{name}.bias"), Matrix::zeros(1, out_dim), true);
        Dense {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward_var(&self, bound: &[Var], x: &Var) -> Result<Var> {
        x.matmul(&bound[self.weight.0])?.add_row(&bound[self.bias.0])
    }

    pub fn trainable_param_count(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }
}

/// Two dense layers with a ReLU between them.
#[derive(Clone, Debug)]
pub struct Ffn {
    pub hidden: Dense,
    pub out: Dense,
}

impl Ffn {
    pub fn new(store: &mut ParamStore, name: &str, in_dim: usize, hidden_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        Ffn {
            hidden: Dense::new(store, &format!("{name}.hidden"), in_dim, hidden_dim, rng),
            out: Dense::new(store, &format!("{name}.out"), hidden_dim, out_dim, rng),
        }
    }

    pub fn forward_var(&self, bound: &[Var], x: &Var) -> Result<Var> {
        let h = self.hidden.forward_var(bound, x)?.relu();
        self.out.forward_var(bound, &h)
    }

    pub fn trainable_param_count(&self) -> usize {
        self.hidden.trainable_param_count() + self.out.trainable_param_count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, permute, Graph, Permutation};

    #[test]
    fn gcn_zero_weight_gives_zero_prebias() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(1);
        let layer = GcnLayer::new(&mut store, "g", 3, 2, &mut rng);
        *store.get_mut(layer.weight) = Matrix::zeros(3, 2);
        let a = normalize_adjacency(&Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        let h = rng.uniform_matrix(2, 3, -1.0, 1.0).unwrap();
        let out = layer.forward(&store, &a, &h).unwrap();
        assert_eq!(out, Matrix::zeros(2, 2));
    }

    #[test]
    fn gcn_identity_adjacency_is_per_node_dense() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(2);
        let layer = GcnLayer::new(&mut store, "g", 3, 4, &mut rng);
        let a = Matrix::identity(5);
        let h = rng.uniform_matrix(5, 3, -1.0, 1.0).unwrap();
        let out = layer.forward(&store, &a, &h).unwrap();
        let dense = h
            .matmul(store.get(layer.weight))
            .unwrap()
            .map(|x| x.max(0.0));
        // Bias is zero at init, so this is exactly the per-node map.
        for (o, d) in out.data().iter().zip(dense.data()) {
            assert!((o - d).abs() < 1e-15);
        }
    }

    #[test]
    fn gcn_matches_scalar_loop_oracle() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(3);
        let layer = GcnLayer::new(&mut store, "g", 3, 2, &mut rng);
        *store.get_mut(layer.bias) = rng.uniform_matrix(1, 2, -0.5, 0.5).unwrap();
        let raw = rng.uniform_matrix(4, 4, 0.0, 1.0).unwrap();
        let a = normalize_adjacency(&raw.add(&raw.transpose()).unwrap()).unwrap();
        let h = rng.uniform_matrix(4, 3, -1.0, 1.0).unwrap();
        let out = layer.forward(&store, &a, &h).unwrap();
        let w = store.get(layer.weight);
        let b = store.get(layer.bias);
        for i in 0..4 {
            for j in 0..2 {
                let mut acc = 0.0;
                for u in 0..4 {
                    for v in 0..3 {
                        acc += a[(i, u)] * h[(u, v)] * w[(v, j)];
                    }
                }
                let want = (acc + b[(0, j)]).max(0.0);
                assert!((out[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gat_single_node_passes_through_own_features() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(4);
        let layer = GatLayer::new(&mut store, "a", 3, 2, &mut rng);
        let adjacency = Matrix::zeros(1, 1);
        let mask = GatLayer::attention_mask(&adjacency);
        let h = rng.uniform_matrix(1, 3, -1.0, 1.0).unwrap();
        let out = layer.forward(&store, &mask, &h).unwrap();
        let want = h.matmul(store.get(layer.weight)).unwrap();
        for (o, w) in out.data().iter().zip(want.data()) {
            assert!((o - w).abs() < 1e-12);
        }
    }

    #[test]
    fn gat_star_graph_center_attends_uniformly() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(5);
        let layer = GatLayer::new(&mut store, "a", 2, 3, &mut rng);
        // Node 0 is the center of a 4-leaf star; all features identical.
        let n = 5;
        let mut adjacency = Matrix::zeros(n, n);
        for leaf in 1..n {
            adjacency[(0, leaf)] = 1.0;
            adjacency[(leaf, 0)] = 1.0;
        }
        let mask = GatLayer::attention_mask(&adjacency);
        let h = Matrix::filled(n, 2, 0.7);
        let att = layer.attention(&store, &mask, &h).unwrap();
        // Row 0 covers itself + 4 leaves; identical features mean identical
        // scores, so every coefficient is 1/5.
        for j in 0..n {
            assert!((att[(0, j)] - 0.2).abs() < 1e-12, "att {}", att[(0, j)]);
        }
    }

    #[test]
    fn gat_attention_rows_sum_to_one() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(6);
        let layer = GatLayer::new(&mut store, "a", 3, 4, &mut rng);
        let raw = rng.uniform_matrix(6, 6, 0.0, 1.0).unwrap();
        let adjacency = raw.map(|x| if x > 0.5 { 1.0 } else { 0.0 });
        let mask = GatLayer::attention_mask(&adjacency);
        let h = rng.uniform_matrix(6, 3, -1.0, 1.0).unwrap();
        let att = layer.attention(&store, &mask, &h).unwrap();
        for r in 0..6 {
            let sum: f64 = att.row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "row {r} sums to {sum}");
        }
    }

    #[test]
    fn gat_matches_scalar_attention_oracle() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(7);
        let layer = GatLayer::new(&mut store, "a", 2, 2, &mut rng);
        let adjacency = Matrix::from_rows(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]);
        let mask = GatLayer::attention_mask(&adjacency);
        let h = rng.uniform_matrix(3, 2, -1.0, 1.0).unwrap();
        let out = layer.forward(&store, &mask, &h).unwrap();

        // Scalar oracle.
        let w = store.get(layer.weight).clone();
        let a_src = store.get(layer.att_src).clone();
        let a_dst = store.get(layer.att_dst).clone();
        let b = store.get(layer.bias).clone();
        let s = h.matmul(&w).unwrap();
        let lrelu = |x: f64| if x > 0.0 { x } else { 0.2 * x };
        let mut want = Matrix::zeros(3, 2);
        for i in 0..3 {
            let mut weights = vec![0.0; 3];
            let mut denom = 0.0;
            let mut max = f64::NEG_INFINITY;
            for j in 0..3 {
                if mask[(i, j)] != 0.0 {
                    let score = lrelu(
                        s.row(i).iter().zip(a_src.data()).map(|(x, a)| x * a).sum::<f64>()
                            + s.row(j).iter().zip(a_dst.data()).map(|(x, a)| x * a).sum::<f64>(),
                    );
                    weights[j] = score;
                    max = max.max(score);
                }
            }
            for j in 0..3 {
                if mask[(i, j)] != 0.0 {
                    weights[j] = (weights[j] - max).exp();
                    denom += weights[j];
                }
            }
            for j in 0..3 {
                if mask[(i, j)] != 0.0 {
                    let alpha = weights[j] / denom;
                    for c in 0..2 {
                        want[(i, c)] += alpha * s[(j, c)];
                    }
                }
            }
            for c in 0..2 {
                want[(i, c)] += b[(0, c)];
            }
        }
        for (o, w_) in out.data().iter().zip(want.data()) {
            assert!((o - w_).abs() < 1e-10);
        }
    }

    #[test]
    fn gcn_and_gat_are_permutation_equivariant() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(8);
        let gcn = GcnLayer::new(&mut store, "g", 3, 4, &mut rng);
        let gat = GatLayer::new(&mut store, "a", 3, 4, &mut rng);
        for _ in 0..8 {
            let n = 4 + rng.index(6);
            let raw = rng.uniform_matrix(n, n, 0.0, 1.0).unwrap();
            let a = raw
                .add(&raw.transpose())
                .unwrap()
                .map(|x| if x > 0.9 { x } else { 0.0 });
            let g = Graph::new(a, rng.uniform_matrix(n, 3, -1.0, 1.0).unwrap()).unwrap();
            let p = Permutation::random(n, &mut rng);
            let pg = permute(&g, &p).unwrap();

            let out = gcn
                .forward(&store, &normalize_adjacency(&g.adjacency).unwrap(), &g.features)
                .unwrap();
            let out_p = gcn
                .forward(&store, &normalize_adjacency(&pg.adjacency).unwrap(), &pg.features)
                .unwrap();
            assert!(out_p.sub(&p.apply_rows(&out).unwrap()).unwrap().max_abs() <= 1e-9);

            let out = gat
                .forward(&store, &GatLayer::attention_mask(&g.adjacency), &g.features)
                .unwrap();
            let out_p = gat
                .forward(&store, &GatLayer::attention_mask(&pg.adjacency), &pg.features)
                .unwrap();
            assert!(out_p.sub(&p.apply_rows(&out).unwrap()).unwrap().max_abs() <= 1e-9);
        }
    }

    #[test]
    fn mean_pool_cases() {
        let single = Matrix::from_rows(&[&[1.0, 2.0, 3.0]]);
        assert_eq!(mean_pool(&single).unwrap(), single);
        let two = Matrix::from_rows(&[&[0.0, 2.0], &[2.0, 0.0]]);
        assert_eq!(mean_pool(&two).unwrap(), Matrix::from_rows(&[&[1.0, 1.0]]));
        assert!(mean_pool(&Matrix::zeros(0, 3)).is_err());
    }

    #[test]
    fn mean_pool_is_permutation_invariant() {
        let mut rng = Rng::new(9);
        let h = rng.uniform_matrix(6, 3, -1.0, 1.0).unwrap();
        let p = Permutation::random(6, &mut rng);
        let permuted = p.apply_rows(&h).unwrap();
        assert_eq!(mean_pool(&h).unwrap(), mean_pool(&permuted).unwrap());
    }

    #[test]
    fn batch_norm_eval_is_deterministic_affine() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(10);
        let mut bn = BatchNorm::new(&mut store, "bn", 3);
        // A few training passes move the running stats.
        for _ in 0..5 {
            let tape = Tape::new();
            let bound = store.bind(&tape);
            let x = tape.constant(rng.uniform_matrix(4, 3, -2.0, 2.0).unwrap());
            bn.forward_train_var(&bound, &x).unwrap();
        }
        let x = rng.uniform_matrix(4, 3, -2.0, 2.0).unwrap();
        let run = |bn: &BatchNorm, x: &Matrix| {
            let tape = Tape::new();
            let bound = store.bind(&tape);
            let xv = tape.constant(x.clone());
            bn.forward_eval_var(&bound, &xv).unwrap().value()
        };
        assert_eq!(run(&bn, &x), run(&bn, &x));
        // And affine: f(2x) - f(x) == f(x) - f(0) column-wise scaling check.
        let f0 = run(&bn, &Matrix::zeros(4, 3));
        let f1 = run(&bn, &x);
        let f2 = run(&bn, &x.scale(2.0));
        let lhs = f2.sub(&f1).unwrap();
        let rhs = f1.sub(&f0).unwrap();
        for (l, r) in lhs.data().iter().zip(rhs.data()) {
            assert!((l - r).abs() < 1e-9);
        }
    }
}
