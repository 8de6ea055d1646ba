//! Synthetic longitudinal connectome generator.
//!
//! Baseline connectivity for each subject is drawn over the upper-triangle
//! entries from a multivariate normal (mean vector + covariance), clamped
//! nonnegative, and mirrored into a symmetric zero-diagonal matrix. Later
//! timepoints add a uniform drift `delta_w * tanh(t / n_t)` to every edge.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{features::make_node_features, Dataset};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{Matrix, Rng};

/// Covariance over the upper-triangle edge entries.
#[derive(Clone, Debug)]
pub enum Covariance {
    /// Independent entries with the given per-entry variances.
    Diagonal(Vec<f64>),
    /// Full covariance matrix (must be symmetric PSD).
    Full(Matrix),
    /// loadings * loadings^T + diag(variances): correlated connectivity
    /// driven by a few latent factors, plus independent noise.
    LowRankPlusDiag { loadings: Matrix, diag: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct SimulatorParams {
    pub n_subjects: usize,
    pub n_nodes: usize,
    pub n_timepoints: usize,
    /// Mean connectivity per upper-triangle entry.
    pub mean: Vec<f64>,
    pub covariance: Covariance,
    /// Overall connectivity difference applied at each step.
    pub delta_w: f64,
    pub seed: u64,
}

pub fn edge_count(n_nodes: usize) -> usize {
    n_nodes * (n_nodes - 1) / 2
}

impl SimulatorParams {
    /// The documented default profile: 100 subjects, 35 nodes, 3
    /// timepoints, mean connectivity 0.5, delta_w 0.05, and a low-rank +
    /// diagonal covariance (three smooth node-profile factors, per-entry
    /// factor scale ~0.017 each, residual sd 0.01). Real connectomes carry
    /// strong correlated structure across edges; a low-rank model keeps
    /// the subjects compressible the way real data is.
    pub fn default_profile() -> Self {
        Self::structured(100, 35, 3, 0.5, 0.05, 0)
    }

    /// Structured profile builder used by the default.
    pub fn structured(
        n_subjects: usize,
        n_nodes: usize,
        n_timepoints: usize,
        mean: f64,
        delta_w: f64,
        seed: u64,
    ) -> Self {
        let n_e = edge_count(n_nodes);
        let rank = 3;
        let mut loadings = Matrix::zeros(n_e, rank);
        // Smooth node profiles; factor k loads edge (i, j) with
        // scale_k * v_k(i) * v_k(j).
        let profile = |k: usize, i: usize| -> f64 {
            let x = i as f64 / n_nodes as f64;
            match k {
                0 => 1.0 + 0.6 * (2.0 * std::f64::consts::PI * x).sin(),
                1 => 1.0 + 0.6 * (2.0 * std::f64::consts::PI * x).cos(),
                _ => 1.0 + 1.2 * (x - 0.5),
            }
        };
        let scales = [0.017, 0.017, 0.017];
        let mut e = 0;
        for i in 0..n_nodes {
            for j in (i + 1)..n_nodes {
                for k in 0..rank {
                    loadings[(e, k)] = scales[k] * profile(k, i) * profile(k, j);
                }
                e += 1;
            }
        }
        SimulatorParams {
            n_subjects,
            n_nodes,
            n_timepoints,
            mean: vec![mean; n_e],
            covariance: Covariance::LowRankPlusDiag {
                loadings,
                diag: vec![1e-4; n_e],
            },
            delta_w,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_nodes < 2 {
            return Err(Error::Parameter("need at least 2 nodes".to_string()));
        }
        if self.n_timepoints < 2 {
            return Err(Error::Parameter("need at least 2 timepoints".to_string()));
        }
        let n_e = edge_count(self.n_nodes);
        if self.mean.len() != n_e {
            return Err(Error::Parameter(format!(
                "mean vector has {} entries, expected {n_e}",
                self.mean.len()
            )));
        }
        match &self.covariance {
            Covariance::Diagonal(d) => {
                if d.len() != n_e {
                    return Err(Error::Parameter(format!(
                        "diagonal covariance has {} entries, expected {n_e}",
                        d.len()
                    )));
                }
                if d.iter().any(|&v| v < 0.0) {
                    return Err(Error::Parameter("negative variance".to_string()));
                }
            }
            Covariance::Full(m) => {
                if m.shape() != (n_e, n_e) {
                    return Err(Error::Parameter(format!(
                        "covariance is {}, expected {n_e}x{n_e}",
                        m.shape_string()
                    )));
                }
            }
            Covariance::LowRankPlusDiag { loadings, diag } => {
                if loadings.rows() != n_e || diag.len() != n_e {
                    return Err(Error::Parameter(format!(
                        "low-rank covariance rows {} / diag {} do not match edge count {n_e}",
                        loadings.rows(),
                        diag.len()
                    )));
                }
                if diag.iter().any(|&v| v < 0.0) {
                    return Err(Error::Parameter("negative variance".to_string()));
                }
            }
        }
        Ok(())
    }
}

/// Lower-triangular Cholesky factor; fails on non-PSD input.
fn cholesky(m: &Matrix) -> Result<Matrix> {
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::Parameter(format!(
                        "covariance is not positive definite (pivot {sum:.3e} at {i})"
                    )));
                }
                l[(i, j)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Draw one upper-triangle vector of baseline connectivity.
fn sample_edges(params: &SimulatorParams, chol: &Option<Matrix>, rng: &mut Rng) -> Vec<f64> {
    let n_e = params.mean.len();
    match &params.covariance {
        Covariance::Diagonal(variances) => (0..n_e)
            .map(|e| params.mean[e] + variances[e].sqrt() * rng.normal())
            .collect(),
        Covariance::Full(_) => {
            let l = chol.as_ref().expect("factor precomputed");
            let z: Vec<f64> = (0..n_e).map(|_| rng.normal()).collect();
            (0..n_e)
                .map(|i| {
                    let mut v = params.mean[i];
                    for k in 0..=i {
                        v += l[(i, k)] * z[k];
                    }
                    v
                })
                .collect()
        }
        Covariance::LowRankPlusDiag { loadings, diag } => {
            let rank = loadings.cols();
            let factors: Vec<f64> = (0..rank).map(|_| rng.normal()).collect();
            (0..n_e)
                .map(|e| {
                    let mut v = params.mean[e];
                    for (k, f) in factors.iter().enumerate() {
                        v += loadings[(e, k)] * f;
                    }
                    v + diag[e].sqrt() * rng.normal()
                })
                .collect()
        }
    }
}

fn edges_to_matrix(n_nodes: usize, edges: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(n_nodes, n_nodes);
    let mut e = 0;
    for i in 0..n_nodes {
        for j in (i + 1)..n_nodes {
            m[(i, j)] = edges[e];
            m[(j, i)] = edges[e];
            e += 1;
        }
    }
    m
}

/// Generate the longitudinal dataset described by `params`.
pub fn simulate_longitudinal(params: &SimulatorParams) -> Result<Dataset> {
    params.validate()?;
    let chol = match &params.covariance {
        Covariance::Full(m) => Some(cholesky(m)?),
        _ => None,
    };
    let mut rng = Rng::new(params.seed);
    let n_t = params.n_timepoints;
    let mut graphs = Vec::with_capacity(params.n_subjects * n_t);
    let mut clamped_subjects = 0usize;
    for s in 0..params.n_subjects {
        let mut edges = sample_edges(params, &chol, &mut rng);
        let clamped = edges.iter().filter(|&&v| v < 0.0).count();
        if clamped > 0 {
            clamped_subjects += 1;
            log::debug!("subject {s}: clamped {clamped} negative baseline weights to 0");
            for v in edges.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        for t in 0..n_t {
            let mut g = Graph::new(
                edges_to_matrix(params.n_nodes, &edges),
                Matrix::zeros(params.n_nodes, 1),
            )?;
            g.features = make_node_features(&g, 8)?;
            g.subject = Some(s);
            g.timepoint = Some(t);
            graphs.push(g);
            if t + 1 < n_t {
                // W^{t+1} = W^t + delta_w * tanh((t+1) / n_t) on every edge.
                let drift = params.delta_w * (((t + 1) as f64) / n_t as f64).tanh();
                for v in edges.iter_mut() {
                    *v += drift;
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
        }
    }
    if clamped_subjects > 0 {
        log::info!("baseline clamping affected {clamped_subjects} subjects");
    }
    Dataset::longitudinal("simulated", graphs, n_t)
}

/// JSON-facing simulator profile. `mean` and `cov_diag` accept either a
/// scalar (broadcast over all edges) or a full per-edge array; `cov_file`
/// points at a CSV covariance matrix; `cov_lowrank` selects the structured
/// low-rank profile. Exactly one covariance field may be set (none selects
/// the structured default).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulatorProfile {
    #[serde(default = "default_subjects")]
    pub n_subjects: usize,
    #[serde(default = "default_nodes")]
    pub n_nodes: usize,
    #[serde(default = "default_timepoints")]
    pub n_timepoints: usize,
    #[serde(default = "default_mean")]
    pub mean: ScalarOrVec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov_diag: Option<ScalarOrVec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov_lowrank: Option<LowRankSpec>,
    #[serde(default = "default_delta_w")]
    pub delta_w: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrVec {
    Scalar(f64),
    Vec(Vec<f64>),
}

impl ScalarOrVec {
    fn expand(&self, n: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            ScalarOrVec::Scalar(v) => Ok(vec![*v; n]),
            ScalarOrVec::Vec(v) if v.len() == n => Ok(v.clone()),
            ScalarOrVec::Vec(v) => Err(Error::Parameter(format!(
                "{what} has {} entries, expected {n}",
                v.len()
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LowRankSpec {
    #[serde(default = "default_rank")]
    pub rank: usize,
    #[serde(default = "default_factor_scale")]
    pub factor_scale: f64,
    #[serde(default = "default_resid_var")]
    pub resid_var: f64,
}

fn default_subjects() -> usize {
    100
}
fn default_nodes() -> usize {
    35
}
fn default_timepoints() -> usize {
    3
}
fn default_mean() -> ScalarOrVec {
    ScalarOrVec::Scalar(0.5)
}
fn default_delta_w() -> f64 {
    0.05
}
fn default_rank() -> usize {
    3
}
fn default_factor_scale() -> f64 {
    0.017
}
fn default_resid_var() -> f64 {
    1e-4
}

impl Default for SimulatorProfile {
    fn default() -> Self {
        SimulatorProfile {
            n_subjects: default_subjects(),
            n_nodes: default_nodes(),
            n_timepoints: default_timepoints(),
            mean: default_mean(),
            cov_diag: None,
            cov_file: None,
            cov_lowrank: None,
            delta_w: default_delta_w(),
            seed: 0,
        }
    }
}

impl SimulatorProfile {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Ingestion(format!("cannot read profile: {e}")))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Ingestion(format!("bad simulator profile JSON: {e}")))
    }

    /// Resolve into concrete sampling parameters.
    pub fn to_params(&self) -> Result<SimulatorParams> {
        let n_e = edge_count(self.n_nodes);
        let set = [
            self.cov_diag.is_some(),
            self.cov_file.is_some(),
            self.cov_lowrank.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count();
        if set > 1 {
            return Err(Error::Parameter(
                "set at most one of cov_diag, cov_file, cov_lowrank".to_string(),
            ));
        }
        let covariance = if let Some(d) = &self.cov_diag {
            Covariance::Diagonal(d.expand(n_e, "cov_diag")?)
        } else if let Some(path) = &self.cov_file {
            let m = crate::data::connectome::read_square_csv(Path::new(path))?;
            Covariance::Full(m)
        } else if let Some(spec) = &self.cov_lowrank {
            let base = SimulatorParams::structured(
                self.n_subjects,
                self.n_nodes,
                self.n_timepoints,
                0.0,
                self.delta_w,
                self.seed,
            );
            match base.covariance {
                Covariance::LowRankPlusDiag { loadings, .. } => {
                    let mut l = Matrix::zeros(n_e, spec.rank);
                    for e in 0..n_e {
                        for k in 0..spec.rank {
                            let src = loadings[(e, k % loadings.cols())];
                            l[(e, k)] = src * spec.factor_scale / default_factor_scale();
                        }
                    }
                    Covariance::LowRankPlusDiag {
                        loadings: l,
                        diag: vec![spec.resid_var; n_e],
                    }
                }
                _ => unreachable!(),
            }
        } else {
            // Structured default.
            match SimulatorParams::structured(0, self.n_nodes, 2, 0.0, 0.0, 0).covariance {
                cov @ Covariance::LowRankPlusDiag { .. } => cov,
                _ => unreachable!(),
            }
        };
        let params = SimulatorParams {
            n_subjects: self.n_subjects,
            n_nodes: self.n_nodes,
            n_timepoints: self.n_timepoints,
            mean: self.mean.expand(n_e, "mean")?,
            covariance,
            delta_w: self.delta_w,
            seed: self.seed,
        };
        params.validate()?;
        Ok(params)
    }
}
