//! Per-dataset summary statistics (general + topological averages) and
//! connectivity-histogram export.

use std::path::Path;

use serde::Serialize;

use crate::data::{Dataset, DatasetKind};
use crate::error::{Error, Result};
use crate::graph::topology_stats;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    MeanStd {
        mean,
        std: var.sqrt(),
    }
}

/// Appendix-style dataset description: counts plus topology averages.
#[derive(Clone, Debug, Serialize)]
pub struct DatasetDescription {
    pub name: String,
    pub kind: DatasetKind,
    pub n_graphs: usize,
    pub n_subjects: Option<usize>,
    pub feature_dim: usize,
    pub nodes: MeanStd,
    /// Nonzero off-diagonal entries (TU files list both directions).
    pub edges_directed_pairs: MeanStd,
    /// Unordered edge count.
    pub edges_undirected: MeanStd,
    pub avg_degree: MeanStd,
    pub avg_clustering: MeanStd,
    pub avg_path_length: MeanStd,
    pub diameter: MeanStd,
    pub density: MeanStd,
}

/// Compute averages +- std of the per-graph statistics.
pub fn describe_dataset(d: &Dataset) -> Result<DatasetDescription> {
    if d.is_empty() {
        return Err(Error::Domain("empty dataset".to_string()));
    }
    let mut nodes = Vec::new();
    let mut directed = Vec::new();
    let mut undirected = Vec::new();
    let mut degree = Vec::new();
    let mut clustering = Vec::new();
    let mut path_length = Vec::new();
    let mut diameter = Vec::new();
    let mut density = Vec::new();
    for g in &d.graphs {
        let n = g.node_count();
        nodes.push(n as f64);
        let mut nonzero = 0usize;
        for i in 0..n {
            for j in 0..n {
                if i != j && g.adjacency[(i, j)] != 0.0 {
                    nonzero += 1;
                }
            }
        }
        directed.push(nonzero as f64);
        undirected.push(nonzero as f64 / 2.0);
        let stats = topology_stats(g)?;
        degree.push(stats.avg_degree);
        clustering.push(stats.avg_clustering);
        path_length.push(stats.avg_path_length);
        diameter.push(stats.diameter);
        density.push(stats.density);
    }
    Ok(DatasetDescription {
        name: d.name.clone(),
        kind: d.kind,
        n_graphs: d.len(),
        n_subjects: match d.kind {
            DatasetKind::Longitudinal { .. } => Some(d.subjects().len()),
            _ => None,
        },
        feature_dim: d.graphs[0].feature_dim(),
        nodes: mean_std(&nodes),
        edges_directed_pairs: mean_std(&directed),
        edges_undirected: mean_std(&undirected),
        avg_degree: mean_std(&degree),
        avg_clustering: mean_std(&clustering),
        avg_path_length: mean_std(&path_length),
        diameter: mean_std(&diameter),
        density: mean_std(&density),
    })
}

impl std::fmt::Display for DatasetDescription {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Dataset: {}", self.name)?;
        match self.kind {
            DatasetKind::Classification { n_classes } => {
                writeln!(f, "  kind: classification ({n_classes} classes)")?
            }
            DatasetKind::Longitudinal { n_timepoints } => {
                writeln!(f, "  kind: longitudinal ({n_timepoints} timepoints)")?
            }
        }
        writeln!(f, "  #graphs: {}", self.n_graphs)?;
        if let Some(s) = self.n_subjects {
            writeln!(f, "  #subjects: {s}")?;
        }
        writeln!(f, "  #node features: {}", self.feature_dim)?;
        let row = |label: &str, v: &MeanStd| format!("  {label}: {:.2} +- {:.2}", v.mean, v.std);
        writeln!(f, "{}", row("avg #nodes", &self.nodes))?;
        writeln!(f, "{}", row("avg #edges (directed pairs)", &self.edges_directed_pairs))?;
        writeln!(f, "{}", row("avg #edges (undirected)", &self.edges_undirected))?;
        writeln!(f, "{}", row("avg degree", &self.avg_degree))?;
        writeln!(f, "{}", row("avg clustering coefficient", &self.avg_clustering))?;
        writeln!(f, "{}", row("avg path length", &self.avg_path_length))?;
        writeln!(f, "{}", row("avg diameter", &self.diameter))?;
        write!(f, "{}", row("avg density", &self.density))
    }
}

/// Write one CSV histogram (bin_lo,bin_hi,count) of off-diagonal
/// connectivity per timepoint: `histogram_t{t}.csv` under `out_dir`.
pub fn export_connectivity_histograms(d: &Dataset, out_dir: impl AsRef<Path>, bins: usize) -> Result<()> {
    let n_timepoints = d
        .n_timepoints()
        .ok_or_else(|| Error::Config("histograms need a longitudinal dataset".to_string()))?;
    if bins == 0 {
        return Err(Error::Parameter("bins must be >= 1".to_string()));
    }
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    // Global range across all timepoints so the bins line up.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for g in &d.graphs {
        let n = g.node_count();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    lo = lo.min(g.adjacency[(i, j)]);
                    hi = hi.max(g.adjacency[(i, j)]);
                }
            }
        }
    }
    if !(lo.is_finite() && hi.is_finite()) || lo == hi {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    for t in 0..n_timepoints {
        let mut counts = vec![0u64; bins];
        for g in d.graphs.iter().filter(|g| g.timepoint == Some(t)) {
            let n = g.node_count();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let v = g.adjacency[(i, j)];
                        let b = (((v - lo) / width) as usize).min(bins - 1);
                        counts[b] += 1;
                    }
                }
            }
        }
        let mut body = String::from("bin_lo,bin_hi,count\n");
        for (b, c) in counts.iter().enumerate() {
            body.push_str(&format!(
                "{},{},{}\n",
                lo + b as f64 * width,
                lo + (b + 1) as f64 * width,
                c
            ));
        }
        std::fs::write(out_dir.join(format!("histogram_t{t}.csv")), body)?;
    }
    Ok(())
}
