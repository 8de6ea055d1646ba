//! Dataset ingestion and synthesis: the TU graph-classification format,
//! connectome matrix sequences, constructed node features, and the
//! longitudinal simulator.

mod connectome;
mod describe;
mod features;
mod simulate;
mod tu;

pub use connectome::{load_connectome_dataset, write_connectome_csv};
pub use describe::{describe_dataset, export_connectivity_histograms, DatasetDescription};
pub use features::make_node_features;
pub use simulate::{simulate_longitudinal, Covariance, SimulatorParams, SimulatorProfile};
pub use tu::{load_tu_dataset, write_tu_dataset};

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DatasetKind {
    Classification { n_classes: usize },
    Longitudinal { n_timepoints: usize },
}

/// A loaded or generated dataset.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub kind: DatasetKind,
}

impl Dataset {
    pub fn classification(name: impl Into<String>, graphs: Vec<Graph>, n_classes: usize) -> Result<Self> {
        for (i, g) in graphs.iter().enumerate() {
            match g.label {
                Some(l) if l < n_classes => {}
                other => {
                    return Err(Error::Ingestion(format!(
                        "graph {i} has label {other:?}, expected a class in 0..{n_classes}"
                    )))
                }
            }
        }
        Ok(Dataset {
            name: name.into(),
            graphs,
            kind: DatasetKind::Classification { n_classes },
        })
    }

    pub fn longitudinal(name: impl Into<String>, graphs: Vec<Graph>, n_timepoints: usize) -> Result<Self> {
        let mut counts = std::collections::BTreeMap::<usize, usize>::new();
        for (i, g) in graphs.iter().enumerate() {
            let s = g.subject.ok_or_else(|| {
                Error::Ingestion(format!("longitudinal graph {i} is missing a subject id"))
            })?;
            g.timepoint.ok_or_else(|| {
                Error::Ingestion(format!("longitudinal graph {i} is missing a timepoint"))
            })?;
            *counts.entry(s).or_default() += 1;
        }
        for (s, c) in counts {
            if c != n_timepoints {
                return Err(Error::Ingestion(format!(
                    "subject {s} has {c} timepoints, expected {n_timepoints}"
                )));
            }
        }
        Ok(Dataset {
            name: name.into(),
            graphs,
            kind: DatasetKind::Longitudinal { n_timepoints },
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn n_classes(&self) -> Option<usize> {
        match self.kind {
            DatasetKind::Classification { n_classes } => Some(n_classes),
            _ => None,
        }
    }

    pub fn n_timepoints(&self) -> Option<usize> {
        match self.kind {
            DatasetKind::Longitudinal { n_timepoints } => Some(n_timepoints),
            _ => None,
        }
    }

    /// Distinct subject ids, sorted (longitudinal datasets).
    pub fn subjects(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.graphs.iter().filter_map(|g| g.subject).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Graph indices of one subject, sorted by timepoint.
    pub fn subject_graph_indices(&self, subject: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.graphs.len())
            .filter(|&i| self.graphs[i].subject == Some(subject))
            .collect();
        idx.sort_by_key(|&i| self.graphs[i].timepoint);
        idx
    }

    /// All consecutive (t -> t+1) graph-index pairs, grouped by subject.
    pub fn transition_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for s in self.subjects() {
            let idx = self.subject_graph_indices(s);
            for w in idx.windows(2) {
                pairs.push((w[0], w[1]));
            }
        }
        pairs
    }

    /// View of a longitudinal dataset as a timepoint-classification task.
    pub fn as_timepoint_classification(&self) -> Result<Dataset> {
        let n_timepoints = self
            .n_timepoints()
            .ok_or_else(|| Error::Config("not a longitudinal dataset".to_string()))?;
        let graphs = self
            .graphs
            .iter()
            .map(|g| {
                let mut g = g.clone();
                g.label = g.timepoint;
                g
            })
            .collect();
        Dataset::classification(format!("{}-timepoints", self.name), graphs, n_timepoints)
    }
}
