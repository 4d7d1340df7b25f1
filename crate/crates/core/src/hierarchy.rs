//! Top-down multi-phase clustering. Each phase clusters every current leaf
//! on one feature space; later phases refine the clusters of earlier ones.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::eval::{self, cluster_label, doc_label, DocLabel, EntropyReport, TuneOptions};
use crate::kb::KnowledgeBase;
use crate::kmeans::{kmeans_best_of, Assignment};
use crate::vsm::{FeatureSpace, SpaceModel, SparseVector, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KChoice {
    Auto,
    #[serde(untagged)]
    Fixed(usize),
}

impl FromStr for KChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "auto" {
            return Ok(KChoice::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k > 0 => Ok(KChoice::Fixed(k)),
            _ => Err(Error::invalid(format!(
                "k must be a positive integer or 'auto', got '{s}'"
            ))),
        }
    }
}

impl fmt::Display for KChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KChoice::Auto => f.write_str("auto"),
            KChoice::Fixed(k) => write!(f, "{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub space: FeatureSpace,
    pub k: KChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub seed: u64,
    pub max_iterations: usize,
    pub restarts: usize,
    pub min_split_size: usize,
    pub alpha: f64,
    pub tc_fraction: f64,
    /// Recompute document frequencies inside each cluster before splitting it.
    pub rescope_idf: bool,
    /// Sweep k over `1..=n` instead of the default range when tuning.
    pub full_sweep: bool,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            seed: 42,
            max_iterations: 100,
            restarts: 4,
            min_split_size: 2,
            alpha: eval::DEFAULT_ALPHA,
            tc_fraction: eval::DEFAULT_TC_FRACTION,
            rescope_idf: false,
            full_sweep: false,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha = {} outside [0, 1]", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.tc_fraction) {
            return Err(Error::invalid(format!(
                "tc = {} outside [0, 1]",
                self.tc_fraction
            )));
        }
        if self.max_iterations == 0 || self.restarts == 0 || self.min_split_size == 0 {
            return Err(Error::invalid(
                "max_iterations, restarts and min_split_size must be positive",
            ));
        }
        Ok(())
    }

    fn tune_options(&self) -> TuneOptions {
        TuneOptions {
            alpha: self.alpha,
            restarts: self.restarts,
            seed: self.seed,
            max_iterations: self.max_iterations,
        }
    }
}

/// How a node was split into its children.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub k: usize,
    pub assignment: Assignment,
    /// Present when k was tuned.
    pub tuning: Option<Vec<EntropyReport>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterNode {
    pub cluster_id: String,
    /// Space of the phase that produced this node; `None` for the root.
    pub phase_space: Option<FeatureSpace>,
    /// Corpus indices, ascending.
    pub docs: Vec<usize>,
    pub label: BTreeSet<Term>,
    pub split: Option<Split>,
    pub children: Vec<ClusterNode>,
}

impl ClusterNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn leaves(&self) -> Vec<&ClusterNode> {
        if self.is_leaf() {
            return vec![self];
        }
        self.children.iter().flat_map(|c| c.leaves()).collect()
    }

    /// Nodes at `depth`, with shallower leaves standing in for their missing
    /// descendants.
    pub fn frontier(&self, depth: usize) -> Vec<&ClusterNode> {
        if depth == 0 || self.is_leaf() {
            return vec![self];
        }
        self.children.iter().flat_map(|c| c.frontier(depth - 1)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOutcome {
    pub depth: usize,
    pub space: FeatureSpace,
    /// Number of clusters at this depth (including passed-through leaves).
    pub clusters: usize,
    pub entropy: EntropyReport,
    /// Label of every document in this phase's space.
    pub labels: Vec<DocLabel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    pub root: ClusterNode,
    pub phases: Vec<PhaseOutcome>,
}

struct LeafModel {
    vectors: Vec<SparseVector>,
    labels: Vec<DocLabel>,
}

fn leaf_model(
    docs: &[usize],
    corpus: &Corpus,
    space: FeatureSpace,
    kb: &KnowledgeBase,
    global: Option<&SpaceModel>,
    tc: f64,
) -> Result<LeafModel> {
    let local;
    let (model, vectors): (&SpaceModel, Vec<SparseVector>) = match global {
        Some(g) => (g, docs.iter().map(|&i| g.vectors[i].clone()).collect()),
        None => {
            let members: Vec<&Document> = docs.iter().map(|&i| &corpus.documents[i]).collect();
            local = SpaceModel::build(&members, space, kb)?;
            let v = local.vectors.clone();
            (&local, v)
        }
    };
    let labels = vectors
        .iter()
        .map(|v| doc_label(v, &model.index, tc))
        .collect::<Result<Vec<_>>>()?;
    Ok(LeafModel { vectors, labels })
}

fn split_leaf(model: &LeafModel, k: KChoice, cfg: &ClusterConfig) -> Result<Split> {
    let n = model.vectors.len();
    match k {
        KChoice::Fixed(k) => {
            let k = k.min(n);
            let assignment = kmeans_best_of(&model.vectors, k, cfg.seed, cfg.restarts, cfg.max_iterations)?;
            Ok(Split {
                k,
                assignment,
                tuning: None,
            })
        }
        KChoice::Auto => {
            let range = if cfg.full_sweep {
                (1..=n).collect()
            } else {
                eval::default_k_range(n)
            };
            let tuned = eval::tune_k(&model.vectors, &model.labels, &range, &cfg.tune_options())?;
            Ok(Split {
                k: tuned.best_k,
                assignment: tuned.best,
                tuning: Some(tuned.table),
            })
        }
    }
}

fn leaves_mut(node: &mut ClusterNode) -> Vec<&mut ClusterNode> {
    if node.children.is_empty() {
        return vec![node];
    }
    node.children.iter_mut().flat_map(leaves_mut).collect()
}

/// Clusters `corpus` phase by phase. Leaves with fewer than `min_split_size`
/// documents are carried into later phases unsplit; this includes the root.
pub fn hierarchical_cluster(
    corpus: &Corpus,
    phases: &[PhaseSpec],
    cfg: &ClusterConfig,
    kb: &KnowledgeBase,
) -> Result<Hierarchy> {
    cfg.validate()?;
    if phases.is_empty() {
        return Err(Error::invalid("at least one phase is required"));
    }
    if corpus.is_empty() {
        return Err(Error::invalid("cannot cluster an empty corpus"));
    }
    let n = corpus.len();
    let mut root = ClusterNode {
        cluster_id: "root".to_string(),
        phase_space: None,
        docs: (0..n).collect(),
        label: BTreeSet::new(),
        split: None,
        children: Vec::new(),
    };
    let mut outcomes = Vec::with_capacity(phases.len());

    for (p, phase) in phases.iter().enumerate() {
        let global = if cfg.rescope_idf {
            None
        } else {
            let all: Vec<&Document> = corpus.documents.iter().collect();
            Some(SpaceModel::build(&all, phase.space, kb)?)
        };
        let mut labels = vec![DocLabel::Unlabeled; n];
        let mut cluster_of = vec![0usize; n];
        let mut next_cluster = 0usize;

        for leaf in leaves_mut(&mut root) {
            let model = leaf_model(
                &leaf.docs,
                corpus,
                phase.space,
                kb,
                global.as_ref(),
                cfg.tc_fraction,
            )?;
            for (&d, l) in leaf.docs.iter().zip(&model.labels) {
                labels[d] = l.clone();
            }
            if leaf.docs.len() < cfg.min_split_size {
                for &d in &leaf.docs {
                    cluster_of[d] = next_cluster;
                }
                next_cluster += 1;
                continue;
            }
            let split = split_leaf(&model, phase.k, cfg)?;
            let prefix = if leaf.phase_space.is_none() {
                String::new()
            } else {
                format!("{}.", leaf.cluster_id)
            };
            for members in split.assignment.members().into_iter().filter(|m| !m.is_empty()) {
                let docs: Vec<usize> = members.iter().map(|&m| leaf.docs[m]).collect();
                for &d in &docs {
                    cluster_of[d] = next_cluster;
                }
                next_cluster += 1;
                let child_id = format!("{prefix}{}", leaf.children.len());
                leaf.children.push(ClusterNode {
                    cluster_id: child_id,
                    phase_space: Some(phase.space),
                    label: cluster_label(members.iter().map(|&m| &model.labels[m])),
                    docs,
                    split: None,
                    children: Vec::new(),
                });
            }
            leaf.split = Some(split);
        }

        let entropy = eval::entropies(&cluster_of, next_cluster, &labels, cfg.alpha)?;
        outcomes.push(PhaseOutcome {
            depth: p + 1,
            space: phase.space,
            clusters: next_cluster,
            entropy,
            labels,
        });
    }

    Ok(Hierarchy {
        root,
        phases: outcomes,
    })
}
