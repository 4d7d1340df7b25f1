//! Serialized outputs: the cluster report (JSON), its static HTML tree, the
//! tuning table (CSV), and per-document vector dumps (JSON-Lines).
//!
//! Every float is written with 17 significant digits.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::corpus::Corpus;
use crate::eval::EntropyReport;
use crate::hierarchy::{ClusterConfig, ClusterNode, Hierarchy, PhaseSpec};
use crate::vsm::{FeatureSpace, SpaceModel};

/// `d.dddddddddddddddde±x`: 17 significant digits.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

pub(crate) mod float17 {
    use super::*;

    fn raw(x: f64) -> Box<RawValue> {
        RawValue::from_string(format_f64(x)).expect("formatted float is valid JSON")
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        raw(*x).serialize(s)
    }

    pub fn serialize_vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(xs.iter().map(|&x| raw(x)))
    }

    pub fn serialize_map<S: Serializer>(entries: &[(String, f64)], s: S) -> Result<S::Ok, S::Error> {
        s.collect_map(entries.iter().map(|(k, v)| (k, raw(*v))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub k: usize,
    #[serde(serialize_with = "float17::serialize")]
    pub alpha: f64,
    #[serde(serialize_with = "float17::serialize")]
    pub cluster_entropy: f64,
    #[serde(serialize_with = "float17::serialize")]
    pub class_entropy: f64,
    #[serde(serialize_with = "float17::serialize")]
    pub overall_entropy: f64,
}

impl From<&EntropyReport> for EntropyRow {
    fn from(r: &EntropyReport) -> Self {
        EntropyRow {
            k: r.k,
            alpha: r.alpha,
            cluster_entropy: r.cluster_entropy,
            class_entropy: r.class_entropy,
            overall_entropy: r.overall,
        }
    }
}

/// Options echoed into the report. Output paths and thread counts are left
/// out so that they cannot change the report bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub kb: String,
    pub corpus: String,
    pub phases: Vec<PhaseSpec>,
    pub seed: u64,
    pub restarts: usize,
    pub max_iterations: usize,
    pub min_split_size: usize,
    #[serde(serialize_with = "float17::serialize")]
    pub alpha: f64,
    #[serde(serialize_with = "float17::serialize")]
    pub tc_fraction: f64,
    pub rescope_idf: bool,
    pub full_sweep: bool,
}

impl ConfigEcho {
    pub fn new(kb: &str, corpus: &str, phases: &[PhaseSpec], cfg: &ClusterConfig) -> Self {
        ConfigEcho {
            kb: kb.to_string(),
            corpus: corpus.to_string(),
            phases: phases.to_vec(),
            seed: cfg.seed,
            restarts: cfg.restarts,
            max_iterations: cfg.max_iterations,
            min_split_size: cfg.min_split_size,
            alpha: cfg.alpha,
            tc_fraction: cfg.tc_fraction,
            rescope_idf: cfg.rescope_idf,
            full_sweep: cfg.full_sweep,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub k: usize,
    /// Sum of distances to centroids per Lloyd iteration.
    #[serde(serialize_with = "float17::serialize_vec")]
    pub objective_trace: Vec<f64>,
    /// Within-cluster sum of squares per Lloyd iteration.
    #[serde(serialize_with = "float17::serialize_vec")]
    pub wcss_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuning: Option<Vec<EntropyRow>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub cluster_id: String,
    pub phase_space: Option<FeatureSpace>,
    pub size: usize,
    pub label: Vec<String>,
    pub doc_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitReport>,
    pub children: Vec<NodeReport>,
}

impl NodeReport {
    fn from_node(node: &ClusterNode, corpus: &Corpus) -> Self {
        NodeReport {
            cluster_id: node.cluster_id.clone(),
            phase_space: node.phase_space,
            size: node.docs.len(),
            label: node.label.iter().map(|t| t.key.clone()).collect(),
            doc_ids: node
                .docs
                .iter()
                .map(|&d| corpus.documents[d].doc_id.clone())
                .collect(),
            split: node.split.as_ref().map(|s| SplitReport {
                k: s.k,
                objective_trace: s.assignment.objective_trace.clone(),
                wcss_trace: s.assignment.wcss_trace.clone(),
                tuning: s
                    .tuning
                    .as_ref()
                    .map(|t| t.iter().map(EntropyRow::from).collect()),
            }),
            children: node
                .children
                .iter()
                .map(|c| NodeReport::from_node(c, corpus))
                .collect(),
        }
    }

    /// Nodes at `depth` below this one, shallower leaves included.
    pub fn frontier(&self, depth: usize) -> Vec<&NodeReport> {
        if depth == 0 || self.children.is_empty() {
            return vec![self];
        }
        self.children.iter().flat_map(|c| c.frontier(depth - 1)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub depth: usize,
    pub space: FeatureSpace,
    pub clusters: usize,
    pub entropy: EntropyRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub config: ConfigEcho,
    pub documents: usize,
    pub phases: Vec<PhaseReport>,
    pub tree: NodeReport,
}

impl ClusterReport {
    pub fn new(config: ConfigEcho, hierarchy: &Hierarchy, corpus: &Corpus) -> Self {
        ClusterReport {
            config,
            documents: corpus.len(),
            phases: hierarchy
                .phases
                .iter()
                .map(|p| PhaseReport {
                    depth: p.depth,
                    space: p.space,
                    clusters: p.clusters,
                    entropy: EntropyRow::from(&p.entropy),
                })
                .collect(),
            tree: NodeReport::from_node(&hierarchy.root, corpus),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization is infallible");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// `Label1,Label2 (Size=n)`
pub fn node_caption(node: &NodeReport) -> String {
    let label = if node.cluster_id == "root" {
        "All documents".to_string()
    } else if node.label.is_empty() {
        crate::eval::UNLABELED.to_string()
    } else {
        node.label.join(",")
    };
    format!("{label} (Size={})", node.size)
}

fn render_node(node: &NodeReport, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth + 1);
    let space = node
        .phase_space
        .map(|s| format!(" data-space=\"{s}\""))
        .unwrap_or_default();
    let _ = write!(
        out,
        "{pad}<li id=\"c-{}\"{space}><span class=\"label\">{}</span>",
        escape_html(&node.cluster_id),
        escape_html(&node_caption(node))
    );
    if node.children.is_empty() {
        let _ = writeln!(
            out,
            " <span class=\"docs\">{}</span></li>",
            escape_html(&node.doc_ids.join(" "))
        );
        return;
    }
    out.push('\n');
    let _ = writeln!(out, "{pad}  <ul>");
    for c in &node.children {
        render_node(c, depth + 2, out);
    }
    let _ = writeln!(out, "{pad}  </ul>");
    let _ = writeln!(out, "{pad}</li>");
}

/// Static nested-list rendering of a report; depends on nothing but `report`.
pub fn render_html(report: &ClusterReport) -> String {
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Cluster tree</title>\n");
    out.push_str(
        "<style>body{font-family:sans-serif}ul{list-style:none}.docs{color:#888;font-size:80%}</style>\n",
    );
    out.push_str("</head>\n<body>\n");
    let phases: Vec<String> = report
        .config
        .phases
        .iter()
        .map(|p| format!("{}(k={})", p.space, p.k))
        .collect();
    let _ = writeln!(
        out,
        "<h1>Cluster tree</h1>\n<p>{} documents; phases: {}</p>",
        report.documents,
        escape_html(&phases.join(" &rarr; ")).replace("&amp;rarr;", "&rarr;")
    );
    out.push_str(
        "<table>\n<tr><th>depth</th><th>space</th><th>clusters</th><th>Ec</th><th>El</th><th>E</th></tr>\n",
    );
    for p in &report.phases {
        let _ = writeln!(
            out,
            "<tr><td>{}</td><td>{}</td><td>{}</td><td>{:.4}</td><td>{:.4}</td><td>{:.4}</td></tr>",
            p.depth,
            p.space,
            p.clusters,
            p.entropy.cluster_entropy,
            p.entropy.class_entropy,
            p.entropy.overall_entropy
        );
    }
    out.push_str("</table>\n<ul>\n");
    render_node(&report.tree, 0, &mut out);
    out.push_str("</ul>\n</body>\n</html>\n");
    out
}

/// `k,cluster_entropy,class_entropy,overall_entropy`
pub fn tuning_csv(table: &[EntropyReport]) -> String {
    let mut out = String::from("k,cluster_entropy,class_entropy,overall_entropy\n");
    for r in table {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.k,
            format_f64(r.cluster_entropy),
            format_f64(r.class_entropy),
            format_f64(r.overall)
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneSummary {
    pub space: FeatureSpace,
    pub documents: usize,
    #[serde(serialize_with = "float17::serialize")]
    pub alpha: f64,
    #[serde(serialize_with = "float17::serialize")]
    pub tc_fraction: f64,
    pub seed: u64,
    pub restarts: usize,
    pub k_range: Vec<usize>,
    pub best_k: usize,
    pub best: EntropyRow,
}

#[derive(Serialize)]
struct VectorLine<'a> {
    doc_id: &'a str,
    space: FeatureSpace,
    #[serde(serialize_with = "float17::serialize_map")]
    weights: Vec<(String, f64)>,
}

/// One JSON object per document: `{"doc_id", "space", "weights": {term: w}}`.
pub fn vectors_jsonl(corpus: &Corpus, model: &SpaceModel) -> String {
    let mut out = String::new();
    for (doc, v) in corpus.documents.iter().zip(&model.vectors) {
        let line = VectorLine {
            doc_id: &doc.doc_id,
            space: model.index.space(),
            weights: v
                .entries()
                .iter()
                .map(|&(d, w)| (model.index.term(d).key.clone(), w))
                .collect(),
        };
        out.push_str(&serde_json::to_string(&line).expect("vector serialization is infallible"));
        out.push('\n');
    }
    out
}
