//! Document labeling by confidence threshold, cluster/class entropy, and the
//! sweep over k that picks the clustering with minimal overall entropy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans::{kmeans_best_of, Assignment};
use crate::vsm::{SparseVector, Term, TermIndex};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_TC_FRACTION: f64 = 0.4;
/// Upper end of the default k sweep.
pub const DEFAULT_MAX_AUTO_K: usize = 50;

/// Reserved label of documents whose vector is zero in the labeled space.
pub const UNLABELED: &str = "⊥";

/// The most significant feature values of one document.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DocLabel {
    Unlabeled,
    Terms(BTreeSet<Term>),
}

impl DocLabel {
    pub fn terms(&self) -> Option<&BTreeSet<Term>> {
        match self {
            DocLabel::Unlabeled => None,
            DocLabel::Terms(t) => Some(t),
        }
    }
}

impl fmt::Display for DocLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DocLabel::Unlabeled => f.write_str(UNLABELED),
            DocLabel::Terms(ts) => {
                let keys: Vec<&str> = ts.iter().map(|t| t.key.as_str()).collect();
                f.write_str(&keys.join(","))
            }
        }
    }
}

fn check_fraction(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {x} outside [0, 1]")))
    }
}

/// Terms whose weight reaches `tc_fraction` of the document's total weight.
/// When none does, the single heaviest term (lowest dimension on ties).
pub fn doc_label(v: &SparseVector, index: &TermIndex, tc_fraction: f64) -> Result<DocLabel> {
    check_fraction("tc_fraction", tc_fraction)?;
    if v.is_zero() {
        return Ok(DocLabel::Unlabeled);
    }
    let threshold = tc_fraction * v.total();
    let mut terms: BTreeSet<Term> = v
        .entries()
        .iter()
        .filter(|&&(_, w)| w >= threshold)
        .map(|&(d, _)| index.term(d).clone())
        .collect();
    if terms.is_empty() {
        let mut best = v.entries()[0];
        for &(d, w) in &v.entries()[1..] {
            if w > best.1 {
                best = (d, w);
            }
        }
        terms.insert(index.term(best.0).clone());
    }
    Ok(DocLabel::Terms(terms))
}

/// Union of the member documents' labels.
pub fn cluster_label<'a>(labels: impl IntoIterator<Item = &'a DocLabel>) -> BTreeSet<Term> {
    labels
        .into_iter()
        .filter_map(DocLabel::terms)
        .flat_map(|t| t.iter().cloned())
        .collect()
}

/// Contingency counts of clusters against label classes.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyTable {
    /// `n_ij`, rows = clusters, columns = classes, both in ascending order.
    pub counts: Vec<Vec<usize>>,
    pub cluster_totals: Vec<usize>,
    pub class_totals: Vec<usize>,
    pub total: usize,
}

impl EntropyTable {
    pub fn build<L: Ord>(cluster_of: &[usize], labels: &[L]) -> Result<Self> {
        if cluster_of.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} cluster assignments for {} labels",
                cluster_of.len(),
                labels.len()
            )));
        }
        let clusters: BTreeMap<usize, usize> = cluster_of
            .iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(i, &c)| (c, i))
            .collect();
        let classes: BTreeMap<&L, usize> = labels
            .iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(j, l)| (l, j))
            .collect();
        let mut counts = vec![vec![0usize; classes.len()]; clusters.len()];
        for (c, l) in cluster_of.iter().zip(labels) {
            counts[clusters[c]][classes[l]] += 1;
        }
        let cluster_totals = counts.iter().map(|row| row.iter().sum()).collect();
        let class_totals = (0..classes.len())
            .map(|j| counts.iter().map(|row| row[j]).sum())
            .collect();
        Ok(EntropyTable {
            counts,
            cluster_totals,
            class_totals,
            total: labels.len(),
        })
    }

    /// `-Σ_i (nc_i/N) Σ_j (n_ij/nc_i) log2(n_ij/nc_i)`
    pub fn cluster_entropy(&self) -> f64 {
        let n = self.total as f64;
        let mut e = 0.0;
        for (row, &nc) in self.counts.iter().zip(&self.cluster_totals) {
            let mut inner = 0.0;
            for &nij in row.iter().filter(|&&x| x > 0) {
                let p = nij as f64 / nc as f64;
                inner += p * p.log2();
            }
            e -= nc as f64 / n * inner;
        }
        e.max(0.0)
    }

    /// `-Σ_j (nl_j/N) Σ_i (n_ij/nl_j) log2(n_ij/nl_j)`
    pub fn class_entropy(&self) -> f64 {
        let n = self.total as f64;
        let mut e = 0.0;
        for (j, &nl) in self.class_totals.iter().enumerate() {
            let mut inner = 0.0;
            for nij in self.counts.iter().map(|row| row[j]).filter(|&x| x > 0) {
                let p = nij as f64 / nl as f64;
                inner += p * p.log2();
            }
            e -= nl as f64 / n * inner;
        }
        e.max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub k: usize,
    pub alpha: f64,
    pub cluster_entropy: f64,
    pub class_entropy: f64,
    pub overall: f64,
}

pub fn overall_entropy(cluster_entropy: f64, class_entropy: f64, alpha: f64) -> f64 {
    alpha * cluster_entropy + (1.0 - alpha) * class_entropy
}

/// Entropy report for a clustering given one label per document.
/// `k` is echoed into the report as-is.
pub fn entropies<L: Ord>(cluster_of: &[usize], k: usize, labels: &[L], alpha: f64) -> Result<EntropyReport> {
    check_fraction("alpha", alpha)?;
    let table = EntropyTable::build(cluster_of, labels)?;
    let ec = table.cluster_entropy();
    let el = table.class_entropy();
    Ok(EntropyReport {
        k,
        alpha,
        cluster_entropy: ec,
        class_entropy: el,
        overall: overall_entropy(ec, el, alpha),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneOptions {
    pub alpha: f64,
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions {
            alpha: DEFAULT_ALPHA,
            restarts: 4,
            seed: 42,
            max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub best_k: usize,
    /// One row per swept k, in the order given.
    pub table: Vec<EntropyReport>,
    pub best: Assignment,
}

/// `2..=min(n, DEFAULT_MAX_AUTO_K)`, or `[1]` for a single document.
pub fn default_k_range(n: usize) -> Vec<usize> {
    if n < 2 {
        vec![1]
    } else {
        (2..=n.min(DEFAULT_MAX_AUTO_K)).collect()
    }
}

/// Clusters for every k in `k_range` and keeps the k with minimal overall
/// entropy; ties go to the smaller k.
pub fn tune_k(
    vectors: &[SparseVector],
    labels: &[DocLabel],
    k_range: &[usize],
    opts: &TuneOptions,
) -> Result<TuneResult> {
    check_fraction("alpha", opts.alpha)?;
    if k_range.is_empty() {
        return Err(Error::invalid("empty k range"));
    }
    if let Some(k) = k_range.iter().find(|&&k| k == 0 || k > vectors.len()) {
        return Err(Error::invalid(format!("k = {k} outside [1, {}]", vectors.len())));
    }
    if labels.len() != vectors.len() {
        return Err(Error::invalid("one label per vector required"));
    }
    let runs = k_range
        .par_iter()
        .map(|&k| {
            let a = kmeans_best_of(vectors, k, opts.seed, opts.restarts, opts.max_iterations)?;
            let report = entropies(&a.cluster_of, k, labels, opts.alpha)?;
            Ok((report, a))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best_i = 0;
    for (i, (r, _)) in runs.iter().enumerate() {
        let b = &runs[best_i].0;
        if r.overall < b.overall || (r.overall == b.overall && r.k < b.k) {
            best_i = i;
        }
    }
    let table = runs.iter().map(|(r, _)| *r).collect();
    let (report, best) = runs.into_iter().nth(best_i).expect("nonempty sweep");
    Ok(TuneResult {
        best_k: report.k,
        table,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vsm::FeatureSpace;
    use proptest::prelude::*;

    fn index(keys: &[&str]) -> TermIndex {
        let docs: Vec<crate::corpus::Document> = vec![crate::corpus::Document {
            doc_id: "x".into(),
            annotations: keys
                .iter()
                .map(|k| crate::corpus::Annotation::name_only(*k))
                .collect(),
            group_truth: None,
        }];
        let kb = crate::kb::KnowledgeBase::default();
        crate::vsm::build_index(&docs, FeatureSpace::Name, &kb).unwrap()
    }

    fn label_keys(l: &DocLabel) -> Vec<String> {
        l.terms().unwrap().iter().map(|t| t.key.clone()).collect()
    }

    #[test]
    fn threshold_examples() {
        let idx = index(&["t1", "t2", "t3"]);
        let v = SparseVector::new(FeatureSpace::Name, [(0, 0.5), (1, 0.3), (2, 0.2)]).unwrap();
        assert_eq!(label_keys(&doc_label(&v, &idx, 0.4).unwrap()), ["t1"]);
        assert_eq!(label_keys(&doc_label(&v, &idx, 0.0).unwrap()), ["t1", "t2", "t3"]);

        let idx = index(&["a", "b", "c", "d"]);
        let v = SparseVector::new(FeatureSpace::Name, [(0, 0.3), (1, 0.3), (2, 0.2), (3, 0.2)]).unwrap();
        assert_eq!(label_keys(&doc_label(&v, &idx, 0.4).unwrap()), ["a"]);

        assert_eq!(
            doc_label(&SparseVector::zero(FeatureSpace::Name), &idx, 0.4).unwrap(),
            DocLabel::Unlabeled
        );
        assert!(doc_label(&v, &idx, 1.5).is_err());
    }

    #[test]
    fn cluster_label_is_union() {
        let t = |k: &str| Term::name(k);
        let l1 = DocLabel::Terms([t("t1")].into());
        let l23 = DocLabel::Terms([t("t2"), t("t3")].into());
        assert_eq!(cluster_label([&l1]), [t("t1")].into());
        assert_eq!(cluster_label([&l1, &l1]), [t("t1")].into());
        assert_eq!(cluster_label([&l1, &l23]), [t("t1"), t("t2"), t("t3")].into());
        assert!(cluster_label([&DocLabel::Unlabeled]).is_empty());
    }

    #[test]
    fn entropy_examples() {
        let r = entropies(&[0, 0, 1, 1], 2, &["L1", "L1", "L2", "L2"], 0.5).unwrap();
        assert_eq!((r.cluster_entropy, r.class_entropy, r.overall), (0.0, 0.0, 0.0));
        let r = entropies(&[0, 1, 0, 1], 2, &["L1", "L1", "L2", "L2"], 0.5).unwrap();
        assert!((r.cluster_entropy - 1.0).abs() < 1e-15);
        assert!((r.class_entropy - 1.0).abs() < 1e-15);
        assert!((overall_entropy(0.32, 0.22, 0.5) - 0.27).abs() < 1e-15);
    }

    #[test]
    fn table_marginals() {
        let t = EntropyTable::build(&[3, 3, 7, 7, 7], &['a', 'b', 'a', 'a', 'c']).unwrap();
        assert_eq!(t.counts, [[1, 1, 0], [2, 0, 1]]);
        assert_eq!(t.cluster_totals, [2, 3]);
        assert_eq!(t.class_totals, [3, 1, 1]);
        assert_eq!(t.total, 5);
        assert!(EntropyTable::build(&[0], &['a', 'b']).is_err());
    }

    fn instance() -> impl Strategy<Value = (Vec<usize>, Vec<u8>, f64)> {
        (1usize..=12).prop_flat_map(|n| {
            (
                prop::collection::vec(0usize..4, n),
                prop::collection::vec(0u8..4, n),
                0.0f64..=1.0,
            )
        })
    }

    proptest! {
        #[test]
        fn entropy_bounds((clusters, labels, alpha) in instance()) {
            let r = entropies(&clusters, 4, &labels, alpha).unwrap();
            prop_assert!(r.cluster_entropy >= 0.0 && r.class_entropy >= 0.0);
            let lo = r.cluster_entropy.min(r.class_entropy);
            let hi = r.cluster_entropy.max(r.class_entropy);
            prop_assert!(lo - 1e-12 <= r.overall && r.overall <= hi + 1e-12);
            let pure = clusters.iter().zip(&labels).all(|(c, l)| {
                clusters.iter().zip(&labels).all(|(c2, l2)| c != c2 || l == l2)
            });
            prop_assert_eq!(r.cluster_entropy == 0.0, pure);
            let whole = clusters.iter().zip(&labels).all(|(c, l)| {
                clusters.iter().zip(&labels).all(|(c2, l2)| l != l2 || c == c2)
            });
            prop_assert_eq!(r.class_entropy == 0.0, whole);
        }

        #[test]
        fn labels_are_scale_invariant(
            w in prop::collection::vec(0.001f64..10.0, 1..8),
            lambda in 0.01f64..100.0,
            tc in 0.0f64..=1.0,
        ) {
            let keys: Vec<String> = (0..w.len()).map(|i| format!("k{i}")).collect();
            let idx = index(&keys.iter().map(String::as_str).collect::<Vec<_>>());
            let v = SparseVector::new(FeatureSpace::Name, w.into_iter().enumerate()).unwrap();
            prop_assert_eq!(
                doc_label(&v, &idx, tc).unwrap(),
                doc_label(&v.scaled(lambda), &idx, tc).unwrap()
            );
        }
    }

    #[test]
    fn tune_k_endpoints() {
        let v: Vec<SparseVector> = [(0, 1.0), (0, 0.9), (1, 1.0), (2, 1.0), (2, 0.5)]
            .iter()
            .enumerate()
            .map(|(i, &(d, w))| SparseVector::new(FeatureSpace::Type, [(d, w), (3 + i, 0.1)]).unwrap())
            .collect();
        let idx = index(&["a", "b", "c", "d", "e", "f", "g", "h"]);
        let labels: Vec<DocLabel> = v.iter().map(|x| doc_label(x, &idx, 0.4).unwrap()).collect();
        let res = tune_k(&v, &labels, &[1, 3, 5], &TuneOptions::default()).unwrap();
        assert_eq!(res.table.iter().map(|r| r.k).collect::<Vec<_>>(), [1, 3, 5]);
        assert_eq!(res.table[0].class_entropy, 0.0);
        assert_eq!(res.table[2].cluster_entropy, 0.0);
        assert_eq!(res.best_k, 3);
        assert!(tune_k(&v, &labels, &[], &TuneOptions::default()).is_err());
        assert!(tune_k(&v, &labels, &[6], &TuneOptions::default()).is_err());
    }

    #[test]
    fn default_range() {
        assert_eq!(default_k_range(1), [1]);
        assert_eq!(default_k_range(4), [2, 3, 4]);
        assert_eq!(default_k_range(500).len(), 49);
    }
}
