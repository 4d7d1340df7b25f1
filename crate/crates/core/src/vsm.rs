//! Vector space model over the four named-entity feature spaces.
//!
//! A document becomes four sparse tf.idf vectors: over entity names (aliases
//! included), entity types (supertypes included), name-type pairs, and entity
//! identifiers. Similarity is the cosine of two vectors in the same space.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSpace {
    Name,
    Type,
    NameType,
    Identifier,
}

impl FeatureSpace {
    pub const ALL: [FeatureSpace; 4] = [
        FeatureSpace::Name,
        FeatureSpace::Type,
        FeatureSpace::NameType,
        FeatureSpace::Identifier,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSpace::Name => "name",
            FeatureSpace::Type => "type",
            FeatureSpace::NameType => "nametype",
            FeatureSpace::Identifier => "identifier",
        }
    }

    fn ordinal(self) -> usize {
        self as usize
    }
}

impl fmt::Display for FeatureSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureSpace::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown feature space '{s}' (expected name|type|nametype|identifier)"
                ))
            })
    }
}

/// Parses a comma-separated list such as `type,identifier`.
pub fn parse_spaces(s: &str) -> Result<Vec<FeatureSpace>> {
    s.split(',').map(|p| p.trim().parse()).collect()
}

/// A dimension of one feature space. The key is the serialized form; for
/// name-type pairs it is `name|type` with `\` and `|` backslash-escaped, so
/// keys are unique and order terms lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Term {
    pub space: FeatureSpace,
    pub key: String,
}

fn escape_component(s: &str) -> String {
    s.replace('\\', "\\\\").replace('|', "\\|")
}

impl Term {
    pub fn name(n: &str) -> Self {
        Term {
            space: FeatureSpace::Name,
            key: n.to_string(),
        }
    }

    pub fn ty(t: &str) -> Self {
        Term {
            space: FeatureSpace::Type,
            key: t.to_string(),
        }
    }

    pub fn name_type(n: &str, t: &str) -> Self {
        Term {
            space: FeatureSpace::NameType,
            key: format!("{}|{}", escape_component(n), escape_component(t)),
        }
    }

    pub fn identifier(id: &str) -> Self {
        Term {
            space: FeatureSpace::Identifier,
            key: id.to_string(),
        }
    }

    /// Splits a name-type key back into `(name, type)`.
    pub fn name_type_parts(&self) -> Option<(String, String)> {
        if self.space != FeatureSpace::NameType {
            return None;
        }
        let mut parts = vec![String::new()];
        let mut chars = self.key.chars();
        while let Some(c) = chars.next() {
            match c {
                '\\' => parts.last_mut()?.push(chars.next()?),
                '|' => parts.push(String::new()),
                c => parts.last_mut()?.push(c),
            }
        }
        match <[String; 2]>::try_from(parts) {
            Ok([n, t]) => Some((n, t)),
            Err(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key)
    }
}

/// Term multiplicities of one document in one space.
pub type Occurrences = BTreeMap<Term, u32>;

/// Applies the occurrence rules to every annotation of `doc`:
/// an identified mention occurs under every name of its entity, a typed
/// mention under its type and all supertypes, name-type pairs are the cross
/// product of the two, and identifiers occur as themselves.
pub fn term_occurrences(doc: &Document, space: FeatureSpace, kb: &KnowledgeBase) -> Result<Occurrences> {
    let mut occ = Occurrences::new();
    for a in &doc.annotations {
        let names = || -> Result<Vec<&str>> {
            match &a.entity_id {
                Some(id) => kb.names_of(id),
                None => Ok(vec![a.name.as_str()]),
            }
        };
        let types = || -> Result<Vec<&str>> {
            match &a.entity_type {
                Some(t) => kb.supertypes_of(t),
                None => Ok(Vec::new()),
            }
        };
        match space {
            FeatureSpace::Name => {
                for n in names()? {
                    *occ.entry(Term::name(n)).or_default() += 1;
                }
            }
            FeatureSpace::Type => {
                for t in types()? {
                    *occ.entry(Term::ty(t)).or_default() += 1;
                }
            }
            FeatureSpace::NameType => {
                let ts = types()?;
                for n in names()? {
                    for t in &ts {
                        *occ.entry(Term::name_type(n, t)).or_default() += 1;
                    }
                }
            }
            FeatureSpace::Identifier => {
                if let Some(id) = &a.entity_id {
                    *occ.entry(Term::identifier(id)).or_default() += 1;
                }
            }
        }
    }
    Ok(occ)
}

/// Vocabulary of one space with document frequencies. Dimension `i` is
/// `terms[i]`; terms are sorted by key.
#[derive(Debug, Clone)]
pub struct TermIndex {
    space: FeatureSpace,
    terms: Vec<Term>,
    doc_freq: Vec<usize>,
    corpus_size: usize,
    lookup: HashMap<Term, usize>,
}

impl TermIndex {
    fn from_occurrences<'a>(space: FeatureSpace, per_doc: impl IntoIterator<Item = &'a Occurrences>) -> Self {
        let mut df: BTreeMap<&Term, usize> = BTreeMap::new();
        let mut n = 0;
        for occ in per_doc {
            n += 1;
            for t in occ.keys() {
                *df.entry(t).or_default() += 1;
            }
        }
        let (terms, doc_freq): (Vec<Term>, Vec<usize>) = df.into_iter().map(|(t, c)| (t.clone(), c)).unzip();
        let lookup = terms.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        TermIndex {
            space,
            terms,
            doc_freq,
            corpus_size: n,
            lookup,
        }
    }

    pub fn space(&self) -> FeatureSpace {
        self.space
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term(&self, dim: usize) -> &Term {
        &self.terms[dim]
    }

    pub fn dim_of(&self, t: &Term) -> Option<usize> {
        self.lookup.get(t).copied()
    }

    pub fn doc_freq(&self, dim: usize) -> usize {
        self.doc_freq[dim]
    }

    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `ln(N / n_i)`
    pub fn idf(&self, dim: usize) -> f64 {
        (self.corpus_size as f64 / self.doc_freq[dim] as f64).ln()
    }

    /// tf.idf weights for one document's occurrences. Out-of-vocabulary
    /// terms are dropped before taking the max frequency.
    pub fn weigh(&self, occ: &Occurrences) -> SparseVector {
        let known: Vec<(usize, u32)> = occ
            .iter()
            .filter_map(|(t, &f)| self.dim_of(t).map(|d| (d, f)))
            .collect();
        let max = known.iter().map(|&(_, f)| f).max().unwrap_or(0);
        let mut entries: Vec<(usize, f64)> = known
            .into_iter()
            .map(|(d, f)| (d, f as f64 / max as f64 * self.idf(d)))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        entries.sort_unstable_by_key(|&(d, _)| d);
        SparseVector {
            space: self.space,
            entries,
        }
    }
}

pub fn build_index<'a>(
    docs: impl IntoIterator<Item = &'a Document>,
    space: FeatureSpace,
    kb: &KnowledgeBase,
) -> Result<TermIndex> {
    let occ = docs
        .into_iter()
        .map(|d| term_occurrences(d, space, kb))
        .collect::<Result<Vec<_>>>()?;
    Ok(TermIndex::from_occurrences(space, &occ))
}

pub fn vectorize(doc: &Document, idx: &TermIndex, kb: &KnowledgeBase) -> Result<SparseVector> {
    Ok(idx.weigh(&term_occurrences(doc, idx.space(), kb)?))
}

/// Nonnegative sparse vector; entries sorted by dimension, no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    space: FeatureSpace,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn zero(space: FeatureSpace) -> Self {
        SparseVector {
            space,
            entries: Vec::new(),
        }
    }

    pub fn new(space: FeatureSpace, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut entries: Vec<(usize, f64)> = entries.into_iter().collect();
        if let Some(&(d, w)) = entries.iter().find(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid(format!(
                "weight {w} at dimension {d} is not a finite nonnegative number"
            )));
        }
        entries.retain(|&(_, w)| w > 0.0);
        entries.sort_unstable_by_key(|&(d, _)| d);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid(format!("duplicate dimension {}", w[0].0)));
        }
        Ok(SparseVector { space, entries })
    }

    pub fn space(&self) -> FeatureSpace {
        self.space
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, dim: usize) -> f64 {
        self.entries
            .binary_search_by_key(&dim, |&(d, _)| d)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    /// Sum of weights, accumulated in ascending dimension order.
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.entries.len() && j < other.entries.len() {
            let (da, wa) = self.entries[i];
            let (db, wb) = other.entries[j];
            match da.cmp(&db) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += wa * wb;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn scaled(&self, factor: f64) -> SparseVector {
        SparseVector {
            space: self.space,
            entries: self
                .entries
                .iter()
                .map(|&(d, w)| (d, w * factor))
                .filter(|&(_, w)| w > 0.0)
                .collect(),
        }
    }

    /// Unit-length copy; the zero vector stays zero.
    pub fn normalized(&self) -> SparseVector {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        SparseVector {
            space: self.space,
            entries: self.entries.iter().map(|&(d, w)| (d, w / n)).collect(),
        }
    }
}

/// Cosine similarity in `[0, 1]`; 0 when either vector is zero.
pub fn cosine(a: &SparseVector, b: &SparseVector) -> Result<f64> {
    if a.space != b.space {
        return Err(Error::SpaceMismatch {
            left: a.space,
            right: b.space,
        });
    }
    let (na, nb) = (a.norm_sq(), b.norm_sq());
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((a.dot(b) / (na * nb).sqrt()).min(1.0))
}

/// The four vectors of one document, indexed by [`FeatureSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct DocVectors([SparseVector; 4]);

impl DocVectors {
    pub fn new(
        name: SparseVector,
        ty: SparseVector,
        name_type: SparseVector,
        identifier: SparseVector,
    ) -> Result<Self> {
        let v = [name, ty, name_type, identifier];
        for (s, x) in FeatureSpace::ALL.iter().zip(&v) {
            if x.space != *s {
                return Err(Error::SpaceMismatch {
                    left: *s,
                    right: x.space,
                });
            }
        }
        Ok(DocVectors(v))
    }

    pub fn get(&self, space: FeatureSpace) -> &SparseVector {
        &self.0[space.ordinal()]
    }
}

/// Per-space weights for [`doc_similarity`], in `FeatureSpace::ALL` order.
pub type SpaceWeights = [f64; 4];

/// Weighted mean of per-space cosines, taken over the spaces where both
/// documents have a nonzero vector. 0 when there is no such space.
pub fn doc_similarity(a: &DocVectors, b: &DocVectors, weights: &SpaceWeights) -> Result<f64> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("space weights must be finite and nonnegative"));
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::invalid("space weights sum to zero"));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (s, &w) in FeatureSpace::ALL.iter().zip(weights) {
        let (va, vb) = (a.get(*s), b.get(*s));
        if va.is_zero() || vb.is_zero() {
            continue;
        }
        num += w * cosine(va, vb)?;
        den += w;
    }
    Ok(if den > 0.0 { num / den } else { 0.0 })
}

/// Index plus one vector per document for a single space.
#[derive(Debug, Clone)]
pub struct SpaceModel {
    pub index: TermIndex,
    pub vectors: Vec<SparseVector>,
}

impl SpaceModel {
    /// Builds the vocabulary over `docs` and vectorizes each of them.
    pub fn build(docs: &[&Document], space: FeatureSpace, kb: &KnowledgeBase) -> Result<Self> {
        let occ = docs
            .par_iter()
            .map(|d| term_occurrences(d, space, kb))
            .collect::<Result<Vec<_>>>()?;
        let index = TermIndex::from_occurrences(space, &occ);
        let vectors = occ.par_iter().map(|o| index.weigh(o)).collect();
        Ok(SpaceModel { index, vectors })
    }
}
