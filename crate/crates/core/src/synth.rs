//! Synthetic corpora with planted structure at two levels: each group owns a
//! disjoint type subtree (type level) and a pool of entities (identifier
//! level). Every document belongs to one group and focuses on one entity of
//! that group's pool.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Annotation, Corpus, Document};
use crate::error::{Error, Result};
use crate::kb::{EntityRecord, KnowledgeBase, TypeDecl, TypeHierarchy};

pub const ROOT_TYPE: &str = "Thing";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub groups: usize,
    pub docs_per_group: usize,
    pub mentions_per_doc: usize,
    /// Fraction of each document's mentions drawn from other groups' pools.
    pub noise_rate: f64,
    pub seed: u64,
    pub entities_per_group: usize,
    pub aliases_per_entity: usize,
    /// Probability that an in-group mention refers to the document's focus
    /// entity rather than a uniformly drawn member of the pool.
    pub focus_rate: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            groups: 3,
            docs_per_group: 20,
            mentions_per_doc: 10,
            noise_rate: 0.1,
            seed: 7,
            entities_per_group: 4,
            aliases_per_entity: 1,
            focus_rate: 0.8,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        if self.groups == 0 {
            return Err(Error::invalid("groups must be at least 1"));
        }
        if self.docs_per_group == 0 {
            return Err(Error::invalid("docs_per_group must be at least 1"));
        }
        if self.mentions_per_doc == 0 {
            return Err(Error::invalid("mentions_per_doc must be at least 1"));
        }
        if self.entities_per_group == 0 {
            return Err(Error::invalid("entities_per_group must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(Error::invalid(format!(
                "noise_rate {} outside [0, 1]",
                self.noise_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.focus_rate) {
            return Err(Error::invalid(format!(
                "focus_rate {} outside [0, 1]",
                self.focus_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub kb: KnowledgeBase,
    /// Focus entity identifier per document, aligned with `corpus.documents`.
    pub identity_truth: Vec<String>,
}

pub fn group_type(g: usize) -> String {
    format!("Category{g}")
}

pub fn entity_id(g: usize, e: usize) -> String {
    format!("#G{g}E{e}")
}

fn canonical_name(g: usize, e: usize) -> String {
    format!("Entity-{g}-{e}")
}

pub fn generate(params: &SyntheticParams) -> Result<SyntheticCorpus> {
    params.validate()?;
    let mut types = vec![TypeDecl {
        id: ROOT_TYPE.to_string(),
        parent: None,
    }];
    let mut entities = Vec::new();
    for g in 0..params.groups {
        types.push(TypeDecl {
            id: group_type(g),
            parent: Some(ROOT_TYPE.to_string()),
        });
        for e in 0..params.entities_per_group {
            let name = canonical_name(g, e);
            entities.push(EntityRecord {
                identifier: entity_id(g, e),
                entity_type: group_type(g),
                aliases: (0..params.aliases_per_entity)
                    .map(|a| format!("{name}/alias{a}"))
                    .collect(),
                canonical_name: name,
            });
        }
    }
    let kb = KnowledgeBase::new(TypeHierarchy::from_decls(types)?, entities)?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise_count = (params.noise_rate * params.mentions_per_doc as f64).round() as usize;
    let mut documents = Vec::with_capacity(params.groups * params.docs_per_group);
    let mut identity_truth = Vec::with_capacity(documents.capacity());

    let mention = |rng: &mut ChaCha8Rng, g: usize, e: usize| {
        let record = kb.entity(&entity_id(g, e)).expect("generated entity");
        let names: Vec<&str> = record.names().collect();
        let name = names[rng.random_range(0..names.len())];
        Annotation::identified(name, &record.entity_type, &record.identifier)
    };

    for g in 0..params.groups {
        for j in 0..params.docs_per_group {
            let focus = j % params.entities_per_group;
            let mut annotations = Vec::with_capacity(params.mentions_per_doc);
            for _ in 0..params.mentions_per_doc - noise_count {
                let e = if rng.random::<f64>() < params.focus_rate {
                    focus
                } else {
                    rng.random_range(0..params.entities_per_group)
                };
                annotations.push(mention(&mut rng, g, e));
            }
            for _ in 0..noise_count {
                // A single group has no foreign pool to draw noise from.
                let other = if params.groups == 1 {
                    g
                } else {
                    let o = rng.random_range(0..params.groups - 1);
                    if o >= g {
                        o + 1
                    } else {
                        o
                    }
                };
                let e = rng.random_range(0..params.entities_per_group);
                annotations.push(mention(&mut rng, other, e));
            }
            annotations.shuffle(&mut rng);
            documents.push(Document {
                doc_id: format!("g{g}-d{j:04}"),
                annotations,
                group_truth: Some(format!("g{g}")),
            });
            identity_truth.push(entity_id(g, focus));
        }
    }

    Ok(SyntheticCorpus {
        corpus: Corpus { documents },
        kb,
        identity_truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_group_without_noise() {
        let s = generate(&SyntheticParams {
            groups: 1,
            noise_rate: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert!(s
            .corpus
            .documents
            .iter()
            .all(|d| d.group_truth.as_deref() == Some("g0")));
        for d in &s.corpus.documents {
            for a in &d.annotations {
                assert_eq!(a.entity_type.as_deref(), Some("Category0"));
            }
        }
    }

    #[test]
    fn sizes_and_reproducibility() {
        let p = SyntheticParams {
            groups: 3,
            docs_per_group: 20,
            mentions_per_doc: 10,
            noise_rate: 0.1,
            seed: 7,
            ..Default::default()
        };
        let a = generate(&p).unwrap();
        let b = generate(&p).unwrap();
        assert_eq!(a.corpus.len(), 60);
        assert!(a.corpus.documents.iter().all(|d| d.annotations.len() == 10));
        assert_eq!(a.corpus.to_jsonl(), b.corpus.to_jsonl());
        assert_eq!(a.kb.to_json_string(), b.kb.to_json_string());
        let c = generate(&SyntheticParams { seed: 8, ..p }).unwrap();
        assert_ne!(a.corpus.to_jsonl(), c.corpus.to_jsonl());
    }

    #[test]
    fn noise_mentions_come_from_other_groups() {
        let s = generate(&SyntheticParams::default()).unwrap();
        for d in &s.corpus.documents {
            let own = format!("Category{}", &d.group_truth.as_ref().unwrap()[1..]);
            let foreign = d
                .annotations
                .iter()
                .filter(|a| a.entity_type.as_deref() != Some(own.as_str()))
                .count();
            assert_eq!(foreign, 1);
        }
    }

    #[test]
    fn generated_corpus_validates() {
        let s = generate(&SyntheticParams::default()).unwrap();
        let kb = KnowledgeBase::from_json_str(&s.kb.to_json_string()).unwrap();
        let back = Corpus::from_jsonl_str(&s.corpus.to_jsonl(), &kb).unwrap();
        assert_eq!(back, s.corpus);
    }

    #[test]
    fn invalid_params() {
        for p in [
            SyntheticParams {
                groups: 0,
                ..Default::default()
            },
            SyntheticParams {
                noise_rate: 1.5,
                ..Default::default()
            },
            SyntheticParams {
                noise_rate: -0.1,
                ..Default::default()
            },
            SyntheticParams {
                mentions_per_doc: 0,
                ..Default::default()
            },
        ] {
            assert!(generate(&p).unwrap_err().is_usage());
        }
    }
}
