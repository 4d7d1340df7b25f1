//! NE-annotated documents: JSON-Lines loading, validation against a
//! knowledge base, and fill-in of types derivable from identifiers.

use std::collections::HashSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;

/// One recorded mention: name only, name + type, or name + type + identifier.
///
/// After normalization `entity_id.is_some()` implies `entity_type.is_some()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub name: String,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub entity_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_id: Option<String>,
}

impl Annotation {
    pub fn name_only(name: impl Into<String>) -> Self {
        Annotation {
            name: name.into(),
            entity_type: None,
            entity_id: None,
        }
    }

    pub fn typed(name: impl Into<String>, ty: impl Into<String>) -> Self {
        Annotation {
            name: name.into(),
            entity_type: Some(ty.into()),
            entity_id: None,
        }
    }

    pub fn identified(name: impl Into<String>, ty: impl Into<String>, id: impl Into<String>) -> Self {
        Annotation {
            name: name.into(),
            entity_type: Some(ty.into()),
            entity_id: Some(id.into()),
        }
    }
}

/// A document is a multiset of mention occurrences kept in input order;
/// repeated annotations each count as one occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_truth: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

#[derive(Deserialize)]
struct RawAnnotation {
    #[serde(default)]
    name: Option<String>,
    #[serde(rename = "type", default)]
    entity_type: Option<String>,
    #[serde(default)]
    entity_id: Option<String>,
}

#[derive(Deserialize)]
struct RawDocument {
    doc_id: String,
    #[serde(default)]
    annotations: Vec<RawAnnotation>,
    #[serde(default)]
    group_truth: Option<String>,
}

fn normalize(raw: RawAnnotation, kb: &KnowledgeBase, record: &str) -> Result<Annotation> {
    let RawAnnotation {
        name,
        entity_type,
        entity_id,
    } = raw;
    match entity_id {
        Some(id) => {
            let entity = kb.entity(&id)?;
            let ty = match entity_type {
                Some(t) if t != entity.entity_type => {
                    if !kb.hierarchy().contains(&t) {
                        return Err(Error::UnknownType(t));
                    }
                    return Err(Error::validation(
                        record,
                        format!(
                            "type mismatch for '{id}': annotated '{t}', knowledge base says '{}'",
                            entity.entity_type
                        ),
                    ));
                }
                _ => entity.entity_type.clone(),
            };
            let name = match name {
                Some(n) if !n.is_empty() => n,
                _ => entity.canonical_name.clone(),
            };
            Ok(Annotation {
                name,
                entity_type: Some(ty),
                entity_id: Some(id),
            })
        }
        None => {
            let name = name
                .filter(|n| !n.is_empty())
                .ok_or_else(|| Error::validation(record, "annotation without name or identifier"))?;
            if let Some(t) = &entity_type {
                if !kb.hierarchy().contains(t) {
                    return Err(Error::UnknownType(t.clone()));
                }
            }
            Ok(Annotation {
                name,
                entity_type,
                entity_id: None,
            })
        }
    }
}

impl Corpus {
    /// Reads one document per non-blank line, validating every annotation
    /// against `kb`. Fails on the first bad line.
    pub fn load(source: impl BufRead, kb: &KnowledgeBase) -> Result<Self> {
        let mut documents = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawDocument = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: Some(lineno),
                message: e.to_string(),
            })?;
            let record = format!("document '{}' (line {lineno})", raw.doc_id);
            if raw.doc_id.is_empty() {
                return Err(Error::validation(record, "empty doc_id"));
            }
            if !seen.insert(raw.doc_id.clone()) {
                return Err(Error::validation(record, "duplicate doc_id"));
            }
            let annotations = raw
                .annotations
                .into_iter()
                .map(|a| normalize(a, kb, &record))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| match e {
                    Error::UnknownEntity(_) | Error::UnknownType(_) => {
                        Error::validation(record.clone(), e.to_string())
                    }
                    other => other,
                })?;
            documents.push(Document {
                doc_id: raw.doc_id,
                annotations,
                group_truth: raw.group_truth,
            });
        }
        Ok(Corpus { documents })
    }

    pub fn from_jsonl_str(text: &str, kb: &KnowledgeBase) -> Result<Self> {
        Self::load(text.as_bytes(), kb)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for d in &self.documents {
            out.push_str(&serde_json::to_string(d).expect("document serialization is infallible"));
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}
