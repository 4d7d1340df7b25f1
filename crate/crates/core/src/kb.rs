//! Ontology and knowledge base: a single-parent type forest plus the entity
//! registry (identifier, canonical name, aliases, type).
//!
//! Loaded once, immutable afterwards. Names are matched exactly
//! (case-sensitive); no normalization happens here.

use std::collections::HashMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TypeDecl {
    pub id: String,
    pub parent: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct EntityRecord {
    #[serde(rename = "id")]
    pub identifier: String,
    #[serde(rename = "type")]
    pub entity_type: String,
    #[serde(rename = "name")]
    pub canonical_name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
}

impl EntityRecord {
    /// Canonical name followed by the aliases.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.canonical_name.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

/// Single-parent type forest. Acyclic; every referenced parent is declared.
#[derive(Debug, Clone, Default)]
pub struct TypeHierarchy {
    decls: Vec<TypeDecl>,
    by_id: HashMap<String, usize>,
}

impl TypeHierarchy {
    pub fn from_decls(decls: Vec<TypeDecl>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(decls.len());
        for (i, d) in decls.iter().enumerate() {
            if d.id.is_empty() {
                return Err(Error::validation(format!("types[{i}]"), "empty type id"));
            }
            if by_id.insert(d.id.clone(), i).is_some() {
                return Err(Error::validation(format!("type '{}'", d.id), "duplicate type id"));
            }
        }
        for d in &decls {
            if let Some(p) = &d.parent {
                if !by_id.contains_key(p) {
                    return Err(Error::validation(
                        format!("type '{}'", d.id),
                        format!("unknown parent '{p}'"),
                    ));
                }
            }
        }
        let h = TypeHierarchy { decls, by_id };
        h.check_acyclic()?;
        Ok(h)
    }

    fn check_acyclic(&self) -> Result<()> {
        let n = self.decls.len();
        // 0 = unvisited, 1 = on the current walk, 2 = known to reach a root
        let mut state = vec![0u8; n];
        for start in 0..n {
            let mut walk = Vec::new();
            let mut cur = Some(start);
            while let Some(i) = cur {
                match state[i] {
                    2 => break,
                    1 => {
                        return Err(Error::validation(
                            format!("type '{}'", self.decls[i].id),
                            "cycle in type hierarchy",
                        ))
                    }
                    _ => {}
                }
                state[i] = 1;
                walk.push(i);
                cur = self.decls[i].parent.as_ref().map(|p| self.by_id[p]);
            }
            for i in walk {
                state[i] = 2;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.decls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }

    pub fn contains(&self, t: &str) -> bool {
        self.by_id.contains_key(t)
    }

    pub fn decls(&self) -> &[TypeDecl] {
        &self.decls
    }

    pub fn parent(&self, t: &str) -> Result<Option<&str>> {
        let i = self.index(t)?;
        Ok(self.decls[i].parent.as_deref())
    }

    fn index(&self, t: &str) -> Result<usize> {
        self.by_id
            .get(t)
            .copied()
            .ok_or_else(|| Error::UnknownType(t.to_string()))
    }

    /// `[t, parent(t), ...]` up to and including the root.
    pub fn supertypes_of(&self, t: &str) -> Result<Vec<&str>> {
        let mut i = self.index(t)?;
        let mut chain = vec![self.decls[i].id.as_str()];
        while let Some(p) = &self.decls[i].parent {
            i = self.by_id[p];
            chain.push(self.decls[i].id.as_str());
        }
        Ok(chain)
    }

    /// Reflexive-transitive subsumption: true iff `sup` is reached from `sub`
    /// by zero or more parent steps.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> Result<bool> {
        self.index(sup)?;
        Ok(self.supertypes_of(sub)?.contains(&sup))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct KbFile {
    types: Vec<TypeDecl>,
    #[serde(default)]
    entities: Vec<EntityRecord>,
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    hierarchy: TypeHierarchy,
    entities: Vec<EntityRecord>,
    by_id: HashMap<String, usize>,
}

impl KnowledgeBase {
    pub fn new(hierarchy: TypeHierarchy, entities: Vec<EntityRecord>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(entities.len());
        let mut cleaned = Vec::with_capacity(entities.len());
        for (i, mut e) in entities.into_iter().enumerate() {
            if e.identifier.is_empty() {
                return Err(Error::validation(format!("entities[{i}]"), "empty identifier"));
            }
            let record = format!("entity '{}'", e.identifier);
            if e.canonical_name.is_empty() {
                return Err(Error::validation(record, "empty name"));
            }
            if !hierarchy.contains(&e.entity_type) {
                return Err(Error::validation(
                    record,
                    format!("unknown type '{}'", e.entity_type),
                ));
            }
            if by_id.insert(e.identifier.clone(), i).is_some() {
                return Err(Error::validation(record, "duplicate identifier"));
            }
            let mut aliases: Vec<String> = Vec::with_capacity(e.aliases.len());
            for a in e.aliases.drain(..) {
                if a.is_empty() {
                    return Err(Error::validation(record, "empty alias"));
                }
                if a != e.canonical_name && !aliases.contains(&a) {
                    aliases.push(a);
                }
            }
            e.aliases = aliases;
            cleaned.push(e);
        }
        Ok(KnowledgeBase {
            hierarchy,
            entities: cleaned,
            by_id,
        })
    }

    /// Parse and validate a KB from its JSON form.
    pub fn load(mut source: impl Read) -> Result<Self> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: KbFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: Some(e.line()),
            message: e.to_string(),
        })?;
        let hierarchy = TypeHierarchy::from_decls(file.types)?;
        Self::new(hierarchy, file.entities)
    }

    pub fn to_json_string(&self) -> String {
        let file = KbFile {
            types: self.hierarchy.decls.clone(),
            entities: self.entities.clone(),
        };
        serde_json::to_string_pretty(&file).expect("KB serialization is infallible")
    }

    pub fn hierarchy(&self) -> &TypeHierarchy {
        &self.hierarchy
    }

    pub fn entities(&self) -> &[EntityRecord] {
        &self.entities
    }

    pub fn entity(&self, id: &str) -> Result<&EntityRecord> {
        self.by_id
            .get(id)
            .map(|&i| &self.entities[i])
            .ok_or_else(|| Error::UnknownEntity(id.to_string()))
    }

    /// `{canonical_name} ∪ aliases`, canonical name first.
    pub fn names_of(&self, id: &str) -> Result<Vec<&str>> {
        Ok(self.entity(id)?.names().collect())
    }

    pub fn supertypes_of(&self, t: &str) -> Result<Vec<&str>> {
        self.hierarchy.supertypes_of(t)
    }

    pub fn is_subtype(&self, sub: &str, sup: &str) -> Result<bool> {
        self.hierarchy.is_subtype(sub, sup)
    }
}

/// The sample KB shipped under `fixtures/sample_kb.json`.
pub const SAMPLE_KB_JSON: &str = include_str!("../fixtures/sample_kb.json");
