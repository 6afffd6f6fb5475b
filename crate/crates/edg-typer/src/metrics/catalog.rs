use crate::frontend::{EntityIndex, EntityKind};
use crate::types::{NormalizedType, TypeNode};
use serde::Deserialize;
use std::collections::{BTreeMap, BTreeSet};

/// Attribute sets of builtin types, generated once from a pinned
/// interpreter (see `assets/builtin_attrs.json`) with the attributes
/// common to all `object` subtypes already excluded.
const BUILTIN_CATALOG: &str = include_str!("../../assets/builtin_attrs.json");

#[derive(Deserialize)]
struct RawCatalog {
    interpreter: String,
    object_attrs: Vec<String>,
    types: BTreeMap<String, Vec<String>>,
}

/// Maps a type head to the set of attribute and method names it supports.
///
/// Provenance is the pinned builtin table plus, optionally, the
/// user-defined classes of a ground-truth repository. Lookups are total:
/// an unknown head yields the empty set (recorded as a warning by the
/// evaluation layer).
#[derive(Debug, Clone)]
pub struct AttrCatalog {
    pub interpreter: String,
    object_attrs: BTreeSet<String>,
    builtin: BTreeMap<String, BTreeSet<String>>,
    user: BTreeMap<String, BTreeSet<String>>,
}

impl AttrCatalog {
    /// The committed builtin table only.
    pub fn builtin() -> Self {
        let raw: RawCatalog =
            serde_json::from_str(BUILTIN_CATALOG).expect("embedded catalog parses");
        AttrCatalog {
            interpreter: raw.interpreter,
            object_attrs: raw.object_attrs.into_iter().collect(),
            builtin: raw
                .types
                .into_iter()
                .map(|(k, v)| (k, v.into_iter().collect()))
                .collect(),
            user: BTreeMap::new(),
        }
    }

    /// Extend the catalog with the classes of a ground-truth repo: each
    /// class contributes its methods and attribute entities plus those of
    /// its (resolvable) base classes, minus the common object attributes.
    pub fn with_user_classes(mut self, index: &EntityIndex) -> Self {
        // Direct members per class id.
        let mut members: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut bases: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (id, entity) in index.iter() {
            if entity.kind == EntityKind::Class {
                members.entry(id.0.clone()).or_default();
                bases.insert(id.0.clone(), class_bases(entity, index));
            }
        }
        for (id, entity) in index.iter() {
            if let Some(class) = &entity.enclosing_class {
                members
                    .entry(class.0.clone())
                    .or_default()
                    .insert(id.basename().to_string());
            }
        }

        fn attrs_with_bases(
            class_id: &str,
            members: &BTreeMap<String, BTreeSet<String>>,
            bases: &BTreeMap<String, Vec<String>>,
            seen: &mut BTreeSet<String>,
        ) -> BTreeSet<String> {
            if !seen.insert(class_id.to_string()) {
                return BTreeSet::new();
            }
            let mut out = members.get(class_id).cloned().unwrap_or_default();
            for base in bases.get(class_id).into_iter().flatten() {
                out.extend(attrs_with_bases(base, members, bases, seen));
            }
            out
        }

        for class_id in members.keys().cloned().collect::<Vec<_>>() {
            let mut seen = BTreeSet::new();
            let attrs: BTreeSet<String> =
                attrs_with_bases(&class_id, &members, &bases, &mut seen)
                    .difference(&self.object_attrs)
                    .cloned()
                    .collect();
            let basename = class_id.rsplit('.').next().unwrap().to_string();
            self.user.entry(basename).or_insert(attrs);
        }
        self
    }

    pub fn is_known_head(&self, head: &str) -> bool {
        self.user.contains_key(head) || self.builtin.contains_key(head)
    }

    /// Whether `head` supports `attr`, counting the object-common
    /// attributes. `None` when the head is not cataloged.
    pub fn head_has_attr(&self, head: &str, attr: &str) -> Option<bool> {
        if !self.is_known_head(head) {
            return None;
        }
        if self.object_attrs.contains(attr) {
            return Some(true);
        }
        Some(self.head_attrs(head).contains(attr))
    }

    fn head_attrs(&self, head: &str) -> BTreeSet<String> {
        // User-defined classes take precedence over builtin names.
        if let Some(a) = self.user.get(head) {
            return a.clone();
        }
        if let Some(a) = self.builtin.get(head) {
            return a.clone();
        }
        BTreeSet::new()
    }

    /// Attribute set of a normalized type.
    ///
    /// Parametrized types use their origin head; unions use the
    /// intersection of their members (only behaviorally safe attributes);
    /// `Any` is empty by convention.
    pub fn attrs_of(&self, t: &NormalizedType) -> BTreeSet<String> {
        if t.is_any() {
            return BTreeSet::new();
        }
        self.attrs_of_node(&t.node)
    }

    fn attrs_of_node(&self, node: &TypeNode) -> BTreeSet<String> {
        match node {
            TypeNode::Named { head, args } => {
                if head == "Any" {
                    return BTreeSet::new();
                }
                if head == "Union" {
                    let mut iter = args.iter().map(|a| self.attrs_of_node(a));
                    let Some(first) = iter.next() else {
                        return BTreeSet::new();
                    };
                    return iter.fold(first, |acc, next| {
                        acc.intersection(&next).cloned().collect()
                    });
                }
                self.head_attrs(head)
            }
            TypeNode::Group(_) | TypeNode::Ellipsis | TypeNode::LiteralArg(_) => BTreeSet::new(),
        }
    }
}

/// Base-class names parsed from a class entity's header text, resolved to
/// class entity ids by unique basename.
fn class_bases(entity: &crate::frontend::Entity, index: &EntityIndex) -> Vec<String> {
    let header = entity.definition_text.trim_end();
    let Some(open) = header.find('(') else {
        return Vec::new();
    };
    let Some(close) = header.rfind(')') else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for raw in header[open + 1..close].split(',') {
        let name = raw.trim().rsplit('.').next().unwrap_or("").trim();
        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
            continue;
        }
        let mut matches = index.iter().filter(|(id, e)| {
            e.kind == EntityKind::Class && id.basename() == name
        });
        if let Some((id, _)) = matches.next() {
            if matches.next().is_none() {
                out.push(id.0.clone());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{extract_entities, SourceRepo};
    use crate::types::normalize_type;

    #[test]
    fn builtin_catalog_loads() {
        let cat = AttrCatalog::builtin();
        let int_attrs = cat.attrs_of(&normalize_type("int").unwrap());
        assert!(int_attrs.contains("bit_length"));
        assert!(!int_attrs.contains("__init__")); // object attr excluded
    }

    #[test]
    fn parametrized_uses_origin() {
        let cat = AttrCatalog::builtin();
        let a = cat.attrs_of(&normalize_type("list[int]").unwrap());
        let b = cat.attrs_of(&normalize_type("list").unwrap());
        assert_eq!(a, b);
        assert!(a.contains("append"));
    }

    #[test]
    fn union_intersects() {
        let cat = AttrCatalog::builtin();
        let u = cat.attrs_of(&normalize_type("Union[list, str]").unwrap());
        let l = cat.attrs_of(&normalize_type("list").unwrap());
        assert!(u.is_subset(&l));
        assert!(!u.contains("append"));
    }

    #[test]
    fn any_is_empty() {
        let cat = AttrCatalog::builtin();
        assert!(cat.attrs_of(&normalize_type("Any").unwrap()).is_empty());
    }

    #[test]
    fn user_classes_inherit() {
        let repo = SourceRepo::from_files(vec![(
            "m.py".to_string(),
            "class Base:\n    shared = 1\n    def ping(self):\n        return 1\n\nclass Child(Base):\n    def extra(self):\n        return 2\n".to_string(),
        )]);
        let index = extract_entities(&repo);
        let cat = AttrCatalog::builtin().with_user_classes(&index);
        let child = cat.attrs_of(&normalize_type("Child").unwrap());
        assert!(child.contains("extra"));
        assert!(child.contains("ping"));
        assert!(child.contains("shared"));
    }

    #[test]
    fn unknown_head_is_empty() {
        let cat = AttrCatalog::builtin();
        assert!(!cat.is_known_head("Mystery"));
        assert!(cat.attrs_of(&normalize_type("Mystery").unwrap()).is_empty());
    }
}
