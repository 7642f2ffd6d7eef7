//! Semantic type classes, the subtype order over them, and inference rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ids::TypeId;

/// One condition atom of an inference rule, matched against a single channel
/// and its adjacent sites.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    ChannelHasType(TypeId),
    /// Some input site carries the type.
    InputHasType(TypeId),
    /// Some output site carries the type.
    OutputHasType(TypeId),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conclusion {
    Channel(TypeId),
    /// Assign to the output at `position`, or to every output when `None`.
    Output {
        position: Option<usize>,
        ty: TypeId,
    },
}

impl Conclusion {
    pub fn ty(&self) -> &TypeId {
        match self {
            Conclusion::Channel(t) => t,
            Conclusion::Output { ty, .. } => ty,
        }
    }
}

/// Monotone Horn-style rule: if every condition holds, add the conclusion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceRule {
    pub name: String,
    pub conditions: Vec<Condition>,
    pub conclusion: Conclusion,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeSystem {
    pub types: BTreeSet<TypeId>,
    /// `(sub, super)` pairs.
    pub subtypes: BTreeSet<(TypeId, TypeId)>,
    pub rules: BTreeMap<String, InferenceRule>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TypeViolation {
    /// Antisymmetry broken: the listed types are mutually subtypes.
    Cycle {
        types: Vec<TypeId>,
    },
    UndeclaredType {
        ty: TypeId,
        context: String,
    },
}

impl fmt::Display for TypeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeViolation::Cycle { types } => {
                let names: Vec<&str> = types.iter().map(TypeId::as_str).collect();
                write!(f, "cycle {}", names.join(","))
            }
            TypeViolation::UndeclaredType { ty, context } => {
                write!(f, "undeclared type `{ty}` in {context}")
            }
        }
    }
}

impl TypeSystem {
    /// Direct supertypes of `ty`.
    fn parents<'a>(&'a self, ty: &'a TypeId) -> impl Iterator<Item = &'a TypeId> + 'a {
        self.subtypes
            .iter()
            .filter(move |(sub, _)| sub == ty)
            .map(|(_, sup)| sup)
    }

    /// `ty` together with every type above it in the reflexive-transitive order.
    pub fn supertypes(&self, ty: &TypeId) -> BTreeSet<TypeId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![ty.clone()];
        while let Some(t) = stack.pop() {
            if seen.insert(t.clone()) {
                stack.extend(self.parents(&t).cloned());
            }
        }
        seen
    }

    /// `a ≤ b` in the reflexive-transitive closure.
    pub fn is_subtype(&self, a: &TypeId, b: &TypeId) -> bool {
        self.supertypes(a).contains(b)
    }

    /// Upward closure of a set of types.
    pub fn close(&self, types: &BTreeSet<TypeId>) -> BTreeSet<TypeId> {
        types.iter().flat_map(|t| self.supertypes(t)).collect()
    }

    /// Checks that the closure of the subtype edges is a partial order and
    /// that every referenced type is declared. Empty means valid.
    pub fn check(&self) -> Vec<TypeViolation> {
        let mut violations = Vec::new();
        for (sub, sup) in &self.subtypes {
            for t in [sub, sup] {
                if !self.types.contains(t) {
                    violations.push(TypeViolation::UndeclaredType {
                        ty: t.clone(),
                        context: format!("subtype edge {sub} <: {sup}"),
                    });
                }
            }
        }
        for rule in self.rules.values() {
            let mentioned = rule
                .conditions
                .iter()
                .map(|c| match c {
                    Condition::ChannelHasType(t)
                    | Condition::InputHasType(t)
                    | Condition::OutputHasType(t) => t,
                })
                .chain(std::iter::once(rule.conclusion.ty()));
            for t in mentioned {
                if !self.types.contains(t) {
                    violations.push(TypeViolation::UndeclaredType {
                        ty: t.clone(),
                        context: format!("rule {}", rule.name),
                    });
                }
            }
        }
        violations.extend(self.subtype_cycles());
        violations
    }

    /// One violation per group of distinct, mutually-subtyped types.
    fn subtype_cycles(&self) -> Vec<TypeViolation> {
        let all: BTreeSet<&TypeId> = self.subtypes.iter().flat_map(|(a, b)| [a, b]).collect();
        let ups: BTreeMap<&TypeId, BTreeSet<TypeId>> =
            all.iter().map(|t| (*t, self.supertypes(t))).collect();
        let mut reported: BTreeSet<TypeId> = BTreeSet::new();
        let mut out = Vec::new();
        for t in &all {
            if reported.contains(*t) {
                continue;
            }
            let class: Vec<TypeId> = ups[t]
                .iter()
                .filter(|u| *u != *t && ups.get(u).is_some_and(|s| s.contains(*t)))
                .cloned()
                .collect();
            if !class.is_empty() {
                let mut members: Vec<TypeId> = class;
                members.push((*t).clone());
                members.sort();
                reported.extend(members.iter().cloned());
                out.push(TypeViolation::Cycle { types: members });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(types: &[&str], edges: &[(&str, &str)]) -> TypeSystem {
        TypeSystem {
            types: types.iter().map(|t| TypeId::from(*t)).collect(),
            subtypes: edges
                .iter()
                .map(|(a, b)| (TypeId::from(*a), TypeId::from(*b)))
                .collect(),
            rules: BTreeMap::new(),
        }
    }

    #[test]
    fn chain_is_partial_order() {
        assert!(ts(&["list", "collection"], &[("list", "collection")])
            .check()
            .is_empty());
    }

    #[test]
    fn two_cycle_reported() {
        let v = ts(&["a", "b"], &[("a", "b"), ("b", "a")]).check();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].to_string(), "cycle a,b");
    }

    #[test]
    fn case_study_types_are_valid() {
        let v = ts(
            &["list", "sublist", "filtering", "ranking", "abstraction"],
            &[("sublist", "list")],
        )
        .check();
        assert!(v.is_empty(), "{v:?}");
    }

    #[test]
    fn undeclared_rule_types_reported() {
        let mut t = ts(&["list"], &[]);
        t.rules.insert(
            "r".into(),
            InferenceRule {
                name: "r".into(),
                conditions: vec![Condition::InputHasType("list".into())],
                conclusion: Conclusion::Output {
                    position: None,
                    ty: "sublist".into(),
                },
            },
        );
        let v = t.check();
        assert_eq!(v.len(), 1);
        assert!(
            matches!(&v[0], TypeViolation::UndeclaredType { ty, .. } if ty.as_str() == "sublist")
        );
    }

    #[test]
    fn closure_is_reflexive_transitive() {
        let t = ts(&["a", "b", "c"], &[("a", "b"), ("b", "c")]);
        assert!(t.is_subtype(&"a".into(), &"a".into()));
        assert!(t.is_subtype(&"a".into(), &"c".into()));
        assert!(!t.is_subtype(&"c".into(), &"a".into()));
    }
}
