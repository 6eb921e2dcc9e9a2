//! Instance data the invariants are evaluated over: per-class instance
//! lists plus relationship links, and the evaluation scopes that bind
//! expressions to it.

use super::expr::{EvalError, EvalScope, Value};
use crate::diag::{Subject, Violation};
use crate::model::{Relationship, RelationshipKind, UmlModel};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A plain attribute value as stored on an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Str(String),
    Num(f64),
    Bool(bool),
}

impl AttrValue {
    pub fn to_value(&self) -> Value {
        match self {
            AttrValue::Str(s) => Value::Str(s.clone()),
            AttrValue::Num(n) => Value::Number(*n),
            AttrValue::Bool(b) => Value::Bool(*b),
        }
    }

    pub fn render(&self) -> String {
        self.to_value().render()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub attributes: BTreeMap<String, AttrValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub kind: RelationshipKind,
    pub source: String,
    pub target: String,
}

/// Instances grouped by class, plus links between instance ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceStore {
    pub instances: BTreeMap<String, Vec<Instance>>,
    pub links: Vec<Link>,
}

impl InstanceStore {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("store serializes")
    }

    pub fn find(&self, id: &str) -> Option<(&str, &Instance)> {
        for (class, instances) in &self.instances {
            if let Some(instance) = instances.iter().find(|i| i.id == id) {
                return Some((class.as_str(), instance));
            }
        }
        None
    }

    pub fn find_mut(&mut self, id: &str) -> Option<&mut Instance> {
        self.instances.values_mut().flatten().find(|i| i.id == id)
    }

    /// Instances whose class is `class` or a descendant of it.
    pub fn instances_of_kind<'a>(
        &'a self,
        model: &UmlModel,
        class: &str,
    ) -> Vec<&'a Instance> {
        let mut result = Vec::new();
        for (instance_class, instances) in &self.instances {
            if model.is_kind_of(instance_class, class) {
                result.extend(instances.iter());
            }
        }
        result
    }

    /// Checks the store's own invariants against the model: every instance
    /// class must be declared, and every attribute key must be declared on
    /// the class or one of its ancestors.
    pub fn validate(&self, model: &UmlModel) -> Vec<Violation> {
        let mut violations = Vec::new();
        for (class, instances) in &self.instances {
            if !model.has_class(class) {
                violations.push(Violation::new(
                    "instance-store",
                    Subject::Instance { id: class.clone() },
                    class.clone(),
                    format!("instances declared for unknown class `{class}`"),
                ));
                continue;
            }
            let declared: Vec<&str> = model
                .attributes_with_inherited(class)
                .into_iter()
                .map(|a| a.name.as_str())
                .collect();
            for instance in instances {
                for key in instance.attributes.keys() {
                    if !declared.contains(&key.as_str()) {
                        violations.push(Violation::new(
                            "instance-store",
                            Subject::Instance { id: instance.id.clone() },
                            key.clone(),
                            format!("attribute `{key}` is not declared on `{class}` or its ancestors"),
                        ));
                    }
                }
            }
        }
        for link in &self.links {
            for end in [&link.source, &link.target] {
                if self.find(end).is_none() {
                    violations.push(Violation::new(
                        "instance-store",
                        Subject::Instance { id: end.clone() },
                        end.clone(),
                        format!("link endpoint `{end}` is not a stored instance"),
                    ));
                }
            }
        }
        violations
    }
}

/// Finds the relationship a navigation name refers to: the context class (or
/// an ancestor) must be the relationship source and the navigation must name
/// the target class, compared case-insensitively, ignoring hyphens, with an
/// optional plural `s`.
pub fn resolve_navigation<'a>(
    model: &'a UmlModel,
    class: &str,
    nav: &str,
) -> Option<&'a Relationship> {
    let wanted = normalize(nav);
    let singular = wanted.strip_suffix('s').unwrap_or(&wanted);
    model.relationships.iter().find(|rel| {
        rel.kind != RelationshipKind::Inheritance
            && model.is_kind_of(class, &rel.source)
            && {
                let target = normalize(&rel.target);
                target == wanted || target == singular
            }
    })
}

fn normalize(name: &str) -> String {
    name.chars().filter(|c| *c != '-').flat_map(char::to_lowercase).collect()
}

/// Scope backed by the full instance store; `self` may be bound to one
/// instance. Attribute lookup falls back to relationship navigation when the
/// name is not a declared attribute.
pub struct StoreScope<'a> {
    model: &'a UmlModel,
    store: &'a InstanceStore,
    current: Option<String>,
}

impl<'a> StoreScope<'a> {
    pub fn new(model: &'a UmlModel, store: &'a InstanceStore, current: Option<String>) -> Self {
        Self { model, store, current }
    }
}

impl EvalScope for StoreScope<'_> {
    fn self_instance(&self) -> Option<Value> {
        self.current.clone().map(Value::Instance)
    }

    fn attr(&self, instance: &str, name: &str, at_pre: bool) -> Result<Value, EvalError> {
        if at_pre {
            return Err(EvalError::PreOutsidePost);
        }
        let (class, inst) = self.store.find(instance).ok_or_else(|| {
            EvalError::UnknownAttribute {
                subject: instance.to_string(),
                attribute: name.to_string(),
            }
        })?;
        if let Some(value) = inst.attributes.get(name) {
            return Ok(value.to_value());
        }
        // Relationship navigation: collect linked targets.
        if let Some(rel) = resolve_navigation(self.model, class, name) {
            let targets: Vec<Value> = self
                .store
                .links
                .iter()
                .filter(|l| l.kind == rel.kind && l.source == instance)
                .map(|l| Value::Instance(l.target.clone()))
                .collect();
            return Ok(Value::Collection(targets));
        }
        Err(EvalError::UnknownAttribute {
            subject: instance.to_string(),
            attribute: name.to_string(),
        })
    }

    fn all_instances(&self, class: &str) -> Result<Vec<Value>, EvalError> {
        if !self.model.has_class(class) {
            return Err(EvalError::UnknownClass(class.to_string()));
        }
        Ok(self
            .store
            .instances_of_kind(self.model, class)
            .into_iter()
            .map(|i| Value::Instance(i.id.clone()))
            .collect())
    }

    fn with_self(&self, instance: &str) -> Box<dyn EvalScope + '_> {
        Box::new(StoreScope {
            model: self.model,
            store: self.store,
            current: Some(instance.to_string()),
        })
    }
}

/// Scope for contract checks: `self` is a virtual instance whose attributes
/// come from an `after` snapshot, with `@pre` reads served from `before`.
/// For precondition checks there is no `before` and `@pre` is rejected.
pub struct SnapshotScope<'a> {
    attrs: &'a BTreeMap<String, AttrValue>,
    pre: Option<&'a BTreeMap<String, AttrValue>>,
}

impl<'a> SnapshotScope<'a> {
    pub fn new(
        attrs: &'a BTreeMap<String, AttrValue>,
        pre: Option<&'a BTreeMap<String, AttrValue>>,
    ) -> Self {
        Self { attrs, pre }
    }
}

const SNAPSHOT_SELF: &str = "<self>";

impl EvalScope for SnapshotScope<'_> {
    fn self_instance(&self) -> Option<Value> {
        Some(Value::Instance(SNAPSHOT_SELF.to_string()))
    }

    fn attr(&self, instance: &str, name: &str, at_pre: bool) -> Result<Value, EvalError> {
        let map = if at_pre {
            self.pre.ok_or(EvalError::PreOutsidePost)?
        } else {
            self.attrs
        };
        map.get(name).map(AttrValue::to_value).ok_or_else(|| EvalError::UnknownAttribute {
            subject: instance.to_string(),
            attribute: name.to_string(),
        })
    }

    fn all_instances(&self, _class: &str) -> Result<Vec<Value>, EvalError> {
        Err(EvalError::UnsupportedInScope("allInstances"))
    }

    fn with_self(&self, _instance: &str) -> Box<dyn EvalScope + '_> {
        Box::new(SnapshotScope { attrs: self.attrs, pre: self.pre })
    }
}
