use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Configuration, FeatureModel, GroupType, Params};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiffError {
    #[error("configurations target model versions {a:?} and {b:?}; expected {model:?}")]
    VersionMismatch { a: String, b: String, model: String },
}

/// An alternative group whose chosen member changed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Switch {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingChange {
    pub before: Option<Params>,
    pub after: Option<Params>,
}

/// Difference between two configurations of the same model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConfigDiff {
    pub added: BTreeSet<String>,
    pub removed: BTreeSet<String>,
    /// Alternative groups (by group id) whose selected member changed. This
    /// summarizes `added`/`removed`; it carries no extra information.
    pub switched: BTreeMap<String, Switch>,
    pub bindings: BTreeMap<String, BindingChange>,
}

impl ConfigDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.bindings.is_empty()
    }

    /// Ids of everything that changed value: switched groups and features
    /// whose bindings differ.
    pub fn changed(&self) -> BTreeSet<String> {
        self.switched
            .keys()
            .chain(self.bindings.keys())
            .cloned()
            .collect()
    }

    /// Applies this diff to `base`, producing the diff's target.
    pub fn apply(&self, base: &Configuration) -> Configuration {
        let mut out = base.clone();
        for id in &self.removed {
            out.selected.remove(id);
        }
        out.selected.extend(self.added.iter().cloned());
        for (id, change) in &self.bindings {
            match &change.after {
                Some(p) => {
                    out.bindings.insert(id.clone(), p.clone());
                }
                None => {
                    out.bindings.remove(id);
                }
            }
        }
        out
    }
}

pub fn diff(
    model: &FeatureModel,
    a: &Configuration,
    b: &Configuration,
) -> Result<ConfigDiff, DiffError> {
    if a.model_version != model.version() || b.model_version != model.version() {
        return Err(DiffError::VersionMismatch {
            a: a.model_version.clone(),
            b: b.model_version.clone(),
            model: model.version().to_string(),
        });
    }
    let added: BTreeSet<String> = b.selected.difference(&a.selected).cloned().collect();
    let removed: BTreeSet<String> = a.selected.difference(&b.selected).cloned().collect();

    let mut switched = BTreeMap::new();
    for node in model.nodes() {
        if node.group_type != GroupType::Alternative {
            continue;
        }
        let chosen = |c: &Configuration| -> Option<String> {
            let mut it = node.children.iter().filter(|k| c.is_selected(&k.id));
            match (it.next(), it.next()) {
                (Some(k), None) => Some(k.id.clone()),
                _ => None,
            }
        };
        if let (Some(from), Some(to)) = (chosen(a), chosen(b)) {
            if from != to {
                switched.insert(node.id.clone(), Switch { from, to });
            }
        }
    }

    let mut bindings = BTreeMap::new();
    let keys: BTreeSet<&String> = a.bindings.keys().chain(b.bindings.keys()).collect();
    for id in keys {
        let before = a.bindings.get(id);
        let after = b.bindings.get(id);
        if before != after {
            bindings.insert(
                id.clone(),
                BindingChange {
                    before: before.cloned(),
                    after: after.cloned(),
                },
            );
        }
    }

    Ok(ConfigDiff {
        added,
        removed,
        switched,
        bindings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_model::{enumerate, expert_configuration, smart_light_model};

    #[test]
    fn identity_is_empty() {
        let m = smart_light_model();
        let a = expert_configuration();
        let d = diff(&m, &a, &a).unwrap();
        assert!(d.is_empty());
        assert!(d.changed().is_empty());
    }

    #[test]
    fn activation_swap_reports_activation() {
        let m = smart_light_model();
        let a = expert_configuration();
        let b = a
            .clone()
            .choose(&m, "activation", "binaryThreshold")
            .unwrap();
        let d = diff(&m, &a, &b).unwrap();
        assert_eq!(d.changed(), BTreeSet::from(["activation".to_string()]));
        assert_eq!(d.switched["activation"].from, "sigmoid");
        assert_eq!(d.apply(&a), b);
    }

    #[test]
    fn hidden_max_swap_reports_hidden_max() {
        let m = smart_light_model();
        let a = expert_configuration();
        let b = a.clone().choose(&m, "hiddenMax", "two").unwrap();
        let d = diff(&m, &a, &b).unwrap();
        assert_eq!(d.changed(), BTreeSet::from(["hiddenMax".to_string()]));
    }

    #[test]
    fn binding_changes_round_trip() {
        let m = smart_light_model();
        let a = expert_configuration().bind("decision", "pruneThreshold", 0.3);
        let b = expert_configuration().bind("sigmoid", "note", "x");
        let d = diff(&m, &a, &b).unwrap();
        assert_eq!(d.bindings.len(), 2);
        assert_eq!(d.apply(&a), b);
    }

    #[test]
    fn different_versions_are_rejected() {
        let m = smart_light_model();
        let a = expert_configuration();
        let mut b = a.clone();
        b.model_version = "other".into();
        assert!(diff(&m, &a, &b).is_err());
    }

    #[test]
    fn apply_reproduces_every_pair_of_a_small_model() {
        use crate::feature_model::{Domain, FeatureNode};
        let root = FeatureNode::mandatory("r", Domain::Body)
            .child(
                FeatureNode::optional("g", Domain::Body)
                    .group(GroupType::Or)
                    .child(FeatureNode::optional("a", Domain::Body))
                    .child(FeatureNode::optional("b", Domain::Body)),
            )
            .child(
                FeatureNode::mandatory("x", Domain::Neural)
                    .group(GroupType::Alternative)
                    .child(FeatureNode::optional("x1", Domain::Neural))
                    .child(FeatureNode::optional("x2", Domain::Neural)),
            );
        let m = FeatureModel::new("small", root).unwrap();
        let all = enumerate(&m, 100).unwrap();
        assert_eq!(all.len(), 8);
        for a in &all {
            for b in &all {
                let d = diff(&m, a, b).unwrap();
                assert_eq!(&d.apply(a), b);
                assert_eq!(d.is_empty(), a == b);
            }
        }
    }
}
