use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Configuration, FeatureKind, FeatureModel, GroupType};

/// Validity rule a configuration can break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// Config refers to an id the model does not have.
    UnknownFeature,
    /// Config was written against another model version.
    ModelVersion,
    RootSelected,
    MandatoryChild,
    ParentSelected,
    AlternativeExactlyOne,
    OrAtLeastOne,
    /// Bindings given for a feature that is not selected.
    BindingUnselected,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::UnknownFeature => "unknown-feature",
            Rule::ModelVersion => "model-version",
            Rule::RootSelected => "root-selected",
            Rule::MandatoryChild => "mandatory-child",
            Rule::ParentSelected => "parent-selected",
            Rule::AlternativeExactlyOne => "alternative-exactly-one",
            Rule::OrAtLeastOne => "or-at-least-one",
            Rule::BindingUnselected => "binding-unselected",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    /// Offending node: the missing/extra child, the group owner, or the
    /// unknown id.
    pub node: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {:?}", self.rule, self.node)
    }
}

/// Non-empty list of violations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(transparent)]
pub struct Violations(pub Vec<Violation>);

impl Violations {
    pub fn has(&self, rule: Rule) -> bool {
        self.0.iter().any(|v| v.rule == rule)
    }
}

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("invalid configuration: ")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks `config` against every validity rule. Violations are reported in
/// a deterministic order: unknown ids and version first, then tree rules in
/// model order.
pub fn validate(model: &FeatureModel, config: &Configuration) -> Result<(), Violations> {
    let mut violations = Vec::new();
    if config.model_version != model.version() {
        violations.push(Violation {
            rule: Rule::ModelVersion,
            node: config.model_version.clone(),
        });
    }

    let mut selected = vec![false; model.len()];
    for id in &config.selected {
        match model.index_of(id) {
            Some(i) => selected[i] = true,
            None => violations.push(Violation {
                rule: Rule::UnknownFeature,
                node: id.clone(),
            }),
        }
    }
    for id in config.bindings.keys() {
        if !model.contains(id) {
            violations.push(Violation {
                rule: Rule::UnknownFeature,
                node: id.clone(),
            });
        } else if !config.selected.contains(id) {
            violations.push(Violation {
                rule: Rule::BindingUnselected,
                node: id.clone(),
            });
        }
    }

    check_tree(model, &selected, |rule, idx| {
        violations.push(Violation {
            rule,
            node: model.id_at(idx).to_string(),
        })
    });

    if violations.is_empty() {
        Ok(())
    } else {
        Err(Violations(violations))
    }
}

/// Tree rules over a selection mask indexed by preorder position.
pub(crate) fn check_tree(
    model: &FeatureModel,
    selected: &[bool],
    mut report: impl FnMut(Rule, usize),
) {
    if !selected[0] {
        report(Rule::RootSelected, 0);
    }
    for (idx, node) in model.indexed().iter().enumerate() {
        if !selected[idx] {
            continue;
        }
        if let Some(p) = node.parent {
            if !selected[p] {
                report(Rule::ParentSelected, idx);
            }
        }
        match node.group {
            GroupType::None => {
                for &c in &node.children {
                    if model.indexed()[c].kind == FeatureKind::Mandatory && !selected[c] {
                        report(Rule::MandatoryChild, c);
                    }
                }
            }
            GroupType::Alternative => {
                let n = node.children.iter().filter(|&&c| selected[c]).count();
                if n != 1 {
                    report(Rule::AlternativeExactlyOne, idx);
                }
            }
            GroupType::Or => {
                if !node.children.iter().any(|&c| selected[c]) {
                    report(Rule::OrAtLeastOne, idx);
                }
            }
        }
    }
}
