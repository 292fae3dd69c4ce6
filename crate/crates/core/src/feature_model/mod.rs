//! FODA feature models.
//!
//! A model is a tree of features. Each node is mandatory or optional with
//! respect to its parent, and may declare a group over its children:
//! an *alternative* group selects exactly one child, an *or* group at least
//! one. Children of a grouped node are always optional; the group decides.
//!
//! Parameter-valued choices (activation function, hidden-layer width) are
//! alternative groups whose leaves carry a `params` payload, so a
//! [`Configuration`] is just a set of selected ids plus optional parameter
//! overrides (`bindings`).

mod diff;
mod enumerate;
mod search_space;
mod smart_light;
mod validate;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use diff::{diff, BindingChange, ConfigDiff, DiffError, Switch};
pub use enumerate::{count_configurations, enumerate, EnumerateError};
pub use search_space::{derive_search_space, SearchSpace, SearchSpaceError};
pub use smart_light::{expert_configuration, smart_light_model, MODEL_VERSION};
pub use validate::{validate, Rule, Violation, Violations};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FeatureKind {
    Mandatory,
    Optional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GroupType {
    None,
    /// Exactly one child.
    Alternative,
    /// At least one child.
    Or,
}

/// Variability dimension a feature belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Domain {
    Body,
    Behavior,
    Neural,
}

/// Scalar parameter value attached to a feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Real(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            ParamValue::Int(i) => Some(i),
            _ => None,
        }
    }
}

impl From<&str> for ParamValue {
    fn from(s: &str) -> Self {
        ParamValue::Text(s.to_string())
    }
}

impl From<i64> for ParamValue {
    fn from(i: i64) -> Self {
        ParamValue::Int(i)
    }
}

impl From<f64> for ParamValue {
    fn from(r: f64) -> Self {
        ParamValue::Real(r)
    }
}

pub type Params = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeatureNode {
    pub id: String,
    pub name: String,
    pub kind: FeatureKind,
    pub group_type: GroupType,
    pub domain: Domain,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub children: Vec<FeatureNode>,
}

impl FeatureNode {
    pub fn new(id: &str, kind: FeatureKind, domain: Domain) -> Self {
        FeatureNode {
            id: id.to_string(),
            name: id.to_string(),
            kind,
            group_type: GroupType::None,
            domain,
            params: Params::new(),
            children: Vec::new(),
        }
    }

    pub fn mandatory(id: &str, domain: Domain) -> Self {
        Self::new(id, FeatureKind::Mandatory, domain)
    }

    pub fn optional(id: &str, domain: Domain) -> Self {
        Self::new(id, FeatureKind::Optional, domain)
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn group(mut self, group: GroupType) -> Self {
        self.group_type = group;
        self
    }

    pub fn param(mut self, key: &str, value: impl Into<ParamValue>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn child(mut self, child: FeatureNode) -> Self {
        self.children.push(child);
        self
    }

    pub fn children(mut self, children: impl IntoIterator<Item = FeatureNode>) -> Self {
        self.children.extend(children);
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("feature id {0:?} is used more than once")]
    DuplicateId(String),
    #[error("feature ids must be non-empty")]
    EmptyId,
    #[error("root feature {0:?} must be mandatory")]
    RootNotMandatory(String),
    #[error("feature {0:?} declares a group but has fewer than two children")]
    GroupTooSmall(String),
    #[error("feature {0:?} is a group member and must be optional")]
    GroupMemberMandatory(String),
}

/// Flattened view of one node, in preorder position.
#[derive(Debug, Clone)]
pub(crate) struct IndexedNode {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub kind: FeatureKind,
    pub group: GroupType,
}

/// A well-formed feature tree. Immutable once built.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct FeatureModel {
    version: String,
    root: FeatureNode,
    nodes: Vec<IndexedNode>,
    /// Preorder ids, index-aligned with `nodes`.
    ids: Vec<String>,
    by_id: HashMap<String, usize>,
}

impl PartialEq for FeatureModel {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version && self.root == other.root
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: String,
    root: FeatureNode,
}

impl TryFrom<ModelFile> for FeatureModel {
    type Error = ModelError;

    fn try_from(f: ModelFile) -> Result<Self, ModelError> {
        FeatureModel::new(f.version, f.root)
    }
}

impl From<FeatureModel> for ModelFile {
    fn from(m: FeatureModel) -> Self {
        ModelFile {
            version: m.version,
            root: m.root,
        }
    }
}

impl FeatureModel {
    pub fn new(version: impl Into<String>, root: FeatureNode) -> Result<Self, ModelError> {
        if root.kind != FeatureKind::Mandatory {
            return Err(ModelError::RootNotMandatory(root.id.clone()));
        }
        let mut nodes = Vec::new();
        let mut ids = Vec::new();
        let mut by_id = HashMap::new();
        index_node(&root, None, &mut nodes, &mut ids, &mut by_id)?;
        Ok(FeatureModel {
            version: version.into(),
            root,
            nodes,
            ids,
            by_id,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn root(&self) -> &FeatureNode {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    /// Feature ids in preorder ("model order").
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.ids.iter().map(String::as_str)
    }

    pub fn node(&self, id: &str) -> Option<&FeatureNode> {
        fn find<'a>(n: &'a FeatureNode, id: &str) -> Option<&'a FeatureNode> {
            if n.id == id {
                return Some(n);
            }
            n.children.iter().find_map(|c| find(c, id))
        }
        find(&self.root, id)
    }

    /// Nodes in preorder.
    pub fn nodes(&self) -> Vec<&FeatureNode> {
        fn walk<'a>(n: &'a FeatureNode, out: &mut Vec<&'a FeatureNode>) {
            out.push(n);
            for c in &n.children {
                walk(c, out);
            }
        }
        let mut out = Vec::with_capacity(self.nodes.len());
        walk(&self.root, &mut out);
        out
    }

    pub fn parent_of(&self, id: &str) -> Option<&str> {
        let idx = *self.by_id.get(id)?;
        self.nodes[idx].parent.map(|p| self.ids[p].as_str())
    }

    pub(crate) fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub(crate) fn indexed(&self) -> &[IndexedNode] {
        &self.nodes
    }

    pub(crate) fn id_at(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    /// Canonical JSON text: pretty-printed with sorted keys.
    pub fn to_canonical_json(&self) -> String {
        canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn index_node(
    node: &FeatureNode,
    parent: Option<usize>,
    nodes: &mut Vec<IndexedNode>,
    ids: &mut Vec<String>,
    by_id: &mut HashMap<String, usize>,
) -> Result<usize, ModelError> {
    if node.id.is_empty() {
        return Err(ModelError::EmptyId);
    }
    if node.group_type != GroupType::None {
        if node.children.len() < 2 {
            return Err(ModelError::GroupTooSmall(node.id.clone()));
        }
        if let Some(c) = node
            .children
            .iter()
            .find(|c| c.kind == FeatureKind::Mandatory)
        {
            return Err(ModelError::GroupMemberMandatory(c.id.clone()));
        }
    }
    let idx = nodes.len();
    if by_id.insert(node.id.clone(), idx).is_some() {
        return Err(ModelError::DuplicateId(node.id.clone()));
    }
    ids.push(node.id.clone());
    nodes.push(IndexedNode {
        parent,
        children: Vec::new(),
        kind: node.kind,
        group: node.group_type,
    });
    for child in &node.children {
        let c = index_node(child, Some(idx), nodes, ids, by_id)?;
        nodes[idx].children.push(c);
    }
    Ok(idx)
}

/// A selection of features plus parameter overrides, tied to one model
/// version.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Configuration {
    pub model_version: String,
    pub selected: BTreeSet<String>,
    #[serde(default)]
    pub bindings: BTreeMap<String, Params>,
}

impl Configuration {
    pub fn new<I, S>(model_version: &str, selected: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Configuration {
            model_version: model_version.to_string(),
            selected: selected.into_iter().map(Into::into).collect(),
            bindings: BTreeMap::new(),
        }
    }

    pub fn is_selected(&self, id: &str) -> bool {
        self.selected.contains(id)
    }

    pub fn with(mut self, id: &str) -> Self {
        self.selected.insert(id.to_string());
        self
    }

    pub fn without(mut self, id: &str) -> Self {
        self.selected.remove(id);
        self.bindings.remove(id);
        self
    }

    pub fn bind(mut self, id: &str, key: &str, value: impl Into<ParamValue>) -> Self {
        self.bindings
            .entry(id.to_string())
            .or_default()
            .insert(key.to_string(), value.into());
        self
    }

    /// Selects `child` within the alternative group `group`, deselecting its
    /// siblings (and their subtrees).
    pub fn choose(
        mut self,
        model: &FeatureModel,
        group: &str,
        child: &str,
    ) -> Result<Self, ChooseError> {
        let node = model
            .node(group)
            .ok_or_else(|| ChooseError::UnknownGroup(group.to_string()))?;
        if node.group_type != GroupType::Alternative {
            return Err(ChooseError::NotAlternative(group.to_string()));
        }
        if !node.children.iter().any(|c| c.id == child) {
            return Err(ChooseError::NotAMember {
                group: group.to_string(),
                child: child.to_string(),
            });
        }
        for sibling in &node.children {
            if sibling.id != child {
                for id in subtree_ids(sibling) {
                    self = self.without(&id);
                }
            }
        }
        Ok(self.with(child))
    }

    /// Effective parameters of a selected feature: model params overlaid with
    /// this configuration's bindings.
    pub fn effective_params(&self, node: &FeatureNode) -> Params {
        let mut p = node.params.clone();
        if let Some(b) = self.bindings.get(&node.id) {
            p.extend(b.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
        p
    }

    pub fn to_canonical_json(&self) -> String {
        canonical_json(self)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChooseError {
    #[error("unknown feature group {0:?}")]
    UnknownGroup(String),
    #[error("feature {0:?} is not an alternative group")]
    NotAlternative(String),
    #[error("{child:?} is not a member of group {group:?}")]
    NotAMember { group: String, child: String },
}

fn subtree_ids(node: &FeatureNode) -> Vec<String> {
    let mut out = vec![node.id.clone()];
    for c in &node.children {
        out.extend(subtree_ids(c));
    }
    out
}

/// Serializes through `serde_json::Value` (whose maps are ordered) so object
/// keys come out sorted.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("model types always serialize");
    serde_json::to_string_pretty(&v).expect("values always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_malformed_trees() {
        let dup = FeatureNode::mandatory("r", Domain::Body)
            .child(FeatureNode::optional("a", Domain::Body))
            .child(FeatureNode::optional("a", Domain::Body));
        assert_eq!(
            FeatureModel::new("1", dup).unwrap_err(),
            ModelError::DuplicateId("a".into())
        );

        let small = FeatureNode::mandatory("r", Domain::Body)
            .group(GroupType::Or)
            .child(FeatureNode::optional("a", Domain::Body));
        assert_eq!(
            FeatureModel::new("1", small).unwrap_err(),
            ModelError::GroupTooSmall("r".into())
        );

        let root = FeatureNode::optional("r", Domain::Body);
        assert!(matches!(
            FeatureModel::new("1", root),
            Err(ModelError::RootNotMandatory(_))
        ));

        let grouped = FeatureNode::mandatory("r", Domain::Body)
            .group(GroupType::Alternative)
            .child(FeatureNode::mandatory("a", Domain::Body))
            .child(FeatureNode::optional("b", Domain::Body));
        assert!(matches!(
            FeatureModel::new("1", grouped),
            Err(ModelError::GroupMemberMandatory(_))
        ));
    }

    #[test]
    fn json_round_trip_is_byte_stable() {
        let m = smart_light_model();
        let text = m.to_canonical_json();
        let back = FeatureModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_canonical_json(), text);
        assert!(text.contains("\"groupType\": \"alternative\""));

        let c = expert_configuration();
        let text = c.to_canonical_json();
        let back: Configuration = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_canonical_json(), text);
        assert!(text.contains("\"modelVersion\""));
    }

    #[test]
    fn malformed_model_file_is_rejected() {
        let text = r#"{"version":"1","root":{"id":"r","name":"r","kind":"optional","groupType":"none","domain":"body"}}"#;
        assert!(FeatureModel::from_json(text).is_err());
    }

    #[test]
    fn choose_swaps_alternatives() {
        let m = smart_light_model();
        let c = expert_configuration()
            .choose(&m, "activation", "binaryThreshold")
            .unwrap();
        assert!(c.is_selected("binaryThreshold"));
        assert!(!c.is_selected("sigmoid"));
        assert!(validate(&m, &c).is_ok());
        assert!(expert_configuration()
            .choose(&m, "sensors", "motionSensor")
            .is_err());
        assert!(expert_configuration()
            .choose(&m, "activation", "five")
            .is_err());
    }

    #[test]
    fn param_values_parse_by_shape() {
        let p: Params = serde_json::from_str(r#"{"a":5,"b":0.5,"c":"x","d":true}"#).unwrap();
        assert_eq!(p["a"], ParamValue::Int(5));
        assert_eq!(p["b"], ParamValue::Real(0.5));
        assert_eq!(p["c"], ParamValue::Text("x".into()));
        assert_eq!(p["d"], ParamValue::Bool(true));
    }
}
