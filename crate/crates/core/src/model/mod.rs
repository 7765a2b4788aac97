//! Data model for discrete influence diagrams and tree-structured policies.
//!
//! Everything here is keyed by string variable ids so that the JSON files are
//! readable on their own. The inference layer compiles a diagram into an
//! index-based form before doing any arithmetic.
//!
//! Conventions shared by every file format:
//!
//! * state indices are 0-based and follow the order of a variable's `states`;
//! * a CPT is a list of rows, one per parent configuration, laid out in
//!   row-major order over the variable's declared parents with the last parent
//!   varying fastest.

mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use validate::{validate, validate_policy, ValidationReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Chance,
    Decision,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub id: String,
    pub kind: VarKind,
    pub states: Vec<String>,
}

impl Variable {
    pub fn chance(id: impl Into<String>, states: &[&str]) -> Self {
        Variable {
            id: id.into(),
            kind: VarKind::Chance,
            states: states.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn decision(id: impl Into<String>, states: &[&str]) -> Self {
        Variable {
            id: id.into(),
            kind: VarKind::Decision,
            states: states.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.states.len()
    }
}

/// Stage order of the decision nodes and the informational predecessors of each.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Decisions {
    pub order: Vec<String>,
    pub info_sets: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceDiagram {
    pub variables: Vec<Variable>,
    /// Parents of chance nodes. Decision parents are their info sets.
    pub parents: BTreeMap<String, Vec<String>>,
    pub cpts: BTreeMap<String, Vec<Vec<f64>>>,
    pub decisions: Decisions,
    pub value_tree: ValueTree,
}

impl InfluenceDiagram {
    pub fn variable(&self, id: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.id == id)
    }

    pub fn info_set(&self, decision: &str) -> &[String] {
        self.decisions
            .info_sets
            .get(decision)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn parents_of(&self, id: &str) -> &[String] {
        self.parents.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Number of full information states seen by `decision`: the product of
    /// the arities of its informational predecessors (saturating).
    pub fn information_state_count(&self, decision: &str) -> u128 {
        self.info_set(decision)
            .iter()
            .filter_map(|id| self.variable(id))
            .fold(1u128, |acc, v| acc.saturating_mul(v.arity() as u128))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagram serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::parse(path, e))
    }
}

/// Tree-structured value function: internal nodes split on a variable, leaves
/// carry the value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueTree {
    Split {
        split: String,
        children: Vec<ValueTree>,
    },
    Leaf {
        value: f64,
    },
}

impl ValueTree {
    pub fn leaf(value: f64) -> Self {
        ValueTree::Leaf { value }
    }

    pub fn split(var: impl Into<String>, children: Vec<ValueTree>) -> Self {
        ValueTree::Split {
            split: var.into(),
            children,
        }
    }

    pub fn internal_nodes(&self) -> usize {
        match self {
            ValueTree::Leaf { .. } => 0,
            ValueTree::Split { children, .. } => {
                1 + children.iter().map(ValueTree::internal_nodes).sum::<usize>()
            }
        }
    }

    /// Every variable named anywhere in the tree.
    pub fn variables(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        if let ValueTree::Split { split, children } = self {
            out.insert(split.as_str());
            for c in children {
                c.collect_vars(out);
            }
        }
    }

    /// Leaf values in depth-first order.
    pub fn leaf_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            match node {
                ValueTree::Leaf { value } => out.push(*value),
                ValueTree::Split { children, .. } => stack.extend(children.iter().rev()),
            }
        }
        out
    }
}

/// Follows the split variables of `tree` through `assignment` to a leaf.
pub fn eval_value_tree(tree: &ValueTree, assignment: &Context) -> Result<f64> {
    let mut node = tree;
    loop {
        match node {
            ValueTree::Leaf { value } => return Ok(*value),
            ValueTree::Split { split, children } => {
                let state = assignment
                    .get(split)
                    .ok_or_else(|| Error::MissingAssignment(split.clone()))?;
                node = children.get(state).ok_or_else(|| {
                    Error::Invalid(format!("state {state} out of range for `{split}`"))
                })?;
            }
        }
    }
}

/// A partial assignment of state indices to variables.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Context(BTreeMap<String, usize>);

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, var: &str) -> Option<usize> {
        self.0.get(var).copied()
    }

    pub fn insert(&mut self, var: impl Into<String>, state: usize) -> Option<usize> {
        self.0.insert(var.into(), state)
    }

    pub fn with(mut self, var: impl Into<String>, state: usize) -> Self {
        self.insert(var, state);
        self
    }

    pub fn contains(&self, var: &str) -> bool {
        self.0.contains_key(var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl<S: Into<String>> FromIterator<(S, usize)> for Context {
    fn from_iter<I: IntoIterator<Item = (S, usize)>>(iter: I) -> Self {
        Context(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

/// Cached inference results for a policy leaf: `p` is the marginal probability
/// of the leaf context, `v_star` and `v` the best and second-best action values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafStats {
    pub p: f64,
    pub v_star: f64,
    pub v: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyLeaf {
    pub action: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<LeafStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicyNode {
    Split {
        split: String,
        children: Vec<PolicyNode>,
    },
    Leaf(PolicyLeaf),
}

impl PolicyNode {
    pub fn leaf(action: usize) -> Self {
        PolicyNode::Leaf(PolicyLeaf {
            action,
            stats: None,
        })
    }
}

/// Decision tree for one decision node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyTree {
    pub decision: String,
    pub root: PolicyNode,
}

impl PolicyTree {
    /// Prescribed action for an assignment covering the split variables on
    /// the path taken.
    pub fn action_for(&self, assignment: &Context) -> Result<usize> {
        let mut node = &self.root;
        loop {
            match node {
                PolicyNode::Leaf(leaf) => return Ok(leaf.action),
                PolicyNode::Split { split, children } => {
                    let state = assignment
                        .get(split)
                        .ok_or_else(|| Error::MissingAssignment(split.clone()))?;
                    node = children.get(state).ok_or_else(|| {
                        Error::Invalid(format!("state {state} out of range for `{split}`"))
                    })?;
                }
            }
        }
    }

    /// Leaves with their path contexts, in depth-first order.
    pub fn leaves(&self) -> Vec<(Context, &PolicyLeaf)> {
        let mut out = Vec::new();
        let mut stack = vec![(Context::new(), &self.root)];
        while let Some((ctx, node)) = stack.pop() {
            match node {
                PolicyNode::Leaf(leaf) => out.push((ctx, leaf)),
                PolicyNode::Split { split, children } => {
                    for (state, child) in children.iter().enumerate().rev() {
                        stack.push((ctx.clone().with(split.clone(), state), child));
                    }
                }
            }
        }
        out
    }
}

/// One tree per decision node, in stage order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub trees: Vec<PolicyTree>,
}

impl Policy {
    pub fn tree(&self, decision: &str) -> Option<&PolicyTree> {
        self.trees.iter().find(|t| t.decision == decision)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeafEntry {
    pub decision: String,
    pub context: Context,
    pub leaf: PolicyLeaf,
}

/// Every leaf of every tree with its path context.
pub fn enumerate_leaves(policy: &Policy) -> Vec<LeafEntry> {
    policy
        .trees
        .iter()
        .flat_map(|tree| {
            tree.leaves().into_iter().map(|(context, leaf)| LeafEntry {
                decision: tree.decision.clone(),
                context,
                leaf: leaf.clone(),
            })
        })
        .collect()
}
