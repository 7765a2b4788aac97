use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use super::{InfluenceDiagram, Policy, PolicyNode, ValueTree, VarKind};

const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Violated invariants of a diagram. `errors` is empty iff the diagram is
/// well-formed; `warnings` never make a diagram invalid.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }
}

pub fn validate(diagram: &InfluenceDiagram) -> ValidationReport {
    let mut report = ValidationReport::default();
    let errors = &mut report.errors;

    let mut kinds: HashMap<&str, (VarKind, usize)> = HashMap::new();
    for v in &diagram.variables {
        if kinds.insert(&v.id, (v.kind, v.arity())).is_some() {
            errors.push(format!("duplicate variable id `{}`", v.id));
        }
        if v.arity() < 2 {
            errors.push(format!("variable `{}` has fewer than 2 states", v.id));
        }
    }

    // chance parents and CPTs
    for (child, parents) in &diagram.parents {
        match kinds.get(child.as_str()) {
            None => errors.push(format!("parents listed for unknown variable `{child}`")),
            Some((VarKind::Decision, _)) => errors.push(format!(
                "decision `{child}` has explicit parents; use its info set instead"
            )),
            _ => {}
        }
        for p in parents {
            if !kinds.contains_key(p.as_str()) {
                errors.push(format!("`{child}` has unknown parent `{p}`"));
            }
        }
    }
    for v in diagram.variables.iter().filter(|v| v.kind == VarKind::Chance) {
        let Some(rows) = diagram.cpts.get(&v.id) else {
            errors.push(format!("chance variable `{}` has no CPT", v.id));
            continue;
        };
        let expected_rows: usize = diagram
            .parents_of(&v.id)
            .iter()
            .map(|p| kinds.get(p.as_str()).map_or(1, |k| k.1))
            .product();
        if rows.len() != expected_rows {
            errors.push(format!(
                "CPT of `{}` has {} rows, expected {expected_rows}",
                v.id,
                rows.len()
            ));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != v.arity() {
                errors.push(format!(
                    "CPT of `{}` row {r} has {} entries, expected {}",
                    v.id,
                    row.len(),
                    v.arity()
                ));
            }
            if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
                errors.push(format!("CPT of `{}` row {r} has a negative or non-finite entry", v.id));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                errors.push(format!("CPT of `{}` row {r} sums to {sum}", v.id));
            }
        }
    }
    for id in diagram.cpts.keys() {
        match kinds.get(id.as_str()) {
            Some((VarKind::Chance, _)) => {}
            _ => errors.push(format!("CPT given for `{id}`, which is not a chance variable")),
        }
    }

    // decisions
    let mut seen = BTreeSet::new();
    for d in &diagram.decisions.order {
        match kinds.get(d.as_str()) {
            Some((VarKind::Decision, _)) => {}
            _ => errors.push(format!("stage order names `{d}`, which is not a decision")),
        }
        if !seen.insert(d.as_str()) {
            errors.push(format!("decision `{d}` appears twice in the stage order"));
        }
    }
    for v in diagram.variables.iter().filter(|v| v.kind == VarKind::Decision) {
        if !seen.contains(v.id.as_str()) {
            errors.push(format!("decision `{}` missing from the stage order", v.id));
        }
    }
    for (d, info) in &diagram.decisions.info_sets {
        if !seen.contains(d.as_str()) {
            errors.push(format!("info set given for `{d}`, which is not an ordered decision"));
        }
        for p in info {
            if !kinds.contains_key(p.as_str()) {
                errors.push(format!("info set of `{d}` names unknown variable `{p}`"));
            }
        }
    }
    for (k, d) in diagram.decisions.order.iter().enumerate() {
        let info: BTreeSet<&str> = diagram.info_set(d).iter().map(String::as_str).collect();
        for earlier in &diagram.decisions.order[..k] {
            if !info.contains(earlier.as_str()) {
                report
                    .warnings
                    .push(format!("no-forgetting: `{d}` does not observe earlier decision `{earlier}`"));
            } else {
                for x in diagram.info_set(earlier) {
                    if !info.contains(x.as_str()) {
                        report.warnings.push(format!(
                            "no-forgetting: `{d}` does not observe `{x}` seen by `{earlier}`"
                        ));
                    }
                }
            }
        }
    }

    if let Some(cycle_at) = find_cycle(diagram) {
        report.errors.push(format!("parent graph has a cycle through `{cycle_at}`"));
    }

    check_value_tree(&diagram.value_tree, &kinds, &mut Vec::new(), &mut report.errors);
    report
}

fn find_cycle(diagram: &InfluenceDiagram) -> Option<String> {
    let mut edges: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (child, parents) in &diagram.parents {
        edges.entry(child).or_default().extend(parents.iter().map(String::as_str));
    }
    for (d, info) in &diagram.decisions.info_sets {
        edges.entry(d).or_default().extend(info.iter().map(String::as_str));
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: HashMap<&str, u8> = HashMap::new();
    fn visit<'a>(
        node: &'a str,
        edges: &BTreeMap<&'a str, Vec<&'a str>>,
        state: &mut HashMap<&'a str, u8>,
    ) -> Option<&'a str> {
        match state.get(node) {
            Some(1) => return Some(node),
            Some(2) => return None,
            _ => {}
        }
        state.insert(node, 1);
        for p in edges.get(node).into_iter().flatten() {
            if let Some(c) = visit(p, edges, state) {
                return Some(c);
            }
        }
        state.insert(node, 2);
        None
    }
    diagram
        .variables
        .iter()
        .find_map(|v| visit(&v.id, &edges, &mut state))
        .map(str::to_string)
}

fn check_value_tree<'a>(
    tree: &'a ValueTree,
    kinds: &HashMap<&str, (VarKind, usize)>,
    path: &mut Vec<&'a str>,
    errors: &mut Vec<String>,
) {
    match tree {
        ValueTree::Leaf { value } => {
            if !value.is_finite() {
                errors.push(format!("value tree leaf {value} is not finite"));
            }
        }
        ValueTree::Split { split, children } => {
            let Some(&(_, arity)) = kinds.get(split.as_str()) else {
                errors.push(format!("value tree references unknown variable `{split}`"));
                return;
            };
            if path.contains(&split.as_str()) {
                errors.push(format!("value tree splits on `{split}` twice on one path"));
            }
            if children.len() != arity {
                errors.push(format!(
                    "value tree split on `{split}` has {} children, expected {arity}",
                    children.len()
                ));
            }
            path.push(split);
            for c in children {
                check_value_tree(c, kinds, path, errors);
            }
            path.pop();
        }
    }
}

/// Structural checks of a policy against its diagram; empty iff well-formed.
pub fn validate_policy(diagram: &InfluenceDiagram, policy: &Policy) -> Vec<String> {
    let mut errors = Vec::new();
    for d in &diagram.decisions.order {
        let count = policy.trees.iter().filter(|t| &t.decision == d).count();
        if count != 1 {
            errors.push(format!("policy has {count} trees for decision `{d}`"));
        }
    }
    for tree in &policy.trees {
        let Some(dvar) = diagram.variable(&tree.decision) else {
            errors.push(format!("policy tree for unknown decision `{}`", tree.decision));
            continue;
        };
        let info: BTreeSet<&str> = diagram.info_set(&tree.decision).iter().map(String::as_str).collect();
        let mut stack: Vec<(&PolicyNode, Vec<&str>)> = vec![(&tree.root, Vec::new())];
        while let Some((node, path)) = stack.pop() {
            match node {
                PolicyNode::Leaf(leaf) => {
                    if leaf.action >= dvar.arity() {
                        errors.push(format!(
                            "tree `{}` prescribes action {} out of range",
                            tree.decision, leaf.action
                        ));
                    }
                }
                PolicyNode::Split { split, children } => {
                    if !info.contains(split.as_str()) {
                        errors.push(format!(
                            "tree `{}` splits on `{split}`, not an informational predecessor",
                            tree.decision
                        ));
                    }
                    if path.contains(&split.as_str()) {
                        errors.push(format!("tree `{}` splits on `{split}` twice", tree.decision));
                    }
                    let arity = diagram.variable(split).map_or(0, |v| v.arity());
                    if children.len() != arity {
                        errors.push(format!(
                            "tree `{}` split on `{split}` has {} children, expected {arity}",
                            tree.decision,
                            children.len()
                        ));
                    }
                    for c in children {
                        let mut p = path.clone();
                        p.push(split);
                        stack.push((c, p));
                    }
                }
            }
        }
    }
    errors
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{generate_1id, OneIdSpec};

    fn one_id_two() -> InfluenceDiagram {
        generate_1id(&OneIdSpec { n: 2, b: 0.7794, seed: 3 })
    }

    #[test]
    fn generated_diagram_is_clean() {
        assert!(validate(&one_id_two()).is_empty());
    }

    #[test]
    fn bad_row_sum_is_named() {
        let mut d = one_id_two();
        d.cpts.insert("C1".into(), vec![vec![0.4, 0.5]]);
        let report = validate(&d);
        assert!(!report.is_valid());
        assert!(report.errors.iter().any(|e| e.contains("C1") && e.contains("row 0")));
    }

    #[test]
    fn unknown_value_tree_variable_is_named() {
        let mut d = one_id_two();
        d.value_tree = ValueTree::split("X9", vec![ValueTree::leaf(0.0), ValueTree::leaf(1.0)]);
        let report = validate(&d);
        assert!(report.errors.iter().any(|e| e.contains("X9")));
    }

    #[test]
    fn cycle_is_detected() {
        let mut d = one_id_two();
        d.parents.insert("C1".into(), vec!["C2".into()]);
        d.parents.insert("C2".into(), vec!["C1".into()]);
        d.cpts.insert("C1".into(), vec![vec![0.5, 0.5]; 2]);
        d.cpts.insert("C2".into(), vec![vec![0.5, 0.5]; 2]);
        assert!(validate(&d).errors.iter().any(|e| e.contains("cycle")));
    }

    #[test]
    fn forgetting_only_warns() {
        let mut d = crate::generators::fixtures::exor();
        d.variables.push(super::super::Variable::decision("D2", &["a", "b"]));
        d.decisions.order.push("D2".into());
        d.decisions.info_sets.insert("D2".into(), vec!["C1".into()]);
        let report = validate(&d);
        assert!(report.is_valid(), "{:?}", report.errors);
        assert!(!report.warnings.is_empty());
    }

    #[test]
    fn policy_split_outside_info_set() {
        let d = one_id_two();
        let policy = Policy {
            trees: vec![super::super::PolicyTree {
                decision: "D".into(),
                root: PolicyNode::Split {
                    split: "D".into(),
                    children: vec![PolicyNode::leaf(0), PolicyNode::leaf(2)],
                },
            }],
        };
        let errs = validate_policy(&d, &policy);
        assert!(errs.iter().any(|e| e.contains("not an informational predecessor")));
        assert!(errs.iter().any(|e| e.contains("out of range")));
    }
}
