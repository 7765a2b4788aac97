//! Small hand-built diagrams used throughout the tests and examples.

use std::collections::BTreeMap;

use crate::model::{Decisions, InfluenceDiagram, ValueTree, Variable};

fn binary(id: &str) -> Variable {
    Variable::chance(id, &["0", "1"])
}

/// One chance node `C` with prior (0.3, 0.7) and a value that depends only on
/// the decision: d0 -> 0.2, d1 -> 0.8.
pub fn one_chance() -> InfluenceDiagram {
    InfluenceDiagram {
        variables: vec![binary("C"), Variable::decision("D", &["d0", "d1"])],
        parents: BTreeMap::from([("C".into(), vec![])]),
        cpts: BTreeMap::from([("C".into(), vec![vec![0.3, 0.7]])]),
        decisions: Decisions {
            order: vec!["D".into()],
            info_sets: BTreeMap::from([("D".into(), vec!["C".into()])]),
        },
        value_tree: ValueTree::split("D", vec![ValueTree::leaf(0.2), ValueTree::leaf(0.8)]),
    }
}

/// Two uniform binary observations; the value is 1 when `D` equals
/// `C1 xor C2` and 0 otherwise. Neither observation alone is informative.
pub fn exor() -> InfluenceDiagram {
    let d_given = |xor: usize| {
        ValueTree::split(
            "D",
            (0..2).map(|d| ValueTree::leaf(if d == xor { 1.0 } else { 0.0 })).collect(),
        )
    };
    InfluenceDiagram {
        variables: vec![binary("C1"), binary("C2"), Variable::decision("D", &["d0", "d1"])],
        parents: BTreeMap::from([("C1".into(), vec![]), ("C2".into(), vec![])]),
        cpts: BTreeMap::from([
            ("C1".into(), vec![vec![0.5, 0.5]]),
            ("C2".into(), vec![vec![0.5, 0.5]]),
        ]),
        decisions: Decisions {
            order: vec!["D".into()],
            info_sets: BTreeMap::from([("D".into(), vec!["C1".into(), "C2".into()])]),
        },
        value_tree: ValueTree::split(
            "C1",
            (0..2)
                .map(|c1| ValueTree::split("C2", (0..2).map(|c2| d_given(c1 ^ c2)).collect()))
                .collect(),
        ),
    }
}

/// Two decisions. `D1` sees `C1`; `C2` depends on `D1`; `D2` sees `C1`, `D1`
/// and `C2`. The value depends on `C1`, `C2` and `D2`.
pub fn two_stage() -> InfluenceDiagram {
    InfluenceDiagram {
        variables: vec![
            binary("C1"),
            Variable::decision("D1", &["a", "b"]),
            binary("C2"),
            Variable::decision("D2", &["x", "y"]),
        ],
        parents: BTreeMap::from([("C1".into(), vec![]), ("C2".into(), vec!["D1".into()])]),
        cpts: BTreeMap::from([
            ("C1".into(), vec![vec![0.6, 0.4]]),
            ("C2".into(), vec![vec![0.5, 0.5], vec![0.9, 0.1]]),
        ]),
        decisions: Decisions {
            order: vec!["D1".into(), "D2".into()],
            info_sets: BTreeMap::from([
                ("D1".into(), vec!["C1".into()]),
                ("D2".into(), vec!["C1".into(), "D1".into(), "C2".into()]),
            ]),
        },
        value_tree: ValueTree::split(
            "C1",
            vec![
                ValueTree::split(
                    "C2",
                    vec![
                        ValueTree::split("D2", vec![ValueTree::leaf(0.9), ValueTree::leaf(0.1)]),
                        ValueTree::split("D2", vec![ValueTree::leaf(0.2), ValueTree::leaf(0.6)]),
                    ],
                ),
                ValueTree::split(
                    "C2",
                    vec![
                        ValueTree::split("D2", vec![ValueTree::leaf(0.3), ValueTree::leaf(0.7)]),
                        ValueTree::split("D2", vec![ValueTree::leaf(1.0), ValueTree::leaf(0.0)]),
                    ],
                ),
            ],
        ),
    }
}
