use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Decisions, InfluenceDiagram, ValueTree, Variable};

/// Parameters of a single-decision diagram with `n` independent binary
/// observations. `b` is the probability that a chance node is kept as a split
/// at each position of the value tree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneIdSpec {
    pub n: usize,
    pub b: f64,
    pub seed: u64,
}

enum Shape {
    Split(usize, Box<Shape>, Box<Shape>),
    Decision,
}

/// Draw order from a `ChaCha8Rng` seeded with `spec.seed`: one prior per chance
/// node in variable order, then one retention draw per tree position in
/// depth-first construction order, then the leaf values depth-first.
pub fn generate_1id(spec: &OneIdSpec) -> InfluenceDiagram {
    assert!(spec.n >= 1, "1-ID needs at least one chance node");
    assert!((0.0..=1.0).contains(&spec.b), "b must lie in [0, 1]");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let names: Vec<String> = (1..=spec.n).map(|i| format!("C{i}")).collect();
    let mut variables: Vec<Variable> = names.iter().map(|id| Variable::chance(id.clone(), &["0", "1"])).collect();
    variables.push(Variable::decision("D", &["d0", "d1"]));

    let mut cpts = BTreeMap::new();
    let mut parents = BTreeMap::new();
    for id in &names {
        let x: f64 = rng.random();
        cpts.insert(id.clone(), vec![vec![x, 1.0 - x]]);
        parents.insert(id.clone(), Vec::new());
    }

    let shape = build_shape(0, spec.n, spec.b, &mut rng);
    let value_tree = fill_leaves(&shape, &names, &mut rng);

    InfluenceDiagram {
        variables,
        parents,
        cpts,
        decisions: Decisions {
            order: vec!["D".into()],
            info_sets: BTreeMap::from([("D".to_string(), names.clone())]),
        },
        value_tree,
    }
}

fn build_shape(pos: usize, n: usize, b: f64, rng: &mut ChaCha8Rng) -> Shape {
    if pos == n {
        return Shape::Decision;
    }
    let keep = rng.random::<f64>() < b;
    if keep {
        let left = build_shape(pos + 1, n, b, rng);
        let right = build_shape(pos + 1, n, b, rng);
        Shape::Split(pos, Box::new(left), Box::new(right))
    } else {
        build_shape(pos + 1, n, b, rng)
    }
}

fn fill_leaves(shape: &Shape, names: &[String], rng: &mut ChaCha8Rng) -> ValueTree {
    match shape {
        Shape::Decision => {
            let d0 = rng.random();
            let d1 = rng.random();
            ValueTree::split("D", vec![ValueTree::leaf(d0), ValueTree::leaf(d1)])
        }
        Shape::Split(pos, l, r) => {
            let left = fill_leaves(l, names, rng);
            let right = fill_leaves(r, names, rng);
            ValueTree::split(names[*pos].clone(), vec![left, right])
        }
    }
}

/// Expected value-tree internal-node count for `n` chance nodes.
pub fn expected_internal_nodes(n: usize, b: f64) -> f64 {
    (0..n).fold(1.0, |below, _| b + (1.0 + b) * below)
}
