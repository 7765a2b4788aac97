//! Brute-force reference: enumerates every joint assignment of a diagram.
//! Shares nothing with the elimination engine beyond the data model.

#![allow(dead_code)]

use inforefine::model::{eval_value_tree, Context, InfluenceDiagram, Policy, PolicyNode, PolicyTree, VarKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Calls `f` with every full assignment and its chance-node probability.
fn for_each_joint(d: &InfluenceDiagram, mut f: impl FnMut(&Context, f64)) {
    let arity: Vec<usize> = d.variables.iter().map(|v| v.arity()).collect();
    let total: usize = arity.iter().product();
    assert!(total <= 1 << 22, "too many joint states for enumeration");
    let mut state = vec![0usize; arity.len()];
    for _ in 0..total {
        let mut ctx = Context::new();
        for (v, s) in d.variables.iter().zip(&state) {
            ctx.insert(v.id.clone(), *s);
        }
        let mut p = 1.0;
        for v in d.variables.iter().filter(|v| v.kind == VarKind::Chance) {
            let mut row = 0;
            for parent in d.parents_of(&v.id) {
                row = row * d.variable(parent).unwrap().arity() + ctx.get(parent).unwrap();
            }
            p *= d.cpts[&v.id][row][ctx.get(&v.id).unwrap()];
        }
        f(&ctx, p);
        for i in (0..state.len()).rev() {
            state[i] += 1;
            if state[i] < arity[i] {
                break;
            }
            state[i] = 0;
        }
    }
}

fn follows(policy: &Policy, ctx: &Context) -> bool {
    policy.trees.iter().all(|t| t.action_for(ctx).unwrap() == ctx.get(&t.decision).unwrap())
}

fn consistent(ctx: &Context, partial: &Context) -> bool {
    partial.iter().all(|(v, s)| ctx.get(v) == Some(s))
}

pub fn eval_policy(d: &InfluenceDiagram, policy: &Policy) -> f64 {
    let mut ev = 0.0;
    for_each_joint(d, |ctx, p| {
        if p > 0.0 && follows(policy, ctx) {
            ev += p * eval_value_tree(&d.value_tree, ctx).unwrap();
        }
    });
    ev
}

/// Probability of `context` when every decision with a tree in `policy`
/// follows it. Decisions without a tree must not be relevant to `context`.
pub fn context_probability(d: &InfluenceDiagram, policy: &Policy, context: &Context) -> f64 {
    let mut total = 0.0;
    let free = d.decisions.order.iter().filter(|x| policy.tree(x).is_none()).count();
    let arity_product: usize =
        d.decisions.order.iter().filter(|x| policy.tree(x).is_none()).map(|x| d.variable(x).unwrap().arity()).product();
    for_each_joint(d, |ctx, p| {
        if consistent(ctx, context) && follows(policy, ctx) {
            total += p;
        }
    });
    if free > 0 {
        total / arity_product as f64
    } else {
        total
    }
}

/// Optimal value of a single-decision diagram whose decision observes every
/// chance node listed in its info set.
pub fn single_stage_optimum(d: &InfluenceDiagram) -> f64 {
    assert_eq!(d.decisions.order.len(), 1);
    let dec = &d.decisions.order[0];
    let info = d.info_set(dec).to_vec();
    let mut by_context: std::collections::BTreeMap<Vec<usize>, Vec<f64>> = Default::default();
    let arity = d.variable(dec).unwrap().arity();
    for_each_joint(d, |ctx, p| {
        let key: Vec<usize> = info.iter().map(|v| ctx.get(v).unwrap()).collect();
        let a = ctx.get(dec).unwrap();
        by_context.entry(key).or_insert_with(|| vec![0.0; arity])[a] += p * eval_value_tree(&d.value_tree, ctx).unwrap();
    });
    by_context.values().map(|z| z.iter().copied().fold(f64::NEG_INFINITY, f64::max)).sum()
}

/// Unconditional expected value of each action of a single decision.
pub fn action_values(d: &InfluenceDiagram) -> Vec<f64> {
    let dec = &d.decisions.order[0];
    let mut z = vec![0.0; d.variable(dec).unwrap().arity()];
    for_each_joint(d, |ctx, p| z[ctx.get(dec).unwrap()] += p * eval_value_tree(&d.value_tree, ctx).unwrap());
    z
}

/// Random tree for `decision` splitting on its informational predecessors.
pub fn random_policy_tree(d: &InfluenceDiagram, decision: &str, max_depth: usize, seed: u64) -> PolicyTree {
    fn grow(d: &InfluenceDiagram, vars: &[String], arity: usize, depth: usize, rng: &mut ChaCha8Rng) -> PolicyNode {
        if depth == 0 || vars.is_empty() || rng.random_bool(0.25) {
            return PolicyNode::leaf(rng.random_range(0..arity));
        }
        let i = rng.random_range(0..vars.len());
        let rest: Vec<String> = vars.iter().filter(|v| **v != vars[i]).cloned().collect();
        let k = d.variable(&vars[i]).unwrap().arity();
        PolicyNode::Split {
            split: vars[i].clone(),
            children: (0..k).map(|_| grow(d, &rest, arity, depth - 1, rng)).collect(),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arity = d.variable(decision).unwrap().arity();
    PolicyTree { decision: decision.into(), root: grow(d, d.info_set(decision), arity, max_depth, &mut rng) }
}

pub fn random_policy(d: &InfluenceDiagram, max_depth: usize, seed: u64) -> Policy {
    Policy {
        trees: d
            .decisions
            .order
            .iter()
            .enumerate()
            .map(|(i, x)| random_policy_tree(d, x, max_depth, seed.wrapping_add(i as u64)))
            .collect(),
    }
}
