//! Anytime information refinement.
//!
//! A [`Refiner`] owns the current policy as one arena tree per decision. Each
//! step picks the refinable leaf with the largest second-best-action value
//! `H = p * v / v*`, splits it on the unused informational predecessor that
//! raises the policy value most, and gives every child its best action.
//!
//! Leaf statistics are kept as unnormalized sums `z[a] = P(ctx) * E[V | ctx, a]`
//! alongside `p = P(ctx)`, so a candidate split is scored without evaluating
//! the whole policy: splitting leaf `L` on `X` changes the value by
//! `sum_x max_a z[x][a] - z_L[action_L]`.

mod profile;

use std::time::Instant;

use crate::error::{Error, Result};
use crate::inference::{argmax, ActionValuation, Network, PolicyFn, StagePolicy};
use crate::model::{Context, InfluenceDiagram, LeafEntry, LeafStats, Policy, PolicyLeaf, PolicyNode, PolicyTree};

pub use profile::{RefinementProfile, RefinementStep, StopReason, PROFILE_HEADER};

/// Scores closer than this are treated as equal when choosing leaves and splits.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Passes of coordinate ascent allowed when choosing the initial actions.
const MAX_INITIAL_PASSES: usize = 50;

/// `p * v / v*`, with `0` for `p = 0` and `p` when `v* = 0` or `v = v*`.
pub fn heuristic_h(valuation: &ActionValuation) -> f64 {
    h_of(valuation.p, valuation.v_star, valuation.v)
}

fn h_of(p: f64, v_star: f64, v: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else if v_star == 0.0 || v == v_star {
        p
    } else {
        p * v / v_star
    }
}

#[derive(Clone, Debug)]
struct Leaf {
    action: usize,
    p: f64,
    z: Vec<f64>,
    created: u64,
}

impl Leaf {
    fn valuation(&self) -> (f64, f64) {
        let mut values: Vec<f64> = self.z.iter().map(|z| if self.p > 0.0 { z / self.p } else { 0.0 }).collect();
        values.sort_by(|a, b| b.total_cmp(a));
        (values[0], values.get(1).copied().unwrap_or(values[0]))
    }

    fn h(&self) -> f64 {
        let (v_star, v) = self.valuation();
        h_of(self.p, v_star, v)
    }

    fn stats(&self) -> LeafStats {
        let (v_star, v) = self.valuation();
        LeafStats { p: self.p, v_star, v }
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf(Leaf),
    Split { var: usize, children: Vec<usize> },
}

#[derive(Clone, Debug)]
struct Tree {
    nodes: Vec<Node>,
    /// Path evidence (sorted by variable) of every node.
    paths: Vec<Vec<(usize, usize)>>,
}

impl Tree {
    fn policy_fn(&self, i: usize) -> PolicyFn {
        match &self.nodes[i] {
            Node::Leaf(l) => PolicyFn::Leaf(l.action),
            Node::Split { var, children } => PolicyFn::Split(*var, children.iter().map(|&c| self.policy_fn(c)).collect()),
        }
    }

    /// Leaf node indices in depth-first, state order.
    fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            match &self.nodes[i] {
                Node::Leaf(_) => out.push(i),
                Node::Split { children, .. } => stack.extend(children.iter().rev()),
            }
        }
        out
    }

    fn leaf(&self, i: usize) -> &Leaf {
        match &self.nodes[i] {
            Node::Leaf(l) => l,
            Node::Split { .. } => unreachable!("node {i} is not a leaf"),
        }
    }
}

/// Gain, split variable, child probabilities and child action values.
type BestSplit = (f64, usize, Vec<f64>, Vec<Vec<f64>>);

/// A refinable leaf and its heuristic value.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub stage: usize,
    pub node: usize,
    pub h: f64,
}

/// Outcome of one refinement.
#[derive(Clone, Debug, PartialEq)]
pub struct Refinement {
    pub decision: String,
    pub context: Context,
    pub split_var: String,
    pub h: f64,
    pub delta_ev: f64,
}

/// Incremental refinement state for one diagram.
#[derive(Clone, Debug)]
pub struct Refiner {
    net: Network,
    trees: Vec<Tree>,
    factors: Vec<StagePolicy>,
    ev: f64,
    next_created: u64,
}

impl Refiner {
    /// Starts from root-leaf trees. Actions are chosen by coordinate ascent in
    /// reverse stage order, each decision taking its best unconditional action
    /// given the others, until no action changes.
    pub fn new(net: Network) -> Result<Self> {
        let stages = net.decisions().len();
        let trees = (0..stages)
            .map(|_| Tree {
                nodes: vec![Node::Leaf(Leaf { action: 0, p: 1.0, z: Vec::new(), created: 0 })],
                paths: vec![Vec::new()],
            })
            .collect();
        let mut r = Refiner { net, trees, factors: Vec::new(), ev: 0.0, next_created: 0 };
        for stage in 0..stages {
            r.stamp(stage, 0);
            let f = r.build_factor(stage);
            r.factors.push(f);
        }
        for _ in 0..MAX_INITIAL_PASSES {
            let mut changed = false;
            for stage in (0..stages).rev() {
                r.refresh_leaf(stage, 0)?;
                let leaf = r.trees[stage].leaf(0);
                let best = argmax(&leaf.z);
                if leaf.z[best] > leaf.z[leaf.action] + TIE_TOLERANCE {
                    r.set_action(stage, 0, best);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        r.refresh_all(None)?;
        r.ev = r.evaluate()?;
        Ok(r)
    }

    /// Resumes from an existing policy; leaves get creation order by
    /// depth-first position and fresh statistics.
    pub fn from_policy(net: Network, policy: &Policy) -> Result<Self> {
        let mut trees = Vec::new();
        for &d in net.decisions() {
            let id = net.id(d);
            let tree = policy.tree(id).ok_or_else(|| Error::MissingTree(id.to_string()))?;
            let mut t = Tree { nodes: Vec::new(), paths: Vec::new() };
            build_arena(&net, &tree.root, Vec::new(), &mut t)?;
            trees.push(t);
        }
        let mut r = Refiner { net, trees, factors: Vec::new(), ev: 0.0, next_created: 0 };
        for stage in 0..r.trees.len() {
            for node in r.trees[stage].leaves() {
                r.stamp(stage, node);
            }
            let f = r.build_factor(stage);
            r.factors.push(f);
        }
        r.refresh_all(None)?;
        r.ev = r.evaluate()?;
        Ok(r)
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn ev_i(&self) -> f64 {
        self.ev
    }

    fn stamp(&mut self, stage: usize, node: usize) {
        let created = self.next_created;
        self.next_created += 1;
        if let Node::Leaf(l) = &mut self.trees[stage].nodes[node] {
            l.created = created;
        }
    }

    fn build_factor(&self, stage: usize) -> StagePolicy {
        self.net.stage_policy(stage, self.trees[stage].policy_fn(0))
    }

    fn factor_refs(&self) -> Vec<Option<&StagePolicy>> {
        self.factors.iter().map(Some).collect()
    }

    fn evaluate(&self) -> Result<f64> {
        self.net.expected_value(&self.factor_refs())
    }

    fn set_action(&mut self, stage: usize, node: usize, action: usize) {
        if let Node::Leaf(l) = &mut self.trees[stage].nodes[node] {
            l.action = action;
        }
        self.factors[stage] = self.build_factor(stage);
    }

    fn refresh_leaf(&mut self, stage: usize, node: usize) -> Result<()> {
        let (p, z) = self.net.raw_valuation(stage, &self.trees[stage].paths[node], &self.factor_refs())?;
        if let Node::Leaf(l) = &mut self.trees[stage].nodes[node] {
            l.p = p;
            l.z = z;
        }
        Ok(())
    }

    /// Recomputes statistics of every leaf outside tree `skip`.
    fn refresh_all(&mut self, skip: Option<usize>) -> Result<()> {
        for stage in 0..self.trees.len() {
            if Some(stage) == skip {
                continue;
            }
            for node in self.trees[stage].leaves() {
                self.refresh_leaf(stage, node)?;
            }
        }
        Ok(())
    }

    fn unused(&self, stage: usize, node: usize) -> Vec<usize> {
        let path = &self.trees[stage].paths[node];
        self.net
            .info_set(stage)
            .iter()
            .copied()
            .filter(|v| !path.iter().any(|e| e.0 == *v))
            .collect()
    }

    /// Every refinable leaf with its `H`, in stage order then depth-first.
    pub fn candidates(&self) -> Vec<Candidate> {
        let mut out = Vec::new();
        for (stage, tree) in self.trees.iter().enumerate() {
            for node in tree.leaves() {
                if !self.unused(stage, node).is_empty() {
                    out.push(Candidate { stage, node, h: tree.leaf(node).h() });
                }
            }
        }
        out
    }

    pub fn n_refinable(&self) -> usize {
        self.candidates().len()
    }

    /// Leaf with the largest `H`; near-ties go to the earlier stage, then the
    /// earlier-created leaf.
    pub fn next_candidate(&self) -> Option<Candidate> {
        let all = self.candidates();
        let max = all.iter().map(|c| c.h).fold(f64::NEG_INFINITY, f64::max);
        all.into_iter()
            .filter(|c| c.h >= max - TIE_TOLERANCE)
            .min_by_key(|c| (c.stage, self.trees[c.stage].leaf(c.node).created))
    }

    /// Refines the chosen leaf, or returns `None` when nothing is refinable.
    pub fn step(&mut self) -> Result<Option<Refinement>> {
        match self.next_candidate() {
            Some(c) => self.refine(c.stage, c.node).map(Some),
            None => Ok(None),
        }
    }

    /// Splits leaf `node` of tree `stage` on its best unused predecessor.
    pub fn refine(&mut self, stage: usize, node: usize) -> Result<Refinement> {
        let unused = self.unused(stage, node);
        if unused.is_empty() {
            return Err(Error::NotRefinable);
        }
        let leaf = self.trees[stage].leaf(node).clone();
        let h = leaf.h();
        let path = self.trees[stage].paths[node].clone();
        let base = leaf.z.get(leaf.action).copied().unwrap_or(0.0);
        let refs = self.factor_refs();
        let mut best: Option<BestSplit> = None;
        for var in unused {
            let (p, z) = self.net.raw_split(stage, &path, var, &refs)?;
            let gain: f64 = z.iter().map(|row| row[argmax(row)]).sum::<f64>() - base;
            if best.as_ref().is_none_or(|b| gain > b.0 + TIE_TOLERANCE) {
                best = Some((gain, var, p, z));
            }
        }
        let (_, var, p, z) = best.expect("at least one candidate split");

        let tree = &mut self.trees[stage];
        let mut children = Vec::with_capacity(p.len());
        for (x, (px, zx)) in p.into_iter().zip(z).enumerate() {
            let mut child_path = path.clone();
            child_path.push((var, x));
            child_path.sort_unstable();
            children.push(tree.nodes.len());
            tree.nodes.push(Node::Leaf(Leaf { action: argmax(&zx), p: px, z: zx, created: 0 }));
            tree.paths.push(child_path);
        }
        tree.nodes[node] = Node::Split { var, children: children.clone() };
        for c in children {
            self.stamp(stage, c);
        }
        self.factors[stage] = self.build_factor(stage);
        if self.trees.len() > 1 {
            self.refresh_all(Some(stage))?;
        }
        let before = self.ev;
        self.ev = self.evaluate()?;
        Ok(Refinement {
            decision: self.net.id(self.net.decisions()[stage]).to_string(),
            context: self.net.context_of(&path),
            split_var: self.net.id(var).to_string(),
            h,
            delta_ev: self.ev - before,
        })
    }

    /// Locates the leaf of `decision`'s tree whose path context is `context`.
    pub fn find_leaf(&self, decision: &str, context: &Context) -> Result<(usize, usize)> {
        let d = self.net.var(decision)?;
        let stage = self
            .net
            .stage_of(d)
            .ok_or_else(|| Error::Invalid(format!("`{decision}` is not a decision")))?;
        let evidence = self.net.evidence_of(context)?;
        let tree = &self.trees[stage];
        tree.leaves()
            .into_iter()
            .find(|&n| tree.paths[n] == evidence)
            .map(|n| (stage, n))
            .ok_or_else(|| Error::Invalid(format!("no leaf of `{decision}` has context {context:?}")))
    }

    /// Sum of leaf probabilities per tree, in stage order.
    pub fn leaf_probability_sums(&self) -> Vec<f64> {
        self.trees
            .iter()
            .map(|t| t.leaves().into_iter().map(|n| t.leaf(n).p).sum())
            .collect()
    }

    /// The current policy with leaf statistics attached.
    pub fn policy(&self) -> Policy {
        Policy {
            trees: self
                .trees
                .iter()
                .enumerate()
                .map(|(stage, t)| PolicyTree {
                    decision: self.net.id(self.net.decisions()[stage]).to_string(),
                    root: self.export(t, 0),
                })
                .collect(),
        }
    }

    fn export(&self, tree: &Tree, i: usize) -> PolicyNode {
        match &tree.nodes[i] {
            Node::Leaf(l) => PolicyNode::Leaf(PolicyLeaf { action: l.action, stats: Some(l.stats()) }),
            Node::Split { var, children } => PolicyNode::Split {
                split: self.net.id(*var).to_string(),
                children: children.iter().map(|&c| self.export(tree, c)).collect(),
            },
        }
    }
}

fn build_arena(net: &Network, node: &PolicyNode, path: Vec<(usize, usize)>, tree: &mut Tree) -> Result<usize> {
    let i = tree.nodes.len();
    match node {
        PolicyNode::Leaf(l) => {
            tree.nodes.push(Node::Leaf(Leaf { action: l.action, p: 0.0, z: Vec::new(), created: 0 }));
            tree.paths.push(path);
        }
        PolicyNode::Split { split, children } => {
            let var = net.var(split)?;
            tree.nodes.push(Node::Split { var, children: Vec::new() });
            tree.paths.push(path.clone());
            let mut ids = Vec::with_capacity(children.len());
            for (x, child) in children.iter().enumerate() {
                let mut p = path.clone();
                p.push((var, x));
                p.sort_unstable();
                ids.push(build_arena(net, child, p, tree)?);
            }
            tree.nodes[i] = Node::Split { var, children: ids };
        }
    }
    Ok(i)
}

/// Options for [`run_refinement`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineOptions {
    pub max_steps: usize,
    /// Measure wall time per step. Off gives byte-reproducible profiles.
    pub record_wall_time: bool,
    /// Recount refinable leaves from the exported policy after every step.
    pub check_bookkeeping: bool,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions { max_steps: 255, record_wall_time: true, check_bookkeeping: false }
    }
}

/// One root leaf per decision with the best unconditional action.
pub fn initial_policy(diagram: &InfluenceDiagram) -> Result<Policy> {
    Ok(Refiner::new(Network::compile(diagram)?)?.policy())
}

/// Leaves of `policy` that still have an unused informational predecessor,
/// each with its `H`.
pub fn refinable_contexts(diagram: &InfluenceDiagram, policy: &Policy) -> Result<Vec<(LeafEntry, f64)>> {
    let r = Refiner::from_policy(Network::compile(diagram)?, policy)?;
    let exported = r.policy();
    let candidates = r.candidates();
    let mut out = Vec::with_capacity(candidates.len());
    for c in candidates {
        let tree = &r.trees[c.stage];
        let decision = exported.trees[c.stage].decision.clone();
        let leaf = tree.leaf(c.node);
        out.push((
            LeafEntry {
                decision,
                context: r.net.context_of(&tree.paths[c.node]),
                leaf: PolicyLeaf { action: leaf.action, stats: Some(leaf.stats()) },
            },
            c.h,
        ));
    }
    Ok(out)
}

/// Splits the leaf of `decision` at `context`: returns the new policy, the
/// split variable and the change in policy value.
pub fn refine_leaf(diagram: &InfluenceDiagram, policy: &Policy, decision: &str, context: &Context) -> Result<(Policy, String, f64)> {
    let mut r = Refiner::from_policy(Network::compile(diagram)?, policy)?;
    let (stage, node) = r.find_leaf(decision, context)?;
    let step = r.refine(stage, node)?;
    Ok((r.policy(), step.split_var, step.delta_ev))
}

/// Refines until `max_steps` refinements are done or no leaf is refinable.
/// Row `t` of the profile describes the policy after `t` refinements.
pub fn run_refinement(diagram: &InfluenceDiagram, options: &RefineOptions) -> Result<RefinementProfile> {
    let mut r = Refiner::new(Network::compile(diagram)?)?;
    let mut steps = vec![RefinementStep::initial(r.ev_i(), &r)];
    let stop = loop {
        if steps.len() > options.max_steps {
            break StopReason::Budget;
        }
        let start = Instant::now();
        let Some(done) = r.step()? else {
            break StopReason::Exhausted;
        };
        let wall_ms = if options.record_wall_time { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        let row = RefinementStep::after(steps.len(), &r, done, wall_ms);
        if options.check_bookkeeping {
            let recount = refinable_count(&r);
            if recount != row.n_refinable {
                return Err(Error::Invalid(format!(
                    "refinable count {} disagrees with recount {recount} at step {}",
                    row.n_refinable, row.step
                )));
            }
        }
        steps.push(row);
    };
    Ok(RefinementProfile {
        problem: String::new(),
        seed: None,
        steps,
        ev_star: None,
        stop_reason: stop,
        policy: r.policy(),
    })
}

/// Refinable leaves counted from the exported policy.
fn refinable_count(r: &Refiner) -> usize {
    r.policy()
        .trees
        .iter()
        .enumerate()
        .map(|(stage, t)| {
            let info = r.net.info_set(stage).len();
            t.leaves().iter().filter(|(ctx, _)| ctx.len() < info).count()
        })
        .sum()
}
