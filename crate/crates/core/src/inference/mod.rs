//! Exact inference on influence diagrams.
//!
//! A [`Network`] is a diagram compiled to index form. Decisions governed by a
//! fixed policy tree become deterministic chance nodes whose CPT is induced by
//! the tree; a decision under evaluation is left free (intervened on). Every
//! query is answered by sum-product variable elimination over the ancestors of
//! the query, evidence and (for expected-value queries) the value node.

mod elimination;
mod factor;
mod policy;
mod solve;

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{validate, Context, InfluenceDiagram, Policy, PolicyNode, ValueTree, VarKind};

pub use factor::Factor;
pub(crate) use policy::StagePolicy;
pub(crate) use policy::PolicyFn;
pub use solve::{Solution, DEFAULT_STATE_CAP};

/// Expected value of each action of a decision in one context.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActionValuation {
    pub context: Context,
    pub values: Vec<f64>,
    pub p: f64,
    pub v_star: f64,
    pub v: f64,
    pub best: usize,
}

impl ActionValuation {
    /// From the unnormalized per-action sums `z[a] = P(context) * E[V | context, a]`.
    pub(crate) fn from_unnormalized(context: Context, p: f64, z: &[f64]) -> Self {
        let values: Vec<f64> = if p > 0.0 {
            z.iter().map(|x| x / p).collect()
        } else {
            vec![0.0; z.len()]
        };
        let best = argmax(&values);
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        ActionValuation {
            context,
            p,
            v_star: sorted[0],
            v: sorted.get(1).copied().unwrap_or(sorted[0]),
            best,
            values,
        }
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug)]
enum ValueNode {
    Split(usize, Vec<ValueNode>),
    Leaf(f64),
}

impl ValueNode {
    fn eval(&self, state: &[usize]) -> f64 {
        let mut node = self;
        loop {
            match node {
                ValueNode::Leaf(v) => return *v,
                ValueNode::Split(var, children) => node = &children[state[*var]],
            }
        }
    }
}

/// Which variables to keep, what is observed, and whether the value node is
/// multiplied in.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Query<'a> {
    pub evidence: &'a [(usize, usize)],
    pub keep: &'a [usize],
    pub utility: bool,
}

#[derive(Clone, Debug)]
pub struct Network {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    card: Vec<usize>,
    kind: Vec<VarKind>,
    parents: Vec<Vec<usize>>,
    cpt: Vec<Option<Factor>>,
    decisions: Vec<usize>,
    stage_of: Vec<Option<usize>>,
    info: Vec<Vec<usize>>,
    value: Factor,
}

impl Network {
    pub fn compile(diagram: &InfluenceDiagram) -> Result<Network> {
        let report = validate(diagram);
        if !report.is_valid() {
            return Err(Error::Invalid(report.errors.join("; ")));
        }
        let ids: Vec<String> = diagram.variables.iter().map(|v| v.id.clone()).collect();
        let index: HashMap<String, usize> = ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let card: Vec<usize> = diagram.variables.iter().map(|v| v.arity()).collect();
        let kind: Vec<VarKind> = diagram.variables.iter().map(|v| v.kind).collect();
        let n = ids.len();

        let mut parents = vec![Vec::new(); n];
        let mut cpt = vec![None; n];
        for (i, v) in diagram.variables.iter().enumerate() {
            if v.kind != VarKind::Chance {
                continue;
            }
            parents[i] = diagram.parents_of(&v.id).iter().map(|p| index[p]).collect();
            let mut vars = parents[i].clone();
            vars.push(i);
            let cards: Vec<usize> = vars.iter().map(|&x| card[x]).collect();
            let flat: Vec<f64> = diagram.cpts[&v.id].iter().flatten().copied().collect();
            cpt[i] = Some(Factor::from_ordered(&vars, &cards, &flat));
        }

        let decisions: Vec<usize> = diagram.decisions.order.iter().map(|d| index[d]).collect();
        let mut stage_of = vec![None; n];
        for (s, &d) in decisions.iter().enumerate() {
            stage_of[d] = Some(s);
        }
        let info = diagram
            .decisions
            .order
            .iter()
            .map(|d| diagram.info_set(d).iter().map(|x| index[x]).collect())
            .collect();

        let tree = compile_value_tree(&diagram.value_tree, &index);
        let scope: Vec<usize> = diagram.value_tree.variables().iter().map(|v| index[*v]).collect::<BTreeSet<_>>().into_iter().collect();
        let value = tabulate(&scope, &card, n, |state| tree.eval(state));

        Ok(Network {
            ids,
            index,
            card,
            kind,
            parents,
            cpt,
            decisions,
            stage_of,
            info,
            value,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn var(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownVariable(id.to_string()))
    }

    pub fn id(&self, var: usize) -> &str {
        &self.ids[var]
    }

    pub fn arity(&self, var: usize) -> usize {
        self.card[var]
    }

    pub fn kind(&self, var: usize) -> VarKind {
        self.kind[var]
    }

    pub fn decisions(&self) -> &[usize] {
        &self.decisions
    }

    pub fn stage_of(&self, var: usize) -> Option<usize> {
        self.stage_of[var]
    }

    pub fn info_set(&self, stage: usize) -> &[usize] {
        &self.info[stage]
    }

    pub(crate) fn evidence_of(&self, context: &Context) -> Result<Vec<(usize, usize)>> {
        let mut ev = Vec::with_capacity(context.len());
        for (id, state) in context.iter() {
            let v = self.var(id)?;
            if state >= self.card[v] {
                return Err(Error::Invalid(format!("state {state} out of range for `{id}`")));
            }
            ev.push((v, state));
        }
        ev.sort_unstable();
        Ok(ev)
    }

    pub(crate) fn context_of(&self, evidence: &[(usize, usize)]) -> Context {
        evidence.iter().map(|&(v, s)| (self.ids[v].clone(), s)).collect()
    }

    /// Deterministic CPT of the decision at `stage`, with `action_of` mapping
    /// an assignment (indexed by variable) of `split_vars` to an action.
    pub(crate) fn decision_factor(&self, stage: usize, split_vars: &[usize], action_of: impl Fn(&[usize]) -> usize) -> Factor {
        let d = self.decisions[stage];
        let mut vars: Vec<usize> = split_vars.to_vec();
        vars.sort_unstable();
        vars.dedup();
        let mut scope = vars.clone();
        scope.push(d);
        scope.sort_unstable();
        let cards: Vec<usize> = scope.iter().map(|&v| self.card[v]).collect();
        let probe = Factor::new(scope.clone(), cards.clone(), vec![0.0; cards.iter().product()]);
        let mut table = vec![0.0; probe.table().len()];
        let mut state = vec![0usize; self.len()];
        let combos: usize = vars.iter().map(|&v| self.card[v]).product();
        for _ in 0..combos {
            state[d] = action_of(&state);
            table[probe.index_with(|v| state[v])] = 1.0;
            state[d] = 0;
            for &v in vars.iter().rev() {
                state[v] += 1;
                if state[v] < self.card[v] {
                    break;
                }
                state[v] = 0;
            }
        }
        Factor::new(scope, cards, table)
    }

    /// Compiled policies per stage for the trees present in `policy`.
    pub(crate) fn stage_policies(&self, policy: &Policy) -> Result<Vec<Option<StagePolicy>>> {
        let mut out = vec![None; self.decisions.len()];
        for tree in &policy.trees {
            let d = self.var(&tree.decision)?;
            let stage = self.stage_of[d].ok_or_else(|| Error::Invalid(format!("`{}` is not a decision", tree.decision)))?;
            out[stage] = Some(self.stage_policy(stage, self.compile_policy_node(&tree.root)?));
        }
        Ok(out)
    }

    fn compile_policy_node(&self, node: &PolicyNode) -> Result<PolicyFn> {
        Ok(match node {
            PolicyNode::Leaf(leaf) => PolicyFn::Leaf(leaf.action),
            PolicyNode::Split { split, children } => PolicyFn::Split(
                self.var(split)?,
                children.iter().map(|c| self.compile_policy_node(c)).collect::<Result<_>>()?,
            ),
        })
    }

    /// Runs one elimination query. `policy[s]` is the CPT standing in for the
    /// decision at stage `s`, or `None` when that decision is free.
    pub(crate) fn query(&self, q: Query<'_>, policy: &[Option<&Factor>]) -> Result<Factor> {
        let n = self.len();
        let mut evidence_state = vec![None; n];
        for &(v, s) in q.evidence {
            evidence_state[v] = Some(s);
        }
        let mut relevant = vec![false; n];
        let mut stack: Vec<usize> = q.keep.iter().copied().chain(q.evidence.iter().map(|e| e.0)).collect();
        if q.utility {
            stack.extend_from_slice(self.value.scope());
        }
        while let Some(v) = stack.pop() {
            if relevant[v] {
                continue;
            }
            relevant[v] = true;
            match self.kind[v] {
                VarKind::Chance => stack.extend_from_slice(&self.parents[v]),
                VarKind::Decision => {
                    let stage = self.stage_of[v].expect("decision has a stage");
                    match policy.get(stage).copied().flatten() {
                        Some(f) => stack.extend(f.scope().iter().copied().filter(|&x| x != v)),
                        None => {
                            if evidence_state[v].is_none() && !q.keep.contains(&v) {
                                return Err(Error::Invalid(format!(
                                    "decision `{}` has no policy and is not fixed",
                                    self.ids[v]
                                )));
                            }
                        }
                    }
                }
            }
        }
        let mut factors = Vec::new();
        for v in (0..n).filter(|&v| relevant[v]) {
            let f = match self.kind[v] {
                VarKind::Chance => self.cpt[v].as_ref(),
                VarKind::Decision => policy.get(self.stage_of[v].expect("stage")).copied().flatten(),
            };
            if let Some(f) = f {
                factors.push(f);
            }
        }
        if q.utility {
            factors.push(&self.value);
        }
        let reduced: Vec<Factor> = factors
            .into_iter()
            .map(|f| {
                let mut g: Option<Factor> = None;
                for &v in f.scope() {
                    if let Some(s) = evidence_state[v] {
                        g = Some(g.as_ref().unwrap_or(f).reduce(v, s));
                    }
                }
                g.unwrap_or_else(|| f.clone())
            })
            .collect();
        let mut keep = q.keep.to_vec();
        keep.sort_unstable();
        Ok(elimination::eliminate(reduced, &keep, &self.card))
    }

    /// Probability of the evidence and unnormalized action sums for the
    /// decision at `stage`, every other decision following `policy`.
    pub(crate) fn raw_valuation(
        &self,
        stage: usize,
        evidence: &[(usize, usize)],
        policy: &[Option<&StagePolicy>],
    ) -> Result<(f64, Vec<f64>)> {
        let d = self.decisions[stage];
        let mut others: Vec<Option<&StagePolicy>> = policy.to_vec();
        others.resize(self.decisions.len(), None);
        others[stage] = None;
        let p = self.query_policy(Query { evidence, keep: &[], utility: false }, &others)?.table()[0];
        let z = self.query_policy(Query { evidence, keep: &[d], utility: true }, &others)?;
        Ok((p, z.table().to_vec()))
    }

    /// Per-state probabilities and action sums after additionally observing
    /// `var`: `(p[x], z[x][a])`.
    pub(crate) fn raw_split(
        &self,
        stage: usize,
        evidence: &[(usize, usize)],
        var: usize,
        policy: &[Option<&StagePolicy>],
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let d = self.decisions[stage];
        let mut others: Vec<Option<&StagePolicy>> = policy.to_vec();
        others.resize(self.decisions.len(), None);
        others[stage] = None;
        let p = self.query_policy(Query { evidence, keep: &[var], utility: false }, &others)?;
        let z = self.query_policy(Query { evidence, keep: &[var, d], utility: true }, &others)?;
        let k = self.card[var];
        let na = self.card[d];
        let mut state = vec![0usize; self.len()];
        let mut zs = vec![vec![0.0; na]; k];
        for (x, row) in zs.iter_mut().enumerate() {
            state[var] = x;
            for (a, cell) in row.iter_mut().enumerate() {
                state[d] = a;
                *cell = z.get(|v| state[v]);
            }
        }
        Ok((p.table().to_vec(), zs))
    }

    /// Marginal probability of `context` with the decisions that have trees in
    /// `policy` replaced by their tree functions.
    pub fn context_probability(&self, policy: &Policy, context: &Context) -> Result<f64> {
        let evidence = self.evidence_of(context)?;
        let factors = self.stage_policies(policy)?;
        for &(v, _) in &evidence {
            if let Some(stage) = self.stage_of[v] {
                if factors[stage].is_none() {
                    return Err(Error::Invalid(format!(
                        "context fixes decision `{}` which has no policy tree",
                        self.ids[v]
                    )));
                }
            }
        }
        let refs: Vec<Option<&StagePolicy>> = factors.iter().map(Option::as_ref).collect();
        Ok(self.query_policy(Query { evidence: &evidence, keep: &[], utility: false }, &refs)?.table()[0])
    }

    pub fn action_valuation(&self, policy: &Policy, decision: &str, context: &Context) -> Result<ActionValuation> {
        let d = self.var(decision)?;
        let stage = self.stage_of[d].ok_or_else(|| Error::Invalid(format!("`{decision}` is not a decision")))?;
        let evidence = self.evidence_of(context)?;
        let factors = self.stage_policies(policy)?;
        let refs: Vec<Option<&StagePolicy>> = factors.iter().map(Option::as_ref).collect();
        let (p, z) = self.raw_valuation(stage, &evidence, &refs)?;
        Ok(ActionValuation::from_unnormalized(context.clone(), p, &z))
    }

    pub(crate) fn expected_value(&self, policy: &[Option<&StagePolicy>]) -> Result<f64> {
        Ok(self.query_policy(Query { evidence: &[], keep: &[], utility: true }, policy)?.table()[0])
    }

    /// Exact expected value of the diagram under `policy`.
    pub fn eval_policy(&self, policy: &Policy) -> Result<f64> {
        let factors = self.stage_policies(policy)?;
        for (stage, f) in factors.iter().enumerate() {
            if f.is_none() {
                return Err(Error::MissingTree(self.ids[self.decisions[stage]].clone()));
            }
        }
        let refs: Vec<Option<&StagePolicy>> = factors.iter().map(Option::as_ref).collect();
        self.expected_value(&refs)
    }
}

fn compile_value_tree(tree: &ValueTree, index: &HashMap<String, usize>) -> ValueNode {
    match tree {
        ValueTree::Leaf { value } => ValueNode::Leaf(*value),
        ValueTree::Split { split, children } => ValueNode::Split(
            index[split],
            children.iter().map(|c| compile_value_tree(c, index)).collect(),
        ),
    }
}

/// Tabulates `f` over every assignment of `scope` (sorted).
fn tabulate(scope: &[usize], card: &[usize], n_vars: usize, f: impl Fn(&[usize]) -> f64) -> Factor {
    let cards: Vec<usize> = scope.iter().map(|&v| card[v]).collect();
    let size: usize = cards.iter().product();
    let mut state = vec![0usize; n_vars];
    let mut table = Vec::with_capacity(size);
    for _ in 0..size {
        table.push(f(&state));
        for &v in scope.iter().rev() {
            state[v] += 1;
            if state[v] < card[v] {
                break;
            }
            state[v] = 0;
        }
    }
    Factor::new(scope.to_vec(), cards, table)
}

/// Convenience wrappers that compile the diagram on every call.
pub fn context_probability(diagram: &InfluenceDiagram, policy: &Policy, context: &Context) -> Result<f64> {
    Network::compile(diagram)?.context_probability(policy, context)
}

pub fn action_valuation(diagram: &InfluenceDiagram, policy: &Policy, decision: &str, context: &Context) -> Result<ActionValuation> {
    Network::compile(diagram)?.action_valuation(policy, decision, context)
}

pub fn eval_policy(diagram: &InfluenceDiagram, policy: &Policy) -> Result<f64> {
    Network::compile(diagram)?.eval_policy(policy)
}

pub fn solve_optimal(diagram: &InfluenceDiagram, cap: u64) -> Result<Solution> {
    Network::compile(diagram)?.solve_optimal(cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::fixtures;
    use crate::model::{PolicyTree, PolicyNode};

    fn constant_policy(decision: &str, action: usize) -> Policy {
        Policy {
            trees: vec![PolicyTree { decision: decision.into(), root: PolicyNode::leaf(action) }],
        }
    }

    fn exor_full_policy() -> Policy {
        let c2 = |c1: usize| PolicyNode::Split {
            split: "C2".into(),
            children: (0..2).map(|c2| PolicyNode::leaf(c1 ^ c2)).collect(),
        };
        Policy {
            trees: vec![PolicyTree {
                decision: "D".into(),
                root: PolicyNode::Split { split: "C1".into(), children: vec![c2(0), c2(1)] },
            }],
        }
    }

    #[test]
    fn empty_context_has_probability_one() {
        let net = Network::compile(&fixtures::one_chance()).unwrap();
        assert_eq!(net.context_probability(&Policy::default(), &Context::new()).unwrap(), 1.0);
    }

    #[test]
    fn prior_read_off() {
        let net = Network::compile(&fixtures::one_chance()).unwrap();
        let p = net.context_probability(&Policy::default(), &Context::new().with("C", 0)).unwrap();
        assert_eq!(p, 0.3);
    }

    #[test]
    fn unknown_context_variable() {
        let net = Network::compile(&fixtures::one_chance()).unwrap();
        let err = net.context_probability(&Policy::default(), &Context::new().with("Q", 0)).unwrap_err();
        assert!(matches!(err, Error::UnknownVariable(v) if v == "Q"));
    }

    #[test]
    fn one_chance_valuation() {
        let net = Network::compile(&fixtures::one_chance()).unwrap();
        let val = net.action_valuation(&Policy::default(), "D", &Context::new()).unwrap();
        assert_eq!(val.values, vec![0.2, 0.8]);
        assert_eq!((val.v_star, val.v, val.p, val.best), (0.8, 0.2, 1.0, 1));
    }

    #[test]
    fn exor_valuations_are_uniform() {
        let net = Network::compile(&fixtures::exor()).unwrap();
        for ctx in [Context::new(), Context::new().with("C1", 1)] {
            let val = net.action_valuation(&Policy::default(), "D", &ctx).unwrap();
            assert_eq!(val.values, vec![0.5, 0.5]);
            assert_eq!(val.v, val.v_star);
        }
    }

    #[test]
    fn zero_probability_context_has_zero_values() {
        let mut d = fixtures::one_chance();
        d.cpts.insert("C".into(), vec![vec![1.0, 0.0]]);
        let net = Network::compile(&d).unwrap();
        let val = net.action_valuation(&Policy::default(), "D", &Context::new().with("C", 1)).unwrap();
        assert_eq!(val.p, 0.0);
        assert_eq!(val.values, vec![0.0, 0.0]);
    }

    #[test]
    fn eval_fixed_policies() {
        let net = Network::compile(&fixtures::one_chance()).unwrap();
        assert_eq!(net.eval_policy(&constant_policy("D", 1)).unwrap(), 0.8);
        let exor = Network::compile(&fixtures::exor()).unwrap();
        assert_eq!(exor.eval_policy(&constant_policy("D", 0)).unwrap(), 0.5);
        assert_eq!(exor.eval_policy(&exor_full_policy()).unwrap(), 1.0);
    }

    #[test]
    fn missing_tree_is_an_error() {
        let net = Network::compile(&fixtures::exor()).unwrap();
        assert!(matches!(net.eval_policy(&Policy::default()), Err(Error::MissingTree(d)) if d == "D"));
    }

    #[test]
    fn decision_in_context_follows_upstream_policy() {
        let d = fixtures::two_stage();
        let net = Network::compile(&d).unwrap();
        // D1 always takes action 1, so contexts with D1 = 0 are impossible.
        let policy = constant_policy("D1", 1);
        let p0 = net.context_probability(&policy, &Context::new().with("D1", 0)).unwrap();
        let p1 = net.context_probability(&policy, &Context::new().with("D1", 1)).unwrap();
        assert_eq!((p0, p1), (0.0, 1.0));
    }
}
