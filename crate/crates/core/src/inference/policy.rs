//! Fixed decision policies inside queries.
//!
//! A policy tree over few variables becomes a deterministic CPT and joins the
//! elimination like any other factor. A tree over many variables would make
//! that CPT exponentially large, so such trees are handled by conditioning
//! instead: the query is split over the tree's leaves, each leaf adding its
//! context and action as evidence, and branches of zero probability are cut.

use super::{Factor, Network, Query};
use crate::error::Result;

/// Largest decision CPT (entries) built densely; bigger trees are conditioned on.
pub(crate) const DENSE_POLICY_LIMIT: usize = 1 << 12;

#[derive(Clone, Debug)]
pub(crate) enum PolicyFn {
    Split(usize, Vec<PolicyFn>),
    Leaf(usize),
}

impl PolicyFn {
    pub fn action(&self, state: &[usize]) -> usize {
        let mut node = self;
        loop {
            match node {
                PolicyFn::Leaf(a) => return *a,
                PolicyFn::Split(v, children) => node = &children[state[*v]],
            }
        }
    }

    pub fn split_vars(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            if let PolicyFn::Split(v, children) = n {
                out.push(*v);
                stack.extend(children);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// The compiled policy of one decision.
#[derive(Clone, Debug)]
pub(crate) enum StagePolicy {
    Dense(Factor),
    Conditioned(PolicyFn),
}

impl Network {
    pub(crate) fn stage_policy(&self, stage: usize, tree: PolicyFn) -> StagePolicy {
        let splits = tree.split_vars();
        let size = splits
            .iter()
            .try_fold(self.card[self.decisions[stage]], |acc, &v| acc.checked_mul(self.card[v]))
            .unwrap_or(usize::MAX);
        if size <= DENSE_POLICY_LIMIT {
            StagePolicy::Dense(self.decision_factor(stage, &splits, |state| tree.action(state)))
        } else {
            StagePolicy::Conditioned(tree)
        }
    }

    /// Like [`Network::query`], with `policy[s]` governing the decision at
    /// stage `s` (`None` leaves it free).
    pub(crate) fn query_policy(&self, q: Query<'_>, policy: &[Option<&StagePolicy>]) -> Result<Factor> {
        let dense: Vec<Option<&Factor>> = (0..self.decisions.len())
            .map(|s| match policy.get(s).copied().flatten() {
                Some(StagePolicy::Dense(f)) => Some(f),
                _ => None,
            })
            .collect();
        let relevant = self.relevant(&q, policy);
        let trees: Vec<(usize, &PolicyFn)> = (0..self.decisions.len())
            .filter_map(|s| match policy.get(s).copied().flatten() {
                Some(StagePolicy::Conditioned(t)) if relevant[self.decisions[s]] => Some((s, t)),
                _ => None,
            })
            .collect();
        if trees.is_empty() {
            return self.query(q, &dense);
        }
        let mut keep = q.keep.to_vec();
        keep.sort_unstable();
        let cards: Vec<usize> = keep.iter().map(|&v| self.card[v]).collect();
        let size = cards.iter().product::<usize>();
        let mut search = Conditioning {
            net: self,
            trees: &trees,
            dense: &dense,
            keep: &keep,
            utility: q.utility,
            acc: vec![0.0; size],
            state: vec![None; self.len()],
        };
        let mut evidence = q.evidence.to_vec();
        for &(v, s) in &evidence {
            search.state[v] = Some(s);
        }
        search.branch(0, trees[0].1, &mut evidence)?;
        Ok(Factor::new(keep.clone(), cards, search.acc))
    }

    /// Ancestors of the query variables, following policy splits as parents.
    fn relevant(&self, q: &Query<'_>, policy: &[Option<&StagePolicy>]) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<usize> = q.keep.iter().copied().chain(q.evidence.iter().map(|e| e.0)).collect();
        if q.utility {
            stack.extend_from_slice(self.value.scope());
        }
        while let Some(v) = stack.pop() {
            if std::mem::replace(&mut seen[v], true) {
                continue;
            }
            match self.stage_of[v].and_then(|s| policy.get(s).copied().flatten()) {
                Some(StagePolicy::Dense(f)) => stack.extend_from_slice(f.scope()),
                Some(StagePolicy::Conditioned(t)) => stack.extend(t.split_vars()),
                None => stack.extend_from_slice(&self.parents[v]),
            }
        }
        seen
    }
}

struct Conditioning<'a> {
    net: &'a Network,
    trees: &'a [(usize, &'a PolicyFn)],
    dense: &'a [Option<&'a Factor>],
    keep: &'a [usize],
    utility: bool,
    acc: Vec<f64>,
    state: Vec<Option<usize>>,
}

impl Conditioning<'_> {
    fn branch(&mut self, i: usize, node: &PolicyFn, evidence: &mut Vec<(usize, usize)>) -> Result<()> {
        if i == self.trees.len() {
            return self.terminal(evidence);
        }
        match node {
            PolicyFn::Leaf(a) => {
                let d = self.net.decisions[self.trees[i].0];
                let next = self.trees.get(i + 1).map_or(node, |t| t.1);
                match self.state[d] {
                    Some(s) if s != *a => Ok(()),
                    Some(_) => self.branch(i + 1, next, evidence),
                    None => {
                        self.assign(evidence, d, *a);
                        let r = self.branch(i + 1, next, evidence);
                        self.unassign(evidence, d);
                        r
                    }
                }
            }
            PolicyFn::Split(v, children) => {
                if let Some(s) = self.state[*v] {
                    return self.branch(i, &children[s], evidence);
                }
                for (x, child) in children.iter().enumerate() {
                    self.assign(evidence, *v, x);
                    if self.possible(evidence)? {
                        self.branch(i, child, evidence)?;
                    }
                    self.unassign(evidence, *v);
                }
                Ok(())
            }
        }
    }

    fn assign(&mut self, evidence: &mut Vec<(usize, usize)>, v: usize, s: usize) {
        evidence.push((v, s));
        self.state[v] = Some(s);
    }

    fn unassign(&mut self, evidence: &mut Vec<(usize, usize)>, v: usize) {
        evidence.pop();
        self.state[v] = None;
    }

    /// Whether the evidence can have positive probability for some setting of
    /// the decisions not yet fixed.
    fn possible(&self, evidence: &[(usize, usize)]) -> Result<bool> {
        let open: Vec<usize> = (0..self.net.decisions.len())
            .filter(|&s| self.dense[s].is_none())
            .map(|s| self.net.decisions[s])
            .filter(|&d| self.state[d].is_none())
            .collect();
        let sorted = sorted(evidence);
        let f = self.net.query(Query { evidence: &sorted, keep: &open, utility: false }, self.dense)?;
        Ok(f.table().iter().any(|p| *p > 0.0))
    }

    fn terminal(&mut self, evidence: &[(usize, usize)]) -> Result<()> {
        let sorted = sorted(evidence);
        let f = self.net.query(Query { evidence: &sorted, keep: self.keep, utility: self.utility }, self.dense)?;
        // kept variables fixed by a branch keep only their observed state
        let strides = super::factor::strides(f.card());
        for (i, value) in f.table().iter().enumerate() {
            let consistent = self.keep.iter().enumerate().all(|(k, &v)| {
                let s = (i / strides[k]) % f.card()[k];
                self.state[v].is_none_or(|e| e == s)
            });
            if consistent {
                self.acc[i] += value;
            }
        }
        Ok(())
    }
}

fn sorted(evidence: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut e = evidence.to_vec();
    e.sort_unstable();
    e
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::generators::fixtures;
    use crate::generators::maze::{generate_maze, Grid, MazeSpec};

    fn random_tree(net: &Network, vars: &[usize], depth: usize, d: usize, rng: &mut ChaCha8Rng) -> PolicyFn {
        if depth == 0 || vars.is_empty() || rng.random_bool(0.2) {
            return PolicyFn::Leaf(rng.random_range(0..net.card[d]));
        }
        let i = rng.random_range(0..vars.len());
        let rest: Vec<usize> = vars.iter().copied().filter(|&v| v != vars[i]).collect();
        PolicyFn::Split(vars[i], (0..net.card[vars[i]]).map(|_| random_tree(net, &rest, depth - 1, d, rng)).collect())
    }

    fn assert_close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    fn check(net: &Network, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = net.decisions.len();
        let trees: Vec<PolicyFn> =
            (0..n).map(|s| random_tree(net, net.info_set(s), 4, net.decisions[s], &mut rng)).collect();
        let dense: Vec<StagePolicy> = trees
            .iter()
            .enumerate()
            .map(|(s, t)| StagePolicy::Dense(net.decision_factor(s, &t.split_vars(), |x| t.action(x))))
            .collect();
        let cond: Vec<StagePolicy> = trees.iter().cloned().map(StagePolicy::Conditioned).collect();
        let dr: Vec<Option<&StagePolicy>> = dense.iter().map(Some).collect();
        let cr: Vec<Option<&StagePolicy>> = cond.iter().map(Some).collect();
        assert_close(net.expected_value(&dr).unwrap(), net.expected_value(&cr).unwrap());
        for stage in 0..n {
            let info = net.info_set(stage);
            let mut evidence = Vec::new();
            for &v in info {
                if rng.random_bool(0.3) {
                    evidence.push((v, rng.random_range(0..net.card[v])));
                }
            }
            let (p1, z1) = net.raw_valuation(stage, &evidence, &dr).unwrap();
            let (p2, z2) = net.raw_valuation(stage, &evidence, &cr).unwrap();
            assert_close(p1, p2);
            z1.iter().zip(&z2).for_each(|(a, b)| assert_close(*a, *b));
            if let Some(&var) = info.iter().find(|v| !evidence.iter().any(|e| e.0 == **v)) {
                let (p1, z1) = net.raw_split(stage, &evidence, var, &dr).unwrap();
                let (p2, z2) = net.raw_split(stage, &evidence, var, &cr).unwrap();
                p1.iter().zip(&p2).for_each(|(a, b)| assert_close(*a, *b));
                z1.iter().flatten().zip(z2.iter().flatten()).for_each(|(a, b)| assert_close(*a, *b));
            }
        }
    }

    #[test]
    fn conditioning_matches_dense_cpts() {
        let two = Network::compile(&fixtures::two_stage()).unwrap();
        let grid = Grid::parse("+-+-+\n|G  |\n+ +-+\n|   |\n+-+-+\n").unwrap();
        let maze = Network::compile(&generate_maze(&MazeSpec::new(grid, 3, 0.1)).unwrap()).unwrap();
        for seed in 0..20 {
            check(&two, seed);
            check(&maze, seed);
        }
    }
}
