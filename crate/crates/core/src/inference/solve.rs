//! Exact optimal policies by dynamic programming over reachable information
//! states.
//!
//! With no-forgetting, the maximum expected value is the nested expression
//! `sum_{o1} max_{d1} sum_{o2} max_{d2} ... sum P * V`. The recursion below
//! walks it stage by stage, pruning observation configurations of zero
//! probability, and carries unnormalized sums so that no division is needed.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{argmax, Factor, Network, Query};
use crate::error::{Error, Result};
use crate::model::{Context, Policy, PolicyNode, PolicyTree};

/// Default limit on the number of reachable information states expanded.
pub const DEFAULT_STATE_CAP: u64 = 1 << 20;

#[derive(Clone, Debug, Serialize)]
pub struct Solution {
    pub value: f64,
    /// Fully split trees; unreachable branches prescribe action 0.
    pub policy: Policy,
    /// Every reachable information state with its optimal action.
    pub table: Vec<(String, Context, usize)>,
    pub states_expanded: u64,
}

struct Search<'a> {
    net: &'a Network,
    cap: u64,
    expanded: u64,
    /// per stage: full information assignment (info-set order) -> action
    table: Vec<BTreeMap<Vec<usize>, usize>>,
}

impl Network {
    /// Maximum expected value over all policies that may use every
    /// informational predecessor. Fails once more than `cap` information
    /// states with nonzero probability would have to be expanded.
    pub fn solve_optimal(&self, cap: u64) -> Result<Solution> {
        for k in 1..self.decisions.len() {
            let prev = self.decisions[k - 1];
            let nested = self.info[k - 1].iter().chain(std::iter::once(&prev)).all(|v| self.info[k].contains(v));
            if !nested {
                return Err(Error::Invalid(format!(
                    "solver requires no-forgetting; `{}` forgets earlier information",
                    self.ids[self.decisions[k]]
                )));
            }
        }
        let mut search = Search {
            net: self,
            cap,
            expanded: 0,
            table: vec![BTreeMap::new(); self.decisions.len()],
        };
        let value = if self.decisions.is_empty() {
            self.expected_value(&[])?
        } else {
            search.stage(0, &mut Vec::new())?
        };

        let mut table = Vec::new();
        let mut trees = Vec::new();
        for (stage, entries) in search.table.iter().enumerate() {
            let info = &self.info[stage];
            let decision = self.ids[self.decisions[stage]].clone();
            for (states, &action) in entries {
                let ctx: Context = info.iter().zip(states).map(|(&v, &s)| (self.ids[v].clone(), s)).collect();
                table.push((decision.clone(), ctx, action));
            }
            let all: Vec<(&Vec<usize>, usize)> = entries.iter().map(|(k, v)| (k, *v)).collect();
            trees.push(PolicyTree {
                decision,
                root: self.build_tree(info, 0, &all),
            });
        }
        Ok(Solution {
            value,
            policy: Policy { trees },
            table,
            states_expanded: search.expanded,
        })
    }

    fn build_tree(&self, info: &[usize], depth: usize, entries: &[(&Vec<usize>, usize)]) -> PolicyNode {
        if entries.is_empty() {
            return PolicyNode::leaf(0);
        }
        if depth == info.len() {
            return PolicyNode::leaf(entries[0].1);
        }
        let var = info[depth];
        let children = (0..self.card[var])
            .map(|s| {
                let sub: Vec<(&Vec<usize>, usize)> = entries.iter().filter(|e| e.0[depth] == s).copied().collect();
                self.build_tree(info, depth + 1, &sub)
            })
            .collect();
        PolicyNode::Split {
            split: self.ids[var].clone(),
            children,
        }
    }
}

impl Search<'_> {
    fn stage(&mut self, k: usize, evidence: &mut Vec<(usize, usize)>) -> Result<f64> {
        let net = self.net;
        let d = net.decisions[k];
        let last = k + 1 == net.decisions.len();
        let mut new_obs: Vec<usize> = net.info[k]
            .iter()
            .copied()
            .filter(|v| !evidence.iter().any(|e| e.0 == *v))
            .collect();
        new_obs.sort_unstable();

        let free: Vec<Option<&Factor>> = vec![None; net.decisions.len()];
        let sorted_ev = sorted(evidence);
        let prob = net.query(Query { evidence: &sorted_ev, keep: &new_obs, utility: false }, &free)?;
        let util = if last {
            let mut keep = new_obs.clone();
            keep.push(d);
            Some(net.query(Query { evidence: &sorted_ev, keep: &keep, utility: true }, &free)?)
        } else {
            None
        };

        let mut total = 0.0;
        let mut state = vec![0usize; net.len()];
        for &(v, s) in evidence.iter() {
            state[v] = s;
        }
        let combos: usize = new_obs.iter().map(|&v| net.card[v]).product();
        for _ in 0..combos {
            if prob.get(|v| state[v]) > 0.0 {
                self.expanded += 1;
                if self.expanded > self.cap {
                    return Err(Error::TooLarge { cap: self.cap });
                }
                let base = evidence.len();
                evidence.extend(new_obs.iter().map(|&v| (v, state[v])));
                let values: Vec<f64> = match &util {
                    Some(u) => (0..net.card[d])
                        .map(|a| {
                            state[d] = a;
                            u.get(|v| state[v])
                        })
                        .collect(),
                    None => {
                        let mut out = Vec::with_capacity(net.card[d]);
                        for a in 0..net.card[d] {
                            evidence.push((d, a));
                            out.push(self.stage(k + 1, evidence)?);
                            evidence.pop();
                        }
                        out
                    }
                };
                let best = argmax(&values);
                total += values[best];
                let key: Vec<usize> = net.info[k]
                    .iter()
                    .map(|v| evidence.iter().find(|e| e.0 == *v).map(|e| e.1).expect("info state assigned"))
                    .collect();
                self.table[k].insert(key, best);
                evidence.truncate(base);
            }
            for &v in new_obs.iter().rev() {
                state[v] += 1;
                if state[v] < net.card[v] {
                    break;
                }
                state[v] = 0;
            }
        }
        Ok(total)
    }
}

fn sorted(evidence: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut e = evidence.to_vec();
    e.sort_unstable();
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::fixtures;

    #[test]
    fn exor_optimum_is_one() {
        let net = Network::compile(&fixtures::exor()).unwrap();
        let sol = net.solve_optimal(DEFAULT_STATE_CAP).unwrap();
        assert_eq!(sol.value, 1.0);
        assert_eq!(net.eval_policy(&sol.policy).unwrap(), 1.0);
        assert_eq!(sol.table.len(), 4);
    }

    #[test]
    fn one_chance_optimum() {
        let net = Network::compile(&fixtures::one_chance()).unwrap();
        assert!((net.solve_optimal(DEFAULT_STATE_CAP).unwrap().value - 0.8).abs() < 1e-15);
    }

    #[test]
    fn cap_is_enforced() {
        let net = Network::compile(&fixtures::exor()).unwrap();
        assert!(matches!(net.solve_optimal(3), Err(Error::TooLarge { cap: 3 })));
    }

    #[test]
    fn two_stage_policy_attains_optimum() {
        let net = Network::compile(&fixtures::two_stage()).unwrap();
        let sol = net.solve_optimal(DEFAULT_STATE_CAP).unwrap();
        let v = net.eval_policy(&sol.policy).unwrap();
        assert!((v - sol.value).abs() < 1e-12, "{v} vs {}", sol.value);
    }
}
