//! Sum-product variable elimination with a greedy min-fill ordering.

use std::collections::BTreeSet;

use super::factor::Factor;

/// Greedy min-fill elimination order for `eliminate`, given the interaction
/// graph induced by `factors`. Ties go to the lowest variable index.
pub(crate) fn min_fill_order(factors: &[Factor], eliminate: &BTreeSet<usize>, n_vars: usize) -> Vec<usize> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_vars];
    for f in factors {
        for &a in f.scope() {
            for &b in f.scope() {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
    }
    let mut remaining = eliminate.clone();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let mut best: Option<(usize, usize)> = None;
        for &v in &remaining {
            let fill = fill_in(&adj, v);
            if best.is_none_or(|(f, _)| fill < f) {
                best = Some((fill, v));
                if fill == 0 {
                    break;
                }
            }
        }
        let (_, v) = best.expect("non-empty");
        let neighbours: Vec<usize> = adj[v].iter().copied().collect();
        for &a in &neighbours {
            adj[a].remove(&v);
            for &b in &neighbours {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
        adj[v].clear();
        remaining.remove(&v);
        order.push(v);
    }
    order
}

fn fill_in(adj: &[BTreeSet<usize>], v: usize) -> usize {
    let n: Vec<usize> = adj[v].iter().copied().collect();
    let mut fill = 0;
    for (i, &a) in n.iter().enumerate() {
        for &b in &n[i + 1..] {
            if !adj[a].contains(&b) {
                fill += 1;
            }
        }
    }
    fill
}

/// Sums every variable outside `keep` out of the product of `factors`. The
/// result's scope is exactly `keep` (sorted); kept variables that appear in no
/// factor are broadcast with `cards`.
pub(crate) fn eliminate(mut factors: Vec<Factor>, keep: &[usize], cards: &[usize]) -> Factor {
    let keep_set: BTreeSet<usize> = keep.iter().copied().collect();
    let to_eliminate: BTreeSet<usize> = factors
        .iter()
        .flat_map(|f| f.scope().iter().copied())
        .filter(|v| !keep_set.contains(v))
        .collect();
    for v in min_fill_order(&factors, &to_eliminate, cards.len()) {
        let (bucket, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.contains(v));
        factors = rest;
        let joint = bucket
            .iter()
            .skip(1)
            .fold(bucket[0].clone(), |acc, f| acc.product(f));
        factors.push(joint.sum_out(v));
    }
    let mut result = factors
        .iter()
        .fold(Factor::scalar(1.0), |acc, f| acc.product(f));
    let missing: Vec<usize> = keep_set
        .iter()
        .copied()
        .filter(|v| !result.contains(*v))
        .collect();
    if !missing.is_empty() {
        let card: Vec<usize> = missing.iter().map(|&v| cards[v]).collect();
        let n = card.iter().product();
        result = result.product(&Factor::new(missing, card, vec![1.0; n]));
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_order_has_no_fill() {
        // a - b - c - d chain: eliminating an end never adds fill
        let f = |a, b| Factor::new(vec![a, b], vec![2, 2], vec![1.0; 4]);
        let factors = vec![f(0, 1), f(1, 2), f(2, 3)];
        let order = min_fill_order(&factors, &[0, 1, 2, 3].into_iter().collect(), 4);
        assert_eq!(order, vec![0, 1, 2, 3]);
    }

    #[test]
    fn eliminate_matches_brute_force_marginal() {
        let p0 = Factor::new(vec![0], vec![2], vec![0.25, 0.75]);
        let p1 = Factor::new(vec![0, 1], vec![2, 3], vec![0.2, 0.3, 0.5, 0.6, 0.1, 0.3]);
        let p2 = Factor::new(vec![1, 2], vec![3, 2], vec![0.9, 0.1, 0.4, 0.6, 0.5, 0.5]);
        let marg = eliminate(vec![p0.clone(), p1.clone(), p2.clone()], &[2], &[2, 3, 2]);
        for x2 in 0..2 {
            let mut brute = 0.0;
            for x0 in 0..2 {
                for x1 in 0..3 {
                    let st = [x0, x1, x2];
                    brute += p0.get(|v| st[v]) * p1.get(|v| st[v]) * p2.get(|v| st[v]);
                }
            }
            assert!((marg.table()[x2] - brute).abs() < 1e-15);
        }
    }

    #[test]
    fn kept_variable_without_factor_is_broadcast() {
        let f = Factor::new(vec![0], vec![2], vec![0.5, 0.5]);
        let r = eliminate(vec![f], &[1], &[2, 3]);
        assert_eq!(r.scope(), &[1]);
        assert_eq!(r.table(), &[1.0, 1.0, 1.0]);
    }
}
