//! Dense factors over discrete variables.
//!
//! A factor's scope is kept sorted by variable index and its table is laid out
//! row-major over the scope, last variable fastest. All reductions sum in
//! ascending state order so that results are bit-reproducible.

#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    scope: Vec<usize>,
    card: Vec<usize>,
    table: Vec<f64>,
}

impl Factor {
    pub fn new(scope: Vec<usize>, card: Vec<usize>, table: Vec<f64>) -> Self {
        debug_assert!(scope.windows(2).all(|w| w[0] < w[1]), "scope must be sorted");
        assert_eq!(scope.len(), card.len());
        assert_eq!(table.len(), card.iter().product::<usize>());
        Factor { scope, card, table }
    }

    pub fn scalar(value: f64) -> Self {
        Factor {
            scope: Vec::new(),
            card: Vec::new(),
            table: vec![value],
        }
    }

    /// Builds a factor from values listed over `vars` in the given (unsorted)
    /// order, last variable fastest.
    pub fn from_ordered(vars: &[usize], card: &[usize], values: &[f64]) -> Self {
        let mut perm: Vec<usize> = (0..vars.len()).collect();
        perm.sort_by_key(|&i| vars[i]);
        let scope: Vec<usize> = perm.iter().map(|&i| vars[i]).collect();
        let sorted_card: Vec<usize> = perm.iter().map(|&i| card[i]).collect();
        let sorted_strides = strides(&sorted_card);
        // stride in the sorted table for each position of the ordered listing
        let mut stride_of = vec![0; vars.len()];
        for (pos, &i) in perm.iter().enumerate() {
            stride_of[i] = sorted_strides[pos];
        }
        let mut table = vec![0.0; values.len()];
        let mut assign = vec![0usize; vars.len()];
        let mut target = 0usize;
        for &v in values {
            table[target] = v;
            for l in (0..vars.len()).rev() {
                assign[l] += 1;
                if assign[l] < card[l] {
                    target += stride_of[l];
                    break;
                }
                target -= (card[l] - 1) * stride_of[l];
                assign[l] = 0;
            }
        }
        Factor::new(scope, sorted_card, table)
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn card(&self) -> &[usize] {
        &self.card
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn contains(&self, var: usize) -> bool {
        self.scope.binary_search(&var).is_ok()
    }

    /// Table index of the entry whose scope variables take the states given
    /// by `state_of`.
    pub fn index_with(&self, state_of: impl Fn(usize) -> usize) -> usize {
        let mut idx = 0;
        for (v, c) in self.scope.iter().zip(&self.card) {
            idx = idx * c + state_of(*v);
        }
        idx
    }

    pub fn get(&self, state_of: impl Fn(usize) -> usize) -> f64 {
        self.table[self.index_with(state_of)]
    }

    pub fn product(&self, other: &Factor) -> Factor {
        if other.scope.is_empty() {
            let s = other.table[0];
            return Factor {
                scope: self.scope.clone(),
                card: self.card.clone(),
                table: self.table.iter().map(|x| x * s).collect(),
            };
        }
        let mut scope = Vec::with_capacity(self.scope.len() + other.scope.len());
        let mut card = Vec::with_capacity(scope.capacity());
        let (mut i, mut j) = (0, 0);
        while i < self.scope.len() || j < other.scope.len() {
            let take_a = j == other.scope.len()
                || (i < self.scope.len() && self.scope[i] <= other.scope[j]);
            if take_a {
                if j < other.scope.len() && self.scope[i] == other.scope[j] {
                    j += 1;
                }
                scope.push(self.scope[i]);
                card.push(self.card[i]);
                i += 1;
            } else {
                scope.push(other.scope[j]);
                card.push(other.card[j]);
                j += 1;
            }
        }
        let sa = self.strides_in(&scope);
        let sb = other.strides_in(&scope);
        let n: usize = card.iter().product();
        let mut table = Vec::with_capacity(n);
        let mut assign = vec![0usize; scope.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..n {
            table.push(self.table[ia] * other.table[ib]);
            for l in (0..scope.len()).rev() {
                assign[l] += 1;
                if assign[l] < card[l] {
                    ia += sa[l];
                    ib += sb[l];
                    break;
                }
                ia -= (card[l] - 1) * sa[l];
                ib -= (card[l] - 1) * sb[l];
                assign[l] = 0;
            }
        }
        Factor { scope, card, table }
    }

    /// Stride of each variable of `scope` in this factor's table, 0 when absent.
    fn strides_in(&self, scope: &[usize]) -> Vec<usize> {
        let own = strides(&self.card);
        scope
            .iter()
            .map(|v| match self.scope.binary_search(v) {
                Ok(p) => own[p],
                Err(_) => 0,
            })
            .collect()
    }

    fn split_at_var(&self, var: usize) -> Option<(usize, usize, usize, usize)> {
        let pos = self.scope.binary_search(&var).ok()?;
        let outer: usize = self.card[..pos].iter().product();
        let inner: usize = self.card[pos + 1..].iter().product();
        Some((pos, outer, self.card[pos], inner))
    }

    pub fn sum_out(&self, var: usize) -> Factor {
        let Some((pos, outer, k, inner)) = self.split_at_var(var) else {
            return self.clone();
        };
        let mut table = vec![0.0; outer * inner];
        for o in 0..outer {
            for s in 0..k {
                let src = &self.table[(o * k + s) * inner..(o * k + s + 1) * inner];
                let dst = &mut table[o * inner..(o + 1) * inner];
                for (d, x) in dst.iter_mut().zip(src) {
                    *d += x;
                }
            }
        }
        self.without(pos, table)
    }

    /// Restricts `var` to `state`, dropping it from the scope.
    pub fn reduce(&self, var: usize, state: usize) -> Factor {
        let Some((pos, outer, k, inner)) = self.split_at_var(var) else {
            return self.clone();
        };
        let mut table = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let start = (o * k + state) * inner;
            table.extend_from_slice(&self.table[start..start + inner]);
        }
        self.without(pos, table)
    }

    fn without(&self, pos: usize, table: Vec<f64>) -> Factor {
        let mut scope = self.scope.clone();
        let mut card = self.card.clone();
        scope.remove(pos);
        card.remove(pos);
        Factor { scope, card, table }
    }
}

pub(crate) fn strides(card: &[usize]) -> Vec<usize> {
    let mut s = vec![1; card.len()];
    for i in (0..card.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * card[i + 1];
    }
    s
}
