//! Batch execution across independent problems.
//!
//! With the `parallel` feature (default) [`Execution::Parallel`] maps over a
//! rayon pool; without it every mode runs sequentially. Output order always
//! matches input order, so results do not depend on the mode.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    /// `threads == 0` uses rayon's default width.
    Parallel { threads: usize },
    #[default]
    Auto,
}

impl Execution {
    pub fn with_width(parallelism: usize) -> Self {
        if parallelism <= 1 {
            Execution::Sequential
        } else {
            Execution::Parallel { threads: parallelism }
        }
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            Execution::Auto => par_map(items, f, 0),
            Execution::Parallel { threads } => par_map(items, f, threads),
        }
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, R, F>(items: &[T], f: F, threads: usize) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if threads == 0 {
        return items.par_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(f).collect()),
        Err(_) => items.par_iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, R, F>(items: &[T], f: F, _threads: usize) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let items: Vec<u64> = (0..100).collect();
        let seq = Execution::Sequential.map(&items, |x| x * x);
        assert_eq!(seq, Execution::Parallel { threads: 3 }.map(&items, |x| x * x));
        assert_eq!(seq, Execution::Auto.map(&items, |x| x * x));
    }
}
