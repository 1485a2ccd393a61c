//! Execution strategy for per-item batch work.
//!
//! Everything data-parallel in this crate goes through [`map_ordered`]: the
//! closure runs once per input item, results are collected **in input
//! order**, and any reduction happens sequentially afterwards. Because the
//! per-item float work is identical either way and the reduction order is
//! fixed, [`Exec::Parallel`] and [`Exec::Sequential`] produce bitwise-equal
//! results — the parallel mode is purely a wall-clock optimization.

use serde::{Deserialize, Serialize};

/// How to run batch-level work.
///
/// Without the `parallel` cargo feature, `Parallel` silently degrades to the
/// sequential path (same results, one thread).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn from_flag(parallel: bool) -> Exec {
        if parallel {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Map `f` over `items`, returning outputs in input order.
#[cfg(feature = "parallel")]
pub fn map_ordered<T, U, F>(exec: Exec, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    match exec {
        Exec::Parallel => items.par_iter().map(f).collect(),
        Exec::Sequential => items.iter().map(f).collect(),
    }
}

/// Map `f` over `items`, returning outputs in input order.
#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, U, F>(_exec: Exec, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_input_order() {
        let items: Vec<u64> = (0..997).collect();
        let seq = map_ordered(Exec::Sequential, &items, |x| x * x + 1);
        let par = map_ordered(Exec::Parallel, &items, |x| x * x + 1);
        assert_eq!(seq, par);
        assert_eq!(seq[10], 101);
    }

    #[test]
    fn float_results_bitwise_equal_across_modes() {
        // Not just approximately equal: the contract is bit equality.
        let items: Vec<f64> = (0..2048).map(|i| (i as f64) * 0.37 - 11.0).collect();
        let f = |x: &f64| (x.sin() * x.exp_m1()).mul_add(1.000001, *x);
        let seq = map_ordered(Exec::Sequential, &items, f);
        let par = map_ordered(Exec::Parallel, &items, f);
        for (a, b) in seq.iter().zip(&par) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
