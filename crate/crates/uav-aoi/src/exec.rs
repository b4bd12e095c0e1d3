//! Data-parallel execution helpers.
//!
//! With the default `parallel` feature the mapping helpers fan out on rayon;
//! without it they degrade to plain sequential loops. Results are collected
//! in input order and every worker derives its own RNG stream, so outputs do
//! not depend on thread scheduling. The `*_seq` variants are always
//! sequential and exist so benchmarks can compare both paths in one build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, preserving order.
#[cfg(feature = "parallel")]
pub fn map_collect<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Maps `f` over `items`, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Sequential reference implementation of [`map_collect`].
pub fn map_collect_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Maps `f` over mutable elements, preserving order.
#[cfg(feature = "parallel")]
pub fn map_collect_mut<T: Send, U: Send, F>(items: &mut [T], f: F) -> Vec<U>
where
    F: Fn(&mut T) -> U + Sync + Send,
{
    items.par_iter_mut().map(f).collect()
}

/// Maps `f` over mutable elements, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn map_collect_mut<T, U, F>(items: &mut [T], f: F) -> Vec<U>
where
    F: Fn(&mut T) -> U,
{
    items.iter_mut().map(f).collect()
}

/// Applies `f` to every element in place.
#[cfg(feature = "parallel")]
pub fn for_each_mut<T: Send, F>(items: &mut [T], f: F)
where
    F: Fn(&mut T) + Sync + Send,
{
    items.par_iter_mut().for_each(f);
}

/// Applies `f` to every element in place.
#[cfg(not(feature = "parallel"))]
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    F: Fn(&mut T),
{
    items.iter_mut().for_each(f);
}

/// Sequential reference implementation of [`for_each_mut`].
pub fn for_each_mut_seq<T, F>(items: &mut [T], f: F)
where
    F: Fn(&mut T),
{
    items.iter_mut().for_each(f);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let par = map_collect(&items, |&x| x * x + 1);
        let seq = map_collect_seq(&items, |&x| x * x + 1);
        assert_eq!(par, seq);
    }

    #[test]
    fn for_each_mut_matches_seq() {
        let mut a: Vec<u64> = (0..100).collect();
        let mut b = a.clone();
        for_each_mut(&mut a, |x| *x = *x * 3 + 7);
        for_each_mut_seq(&mut b, |x| *x = *x * 3 + 7);
        assert_eq!(a, b);
    }
}
