//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] runs on
//! the rayon global pool; without it every request is served sequentially.
//! Each output element is produced by exactly one closure call, so results do
//! not depend on the execution mode or the number of threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Whether this mode actually runs on more than one thread in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `out[i] = f(i)` for every index.
pub fn fill_indexed<T, F>(out: &mut [T], exec: Execution, f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
        return;
    }
    let _ = exec;
    out.iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
}

/// `f` over `items`, collecting results in input order.
pub fn map_collect<I, T, F>(items: &[I], exec: Execution, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let mut a = vec![0u64; 1000];
        let mut b = vec![0u64; 1000];
        fill_indexed(&mut a, Execution::Sequential, |i| (i * i) as u64);
        fill_indexed(&mut b, Execution::Parallel, |i| (i * i) as u64);
        assert_eq!(a, b);
        let items: Vec<u32> = (0..100).collect();
        assert_eq!(
            map_collect(&items, Execution::Sequential, |x| x + 1),
            map_collect(&items, Execution::Parallel, |x| x + 1)
        );
    }
}
