//! Execution policy for the data-parallel loops.
//!
//! Every parallel loop in the crate is written as a map over independent
//! items (nodes, rows, chunks, table cells) whose results are combined in
//! index order. Both policies therefore produce bit-identical output; the
//! parallel policy only changes who computes each item. Without the
//! `parallel` feature, [`ExecPolicy::Parallel`] runs sequentially.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecPolicy {
    Sequential,
    #[default]
    Parallel,
}

impl ExecPolicy {
    /// True when this policy will actually fan out over the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecPolicy::Parallel
    }

    /// `(0..n).map(f).collect()`, possibly in parallel. Output order is index order.
    pub fn map_indices<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Calls `f(chunk_index, chunk)` over `data.chunks_mut(chunk_len)`.
    pub fn for_each_chunk_mut<T, F>(self, data: &mut [T], chunk_len: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        assert!(chunk_len > 0);
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            data.par_chunks_mut(chunk_len)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
            return;
        }
        data.chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = ExecPolicy::Sequential.map_indices(1000, f);
        let b = ExecPolicy::Parallel.map_indices(1000, f);
        assert_eq!(a, b);

        let mut x = vec![0usize; 103];
        let mut y = vec![0usize; 103];
        ExecPolicy::Sequential.for_each_chunk_mut(&mut x, 10, |i, c| c.fill(i));
        ExecPolicy::Parallel.for_each_chunk_mut(&mut y, 10, |i, c| c.fill(i));
        assert_eq!(x, y);
        assert_eq!(x[102], 10);
    }
}
