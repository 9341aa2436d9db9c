//! Parallel sums whose result does not depend on the worker count: the
//! index range is cut into fixed-size blocks, blocks are summed in parallel,
//! and block totals are added serially in index order.

use rayon::prelude::*;

pub(crate) const BLOCK: u64 = 4096;

/// `sum_{i in 0..n} f(i)` with a fixed reduction shape.
pub(crate) fn det_sum<F>(n: u64, f: F) -> f64
where
    F: Fn(u64) -> f64 + Sync,
{
    det_block_sum(n, BLOCK, |lo, hi| (lo..hi).map(&f).sum())
}

/// Sums `block(lo, hi)` over consecutive ranges of length `size` covering
/// `0..n`, adding the partial results in order.
pub(crate) fn det_block_sum<F>(n: u64, size: u64, block: F) -> f64
where
    F: Fn(u64, u64) -> f64 + Sync,
{
    let blocks = n.div_ceil(size);
    let parts: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| block(b * size, ((b + 1) * size).min(n)))
        .collect();
    parts.into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_of_pool_size() {
        let f = |i: u64| ((i as f64) * 0.37).sin();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| det_sum(100_000, f));
        let b = four.install(|| det_sum(100_000, f));
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
