//! Thin data-parallel layer.
//!
//! With the `parallel` feature the helpers dispatch to rayon; without it they
//! run the same closures sequentially. Sums are always formed from fixed-size
//! chunks whose partial results are added in index order, so the value of a
//! reduction does not depend on the thread count or on the feature.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length for ordered reductions.
pub const CHUNK: usize = 512;

/// Evaluates `f(i)` for `i in 0..n` and collects the results in order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Writes `f(i)` into `out[i]`.
pub fn fill<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, o) in out.iter_mut().enumerate() {
            *o = f(i);
        }
    }
}

/// Deterministic sum of `f(i)` over `0..n`.
pub fn sum_range<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partials = map_range(chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        s
    });
    partials.iter().sum()
}

/// Deterministic dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_range(a.len(), |i| a[i] * b[i])
}

/// Runs independent jobs, returning their results in input order.
pub fn run_all<T, J, F>(jobs: Vec<J>, f: F) -> Vec<T>
where
    T: Send,
    J: Send + Sync,
    F: Fn(&J) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        jobs.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_sum_matches_sequential_chunking() {
        let n: usize = 10_007;
        let f = |i: usize| ((i as f64) * 0.37).sin();
        let mut expect = 0.0;
        for c in 0..n.div_ceil(CHUNK) {
            let mut s = 0.0;
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                s += f(i);
            }
            expect += s;
        }
        assert_eq!(sum_range(n, f).to_bits(), expect.to_bits());
    }

    #[test]
    fn map_preserves_order() {
        let v = map_range(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }
}
