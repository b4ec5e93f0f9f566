//! Data-parallel helpers with a sequential fallback.
//!
//! Every reduction is split into fixed-size chunks whose partial sums are
//! combined in index order, so results are bit-identical for any worker
//! count and with or without the `parallel` feature.

use std::sync::atomic::{AtomicBool, Ordering};

const CHUNK: usize = 2048;

static SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Forces the sequential code path at runtime (benchmarks compare both).
pub fn set_sequential(on: bool) {
    SEQUENTIAL.store(on, Ordering::Relaxed);
}

pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && !SEQUENTIAL.load(Ordering::Relaxed)
}

/// Fills `out[i] = f(i)`.
pub fn fill<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        out.par_iter_mut()
            .with_min_len(512)
            .enumerate()
            .for_each(|(i, o)| *o = f(i));
        return;
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i);
    }
}

/// Applies `f` to fixed-width chunks of `out`; `f` receives the chunk's start index.
pub fn chunks_mut<T, F>(out: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let width = width.max(1);
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        out.par_chunks_mut(width)
            .enumerate()
            .for_each(|(c, chunk)| f(c * width, chunk));
        return;
    }
    for (c, chunk) in out.chunks_mut(width).enumerate() {
        f(c * width, chunk);
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Deterministic `Σ_{i<n} f(i)`.
pub fn sum_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partial = map(chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        s
    });
    partial.iter().sum()
}

pub fn sum(v: &[f64]) -> f64 {
    sum_by(v.len(), |i| v[i])
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_by(a.len(), |i| a[i] * b[i])
}

/// Deterministic maximum of `f(i)` (NaN-free inputs assumed).
pub fn max_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partial = map(chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        (lo..hi).map(&f).fold(f64::NEG_INFINITY, f64::max)
    });
    partial.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_do_not_depend_on_mode() {
        let v: Vec<f64> = (0..100_003).map(|i| ((i as f64) * 0.37).sin() * 1e-3).collect();
        set_sequential(true);
        let a = sum(&v);
        set_sequential(false);
        let b = sum(&v);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn max_and_fill() {
        let mut out = vec![0.0; 5000];
        fill(&mut out, |i| i as f64);
        assert_eq!(max_by(out.len(), |i| out[i]), 4999.0);
        assert_eq!(max_by(0, |_| 1.0), f64::NEG_INFINITY);
    }
}
