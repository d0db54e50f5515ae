//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper returns results in index order, so callers observe the same
//! values whether the work ran on one thread or many. With the `parallel`
//! feature disabled the helpers compile down to plain iterator loops.

/// Degree of parallelism requested by a caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    #[default]
    Sequential,
    /// Run on a dedicated pool with this many worker threads.
    Threads(usize),
}

impl Parallelism {
    pub fn from_threads(threads: usize) -> Self {
        if threads <= 1 {
            Parallelism::Sequential
        } else {
            Parallelism::Threads(threads)
        }
    }

    pub fn threads(self) -> usize {
        match self {
            Parallelism::Sequential => 1,
            Parallelism::Threads(t) => t.max(1),
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self.threads() > 1
    }
}

/// Runs `f` inside a pool sized for `par`. Nested helpers pick up the pool.
#[cfg(feature = "parallel")]
pub fn install<R: Send>(par: Parallelism, f: impl FnOnce() -> R + Send) -> R {
    if !par.is_parallel() {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(par.threads()).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn install<R: Send>(_par: Parallelism, f: impl FnOnce() -> R + Send) -> R {
    f()
}

/// `(0..len).map(f).collect()`, possibly in parallel.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(par: Parallelism, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    use rayon::prelude::*;
    if par.is_parallel() {
        (0..len).into_par_iter().map(f).collect()
    } else {
        (0..len).map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(_par: Parallelism, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    (0..len).map(f).collect()
}

/// Argmin over `0..len` of a scalar key, first index wins on ties.
///
/// Chunks are reduced in index order so the result is independent of the
/// thread count. Entries whose key is `None` are skipped.
pub fn argmin_indexed<F>(par: Parallelism, len: usize, key: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> Option<f64> + Send + Sync,
{
    let chunk = chunk_len(par, len);
    let n_chunks = len.div_ceil(chunk.max(1));
    let partial = map_indexed(par, n_chunks, |c| {
        let start = c * chunk;
        let end = (start + chunk).min(len);
        let mut best: Option<(usize, f64)> = None;
        for idx in start..end {
            if let Some(v) = key(idx) {
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((idx, v));
                }
            }
        }
        best
    });
    partial
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<(usize, f64)>, (i, v)| match acc {
            Some((_, b)) if b <= v => acc,
            _ => Some((i, v)),
        })
}

fn chunk_len(par: Parallelism, len: usize) -> usize {
    if par.is_parallel() {
        // a few chunks per worker keeps the pool busy
        len.div_ceil(par.threads() * 8).max(1024)
    } else {
        len.max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmin_first_index_wins_regardless_of_threads() {
        let vals: Vec<f64> = (0..10_000).map(|i| ((i % 97) as f64 - 50.0).abs()).collect();
        let seq = argmin_indexed(Parallelism::Sequential, vals.len(), |i| Some(vals[i]));
        let par = install(Parallelism::Threads(4), || {
            argmin_indexed(Parallelism::Threads(4), vals.len(), |i| Some(vals[i]))
        });
        assert_eq!(seq, Some((50, 0.0)));
        assert_eq!(seq, par);
    }

    #[test]
    fn argmin_skips_none_and_handles_empty() {
        assert_eq!(argmin_indexed(Parallelism::Sequential, 0, |_| Some(1.0)), None);
        let r = argmin_indexed(Parallelism::Sequential, 5, |i| (i > 2).then_some(-(i as f64)));
        assert_eq!(r, Some((4, -4.0)));
    }

    #[test]
    fn map_indexed_preserves_order() {
        let out = install(Parallelism::Threads(3), || {
            map_indexed(Parallelism::Threads(3), 100, |i| i * i)
        });
        assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
    }
}
