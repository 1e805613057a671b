//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper produces results in index order and leaves reductions to the
//! caller, so sequential and parallel runs are bit-identical. Without the
//! `parallel` feature, or with [`Exec::Sequential`] selected, everything runs
//! on the calling thread.

use std::sync::atomic::{AtomicBool, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

static SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Selects the process-wide execution mode.
pub fn set_exec(exec: Exec) {
    SEQUENTIAL.store(exec == Exec::Sequential, Ordering::Relaxed);
}

pub fn exec() -> Exec {
    if cfg!(feature = "parallel") && !SEQUENTIAL.load(Ordering::Relaxed) {
        Exec::Parallel
    } else {
        Exec::Sequential
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec() == Exec::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Calls `f(k, chunk)` for consecutive chunks of `data` of length `chunk`.
pub fn for_each_chunk<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    if exec() == Exec::Parallel {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(k, c)| f(k, c));
        return;
    }
    data.chunks_mut(chunk).enumerate().for_each(|(k, c)| f(k, c));
}

/// Caps the worker count. One thread selects sequential execution; larger
/// counts size the global pool, which only works before its first use.
pub fn set_threads(threads: usize) {
    if threads <= 1 {
        set_exec(Exec::Sequential);
        return;
    }
    #[cfg(feature = "parallel")]
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        log::warn!("thread pool already initialized: {e}");
    }
}

/// Runs `f` with the execution mode temporarily switched, restoring it after.
pub fn with_exec<R>(mode: Exec, f: impl FnOnce() -> R) -> R {
    let before = exec();
    set_exec(mode);
    let out = f();
    set_exec(before);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_keeps_order_in_both_modes() {
        let a = with_exec(Exec::Sequential, || map(100, |i| i * i));
        let b = with_exec(Exec::Parallel, || map(100, |i| i * i));
        assert_eq!(a, b);
        assert_eq!(a[7], 49);
    }

    #[test]
    fn chunks_cover_everything() {
        let mut v = vec![0usize; 10];
        for_each_chunk(&mut v, 3, |k, c| c.iter_mut().for_each(|x| *x = k));
        assert_eq!(v, vec![0, 0, 0, 1, 1, 1, 2, 2, 2, 3]);
    }
}
