//! Data-parallel helpers.
//!
//! With the `parallel` feature these dispatch to rayon; without it they are
//! plain sequential iterators. Callers only use order-preserving maps and
//! reduce the mapped results themselves in index order, so both builds
//! produce bitwise identical output.

/// Maps `f` over `items`, returning results in input order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Maps `f` over `0..n`, returning results in index order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Whether this build runs data-parallel loops on a thread pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Sets the global worker count. A no-op in sequential builds or when the
/// pool was already initialized.
pub fn set_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
    }
}
