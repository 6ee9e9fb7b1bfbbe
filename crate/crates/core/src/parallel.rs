//! Document-parallel map with results returned in input order.
//!
//! Results never depend on the thread count: every item is computed
//! independently and callers reduce the ordered output sequentially.

use rayon::prelude::*;

use crate::error::{Error, Result};

pub(crate) struct Pool {
    inner: Option<rayon::ThreadPool>,
}

impl Pool {
    pub(crate) fn new(threads: usize) -> Result<Self> {
        if threads <= 1 {
            return Ok(Pool { inner: None });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map(|p| Pool { inner: Some(p) })
            .map_err(|e| Error::Validation(format!("cannot start {threads} threads: {e}")))
    }

    /// `f` over `items` (paired with a mutable slot each), in order.
    pub(crate) fn map<T, S, R, F>(&self, items: &[T], slots: &mut [S], f: F) -> Result<Vec<R>>
    where
        T: Sync,
        S: Send,
        R: Send,
        F: Fn(usize, &T, &mut S) -> Result<R> + Sync + Send,
    {
        match &self.inner {
            None => items
                .iter()
                .zip(slots.iter_mut())
                .enumerate()
                .map(|(i, (t, s))| f(i, t, s))
                .collect(),
            Some(pool) => pool.install(|| {
                items
                    .par_iter()
                    .zip(slots.par_iter_mut())
                    .enumerate()
                    .map(|(i, (t, s))| f(i, t, s))
                    .collect()
            }),
        }
    }
}
