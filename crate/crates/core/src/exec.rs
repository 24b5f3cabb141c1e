//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers fan out over rayon's
//! pool; without it they run in order on the calling thread. Results are
//! returned in input order either way, and every caller keeps its own RNG
//! state per item, so both paths produce identical numbers.

/// Applies `f` to every element, returning results in order.
pub fn map_mut<T, R, F>(items: &mut [T], f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(usize, &mut T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        parallel::map_mut(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        sequential::map_mut(items, f)
    }
}

/// Maps `f` over `inputs`, returning results in order.
pub fn map<T, R, F>(inputs: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        parallel::map(inputs, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        sequential::map(inputs, f)
    }
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

pub mod sequential {
    pub fn map_mut<T, R, F>(items: &mut [T], f: F) -> Vec<R>
    where
        F: Fn(usize, &mut T) -> R,
    {
        items.iter_mut().enumerate().map(|(i, t)| f(i, t)).collect()
    }

    pub fn map<T, R, F>(inputs: &[T], f: F) -> Vec<R>
    where
        F: Fn(&T) -> R,
    {
        inputs.iter().map(f).collect()
    }
}

#[cfg(feature = "parallel")]
pub mod parallel {
    use rayon::prelude::*;

    pub fn map_mut<T, R, F>(items: &mut [T], f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(usize, &mut T) -> R + Sync + Send,
    {
        items
            .par_iter_mut()
            .enumerate()
            .map(|(i, t)| f(i, t))
            .collect()
    }

    pub fn map<T, R, F>(inputs: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        inputs.par_iter().map(f).collect()
    }
}
