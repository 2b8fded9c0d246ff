//! Data-parallel map over independent work items.
//!
//! Sweeps evaluate the same expensive kernel (finite-difference Hessians,
//! Newton solves) at many precomputed points. `map_points` fans that out with
//! rayon when the `parallel` feature is on and falls back to a plain
//! sequential map otherwise. Output order always matches input order and all
//! reductions downstream run sequentially over that order, so results are
//! identical in both modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, in parallel when the `parallel` feature is enabled.
pub fn map_points<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sequential map with the same contract as `map_points`. Kept unconditionally
/// so benchmarks can compare both paths in one build.
pub fn map_points_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}
