//! Order-preserving parallel map over sample indices.

use rayon::prelude::*;

use crate::error::{GeoError, Result};

/// Evaluates `f(0..n)` and returns the results in index order.
///
/// `threads == 0` (or 1) runs serially on the calling thread. Results do not
/// depend on the thread count as long as `f` only depends on its index.
pub fn map_indexed<R, F>(threads: usize, n: usize, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    if threads <= 1 {
        return Ok((0..n).map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| GeoError::InvalidParameter(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serial_and_parallel_agree() {
        let f = |i: usize| ((i as f64).sin() * 1e3).fract();
        let a = map_indexed(0, 1000, f).unwrap();
        let b = map_indexed(4, 1000, f).unwrap();
        assert_eq!(a, b);
        assert!(map_indexed(3, 0, f).unwrap().is_empty());
    }
}
