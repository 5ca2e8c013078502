//! Epsilon ladders and the worker pool that maps over them.

use crate::error::{Result, WpError};

/// `2^{-lo}, ..., 2^{-hi}`.
pub fn dyadic(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(-k)).collect()
}

/// Sorts a ladder by decreasing `eps` and rejects empty ladders, repeats and
/// values outside `(0, 1]`.
pub fn normalize(ladder: &[f64]) -> Result<Vec<f64>> {
    if ladder.is_empty() {
        return Err(WpError::Config("empty eps ladder".into()));
    }
    if let Some(e) = ladder.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
        return Err(WpError::Config(format!("eps = {e} is outside (0, 1]")));
    }
    let mut v = ladder.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    if v.windows(2).any(|w| w[0] == w[1]) {
        return Err(WpError::Config("repeated eps in ladder".into()));
    }
    Ok(v)
}

/// Applies `f` to every ladder point and returns the results in ladder
/// order. With `workers > 1` the points run concurrently; each point is an
/// independent job, so the results do not depend on `workers`.
pub fn map_ladder<T, F>(ladder: &[f64], workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(f64) -> Result<T> + Sync,
{
    #[cfg(feature = "parallel")]
    if workers > 1 && ladder.len() > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| WpError::Config(format!("worker pool: {e}")))?;
        return pool.install(|| ladder.par_iter().map(|&e| f(e)).collect());
    }
    let _ = workers;
    ladder.iter().map(|&e| f(e)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_sorts_and_rejects() {
        assert_eq!(normalize(&[0.25, 0.5]).unwrap(), vec![0.5, 0.25]);
        assert!(normalize(&[]).is_err());
        assert!(normalize(&[0.5, 0.5]).is_err());
        assert!(normalize(&[1.5]).is_err());
        assert!(normalize(&[0.0]).is_err());
    }

    #[test]
    fn map_preserves_order_for_any_worker_count() {
        let l = dyadic(1, 6);
        let a = map_ladder(&l, 1, |e| Ok(e.ln())).unwrap();
        let b = map_ladder(&l, 3, |e| Ok(e.ln())).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
    }

    #[test]
    fn map_propagates_errors() {
        let r: Result<Vec<f64>> = map_ladder(&[0.5, 0.25], 2, |e| {
            if e < 0.3 {
                Err(WpError::Config("boom".into()))
            } else {
                Ok(e)
            }
        });
        assert!(r.is_err());
    }
}
