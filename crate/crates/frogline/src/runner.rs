//! Replica fan-out over a worker pool.
//!
//! Results come back in replica order whatever the pool size, and each
//! replica draws from its own stream, so outputs never depend on `threads`.

use rayon::prelude::*;

/// Runs `job(0..n)` on `threads` workers (0 means one per core).
pub fn run_indexed<T, F>(threads: usize, n: usize, job: F) -> anyhow::Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(|| (0..n).into_par_iter().map(&job).collect()))
}

/// As [`run_indexed`] for fallible jobs; the first error in replica order wins.
pub fn try_run_indexed<T, F>(threads: usize, n: usize, job: F) -> anyhow::Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> anyhow::Result<T> + Sync + Send,
{
    run_indexed(threads, n, job)?.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_kept() {
        let a = run_indexed(1, 100, |i| i * i).unwrap();
        let b = run_indexed(3, 100, |i| i * i).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[7], 49);
    }

    #[test]
    fn first_error_wins() {
        let r = try_run_indexed(2, 10, |i| if i >= 4 { anyhow::bail!("bad {i}") } else { Ok(i) });
        assert_eq!(r.unwrap_err().to_string(), "bad 4");
    }
}
