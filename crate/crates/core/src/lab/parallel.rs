use rayon::prelude::*;

/// Environment variable capping the Monte-Carlo worker count.
pub const THREADS_ENV: &str = "WTACRS_THREADS";

pub(crate) const BLOCK: usize = 1024;

/// Workers used for trial blocks: `WTACRS_THREADS` when it parses as a
/// positive integer, otherwise rayon's default.
pub fn worker_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// Runs `f` over `0..trials` split into `BLOCK`-sized ranges and returns the
/// per-block results in range order.
pub(crate) fn run_blocks<T, F>(trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync,
{
    let blocks = trials.div_ceil(BLOCK);
    let job = || {
        (0..blocks)
            .into_par_iter()
            .map(|b| f(b * BLOCK..((b + 1) * BLOCK).min(trials)))
            .collect()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(worker_count()).build() {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}
