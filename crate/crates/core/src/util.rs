//! Small shared helpers: deterministic chunked parallelism and number
//! formatting for tables.

/// Maps `0..n` through `f`, optionally on `threads` worker threads, and
/// returns the results in index order.  Work is split into contiguous chunks
/// and results are concatenated in chunk order, so the output (including
/// floating-point reductions performed by the caller over it) is identical
/// for every thread count.
pub fn par_map<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = threads.max(1).min(n.max(1));
    if threads == 1 || n < 2 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(threads);
    let mut parts: Vec<Vec<T>> = Vec::with_capacity(threads);
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(threads);
        for t in 0..threads {
            let lo = t * chunk;
            let hi = ((t + 1) * chunk).min(n);
            if lo >= hi {
                break;
            }
            let f = &f;
            handles.push(scope.spawn(move || (lo..hi).map(f).collect::<Vec<T>>()));
        }
        for h in handles {
            parts.push(h.join().expect("worker thread panicked"));
        }
    });
    let mut out = Vec::with_capacity(n);
    for p in parts {
        out.extend(p);
    }
    out
}

/// Formats a mesh spacing as `1/n` when it is (close to) a unit fraction,
/// otherwise as a decimal.
pub fn format_spacing(h: f64) -> String {
    if h > 0.0 {
        let n = 1.0 / h;
        if (n - n.round()).abs() < 1e-9 * n {
            return format!("1/{}", n.round() as u64);
        }
    }
    format!("{h}")
}
