//! A scoped worker pool over indexed tasks.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

/// Runs `f(0..n)` on up to `workers` threads and returns results in index
/// order. Tasks are claimed from a shared counter, so which worker runs a
/// task never affects where its result lands.
pub fn run_indexed<R, F>(n: usize, workers: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync,
{
    let workers = workers.max(1).min(n);
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..n).map(|_| None).collect();
    let done: Vec<Vec<(usize, R)>> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut mine = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= n {
                            break mine;
                        }
                        mine.push((i, f(i)));
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
            .collect()
    });
    for (i, r) in done.into_iter().flatten() {
        slots[i] = Some(r);
    }
    slots.into_iter().map(|r| r.expect("every task ran")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_results() {
        for w in [1, 2, 7, 16] {
            assert_eq!(
                run_indexed(13, w, |i| i * i),
                (0..13).map(|i| i * i).collect::<Vec<_>>()
            );
        }
        assert!(run_indexed(0, 4, |i| i).is_empty());
    }
}
