//! Deterministic task execution: a fixed list of independent tasks is
//! distributed over worker threads through an atomic cursor and the outputs
//! are collected by task index, so the result is bit-identical for every
//! worker count.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub fn run_tasks<T, F>(task_count: usize, workers: usize, task: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.max(1).min(task_count.max(1));
    if workers <= 1 || task_count <= 1 {
        return (0..task_count).map(&task).collect();
    }
    let cursor = AtomicUsize::new(0);
    let out: Vec<Mutex<Option<T>>> = (0..task_count).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= task_count {
                    break;
                }
                let value = task(i);
                *out[i].lock().unwrap() = Some(value);
            });
        }
    });
    out.into_iter()
        .map(|m| m.into_inner().unwrap().expect("task completed"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outputs_are_ordered_and_worker_independent() {
        let f = |i: usize| i * i;
        let one = run_tasks(17, 1, f);
        let four = run_tasks(17, 4, f);
        assert_eq!(one, four);
        assert_eq!(one[5], 25);
    }
}
