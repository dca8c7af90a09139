//! Per-agent data parallelism. With the `parallel` feature the agent loops run
//! on the rayon pool; without it (or with [`Execution::Sequential`]) they run
//! in index order on the calling thread. Results are always returned in agent
//! order, so both paths produce identical numbers.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether work is actually dispatched to the thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

impl fmt::Display for Execution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Execution::Sequential => "sequential",
            Execution::Parallel => "parallel",
        })
    }
}

impl FromStr for Execution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(Execution::Sequential),
            "parallel" => Ok(Execution::Parallel),
            _ => Err(Error::Config(format!("unknown execution mode `{s}`"))),
        }
    }
}

/// `f(i)` for every `i < n`, collected in index order.
pub fn map_indexed<R, F>(exec: Execution, n: usize, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> Result<R> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// `f(i, &mut items[i])` for every item, results collected in index order.
pub fn map_mut<T, R, F>(exec: Execution, items: &mut [T], f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(usize, &mut T) -> Result<R> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items
            .par_iter_mut()
            .enumerate()
            .map(|(i, t)| f(i, t))
            .collect();
    }
    let _ = exec;
    items.iter_mut().enumerate().map(|(i, t)| f(i, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_preserve_order() {
        for exec in [Execution::Sequential, Execution::Parallel] {
            let v = map_indexed(exec, 100, |i| Ok(i * i)).unwrap();
            assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
            let mut items: Vec<usize> = (0..50).collect();
            let out = map_mut(exec, &mut items, |i, x| {
                *x += 1;
                Ok(i)
            })
            .unwrap();
            assert_eq!(out, (0..50).collect::<Vec<_>>());
            assert_eq!(items, (1..51).collect::<Vec<_>>());
        }
    }

    #[test]
    fn errors_propagate() {
        let r = map_indexed(Execution::Parallel, 10, |i| {
            if i == 7 {
                Err(Error::Config("boom".into()))
            } else {
                Ok(i)
            }
        });
        assert!(r.is_err());
    }
}
