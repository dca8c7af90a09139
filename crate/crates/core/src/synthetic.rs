//! Planted sparse-coding instances: `S = D* X* + noise`.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::image::partition_sizes;
use crate::problem::ProblemData;

/// Sizes and constants of a planted instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub agents: usize,
    /// Nonzeros per code column.
    pub k0: usize,
    pub sigma_n: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub mu: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// M=16, K=24, N=200 over 5 agents, lambda=0.1, 2mu=0.1, alpha=1.
    pub fn standard() -> Self {
        Self {
            m: 16,
            k: 24,
            n: 200,
            agents: 5,
            k0: 3,
            sigma_n: 0.05,
            alpha: 1.0,
            lambda: 0.1,
            mu: 0.05,
            seed: 7,
        }
    }
}

/// Ground truth behind a generated data matrix.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    /// `M x K`, every column of norm `alpha`.
    pub dictionary: Array2<f64>,
    /// `K x N`, exactly `k0` nonzeros per column.
    pub codes: Array2<f64>,
    pub sigma_n: f64,
    /// The full `M x N` data matrix before partitioning.
    pub data: Array2<f64>,
}

pub fn make_synthetic(spec: &SyntheticSpec) -> Result<(SyntheticInstance, ProblemData)> {
    let SyntheticSpec {
        m,
        k,
        n,
        agents,
        k0,
        sigma_n,
        alpha,
        ..
    } = *spec;
    if m == 0 || k == 0 || agents == 0 || n < agents {
        return Err(Error::Instance(format!(
            "infeasible sizes M={m} K={k} N={n} I={agents}"
        )));
    }
    if k0 == 0 || k0 > k {
        return Err(Error::Instance(format!("k0={k0} must lie in 1..={k}")));
    }
    if !(sigma_n >= 0.0) || !(alpha > 0.0) {
        return Err(Error::Instance(format!(
            "bad sigma_n={sigma_n} or alpha={alpha}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut dictionary = Array2::<f64>::zeros((m, k));
    for mut col in dictionary.columns_mut() {
        // Gaussian direction is uniform on the sphere; redraw the (measure-zero) zero vector.
        loop {
            col.mapv_inplace(|_| rng.sample::<f64, _>(StandardNormal));
            let norm = col.dot(&col).sqrt();
            if norm > 1e-12 {
                col.mapv_inplace(|v| v * alpha / norm);
                break;
            }
        }
    }

    let mut codes = Array2::<f64>::zeros((k, n));
    for j in 0..n {
        for row in sample(&mut rng, k, k0) {
            let mut v: f64 = rng.sample(StandardNormal);
            while v == 0.0 {
                v = rng.sample(StandardNormal);
            }
            codes[[row, j]] = v;
        }
    }

    let mut data = dictionary.dot(&codes);
    if sigma_n > 0.0 {
        let noise = Normal::new(0.0, sigma_n).map_err(|e| Error::Instance(e.to_string()))?;
        data.mapv_inplace(|v| v + noise.sample(&mut rng));
    }

    let mut start = 0;
    let blocks = partition_sizes(n, agents)
        .into_iter()
        .map(|len| {
            let b = data.slice(ndarray::s![.., start..start + len]).to_owned();
            start += len;
            b
        })
        .collect();
    let problem = ProblemData::new(blocks, k, spec.lambda, spec.mu, alpha)?;
    Ok((
        SyntheticInstance {
            dictionary,
            codes,
            sigma_n,
            data,
        },
        problem,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_single_atom_columns() {
        let spec = SyntheticSpec {
            k0: 1,
            sigma_n: 0.0,
            ..SyntheticSpec::standard()
        };
        let (inst, _) = make_synthetic(&spec).unwrap();
        for j in 0..spec.n {
            let col = inst.data.column(j);
            let nz: Vec<usize> = (0..spec.k).filter(|&r| inst.codes[[r, j]] != 0.0).collect();
            assert_eq!(nz.len(), 1);
            let scaled = &inst.dictionary.column(nz[0]) * inst.codes[[nz[0], j]];
            assert!(col
                .iter()
                .zip(scaled.iter())
                .all(|(a, b)| (a - b).abs() < 1e-14));
        }
    }

    #[test]
    fn invariants_hold() {
        let spec = SyntheticSpec::standard();
        let (inst, problem) = make_synthetic(&spec).unwrap();
        for col in inst.dictionary.columns() {
            assert!((col.dot(&col).sqrt() - spec.alpha).abs() < 1e-12);
        }
        for col in inst.codes.columns() {
            assert_eq!(col.iter().filter(|v| **v != 0.0).count(), spec.k0);
        }
        assert_eq!(problem.num_agents(), 5);
        assert_eq!(problem.total_samples(), 200);
        assert_eq!(problem.centralized().block(0), &inst.data);
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = SyntheticSpec::standard();
        let (a, _) = make_synthetic(&spec).unwrap();
        let (b, _) = make_synthetic(&spec).unwrap();
        assert_eq!(a.data, b.data);
        let (c, _) = make_synthetic(&SyntheticSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn noise_fraction_matches_expectation() {
        // E||D*X*||^2 = N k0 alpha^2 (independent unit-variance codes on
        // random atoms) and E||noise||^2 = N M sigma^2.
        for (sigma, k0) in [(0.1, 3), (0.3, 2), (0.05, 5)] {
            let spec = SyntheticSpec {
                sigma_n: sigma,
                k0,
                ..SyntheticSpec::standard()
            };
            let (inst, _) = make_synthetic(&spec).unwrap();
            let clean = inst.dictionary.dot(&inst.codes);
            let noise = &inst.data - &clean;
            let ratio = (noise.iter().map(|v| v * v).sum::<f64>()
                / inst.data.iter().map(|v| v * v).sum::<f64>())
            .sqrt();
            let m = spec.m as f64;
            let expected =
                (sigma * sigma * m / (k0 as f64 * spec.alpha.powi(2) + sigma * sigma * m)).sqrt();
            assert!(
                (ratio / expected - 1.0).abs() < 0.2,
                "sigma={sigma}: {ratio} vs {expected}"
            );
        }
    }

    #[test]
    fn rejects_infeasible() {
        let base = SyntheticSpec::standard();
        assert!(make_synthetic(&SyntheticSpec {
            k0: 25,
            ..base.clone()
        })
        .is_err());
        assert!(make_synthetic(&SyntheticSpec {
            n: 3,
            ..base.clone()
        })
        .is_err());
        assert!(make_synthetic(&SyntheticSpec { m: 0, ..base }).is_err());
    }
}
