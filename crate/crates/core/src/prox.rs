//! Proximal and projection primitives, plus the closed-form and iterative
//! solvers for the two local subproblems.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use crate::error::Result;
use crate::problem::{grad_d, grad_x};

/// Default relative tolerance of the power iteration used for step constants.
pub const SIGMA_TOL: f64 = 1e-12;
pub const SIGMA_MAX_ITER: usize = 10_000;

/// `max(|x| - theta, 0) * sign(x)`, with `sign(0) = 0`.
#[inline]
pub fn soft_threshold(x: f64, theta: f64) -> f64 {
    debug_assert!(theta >= 0.0);
    if x > theta {
        x - theta
    } else if x < -theta {
        x + theta
    } else {
        0.0
    }
}

/// Entrywise soft thresholding.
pub fn soft_threshold_matrix(a: ArrayView2<f64>, theta: f64) -> Array2<f64> {
    a.mapv(|v| soft_threshold(v, theta))
}

/// Proximal map of `t * (lambda |x| + mu x^2)` applied to `v`.
#[inline]
pub fn elastic_net_prox(v: f64, t: f64, lambda: f64, mu: f64) -> f64 {
    soft_threshold(v, t * lambda) / (1.0 + 2.0 * t * mu)
}

/// Radially scale every column with norm above `alpha` back onto the sphere.
pub fn project_dictionary_inplace(d: &mut Array2<f64>, alpha: f64) {
    for mut col in d.axis_iter_mut(Axis(1)) {
        let norm = col.dot(&col).sqrt();
        if norm > alpha {
            let scale = alpha / norm;
            col.mapv_inplace(|v| v * scale);
        }
    }
}

/// Euclidean projection onto `{D : ||D e_k||_2 <= alpha for all k}`.
pub fn project_dictionary(d: ArrayView2<f64>, alpha: f64) -> Array2<f64> {
    let mut out = d.to_owned();
    project_dictionary_inplace(&mut out, alpha);
    out
}

/// Largest column norm of `d`.
pub fn max_column_norm(d: ArrayView2<f64>) -> f64 {
    d.axis_iter(Axis(1))
        .map(|c| c.dot(&c).sqrt())
        .fold(0.0, f64::max)
}

/// Outcome of an iterative routine that may stop on its iteration budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InnerReport {
    pub iterations: usize,
    pub converged: bool,
}

/// Stopping rule for the iterative subproblem solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSolver {
    /// Stop once the max-norm change between successive iterates is below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for InnerSolver {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaMax {
    pub value: f64,
    pub report: InnerReport,
}

/// Largest singular value by power iteration on the smaller Gram matrix,
/// started from the normalized all-ones vector.
pub fn sigma_max(a: ArrayView2<f64>, tol: f64, max_iter: usize) -> SigmaMax {
    let gram = if a.nrows() >= a.ncols() {
        a.t().dot(&a)
    } else {
        a.dot(&a.t())
    };
    let n = gram.nrows();
    if n == 0 || gram.iter().all(|v| *v == 0.0) {
        return SigmaMax {
            value: 0.0,
            report: InnerReport {
                iterations: 0,
                converged: true,
            },
        };
    }

    let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    if gram.dot(&v).iter().all(|x| *x == 0.0) {
        // all-ones lies in the null space; restart on the heaviest coordinate
        let j = (0..n)
            .max_by(|&p, &q| gram[[p, p]].total_cmp(&gram[[q, q]]))
            .unwrap_or(0);
        v.fill(0.0);
        v[j] = 1.0;
    }

    let mut eig = 0.0;
    for it in 1..=max_iter {
        let w = gram.dot(&v);
        let rayleigh = v.dot(&w);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return SigmaMax {
                value: 0.0,
                report: InnerReport {
                    iterations: it,
                    converged: true,
                },
            };
        }
        v = w / norm;
        if it > 1 && (rayleigh - eig).abs() <= tol * rayleigh.abs() {
            return SigmaMax {
                value: rayleigh.max(0.0).sqrt(),
                report: InnerReport {
                    iterations: it,
                    converged: true,
                },
            };
        }
        eig = rayleigh;
    }
    SigmaMax {
        value: eig.max(0.0).sqrt(),
        report: InnerReport {
            iterations: max_iter,
            converged: false,
        },
    }
}

/// Closed-form code update from the linearized surrogate:
/// `tau / (2 mu + tau) * T_{lambda / tau}(X - grad_X f(U, X) / tau)`.
pub fn x_update_linearized(
    x: ArrayView2<f64>,
    u: ArrayView2<f64>,
    s: ArrayView2<f64>,
    tau: f64,
    lambda: f64,
    mu: f64,
) -> Result<Array2<f64>> {
    debug_assert!(tau > 0.0);
    let g = grad_x(u, x, s)?;
    let shrink = tau / (2.0 * mu + tau);
    let thr = lambda / tau;
    let mut out = g;
    Zip::from(&mut out)
        .and(&x)
        .for_each(|o, &xv| *o = shrink * soft_threshold(xv - *o / tau, thr));
    Ok(out)
}

/// Code update from the exact (non-linearized) surrogate:
/// `argmin_X f(U, X) + tau/2 ||X - X^nu||^2 + lambda ||X||_1 + mu ||X||_F^2`,
/// solved by FISTA with gradient-based restart, warm-started at `X^nu`.
pub fn x_update_plain(
    x: ArrayView2<f64>,
    u: ArrayView2<f64>,
    s: ArrayView2<f64>,
    tau: f64,
    lambda: f64,
    mu: f64,
    solver: InnerSolver,
) -> Result<(Array2<f64>, InnerReport)> {
    debug_assert!(tau > 0.0);
    // dimension check happens here, before the Gram products
    let _ = crate::problem::residual(u, x, s)?;
    let gram = u.t().dot(&u);
    let rhs = u.t().dot(&s);
    let lip = sigma_max(u, SIGMA_TOL, SIGMA_MAX_ITER).value.powi(2) + tau;
    let step = 1.0 / lip;

    let smooth_grad = |y: &Array2<f64>| -> Array2<f64> {
        let mut g = gram.dot(y) - &rhs;
        Zip::from(&mut g)
            .and(y)
            .and(&x)
            .for_each(|g, &yv, &xc| *g += tau * (yv - xc));
        g
    };

    let mut current = x.to_owned();
    let mut y = current.clone();
    let mut t = 1.0_f64;
    for it in 1..=solver.max_iter {
        let g = smooth_grad(&y);
        let mut next = y.clone();
        Zip::from(&mut next)
            .and(&g)
            .for_each(|n, &gv| *n = elastic_net_prox(*n - step * gv, step, lambda, mu));

        let mut change = 0.0_f64;
        let mut restart = 0.0;
        Zip::from(&next)
            .and(&current)
            .and(&y)
            .for_each(|&n, &c, &yv| {
                change = change.max((n - c).abs());
                restart += (yv - n) * (n - c);
            });
        if change <= solver.tol {
            return Ok((
                next,
                InnerReport {
                    iterations: it,
                    converged: true,
                },
            ));
        }

        let t_next = if restart > 0.0 {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
        };
        let beta = if restart > 0.0 {
            0.0
        } else {
            (t - 1.0) / t_next
        };
        y = &next + &((&next - &current) * beta);
        current = next;
        t = t_next;
    }
    Ok((
        current,
        InnerReport {
            iterations: solver.max_iter,
            converged: false,
        },
    ))
}

/// Closed-form dictionary update from the linearized surrogate:
/// `P[D - (grad_D f + Pi) / tau]`.
pub fn d_update_linearized(
    d: ArrayView2<f64>,
    grad_local: ArrayView2<f64>,
    pi_tilde: ArrayView2<f64>,
    tau: f64,
    alpha: f64,
) -> Array2<f64> {
    debug_assert!(tau > 0.0);
    let mut out = d.to_owned();
    Zip::from(&mut out)
        .and(&grad_local)
        .and(&pi_tilde)
        .for_each(|o, &g, &p| *o -= (g + p) / tau);
    project_dictionary_inplace(&mut out, alpha);
    out
}

/// Dictionary update from the exact surrogate
/// `f(D, X) + tau/2 ||D - D^nu||^2 + <Pi, D - D^nu>` over the column-norm set,
/// by projected gradient with step `1 / (sigma_max(X)^2 + tau)` started at `D^nu`.
#[allow(clippy::too_many_arguments)]
pub fn d_update_plain(
    d: ArrayView2<f64>,
    x: ArrayView2<f64>,
    s: ArrayView2<f64>,
    pi_tilde: ArrayView2<f64>,
    tau: f64,
    alpha: f64,
    solver: InnerSolver,
) -> Result<(Array2<f64>, InnerReport)> {
    debug_assert!(tau > 0.0);
    let _ = crate::problem::residual(d, x, s)?;
    let xxt = x.dot(&x.t());
    let sxt = s.dot(&x.t());
    let step = 1.0 / (sigma_max(x, SIGMA_TOL, SIGMA_MAX_ITER).value.powi(2) + tau);

    let mut current = d.to_owned();
    for it in 1..=solver.max_iter {
        let mut next = current.dot(&xxt) - &sxt;
        Zip::from(&mut next)
            .and(&current)
            .and(&d)
            .and(&pi_tilde)
            .for_each(|n, &c, &center, &p| {
                let g = *n + tau * (c - center) + p;
                *n = c - step * g;
            });
        project_dictionary_inplace(&mut next, alpha);
        let change = Zip::from(&next)
            .and(&current)
            .fold(0.0_f64, |acc, &a, &b| acc.max((a - b).abs()));
        current = next;
        if change <= solver.tol {
            return Ok((
                current,
                InnerReport {
                    iterations: it,
                    converged: true,
                },
            ));
        }
    }
    Ok((
        current,
        InnerReport {
            iterations: solver.max_iter,
            converged: false,
        },
    ))
}

/// Convenience: linearized dictionary update that computes the local gradient itself.
pub fn d_update_linearized_at(
    d: ArrayView2<f64>,
    x: ArrayView2<f64>,
    s: ArrayView2<f64>,
    pi_tilde: ArrayView2<f64>,
    tau: f64,
    alpha: f64,
) -> Result<Array2<f64>> {
    let g = grad_d(d, x, s)?;
    Ok(d_update_linearized(d, g.view(), pi_tilde, tau, alpha))
}
