//! One agent's local state and its local-optimization step.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::problem::grad_d;
use crate::prox::{
    d_update_linearized, d_update_plain, sigma_max, x_update_linearized, x_update_plain,
    InnerReport, InnerSolver, SIGMA_MAX_ITER, SIGMA_TOL,
};

/// Surrogate used for the sparse-coding update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Exact local loss plus proximal term; solved iteratively.
    Plain,
    /// Linearized local loss; closed-form soft-thresholding update.
    Linearized,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Plain => "plain",
            Variant::Linearized => "linearized",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Variant::Plain),
            "linearized" => Ok(Variant::Linearized),
            _ => Err(Error::Config(format!(
                "unknown variant `{s}` (plain|linearized)"
            ))),
        }
    }
}

/// Surrogate used for the dictionary update. Both published variants use
/// [`DictionarySurrogate::Linearized`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DictionarySurrogate {
    #[default]
    Linearized,
    Plain,
}

/// Step-size and proximal-weight rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedules {
    pub gamma0: f64,
    pub eps_gamma: f64,
    /// Constant proximal weight of the dictionary surrogate.
    pub tau_d: f64,
    /// Floor of the code proximal weight.
    pub eps_tau: f64,
    pub variant: Variant,
    pub dictionary: DictionarySurrogate,
    pub inner: InnerSolver,
}

impl Default for Schedules {
    fn default() -> Self {
        Self {
            gamma0: 0.5,
            eps_gamma: 0.1,
            tau_d: 1.0,
            eps_tau: 1e-6,
            variant: Variant::Linearized,
            dictionary: DictionarySurrogate::Linearized,
            inner: InnerSolver::default(),
        }
    }
}

impl Schedules {
    /// `gamma0 = 0` is accepted and freezes the dictionary.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma0) {
            return Err(Error::Config(format!(
                "gamma0 = {} must lie in [0, 1]",
                self.gamma0
            )));
        }
        if !(self.eps_gamma > 0.0) || self.eps_gamma * self.gamma0 >= 1.0 {
            return Err(Error::Config(format!(
                "eps_gamma = {} must lie in (0, 1/gamma0)",
                self.eps_gamma
            )));
        }
        if !(self.tau_d > 0.0) || !(self.eps_tau > 0.0) {
            return Err(Error::Config("tau_d and eps_tau must be positive".into()));
        }
        if !(self.inner.tol > 0.0) || self.inner.max_iter == 0 {
            return Err(Error::Config(
                "inner solver needs tol > 0 and max_iter >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Diminishing step sizes `g_0 = gamma0`, `g_nu = g_{nu-1} (1 - eps g_{nu-1})`.
    pub fn steps(&self) -> StepSizes {
        StepSizes {
            next: self.gamma0,
            eps: self.eps_gamma,
        }
    }

    /// Step size at round `nu`.
    pub fn gamma(&self, nu: usize) -> f64 {
        self.steps().nth(nu).expect("step sequence is infinite")
    }

    /// `max(eps_tau, sigma_max(U)^2)`.
    pub fn tau_x(&self, u: ArrayView2<f64>) -> (f64, InnerReport) {
        let s = sigma_max(u, SIGMA_TOL, SIGMA_MAX_ITER);
        (self.eps_tau.max(s.value * s.value), s.report)
    }
}

#[derive(Debug, Clone)]
pub struct StepSizes {
    next: f64,
    eps: f64,
}

impl Iterator for StepSizes {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let g = self.next;
        self.next = g * (1.0 - self.eps * g);
        Some(g)
    }
}

/// Counters of inner solves that stopped on their iteration budget.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepFlags {
    pub unconverged: usize,
}

impl StepFlags {
    fn note(&mut self, r: InnerReport) {
        if !r.converged {
            self.unconverged += 1;
        }
    }

    pub fn merge(self, other: StepFlags) -> StepFlags {
        StepFlags {
            unconverged: self.unconverged + other.unconverged,
        }
    }
}

/// Dictionary whose atoms are randomly chosen local data columns rescaled to
/// norm `alpha`. Zero columns are replaced by random Gaussian directions.
pub fn initial_dictionary(s: ArrayView2<f64>, k: usize, alpha: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, n) = s.dim();
    let picks: Vec<usize> = if n >= k {
        rand::seq::index::sample(&mut rng, n, k).into_vec()
    } else {
        (0..k).map(|_| rng.random_range(0..n)).collect()
    };
    let mut d = Array2::zeros((m, k));
    for (atom, &j) in picks.iter().enumerate() {
        let mut col = s.column(j).to_owned();
        let mut norm = col.dot(&col).sqrt();
        if norm == 0.0 {
            col.mapv_inplace(|_| rng.sample::<f64, _>(StandardNormal));
            norm = col.dot(&col).sqrt();
        }
        d.column_mut(atom).assign(&(col * (alpha / norm)));
    }
    d
}

/// Seed used for agent `i`'s dictionary initialization.
pub fn agent_seed(seed: u64, agent: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(agent as u64)
}

#[derive(Debug, Clone)]
pub struct AgentState {
    /// Local copy of the dictionary.
    pub d: Array2<f64>,
    /// Private code block.
    pub x: Array2<f64>,
    /// Tracker of the network-average dictionary gradient.
    pub theta: Array2<f64>,
    /// Local estimate of the other agents' gradient sum.
    pub pi_tilde: Array2<f64>,
    /// Intermediate dictionary produced by the local step.
    pub u: Array2<f64>,
    /// `grad_D f_i(d, x)` at the current iterate.
    pub grad: Array2<f64>,
}

impl AgentState {
    /// Start at `X = 0`, `Theta = grad_D f_i(D0, 0)` and the matching `Pi`.
    pub fn new(d0: Array2<f64>, s: ArrayView2<f64>, num_agents: usize) -> Result<Self> {
        let x = Array2::zeros((d0.ncols(), s.ncols()));
        let grad = grad_d(d0.view(), x.view(), s)?;
        let mut state = Self {
            u: d0.clone(),
            d: d0,
            x,
            theta: grad.clone(),
            pi_tilde: Array2::zeros(grad.dim()),
            grad,
        };
        state.refresh_pi_tilde(num_agents);
        Ok(state)
    }

    /// Computes the surrogate minimizer and sets `U = D + gamma (D~ - D)`.
    pub fn local_d_step(
        &mut self,
        s: ArrayView2<f64>,
        gamma: f64,
        sched: &Schedules,
        alpha: f64,
    ) -> Result<StepFlags> {
        let mut flags = StepFlags::default();
        let d_tilde = match sched.dictionary {
            DictionarySurrogate::Linearized => d_update_linearized(
                self.d.view(),
                self.grad.view(),
                self.pi_tilde.view(),
                sched.tau_d,
                alpha,
            ),
            DictionarySurrogate::Plain => {
                let (d, r) = d_update_plain(
                    self.d.view(),
                    self.x.view(),
                    s,
                    self.pi_tilde.view(),
                    sched.tau_d,
                    alpha,
                    sched.inner,
                )?;
                flags.note(r);
                d
            }
        };
        self.u = convex_step(&self.d, &d_tilde, gamma);
        Ok(flags)
    }

    /// Sparse-coding update against the current `U`, centered at the current `X`.
    pub fn local_x_step(
        &mut self,
        s: ArrayView2<f64>,
        lambda: f64,
        mu: f64,
        sched: &Schedules,
    ) -> Result<StepFlags> {
        let mut flags = StepFlags::default();
        let (tau, r) = sched.tau_x(self.u.view());
        flags.note(r);
        self.x = match sched.variant {
            Variant::Linearized => {
                x_update_linearized(self.x.view(), self.u.view(), s, tau, lambda, mu)?
            }
            Variant::Plain => {
                let (x, r) = x_update_plain(
                    self.x.view(),
                    self.u.view(),
                    s,
                    tau,
                    lambda,
                    mu,
                    sched.inner,
                )?;
                flags.note(r);
                x
            }
        };
        Ok(flags)
    }

    /// `Pi = I * Theta - grad_D f_i(D, X)`.
    pub fn refresh_pi_tilde(&mut self, num_agents: usize) {
        let scale = num_agents as f64;
        Zip::from(&mut self.pi_tilde)
            .and(&self.theta)
            .and(&self.grad)
            .for_each(|p, &t, &g| *p = scale * t - g);
    }
}

/// `a + gamma (b - a)`.
pub fn convex_step(a: &Array2<f64>, b: &Array2<f64>, gamma: f64) -> Array2<f64> {
    let mut out = a.clone();
    Zip::from(&mut out)
        .and(b)
        .for_each(|o, &bv| *o += gamma * (bv - *o));
    out
}
