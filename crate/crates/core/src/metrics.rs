//! Merit functions, image-quality scores, metric traces and the two
//! reference schemes used for comparison: a centralized single-agent runner
//! of the same surrogate updates, and a diffusion (adapt-then-combine)
//! baseline without gradient tracking.

use std::io::Write;

use ndarray::{Array2, ArrayView2, Zip};
use serde::Serialize;

use crate::agent::{
    agent_seed, convex_step, initial_dictionary, DictionarySurrogate, Schedules, StepSizes, Variant,
};
use crate::error::{Error, Result};
use crate::exec::map_mut;
use crate::graph::{build_schedule, WeightMatrix};
use crate::image::GrayImage;
use crate::problem::{grad_d, grad_x, objective_global, ProblemData};
use crate::protocol::{drive, RunConfig, Steppable};
use crate::prox::{
    d_update_linearized, d_update_plain, project_dictionary_inplace, soft_threshold,
    x_update_linearized, x_update_plain, InnerReport,
};

/// One recorded round. Serialized as `nu,messages,objective,delta,cons_err,gamma`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub nu: usize,
    pub messages: usize,
    pub objective: f64,
    pub delta: f64,
    pub cons_err: f64,
    pub gamma: f64,
    /// Inner solves that stopped on their iteration budget up to this round.
    #[serde(skip)]
    pub unconverged: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsTrace {
    pub rows: Vec<MetricsRow>,
}

#[derive(Serialize)]
struct LabeledRow<'a> {
    algorithm: &'a str,
    nu: usize,
    messages: usize,
    objective: f64,
    delta: f64,
    cons_err: f64,
    gamma: f64,
}

impl MetricsTrace {
    pub fn push(&mut self, row: MetricsRow) {
        debug_assert!(self.rows.last().is_none_or(|r| r.nu < row.nu));
        self.rows.push(row);
    }

    pub fn last(&self) -> Option<&MetricsRow> {
        self.rows.last()
    }

    pub fn first(&self) -> Option<&MetricsRow> {
        self.rows.first()
    }

    pub fn at_round(&self, nu: usize) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.nu == nu)
    }

    /// Last row whose message count does not exceed `budget`.
    pub fn at_messages(&self, budget: usize) -> Option<&MetricsRow> {
        self.rows.iter().rev().find(|r| r.messages <= budget)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record(["nu", "messages", "objective", "delta", "cons_err", "gamma"])?;
        }
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Several traces in one table with a leading `algorithm` column.
pub fn write_labeled_csv<W: Write>(traces: &[(&str, &MetricsTrace)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (name, trace) in traces {
        for row in &trace.rows {
            w.serialize(LabeledRow {
                algorithm: name,
                nu: row.nu,
                messages: row.messages,
                objective: row.objective,
                delta: row.delta,
                cons_err: row.cons_err,
                gamma: row.gamma,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Entrywise mean of the local dictionary copies.
///
/// Accumulated as offsets from the first copy, so identical copies average
/// to exactly that copy.
pub fn mean_dictionary(ds: &[Array2<f64>]) -> Array2<f64> {
    let first = &ds[0];
    let mut offset = Array2::zeros(first.dim());
    for d in &ds[1..] {
        offset += &(d - first);
    }
    first + &(offset / ds.len() as f64)
}

/// `max_i ||vec(D_i - D_bar)||_inf`.
pub fn consensus_error(ds: &[Array2<f64>], d_bar: ArrayView2<f64>) -> f64 {
    ds.iter()
        .map(|d| {
            Zip::from(d)
                .and(&d_bar)
                .fold(0.0_f64, |m, a, b| m.max((a - b).abs()))
        })
        .fold(0.0, f64::max)
}

/// Distance from stationarity: max-norm of the displacement produced by one
/// unit-weight linearized surrogate step in each block.
///
/// The dictionary step minimizes the sum of the agents' linearized losses,
/// each with a unit proximal term, so it lands at
/// `P[D_bar - (1/I) sum_i grad_D f_i(D_bar, X_i)]`. The code step is the
/// elastic-net prox `T_lambda(X_i - grad_X f_i(D_bar, X_i)) / (1 + 2 mu)`.
pub fn stationarity_gap(
    d_bar: ArrayView2<f64>,
    codes: &[Array2<f64>],
    problem: &ProblemData,
) -> Result<f64> {
    if codes.len() != problem.num_agents() {
        return Err(Error::Dimension(format!(
            "{} code blocks for {} agents",
            codes.len(),
            problem.num_agents()
        )));
    }
    let n = problem.num_agents() as f64;
    let mut g_sum = Array2::<f64>::zeros(d_bar.dim());
    let mut gap_x = 0.0_f64;
    let shrink = 1.0 / (1.0 + 2.0 * problem.mu);
    for (x, s) in codes.iter().zip(problem.blocks()) {
        g_sum += &grad_d(d_bar, x.view(), s.view())?;
        let gx = grad_x(d_bar, x.view(), s.view())?;
        Zip::from(x).and(&gx).for_each(|&xv, &g| {
            let hat = shrink * soft_threshold(xv - g, problem.lambda);
            gap_x = gap_x.max((xv - hat).abs());
        });
    }
    let mut d_hat = d_bar.to_owned() - &(g_sum / n);
    project_dictionary_inplace(&mut d_hat, problem.alpha);
    let gap_d = Zip::from(&d_hat)
        .and(&d_bar)
        .fold(0.0_f64, |m, a, b| m.max((a - b).abs()));
    Ok(gap_d.max(gap_x))
}

/// Mean squared error and PSNR (peak 255) between two 8-bit images.
/// Identical images give `psnr = +inf`.
pub fn psnr_mse(reference: &GrayImage, test: &GrayImage) -> Result<(f64, f64)> {
    if reference.width != test.width || reference.height != test.height {
        return Err(Error::Image(format!(
            "size mismatch: {}x{} vs {}x{}",
            reference.width, reference.height, test.width, test.height
        )));
    }
    let mse = reference
        .pixels
        .iter()
        .zip(&test.pixels)
        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
        .sum::<f64>()
        / reference.pixels.len() as f64;
    Ok((psnr_from_mse(mse), mse))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0_f64 * 255.0 / mse).log10()
    }
}

fn note(flags: &mut usize, r: InnerReport) {
    if !r.converged {
        *flags += 1;
    }
}

/// Single-agent runner of the same surrogate updates with no network:
/// `W = [1]` and no outside-gradient term. The data blocks are merged.
pub struct CentralizedOracle {
    problem: ProblemData,
    sched: Schedules,
    d: Array2<f64>,
    x: Array2<f64>,
    steps: StepSizes,
    gamma: f64,
    round: usize,
    unconverged: usize,
}

impl CentralizedOracle {
    /// Starts from the same initial dictionary a one-agent simulation would use.
    pub fn new(problem: &ProblemData, config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let problem = problem.centralized();
        let s = problem.block(0);
        let d = initial_dictionary(
            s.view(),
            problem.atoms(),
            problem.alpha,
            agent_seed(config.seed, 0),
        );
        let x = Array2::zeros((problem.atoms(), s.ncols()));
        let mut steps = config.schedules.steps();
        let gamma = steps.next().expect("infinite");
        Ok(Self {
            sched: config.schedules,
            problem,
            d,
            x,
            steps,
            gamma,
            round: 0,
            unconverged: 0,
        })
    }

    pub fn dictionary(&self) -> &Array2<f64> {
        &self.d
    }

    pub fn codes(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn step(&mut self) -> Result<()> {
        let s = self.problem.block(0).view();
        let (lambda, mu, alpha) = (self.problem.lambda, self.problem.mu, self.problem.alpha);
        let zero = Array2::zeros(self.d.dim());
        let d_tilde = match self.sched.dictionary {
            DictionarySurrogate::Linearized => {
                let g = grad_d(self.d.view(), self.x.view(), s)?;
                d_update_linearized(
                    self.d.view(),
                    g.view(),
                    zero.view(),
                    self.sched.tau_d,
                    alpha,
                )
            }
            DictionarySurrogate::Plain => {
                let (d, r) = d_update_plain(
                    self.d.view(),
                    self.x.view(),
                    s,
                    zero.view(),
                    self.sched.tau_d,
                    alpha,
                    self.sched.inner,
                )?;
                note(&mut self.unconverged, r);
                d
            }
        };
        let u = convex_step(&self.d, &d_tilde, self.gamma);
        let (tau, r) = self.sched.tau_x(u.view());
        note(&mut self.unconverged, r);
        self.x = match self.sched.variant {
            Variant::Linearized => {
                x_update_linearized(self.x.view(), u.view(), s, tau, lambda, mu)?
            }
            Variant::Plain => {
                let (x, r) = x_update_plain(
                    self.x.view(),
                    u.view(),
                    s,
                    tau,
                    lambda,
                    mu,
                    self.sched.inner,
                )?;
                note(&mut self.unconverged, r);
                x
            }
        };
        self.d = u;
        self.round += 1;
        self.gamma = self.steps.next().expect("infinite");
        Ok(())
    }

    pub fn observe(&self) -> Result<MetricsRow> {
        let codes = std::slice::from_ref(&self.x);
        Ok(MetricsRow {
            nu: self.round,
            messages: 0,
            objective: objective_global(self.d.view(), codes, &self.problem)?,
            delta: stationarity_gap(self.d.view(), codes, &self.problem)?,
            cons_err: 0.0,
            gamma: self.gamma,
            unconverged: self.unconverged,
        })
    }
}

impl Steppable for CentralizedOracle {
    fn step(&mut self) -> Result<()> {
        CentralizedOracle::step(self)
    }
    fn observe(&self) -> Result<MetricsRow> {
        CentralizedOracle::observe(self)
    }
    fn round(&self) -> usize {
        self.round
    }
}

pub fn centralized_oracle(problem: &ProblemData, config: &RunConfig) -> Result<MetricsTrace> {
    let mut oracle = CentralizedOracle::new(problem, config)?;
    drive(&mut oracle, config)
}

#[derive(Debug, Clone)]
struct DiffusionAgent {
    d: Array2<f64>,
    x: Array2<f64>,
    psi: Array2<f64>,
}

/// Simplified adapt-then-combine diffusion scheme. Each round every agent
/// takes a damped projected-gradient step on its own loss only (no
/// tracking), the intermediate dictionaries are combined with the consensus
/// weights (one message), and each agent then re-solves its sparse-coding
/// subproblem exactly against the combined dictionary.
pub struct DiffusionBaseline<'a> {
    problem: &'a ProblemData,
    config: RunConfig,
    weights: Vec<WeightMatrix>,
    agents: Vec<DiffusionAgent>,
    steps: StepSizes,
    gamma: f64,
    round: usize,
    messages: usize,
    unconverged: usize,
}

impl<'a> DiffusionBaseline<'a> {
    pub fn new(problem: &'a ProblemData, config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let n = problem.num_agents();
        if config.graph.agents != n {
            return Err(Error::Config(format!(
                "graph has {} agents but the data has {n} blocks",
                config.graph.agents
            )));
        }
        let schedule = build_schedule(&config.graph)?;
        let weights = schedule.weights(config.theta_min)?;
        let agents = (0..n)
            .map(|i| {
                let s = problem.block(i);
                let d = initial_dictionary(
                    s.view(),
                    problem.atoms(),
                    problem.alpha,
                    agent_seed(config.seed, i),
                );
                DiffusionAgent {
                    psi: d.clone(),
                    d,
                    x: Array2::zeros((problem.atoms(), s.ncols())),
                }
            })
            .collect();
        let mut steps = config.schedules.steps();
        let gamma = steps.next().expect("infinite");
        Ok(Self {
            problem,
            config: config.clone(),
            weights,
            agents,
            steps,
            gamma,
            round: 0,
            messages: 0,
            unconverged: 0,
        })
    }

    pub fn dictionaries(&self) -> Vec<Array2<f64>> {
        self.agents.iter().map(|a| a.d.clone()).collect()
    }

    pub fn codes(&self) -> Vec<Array2<f64>> {
        self.agents.iter().map(|a| a.x.clone()).collect()
    }

    pub fn step(&mut self) -> Result<()> {
        let exec = self.config.execution;
        let problem = self.problem;
        let sched = self.config.schedules;
        let gamma = self.gamma;
        let zero = Array2::zeros((problem.dim(), problem.atoms()));

        map_mut(exec, &mut self.agents, |i, a| {
            let s = problem.block(i).view();
            let g = grad_d(a.d.view(), a.x.view(), s)?;
            let adapted = d_update_linearized(
                a.d.view(),
                g.view(),
                zero.view(),
                sched.tau_d,
                problem.alpha,
            );
            a.psi = convex_step(&a.d, &adapted, gamma);
            Ok(())
        })?;

        let w = &self.weights[self.round % self.weights.len()];
        let psis: Vec<_> = self.agents.iter().map(|a| a.psi.clone()).collect();
        let combined = crate::protocol::consensus_step(w, &psis);
        for (a, d) in self.agents.iter_mut().zip(combined) {
            a.d = d;
        }

        let flags = map_mut(exec, &mut self.agents, |i, a| {
            let s = problem.block(i).view();
            let (tau, r1) = sched.tau_x(a.d.view());
            let (x, r2) = x_update_plain(
                a.x.view(),
                a.d.view(),
                s,
                tau,
                problem.lambda,
                problem.mu,
                sched.inner,
            )?;
            a.x = x;
            Ok(usize::from(!r1.converged) + usize::from(!r2.converged))
        })?;
        self.unconverged += flags.iter().sum::<usize>();

        self.round += 1;
        self.messages += 1;
        self.gamma = self.steps.next().expect("infinite");
        Ok(())
    }

    pub fn observe(&self) -> Result<MetricsRow> {
        let ds = self.dictionaries();
        let codes = self.codes();
        let d_bar = mean_dictionary(&ds);
        Ok(MetricsRow {
            nu: self.round,
            messages: self.messages,
            objective: objective_global(d_bar.view(), &codes, self.problem)?,
            delta: stationarity_gap(d_bar.view(), &codes, self.problem)?,
            cons_err: consensus_error(&ds, d_bar.view()),
            gamma: self.gamma,
            unconverged: self.unconverged,
        })
    }
}

impl Steppable for DiffusionBaseline<'_> {
    fn step(&mut self) -> Result<()> {
        DiffusionBaseline::step(self)
    }
    fn observe(&self) -> Result<MetricsRow> {
        DiffusionBaseline::observe(self)
    }
    fn round(&self) -> usize {
        self.round
    }
}

pub fn diffusion_baseline(problem: &ProblemData, config: &RunConfig) -> Result<MetricsTrace> {
    let mut sim = DiffusionBaseline::new(problem, config)?;
    drive(&mut sim, config)
}
