//! Bulk-synchronous rounds of the distributed learner.
//!
//! Each round runs the local dictionary and code steps on every agent, then
//! one exchange of the intermediate dictionaries (consensus) and one exchange
//! of the gradient trackers. That is two messages per round.

use ndarray::{Array2, Zip};

use crate::agent::{agent_seed, initial_dictionary, AgentState, Schedules, StepFlags, StepSizes};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, map_mut, Execution};
use crate::graph::{
    build_schedule, GraphSchedule, ScheduleKind, ScheduleSpec, WeightMatrix, THETA_MIN,
};
use crate::metrics::{
    consensus_error, mean_dictionary, stationarity_gap, MetricsRow, MetricsTrace,
};
use crate::problem::{grad_d, objective_global, ProblemData};

/// Everything needed to run a simulation besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub schedules: Schedules,
    pub graph: ScheduleSpec,
    pub max_rounds: usize,
    /// Stop once the stationarity gap drops to this value (checked on recorded rounds).
    pub stop_tol: f64,
    /// Metrics are recorded every `metric_stride` rounds and at the last round.
    pub metric_stride: usize,
    pub seed: u64,
    pub theta_min: f64,
    pub execution: Execution,
}

impl RunConfig {
    pub fn new(agents: usize) -> Self {
        Self {
            schedules: Schedules::default(),
            graph: ScheduleSpec::new(ScheduleKind::StaticRing, agents),
            max_rounds: 500,
            stop_tol: 0.0,
            metric_stride: 1,
            seed: 0,
            theta_min: THETA_MIN,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedules.validate()?;
        if !(self.stop_tol >= 0.0) {
            return Err(Error::Config("stop_tol must be non-negative".into()));
        }
        if self.metric_stride == 0 {
            return Err(Error::Config("metric_stride must be at least 1".into()));
        }
        if !(self.theta_min > 0.0 && self.theta_min < 1.0) {
            return Err(Error::Config("theta_min must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Whether round `nu` gets a metrics row.
    pub fn records(&self, nu: usize) -> bool {
        nu.is_multiple_of(self.metric_stride) || nu == self.max_rounds
    }
}

/// `D_i <- sum_j w_ij U_j`.
pub fn consensus_step(w: &WeightMatrix, us: &[Array2<f64>]) -> Vec<Array2<f64>> {
    consensus_step_with(Execution::Sequential, w, us)
}

fn mix(w: &WeightMatrix, i: usize, items: &[Array2<f64>]) -> Array2<f64> {
    let mut out = Array2::zeros(items[0].dim());
    for (j, item) in items.iter().enumerate() {
        let wij = w.w[[i, j]];
        if wij != 0.0 {
            out.scaled_add(wij, item);
        }
    }
    out
}

fn consensus_step_with(exec: Execution, w: &WeightMatrix, us: &[Array2<f64>]) -> Vec<Array2<f64>> {
    map_indexed(exec, us.len(), |i| Ok(mix(w, i, us))).expect("mixing is infallible")
}

/// `Theta_i <- sum_j w_ij Theta_j + (grad_new_i - grad_old_i)`.
pub fn tracking_step(
    w: &WeightMatrix,
    thetas: &[Array2<f64>],
    grads_new: &[Array2<f64>],
    grads_old: &[Array2<f64>],
) -> Vec<Array2<f64>> {
    (0..thetas.len())
        .map(|i| track_one(w, i, thetas, &grads_new[i], &grads_old[i]))
        .collect()
}

fn track_one(
    w: &WeightMatrix,
    i: usize,
    thetas: &[Array2<f64>],
    g_new: &Array2<f64>,
    g_old: &Array2<f64>,
) -> Array2<f64> {
    let mut out = mix(w, i, thetas);
    Zip::from(&mut out)
        .and(g_new)
        .and(g_old)
        .for_each(|o, &n, &p| *o += n - p);
    out
}

/// A running network of agents, advanced one round at a time.
pub struct Simulation<'a> {
    problem: &'a ProblemData,
    config: RunConfig,
    schedule: GraphSchedule,
    weights: Vec<WeightMatrix>,
    agents: Vec<AgentState>,
    steps: StepSizes,
    gamma: f64,
    round: usize,
    messages: usize,
    flags: StepFlags,
}

impl<'a> Simulation<'a> {
    /// Agents start from random local patches (seeded per agent).
    pub fn new(problem: &'a ProblemData, config: RunConfig) -> Result<Self> {
        let d0 = (0..problem.num_agents())
            .map(|i| {
                initial_dictionary(
                    problem.block(i).view(),
                    problem.atoms(),
                    problem.alpha,
                    agent_seed(config.seed, i),
                )
            })
            .collect();
        Self::with_dictionaries(problem, config, d0)
    }

    pub fn with_dictionaries(
        problem: &'a ProblemData,
        config: RunConfig,
        d0: Vec<Array2<f64>>,
    ) -> Result<Self> {
        config.validate()?;
        let n = problem.num_agents();
        if config.graph.agents != n {
            return Err(Error::Config(format!(
                "graph has {} agents but the data has {n} blocks",
                config.graph.agents
            )));
        }
        if d0.len() != n {
            return Err(Error::Config(format!(
                "{} initial dictionaries for {n} agents",
                d0.len()
            )));
        }
        let schedule = build_schedule(&config.graph)?;
        let weights = schedule.weights(config.theta_min)?;
        let agents = d0
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                if d.dim() != (problem.dim(), problem.atoms()) {
                    return Err(Error::Dimension(format!(
                        "initial dictionary {i} is {:?}",
                        d.dim()
                    )));
                }
                AgentState::new(d, problem.block(i).view(), n)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut steps = config.schedules.steps();
        let gamma = steps.next().expect("infinite");
        Ok(Self {
            problem,
            config,
            schedule,
            weights,
            agents,
            steps,
            gamma,
            round: 0,
            messages: 0,
            flags: StepFlags::default(),
        })
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn messages(&self) -> usize {
        self.messages
    }

    /// Step size the next round will use.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn schedule(&self) -> &GraphSchedule {
        &self.schedule
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    /// Weight matrix applied at round `nu`.
    pub fn weights_at(&self, nu: usize) -> &WeightMatrix {
        &self.weights[nu % self.weights.len()]
    }

    /// Inner solves that hit their iteration budget so far.
    pub fn flags(&self) -> StepFlags {
        self.flags
    }

    pub fn d_bar(&self) -> Array2<f64> {
        let ds: Vec<_> = self.agents.iter().map(|a| a.d.clone()).collect();
        mean_dictionary(&ds)
    }

    pub fn codes(&self) -> Vec<Array2<f64>> {
        self.agents.iter().map(|a| a.x.clone()).collect()
    }

    /// One full round: local updates, then consensus and tracking.
    pub fn step(&mut self) -> Result<()> {
        let exec = self.config.execution;
        let problem = self.problem;
        let sched = self.config.schedules;
        let gamma = self.gamma;

        let flags = map_mut(exec, &mut self.agents, |i, a| {
            let s = problem.block(i).view();
            let f1 = a.local_d_step(s, gamma, &sched, problem.alpha)?;
            let f2 = a.local_x_step(s, problem.lambda, problem.mu, &sched)?;
            Ok(f1.merge(f2))
        })?;
        self.flags = flags.into_iter().fold(self.flags, StepFlags::merge);

        let w = &self.weights[self.round % self.weights.len()];
        let us: Vec<_> = self.agents.iter().map(|a| a.u.clone()).collect();
        let new_d = consensus_step_with(exec, w, &us);
        let agents = &self.agents;
        let new_grads = map_indexed(exec, agents.len(), |i| {
            grad_d(new_d[i].view(), agents[i].x.view(), problem.block(i).view())
        })?;
        let thetas: Vec<_> = agents.iter().map(|a| a.theta.clone()).collect();
        let new_thetas = map_indexed(exec, agents.len(), |i| {
            Ok(track_one(w, i, &thetas, &new_grads[i], &agents[i].grad))
        })?;

        let n = self.agents.len();
        for (((a, d), g), t) in self
            .agents
            .iter_mut()
            .zip(new_d)
            .zip(new_grads)
            .zip(new_thetas)
        {
            a.d = d;
            a.grad = g;
            a.theta = t;
            a.refresh_pi_tilde(n);
        }

        self.round += 1;
        self.messages += 2;
        self.gamma = self.steps.next().expect("infinite");
        Ok(())
    }

    /// Step until the configured round budget or stopping rule and return
    /// the recorded metrics, starting with the current state.
    pub fn run_to_end(&mut self) -> Result<MetricsTrace> {
        let config = self.config.clone();
        drive(self, &config)
    }

    /// Metrics of the current iterate, evaluated by a global observer.
    pub fn observe(&self) -> Result<MetricsRow> {
        let d_bar = self.d_bar();
        let codes = self.codes();
        let ds: Vec<_> = self.agents.iter().map(|a| a.d.clone()).collect();
        Ok(MetricsRow {
            nu: self.round,
            messages: self.messages,
            objective: objective_global(d_bar.view(), &codes, self.problem)?,
            delta: stationarity_gap(d_bar.view(), &codes, self.problem)?,
            cons_err: consensus_error(&ds, d_bar.view()),
            gamma: self.gamma,
            unconverged: self.flags.unconverged,
        })
    }
}

/// Drive `sim` until the round budget or the stopping rule, recording metrics.
pub(crate) fn drive<S: Steppable>(sim: &mut S, config: &RunConfig) -> Result<MetricsTrace> {
    let mut trace = MetricsTrace::default();
    let first = sim.observe()?;
    let mut stop = first.delta <= config.stop_tol;
    trace.push(first);
    while !stop && sim.round() < config.max_rounds {
        sim.step()?;
        if config.records(sim.round()) {
            let row = sim.observe()?;
            stop = row.delta <= config.stop_tol;
            trace.push(row);
        }
    }
    Ok(trace)
}

/// Common driver surface of the learner and the reference schemes.
pub(crate) trait Steppable {
    fn step(&mut self) -> Result<()>;
    fn observe(&self) -> Result<MetricsRow>;
    fn round(&self) -> usize;
}

impl Steppable for Simulation<'_> {
    fn step(&mut self) -> Result<()> {
        Simulation::step(self)
    }
    fn observe(&self) -> Result<MetricsRow> {
        Simulation::observe(self)
    }
    fn round(&self) -> usize {
        Simulation::round(self)
    }
}

/// Run the distributed learner and return its metrics trace.
pub fn run(problem: &ProblemData, config: &RunConfig) -> Result<MetricsTrace> {
    let mut sim = Simulation::new(problem, config.clone())?;
    drive(&mut sim, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::metropolis_weights;
    use crate::graph::Digraph;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
    }

    fn small_problem(agents: usize, seed: u64) -> ProblemData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = (0..agents).map(|_| random(&mut rng, 6, 5)).collect();
        ProblemData::new(blocks, 4, 0.1, 0.05, 1.0).unwrap()
    }

    #[test]
    fn consensus_identity_and_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let us: Vec<_> = (0..3).map(|_| random(&mut rng, 2, 2)).collect();
        assert_eq!(consensus_step(&WeightMatrix::identity(3), &us), us);

        let same = vec![us[0].clone(); 3];
        let mut g = Digraph::empty(3);
        g.add_undirected(0, 1);
        g.add_undirected(1, 2);
        let w = metropolis_weights(&g).unwrap();
        for d in consensus_step(&w, &same) {
            assert!(Zip::from(&d).and(&us[0]).all(|a, b| (a - b).abs() < 1e-15));
        }

        let half = WeightMatrix {
            w: array![[0.5, 0.5], [0.5, 0.5]],
        };
        let out = consensus_step(&half, &us[..2]);
        let avg = (&us[0] + &us[1]) * 0.5;
        assert_eq!(out[0], avg);
        assert_eq!(out[1], avg);
    }

    #[test]
    fn tracking_preserves_mean_with_static_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let thetas: Vec<_> = (0..4).map(|_| random(&mut rng, 3, 2)).collect();
        let grads: Vec<_> = (0..4).map(|_| random(&mut rng, 3, 2)).collect();
        let mut g = Digraph::empty(4);
        for k in 0..4 {
            g.add_undirected(k, (k + 1) % 4);
        }
        let w = metropolis_weights(&g).unwrap();
        let out = tracking_step(&w, &thetas, &grads, &grads);
        let mean =
            |v: &[Array2<f64>]| v.iter().fold(Array2::<f64>::zeros((3, 2)), |a, b| a + b) / 4.0;
        let (before, after) = (mean(&thetas), mean(&out));
        assert!(Zip::from(&before)
            .and(&after)
            .all(|a, b| (a - b).abs() < 1e-14));
    }

    #[test]
    fn single_agent_tracker_equals_gradient() {
        let p = small_problem(1, 3);
        let mut cfg = RunConfig::new(1);
        cfg.max_rounds = 20;
        let mut sim = Simulation::new(&p, cfg).unwrap();
        for _ in 0..20 {
            sim.step().unwrap();
            let a = &sim.agents()[0];
            let g = grad_d(a.d.view(), a.x.view(), p.block(0).view()).unwrap();
            assert!(Zip::from(&a.theta)
                .and(&g)
                .all(|t, g| (t - g).abs() <= 1e-12 * (1.0 + g.abs())));
        }
    }

    #[test]
    fn tracking_mean_matches_recomputed_gradients() {
        let p = small_problem(5, 4);
        let mut cfg = RunConfig::new(5);
        cfg.graph = ScheduleSpec {
            kind: ScheduleKind::StaticRandomGeometric,
            seed: 3,
            ..cfg.graph
        };
        let mut sim = Simulation::new(&p, cfg).unwrap();
        let mut worst = 0.0_f64;
        for _ in 0..100 {
            sim.step().unwrap();
            let mut diff = Array2::<f64>::zeros((6, 4));
            for (i, a) in sim.agents().iter().enumerate() {
                let g = grad_d(a.d.view(), a.x.view(), p.block(i).view()).unwrap();
                diff = diff + &a.theta - &g;
            }
            worst = worst.max(diff.iter().fold(0.0, |m: f64, v| m.max(v.abs())) / 5.0);
        }
        assert!(worst <= 1e-10, "{worst}");
    }

    #[test]
    fn frozen_step_keeps_average_dictionary() {
        let p = small_problem(4, 5);
        let mut cfg = RunConfig::new(4);
        cfg.schedules.gamma0 = 0.0;
        let mut sim = Simulation::new(&p, cfg).unwrap();
        let d0 = sim.d_bar();
        let x0 = sim.codes();
        for _ in 0..30 {
            sim.step().unwrap();
            assert!(Zip::from(&sim.d_bar())
                .and(&d0)
                .all(|a, b| (a - b).abs() < 1e-12));
        }
        assert_ne!(sim.codes(), x0);
    }

    #[test]
    fn stationary_state_with_zero_step() {
        // identical copies on a static graph with gamma = 0: D, U, Theta and Pi stay put
        let p = small_problem(3, 6);
        let mut cfg = RunConfig::new(3);
        cfg.schedules.gamma0 = 0.0;
        let d = initial_dictionary(p.block(0).view(), 4, 1.0, 1);
        let mut sim = Simulation::with_dictionaries(&p, cfg, vec![d.clone(); 3]).unwrap();
        sim.step().unwrap();
        let snapshot: Vec<_> = sim
            .agents()
            .iter()
            .map(|a| (a.d.clone(), a.u.clone()))
            .collect();
        for _ in 0..10 {
            sim.step().unwrap();
        }
        for (a, (d, u)) in sim.agents().iter().zip(&snapshot) {
            assert!(Zip::from(&a.d).and(d).all(|x, y| (x - y).abs() < 1e-14));
            assert!(Zip::from(&a.u).and(u).all(|x, y| (x - y).abs() < 1e-14));
        }
    }

    #[test]
    fn message_count_and_feasibility() {
        let p = small_problem(4, 7);
        let mut cfg = RunConfig::new(4);
        cfg.graph = ScheduleSpec {
            kind: ScheduleKind::TvRingPartition,
            window: 2,
            period: 2,
            ..cfg.graph
        };
        let mut sim = Simulation::new(&p, cfg).unwrap();
        for nu in 1..=40 {
            sim.step().unwrap();
            assert_eq!(sim.messages(), 2 * nu);
            for a in sim.agents() {
                assert!(crate::prox::max_column_norm(a.d.view()) <= 1.0 + 1e-12);
                assert!(crate::prox::max_column_norm(a.u.view()) <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn run_records_strided_rows_and_last_round() {
        let p = small_problem(3, 8);
        let mut cfg = RunConfig::new(3);
        cfg.max_rounds = 23;
        cfg.metric_stride = 5;
        let t = run(&p, &cfg).unwrap();
        let nus: Vec<_> = t.rows.iter().map(|r| r.nu).collect();
        assert_eq!(nus, vec![0, 5, 10, 15, 20, 23]);

        cfg.max_rounds = 0;
        let t = run(&p, &cfg).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].nu, 0);
    }

    #[test]
    fn stop_tolerance_ends_early() {
        let p = small_problem(2, 9);
        let mut cfg = RunConfig::new(2);
        cfg.max_rounds = 1000;
        cfg.stop_tol = f64::INFINITY;
        let t = run(&p, &cfg).unwrap();
        assert_eq!(t.rows.len(), 1);
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let p = small_problem(6, 10);
        let mut cfg = RunConfig::new(6);
        cfg.max_rounds = 30;
        cfg.schedules.variant = crate::agent::Variant::Plain;
        cfg.execution = Execution::Sequential;
        let a = run(&p, &cfg).unwrap();
        cfg.execution = Execution::Parallel;
        let b = run(&p, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_errors_surface_before_running() {
        let p = small_problem(3, 11);
        let mut cfg = RunConfig::new(4);
        assert!(run(&p, &cfg).is_err());
        cfg = RunConfig::new(3);
        cfg.metric_stride = 0;
        assert!(run(&p, &cfg).is_err());
        cfg = RunConfig::new(3);
        cfg.schedules.gamma0 = 2.0;
        assert!(run(&p, &cfg).is_err());
    }
}
