//! Self-checks run by `ddl validate`.

use ddl_core::graph::{
    build_schedule, check_b_strong_connectivity, shipped_schedules, validate_weights, ScheduleSpec,
};
use ddl_core::problem::{grad_d, grad_x, local_loss};
use ddl_core::prox::{elastic_net_prox, max_column_norm, project_dictionary};
use ddl_core::{make_synthetic, Simulation};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Config;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

pub fn run_checks(cfg: &Config) -> Vec<Check> {
    let mut checks = Vec::new();
    checks.push(config_check(cfg));
    let mut specs = shipped_schedules(cfg.agents);
    if let Ok(spec) = cfg.schedule_spec(cfg.agents) {
        specs.push(spec);
    }
    for spec in specs {
        checks.push(schedule_check(&spec, cfg.theta_min));
    }
    checks.push(gradient_check(cfg.seed));
    checks.push(prox_check(cfg.seed));
    checks.push(projection_check(cfg.seed));
    checks.push(tracking_check(cfg));
    checks
}

fn config_check(cfg: &Config) -> Check {
    let result = make_synthetic(&cfg.synthetic_spec())
        .map_err(|e| e.to_string())
        .and_then(|(_, p)| {
            cfg.run_config(p.num_agents(), cfg.rounds)
                .map_err(|e| e.to_string())
        });
    match result {
        Ok(_) => Check::new("config", true, "instance and run settings are consistent"),
        Err(e) => Check::new("config", false, e),
    }
}

fn schedule_check(spec: &ScheduleSpec, theta_min: f64) -> Check {
    let name = format!(
        "schedule {} (I={}, P={}, B={})",
        spec.kind, spec.agents, spec.period, spec.window
    );
    let schedule = match build_schedule(spec) {
        Ok(s) => s,
        Err(e) => return Check::new(name, false, e.to_string()),
    };
    if !check_b_strong_connectivity(&schedule, spec.window) {
        return Check::new(name, false, "not B-strongly connected");
    }
    match schedule.weights(theta_min) {
        Ok(ws) => {
            let ok = ws
                .iter()
                .zip(schedule.graphs())
                .all(|(w, g)| validate_weights(w, g, theta_min));
            Check::new(name, ok, format!("{} weight matrices", ws.len()))
        }
        Err(e) => Check::new(name, false, e.to_string()),
    }
}

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
}

/// Largest relative error of both gradients against central differences.
fn gradient_check(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let (m, k, n) = (
            rng.random_range(2..7),
            rng.random_range(2..7),
            rng.random_range(2..7),
        );
        let (d, x, s) = (
            random(&mut rng, m, k),
            random(&mut rng, k, n),
            random(&mut rng, m, n),
        );
        let gd = grad_d(d.view(), x.view(), s.view()).expect("shapes agree");
        let gx = grad_x(d.view(), x.view(), s.view()).expect("shapes agree");
        let mut fd_d = Array2::zeros(d.dim());
        for idx in ndarray::indices(d.dim()) {
            let (mut dp, mut dm) = (d.clone(), d.clone());
            dp[idx] += h;
            dm[idx] -= h;
            fd_d[idx] = (local_loss(dp.view(), x.view(), s.view()).unwrap()
                - local_loss(dm.view(), x.view(), s.view()).unwrap())
                / (2.0 * h);
        }
        let mut fd_x = Array2::zeros(x.dim());
        for idx in ndarray::indices(x.dim()) {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[idx] += h;
            xm[idx] -= h;
            fd_x[idx] = (local_loss(d.view(), xp.view(), s.view()).unwrap()
                - local_loss(d.view(), xm.view(), s.view()).unwrap())
                / (2.0 * h);
        }
        worst = worst.max(relative(&gd, &fd_d)).max(relative(&gx, &fd_x));
    }
    Check::new(
        "gradients",
        worst <= 1e-5,
        format!("max relative error {worst:.2e}"),
    )
}

fn relative(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let diff = (a - b).iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

/// Closed-form elastic-net prox against a ternary search of the scalar objective.
fn prox_check(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let v: f64 = rng.random_range(-3.0..3.0);
        let (t, lambda, mu) = (
            rng.random_range(0.1..2.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
        );
        let obj = |z: f64| 0.5 * (z - v).powi(2) + t * (lambda * z.abs() + mu * z * z);
        let (mut lo, mut hi) = (-4.0_f64, 4.0_f64);
        for _ in 0..200 {
            let (a, b) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
            if obj(a) <= obj(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        worst = worst.max((elastic_net_prox(v, t, lambda, mu) - 0.5 * (lo + hi)).abs());
    }
    Check::new(
        "elastic-net prox",
        worst <= 1e-6,
        format!("max deviation {worst:.2e}"),
    )
}

fn projection_check(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
    let mut ok = true;
    for _ in 0..20 {
        let d = random(&mut rng, 6, 5) * 3.0;
        let alpha = rng.random_range(0.2..2.0);
        let p = project_dictionary(d.view(), alpha);
        let again = project_dictionary(p.view(), alpha);
        ok &= max_column_norm(p.view()) <= alpha * (1.0 + 1e-12);
        ok &= (&again - &p).iter().all(|v| v.abs() <= 1e-12);
    }
    Check::new("dictionary projection", ok, "feasible and idempotent")
}

/// Mean of the trackers equals the mean local gradient on a short run.
fn tracking_check(cfg: &Config) -> Check {
    let result = (|| -> crate::Result<f64> {
        let (_, problem) = make_synthetic(&cfg.synthetic_spec())?;
        let run = cfg.run_config(problem.num_agents(), 20)?;
        let mut sim = Simulation::new(&problem, run)?;
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            sim.step()?;
            let n = sim.agents().len() as f64;
            let mut gap = Array2::<f64>::zeros(sim.agents()[0].theta.dim());
            for a in sim.agents() {
                gap = gap + (&a.theta - &a.grad) / n;
            }
            worst = worst.max(gap.iter().fold(0.0, |m, v| m.max(v.abs())));
        }
        Ok(worst)
    })();
    match result {
        Ok(w) => Check::new(
            "gradient tracking",
            w <= 1e-10,
            format!("max deviation {w:.2e}"),
        ),
        Err(e) => Check::new("gradient tracking", false, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_passes_every_check() {
        for c in run_checks(&Config::default()) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn broken_config_is_reported() {
        let cfg = Config {
            sparsity: 100,
            ..Config::default()
        };
        let checks = run_checks(&cfg);
        assert!(!checks[0].passed);
    }
}
