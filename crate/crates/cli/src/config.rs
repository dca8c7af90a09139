//! Flat `key = value` experiment configuration (TOML syntax, no tables).
//!
//! Every key is optional; missing keys take the values of
//! [`Config::default`], which is also what `configs/default.toml` spells out.

use std::fs;
use std::path::{Path, PathBuf};

use ddl_core::agent::Schedules;
use ddl_core::graph::ScheduleSpec;
use ddl_core::{Execution, RunConfig, ScheduleKind, SyntheticSpec, Variant};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    // synthetic instance
    pub dim: usize,
    pub atoms: usize,
    pub samples: usize,
    pub agents: usize,
    pub sparsity: usize,
    pub noise: f64,
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub seed: u64,

    // algorithm
    pub variant: String,
    pub gamma0: f64,
    pub eps_gamma: f64,
    pub tau_d: f64,
    pub eps_tau: f64,
    pub rounds: usize,
    pub stop_tol: f64,
    pub metric_stride: usize,
    pub execution: String,

    // network
    pub graph: String,
    pub window: Option<usize>,
    pub period: Option<usize>,
    pub graph_seed: u64,
    pub theta_min: f64,

    // denoising
    /// PGM to denoise; the built-in scene is used when absent.
    pub image: Option<PathBuf>,
    pub width: usize,
    pub height: usize,
    pub patch: usize,
    pub stride: usize,
    pub denoise_atoms: usize,
    pub denoise_agents: usize,
    pub denoise_lambda: f64,
    pub denoise_mu: f64,
    pub denoise_alpha: f64,
    pub denoise_rounds: usize,
    pub noise_sigma: f64,
    pub noise_seed: u64,
    pub center: bool,

    // comparison
    pub budgets: Vec<usize>,
}

impl Default for Config {
    fn default() -> Self {
        let syn = SyntheticSpec::standard();
        let sched = Schedules::default();
        Self {
            dim: syn.m,
            atoms: syn.k,
            samples: syn.n,
            agents: syn.agents,
            sparsity: syn.k0,
            noise: syn.sigma_n,
            lambda: syn.lambda,
            mu: syn.mu,
            alpha: syn.alpha,
            seed: syn.seed,
            variant: Variant::Linearized.to_string(),
            gamma0: sched.gamma0,
            eps_gamma: sched.eps_gamma,
            tau_d: sched.tau_d,
            eps_tau: sched.eps_tau,
            rounds: 500,
            stop_tol: 0.0,
            metric_stride: 1,
            execution: Execution::Parallel.to_string(),
            graph: ScheduleKind::StaticRing.to_string(),
            window: None,
            period: None,
            graph_seed: 0,
            theta_min: ddl_core::graph::THETA_MIN,
            image: None,
            width: 64,
            height: 64,
            patch: 8,
            stride: 2,
            denoise_atoms: 64,
            denoise_agents: 10,
            denoise_lambda: 0.125,
            denoise_mu: 0.0625,
            denoise_alpha: 1.0,
            denoise_rounds: 100,
            noise_sigma: 25.5,
            noise_seed: 1,
            center: true,
            budgets: vec![200, 1000],
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub rounds: Option<usize>,
    pub variant: Option<String>,
    pub agents: Option<usize>,
    pub graph: Option<String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Read(path.to_path_buf(), e))?;
        Self::parse(&text)
    }

    /// Apply overrides. `agents` and `rounds` go to the denoising task too
    /// when `denoising` is set.
    pub fn apply(&mut self, o: &Overrides, denoising: bool) -> Result<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(v) = &o.variant {
            self.variant = v.clone();
        }
        if let Some(g) = &o.graph {
            self.graph = g.clone();
        }
        match (denoising, o.agents) {
            (true, Some(a)) => self.denoise_agents = a,
            (false, Some(a)) => self.agents = a,
            _ => {}
        }
        match (denoising, o.rounds) {
            (true, Some(r)) => self.denoise_rounds = r,
            (false, Some(r)) => self.rounds = r,
            _ => {}
        }
        self.check()
    }

    /// Catch malformed enumerations early so every subcommand fails the same way.
    pub fn check(&self) -> Result<()> {
        self.variant()?;
        self.schedule_kind()?;
        self.execution()?;
        if self.budgets.is_empty() || self.budgets.contains(&0) {
            return Err(CliError::Config(
                "budgets must be a non-empty list of positive counts".into(),
            ));
        }
        Ok(())
    }

    pub fn variant(&self) -> Result<Variant> {
        Ok(self.variant.parse()?)
    }

    pub fn schedule_kind(&self) -> Result<ScheduleKind> {
        Ok(self.graph.parse()?)
    }

    pub fn execution(&self) -> Result<Execution> {
        Ok(self.execution.parse()?)
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            m: self.dim,
            k: self.atoms,
            n: self.samples,
            agents: self.agents,
            k0: self.sparsity,
            sigma_n: self.noise,
            alpha: self.alpha,
            lambda: self.lambda,
            mu: self.mu,
            seed: self.seed,
        }
    }

    pub fn schedule_spec(&self, agents: usize) -> Result<ScheduleSpec> {
        let preset = ScheduleSpec::preset(self.schedule_kind()?, agents);
        Ok(ScheduleSpec {
            window: self.window.unwrap_or(preset.window),
            period: self.period.unwrap_or(preset.period),
            seed: self.graph_seed,
            ..preset
        })
    }

    /// Run settings for a network of `agents` nodes over `rounds` rounds.
    pub fn run_config(&self, agents: usize, rounds: usize) -> Result<RunConfig> {
        let schedules = Schedules {
            gamma0: self.gamma0,
            eps_gamma: self.eps_gamma,
            tau_d: self.tau_d,
            eps_tau: self.eps_tau,
            variant: self.variant()?,
            ..Schedules::default()
        };
        let cfg = RunConfig {
            schedules,
            graph: self.schedule_spec(agents)?,
            max_rounds: rounds,
            stop_tol: self.stop_tol,
            metric_stride: self.metric_stride,
            seed: self.seed,
            theta_min: self.theta_min,
            execution: self.execution()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
