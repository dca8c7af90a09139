//! The `run`, `denoise` and `compare` pipelines, independent of file output.

use ddl_core::image::{
    add_gaussian_noise, extract_patches, read_pgm, reconstruct_image, test_image, GrayImage,
};
use ddl_core::metrics::{diffusion_baseline, psnr_mse, MetricsRow};
use ddl_core::{make_synthetic, MetricsTrace, ProblemData, Simulation, Variant};

use crate::config::Config;
use crate::error::Result;

/// D²L on the synthetic instance described by `cfg`.
pub fn run_synthetic(cfg: &Config) -> Result<MetricsTrace> {
    let (_, problem) = make_synthetic(&cfg.synthetic_spec())?;
    let run = cfg.run_config(problem.num_agents(), cfg.rounds)?;
    Ok(ddl_core::run(&problem, &run)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quality {
    pub psnr: f64,
    pub mse: f64,
}

impl Quality {
    fn between(reference: &GrayImage, test: &GrayImage) -> Result<Self> {
        let (psnr, mse) = psnr_mse(reference, test)?;
        Ok(Self { psnr, mse })
    }
}

#[derive(Debug, Clone)]
pub struct DenoiseOutcome {
    pub clean: GrayImage,
    pub noisy: GrayImage,
    pub denoised: GrayImage,
    pub input: Quality,
    pub output: Quality,
    pub messages: usize,
    pub trace: MetricsTrace,
}

fn source_image(cfg: &Config) -> Result<GrayImage> {
    match &cfg.image {
        Some(path) => {
            let img = read_pgm(path)?;
            let (w, h) = (cfg.width.min(img.width), cfg.height.min(img.height));
            Ok(img.crop(w, h)?)
        }
        None => Ok(test_image(cfg.width, cfg.height)),
    }
}

/// Corrupt the source image, learn a dictionary over the network from its
/// patches and rebuild the image from the learned sparse representation.
pub fn denoise(cfg: &Config) -> Result<DenoiseOutcome> {
    let clean = source_image(cfg)?;
    let noisy = add_gaussian_noise(&clean, cfg.noise_sigma, cfg.noise_seed)?;
    let mut ds = extract_patches(&noisy, cfg.patch, cfg.stride)?;
    if cfg.center {
        ds.center();
    }
    let problem = ProblemData::new(
        ds.blocks(cfg.denoise_agents)?,
        cfg.denoise_atoms,
        cfg.denoise_lambda,
        cfg.denoise_mu,
        cfg.denoise_alpha,
    )?;
    let run = cfg.run_config(cfg.denoise_agents, cfg.denoise_rounds)?;
    let mut sim = Simulation::new(&problem, run)?;
    let trace = sim.run_to_end()?;
    let denoised = reconstruct_image(&ds, &sim.d_bar(), &sim.codes())?;
    Ok(DenoiseOutcome {
        input: Quality::between(&clean, &noisy)?,
        output: Quality::between(&clean, &denoised)?,
        messages: sim.messages(),
        clean,
        noisy,
        denoised,
        trace,
    })
}

/// One method's metrics at one message budget.
#[derive(Debug, Clone)]
pub struct BudgetEntry {
    pub method: String,
    pub budget: usize,
    pub row: MetricsRow,
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub traces: Vec<(String, MetricsTrace)>,
    pub entries: Vec<BudgetEntry>,
}

impl CompareOutcome {
    pub fn entry(&self, method: &str, budget: usize) -> Option<&MetricsRow> {
        self.entries
            .iter()
            .find(|e| e.method == method && e.budget == budget)
            .map(|e| &e.row)
    }
}

pub const METHOD_LINEARIZED: &str = "d2l_linearized";
pub const METHOD_PLAIN: &str = "d2l_plain";
pub const METHOD_BASELINE: &str = "atc_baseline";

/// Both D²L variants and the diffusion baseline on the synthetic instance,
/// each run long enough to reach the largest message budget.
pub fn compare(cfg: &Config) -> Result<CompareOutcome> {
    let (_, problem) = make_synthetic(&cfg.synthetic_spec())?;
    let n = problem.num_agents();
    let max_budget = cfg.budgets.iter().copied().max().unwrap_or(0);
    let mut traces = Vec::new();
    for (name, variant) in [
        (METHOD_LINEARIZED, Variant::Linearized),
        (METHOD_PLAIN, Variant::Plain),
    ] {
        let mut run = cfg.run_config(n, max_budget.div_ceil(2))?;
        run.schedules.variant = variant;
        traces.push((name.to_string(), ddl_core::run(&problem, &run)?));
    }
    let run = cfg.run_config(n, max_budget)?;
    traces.push((
        METHOD_BASELINE.to_string(),
        diffusion_baseline(&problem, &run)?,
    ));

    let mut entries = Vec::new();
    for &budget in &cfg.budgets {
        for (name, trace) in &traces {
            if let Some(row) = trace.at_messages(budget) {
                entries.push(BudgetEntry {
                    method: name.clone(),
                    budget,
                    row: row.clone(),
                });
            }
        }
    }
    Ok(CompareOutcome { traces, entries })
}
