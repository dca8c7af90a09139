//! The global dictionary-learning instance and the smooth loss shared by
//! every agent.
//!
//! Agent `i` owns the data block `S_i` (M x n_i) and the code block `X_i`
//! (K x n_i). The local smooth loss is `f_i(D, X_i) = 0.5 * ||S_i - D X_i||_F^2`
//! and the full objective adds the elastic-net penalty on every code block.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Column-partitioned data matrix plus the regularization constants.
#[derive(Debug, Clone)]
pub struct ProblemData {
    blocks: Vec<Array2<f64>>,
    m: usize,
    k: usize,
    /// Weight of the entrywise l1 penalty.
    pub lambda: f64,
    /// Weight of the squared Frobenius penalty.
    pub mu: f64,
    /// Bound on the Euclidean norm of every dictionary column.
    pub alpha: f64,
}

impl ProblemData {
    pub fn new(
        blocks: Vec<Array2<f64>>,
        k: usize,
        lambda: f64,
        mu: f64,
        alpha: f64,
    ) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Instance(
                "at least one agent block is required".into(),
            ));
        }
        if k == 0 {
            return Err(Error::Instance("dictionary size K must be positive".into()));
        }
        // NaN fails these comparisons as well.
        if !(lambda > 0.0) || !(mu > 0.0) || !(alpha > 0.0) {
            return Err(Error::Instance(format!(
                "lambda, mu and alpha must be positive (got {lambda}, {mu}, {alpha})"
            )));
        }
        let m = blocks[0].nrows();
        if m == 0 {
            return Err(Error::Instance(
                "ambient dimension M must be positive".into(),
            ));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.nrows() != m {
                return Err(Error::Instance(format!(
                    "block {i} has {} rows, expected {m}",
                    b.nrows()
                )));
            }
            if b.ncols() == 0 {
                return Err(Error::Instance(format!("block {i} has no columns")));
            }
        }
        Ok(Self {
            blocks,
            m,
            k,
            lambda,
            mu,
            alpha,
        })
    }

    pub fn blocks(&self) -> &[Array2<f64>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &Array2<f64> {
        &self.blocks[i]
    }

    pub fn num_agents(&self) -> usize {
        self.blocks.len()
    }

    /// Ambient (signal) dimension M.
    pub fn dim(&self) -> usize {
        self.m
    }

    /// Number of dictionary atoms K.
    pub fn atoms(&self) -> usize {
        self.k
    }

    pub fn total_samples(&self) -> usize {
        self.blocks.iter().map(|b| b.ncols()).sum()
    }

    /// Merge every block into a single-agent instance with the same constants.
    pub fn centralized(&self) -> Self {
        let views: Vec<_> = self.blocks.iter().map(|b| b.view()).collect();
        let s = ndarray::concatenate(ndarray::Axis(1), &views).expect("blocks share row count");
        Self {
            blocks: vec![s],
            ..self.clone()
        }
    }
}

fn check_dims(d: ArrayView2<f64>, x: ArrayView2<f64>, s: ArrayView2<f64>) -> Result<()> {
    if d.ncols() != x.nrows() || d.nrows() != s.nrows() || x.ncols() != s.ncols() {
        return Err(Error::Dimension(format!(
            "D is {:?}, X is {:?}, S is {:?}",
            d.dim(),
            x.dim(),
            s.dim()
        )));
    }
    Ok(())
}

/// `D X - S`.
pub fn residual(d: ArrayView2<f64>, x: ArrayView2<f64>, s: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_dims(d, x, s)?;
    Ok(d.dot(&x) - s)
}

/// `f_i(D, X) = 0.5 * ||S - D X||_F^2`.
pub fn local_loss(d: ArrayView2<f64>, x: ArrayView2<f64>, s: ArrayView2<f64>) -> Result<f64> {
    let r = residual(d, x, s)?;
    Ok(0.5 * r.iter().map(|v| v * v).sum::<f64>())
}

/// Gradient of the local loss with respect to the dictionary: `(D X - S) X^T`.
pub fn grad_d(d: ArrayView2<f64>, x: ArrayView2<f64>, s: ArrayView2<f64>) -> Result<Array2<f64>> {
    let r = residual(d, x, s)?;
    Ok(r.dot(&x.t()))
}

/// Gradient of the local loss with respect to the codes: `D^T (D X - S)`.
pub fn grad_x(d: ArrayView2<f64>, x: ArrayView2<f64>, s: ArrayView2<f64>) -> Result<Array2<f64>> {
    let r = residual(d, x, s)?;
    Ok(d.t().dot(&r))
}

/// `lambda * ||X||_{1,1} + mu * ||X||_F^2`.
pub fn elastic_net(x: ArrayView2<f64>, lambda: f64, mu: f64) -> f64 {
    x.iter().map(|v| lambda * v.abs() + mu * v * v).sum()
}

/// Full objective `sum_i [ f_i(D, X_i) + lambda ||X_i||_1 + mu ||X_i||_F^2 ]`.
pub fn objective_global(
    d: ArrayView2<f64>,
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
    if d.dim() != (problem.dim(), problem.atoms()) {
        return Err(Error::Dimension(format!(
            "dictionary is {:?}, expected {:?}",
            d.dim(),
            (problem.dim(), problem.atoms())
        )));
    }
    let mut total = 0.0;
    for (x, s) in codes.iter().zip(problem.blocks()) {
        total +=
            local_loss(d, x.view(), s.view())? + elastic_net(x.view(), problem.lambda, problem.mu);
    }
    Ok(total)
}
