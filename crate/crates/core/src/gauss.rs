//! Continued fractions with bounded partial quotients: the Gauss-map transfer
//! operator `f ↦ Σ_{k=1}^N (k+x)^{-2s} f(1/(k+x))` on `[0, 1]`.

use rayon::prelude::*;
use serde::Serialize;

use crate::dimension::{pressure_root, solve_bowen, BowenOptions, PressureBracket, SpectralProblem, MAX_BLOCKS};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::tail::tail_sum;

/// Chebyshev–Lobatto nodes on `[0, 1]`; clustered at both ends.
pub fn lobatto_nodes(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| match j {
            0 => 0.0,
            _ if j == n - 1 => 1.0,
            _ => 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / (n - 1) as f64).cos()),
        })
        .collect()
}

/// Discretised Gauss operator. Values between nodes come from linear
/// interpolation of `(1+x)·f`, which reproduces `1/(1+x)` exactly.
#[derive(Clone, Debug)]
pub struct GaussOperator {
    pub nodes: Vec<f64>,
    /// Branch bound `N`; `None` sums every branch.
    pub branches: Option<usize>,
    pub tail_start: usize,
}

impl GaussOperator {
    pub fn new(n_nodes: usize, branches: Option<usize>) -> Result<Self> {
        if n_nodes < 3 {
            return Err(Error::InvalidArgument(format!("need at least 3 nodes, got {n_nodes}")));
        }
        if branches == Some(0) {
            return Err(Error::InvalidArgument("branch bound must be positive".into()));
        }
        Ok(GaussOperator { nodes: lobatto_nodes(n_nodes), branches, tail_start: 64 })
    }

    fn cell(&self, y: f64) -> (usize, f64) {
        let x = &self.nodes;
        let j = x.partition_point(|&v| v <= y).clamp(1, x.len() - 1) - 1;
        (j, ((y - x[j]) / (x[j + 1] - x[j])).clamp(0.0, 1.0))
    }

    /// Interpolated value at `y` from node values.
    pub fn interpolate(&self, f: &[f64], y: f64) -> f64 {
        let (j, t) = self.cell(y);
        let x = &self.nodes;
        ((1.0 + x[j]) * (1.0 - t) * f[j] + (1.0 + x[j + 1]) * t * f[j + 1]) / (1.0 + y)
    }

    fn row_into(&self, x: f64, s: f64, out: &mut [f64]) {
        let nodes = &self.nodes;
        let mut k = 1usize;
        loop {
            if let Some(n) = self.branches {
                if k > n {
                    return;
                }
            }
            let y = 1.0 / (k as f64 + x);
            if self.branches.is_none() && k >= self.tail_start && y < nodes[1] {
                break;
            }
            let w = y.powf(2.0 * s);
            let (j, t) = self.cell(y);
            out[j] += w * (1.0 + nodes[j]) * (1.0 - t) / (1.0 + y);
            out[j + 1] += w * (1.0 + nodes[j + 1]) * t / (1.0 + y);
            k += 1;
        }
        // every remaining image lies in the first cell
        let x1 = nodes[1];
        let a = tail_sum(|k| (k + x).powf(-2.0 * s) / (1.0 + 1.0 / (k + x)), k as f64, 2.0 * s);
        let b = tail_sum(
            |k| (k + x).powf(-2.0 * s) / (1.0 + 1.0 / (k + x)) / ((k + x) * x1),
            k as f64,
            2.0 * s + 1.0,
        );
        out[0] += a - b;
        out[1] += (1.0 + x1) * b;
    }

    pub fn assemble(&self, s: f64) -> Result<DenseMatrix> {
        if self.branches.is_none() && s <= 0.5 {
            return Err(Error::InvalidArgument(format!("the full Gauss operator needs s > 1/2, got {s}")));
        }
        let n = self.nodes.len();
        let mut m = DenseMatrix::zeros(n);
        m.data.par_chunks_mut(n).enumerate().for_each(|(i, row)| self.row_into(self.nodes[i], s, row));
        Ok(m)
    }

    /// `max_i |(L h)(x_i) − h(x_i)|` for `h = 1/(1+x)` at `s = 1`.
    pub fn gauss_density_residual(&self) -> Result<f64> {
        let m = self.assemble(1.0)?;
        let h: Vec<f64> = self.nodes.iter().map(|x| 1.0 / (1.0 + x)).collect();
        Ok(m.matvec(&h).iter().zip(&h).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

impl SpectralProblem for GaussOperator {
    fn operator(&self, s: f64) -> Result<DenseMatrix> {
        self.assemble(s)
    }
}

/// `dim E_N`, the root of `λ(s, N) = 1`; zero for `N = 1`.
pub fn gauss_dim(n: usize, nodes: usize, opts: &BowenOptions) -> Result<f64> {
    match n {
        0 => Err(Error::InvalidArgument("branch bound must be positive".into())),
        1 => Ok(0.0),
        _ => Ok(solve_bowen(&GaussOperator::new(nodes, Some(n))?, 0.01, 1.0, opts)?.s),
    }
}

/// Finite-depth bracket for `dim E_N` from all blocks of `depth` digits in
/// `1..=N`. On `[0, 1]` the block map `x ↦ (p + p′x)/(q + q′x)` has
/// derivative between `(q + q′)^{-2}` and `q^{-2}`.
pub fn gauss_cylinder_bracket(n: usize, depth: usize) -> Result<PressureBracket> {
    if n < 2 || depth == 0 {
        return Err(Error::InvalidArgument(format!("need N ≥ 2 and positive depth, got N={n}, depth={depth}")));
    }
    let blocks = (n as u128).checked_pow(depth as u32).unwrap_or(u128::MAX);
    if blocks > MAX_BLOCKS {
        return Err(Error::TooManyBlocks(blocks));
    }
    let mut inf = Vec::with_capacity(blocks as usize);
    let mut sup = Vec::with_capacity(blocks as usize);
    // (q_{j-1}, q_j) along each block
    let mut stack = vec![(0usize, 0.0f64, 1.0f64)];
    while let Some((len, q_prev, q)) = stack.pop() {
        if len == depth {
            inf.push(-2.0 * (q + q_prev).ln());
            sup.push(-2.0 * q.ln());
            continue;
        }
        for k in 1..=n {
            stack.push((len + 1, q, k as f64 * q + q_prev));
        }
    }
    Ok(PressureBracket { depth, blocks, s_inf: pressure_root(&inf)?, s_sup: pressure_root(&sup)? })
}

#[derive(Clone, Debug, Serialize)]
pub struct HensleyRow {
    pub n: usize,
    pub dim: f64,
    /// `N·(1 − dim E_N)`.
    pub scaled_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HensleyFit {
    pub rows: Vec<HensleyRow>,
    /// Limit of `N·(1 − dim E_N)` from a least-squares line in `1/N`.
    pub constant: f64,
    pub slope: f64,
    pub target: f64,
}

pub fn hensley_fit(ns: &[usize], nodes: usize, opts: &BowenOptions) -> Result<HensleyFit> {
    let lo = *ns.iter().min().ok_or_else(|| Error::Fit("no branch bounds".into()))?;
    let hi = *ns.iter().max().unwrap();
    if lo < 2 || hi < 5 * lo {
        return Err(Error::Fit(format!("branch bounds must span a factor of 5, got {lo}..{hi}")));
    }
    let rows = ns
        .par_iter()
        .map(|&n| {
            let dim = gauss_dim(n, nodes, opts)?;
            Ok(HensleyRow { n, dim, scaled_gap: n as f64 * (1.0 - dim) })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| 1.0 / r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.scaled_gap).collect();
    let (constant, slope) = crate::dimension::line_fit(&xs, &ys)?;
    Ok(HensleyFit { rows, constant, slope, target: 6.0 / std::f64::consts::PI.powi(2) })
}
