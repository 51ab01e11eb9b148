//! Dense nonnegative matrices and power iteration.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct DenseMatrix {
    pub n: usize,
    /// Row-major entries.
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "matrix must be square");
            data.extend(r);
        }
        DenseMatrix { n, data }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        self.data
            .par_chunks(self.n)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        data.par_chunks_mut(n).enumerate().for_each(|(j, out)| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.data[i * n + j];
            }
        });
        DenseMatrix { n, data }
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        DenseMatrix { n: self.n, data }
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        let n = self.n;
        let t = other.transpose();
        let mut data = vec![0.0; n * n];
        data.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
            let r = self.row(i);
            for (j, o) in out.iter_mut().enumerate() {
                *o = r.iter().zip(t.row(j)).map(|(a, b)| a * b).sum();
            }
        });
        DenseMatrix { n, data }
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions { tol: 1e-12, max_iter: 20_000 }
    }
}

/// Perron vector by power iteration with sup-norm scaling.
/// Returns `(λ, v, iterations)` with `‖v‖_∞ = 1`. With `strict` every entry
/// must stay positive, otherwise only nonnegative.
pub fn power_iteration(
    m: &DenseMatrix,
    start: Option<&[f64]>,
    strict: bool,
    opts: PowerOptions,
) -> Result<(f64, Vec<f64>, usize)> {
    let mut v = match start {
        Some(s) if s.len() == m.n && s.iter().all(|x| *x > 0.0) => s.to_vec(),
        _ => vec![1.0; m.n],
    };
    let s = sup_norm(&v);
    v.iter_mut().for_each(|x| *x /= s);
    let mut lambda = 0.0;
    for it in 1..=opts.max_iter {
        let w = m.matvec(&v);
        let nrm = sup_norm(&w);
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(Error::NonPositive);
        }
        let w: Vec<f64> = w.into_iter().map(|x| x / nrm).collect();
        if w.iter().any(|&x| if strict { !(x > 0.0) } else { !(x >= 0.0) }) {
            return Err(Error::NonPositive);
        }
        let dv = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dl = (nrm - lambda).abs();
        lambda = nrm;
        v = w;
        if dl < opts.tol * lambda && dv < opts.tol {
            return Ok((lambda, v, it));
        }
    }
    Err(Error::NoConvergence(opts.max_iter))
}

#[derive(Clone, Debug)]
pub struct Eigen {
    pub lambda: f64,
    /// Right eigenvector, `μ(g) = 1`.
    pub g: Vec<f64>,
    /// Left eigenvector, total mass 1.
    pub mu: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

pub fn leading_eigen(m: &DenseMatrix, start: Option<&[f64]>, opts: PowerOptions) -> Result<Eigen> {
    let (lambda, mut g, it1) = power_iteration(m, start, true, opts)?;
    let mt = m.transpose();
    let (_, mut mu, it2) = power_iteration(&mt, None, false, opts)?;
    let mass: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|x| *x /= mass);
    let c = dot(&mu, &g);
    g.iter_mut().for_each(|x| *x /= c);
    let lg = m.matvec(&g);
    let residual = lg.iter().zip(&g).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max);
    Ok(Eigen { lambda, g, mu, iterations: it1.max(it2), residual })
}

/// Modulus of the second eigenvalue from the growth rate of
/// `B = M − λ g μᵀ` applied to a generic start vector.
pub fn subdominant(m: &DenseMatrix, e: &Eigen, steps: usize) -> f64 {
    let n = m.n;
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut w = m.matvec(v);
        let c = e.lambda * dot(&e.mu, v);
        for (x, gi) in w.iter_mut().zip(&e.g) {
            *x -= c * gi;
        }
        w
    };
    let mut v: Vec<f64> = (0..n).map(|i| ((i as f64 + 0.5) * 1.618_033_988_75).sin()).collect();
    let mut rate = 0.0;
    let burn = steps / 2;
    let mut log_sum = 0.0;
    for k in 0..steps {
        let w = apply(&v);
        let a = sup_norm(&v);
        let b = sup_norm(&w);
        if a == 0.0 || b == 0.0 {
            return 0.0;
        }
        if k >= burn {
            log_sum += (b / a).ln();
            rate = (log_sum / (k + 1 - burn) as f64).exp();
        }
        v = w.into_iter().map(|x| x / b).collect();
    }
    rate
}
