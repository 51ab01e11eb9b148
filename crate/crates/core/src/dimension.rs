//! Bowen's equation `λ(s, T) = 1`, a cylinder-pressure cross-check, and the
//! first-order coefficient `Θ = β/(−δ)` of `dim E_T = 1 − Θ/T + o(1/T)`.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::coding::{enumerate_alphabet, TransitionMatrix};
use crate::error::{Error, Result};
use crate::group::{Arc, GroupPresentation};
use crate::linalg::{dot, leading_eigen, DenseMatrix, Eigen, PowerOptions};
use crate::moebius::DiscMoebius;
use crate::transfer::{ArcGrid, Cutoff, TransferModel, Weight};

/// Anything with a one-parameter family of positive operators `s ↦ L_s`.
pub trait SpectralProblem: Sync {
    fn operator(&self, s: f64) -> Result<DenseMatrix>;

    fn eigen(&self, s: f64, start: Option<&[f64]>, opts: PowerOptions) -> Result<Eigen> {
        leading_eigen(&self.operator(s)?, start, opts)
    }
}

/// `L_{(s,T)}` of a group for a fixed word set.
pub struct FuchsianProblem<'m, 'g> {
    pub model: &'m TransferModel<'g>,
    pub cutoff: Cutoff,
}

impl SpectralProblem for FuchsianProblem<'_, '_> {
    fn operator(&self, s: f64) -> Result<DenseMatrix> {
        self.model.transfer(s, self.cutoff)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BowenOptions {
    /// Target for `|λ(s) − 1|`.
    pub tol: f64,
    pub power: PowerOptions,
    pub max_steps: usize,
}

impl Default for BowenOptions {
    fn default() -> Self {
        BowenOptions { tol: 1e-11, power: PowerOptions::default(), max_steps: 200 }
    }
}

#[derive(Clone, Debug)]
pub struct BowenRoot {
    pub s: f64,
    pub lambda: f64,
    pub steps: usize,
    pub eigen: Eigen,
}

/// Bisection for `λ(s) = 1` on a bracket with `λ(lo) > 1 > λ(hi)`.
pub fn solve_bowen<P: SpectralProblem + ?Sized>(p: &P, lo: f64, hi: f64, opts: &BowenOptions) -> Result<BowenRoot> {
    let e_lo = p.eigen(lo, None, opts.power)?;
    let e_hi = p.eigen(hi, Some(&e_lo.g), opts.power)?;
    if !(e_lo.lambda > 1.0 && e_hi.lambda < 1.0) {
        return Err(Error::Bracket { lo, hi, flo: e_lo.lambda - 1.0, fhi: e_hi.lambda - 1.0 });
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut start = e_hi.g.clone();
    let mut best = e_hi;
    let mut best_s = hi;
    for step in 1..=opts.max_steps {
        let mid = 0.5 * (lo + hi);
        let e = p.eigen(mid, Some(&start), opts.power)?;
        start.clone_from(&e.g);
        let f = e.lambda - 1.0;
        if f.abs() <= (best.lambda - 1.0).abs() {
            best_s = mid;
            best = e;
        }
        if f.abs() < opts.tol || hi - lo < 1e-15 {
            return Ok(BowenRoot { s: best_s, lambda: best.lambda, steps: step, eigen: best });
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence(opts.max_steps))
}

/// Root of `Σ_w d_w^s = 1` given `ln d_w < 0` for every term.
pub fn pressure_root(log_d: &[f64]) -> Result<f64> {
    if log_d.is_empty() || log_d.iter().any(|&l| !(l < 0.0)) {
        return Err(Error::InvalidArgument("pressure root needs contracting terms".into()));
    }
    let log_z = |s: f64| {
        let m = log_d.iter().map(|l| s * l).fold(f64::NEG_INFINITY, f64::max);
        m + log_d.iter().map(|l| (s * l - m).exp()).sum::<f64>().ln()
    };
    if log_z(0.0) <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while log_z(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_z(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Nearest and farthest distance from `w` to points of the closed arc.
fn arc_distance_range(arc: &Arc, w: C64) -> (f64, f64) {
    let mut near = (arc.left - w).norm().min((arc.right - w).norm());
    let mut far = (arc.left - w).norm().max((arc.right - w).norm());
    let r = w.norm();
    if r > 0.0 {
        let foot = w / r;
        for (p, is_near) in [(foot, true), (-foot, false)] {
            let u = arc.raw_offset(p);
            if (0.0..=arc.len).contains(&u) {
                let d = (p - w).norm();
                if is_near {
                    near = near.min(d);
                } else {
                    far = far.max(d);
                }
            }
        }
    }
    (near, far)
}

/// `(inf, sup)` of `|D F|` over the union of the given arcs.
pub fn derivative_range(g: &GroupPresentation, f: &DiscMoebius, letters: &[usize]) -> (f64, f64) {
    let b2 = f.beta.norm_sqr();
    let Some(pole) = f.pole() else { return (1.0, 1.0) };
    let (mut near, mut far) = (f64::INFINITY, 0.0f64);
    for &x in letters {
        let (n, fa) = arc_distance_range(&g.arcs[x], pole);
        near = near.min(n);
        far = far.max(fa);
    }
    (1.0 / (b2 * far * far), 1.0 / (b2 * near * near))
}

/// Guard on the number of blocks in the cylinder-pressure oracle.
pub const MAX_BLOCKS: u128 = 10_000_000;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PressureBracket {
    pub depth: usize,
    pub blocks: u128,
    /// Root with the infimum of the derivative on each cylinder.
    pub s_inf: f64,
    /// Root with the supremum.
    pub s_sup: f64,
}

/// Finite-depth bracket for `s_T` from admissible blocks of `n` words.
/// On each arc `x`, `L^n 1` lies between the sums of the infimum and the
/// supremum of `|D F_w|^s` over blocks `w` whose last domain contains `x`, so
/// `λ(s)^n` is squeezed between the smallest lower sum and the largest upper
/// sum; their roots bracket the root of `λ(s) = 1`.
pub fn cylinder_pressure_dim(g: &GroupPresentation, t: f64, depth: usize) -> Result<PressureBracket> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be positive".into()));
    }
    let words = enumerate_alphabet(g, t)?;
    let tm = TransitionMatrix::new(g, words);
    let n = tm.len();
    // count blocks first
    let mut count = vec![1u128; n];
    for _ in 1..depth {
        count = (0..n)
            .map(|i| (0..n).filter(|&j| tm.get(i, j)).map(|j| count[j]).fold(0u128, |a, b| a.saturating_add(b)))
            .collect();
    }
    let blocks = count.iter().fold(0u128, |a, b| a.saturating_add(*b));
    if blocks > MAX_BLOCKS {
        return Err(Error::TooManyBlocks(blocks));
    }
    let letters = g.letters();
    let domains: Vec<Vec<usize>> = tm.words.iter().map(|w| w.domain(g)).collect();
    let per_start: Vec<Vec<(Vec<f64>, Vec<f64>)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = vec![(Vec::new(), Vec::new()); letters];
            let mut stack = vec![(i, 1usize, tm.words[i].f_w)];
            while let Some((last, len, f)) = stack.pop() {
                if len == depth {
                    for &x in &domains[last] {
                        let (inf, sup) = derivative_range(g, &f, &[x]);
                        out[x].0.push(inf.ln());
                        out[x].1.push(sup.ln());
                    }
                    continue;
                }
                for j in 0..n {
                    if tm.get(last, j) {
                        stack.push((j, len + 1, f * tm.words[j].f_w));
                    }
                }
            }
            out
        })
        .collect();
    let (mut s_inf, mut s_sup) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in 0..letters {
        let lo: Vec<f64> = per_start.iter().flat_map(|r| r[x].0.iter().copied()).collect();
        let hi: Vec<f64> = per_start.iter().flat_map(|r| r[x].1.iter().copied()).collect();
        s_inf = s_inf.min(pressure_root(&lo)?);
        s_sup = s_sup.max(pressure_root(&hi)?);
    }
    Ok(PressureBracket { depth, blocks, s_inf, s_sup })
}

/// `δ = μ(A g)` at `(1, ∞)`: the slope of `s ↦ λ(s, ∞)` at `s = 1`.
pub fn compute_delta(model: &TransferModel, e: &Eigen) -> Result<f64> {
    let a = model.assemble(Weight::LogPow(1.0), Cutoff::All)?;
    let delta = dot(&e.mu, &a.matvec(&e.g)) / dot(&e.mu, &e.g);
    if !(delta < 0.0) {
        return Err(Error::Sign(format!("δ = {delta} is not negative")));
    }
    Ok(delta)
}

/// `β` from the asymptotics of the parabolic tails:
/// `Σ_x μ_x Σ_(P,V) |P|·|D_x F_V|·g(ξ_P)/(|μ(P)|²·|F_V x − ξ_P|²)`.
pub fn beta_closed_form(model: &TransferModel, e: &Eigen) -> Result<f64> {
    let g = model.group;
    let grid = &model.grid;
    let mut beta = 0.0;
    for i in 0..grid.len() {
        if e.mu[i] == 0.0 {
            continue;
        }
        let a = grid.letter(i);
        let x = grid.nodes[i];
        for fam in &model.families {
            if !crate::coding::in_domain(g, fam.last, fam.ty(), a) {
                continue;
            }
            let end = match fam.side {
                crate::coding::Side::Left => grid.index(fam.a0, 0),
                crate::coding::Side::Right => grid.index(fam.a0, grid.m - 1),
            };
            let y = fam.f_v.apply_boundary(x);
            let mp = fam.mu_p();
            beta += e.mu[i] * fam.shift.abs() * fam.f_v.derivative(x) * e.g[end]
                / (mp * mp * (y - fam.xi).norm_sqr());
        }
    }
    beta /= dot(&e.mu, &e.g);
    if !(beta > 0.0) {
        return Err(Error::Sign(format!("β = {beta} is not positive")));
    }
    Ok(beta)
}

#[derive(Clone, Debug, Serialize)]
pub struct BetaLimit {
    /// `(T, T·μ(Δ_{(1,T)} g))`.
    pub values: Vec<(f64, f64)>,
    /// Polynomial extrapolation in `1/T` to `1/T = 0`.
    pub extrapolated: f64,
}

/// Value at 0 of the polynomial through `(x_i, y_i)`.
pub fn neville_at_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let mut p = ys.to_vec();
    let n = xs.len();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (xs[i + k] * p[i] - xs[i] * p[i + 1]) / (xs[i + k] - xs[i]);
        }
    }
    p[0]
}

/// `β` as the limit of `T·∫Δ_{(1,T)} g dμ`.
pub fn beta_limit(model: &TransferModel, e: &Eigen, ts: &[f64]) -> Result<BetaLimit> {
    if ts.is_empty() {
        return Err(Error::InvalidArgument("no cut-offs for the β limit".into()));
    }
    let values = ts
        .iter()
        .map(|&t| Ok((t, t * dot(&e.mu, &model.apply_delta(1.0, t, &e.g)?) / dot(&e.mu, &e.g))))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = values.iter().map(|v| 1.0 / v.0).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.1).collect();
    Ok(BetaLimit { extrapolated: neville_at_zero(&xs, &ys), values })
}

pub fn theta_spectral(delta: f64, beta: f64) -> Result<f64> {
    if !(delta < 0.0) {
        return Err(Error::Sign(format!("δ = {delta} must be negative")));
    }
    if !(beta > 0.0) {
        return Err(Error::Sign(format!("β = {beta} must be positive")));
    }
    Ok(beta / -delta)
}

/// Least-squares line `y = c + m·x`, returned as `(c, m)`.
pub fn line_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 || xs.len() != ys.len() {
        return Err(Error::Fit("need at least two points".into()));
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::Fit("abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}

#[derive(Clone, Debug, Serialize)]
pub struct Regression {
    pub intercept: f64,
    pub slope: f64,
    pub residuals: Vec<f64>,
}

/// Fits `T·(1 − s_T) = Θ + c/T`; the intercept estimates `Θ`.
pub fn theta_regression(ts: &[f64], s: &[f64]) -> Result<Regression> {
    if ts.len() < 4 || ts.len() != s.len() {
        return Err(Error::Fit(format!("need at least 4 cut-offs, got {}", ts.len())));
    }
    let lo = ts.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ts.iter().cloned().fold(0.0, f64::max);
    if hi < 8.0 * lo {
        return Err(Error::Fit(format!("cut-offs must span a factor of 8, got {lo}..{hi}")));
    }
    let xs: Vec<f64> = ts.iter().map(|t| 1.0 / t).collect();
    let ys: Vec<f64> = ts.iter().zip(s).map(|(t, s)| t * (1.0 - s)).collect();
    let (intercept, slope) = line_fit(&xs, &ys)?;
    let residuals = xs.iter().zip(&ys).map(|(x, y)| y - intercept - slope * x).collect();
    if !(intercept > 0.0) {
        return Err(Error::Fit(format!("intercept {intercept} is not positive")));
    }
    Ok(Regression { intercept, slope, residuals })
}

#[derive(Clone, Debug, Serialize)]
pub struct DimensionRow {
    #[serde(rename = "T")]
    pub t: f64,
    pub s: f64,
    pub residual: f64,
    pub grid: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    /// `max |D F_W|` over `𝒲_T` on domain nodes.
    pub contraction: f64,
    pub distortion: f64,
    pub cone_constant: f64,
    pub aperiodicity_t0: Option<f64>,
    pub lambda_one_infinity: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DimensionReport {
    pub group: String,
    pub rows: Vec<DimensionRow>,
    pub theta_spectral: f64,
    pub theta_regression: f64,
    pub regression: Regression,
    pub delta: f64,
    pub beta: f64,
    pub beta_limit: BetaLimit,
    pub diagnostics: Diagnostics,
}

/// Which discretisation the pipeline uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Linear,
    /// Linear in `f/w` with `w` the first-pass eigenfunction at `(1, ∞)`.
    Refined,
}

pub fn build_model(g: &GroupPresentation, m: usize, scheme: Scheme) -> Result<TransferModel<'_>> {
    let grid = ArcGrid::new(g, m)?;
    match scheme {
        Scheme::Linear => TransferModel::with_grid(g, grid),
        Scheme::Refined => TransferModel::refined(g, grid),
    }
}

/// `s_T` for each cut-off, solved independently.
pub fn dimension_rows(model: &TransferModel, ts: &[f64], opts: &BowenOptions) -> Result<Vec<DimensionRow>> {
    ts.par_iter()
        .map(|&t| {
            let p = FuchsianProblem { model, cutoff: Cutoff::Within(t) };
            let root = solve_bowen(&p, 0.01, 1.0, opts)?;
            Ok(DimensionRow { t, s: root.s, residual: (root.lambda - 1.0).abs(), grid: model.grid.m })
        })
        .collect()
}

pub const BETA_CUTOFFS: [f64; 4] = [100.0, 200.0, 400.0, 800.0];

/// Full pipeline: `s_T`, `δ`, `β` and both estimates of `Θ`.
pub fn theta_report(model: &TransferModel, ts: &[f64], opts: &BowenOptions) -> Result<DimensionReport> {
    let g = model.group;
    let e = model.eigen(1.0, Cutoff::All, None, opts.power)?;
    let delta = compute_delta(model, &e)?;
    let beta = beta_closed_form(model, &e)?;
    let limit = beta_limit(model, &e, &BETA_CUTOFFS)?;
    let theta = theta_spectral(delta, beta)?;
    let rows = dimension_rows(model, ts, opts)?;
    let tv: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let sv: Vec<f64> = rows.iter().map(|r| r.s).collect();
    let regression = theta_regression(&tv, &sv)?;
    let t_max = tv.iter().cloned().fold(0.0, f64::max);
    let contraction = model.contraction(t_max);
    let distortion = model.log_distortion(t_max);
    let diagnostics = Diagnostics {
        contraction,
        distortion,
        cone_constant: crate::transfer::cone_constant(distortion, contraction)?,
        aperiodicity_t0: crate::coding::aperiodicity_threshold(g, t_max)?,
        lambda_one_infinity: e.lambda,
    };
    Ok(DimensionReport {
        group: g.name.clone(),
        theta_regression: regression.intercept,
        regression,
        rows,
        theta_spectral: theta,
        delta,
        beta,
        beta_limit: limit,
        diagnostics,
    })
}
