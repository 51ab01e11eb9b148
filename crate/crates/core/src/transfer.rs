//! Transfer operators of the cuspidal acceleration, discretised by
//! piecewise-linear collocation on the letter arcs.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::coding::{families, CuspidalWord, Family, WordType, LENGTH_TOL};
use crate::error::{Error, Result};
use crate::group::GroupPresentation;
use crate::linalg::{leading_eigen, sup_norm, DenseMatrix, Eigen, PowerOptions};
use crate::tail::tail_sum;

/// Angular nodes on every arc, both endpoints included. With clustering `c`
/// the node at `s = j/(m−1)` sits at offset `len·(s − c·sin(2πs)/2π)`, so
/// cells shrink by `1 − c` towards the arc ends.
#[derive(Clone, Debug)]
pub struct ArcGrid {
    pub m: usize,
    pub letters: usize,
    pub cluster: f64,
    /// Node offsets as fractions of the arc length.
    pub frac: Vec<f64>,
    pub len: Vec<f64>,
    pub nodes: Vec<C64>,
}

fn warp(s: f64, c: f64) -> f64 {
    s - c * (TAU * s).sin() / TAU
}

impl ArcGrid {
    pub fn new(g: &GroupPresentation, m: usize) -> Result<Self> {
        Self::clustered(g, m, 0.0)
    }

    pub fn clustered(g: &GroupPresentation, m: usize, cluster: f64) -> Result<Self> {
        if m < 3 {
            return Err(Error::InvalidArgument(format!("need at least 3 nodes per arc, got {m}")));
        }
        if !(0.0..1.0).contains(&cluster) {
            return Err(Error::InvalidArgument(format!("clustering must lie in [0, 1), got {cluster}")));
        }
        let frac: Vec<f64> = (0..m)
            .map(|j| if j == m - 1 { 1.0 } else { warp(j as f64 / (m - 1) as f64, cluster) })
            .collect();
        let mut nodes = Vec::with_capacity(g.letters() * m);
        for arc in &g.arcs {
            for (j, u) in frac.iter().enumerate() {
                nodes.push(if j == 0 { arc.left } else if j == m - 1 { arc.right } else { arc.point(u * arc.len) });
            }
        }
        let len = g.arcs.iter().map(|a| a.len).collect();
        Ok(ArcGrid { m, letters: g.letters(), cluster, frac, len, nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn letter(&self, i: usize) -> usize {
        i / self.m
    }

    pub fn index(&self, a: usize, j: usize) -> usize {
        a * self.m + j
    }

    /// Width of cell `j` of arc `a`.
    pub fn width(&self, a: usize, j: usize) -> f64 {
        self.len[a] * (self.frac[j + 1] - self.frac[j])
    }

    /// Left node and fractional position of `z` inside arc `a`.
    pub fn cell(&self, g: &GroupPresentation, a: usize, z: C64) -> (usize, f64) {
        let u = g.arcs[a].offset(z) / self.len[a];
        let mut s = u;
        if self.cluster > 0.0 {
            for _ in 0..8 {
                let step = (warp(s, self.cluster) - u) / (1.0 - self.cluster * (TAU * s).cos());
                s -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
        }
        let mut j = ((s * (self.m - 1) as f64).floor().max(0.0) as usize).min(self.m - 2);
        // the warp inverse is only accurate to rounding; settle on the right cell
        while j > 0 && u < self.frac[j] {
            j -= 1;
        }
        while j < self.m - 2 && u >= self.frac[j + 1] {
            j += 1;
        }
        let t = ((u - self.frac[j]) / (self.frac[j + 1] - self.frac[j])).clamp(0.0, 1.0);
        (self.index(a, j), t)
    }

    /// Largest difference quotient between neighbouring nodes of one arc.
    pub fn lip(&self, f: &[f64]) -> f64 {
        let mut best: f64 = 0.0;
        for a in 0..self.letters {
            for j in 0..self.m - 1 {
                let i = self.index(a, j);
                best = best.max((f[i + 1] - f[i]).abs() / self.width(a, j));
            }
        }
        best
    }

    /// Whether `f(ξ') ≤ exp(C|ξ' − ξ|) f(ξ)` for neighbouring nodes.
    pub fn in_cone(&self, f: &[f64], c: f64) -> bool {
        (0..self.letters).all(|a| {
            (0..self.m - 1).all(|j| {
                let bound = (c * self.width(a, j)).exp() * (1.0 + 1e-12);
                let i = self.index(a, j);
                f[i] > 0.0 && f[i + 1] > 0.0 && f[i + 1] <= bound * f[i] && f[i] <= bound * f[i + 1]
            })
        })
    }
}

/// Which cuspidal words enter the sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Cutoff {
    /// `|W| ≤ T`.
    Within(f64),
    /// Every word.
    All,
    /// `|W| > T`.
    Beyond(f64),
}

impl Cutoff {
    fn admits(self, len: f64) -> bool {
        match self {
            Cutoff::Within(t) => len <= t + LENGTH_TOL,
            Cutoff::All => true,
            Cutoff::Beyond(t) => len > t + LENGTH_TOL,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Cutoff::Within(_))
    }
}

/// Term weights as functions of `d = |D_ξ F_W|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Weight {
    /// `d^s`.
    Pow(f64),
    /// `ln(d)·d^s`.
    LogPow(f64),
}

impl Weight {
    pub fn eval(self, d: f64) -> f64 {
        match self {
            Weight::Pow(s) => d.powf(s),
            Weight::LogPow(s) => d.ln() * d.powf(s),
        }
    }

    pub fn s(self) -> f64 {
        match self {
            Weight::Pow(s) | Weight::LogPow(s) => s,
        }
    }
}

/// A group with its discretisation and cuspidal families.
pub struct TransferModel<'g> {
    pub group: &'g GroupPresentation,
    pub grid: ArcGrid,
    pub families: Vec<Family>,
    /// Smallest power summed by Euler–Maclaurin instead of term by term.
    pub tail_start: usize,
    /// Node values of a positive profile `w`; when present, `f/w` is
    /// interpolated linearly and multiplied by the quadratic interpolant of `w`.
    pub profile: Option<Vec<f64>>,
}

impl<'g> TransferModel<'g> {
    pub fn new(group: &'g GroupPresentation, m: usize) -> Result<Self> {
        Self::with_grid(group, ArcGrid::new(group, m)?)
    }

    pub fn with_grid(group: &'g GroupPresentation, grid: ArcGrid) -> Result<Self> {
        Ok(TransferModel { group, grid, families: families(group)?, tail_start: 64, profile: None })
    }

    /// Two-pass scheme: the eigenfunction of the plain scheme at `(1, ∞)`
    /// becomes the interpolation profile.
    pub fn refined(group: &'g GroupPresentation, grid: ArcGrid) -> Result<Self> {
        let mut model = Self::with_grid(group, grid)?;
        let e = model.eigen(1.0, Cutoff::All, None, PowerOptions::default())?;
        model.profile = Some(e.g);
        Ok(model)
    }

    /// Quadratic interpolant of the profile at offset fraction `u` of arc `a`.
    fn profile_at(&self, w: &[f64], a: usize, c: usize, u: f64) -> f64 {
        let grid = &self.grid;
        let j = c - grid.index(a, 0);
        let j0 = if j == 0 { 0 } else if j + 2 >= grid.m { grid.m - 3 } else if u - grid.frac[j] < grid.frac[j + 1] - u { j - 1 } else { j };
        let xs = [grid.frac[j0], grid.frac[j0 + 1], grid.frac[j0 + 2]];
        let ys = [w[c - j + j0], w[c - j + j0 + 1], w[c - j + j0 + 2]];
        let mut q = 0.0;
        for p in 0..3 {
            let mut l = ys[p];
            for r in 0..3 {
                if r != p {
                    l *= (u - xs[r]) / (xs[p] - xs[r]);
                }
            }
            q += l;
        }
        q.max(f64::MIN_POSITIVE)
    }

    /// Interpolation weights `(c, w_c, w_{c+1})` for the value at `z ∈ [a]`.
    pub fn coefficients(&self, a: usize, z: C64) -> (usize, f64, f64) {
        let (c, t) = self.grid.cell(self.group, a, z);
        match &self.profile {
            None => (c, 1.0 - t, t),
            Some(w) => {
                let j = c - self.grid.index(a, 0);
                let u = self.grid.frac[j] + t * (self.grid.frac[j + 1] - self.grid.frac[j]);
                let q = self.profile_at(w, a, c, u);
                (c, q * (1.0 - t) / w[c], q * t / w[c + 1])
            }
        }
    }

    pub fn interpolate(&self, f: &[f64], a: usize, z: C64) -> f64 {
        let (c, w0, w1) = self.coefficients(a, z);
        w0 * f[c] + w1 * f[c + 1]
    }

    /// Calls `term(a0, F_W ξ, d)` for every explicit word of row `i` and
    /// `tail(family, y, dv, k0)` for every Euler–Maclaurin tail starting at `k0`,
    /// where `y = F_V ξ` and `dv = |D_ξ F_V|`.
    fn visit_row<A, B>(&self, i: usize, cutoff: Cutoff, mut term: A, mut tail: B)
    where
        A: FnMut(usize, C64, f64),
        B: FnMut(usize, C64, f64, usize),
    {
        let g = self.group;
        let grid = &self.grid;
        let a = grid.letter(i);
        let x = grid.nodes[i];
        if cutoff.admits(0.0) {
            for b in 0..g.letters() {
                if crate::coding::in_domain(g, b, WordType::Singleton, a) {
                    let f = &g.disc[b];
                    term(b, f.apply_boundary(x), f.derivative(x));
                }
            }
        }
        for (fi, fam) in self.families.iter().enumerate() {
            if !crate::coding::in_domain(g, fam.last, fam.ty(), a) {
                continue;
            }
            let y = fam.f_v.apply_boundary(x);
            let dv = fam.f_v.derivative(x);
            let mut k = fam.k_min();
            if let Cutoff::Beyond(_) = cutoff {
                while !cutoff.admits(fam.length(k as f64)) {
                    k += 1;
                }
            }
            loop {
                if let Cutoff::Within(_) = cutoff {
                    if !cutoff.admits(fam.length(k as f64)) {
                        break;
                    }
                }
                let p = fam.power(k as f64);
                let z = p.apply_boundary(y);
                let d = p.derivative(y) * dv;
                if !cutoff.is_finite() && k >= self.tail_start && self.end_fraction(fam, z) <= 1.0 {
                    tail(fi, y, dv, k);
                    break;
                }
                term(fam.a0, z, d);
                k += 1;
            }
        }
    }

    /// Distance of `z` from the fixed vertex of the family, in cells of `[a0]`.
    fn end_fraction(&self, fam: &Family, z: C64) -> f64 {
        let arc = &self.group.arcs[fam.a0];
        let m = self.grid.m;
        match fam.side {
            crate::coding::Side::Left => arc.raw_offset(z) / self.grid.width(fam.a0, 0),
            crate::coding::Side::Right => (arc.len - arc.raw_offset(z)) / self.grid.width(fam.a0, m - 2),
        }
    }

    /// End node at the fixed vertex of the family, and its neighbour.
    fn end_nodes(&self, fam: &Family) -> (usize, usize) {
        let m = self.grid.m;
        match fam.side {
            crate::coding::Side::Left => (self.grid.index(fam.a0, 0), self.grid.index(fam.a0, 1)),
            crate::coding::Side::Right => (self.grid.index(fam.a0, m - 1), self.grid.index(fam.a0, m - 2)),
        }
    }

    /// `(Σ_{k ≥ k0} w_k·q_k, Σ_{k ≥ k0} w_k·q_k·t_k)` with `t_k` the cell
    /// fraction and `q_k` the profile at the image (1 without a profile).
    fn tail_moments(&self, fam: &Family, y: C64, dv: f64, k0: usize, weight: Weight) -> (f64, f64) {
        let (end, _) = self.end_nodes(fam);
        let q = |z: C64| match &self.profile {
            None => 1.0,
            Some(w) => {
                let arc = &self.group.arcs[fam.a0];
                self.profile_at(w, fam.a0, end.min(self.grid.index(fam.a0, self.grid.m - 2)), arc.raw_offset(z) / arc.len)
            }
        };
        let term = |k: f64| {
            let p = fam.power(k);
            weight.eval(p.derivative(y) * dv) * q(p.apply_boundary(y))
        };
        let moment = |k: f64| {
            let p = fam.power(k);
            let z = p.apply_boundary(y);
            weight.eval(p.derivative(y) * dv) * q(z) * self.end_fraction(fam, z)
        };
        let decay = 2.0 * weight.s();
        (tail_sum(term, k0 as f64, decay), tail_sum(moment, k0 as f64, decay + 1.0))
    }

    fn row_into(&self, i: usize, weight: Weight, cutoff: Cutoff, out: &mut [f64]) {
        let mut tails = Vec::new();
        self.visit_row(
            i,
            cutoff,
            |a0, z, d| {
                let w = weight.eval(d);
                let (c, w0, w1) = self.coefficients(a0, z);
                out[c] += w0 * w;
                out[c + 1] += w1 * w;
            },
            |fi, y, dv, k0| tails.push((fi, y, dv, k0)),
        );
        for (fi, y, dv, k0) in tails {
            let fam = &self.families[fi];
            let (s0, s1) = self.tail_moments(fam, y, dv, k0, weight);
            let (end, next) = self.end_nodes(fam);
            let (pe, pn) = match &self.profile {
                None => (1.0, 1.0),
                Some(w) => (w[end], w[next]),
            };
            out[end] += (s0 - s1) / pe;
            out[next] += s1 / pn;
        }
    }

    pub fn check_weight(&self, weight: Weight, cutoff: Cutoff) -> Result<()> {
        if !cutoff.is_finite() && weight.s() <= 0.5 {
            return Err(Error::InvalidArgument(format!(
                "infinite sums need s > 1/2, got {}",
                weight.s()
            )));
        }
        Ok(())
    }

    /// Dense matrix of the operator with the given weights and word set.
    pub fn assemble(&self, weight: Weight, cutoff: Cutoff) -> Result<DenseMatrix> {
        self.check_weight(weight, cutoff)?;
        let n = self.grid.len();
        let mut m = DenseMatrix::zeros(n);
        m.data.par_chunks_mut(n).enumerate().for_each(|(i, row)| self.row_into(i, weight, cutoff, row));
        Ok(m)
    }

    /// `L_{(s,T)}`.
    pub fn transfer(&self, s: f64, cutoff: Cutoff) -> Result<DenseMatrix> {
        self.assemble(Weight::Pow(s), cutoff)
    }

    pub fn eigen(&self, s: f64, cutoff: Cutoff, start: Option<&[f64]>, opts: PowerOptions) -> Result<Eigen> {
        let m = self.transfer(s, cutoff)?;
        leading_eigen(&m, start, opts)
    }

    /// `A f` with log-derivative weights at exponent `s`.
    pub fn apply_a(&self, s: f64, cutoff: Cutoff, f: &[f64]) -> Result<Vec<f64>> {
        Ok(self.assemble(Weight::LogPow(s), cutoff)?.matvec(f))
    }

    /// `Δ_{(s,T)} f`, the sum over words longer than `T`.
    pub fn apply_delta(&self, s: f64, t: f64, f: &[f64]) -> Result<Vec<f64>> {
        Ok(self.assemble(Weight::Pow(s), Cutoff::Beyond(t))?.matvec(f))
    }

    /// `f ↦ |D F_W|^s·f∘F_W` restricted to `domain(W)`.
    pub fn apply_word(&self, w: &CuspidalWord, s: f64, f: &[f64]) -> Vec<f64> {
        let g = self.group;
        let grid = &self.grid;
        (0..grid.len())
            .map(|i| {
                let a = grid.letter(i);
                if !w.in_domain(g, a) {
                    return 0.0;
                }
                let x = grid.nodes[i];
                w.f_w.derivative(x).powf(s) * self.interpolate(f, w.a0, w.f_w.apply_boundary(x))
            })
            .collect()
    }

    /// `ν([W_0 … W_{n−1}])` for the measure `g·μ`.
    pub fn gibbs_cylinder_measure(&self, e: &Eigen, s: f64, block: &[CuspidalWord]) -> Result<f64> {
        for pair in block.windows(2) {
            if !crate::coding::transition(self.group, &pair[0], &pair[1]) {
                return Err(Error::InvalidArgument("block is not admissible".into()));
            }
        }
        let mut v = e.g.clone();
        for w in block {
            v = self.apply_word(w, s, &v);
        }
        let n = block.len() as i32;
        Ok(crate::linalg::dot(&e.mu, &v) / e.lambda.powi(n))
    }

    /// Angular length of the cylinder `F_{W_0 … W_{n−1}}(domain(W_{n−1}))`.
    pub fn cylinder_length(&self, block: &[CuspidalWord]) -> f64 {
        let g = self.group;
        let last = block.last().expect("non-empty block");
        let f = block.iter().fold(crate::moebius::DiscMoebius::IDENTITY, |acc, w| acc * w.f_w);
        last.domain(g)
            .into_iter()
            .map(|x| {
                let arc = &g.arcs[x];
                let p = f.apply_boundary(arc.left);
                let q = f.apply_boundary(arc.right);
                let naive = (p * q.conj()).arg().abs();
                if naive > 1e-3 {
                    return naive;
                }
                // |F p − F q| = |p − q|·√(|F′p|·|F′q|) keeps tiny images accurate
                let chord = (arc.left - arc.right).norm() * (f.derivative(arc.left) * f.derivative(arc.right)).sqrt();
                2.0 * (chord / 2.0).asin()
            })
            .sum()
    }

    /// `max |D_ξ F_W|` over `W ∈ 𝒲_T` and nodes of `domain(W)`.
    pub fn contraction(&self, t: f64) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.grid.len() {
            self.visit_row(i, Cutoff::Within(t), |_, _, d| best = best.max(d), |_, _, _, _| {});
        }
        best
    }

    /// Range of `|W|²·|D_ξ F_W|` over typed words with `|W| ≤ T`.
    pub fn quadratic_decay_range(&self, t: f64) -> (f64, f64) {
        let g = self.group;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for fam in &self.families {
            let Some(kmax) = fam.k_max(t) else { continue };
            for k in fam.k_min()..=kmax {
                let w = fam.word(k);
                if w.length <= 0.0 {
                    continue;
                }
                for i in 0..self.grid.len() {
                    if w.in_domain(g, self.grid.letter(i)) {
                        let r = w.length * w.length * w.f_w.derivative(self.grid.nodes[i]);
                        lo = lo.min(r);
                        hi = hi.max(r);
                    }
                }
            }
        }
        (lo, hi)
    }

    /// Lipschitz constant of `ln|D F_W|` on domain arcs, maximised over `𝒲_T`.
    pub fn log_distortion(&self, t: f64) -> f64 {
        let g = self.group;
        let grid = &self.grid;
        let mut words = crate::coding::enumerate_alphabet(g, t).unwrap_or_default();
        words.retain(|w| w.length <= t + LENGTH_TOL);
        let mut kappa: f64 = 0.0;
        for w in &words {
            for a in w.domain(g) {
                for j in 0..grid.m - 1 {
                    let i = grid.index(a, j);
                    let d0 = w.f_w.derivative(grid.nodes[i]).ln();
                    let d1 = w.f_w.derivative(grid.nodes[i + 1]).ln();
                    kappa = kappa.max((d1 - d0).abs() / grid.width(a, j));
                }
            }
        }
        kappa
    }
}

/// `max_i |(L g)_i/(λ g_i) − 1|`, i.e. how far the normalised weights are from
/// summing to one.
pub fn normalized_operator_check(m: &DenseMatrix, lambda: f64, g: &[f64]) -> f64 {
    m.matvec(g).iter().zip(g).map(|(lg, gi)| (lg / (lambda * gi) - 1.0).abs()).fold(0.0, f64::max)
}

/// `f ↦ λ⁻¹ g⁻¹ L(g f)`.
pub fn normalized_apply(m: &DenseMatrix, e: &Eigen, f: &[f64]) -> Vec<f64> {
    let gf: Vec<f64> = f.iter().zip(&e.g).map(|(a, b)| a * b).collect();
    m.matvec(&gf).iter().zip(&e.g).map(|(v, gi)| v / (e.lambda * gi)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct LasotaYorke {
    /// `Lip(L̂^k f)` for `k = 0, 1, …`.
    pub lips: Vec<f64>,
    /// Geometric decay rate over the steps above the floor.
    pub rate: f64,
    /// `max_k (Lip(L̂^k f) − θ^k Lip(f))/‖f‖_∞`.
    pub c_estimate: f64,
}

/// Iterates the normalised operator on `f` and measures the decay of the
/// Lipschitz seminorm.
pub fn lasota_yorke_check(grid: &ArcGrid, m: &DenseMatrix, e: &Eigen, f: &[f64], steps: usize, theta: f64) -> LasotaYorke {
    let norm = sup_norm(f);
    let mut lips = vec![grid.lip(f)];
    let mut v = f.to_vec();
    for _ in 0..steps {
        v = normalized_apply(m, e, &v);
        lips.push(grid.lip(&v));
    }
    let c_estimate = lips
        .iter()
        .enumerate()
        .map(|(k, l)| (l - theta.powi(k as i32) * lips[0]) / norm)
        .fold(f64::NEG_INFINITY, f64::max);
    // only the first step is free of the C‖f‖ floor for a high-frequency start
    let rate = lips[1] / lips[0];
    LasotaYorke { lips, rate, c_estimate }
}

/// Sawtooth of the given period (in cells) on arc `a`, constant 1 elsewhere.
pub fn sawtooth(grid: &ArcGrid, a: usize, period: usize) -> Vec<f64> {
    let mut f = vec![1.0; grid.len()];
    let half = (period / 2).max(1);
    for j in 0..grid.m {
        let phase = j % (2 * half);
        let tooth = if phase <= half { phase } else { 2 * half - phase } as f64 / half as f64;
        f[grid.index(a, j)] = 1.0 + tooth;
    }
    f
}

/// Cone constant `κ/(1 − θ)` built from the measured distortion and contraction.
pub fn cone_constant(kappa: f64, theta: f64) -> Result<f64> {
    if !(theta < 1.0) {
        return Err(Error::Sign(format!("contraction constant {theta} is not below 1")));
    }
    Ok(kappa / (1.0 - theta))
}
