//! Approximation by parabolic points: enumeration by denominator, best
//! approximants, bad-set tests and the convergent estimates along cuspidal
//! expansions.

use num_complex::Complex64 as C64;
use rand::{Rng, RngExt};
use rayon::prelude::*;
use serde::Serialize;

use crate::coding::{cuspidal_decompose, expand, CuspidalWord, WordType};
use crate::error::{Error, Result};
use crate::group::GroupPresentation;
use crate::moebius::{disc_to_real, RealMoebius};

/// Parabolic point `K·∞` with `K = G·B·A_k`, denominator `|c(K)|`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ParabolicPoint {
    pub x: f64,
    pub denominator: f64,
    pub cusp: usize,
    #[serde(skip)]
    pub witness: RealMoebius,
}

#[derive(Clone, Debug)]
pub struct Enumeration {
    /// Sorted by position, one entry per point.
    pub points: Vec<ParabolicPoint>,
    /// False when the depth cap stopped the search.
    pub complete: bool,
    pub tiles: usize,
    /// Largest relative spread of denominators seen for one point.
    pub duplicate_gap: f64,
    pub window: (f64, f64),
    pub q: f64,
}

/// Horoball level `Y` of the tiling: the standard horoballs `K({Im z > Y})`
/// sit inside the tiles around their base point and are pairwise disjoint.
/// Consequently every positive denominator is at least `1/Y`.
pub fn horoball_level(g: &GroupPresentation) -> f64 {
    let n = g.letters();
    let mut y: f64 = 0.0;
    for v in 0..n {
        let target = g.vertices[v].point;
        let cycle = g.cycle(v, true);
        let mut tile = RealMoebius::IDENTITY;
        for j in 0..=cycle.len() {
            let d = crate::moebius::to_disc(&tile);
            let has_vertex = (0..n).any(|a| (d.apply_boundary(g.arcs[a].left) - target).norm() < 1e-8);
            if has_vertex {
                for a in 0..n {
                    let w1 = d.apply_boundary(g.arcs[a].left);
                    let w2 = d.apply_boundary(g.arcs[a].right);
                    if (w1 - target).norm() < 1e-8 || (w2 - target).norm() < 1e-8 {
                        continue;
                    }
                    if let (Some(p), Some(q)) = (g.chart_coordinate(v, w1), g.chart_coordinate(v, w2)) {
                        y = y.max(0.5 * (p - q).abs());
                    }
                }
            }
            if j < cycle.len() {
                tile = (tile * g.gens[cycle[j]]).normalized();
            }
        }
    }
    for v in 0..n {
        for w in 0..n {
            if (g.vertices[v].point - g.vertices[w].point).norm() < 1e-8 {
                continue;
            }
            let m = (g.vertices[v].chart.normalized().inverse() * g.vertices[w].chart.normalized()).normalized();
            if m.c.abs() > 1e-12 {
                y = y.max(1.0 / m.c.abs());
            }
        }
    }
    y
}

/// Boundary interval shadowed by `G·F_b·Ω` and all its descendants, as
/// `(x_right, x_left)` with `None` for ∞, plus the denominators of the two
/// endpoints (both cusps).
struct Shadow {
    right: Option<f64>,
    left: Option<f64>,
    d_right: f64,
    d_left: f64,
}

fn shadow(g: &GroupPresentation, m: &RealMoebius, b: usize) -> Shadow {
    let kl = *m * g.vertices[b].chart;
    let kr = *m * g.vertices[g.right_vertex(b)].chart;
    Shadow {
        right: m.apply_real(disc_to_real(g.arcs[b].right)),
        left: m.apply_real(disc_to_real(g.arcs[b].left)),
        d_right: kr.c.abs(),
        d_left: kl.c.abs(),
    }
}

/// Can the subtree be skipped? It can when its shadow misses the window, or
/// when no horoball of diameter `≥ min_diameter` fits: such a horoball lies
/// under the shadow's semicircle and avoids the horoballs at both endpoints.
fn prunable(s: &Shadow, window: (f64, f64), y: f64, min_diameter: f64) -> bool {
    let (lo, hi) = window;
    match (s.right, s.left) {
        (Some(r), Some(l)) if r < l => {
            let len = l - r;
            let mut fit = 0.5 * len;
            for d in [s.d_left, s.d_right] {
                if d > 0.0 {
                    fit = fit.min(len * len * y * d * d);
                }
            }
            fit < min_diameter || l < lo || r > hi
        }
        (Some(r), Some(l)) => l < lo && hi < r,
        (Some(r), None) => hi < r,
        (None, Some(l)) => l < lo,
        (None, None) => false,
    }
}

/// Work limit for one enumeration.
pub const MAX_TILES: usize = 20_000_000;

/// All parabolic points in `window` with denominator `≤ q`, by a breadth-first
/// walk over the tiles `G·Ω`. A subtree is dropped once its shadow misses the
/// window or cannot hold a horoball of diameter `1/(4·Y·q²)`, a quarter of
/// the smallest one in range.
pub fn enumerate_parabolic_points(
    g: &GroupPresentation,
    q: f64,
    window: (f64, f64),
    depth_cap: usize,
) -> Result<Enumeration> {
    if !(q > 0.0) || !(window.0 <= window.1) {
        return Err(Error::InvalidArgument(format!("bad enumeration bounds q={q}, window={window:?}")));
    }
    let y = horoball_level(g);
    let min_diameter = 1.0 / (4.0 * y * q * q);
    let n = g.letters();
    let mut raw = Vec::new();
    let mut frontier: Vec<(Option<usize>, RealMoebius)> = vec![(None, RealMoebius::IDENTITY)];
    let mut tiles = 0;
    let mut complete = true;
    for depth in 0..=depth_cap {
        if frontier.is_empty() {
            break;
        }
        tiles += frontier.len();
        if tiles > MAX_TILES {
            return Err(Error::TooManyBlocks(tiles as u128));
        }
        let results: Vec<(Vec<ParabolicPoint>, Vec<(Option<usize>, RealMoebius)>)> = frontier
            .par_iter()
            .map(|&(last, m)| {
                let mut pts = Vec::new();
                for v in &g.vertices {
                    let k = m * v.chart;
                    let scale = k.a.abs() + k.c.abs();
                    if k.c.abs() <= 1e-13 * scale || k.c.abs() > q * (1.0 + 1e-12) {
                        continue;
                    }
                    let x = k.a / k.c;
                    if x >= window.0 - 1e-12 && x <= window.1 + 1e-12 {
                        pts.push(ParabolicPoint { x, denominator: k.c.abs(), cusp: v.cusp, witness: k });
                    }
                }
                let mut kids = Vec::new();
                for b in 0..n {
                    if last.is_some_and(|l| g.hat[l] == b) {
                        continue;
                    }
                    if !prunable(&shadow(g, &m, b), window, y, min_diameter) {
                        kids.push((Some(b), m * g.gens[b]));
                    }
                }
                (pts, kids)
            })
            .collect();
        let mut next = Vec::new();
        for (p, k) in results {
            raw.extend(p);
            next.extend(k);
        }
        if depth == depth_cap && !next.is_empty() {
            complete = false;
        }
        frontier = next;
    }
    let (points, duplicate_gap) = dedup(raw);
    Ok(Enumeration { points, complete, tiles, duplicate_gap, window, q })
}

fn dedup(mut raw: Vec<ParabolicPoint>) -> (Vec<ParabolicPoint>, f64) {
    raw.sort_by(|a, b| a.x.total_cmp(&b.x));
    let mut out: Vec<ParabolicPoint> = Vec::new();
    let mut gap: f64 = 0.0;
    for p in raw {
        match out.last_mut() {
            Some(l) if (p.x - l.x).abs() <= 1e-10 * l.x.abs().max(1.0) => {
                gap = gap.max((p.denominator - l.denominator).abs() / l.denominator.max(p.denominator));
                if p.denominator < l.denominator {
                    *l = p;
                }
            }
            _ => out.push(p),
        }
    }
    (out, gap)
}

fn complete_enumeration(g: &GroupPresentation, q: f64, window: (f64, f64), cap: usize) -> Result<Enumeration> {
    let e = enumerate_parabolic_points(g, q, window, cap)?;
    if !e.complete {
        return Err(Error::InvalidArgument(format!("enumeration incomplete at depth cap {cap}")));
    }
    Ok(e)
}

/// Best approximant of `α` among points with `0 < D ≤ Q`, measured by
/// `M = D·Q·|α − p|`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PattersonRecord {
    pub alpha: f64,
    pub q: f64,
    pub point: f64,
    pub denominator: f64,
    pub distance: f64,
    pub m: f64,
}

pub fn patterson_check(g: &GroupPresentation, alpha: f64, q: f64, depth_cap: usize) -> Result<PattersonRecord> {
    let d_min = 1.0 / horoball_level(g);
    let mut w = 1.0;
    loop {
        let e = complete_enumeration(g, q, (alpha - w, alpha + w), depth_cap)?;
        let best = e
            .points
            .iter()
            .map(|p| (p, p.denominator * q * (alpha - p.x).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        // anything outside the window scores at least d_min·q·w
        if let Some((p, m)) = best {
            if m <= d_min * q * w {
                return Ok(PattersonRecord {
                    alpha,
                    q,
                    point: p.x,
                    denominator: p.denominator,
                    distance: (alpha - p.x).abs(),
                    m,
                });
            }
        }
        w *= 2.0;
        if w > 1e6 {
            return Err(Error::InvalidArgument(format!("no approximant of {alpha} with denominator ≤ {q}")));
        }
    }
}

/// `true` iff no point with `0 < D ≤ Q` has `|α − p| < ε/D²`.
pub fn bad_test(g: &GroupPresentation, alpha: f64, eps: f64, q: f64, depth_cap: usize) -> Result<bool> {
    let y = horoball_level(g);
    let w = eps * y * y;
    let e = complete_enumeration(g, q, (alpha - w, alpha + w), depth_cap)?;
    Ok(e.points.iter().all(|p| (alpha - p.x).abs() >= eps / (p.denominator * p.denominator)))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Separation {
    /// Smallest `|x − x′|·D·D′` over distinct points.
    pub worst: f64,
    pub pair: Option<(f64, f64)>,
}

pub fn horoball_separation_check(points: &[ParabolicPoint]) -> Separation {
    let best = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut w = (f64::INFINITY, None);
            for q in &points[i + 1..] {
                let r = (p.x - q.x).abs() * p.denominator * q.denominator;
                if r < w.0 {
                    w = (r, Some((p.x, q.x)));
                }
            }
            w
        })
        .reduce(|| (f64::INFINITY, None), |a, b| if b.0 < a.0 { b } else { a });
    Separation { worst: best.0, pair: best.1 }
}

/// A point given by a finite run of cuspidal words, with every shifted point
/// `α_r = F_{W_r}·F_{W_{r+1}}⋯(ξ)` known to full precision.
#[derive(Clone, Debug)]
pub struct ExpansionSample {
    pub words: Vec<CuspidalWord>,
    /// `tails[r] = α_r` on the boundary circle.
    pub tails: Vec<C64>,
}

impl ExpansionSample {
    /// Builds the tails backwards from a point in the domain of the last word.
    pub fn from_words(g: &GroupPresentation, words: Vec<CuspidalWord>) -> Result<Self> {
        let last = words.last().ok_or_else(|| Error::InvalidArgument("empty expansion".into()))?;
        let start = *last.domain(g).first().ok_or(Error::Endpoint)?;
        let mut x = g.arcs[start].midpoint();
        let mut tails = vec![x; words.len() + 1];
        for r in (0..words.len()).rev() {
            x = words[r].f_w.apply_boundary(x);
            tails[r] = x;
        }
        Ok(ExpansionSample { words, tails })
    }

    pub fn alpha(&self) -> Result<f64> {
        disc_to_real(self.tails[0]).ok_or(Error::Endpoint)
    }
}

/// First cuspidal word of the expansion of `ξ`.
pub fn first_word(g: &GroupPresentation, xi: C64, max_letters: usize) -> Result<CuspidalWord> {
    let mut n = 64;
    loop {
        let d = cuspidal_decompose(g, &expand(g, xi, n))?;
        if d.pieces.len() > 1 {
            return Ok(d.pieces[0].word);
        }
        if n >= max_letters {
            return Err(Error::Endpoint);
        }
        n *= 4;
    }
}

/// Random expansion: each word is the first word of a uniform boundary point
/// in the domain of its predecessor.
pub fn sample_expansion<R: Rng>(g: &GroupPresentation, rng: &mut R, depth: usize) -> Result<ExpansionSample> {
    const EXTRA: usize = 8;
    let mut words: Vec<CuspidalWord> = Vec::with_capacity(depth + EXTRA);
    while words.len() < depth + EXTRA {
        let allowed = match words.last() {
            Some(w) => w.domain(g),
            None => (0..g.letters()).collect(),
        };
        let total: f64 = allowed.iter().map(|&a| g.arcs[a].len).sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = allowed[allowed.len() - 1];
        for &a in &allowed {
            if u < g.arcs[a].len {
                pick = a;
                break;
            }
            u -= g.arcs[a].len;
        }
        let arc = &g.arcs[pick];
        let xi = arc.point(u.clamp(0.0, arc.len));
        if let Ok(w) = first_word(g, xi, 1 << 16) {
            if w.a0 == pick {
                words.push(w);
            }
        }
    }
    ExpansionSample::from_words(g, words)
}

/// Periodic expansion: `words` repeated until `depth` words are covered,
/// plus enough repeats for the tail to settle on the periodic point.
pub fn periodic_expansion(g: &GroupPresentation, period: &[CuspidalWord], depth: usize) -> Result<ExpansionSample> {
    if period.is_empty() {
        return Err(Error::InvalidArgument("empty period".into()));
    }
    let reps = (depth + 60) / period.len() + 1;
    let words = period.iter().copied().cycle().take(reps * period.len()).collect();
    ExpansionSample::from_words(g, words)
}

/// One line of the two-sided convergent estimate at step `r`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ApproxVerdict {
    pub r: usize,
    pub length: f64,
    /// `G_{W_0..W_{r−1}}·ζ_{W_r}`.
    pub point: f64,
    pub denominator: f64,
    /// `D²·|α − point|`.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub ok: bool,
}

const APPROX_SLACK: f64 = 1e-9;

/// Checks `1/(|W_r| + 2μ) ≤ D²·|α − ζ_r| ≤ 1/|W_r|` for `r < depth`.
///
/// The product is evaluated as `1/|K⁻¹α − K⁻¹∞|` with `K = G·B·A_k`, where
/// `K⁻¹α` is the shifted point in the vertex chart; no cancellation occurs.
/// `scale` multiplies every denominator and only exists to test the test.
/// Steps whose point is ∞ are left out.
pub fn expansion_approximation_check(
    g: &GroupPresentation,
    sample: &ExpansionSample,
    depth: usize,
    scale: f64,
) -> Result<Vec<ApproxVerdict>> {
    if depth > 30 || depth > sample.words.len() {
        return Err(Error::InvalidArgument(format!("depth {depth} out of range")));
    }
    sample.alpha()?;
    let mu = g.mu_max();
    let mut prefix = RealMoebius::IDENTITY;
    let mut out = Vec::new();
    for r in 0..depth {
        let w = &sample.words[r];
        if w.ty != WordType::Singleton && w.length > 0.0 {
            let h = g.vertices[w.vertex].chart;
            let k = prefix * h;
            let hi = h.inverse();
            let y1 = hi.apply_real(disc_to_real(sample.tails[r])).ok_or(Error::Endpoint)?;
            if let (Some(y2), true) = (hi.apply_real(prefix.inverse().apply_real(None)), k.c != 0.0) {
                let value = scale * scale / (y1 - y2).abs();
                let lower = 1.0 / (w.length + 2.0 * mu);
                let upper = 1.0 / w.length;
                out.push(ApproxVerdict {
                    r,
                    length: w.length,
                    point: k.a / k.c,
                    denominator: scale * k.c.abs(),
                    value,
                    lower,
                    upper,
                    ok: value >= lower * (1.0 - APPROX_SLACK) && value <= upper * (1.0 + APPROX_SLACK),
                });
            }
        }
        prefix = prefix * w.f_w.to_real();
    }
    Ok(out)
}

/// Smallest `D²·|α − p|` over points with `0 < D ≤ Q` that are not
/// convergents of the sample; an empirical lower estimate of the constant
/// below which only convergents approximate.
pub fn epsilon0_estimate(g: &GroupPresentation, sample: &ExpansionSample, q: f64, depth_cap: usize) -> Result<f64> {
    let alpha = sample.alpha()?;
    let y = horoball_level(g);
    // outside this window every product is at least one
    let w = y * y;
    let e = complete_enumeration(g, q, (alpha - w, alpha + w), depth_cap)?;
    let conv: Vec<f64> = expansion_approximation_check(g, sample, sample.words.len().min(30), 1.0)?
        .iter()
        .map(|v| v.point)
        .collect();
    Ok(e.points
        .iter()
        .filter(|p| !conv.iter().any(|c| (c - p.x).abs() <= 1e-10 * p.x.abs().max(1.0)))
        .map(|p| p.denominator * p.denominator * (alpha - p.x).abs())
        .fold(1.0, f64::min))
}

/// Random closed path `W_1 → … → W_L → W_1` in the words of length `≤ t`.
pub fn sample_word_loop<R: Rng>(
    g: &GroupPresentation,
    words: &[CuspidalWord],
    len: usize,
    rng: &mut R,
) -> Result<Vec<CuspidalWord>> {
    if words.is_empty() || len == 0 {
        return Err(Error::InvalidArgument("empty alphabet or loop".into()));
    }
    for _ in 0..10_000 {
        let mut path = vec![words[rng.random_range(0..words.len())]];
        while path.len() < len {
            let prev = *path.last().unwrap();
            let next: Vec<&CuspidalWord> = words.iter().filter(|w| prev.in_domain(g, w.a0)).collect();
            if next.is_empty() {
                break;
            }
            path.push(*next[rng.random_range(0..next.len())]);
        }
        if path.len() == len && path[len - 1].in_domain(g, path[0].a0) {
            return Ok(path);
        }
    }
    Err(Error::InvalidArgument("no closed loop found".into()))
}
