//! Labelled ideal polygons: alphabet, side pairings, boundary arcs, cusp data.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moebius::{cayley, cayley_inv, disc_product, to_disc, unit, DiscMoebius, ExtPoint, RealMoebius};

/// Guard band for point-in-arc tests, in radians.
pub const ARC_GUARD: f64 = 1e-12;

/// Arc `[a]` of the boundary circle, parameterised clockwise by `t -> e^{-it}`.
/// It contains its left endpoint and not its right one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub left: C64,
    pub right: C64,
    pub t_left: f64,
    pub len: f64,
}

impl Arc {
    /// Point at parameter offset `u ∈ [0, len]` from the left endpoint.
    pub fn point(&self, u: f64) -> C64 {
        C64::from_polar(1.0, -(self.t_left + u))
    }

    /// Offset of `w` from the left endpoint, clamped to `[0, len]`.
    pub fn offset(&self, w: C64) -> f64 {
        let u = -(w * self.left.conj()).arg();
        u.clamp(0.0, self.len)
    }

    /// Offset without clamping, in `(-π, π]`.
    pub fn raw_offset(&self, w: C64) -> f64 {
        -(w * self.left.conj()).arg()
    }

    pub fn midpoint(&self) -> C64 {
        self.point(0.5 * self.len)
    }
}

/// A polygon vertex with its chart data: `chart·∞` is the vertex, where
/// `chart = B·A_k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vertex {
    pub point: C64,
    pub chart: RealMoebius,
    pub cusp: usize,
}

#[derive(Clone, Debug)]
pub struct GroupPresentation {
    pub name: String,
    pub labels: Vec<String>,
    pub hat: Vec<usize>,
    /// `order[a] = o(a)`.
    pub order: Vec<usize>,
    /// Inverse of `order`.
    pub by_order: Vec<usize>,
    pub gens: Vec<RealMoebius>,
    pub disc: Vec<DiscMoebius>,
    pub arcs: Vec<Arc>,
    pub cusps: Vec<RealMoebius>,
    /// `vertices[a]` sits at the left endpoint of `[a]`.
    pub vertices: Vec<Vertex>,
    /// Translation length of the primitive parabolic at each cusp.
    pub mu: Vec<f64>,
}

impl GroupPresentation {
    /// Builds the presentation from generators and cusp representatives.
    /// Arcs, cyclic order and vertex charts are derived from the geometry.
    pub fn new(
        name: &str,
        labels: Vec<String>,
        hat: Vec<usize>,
        gens: Vec<RealMoebius>,
        cusps: Vec<RealMoebius>,
    ) -> Result<Self> {
        let n = gens.len();
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidGroup(format!("need an even number ≥ 4 of letters, got {n}")));
        }
        if labels.len() != n || hat.len() != n {
            return Err(Error::InvalidGroup("labels/hat length mismatch".into()));
        }
        if hat.iter().any(|&h| h >= n) {
            return Err(Error::InvalidGroup("hat partner out of range".into()));
        }
        if cusps.is_empty() {
            return Err(Error::InvalidGroup("no cusp representatives".into()));
        }
        let disc: Vec<DiscMoebius> = gens.iter().map(to_disc).collect();
        let mut arcs = Vec::with_capacity(n);
        for a in 0..n {
            arcs.push(arc_of(&disc[hat[a]])?);
        }
        let mut by_order: Vec<usize> = (0..n).collect();
        by_order.sort_by(|&x, &y| arcs[x].t_left.total_cmp(&arcs[y].t_left));
        let start = by_order.iter().position(|&a| a == 0).unwrap_or(0);
        by_order.rotate_left(start);
        let mut order = vec![0; n];
        for (k, &a) in by_order.iter().enumerate() {
            order[a] = k;
        }
        let mut g = GroupPresentation {
            name: name.to_string(),
            labels,
            hat,
            order,
            by_order,
            gens,
            disc,
            arcs,
            cusps,
            vertices: Vec::new(),
            mu: Vec::new(),
        };
        g.vertices = g.compute_vertices()?;
        g.mu = g.compute_mu()?;
        Ok(g)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "gamma2" => gamma2(),
            "punctured_torus" => punctured_torus(),
            _ => Err(Error::UnknownGroup(name.to_string())),
        }
    }

    pub fn letters(&self) -> usize {
        self.gens.len()
    }

    /// `d`, half the number of letters.
    pub fn rank(&self) -> usize {
        self.gens.len() / 2
    }

    pub fn mu_max(&self) -> f64 {
        self.mu.iter().cloned().fold(0.0, f64::max)
    }

    /// Letter `b` with `o(b) = o(a) + k`.
    pub fn shift(&self, a: usize, k: i64) -> usize {
        let n = self.letters() as i64;
        self.by_order[(self.order[a] as i64 + k).rem_euclid(n) as usize]
    }

    /// `o(b) − o(a)` reduced to `(-d, d]`.
    pub fn order_diff(&self, b: usize, a: usize) -> i64 {
        let n = self.letters() as i64;
        let mut k = (self.order[b] as i64 - self.order[a] as i64).rem_euclid(n);
        if k > n / 2 {
            k -= n;
        }
        k
    }

    /// Vertex index (a letter) at the right endpoint of `[a]`.
    pub fn right_vertex(&self, a: usize) -> usize {
        self.shift(a, 1)
    }

    /// Letter `a` with `ξ ∈ [a]` under the right-open rule.
    pub fn locate(&self, xi: C64) -> usize {
        let t = (-xi.arg()).rem_euclid(TAU);
        let mut best = (f64::INFINITY, 0);
        for &a in &self.by_order {
            let arc = &self.arcs[a];
            let mut off = (t - arc.t_left).rem_euclid(TAU);
            if off > TAU - ARC_GUARD {
                off = 0.0;
            }
            if off < arc.len - ARC_GUARD {
                return a;
            }
            let miss = (off - arc.len).abs();
            if miss < best.0 {
                best = (miss, a);
            }
        }
        // inside the guard band of a right endpoint: it belongs to the successor
        self.shift(best.1, 1)
    }

    /// Chart `(B·A_k)⁻¹` sending the vertex to ∞.
    pub fn vertex_at_infinity_chart(&self, vertex: ExtPoint) -> Result<RealMoebius> {
        let w = match vertex {
            ExtPoint::Disc(w) => w,
            other => cayley(other)?,
        };
        self.vertex_index(w)
            .map(|v| self.vertices[v].chart.inverse())
            .ok_or_else(|| Error::UnknownVertex(format!("{w}")))
    }

    pub fn vertex_index(&self, w: C64) -> Option<usize> {
        (0..self.letters()).find(|&v| (self.arcs[v].left - w).norm() < 1e-8)
    }

    /// Real coordinate of a boundary point in the chart at vertex `v`.
    pub fn chart_coordinate(&self, v: usize, w: C64) -> Option<f64> {
        let inv = self.vertices[v].chart.inverse();
        match cayley_inv(w) {
            ExtPoint::Upper(z) => inv.apply_real(Some(z.re)),
            _ => inv.apply_real(None),
        }
    }

    fn compute_vertices(&self) -> Result<Vec<Vertex>> {
        let n = self.letters();
        let mut charts: Vec<Option<(RealMoebius, usize)>> = vec![None; n];
        for (k, rep) in self.cusps.iter().enumerate() {
            let (v, b) = self.reduce_to_vertex(rep)?;
            let h = b * *rep;
            if let Some((_, k0)) = charts[v] {
                return Err(Error::InvalidGroup(format!("cusp representatives {k0} and {k} coincide")));
            }
            charts[v] = Some((h, k));
            // propagate along the vertex cycle: F_a sends ξ^R_â to ξ^L_a
            let mut stack = vec![v];
            while let Some(u) = stack.pop() {
                let (hu, _) = charts[u].unwrap();
                for a in 0..n {
                    if self.right_vertex(self.hat[a]) == u {
                        let target = a;
                        let ht = self.gens[a] * hu;
                        match charts[target] {
                            None => {
                                charts[target] = Some((ht, k));
                                stack.push(target);
                            }
                            Some((_, k1)) if k1 != k => {
                                return Err(Error::InvalidGroup(format!(
                                    "cusp representatives {k1} and {k} are equivalent"
                                )))
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
        charts
            .into_iter()
            .enumerate()
            .map(|(v, c)| {
                let (chart, cusp) = c.ok_or_else(|| {
                    Error::InvalidGroup(format!("vertex {} has no cusp representative", self.arcs[v].left))
                })?;
                Ok(Vertex { point: self.arcs[v].left, chart, cusp })
            })
            .collect()
    }

    /// Finds a vertex `v` and `B` with `B·A·∞ = v`, following the boundary map.
    fn reduce_to_vertex(&self, rep: &RealMoebius) -> Result<(usize, RealMoebius)> {
        let mut w = cayley(rep.apply(ExtPoint::Infinity)?)?;
        let mut b = RealMoebius::IDENTITY;
        for _ in 0..64 {
            if let Some(v) = self.vertex_index(w) {
                return Ok((v, b));
            }
            let a = self.locate(w);
            w = self.disc[a].inverse().apply_boundary(w);
            b = self.gens[a].inverse() * b;
        }
        Err(Error::InvalidGroup("cusp representative does not reach a polygon vertex".into()))
    }

    fn compute_mu(&self) -> Result<Vec<f64>> {
        let mut mu = vec![0.0; self.cusps.len()];
        for (v, vert) in self.vertices.iter().enumerate() {
            let cycle = self.cycle(v, true);
            let p: Vec<RealMoebius> = cycle.iter().map(|&a| self.gens[a]).collect();
            let fp = crate::moebius::real_product(p.iter());
            let t = vert.chart.inverse() * fp * vert.chart;
            if t.c.abs() > 1e-6 * (t.a.abs() + t.b.abs()) {
                return Err(Error::InvalidGroup(format!("cycle at vertex {v} does not fix it")));
            }
            mu[vert.cusp] = (t.b / t.d).abs();
        }
        Ok(mu)
    }

    /// Letters of the cuspidal cycle starting at `a0`. Left cycles fix the
    /// left endpoint of `[a0]`, right cycles the right one.
    pub fn cycle(&self, a0: usize, left: bool) -> Vec<usize> {
        let step = if left { 1 } else { -1 };
        let mut out = vec![a0];
        let mut x = self.shift(self.hat[a0], step);
        while x != a0 {
            out.push(x);
            x = self.shift(self.hat[x], step);
            if out.len() > 4 * self.letters() {
                break;
            }
        }
        out
    }

    /// Product of the letters of a word, in the disc model.
    pub fn word_disc(&self, word: &[usize]) -> DiscMoebius {
        disc_product(word.iter().map(|&a| &self.disc[a]))
    }

    pub fn word_real(&self, word: &[usize]) -> RealMoebius {
        crate::moebius::real_product(word.iter().map(|&a| &self.gens[a]))
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    /// Number of inequivalent vertex classes, merged combinatorially.
    pub fn cusp_count(&self) -> usize {
        let n = self.letters();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for a in 0..n {
            let u = self.right_vertex(self.hat[a]);
            let (ra, rb) = (find(&mut parent, u), find(&mut parent, a));
            parent[ra] = rb;
        }
        (0..n).filter(|&x| find(&mut parent, x) == x).count()
    }
}

/// Arc of the unit circle inside the isometric circle of `f`.
fn arc_of(f: &DiscMoebius) -> Result<Arc> {
    let (omega, _) = f.isometric_circle()?;
    let r = omega.norm();
    if r <= 1.0 {
        return Err(Error::InvalidGroup("isometric circle centre inside the disc".into()));
    }
    let gamma = (1.0 / r).acos();
    let theta = omega.arg();
    let left = C64::from_polar(1.0, theta + gamma);
    let right = C64::from_polar(1.0, theta - gamma);
    Ok(Arc { left, right, t_left: (-(theta + gamma)).rem_euclid(TAU), len: 2.0 * gamma })
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub group: String,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn validate(g: &GroupPresentation) -> ValidationReport {
    let n = g.letters();
    let mut checks = Vec::new();
    let mut push = |name: &str, worst: f64, tol: f64| {
        checks.push(Check { name: name.to_string(), passed: worst.is_finite() && worst <= tol, slack: worst });
    };

    let involution = (0..n).all(|a| g.hat[a] < n && g.hat[a] != a && g.hat[g.hat[a]] == a);
    push("alphabet", if involution { 0.0 } else { f64::INFINITY }, 0.0);

    let mut seen = vec![false; n];
    for &o in &g.order {
        if o < n {
            seen[o] = true;
        }
    }
    push("cyclic_order", if seen.iter().all(|&s| s) { 0.0 } else { f64::INFINITY }, 0.0);

    let det = g.gens.iter().map(|m| (m.det() - 1.0).abs()).fold(0.0, f64::max);
    push("unimodular", det, 1e-9);

    let inv = (0..n)
        .map(|a| {
            let e = g.disc[g.hat[a]];
            let f = g.disc[a].inverse();
            (e.alpha - f.alpha).norm().max((e.beta - f.beta).norm())
                .min((e.alpha + f.alpha).norm().max((e.beta + f.beta).norm()))
        })
        .fold(0.0, f64::max);
    push("inverse_pairs", inv, 1e-10);

    let pairing = (0..n)
        .map(|a| {
            let h = g.hat[a];
            let f = &g.disc[a];
            let e1 = (f.apply_boundary(g.arcs[h].right) - g.arcs[a].left).norm();
            let e2 = (f.apply_boundary(g.arcs[h].left) - g.arcs[a].right).norm();
            e1.max(e2)
        })
        .fold(0.0, f64::max);
    push("side_pairing", pairing, 1e-10);

    let mut partition = 0.0f64;
    let mut total = 0.0;
    for k in 0..n {
        let a = g.by_order[k];
        let b = g.by_order[(k + 1) % n];
        partition = partition.max((g.arcs[a].right - g.arcs[b].left).norm());
        total += g.arcs[a].len;
    }
    partition = partition.max((total - TAU).abs());
    push("arc_partition", partition, 1e-9);

    let on_circle = (0..n)
        .map(|a| match g.disc[g.hat[a]].isometric_circle() {
            Ok((c, r)) => ((g.arcs[a].left - c).norm() - r).abs().max(((g.arcs[a].right - c).norm() - r).abs()),
            Err(_) => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    push("arc_on_isometric_circle", on_circle, 1e-9);

    // no isometric disc may contain another generator's circle
    let mut nesting = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            if let (Ok((ca, ra)), Ok((cb, rb))) = (g.disc[a].isometric_circle(), g.disc[b].isometric_circle()) {
                let excess = rb + (ca - cb).norm() - ra;
                if excess < -1e-9 {
                    nesting = nesting.max(-excess);
                }
            }
        }
    }
    push("isometric_nesting", nesting, 0.0);

    // F_a maps the complement of [â] into [a]
    let mut image = 0.0f64;
    for a in 0..n {
        let h = g.hat[a];
        let comp_len = TAU - g.arcs[h].len;
        for j in 1..20 {
            let u = comp_len * j as f64 / 20.0;
            let w = C64::from_polar(1.0, -(g.arcs[h].t_left + g.arcs[h].len + u));
            let img = g.disc[a].apply_boundary(w);
            let off = g.arcs[a].raw_offset(img);
            let miss = if off < 0.0 { -off } else if off > g.arcs[a].len { off - g.arcs[a].len } else { 0.0 };
            image = image.max(miss);
        }
    }
    push("complement_image", image, 1e-10);

    let charts = if g.vertices.len() == n {
        g.vertices
            .iter()
            .map(|v| match v.chart.apply(ExtPoint::Infinity) {
                Ok(p) => cayley(p).map(|w| (w - v.point).norm()).unwrap_or(f64::INFINITY),
                Err(_) => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    push("vertex_charts", charts, 1e-8);

    let parabolic = (0..n)
        .map(|a| {
            let c = g.cycle(a, true);
            (g.word_disc(&c).trace().abs() - 2.0).abs()
        })
        .fold(0.0, f64::max);
    push("parabolic_cycles", parabolic, 1e-8);

    ValidationReport { group: g.name.clone(), checks }
}

fn labels(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Principal congruence group of level 2: free on `z + 2` and `z/(2z + 1)`,
/// with cusps at ∞, 0 and 1.
fn gamma2() -> Result<GroupPresentation> {
    let a = RealMoebius::new(1.0, 2.0, 0.0, 1.0);
    let b = RealMoebius::new(1.0, 0.0, 2.0, 1.0);
    GroupPresentation::new(
        "gamma2",
        labels(&["a", "b", "B", "A"]),
        vec![3, 2, 1, 0],
        vec![a, b, b.inverse(), a.inverse()],
        vec![
            RealMoebius::IDENTITY,
            RealMoebius::new(0.0, -1.0, 1.0, 0.0),
            RealMoebius::new(1.0, -1.0, 1.0, 0.0),
        ],
    )
}

/// Once-punctured square torus: the ideal quadrilateral with vertices
/// ±1, ±i in the disc, paired by two hyperbolics of trace 2√2.
fn punctured_torus() -> Result<GroupPresentation> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let a = RealMoebius::new(3.0 * s, s, s, s);
    let b = RealMoebius::new(s, s, s, 3.0 * s);
    GroupPresentation::new(
        "punctured_torus",
        labels(&["a", "b", "A", "B"]),
        vec![2, 3, 0, 1],
        vec![a, b, a.inverse(), b.inverse()],
        vec![RealMoebius::IDENTITY],
    )
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Num {
    Int(i64),
    Float(f64),
}

impl Num {
    fn value(&self) -> f64 {
        match *self {
            Num::Int(i) => i as f64,
            Num::Float(x) => x,
        }
    }
}

#[derive(Deserialize)]
struct LetterSpec {
    label: String,
    hat: String,
    matrix: [Num; 4],
}

#[derive(Deserialize)]
struct CuspSpec {
    matrix: [Num; 4],
}

#[derive(Deserialize)]
struct GroupSpec {
    name: Option<String>,
    letters: Vec<LetterSpec>,
    cusps: Vec<CuspSpec>,
}

fn parse_matrix(m: &[Num; 4], what: &str) -> Result<RealMoebius> {
    let g = RealMoebius::new(m[0].value(), m[1].value(), m[2].value(), m[3].value());
    if !g.is_unimodular(1e-9) {
        return Err(Error::Config(format!("{what}: determinant {} is not 1", g.det())));
    }
    Ok(g)
}

/// Reads a group from its TOML description.
pub fn from_toml(text: &str) -> Result<GroupPresentation> {
    let spec: GroupSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let labels: Vec<String> = spec.letters.iter().map(|l| l.label.clone()).collect();
    let mut hat = Vec::with_capacity(labels.len());
    let mut gens = Vec::with_capacity(labels.len());
    for l in &spec.letters {
        let h = labels
            .iter()
            .position(|x| *x == l.hat)
            .ok_or_else(|| Error::Config(format!("letter {}: unknown hat partner {}", l.label, l.hat)))?;
        hat.push(h);
        gens.push(parse_matrix(&l.matrix, &format!("letter {}", l.label))?);
    }
    let cusps = spec
        .cusps
        .iter()
        .enumerate()
        .map(|(k, c)| parse_matrix(&c.matrix, &format!("cusp {k}")))
        .collect::<Result<Vec<_>>>()?;
    GroupPresentation::new(spec.name.as_deref().unwrap_or("custom"), labels, hat, gens, cusps)
}

/// Angle helper used by tests: `e^{-it}`.
pub fn boundary_point(t: f64) -> C64 {
    unit(C64::from_polar(1.0, -t))
}
