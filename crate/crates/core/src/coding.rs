//! Boundary expansions, cuspidal words and the transition structure of the
//! cuspidal acceleration.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::GroupPresentation;
use crate::moebius::DiscMoebius;

/// Tolerance used when comparing geometric lengths with a cut-off.
pub const LENGTH_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn step(self) -> i64 {
        match self {
            Side::Left => 1,
            Side::Right => -1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum WordType {
    Left,
    Right,
    Singleton,
}

impl From<Side> for WordType {
    fn from(s: Side) -> Self {
        match s {
            Side::Left => WordType::Left,
            Side::Right => WordType::Right,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    NotCuspidal,
    Left,
    Right,
    Singleton,
}

pub fn locate(g: &GroupPresentation, xi: C64) -> usize {
    g.locate(xi)
}

/// One step of the boundary map: `ξ ∈ [a]` goes to `F_a⁻¹ξ`.
pub fn bowen_series_step(g: &GroupPresentation, xi: C64) -> (usize, C64) {
    let a = g.locate(xi);
    (a, g.disc[a].inverse().apply_boundary(xi))
}

pub fn expand(g: &GroupPresentation, xi: C64, n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n);
    let mut x = xi;
    for _ in 0..n {
        let (a, y) = bowen_series_step(g, x);
        out.push(a);
        x = y;
    }
    out
}

pub fn check_admissible(g: &GroupPresentation, word: &[usize]) -> Result<()> {
    for k in 1..word.len() {
        if word[k] == g.hat[word[k - 1]] {
            return Err(Error::Backtrack(k));
        }
    }
    Ok(())
}

/// Endpoints `(left, right)` of `F_{a_0…a_{n-1}}[a_n]`.
pub fn cylinder(g: &GroupPresentation, word: &[usize]) -> Result<(C64, C64)> {
    check_admissible(g, word)?;
    let last = *word.last().ok_or_else(|| Error::InvalidArgument("empty word".into()))?;
    let f = g.word_disc(&word[..word.len() - 1]);
    let arc = &g.arcs[last];
    Ok((f.apply_boundary(arc.left), f.apply_boundary(arc.right)))
}

/// Letter following `x` in a cuspidal word of the given side.
pub fn next_letter(g: &GroupPresentation, x: usize, side: Side) -> usize {
    g.shift(g.hat[x], side.step())
}

pub fn classify_cuspidal(g: &GroupPresentation, word: &[usize]) -> Result<Classification> {
    check_admissible(g, word)?;
    match word.len() {
        0 => Err(Error::InvalidArgument("empty word".into())),
        1 => Ok(Classification::Singleton),
        _ => {
            for side in [Side::Left, Side::Right] {
                if word.windows(2).all(|w| w[1] == next_letter(g, w[0], side)) {
                    return Ok(match side {
                        Side::Left => Classification::Left,
                        Side::Right => Classification::Right,
                    });
                }
            }
            Ok(Classification::NotCuspidal)
        }
    }
}

/// Whether `[x]` belongs to the domain of a word with last letter `last`.
pub fn in_domain(g: &GroupPresentation, last: usize, ty: WordType, x: usize) -> bool {
    let k = g.order_diff(x, g.hat[last]);
    match ty {
        WordType::Singleton => !(-1..=1).contains(&k),
        WordType::Left => k != 0 && k != 1,
        WordType::Right => k != 0 && k != -1,
    }
}

pub fn domain_letters(g: &GroupPresentation, last: usize, ty: WordType) -> Vec<usize> {
    g.by_order.iter().copied().filter(|&x| in_domain(g, last, ty, x)).collect()
}

/// Words `P^k ∗ V` sharing a first letter, a side and the remainder length `r`:
/// `P` is the full cuspidal cycle of period `p` and `V` its first `r` letters.
#[derive(Clone, Debug)]
pub struct Family {
    pub a0: usize,
    pub side: Side,
    pub period: Vec<usize>,
    pub r: usize,
    pub last: usize,
    pub f_v: DiscMoebius,
    pub f_p: DiscMoebius,
    /// Vertex index (letter whose left endpoint is the fixed point).
    pub vertex: usize,
    pub xi: C64,
    /// `|W| = |offset + k·shift|`.
    pub offset: f64,
    pub shift: f64,
}

impl Family {
    pub fn new(g: &GroupPresentation, a0: usize, side: Side, r: usize) -> Result<Family> {
        let period = g.cycle(a0, side == Side::Left);
        let p = period.len();
        if r == 0 || r > p {
            return Err(Error::InvalidArgument(format!("remainder {r} outside 1..={p}")));
        }
        let vertex = match side {
            Side::Left => a0,
            Side::Right => g.right_vertex(a0),
        };
        let xi = g.arcs[vertex].left;
        let xs = side_coordinates(g, &period, vertex, xi)?;
        let f_p = g.word_disc(&period);
        Ok(Family {
            a0,
            side,
            last: period[r - 1],
            f_v: g.word_disc(&period[..r]),
            f_p,
            vertex,
            xi,
            offset: xs[r - 1] - xs[0],
            shift: xs[p] - xs[0],
            period,
            r,
        })
    }

    pub fn ty(&self) -> WordType {
        self.side.into()
    }

    pub fn p(&self) -> usize {
        self.period.len()
    }

    /// Smallest admissible power; `(k, r) = (0, 1)` is the singleton.
    pub fn k_min(&self) -> usize {
        usize::from(self.r == 1)
    }

    pub fn length(&self, k: f64) -> f64 {
        (self.offset + k * self.shift).abs()
    }

    /// Largest `k` with `|W| ≤ t`, if any.
    pub fn k_max(&self, t: f64) -> Option<usize> {
        let off = self.offset.abs();
        if off > t + LENGTH_TOL {
            return None;
        }
        let k = ((t + LENGTH_TOL - off) / self.shift.abs()).floor();
        Some(k as usize)
    }

    pub fn power(&self, k: f64) -> DiscMoebius {
        self.f_p.parabolic_power(k)
    }

    /// `F_W = F_P^k ∘ F_V`.
    pub fn element(&self, k: usize) -> DiscMoebius {
        self.power(k as f64) * self.f_v
    }

    pub fn word(&self, k: usize) -> CuspidalWord {
        CuspidalWord {
            a0: self.a0,
            ty: self.ty(),
            n: k * self.p() + self.r - 1,
            k,
            r: self.r,
            last: self.last,
            f_w: self.element(k),
            xi: self.xi,
            vertex: self.vertex,
            length: self.length(k as f64),
        }
    }

    /// `|μ(P)|`: the parabolic's coefficient in `|D F_P^k| ~ 1/(k²μ²|ξ − ξ_P|²)`.
    pub fn mu_p(&self) -> f64 {
        self.f_p.parabolic_power(1.0).beta.norm()
    }
}

/// Real parts `x_0, …, x_p` of the sides `G_j(s_{a_j})` in the vertex chart.
fn side_coordinates(g: &GroupPresentation, period: &[usize], vertex: usize, xi: C64) -> Result<Vec<f64>> {
    let p = period.len();
    let mut xs = Vec::with_capacity(p + 1);
    let mut gj = DiscMoebius::IDENTITY;
    for j in 0..=p {
        let a = period[j % p];
        let arc = &g.arcs[a];
        let e1 = gj.apply_boundary(arc.left);
        let e2 = gj.apply_boundary(arc.right);
        let foot = if (e1 - xi).norm() > (e2 - xi).norm() { e1 } else { e2 };
        let x = g
            .chart_coordinate(vertex, foot)
            .ok_or_else(|| Error::InvalidGroup("side foot sent to infinity by the vertex chart".into()))?;
        xs.push(x);
        gj = gj * g.disc[a];
    }
    Ok(xs)
}

/// Every family of the group, `2d · 2 · p` of them.
pub fn families(g: &GroupPresentation) -> Result<Vec<Family>> {
    let mut out = Vec::new();
    for a0 in 0..g.letters() {
        for side in [Side::Left, Side::Right] {
            let p = g.cycle(a0, side == Side::Left).len();
            for r in 1..=p {
                let f = Family::new(g, a0, side, r)?;
                if f.shift.abs() < 1e-9 || f.offset * f.shift < -1e-9 {
                    return Err(Error::InvalidGroup("cuspidal lengths are not monotone".into()));
                }
                out.push(f);
            }
        }
    }
    Ok(out)
}

/// A cuspidal word stored as first letter, type and length.
#[derive(Clone, Copy, Debug)]
pub struct CuspidalWord {
    pub a0: usize,
    pub ty: WordType,
    /// The word has `n + 1` letters.
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub last: usize,
    pub f_w: DiscMoebius,
    pub xi: C64,
    pub vertex: usize,
    pub length: f64,
}

impl CuspidalWord {
    pub fn singleton(g: &GroupPresentation, a0: usize) -> CuspidalWord {
        CuspidalWord {
            a0,
            ty: WordType::Singleton,
            n: 0,
            k: 0,
            r: 1,
            last: a0,
            f_w: g.disc[a0],
            xi: g.arcs[a0].left,
            vertex: a0,
            length: 0.0,
        }
    }

    pub fn letters(&self, g: &GroupPresentation) -> Vec<usize> {
        match self.ty {
            WordType::Singleton => vec![self.a0],
            WordType::Left | WordType::Right => {
                let side = if self.ty == WordType::Left { Side::Left } else { Side::Right };
                let mut out = vec![self.a0];
                for _ in 0..self.n {
                    out.push(next_letter(g, *out.last().unwrap(), side));
                }
                out
            }
        }
    }

    pub fn domain(&self, g: &GroupPresentation) -> Vec<usize> {
        domain_letters(g, self.last, self.ty)
    }

    pub fn in_domain(&self, g: &GroupPresentation, x: usize) -> bool {
        in_domain(g, self.last, self.ty, x)
    }
}

/// The cuspidal word with the given first letter, side and `n + 1` letters.
pub fn cuspidal_word(g: &GroupPresentation, a0: usize, side: Side, n: usize) -> Result<CuspidalWord> {
    if n == 0 {
        return Ok(CuspidalWord::singleton(g, a0));
    }
    let p = g.cycle(a0, side == Side::Left).len();
    let fam = Family::new(g, a0, side, n % p + 1)?;
    Ok(fam.word(n / p))
}

pub fn geometric_length(w: &CuspidalWord) -> f64 {
    w.length
}

/// Geometric length from the letters, through the vertex chart.
pub fn geometric_length_direct(g: &GroupPresentation, letters: &[usize]) -> Result<f64> {
    match classify_cuspidal(g, letters)? {
        Classification::Singleton => Ok(0.0),
        Classification::NotCuspidal => Err(Error::InvalidArgument("word is not cuspidal".into())),
        c => {
            let side = if c == Classification::Left { Side::Left } else { Side::Right };
            let a0 = letters[0];
            let vertex = if side == Side::Left { a0 } else { g.right_vertex(a0) };
            let xi = g.arcs[vertex].left;
            let foot = |j: usize| -> Result<f64> {
                let gj = g.word_disc(&letters[..j]);
                let arc = &g.arcs[letters[j]];
                let e1 = gj.apply_boundary(arc.left);
                let e2 = gj.apply_boundary(arc.right);
                let f = if (e1 - xi).norm() > (e2 - xi).norm() { e1 } else { e2 };
                g.chart_coordinate(vertex, f).ok_or(Error::Pole)
            };
            Ok((foot(letters.len() - 1)? - foot(0)?).abs())
        }
    }
}

/// Piece of a cuspidal decomposition: start position and the word.
#[derive(Clone, Debug)]
pub struct Piece {
    pub start: usize,
    pub word: CuspidalWord,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub pieces: Vec<Piece>,
    /// The last piece ran into the end of the input and may be longer.
    pub truncated: bool,
}

/// Splits a letter sequence into maximal cuspidal words.
pub fn cuspidal_decompose(g: &GroupPresentation, letters: &[usize]) -> Result<Decomposition> {
    check_admissible(g, letters)?;
    let mut pieces = Vec::new();
    let mut i = 0;
    let mut truncated = false;
    while i < letters.len() {
        let a0 = letters[i];
        let mut j = i;
        let mut side = None;
        if i + 1 < letters.len() {
            for s in [Side::Left, Side::Right] {
                if letters[i + 1] == next_letter(g, a0, s) {
                    side = Some(s);
                }
            }
        }
        if let Some(s) = side {
            while j + 1 < letters.len() && letters[j + 1] == next_letter(g, letters[j], s) {
                j += 1;
            }
        }
        if j + 1 == letters.len() {
            truncated = true;
        }
        let word = match side {
            None => CuspidalWord::singleton(g, a0),
            Some(s) => cuspidal_word(g, a0, s, j - i)?,
        };
        pieces.push(Piece { start: i, word });
        i = j + 1;
    }
    Ok(Decomposition { pieces, truncated })
}

/// `M_{W,W'}`: the next word must start inside the domain of `W`.
pub fn transition(g: &GroupPresentation, w: &CuspidalWord, w2: &CuspidalWord) -> bool {
    w.in_domain(g, w2.a0)
}

/// All cuspidal words with `|W| ≤ t`.
pub fn enumerate_alphabet(g: &GroupPresentation, t: f64) -> Result<Vec<CuspidalWord>> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::InvalidArgument(format!("cut-off must be positive, got {t}")));
    }
    let mut out: Vec<CuspidalWord> = (0..g.letters()).map(|a| CuspidalWord::singleton(g, a)).collect();
    for fam in families(g)? {
        if let Some(kmax) = fam.k_max(t) {
            for k in fam.k_min()..=kmax {
                let w = fam.word(k);
                if w.length <= t + LENGTH_TOL {
                    out.push(w);
                }
            }
        }
    }
    Ok(out)
}

/// Words `W ∈ 𝒲_T` whose domain contains `[a]`.
pub fn words_for_letter(g: &GroupPresentation, words: &[CuspidalWord], a: usize) -> Vec<CuspidalWord> {
    words.iter().filter(|w| w.in_domain(g, a)).copied().collect()
}

pub struct TransitionMatrix {
    pub words: Vec<CuspidalWord>,
    rows: Vec<Vec<u64>>,
}

impl TransitionMatrix {
    pub fn new(g: &GroupPresentation, words: Vec<CuspidalWord>) -> Self {
        let n = words.len();
        let blocks = n.div_ceil(64);
        let rows = words
            .iter()
            .map(|w| {
                let mut row = vec![0u64; blocks];
                for (j, w2) in words.iter().enumerate() {
                    if transition(g, w, w2) {
                        row[j / 64] |= 1 << (j % 64);
                    }
                }
                row
            })
            .collect();
        TransitionMatrix { words, rows }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i][j / 64] >> (j % 64) & 1 == 1
    }

    /// Checks `M² > 0` entrywise, returning the first failing pair.
    pub fn check_aperiodicity(&self) -> (bool, Option<(usize, usize)>) {
        let n = self.len();
        for i in 0..n {
            let mut reach = vec![0u64; self.rows[i].len()];
            for k in 0..n {
                if self.get(i, k) {
                    for (r, x) in reach.iter_mut().zip(&self.rows[k]) {
                        *r |= *x;
                    }
                }
            }
            for j in 0..n {
                if reach[j / 64] >> (j % 64) & 1 == 0 {
                    return (false, Some((i, j)));
                }
            }
        }
        (true, None)
    }
}

/// Smallest cut-off among the word lengths up to `t_max` from which `M² > 0`
/// holds for every larger cut-off in that range.
pub fn aperiodicity_threshold(g: &GroupPresentation, t_max: f64) -> Result<Option<f64>> {
    let words = enumerate_alphabet(g, t_max)?;
    let mut lengths: Vec<f64> = words.iter().map(|w| w.length).filter(|&l| l > 0.0).collect();
    lengths.sort_by(f64::total_cmp);
    lengths.dedup_by(|a, b| (*a - *b).abs() < LENGTH_TOL);
    let mut threshold = None;
    for &t in lengths.iter().rev() {
        let m = TransitionMatrix::new(g, enumerate_alphabet(g, t)?);
        if m.check_aperiodicity().0 {
            threshold = Some(t);
        } else {
            break;
        }
    }
    Ok(threshold)
}
