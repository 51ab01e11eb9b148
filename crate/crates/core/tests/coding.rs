use std::f64::consts::TAU;

use cuspdim::coding::*;
use cuspdim::error::Error;
use cuspdim::group::{boundary_point, GroupPresentation};
use cuspdim::moebius::DiscMoebius;
use num_complex::Complex64 as C64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BUILTINS: [&str; 2] = ["gamma2", "punctured_torus"];

fn group(name: &str) -> GroupPresentation {
    GroupPresentation::builtin(name).unwrap()
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() < tol
}

/// Clockwise angular position of `w` relative to `from`, in `[0, 2π)`.
fn cw(from: C64, w: C64) -> f64 {
    (from.arg() - w.arg()).rem_euclid(TAU)
}

fn inside_arc(left: C64, right: C64, w: C64, slack: f64) -> bool {
    cw(left, w) <= cw(left, right) + slack || cw(left, w) > TAU - slack
}

fn arc_length(left: C64, right: C64) -> f64 {
    cw(left, right)
}

#[test]
fn locate_examples() {
    let g = group("gamma2");
    for a in 0..4 {
        assert_eq!(locate(&g, g.arcs[a].midpoint()), a);
        assert_eq!(locate(&g, g.arcs[a].left), a);
        assert_eq!(locate(&g, g.arcs[a].right), g.shift(a, 1));
        assert_eq!(g.order[g.shift(a, 1)], (g.order[a] + 1) % 4);
    }
}

/// Attracting fixed point of a hyperbolic disc map.
fn attracting_fixed_point(f: &DiscMoebius) -> C64 {
    // β w² + (ᾱ − α) w − β̄ = 0
    let (a, b, c) = (f.beta, f.alpha.conj() - f.alpha, -f.beta.conj());
    let disc = (b * b - 4.0 * a * c).sqrt();
    let roots = [(-b + disc) / (2.0 * a), (-b - disc) / (2.0 * a)];
    *roots.iter().min_by(|x, y| f.derivative(**x).total_cmp(&f.derivative(**y))).unwrap()
}

#[test]
fn hyperbolic_fixed_point_expands_to_a_constant_word() {
    let g = group("punctured_torus");
    for a in 0..4 {
        let xi = attracting_fixed_point(&g.disc[a]);
        assert!(close(g.disc[a].apply_boundary(xi), xi, 1e-12));
        assert_eq!(locate(&g, xi), a);
        let (b, y) = bowen_series_step(&g, xi);
        assert_eq!(b, a);
        assert!(close(y, xi, 1e-12));
        assert_eq!(expand(&g, xi, 10), vec![a; 10]);
    }
}

#[test]
fn parabolic_vertex_expands_to_a_constant_word() {
    let g = group("gamma2");
    // φ(∞) = 1 is fixed by z + 2, the letter whose side starts there
    let xi = C64::new(1.0, 0.0);
    let a = locate(&g, xi);
    assert!(close(g.disc[a].apply_boundary(xi), xi, 1e-15));
    assert_eq!(expand(&g, xi, 30), vec![a; 30]);
    assert_eq!(classify_cuspidal(&g, &[a; 5]).unwrap() == Classification::NotCuspidal, false);
}

#[test]
fn step_near_a_right_cuspidal_vertex_lands_in_the_next_letter() {
    for name in BUILTINS {
        let g = group(name);
        for a0 in 0..g.letters() {
            let a1 = next_letter(&g, a0, Side::Right);
            let w = cuspidal_word(&g, a0, Side::Right, 1).unwrap();
            assert!(close(w.xi, g.arcs[a0].right, 1e-12));
            let near = g.arcs[a0].point(g.arcs[a0].len * (1.0 - 1e-6));
            let (a, y) = bowen_series_step(&g, near);
            assert_eq!(a, a0);
            assert_eq!(locate(&g, y), a1, "{name}: {a0} -> {a1}");
        }
    }
}

#[test]
fn two_steps_compose() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for name in BUILTINS {
        let g = group(name);
        for _ in 0..100 {
            let xi = boundary_point(rng.random::<f64>() * TAU);
            let (a0, y) = bowen_series_step(&g, xi);
            let (a1, z) = bowen_series_step(&g, y);
            let direct = (g.disc[a1].inverse() * g.disc[a0].inverse()).apply_boundary(xi);
            assert!(close(z, direct, 1e-10));
        }
    }
}

#[test]
fn expansions_are_admissible_and_shift_compatible() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for name in BUILTINS {
        let g = group(name);
        let mut kept = 0;
        while kept < 100 {
            let xi = boundary_point(rng.random::<f64>() * TAU);
            let word = expand(&g, xi, 31);
            // stay away from cylinder endpoints
            let (l, r) = cylinder(&g, &word[..30]).unwrap();
            if (xi - l).norm() < 1e-9 || (xi - r).norm() < 1e-9 {
                continue;
            }
            kept += 1;
            check_admissible(&g, &word).unwrap();
            let (_, y) = bowen_series_step(&g, xi);
            assert_eq!(expand(&g, y, 30), word[1..].to_vec());
        }
    }
}

#[test]
fn expansion_cylinders_contain_the_point_and_shrink() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for name in BUILTINS {
        let g = group(name);
        for _ in 0..200 {
            let xi = boundary_point(rng.random::<f64>() * TAU);
            let word = expand(&g, xi, 20);
            let mut prev = TAU;
            for n in 1..=20 {
                let (l, r) = cylinder(&g, &word[..n]).unwrap();
                assert!(inside_arc(l, r, xi, 1e-12), "{name}: point outside its cylinder at depth {n}");
                let len = arc_length(l, r);
                assert!(len <= prev + 1e-12);
                prev = len;
            }
            assert!(prev < 0.5, "{name}: depth-20 cylinder of length {prev}");
        }
    }
}

#[test]
fn cylinder_examples() {
    let g = group("gamma2");
    for a in 0..4 {
        let (l, r) = cylinder(&g, &[a]).unwrap();
        assert!(close(l, g.arcs[a].left, 1e-12) && close(r, g.arcs[a].right, 1e-12));
        for b in 0..4 {
            if b == g.hat[a] {
                assert_eq!(cylinder(&g, &[a, b]).unwrap_err(), Error::Backtrack(1));
                continue;
            }
            let (l, r) = cylinder(&g, &[a, b]).unwrap();
            assert!(close(l, g.disc[a].apply_boundary(g.arcs[b].left), 1e-10));
            assert!(close(r, g.disc[a].apply_boundary(g.arcs[b].right), 1e-10));
            // nested in [a]
            assert!(inside_arc(g.arcs[a].left, g.arcs[a].right, g.disc[a].apply_boundary(g.arcs[b].midpoint()), 1e-12));
        }
    }
}

#[test]
fn cuspidal_cylinders_share_the_vertex() {
    for name in BUILTINS {
        let g = group(name);
        for a0 in 0..g.letters() {
            for side in [Side::Left, Side::Right] {
                let w = cuspidal_word(&g, a0, side, 9).unwrap();
                let letters = w.letters(&g);
                for n in 1..=letters.len() {
                    let (l, r) = cylinder(&g, &letters[..n]).unwrap();
                    let end = if side == Side::Left { l } else { r };
                    assert!(close(end, w.xi, 1e-9), "{name}: {a0} {side:?} depth {n}");
                }
            }
        }
    }
}

#[test]
fn classification_examples() {
    let g = group("gamma2");
    assert_ne!(classify_cuspidal(&g, &[0, 0]).unwrap(), Classification::NotCuspidal);
    assert_eq!(classify_cuspidal(&g, &[1]).unwrap(), Classification::Singleton);
    assert_eq!(classify_cuspidal(&g, &[0, 3]).unwrap_err(), Error::Backtrack(1));
    let t = group("punctured_torus");
    // a, b, â, b̂, … and b, a, b̂, â, …
    let (a, b, ah, bh) = (0, 1, 2, 3);
    assert_ne!(classify_cuspidal(&t, &[a, b, ah, bh, a]).unwrap(), Classification::NotCuspidal);
    assert_ne!(classify_cuspidal(&t, &[b, a, bh, ah, b]).unwrap(), Classification::NotCuspidal);
    assert_eq!(classify_cuspidal(&t, &[a, a, b]).unwrap(), Classification::NotCuspidal);
}

fn all_words(g: &GroupPresentation, a0: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![a0]];
    for _ in 1..len {
        let mut next = Vec::with_capacity(out.len() * 3);
        for w in &out {
            for x in 0..g.letters() {
                if x != g.hat[*w.last().unwrap()] {
                    let mut v = w.clone();
                    v.push(x);
                    next.push(v);
                }
            }
        }
        out = next;
    }
    out
}

/// Exactly two cuspidal words of each length per first letter, found by
/// brute force over all reduced words.
#[test]
fn two_cuspidal_words_per_letter_and_length() {
    for name in BUILTINS {
        let g = group(name);
        for a0 in 0..g.letters() {
            for n in 1..=10 {
                let found: Vec<Vec<usize>> = all_words(&g, a0, n + 1)
                    .into_iter()
                    .filter(|w| classify_cuspidal(&g, w).unwrap() != Classification::NotCuspidal)
                    .collect();
                assert_eq!(found.len(), 2, "{name}: a0 = {a0}, n = {n}");
                for side in [Side::Left, Side::Right] {
                    let w = cuspidal_word(&g, a0, side, n).unwrap();
                    assert_eq!(w.n, n);
                    assert!(found.contains(&w.letters(&g)));
                }
            }
        }
    }
}

#[test]
fn reversal_duality() {
    for name in BUILTINS {
        let g = group(name);
        for a0 in 0..g.letters() {
            for n in 1..=12 {
                let w = cuspidal_word(&g, a0, Side::Right, n).unwrap().letters(&g);
                let rev: Vec<usize> = w.iter().rev().map(|&x| g.hat[x]).collect();
                assert_eq!(classify_cuspidal(&g, &rev).unwrap(), Classification::Left);
            }
        }
    }
}

#[test]
fn vertex_is_fixed_by_the_cycle() {
    for name in BUILTINS {
        let g = group(name);
        for a0 in 0..g.letters() {
            for side in [Side::Left, Side::Right] {
                let w = cuspidal_word(&g, a0, side, 3).unwrap();
                let cycle = g.cycle(a0, side == Side::Left);
                let f = g.word_disc(&cycle);
                assert!(close(f.apply_boundary(w.xi), w.xi, 1e-9));
                assert!((f.trace().abs() - 2.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn length_examples() {
    let g = group("gamma2");
    for a in 0..4 {
        assert_eq!(geometric_length(&CuspidalWord::singleton(&g, a)), 0.0);
        assert_eq!(geometric_length_direct(&g, &[a]).unwrap(), 0.0);
    }
    // the letter z + 2 repeated k + 1 times
    let a = locate(&g, C64::new(1.0, 0.0));
    for k in 1..=30 {
        let letters = vec![a; k + 1];
        let direct = geometric_length_direct(&g, &letters).unwrap();
        assert!((direct - 2.0 * k as f64).abs() < 1e-9, "k = {k}: {direct}");
        let side = if classify_cuspidal(&g, &letters).unwrap() == Classification::Left { Side::Left } else { Side::Right };
        let w = cuspidal_word(&g, a, side, k).unwrap();
        assert!((w.length - 2.0 * k as f64).abs() < 1e-9);
    }
}

#[test]
fn closed_form_lengths_match_the_chart() {
    for name in BUILTINS {
        let g = group(name);
        for w in enumerate_alphabet(&g, 30.0).unwrap() {
            let direct = geometric_length_direct(&g, &w.letters(&g)).unwrap();
            assert!((direct - w.length).abs() < 1e-8 * (1.0 + direct), "{name}: {} vs {direct}", w.length);
            assert_eq!(w.length == 0.0, w.n == 0);
        }
    }
}

#[test]
fn lengths_grow_linearly_in_the_period() {
    for name in BUILTINS {
        let g = group(name);
        for fam in families(&g).unwrap() {
            let p_len = fam.shift.abs();
            let mut worst = 0.0f64;
            for k in fam.k_min()..=200 {
                let w = fam.word(k);
                worst = worst.max((w.length - k as f64 * p_len).abs());
            }
            assert!(worst <= 2.0 * g.mu_max(), "{name}: deviation {worst}");
        }
    }
}

#[test]
fn decomposition_examples() {
    let g = group("gamma2");
    let w = cuspidal_word(&g, 0, Side::Left, 4).unwrap();
    let mut letters = w.letters(&g);
    // a letter breaking the cycle but still admissible
    let last = *letters.last().unwrap();
    let stop = (0..4)
        .find(|&x| x != g.hat[last] && x != next_letter(&g, last, Side::Left))
        .unwrap();
    letters.push(stop);
    let d = cuspidal_decompose(&g, &letters).unwrap();
    assert_eq!(d.pieces[0].word.n, 4);
    assert_eq!(d.pieces[0].word.ty, WordType::Left);
    assert_eq!(d.pieces[1].start, 5);
}

#[test]
fn decomposition_partitions_random_expansions() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for name in BUILTINS {
        let g = group(name);
        for _ in 0..100 {
            let word = expand(&g, boundary_point(rng.random::<f64>() * TAU), 60);
            let d = cuspidal_decompose(&g, &word).unwrap();
            let mut joined = Vec::new();
            for p in &d.pieces {
                assert_eq!(p.start, joined.len());
                joined.extend(p.word.letters(&g));
            }
            assert_eq!(joined, word);
            for pair in d.pieces.windows(2) {
                assert!(transition(&g, &pair[0].word, &pair[1].word));
                // maximality: the next letter does not extend the word
                let mut ext = pair[0].word.letters(&g);
                ext.push(pair[1].word.a0);
                let c = classify_cuspidal(&g, &ext).unwrap();
                assert!(c == Classification::NotCuspidal || pair[0].word.ty == WordType::Singleton && c == Classification::NotCuspidal);
            }
        }
    }
}

/// The last letter of one word followed by the next word can itself be
/// cuspidal; such pairs are still allowed.
#[test]
fn overlapping_cuspidal_pair_is_accepted() {
    let g = group("gamma2");
    let mut witnessed = false;
    for w in enumerate_alphabet(&g, 4.0).unwrap() {
        for w2 in enumerate_alphabet(&g, 4.0).unwrap() {
            if w2.n == 0 || !transition(&g, &w, &w2) {
                continue;
            }
            let mut tail = vec![w.last];
            tail.extend(w2.letters(&g));
            if check_admissible(&g, &tail).is_ok() && classify_cuspidal(&g, &tail).unwrap() != Classification::NotCuspidal {
                witnessed = true;
            }
        }
    }
    assert!(witnessed);
}

/// Transition `W → W'` iff `W∗a₀'` is admissible and not cuspidal.
fn transition_oracle(g: &GroupPresentation, w: &CuspidalWord, w2: &CuspidalWord) -> bool {
    let mut ext = w.letters(g);
    ext.push(w2.a0);
    check_admissible(g, &ext).is_ok() && classify_cuspidal(g, &ext).unwrap() == Classification::NotCuspidal
}

#[test]
fn transition_matches_the_admissibility_predicate() {
    for name in BUILTINS {
        let g = group(name);
        let words = enumerate_alphabet(&g, 8.0).unwrap();
        let m = TransitionMatrix::new(&g, words.clone());
        for (i, w) in words.iter().enumerate() {
            for (j, w2) in words.iter().enumerate() {
                let want = transition_oracle(&g, w, w2);
                assert_eq!(m.get(i, j), want, "{name}: {:?} -> {:?}", w.letters(&g), w2.letters(&g));
                assert_eq!(transition(&g, w, w2), w.domain(&g).contains(&w2.a0));
                if w2.a0 == g.hat[w.last] {
                    assert!(!m.get(i, j));
                }
            }
        }
    }
}

#[test]
fn domain_sizes() {
    for name in BUILTINS {
        let g = group(name);
        let n = g.letters();
        for w in enumerate_alphabet(&g, 6.0).unwrap() {
            let expect = if w.ty == WordType::Singleton { n - 3 } else { n - 2 };
            assert_eq!(w.domain(&g).len(), expect);
        }
    }
}

/// `[W]_E = F_W(domain(W))`: its ends agree with the cylinders of `W` followed
/// by the first and last domain letters.
#[test]
fn word_cylinder_is_the_image_of_the_domain() {
    for name in BUILTINS {
        let g = group(name);
        for w in enumerate_alphabet(&g, 10.0).unwrap() {
            let mut dom = w.domain(&g);
            // rotate so the run starts after a letter outside the domain
            let start = dom.iter().position(|&x| !dom.contains(&g.shift(x, -1))).unwrap();
            dom.rotate_left(start);
            let (first, last) = (dom[0], *dom.last().unwrap());
            // the domain letters are consecutive in the cyclic order
            for pair in dom.windows(2) {
                assert_eq!(g.shift(pair[0], 1), pair[1]);
            }
            let mut lw = w.letters(&g);
            lw.push(first);
            let (l, _) = cylinder(&g, &lw).unwrap();
            *lw.last_mut().unwrap() = last;
            let (_, r) = cylinder(&g, &lw).unwrap();
            assert!(close(w.f_w.apply_boundary(g.arcs[first].left), l, 1e-9), "{name}");
            assert!(close(w.f_w.apply_boundary(g.arcs[last].right), r, 1e-9), "{name}");
        }
    }
}

#[test]
fn alphabet_below_the_shortest_word_is_the_letters() {
    for name in BUILTINS {
        let g = group(name);
        let shortest = enumerate_alphabet(&g, 50.0)
            .unwrap()
            .iter()
            .map(|w| w.length)
            .filter(|&l| l > 0.0)
            .fold(f64::INFINITY, f64::min);
        let words = enumerate_alphabet(&g, shortest * 0.999).unwrap();
        assert_eq!(words.len(), g.letters());
        assert!(words.iter().all(|w| w.ty == WordType::Singleton));
        assert!(enumerate_alphabet(&g, 0.0).is_err());
        assert!(enumerate_alphabet(&g, -1.0).is_err());
    }
}

#[test]
fn alphabet_grows_linearly() {
    for name in BUILTINS {
        let g = group(name);
        for t in [50.0, 100.0, 200.0] {
            let small = enumerate_alphabet(&g, t).unwrap().len() as f64;
            let big = enumerate_alphabet(&g, 2.0 * t).unwrap().len() as f64;
            assert!((big / small - 2.0).abs() < 0.2, "{name}: T = {t}, ratio {}", big / small);
        }
    }
}

#[test]
fn alphabet_membership_by_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = 20.0;
    for name in BUILTINS {
        let g = group(name);
        let words = enumerate_alphabet(&g, t).unwrap();
        for _ in 0..500 {
            let a0 = rng.random_range(0..g.letters());
            let side = if rng.random::<bool>() { Side::Left } else { Side::Right };
            let n = rng.random_range(0..40);
            let w = cuspidal_word(&g, a0, side, n).unwrap();
            let letters = w.letters(&g);
            let present = words.iter().any(|x| x.letters(&g) == letters);
            let len = geometric_length_direct(&g, &letters).unwrap();
            assert_eq!(present, len <= t + 1e-9, "{name}: {letters:?} of length {len}");
        }
    }
}

#[test]
fn aperiodic_from_the_reported_threshold() {
    for (name, t0) in [("gamma2", 2.0), ("punctured_torus", 4.0)] {
        let g = group(name);
        let found = aperiodicity_threshold(&g, 40.0).unwrap().unwrap();
        assert!((found - t0).abs() < 1e-9, "{name}: {found}");
        for t in [t0, t0 + 0.5, 10.0, 25.0, 60.0] {
            let m = TransitionMatrix::new(&g, enumerate_alphabet(&g, t).unwrap());
            assert_eq!(m.check_aperiodicity(), (true, None), "{name}: T = {t}");
        }
    }
}

#[test]
fn letters_alone_are_not_aperiodic() {
    for name in BUILTINS {
        let g = group(name);
        let singles: Vec<CuspidalWord> = (0..g.letters()).map(|a| CuspidalWord::singleton(&g, a)).collect();
        let m = TransitionMatrix::new(&g, singles);
        let (ok, witness) = m.check_aperiodicity();
        assert!(!ok);
        let (i, j) = witness.unwrap();
        // no two-step path from i to j
        assert!((0..m.len()).all(|k| !(m.get(i, k) && m.get(k, j))));
    }
}

#[test]
fn torus_connecting_words_exist() {
    let g = group("punctured_torus");
    let (a, b, ah) = (0, 1, 2);
    let words = enumerate_alphabet(&g, 10.0).unwrap();
    let bridge = words.iter().find(|w| w.letters(&g) == vec![a, b, ah]).expect("(a, b, â) is in the alphabet");
    assert!(words.iter().any(|w| w.last == a && transition(&g, w, bridge)));
    assert!(words.iter().any(|w| w.a0 == b && transition(&g, bridge, w)));
}

/// Distance from the domain of `W` to the pole of `F_W` stays bounded away
/// from zero and infinity.
#[test]
fn poles_stay_away_from_domains() {
    for name in BUILTINS {
        let g = group(name);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for w in enumerate_alphabet(&g, 100.0).unwrap() {
            let Some(pole) = w.f_w.pole() else { continue };
            for x in w.domain(&g) {
                for k in 0..=32 {
                    let xi = g.arcs[x].point(g.arcs[x].len * k as f64 / 32.0);
                    let d = (xi - pole).norm();
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
            }
        }
        assert!(lo > 0.05 && hi < 20.0, "{name}: [{lo}, {hi}]");
    }
}
