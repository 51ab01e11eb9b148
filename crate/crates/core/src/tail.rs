//! Sums `Σ_{k ≥ K} f(k)` of slowly decaying smooth terms by Euler–Maclaurin.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

/// Number of graded panels in the integral part.
const PANELS: i32 = 12;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(16).unwrap()))
}

/// `∫_K^∞ f(k) dk` for `f(k) ~ k^{-decay}`, `decay > 1`.
///
/// The substitution `k = K·w^{-m}` with `m = 3/(decay − 1)` turns the
/// integrand into `~ w²` on `(0, 1]`.
pub fn tail_integral<F: Fn(f64) -> f64>(f: &F, k0: f64, decay: f64) -> f64 {
    assert!(decay > 1.0, "tail must be summable");
    let m = 3.0 / (decay - 1.0);
    let gl = rule();
    let integrand = |w: f64| {
        if w <= 0.0 {
            return 0.0;
        }
        let k = k0 * w.powf(-m);
        f(k) * m * k / w
    };
    let mut total = 0.0;
    let mut lo = 0.0;
    for p in (0..=PANELS).rev() {
        let hi = 2f64.powi(-p);
        total += gl.integrate(lo, hi, integrand);
        lo = hi;
    }
    total
}

/// `Σ_{j ≥ 0} f(K + j)`.
pub fn tail_sum<F: Fn(f64) -> f64>(f: F, k0: f64, decay: f64) -> f64 {
    // seven-point stencils; the five-point f′ leaves ~f⁽⁵⁾/360 ≈ 5e−13 at K = 64
    let v: Vec<f64> = (-3..=3).map(|j| f(k0 + j as f64)).collect();
    let d1 = (-v[0] + 9.0 * v[1] - 45.0 * v[2] + 45.0 * v[4] - 9.0 * v[5] + v[6]) / 60.0;
    let d3 = (v[0] - 8.0 * v[1] + 13.0 * v[2] - 13.0 * v[4] + 8.0 * v[5] - v[6]) / 8.0;
    let f0 = v[3];
    tail_integral(&f, k0, decay) + f0 / 2.0 - d1 / 12.0 + d3 / 720.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(f: impl Fn(f64) -> f64, k0: usize, n: usize) -> f64 {
        // reversed for accuracy; remainder of k^-2 after n terms ~ 1/n
        (k0..n).rev().map(|k| f(k as f64)).sum()
    }

    #[test]
    fn basel_tail() {
        // Σ_{k≥1} 1/k² = π²/6, so the tail from 64 is π²/6 − Σ_{k<64}.
        let head: f64 = (1..64).map(|k| 1.0 / (k as f64).powi(2)).sum();
        let want = std::f64::consts::PI.powi(2) / 6.0 - head;
        let got = tail_sum(|k| k.powi(-2), 64.0, 2.0);
        assert!((got - want).abs() < 1e-13, "{got} vs {want}");
    }

    #[test]
    fn shifted_power_tail() {
        let f = |k: f64| (k + 0.3).powf(-2.4);
        let got = tail_sum(f, 80.0, 2.4);
        let near = direct(f, 80, 2_000_000);
        let far = tail_integral(&f, 2_000_000.0, 2.4) + f(2_000_000.0) / 2.0;
        assert!((got - near - far).abs() < 1e-13);
    }
}
