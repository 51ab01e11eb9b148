use cuspdim::dimension::*;
use cuspdim::group::GroupPresentation;
use cuspdim::linalg::PowerOptions;
use cuspdim::moebius::RealMoebius;
use cuspdim::transfer::{Cutoff, TransferModel};

const BUILTINS: [&str; 2] = ["gamma2", "punctured_torus"];
const TS: [f64; 4] = [25.0, 50.0, 100.0, 200.0];

fn group(name: &str) -> GroupPresentation {
    GroupPresentation::builtin(name).unwrap()
}

fn root(model: &TransferModel, t: f64, tol: f64) -> BowenRoot {
    let p = FuchsianProblem { model, cutoff: Cutoff::Within(t) };
    solve_bowen(&p, 0.01, 1.0, &BowenOptions { tol, ..Default::default() }).unwrap()
}

fn spectral(model: &TransferModel) -> (f64, f64, f64) {
    let e = model.eigen(1.0, Cutoff::All, None, PowerOptions::default()).unwrap();
    let delta = compute_delta(model, &e).unwrap();
    let beta = beta_closed_form(model, &e).unwrap();
    (delta, beta, theta_spectral(delta, beta).unwrap())
}

#[test]
fn dimensions_increase_towards_one() {
    for name in BUILTINS {
        let g = group(name);
        let model = build_model(&g, 128, Scheme::Refined).unwrap();
        let rows = dimension_rows(&model, &TS, &BowenOptions::default()).unwrap();
        for r in &rows {
            assert!(r.s > 0.0 && r.s < 1.0, "{name}: {r:?}");
            assert!(r.residual < 1e-10);
        }
        assert!(rows.windows(2).all(|p| p[0].s < p[1].s), "{name}: {rows:?}");
        // 1 − s_T is of order 1/T
        let scaled: Vec<f64> = rows.iter().map(|r| r.t * (1.0 - r.s)).collect();
        assert!(scaled.iter().all(|&x| x > 0.2 && x < 2.0), "{name}: {scaled:?}");
    }
}

#[test]
fn bowen_root_contract() {
    let g = group("gamma2");
    let model = TransferModel::new(&g, 64).unwrap();
    let coarse = root(&model, 25.0, 1e-6);
    let fine = root(&model, 25.0, 1e-8);
    assert!((coarse.lambda - 1.0).abs() < 1e-6);
    assert!((fine.lambda - 1.0).abs() < 1e-8);
    assert!((coarse.s - fine.s).abs() < 1e-6);
    // λ is decreasing in s
    let p = FuchsianProblem { model: &model, cutoff: Cutoff::Within(25.0) };
    let lo = p.eigen(fine.s - 0.01, None, PowerOptions::default()).unwrap().lambda;
    let hi = p.eigen(fine.s + 0.01, None, PowerOptions::default()).unwrap().lambda;
    assert!(lo > 1.0 && hi < 1.0);
    // a bracket that misses the root
    assert!(solve_bowen(&p, 0.99, 1.0, &BowenOptions::default()).is_err());
}

#[test]
fn transfer_roots_sit_in_pressure_brackets() {
    for name in BUILTINS {
        let g = group(name);
        let model = build_model(&g, 128, Scheme::Refined).unwrap();
        for (t, depth) in [(4.0, 3), (8.0, 3), (25.0, 2)] {
            let s = root(&model, t, 1e-11).s;
            let shallow = cylinder_pressure_dim(&g, t, 1).unwrap();
            let deep = cylinder_pressure_dim(&g, t, depth).unwrap();
            println!("{name} T = {t}: s_T = {s}, depth 1 {shallow:?}, depth {depth} {deep:?}");
            assert!(shallow.s_inf <= deep.s_inf && deep.s_sup <= shallow.s_sup);
            assert!(deep.s_inf <= s && s <= deep.s_sup, "{name}: T = {t}");
        }
    }
    assert!(cylinder_pressure_dim(&group("gamma2"), 25.0, 0).is_err());
    assert!(cylinder_pressure_dim(&group("gamma2"), 100.0, 6).is_err());
}

#[test]
fn pressure_root_single_branch() {
    // four branches of ratio 1/9: 4·9^{-s} = 1
    let r = pressure_root(&[(1.0f64 / 9.0).ln(); 4]).unwrap();
    assert!((r - 4f64.ln() / 9f64.ln()).abs() < 1e-12);
    assert!(pressure_root(&[0.0]).is_err());
}

#[test]
fn delta_and_beta() {
    for name in BUILTINS {
        let g = group(name);
        let model = build_model(&g, 128, Scheme::Refined).unwrap();
        let (delta, beta, theta) = spectral(&model);
        assert!(delta < 0.0 && beta > 0.0 && theta > 0.0);
        // δ is the slope of λ(s, ∞) at s = 1
        let h = 1e-4;
        let l = |s| model.eigen(s, Cutoff::All, None, PowerOptions::default()).unwrap().lambda;
        let slope = (l(1.0 + h) - l(1.0 - h)) / (2.0 * h);
        assert!((slope / delta - 1.0).abs() < 0.02, "{name}: {slope} vs {delta}");
        // grid doubling
        let finer = build_model(&g, 256, Scheme::Refined).unwrap();
        let (d2, b2, _) = spectral(&finer);
        assert!((d2 - delta).abs() < 1e-4, "{name}: {delta} vs {d2}");
        assert!((b2 / beta - 1.0).abs() < 1e-3, "{name}: {beta} vs {b2}");
    }
}

#[test]
fn beta_limit_matches_closed_form() {
    for name in BUILTINS {
        let g = group(name);
        let model = build_model(&g, 128, Scheme::Refined).unwrap();
        let e = model.eigen(1.0, Cutoff::All, None, PowerOptions::default()).unwrap();
        let beta = beta_closed_form(&model, &e).unwrap();
        let limit = beta_limit(&model, &e, &BETA_CUTOFFS).unwrap();
        println!("{name}: β = {beta}, limit {limit:?}");
        let ys: Vec<f64> = limit.values.iter().map(|v| v.1).collect();
        let gaps: Vec<f64> = ys.windows(2).map(|p| (p[1] - p[0]).abs()).collect();
        assert!(gaps.windows(2).all(|p| p[1] < p[0]), "{name}: {ys:?}");
        // ∫Δ g dμ halves when T doubles
        for p in limit.values.windows(2) {
            let ratio = (p[0].1 / p[0].0) / (p[1].1 / p[1].0);
            assert!((ratio - 2.0).abs() < 0.2, "{name}: {ratio}");
        }
        assert!((limit.extrapolated / beta - 1.0).abs() < 0.01, "{name}: {} vs {beta}", limit.extrapolated);
        assert!(beta_limit(&model, &e, &[]).is_err());
    }
}

#[test]
fn theta_signs() {
    assert!(theta_spectral(-1.0, 0.0).is_err());
    assert!(theta_spectral(0.0, 1.0).is_err());
    assert!((theta_spectral(-2.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn regression_contract() {
    let ts = [25.0, 50.0, 100.0, 200.0];
    let s: Vec<f64> = ts.iter().map(|t| 1.0 - 0.61 / t).collect();
    let r = theta_regression(&ts, &s).unwrap();
    assert!((r.intercept - 0.61).abs() < 1e-10);
    assert!(r.residuals.iter().all(|x| x.abs() < 1e-12));
    assert!(theta_regression(&ts[..3], &s[..3]).is_err());
    assert!(theta_regression(&[25.0, 30.0, 40.0, 50.0], &s).is_err());
    let wrong_sign: Vec<f64> = ts.iter().map(|t| 1.0 + 0.5 / t).collect();
    assert!(theta_regression(&ts, &wrong_sign).is_err());
}

/// Both estimates of `Θ`, and the fit is already asymptotic.
#[test]
fn theta_estimates_agree() {
    for name in BUILTINS {
        let g = group(name);
        let model = build_model(&g, 128, Scheme::Refined).unwrap();
        let (_, _, theta) = spectral(&model);
        let ts = [25.0, 50.0, 100.0, 200.0, 400.0];
        let rows = dimension_rows(&model, &ts, &BowenOptions::default()).unwrap();
        let s: Vec<f64> = rows.iter().map(|r| r.s).collect();
        let full = theta_regression(&ts[..4], &s[..4]).unwrap().intercept;
        let tail = theta_regression(&ts[1..], &s[1..]).unwrap().intercept;
        println!("{name}: spectral {theta}, fit {full}, fit without T = 25 {tail}");
        assert!((full / theta - 1.0).abs() < 0.1, "{name}");
        assert!((tail / full - 1.0).abs() < 0.05, "{name}");
    }
}

/// Changing every cusp representative `A_k` to `A_k·diag(u, 1/u)` scales
/// `Θ` by `u⁻²`.
#[test]
fn theta_scale_covariance() {
    let g = group("gamma2");
    let u = 2.0;
    let scale = RealMoebius::new(u, 0.0, 0.0, 1.0 / u);
    let cusps: Vec<RealMoebius> = g.cusps.iter().map(|c| *c * scale).collect();
    let h = GroupPresentation::new("gamma2-scaled", g.labels.clone(), g.hat.clone(), g.gens.clone(), cusps).unwrap();
    let theta = spectral(&build_model(&g, 64, Scheme::Refined).unwrap()).2;
    let scaled = spectral(&build_model(&h, 64, Scheme::Refined).unwrap()).2;
    println!("Θ = {theta}, scaled {scaled}");
    assert!((scaled / theta * u * u - 1.0).abs() < 0.02, "{theta} -> {scaled}");
}
