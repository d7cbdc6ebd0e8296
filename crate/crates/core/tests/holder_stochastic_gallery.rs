use holder_hj::gallery::{singular_set_distance, xi0_gap};
use holder_hj::holder::{theorem_exponents, ScaleWindow};
use holder_hj::reverse_holder::min_hypothesis_constant;
use holder_hj::stochastic::{martingale_deviation, stochastic_revholder_check};
use holder_hj::*;
use proptest::prelude::*;

fn bumpy(nx: usize) -> GridFunction2D {
    let x = UniformGrid::new(-1.0, 1.0, nx).unwrap();
    let t = UniformGrid::new(0.0, 1.0, 21).unwrap();
    GridFunction2D::from_fn(x, t, |x, t| (x - 0.3 * t).abs().powf(0.4) + 0.2 * (4.0 * x).sin() * t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn seminorms_scale_with_the_function(lambda in -5.0f64..5.0, alpha in 0.1f64..1.0) {
        let u = bumpy(201);
        let scaled = GridFunction2D::new(*u.x_grid(), *u.t_grid(), u.values().iter().map(|v| lambda * v).collect()).unwrap();
        let r = Region::whole(&u);
        let w = ScaleWindow::new(0.05, 1.0);
        for dir in [Direction::Space, Direction::Time] {
            let a = holder_seminorm(&u, alpha, dir, &r, &w).unwrap();
            let b = holder_seminorm(&scaled, alpha, dir, &r, &w).unwrap();
            prop_assert!((b - lambda.abs() * a).abs() <= 1e-12 * (1.0 + b));
            let a = lipschitz_constant(&u, dir, &r).unwrap();
            let b = lipschitz_constant(&scaled, dir, &r).unwrap();
            prop_assert!((b - lambda.abs() * a).abs() <= 1e-12 * (1.0 + b));
        }
    }

    #[test]
    fn seminorm_grows_with_the_exponent(a1 in 0.05f64..1.0, gap in 0.0f64..0.5) {
        let u = bumpy(201);
        let r = Region::whole(&u);
        let w = ScaleWindow::new(0.02, 1.0);
        let lo = holder_seminorm(&u, a1, Direction::Space, &r, &w).unwrap();
        let hi = holder_seminorm(&u, (a1 + gap).min(1.0), Direction::Space, &r, &w).unwrap();
        prop_assert!(hi >= lo * (1.0 - 1e-12));
    }

    #[test]
    fn theorem_exponents_are_ordered(p in 1.01f64..5.0, extra in 1e-3f64..20.0) {
        let (space, time) = theorem_exponents(p + extra, p).unwrap();
        prop_assert!(0.0 < time && time < space && space < 1.0);
    }
}

#[test]
fn pinning_tightens_with_dt() {
    let spec = BridgeSpec::new(vec![0.0], vec![0.5], 1.0, 1.5).unwrap();
    let sde = SdeSpec::scalar(1.0).unwrap();
    let mut last = f64::INFINITY;
    for dt in [1e-2, 5e-3, 2.5e-3, 1.25e-3] {
        let e = simulate_bridge(&spec, &sde, dt, 4000, 9).unwrap();
        let ends: Vec<f64> = (0..e.path_count()).map(|i| *e.path(i).last().unwrap() - 0.5).collect();
        let mean = ends.iter().sum::<f64>() / ends.len() as f64;
        let var = ends.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (ends.len() - 1) as f64;
        assert!(var < last, "dt={dt}: {var} >= {last}");
        last = var;
    }
}

#[test]
fn zero_noise_matches_deterministic_hypothesis() {
    // ζ = γt^{γ−1} as cell averages, replicated over a handful of paths
    let gamma: f64 = 0.75;
    let p = 1.5;
    let m = 2000;
    let times: Vec<f64> = (0..=m).map(|k| k as f64 / m as f64).collect();
    let cells: Vec<f64> = times.windows(2).map(|w| (w[1].powf(gamma) - w[0].powf(gamma)) * m as f64).collect();
    let ens = PathEnsemble::from_controls(times, vec![cells.clone(); 4]).unwrap();
    let r = stochastic_revholder_check(&ens, p, 0.0).unwrap();
    let phi = SampledFunction1D::new(0.0, 1.0, p, cells).unwrap();
    let det = min_hypothesis_constant(&phi, Anchor::Left).unwrap();
    assert!((r.a_max - det).abs() < 1e-6 * det, "{} vs {det}", r.a_max);
    let closed = gamma.powf(p) / (1.0 + p * (gamma - 1.0));
    assert!((r.a_max - closed).abs() < 0.01 * closed, "{} vs {closed}", r.a_max);
    assert!(r.margin >= 0.0, "{r:?}");
    assert!(!r.degenerate);
}

#[test]
fn stochastic_conclusion_holds_for_bridges() {
    let spec = BridgeSpec::new(vec![0.0], vec![0.0], 1.0, 1.5).unwrap();
    let sde = SdeSpec::scalar(1.0).unwrap();
    let e = simulate_bridge(&spec, &sde, 1e-2, 2000, 4).unwrap();
    let r = stochastic_revholder_check(&e, 1.5, 0.0).unwrap();
    assert!(r.margin >= 0.0, "{r:?}");
    let th = r.theta.unwrap();
    assert!(th.theta > 1.5 && th.theta < 2.0);
}

#[test]
fn zero_drift_is_a_martingale() {
    let sde = SdeSpec::scalar(0.7).unwrap();
    let e = simulate_controlled(&sde, &ControlPolicy::Zero, &[0.0], 1.0, 0.01, 4000, 21).unwrap();
    let z = martingale_deviation(&e);
    assert!(z <= 3.0, "{z}");
}

#[test]
fn parabola_solution_is_continuous_inside() {
    // |∇u| ≤ 2x/(t−1) + x²/(t−1)² inside the parabola, 0 outside: bound jumps
    // on a grid over [0.05, 2] × [1.05, 3] by the gradient bound times the step.
    let (nx, nt) = (400, 400);
    let (x0, x1, t0, t1) = (0.05, 2.0, 1.05, 3.0);
    let (hx, ht) = ((x1 - x0) / nx as f64, (t1 - t0) / nt as f64);
    let grad = |x: f64, t: f64| 2.0 * x / (t - 1.0) + x * x / ((t - 1.0) * (t - 1.0));
    for i in 0..nx {
        for k in 0..nt {
            let (x, t) = (x0 + i as f64 * hx, t0 + k as f64 * ht);
            let u = parabola_solution(x, t).unwrap();
            let bound = grad(x + hx, t) * hx + grad(x + hx, t) * ht + 1e-12;
            assert!((parabola_solution(x + hx, t).unwrap() - u).abs() <= bound);
            assert!((parabola_solution(x, t + ht).unwrap() - u).abs() <= bound);
        }
    }
}

#[test]
fn constant_region_has_zero_residual() {
    let r = residual_check(|_, _| 0.37, &Region::new((0.3, 0.9), (0.2, 0.8)), 0.1, 1e-3).unwrap();
    assert_eq!(r, 0.0);
    assert!(singular_set_distance(&Region::new((0.3, 0.9), (0.2, 0.8))) >= 0.2 - 1e-9);
}

#[test]
fn gap_negative_on_a_grid() {
    for gamma in [0.6, 0.7, 0.8, 0.9] {
        for i in 0..20 {
            let t = 0.95 * i as f64 / 19.0;
            let hs: Vec<f64> = (1..=20).map(|j| (1.0 - t) * j as f64 / 20.0).collect();
            let c = xi0_decreasing_check(gamma, t, &hs).unwrap();
            assert!(c.holds(), "gamma={gamma} t={t}: {c:?}");
            for &(h, x) in &c.samples {
                assert!((x - xi0_gap(gamma, t, h)).abs() < 1e-15);
            }
        }
    }
}
