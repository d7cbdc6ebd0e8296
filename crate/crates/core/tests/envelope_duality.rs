use holder_hj::envelope::{one_sided_upper_bound, HopfLaxOptions};
use holder_hj::{hopf_lax_step, GrowthEnvelope, UniformGrid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `sup_{z ≥ 0} (z·w − C|z|^q)` by golden-section search on the concave
/// objective, bracketed by doubling.
fn conjugate_by_search(c: f64, q: f64, w: f64) -> f64 {
    let w = w.abs();
    let f = |z: f64| z * w - c * z.powf(q);
    let mut hi = 1.0;
    while f(2.0 * hi) > f(hi) || hi < 1.0 {
        hi *= 2.0;
    }
    let (mut a, mut b) = (0.0, 2.0 * hi);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if f(x1) < f(x2) {
            a = x1;
        } else {
            b = x2;
        }
    }
    f(0.5 * (a + b))
}

#[test]
fn upper_conjugate_matches_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..50 {
        let q = rng.random_range(1.05..=4.0);
        let delta = rng.random_range(1.0..=4.0);
        let env = GrowthEnvelope::derive(q, delta, 0.0, 0.0, 0.0).unwrap();
        for _ in 0..20 {
            let w = rng.random_range(-5.0..5.0);
            // H₊(z) = δ|z|^q, whose conjugate is C₊|w|^p
            let expected = conjugate_by_search(delta, q, w);
            let got = env.upper_conjugate(w.abs());
            assert!(
                (got - expected).abs() <= 1e-3 * (1.0 + expected.abs()),
                "q={q} delta={delta} w={w}: {got} vs {expected}"
            );
            let lower = conjugate_by_search(1.0 / delta, q, w);
            let got = env.lower_conjugate(w.abs());
            assert!((got - lower).abs() <= 1e-3 * (1.0 + lower.abs()));
        }
    }
}

#[test]
fn quadratic_case_constants() {
    let env = GrowthEnvelope::derive(2.0, 1.0, 0.0, 0.0, 0.0).unwrap();
    assert!((env.c_plus - 0.25).abs() < 1e-12);
    assert!((env.c_minus - 0.25).abs() < 1e-12);
    let v = one_sided_upper_bound(0.0, &[0.0], &[1.0], 2.0, 1.0, &env).unwrap();
    assert!((v - 0.25).abs() < 1e-12);
}

fn grid() -> UniformGrid {
    UniformGrid::new(-1.0, 1.0, 41).unwrap()
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 41)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hopf_lax_is_monotone(u in values(), bump in prop::collection::vec(0.0f64..1.0, 41), q in 1.2f64..4.0, delta in 1.0f64..4.0) {
        let env = GrowthEnvelope::derive(q, delta, 0.0, 0.0, 0.0).unwrap();
        let v: Vec<f64> = u.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let opts = HopfLaxOptions { window: 2.0, refine: false };
        let a = hopf_lax_step(&grid(), &u, 0.1, env.upper_kernel(), &opts).unwrap();
        let b = hopf_lax_step(&grid(), &v, 0.1, env.upper_kernel(), &opts).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!(x <= y);
        }
    }

    #[test]
    fn hopf_lax_commutes_with_constants(u in values(), c in -3.0f64..3.0, q in 1.2f64..4.0) {
        let env = GrowthEnvelope::derive(q, 2.0, 0.0, 0.0, 0.0).unwrap();
        let shifted: Vec<f64> = u.iter().map(|v| v + c).collect();
        let opts = HopfLaxOptions { window: 0.5, refine: false };
        let a = hopf_lax_step(&grid(), &u, 0.05, env.lower_kernel(), &opts).unwrap();
        let b = hopf_lax_step(&grid(), &shifted, 0.05, env.lower_kernel(), &opts).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x + c - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn hopf_lax_matches_direct_minimum(u in values(), q in 1.2f64..4.0) {
        let env = GrowthEnvelope::derive(q, 1.5, 0.0, 0.0, 0.0).unwrap();
        let g = grid();
        let tau = 0.2;
        let opts = HopfLaxOptions { window: 10.0, refine: false };
        let got = hopf_lax_step(&g, &u, tau, env.upper_kernel(), &opts).unwrap();
        for i in 0..g.len() {
            let direct = (0..g.len())
                .map(|j| {
                    let d = (g.node(j) - g.node(i)).abs();
                    tau * env.c_plus * (d / tau).powf(env.p) + u[j]
                })
                .fold(f64::INFINITY, f64::min);
            prop_assert!((got.values[i] - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn one_sided_bound_scales(d in 0.01f64..3.0, s in 0.1f64..2.0, q in 1.1f64..4.0, delta in 1.0f64..4.0) {
        let env = GrowthEnvelope::derive(q, delta, 0.0, 0.0, 0.0).unwrap();
        let one = one_sided_upper_bound(0.0, &[0.0], &[d], s, 0.0, &env).unwrap();
        let two = one_sided_upper_bound(0.0, &[0.0], &[2.0 * d], s, 0.0, &env).unwrap();
        prop_assert!((two / one - 2f64.powf(env.p)).abs() < 1e-9);
    }
}
