use holder_hj::value_solver::{extract_optimal_arc, Interpolation, RowInterpolant};
use holder_hj::{solve_value_function, CounterexampleSpec, GridFunction2D, VariationalProblem};

/// Piecewise-linear interpolation written out independently of the crate.
fn lerp_row(x0: f64, h: f64, row: &[f64], y: f64) -> f64 {
    let s = ((y - x0) / h).clamp(0.0, (row.len() - 1) as f64);
    let j = (s.floor() as usize).min(row.len() - 2);
    let w = s - j as f64;
    row[j] * (1.0 - w) + row[j + 1] * w
}

/// Re-derives every row from the next one by minimizing over a dense sample
/// of `y` (16 points per cell over the whole window) and returns the largest
/// gap `oracle − solver`, plus the most negative one.
fn dp_defect(u: &GridFunction2D, problem: &VariationalProblem) -> (f64, f64) {
    let xg = u.x_grid();
    let tg = u.t_grid();
    let (x0, h, dt) = (xg.start(), xg.step(), tg.step());
    let dense: Vec<f64> = (0..=(xg.len() - 1) * 16).map(|m| x0 + m as f64 * h / 16.0).collect();
    let mut worst_above: f64 = 0.0;
    let mut worst_below: f64 = 0.0;
    for k in 0..tg.len() - 1 {
        let next = u.row(k + 1);
        let tk = tg.node(k);
        for i in 0..xg.len() {
            let x = xg.node(i);
            let c = problem.running(x, tk) / dt;
            let oracle = dense
                .iter()
                .map(|&y| c * (y - x) * (y - x) + lerp_row(x0, h, next, y))
                .fold(f64::INFINITY, f64::min);
            let gap = oracle - u.at(k, i);
            worst_above = worst_above.max(gap);
            worst_below = worst_below.min(gap);
        }
    }
    (worst_above, worst_below)
}

#[test]
fn recursion_reverified_independently() {
    let problem = VariationalProblem::new(|x, t| 1.0 + 0.5 * (3.0 * x + t).sin().abs(), |x| (x - 0.3).abs())
        .with_window(-1.0, 1.0)
        .unwrap();
    let sol = solve_value_function(&problem, 41, 21).unwrap();
    let (above, below) = dp_defect(&sol.u, &problem);
    // the solver minimizes exactly, so the dense sample can only do worse
    assert!(below >= -1e-12, "solver above its own recursion by {below}");
    assert!(above <= 2e-3, "dense oracle below solver by {above}");
}

#[test]
fn monotone_in_the_data() {
    let lo = VariationalProblem::new(|_, _| 0.8, |x| x * x).with_window(-1.0, 1.0).unwrap();
    let hi = VariationalProblem::new(|x, _| 0.8 + 0.5 * x.abs(), |x| x * x + 0.2 * (5.0 * x).cos().abs())
        .with_window(-1.0, 1.0)
        .unwrap();
    let a = solve_value_function(&lo, 81, 41).unwrap().u;
    let b = solve_value_function(&hi, 81, 41).unwrap().u;
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!(x <= y, "{x} > {y}");
    }
}

#[test]
fn family_values_increase_with_n() {
    let mut prev: Option<GridFunction2D> = None;
    for n in [1u32, 2, 4, 8] {
        let spec = CounterexampleSpec::new(n, 0.75, 1.5).unwrap();
        let u = solve_value_function(&spec.problem(), 101, 51).unwrap().u;
        if let Some(p) = &prev {
            for (x, y) in p.values().iter().zip(u.values()) {
                assert!(*x <= *y + 1e-12, "n = {n}: {x} > {y}");
            }
        }
        prev = Some(u);
    }
}

#[test]
fn quadratic_refinement_shrinks_the_change() {
    let problem = VariationalProblem::new(|_, _| 1.0, |x| (x - 1.0) * (x - 1.0));
    let exact = |x: f64, t: f64| (x - 1.0) * (x - 1.0) / (2.0 - t);
    let sizes = [51usize, 101, 201];
    let sols: Vec<GridFunction2D> = sizes
        .iter()
        .map(|&n| solve_value_function(&problem, n, n).unwrap().u)
        .collect();
    let probe: Vec<(f64, f64)> = (0..=20)
        .flat_map(|i| (0..=10).map(move |k| (-2.0 + 0.2 * i as f64, 0.1 * k as f64)))
        .collect();
    let change = |a: &GridFunction2D, b: &GridFunction2D| {
        probe
            .iter()
            .map(|&(x, t)| (a.interpolate(x, t) - b.interpolate(x, t)).abs())
            .fold(0.0, f64::max)
    };
    let c1 = change(&sols[0], &sols[1]);
    let c2 = change(&sols[1], &sols[2]);
    assert!(c2 <= c1, "{c2} > {c1}");
    let err = probe
        .iter()
        .map(|&(x, t)| (sols[2].interpolate(x, t) - exact(x, t)).abs())
        .fold(0.0, f64::max);
    assert!(err < 0.03, "{err}");
}

#[test]
fn extracted_arc_obeys_the_principle() {
    let spec = CounterexampleSpec::new(4, 0.75, 1.5).unwrap();
    for scheme in [Interpolation::Linear, Interpolation::MonotoneCubic] {
        let problem = spec.problem().with_interpolation(scheme);
        let u = solve_value_function(&problem, 201, 101).unwrap().u;
        let ex = extract_optimal_arc(&u, &problem, 0.0, 0.0).unwrap();
        assert_eq!(ex.boundary_hits, 0);
        // exact at the grid node where the arc starts, interpolation error after
        let (xg, dt) = (u.x_grid(), u.t_grid().step());
        let i0 = xg.nearest(0.0);
        let first = RowInterpolant::new(xg, u.row(1), scheme).step(0.0, problem.running(0.0, 0.0) / dt);
        assert_eq!(first.value, u.at(0, i0));
        assert_eq!(first.target, ex.arc.positions()[1]);
        assert!(ex.max_principle_defect < 0.01, "{scheme:?}: {}", ex.max_principle_defect);
    }
}

#[test]
fn cubic_scheme_is_second_order_on_the_benchmark() {
    let problem =
        VariationalProblem::new(|_, _| 1.0, |x| (x - 1.0) * (x - 1.0)).with_interpolation(Interpolation::MonotoneCubic);
    let exact = |x: f64, t: f64| (x - 1.0) * (x - 1.0) / (2.0 - t);
    let err = |n: usize| {
        let u = solve_value_function(&problem, n, n).unwrap().u;
        let mut worst: f64 = 0.0;
        for k in 0..u.t_grid().len() {
            for i in 0..u.x_grid().len() {
                let (x, t) = (u.x_grid().node(i), u.t_grid().node(k));
                worst = worst.max((u.at(k, i) - exact(x, t)).abs());
            }
        }
        worst
    };
    let (e1, e2) = (err(101), err(201));
    assert!(e2 < 0.4 * e1, "{e1} -> {e2}");
}
