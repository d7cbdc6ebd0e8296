//! Closed-form examples: a solution of `u_t + ¼u_x² = 0` on the open quadrant
//! that is continuous inside but has no limit at the corner `(0, 1)`, the
//! monotonicity of the energy gap of `t^γ`, and exhaustive optimality
//! evidence for `t^γ` in the limit functional.

use std::io::Write;

use crate::error::{ensure, invalid, Error, Result};
use crate::format::fmt_sig;
use crate::grid::DiscreteArc;
use crate::holder::Region;
use crate::value_solver::{evaluate_functional, CounterexampleSpec, BRUTE_FORCE_MAX_NODES, BRUTE_FORCE_MAX_POSITIONS};

/// `min{1, x²/(t−1)₊}` on `x, t > 0`, read as 1 where `t ≤ 1`.
pub fn parabola_solution(x: f64, t: f64) -> Result<f64> {
    ensure(x > 0.0 && t > 0.0, "point", || format!("({x}, {t}) is outside the open quadrant"))?;
    if t > 1.0 && x * x < t - 1.0 {
        Ok(x * x / (t - 1.0))
    } else {
        Ok(1.0)
    }
}

/// Limits of [`parabola_solution`] at the corner `(0, 1)`: along `t = 1` and
/// along `t = 1 + 2x²`, evaluated at `x = eps`.
pub fn corner_limits(eps: f64) -> Result<(f64, f64)> {
    Ok((parabola_solution(eps, 1.0)?, parabola_solution(eps, 1.0 + 2.0 * eps * eps)?))
}

/// Distance from the closed rectangle to the point `(x, t)`.
fn rect_distance(region: &Region, x: f64, t: f64) -> f64 {
    let dx = (region.x.0 - x).max(0.0).max(x - region.x.1);
    let dt = (region.t.0 - t).max(0.0).max(t - region.t.1);
    dx.hypot(dt)
}

/// Distance from `region` to the singular set: the parabola `t = 1 + x²`,
/// `x ≥ 0`, and the line `t = 1`.
pub fn singular_set_distance(region: &Region) -> f64 {
    let line = if region.t.0 > 1.0 {
        region.t.0 - 1.0
    } else if region.t.1 < 1.0 {
        1.0 - region.t.1
    } else {
        0.0
    };
    // Beyond x_far the parabola is farther than the line distance from the box.
    let x_far = region.x.1 + region.t.1.max(1.0).sqrt() + 1.0;
    let steps = 200_000;
    let para = (0..=steps)
        .map(|i| {
            let x = x_far * i as f64 / steps as f64;
            rect_distance(region, x, 1.0 + x * x)
        })
        .fold(f64::INFINITY, f64::min);
    // sampling spacing on the curve is below x_far·(1 + 2x_far)/steps
    let slop = x_far * (1.0 + 2.0 * x_far) / steps as f64;
    line.min((para - slop).max(0.0))
}

/// Largest `|u_t + ¼u_x²|` over a 101×101 sample of `region`, with central
/// differences of step `h`.
pub fn residual_check(u: impl Fn(f64, f64) -> f64, region: &Region, margin: f64, h: f64) -> Result<f64> {
    ensure(region.x.0 < region.x.1 && region.t.0 < region.t.1, "region", || format!("empty region {region}"))?;
    ensure(margin > 0.0, "margin", || format!("need margin > 0, got {margin}"))?;
    ensure(h > 0.0 && h <= margin / 10.0, "h", || format!("need 0 < h <= margin/10 = {}, got {h}", margin / 10.0))?;
    ensure(region.x.0 - h > 0.0 && region.t.0 - h > 0.0, "region", || {
        format!("stencil of {region} leaves the open quadrant")
    })?;
    let d = singular_set_distance(region);
    if d < margin {
        return Err(invalid("region", format!("{region} is within {d} of the singular set, margin {margin}")));
    }
    let m = 101;
    let mut worst: f64 = 0.0;
    for i in 0..m {
        let x = region.x.0 + (region.x.1 - region.x.0) * i as f64 / (m - 1) as f64;
        for k in 0..m {
            let t = region.t.0 + (region.t.1 - region.t.0) * k as f64 / (m - 1) as f64;
            let ut = (u(x, t + h) - u(x, t - h)) / (2.0 * h);
            let ux = (u(x + h, t) - u(x - h, t)) / (2.0 * h);
            worst = worst.max((ut + 0.25 * ux * ux).abs());
        }
    }
    Ok(worst)
}

/// `X_t(h)` at each sampled `h`, in increasing `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Xi0Check {
    pub gamma: f64,
    pub t: f64,
    pub samples: Vec<(f64, f64)>,
    /// `−max X`; positive when every sample is negative.
    pub sign_margin: f64,
    /// `min (X(h_i) − X(h_{i+1}))` over consecutive increasing `h`; positive
    /// when `X` is strictly decreasing. `+∞` for a single sample.
    pub monotone_margin: f64,
}

impl Xi0Check {
    pub fn holds(&self) -> bool {
        self.sign_margin > 0.0 && self.monotone_margin > 0.0
    }
}

/// `X_t(h) = ∫_t^{t+h} (γs^{γ−1})² ds − (2/h)(ξ₀(t+h) − ξ₀(t))²` with
/// `ξ₀(s) = s^γ`; the integral is taken in closed form.
pub fn xi0_gap(gamma: f64, t: f64, h: f64) -> f64 {
    let e = 2.0 * gamma - 1.0;
    let energy = gamma * gamma / e * ((t + h).powf(e) - t.powf(e));
    let rise = (t + h).powf(gamma) - t.powf(gamma);
    energy - 2.0 / h * rise * rise
}

/// Signs and monotonicity of [`xi0_gap`] over `hs` (any order).
pub fn xi0_decreasing_check(gamma: f64, t: f64, hs: &[f64]) -> Result<Xi0Check> {
    let gamma_min = 2.0 - std::f64::consts::SQRT_2;
    ensure(gamma > gamma_min && gamma < 1.0, "gamma", || {
        format!("need gamma in (2 - sqrt 2, 1), got {gamma}")
    })?;
    ensure((0.0..1.0).contains(&t), "t", || format!("need t in [0, 1), got {t}"))?;
    if hs.is_empty() {
        return Err(Error::Empty("h grid"));
    }
    for &h in hs {
        ensure(h > 0.0 && h <= 1.0 - t + 1e-12, "h", || format!("need h in (0, {}], got {h}", 1.0 - t))?;
    }
    let mut hs = hs.to_vec();
    hs.sort_by(f64::total_cmp);
    let samples: Vec<(f64, f64)> = hs.iter().map(|&h| (h, xi0_gap(gamma, t, h))).collect();
    let sign_margin = -samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let monotone_margin = samples
        .windows(2)
        .map(|w| w[0].1 - w[1].1)
        .fold(f64::INFINITY, f64::min);
    Ok(Xi0Check {
        gamma,
        t,
        samples,
        sign_margin,
        monotone_margin,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityReport {
    /// Limit functional on `t^γ` sampled at the nodes.
    pub xi0_value: f64,
    pub best_value: f64,
    pub best_arc: DiscreteArc,
    /// Cheapest arc with some node off the graph of `t^γ`.
    pub best_off_graph_value: f64,
    pub best_off_graph_arc: DiscreteArc,
    pub position_step: f64,
}

impl OptimalityReport {
    /// `best off-graph − J[t^γ]`.
    pub fn margin(&self) -> f64 {
        self.best_off_graph_value - self.xi0_value
    }
}

/// Exhaustive search of the limit functional (coefficient 1 within half a
/// position cell of `t^γ`, else 2; terminal cost 0 within half a cell of 1,
/// else `G`) over piecewise-linear arcs from 0 at `nodes` equally spaced times
/// whose later nodes lie on `positions` equally spaced points of `[0, 1]`.
///
/// The search is a depth-first walk in increasing position order, so among
/// equal values the lexicographically smallest arc wins.
pub fn optimality_bruteforce(spec: &CounterexampleSpec, nodes: usize, positions: usize) -> Result<OptimalityReport> {
    spec.validate()?;
    if nodes > BRUTE_FORCE_MAX_NODES || positions > BRUTE_FORCE_MAX_POSITIONS {
        return Err(Error::TooLarge(format!(
            "{nodes} nodes x {positions} positions (limits {BRUTE_FORCE_MAX_NODES} x {BRUTE_FORCE_MAX_POSITIONS})"
        )));
    }
    if nodes < 2 || positions < 2 {
        return Err(Error::DegenerateGrid(format!("{nodes} nodes x {positions} positions")));
    }
    let step = 1.0 / (positions - 1) as f64;
    let tol = 0.5 * step;
    let times: Vec<f64> = (0..nodes).map(|k| k as f64 / (nodes - 1) as f64).collect();
    let grid: Vec<f64> = (0..positions).map(|i| i as f64 * step).collect();
    let problem = spec.limit_problem(tol).with_window(0.0, 1.0)?;
    let xi0_arc = DiscreteArc::from_fn(times.clone(), |t| spec.xi0(t))?;
    let xi0_value = evaluate_functional(&problem, &xi0_arc)?;

    struct Walk<'a> {
        spec: &'a CounterexampleSpec,
        times: &'a [f64],
        grid: &'a [f64],
        tol: f64,
        path: Vec<f64>,
        best: (f64, Vec<f64>),
        best_off: (f64, Vec<f64>),
    }

    impl Walk<'_> {
        fn descend(&mut self, k: usize, acc: f64, off: bool) {
            let x = self.path[k];
            if k + 1 == self.times.len() {
                let total = acc + self.spec.limit_terminal(x, self.tol);
                let off = off || (x - 1.0).abs() > self.tol;
                if total < self.best.0 {
                    self.best = (total, self.path.clone());
                }
                if off && total < self.best_off.0 {
                    self.best_off = (total, self.path.clone());
                }
                return;
            }
            let a = self.spec.limit_running(x, self.times[k], self.tol);
            let off = off || a > 1.0;
            let dt = self.times[k + 1] - self.times[k];
            for i in 0..self.grid.len() {
                let y = self.grid[i];
                let v = (y - x) / dt;
                self.path.push(y);
                self.descend(k + 1, acc + dt * a * v * v, off);
                self.path.pop();
            }
        }
    }

    let mut walk = Walk {
        spec,
        times: &times,
        grid: &grid,
        tol,
        path: vec![0.0],
        best: (f64::INFINITY, Vec::new()),
        best_off: (f64::INFINITY, Vec::new()),
    };
    walk.descend(0, 0.0, false);
    let (best, best_off) = (walk.best, walk.best_off);
    Ok(OptimalityReport {
        xi0_value,
        best_value: best.0,
        best_arc: DiscreteArc::new(times.clone(), best.1)?,
        best_off_graph_value: best_off.0,
        best_off_graph_arc: DiscreteArc::new(times, best_off.1)?,
        position_step: step,
    })
}

/// One line of a gallery file: `check,params,value,margin`.
#[derive(Debug, Clone, PartialEq)]
pub struct GalleryRow {
    pub check: String,
    pub params: String,
    pub value: f64,
    pub margin: f64,
}

impl GalleryRow {
    pub fn new(check: impl Into<String>, params: impl Into<String>, value: f64, margin: f64) -> Self {
        Self {
            check: check.into(),
            params: params.into(),
            value,
            margin,
        }
    }
}

/// Parameters are written verbatim and must not contain commas.
pub fn write_gallery_rows<W: Write>(rows: &[GalleryRow], mut w: W) -> Result<()> {
    writeln!(w, "check,params,value,margin")?;
    for r in rows {
        if r.params.contains(',') || r.check.contains(',') {
            return Err(invalid("params", format!("commas are not allowed: {}", r.params)));
        }
        writeln!(w, "{},{},{},{}", r.check, r.params, fmt_sig(r.value), fmt_sig(r.margin))?;
    }
    Ok(())
}
