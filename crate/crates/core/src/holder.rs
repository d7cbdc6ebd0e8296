//! Lipschitz and Hölder measurements on grid functions, and the arc energy
//! inequalities satisfied by optimal arcs.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::envelope::GrowthEnvelope;
use crate::error::{ensure, invalid, Error, Result};
use crate::format::fmt_sig;
use crate::grid::{DiscreteArc, GridFunction2D, UniformGrid};
use crate::reverse_holder::{theta_threshold, DEFAULT_BACKOFF};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Pairs on the same time row.
    Space,
    /// Pairs on the same spatial column.
    Time,
}

/// Closed sub-rectangle `x × t` of a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x: (f64, f64),
    pub t: (f64, f64),
}

impl Region {
    pub fn new(x: (f64, f64), t: (f64, f64)) -> Self {
        Self { x, t }
    }

    pub fn whole(u: &GridFunction2D) -> Self {
        Self {
            x: (u.x_grid().start(), u.x_grid().end()),
            t: (u.t_grid().start(), u.t_grid().end()),
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "x={}:{};t={}:{}",
            fmt_sig(self.x.0),
            fmt_sig(self.x.1),
            fmt_sig(self.t.0),
            fmt_sig(self.t.1)
        )
    }
}

/// Separations `r` with `min ≤ r ≤ max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleWindow {
    pub min: f64,
    pub max: f64,
}

impl ScaleWindow {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    /// `[10·step, 0.1·width]` of the grid along `direction`.
    pub fn mesoscopic(u: &GridFunction2D, direction: Direction) -> Self {
        let g = axis(u, direction);
        Self {
            min: 10.0 * g.step(),
            max: 0.1 * (g.end() - g.start()),
        }
    }
}

fn axis(u: &GridFunction2D, direction: Direction) -> &UniformGrid {
    match direction {
        Direction::Space => u.x_grid(),
        Direction::Time => u.t_grid(),
    }
}

/// Index ranges of the region: `(along, across)` relative to `direction`.
fn ranges(u: &GridFunction2D, direction: Direction, region: &Region) -> Result<(Vec<usize>, Vec<usize>)> {
    let xs: Vec<usize> = u.x_grid().index_range(region.x.0, region.x.1).collect();
    let ts: Vec<usize> = u.t_grid().index_range(region.t.0, region.t.1).collect();
    if xs.is_empty() || ts.is_empty() {
        return Err(Error::Empty("region"));
    }
    Ok(match direction {
        Direction::Space => (xs, ts),
        Direction::Time => (ts, xs),
    })
}

fn value(u: &GridFunction2D, direction: Direction, along: usize, across: usize) -> f64 {
    match direction {
        Direction::Space => u.at(across, along),
        Direction::Time => u.at(along, across),
    }
}

/// Grid offsets covered by the scale window.
fn offsets(step: f64, window: &ScaleWindow, span: usize) -> Result<(usize, usize)> {
    ensure(window.min > 0.0 && window.max >= window.min, "scale_window", || {
        format!("need 0 < r_min <= r_max, got [{}, {}]", window.min, window.max)
    })?;
    ensure(window.min >= step * (1.0 - 1e-9), "scale_window", || {
        format!("r_min = {} is below the grid step {step}", window.min)
    })?;
    let lo = ((window.min / step) - 1e-9).ceil().max(1.0) as usize;
    let hi = ((window.max / step) + 1e-9).floor() as usize;
    let hi = hi.min(span.saturating_sub(1));
    if lo > hi {
        return Err(Error::Empty("pairs in the scale window"));
    }
    Ok((lo, hi))
}

/// Largest `|Δu|` over region pairs at each of the given offsets.
fn max_increments(u: &GridFunction2D, direction: Direction, along: &[usize], across: &[usize], ds: &[usize]) -> Vec<f64> {
    ds.par_iter()
        .map(|&d| {
            let mut m: f64 = 0.0;
            for &c in across {
                for w in along.windows(d + 1) {
                    m = m.max((value(u, direction, w[d], c) - value(u, direction, w[0], c)).abs());
                }
            }
            m
        })
        .collect()
}

/// `sup |u(P) − u(Q)| / |P − Q|^alpha` over region pairs aligned with `direction`
/// whose separation lies in the scale window.
pub fn holder_seminorm(
    u: &GridFunction2D,
    alpha: f64,
    direction: Direction,
    region: &Region,
    window: &ScaleWindow,
) -> Result<f64> {
    ensure(alpha > 0.0 && alpha <= 1.0, "alpha", || format!("need 0 < alpha <= 1, got {alpha}"))?;
    let (along, across) = ranges(u, direction, region)?;
    let step = axis(u, direction).step();
    let (lo, hi) = offsets(step, window, along.len())?;
    let ds: Vec<usize> = (lo..=hi).collect();
    let incs = max_increments(u, direction, &along, &across, &ds);
    Ok(ds
        .iter()
        .zip(incs)
        .map(|(&d, m)| m / (d as f64 * step).powf(alpha))
        .fold(0.0, f64::max))
}

/// Log-log regression of the modulus of continuity.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderFit {
    pub exponent: f64,
    pub constant: f64,
    /// Coefficient of determination of the regression.
    pub fit_residual: f64,
    pub scale_window: (f64, f64),
    pub scales: usize,
}

impl HolderFit {
    /// The data do not look like a power law.
    pub fn flagged(&self) -> bool {
        self.fit_residual < 0.9
    }
}

/// Minimum number of distinct scales in a fit.
pub const MIN_SCALES: usize = 5;
const TARGET_SCALES: usize = 12;

/// Ordinary least squares `y ≈ slope·x + intercept`, with R².
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

/// Log-spaced integers in `[lo, hi]`, deduplicated.
fn log_spaced(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..count)
        .map(|i| {
            let f = i as f64 / (count - 1) as f64;
            (lo as f64 * (hi as f64 / lo as f64).powf(f)).round() as usize
        })
        .collect();
    out.dedup();
    out
}

fn fit_power_law(scales: &[f64], values: &[f64]) -> Result<HolderFit> {
    if scales.len() < MIN_SCALES {
        return Err(invalid(
            "scale_window",
            format!("only {} distinct scales, need {MIN_SCALES}", scales.len()),
        ));
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(invalid("u", "zero increment at some scale; no power law to fit"));
    }
    let xs: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    Ok(HolderFit {
        exponent: slope.clamp(f64::MIN_POSITIVE, 1.0),
        constant: intercept.exp(),
        fit_residual: r2,
        scale_window: (scales[0], scales[scales.len() - 1]),
        scales: scales.len(),
    })
}

/// Fits `max |Δu| at separation r ≈ C·r^α` over log-spaced grid separations in
/// the window.
pub fn fit_holder_exponent(
    u: &GridFunction2D,
    direction: Direction,
    region: &Region,
    window: &ScaleWindow,
) -> Result<HolderFit> {
    let (along, across) = ranges(u, direction, region)?;
    let step = axis(u, direction).step();
    let (lo, hi) = offsets(step, window, along.len())?;
    let ds = log_spaced(lo, hi, TARGET_SCALES);
    let incs = max_increments(u, direction, &along, &across, &ds);
    let scales: Vec<f64> = ds.iter().map(|&d| d as f64 * step).collect();
    fit_power_law(&scales, &incs)
}

/// Largest adjacent-node difference quotient in the region.
pub fn lipschitz_constant(u: &GridFunction2D, direction: Direction, region: &Region) -> Result<f64> {
    let (along, across) = ranges(u, direction, region)?;
    if along.len() < 2 {
        return Err(Error::Empty("adjacent pairs in region"));
    }
    let step = axis(u, direction).step();
    Ok(max_increments(u, direction, &along, &across, &[1])[0] / step)
}

/// `((θ−p)/(θ−1), (θ−p)/θ)`: the space and time exponents.
pub fn theorem_exponents(theta: f64, p: f64) -> Result<(f64, f64)> {
    ensure(p > 1.0, "p", || format!("need p > 1, got {p}"))?;
    ensure(theta > p && theta.is_finite(), "theta", || format!("need theta > p = {p}, got {theta}"))?;
    Ok(((theta - p) / (theta - 1.0), (theta - p) / theta))
}

/// Default slack for the arc energy checks.
pub const DEFAULT_SLACK: f64 = 1.25;
/// Default window lengths of the decay fit, as fractions of the arc's span.
pub const DEFAULT_DECAY_WINDOW: (f64, f64) = (0.02, 0.5);

/// Margins of the energy inequalities along an arc.
///
/// The arc runs from `(x̄, t̄) = (ξ(t_0), t_0)`. In the solver's backward
/// orientation the windows are `[t_0, t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcEnergyReport {
    pub slack: f64,
    /// Smallest `s` with `u(x̄,t̄) ≥ u(ξ(t),t) + (C₊/s)∫|ξ'|^p − η₊|t−t̄|` on
    /// every window; 0 for a motionless arc.
    pub toto1_min_slack: f64,
    /// Smallest `C₁` making the weak reverse Hölder inequality hold with `C₀`.
    pub toto2_required_c1: f64,
    /// `min_t slack·C₁·mean^p + C₀ − pmean`.
    pub toto2_margin: f64,
    /// Fit of `∫|ξ'|` over the window against the window length.
    pub decay: Option<HolderFit>,
    /// `1 − 1/θ` with `θ = θ(p, slack·C₁)`; 1 when `slack·C₁ ≤ 1`.
    pub decay_predicted: f64,
}

impl ArcEnergyReport {
    pub fn toto1_holds(&self) -> bool {
        self.toto1_min_slack <= self.slack
    }

    pub fn toto2_holds(&self) -> bool {
        self.toto2_margin >= 0.0
    }

    /// Fitted exponent minus the predicted one; 0 for a motionless arc.
    pub fn decay_margin(&self) -> f64 {
        self.decay.as_ref().map_or(0.0, |f| f.exponent - self.decay_predicted)
    }

    pub fn rows(&self, region: &str) -> Vec<HolderRow> {
        let (dmin, dmax, dval) = match &self.decay {
            Some(f) => (f.scale_window.0, f.scale_window.1, f.exponent),
            None => (0.0, 0.0, f64::NAN),
        };
        vec![
            HolderRow::new("toto1_min_slack", region, 0.0, 0.0, self.toto1_min_slack, self.slack - self.toto1_min_slack),
            HolderRow::new("toto2_required_c1", region, 0.0, 0.0, self.toto2_required_c1, self.toto2_margin),
            HolderRow::new("decay_exponent", region, dmin, dmax, dval, self.decay_margin()),
        ]
    }
}

/// Checks the energy inequalities along `arc` against the value function `u`.
pub fn arc_energy_check(
    arc: &DiscreteArc,
    u: &GridFunction2D,
    env: &GrowthEnvelope,
    slack: f64,
    decay_window: (f64, f64),
) -> Result<ArcEnergyReport> {
    ensure(slack >= 1.0, "slack", || format!("need slack >= 1, got {slack}"))?;
    ensure(
        decay_window.0 > 0.0 && decay_window.0 < decay_window.1 && decay_window.1 <= 1.0,
        "decay_window",
        || format!("need 0 < lo < hi <= 1, got {decay_window:?}"),
    )?;
    let (xg, tg) = (u.x_grid(), u.t_grid());
    let tol = 1e-9 * tg.step();
    let times = arc.times();
    let pos = arc.positions();
    if times[0] < tg.start() - tol || times[times.len() - 1] > tg.end() + tol {
        return Err(invalid("arc", "arc times leave the grid's time range"));
    }
    if pos.iter().any(|&x| x < xg.start() - tol || x > xg.end() + tol) {
        return Err(invalid("arc", "arc leaves the grid's state window"));
    }

    let p = env.p;
    let speeds = arc.speeds();
    let anchor_value = u.interpolate(pos[0], times[0]);
    let mut energy = 0.0;
    let mut length = 0.0;
    let mut cumulative = Vec::with_capacity(speeds.len());
    let mut toto1: f64 = 0.0;
    let mut required_c1: f64 = 0.0;
    let mut toto2_margin = f64::INFINITY;
    let c1 = slack * env.c_one;
    for (k, v) in speeds.iter().enumerate() {
        let dt = times[k + 1] - times[k];
        energy += dt * v.abs().powf(p);
        length += dt * v.abs();
        cumulative.push(length);
        let w = times[k + 1] - times[0];
        let drop = anchor_value - u.interpolate(pos[k + 1], times[k + 1]) + env.eta_plus * w;
        if energy > 0.0 {
            toto1 = toto1.max(if drop > 0.0 { env.c_plus * energy / drop } else { f64::INFINITY });
        }
        let pmean = energy / w;
        let mean = length / w;
        if mean > 0.0 {
            required_c1 = required_c1.max((pmean - env.c_zero) / mean.powf(p));
        }
        toto2_margin = toto2_margin.min(c1 * mean.powf(p) + env.c_zero - pmean);
    }

    let span = times[times.len() - 1] - times[0];
    let decay = if length > 0.0 {
        let lo = times.partition_point(|&t| t - times[0] < decay_window.0 * span).max(1);
        let hi = times.partition_point(|&t| t - times[0] <= decay_window.1 * span).saturating_sub(1);
        if hi <= lo {
            return Err(invalid("decay_window", "no arc nodes inside the decay window"));
        }
        let ks = log_spaced(lo, hi, TARGET_SCALES);
        let scales: Vec<f64> = ks.iter().map(|&k| times[k] - times[0]).collect();
        let values: Vec<f64> = ks.iter().map(|&k| cumulative[k - 1]).collect();
        Some(fit_power_law(&scales, &values)?)
    } else {
        None
    };
    let decay_predicted = if c1 > 1.0 {
        1.0 - 1.0 / theta_threshold(p, c1, DEFAULT_BACKOFF)?.theta
    } else {
        1.0
    };
    Ok(ArcEnergyReport {
        slack,
        toto1_min_slack: toto1,
        toto2_required_c1: required_c1,
        toto2_margin,
        decay,
        decay_predicted,
    })
}

/// One row of a Hölder report: `check,region,scale_min,scale_max,value,margin`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderRow {
    pub check: String,
    pub region: String,
    pub scale_min: f64,
    pub scale_max: f64,
    pub value: f64,
    pub margin: f64,
}

impl HolderRow {
    pub fn new(check: &str, region: &str, scale_min: f64, scale_max: f64, value: f64, margin: f64) -> Self {
        Self {
            check: check.to_string(),
            region: region.to_string(),
            scale_min,
            scale_max,
            value,
            margin,
        }
    }
}

pub fn write_holder_rows<W: Write>(rows: &[HolderRow], mut w: W) -> Result<()> {
    writeln!(w, "check,region,scale_min,scale_max,value,margin")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.check,
            r.region,
            fmt_sig(r.scale_min),
            fmt_sig(r.scale_max),
            fmt_sig(r.value),
            fmt_sig(r.margin)
        )?;
    }
    Ok(())
}
