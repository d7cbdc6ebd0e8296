//! Weak reverse Hölder inequalities on sampled nonnegative functions.
//!
//! A [`SampledFunction1D`] is a step function: value `v_i` on the cell
//! `[a + i·h, a + (i+1)·h)`. All window integrals over grid-aligned windows are
//! therefore exact sums, and "grid t" always means a cell boundary.

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{ensure, invalid, Error, Result};
use crate::format::fmt_sig;

/// Which end of the interval the averaging windows are attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    /// Windows `[a, t]`.
    Left,
    /// Windows `[t, b]`.
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction1D {
    a: f64,
    b: f64,
    p: f64,
    values: Vec<f64>,
}

impl SampledFunction1D {
    pub fn new(a: f64, b: f64, p: f64, values: Vec<f64>) -> Result<Self> {
        ensure(a.is_finite() && b.is_finite() && b > a, "interval", || {
            format!("need a < b, got [{a}, {b}]")
        })?;
        ensure(p > 1.0 && p.is_finite(), "p", || format!("need p > 1, got {p}"))?;
        if values.is_empty() {
            return Err(Error::Empty("samples"));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(invalid("phi", format!("samples must be finite and nonnegative, found {v}")));
        }
        Ok(Self { a, b, p, values })
    }

    /// Samples `f` at cell midpoints.
    pub fn from_fn(a: f64, b: f64, p: f64, cells: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = (b - a) / cells as f64;
        Self::new(a, b, p, (0..cells).map(|i| f(a + (i as f64 + 0.5) * h)).collect())
    }

    /// Cell averages `(F(s_{i+1}) − F(s_i))/h` of a function with antiderivative `F`.
    /// Integrable singularities at the endpoints are fine as long as `F` is finite.
    pub fn from_antiderivative(a: f64, b: f64, p: f64, cells: usize, big_f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = (b - a) / cells as f64;
        let node = |i: usize| if i == cells { b } else { a + i as f64 * h };
        Self::new(
            a,
            b,
            p,
            (0..cells).map(|i| (big_f(node(i + 1)) - big_f(node(i))) / h).collect(),
        )
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_width(&self) -> f64 {
        (self.b - self.a) / self.values.len() as f64
    }

    /// Cell boundary `m`, `0 ≤ m ≤ len`.
    pub fn node(&self, m: usize) -> f64 {
        if m == self.values.len() {
            self.b
        } else {
            self.a + m as f64 * self.cell_width()
        }
    }

    /// `‖φ‖_p` over `[a, b]`.
    pub fn lp_norm(&self) -> f64 {
        let h = self.cell_width();
        (h * self.values.iter().map(|v| v.powf(self.p)).sum::<f64>()).powf(1.0 / self.p)
    }

    /// Prefix integrals `∫_a^{s_m} φ`, `m = 0..=len`.
    pub fn prefix_integrals(&self) -> Vec<f64> {
        prefix(&self.values, self.cell_width(), 1.0)
    }

    /// Prefix integrals `∫_a^{s_m} φ^p`.
    pub fn prefix_power_integrals(&self) -> Vec<f64> {
        prefix(&self.values, self.cell_width(), self.p)
    }

    /// `ψ = φ + k`.
    pub fn shifted(&self, k: f64) -> Result<Self> {
        Self::new(self.a, self.b, self.p, self.values.iter().map(|v| v + k).collect())
    }

    /// Mirror image `s ↦ a + b − s`, which swaps left and right anchors.
    pub fn reversed(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self { values, ..self.clone() }
    }

    /// CSV with header `s,phi`; `s` is the left end of each cell.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "s,phi")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", fmt_sig(self.node(i)), fmt_sig(*v))?;
        }
        Ok(())
    }

    /// Reads the `s,phi` layout written by [`Self::write_csv`]. The cells must be
    /// uniform; `b` is the last `s` plus one cell width.
    pub fn read_csv<R: BufRead>(r: R, p: f64) -> Result<Self> {
        let mut s = Vec::new();
        let mut phi = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                if line.trim() != "s,phi" {
                    return Err(Error::Parse(format!("expected header `s,phi`, got `{line}`")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let mut next = || -> Result<f64> {
                parts
                    .next()
                    .ok_or_else(|| Error::Parse(format!("line {}: missing column", lineno + 1)))?
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            s.push(next()?);
            phi.push(next()?);
        }
        if s.len() < 2 {
            return Err(Error::Empty("samples"));
        }
        let h = s[1] - s[0];
        for (i, w) in s.windows(2).enumerate() {
            if ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1.0) {
                return Err(Error::Parse(format!("non-uniform spacing at row {}", i + 2)));
            }
        }
        Self::new(s[0], s[s.len() - 1] + h, p, phi)
    }
}

fn prefix(values: &[f64], h: f64, power: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for v in values {
        acc += h * if power == 1.0 { *v } else { v.powf(power) };
        out.push(acc);
    }
    out
}

/// Window sums `(length, ∫φ, ∫φ^p)` for every grid window attached to the anchor.
fn windows(phi: &SampledFunction1D, anchor: Anchor) -> Vec<(f64, f64, f64)> {
    let n = phi.len();
    let i1 = phi.prefix_integrals();
    let ip = phi.prefix_power_integrals();
    match anchor {
        Anchor::Left => (1..=n).map(|m| (phi.node(m) - phi.a, i1[m], ip[m])).collect(),
        Anchor::Right => (0..n)
            .map(|m| (phi.b - phi.node(m), i1[n] - i1[m], ip[n] - ip[m]))
            .collect(),
    }
}

/// Smallest `A` with `(1/|W|)∫_W φ^p ≤ A·((1/|W|)∫_W φ)^p` on every grid window `W`.
///
/// Windows where both averages vanish are skipped.
pub fn min_hypothesis_constant(phi: &SampledFunction1D, anchor: Anchor) -> Result<f64> {
    ensure(phi.len() >= 10, "phi", || format!("need at least 10 samples, got {}", phi.len()))?;
    if phi.values.iter().all(|&v| v == 0.0) {
        return Err(invalid("phi", "identically zero"));
    }
    let p = phi.p;
    let mut best: f64 = 0.0;
    for (len, int1, intp) in windows(phi, anchor) {
        if int1 == 0.0 && intp == 0.0 {
            continue;
        }
        let ratio = (intp / len) / (int1 / len).powf(p);
        best = best.max(ratio);
    }
    Ok(best)
}

/// Smallest `B ≥ 0` with `pmean ≤ A·mean^p + B` on every right-anchored window.
pub fn min_hypothesis_offset(phi: &SampledFunction1D, a_const: f64) -> f64 {
    windows(phi, Anchor::Right)
        .into_iter()
        .map(|(len, int1, intp)| intp / len - a_const * (int1 / len).powf(phi.p))
        .fold(0.0, f64::max)
}

/// Threshold exponent and the constant of the conclusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaResult {
    pub theta: f64,
    pub p: f64,
    #[serde(rename = "A")]
    pub a: f64,
    /// `θ/((θ−p)A) − (θ/(θ−1))^p` at `theta`; positive.
    pub margin: f64,
    /// `C` in `∫_a^t φ ≤ C(t−a)^{1−1/θ}(b−a)^{1/θ−1/p}‖φ‖_p`.
    #[serde(rename = "constant_C")]
    pub constant_c: f64,
    /// Supremum of admissible exponents; infinite serializes as null.
    pub theta_star: f64,
    /// `1/D` with `D` the margin at `theta`: the constant of the weighted estimate
    /// `∫ s^{p/θ−1}φ^p ≤ (1/D)·θ/((θ−p)A)·∫φ^p` on `[0,1]`.
    #[serde(skip)]
    pub inverse_margin: f64,
    /// More than one sign change was seen while sampling; the first was used.
    pub non_monotone: bool,
}

impl ThetaResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `θ/((θ−p)A) − (θ/(θ−1))^p`.
pub fn threshold_function(theta: f64, p: f64, a_const: f64) -> f64 {
    theta / ((theta - p) * a_const) - (theta / (theta - 1.0)).powf(p)
}

pub const DEFAULT_BACKOFF: f64 = 0.95;

/// Sampling density used to confirm a single sign change.
const SIGN_SAMPLES: usize = 200;

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    // f(lo) > 0 ≥ f(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Supremum `θ*` of `{θ > p : θ/((θ−p)A) > (θ/(θ−1))^p}`, and whether the sign
/// pattern was non-monotone.
fn theta_star(p: f64, a_const: f64) -> Result<(f64, bool)> {
    let f = |th: f64| threshold_function(th, p, a_const);
    // The function tends to +∞ at p⁺; find a positive starting offset.
    let mut lo_off = 1e-6 * p;
    while f(p + lo_off) <= 0.0 {
        lo_off *= 0.5;
        if lo_off < 1e-300 {
            return Err(Error::Overflow("no admissible theta near p".into()));
        }
    }
    let mut hi_off = lo_off.max(1.0);
    while f(p + hi_off) > 0.0 {
        hi_off *= 2.0;
        if !hi_off.is_finite() || hi_off > 1e15 {
            return Err(Error::Overflow(format!("threshold for A = {a_const} beyond 1e15")));
        }
    }
    // Sample log-uniformly in θ − p and count sign changes.
    let ratio = (hi_off / lo_off).ln();
    let mut changes = 0;
    let mut first: Option<(f64, f64)> = None;
    let mut prev_off = lo_off;
    let mut prev_pos = true;
    for i in 1..=SIGN_SAMPLES {
        let off = lo_off * (ratio * i as f64 / SIGN_SAMPLES as f64).exp();
        let off = if i == SIGN_SAMPLES { hi_off } else { off };
        let pos = f(p + off) > 0.0;
        if pos != prev_pos {
            changes += 1;
            if first.is_none() && prev_pos {
                first = Some((prev_off, off));
            }
        }
        prev_pos = pos;
        prev_off = off;
    }
    let (l, h) = first.unwrap_or((lo_off, hi_off));
    let star = p + bisect(l, h, |off| f(p + off));
    Ok((star, changes > 1))
}

fn check_p_a(p: f64, a_const: f64) -> Result<()> {
    ensure(p > 1.0 && p.is_finite(), "p", || format!("need p > 1, got {p}"))?;
    ensure(a_const > 1.0 && a_const.is_finite(), "A", || format!("need A > 1, got {a_const}"))
}

fn assemble(theta: f64, p: f64, a_const: f64, star: f64, non_monotone: bool) -> ThetaResult {
    let margin = threshold_function(theta, p, a_const);
    let lead = theta / ((theta - p) * a_const);
    let step1 = lead / margin;
    let q = p / (p - 1.0);
    let theta_conj = theta / (theta - 1.0);
    ThetaResult {
        theta,
        p,
        a: a_const,
        margin,
        constant_c: step1.powf(1.0 / p) * (theta_conj / q).powf(1.0 / q),
        theta_star: star,
        inverse_margin: 1.0 / margin,
        non_monotone,
    }
}

/// `θ = p + backoff·(θ* − p)` with the constant of the conclusion.
pub fn theta_threshold(p: f64, a_const: f64, backoff: f64) -> Result<ThetaResult> {
    check_p_a(p, a_const)?;
    ensure(backoff > 0.0 && backoff < 1.0, "backoff", || format!("need backoff in (0,1), got {backoff}"))?;
    let (star, non_monotone) = theta_star(p, a_const)?;
    Ok(assemble(p + backoff * (star - p), p, a_const, star, non_monotone))
}

/// Largest exponent allowed by [`stochastic_theta`].
pub const STOCHASTIC_THETA_CAP: f64 = 2.0 - 1e-6;

/// Threshold for the expectation version, where `θ` must stay below 2.
pub fn stochastic_theta(p: f64, a_const: f64) -> Result<ThetaResult> {
    check_p_a(p, a_const)?;
    ensure(p < 2.0, "p", || format!("the expectation version needs p < 2, got {p}"))?;
    let (star, non_monotone) = theta_star(p, a_const)?;
    let theta = (p + DEFAULT_BACKOFF * (star - p)).min(STOCHASTIC_THETA_CAP);
    Ok(assemble(theta, p, a_const, star, non_monotone))
}

/// Worst margin `min_t RHS(t) − LHS(t)` over grid t of the conclusion
/// `∫_W φ ≤ C·|W|^{1−1/θ}(b−a)^{1/θ−1/p}‖φ‖_p`, with `W` attached to `anchor`.
pub fn verify_conclusion(phi: &SampledFunction1D, theta: f64, c: f64, anchor: Anchor) -> Result<f64> {
    verify_shifted_conclusion(phi, theta, c, 0.0, anchor)
}

/// As [`verify_conclusion`] with the shifted bound
/// `C|W|^{1−1/θ}((b−a)^{1/θ−1/p}‖φ‖_p + k(b−a)^{1/θ})`.
pub fn verify_shifted_conclusion(phi: &SampledFunction1D, theta: f64, c: f64, k: f64, anchor: Anchor) -> Result<f64> {
    ensure(theta > phi.p, "theta", || format!("need theta > p = {}, got {theta}", phi.p))?;
    ensure(k >= 0.0 && c >= 0.0, "constants", || format!("need C, k >= 0, got C = {c}, k = {k}"))?;
    let span = phi.b - phi.a;
    let scale = span.powf(1.0 / theta - 1.0 / phi.p) * phi.lp_norm() + k * span.powf(1.0 / theta);
    Ok(windows(phi, anchor)
        .into_iter()
        .map(|(len, int1, _)| c * len.powf(1.0 - 1.0 / theta) * scale - int1)
        .fold(f64::INFINITY, f64::min))
}

/// Result of [`shift_reduction`].
#[derive(Debug, Clone)]
pub struct ShiftReduction {
    pub psi: SampledFunction1D,
    pub k: f64,
    /// The hypothesis constant carried over to `ψ`, with offset 0.
    pub a: f64,
}

/// `ψ = φ + k` with `k = B^{1/p}/(A^{1/p}−1)`.
pub fn shift_reduction(phi: &SampledFunction1D, a_const: f64, b_const: f64) -> Result<ShiftReduction> {
    ensure(a_const > 1.0, "A", || format!("need A > 1, got {a_const}"))?;
    ensure(b_const >= 0.0 && b_const.is_finite(), "B", || format!("need B >= 0, got {b_const}"))?;
    let p = phi.p;
    let k = b_const.powf(1.0 / p) / (a_const.powf(1.0 / p) - 1.0);
    Ok(ShiftReduction {
        psi: phi.shifted(k)?,
        k,
        a: a_const,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardyCheck {
    pub margin: f64,
    /// Fewer than 50 cells in `[0, 0.01]` of the normalized interval.
    pub under_resolved: bool,
}

/// `(θ/(θ−1))^p ∫₀¹ s^{p/θ−1}φ^p − ∫₀¹ s^{p/θ−1}f^p`, `f` the running average,
/// on the interval rescaled to `[0,1]`.
///
/// The weight is integrated exactly on each cell; `φ` is constant there and `f`
/// is taken at the left end of the cell (`f(0) = φ₀`).
pub fn hardy_check(phi: &SampledFunction1D, theta: f64) -> Result<HardyCheck> {
    let p = phi.p;
    ensure(theta > p, "theta", || format!("need theta > p = {p}, got {theta}"))?;
    let n = phi.len();
    let beta = p / theta;
    let h = 1.0 / n as f64;
    let mut prev_w = 0.0;
    let mut running = 0.0;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (i, &v) in phi.values.iter().enumerate() {
        let s1 = (i + 1) as f64 * h;
        let w = s1.powf(beta);
        let weight = (w - prev_w) / beta;
        let f_left = if i == 0 { v } else { running / (i as f64 * h) };
        lhs += weight * v.powf(p);
        rhs += weight * f_left.powf(p);
        running += h * v;
        prev_w = w;
    }
    let factor = (theta / (theta - 1.0)).powf(p);
    Ok(HardyCheck {
        margin: factor * lhs - rhs,
        under_resolved: (0.01 / h) < 50.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power_law(gamma: f64, cells: usize) -> SampledFunction1D {
        SampledFunction1D::from_antiderivative(0.0, 1.0, 2.0, cells, |s| s.powf(gamma)).unwrap()
    }

    #[test]
    fn saturation_threshold() {
        let r = theta_threshold(2.0, 1.125, 0.95).unwrap();
        assert!((r.theta_star - 4.0).abs() < 1e-9, "{}", r.theta_star);
        assert!((r.theta - (2.0 + 0.95 * 2.0)).abs() < 1e-9);
        assert!(r.margin > 0.0);
        assert!(!r.non_monotone);
    }

    #[test]
    fn threshold_near_critical_gamma() {
        let g = 2.0 - std::f64::consts::SQRT_2 + 1e-3;
        let a = g * g / (2.0 * g - 1.0);
        let r = theta_threshold(2.0, a, 0.5).unwrap();
        assert!((r.theta_star - (1.0 + std::f64::consts::SQRT_2)).abs() < 1e-2);
    }

    #[test]
    fn threshold_grows_as_a_tends_to_one() {
        let r = theta_threshold(2.0, 1.001, 0.95).unwrap();
        assert!(r.theta_star > 20.0, "{}", r.theta_star);
    }

    #[test]
    fn threshold_rejections() {
        assert!(theta_threshold(1.0, 2.0, 0.95).is_err());
        assert!(theta_threshold(2.0, 1.0, 0.95).is_err());
        assert!(theta_threshold(2.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn stochastic_theta_range() {
        let r = stochastic_theta(1.5, 1.125).unwrap();
        assert!(r.theta > 1.5 && r.theta < 2.0);
        let d = theta_threshold(1.5, 1.125, DEFAULT_BACKOFF).unwrap();
        assert_eq!(r.theta, d.theta.min(STOCHASTIC_THETA_CAP));
        let r = stochastic_theta(1.99, 10.0).unwrap();
        assert!(r.theta > 1.99 && r.theta < 2.0);
        let r = stochastic_theta(1.5, 1.0 + 1e-9).unwrap();
        assert_eq!(r.theta, STOCHASTIC_THETA_CAP);
        assert!(stochastic_theta(2.0, 1.5).is_err());
        assert!(stochastic_theta(1.0, 1.5).is_err());
    }

    #[test]
    fn json_field_names() {
        let r = theta_threshold(2.0, 1.125, 0.95).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["A", "constant_C", "margin", "non_monotone", "p", "theta", "theta_star"]);
    }

    #[test]
    fn hypothesis_constant_examples() {
        let c = SampledFunction1D::new(0.0, 1.0, 2.0, vec![3.0; 50]).unwrap();
        assert!((min_hypothesis_constant(&c, Anchor::Left).unwrap() - 1.0).abs() < 1e-12);
        assert!((min_hypothesis_constant(&c, Anchor::Right).unwrap() - 1.0).abs() < 1e-12);

        let a = min_hypothesis_constant(&power_law(0.75, 20_000), Anchor::Left).unwrap();
        assert!((a / 1.125 - 1.0).abs() < 0.01, "{a}");

        let mut v = vec![1.0; 50];
        v.extend(vec![2.0; 50]);
        let two = SampledFunction1D::new(0.0, 1.0, 2.0, v).unwrap();
        // Left windows are constant up to the midpoint, then mix; the scan is the reference.
        let mut best: f64 = 0.0;
        for m in 51..=100 {
            let t = m as f64 / 100.0;
            let i1 = 0.5 + 2.0 * (t - 0.5);
            let ip = 0.5 + 4.0 * (t - 0.5);
            best = best.max((ip / t) / (i1 / t).powi(2));
        }
        let got = min_hypothesis_constant(&two, Anchor::Left).unwrap();
        assert!((got - best).abs() < 1e-12);
    }

    #[test]
    fn hypothesis_skips_zero_prefix() {
        let mut v = vec![0.0; 5];
        v.extend(vec![1.0; 10]);
        let phi = SampledFunction1D::new(0.0, 1.0, 2.0, v).unwrap();
        assert!(min_hypothesis_constant(&phi, Anchor::Left).unwrap().is_finite());
        let zero = SampledFunction1D::new(0.0, 1.0, 2.0, vec![0.0; 20]).unwrap();
        assert!(min_hypothesis_constant(&zero, Anchor::Left).is_err());
        let short = SampledFunction1D::new(0.0, 1.0, 2.0, vec![1.0; 5]).unwrap();
        assert!(min_hypothesis_constant(&short, Anchor::Left).is_err());
    }

    #[test]
    fn conclusion_on_power_law() {
        // ∫₀^t φ = t^{3/4} = t^{1−1/θ} at θ = 4, ‖φ‖₂ = √1.125, so C = 1/‖φ‖₂ is tight.
        let phi = power_law(0.75, 4000);
        let c = 1.0 / phi.lp_norm();
        let m = verify_conclusion(&phi, 4.0, c * (1.0 + 1e-9), Anchor::Left).unwrap();
        assert!(m >= -1e-12, "{m}");
        let m = verify_conclusion(&phi, 4.0, 0.9 * c, Anchor::Left).unwrap();
        assert!(m < 0.0);
        let zero = SampledFunction1D::new(0.0, 1.0, 2.0, vec![0.0; 20]).unwrap();
        assert_eq!(verify_conclusion(&zero, 4.0, 0.0, Anchor::Left).unwrap(), 0.0);
    }

    #[test]
    fn shift_examples() {
        let phi = SampledFunction1D::new(0.0, 1.0, 2.0, vec![1.0; 20]).unwrap();
        let r = shift_reduction(&phi, 4.0, 0.0).unwrap();
        assert_eq!(r.k, 0.0);
        assert_eq!(r.psi, phi);
        let r = shift_reduction(&phi, 4.0, 1.0).unwrap();
        assert!((r.k - 1.0).abs() < 1e-15);
        assert!(r.psi.values().iter().all(|&v| v == 2.0));
        assert!((min_hypothesis_constant(&r.psi, Anchor::Right).unwrap() - 1.0).abs() < 1e-12);
        assert!(shift_reduction(&phi, 1.0, 1.0).is_err());
    }

    #[test]
    fn hardy_examples() {
        let theta: f64 = 4.0;
        let one = SampledFunction1D::new(0.0, 1.0, 2.0, vec![1.0; 1000]).unwrap();
        let expect = ((theta / (theta - 1.0)).powi(2) - 1.0) * theta / 2.0;
        let h = hardy_check(&one, theta).unwrap();
        assert!((h.margin - expect).abs() < 1e-12);
        assert!(h.under_resolved);
        let fine = SampledFunction1D::new(0.0, 1.0, 2.0, vec![1.0; 10_000]).unwrap();
        assert!(!hardy_check(&fine, theta).unwrap().under_resolved);

        // φ(s) = s, f(s) = s/2: margin = ((θ/(θ−1))^p − 2^{−p})·∫ s^{p/θ−1+p}.
        let lin = SampledFunction1D::from_antiderivative(0.0, 1.0, 2.0, 20_000, |s| s * s / 2.0).unwrap();
        let beta = 2.0 / theta;
        let expect = ((theta / (theta - 1.0)).powi(2) - 0.25) / (beta + 2.0);
        let got = hardy_check(&lin, theta).unwrap().margin;
        assert!((got - expect).abs() < 1e-3, "{got} vs {expect}");
        assert!(hardy_check(&lin, 2.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let phi = SampledFunction1D::new(0.0, 2.0, 1.5, vec![0.5, 1.25, 2.0, 0.0]).unwrap();
        let mut buf = Vec::new();
        phi.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("s,phi\n0,0.5\n0.5,1.25\n"));
        let back = SampledFunction1D::read_csv(buf.as_slice(), 1.5).unwrap();
        assert_eq!(back, phi);
    }
}
