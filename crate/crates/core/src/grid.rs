//! Uniform grids, sampled value functions and piecewise-linear arcs.

use std::io::Write;

use crate::error::{Error, Result};
use crate::format::fmt_sig;

/// `len` equally spaced nodes starting at `start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    start: f64,
    step: f64,
    len: usize,
}

impl UniformGrid {
    /// Grid with `len` nodes covering `[lo, hi]` including both ends.
    pub fn new(lo: f64, hi: f64, len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::DegenerateGrid(format!("{len} nodes")));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::DegenerateGrid(format!("interval [{lo}, {hi}]")));
        }
        Ok(Self {
            start: lo,
            step: (hi - lo) / (len - 1) as f64,
            len,
        })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.node(self.len - 1)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.node(i))
    }

    /// Index of the node nearest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let r = ((x - self.start) / self.step).round();
        r.clamp(0.0, (self.len - 1) as f64) as usize
    }

    /// Cell index `j` and local coordinate `w ∈ [0,1]` with
    /// `x = node(j) + w·step`, clamped to the grid.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let r = (x - self.start) / self.step;
        if r <= 0.0 {
            return (0, 0.0);
        }
        let last = (self.len - 1) as f64;
        if r >= last {
            return (self.len - 2, 1.0);
        }
        let j = r.floor();
        (j as usize, r - j)
    }

    /// Indices of nodes inside `[lo, hi]` (with a relative rounding allowance).
    pub fn index_range(&self, lo: f64, hi: f64) -> std::ops::RangeInclusive<usize> {
        let eps = 1e-9;
        let first = ((lo - self.start) / self.step - eps).ceil().max(0.0) as usize;
        let last_f = ((hi - self.start) / self.step + eps).floor();
        if last_f < 0.0 {
            #[allow(clippy::reversed_empty_ranges)]
            return 1..=0;
        }
        let last = (last_f as usize).min(self.len - 1);
        first..=last
    }

    /// Every `stride`-th node, keeping the last node when the stride divides evenly.
    pub fn strided(&self, stride: usize) -> Result<Self> {
        let stride = stride.max(1);
        let len = (self.len - 1) / stride + 1;
        if len < 2 {
            return Err(Error::DegenerateGrid(format!("stride {stride} leaves {len} nodes")));
        }
        Ok(Self {
            start: self.start,
            step: self.step * stride as f64,
            len,
        })
    }
}

/// A value function sampled on a uniform `(x, t)` grid, stored t-major:
/// row `k` holds `u(·, t_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction2D {
    x: UniformGrid,
    t: UniformGrid,
    values: Vec<f64>,
}

impl GridFunction2D {
    pub fn new(x: UniformGrid, t: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != x.len() * t.len() {
            return Err(Error::DegenerateGrid(format!(
                "{} values for a {}x{} grid",
                values.len(),
                x.len(),
                t.len()
            )));
        }
        Ok(Self { x, t, values })
    }

    /// Samples `f(x, t)` on the grid.
    pub fn from_fn(x: UniformGrid, t: UniformGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(x.len() * t.len());
        for tk in t.nodes() {
            values.extend(x.nodes().map(|xi| f(xi, tk)));
        }
        Self { x, t, values }
    }

    pub fn x_grid(&self) -> &UniformGrid {
        &self.x
    }

    pub fn t_grid(&self) -> &UniformGrid {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.x.len() + i]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.x.len();
        &self.values[k * n..(k + 1) * n]
    }

    pub(crate) fn row_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.x.len();
        &mut self.values[k * n..(k + 1) * n]
    }

    /// Linear interpolation in `x` on time row `k`.
    pub fn interpolate_row(&self, k: usize, x: f64) -> f64 {
        interpolate(&self.x, self.row(k), x)
    }

    /// Bilinear interpolation, clamped to the grid.
    pub fn interpolate(&self, x: f64, t: f64) -> f64 {
        let (k, w) = self.t.locate(t);
        let lo = self.interpolate_row(k, x);
        if w == 0.0 {
            return lo;
        }
        let hi = self.interpolate_row(k + 1, x);
        lo + w * (hi - lo)
    }

    /// Sub-grid keeping every `stride`-th node along each axis.
    pub fn strided(&self, stride: usize) -> Result<Self> {
        let stride = stride.max(1);
        let x = self.x.strided(stride)?;
        let t = self.t.strided(stride)?;
        let mut values = Vec::with_capacity(x.len() * t.len());
        for k in 0..t.len() {
            let row = self.row(k * stride);
            values.extend((0..x.len()).map(|i| row[i * stride]));
        }
        Self::new(x, t, values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV with header `t,x,u`, one row per node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,u")?;
        for (k, tk) in self.t.nodes().enumerate() {
            let tk = fmt_sig(tk);
            for (i, xi) in self.x.nodes().enumerate() {
                writeln!(w, "{},{},{}", tk, fmt_sig(xi), fmt_sig(self.at(k, i)))?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }
}

/// Piecewise-linear interpolation of nodal `values` on `grid`, clamped at the ends.
#[inline]
pub fn interpolate(grid: &UniformGrid, values: &[f64], x: f64) -> f64 {
    let (j, w) = grid.locate(x);
    let a = values[j];
    if w == 0.0 {
        a
    } else {
        a + w * (values[j + 1] - a)
    }
}

/// A piecewise-linear arc through `(times[k], positions[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteArc {
    times: Vec<f64>,
    positions: Vec<f64>,
}

impl DiscreteArc {
    pub fn new(times: Vec<f64>, positions: Vec<f64>) -> Result<Self> {
        if times.len() != positions.len() {
            return Err(Error::DegenerateGrid(format!(
                "{} times but {} positions",
                times.len(),
                positions.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::DegenerateGrid("an arc needs at least two nodes".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::DegenerateGrid("arc times must be strictly increasing".into()));
        }
        if positions.iter().chain(&times).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateGrid("non-finite arc node".into()));
        }
        Ok(Self { times, positions })
    }

    /// Samples `xi` at the given times.
    pub fn from_fn(times: Vec<f64>, xi: impl Fn(f64) -> f64) -> Result<Self> {
        let positions = times.iter().map(|&t| xi(t)).collect();
        Self::new(times, positions)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> (f64, f64) {
        (self.positions[0], self.times[0])
    }

    pub fn end(&self) -> (f64, f64) {
        let n = self.len() - 1;
        (self.positions[n], self.times[n])
    }

    /// Forward difference quotients, one per segment.
    pub fn speeds(&self) -> Vec<f64> {
        self.times
            .windows(2)
            .zip(self.positions.windows(2))
            .map(|(t, x)| (x[1] - x[0]) / (t[1] - t[0]))
            .collect()
    }

    /// Discrete `W^{1,p}` energy `Σ Δt·|speed|^p`.
    pub fn energy(&self, p: f64) -> f64 {
        self.times
            .windows(2)
            .zip(self.speeds())
            .map(|(t, v)| (t[1] - t[0]) * v.abs().powf(p))
            .sum()
    }

    /// Position at time `t` by linear interpolation (clamped to the arc's span).
    pub fn position_at(&self, t: f64) -> f64 {
        let n = self.len();
        if t <= self.times[0] {
            return self.positions[0];
        }
        if t >= self.times[n - 1] {
            return self.positions[n - 1];
        }
        let j = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[j]) / (self.times[j + 1] - self.times[j]);
        self.positions[j] + w * (self.positions[j + 1] - self.positions[j])
    }

    /// `max_k |ξ(t_k) − f(t_k)|` over the arc nodes.
    pub fn sup_distance(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.times
            .iter()
            .zip(&self.positions)
            .fold(0.0, |m, (&t, &x)| m.max((x - f(t)).abs()))
    }

    /// CSV with header `t,x`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x")?;
        for (t, x) in self.times.iter().zip(&self.positions) {
            writeln!(w, "{},{}", fmt_sig(*t), fmt_sig(*x))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes_cover_interval() {
        let g = UniformGrid::new(-2.0, 2.0, 401).unwrap();
        assert_eq!(g.step(), 0.01);
        assert_eq!(g.node(0), -2.0);
        assert!((g.end() - 2.0).abs() < 1e-12);
        assert_eq!(g.nearest(0.0), 200);
        assert_eq!(g.index_range(-0.2, 0.2), 180..=220);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(UniformGrid::new(0.0, 1.0, 1).is_err());
        assert!(UniformGrid::new(1.0, 1.0, 5).is_err());
        let x = UniformGrid::new(0.0, 1.0, 3).unwrap();
        assert!(GridFunction2D::new(x, x, vec![0.0; 8]).is_err());
    }

    #[test]
    fn interpolation_is_exact_on_linear_data() {
        let x = UniformGrid::new(0.0, 1.0, 11).unwrap();
        let t = UniformGrid::new(0.0, 2.0, 5).unwrap();
        let u = GridFunction2D::from_fn(x, t, |x, t| 3.0 * x - t);
        assert!((u.interpolate(0.37, 1.3) - (3.0 * 0.37 - 1.3)).abs() < 1e-12);
        assert_eq!(u.interpolate(5.0, 0.0), 3.0);
    }

    #[test]
    fn strided_grid_keeps_corner_nodes() {
        let x = UniformGrid::new(0.0, 1.0, 9).unwrap();
        let u = GridFunction2D::from_fn(x, x, |x, t| x + 10.0 * t);
        let s = u.strided(4).unwrap();
        assert_eq!(s.x_grid().len(), 3);
        assert_eq!(s.at(2, 2), u.at(8, 8));
    }

    #[test]
    fn csv_layout() {
        let x = UniformGrid::new(0.0, 1.0, 2).unwrap();
        let u = GridFunction2D::from_fn(x, x, |x, _| x / 3.0);
        assert_eq!(
            u.to_csv_string(),
            "t,x,u\n0,0,0\n0,1,0.333333333333\n1,0,0\n1,1,0.333333333333\n"
        );
        let arc = DiscreteArc::new(vec![0.0, 0.5], vec![1.0, 2.0]).unwrap();
        assert_eq!(arc.to_csv_string(), "t,x\n0,1\n0.5,2\n");
    }

    #[test]
    fn arc_speeds_and_energy() {
        let arc = DiscreteArc::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 1.0]).unwrap();
        assert_eq!(arc.speeds(), vec![2.0, 0.0]);
        assert_eq!(arc.energy(2.0), 2.0);
        assert_eq!(arc.position_at(0.25), 0.5);
        assert!(DiscreteArc::new(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
    }
}
