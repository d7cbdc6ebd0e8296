//! Backward dynamic programming for
//! `u(x,t) = inf { ∫_t^1 a(ξ,s)|ξ'|² ds + g(ξ(1)) : ξ(t) = x }`.
//!
//! One backward step of length `Δt` is the semi-Lagrangian update
//! `u(x, t_k) = min_y { Δt·a(x, t_k)·((y−x)/Δt)² + ū(y, t_{k+1}) }`
//! where `ū` interpolates the next time row and `y` ranges continuously over
//! the state window. `ū` is piecewise linear by default; the monotone cubic
//! option resolves narrow valleys of `u` far better. On each grid cell the
//! objective is a parabola plus a polynomial of degree at most three in `y`,
//! so the minimum is found in closed form.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{ensure, invalid, Error, Result};
use crate::grid::{DiscreteArc, GridFunction2D, UniformGrid};

pub type RunningCoefficient = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type TerminalCost = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Admissible range of the running coefficient on the grid.
pub const COEFFICIENT_RANGE: (f64, f64) = (0.5, 2.0);

/// A calculus-of-variations problem with quadratic running cost
/// `a(x,t)|ξ'|²` and terminal cost `g` on the horizon `[t0, t1]`.
#[derive(Clone)]
pub struct VariationalProblem {
    running: RunningCoefficient,
    terminal: TerminalCost,
    t0: f64,
    t1: f64,
    window: (f64, f64),
    interpolation: Interpolation,
}

impl std::fmt::Debug for VariationalProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VariationalProblem")
            .field("horizon", &(self.t0, self.t1))
            .field("window", &self.window)
            .finish_non_exhaustive()
    }
}

impl VariationalProblem {
    /// Horizon `[0, 1]`, state window `[−2, 2]`.
    pub fn new<A, G>(running: A, terminal: G) -> Self
    where
        A: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            running: Arc::new(running),
            terminal: Arc::new(terminal),
            t0: 0.0,
            t1: 1.0,
            window: (-2.0, 2.0),
            interpolation: Interpolation::Linear,
        }
    }

    pub fn with_horizon(mut self, t0: f64, t1: f64) -> Result<Self> {
        ensure(t0.is_finite() && t1.is_finite() && t1 > t0, "horizon", || {
            format!("need t0 < t1, got [{t0}, {t1}]")
        })?;
        self.t0 = t0;
        self.t1 = t1;
        Ok(self)
    }

    pub fn with_window(mut self, lo: f64, hi: f64) -> Result<Self> {
        ensure(lo.is_finite() && hi.is_finite() && hi > lo, "state_window", || {
            format!("need lo < hi, got [{lo}, {hi}]")
        })?;
        self.window = (lo, hi);
        Ok(self)
    }

    pub fn with_interpolation(mut self, scheme: Interpolation) -> Self {
        self.interpolation = scheme;
        self
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    #[inline]
    pub fn running(&self, x: f64, t: f64) -> f64 {
        (self.running)(x, t)
    }

    #[inline]
    pub fn terminal(&self, x: f64) -> f64 {
        (self.terminal)(x)
    }

    pub fn horizon(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }
}

/// Output of [`solve_value_function`].
#[derive(Debug, Clone)]
pub struct ValueSolution {
    pub u: GridFunction2D,
    /// Grid nodes whose minimizer was pinned to the edge of the state window
    /// or of the capped candidate window.
    pub boundary_hits: usize,
}

/// Interpolant of the next time row used inside the one-step minimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Piecewise linear. The scheme is monotone in the data.
    #[default]
    Linear,
    /// Piecewise cubic Hermite with Fritsch-Carlson (harmonic mean) slopes.
    /// Stays within the range of neighboring nodes, so never undershoots the
    /// row minimum, and resolves narrow valleys far better than `Linear`.
    MonotoneCubic,
}

/// Result of minimizing the one-step objective from a single departure point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepChoice {
    pub value: f64,
    pub target: f64,
    pub boundary_hit: bool,
}

/// One time row with its interpolant.
#[derive(Debug, Clone)]
pub struct RowInterpolant<'a> {
    grid: &'a UniformGrid,
    values: &'a [f64],
    slopes: Vec<f64>,
    min: f64,
}

impl<'a> RowInterpolant<'a> {
    pub fn new(grid: &'a UniformGrid, values: &'a [f64], scheme: Interpolation) -> Self {
        let h = grid.step();
        let secants: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        // Per cell: (left slope, right slope).
        let slopes = match scheme {
            Interpolation::Linear => secants.iter().flat_map(|&d| [d, d]).collect(),
            Interpolation::MonotoneCubic => {
                let n = values.len();
                let node_slope = |k: usize| {
                    if k == 0 {
                        secants[0]
                    } else if k == n - 1 {
                        secants[n - 2]
                    } else {
                        let (l, r) = (secants[k - 1], secants[k]);
                        if l * r <= 0.0 {
                            0.0
                        } else {
                            2.0 * l * r / (l + r)
                        }
                    }
                };
                let nodes: Vec<f64> = (0..n).map(node_slope).collect();
                nodes.windows(2).flat_map(|w| [w[0], w[1]]).collect()
            }
        };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            grid,
            values,
            slopes,
            min,
        }
    }

    /// Cubic coefficients of the interpolant on cell `j` in the local
    /// coordinate `s ∈ [0,1]`: `f0 + b1·s + b2·s² + b3·s³`.
    fn cell(&self, j: usize) -> [f64; 4] {
        let h = self.grid.step();
        let (f0, f1) = (self.values[j], self.values[j + 1]);
        let (m0, m1) = (h * self.slopes[2 * j], h * self.slopes[2 * j + 1]);
        let d = f1 - f0;
        [f0, m0, 3.0 * d - 2.0 * m0 - m1, m0 + m1 - 2.0 * d]
    }

    pub fn eval(&self, y: f64) -> f64 {
        let (j, s) = self.grid.locate(y);
        let [c0, c1, c2, c3] = self.cell(j);
        c0 + s * (c1 + s * (c2 + s * c3))
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    /// Minimizes `c·(y−x)² + ū(y)` over `y ∈ [x−radius, x+radius] ∩ grid span`.
    ///
    /// Ties go to the smallest `|y−x|`, then to the smaller `y`.
    pub fn best_step(&self, x: f64, c: f64, radius: f64, radius_capped: bool) -> StepChoice {
        let grid = self.grid;
        let (lo_w, hi_w) = (grid.start(), grid.end());
        let lo = (x - radius).max(lo_w);
        let hi = (x + radius).min(hi_w);
        let h = grid.step();

        let better = |v: f64, y: f64, best: &StepChoice| {
            v < best.value
                || (v == best.value
                    && ((y - x).abs() < (best.target - x).abs()
                        || ((y - x).abs() == (best.target - x).abs() && y < best.target)))
        };

        let x_in = x.clamp(lo_w, hi_w);
        let mut best = StepChoice {
            value: c * (x_in - x) * (x_in - x) + self.eval(x_in),
            target: x_in,
            boundary_hit: false,
        };
        if lo < hi {
            let (j_lo, _) = grid.locate(lo);
            let (j_hi, w_hi) = grid.locate(hi);
            let j_end = if w_hi == 0.0 && j_hi > j_lo { j_hi - 1 } else { j_hi };
            let ch2 = c * h * h;
            for j in j_lo..=j_end.min(grid.len() - 2) {
                let y0 = grid.node(j);
                let sl = ((lo - y0) / h).max(0.0);
                let sr = ((hi - y0) / h).min(1.0);
                if sl > sr {
                    continue;
                }
                let sx = (x - y0) / h;
                let [c0, c1, c2, c3] = self.cell(j);
                let objective = |s: f64| ch2 * (s - sx) * (s - sx) + c0 + s * (c1 + s * (c2 + s * c3));
                // Stationary points of the objective: 3c3·s² + 2(c2 + ch2)·s + (c1 − 2ch2·sx) = 0.
                let mut candidates = [sl, sr, f64::NAN, f64::NAN];
                let (qa, qb, qc) = (3.0 * c3, 2.0 * (c2 + ch2), c1 - 2.0 * ch2 * sx);
                if qa.abs() <= 1e-14 * (qb.abs() + qc.abs()) {
                    if qb != 0.0 {
                        candidates[2] = -qc / qb;
                    }
                } else {
                    let disc = qb * qb - 4.0 * qa * qc;
                    if disc >= 0.0 {
                        let r = -0.5 * (qb + qb.signum() * disc.sqrt());
                        if r != 0.0 {
                            candidates[2] = r / qa;
                            candidates[3] = qc / r;
                        }
                    }
                }
                for s in candidates {
                    if !(s >= sl && s <= sr) {
                        continue;
                    }
                    let y = y0 + s * h;
                    let v = objective(s);
                    if better(v, y, &best) {
                        best = StepChoice {
                            value: v,
                            target: y,
                            boundary_hit: false,
                        };
                    }
                }
            }
        }
        let y = best.target;
        let on_state_edge = y != x && ((y == lo_w && x - radius < lo_w) || (y == hi_w && x + radius > hi_w));
        let on_cap_edge = radius_capped && y != x && ((y - x).abs() >= radius * (1.0 - 1e-12));
        best.boundary_hit = on_state_edge || on_cap_edge;
        best
    }

    /// Candidate radius: a provable bound `√((ū(x) − min ū)/c)` (any farther
    /// `y` costs more than staying put), capped at `20·Δx·√(x_nodes)`.
    pub fn step_radius(&self, x: f64, c: f64) -> (f64, bool) {
        let grid = self.grid;
        let cap = 20.0 * grid.step() * (grid.len() as f64).sqrt();
        let stay = self.eval(x.clamp(grid.start(), grid.end()));
        let provable = ((stay - self.min).max(0.0) / c).sqrt() + grid.step() * 1e-9;
        if provable > cap {
            (cap, true)
        } else {
            (provable, false)
        }
    }

    /// [`Self::step_radius`] followed by [`Self::best_step`].
    pub fn step(&self, x: f64, c: f64) -> StepChoice {
        let (radius, capped) = self.step_radius(x, c);
        self.best_step(x, c, radius, capped)
    }
}

fn check_coefficient(a: f64, x: f64, t: f64) -> Result<()> {
    let (lo, hi) = COEFFICIENT_RANGE;
    if a.is_finite() && (lo..=hi).contains(&a) {
        Ok(())
    } else {
        Err(invalid(
            "running_coefficient",
            format!("a({x}, {t}) = {a} outside [{lo}, {hi}]"),
        ))
    }
}

/// Solves the backward recursion on `x_nodes × t_nodes` covering the state
/// window and horizon.
pub fn solve_value_function(problem: &VariationalProblem, x_nodes: usize, t_nodes: usize) -> Result<ValueSolution> {
    if x_nodes < 3 || t_nodes < 3 {
        return Err(Error::DegenerateGrid(format!(
            "need at least 3x3 nodes, got {x_nodes}x{t_nodes}"
        )));
    }
    let (lo, hi) = problem.window;
    let x = UniformGrid::new(lo, hi, x_nodes)?;
    let t = UniformGrid::new(problem.t0, problem.t1, t_nodes)?;
    let dt = t.step();

    let mut u = GridFunction2D::new(x, t, vec![0.0; x_nodes * t_nodes])?;
    let last = t_nodes - 1;
    for (i, xi) in x.nodes().enumerate() {
        let g = problem.terminal(xi);
        if !g.is_finite() {
            return Err(invalid("terminal_cost", format!("g({xi}) = {g}")));
        }
        u.row_mut(last)[i] = g;
    }

    let mut boundary_hits = 0;
    for k in (0..last).rev() {
        let tk = t.node(k);
        let next: Vec<f64> = u.row(k + 1).to_vec();
        let interp = RowInterpolant::new(&x, &next, problem.interpolation);
        let row: Vec<Result<StepChoice>> = (0..x_nodes)
            .into_par_iter()
            .map(|i| {
                let xi = x.node(i);
                let a = problem.running(xi, tk);
                check_coefficient(a, xi, tk)?;
                Ok(interp.step(xi, a / dt))
            })
            .collect();
        let out = u.row_mut(k);
        for (slot, choice) in out.iter_mut().zip(row) {
            let choice = choice?;
            boundary_hits += usize::from(choice.boundary_hit);
            *slot = choice.value;
        }
    }
    Ok(ValueSolution { u, boundary_hits })
}

/// `Σ_k Δt_k·a(ξ(t_k), t_k)·speed_k² + g(ξ(t_end))` along a discrete arc.
pub fn evaluate_functional(problem: &VariationalProblem, arc: &DiscreteArc) -> Result<f64> {
    let times = arc.times();
    let tol = 1e-9 * (problem.t1 - problem.t0);
    let (first, last) = (times[0], times[times.len() - 1]);
    if (first - problem.t0).abs() > tol || (last - problem.t1).abs() > tol {
        return Err(invalid(
            "arc",
            format!(
                "arc spans [{first}, {last}] but the horizon is [{}, {}]",
                problem.t0, problem.t1
            ),
        ));
    }
    let pos = arc.positions();
    let running: f64 = arc
        .speeds()
        .iter()
        .enumerate()
        .map(|(k, v)| (times[k + 1] - times[k]) * problem.running(pos[k], times[k]) * v * v)
        .sum();
    Ok(running + problem.terminal(pos[pos.len() - 1]))
}

/// Arc extracted by following the discrete argmin forward from a start point.
#[derive(Debug, Clone)]
pub struct ArcExtraction {
    pub arc: DiscreteArc,
    /// Steps whose minimizer sat on a window edge.
    pub boundary_hits: usize,
    /// `max_k |ū(ξ_k, t_k) − (step cost + ū(ξ_{k+1}, t_{k+1}))|` along the arc.
    pub max_principle_defect: f64,
    /// Running cost accumulated along the arc plus the terminal value.
    pub cost: f64,
}

/// Follows the dynamic-programming argmin from `(start_x, start_t)` to the
/// terminal time. `start_t` must be a node of `u`'s time grid.
pub fn extract_optimal_arc(
    u: &GridFunction2D,
    problem: &VariationalProblem,
    start_x: f64,
    start_t: f64,
) -> Result<ArcExtraction> {
    let xg = *u.x_grid();
    let tg = *u.t_grid();
    if (xg.start() - problem.window.0).abs() > 1e-12 || (xg.end() - problem.window.1).abs() > 1e-9 {
        return Err(invalid("u", "grid does not match the problem's state window"));
    }
    let k0 = tg.nearest(start_t);
    if (tg.node(k0) - start_t).abs() > 1e-9 * tg.step() {
        return Err(invalid("start", format!("t = {start_t} is not a grid time")));
    }
    ensure((xg.start()..=xg.end()).contains(&start_x), "start", || {
        format!("x = {start_x} outside the state window")
    })?;
    let dt = tg.step();
    let mut times = vec![tg.node(k0)];
    let mut positions = vec![start_x];
    let mut hits = 0;
    let mut defect: f64 = 0.0;
    let mut cost = 0.0;
    let mut xk = start_x;
    for k in k0..tg.len() - 1 {
        let tk = tg.node(k);
        let next = RowInterpolant::new(&xg, u.row(k + 1), problem.interpolation);
        let a = problem.running(xk, tk);
        check_coefficient(a, xk, tk)?;
        let c = a / dt;
        let choice = next.step(xk, c);
        hits += usize::from(choice.boundary_hit);
        let step = c * (choice.target - xk) * (choice.target - xk);
        cost += step;
        let here = RowInterpolant::new(&xg, u.row(k), problem.interpolation).eval(xk);
        defect = defect.max((here - choice.value).abs());
        xk = choice.target;
        times.push(tg.node(k + 1));
        positions.push(xk);
    }
    cost += RowInterpolant::new(&xg, u.row(tg.len() - 1), problem.interpolation).eval(xk);
    Ok(ArcExtraction {
        arc: DiscreteArc::new(times, positions)?,
        boundary_hits: hits,
        max_principle_defect: defect,
        cost,
    })
}

/// Largest instance accepted by [`brute_force_oracle`].
pub const BRUTE_FORCE_MAX_NODES: usize = 6;
pub const BRUTE_FORCE_MAX_POSITIONS: usize = 21;

/// Exhaustive minimum of the discrete functional over all piecewise-linear
/// arcs from `start_x` whose later nodes take values on a uniform grid of
/// `positions_per_node` points spanning the state window, at `nodes` equally
/// spaced times covering the horizon.
///
/// The running cost of each segment uses `a` at its departure node, as in
/// [`evaluate_functional`].
pub fn brute_force_oracle(
    problem: &VariationalProblem,
    start_x: f64,
    nodes: usize,
    positions_per_node: usize,
) -> Result<(f64, DiscreteArc)> {
    if nodes > BRUTE_FORCE_MAX_NODES || positions_per_node > BRUTE_FORCE_MAX_POSITIONS {
        return Err(Error::TooLarge(format!(
            "{nodes} nodes x {positions_per_node} positions (limits {BRUTE_FORCE_MAX_NODES} x {BRUTE_FORCE_MAX_POSITIONS})"
        )));
    }
    if nodes < 2 || positions_per_node < 2 {
        return Err(Error::DegenerateGrid(format!(
            "{nodes} nodes x {positions_per_node} positions"
        )));
    }
    let tg = UniformGrid::new(problem.t0, problem.t1, nodes)?;
    let pg = UniformGrid::new(problem.window.0, problem.window.1, positions_per_node)?;
    let dt = tg.step();
    let positions: Vec<f64> = pg.nodes().collect();

    struct Search<'a> {
        problem: &'a VariationalProblem,
        tg: UniformGrid,
        positions: &'a [f64],
        dt: f64,
        path: Vec<f64>,
        best: f64,
        best_path: Vec<f64>,
    }

    impl Search<'_> {
        fn descend(&mut self, k: usize, acc: f64) {
            let xk = self.path[k];
            if k + 1 == self.tg.len() {
                let total = acc + self.problem.terminal(xk);
                if total < self.best {
                    self.best = total;
                    self.best_path.clone_from(&self.path);
                }
                return;
            }
            let a = self.problem.running(xk, self.tg.node(k));
            for &y in self.positions {
                let v = (y - xk) / self.dt;
                self.path.push(y);
                self.descend(k + 1, acc + self.dt * a * v * v);
                self.path.pop();
            }
        }
    }

    let mut search = Search {
        problem,
        tg,
        positions: &positions,
        dt,
        path: vec![start_x],
        best: f64::INFINITY,
        best_path: Vec::new(),
    };
    search.descend(0, 0.0);
    let arc = DiscreteArc::new(tg.nodes().collect(), search.best_path)?;
    Ok((search.best, arc))
}

/// Parameters of the non-Lipschitz counterexample family with
/// `ξ₀(t) = t^γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleSpec {
    pub n: u32,
    pub gamma: f64,
    pub big_g: f64,
}

impl CounterexampleSpec {
    pub fn new(n: u32, gamma: f64, big_g: f64) -> Result<Self> {
        let spec = Self { n, gamma, big_g };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.n >= 1, "n", || "n must be positive".into())?;
        let gamma_min = 2.0 - std::f64::consts::SQRT_2;
        ensure(self.gamma > gamma_min && self.gamma < 1.0, "gamma", || {
            format!("need gamma in (2 - sqrt 2, 1), got {}", self.gamma)
        })?;
        let floor = self.limit_value();
        ensure(self.big_g > floor, "G", || {
            format!("need G > gamma^2/(2 gamma - 1) = {floor}, got {}", self.big_g)
        })
    }

    /// `ξ₀(t) = t^γ`.
    pub fn xi0(&self, t: f64) -> f64 {
        t.max(0.0).powf(self.gamma)
    }

    /// `J[ξ₀] = γ²/(2γ−1)`.
    pub fn limit_value(&self) -> f64 {
        self.gamma * self.gamma / (2.0 * self.gamma - 1.0)
    }

    /// `a_n(x,t) = min{2, n|x − t^γ| + Σ_{k≤n} 2^{−k}}`.
    pub fn running(&self, x: f64, t: f64) -> f64 {
        let n = f64::from(self.n);
        let floor = 1.0 - 0.5f64.powi(self.n as i32);
        (n * (x - self.xi0(t)).abs() + floor).min(2.0)
    }

    /// `g_n(x) = min{G, n|x−1|}`.
    pub fn terminal(&self, x: f64) -> f64 {
        (f64::from(self.n) * (x - 1.0).abs()).min(self.big_g)
    }

    /// The limit coefficient: 1 within `tol` of the graph of `ξ₀`, else 2.
    pub fn limit_running(&self, x: f64, t: f64, tol: f64) -> f64 {
        if (x - self.xi0(t)).abs() <= tol {
            1.0
        } else {
            2.0
        }
    }

    /// The limit terminal cost: 0 within `tol` of 1, else `G`.
    pub fn limit_terminal(&self, x: f64, tol: f64) -> f64 {
        if (x - 1.0).abs() <= tol {
            0.0
        } else {
            self.big_g
        }
    }

    /// The `(a_n, g_n)` problem on the default window `[−2, 2] × [0, 1]`.
    pub fn problem(&self) -> VariationalProblem {
        let (a, g) = counterexample_coefficients(self);
        VariationalProblem::new(a, g)
    }

    /// The limit functional's problem with on-graph tolerance `tol`.
    pub fn limit_problem(&self, tol: f64) -> VariationalProblem {
        let s = *self;
        VariationalProblem::new(move |x, t| s.limit_running(x, t, tol), move |x| s.limit_terminal(x, tol))
    }
}

/// The continuous coefficient pair `(a_n, g_n)` as callables.
pub fn counterexample_coefficients(
    spec: &CounterexampleSpec,
) -> (impl Fn(f64, f64) -> f64 + Send + Sync + 'static, impl Fn(f64) -> f64 + Send + Sync + 'static) {
    let a = *spec;
    let g = *spec;
    (move |x, t| a.running(x, t), move |x| g.terminal(x))
}
