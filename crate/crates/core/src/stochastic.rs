//! Monte Carlo checks for controlled diffusions `dY = ζ dt + σ(Y,t) dW`:
//! Brownian bridges built from the drift `−α(Y−x)/(T−t)`, moment bounds for
//! increments, and the expectation form of the weak reverse Hölder inequality.
//!
//! Every path draws from its own ChaCha8 stream (`seed`, stream = path index),
//! so ensembles do not depend on the number of worker threads.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde_json::json;

use crate::error::{ensure, invalid, Error, Result};
use crate::format::fmt_sig;
use crate::reverse_holder::{stochastic_theta, ThetaResult};

/// Fills the row-major `N×D` diffusion matrix at `(y, t)`.
pub type DiffusionFn = Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;

/// Number of batches used for batch-means error bars.
pub const BATCHES: usize = 20;

#[derive(Clone)]
pub struct SdeSpec {
    dim: usize,
    noise_dim: usize,
    sigma: DiffusionFn,
    delta: f64,
    label: String,
}

impl std::fmt::Debug for SdeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SdeSpec")
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("delta", &self.delta)
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl SdeSpec {
    /// `σ` must satisfy `‖σ(y,t)‖_F ≤ delta` wherever it is evaluated; this is
    /// checked during simulation.
    pub fn new<F>(dim: usize, noise_dim: usize, delta: f64, sigma: F) -> Result<Self>
    where
        F: Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'static,
    {
        ensure(dim >= 1 && noise_dim >= 1, "dimension", || {
            format!("need N, D >= 1, got N = {dim}, D = {noise_dim}")
        })?;
        ensure(delta >= 0.0 && delta.is_finite(), "delta", || format!("need delta >= 0, got {delta}"))?;
        Ok(Self {
            dim,
            noise_dim,
            sigma: Arc::new(sigma),
            delta,
            label: "custom".into(),
        })
    }

    /// One-dimensional, constant `σ`, with `δ = |σ|`.
    pub fn scalar(sigma: f64) -> Result<Self> {
        ensure(sigma.is_finite(), "sigma", || format!("need finite sigma, got {sigma}"))?;
        let mut s = Self::new(1, 1, sigma.abs(), move |_, _, out| out[0] = sigma)?;
        s.label = format!("constant {}", fmt_sig(sigma));
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn eval(&self, y: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        (self.sigma)(y, t, out);
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm <= self.delta * (1.0 + 1e-12)) {
            return Err(invalid(
                "sigma",
                format!("|sigma({y:?}, {t})| = {norm} exceeds delta = {}", self.delta),
            ));
        }
        Ok(())
    }
}

/// Pinned diffusion from `y` at time 0 to `x` at time `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeSpec {
    pub start: Vec<f64>,
    pub target: Vec<f64>,
    pub horizon: f64,
    pub alpha: f64,
    pub p: f64,
}

impl BridgeSpec {
    /// Uses `α = 3/4 + 1/(2p)`.
    pub fn new(start: Vec<f64>, target: Vec<f64>, horizon: f64, p: f64) -> Result<Self> {
        Self::with_alpha(start, target, horizon, p, 0.75 + 0.5 / p)
    }

    pub fn with_alpha(start: Vec<f64>, target: Vec<f64>, horizon: f64, p: f64, alpha: f64) -> Result<Self> {
        ensure(!start.is_empty() && start.len() == target.len(), "start", || {
            format!("start and target dimensions differ: {} vs {}", start.len(), target.len())
        })?;
        ensure(horizon > 0.0 && horizon.is_finite(), "horizon", || format!("need T > 0, got {horizon}"))?;
        ensure(p > 1.0 && p < 2.0, "p", || format!("need p in (1,2), got {p}"))?;
        ensure(alpha > 1.0 - 1.0 / p && alpha < 2.0, "alpha", || {
            format!("need alpha in ({}, 2), got {alpha}", 1.0 - 1.0 / p)
        })?;
        Ok(Self {
            start,
            target,
            horizon,
            alpha,
            p,
        })
    }

    /// Noise-free path `x + (y−x)((T−t)/T)^α`.
    pub fn deterministic_path(&self, t: f64) -> Vec<f64> {
        let f = ((self.horizon - t) / self.horizon).max(0.0).powf(self.alpha);
        self.start
            .iter()
            .zip(&self.target)
            .map(|(y, x)| x + (y - x) * f)
            .collect()
    }

    /// `T^{1−p}|y−x|^p + T^{1−p/2}`.
    pub fn energy_shape(&self) -> f64 {
        let d = self
            .start
            .iter()
            .zip(&self.target)
            .map(|(y, x)| (y - x) * (y - x))
            .sum::<f64>()
            .sqrt();
        let t = self.horizon;
        t.powf(1.0 - self.p) * d.powf(self.p) + t.powf(1.0 - self.p / 2.0)
    }
}

pub type FeedbackFn = Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;

/// Drift of a controlled diffusion.
#[derive(Clone)]
pub enum ControlPolicy {
    Zero,
    Constant(Vec<f64>),
    /// `ζ(y, t)` written into the output slice.
    Feedback(FeedbackFn),
}

impl std::fmt::Debug for ControlPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant(v) => write!(f, "Constant({v:?})"),
            Self::Feedback(_) => write!(f, "Feedback(..)"),
        }
    }
}

impl ControlPolicy {
    fn eval(&self, y: &[f64], t: f64, out: &mut [f64]) {
        match self {
            Self::Zero => out.fill(0.0),
            Self::Constant(v) => out.copy_from_slice(v),
            Self::Feedback(f) => f(y, t, out),
        }
    }

    fn describe(&self) -> String {
        match self {
            Self::Zero => "zero".into(),
            Self::Constant(v) => format!("constant {}", v.iter().map(|x| fmt_sig(*x)).collect::<Vec<_>>().join(" ")),
            Self::Feedback(_) => "feedback".into(),
        }
    }
}

/// Seeded ensemble of paths `Y` (at every grid time) and controls `ζ` (at the
/// left end of every step), stored path-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    times: Vec<f64>,
    dim: usize,
    paths: Vec<f64>,
    controls: Vec<f64>,
    seed: u64,
    description: serde_json::Value,
}

impl PathEnsemble {
    /// Assembles an ensemble from stored arrays: `paths` has
    /// `count·len(times)·dim` entries, `controls` has `count·(len(times)−1)·dim`.
    pub fn from_parts(times: Vec<f64>, dim: usize, paths: Vec<f64>, controls: Vec<f64>, seed: u64) -> Result<Self> {
        ensure(times.len() >= 2, "times", || "need at least two grid times".into())?;
        ensure(times.windows(2).all(|w| w[1] > w[0]), "times", || "times must increase".into())?;
        let k = times.len();
        ensure(dim >= 1 && !controls.is_empty() && controls.len() % ((k - 1) * dim) == 0, "controls", || {
            "control array does not match the time grid".into()
        })?;
        let count = controls.len() / ((k - 1) * dim);
        ensure(paths.len() == count * k * dim, "paths", || {
            format!("expected {} path entries, got {}", count * k * dim, paths.len())
        })?;
        Ok(Self {
            times,
            dim,
            paths,
            controls,
            seed,
            description: json!({ "kind": "assembled" }),
        })
    }

    /// Controls only, with all positions zero.
    pub fn from_controls(times: Vec<f64>, controls: Vec<Vec<f64>>) -> Result<Self> {
        let k = times.len();
        let count = controls.len();
        if count == 0 {
            return Err(Error::Empty("paths"));
        }
        ensure(controls.iter().all(|c| c.len() + 1 == k), "controls", || {
            "each control sequence needs one entry per step".into()
        })?;
        Self::from_parts(times, 1, vec![0.0; count * k], controls.concat(), 0)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_count(&self) -> usize {
        self.controls.len() / ((self.times.len() - 1) * self.dim)
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// `Y` of path `i`, as `len(times)` consecutive points of `dim` entries.
    pub fn path(&self, i: usize) -> &[f64] {
        let w = self.times.len() * self.dim;
        &self.paths[i * w..(i + 1) * w]
    }

    /// `ζ` of path `i`, one point per step.
    pub fn control(&self, i: usize) -> &[f64] {
        let w = self.steps() * self.dim;
        &self.controls[i * w..(i + 1) * w]
    }

    /// `|ζ|` of path `i` per step.
    pub fn control_norms(&self, i: usize) -> Vec<f64> {
        self.control(i).chunks(self.dim).map(norm).collect()
    }

    /// Writes `times.csv`, `paths.csv`, `controls.csv` and `manifest.json` into
    /// `dir`, keeping the first `persist` paths.
    pub fn write_dir(&self, dir: &Path, persist: usize) -> Result<()> {
        fs::create_dir_all(dir)?;
        let kept = persist.min(self.path_count());
        let mut t = Vec::new();
        writeln!(t, "t")?;
        for v in &self.times {
            writeln!(t, "{}", fmt_sig(*v))?;
        }
        fs::write(dir.join("times.csv"), t)?;

        let columns = |name: &str| -> String {
            if self.dim == 1 {
                name.to_string()
            } else {
                (0..self.dim).map(|j| format!("{name}{j}")).collect::<Vec<_>>().join(",")
            }
        };
        let mut y = Vec::new();
        writeln!(y, "path,t,{}", columns("y"))?;
        let mut z = Vec::new();
        writeln!(z, "path,t,{}", columns("zeta"))?;
        for i in 0..kept {
            for (k, pt) in self.path(i).chunks(self.dim).enumerate() {
                let vals: Vec<String> = pt.iter().map(|v| fmt_sig(*v)).collect();
                writeln!(y, "{i},{},{}", fmt_sig(self.times[k]), vals.join(","))?;
            }
            for (k, c) in self.control(i).chunks(self.dim).enumerate() {
                let vals: Vec<String> = c.iter().map(|v| fmt_sig(*v)).collect();
                writeln!(z, "{i},{},{}", fmt_sig(self.times[k]), vals.join(","))?;
            }
        }
        fs::write(dir.join("paths.csv"), y)?;
        fs::write(dir.join("controls.csv"), z)?;

        let manifest = json!({
            "seed": self.seed,
            "dt": self.times[1] - self.times[0],
            "steps": self.steps(),
            "dimension": self.dim,
            "path_count": self.path_count(),
            "persisted_paths": kept,
            "spec": self.description,
        });
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }
}

fn norm(v: &[f64]) -> f64 {
    if v.len() == 1 {
        v[0].abs()
    } else {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Uniform grid `0, dt, …, T`; `T/dt` must be an integer up to rounding.
fn time_grid(horizon: f64, dt: f64) -> Result<Vec<f64>> {
    ensure(dt > 0.0 && dt.is_finite(), "dt", || format!("need dt > 0, got {dt}"))?;
    let steps = (horizon / dt).round();
    ensure(steps >= 1.0 && ((steps * dt) - horizon).abs() <= 1e-9 * horizon, "dt", || {
        format!("T = {horizon} is not a multiple of dt = {dt}")
    })?;
    let steps = steps as usize;
    Ok((0..=steps)
        .map(|k| if k == steps { horizon } else { horizon * k as f64 / steps as f64 })
        .collect())
}

fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

type PathOutput = Result<(Vec<f64>, Vec<f64>)>;

fn collect_paths(
    times: Vec<f64>,
    dim: usize,
    paths: usize,
    seed: u64,
    description: serde_json::Value,
    one: impl Fn(usize) -> PathOutput + Sync + Send,
) -> Result<PathEnsemble> {
    if paths == 0 {
        return Err(Error::Empty("paths"));
    }
    let out: Vec<PathOutput> = (0..paths).into_par_iter().map(&one).collect();
    let mut ys = Vec::with_capacity(paths * times.len() * dim);
    let mut zs = Vec::with_capacity(paths * (times.len() - 1) * dim);
    for r in out {
        let (y, z) = r?;
        ys.extend(y);
        zs.extend(z);
    }
    Ok(PathEnsemble {
        times,
        dim,
        paths: ys,
        controls: zs,
        seed,
        description,
    })
}

/// Simulates the bridge `dY = −α(Y−x)/(T−t) dt + σ dW`, `Y₀ = y`.
///
/// Over each step the drift is integrated exactly: `Y−x` is multiplied by
/// `((T−t_{k+1})/(T−t_k))^α`, then `σ(Y_k, t_k)ΔW_k` is added. The factor of the
/// last step is 0, so `Y_T = x + σΔW` of the last step.
pub fn simulate_bridge(spec: &BridgeSpec, sde: &SdeSpec, dt: f64, paths: usize, seed: u64) -> Result<PathEnsemble> {
    let n = spec.start.len();
    ensure(sde.dim == n, "sde", || format!("SDE dimension {} != bridge dimension {n}", sde.dim))?;
    ensure(dt <= spec.horizon / 100.0 * (1.0 + 1e-12), "dt", || {
        format!("need dt <= T/100 = {}, got {dt}", spec.horizon / 100.0)
    })?;
    let times = time_grid(spec.horizon, dt)?;
    let big_t = spec.horizon;
    let alpha = spec.alpha;
    let d = sde.noise_dim;
    let description = json!({
        "kind": "bridge",
        "start": spec.start,
        "target": spec.target,
        "horizon": big_t,
        "alpha": alpha,
        "p": spec.p,
        "sigma": sde.label,
        "delta": sde.delta,
    });
    let grid = times.clone();
    collect_paths(times, n, paths, seed, description, |i| {
        let mut rng = path_rng(seed, i);
        let k_max = grid.len() - 1;
        let mut y = spec.start.clone();
        let mut ys = Vec::with_capacity((k_max + 1) * n);
        let mut zs = Vec::with_capacity(k_max * n);
        let mut sigma = vec![0.0; n * d];
        let mut dw = vec![0.0; d];
        ys.extend_from_slice(&y);
        for k in 0..k_max {
            let (t0, t1) = (grid[k], grid[k + 1]);
            let left = big_t - t0;
            let factor = if k + 1 == k_max { 0.0 } else { ((big_t - t1) / left).powf(alpha) };
            sde.eval(&y, t0, &mut sigma)?;
            let sq = (t1 - t0).sqrt();
            for w in dw.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *w = sq * z;
            }
            for j in 0..n {
                let dev = y[j] - spec.target[j];
                zs.push(-alpha * dev / left);
                let noise: f64 = (0..d).map(|l| sigma[j * d + l] * dw[l]).sum();
                y[j] = spec.target[j] + factor * dev + noise;
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Overflow(format!("path {i} left the finite range at t = {t1}")));
            }
            ys.extend_from_slice(&y);
        }
        Ok((ys, zs))
    })
}

/// Euler-Maruyama for `dY = ζ dt + σ dW` from `start` over `[0, T]`.
pub fn simulate_controlled(
    sde: &SdeSpec,
    control: &ControlPolicy,
    start: &[f64],
    horizon: f64,
    dt: f64,
    paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    let n = sde.dim;
    ensure(start.len() == n, "start", || format!("need {n} components, got {}", start.len()))?;
    if let ControlPolicy::Constant(v) = control {
        ensure(v.len() == n, "control", || format!("need {n} components, got {}", v.len()))?;
    }
    let times = time_grid(horizon, dt)?;
    let d = sde.noise_dim;
    let description = json!({
        "kind": "controlled",
        "start": start,
        "horizon": horizon,
        "control": control.describe(),
        "sigma": sde.label,
        "delta": sde.delta,
    });
    let grid = times.clone();
    collect_paths(times, n, paths, seed, description, |i| {
        let mut rng = path_rng(seed, i);
        let k_max = grid.len() - 1;
        let mut y = start.to_vec();
        let mut ys = Vec::with_capacity((k_max + 1) * n);
        let mut zs = Vec::with_capacity(k_max * n);
        let mut sigma = vec![0.0; n * d];
        let mut zeta = vec![0.0; n];
        let mut dw = vec![0.0; d];
        ys.extend_from_slice(&y);
        for k in 0..k_max {
            let (t0, t1) = (grid[k], grid[k + 1]);
            let h = t1 - t0;
            sde.eval(&y, t0, &mut sigma)?;
            control.eval(&y, t0, &mut zeta);
            let sq = h.sqrt();
            for w in dw.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *w = sq * z;
            }
            for j in 0..n {
                let noise: f64 = (0..d).map(|l| sigma[j * d + l] * dw[l]).sum();
                y[j] += zeta[j] * h + noise;
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Overflow(format!("path {i} left the finite range at t = {t1}")));
            }
            zs.extend_from_slice(&zeta);
            ys.extend_from_slice(&y);
        }
        Ok((ys, zs))
    })
}

/// Mean and batch-means standard error over contiguous batches.
pub fn batch_mean(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < BATCHES {
        return (mean, f64::NAN);
    }
    let means = batch_means(samples);
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (BATCHES - 1) as f64;
    (mean, (var / BATCHES as f64).sqrt())
}

/// Means of [`BATCHES`] contiguous batches.
pub fn batch_means(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    (0..BATCHES)
        .map(|b| {
            let (lo, hi) = (b * n / BATCHES, (b + 1) * n / BATCHES);
            samples[lo..hi].iter().sum::<f64>() / (hi - lo).max(1) as f64
        })
        .collect()
}

/// One row of a statistics file: `quantity,estimate,stderr,bound,ratio`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatRow {
    pub quantity: String,
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
    pub ratio: f64,
}

impl StatRow {
    pub fn new(quantity: impl Into<String>, estimate: f64, stderr: f64, bound: f64) -> Self {
        Self {
            quantity: quantity.into(),
            estimate,
            stderr,
            bound,
            ratio: if bound != 0.0 { estimate / bound } else { f64::NAN },
        }
    }
}

pub fn write_stat_rows<W: Write>(rows: &[StatRow], mut w: W) -> Result<()> {
    writeln!(w, "quantity,estimate,stderr,bound,ratio")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.quantity,
            fmt_sig(r.estimate),
            fmt_sig(r.stderr),
            fmt_sig(r.bound),
            fmt_sig(r.ratio)
        )?;
    }
    Ok(())
}

/// Monte Carlo estimate of `E∫₀^T|ζ|^p` against `T^{1−p}|y−x|^p + T^{1−p/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeEnergy {
    pub estimate: f64,
    pub stderr: f64,
    pub shape: f64,
    pub ratio: f64,
    /// Per-batch means, for error propagation.
    pub batch_estimates: Vec<f64>,
    /// Relative standard error above 5%.
    pub flagged: bool,
}

/// Per path, `∫|ζ|^p` is integrated exactly along the noise-free drift of each
/// step: `|ζ_k|^p (T−t_k)^{p(1−α)}((T−t_k)^β − (T−t_{k+1})^β)/β`, `β = p(α−1)+1`.
pub fn bridge_energy_check(ensemble: &PathEnsemble, spec: &BridgeSpec) -> Result<BridgeEnergy> {
    let times = ensemble.times();
    ensure((times[times.len() - 1] - spec.horizon).abs() <= 1e-9 * spec.horizon, "ensemble", || {
        "ensemble horizon differs from the bridge".into()
    })?;
    ensure(ensemble.dim() == spec.start.len(), "ensemble", || "dimension mismatch".into())?;
    let (p, alpha, big_t) = (spec.p, spec.alpha, spec.horizon);
    let beta = p * (alpha - 1.0) + 1.0;
    let weights: Vec<f64> = times
        .windows(2)
        .map(|w| {
            let (l0, l1) = (big_t - w[0], (big_t - w[1]).max(0.0));
            l0.powf(p * (1.0 - alpha)) * (l0.powf(beta) - l1.powf(beta)) / beta
        })
        .collect();
    let per_path: Vec<f64> = (0..ensemble.path_count())
        .into_par_iter()
        .map(|i| {
            ensemble
                .control_norms(i)
                .iter()
                .zip(&weights)
                .map(|(z, w)| z.powf(p) * w)
                .sum()
        })
        .collect();
    let (estimate, stderr) = batch_mean(&per_path);
    let shape = spec.energy_shape();
    Ok(BridgeEnergy {
        estimate,
        stderr,
        shape,
        ratio: estimate / shape,
        batch_estimates: batch_means(&per_path),
        flagged: estimate > 0.0 && stderr > 0.05 * estimate,
    })
}

/// Moment statistics at one `(s, t)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMoment {
    pub s: f64,
    pub t: f64,
    /// `E|Y_t − Y_s|^r`.
    pub increment: f64,
    pub increment_stderr: f64,
    /// `E|∫_s^t ζ|^r`.
    pub drift: f64,
    /// `δ^r|t−s|^{r/2}`.
    pub noise: f64,
    pub ratio: f64,
    pub ratio_stderr: f64,
    /// Fewer than 10 steps between `s` and `t`.
    pub under_resolved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub r: f64,
    pub pairs: Vec<PairMoment>,
    pub max_ratio: f64,
    pub median_ratio: f64,
    /// Average ratio over pairs, with a batch-means error bar of the average.
    pub mean_ratio: f64,
    pub mean_ratio_stderr: f64,
}

impl MomentReport {
    pub fn rows(&self) -> Vec<StatRow> {
        let mut rows: Vec<StatRow> = self
            .pairs
            .iter()
            .map(|q| {
                let mut row = StatRow::new(
                    format!("increment_r{}_s{}_t{}", fmt_sig(self.r), fmt_sig(q.s), fmt_sig(q.t)),
                    q.increment,
                    q.increment_stderr,
                    q.drift + q.noise,
                );
                row.ratio = q.ratio;
                row
            })
            .collect();
        rows.push(StatRow::new("max_ratio", self.max_ratio, f64::NAN, 4.0 * self.median_ratio));
        rows.push(StatRow::new("mean_ratio", self.mean_ratio, self.mean_ratio_stderr, 1.0));
        rows
    }
}

/// `count` pairs with `t − s` log-spaced in `[min_len, T]`, start points
/// spread by a fixed low-discrepancy sequence, snapped to the `dt` grid.
pub fn default_moment_pairs(horizon: f64, dt: f64, count: usize, min_len: f64) -> Vec<(f64, f64)> {
    let steps = (horizon / dt).round() as usize;
    let snap = |v: f64| ((v / dt).round() as usize).min(steps);
    (0..count)
        .map(|i| {
            let f = if count > 1 { i as f64 / (count - 1) as f64 } else { 1.0 };
            let len = min_len * (horizon / min_len).powf(f);
            let li = snap(len).max(1);
            let frac = (i as f64 * 0.618_033_988_749_894_9).fract();
            let si = snap(frac * (horizon - li as f64 * dt));
            let si = si.min(steps - li);
            (si as f64 * dt, (si + li) as f64 * dt)
        })
        .collect()
}

/// Estimates `E|Y_t−Y_s|^r / (E|∫_s^t ζ|^r + δ^r|t−s|^{r/2})` for every pair,
/// on paths of [`simulate_controlled`] started at the origin.
#[allow(clippy::too_many_arguments)]
pub fn moment_bound_check(
    sde: &SdeSpec,
    control: &ControlPolicy,
    r: f64,
    pairs: &[(f64, f64)],
    horizon: f64,
    dt: f64,
    paths: usize,
    seed: u64,
) -> Result<MomentReport> {
    ensure(r > 0.0 && r.is_finite(), "r", || format!("need r > 0, got {r}"))?;
    if pairs.is_empty() {
        return Err(Error::Empty("pairs"));
    }
    let ens = simulate_controlled(sde, control, &vec![0.0; sde.dim], horizon, dt, paths, seed)?;
    moment_statistics(&ens, sde.delta, r, pairs)
}

/// The statistics of [`moment_bound_check`] on an existing ensemble.
pub fn moment_statistics(ens: &PathEnsemble, delta: f64, r: f64, pairs: &[(f64, f64)]) -> Result<MomentReport> {
    let times = ens.times();
    let dt = times[1] - times[0];
    let n = ens.dim();
    let index = |v: f64| -> Result<usize> {
        let k = (v / dt).round() as usize;
        if k >= times.len() || (times[k] - v).abs() > 1e-9 * dt.max(v.abs()) {
            return Err(invalid("pairs", format!("{v} is not a grid time")));
        }
        Ok(k)
    };
    let mut out = Vec::with_capacity(pairs.len());
    let mut batch_ratio = [0.0; BATCHES];
    for &(s, t) in pairs {
        ensure(t > s, "pairs", || format!("need s < t, got ({s}, {t})"))?;
        let (ks, kt) = (index(s)?, index(t)?);
        let (inc, drift): (Vec<f64>, Vec<f64>) = (0..ens.path_count())
            .into_par_iter()
            .map(|i| {
                let y = ens.path(i);
                let z = ens.control(i);
                let mut dy = 0.0;
                let mut dz = 0.0;
                for j in 0..n {
                    let a = y[kt * n + j] - y[ks * n + j];
                    let b: f64 = (ks..kt).map(|k| z[k * n + j] * (times[k + 1] - times[k])).sum();
                    dy += a * a;
                    dz += b * b;
                }
                (dy.sqrt().powf(r), dz.sqrt().powf(r))
            })
            .unzip();
        let (m_inc, se_inc) = batch_mean(&inc);
        let m_drift = drift.iter().sum::<f64>() / drift.len() as f64;
        let noise = delta.powf(r) * (t - s).powf(r / 2.0);
        let den = m_drift + noise;
        for (acc, b) in batch_ratio.iter_mut().zip(batch_means(&inc)) {
            *acc += b / den;
        }
        out.push(PairMoment {
            s,
            t,
            increment: m_inc,
            increment_stderr: se_inc,
            drift: m_drift,
            noise,
            ratio: m_inc / den,
            ratio_stderr: se_inc / den,
            under_resolved: kt - ks < 10,
        });
    }
    let mut ratios: Vec<f64> = out.iter().map(|q| q.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let m = ratios.len();
    let median = if m % 2 == 1 {
        ratios[m / 2]
    } else {
        0.5 * (ratios[m / 2 - 1] + ratios[m / 2])
    };
    let per_batch: Vec<f64> = batch_ratio.iter().map(|b| b / pairs.len() as f64).collect();
    let mean_ratio = ratios.iter().sum::<f64>() / m as f64;
    let bm = per_batch.iter().sum::<f64>() / BATCHES as f64;
    let var = per_batch.iter().map(|v| (v - bm) * (v - bm)).sum::<f64>() / (BATCHES - 1) as f64;
    Ok(MomentReport {
        r,
        pairs: out,
        max_ratio: ratios[m - 1],
        median_ratio: median,
        mean_ratio,
        mean_ratio_stderr: (var / BATCHES as f64).sqrt(),
    })
}

/// Largest `|mean(Y_t − Y_0)| / stderr` over grid times after the first, per
/// component. Zero-variance times with zero mean count as 0.
pub fn martingale_deviation(ens: &PathEnsemble) -> f64 {
    let n = ens.dim();
    let k_len = ens.times().len();
    let mut worst: f64 = 0.0;
    for k in 1..k_len {
        for j in 0..n {
            let d: Vec<f64> = (0..ens.path_count())
                .map(|i| {
                    let y = ens.path(i);
                    y[k * n + j] - y[j]
                })
                .collect();
            let (m, se) = batch_mean(&d);
            let z = if se > 0.0 {
                m.abs() / se
            } else if m == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
        }
    }
    worst
}

/// Hypothesis fit and conclusion margin for the expectation form of the weak
/// reverse Hölder inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticRevHolder {
    /// `max_t L/R`: the constant with `B = 0`.
    pub a_max: f64,
    pub a: f64,
    pub b: f64,
    pub theta: Option<ThetaResult>,
    /// `min_t RHS(t) − E[(∫_a^t |ζ|)^p]`.
    pub margin: f64,
    /// `A ≤ 1 + 10⁻⁶` with `B > 10⁶`.
    pub degenerate: bool,
}

const A_FLOOR: f64 = 1.0 + 1e-6;
const A_CANDIDATES: usize = 32;

/// Fits `E[(1/(t−a))∫_a^t ξ^p] ≤ A·E[((1/(t−a))∫_a^t ξ)^p] + B(t−a)^{−p/2}` for
/// `ξ = |ζ|` over grid times `t > a`, then checks
/// `E[(∫_a^t ξ)^p] ≤ (θ'/q)^{p−1}(t−a)^{p−p/θ}(1/D)[θ/((θ−p)A)(b−a)^{p/θ−1}E∫_a^b ξ^p + 2θB/(p(2−θ)A)(b−a)^{p/θ−p/2}]`
/// with `θ = θ(p, A) ∈ (p, 2)`.
///
/// `A` is chosen among 33 values between `1 + 10⁻⁶` and `max L/R`, each with its
/// minimal `B`, to minimize the bound at `t = b`; ties go to the larger `A`.
pub fn stochastic_revholder_check(controls: &PathEnsemble, p: f64, anchor: f64) -> Result<StochasticRevHolder> {
    ensure(p > 1.0 && p < 2.0, "p", || format!("need p in (1,2), got {p}"))?;
    let times = controls.times();
    let k0 = times.partition_point(|&t| t < anchor - 1e-12);
    if k0 >= times.len() - 1 || (times[k0] - anchor).abs() > 1e-9 * (times[1] - times[0]) {
        return Err(invalid("anchor", format!("a = {anchor} is not an interior grid time")));
    }
    let steps = times.len() - 1;
    let m = controls.path_count();
    // Per window end k (k0 < k ≤ steps): E∫ξ^p, E[(∫ξ)^p].
    let (sum_p, sum_mean_p) = (0..m)
        .into_par_iter()
        .map(|i| {
            let z = controls.control_norms(i);
            let mut ip = 0.0;
            let mut i1 = 0.0;
            let mut a = vec![0.0; steps - k0];
            let mut b = vec![0.0; steps - k0];
            for k in k0..steps {
                let h = times[k + 1] - times[k];
                ip += h * z[k].powf(p);
                i1 += h * z[k];
                a[k - k0] = ip;
                b[k - k0] = i1.powf(p);
            }
            (a, b)
        })
        .reduce(
            || (vec![0.0; steps - k0], vec![0.0; steps - k0]),
            |mut x, y| {
                for (u, v) in x.0.iter_mut().zip(&y.0) {
                    *u += v;
                }
                for (u, v) in x.1.iter_mut().zip(&y.1) {
                    *u += v;
                }
                x
            },
        );
    let mf = m as f64;
    let windows: Vec<(f64, f64, f64)> = (0..steps - k0)
        .map(|j| (times[k0 + j + 1] - anchor, sum_p[j] / mf, sum_mean_p[j] / mf))
        .collect();
    // L = E[(1/w)∫ξ^p], R = E[((1/w)∫ξ)^p]
    let lr: Vec<(f64, f64, f64)> = windows.iter().map(|&(w, ep, e1)| (w, ep / w, e1 / w.powf(p))).collect();
    let a_max = lr
        .iter()
        .filter(|(_, _, r)| *r > 0.0)
        .map(|(_, l, r)| l / r)
        .fold(f64::NAN, f64::max);
    let (span, total_p, _) = windows[windows.len() - 1];

    if lr.iter().all(|&(_, l, _)| l == 0.0) {
        return Ok(StochasticRevHolder {
            a_max: 0.0,
            a: A_FLOOR,
            b: 0.0,
            theta: None,
            margin: 0.0,
            degenerate: false,
        });
    }

    let offset = |a_c: f64| {
        lr.iter()
            .map(|&(w, l, r)| (l - a_c * r).max(0.0) * w.powf(p / 2.0))
            .fold(0.0, f64::max)
    };
    let q = p / (p - 1.0);
    let bound = |th: &ThetaResult, b_c: f64, w: f64| {
        let theta = th.theta;
        let beta = p / theta;
        let lead = theta / ((theta - p) * th.a);
        let tail = 2.0 * theta * b_c / (p * (2.0 - theta) * th.a);
        let theta_conj = theta / (theta - 1.0);
        (theta_conj / q).powf(p - 1.0)
            * w.powf(p - beta)
            * th.inverse_margin
            * (lead * span.powf(beta - 1.0) * total_p + tail * span.powf(beta - p / 2.0))
    };
    let top = if a_max.is_finite() && a_max > A_FLOOR { a_max } else { A_FLOOR };
    let mut best: Option<(f64, f64, ThetaResult, f64)> = None;
    for i in 0..=A_CANDIDATES {
        let a_c = A_FLOOR + (top - A_FLOOR) * i as f64 / A_CANDIDATES as f64;
        let b_c = offset(a_c);
        let th = stochastic_theta(p, a_c)?;
        let rhs = bound(&th, b_c, span);
        if best.as_ref().is_none_or(|(_, _, _, v)| rhs <= *v) {
            best = Some((a_c, b_c, th, rhs));
        }
        if top == A_FLOOR {
            break;
        }
    }
    let (a_c, b_c, th, _) = best.expect("at least one candidate");
    let margin = windows
        .iter()
        .map(|&(w, _, e1)| bound(&th, b_c, w) - e1)
        .fold(f64::INFINITY, f64::min);
    Ok(StochasticRevHolder {
        a_max,
        a: a_c,
        b: b_c,
        theta: Some(th),
        margin,
        degenerate: a_c <= A_FLOOR && b_c > 1e6,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bridge_fixed_point() {
        let spec = BridgeSpec::new(vec![0.3], vec![0.3], 1.0, 1.5).unwrap();
        let sde = SdeSpec::scalar(0.0).unwrap();
        let e = simulate_bridge(&spec, &sde, 0.01, 3, 1).unwrap();
        for i in 0..3 {
            assert!(e.path(i).iter().all(|&y| y == 0.3));
            assert!(e.control(i).iter().all(|&z| z == 0.0));
        }
        assert_eq!(bridge_energy_check(&e, &spec).unwrap().estimate, 0.0);
    }

    #[test]
    fn bridge_zero_noise_closed_form() {
        let spec = BridgeSpec::new(vec![1.0], vec![0.0], 1.0, 1.5).unwrap();
        let sde = SdeSpec::scalar(0.0).unwrap();
        let e = simulate_bridge(&spec, &sde, 1e-4, 1, 0).unwrap();
        let worst = e
            .times()
            .iter()
            .zip(e.path(0))
            .map(|(&t, &y)| (y - spec.deterministic_path(t)[0]).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "{worst}");
        let a = spec.alpha;
        let p = spec.p;
        let exact = a.powf(p) / (1.0 + p * (a - 1.0));
        let got = bridge_energy_check(&e, &spec).unwrap().estimate;
        assert!((got - exact).abs() < 1e-9 * exact, "{got} vs {exact}");
    }

    #[test]
    fn seeds_are_reproducible() {
        let spec = BridgeSpec::new(vec![0.0], vec![0.0], 1.0, 1.5).unwrap();
        let sde = SdeSpec::scalar(1.0).unwrap();
        let a = simulate_bridge(&spec, &sde, 0.01, 40, 7).unwrap();
        let b = simulate_bridge(&spec, &sde, 0.01, 40, 7).unwrap();
        let c = simulate_bridge(&spec, &sde, 0.01, 40, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.path(3), c.path(3));
    }

    #[test]
    fn thread_count_does_not_matter() {
        let spec = BridgeSpec::new(vec![0.0], vec![0.5], 1.0, 1.5).unwrap();
        let sde = SdeSpec::scalar(1.0).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| simulate_bridge(&spec, &sde, 0.01, 50, 3).unwrap());
        let b = three.install(|| simulate_bridge(&spec, &sde, 0.01, 50, 3).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(BridgeSpec::with_alpha(vec![0.0], vec![0.0], 1.0, 1.5, 0.2).is_err());
        assert!(BridgeSpec::new(vec![0.0], vec![0.0], 1.0, 2.0).is_err());
        let spec = BridgeSpec::new(vec![0.0], vec![0.0], 1.0, 1.5).unwrap();
        let sde = SdeSpec::scalar(1.0).unwrap();
        assert!(simulate_bridge(&spec, &sde, 0.02, 1, 0).is_err());
        let wild = SdeSpec::new(1, 1, 0.5, |_, _, out| out[0] = 1.0).unwrap();
        assert!(simulate_bridge(&spec, &wild, 0.01, 1, 0).is_err());
    }

    #[test]
    fn pure_brownian_second_moment() {
        let sde = SdeSpec::scalar(1.0).unwrap();
        let pairs = default_moment_pairs(1.0, 0.01, 30, 0.1);
        let rep = moment_bound_check(&sde, &ControlPolicy::Zero, 2.0, &pairs, 1.0, 0.01, 4000, 11).unwrap();
        assert!((rep.mean_ratio - 1.0).abs() <= 3.0 * rep.mean_ratio_stderr, "{} ± {}", rep.mean_ratio, rep.mean_ratio_stderr);
        let zero = SdeSpec::scalar(0.0).unwrap();
        let rep = moment_bound_check(&zero, &ControlPolicy::Zero, 1.5, &pairs, 1.0, 0.01, 10, 1);
        // 0/0: the denominator vanishes with σ ≡ 0 and ζ ≡ 0
        let rep = rep.unwrap();
        assert!(rep.pairs.iter().all(|q| q.increment == 0.0));
    }

    #[test]
    fn pairs_lie_on_grid() {
        let pairs = default_moment_pairs(1.0, 1e-3, 30, 0.01);
        assert_eq!(pairs.len(), 30);
        for (s, t) in pairs {
            assert!(t > s && t <= 1.0 + 1e-12 && s >= 0.0);
            assert!(((t - s) / 1e-3).round() >= 10.0);
        }
    }

    #[test]
    fn zero_control_revholder_is_trivial() {
        let times: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        let e = PathEnsemble::from_controls(times, vec![vec![0.0; 100]; 5]).unwrap();
        let r = stochastic_revholder_check(&e, 1.5, 0.0).unwrap();
        assert!(r.margin >= 0.0);
        assert!(!r.degenerate);
    }

    #[test]
    fn stat_row_layout() {
        let mut buf = Vec::new();
        write_stat_rows(&[StatRow::new("energy", 0.5, 0.01, 2.0)], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "quantity,estimate,stderr,bound,ratio\nenergy,0.5,0.01,2,0.25\n"
        );
    }
}
