//! Power-law envelope Hamiltonians, their convex conjugates and the Hopf-Lax step.
//!
//! A Hamiltonian `H(x, t, z)` enters only through the pinching
//! `(1/δ)|z|^q − η₋ ≤ H ≤ δ|z|^q + η₊`. The upper envelope `H₊ = δ|z|^q + η₊`
//! drives the super-solution arc construction, the lower envelope
//! `H₋ = (1/δ)|z|^q − η₋` the sub-solution bound. Both conjugates are power laws
//! `H₊*(w) = C₊|w|^p − η₊`, `H₋*(w) = C₋|w|^p + η₋`.

use rayon::prelude::*;

use crate::error::{ensure, Error, Result};
use crate::grid::UniformGrid;

/// Conjugate exponent `p = q/(q−1)`.
pub fn conjugate_exponent(q: f64) -> f64 {
    q / (q - 1.0)
}

/// Growth-condition parameters with the derived conjugate constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthEnvelope {
    pub q: f64,
    pub p: f64,
    pub delta: f64,
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub bound_m: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub c_zero: f64,
    pub c_one: f64,
}

impl GrowthEnvelope {
    /// Derives `p`, `C₊`, `C₋`, `C₀ = (η₊+η₋)/C₊` and `C₁ = δ^{2p/q}`.
    pub fn derive(q: f64, delta: f64, eta_plus: f64, eta_minus: f64, bound_m: f64) -> Result<Self> {
        ensure(q.is_finite() && q > 1.0, "q", || format!("need q > 1, got {q}"))?;
        ensure(delta.is_finite() && delta >= 1.0, "delta", || {
            format!("need delta >= 1, got {delta}")
        })?;
        ensure(eta_plus.is_finite() && eta_plus >= 0.0, "eta_plus", || {
            format!("need eta_plus >= 0, got {eta_plus}")
        })?;
        ensure(eta_minus.is_finite() && eta_minus >= 0.0, "eta_minus", || {
            format!("need eta_minus >= 0, got {eta_minus}")
        })?;
        ensure(bound_m.is_finite() && bound_m >= 0.0, "bound_m", || {
            format!("need bound_M >= 0, got {bound_m}")
        })?;
        let p = conjugate_exponent(q);
        let p_over_q = p / q;
        let base = p * q.powf(p_over_q);
        let c_plus = delta.powf(-p_over_q) / base;
        let c_minus = delta.powf(p_over_q) / base;
        Ok(Self {
            q,
            p,
            delta,
            eta_plus,
            eta_minus,
            bound_m,
            c_plus,
            c_minus,
            c_zero: (eta_plus + eta_minus) / c_plus,
            c_one: delta.powf(2.0 * p_over_q),
        })
    }

    /// `η = η₊ + η₋`.
    pub fn eta(&self) -> f64 {
        self.eta_plus + self.eta_minus
    }

    /// `H₊(z) = δ|z|^q + η₊` as a function of `|z|`.
    pub fn upper_hamiltonian(&self, z_norm: f64) -> f64 {
        self.delta * z_norm.abs().powf(self.q) + self.eta_plus
    }

    /// `H₋(z) = |z|^q/δ − η₋` as a function of `|z|`.
    pub fn lower_hamiltonian(&self, z_norm: f64) -> f64 {
        z_norm.abs().powf(self.q) / self.delta - self.eta_minus
    }

    /// `H₊*(w) = C₊|w|^p − η₊`.
    pub fn upper_conjugate(&self, w_norm: f64) -> f64 {
        self.c_plus * w_norm.abs().powf(self.p) - self.eta_plus
    }

    /// `H₋*(w) = C₋|w|^p + η₋`.
    pub fn lower_conjugate(&self, w_norm: f64) -> f64 {
        self.c_minus * w_norm.abs().powf(self.p) + self.eta_minus
    }

    pub fn upper_kernel(&self) -> ConjugateKernel {
        ConjugateKernel {
            coeff: self.c_plus,
            exponent: self.p,
            offset: -self.eta_plus,
        }
    }

    pub fn lower_kernel(&self) -> ConjugateKernel {
        ConjugateKernel {
            coeff: self.c_minus,
            exponent: self.p,
            offset: self.eta_minus,
        }
    }

    /// Search radius for one Hopf-Lax step of length `tau` on a horizon of
    /// length `horizon`: twice the displacement allowed by the a priori energy
    /// budget `∫|ξ'|^p ≤ (2M + η₊T)/C₊`.
    pub fn hopf_lax_window(&self, tau: f64, horizon: f64) -> f64 {
        let budget = (2.0 * self.bound_m + self.eta_plus * horizon) / self.c_plus;
        2.0 * budget.powf(1.0 / self.p) * tau.powf(1.0 / self.q)
    }
}

/// The power-law conjugate `H*(w) = coeff·|w|^exponent + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateKernel {
    pub coeff: f64,
    pub exponent: f64,
    /// `H*(0)`: `−η₊` for the upper envelope, `+η₋` for the lower one.
    pub offset: f64,
}

impl ConjugateKernel {
    /// `tau·H*((y−x)/tau)`.
    #[inline]
    pub fn step_cost(&self, displacement: f64, tau: f64) -> f64 {
        tau * (self.coeff * (displacement.abs() / tau).powf(self.exponent) + self.offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfLaxOptions {
    /// Only grid points with `|y − x| ≤ window` compete.
    pub window: f64,
    /// Refine the discrete argmin with a three-point parabola.
    pub refine: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfLaxStep {
    pub values: Vec<f64>,
    /// Minimizing `y` for each node (off-grid when refined).
    pub argmin: Vec<f64>,
    /// Nodes whose minimizer sits on the edge of the truncated search window.
    pub boundary_hits: usize,
}

/// One Hopf-Lax step on a uniform grid:
/// `v(x) = min_y { tau·H*((y−x)/tau) + u_prev(y) }` over grid points `y`
/// with `|y − x| ≤ window`.
///
/// Ties go to the smallest `|y − x|`, then to the smaller `y`.
pub fn hopf_lax_step(
    grid: &UniformGrid,
    u_prev: &[f64],
    tau: f64,
    kernel: ConjugateKernel,
    opts: &HopfLaxOptions,
) -> Result<HopfLaxStep> {
    ensure(tau.is_finite() && tau > 0.0, "tau", || format!("need tau > 0, got {tau}"))?;
    ensure(kernel.exponent > 1.0, "conjugate_exponent", || {
        format!("need p > 1, got {}", kernel.exponent)
    })?;
    ensure(opts.window >= 0.0, "window", || format!("negative window {}", opts.window))?;
    if u_prev.len() != grid.len() {
        return Err(Error::DegenerateGrid(format!(
            "{} values on a {}-node grid",
            u_prev.len(),
            grid.len()
        )));
    }
    let n = grid.len();
    let h = grid.step();
    let reach = ((opts.window / h) * (1.0 + 1e-12)).floor() as usize;
    let cost = |i: usize, j: usize| kernel.step_cost((j as f64 - i as f64) * h, tau) + u_prev[j];

    let per_node: Vec<(f64, f64, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let lo = i.saturating_sub(reach);
            let hi = (i + reach).min(n - 1);
            let mut best_j = i;
            let mut best = cost(i, i);
            for d in 1..=reach {
                if d <= i {
                    let c = cost(i, i - d);
                    if c < best {
                        best = c;
                        best_j = i - d;
                    }
                }
                if i + d < n {
                    let c = cost(i, i + d);
                    if c < best {
                        best = c;
                        best_j = i + d;
                    }
                }
            }
            let hit = best_j != i && (best_j == lo || best_j == hi);
            let mut y = grid.node(best_j);
            if opts.refine && best_j > lo && best_j < hi {
                let (fm, f0, fp) = (cost(i, best_j - 1), best, cost(i, best_j + 1));
                let curv = fm - 2.0 * f0 + fp;
                if curv > 0.0 {
                    let shift = (0.5 * (fm - fp) / curv).clamp(-1.0, 1.0);
                    best = f0 - 0.25 * (fm - fp) * shift;
                    y += shift * h;
                }
            }
            (best, y, hit)
        })
        .collect();

    let boundary_hits = per_node.iter().filter(|r| r.2).count();
    let (values, argmin) = per_node.into_iter().map(|(v, y, _)| (v, y)).unzip();
    Ok(HopfLaxStep {
        values,
        argmin,
        boundary_hits,
    })
}

/// The sub-solution bound
/// `u(x, s) ≤ u(y, t) + C₋(s−t)^{1−p}|y−x|^p + η₋(s−t)` for `s > t`.
pub fn one_sided_upper_bound(
    u_at_y_t: f64,
    x: &[f64],
    y: &[f64],
    s: f64,
    t: f64,
    env: &GrowthEnvelope,
) -> Result<f64> {
    ensure(s > t, "s", || format!("need s > t, got s = {s}, t = {t}"))?;
    ensure(x.len() == y.len(), "y", || {
        format!("dimension mismatch: {} vs {}", x.len(), y.len())
    })?;
    let dist = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let dt = s - t;
    Ok(u_at_y_t + env.c_minus * dt.powf(1.0 - env.p) * dist.powf(env.p) + env.eta_minus * dt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    pub maximizer: Vec<f64>,
    /// The maximizer lies on the edge of the search box: enlarge the radius.
    pub on_boundary: bool,
}

const ORACLE_CHUNK: usize = 4096;

/// Brute-force convex conjugate `sup_z { z·w − H(z) }` over a uniform grid of
/// `samples` points per axis on `[−radius, radius]^N`.
///
/// Grids with `samples` and `2·samples − 1` points are nested, so the value is
/// nondecreasing along that refinement.
pub fn legendre_oracle<H>(hamiltonian: H, w: &[f64], search_radius: f64, samples: usize) -> Result<OracleResult>
where
    H: Fn(&[f64]) -> f64 + Sync,
{
    ensure(!w.is_empty(), "w", || "empty dual vector".into())?;
    ensure(samples >= 1000, "samples", || format!("need >= 1000 per axis, got {samples}"))?;
    ensure(search_radius > 0.0 && search_radius.is_finite(), "search_radius", || {
        format!("need a positive radius, got {search_radius}")
    })?;
    let dim = w.len();
    let total = (samples as f64).powi(dim as i32);
    if total > 1e8 {
        return Err(Error::TooLarge(format!("{samples}^{dim} oracle samples")));
    }
    let axis = UniformGrid::new(-search_radius, search_radius, samples)?;

    // Flat index over the sample lattice, parallel over contiguous chunks;
    // ties go to the smallest index so the result is thread-count independent.
    let total = samples.pow(dim as u32);
    let decode = |mut flat: usize, z: &mut [f64]| {
        for zk in z.iter_mut().rev() {
            *zk = axis.node(flat % samples);
            flat /= samples;
        }
    };
    let best = (0..total.div_ceil(ORACLE_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut z = vec![0.0; dim];
            let mut best = (f64::NEG_INFINITY, usize::MAX);
            for flat in c * ORACLE_CHUNK..((c + 1) * ORACLE_CHUNK).min(total) {
                decode(flat, &mut z);
                let val = z.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() - hamiltonian(&z);
                if val > best.0 || best.1 == usize::MAX {
                    best = (val, flat);
                }
            }
            best
        })
        .reduce_with(|a, b| match b.0.partial_cmp(&a.0) {
            Some(std::cmp::Ordering::Greater) => b,
            Some(std::cmp::Ordering::Equal) if b.1 < a.1 => b,
            _ => a,
        })
        .expect("samples > 0");

    let mut maximizer = vec![0.0; dim];
    decode(best.1, &mut maximizer);
    let mut flat = best.1;
    let mut on_boundary = false;
    for _ in 0..dim {
        let i = flat % samples;
        on_boundary |= i == 0 || i == samples - 1;
        flat /= samples;
    }
    Ok(OracleResult {
        value: best.0,
        maximizer,
        on_boundary,
    })
}
