//! JSON experiment configuration. Every field has a default, unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use holder_hj::value_solver::Interpolation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Conjugates,
    BenchmarkQuadratic,
    Counterexample,
    Revholder,
    Hardy,
    Bridge,
    Moments,
    Gallery,
    FullSuite,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Conjugates,
        Experiment::BenchmarkQuadratic,
        Experiment::Gallery,
        Experiment::Counterexample,
        Experiment::Revholder,
        Experiment::Hardy,
        Experiment::Bridge,
        Experiment::Moments,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Conjugates => "conjugates",
            Experiment::BenchmarkQuadratic => "benchmark-quadratic",
            Experiment::Counterexample => "counterexample",
            Experiment::Revholder => "revholder",
            Experiment::Hardy => "hardy",
            Experiment::Bridge => "bridge",
            Experiment::Moments => "moments",
            Experiment::Gallery => "gallery",
            Experiment::FullSuite => "full-suite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Linear,
    MonotoneCubic,
}

impl From<Scheme> for Interpolation {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Linear => Interpolation::Linear,
            Scheme::MonotoneCubic => Interpolation::MonotoneCubic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub out: PathBuf,
    pub conjugates: ConjugatesConfig,
    pub benchmark: BenchmarkConfig,
    pub counterexample: CounterexampleConfig,
    pub revholder: RevholderConfig,
    pub hardy: HardyConfig,
    pub bridge: BridgeConfig,
    pub moments: MomentsConfig,
    pub gallery: GalleryConfig,
    pub tolerances: Tolerances,
    /// Rerun the suite into a scratch directory and compare CSV bytes.
    pub determinism_rerun: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::FullSuite,
            seed: 20_240_611,
            out: PathBuf::from("artifacts"),
            conjugates: ConjugatesConfig::default(),
            benchmark: BenchmarkConfig::default(),
            counterexample: CounterexampleConfig::default(),
            revholder: RevholderConfig::default(),
            hardy: HardyConfig::default(),
            bridge: BridgeConfig::default(),
            moments: MomentsConfig::default(),
            gallery: GalleryConfig::default(),
            tolerances: Tolerances::default(),
            determinism_rerun: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConjugatesConfig {
    pub q: f64,
    pub delta: f64,
    /// Random `(q, δ)` pairs for the oracle cross-check.
    pub instances: usize,
    pub duals_per_instance: usize,
    pub oracle_samples: usize,
}

impl Default for ConjugatesConfig {
    fn default() -> Self {
        Self {
            q: 2.0,
            delta: 1.0,
            instances: 50,
            duals_per_instance: 20,
            oracle_samples: 5_001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    pub x_nodes: usize,
    pub t_nodes: usize,
    pub csv_stride: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            x_nodes: 401,
            t_nodes: 401,
            csv_stride: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterexampleConfig {
    pub n: Vec<u32>,
    pub gamma: f64,
    #[serde(rename = "G")]
    pub big_g: f64,
    /// Grid of the Lipschitz and Hölder measurements.
    pub x_nodes: usize,
    pub t_nodes: usize,
    /// Grid of the arc, value and energy checks; defaults to `2·x_nodes − 1`
    /// by `t_nodes`.
    pub arc_x_nodes: Option<usize>,
    pub arc_t_nodes: Option<usize>,
    pub interpolation: Scheme,
    pub csv_stride: usize,
    /// Nodes of the direct evaluation of the functional on `t^γ`.
    pub functional_nodes: usize,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self {
            n: vec![4, 8, 16, 32],
            gamma: 0.75,
            big_g: 1.5,
            x_nodes: 801,
            t_nodes: 801,
            arc_x_nodes: None,
            arc_t_nodes: None,
            interpolation: Scheme::MonotoneCubic,
            csv_stride: 4,
            functional_nodes: 10_000,
        }
    }
}

impl CounterexampleConfig {
    pub fn arc_grid(&self) -> (usize, usize) {
        (
            self.arc_x_nodes.unwrap_or(2 * self.x_nodes - 1),
            self.arc_t_nodes.unwrap_or(self.t_nodes),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RevholderConfig {
    pub p: f64,
    pub gamma: f64,
    pub backoff: f64,
    pub instances: usize,
    pub cells: usize,
}

impl Default for RevholderConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            gamma: 0.75,
            backoff: 0.95,
            instances: 100,
            cells: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HardyConfig {
    pub p: f64,
    pub theta: f64,
    pub instances: usize,
    pub cells: usize,
}

impl Default for HardyConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            theta: 4.0,
            instances: 100,
            cells: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BridgeConfig {
    pub p: f64,
    pub sigma: f64,
    /// Defaults to `3/4 + 1/(2p)`.
    pub alpha: Option<f64>,
    pub horizons: Vec<f64>,
    pub dt: f64,
    pub paths: usize,
    /// Paths written to disk per ensemble.
    pub persist_paths: usize,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            p: 1.5,
            sigma: 1.0,
            alpha: None,
            horizons: vec![0.25, 0.5, 1.0],
            dt: 1e-3,
            paths: 20_000,
            persist_paths: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentsConfig {
    pub r: f64,
    pub sigma: f64,
    pub drift: f64,
    pub pairs: usize,
    pub min_len: f64,
    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
}

impl Default for MomentsConfig {
    fn default() -> Self {
        Self {
            r: 1.5,
            sigma: 1.0,
            drift: 1.0,
            pairs: 30,
            min_len: 0.01,
            horizon: 1.0,
            dt: 1e-3,
            paths: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GalleryConfig {
    pub gamma: f64,
    #[serde(rename = "G")]
    pub big_g: f64,
    pub nodes: usize,
    pub positions: usize,
    pub fd_step: f64,
    pub margin: f64,
}

impl Default for GalleryConfig {
    fn default() -> Self {
        Self {
            gamma: 0.75,
            big_g: 1.5,
            nodes: 6,
            positions: 21,
            fd_step: 1e-3,
            margin: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub slack: f64,
    pub decay_window: (f64, f64),
    pub value_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            slack: 1.25,
            decay_window: (0.02, 0.5),
            value_slack: 0.05,
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(ConfigError(msg()))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let gamma_min = 2.0 - std::f64::consts::SQRT_2;
        let c = &self.conjugates;
        check(c.q > 1.0 && c.q.is_finite(), || format!("conjugates.q must exceed 1, got {}", c.q))?;
        check(c.delta >= 1.0 && c.delta.is_finite(), || format!("conjugates.delta must be >= 1, got {}", c.delta))?;
        check(c.instances >= 1 && c.duals_per_instance >= 1, || "conjugates needs at least one instance".into())?;
        check((1000..=200_001).contains(&c.oracle_samples), || {
            format!("conjugates.oracle_samples must lie in [1000, 200001], got {}", c.oracle_samples)
        })?;

        let b = &self.benchmark;
        check(b.x_nodes >= 3 && b.t_nodes >= 3, || "benchmark grid needs at least 3x3 nodes".into())?;
        check(b.csv_stride >= 1, || "benchmark.csv_stride must be positive".into())?;

        let ce = &self.counterexample;
        check(!ce.n.is_empty() && ce.n.iter().all(|&n| n >= 1), || "counterexample.n must list positive integers".into())?;
        check(ce.gamma > gamma_min && ce.gamma < 1.0, || {
            format!("counterexample.gamma must lie in (2 - sqrt 2, 1), got {}", ce.gamma)
        })?;
        let floor = ce.gamma * ce.gamma / (2.0 * ce.gamma - 1.0);
        check(ce.big_g > floor, || format!("counterexample.G must exceed {floor}, got {}", ce.big_g))?;
        let (ax, at) = ce.arc_grid();
        check(ce.x_nodes >= 3 && ce.t_nodes >= 3 && ax >= 3 && at >= 3, || {
            "counterexample grids need at least 3x3 nodes".into()
        })?;
        check(ce.csv_stride >= 1, || "counterexample.csv_stride must be positive".into())?;
        check(ce.functional_nodes >= 2, || "counterexample.functional_nodes must be at least 2".into())?;

        let r = &self.revholder;
        check(r.p > 1.0 && r.p.is_finite(), || format!("revholder.p must exceed 1, got {}", r.p))?;
        check(r.gamma > gamma_min && r.gamma < 1.0, || {
            format!("revholder.gamma must lie in (2 - sqrt 2, 1), got {}", r.gamma)
        })?;
        check(r.backoff > 0.0 && r.backoff < 1.0, || format!("revholder.backoff must lie in (0, 1), got {}", r.backoff))?;
        check(r.cells >= 10, || "revholder.cells must be at least 10".into())?;

        let h = &self.hardy;
        check(h.p > 1.0 && h.theta > h.p, || format!("hardy needs theta > p > 1, got p = {}, theta = {}", h.p, h.theta))?;
        check(h.cells >= 10, || "hardy.cells must be at least 10".into())?;

        let br = &self.bridge;
        check(br.p > 1.0 && br.p < 2.0, || format!("bridge.p must lie in (1, 2), got {}", br.p))?;
        check(br.sigma.is_finite(), || "bridge.sigma must be finite".into())?;
        check(!br.horizons.is_empty() && br.horizons.iter().all(|&t| t > 0.0 && t.is_finite()), || {
            "bridge.horizons must be positive".into()
        })?;
        check(br.dt > 0.0 && br.horizons.iter().all(|&t| br.dt <= t / 100.0 * (1.0 + 1e-12)), || {
            format!("bridge.dt must be positive and at most T/100 for every horizon, got {}", br.dt)
        })?;
        check(br.paths >= 20, || format!("bridge.paths must be at least 20, got {}", br.paths))?;
        if let Some(a) = br.alpha {
            check(a > 1.0 - 1.0 / br.p && a < 2.0, || format!("bridge.alpha must lie in (1 - 1/p, 2), got {a}"))?;
        }

        let m = &self.moments;
        check(m.r > 0.0 && m.r.is_finite(), || format!("moments.r must be positive, got {}", m.r))?;
        check(m.pairs >= 1, || "moments.pairs must be positive".into())?;
        check(m.horizon > 0.0 && m.dt > 0.0 && m.dt < m.horizon, || "moments needs 0 < dt < horizon".into())?;
        check(m.min_len > 0.0 && m.min_len <= m.horizon, || "moments.min_len must lie in (0, horizon]".into())?;
        check(m.paths >= 20, || format!("moments.paths must be at least 20, got {}", m.paths))?;

        let g = &self.gallery;
        check(g.gamma > gamma_min && g.gamma < 1.0, || {
            format!("gallery.gamma must lie in (2 - sqrt 2, 1), got {}", g.gamma)
        })?;
        check(g.big_g > g.gamma * g.gamma / (2.0 * g.gamma - 1.0), || "gallery.G too small".into())?;
        check((2..=6).contains(&g.nodes) && (2..=21).contains(&g.positions), || {
            format!("gallery brute force is limited to 6 nodes x 21 positions, got {} x {}", g.nodes, g.positions)
        })?;
        check(g.margin > 0.0 && g.fd_step > 0.0 && g.fd_step <= g.margin / 10.0, || {
            "gallery needs 0 < fd_step <= margin/10".into()
        })?;

        let t = &self.tolerances;
        check(t.slack >= 1.0, || format!("tolerances.slack must be >= 1, got {}", t.slack))?;
        let (lo, hi) = t.decay_window;
        check(lo > 0.0 && lo < hi && hi <= 1.0, || format!("tolerances.decay_window must satisfy 0 < lo < hi <= 1, got ({lo}, {hi})"))?;
        check(t.value_slack >= 0.0, || "tolerances.value_slack must be nonnegative".into())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_fail() {
        assert!(ExperimentConfig::from_json(r#"{"experimnet": "gallery"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"bridge": {"pathz": 3}}"#).is_err());
    }

    #[test]
    fn ranges_are_checked() {
        assert!(ExperimentConfig::from_json(r#"{"bridge": {"p": 2.5}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"counterexample": {"gamma": 0.5}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"gallery": {"nodes": 7}}"#).is_err());
        let ok = ExperimentConfig::from_json(r#"{"experiment": "counterexample", "counterexample": {"n": [4], "x_nodes": 51, "t_nodes": 51}}"#).unwrap();
        assert_eq!(ok.counterexample.arc_grid(), (101, 51));
    }
}
