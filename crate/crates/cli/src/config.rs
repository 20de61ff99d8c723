//! Run configuration: TOML schema and semantic validation.

use std::path::PathBuf;

use alet::landscape::{Arc, TubeCell};
use alet::quantum::{HamiltonianTerm, LambdaMode, PauliString};
use alet::slicing::DentSliceModel;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Flat,
    Global,
    SliceStats,
    LandscapeAudit,
    Bench,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Flat => "flat",
            Mode::Global => "global",
            Mode::SliceStats => "slice-stats",
            Mode::LandscapeAudit => "landscape-audit",
            Mode::Bench => "bench",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub oracle: Option<OracleConfig>,
    pub flat: Option<FlatSection>,
    pub engine: Option<EngineSection>,
    pub global: Option<GlobalSection>,
    pub slice_stats: Option<SliceSection>,
    pub audit: Option<AuditSection>,
    pub bench: Option<BenchSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OracleConfig {
    Dent(DentConfig),
    Tube(TubeConfig),
    Quantum(QuantumConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DentConfig {
    pub p: usize,
    pub normal_axes: Vec<usize>,
    pub offsets: Vec<f64>,
    pub curvatures: Vec<f64>,
    #[serde(default)]
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeConfig {
    pub p: usize,
    pub normal_axes: Vec<usize>,
    pub offsets: Vec<f64>,
    pub curvatures: Vec<f64>,
    pub fiber_axis: usize,
    pub base_axes: Vec<usize>,
    #[serde(default)]
    pub fiber_center: f64,
    pub penalty: f64,
    #[serde(default)]
    pub floor: f64,
    pub cells: Vec<CellConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub arcs: Vec<ArcConfig>,
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcConfig {
    pub start: f64,
    pub length: f64,
}

impl From<&CellConfig> for TubeCell {
    fn from(c: &CellConfig) -> Self {
        TubeCell {
            arcs: c
                .arcs
                .iter()
                .map(|a| Arc {
                    start: a.start,
                    length: a.length,
                })
                .collect(),
            half_width: c.half_width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumConfig {
    pub n_qubits: usize,
    pub generators: Vec<PauliString>,
    pub tying: Option<Vec<usize>>,
    pub hamiltonian: Vec<HamiltonianTerm>,
    /// Explicit `Λ`; otherwise computed with `lambda_mode`.
    pub lambda: Option<f64>,
    pub lambda_mode: Option<LambdaMode>,
    pub max_qubits: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatSection {
    pub axes: Vec<usize>,
    pub base: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    pub lipschitz: Option<f64>,
    pub r0: Option<f64>,
    pub r_fin: f64,
    pub shrink: Option<f64>,
    pub delta_noise: Option<f64>,
    pub c1: Option<f64>,
    pub noise: NoiseSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: NoiseKind,
    pub range: Option<f64>,
    pub n_shots: Option<u64>,
    pub target: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Exact,
    Scheduled,
    FixedRadius,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalSection {
    pub axes: Vec<usize>,
    pub regularity: f64,
    pub delta_int: f64,
    pub delta_noise: f64,
    /// Extra uniform points checked per survivor ball in ground-truth metrics.
    pub truth_samples_per_ball: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSection {
    pub n_samples: u64,
    pub models: Vec<SliceModelConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceModelConfig {
    pub id: String,
    #[serde(default)]
    pub band: Option<BandConfig>,
    #[serde(default)]
    pub tube: Option<TubeSetConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub m: usize,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeSetConfig {
    pub m: usize,
    pub cells: Vec<CellConfig>,
}

impl SliceModelConfig {
    pub fn model(&self) -> Result<DentSliceModel, String> {
        match (&self.band, &self.tube) {
            (Some(b), None) => Ok(DentSliceModel::Band {
                m: b.m,
                width: b.width,
            }),
            (None, Some(t)) => alet::landscape::TubeDentSet::new(
                t.m,
                t.cells.iter().map(TubeCell::from).collect(),
            )
            .map(|tube| DentSliceModel::Tube { tube })
            .map_err(|e| e.to_string()),
            _ => Err("exactly one of `band` or `tube` must be given".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    pub n_theta: usize,
    pub fd_step: Option<f64>,
    pub kdot_step: Option<f64>,
    pub rank_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub dims: Vec<usize>,
    pub epsilons: Vec<f64>,
    /// Dent curvature, which is also the Lipschitz constant.
    pub curvature: Option<f64>,
    pub range: Option<f64>,
    pub delta_noise: Option<f64>,
    /// Constant of the reported query bound.
    pub c0: Option<f64>,
}

/// Parses TOML, reporting the field path of schema violations.
pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let de = toml::de::Deserializer::parse(text)
        .map_err(|e| CliError::Validation(vec![format!("config: {e}")]))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.message().trim().to_string();
        CliError::Validation(vec![if path == "." {
            msg
        } else {
            format!("{path}: {msg}")
        }])
    })
}

/// Collects semantic problems, each prefixed by the offending field path.
pub fn validate(cfg: &RunConfig, mode: Mode) -> Result<(), CliError> {
    let mut errs: Vec<String> = Vec::new();
    let mut unused = |present: bool, name: &str| {
        if present {
            errs.push(format!("{name}: section is not used in {} mode", mode.name()));
        }
    };
    let needs_oracle = matches!(mode, Mode::Flat | Mode::Global | Mode::LandscapeAudit);
    let needs_engine = matches!(mode, Mode::Flat | Mode::Global);
    unused(!needs_oracle && cfg.oracle.is_some(), "oracle");
    unused(!needs_engine && cfg.engine.is_some(), "engine");
    unused(mode != Mode::Flat && cfg.flat.is_some(), "flat");
    unused(mode != Mode::Global && cfg.global.is_some(), "global");
    unused(mode != Mode::SliceStats && cfg.slice_stats.is_some(), "slice_stats");
    unused(mode != Mode::LandscapeAudit && cfg.audit.is_some(), "audit");
    unused(mode != Mode::Bench && cfg.bench.is_some(), "bench");

    let mut require = |present: bool, name: &str| {
        if !present {
            errs.push(format!("{name}: required in {} mode", mode.name()));
        }
    };
    require(!needs_oracle || cfg.oracle.is_some(), "oracle");
    require(!needs_engine || cfg.engine.is_some(), "engine");
    require(mode != Mode::Flat || cfg.flat.is_some(), "flat");
    require(mode != Mode::Global || cfg.global.is_some(), "global");
    require(mode != Mode::SliceStats || cfg.slice_stats.is_some(), "slice_stats");
    require(mode != Mode::LandscapeAudit || cfg.audit.is_some(), "audit");
    require(mode != Mode::Bench || cfg.bench.is_some(), "bench");

    if mode == Mode::LandscapeAudit && !matches!(cfg.oracle, Some(OracleConfig::Quantum(_)) | None) {
        errs.push("oracle.kind: landscape-audit needs a quantum oracle".into());
    }

    if let Some(e) = &cfg.engine {
        match (mode, e.delta_noise) {
            (Mode::Flat, None) => errs.push("engine.delta_noise: required in flat mode".into()),
            (Mode::Global, Some(_)) => errs.push(
                "engine.delta_noise: not allowed in global mode; set global.delta_noise".into(),
            ),
            _ => {}
        }
        if let Some(d) = e.delta_noise {
            if !(d > 0.0 && d < 1.0) {
                errs.push(format!("engine.delta_noise: {d} outside (0, 1)"));
            }
        }
        if !(e.r_fin > 0.0) {
            errs.push(format!("engine.r_fin: {} must be positive", e.r_fin));
        }
        if let (Some(r0), true) = (e.r0, e.r_fin > 0.0) {
            if r0 < e.r_fin {
                errs.push(format!("engine.r0: {r0} is below engine.r_fin = {}", e.r_fin));
            }
        }
        if let Some(s) = e.shrink {
            if !(s > 1.0) {
                errs.push(format!("engine.shrink: {s} must exceed 1"));
            }
        }
        if let Some(l) = e.lipschitz {
            if !(l >= 0.0 && l.is_finite()) {
                errs.push(format!("engine.lipschitz: {l} must be non-negative"));
            }
        }
        let n = &e.noise;
        match n.kind {
            NoiseKind::Exact => {
                for (v, f) in [(n.range.is_some(), "range"), (n.n_shots.is_some(), "n_shots"), (n.target.is_some(), "target")] {
                    if v {
                        errs.push(format!("engine.noise.{f}: not used by exact noise"));
                    }
                }
            }
            NoiseKind::Scheduled | NoiseKind::FixedRadius => {
                if n.n_shots.is_none() && n.kind == NoiseKind::Scheduled {
                    errs.push("engine.noise.n_shots: required for scheduled noise".into());
                }
                if n.n_shots == Some(0) {
                    errs.push("engine.noise.n_shots: must be at least 1".into());
                }
                if let Some(r) = n.range {
                    if !(r > 0.0) {
                        errs.push(format!("engine.noise.range: {r} must be positive"));
                    }
                }
                match (n.kind, n.target) {
                    (NoiseKind::FixedRadius, None) => {
                        errs.push("engine.noise.target: required for fixed-radius noise".into())
                    }
                    (NoiseKind::FixedRadius, Some(t)) if !(t > 0.0) => {
                        errs.push(format!("engine.noise.target: {t} must be positive"))
                    }
                    (NoiseKind::Scheduled, Some(_)) => {
                        errs.push("engine.noise.target: not used by scheduled noise".into())
                    }
                    _ => {}
                }
            }
        }
    }

    if let Some(g) = &cfg.global {
        for (v, f) in [(g.delta_int, "delta_int"), (g.delta_noise, "delta_noise")] {
            if !(v > 0.0 && v < 1.0) {
                errs.push(format!("global.{f}: {v} outside (0, 1)"));
            }
        }
        if g.delta_int + g.delta_noise > 1.0 {
            errs.push(format!(
                "global.delta_int + global.delta_noise = {} exceeds 1",
                g.delta_int + g.delta_noise
            ));
        }
        if !(g.regularity >= 1.0) {
            errs.push(format!("global.regularity: {} must be at least 1", g.regularity));
        }
    }

    if let Some(s) = &cfg.slice_stats {
        if s.n_samples == 0 {
            errs.push("slice_stats.n_samples: must be at least 1".into());
        }
        if s.models.is_empty() {
            errs.push("slice_stats.models: at least one model is required".into());
        }
        for (i, m) in s.models.iter().enumerate() {
            if let Err(e) = m.model() {
                errs.push(format!("slice_stats.models[{i}]: {e}"));
            }
        }
    }

    if let Some(a) = &cfg.audit {
        if a.n_theta == 0 {
            errs.push("audit.n_theta: must be at least 1".into());
        }
        if let Some(t) = a.rank_tol {
            if !(t > 0.0 && t < 1.0) {
                errs.push(format!("audit.rank_tol: {t} outside (0, 1)"));
            }
        }
        for (v, f) in [(a.fd_step, "fd_step"), (a.kdot_step, "kdot_step")] {
            if let Some(h) = v {
                if !(h > 0.0) {
                    errs.push(format!("audit.{f}: {h} must be positive"));
                }
            }
        }
    }

    if let Some(b) = &cfg.bench {
        if b.dims.is_empty() || b.dims.contains(&0) {
            errs.push("bench.dims: need one or more positive dimensions".into());
        }
        if b.epsilons.is_empty() || b.epsilons.iter().any(|e| !(*e > 0.0)) {
            errs.push("bench.epsilons: need one or more positive targets".into());
        }
        if let Some(c) = b.curvature {
            if !(c > 0.0) {
                errs.push(format!("bench.curvature: {c} must be positive"));
            }
        }
    }

    if errs.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(errs))
    }
}
