//! Mode execution and report emission.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use alet::engine::{default_r0, plan_resolution, query_bound, run_flat, trace_csv, EngineConfig, FlatResult, RoundRecord};
use alet::landscape::{DentLandscape, TubeCell, TubeDentLandscape, TubeDentParams, TubeDentSet};
use alet::multi_flat::{run_global, truth_metrics, ExcludedFlat, GlobalConfig, SurvivorPatch, TruthMetrics};
use alet::noise::{stream, substream_rng, substream_seed, NoiseMode, NoiseSpec};
use alet::oracle::{CostOracle, GroundTruth};
use alet::quantum::{
    lambda_bound, spectral_rank, Ansatz, Hamiltonian, LambdaMode, QuantumModel, DEFAULT_KDOT_STEP,
    DEFAULT_MAX_QUBITS, DEFAULT_RANK_TOL,
};
use alet::slicing::{fiber_regularity_check, slice_moments, stats_csv, translation_average_check, ExactMoments, SliceStats};
use alet::torus::{FlatSpec, TorusPoint, TAU};
use rand::Rng;
use serde::Serialize;

use crate::config::{self, Mode, NoiseKind, OracleConfig, RunConfig};
use crate::error::CliError;
use crate::report::{f, write_csv, write_json};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Relative threshold of the finite-difference Hessian rank in audits.
const HESSIAN_RANK_TOL: f64 = 1e-5;

/// Parsed command line of one invocation.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    /// Mode implied by the subcommand, if any.
    pub mode: Option<Mode>,
}

pub fn execute(inv: &Invocation) -> Result<PathBuf, CliError> {
    let text = fs::read_to_string(&inv.config).map_err(|e| {
        CliError::Validation(vec![format!("config: cannot read {}: {e}", inv.config.display())])
    })?;
    let mut cfg = config::parse(&text)?;
    let mode = match (cfg.mode, inv.mode) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Validation(vec![format!(
                "mode: config selects {} but the subcommand requires {}",
                a.name(),
                b.name()
            )]))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(CliError::Validation(vec!["mode: required".into()])),
    };
    config::validate(&cfg, mode)?;
    let seed = inv.seed.or(cfg.seed).unwrap_or(0);
    let out = inv
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("alet-out"));
    // the echo is independent of where results are written
    cfg.mode = Some(mode);
    cfg.seed = Some(seed);
    cfg.out = None;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(inv.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Validation(vec![format!("workers: {e}")]))?;
    fs::create_dir_all(&out)?;
    let start = Instant::now();
    let result = pool.install(|| match mode {
        Mode::Flat => run_flat_mode(&cfg, seed, &out),
        Mode::Global => run_global_mode(&cfg, seed, &out),
        Mode::SliceStats => run_slice_mode(&cfg, seed, &out),
        Mode::LandscapeAudit => run_audit_mode(&cfg, seed, &out),
        Mode::Bench => run_bench_mode(&cfg, seed, &out),
    });
    #[derive(Serialize)]
    struct Timing {
        wall_seconds: f64,
        workers: usize,
    }
    write_json(
        &out,
        "timing.json",
        &Timing {
            wall_seconds: start.elapsed().as_secs_f64(),
            workers: pool.current_num_threads(),
        },
    )?;
    result.map(|_| out)
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    mode: &'static str,
    seed: u64,
    config: &'a RunConfig,
    result: T,
}

fn write_report<T: Serialize>(out: &Path, cfg: &RunConfig, seed: u64, result: T) -> Result<(), CliError> {
    let report = Report {
        tool: "alet",
        version: VERSION,
        mode: cfg.mode.expect("mode resolved").name(),
        seed,
        config: cfg,
        result,
    };
    write_json(out, "report.json", &report)?;
    Ok(())
}

/// Oracle built from the configuration.
pub enum Built {
    Dent(DentLandscape),
    Tube(TubeDentLandscape),
    Quantum(QuantumModel),
}

/// Landscapes with analytic ground truth.
pub trait Truth: CostOracle + GroundTruth {}

impl<T: CostOracle + GroundTruth> Truth for T {}

impl Built {
    pub fn oracle(&self) -> &dyn CostOracle {
        match self {
            Built::Dent(d) => d,
            Built::Tube(t) => t,
            Built::Quantum(q) => q,
        }
    }

    pub fn truth(&self) -> Option<&dyn Truth> {
        match self {
            Built::Dent(d) => Some(d),
            Built::Tube(t) => Some(t),
            Built::Quantum(_) => None,
        }
    }

    pub fn default_lipschitz(&self) -> f64 {
        match self {
            Built::Quantum(q) => q.lipschitz_bound(),
            _ => self.truth().expect("synthetic").lipschitz(),
        }
    }

    /// Width `R` whose half-range contains every cost value.
    pub fn default_range(&self) -> f64 {
        match self {
            Built::Quantum(q) => q.outcome_range(),
            _ => {
                let t = self.truth().expect("synthetic");
                2.0 * t.min_value().abs().max(t.max_value().abs())
            }
        }
    }
}

fn oracle_err(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(vec![format!("oracle: {e}")])
}

pub fn build_oracle(cfg: &OracleConfig) -> Result<Built, CliError> {
    match cfg {
        OracleConfig::Dent(d) => DentLandscape::new(
            d.p,
            d.normal_axes.clone(),
            d.offsets.clone(),
            d.curvatures.clone(),
            d.floor,
        )
        .map(Built::Dent)
        .map_err(oracle_err),
        OracleConfig::Tube(t) => {
            let tube = TubeDentSet::new(
                t.base_axes.len() + 1,
                t.cells.iter().map(TubeCell::from).collect(),
            )
            .map_err(oracle_err)?;
            TubeDentLandscape::new(
                TubeDentParams {
                    p: t.p,
                    normal_axes: t.normal_axes.clone(),
                    offsets: t.offsets.clone(),
                    curvatures: t.curvatures.clone(),
                    fiber_axis: t.fiber_axis,
                    base_axes: t.base_axes.clone(),
                    fiber_center: t.fiber_center,
                    penalty: t.penalty,
                    floor: t.floor,
                },
                tube,
            )
            .map(Built::Tube)
            .map_err(oracle_err)
        }
        OracleConfig::Quantum(q) => {
            let max_qubits = q.max_qubits.unwrap_or(DEFAULT_MAX_QUBITS);
            let ansatz =
                Ansatz::new(q.n_qubits, q.generators.clone(), q.tying.clone()).map_err(oracle_err)?;
            let mut h = Hamiltonian::new(q.hamiltonian.clone(), q.lambda).map_err(oracle_err)?;
            if q.lambda.is_none() && q.lambda_mode == Some(LambdaMode::Dense) {
                let dense = lambda_bound(&h, LambdaMode::Dense, max_qubits)?;
                h = Hamiltonian::new(q.hamiltonian.clone(), Some(dense)).map_err(oracle_err)?;
            }
            match QuantumModel::with_max_qubits(ansatz, h, max_qubits) {
                Ok(m) => Ok(Built::Quantum(m)),
                Err(e @ alet::AletError::ResourceLimit(_)) => Err(CliError::Engine(e)),
                Err(e) => Err(oracle_err(e)),
            }
        }
    }
}

fn resolve_engine(
    cfg: &RunConfig,
    built: &Built,
    d: usize,
    delta_noise: f64,
    seed: u64,
) -> EngineConfig {
    let sec = cfg.engine.as_ref().expect("validated");
    let noise = match sec.noise.kind {
        NoiseKind::Exact => NoiseSpec::exact(),
        NoiseKind::Scheduled => NoiseSpec {
            range: sec.noise.range.unwrap_or_else(|| built.default_range()),
            n_shots: sec.noise.n_shots.expect("validated"),
            master_seed: seed,
            mode: NoiseMode::Scheduled,
        },
        NoiseKind::FixedRadius => NoiseSpec {
            range: sec.noise.range.unwrap_or_else(|| built.default_range()),
            n_shots: sec.noise.n_shots.unwrap_or(1),
            master_seed: seed,
            mode: NoiseMode::FixedRadius {
                target: sec.noise.target.expect("validated"),
            },
        },
    };
    EngineConfig {
        shrink: sec.shrink.unwrap_or(2.0),
        r0: sec.r0.unwrap_or_else(|| default_r0(d)),
        r_fin: sec.r_fin,
        lipschitz: sec.lipschitz.unwrap_or_else(|| built.default_lipschitz()),
        delta_noise,
        noise,
        c1: sec.c1.unwrap_or(1.0),
    }
}

fn survivor_rows(flat: &FlatSpec, flat_index: Option<usize>, centers: &[Vec<f64>], extra: &[Vec<String>]) -> Vec<Vec<String>> {
    centers
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut row = Vec::new();
            if let Some(j) = flat_index {
                row.push(j.to_string());
            }
            row.push(i.to_string());
            row.extend(c.iter().map(|x| f(*x)));
            row.extend(flat.embed(c).coords().iter().map(|x| f(*x)));
            if let Some(e) = extra.get(i) {
                row.extend(e.iter().cloned());
            }
            row
        })
        .collect()
}

fn survivor_header(d: usize, p: usize, with_flat: bool, extra: &[&str]) -> Vec<String> {
    let mut h = Vec::new();
    if with_flat {
        h.push("flat".to_string());
    }
    h.push("center".into());
    h.extend((0..d).map(|i| format!("local_{i}")));
    h.extend((0..p).map(|i| format!("theta_{i}")));
    h.extend(extra.iter().map(|s| s.to_string()));
    h
}

fn write_rows(out: &Path, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(out, name, &h, rows)?;
    Ok(())
}

#[derive(Serialize)]
struct FlatTruth {
    flat_min_value: f64,
    flat_minimizer: Vec<f64>,
    flat_hits_min_set: bool,
    /// Distance from the flat minimizer to the nearest survivor center.
    minimizer_to_survivors: f64,
    max_survivor_excess: f64,
    epsilon_holds: bool,
}

fn flat_truth(t: &dyn Truth, flat: &FlatSpec, res: &FlatResult) -> FlatTruth {
    let c_flat = t.flat_min_value(flat);
    let star = t.flat_minimizer(flat);
    let star_point = alet::torus::FlatPoint::new(flat, &star).expect("minimizer dimension");
    let to_survivors = res
        .survivors
        .centers
        .iter()
        .map(|c| {
            let q = alet::torus::FlatPoint::new(flat, c).expect("center dimension");
            star_point.dist(&q)
        })
        .fold(f64::INFINITY, f64::min);
    let excess = res
        .survivors
        .centers
        .iter()
        .map(|c| t.cost(&flat.embed(c)) - c_flat)
        .fold(f64::NEG_INFINITY, f64::max);
    FlatTruth {
        flat_min_value: c_flat,
        flat_minimizer: star,
        flat_hits_min_set: t.flat_hits_min_set(flat),
        minimizer_to_survivors: to_survivors,
        max_survivor_excess: excess,
        epsilon_holds: excess <= res.epsilon_t,
    }
}

fn run_flat_mode(cfg: &RunConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    let built = build_oracle(cfg.oracle.as_ref().expect("validated"))?;
    let oracle = built.oracle();
    let sec = cfg.flat.as_ref().expect("validated");
    let p = oracle.dim();
    let base = match &sec.base {
        Some(b) => TorusPoint::wrap(b).map_err(|e| CliError::Validation(vec![format!("flat.base: {e}")]))?,
        None => TorusPoint::zeros(p),
    };
    let flat = FlatSpec::new(sec.axes.clone(), base)
        .map_err(|e| CliError::Validation(vec![format!("flat: {e}")]))?;
    let delta = cfg.engine.as_ref().and_then(|e| e.delta_noise).expect("validated");
    let engine = resolve_engine(cfg, &built, flat.dim(), delta, seed);
    let res = run_flat(&flat, oracle, &engine, 0)?;
    let truth = built.truth().map(|t| flat_truth(t, &flat, &res));

    #[derive(Serialize)]
    struct FlatReport<'a> {
        engine: &'a EngineConfig,
        schedule_index: &'static str,
        flat: &'a FlatResult,
        truth: Option<FlatTruth>,
    }
    write_report(
        out,
        cfg,
        seed,
        FlatReport {
            engine: &engine,
            schedule_index: "round t is run at level 6δ/(π²(t+1)²N_t)",
            flat: &res,
            truth,
        },
    )?;
    fs::write(out.join("trace.csv"), trace_csv(&res.rounds))?;
    let extra: Vec<Vec<String>> = res
        .survivors
        .estimates
        .iter()
        .map(|e| vec![f(e.value), f(e.radius)])
        .collect();
    write_rows(
        out,
        "survivors.csv",
        &survivor_header(flat.dim(), p, false, &["estimate", "rad"]),
        &survivor_rows(&flat, None, &res.survivors.centers, &extra),
    )
}

#[derive(Serialize)]
struct FlatSummary {
    index: usize,
    base: Vec<f64>,
    excluded: bool,
    min_estimate: Option<f64>,
    survivors: usize,
    queries: u64,
    epsilon_t: Option<f64>,
    rad_t: Option<f64>,
    rounds: Vec<RoundRecord>,
}

fn run_global_mode(cfg: &RunConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    let built = build_oracle(cfg.oracle.as_ref().expect("validated"))?;
    let oracle = built.oracle();
    let g = cfg.global.as_ref().expect("validated");
    let engine = resolve_engine(cfg, &built, g.axes.len(), g.delta_noise, seed);
    let gcfg = GlobalConfig {
        axes: g.axes.clone(),
        regularity: g.regularity,
        delta_int: g.delta_int,
        delta_noise: g.delta_noise,
        engine,
        master_seed: seed,
    };
    let res = run_global(&gcfg, oracle)?;
    let per_ball = g.truth_samples_per_ball.unwrap_or(8);
    let truth: Option<TruthMetrics> = built.truth().map(|t| truth_metrics(&res, t, per_ball, seed));

    let flats: Vec<FlatSummary> = res
        .flats
        .iter()
        .zip(&res.results)
        .enumerate()
        .map(|(j, (flat, r))| FlatSummary {
            index: j,
            base: flat.base().coords().to_vec(),
            excluded: r.is_none(),
            min_estimate: r.as_ref().map(FlatResult::min_estimate),
            survivors: r.as_ref().map_or(0, |r| r.survivors.len()),
            queries: r.as_ref().map_or(0, |r| r.total_queries),
            epsilon_t: r.as_ref().map(|r| r.epsilon_t),
            rad_t: r.as_ref().map(FlatResult::terminal_rad),
            rounds: r.as_ref().map_or_else(Vec::new, |r| r.rounds.clone()),
        })
        .collect();

    #[derive(Serialize)]
    struct GlobalReport<'a> {
        engine: &'a EngineConfig,
        n_flats: usize,
        per_flat_delta: f64,
        flats: Vec<FlatSummary>,
        kept_flats: &'a [usize],
        excluded: &'a [ExcludedFlat],
        certified: bool,
        c_hat_min: f64,
        beta: f64,
        r_t: f64,
        rad_t: f64,
        epsilon: f64,
        total_queries: u64,
        s_out: &'a [SurvivorPatch],
        truth: Option<TruthMetrics>,
    }
    write_report(
        out,
        cfg,
        seed,
        GlobalReport {
            engine: &gcfg.per_flat_engine(),
            n_flats: res.flats.len(),
            per_flat_delta: res.per_flat_delta,
            flats,
            kept_flats: &res.kept_flats,
            excluded: &res.excluded,
            certified: res.certified,
            c_hat_min: res.c_hat_min,
            beta: res.beta,
            r_t: res.r_t,
            rad_t: res.rad_t,
            epsilon: res.epsilon,
            total_queries: res.total_queries,
            s_out: &res.s_out,
            truth,
        },
    )?;
    for (j, r) in res.results.iter().enumerate() {
        if let Some(r) = r {
            fs::write(out.join(format!("flat_{j}_trace.csv")), trace_csv(&r.rounds))?;
        }
    }
    let d = g.axes.len();
    let mut rows = Vec::new();
    for patch in &res.s_out {
        rows.extend(survivor_rows(
            &res.flats[patch.flat_index],
            Some(patch.flat_index),
            &patch.centers,
            &[],
        ));
    }
    write_rows(out, "survivors.csv", &survivor_header(d, oracle.dim(), true, &[]), &rows)?;
    if !res.certified {
        return Err(CliError::Anomaly(format!(
            "certificate anomaly on {} flat(s); output is not certified",
            res.excluded.len()
        )));
    }
    Ok(())
}

fn run_slice_mode(cfg: &RunConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    let sec = cfg.slice_stats.as_ref().expect("validated");

    #[derive(Serialize)]
    struct ModelReport {
        id: String,
        exact: ExactMoments,
        monte_carlo: SliceStats,
        translation_lhs: f64,
        translation_rhs: f64,
        a_realized: Option<f64>,
        a_bound: Option<f64>,
    }
    let mut models = Vec::new();
    let mut rows = Vec::new();
    for (i, m) in sec.models.iter().enumerate() {
        let model = m
            .model()
            .map_err(|e| CliError::Validation(vec![format!("slice_stats.models[{i}]: {e}")]))?;
        let stats = slice_moments(&model, sec.n_samples, substream_seed(seed, &[i as u64]))?;
        let (lhs, rhs) = translation_average_check(&model)?;
        let reg = fiber_regularity_check(&model).ok();
        rows.push((m.id.clone(), stats));
        models.push(ModelReport {
            id: m.id.clone(),
            exact: model.exact()?,
            monte_carlo: stats,
            translation_lhs: lhs,
            translation_rhs: rhs,
            a_realized: reg.map(|r| r.0),
            a_bound: reg.map(|r| r.1),
        });
    }
    write_report(out, cfg, seed, models)?;
    fs::write(out.join("slice_stats.csv"), stats_csv(&rows))?;
    Ok(())
}

fn run_audit_mode(cfg: &RunConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    let Built::Quantum(model) = build_oracle(cfg.oracle.as_ref().expect("validated"))? else {
        unreachable!("validated quantum oracle");
    };
    let sec = cfg.audit.as_ref().expect("validated");
    let fd_step = sec.fd_step.unwrap_or(1e-5);
    let kdot_step = sec.kdot_step.unwrap_or(DEFAULT_KDOT_STEP);
    let rank_tol = sec.rank_tol.unwrap_or(DEFAULT_RANK_TOL);
    let k = model.ansatz().n_params();
    let energy = |x: &[f64]| model.energy(x);

    #[derive(Serialize)]
    struct Row {
        theta: Vec<f64>,
        fd_gradient_norm: f64,
        first_residual: f64,
        second_residual: f64,
        effective_rank: usize,
        hessian_rank: usize,
    }
    let mut rows = Vec::new();
    for i in 0..sec.n_theta {
        let mut rng = substream_rng(seed, &[stream::AUDIT, i as u64]);
        let theta: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * TAU).collect();
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let shift = |dir: &[f64], s: f64| -> Vec<f64> {
            theta.iter().zip(dir).map(|(t, d)| t + s * d).collect()
        };
        let mut g2 = 0.0;
        for j in 0..k {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            let g = (energy(&shift(&e, fd_step))? - energy(&shift(&e, -fd_step))?) / (2.0 * fd_step);
            g2 += g * g;
        }
        let fd1 = (energy(&shift(&v, fd_step))? - energy(&shift(&v, -fd_step))?) / (2.0 * fd_step);
        let d1 = model.directional_derivative(&theta, &v)?;
        let h = 1e-3;
        let c = |s: f64| energy(&shift(&v, s * h));
        let fd2 = (-c(2.0)? + 16.0 * c(1.0)? - 30.0 * c(0.0)? + 16.0 * c(-1.0)? - c(-2.0)?) / (12.0 * h * h);
        let d2 = model.directional_second_derivative(&theta, &v, kdot_step)?;
        rows.push(Row {
            fd_gradient_norm: g2.sqrt(),
            first_residual: (d1 - fd1).abs() / fd1.abs().max(1.0),
            second_residual: (d2 - fd2).abs() / fd2.abs().max(1.0),
            effective_rank: model.effective_rank(&theta, rank_tol)?,
            hessian_rank: spectral_rank(model.fd_hessian(&theta, 1e-4)?, HESSIAN_RANK_TOL)?,
            theta,
        });
    }

    #[derive(Serialize)]
    struct AuditReport {
        n_qubits: usize,
        n_gates: usize,
        n_params: usize,
        lipschitz_bound: f64,
        lambda_in_use: f64,
        lambda_coefficient_sum: f64,
        lambda_dense: Option<f64>,
        outcome_range: f64,
        max_fd_gradient: f64,
        max_first_residual: f64,
        max_second_residual: f64,
        rank_tol: f64,
        hessian_rank_tol: f64,
        rows: Vec<Row>,
    }
    let h = model.hamiltonian();
    let max = |f: fn(&Row) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let report = AuditReport {
        n_qubits: model.ansatz().n_qubits(),
        n_gates: model.ansatz().n_gates(),
        n_params: k,
        lipschitz_bound: model.lipschitz_bound(),
        lambda_in_use: h.lambda(),
        lambda_coefficient_sum: h.coefficient_sum(),
        lambda_dense: lambda_bound(h, LambdaMode::Dense, model.max_qubits()).ok(),
        outcome_range: model.outcome_range(),
        max_fd_gradient: max(|r| r.fd_gradient_norm),
        max_first_residual: max(|r| r.first_residual),
        max_second_residual: max(|r| r.second_residual),
        rank_tol,
        hessian_rank_tol: HESSIAN_RANK_TOL,
        rows,
    };
    let csv_rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                i.to_string(),
                f(r.fd_gradient_norm),
                f(r.first_residual),
                f(r.second_residual),
                r.effective_rank.to_string(),
                r.hessian_rank.to_string(),
            ]
        })
        .collect();
    write_csv(
        out,
        "audit.csv",
        &["theta_index", "fd_gradient_norm", "first_residual", "second_residual", "effective_rank", "hessian_rank"],
        &csv_rows,
    )?;
    write_report(out, cfg, seed, report)
}

/// One bench cell.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub d: usize,
    pub epsilon: f64,
    pub r_final: f64,
    pub rounds: usize,
    pub n_shots: u64,
    pub queries: u64,
    pub query_bound: f64,
    pub within_bound: bool,
}

/// Least-squares slope of `ln(queries)` against `ln(1/ε)` for one dimension.
#[derive(Debug, Clone, Serialize)]
pub struct BenchSlope {
    pub d: usize,
    pub slope: f64,
    pub relative_error: f64,
}

/// Runs the bench grid on dents whose minimum set contains every flat.
///
/// Each cell uses `p = d + 1`, flat axes `0..d` at base 0, and a dent with
/// its single normal axis `d` at offset 0, so no center is ever certified
/// suboptimal and every round queries the full lattice.
pub fn bench(sec: &config::BenchSection, seed: u64) -> Result<(Vec<BenchRow>, Vec<BenchSlope>), CliError> {
    let lambda = sec.curvature.unwrap_or(0.1);
    let range = sec.range.unwrap_or(0.4);
    let delta = sec.delta_noise.unwrap_or(0.05);
    let c0 = sec.c0.unwrap_or(8.0);
    let mut rows = Vec::new();
    for &d in &sec.dims {
        let p = d + 1;
        let dent = DentLandscape::new(p, vec![d], vec![0.0], vec![lambda], 0.0)?;
        let flat = FlatSpec::new((0..d).collect(), TorusPoint::zeros(p))?;
        for (i, &eps) in sec.epsilons.iter().enumerate() {
            let r0 = default_r0(d);
            let plan = plan_resolution(eps, lambda, range, delta, d, 2.0, r0, 1.0)?;
            let engine = EngineConfig {
                shrink: 2.0,
                r0,
                r_fin: plan.r_final,
                lipschitz: lambda,
                delta_noise: delta,
                noise: NoiseSpec::scheduled(range, plan.n_shots, substream_seed(seed, &[d as u64, i as u64])),
                c1: 1.0,
            };
            let res = run_flat(&flat, &dent, &engine, 0)?;
            let bound = query_bound(d, lambda, 3.0 * lambda * plan.r_final, c0)?;
            rows.push(BenchRow {
                d,
                epsilon: eps,
                r_final: plan.r_final,
                rounds: plan.rounds,
                n_shots: plan.n_shots,
                queries: res.total_queries,
                query_bound: bound,
                within_bound: res.total_queries as f64 <= bound,
            });
        }
    }
    let slopes = sec
        .dims
        .iter()
        .filter_map(|&d| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.d == d)
                .map(|r| ((1.0 / r.epsilon).ln(), (r.queries as f64).ln()))
                .collect();
            fit_slope(&pts).map(|slope| BenchSlope {
                d,
                slope,
                relative_error: (slope - d as f64).abs() / d as f64,
            })
        })
        .collect();
    Ok((rows, slopes))
}

/// Ordinary least-squares slope; `None` with fewer than two distinct `x`.
pub fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (pts.len() >= 2 && sxx > 0.0).then(|| sxy / sxx)
}

fn run_bench_mode(cfg: &RunConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    let sec = cfg.bench.as_ref().expect("validated");
    let (rows, slopes) = bench(sec, seed)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.d.to_string(),
                f(r.epsilon),
                f(r.r_final),
                r.rounds.to_string(),
                r.n_shots.to_string(),
                r.queries.to_string(),
                f(r.query_bound),
                f((1.0 / r.epsilon).ln()),
                f((r.queries as f64).ln()),
            ]
        })
        .collect();
    write_csv(
        out,
        "bench.csv",
        &["d", "epsilon", "r_final", "rounds", "n_shots", "queries", "query_bound", "log_inv_epsilon", "log_queries"],
        &csv_rows,
    )?;

    #[derive(Serialize)]
    struct BenchReport {
        rows: Vec<BenchRow>,
        slopes: Vec<BenchSlope>,
    }
    write_report(out, cfg, seed, BenchReport { rows, slopes })
}
