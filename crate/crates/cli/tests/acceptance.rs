//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL` line straight to stdout so the verdicts are
//! visible without `--nocapture`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use alet::engine::{check_monotonicity, default_r0, run_flat, EngineConfig, FlatResult};
use alet::landscape::{Arc, DentLandscape, TubeCell, TubeDentLandscape, TubeDentParams, TubeDentSet};
use alet::multi_flat::{run_global, truth_metrics, GlobalConfig};
use alet::noise::{noisy_eval, substream_rng, EvalContext, NoiseSpec};
use alet::oracle::{CostOracle, GroundTruth};
use alet::quantum::{Ansatz, Hamiltonian, HamiltonianTerm, PauliString, QuantumModel};
use alet::slicing::{fiber_regularity_check, slice_moments, translation_average_check, DentSliceModel};
use alet::torus::{FlatSpec, TorusPoint, TAU};
use alet_cli::commands::bench;
use alet_cli::config::BenchSection;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn verdict(n: u32, ok: bool, detail: String) {
    let line = format!("criterion {n}: {} {detail}\n", if ok { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

/// Every engine run in the suite passes through here.
fn monotone(result: &FlatResult, shrink: f64) -> Result<(), String> {
    check_monotonicity(result, shrink)
}

fn three_sigma(p: f64, n: usize) -> f64 {
    p + 3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

fn rng(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    substream_rng(seed, parts)
}

#[test]
fn criterion_01_hoeffding_coverage() {
    let start = Instant::now();
    let n = 10_000usize;
    let alpha = 0.05;
    let bound = three_sigma(alpha, n);

    let dent = DentLandscape::new(2, vec![0], vec![1.0], vec![1.0], -0.5).unwrap();
    let theta = TorusPoint::wrap(&[2.5, 0.3]).unwrap();
    let truth = dent.cost(&theta);
    let spec = NoiseSpec::scheduled(3.0, 50, 2024);
    let dent_viol = (0..n)
        .filter(|&i| {
            let ctx = EvalContext { flat: 0, round: 0, center: i as u64 };
            let e = noisy_eval(&dent, &theta, &spec, ctx, alpha).unwrap();
            (e.value - truth).abs() > e.radius
        })
        .count();

    let model = QuantumModel::new(
        Ansatz::new(2, vec!["XI".parse().unwrap(), "YZ".parse().unwrap()], None).unwrap(),
        Hamiltonian::new(
            vec![
                HamiltonianTerm { pauli: "ZZ".parse().unwrap(), coeff: 0.7 },
                HamiltonianTerm { pauli: "XI".parse().unwrap(), coeff: -0.4 },
            ],
            None,
        )
        .unwrap(),
    )
    .unwrap();
    let q_theta = [0.9, 2.2];
    let q_truth = model.energy(&q_theta).unwrap();
    let mut r = rng(7, &[1]);
    let q_viol = (0..n)
        .filter(|_| {
            let e = model.shot_sample(&q_theta, 20, alpha, &mut r).unwrap();
            (e.value - q_truth).abs() > e.radius
        })
        .count();

    let elapsed = start.elapsed();
    let (fd, fq) = (dent_viol as f64 / n as f64, q_viol as f64 / n as f64);
    let ok = fd <= bound && fq <= bound && elapsed < Duration::from_secs(5);
    verdict(
        1,
        ok,
        format!(
            "Hoeffding coverage: violation rate {fd:.4} (two-point), {fq:.4} (quantum shots) <= {bound:.4}; {:.2}s < 5s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(ok);
}

/// Random dent with `p ≤ 6`, normal rank `≤ p`, and a flat of dimension `≤ 2`.
fn random_dent_flat(r: &mut ChaCha8Rng) -> (DentLandscape, FlatSpec) {
    let p = r.random_range(1..=6usize);
    let d = r.random_range(1..=p.min(2));
    let mut axes: Vec<usize> = (0..p).collect();
    for i in (1..p).rev() {
        axes.swap(i, r.random_range(0..=i));
    }
    let flat_axes: Vec<usize> = {
        let mut a = axes[..d].to_vec();
        a.sort_unstable();
        a
    };
    let rank = r.random_range(1..=p);
    let mut normal: Vec<usize> = axes.iter().rev().take(rank).copied().collect();
    normal.sort_unstable();
    let offsets = (0..rank).map(|_| r.random::<f64>() * TAU).collect();
    let curvatures = (0..rank).map(|_| r.random_range(0.5..2.0)).collect();
    let dent = DentLandscape::new(p, normal, offsets, curvatures, r.random_range(-1.0..1.0)).unwrap();
    let base = TorusPoint::uniform(p, r);
    (dent, FlatSpec::new(flat_axes, base).unwrap())
}

fn nearest_center(centers: &[Vec<f64>], x: &[f64]) -> f64 {
    centers
        .iter()
        .map(|c| {
            c.iter()
                .zip(x)
                .map(|(a, b)| {
                    let t = (a - b).rem_euclid(TAU);
                    t.min(TAU - t).powi(2)
                })
                .sum::<f64>()
                .sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn criterion_02_monotonicity() {
    let mut violations = Vec::new();
    let mut runs = 0;
    for i in 0..60u64 {
        let mut r = rng(31, &[i]);
        let (dent, flat) = random_dent_flat(&mut r);
        let d = flat.dim();
        let shrink = [2.0, 3.0][(i % 2) as usize];
        let noise = if i % 3 == 0 {
            NoiseSpec::exact()
        } else {
            NoiseSpec::scheduled(2.0 * (dent.max_value().abs().max(dent.min_value().abs())), 200, i)
        };
        let cfg = EngineConfig {
            shrink,
            r0: default_r0(d),
            r_fin: default_r0(d) / shrink.powi(4),
            lipschitz: dent.lipschitz(),
            delta_noise: 0.05,
            noise,
            c1: 1.0,
        };
        let res = run_flat(&flat, &dent, &cfg, 0).unwrap();
        runs += 1;
        if let Err(e) = monotone(&res, shrink) {
            violations.push(format!("run {i}: {e}"));
        }
    }
    // a multi-flat run feeds its per-flat results through the same check
    let (tube, cfg) = tube_case(0.05, NoiseSpec::exact(), 3);
    let g = run_global(&cfg, &tube).unwrap();
    for r in g.results.iter().flatten() {
        runs += 1;
        if let Err(e) = monotone(r, cfg.engine.shrink) {
            violations.push(format!("global flat: {e}"));
        }
    }
    let ok = violations.is_empty();
    verdict(
        2,
        ok,
        format!(
            "monotonicity: {} violations over {runs} runs (each net is the lattice refinement of the previous kept set, kept centers lie in it and within r_t + r_t+1 of a parent); criteria 3, 4 and 8 check their runs too",
            violations.len()
        ),
    );
    assert!(ok, "{violations:?}");
}

#[test]
fn criterion_03_minimizer_survival() {
    let mut hits = 0;
    let mut failures = Vec::new();
    for i in 0..20u64 {
        let mut r = rng(53, &[i]);
        let (dent, flat) = random_dent_flat(&mut r);
        let d = flat.dim();
        let cfg = EngineConfig::new(d, dent.lipschitz(), default_r0(d) / 64.0, 0.05, NoiseSpec::exact());
        let res = run_flat(&flat, &dent, &cfg, 0).unwrap();
        monotone(&res, cfg.shrink).unwrap();
        let star = dent.flat_minimizer(&flat);
        let dist = nearest_center(&res.survivors.centers, &star);
        if dist <= res.terminal_radius() + 1e-12 {
            hits += 1;
        } else {
            failures.push(format!("case {i}: distance {dist} > r_T {}", res.terminal_radius()));
        }
    }
    let ok = hits == 20;
    verdict(3, ok, format!("minimizer survival: {hits}/20 flat minimizers inside S_T"));
    assert!(ok, "{failures:?}");
}

#[test]
fn criterion_04_per_flat_epsilon() {
    let start = Instant::now();
    let runs = 500u64;
    let outcomes: Vec<bool> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut r = rng(97, &[i]);
            let dent = DentLandscape::new(2, vec![0], vec![r.random::<f64>() * TAU], vec![1.0], -1.0).unwrap();
            let flat = FlatSpec::new(vec![0], TorusPoint::uniform(2, &mut r)).unwrap();
            assert_eq!(dent.lipschitz(), 1.0);
            let cfg = EngineConfig {
                shrink: 2.0,
                r0: PI,
                r_fin: PI / 16.0,
                lipschitz: 1.0,
                delta_noise: 0.05,
                noise: NoiseSpec::scheduled(2.0, 400, 1000 + i),
                c1: 1.0,
            };
            let res = run_flat(&flat, &dent, &cfg, 0).unwrap();
            monotone(&res, cfg.shrink).unwrap();
            let limit = dent.flat_min_value(&flat) + res.epsilon_t;
            res.survivors.centers.iter().any(|c| dent.cost(&flat.embed(c)) > limit)
        })
        .collect();
    let fails = outcomes.iter().filter(|&&b| b).count();
    let rate = fails as f64 / runs as f64;
    let bound = three_sigma(0.05, runs as usize);
    let elapsed = start.elapsed();
    let ok = rate <= bound && elapsed < Duration::from_secs(300);
    verdict(
        4,
        ok,
        format!(
            "per-flat epsilon: failure rate {rate:.4} ({fails}/{runs}) <= {bound:.4}; {:.1}s < 300s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_05_hit_probability() {
    let model = DentSliceModel::Band { m: 2, width: PI / 2.0 };
    let exact = model.exact().unwrap();
    let s = slice_moments(&model, 10_000, 5).unwrap();
    // X ∈ {0, 2π} with P(X = 2π) = w / 2π
    let p = 0.25;
    let oracle_mean = TAU * p;
    let oracle_m2 = TAU * TAU * p;
    let hit_ok = (s.hit_freq - p).abs() <= 3.0 * s.se_hit_freq;
    let pz_ok = (s.pz_bound - p).abs() <= 3.0 * s.se_pz;
    let exact_ok = (exact.hit_probability - p).abs() < 1e-15
        && (exact.pz_ratio - p).abs() < 1e-15
        && (exact.mean - oracle_mean).abs() < 1e-12
        && (exact.second_moment - oracle_m2).abs() < 1e-12;
    let ok = hit_ok && pz_ok && exact_ok;
    verdict(
        5,
        ok,
        format!(
            "hit probability: hit freq {:.4} ± {:.4}, PZ ratio {:.4} ± {:.4} vs 0.25 at n = 10^4",
            s.hit_freq, s.se_hit_freq, s.pz_bound, s.se_pz
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_06_translation_average() {
    let mut worst = 0.0f64;
    let mut oracle_worst = 0.0f64;
    for m in [2usize, 3] {
        for w in [0.1, 1.0, PI, TAU] {
            let model = DentSliceModel::Band { m, width: w };
            let (lhs, rhs) = translation_average_check(&model).unwrap();
            worst = worst.max((lhs - rhs).abs());
            // arc of length w times full circles: E X = 2π · w / 2π
            oracle_worst = oracle_worst.max((lhs - w).abs());
        }
    }
    let ok = worst <= 1e-12 && oracle_worst <= 1e-12;
    verdict(
        6,
        ok,
        format!("translation average: max |lhs - rhs| = {worst:.2e}, max |lhs - w| = {oracle_worst:.2e} <= 1e-12"),
    );
    assert!(ok);
}

fn tube_configs() -> Vec<TubeDentSet> {
    let cell = |arcs: Vec<(f64, f64)>, rho: f64| TubeCell {
        arcs: arcs.into_iter().map(|(start, length)| Arc { start, length }).collect(),
        half_width: rho,
    };
    let mut out = vec![
        TubeDentSet::band(2, 0.1).unwrap(),
        TubeDentSet::band(2, TAU).unwrap(),
        TubeDentSet::band(3, 1.0).unwrap(),
        // ρ_max/ρ_min = 2 over base measure π
        TubeDentSet::new(2, vec![cell(vec![(0.0, PI / 2.0)], 0.5), cell(vec![(PI, PI / 2.0)], 1.0)]).unwrap(),
        TubeDentSet::new(2, vec![cell(vec![(5.5, 1.5)], 0.3)]).unwrap(),
        TubeDentSet::new(3, vec![cell(vec![(0.0, 1.0), (0.0, 2.0)], 0.2), cell(vec![(2.0, 1.0), (0.0, TAU)], 0.6)])
            .unwrap(),
        TubeDentSet::new(3, vec![cell(vec![(0.0, PI / 2.0), (0.0, TAU)], PI / 2.0)]).unwrap(),
        TubeDentSet::new(4, vec![cell(vec![(1.0, 0.5), (2.0, 0.5), (3.0, 0.5)], 0.1)]).unwrap(),
    ];
    let mut r = rng(71, &[]);
    while out.len() < 10 {
        let n_cells = r.random_range(1..=3);
        let cells = (0..n_cells)
            .map(|k| {
                let start = k as f64 * TAU / 3.0;
                cell(vec![(start, r.random_range(0.05..TAU / 3.0))], r.random_range(0.05..PI))
            })
            .collect();
        out.push(TubeDentSet::new(2, cells).unwrap());
    }
    out
}

#[test]
fn criterion_07_fiber_regularity() {
    let mut failures = Vec::new();
    let configs = tube_configs();
    for (i, tube) in configs.iter().enumerate() {
        let model = DentSliceModel::Tube { tube: tube.clone() };
        let (realized, bound) = fiber_regularity_check(&model).unwrap();
        let exact = model.exact().unwrap();
        // independent sup: X ≤ 2ρ_max, attained on the widest cell
        let sup = tube.cells().iter().map(|c| 2.0 * c.half_width).fold(0.0, f64::max);
        let realized_oracle = sup / exact.mean;
        // equal sides of a single-cell tube may differ in the last ulp
        if realized > bound * (1.0 + 1e-12) {
            failures.push(format!("config {i}: A_realized {realized} > A_bound {bound}"));
        }
        if (realized - realized_oracle).abs() > 1e-12 * realized_oracle {
            failures.push(format!("config {i}: A_realized {realized} != sup/mean {realized_oracle}"));
        }
        if exact.second_moment > realized * exact.mean * exact.mean * (1.0 + 1e-15) {
            failures.push(format!("config {i}: E X^2 > A (E X)^2"));
        }
    }
    let rho2 = DentSliceModel::Tube { tube: configs[3].clone() };
    let (_, a4) = fiber_regularity_check(&rho2).unwrap();
    if (a4 - 4.0).abs() > 1e-12 {
        failures.push(format!("two-cell tube: A_bound {a4} != 4"));
    }
    let ok = failures.is_empty();
    verdict(
        7,
        ok,
        format!(
            "fiber regularity: A_realized <= A_bound and E X^2 <= A (E X)^2 for {}/10 tube configurations",
            10 - failures.len().min(10)
        ),
    );
    assert!(ok, "{failures:?}");
}

/// Tube-dent on `T^4` with normal rank 1; flats span the normal axis and
/// the fiber axis, and a quarter of them meet the minimum set.
fn tube_case(delta: f64, noise: NoiseSpec, seed: u64) -> (TubeDentLandscape, GlobalConfig) {
    let tube = TubeDentSet::new(
        3,
        vec![TubeCell {
            arcs: vec![Arc { start: 0.0, length: PI / 2.0 }, Arc::full()],
            half_width: PI / 2.0,
        }],
    )
    .unwrap();
    let a = tube.regularity_constant().unwrap();
    let land = TubeDentLandscape::new(
        TubeDentParams {
            p: 4,
            normal_axes: vec![0],
            offsets: vec![1.0],
            curvatures: vec![1.0],
            fiber_axis: 2,
            base_axes: vec![1, 3],
            fiber_center: 3.0,
            penalty: 0.1,
            floor: 0.0,
        },
        tube,
    )
    .unwrap();
    let d = 2;
    let cfg = GlobalConfig {
        axes: vec![0, 2],
        regularity: a,
        delta_int: delta,
        delta_noise: delta,
        engine: EngineConfig::new(d, land.lipschitz(), default_r0(d) / 16.0, delta, noise),
        master_seed: seed,
    };
    (land, cfg)
}

#[test]
fn criterion_08_global_pac() {
    let start = Instant::now();
    let runs = 200u64;
    let (probe, probe_cfg) = tube_case(0.05, NoiseSpec::exact(), 0);
    let range = 2.0 * probe.min_value().abs().max(probe.max_value().abs());
    assert_eq!(probe_cfg.n_flats(), 12);

    let noisy: Vec<(bool, bool)> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let (land, cfg) = tube_case(0.05, NoiseSpec::scheduled(range, 100_000, i), i);
            let g = run_global(&cfg, &land).unwrap();
            for r in g.results.iter().flatten() {
                monotone(r, cfg.engine.shrink).unwrap();
            }
            let t = truth_metrics(&g, &land, 4, i);
            let eps_ok = t.max_excess <= g.epsilon;
            let kept_hit = g.kept_flats.iter().any(|&j| land.flat_hits_min_set(&g.flats[j]));
            (eps_ok && kept_hit && g.certified, t.any_flat_hits)
        })
        .collect();
    let fails = noisy.iter().filter(|o| !o.0).count();
    let rate = fails as f64 / runs as f64;
    let bound = three_sigma(0.1, runs as usize);

    let clean: Vec<Option<bool>> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let (land, cfg) = tube_case(0.05, NoiseSpec::exact(), 10_000 + i);
            let g = run_global(&cfg, &land).unwrap();
            for r in g.results.iter().flatten() {
                monotone(r, cfg.engine.shrink).unwrap();
            }
            let t = truth_metrics(&g, &land, 0, i);
            t.any_flat_hits
                .then_some(t.min_dist_to_min_set <= g.r_t + 1e-12)
        })
        .collect();
    let applicable = clean.iter().flatten().count();
    let clean_ok = clean.iter().flatten().all(|&b| b);
    let elapsed = start.elapsed();
    let ok = rate <= bound && clean_ok && elapsed < Duration::from_secs(900);
    verdict(
        8,
        ok,
        format!(
            "global PAC: combined failure rate {rate:.4} ({fails}/{runs}) <= {bound:.4}; noiseless dist(S_out, M) <= r_T in {}/{applicable} hitting runs; {:.1}s < 900s",
            clean.iter().flatten().filter(|&&b| b).count(),
            elapsed.as_secs_f64()
        ),
    );
    assert!(ok);
}

/// Random Pauli string on `n` qubits, never the identity.
fn random_pauli(n: usize, r: &mut ChaCha8Rng) -> PauliString {
    loop {
        let s: String = (0..n).map(|_| ['I', 'X', 'Y', 'Z'][r.random_range(0..4)]).collect();
        if s.chars().any(|c| c != 'I') {
            return s.parse().unwrap();
        }
    }
}

fn random_model(n_max: usize, r: &mut ChaCha8Rng) -> QuantumModel {
    let n = r.random_range(1..=n_max);
    let gates = r.random_range(1..=8);
    let generators: Vec<PauliString> = (0..gates).map(|_| random_pauli(n, r)).collect();
    let tying = (gates > 1 && r.random_bool(0.3)).then(|| {
        let classes = r.random_range(1..gates);
        let mut t: Vec<usize> = (0..gates).map(|j| if j < classes { j } else { r.random_range(0..classes) }).collect();
        t.sort_unstable();
        t
    });
    let terms = (0..r.random_range(1..=4))
        .map(|_| HamiltonianTerm { pauli: random_pauli(n, r), coeff: r.random_range(-1.0..1.0) })
        .collect();
    QuantumModel::new(
        Ansatz::new(n, generators, tying).unwrap(),
        Hamiltonian::new(terms, None).unwrap(),
    )
    .unwrap()
}

fn fd_gradient_norm(model: &QuantumModel, theta: &[f64], h: f64) -> f64 {
    let mut x = theta.to_vec();
    let mut g2 = 0.0;
    for j in 0..theta.len() {
        x[j] = theta[j] + h;
        let up = model.energy(&x).unwrap();
        x[j] = theta[j] - h;
        let down = model.energy(&x).unwrap();
        x[j] = theta[j];
        g2 += ((up - down) / (2.0 * h)).powi(2);
    }
    g2.sqrt()
}

#[test]
fn criterion_09_lipschitz_soundness() {
    let samples = 10_000u64;
    let h = 1e-6;
    let max_grad = |model: &QuantumModel, seed: u64| -> f64 {
        let k = model.ansatz().n_params();
        (0..samples)
            .into_par_iter()
            .map(|s| {
                let mut r = rng(seed, &[s]);
                let theta: Vec<f64> = (0..k).map(|_| r.random::<f64>() * TAU).collect();
                fd_gradient_norm(model, &theta, h)
            })
            .reduce(|| 0.0, f64::max)
    };
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    for i in 0..20u64 {
        let model = random_model(4, &mut rng(113, &[i]));
        let g = max_grad(&model, 200 + i);
        let bound = model.lipschitz_bound();
        worst_ratio = worst_ratio.max(g / bound);
        if g > bound {
            violations += 1;
        }
    }
    let xz = QuantumModel::new(
        Ansatz::new(1, vec!["X".parse().unwrap()], None).unwrap(),
        Hamiltonian::new(vec![HamiltonianTerm { pauli: "Z".parse().unwrap(), coeff: 1.0 }], None).unwrap(),
    )
    .unwrap();
    let g_xz = max_grad(&xz, 1);
    let tight = (xz.lipschitz_bound() - 2.0).abs() < 1e-15 && (0.99 * 2.0..=2.0).contains(&g_xz);
    let ok = violations == 0 && tight;
    verdict(
        9,
        ok,
        format!(
            "Lipschitz soundness: {violations} violations over 20 instances x 10^4 samples (max FD-gradient / bound = {worst_ratio:.3}); X/Z max FD-gradient {g_xz:.5} vs bound 2"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_10_derivative_formulas() {
    let (mut worst1, mut worst2) = (0.0f64, 0.0f64);
    for i in 0..100u64 {
        let mut r = rng(127, &[i]);
        let model = random_model(3, &mut r);
        let k = model.ansatz().n_params();
        let theta: Vec<f64> = (0..k).map(|_| r.random::<f64>() * TAU).collect();
        let v: Vec<f64> = (0..k).map(|_| r.random_range(-1.0..1.0)).collect();
        let c = |s: f64| {
            let x: Vec<f64> = theta.iter().zip(&v).map(|(t, d)| t + s * d).collect();
            model.energy(&x).unwrap()
        };
        let h1 = 1e-5;
        let fd1 = (c(h1) - c(-h1)) / (2.0 * h1);
        let h2 = 1e-3;
        let fd2 = (-c(2.0 * h2) + 16.0 * c(h2) - 30.0 * c(0.0) + 16.0 * c(-h2) - c(-2.0 * h2)) / (12.0 * h2 * h2);
        let d1 = model.directional_derivative(&theta, &v).unwrap();
        let d2 = model.directional_second_derivative(&theta, &v, 1e-4).unwrap();
        worst1 = worst1.max((d1 - fd1).abs() / fd1.abs().max(1.0));
        worst2 = worst2.max((d2 - fd2).abs() / fd2.abs().max(1.0));
    }
    let ok = worst1 <= 1e-6 && worst2 <= 1e-4;
    verdict(
        10,
        ok,
        format!("derivative formulas: max first-derivative error {worst1:.2e} <= 1e-6, second {worst2:.2e} <= 1e-4 over 100 instances"),
    );
    assert!(ok);
}

#[test]
fn criterion_11_query_scaling() {
    let sec = BenchSection {
        dims: vec![1, 2, 3],
        epsilons: vec![0.4, 0.2, 0.1],
        curvature: None,
        range: None,
        delta_noise: None,
        c0: None,
    };
    let (rows, slopes) = bench(&sec, 5).unwrap();
    let slopes_ok = slopes.len() == 3 && slopes.iter().all(|s| s.relative_error <= 0.25);
    let within = rows.iter().filter(|r| r.within_bound).count();
    let fits: Vec<String> = slopes.iter().map(|s| format!("d={} slope {:.3}", s.d, s.slope)).collect();
    verdict(
        11,
        slopes_ok,
        format!(
            "query scaling: {} (within 25% of d); {within}/{} cells under query_bound with C0 = 8 (informational)",
            fits.join(", "),
            rows.len()
        ),
    );
    assert!(slopes_ok);
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_cli(config: &str, workers: usize, out: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_alet"))
        .args(["run", "--config"])
        .arg(configs_dir().join(config))
        .args(["--workers", &workers.to_string(), "--out"])
        .arg(out)
        .status()
        .unwrap();
    assert!(status.success(), "{config} with {workers} workers: {status}");
}

/// Sorted `(name, bytes)` of every file except the timing record.
fn payload(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "timing.json")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_12_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let configs = [
        "flat_dent.toml",
        "global_tube.toml",
        "slice_stats.toml",
        "audit_xz.toml",
        "bench.toml",
    ];
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for c in configs {
        let dirs: Vec<PathBuf> = [1usize, 4, 4]
            .iter()
            .enumerate()
            .map(|(k, &w)| {
                let d = tmp.path().join(format!("{c}-{k}"));
                run_cli(c, w, &d);
                d
            })
            .collect();
        let base = payload(&dirs[0]);
        for d in &dirs[1..] {
            let other = payload(d);
            compared += base.len();
            if other != base {
                mismatches.push(c);
            }
        }
    }
    let ok = mismatches.is_empty();
    verdict(
        12,
        ok,
        format!(
            "determinism: {compared} output files byte-identical across 1 and 4 workers and repeated runs; mismatches: {mismatches:?}"
        ),
    );
    assert!(ok);
}
