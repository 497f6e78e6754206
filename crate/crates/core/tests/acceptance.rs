//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::process::ExitCode;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use marsense::cs::{gaussian_measure, haar2_forward, haar2_inverse, omp, DenseSensingMatrix, OmpConfig, SparseCoefficients};
use marsense::edge::{close, dilate};
use marsense::harness::{
    reproduce_table1, run_with_image, ExperimentSpec, ImageSource, ResultRow, RunOutput, RunSpec, StrategySpec,
    TABLE2_ETA1, TABLE2_ETA2_GRID,
};
use marsense::mask::{build_mar, MaskRole};
use marsense::tv::{gradient, objective, scatter_adjoint};
use marsense::{
    apply_mask, AcquisitionConfig, AdaptiveBudget, BinaryMap, EdgeSource, GrayImage, MorphOp, SamplingMask,
    StructuringElement, TvConfig,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Every solver trace seen by any criterion, checked at the end.
static TRACES: Mutex<Vec<(String, bool)>> = Mutex::new(Vec::new());

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_image(w: usize, h: usize, r: &mut ChaCha8Rng) -> GrayImage {
    GrayImage::from_fn(w, h, |_, _| r.random_range(0.0..255.0))
}

fn random_map(w: usize, h: usize, density: f64, r: &mut ChaCha8Rng) -> BinaryMap {
    BinaryMap::from_fn(w, h, |_, _| r.random_bool(density))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn mar(morph: MorphOp, edges: EdgeSource) -> StrategySpec {
    StrategySpec::Mar { morph, edges }
}

/// Runs every grid point in parallel and records the solver traces.
fn run_batch(spec: &ExperimentSpec, image: &GrayImage, runs: &[RunSpec]) -> Vec<RunOutput> {
    let outputs: Vec<RunOutput> = runs
        .par_iter()
        .map(|run| run_with_image(spec, run, image).unwrap_or_else(|e| panic!("{run:?}: {e}")))
        .collect();
    let mut traces = TRACES.lock().unwrap();
    for o in &outputs {
        if !o.objective_trace.is_empty() {
            let ok = o.objective_trace.windows(2).all(|w| w[1] <= w[0]);
            let r = &o.row;
            traces.push((format!("{} {} eta1={} eta2={:.3} seed={}", r.image, r.strategy, r.eta1, r.eta2, r.seed), ok));
        }
    }
    outputs
}

fn in_memory_spec() -> ExperimentSpec {
    ExperimentSpec {
        out_dir: None,
        persist_artifacts: false,
        ..ExperimentSpec::default()
    }
}

fn point(image: &ImageSource, strategy: StrategySpec, eta1: f64, adaptive: AdaptiveBudget, seed: u64) -> RunSpec {
    RunSpec {
        image: image.clone(),
        strategy,
        eta1,
        adaptive,
        seed,
    }
}

fn adjoint_identity() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..100 {
        let mut r = rng(1000 + i);
        let x = random_image(16, 16, &mut r);
        let mask = SamplingMask::new(random_map(16, 16, 0.4, &mut r), MaskRole::Mixed);
        let ax = apply_mask(&x, &mask).unwrap();
        // y lives in measurement space: same positions, fresh values
        let values: Vec<f64> = (0..ax.len()).map(|_| r.random_range(-50.0..50.0)).collect();
        let y = marsense::Measurements::new((16, 16), ax.positions().to_vec(), values).unwrap();
        let lhs = dot(ax.values(), y.values());
        let rhs = dot(x.pixels(), scatter_adjoint(&y).pixels());
        let scale = norm(x.pixels()) * norm(y.values());
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    outcome(worst <= 1e-10, format!("worst relative gap {worst:.3e} over 100 instances"))
}

fn gradient_check() -> Outcome {
    let h = 1e-4;
    let mut worst = 0.0f64;
    let mut cases = 0;
    for i in 0..20u64 {
        for alpha in [0.0, 1.0, 100.0] {
            for eps_tv in [1.0, 2.55] {
                let mut r = rng(2000 + i);
                let g = random_image(8, 8, &mut r);
                let mask = SamplingMask::new(random_map(8, 8, 0.5, &mut r), MaskRole::Mixed);
                let meas = apply_mask(&g, &mask).unwrap();
                let f = random_image(8, 8, &mut r);
                let cfg = TvConfig {
                    alpha,
                    eps_tv,
                    ..TvConfig::default()
                };
                let analytic = gradient(&f, &meas, &cfg).unwrap();
                let mut numeric = vec![0.0; 64];
                for (k, slot) in numeric.iter_mut().enumerate() {
                    let mut plus = f.pixels().to_vec();
                    let mut minus = plus.clone();
                    plus[k] += h;
                    minus[k] -= h;
                    let fp = objective(&GrayImage::new(8, 8, plus).unwrap(), &meas, &cfg).unwrap();
                    let fm = objective(&GrayImage::new(8, 8, minus).unwrap(), &meas, &cfg).unwrap();
                    *slot = (fp - fm) / (2.0 * h);
                }
                let diff: Vec<f64> = numeric.iter().zip(analytic.pixels()).map(|(a, b)| a - b).collect();
                let rel = norm(&diff) / norm(analytic.pixels()).max(1e-12);
                worst = worst.max(rel);
                cases += 1;
            }
        }
    }
    outcome(worst <= 1e-5, format!("worst relative error {worst:.3e} over {cases} cases"))
}

fn phantom_margin() -> Outcome {
    let src = ImageSource::Phantom { size: 256 };
    let image = src.load().unwrap();
    let spec = in_memory_spec();
    let adaptive = AdaptiveBudget::default();
    let runs = [
        point(&src, StrategySpec::Random, 0.3, adaptive, 0),
        point(&src, mar(MorphOp::Dilate, EdgeSource::Predicted), 0.3, adaptive, 0),
    ];
    let out = run_batch(&spec, &image, &runs);
    let (rnd, m) = (&out[0].row, &out[1].row);
    let eta_ok = [rnd, m].iter().all(|r| (r.eta1 - 0.3).abs() <= 0.005);
    let dp = m.psnr_db - rnd.psnr_db;
    let ds = m.ssim - rnd.ssim;
    outcome(
        eta_ok && dp >= 5.0 && ds >= 0.01,
        format!(
            "random {:.2} dB / {:.4} (eta1 {:.4}), mar {:.2} dB / {:.4} (eta1 {:.4}); margin {dp:.2} dB, {ds:.4} SSIM",
            rnd.psnr_db, rnd.ssim, rnd.eta1, m.psnr_db, m.ssim, m.eta1
        ),
    )
}

fn true_edges() -> Outcome {
    let src = ImageSource::Phantom { size: 256 };
    let image = src.load().unwrap();
    let runs = [point(
        &src,
        mar(MorphOp::Dilate, EdgeSource::GroundTruth),
        0.3,
        AdaptiveBudget::default(),
        0,
    )];
    let row = run_batch(&in_memory_spec(), &image, &runs)[0].row.clone();
    // not part of the verdict: the same run when the edge budget covers
    // every nonzero Sobel response
    let all_edges = [point(
        &src,
        mar(MorphOp::Dilate, EdgeSource::GroundTruth),
        0.3,
        AdaptiveBudget::EdgePixels(image.len()),
        0,
    )];
    let full = run_batch(&in_memory_spec(), &image, &all_edges)[0].row.clone();
    outcome(
        row.psnr_db >= 45.0,
        format!(
            "{:.2} dB at eta1 {:.4}, eta2 {:.4} with a 1.75% edge budget (full edge set: {:.2} dB, eta2 {:.4})",
            row.psnr_db, row.eta1, row.eta2, full.psnr_db, full.eta2
        ),
    )
}

/// Non-decreasing up to a single drop of at most `slack` dB.
fn nearly_monotone(psnrs: &[f64], slack: f64) -> bool {
    let drops: Vec<f64> = psnrs.windows(2).map(|w| w[0] - w[1]).filter(|d| *d > 0.0).collect();
    drops.is_empty() || (drops.len() == 1 && drops[0] <= slack)
}

fn eta1_sweep() -> Outcome {
    let src = ImageSource::Phantom { size: 256 };
    let image = src.load().unwrap();
    let grid = [0.2, 0.3, 0.4, 0.5];
    let adaptive = AdaptiveBudget::EdgeFraction(0.0175);
    let strategies = [StrategySpec::Random, mar(MorphOp::Dilate, EdgeSource::Predicted)];
    let runs: Vec<RunSpec> = strategies
        .iter()
        .flat_map(|&s| grid.iter().map(move |&e| (s, e)))
        .map(|(s, e)| point(&src, s, e, adaptive, 0))
        .collect();
    let out = run_batch(&in_memory_spec(), &image, &runs);
    let rows: Vec<&ResultRow> = out.iter().map(|o| &o.row).collect();
    let (rnd, m) = rows.split_at(grid.len());
    let psnr = |rs: &[&ResultRow]| rs.iter().map(|r| r.psnr_db).collect::<Vec<_>>();
    let (pr, pm) = (psnr(rnd), psnr(m));
    let dominates = pm.iter().zip(&pr).all(|(a, b)| a >= b);
    let pass = dominates && nearly_monotone(&pr, 0.3) && nearly_monotone(&pm, 0.3);
    let fmt = |v: &[f64]| v.iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>().join(", ");
    outcome(pass, format!("random [{}], mar [{}] dB", fmt(&pr), fmt(&pm)))
}

/// Set to a natural test image to run the η₂ sweep on it instead of the
/// phantom.
const NATURAL_IMAGE_VAR: &str = "MARSENSE_NATURAL_IMAGE";

fn eta2_inverted_u() -> Outcome {
    let src = match std::env::var(NATURAL_IMAGE_VAR) {
        Ok(path) if !path.is_empty() => ImageSource::Path(path.into()),
        _ => ImageSource::Phantom { size: 256 },
    };
    let image = src.load().unwrap();
    let strategy = mar(MorphOp::Dilate, EdgeSource::Predicted);
    let runs: Vec<RunSpec> = TABLE2_ETA2_GRID
        .iter()
        .map(|&e| point(&src, strategy, TABLE2_ETA1, AdaptiveBudget::Eta2(e), 0))
        .collect();
    let out = run_batch(&in_memory_spec(), &image, &runs);
    let psnr: Vec<f64> = out.iter().map(|o| o.row.psnr_db).collect();
    let at = |e: f64| psnr[TABLE2_ETA2_GRID.iter().position(|&g| g == e).unwrap()];
    let gap = at(0.74) - at(0.99);
    let best = (0..psnr.len()).max_by(|&a, &b| psnr[a].total_cmp(&psnr[b])).unwrap();
    let interior = best > 0 && best + 1 < psnr.len();
    let listing = TABLE2_ETA2_GRID
        .iter()
        .zip(&out)
        .map(|(g, o)| format!("{g}:{:.2}", o.row.psnr_db))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(
        gap >= 2.0 && interior,
        format!(
            "{} [{listing}] dB; 0.74 minus 0.99 = {gap:.2} dB; maximizer eta2 = {}",
            src.name(),
            TABLE2_ETA2_GRID[best]
        ),
    )
}

fn fig6_ordering() -> Outcome {
    let src = ImageSource::Ball { size: 64 };
    let image = src.load().unwrap();
    let strategies = [
        StrategySpec::StandardCs,
        StrategySpec::Random,
        mar(MorphOp::Dilate, EdgeSource::Predicted),
    ];
    let mut details = Vec::new();
    let mut pass = true;
    for seed in [0u64, 1] {
        let runs: Vec<RunSpec> = strategies
            .iter()
            .map(|&s| point(&src, s, 0.3, AdaptiveBudget::default(), seed))
            .collect();
        let out = run_batch(&in_memory_spec(), &image, &runs);
        let p: Vec<f64> = out.iter().map(|o| o.row.psnr_db).collect();
        pass &= p[0] < p[1] && p[1] < p[2];
        details.push(format!("seed {seed}: cs {:.2} < random {:.2} < mar {:.2}", p[0], p[1], p[2]));
    }
    let haar_terms = haar2_forward(&image)
        .unwrap()
        .values()
        .iter()
        .filter(|v| v.abs() > 1e-9)
        .count();
    details.push(format!("{} has {haar_terms} nonzero Haar coefficients", src.name()));
    outcome(pass, details.join("; "))
}

fn acquisition_realism() -> Outcome {
    let mut identical = 0;
    let trials = 10;
    for i in 0..trials {
        let mut r = rng(9000 + i);
        let f = ImageSource::Phantom { size: 64 }.load().unwrap();
        let factor = 4;
        let noisy = GrayImage::from_fn(64, 64, |row, col| {
            if row % factor == 0 && col % factor == 0 {
                f.get(row, col)
            } else {
                r.random_range(0.0..255.0)
            }
        });
        let adaptive = if i % 2 == 0 {
            AdaptiveBudget::default()
        } else {
            AdaptiveBudget::Eta2(0.6)
        };
        let cfg = AcquisitionConfig {
            target_eta1: 0.3,
            adaptive,
            downsample_factor: factor,
            seed: i,
            ..AcquisitionConfig::default()
        };
        if build_mar(&f, &cfg).unwrap() == build_mar(&noisy, &cfg).unwrap() {
            identical += 1;
        }
    }
    outcome(
        identical == trials,
        format!("{identical}/{trials} bundles bit-identical after perturbing off-grid pixels"),
    )
}

fn morphology_algebra() -> Outcome {
    let se = StructuringElement::square(1);
    let mut failures = 0;
    for i in 0..200 {
        let mut r = rng(5000 + i);
        let density = r.random_range(0.02..0.4);
        let a = random_map(32, 32, density, &mut r);
        let b = a.union(&random_map(32, 32, 0.1, &mut r)).unwrap();
        let da = dilate(&a, &se);
        let extensive = a.is_subset_of(&da);
        let monotone = da.is_subset_of(&dilate(&b, &se));
        let ca = close(&a, &se);
        let idempotent = close(&ca, &se) == ca;
        if !(extensive && monotone && idempotent) {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{failures}/200 maps violate extensivity, monotonicity or idempotence"))
}

fn omp_recovery() -> Outcome {
    let (n, m, s, trials) = (256, 100, 10, 50u64);
    let mut exact = 0;
    for t in 0..trials {
        let mut r = rng(7000 + t);
        let mut support = sample(&mut r, n, s).into_vec();
        let mut coeffs = vec![0.0; n];
        for &j in &support {
            let sign = if r.random_bool(0.5) { 1.0 } else { -1.0 };
            coeffs[j] = sign * r.random_range(1.0..3.0);
        }
        let x = haar2_inverse(&SparseCoefficients::new(16, 16, coeffs).unwrap()).unwrap();
        let phi = DenseSensingMatrix::gaussian(m, n, t).unwrap();
        let y = gaussian_measure(x.pixels(), &phi).unwrap();
        let cfg = OmpConfig {
            max_sparsity: s,
            residual_tol: 1e-9,
        };
        let res = omp(&y, &phi, (16, 16), &cfg).unwrap();
        let mut got = res.support.clone();
        got.sort_unstable();
        support.sort_unstable();
        if got == support {
            exact += 1;
        }
    }
    let rate = exact as f64 / trials as f64;
    outcome(rate >= 0.9, format!("{exact}/{trials} exact supports ({:.0}%)", rate * 100.0))
}

fn determinism() -> Outcome {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = ExperimentSpec {
            out_dir: Some(dir.path().to_path_buf()),
            seeds: vec![7],
            persist_artifacts: false,
            ..ExperimentSpec::default()
        };
        spec.acquisition.seed = 7;
        let (rows, _) = reproduce_table1(&spec).unwrap();
        (std::fs::read(dir.path().join("table1.csv")).unwrap(), rows)
    };
    let (a, rows) = run();
    let (b, _) = run();
    outcome(
        !a.is_empty() && a == b,
        format!("{} rows, {} bytes, identical: {}", rows.len(), a.len(), a == b),
    )
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let checks: [(u32, &str, Check, Duration); 11] = [
        (1, "adjoint identity", adjoint_identity, Duration::from_secs(1)),
        (2, "gradient check", gradient_check, Duration::from_secs(10)),
        (4, "phantom MAR vs random", phantom_margin, Duration::from_secs(300)),
        (5, "true-edge MAR", true_edges, Duration::from_secs(300)),
        (6, "eta1 sweep trend", eta1_sweep, Duration::from_secs(1200)),
        (7, "eta2 inverted U", eta2_inverted_u, Duration::from_secs(900)),
        (8, "ball CS < random < MAR", fig6_ordering, Duration::from_secs(120)),
        (9, "acquisition reads only the grid", acquisition_realism, Duration::from_secs(1)),
        (10, "morphology algebra", morphology_algebra, Duration::from_secs(1)),
        (11, "OMP exact recovery", omp_recovery, Duration::from_secs(30)),
        (12, "table1 determinism", determinism, Duration::from_secs(600)),
    ];
    let mut failed = 0;
    for (id, name, check, limit) in checks {
        let start = Instant::now();
        let o = check();
        let took = start.elapsed();
        let pass = o.pass && took <= limit;
        failed += usize::from(!pass);
        println!(
            "{} [{id:>2}] {name}: {} ({:.2}s, limit {}s)",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }

    let traces = TRACES.lock().unwrap();
    let bad: Vec<&String> = traces.iter().filter(|(_, ok)| !ok).map(|(n, _)| n).collect();
    let pass = !traces.is_empty() && bad.is_empty();
    failed += usize::from(!pass);
    println!(
        "{} [ 3] solver monotonicity: {} traces, {} non-monotone{}",
        if pass { "PASS" } else { "FAIL" },
        traces.len(),
        bad.len(),
        bad.first().map(|n| format!(" (first: {n})")).unwrap_or_default()
    );

    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
