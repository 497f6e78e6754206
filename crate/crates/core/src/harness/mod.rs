//! Experiment driver: acquire, recover, score, and write result tables.

mod output;
mod spec;

pub use output::{read_rows_csv, verify_run_dir, write_rows, write_rows_csv, write_timing_csv};
pub use spec::{CsSettings, ExperimentSpec, ImageSource, OutputFormat, RunSpec, StrategySpec};

use std::cmp::Ordering;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cs::{gaussian_measure, omp, DenseSensingMatrix, OmpConfig};
use crate::edge::{MapFormat, MorphOp};
use crate::error::{Error, Result};
use crate::image::{quality, save_image, GrayImage};
use crate::mask::{acquire, apply_mask, AdaptiveBudget, EdgeSource, MaskBundle, MeasurementFormat, Measurements};
use crate::tv::{recover, InitMode, TvConfig};

/// TV weight used when every pixel is measured, so recovery returns the
/// measurements.
pub const FULL_SAMPLING_ALPHA: f64 = 1e-9;
/// Largest `m × N` dictionary the dense baseline will build.
pub const MAX_CS_ENTRIES: usize = 1 << 24;
/// η₂ grid of the adaptive-ratio table.
pub const TABLE2_ETA2_GRID: [f64; 7] = [0.2, 0.4, 0.6, 0.74, 0.85, 0.95, 0.99];
pub const TABLE2_ETA1: f64 = 0.445;

/// One scored acquisition. Wall time is kept out of the CSV so that tables
/// are byte-reproducible; see [`write_timing_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub image: String,
    pub strategy: String,
    pub morph: MorphOp,
    pub eta1: f64,
    pub eta2: f64,
    pub psnr_db: f64,
    pub ssim: f64,
    pub iterations: usize,
    pub seed: u64,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl ResultRow {
    fn sort_key_cmp(&self, other: &Self) -> Ordering {
        self.image
            .cmp(&other.image)
            .then_with(|| self.strategy.cmp(&other.strategy))
            .then_with(|| self.morph.name().cmp(other.morph.name()))
            .then_with(|| self.eta1.total_cmp(&other.eta1))
            .then_with(|| self.eta2.total_cmp(&other.eta2))
            .then_with(|| self.seed.cmp(&other.seed))
    }
}

/// Sorts by image, strategy, morphology, η₁, η₂ and seed.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| a.sort_key_cmp(b));
}

/// Everything a single run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub row: ResultRow,
    /// `None` for the dense-projection baseline, which has no pixel mask.
    pub bundle: Option<MaskBundle>,
    pub measurements: Option<Measurements>,
    pub recovered: GrayImage,
    /// Objective trace of the TV solver; empty for the baseline.
    pub objective_trace: Vec<f64>,
    pub artifact_dir: Option<PathBuf>,
}

fn run_dir_name(run: &RunSpec) -> String {
    let eta2 = match run.adaptive {
        AdaptiveBudget::Eta2(e) => format!("{e}"),
        _ => "edges".into(),
    };
    format!(
        "{}_{}_{}_e1-{}_e2-{}_s{}",
        run.image.name(),
        run.strategy.label(),
        run.strategy.morph(),
        run.eta1,
        eta2,
        run.seed
    )
}

fn recovery_config(bundle: &MaskBundle, base: &TvConfig) -> TvConfig {
    if bundle.s_m.popcount() == bundle.s_m.map.len() {
        TvConfig {
            alpha: FULL_SAMPLING_ALPHA,
            ..base.clone()
        }
    } else {
        base.clone()
    }
}

/// Acquires, recovers and scores one grid point.
///
/// `image` must be the ground truth named by `run.image`; it is passed in
/// so sweeps load it once.
pub fn run_with_image(spec: &ExperimentSpec, run: &RunSpec, image: &GrayImage) -> Result<RunOutput> {
    let start = Instant::now();
    let (w, h) = image.dims();
    let n = w * h;
    let (recovered, bundle, meas, iterations, trace, eta1, eta2) = match run.strategy {
        StrategySpec::StandardCs => {
            let m = (run.eta1 * n as f64).round() as usize;
            if m == 0 || m.saturating_mul(n) > MAX_CS_ENTRIES {
                return Err(Error::InvalidArgument(format!(
                    "standard CS needs 0 < m·N <= {MAX_CS_ENTRIES}; got m = {m}, N = {n}"
                )));
            }
            let phi = DenseSensingMatrix::gaussian(m, n, run.seed)?;
            let y = gaussian_measure(image.pixels(), &phi)?;
            let cfg = OmpConfig {
                max_sparsity: ((spec.cs.sparsity_fraction * m as f64).round() as usize).clamp(1, m),
                residual_tol: spec.cs.residual_tol,
            };
            let res = omp(&y, &phi, (w, h), &cfg)?;
            let iters = res.iterations();
            (res.image.clamped(), None, None, iters, Vec::new(), m as f64 / n as f64, 0.0)
        }
        _ => {
            let mut acq = run.strategy.acquisition(&spec.acquisition);
            acq.target_eta1 = run.eta1;
            acq.adaptive = run.adaptive;
            acq.seed = run.seed;
            let bundle = acquire(image, &acq)?;
            let meas = apply_mask(image, &bundle.s_m)?;
            let tv = recovery_config(&bundle, &spec.recovery);
            let res = recover(&meas, &tv, InitMode::MeanFill)?;
            let trace = res.objective_trace();
            let (eta1, eta2) = (bundle.eta1, bundle.eta2);
            (res.image, Some(bundle), Some(meas), res.iterations, trace, eta1, eta2)
        }
    };
    let q = quality(image, &recovered)?;
    let row = ResultRow {
        image: run.image.name(),
        strategy: run.strategy.label().into(),
        morph: run.strategy.morph(),
        eta1,
        eta2,
        psnr_db: q.psnr_db,
        ssim: q.ssim,
        iterations,
        seed: run.seed,
        wall_time_s: start.elapsed().as_secs_f64(),
    };

    let artifact_dir = match spec.out_path("runs") {
        Some(root) if spec.persist_artifacts => {
            let dir = root.join(run_dir_name(run));
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            if let Some(b) = &bundle {
                for (name, mask) in [("s_l", &b.s_l), ("s_a", &b.s_a), ("s_r", &b.s_r), ("s_m", &b.s_m)] {
                    mask.map.save(dir.join(format!("{name}.pbm")), MapFormat::Pbm)?;
                }
            }
            if let Some(m) = &meas {
                m.save(dir.join("measurements.bin"), MeasurementFormat::Binary)?;
            }
            save_image(&recovered, dir.join("recovered.pgm"))?;
            let json = serde_json::to_vec_pretty(&row)?;
            std::fs::write(dir.join("row.json"), json).map_err(|e| Error::io(dir.join("row.json"), e))?;
            Some(dir)
        }
        _ => None,
    };

    Ok(RunOutput {
        row,
        bundle,
        measurements: meas,
        recovered,
        objective_trace: trace,
        artifact_dir,
    })
}

/// [`run_with_image`] after loading `run.image`.
pub fn run_single(spec: &ExperimentSpec, run: &RunSpec) -> Result<RunOutput> {
    let image = run.image.load()?;
    run_with_image(spec, run, &image)
}

fn run_all(spec: &ExperimentSpec, runs: Vec<RunSpec>) -> Result<Vec<ResultRow>> {
    let mut images = Vec::new();
    for src in &spec.images {
        images.push((src.clone(), src.load()?));
    }
    let lookup = |src: &ImageSource| &images.iter().find(|(s, _)| s == src).expect("image loaded").1;
    let mut rows = runs
        .par_iter()
        .map(|run| run_with_image(spec, run, lookup(&run.image)).map(|o| o.row))
        .collect::<Result<Vec<_>>>()?;
    sort_rows(&mut rows);
    Ok(rows)
}

fn finish(spec: &ExperimentSpec, rows: Vec<ResultRow>, name: &str) -> Result<Vec<ResultRow>> {
    if let Some(dir) = &spec.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_rows(&rows, &dir.join(name), spec.format)?;
        write_timing_csv(&rows, &dir.join(format!("{name}.timing.csv")))?;
    }
    Ok(rows)
}

/// Every strategy at every η₁ of the grid with the template's adaptive
/// budget.
pub fn sweep_eta1(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    if spec.eta1_grid.is_empty() {
        return Err(Error::InvalidArgument("eta1 sweep needs a grid".into()));
    }
    let mut runs = Vec::new();
    for image in &spec.images {
        for &strategy in &spec.strategies {
            for &eta1 in &spec.eta1_grid {
                for &seed in &spec.seeds {
                    runs.push(RunSpec {
                        image: image.clone(),
                        strategy,
                        eta1,
                        adaptive: spec.acquisition.adaptive,
                        seed,
                    });
                }
            }
        }
    }
    let rows = run_all(spec, runs)?;
    finish(spec, rows, "sweep_eta1.csv")
}

/// Edge-based strategies at every η₂ of the grid with η₁ fixed by the
/// template. Strategies without an adaptive part run once.
pub fn sweep_eta2(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    if spec.eta2_grid.is_empty() {
        return Err(Error::InvalidArgument("eta2 sweep needs a grid".into()));
    }
    let eta1 = spec.acquisition.target_eta1;
    let mut runs = Vec::new();
    for image in &spec.images {
        for &strategy in &spec.strategies {
            let adaptive = matches!(strategy, StrategySpec::Mar { .. } | StrategySpec::Trps { .. });
            let grid: Vec<AdaptiveBudget> = if adaptive {
                spec.eta2_grid.iter().map(|&e| AdaptiveBudget::Eta2(e)).collect()
            } else {
                vec![spec.acquisition.adaptive]
            };
            for a in grid {
                for &seed in &spec.seeds {
                    runs.push(RunSpec {
                        image: image.clone(),
                        strategy,
                        eta1,
                        adaptive: a,
                        seed,
                    });
                }
            }
        }
    }
    let rows = run_all(spec, runs)?;
    finish(spec, rows, "sweep_eta2.csv")
}

/// Dense-projection CS, uniform random and MAR sampling on the same image
/// at the same budget.
#[derive(Debug, Clone)]
pub struct Fig6Report {
    pub rows: Vec<ResultRow>,
    /// Per seed: standard CS < random < MAR in PSNR.
    pub ordered: Vec<(u64, bool)>,
}

impl Fig6Report {
    pub fn all_ordered(&self) -> bool {
        self.ordered.iter().all(|(_, ok)| *ok)
    }
}

pub fn compare_fig6(spec: &ExperimentSpec) -> Result<Fig6Report> {
    spec.validate()?;
    let eta1 = spec.acquisition.target_eta1;
    let strategies = [
        StrategySpec::StandardCs,
        StrategySpec::Random,
        StrategySpec::Mar {
            morph: spec.acquisition.morph,
            edges: EdgeSource::Predicted,
        },
    ];
    let image = spec.images[0].clone();
    let mut runs = Vec::new();
    for &seed in &spec.seeds {
        for strategy in strategies {
            runs.push(RunSpec {
                image: image.clone(),
                strategy,
                eta1,
                adaptive: spec.acquisition.adaptive,
                seed,
            });
        }
    }
    let single = ExperimentSpec {
        images: vec![image],
        ..spec.clone()
    };
    let rows = finish(&single, run_all(&single, runs)?, "fig6.csv")?;
    let ordered = spec
        .seeds
        .iter()
        .map(|&seed| {
            let psnr = |label: &str| {
                rows.iter()
                    .find(|r| r.seed == seed && r.strategy == label)
                    .map(|r| r.psnr_db)
                    .unwrap_or(f64::NAN)
            };
            (seed, psnr("standard_cs") < psnr("random") && psnr("random") < psnr("mar"))
        })
        .collect();
    Ok(Fig6Report { rows, ordered })
}

/// Keeps the images that can be loaded; the rest are reported in the
/// returned notices. Generated images always load.
pub fn available_images(images: &[ImageSource]) -> (Vec<ImageSource>, Vec<String>) {
    let mut ok = Vec::new();
    let mut notices = Vec::new();
    for img in images {
        match img.load() {
            Ok(_) => ok.push(img.clone()),
            Err(e) => notices.push(format!("skipping {}: {e}", img.name())),
        }
    }
    (ok, notices)
}

/// Uniform random, MAR with dilated and MAR with closed predicted edges at
/// the template η₁, on the phantom plus any loadable user images.
pub fn reproduce_table1(spec: &ExperimentSpec) -> Result<(Vec<ResultRow>, Vec<String>)> {
    let (images, notices) = available_images(&with_phantom(&spec.images));
    let table = ExperimentSpec {
        images,
        strategies: vec![
            StrategySpec::Random,
            StrategySpec::Mar {
                morph: MorphOp::Dilate,
                edges: EdgeSource::Predicted,
            },
            StrategySpec::Mar {
                morph: MorphOp::Close,
                edges: EdgeSource::Predicted,
            },
        ],
        eta1_grid: vec![spec.acquisition.target_eta1],
        ..spec.clone()
    };
    table.validate()?;
    let mut runs = Vec::new();
    for image in &table.images {
        for &strategy in &table.strategies {
            for &seed in &table.seeds {
                runs.push(RunSpec {
                    image: image.clone(),
                    strategy,
                    eta1: spec.acquisition.target_eta1,
                    adaptive: spec.acquisition.adaptive,
                    seed,
                });
            }
        }
    }
    let rows = finish(&table, run_all(&table, runs)?, "table1.csv")?;
    Ok((rows, notices))
}

/// MAR at fixed η₁ over the η₂ grid, per loadable image.
pub fn reproduce_table2(spec: &ExperimentSpec) -> Result<(Vec<ResultRow>, Vec<String>)> {
    let (images, notices) = available_images(&with_phantom(&spec.images));
    let mut acquisition = spec.acquisition.clone();
    if spec.eta2_grid.is_empty() {
        acquisition.target_eta1 = TABLE2_ETA1;
    }
    let table = ExperimentSpec {
        images,
        acquisition,
        strategies: vec![StrategySpec::Mar {
            morph: spec.acquisition.morph,
            edges: EdgeSource::Predicted,
        }],
        eta2_grid: if spec.eta2_grid.is_empty() {
            TABLE2_ETA2_GRID.to_vec()
        } else {
            spec.eta2_grid.clone()
        },
        out_dir: None,
        ..spec.clone()
    };
    let rows = sweep_eta2(&table)?;
    let out = ExperimentSpec {
        out_dir: spec.out_dir.clone(),
        ..table
    };
    Ok((finish(&out, rows, "table2.csv")?, notices))
}

fn with_phantom(images: &[ImageSource]) -> Vec<ImageSource> {
    let mut all = images.to_vec();
    if !all.iter().any(|i| matches!(i, ImageSource::Phantom { .. })) {
        all.insert(0, ImageSource::Phantom { size: 256 });
    }
    all
}

/// Rows whose PSNR is the largest in their (image, strategy) group, as
/// `(image, strategy, eta2)`.
pub fn eta2_maximizers(rows: &[ResultRow]) -> Vec<(String, String, f64)> {
    let mut out: Vec<(String, String, f64, f64)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(i, s, _, _)| *i == r.image && *s == r.strategy) {
            Some(best) if best.3 >= r.psnr_db => {}
            Some(best) => {
                best.2 = r.eta2;
                best.3 = r.psnr_db;
            }
            None => out.push((r.image.clone(), r.strategy.clone(), r.eta2, r.psnr_db)),
        }
    }
    out.into_iter().map(|(i, s, e, _)| (i, s, e)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            images: vec![ImageSource::Phantom { size: 64 }],
            recovery: TvConfig {
                max_iters: 60,
                ..TvConfig::default()
            },
            persist_artifacts: false,
            ..ExperimentSpec::default()
        }
    }

    fn run(strategy: StrategySpec, eta1: f64) -> RunSpec {
        RunSpec {
            image: ImageSource::Phantom { size: 64 },
            strategy,
            eta1,
            adaptive: AdaptiveBudget::default(),
            seed: 1,
        }
    }

    #[test]
    fn random_row_hits_eta1_and_repeats() {
        let spec = small_spec();
        let a = run_single(&spec, &run(StrategySpec::Random, 0.3)).unwrap();
        assert!((a.row.eta1 - 0.3).abs() <= 1.0 / 4096.0);
        let b = run_single(&spec, &run(StrategySpec::Random, 0.3)).unwrap();
        assert_eq!(a.row.psnr_db, b.row.psnr_db);
        assert_eq!(a.row.ssim, b.row.ssim);
        assert_eq!(a.recovered, b.recovered);
    }

    #[test]
    fn full_sampling_reaches_the_cap() {
        let spec = small_spec();
        let mar = StrategySpec::Mar {
            morph: MorphOp::Dilate,
            edges: EdgeSource::Predicted,
        };
        for s in [StrategySpec::Random, mar, StrategySpec::Trps { morph: MorphOp::Dilate }] {
            let mut r = run(s, 1.0);
            if matches!(s, StrategySpec::Trps { .. }) {
                r.adaptive = AdaptiveBudget::Eta2(0.5);
            }
            let out = run_single(&spec, &r).unwrap();
            assert_eq!(out.row.psnr_db, crate::image::PSNR_CAP_DB, "{}", s.label());
        }
    }

    #[test]
    fn eta1_sweep_cardinality_and_order() {
        let spec = ExperimentSpec {
            eta1_grid: vec![0.5, 0.2],
            ..small_spec()
        };
        let rows = sweep_eta1(&spec).unwrap();
        assert_eq!(rows.len(), 4);
        let keys: Vec<_> = rows.iter().map(|r| (r.strategy.as_str(), (r.eta1 * 10.0).round() as i32)).collect();
        assert_eq!(keys, vec![("mar", 2), ("mar", 5), ("random", 2), ("random", 5)]);
    }

    #[test]
    fn single_point_eta2_grid() {
        let spec = ExperimentSpec {
            eta2_grid: vec![0.6],
            strategies: vec![StrategySpec::Mar {
                morph: MorphOp::Dilate,
                edges: EdgeSource::Predicted,
            }],
            ..small_spec()
        };
        let rows = sweep_eta2(&spec).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].eta2 - 0.6).abs() < 1e-3);
    }

    #[test]
    fn standard_cs_refuses_huge_dictionaries() {
        let spec = small_spec();
        let r = RunSpec {
            image: ImageSource::Phantom { size: 256 },
            ..run(StrategySpec::StandardCs, 0.3)
        };
        assert!(run_single(&spec, &r).is_err());
    }

    #[test]
    fn image_source_parsing() {
        assert_eq!("phantom".parse::<ImageSource>().unwrap(), ImageSource::Phantom { size: 256 });
        assert_eq!("ball:32".parse::<ImageSource>().unwrap(), ImageSource::Ball { size: 32 });
        assert!(matches!("x/lena.png".parse::<ImageSource>().unwrap(), ImageSource::Path(_)));
        assert!("ball:x".parse::<ImageSource>().is_err());
        assert_eq!(ImageSource::Path("a/boat.pgm".into()).name(), "boat");
    }

    #[test]
    fn missing_user_images_are_skipped() {
        let (ok, notices) = available_images(&[
            ImageSource::Phantom { size: 64 },
            ImageSource::Path("/nonexistent/lena.png".into()),
        ]);
        assert_eq!(ok.len(), 1);
        assert_eq!(notices.len(), 1);
    }
}
