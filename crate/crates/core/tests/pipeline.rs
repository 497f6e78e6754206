use marsense::harness::{run_with_image, verify_run_dir, ExperimentSpec, ImageSource, RunSpec, StrategySpec};
use marsense::mask::MeasurementFormat;
use marsense::{AdaptiveBudget, EdgeSource, Measurements, MorphOp};

fn phantom(n: usize) -> marsense::GrayImage {
    ImageSource::Phantom { size: n }.load().unwrap()
}

fn mar_run(n: usize) -> RunSpec {
    RunSpec {
        image: ImageSource::Phantom { size: n },
        strategy: StrategySpec::Mar {
            morph: MorphOp::Dilate,
            edges: EdgeSource::Predicted,
        },
        eta1: 0.3,
        adaptive: AdaptiveBudget::default(),
        seed: 4,
    }
}

#[test]
fn measurements_survive_every_format() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec {
        out_dir: None,
        persist_artifacts: false,
        ..ExperimentSpec::default()
    };
    let out = run_with_image(&spec, &mar_run(64), &phantom(64)).unwrap();
    let meas = out.measurements.unwrap();
    for (name, fmt) in [
        ("m.bin", MeasurementFormat::Binary),
        ("m.txt", MeasurementFormat::Text),
        ("m.json", MeasurementFormat::Json),
    ] {
        let path = dir.path().join(name);
        meas.save(&path, fmt).unwrap();
        assert_eq!(Measurements::load(&path).unwrap(), meas, "{name}");
    }
}

#[test]
fn persisted_run_reloads_consistently() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec {
        out_dir: Some(dir.path().to_path_buf()),
        persist_artifacts: true,
        ..ExperimentSpec::default()
    };
    let out = run_with_image(&spec, &mar_run(64), &phantom(64)).unwrap();
    let row = verify_run_dir(&out.artifact_dir.unwrap()).unwrap();
    // wall time is not persisted
    let mut expected = out.row.clone();
    expected.wall_time_s = 0.0;
    assert_eq!(row, expected);
}

#[test]
fn recovery_beats_its_starting_point() {
    let spec = ExperimentSpec {
        out_dir: None,
        persist_artifacts: false,
        ..ExperimentSpec::default()
    };
    let truth = phantom(64);
    let out = run_with_image(&spec, &mar_run(64), &truth).unwrap();
    let meas = out.measurements.unwrap();
    let mean = meas.values().iter().sum::<f64>() / meas.len() as f64;
    let start = marsense::psnr(&truth, &meas.embed(mean)).unwrap().psnr_db;
    assert!(out.row.psnr_db > start, "{} vs {start}", out.row.psnr_db);
}
