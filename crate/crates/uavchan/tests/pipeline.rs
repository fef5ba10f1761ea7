use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Proc;

use proptest::prelude::*;
use uavchan::config::RunConfig;
use uavchan::dataset::{read_dataset, read_dataset_file, write_dataset};
use uavchan::model::{load_model, model_from_json, save_model};
use uavchan::run::{load_manifest, replay, run, Command, Which};
use uavchan::Error;
use uavchan_core::citygen::{generate_city, generate_link, OracleConfig};
use uavchan_core::numerics::SeededRng;
use uavchan_core::{Dataset, LatentDraw, LinkCondition};

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_uavchan"))
}

fn quick_config(dir: &Path) -> PathBuf {
    let mut cfg = RunConfig::default();
    cfg.n_links = 5000;
    cfg.train.link_state.epochs = 3;
    cfg.train.vae.epochs = 2;
    cfg.gpp.epochs = 2;
    cfg.snr_map.x_max_m = 100.0;
    cfg.snr_map.x_step_m = 50.0;
    cfg.snr_map.z_max_m = 60.0;
    cfg.snr_map.z_step_m = 30.0;
    cfg.snr_map.n_realizations = 5;
    let p = dir.join("cfg.json");
    fs::write(&p, cfg.to_json()).unwrap();
    p
}

fn ok(args: &[&str]) {
    let out = bin().args(args).arg("-q").output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_pipeline_and_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let cfg = quick_config(t);
    let c = s(&cfg);
    let [data, train, gen, plos, pl, eval, geval, snr] =
        ["data", "train", "gen", "plos", "pl", "eval", "geval", "snr"].map(|d| t.join(d));

    ok(&["datagen", "--config", c, "--out", s(&data)]);
    ok(&["train", "--config", c, "--data", s(&data.join("train.csv")), "--out", s(&train)]);
    let model = train.join("model.json");
    ok(&["generate", "--config", c, "--model", s(&model), "--data", s(&data.join("test.csv")), "--out", s(&gen)]);
    ok(&["fit-3gpp", "--config", c, "--data", s(&data.join("train.csv")), "--which", "plos", "--out", s(&plos)]);
    ok(&["fit-3gpp", "--config", c, "--data", s(&data.join("train.csv")), "--which", "pathloss", "--out", s(&pl)]);
    ok(&["eval", "--config", c, "--model", s(&model), "--data", s(&data.join("test.csv")), "--out", s(&eval)]);
    ok(&[
        "eval",
        "--config",
        c,
        "--gpp-plos",
        s(&plos.join("params.json")),
        "--gpp-pathloss",
        s(&pl.join("params.json")),
        "--data",
        s(&data.join("test.csv")),
        "--out",
        s(&geval),
    ]);
    ok(&["snr-map", "--config", c, "--model", s(&model), "--out", s(&snr)]);

    for f in [
        data.join("dataset.csv"),
        train.join("losses.csv"),
        gen.join("generated.csv"),
        eval.join("eval/metrics.json"),
        eval.join("eval/plos_grid.csv"),
        eval.join("eval/omni_cdf.csv"),
        eval.join("eval/angles_hist.csv"),
        eval.join("eval/angles_iqr.csv"),
        geval.join("eval/metrics.json"),
        snr.join("snr_map.csv"),
        snr.join("snr_map.json"),
    ] {
        assert!(f.is_file(), "{}", f.display());
    }
    assert_eq!(read_dataset_file(&data.join("dataset.csv")).unwrap().len(), 5000);
    assert_eq!(read_dataset_file(&gen.join("generated.csv")).unwrap().len(), 1250);
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(eval.join("eval/metrics.json")).unwrap()).unwrap();
    assert!(metrics["wasserstein1_db"].as_f64().unwrap() >= 0.0);
    assert!(metrics["plos_grid_mae"].as_f64().unwrap() <= 1.0);

    // every run replays to identical bytes
    for dir in [&data, &train, &gen, &plos, &eval, &geval, &snr] {
        let again = t.join("replay").join(dir.file_name().unwrap());
        ok(&["replay", "--manifest", s(&dir.join("manifest.json")), "--out", s(&again)]);
        let m = load_manifest(&dir.join("manifest.json")).unwrap();
        for o in &m.outputs {
            assert_eq!(fs::read(dir.join(&o.path)).unwrap(), fs::read(again.join(&o.path)).unwrap());
        }
    }
}

fn small_run(dir: &Path) -> (RunConfig, PathBuf) {
    let mut cfg = RunConfig::default();
    cfg.n_links = 400;
    cfg.train.link_state.epochs = 2;
    cfg.train.vae.epochs = 1;
    let mut log = |_: &str| {};
    run(&Command::Datagen, &cfg, &dir.join("data"), &mut log).unwrap();
    run(
        &Command::Train {
            data: dir.join("data/train.csv"),
        },
        &cfg,
        &dir.join("train"),
        &mut log,
    )
    .unwrap();
    (cfg, dir.join("train/model.json"))
}

#[test]
fn eval_refuses_carrier_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, model) = small_run(tmp.path());
    let test = read_dataset_file(&tmp.path().join("data/test.csv")).unwrap();
    let other = Dataset::new(test.records, 60e9).unwrap();
    let mut b = Vec::new();
    write_dataset(&other, &mut b).unwrap();
    let path = tmp.path().join("test60.csv");
    fs::write(&path, b).unwrap();
    let err = run(
        &Command::Eval {
            data: path.clone(),
            model: Some(model),
            gpp_plos: None,
            gpp_pathloss: None,
        },
        &cfg,
        &tmp.path().join("eval"),
        &mut |_| {},
    )
    .unwrap_err();
    assert!(err.to_string().contains("carrier"), "{err}");
    let out = bin()
        .args(["eval", "--data", s(&path), "--model", s(&tmp.path().join("train/model.json")), "--out"])
        .arg(tmp.path().join("eval2"))
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn model_file_round_trip_and_refusals() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, path) = small_run(tmp.path());
    let m = load_model(&path).unwrap();
    let copy = tmp.path().join("copy.json");
    save_model(&m, &copy).unwrap();
    let back = load_model(&copy).unwrap();
    assert_eq!(back, m);
    let u = LinkCondition::new(120.0, -40.0, 58.0, uavchan_core::GnbType::Standard);
    for i in 0..50 {
        let d = LatentDraw::sample(&mut SeededRng::substream(11, i));
        assert_eq!(m.generate_link(&u, &d).unwrap(), back.generate_link(&u, &d).unwrap());
    }

    let text = fs::read_to_string(&path).unwrap();
    let truncated = &text[..text.len() / 2];
    assert!(matches!(model_from_json(truncated, &path), Err(Error::Json { .. })));
    let v2 = text.replacen("\"format_version\":1", "\"format_version\":2", 1);
    match model_from_json(&v2, &path) {
        Err(Error::Core(uavchan_core::Error::VersionMismatch { expected: 1, found: 2 })) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn replay_detects_changed_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, _) = small_run(tmp.path());
    let data = tmp.path().join("data/train.csv");
    let m = run(
        &Command::Fit3gpp {
            data: data.clone(),
            which: Which::Plos,
        },
        &cfg,
        &tmp.path().join("fit"),
        &mut |_| {},
    )
    .unwrap();
    assert_eq!(m.inputs.len(), 1);
    let mut text = fs::read_to_string(&data).unwrap();
    text.push_str(&text.lines().last().unwrap().to_string());
    text.push('\n');
    fs::write(&data, text).unwrap();
    let err = replay(&tmp.path().join("fit/manifest.json"), &tmp.path().join("again"), &mut |_| {}).unwrap_err();
    assert!(err.to_string().contains("changed"), "{err}");
}

#[test]
fn outputs_never_overwrite_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, model) = small_run(tmp.path());
    let dir = tmp.path().join("g");
    fs::create_dir_all(&dir).unwrap();
    let conds = dir.join("generated.csv");
    fs::copy(tmp.path().join("data/test.csv"), &conds).unwrap();
    let before = fs::read(&conds).unwrap();
    let err = run(&Command::Generate { model, data: conds.clone() }, &cfg, &dir, &mut |_| {}).unwrap_err();
    assert!(err.to_string().contains("refusing"), "{err}");
    assert_eq!(fs::read(&conds).unwrap(), before);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Reading back a written oracle record reproduces it (delays within an ulp).
    #[test]
    fn dataset_round_trip(seed in any::<u64>(), idx in 0u64..1_000_000) {
        let rec = generate_link(&OracleConfig::default(), seed, idx).unwrap();
        let d = Dataset::new(vec![rec.clone()], 28e9).unwrap();
        let mut b = Vec::new();
        write_dataset(&d, &mut b).unwrap();
        let back = read_dataset(std::str::from_utf8(&b).unwrap()).unwrap();
        let r = &back.records[0];
        prop_assert_eq!(&r.env_id, &rec.env_id);
        prop_assert_eq!(r.condition, rec.condition);
        for (p, q) in rec.paths.entries.iter().zip(&r.paths.entries) {
            prop_assert_eq!(p.is_los, q.is_los);
            prop_assert_eq!([p.loss_db, p.aoa_az_deg, p.aoa_el_deg, p.aod_az_deg, p.aod_el_deg],
                            [q.loss_db, q.aoa_az_deg, q.aoa_el_deg, q.aod_az_deg, q.aod_el_deg]);
            prop_assert!((p.delay_s - q.delay_s).abs() <= 1e-15 * p.delay_s.abs());
        }
    }
}

#[test]
fn datagen_is_seeded() {
    let a = generate_city(&OracleConfig::default(), 50, 4).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.n_links = 50;
    cfg.seed = 4;
    run(&Command::Datagen, &cfg, tmp.path(), &mut |_| {}).unwrap();
    let b = read_dataset_file(&tmp.path().join("dataset.csv")).unwrap();
    assert_eq!(a.records.len(), b.records.len());
    assert_eq!(a.records[17].condition, b.records[17].condition);
}
