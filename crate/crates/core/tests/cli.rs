use std::fs;
use std::path::Path;
use std::time::Instant;

use vbin::cli::{self, run};
use vbin::datamodel::{Behavior, Ttlc};
use vbin::evaluation::{write_records, PredictionRecord};

fn vbin(args: &[&str]) -> i32 {
    run(std::iter::once("vbin").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: [&str; 6] = [
    "--set",
    "scenes=1",
    "--set",
    "simulation.duration_frames=300",
    "--set",
    "simulation.vehicle_count=24",
];

fn simulate_small(out: &Path, seed: &str) {
    let mut args = vec!["simulate", "--seed", seed, "--out", p(out)];
    args.extend(SMALL);
    assert_eq!(vbin(&args), 0);
}

#[test]
fn simulate_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    simulate_small(&a, "7");
    simulate_small(&b, "7");
    simulate_small(&c, "8");
    for f in [cli::DATASET_FILE, cli::SCENES_FILE, cli::CONFIG_FILE] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{}", f);
    }
    assert_ne!(fs::read(a.join(cli::DATASET_FILE)).unwrap(), fs::read(c.join(cli::DATASET_FILE)).unwrap());
    let echo = fs::read_to_string(a.join(cli::CONFIG_FILE)).unwrap();
    assert!(echo.contains("seed = 7") && echo.contains("duration_frames = 300"));
}

#[test]
fn build_samples_reproduces_simulated_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    simulate_small(&sim, "3");
    let rebuilt = dir.path().join("rebuilt.vbd");
    let scenes = sim.join(cli::SCENES_FILE);
    assert_eq!(vbin(&["build-samples", p(&scenes), "--seed", "3", "--out", p(&rebuilt)]), 0);
    assert_eq!(fs::read(sim.join(cli::DATASET_FILE)).unwrap(), fs::read(&rebuilt).unwrap());
}

fn perfect(event_id: u64, frame: i64, ttlc: Ttlc, label: Behavior) -> PredictionRecord {
    let mut probs = [0.0; 3];
    probs[label.index()] = 1.0;
    PredictionRecord { event_id, frame, ttlc, label, probs }
}

#[test]
fn evaluate_perfect_predictions_reports_unit_f1() {
    let dir = tempfile::tempdir().unwrap();
    let mut recs = Vec::new();
    for k in 1..=80 {
        let label = if k <= 40 { Behavior::ChangeRight } else { Behavior::LaneKeep };
        recs.push(perfect(1, 1000 - k, Ttlc::from_frames(k), label));
        recs.push(perfect(2, 1000 - k, Ttlc::Never, Behavior::LaneKeep));
    }
    let file = dir.path().join("pred.csv");
    write_records(&recs, fs::File::create(&file).unwrap()).unwrap();
    let out = dir.path().join("eval");
    assert_eq!(vbin(&["evaluate", "--predictions", p(&file), "--out", p(&out)]), 0);
    let kv: toml::Table = fs::read_to_string(out.join(cli::REPORT_KV_FILE)).unwrap().parse().unwrap();
    assert_eq!(kv["f1"].as_float(), Some(1.0));
    assert_eq!(kv["precision"].as_float(), Some(1.0));
    assert_eq!(kv["critical_fn"].as_integer(), Some(0));
    assert_eq!(kv["average_prediction_time"].as_float(), Some(4.0));

    let plots = dir.path().join("plots");
    assert_eq!(vbin(&["emit-plots", p(&file), "--bin-width", "1", "--out", p(&plots)]), 0);
    let nll = fs::read_to_string(plots.join(cli::NLL_FILE)).unwrap();
    assert_eq!(nll.lines().count(), 9);
    assert!(nll.lines().skip(1).all(|l| l.ends_with(",0.0")));
}

#[test]
fn full_pipeline_smoke() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    simulate_small(&sim, "11");
    let dataset = sim.join(cli::DATASET_FILE);
    let train_args = |out: &Path| {
        vbin(&[
            "train", "--dataset", p(&dataset), "--seed", "5", "--set", "epochs=2", "--set", "gru_hidden=16",
            "--set", "samples_per_epoch=256", "--out", p(out),
        ])
    };
    let (t1, t2) = (dir.path().join("t1"), dir.path().join("t2"));
    assert_eq!(train_args(&t1), 0);
    assert_eq!(train_args(&t2), 0);
    let ckpt = t1.join(cli::CHECKPOINT_FILE);
    assert_eq!(fs::read(&ckpt).unwrap(), fs::read(t2.join(cli::CHECKPOINT_FILE)).unwrap());
    assert_eq!(fs::read_to_string(t1.join(cli::HISTORY_FILE)).unwrap().lines().count(), 3);

    let pred = dir.path().join("pred.csv");
    assert_eq!(vbin(&["predict", "--dataset", p(&dataset), "--checkpoint", p(&ckpt), "--out", p(&pred)]), 0);
    let eval = dir.path().join("eval");
    assert_eq!(
        vbin(&["evaluate", "--dataset", p(&dataset), "--checkpoint", p(&ckpt), "--bin-width", "0.5", "--out", p(&eval)]),
        0
    );
    let eval2 = dir.path().join("eval2");
    assert_eq!(vbin(&["evaluate", "--predictions", p(&pred), "--out", p(&eval2)]), 0);
    assert_eq!(
        fs::read(eval.join(cli::REPORT_TABLE_FILE)).unwrap(),
        fs::read(eval2.join(cli::REPORT_TABLE_FILE)).unwrap()
    );
    let table = fs::read_to_string(eval.join(cli::REPORT_TABLE_FILE)).unwrap();
    assert!(table.starts_with("metric\tvalue\n") && table.contains("\nf1\t"));
    assert!(start.elapsed().as_secs() < 600);
}

#[test]
fn ingest_with_column_map() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("traj.txt");
    let mut text = String::from("id;t;lat;lon;speed;lane\n");
    for i in 0..30 {
        text += &format!("4;{};5.5;{};10;2\n", i, i);
    }
    fs::write(&input, text).unwrap();
    let map = dir.path().join("columns.txt");
    fs::write(&map, "vehicle_id=id\nframe=t\nx_lat=lat\nx_long=lon\nv_long=speed\nlane_id=lane\n").unwrap();
    let out = dir.path().join("scenes.csv");
    let code = vbin(&[
        "ingest", p(&input), "--column-map", p(&map), "--set", "delimiter=';'", "--set", "unit_scale=1.0",
        "--set", "lane_width=3.7", "--set", "lane_count=3", "--out", p(&out),
    ]);
    assert_eq!(code, 0);
    let scenes = vbin::datamodel::load_scenes(&out).unwrap();
    let track = scenes[0].1.track(4).unwrap();
    assert_eq!(track.len(), 30);
    assert_eq!(track[0].lane_id, 1);
}

#[test]
fn failures_map_to_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let missing = dir.path().join("missing.vbd");
    assert_eq!(vbin(&["train", "--dataset", p(&missing), "--out", p(&out)]), cli::EXIT_MISSING_FILE);

    let sim = dir.path().join("sim");
    simulate_small(&sim, "1");
    let dataset = sim.join(cli::DATASET_FILE);
    assert_eq!(
        vbin(&["train", "--dataset", p(&dataset), "--set", "bogus=1", "--out", p(&out)]),
        cli::EXIT_CONFIG
    );
    assert_eq!(
        vbin(&["train", "--dataset", p(&dataset), "--set", "model=lstm", "--out", p(&out)]),
        cli::EXIT_CONFIG
    );
    let bad_cfg = dir.path().join("bad.toml");
    fs::write(&bad_cfg, "scenes = \"many\"\n").unwrap();
    assert_eq!(vbin(&["simulate", "--config", p(&bad_cfg), "--out", p(&out)]), cli::EXIT_CONFIG);
    assert_eq!(vbin(&["simulate", "--out", p(&out), "--bogus"]), cli::EXIT_USAGE);
    assert_eq!(vbin(&["simulate"]), cli::EXIT_USAGE);

    let model = vbin::model::Model::new(vbin::model::ModelKind::Vlstm, 8, 0).unwrap();
    let ckpt = dir.path().join("m.vbck");
    vbin::model::save_checkpoint(&vbin::model::Checkpoint::new(model, ""), &ckpt).unwrap();
    let mut bytes = fs::read(&ckpt).unwrap();
    bytes[4..8].copy_from_slice(&99u32.to_le_bytes());
    fs::write(&ckpt, bytes).unwrap();
    let pred = dir.path().join("pred.csv");
    assert_eq!(
        vbin(&["predict", "--dataset", p(&dataset), "--checkpoint", p(&ckpt), "--out", p(&pred)]),
        cli::EXIT_VERSION
    );
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    fs::write(&cfg, "scenes = 1\n[simulation]\nduration_frames = 200\nvehicle_count = 10\n").unwrap();
    let out = dir.path().join("out");
    let code = vbin(&["simulate", "--config", p(&cfg), "--set", "simulation.vehicle_count=12", "--out", p(&out)]);
    assert_eq!(code, 0);
    let echo: toml::Table = fs::read_to_string(out.join(cli::CONFIG_FILE)).unwrap().parse().unwrap();
    let sim = echo["simulation"].as_table().unwrap();
    assert_eq!(sim["duration_frames"].as_integer(), Some(200));
    assert_eq!(sim["vehicle_count"].as_integer(), Some(12));
}
