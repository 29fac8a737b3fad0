use g4d_core::io;
use g4d_core::{Camera, GaussianFrame, Intrinsics, ViewMaps};
use proptest::prelude::*;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;
use tempfile::TempDir;

fn g4d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_g4d"))
        .args(args)
        .env_remove("G4D_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(report: &str, key: &str) -> f64 {
    let line = report
        .lines()
        .find(|l| l.starts_with(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in\n{report}"));
    line.split(" = ").nth(1).unwrap().parse().unwrap()
}

/// One synthesized dataset shared by the tests.
fn dataset() -> &'static Path {
    static DIR: OnceLock<(TempDir, PathBuf)> = OnceLock::new();
    let (_, path) = DIR.get_or_init(|| {
        let tmp = TempDir::new().unwrap();
        let out = tmp.path().join("scene");
        let o = g4d(&["synth", "--seed", "11", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        (tmp, out)
    });
    path
}

fn ds() -> &'static str {
    dataset().to_str().unwrap()
}

#[test]
fn synth_writes_the_manifest_layout() {
    let m = io::read_manifest(dataset().join("manifest.toml")).unwrap();
    assert_eq!(m.seed, 11);
    assert_eq!(m.timestamps.len(), m.scene.timestamps);
    for (t, e) in m.timestamps.iter().enumerate() {
        assert_eq!(e.motions.len(), m.scene.views);
        assert_eq!(e.images.len(), m.scene.views);
        assert_eq!(e.flows_backward.is_empty(), t == 0);
        assert_eq!(e.flows_forward.is_empty(), t + 1 == m.timestamps.len());
        let f = io::read_frame(dataset().join(&e.frame)).unwrap();
        assert_eq!(f.timestamp(), t as i64);
        assert!(f.valid_count() > 0);
        assert!(io::read_png(dataset().join(&e.previews[0])).is_ok());
    }
    let cams = io::read_cameras(dataset().join(&m.cameras)).unwrap();
    assert_eq!(cams.len(), m.timestamps.len());
}

#[test]
fn synth_is_byte_deterministic() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("again");
    let o = g4d(&["synth", "--seed", "11", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    for rel in ["manifest.toml", "cameras.toml", "t002/frame.g4da", "t002/flow_fwd_v1.g4dr", "t001/image_v3.g4di"] {
        let a = std::fs::read(dataset().join(rel)).unwrap();
        let b = std::fs::read(out.join(rel)).unwrap();
        assert!(a == b, "{rel} differs");
    }
}

#[test]
fn motion_eval_with_baked_motion_is_exact() {
    for t in ["0", "1", "3"] {
        let o = g4d(&["eval", "--mode", "motion", "--frames", ds(), "--t", t]);
        assert_eq!(code(&o), 0);
        let r = stdout(&o);
        assert!(value(&r, "motion_error") <= 1e-5, "{r}");
        assert!(value(&r, "retargeted_distance") <= 1e-5, "{r}");
    }
}

#[test]
fn motion_eval_reports_a_uniform_perturbation() {
    let o = g4d(&["eval", "--mode", "motion", "--frames", ds(), "--t", "1", "--perturb", "0.01"]);
    assert_eq!(code(&o), 0);
    let e = value(&stdout(&o), "motion_error");
    assert!((e - 0.01).abs() <= 1e-6, "{e}");
}

#[test]
fn zero_motion_scores_worse_than_baked_motion() {
    let run = |m: &str| {
        let o = g4d(&["eval", "--mode", "motion", "--frames", ds(), "--t", "2", "--motion", m]);
        value(&stdout(&o), "motion_error")
    };
    assert!(run("zero") > 100.0 * run("gt").max(1e-9));
}

#[test]
fn metric_eval_recovers_the_scene_scale() {
    let o = g4d(&["eval", "--mode", "metric", "--frames", ds()]);
    assert_eq!(code(&o), 0);
    let r = stdout(&o);
    assert!(value(&r, "metric_scale_error") <= 1e-4, "{r}");
    assert!((value(&r, "recovered_scale") - value(&r, "true_scale")).abs() <= 1e-9);
}

#[test]
fn nvs_eval_at_mid_time() {
    let o = g4d(&["eval", "--mode", "nvs", "--frames", ds(), "--t-prime", "1.5"]);
    assert_eq!(code(&o), 0);
    let r = stdout(&o);
    assert!(value(&r, "psnr") >= 30.0, "{r}");
    assert!(value(&r, "ssim") > 0.9, "{r}");
}

#[test]
fn render_of_an_empty_frame_is_background() {
    let tmp = TempDir::new().unwrap();
    let frame = GaussianFrame::new(4, 3, 0, vec![ViewMaps::empty(12)]).unwrap();
    let fpath = tmp.path().join("empty.g4da");
    io::write_frame(&fpath, &frame).unwrap();
    let k = Intrinsics {
        fx: 20.0,
        fy: 20.0,
        cx: 7.5,
        cy: 5.5,
    };
    let cpath = tmp.path().join("cams.toml");
    io::write_cameras(&cpath, &[vec![Camera::reference(k).unwrap()]]).unwrap();
    let out = tmp.path().join("bg.g4di");
    let o = g4d(&[
        "render",
        "--frame",
        fpath.to_str().unwrap(),
        "--cameras",
        cpath.to_str().unwrap(),
        "--view",
        "0",
        "--bg",
        "0.25,0.5,1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let img = io::read_image(&out).unwrap();
    assert_eq!((img.width(), img.height()), (16, 12));
    assert!(img.data().iter().all(|p| *p == [0.25, 0.5, 1.0]));
}

#[test]
fn interp_outside_the_frame_interval_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("x.ply");
    for (t, tp) in [("2", "0.5"), ("2", "2.01"), ("1", "-0.5")] {
        let o = g4d(&["interp", "--frames", ds(), "--t", t, "--t-prime", tp, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 1, "t={t} t'={tp}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("usage"));
    }
    let o = g4d(&["interp", "--frames", ds(), "--t-prime", "9", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(!out.exists());
}

#[test]
fn interp_outputs_render_back() {
    let tmp = TempDir::new().unwrap();
    let ply = tmp.path().join("mid.ply");
    let frame = tmp.path().join("mid.g4da");
    for out in [&ply, &frame] {
        let o = g4d(&["interp", "--frames", ds(), "--t-prime", "2.25", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let header = std::fs::read(&ply).unwrap();
    assert!(header.starts_with(b"ply\n"));
    let f = io::read_frame(&frame).unwrap();
    assert_eq!(f.timestamp(), 2);
    let png = tmp.path().join("mid.png");
    let cams = dataset().join("cameras.toml");
    let o = g4d(&[
        "render",
        "--frame",
        frame.to_str().unwrap(),
        "--cameras",
        cams.to_str().unwrap(),
        "--view",
        "2",
        "--out",
        png.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let img = io::read_png(&png).unwrap();
    assert!(img.data().iter().any(|p| *p != [0.0; 3]));
}

#[test]
fn projected_flows_also_interpolate() {
    let o = g4d(&["interp", "--frames", ds(), "--t-prime", "0.5", "--flows", "project", "--out", "/dev/null"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(value(&stdout(&o), "pairs") > 0.0);
}

#[test]
fn gauge_of_metric_cameras() {
    let cams = dataset().join("cameras.toml");
    let metric = dataset().join("cameras_metric.toml");
    let m = io::read_manifest(dataset().join("manifest.toml")).unwrap();
    let o = g4d(&[
        "gauge",
        "--pred-cams",
        cams.to_str().unwrap(),
        "--gt-cams",
        metric.to_str().unwrap(),
        "--pred-gauge",
        &(1.0 / m.scene.scale).to_string(),
    ]);
    assert_eq!(code(&o), 0);
    let r = stdout(&o);
    assert!((value(&r, "gauge") - 1.0 / m.scene.scale).abs() <= 1e-12);
    assert!(value(&r, "loss.total").abs() <= 1e-9, "{r}");
}

#[test]
fn losses_prefer_true_motion() {
    for mode in ["retarget", "flow"] {
        let run = |m: &str| {
            let o = g4d(&["losses", "--mode", mode, "--frames", ds(), "--t", "1", "--motion", m]);
            assert_eq!(code(&o), 0);
            value(&stdout(&o), "total")
        };
        assert!(run("gt") < run("zero"), "{mode}");
    }
    let o = g4d(&["losses", "--mode", "fusion", "--frames", ds(), "--t-prime", "1.5"]);
    assert_eq!(code(&o), 0);
    assert!(value(&stdout(&o), "total").is_finite());
}

#[test]
fn reports_are_deterministic_and_json_capable() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a.json");
    let b = tmp.path().join("b.json");
    for p in [&a, &b] {
        let o = g4d(&["eval", "--mode", "nvs", "--frames", ds(), "--t-prime", "2.5", "--json", "--report", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        assert!(o.stdout.is_empty());
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let v: serde_json::Value = serde_json::from_slice(&ta).unwrap();
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(keys[0], "mode");
    assert!(v["psnr"].as_f64().unwrap() > 25.0);
}

#[test]
fn selftest_passes() {
    let o = g4d(&["selftest"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(value(&stdout(&o), "failed"), 0.0);
}

#[test]
fn exit_code_contract() {
    assert_eq!(code(&g4d(&["--help"])), 0);
    assert_eq!(code(&g4d(&[])), 1);
    assert_eq!(code(&g4d(&["nonsense"])), 1);
    assert_eq!(code(&g4d(&["render", "--view", "x"])), 1);
    assert_eq!(code(&g4d(&["gauge", "--pred-cams", "/nonexistent", "--gt-cams", "/nonexistent"])), 2);
    assert_eq!(code(&g4d(&["eval", "--mode", "metric", "--frames", "/nonexistent"])), 2);

    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.g4da");
    std::fs::write(&bad, b"G4DA\x01\0\0\0garbage").unwrap();
    let cams = dataset().join("cameras.toml");
    let o = g4d(&["render", "--frame", bad.to_str().unwrap(), "--cameras", cams.to_str().unwrap(), "--view", "0", "--out", "/dev/null"]);
    assert_eq!(code(&o), 2);

    let o = Command::new(env!("CARGO_BIN_EXE_g4d")).arg("selftest").env("G4D_THREADS", "zero").output().unwrap();
    assert_eq!(code(&o), 1);
    let o = Command::new(env!("CARGO_BIN_EXE_g4d")).arg("selftest").env("G4D_THREADS", "1").output().unwrap();
    assert_eq!(code(&o), 0);
}

const TOKENS: &[&str] = &[
    "synth", "render", "interp", "gauge", "losses", "eval", "--mode", "nvs", "motion", "metric", "flow", "--frames",
    "--t", "--t-prime", "--tau", "--fusion", "avg", "mlp:/nonexistent", "--view", "--bg", "--out", "--size", "--json",
    "--perturb", "--gauge", "--pred-gauge", "0", "1", "-1", "2.5", "nan", "1e400", "64x64", "1,2", "/nonexistent",
    "DATASET",
];

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, .. ProptestConfig::default() })]

    #[test]
    fn fuzzed_arguments_never_crash(picks in proptest::collection::vec(0..TOKENS.len(), 0..9)) {
        let args: Vec<&str> = picks
            .iter()
            .map(|&i| if TOKENS[i] == "DATASET" { ds() } else { TOKENS[i] })
            .filter(|a| *a != "--out")
            .collect();
        let o = g4d(&args);
        let c = o.status.code();
        prop_assert!(matches!(c, Some(0..=2)), "{:?} -> {:?}\n{}", args, c, String::from_utf8_lossy(&o.stderr));
    }
}
