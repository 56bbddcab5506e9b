use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geoagent_core::model::{Raster, MIME_PNG};
use geoagent_core::native::canny;
use geoagent_core::CannyParams;
use serde_json::{json, Value};

fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn geoagent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoagent"))
        .current_dir(repo_root())
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn canny_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let step = Raster::from_fn(64, 48, |x, y| if x + y / 4 < 30 { 20 } else { 210 });
    let input = dir.path().join("step.png");
    std::fs::write(&input, step.encode_png()).unwrap();
    let output = dir.path().join("edges.png");
    let stdout = ok(&geoagent(&[
        "tool", "canny", "--in", s(&input), "--out", s(&output), "--sigma", "1.2", "--low", "0.1", "--high", "0.3",
    ]));

    let expected = canny(
        &step,
        &CannyParams {
            sigma: 1.2,
            low_ratio: 0.1,
            high_ratio: 0.3,
        },
    )
    .unwrap();
    let got = Raster::decode(&std::fs::read(&output).unwrap(), MIME_PNG).unwrap();
    assert_eq!(got, expected);
    let summary: Value = serde_json::from_str(&stdout).unwrap();
    let lit = expected.data().iter().filter(|&&v| v != 0).count();
    assert!(lit > 0);
    assert_eq!(summary["edge_pixels"], lit);
}

#[test]
fn polygonize_then_count() {
    let dir = tempfile::tempdir().unwrap();
    // class 1 occupies x in 10..30, y in 5..25
    let mask = Raster::from_fn(40, 30, |x, y| u8::from((10..30).contains(&x) && (5..25).contains(&y)));
    let mask_path = dir.path().join("mask.png");
    std::fs::write(&mask_path, mask.encode_png()).unwrap();
    let palette = json!({"classes": [
        {"id": 0, "name": "background", "color": [0, 0, 0]},
        {"id": 1, "name": "road", "color": [128, 128, 128]},
    ]});
    std::fs::write(dir.path().join("mask.png.palette.json"), palette.to_string()).unwrap();
    let polys = dir.path().join("polys.json");
    ok(&geoagent(&[
        "tool", "polygonize", "--in", s(&mask_path), "--category", "road", "--epsilon", "0.5", "--out", s(&polys),
    ]));
    let set: Value = serde_json::from_slice(&std::fs::read(&polys).unwrap()).unwrap();
    let list = set["polygons"].as_array().unwrap();
    assert_eq!(list.len(), 1);
    assert_eq!(list[0]["class"], "road");
    let ring = list[0]["ring"].as_array().unwrap();
    assert_eq!(ring.len(), 4, "{ring:?}");
    assert_ne!(ring[0], ring[3]);

    let dets = json!({"detections": [
        {"category": "airplane", "bbox": [12.0, 6.0, 16.0, 10.0], "score": 0.9},
        {"category": "airplane", "bbox": [20.0, 15.0, 24.0, 19.0], "score": 0.8},
        {"category": "airplane", "bbox": [33.0, 2.0, 37.0, 6.0], "score": 0.7},
        {"category": "ship", "bbox": [14.0, 14.0, 16.0, 16.0], "score": 0.6},
    ]});
    let det_path = dir.path().join("dets.json");
    std::fs::write(&det_path, dets.to_string()).unwrap();
    let count = |extra: &[&str]| -> i64 {
        let mut args = vec!["tool", "count", "--detections", s(&det_path), "--category", "airplane"];
        args.extend_from_slice(extra);
        let v: Value = serde_json::from_str(&ok(&geoagent(&args))).unwrap();
        v["count"].as_i64().unwrap()
    };
    assert_eq!(count(&[]), 3);
    assert_eq!(count(&["--region-polygons", s(&polys)]), 2);
    assert_eq!(count(&["--region-mask", s(&mask_path), "--region-class", "road"]), 2);
    assert_eq!(count(&["--region", "10,5; 30,5; 30,25; 10,25"]), 2);
    assert_eq!(count(&["--region", "0,0; 5,0; 5,5"]), 0);
}

#[test]
fn eval_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let stdout = ok(&geoagent(&[
            "eval",
            "--backend",
            "mock:fixtures/script.yaml",
            "--fixtures",
            "fixtures/manifest.json",
            "--dataset",
            "fixtures/queries.jsonl",
            "--out",
            s(&out),
        ]));
        (stdout, std::fs::read(&out).unwrap())
    };
    let (table_a, a) = run("a.json");
    let (table_b, b) = run("b.json");
    assert_eq!(a, b);
    assert_eq!(table_a, table_b);
    assert!(table_a.lines().last().unwrap().contains("100.0"), "{table_a}");
    let report: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["results"].as_array().unwrap().len(), 21);
}

#[test]
fn failures_exit_nonzero() {
    let unknown = geoagent(&["frobnicate"]);
    assert!(!unknown.status.success());
    let missing = geoagent(&["tool", "canny", "--in", "/no/such.png", "--out", "/tmp/x.png"]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error:"));
    let bad_backend = geoagent(&["eval", "--backend", "llama", "--dataset", "fixtures/queries.jsonl"]);
    assert!(!bad_backend.status.success());
    let no_palette = geoagent(&[
        "tool", "polygonize", "--in", "fixtures/airport.png", "--category", "road", "--out", "/tmp/p.json",
    ]);
    assert!(!no_palette.status.success());
}
