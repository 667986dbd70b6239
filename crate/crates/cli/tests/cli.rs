use std::path::Path;
use std::process::{Command, Output};

use risas::synth::presets;
use risas::{CameraIntrinsics, Pose};

/// Runs the binary in `dir` with whitespace-separated `args`.
fn risas(dir: &Path, args: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_risas"))
        .current_dir(dir)
        .args(args.split_whitespace())
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn ok(dir: &Path, args: &str) -> String {
    let out = risas(dir, args);
    assert_eq!(
        code(&out),
        0,
        "{args}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read_json(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Renders a small rolled pair into `dir`.
fn synth_pair(dir: &Path) {
    let spec = presets::wedge(CameraIntrinsics::centered(262.5, 320, 240).unwrap());
    std::fs::write(dir.join("scene.json"), serde_json::to_string_pretty(&spec).unwrap()).unwrap();
    let rel = Pose::rot_z(20f64.to_radians());
    std::fs::write(dir.join("rel.json"), serde_json::to_string(&rel).unwrap()).unwrap();
    ok(
        dir,
        "synth --spec scene.json --out-color a.png --out-depth a_d.png --relative rel.json \
         --out-color-b b.png --out-depth-b b_d.png --out-pose pose.json --out-intrinsics k.json",
    );
}

#[test]
fn full_workflow() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_pair(dir);

    let out = ok(
        dir,
        "detect --color a.png --depth a_d.png --intrinsics k.json --out kp.json",
    );
    assert!(out.contains("keypoints"));
    let kps = read_json(dir.join("kp.json"));
    for key in ["u", "v", "response", "depth"] {
        assert!(kps[0].get(key).is_some(), "{key}");
    }

    ok(
        dir,
        "describe --color a.png --depth a_d.png --intrinsics k.json --out a.risd",
    );
    ok(
        dir,
        "describe --color b.png --depth b_d.png --intrinsics k.json --out b.risd",
    );
    let bytes = std::fs::read(dir.join("a.risd")).unwrap();
    assert_eq!(&bytes[..4], b"RISD");
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 192);

    ok(
        dir,
        "describe --color b.png --depth b_d.png --intrinsics k.json --keypoints kp.json --out b_kp.risd",
    );

    ok(dir, "match --a a.risd --b b.risd --out m.csv");
    let csv = std::fs::read_to_string(dir.join("m.csv")).unwrap();
    assert!(csv.starts_with("index_a,index_b,distance,ratio,correct\n"));
    assert!(csv.lines().count() > 1);

    ok(
        dir,
        "evaluate --a a.risd --b b.risd --intrinsics k.json --pose pose.json --out pr.csv --out-svg pr.svg",
    );
    let pr = std::fs::read_to_string(dir.join("pr.csv")).unwrap();
    assert!(pr.starts_with("ratio,precision,recall\n"));
    assert_eq!(pr.lines().count(), 21);
    assert!(std::fs::read_to_string(dir.join("pr.svg")).unwrap().contains("<svg"));
}

#[test]
fn pipeline_report_and_intermediates() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_pair(dir);
    std::fs::write(dir.join("cfg.json"), r#"{"eval": {"ratio_max": 0.7}}"#).unwrap();
    ok(
        dir,
        "pipeline --color-a a.png --depth-a a_d.png --color-b b.png --depth-b b_d.png --intrinsics k.json \
         --pose pose.json --out report.json --config cfg.json --dump-intermediates dump",
    );
    let report = read_json(dir.join("report.json"));
    for key in [
        "frame_a",
        "frame_b",
        "matched",
        "correct",
        "inlier_percentage",
        "pr_curve",
        "errors",
    ] {
        assert!(report.get(key).is_some(), "{key}");
    }
    assert!(report["frame_a"]["keypoints"].as_u64().unwrap() > 0);
    assert!(report["matched"].as_u64().unwrap() > 0);
    assert!(report["inlier_percentage"].as_f64().unwrap() > 0.8);
    for f in [
        "a/dot_product.png",
        "a/labels_alpha.png",
        "a/keypoints.json",
        "b/rejected.json",
    ] {
        assert!(dir.join("dump").join(f).exists(), "{f}");
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    // Missing input file.
    let out = risas(
        dir,
        "detect --color nope.png --depth nope.png --intrinsics k.json --out x.json",
    );
    assert_eq!(code(&out), 2);

    // Unparsable arguments.
    assert_eq!(code(&risas(dir, "detect")), 2);

    // Invalid configuration.
    std::fs::write(dir.join("bad.json"), r#"{"detector": {"tau": 3.0}}"#).unwrap();
    assert_eq!(code(&risas(dir, "match --a a --b b --out m.csv --config bad.json")), 2);

    // A scene that puts nothing in view is a pipeline failure, not bad input.
    let spec = r#"{"primitives": [{"shape": {"sphere": {"center": [50.0, 0.0, 1.0], "radius": 0.1}}}],
                   "intrinsics": {"fx": 100, "fy": 100, "cx": 31.5, "cy": 23.5, "width": 64, "height": 48}}"#;
    std::fs::write(dir.join("empty.json"), spec).unwrap();
    let out = risas(dir, "synth --spec empty.json --out-color c.png --out-depth d.png");
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}
