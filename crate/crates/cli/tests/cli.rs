use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use keygrid::data::{save_annotations, synth_family, write_cloud, Annotations, LabeledPoint, SynthFamilyParams};
use keygrid::geometry::normalize_unit_cube;
use serde_json::Value;

const TINY: &str = "\
epochs = 2
batch_size = 2
seed = 3
dataset.points = 64
dataset.split = 1, 0, 0
synth.frames = 4
synth.magnitude = 0.5
model.preset = small
model.keypoints = 4
model.level_widths = 8, 8, 12, 12
model.propagation_widths = 8, 8, 8, 8
model.decoder_widths = 8, 8, 8, 8, 8
model.segment_hidden = 8
model.group_size = 8
model.grid_size = 6
loss.warmup_epochs = 1
";

fn keygrid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_keygrid"))
        .args(args)
        .env_remove("KEYGRID_SEED")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn trained(dir: &Path) -> PathBuf {
    let out = dir.join("run");
    let cfg = dir.join("tiny.cfg");
    fs::write(&cfg, format!("{TINY}output_dir = {}\n", out.display())).unwrap();
    let o = keygrid(&["train", "--config", s(&cfg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out.join("checkpoint.ckpt")
}

fn frame_cloud(dir: &Path, n: usize, name: &str) -> PathBuf {
    let fam = synth_family(&SynthFamilyParams { frames: 2, points: n, magnitude: 0.3, ..Default::default() }).unwrap();
    let path = dir.join(name);
    let pts: Vec<_> = fam[1].cloud.points().iter().map(|p| [p[0] * 3.0 + 1.0, p[1] * 3.0, p[2] - 2.0]).collect();
    write_cloud(&path, &keygrid::geometry::PointCloud::new("x", pts).unwrap()).unwrap();
    path
}

#[test]
fn train_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = trained(a.path());
    trained(b.path());
    assert!(ca.exists());
    let la = fs::read_to_string(a.path().join("run/metrics.jsonl")).unwrap();
    let lb = fs::read_to_string(b.path().join("run/metrics.jsonl")).unwrap();
    assert_eq!(la.lines().count(), 2);
    assert_eq!(la, lb);
}

#[test]
fn unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "foo=1\n").unwrap();
    let o = keygrid(&["train", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("foo"));
}

#[test]
fn unknown_flag_fails_fast() {
    let o = keygrid(&["detect", "--bogus"]);
    assert!(!o.status.success());
    let help = keygrid(&["perturb", "--help"]);
    let text = String::from_utf8_lossy(&help.stdout);
    for flag in ["--checkpoint", "--dataset", "--noise", "--downsample", "--seeds", "--radius", "--out"] {
        assert!(text.contains(flag), "{flag}");
    }
}

#[test]
fn detect_contract() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = trained(dir.path());
    let input = frame_cloud(dir.path(), 64, "shape.xyz");
    let (j1, j2, viz) = (dir.path().join("a.json"), dir.path().join("b.json"), dir.path().join("v.ply"));
    assert!(keygrid(&["detect", "--checkpoint", s(&ckpt), "--input", s(&input), "--out", s(&j1), "--viz", s(&viz)]).status.success());
    assert!(keygrid(&["detect", "--checkpoint", s(&ckpt), "--input", s(&input), "--out", s(&j2)]).status.success());
    assert_eq!(fs::read(&j1).unwrap(), fs::read(&j2).unwrap());
    let v: Value = serde_json::from_slice(&fs::read(&j1).unwrap()).unwrap();
    let kp = v["keypoints"].as_array().unwrap();
    assert_eq!(kp.len(), 4);
    let (_, t) = normalize_unit_cube(&keygrid::data::load_cloud(&input).unwrap()).unwrap();
    for (orig, norm) in kp.iter().zip(v["keypoints_normalized"].as_array().unwrap()) {
        let p: [f64; 3] = serde_json::from_value(orig.clone()).unwrap();
        let q: [f64; 3] = serde_json::from_value(norm.clone()).unwrap();
        let r = t.apply(p);
        for k in 0..3 {
            assert!((r[k] - q[k]).abs() < 1e-5);
        }
    }
    assert_eq!(keygrid::data::read_ply(&viz).unwrap().vertices.len(), 68);

    let wrong = frame_cloud(dir.path(), 50, "small.xyz");
    let o = keygrid(&["detect", "--checkpoint", s(&ckpt), "--input", s(&wrong), "--out", s(&j1)]);
    assert_eq!(o.status.code(), Some(3));
    let o = keygrid(&["detect", "--checkpoint", s(&ckpt), "--input", s(&input), "--out", s(&j1), "--normalized"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn eval_metrics_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = trained(dir.path());
    let data = dir.path().join("shapes");
    fs::create_dir(&data).unwrap();
    let one = frame_cloud(&data, 64, "one.xyz");
    let pred = dir.path().join("pred.json");
    assert!(keygrid(&["detect", "--checkpoint", s(&ckpt), "--input", s(&one), "--out", s(&pred)]).status.success());

    let o = keygrid(&["eval", "--checkpoint", s(&ckpt), "--dataset", s(&data), "--metric", "miou"]);
    assert_eq!(o.status.code(), Some(4));
    let o = keygrid(&["eval", "--checkpoint", s(&ckpt), "--dataset", s(&data), "--metric", "das"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("need at least 2 frames"));

    let v: Value = serde_json::from_slice(&fs::read(&pred).unwrap()).unwrap();
    let labels = v["keypoints"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, p)| LabeledPoint { label: i as u32, xyz: serde_json::from_value(p.clone()).unwrap() })
        .collect();
    let mut ann = Annotations::new();
    ann.insert("one".into(), labels);
    save_annotations(&data.join("annotations.json"), &ann).unwrap();
    let report = dir.path().join("miou.json");
    let o = keygrid(&["eval", "--checkpoint", s(&ckpt), "--dataset", s(&data), "--metric", "miou", "--out", s(&report)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert!((r["score"].as_f64().unwrap() - 100.0).abs() < 1e-9);

    let das = dir.path().join("das.json");
    let o = keygrid(&["eval", "--checkpoint", s(&ckpt), "--metric", "das", "--out", s(&das)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&fs::read(&das).unwrap()).unwrap();
    let score = r["report"]["score"].as_f64().unwrap();
    assert!((0.0..=100.0).contains(&score));
    assert_eq!(r["report"]["pairs"].as_array().unwrap().len(), 6);
}

#[test]
fn perturb_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = trained(dir.path());
    let out = dir.path().join("robust.json");
    let o = keygrid(&[
        "perturb", "--checkpoint", s(&ckpt), "--noise", "0,0.03,0.06", "--downsample", "1,8,16", "--seeds", "2", "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    let kinds: Vec<(String, f64)> = rows
        .iter()
        .map(|row| (row["perturbation"]["kind"].as_str().unwrap().to_string(), row["perturbation"]["value"].as_f64().unwrap()))
        .collect();
    assert_eq!(kinds[0], ("noise".into(), 0.0));
    assert_eq!(kinds[5], ("downsample".into(), 16.0));
    assert_eq!(rows[0]["das"], r["clean_das"]);
    let o = keygrid(&["perturb", "--checkpoint", s(&ckpt), "--noise", "0,-0.1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}
