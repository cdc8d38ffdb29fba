use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use layerscope::generator::{GeneratorSpec, WeightBundle};
use layerscope::io::{self, RunManifest};
use layerscope::tensor::Rng;

fn layerscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_layerscope"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tiny_weights(dir: &Path) -> PathBuf {
    let spec = GeneratorSpec::halving(100, 0, 16, 16, 5, 4);
    let p = dir.join("w.lgw");
    io::save_weights(&p, &spec, &WeightBundle::random(&spec, 1, 0.2)).unwrap();
    p
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn probe_writes_manifest_csv_and_wavs() {
    let dir = tempfile::tempdir().unwrap();
    let w = tiny_weights(dir.path());
    let out = dir.path().join("run");
    let o = layerscope(&["probe", "--weights", &s(&w), "--seed", "7", "--out", &s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = RunManifest::read(&out.join("manifest.json")).unwrap();
    assert_eq!(m.seed, Some(7));
    assert_eq!(m.weights_sha256, Some(io::sha256_file(&w).unwrap()));
    let names: Vec<&str> = m.artifacts.iter().map(|a| a.path.as_str()).collect();
    for want in ["probes.csv", "conv1.wav", "conv4.wav", "output.wav", "overlay.svg"] {
        assert!(names.contains(&want), "{names:?}");
    }
    assert!(m.verify(&out).is_empty());
    let probes = io::read_probe_csv(&out.join("probes.csv")).unwrap();
    let lens: Vec<usize> = probes.iter().map(|p| p.1.len()).collect();
    assert_eq!(lens, vec![64, 256, 1024, 4096, 16384]);
    let (wave, rate) = io::read_wav(&out.join("conv2.wav")).unwrap();
    assert_eq!((wave.len(), rate), (16384, 16000));
}

#[test]
fn sweep_has_eleven_steps() {
    let dir = tempfile::tempdir().unwrap();
    let w = tiny_weights(dir.path());
    let out = dir.path().join("sweep");
    let o = layerscope(&[
        "sweep", "--weights", &s(&w), "--target", "z11", "--from", "-15", "--to", "5", "--step", "2", "--out", &s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("sweep.json")).unwrap()).unwrap();
    let values: Vec<f64> = serde_json::from_value(summary["values"].clone()).unwrap();
    assert_eq!(values, vec![-15.0, -13.0, -11.0, -9.0, -7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0]);
    assert!(out.join("step_10").join("output.wav").exists());
}

#[test]
fn usage_and_validation_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = layerscope(&["probe", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));

    let w = tiny_weights(dir.path());
    let o = layerscope(&[
        "sweep", "--weights", &s(&w), "--target", "q3", "--from", "0", "--to", "1", "--out", &s(&dir.path().join("x")),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.lgw");
    std::fs::write(&bad, b"NOPE0000").unwrap();
    let o = layerscope(&["probe", "--weights", &s(&bad), "--out", &s(&dir.path().join("y"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad magic"));
}

#[test]
fn missing_input_is_internal_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = layerscope(&[
        "probe", "--weights", &s(&dir.path().join("absent.lgw")), "--out", &s(&dir.path().join("r")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    assert_eq!(layerscope(&["--help"]).status.code(), Some(0));
}

#[test]
fn acoustics_rank_cluster_and_plot_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let tone: Vec<f64> = (0..16000).map(|i| 0.5 * (2.0 * std::f64::consts::PI * 120.0 * i as f64 / 16000.0).sin()).collect();
    let wav = d.join("tone.wav");
    io::write_wav(&wav, &tone, 16000, io::WavEncoding::Float32).unwrap();
    for m in ["f0", "intensity", "formants"] {
        let out = d.join(m);
        let o = layerscope(&["acoustics", m, "--input", &s(&wav), "--out", &s(&out)]);
        assert!(o.status.success(), "{m}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let (_, f0) = io::read_track_csv(&d.join("f0").join("f0.csv")).unwrap();
    let voiced: Vec<f64> = f0.into_iter().flatten().collect();
    assert!(!voiced.is_empty() && voiced.iter().all(|f| (f - 120.0).abs() < 2.4));

    let mut rng = Rng::new(3);
    let z: Vec<Vec<f64>> = (0..200).map(|_| (0..10).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
    let presence: Vec<f64> = z.iter().map(|r| if r[6] < 0.0 { 1.0 } else { 0.0 }).collect();
    io::write_matrix(&d.join("z.csv"), &z).unwrap();
    io::write_series_csv(&d.join("p.csv"), "presence", &presence).unwrap();
    let o = layerscope(&[
        "rank-latents", "--latents", &s(&d.join("z.csv")), "--presence", &s(&d.join("p.csv")), "--permutations", "5",
        "--out", &s(&d.join("rank")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("rank").join("ranking.json")).unwrap()).unwrap();
    assert_eq!(summary["top"], 6);

    let rows: Vec<Vec<f64>> = (0..8)
        .map(|i| (0..50).map(|t| if i < 4 { (t == 3) as u8 as f64 } else { (t == 30) as u8 as f64 }).collect())
        .collect();
    io::write_matrix(&d.join("profiles.csv"), &rows).unwrap();
    let o = layerscope(&[
        "cluster", "--input", &s(&d.join("profiles.csv")), "--gamma", "0.5", "--out", &s(&d.join("cl")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(d.join("cl").join("assignments.csv")).unwrap();
    assert!(text.starts_with("map_index,cluster\n"));
    assert_eq!(text.lines().count(), 9);

    let w = tiny_weights(d);
    let run = d.join("probe");
    assert!(layerscope(&["probe", "--weights", &s(&w), "--out", &s(&run)]).status.success());
    let o = layerscope(&[
        "plot", "--input", &s(&run.join("probes.csv")), "--layers", "3,4", "--wav", &s(&run.join("output.wav")),
        "--out", &s(&d.join("plot")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = std::fs::read_to_string(d.join("plot").join("plot.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);
    let o = layerscope(&[
        "export-wav", "--input", &s(&run.join("probes.csv")), "--layer", "2", "--encoding", "pcm16",
        "--out", &s(&d.join("exp")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("exp").join("conv2.wav").exists());
}

#[test]
fn fixture_record_and_check() {
    let dir = tempfile::tempdir().unwrap();
    let w = tiny_weights(dir.path());
    let rec = dir.path().join("rec");
    assert!(layerscope(&["record-fixture", "--weights", &s(&w), "--seed", "4", "--out", &s(&rec)]).status.success());
    let o = layerscope(&[
        "check-fixture", "--weights", &s(&w), "--fixture", &s(&rec.join("fixture.lgwfix")),
        "--out", &s(&dir.path().join("chk")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let other = dir.path().join("other.lgw");
    let spec = GeneratorSpec::halving(100, 0, 16, 16, 5, 4);
    io::save_weights(&other, &spec, &WeightBundle::random(&spec, 2, 0.2)).unwrap();
    let o = layerscope(&[
        "check-fixture", "--weights", &s(&other), "--fixture", &s(&rec.join("fixture.lgwfix")),
        "--out", &s(&dir.path().join("chk2")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
