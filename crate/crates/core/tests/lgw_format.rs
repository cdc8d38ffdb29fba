//! `.lgw` files assembled byte by byte, the way an external exporter would
//! write them.

use layerscope::generator::{forward, LatentVector};
use layerscope::io::{load_weights, read_container};
use layerscope::{Error, LgwError};

const SPEC: &str = r#"{"latent_dim":2,"code_dim":0,"dense_out":{"channels":1,"samples":2},
"layers":[{"in_channels":1,"out_channels":1,"kernel":3,"stride":2,"activation":"tanh"}]}"#;

fn assemble(spec: &str, tensors: &[(&str, &[usize], &[f32])]) -> Vec<u8> {
    let mut table = Vec::new();
    let mut data = Vec::new();
    for (name, shape, values) in tensors {
        table.push(format!(
            r#"{{"name":"{name}","shape":{shape:?},"offset":{},"dtype":"f32"}}"#,
            data.len()
        ));
        for v in values.iter() {
            data.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = format!(r#"{{"spec":{spec},"tensors":[{}]}}"#, table.join(","));
    let mut out = b"LGW1".to_vec();
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&data);
    out
}

fn tensors() -> Vec<(&'static str, &'static [usize], &'static [f32])> {
    vec![
        ("dense.weight", &[2, 2], &[1.0, 0.0, 0.0, 1.0]),
        ("dense.bias", &[2], &[0.0, 0.0]),
        ("conv1.weight", &[1, 1, 3], &[1.0, 0.0, 0.0]),
        ("conv1.bias", &[1], &[0.0]),
    ]
}

#[test]
fn hand_built_file_loads_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("hand.lgw");
    std::fs::write(&p, assemble(SPEC, &tensors())).unwrap();
    let (spec, w) = load_weights(&p).unwrap();
    assert_eq!(spec.layer_shapes(), vec![(1, 4)]);
    let latent = LatentVector {
        code: vec![],
        z: vec![0.5, 0.25],
    };
    let trace = forward(&spec, &w, &latent).unwrap();
    // identity dense, ReLU, then a delta tap at the crop offset zero-stuffs by 2
    let want = [0.5f64.tanh(), 0.0, 0.25f64.tanh(), 0.0];
    for (a, b) in trace.waveform.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn wrong_shape_and_missing_tensor_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.lgw");
    let mut t = tensors();
    t[0] = ("dense.weight", &[4], &[1.0, 0.0, 0.0, 1.0]);
    std::fs::write(&p, assemble(SPEC, &t)).unwrap();
    match load_weights(&p) {
        Err(Error::Load(e @ LgwError::ShapeMismatch { .. })) => assert_eq!(e.code(), 14),
        other => panic!("{other:?}"),
    }
    std::fs::write(&p, assemble(SPEC, &tensors()[..3])).unwrap();
    match load_weights(&p) {
        Err(Error::Load(LgwError::MissingTensor(name))) => assert_eq!(name, "conv1.bias"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_dtype_is_rejected() {
    let mut bytes = assemble(SPEC, &tensors());
    let at = bytes.windows(5).position(|w| w == b"\"f32\"").unwrap();
    bytes[at + 2..at + 4].copy_from_slice(b"16");
    let err = read_container(&bytes).unwrap_err();
    assert_eq!(err.code(), 16);
}
