//! The `.lgw` container: magic `LGW1`, a little-endian `u32` header length,
//! a UTF-8 JSON header, then packed little-endian `f32` tensors.
//!
//! Header fields: `kind` (`"weights"` or `"fixture"`), `spec` (generator
//! architecture), optional `meta`/`source`, and `tensors`, a table of
//! `{name, shape, offset, dtype}` with byte offsets relative to the start of
//! the data section. Tensors are row-major.
//!
//! Weight tensors: `dense.weight [input_width, channels·samples]` (the
//! projection output is read time-major), `dense.bias`, and for each conv
//! layer `k` (1-based) `conv{k}.weight [in, out, kernel]` and `conv{k}.bias`.
//!
//! Fixture tensors: `latent [input_width]` (code entries first),
//! `dense.pre`/`dense.post [channels, samples]`, `conv{k}.pre`/`conv{k}.post`
//! and `waveform [samples]`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::atomic_write;
use crate::error::{Error, LgwError, Result};
use crate::generator::{
    forward, ConvWeights, ForwardTrace, GeneratorSpec, LatentVector, LayerTrace, WeightBundle, WeightMeta,
};
use crate::tensor::{Kernel, Tensor};

pub const MAGIC: &[u8; 4] = b"LGW1";
/// Largest per-layer relative error accepted by [`compare_fixture`].
pub const FIXTURE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub dtype: String,
}

impl TensorEntry {
    fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

/// A parsed container: header fields other than the tensor table, and the
/// decoded tensors in table order.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub header: Map<String, Value>,
    pub tensors: Vec<(TensorEntry, Vec<f32>)>,
}

impl Container {
    pub fn kind(&self) -> Option<&str> {
        self.header.get("kind").and_then(Value::as_str)
    }

    /// Tensor `name` as `f64`, checked against `shape`.
    pub fn tensor(&self, name: &str, shape: &[usize]) -> Result<Vec<f64>> {
        let (entry, data) = self
            .tensors
            .iter()
            .find(|(e, _)| e.name == name)
            .ok_or_else(|| LgwError::MissingTensor(name.to_string()))?;
        if entry.shape != shape {
            return Err(LgwError::ShapeMismatch {
                name: name.to_string(),
                expected: shape.to_vec(),
                found: entry.shape.clone(),
            }
            .into());
        }
        Ok(data.iter().map(|&v| v as f64).collect())
    }

    fn spec(&self) -> Result<GeneratorSpec> {
        let value = self
            .header
            .get("spec")
            .ok_or_else(|| LgwError::Header("missing `spec`".into()))?;
        let spec: GeneratorSpec =
            serde_json::from_value(value.clone()).map_err(|e| LgwError::Header(format!("spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Serialize a container. Tensors are packed in the given order.
pub fn write_container(header: Map<String, Value>, tensors: &[(String, Vec<usize>, &[f64])]) -> Result<Vec<u8>> {
    let mut table = Vec::with_capacity(tensors.len());
    let mut data = Vec::new();
    for (name, shape, values) in tensors {
        if shape.iter().product::<usize>() != values.len() {
            return Err(Error::Dimension(format!(
                "tensor `{name}` has {} values for shape {shape:?}",
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !(*v as f32).is_finite()) {
            return Err(LgwError::NonFinite {
                name: name.clone(),
                index,
            }
            .into());
        }
        table.push(TensorEntry {
            name: name.clone(),
            shape: shape.clone(),
            offset: data.len() as u64,
            dtype: "f32".into(),
        });
        for &v in values.iter() {
            data.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let mut header = header;
    header.insert("tensors".into(), serde_json::to_value(&table)?);
    let header_bytes = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(8 + header_bytes.len() + data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    out.extend_from_slice(&data);
    Ok(out)
}

pub fn read_container(bytes: &[u8]) -> std::result::Result<Container, LgwError> {
    if bytes.len() < 8 {
        let mut found = [0u8; 4];
        let n = bytes.len().min(4);
        found[..n].copy_from_slice(&bytes[..n]);
        if n < 4 || &found != MAGIC {
            return Err(if n == 4 {
                LgwError::BadMagic(found)
            } else {
                LgwError::Truncated(format!("{} bytes, need at least 8", bytes.len()))
            });
        }
        return Err(LgwError::Truncated("missing header length".into()));
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if &magic != MAGIC {
        return Err(LgwError::BadMagic(magic));
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let data_start = 8usize
        .checked_add(header_len)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| {
            LgwError::Truncated(format!(
                "header claims {header_len} bytes, only {} remain",
                bytes.len() - 8
            ))
        })?;
    let mut header: Map<String, Value> =
        serde_json::from_slice(&bytes[8..data_start]).map_err(|e| LgwError::Header(e.to_string()))?;
    let table = header
        .remove("tensors")
        .ok_or_else(|| LgwError::Header("missing `tensors` table".into()))?;
    let table: Vec<TensorEntry> =
        serde_json::from_value(table).map_err(|e| LgwError::Header(format!("tensor table: {e}")))?;
    let data = &bytes[data_start..];

    let mut tensors = Vec::with_capacity(table.len());
    for entry in table {
        if entry.dtype != "f32" {
            return Err(LgwError::Dtype(entry.dtype));
        }
        let start = usize::try_from(entry.offset).unwrap_or(usize::MAX);
        let end = entry
            .len()
            .checked_mul(4)
            .and_then(|n| start.checked_add(n))
            .filter(|&end| end <= data.len())
            .ok_or_else(|| LgwError::Truncated(format!("tensor `{}` runs past end of file", entry.name)))?;
        let values: Vec<f32> = data[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(LgwError::NonFinite {
                name: entry.name,
                index,
            });
        }
        tensors.push((entry, values));
    }
    Ok(Container { header, tensors })
}

fn read_file(path: &Path) -> Result<Container> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(read_container(&bytes)?)
}

pub fn save_weights(path: &Path, spec: &GeneratorSpec, weights: &WeightBundle) -> Result<()> {
    spec.validate()?;
    weights.check(spec)?;
    let mut meta = weights.meta.clone();
    meta.spec_hash = spec.hash();
    let mut header = Map::new();
    header.insert("kind".into(), json!("weights"));
    header.insert("spec".into(), serde_json::to_value(spec)?);
    header.insert("meta".into(), serde_json::to_value(&meta)?);

    let mut tensors: Vec<(String, Vec<usize>, &[f64])> = vec![
        (
            "dense.weight".into(),
            vec![spec.input_width(), spec.dense_out.len()],
            &weights.dense_weight,
        ),
        ("dense.bias".into(), vec![spec.dense_out.len()], &weights.dense_bias),
    ];
    for (k, (cw, l)) in weights.layers.iter().zip(&spec.layers).enumerate() {
        tensors.push((
            format!("conv{}.weight", k + 1),
            vec![l.in_channels, l.out_channels, l.kernel],
            cw.kernel.data(),
        ));
        tensors.push((format!("conv{}.bias", k + 1), vec![l.out_channels], &cw.bias));
    }
    atomic_write(path, &write_container(header, &tensors)?)
}

pub fn load_weights(path: &Path) -> Result<(GeneratorSpec, WeightBundle)> {
    let c = read_file(path)?;
    let spec = c.spec()?;
    let meta: WeightMeta = match c.header.get("meta") {
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| LgwError::Header(format!("meta: {e}")))?,
        None => WeightMeta::default(),
    };
    let n = spec.dense_out.len();
    let dense_weight = c.tensor("dense.weight", &[spec.input_width(), n])?;
    let dense_bias = c.tensor("dense.bias", &[n])?;
    let layers = spec
        .layers
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let data = c.tensor(
                &format!("conv{}.weight", k + 1),
                &[l.in_channels, l.out_channels, l.kernel],
            )?;
            Ok(ConvWeights {
                kernel: Kernel::new(l.in_channels, l.out_channels, l.kernel, data)?,
                bias: c.tensor(&format!("conv{}.bias", k + 1), &[l.out_channels])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let bundle = WeightBundle {
        dense_weight,
        dense_bias,
        layers,
        meta,
    };
    bundle.check(&spec)?;
    Ok((spec, bundle))
}

/// Reference activations for one latent, used to cross-check the forward
/// pass against another implementation.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub spec: GeneratorSpec,
    pub latent: LatentVector,
    pub trace: ForwardTrace,
    /// Framework and checkpoint that produced the fixture.
    pub source: String,
}

impl Fixture {
    /// Fixture recorded from this crate's own forward pass.
    pub fn record(spec: &GeneratorSpec, weights: &WeightBundle, latent: &LatentVector, source: &str) -> Result<Self> {
        Ok(Self {
            spec: spec.clone(),
            latent: latent.clone(),
            trace: forward(spec, weights, latent)?,
            source: source.to_string(),
        })
    }
}

fn layer_tensors<'a>(prefix: &str, lt: &'a LayerTrace, out: &mut Vec<(String, Vec<usize>, &'a [f64])>) {
    let (c, l) = lt.pre.shape();
    out.push((format!("{prefix}.pre"), vec![c, l], lt.pre.data()));
    out.push((format!("{prefix}.post"), vec![c, l], lt.post.data()));
}

pub fn save_fixture(path: &Path, fixture: &Fixture) -> Result<()> {
    let mut header = Map::new();
    header.insert("kind".into(), json!("fixture"));
    header.insert("spec".into(), serde_json::to_value(&fixture.spec)?);
    header.insert("source".into(), json!(fixture.source));
    let latent = fixture.latent.to_input();
    let mut tensors: Vec<(String, Vec<usize>, &[f64])> = vec![("latent".into(), vec![latent.len()], &latent)];
    layer_tensors("dense", &fixture.trace.dense, &mut tensors);
    for (k, lt) in fixture.trace.layers.iter().enumerate() {
        layer_tensors(&format!("conv{}", k + 1), lt, &mut tensors);
    }
    tensors.push((
        "waveform".into(),
        vec![fixture.trace.waveform.len()],
        &fixture.trace.waveform,
    ));
    atomic_write(path, &write_container(header, &tensors)?)
}

pub fn load_fixture(path: &Path) -> Result<Fixture> {
    let c = read_file(path)?;
    if c.kind() != Some("fixture") {
        return Err(LgwError::Header(format!("expected kind \"fixture\", found {:?}", c.kind())).into());
    }
    let spec = c.spec()?;
    let source = c.header.get("source").and_then(Value::as_str).unwrap_or("").to_string();
    let input = c.tensor("latent", &[spec.input_width()])?;
    let latent = LatentVector {
        code: input[..spec.code_dim].to_vec(),
        z: input[spec.code_dim..].to_vec(),
    };
    let read_layer = |prefix: &str, (ch, len): (usize, usize)| -> Result<LayerTrace> {
        Ok(LayerTrace {
            pre: Tensor::new(ch, len, c.tensor(&format!("{prefix}.pre"), &[ch, len])?)?,
            post: Tensor::new(ch, len, c.tensor(&format!("{prefix}.post"), &[ch, len])?)?,
        })
    };
    let dense = read_layer("dense", (spec.dense_out.channels, spec.dense_out.samples))?;
    let layers = spec
        .layer_shapes()
        .into_iter()
        .enumerate()
        .map(|(k, shape)| read_layer(&format!("conv{}", k + 1), shape))
        .collect::<Result<Vec<_>>>()?;
    let waveform = c.tensor("waveform", &[spec.output_len()])?;
    Ok(Fixture {
        spec,
        latent,
        trace: ForwardTrace {
            dense,
            layers,
            waveform,
        },
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerError {
    pub name: String,
    /// `max |ours − reference| / max |reference|` (absolute error when the
    /// reference is all zero).
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureReport {
    pub layers: Vec<LayerError>,
    pub max_rel_error: f64,
    pub passed: bool,
}

fn rel_error(ours: &[f64], reference: &[f64]) -> f64 {
    let diff = ours
        .iter()
        .zip(reference)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Run the forward pass on the fixture latent and measure the relative error
/// of every recorded stage.
pub fn compare_fixture(spec: &GeneratorSpec, weights: &WeightBundle, fixture: &Fixture) -> Result<FixtureReport> {
    if spec != &fixture.spec {
        return Err(Error::Validation("fixture was recorded for a different generator spec".into()));
    }
    let ours = forward(spec, weights, &fixture.latent)?;
    let mut layers = Vec::new();
    let mut push = |name: String, a: &Tensor, b: &Tensor| {
        layers.push(LayerError {
            name,
            rel_error: rel_error(a.data(), b.data()),
        })
    };
    push("dense.pre".into(), &ours.dense.pre, &fixture.trace.dense.pre);
    push("dense.post".into(), &ours.dense.post, &fixture.trace.dense.post);
    for (k, (a, b)) in ours.layers.iter().zip(&fixture.trace.layers).enumerate() {
        push(format!("conv{}.pre", k + 1), &a.pre, &b.pre);
        push(format!("conv{}.post", k + 1), &a.post, &b.post);
    }
    layers.push(LayerError {
        name: "waveform".into(),
        rel_error: rel_error(&ours.waveform, &fixture.trace.waveform),
    });
    let max_rel_error = layers.iter().fold(0.0f64, |m, l| m.max(l.rel_error));
    Ok(FixtureReport {
        layers,
        max_rel_error,
        passed: max_rel_error <= FIXTURE_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::sample_latent;
    use crate::tensor::Rng;

    fn small() -> GeneratorSpec {
        GeneratorSpec::halving(5, 2, 8, 4, 3, 4)
    }

    #[test]
    fn weights_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.lgw");
        let spec = small();
        let w = WeightBundle::random(&spec, 3, 0.3);
        save_weights(&p, &spec, &w).unwrap();
        let (spec2, w2) = load_weights(&p).unwrap();
        assert_eq!(spec2, spec);
        assert_eq!(w2.dense_weight, w.dense_weight);
        assert_eq!(w2.layers, w.layers);
        assert_eq!(w2.meta.spec_hash, spec.hash());
    }

    #[test]
    fn layout_is_byte_exact() {
        let mut header = Map::new();
        header.insert("kind".into(), json!("weights"));
        let bytes = write_container(header, &[("a".into(), vec![2], &[1.0, -2.0])]).unwrap();
        assert_eq!(&bytes[..4], b"LGW1");
        let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let header: Value = serde_json::from_slice(&bytes[8..8 + hlen]).unwrap();
        assert_eq!(header["tensors"][0]["offset"], 0);
        assert_eq!(header["tensors"][0]["dtype"], "f32");
        assert_eq!(&bytes[8 + hlen..], &[0, 0, 0x80, 0x3f, 0, 0, 0, 0xc0]);
    }

    #[test]
    fn corrupt_inputs_have_codes() {
        let spec = small();
        let w = WeightBundle::random(&spec, 3, 0.3);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.lgw");
        save_weights(&p, &spec, &w).unwrap();
        let good = fs::read(&p).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert_eq!(read_container(&bad).unwrap_err().code(), 10);
        assert_eq!(read_container(&good[..good.len() - 3]).unwrap_err().code(), 11);
        let mut bad = good.clone();
        bad[9] = b'!';
        assert_eq!(read_container(&bad).unwrap_err().code(), 12);
        let last = good.len() - 4;
        let mut bad = good.clone();
        bad[last..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(read_container(&bad).unwrap_err().code(), 15);
    }

    #[test]
    fn missing_tensor_and_shape_mismatch() {
        let spec = small();
        let mut header = Map::new();
        header.insert("spec".into(), serde_json::to_value(&spec).unwrap());
        let c = read_container(&write_container(header, &[("dense.bias".into(), vec![3], &[0.0; 3])]).unwrap()).unwrap();
        match c.tensor("dense.weight", &[7, 32]).unwrap_err() {
            Error::Load(e) => assert_eq!(e.code(), 13),
            e => panic!("{e}"),
        }
        match c.tensor("dense.bias", &[32]).unwrap_err() {
            Error::Load(e) => assert_eq!(e.code(), 14),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn fixture_round_trip_and_compare() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.lgwfix");
        let spec = small();
        let w = WeightBundle::random(&spec, 5, 0.4);
        let mut rng = Rng::new(1);
        let mut latent = sample_latent(&mut rng, &spec, &Default::default(), Some(&[1.0, 0.0])).unwrap();
        // the container stores f32
        latent.z.iter_mut().for_each(|v| *v = *v as f32 as f64);
        let fx = Fixture::record(&spec, &w, &latent, "self").unwrap();
        save_fixture(&p, &fx).unwrap();
        let back = load_fixture(&p).unwrap();
        assert_eq!(back.latent, latent);
        let report = compare_fixture(&spec, &w, &back).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.layers.len(), 2 + 2 * 3 + 1);

        let mut other = w.clone();
        other.dense_bias[0] += 1.0;
        assert!(!compare_fixture(&spec, &other, &back).unwrap().passed);
    }
}
