//! Model files: one JSON header line followed by the weights as little-endian
//! `f64` values, row-major, layer after layer.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Hyperparams, ModelKind, TrainedModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: ModelKind,
    shapes: Vec<(usize, usize)>,
    hyperparams: Hyperparams,
    train_accuracy: Option<f64>,
    val_accuracy: Option<f64>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn write_model<T: Scalar, W: Write>(m: &TrainedModel<T>, mut w: W) -> Result<()> {
    let header = Header {
        kind: m.kind,
        shapes: m.weights.iter().map(|w| w.dim()).collect(),
        hyperparams: m.hyperparams.clone(),
        train_accuracy: finite(m.train_accuracy),
        val_accuracy: finite(m.val_accuracy),
    };
    let io = |e| Error::Model(format!("write failed: {e}"));
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n").map_err(io)?;
    let mut blob = Vec::with_capacity(m.weights.iter().map(|w| w.len() * 8).sum());
    for layer in &m.weights {
        for &x in layer.iter() {
            blob.extend_from_slice(&x.as_f64().to_le_bytes());
        }
    }
    w.write_all(&blob).map_err(io)?;
    w.flush().map_err(io)
}

pub fn read_model<T: Scalar, R: Read>(r: R) -> Result<TrainedModel<T>> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)
        .map_err(|e| Error::Model(format!("cannot read header: {e}")))?;
    let header: Header = serde_json::from_str(line.trim_end())
        .map_err(|e| Error::Model(format!("bad header: {e}")))?;
    let mut blob = Vec::new();
    r.read_to_end(&mut blob)
        .map_err(|e| Error::Model(format!("cannot read weights: {e}")))?;
    let expected: usize = header.shapes.iter().map(|(a, b)| a * b * 8).sum();
    if blob.len() != expected {
        return Err(Error::Model(format!(
            "weight blob has {} bytes, header implies {expected}",
            blob.len()
        )));
    }
    let mut values = blob
        .chunks_exact(8)
        .map(|c| T::of(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))));
    let weights = header
        .shapes
        .iter()
        .map(|&(rows, cols)| {
            Array2::from_shape_simple_fn((rows, cols), || values.next().expect("sized blob"))
        })
        .collect();
    let mut m = TrainedModel::from_weights(header.kind, weights, header.hyperparams)?;
    m.train_accuracy = header.train_accuracy.unwrap_or(f64::NAN);
    m.val_accuracy = header.val_accuracy.unwrap_or(f64::NAN);
    Ok(m)
}

pub fn save_model<T: Scalar>(m: &TrainedModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_model(m, std::io::BufWriter::new(file))
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<TrainedModel<T>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn round_trip_is_exact() {
        let mut m = TrainedModel::from_weights(
            ModelKind::Gcn,
            vec![
                array![[0.1, -2.5e-17], [3.0, 1.0 / 3.0]],
                array![[1.0], [f64::MIN_POSITIVE]],
            ],
            Hyperparams::gcn_default().with_seed(5),
        )
        .unwrap();
        m.val_accuracy = 0.8125;
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        let back: TrainedModel<f64> = read_model(buf.as_slice()).unwrap();
        assert_eq!(back.weights, m.weights);
        assert_eq!(back.hyperparams, m.hyperparams);
        assert_eq!(back.val_accuracy, 0.8125);
        assert!(back.train_accuracy.is_nan());
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let m = TrainedModel::from_weights(
            ModelKind::Sgc,
            vec![array![[1.0, 2.0]]],
            Hyperparams::sgc_default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        buf.pop();
        assert!(read_model::<f64, _>(buf.as_slice()).is_err());
    }
}
