//! Versioned weight container.
//!
//! Layout: the magic `SPNW`, a little-endian `u32` header length, a JSON
//! header, then every layer as a row-major array of little-endian `f64`
//! values in header order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::nn::params::ParamSet;
use crate::nn::tensor::Tensor;
use crate::nn::NnError;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"SPNW";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerShape {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightHeader {
    pub format_version: u32,
    pub model_kind: String,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "H")]
    pub h: usize,
    /// Model-specific construction settings.
    #[serde(default)]
    pub config: serde_json::Value,
    pub layers: Vec<LayerShape>,
}

pub fn write_weights<T: Scalar, W: Write>(
    mut out: W,
    model_kind: &str,
    k: usize,
    h: usize,
    config: serde_json::Value,
    params: &ParamSet<T>,
) -> Result<(), NnError> {
    let header = WeightHeader {
        format_version: FORMAT_VERSION,
        model_kind: model_kind.to_string(),
        k,
        h,
        config,
        layers: params
            .iter()
            .map(|p| LayerShape { name: p.name.clone(), rows: p.value.rows(), cols: p.value.cols() })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| NnError::Format(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_all(&(json.len() as u32).to_le_bytes())?;
    out.write_all(&json)?;
    for p in params.iter() {
        for v in p.value.data() {
            out.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_weights<R: Read>(mut input: R) -> Result<(WeightHeader, Vec<(String, Tensor<f64>)>), NnError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NnError::Format("not a weight file (bad magic)".into()));
    }
    let mut len = [0u8; 4];
    input.read_exact(&mut len)?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    input.read_exact(&mut json)?;
    let header: WeightHeader = serde_json::from_slice(&json).map_err(|e| NnError::Format(e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(NnError::Format(format!(
            "unsupported weight format version {} (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    let mut layers = Vec::with_capacity(header.layers.len());
    let mut buf = [0u8; 8];
    for shape in &header.layers {
        let mut data = Vec::with_capacity(shape.rows * shape.cols);
        for _ in 0..shape.rows * shape.cols {
            input.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        layers.push((shape.name.clone(), Tensor::from_vec(shape.rows, shape.cols, data)?));
    }
    Ok((header, layers))
}

/// Overwrites `params` with the stored layers, checking names and shapes.
pub fn load_into<T: Scalar>(params: &mut ParamSet<T>, layers: &[(String, Tensor<f64>)]) -> Result<(), NnError> {
    if params.len() != layers.len() {
        return Err(NnError::Format(format!(
            "weight file has {} layers, model expects {}",
            layers.len(),
            params.len()
        )));
    }
    for (p, (name, t)) in params.iter_mut().zip(layers) {
        if &p.name != name || p.value.shape() != t.shape() {
            return Err(NnError::Format(format!(
                "layer mismatch: model {} {:?}, file {} {:?}",
                p.name,
                p.value.shape(),
                name,
                t.shape()
            )));
        }
        p.value = t.cast();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn container_round_trips_and_is_little_endian() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = ParamSet::<f64>::new();
        params.add_weight("w", 3, 2, &mut rng);
        params.add_bias("b", 2, -1.0);
        let mut bytes = Vec::new();
        write_weights(&mut bytes, "spn_actor", 5, 64, serde_json::json!({"x": 1}), &params).unwrap();
        assert_eq!(&bytes[..4], MAGIC);
        let tail = &bytes[bytes.len() - 8..];
        assert_eq!(f64::from_le_bytes(tail.try_into().unwrap()), -1.0);

        let (header, layers) = read_weights(&bytes[..]).unwrap();
        assert_eq!(header.model_kind, "spn_actor");
        assert_eq!((header.k, header.h), (5, 64));
        assert_eq!(header.layers[0], LayerShape { name: "w".into(), rows: 3, cols: 2 });
        let mut fresh = ParamSet::<f64>::new();
        fresh.add("w", Tensor::zeros(3, 2));
        fresh.add("b", Tensor::zeros(1, 2));
        load_into(&mut fresh, &layers).unwrap();
        for (a, b) in fresh.iter().zip(params.iter()) {
            assert_eq!(a.value, b.value);
        }
    }

    #[test]
    fn rejects_bad_magic_and_layout() {
        assert!(matches!(read_weights(&b"NOPE\0\0\0\0"[..]), Err(NnError::Format(_))));
        let mut params = ParamSet::<f64>::new();
        params.add("w", Tensor::zeros(2, 2));
        let layers = vec![("w".to_string(), Tensor::zeros(3, 2))];
        assert!(load_into(&mut params, &layers).is_err());
    }
}
