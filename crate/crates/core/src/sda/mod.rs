//! Stacked denoising autoencoder (SDA).
//!
//! Each layer is a tied-weight autoencoder trained to reconstruct clean inputs from
//! Gaussian-corrupted copies. Layers are trained greedily: layer `l + 1` learns on
//! the clean codes of the trained layer `l`. The top-layer code is the feature
//! vector handed to the forest bank.
//!
//! # Model file
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! b"PSDA" | version: u32 = 1
//! attributes: u32 | mean: f64 x attributes | scale: f64 x attributes
//! layers: u32
//! per layer: input: u32 | hidden: u32 | activation: u8 | reconstruction: u8
//!            W: f64 x (hidden * input), row-major | b: f64 x hidden | b': f64 x input
//! ```
//!
//! Activation tags: 0 sigmoid, 1 linear, 2 tanh.

mod layer;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio::{Reader, Writer};
use crate::grid::CELL_ATTRIBUTES;
use crate::seed::rng;
use crate::{Error, Result};

pub use layer::{layer_gradients, layer_loss, Activation, DenoisingLayer, LayerGradients};
pub use train::{corrupt, corrupt_with, train_layer, LayerReport, TrainConfig};

pub const MODEL_MAGIC: &[u8; 4] = b"PSDA";
pub const MODEL_VERSION: u32 = 1;

/// Per-attribute affine map `(x - mean) / scale` over cell-major vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalization {
    /// No-op map for `attributes` interleaved attributes.
    pub fn identity(attributes: usize) -> Self {
        Normalization {
            mean: vec![0.0; attributes],
            scale: vec![1.0; attributes],
        }
    }

    /// Mean and value range of every attribute over all cells of all samples. A zero
    /// range maps to scale 1.
    pub fn fit(data: &[Vec<f64>], attributes: usize) -> Result<Self> {
        let first = data.first().ok_or(Error::Empty("normalization data"))?;
        if attributes == 0 || first.len() % attributes != 0 {
            return Err(Error::InvalidArgument(format!(
                "vector length {} is not a multiple of {attributes} attributes",
                first.len()
            )));
        }
        let mut sum = vec![0.0; attributes];
        let mut lo = vec![f64::INFINITY; attributes];
        let mut hi = vec![f64::NEG_INFINITY; attributes];
        let mut count = 0usize;
        for v in data {
            if v.len() != first.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    got: v.len(),
                });
            }
            for (k, &x) in v.iter().enumerate() {
                let a = k % attributes;
                sum[a] += x;
                lo[a] = lo[a].min(x);
                hi[a] = hi[a].max(x);
            }
            count += v.len() / attributes;
        }
        let mean = sum.iter().map(|s| s / count as f64).collect();
        let scale = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| if h > l { h - l } else { 1.0 })
            .collect();
        Ok(Normalization { mean, scale })
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.mean.len();
        v.iter()
            .enumerate()
            .map(|(k, &x)| (x - self.mean[k % n]) / self.scale[k % n])
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdaModel {
    pub normalization: Normalization,
    pub layers: Vec<DenoisingLayer>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StackReport {
    pub layers: Vec<LayerReport>,
}

/// Normalizes `data`, then trains one layer per entry of `sizes`, each on the clean
/// codes of the layer below.
pub fn train_stack(data: &[Vec<f64>], sizes: &[usize], cfg: &TrainConfig) -> Result<(SdaModel, StackReport)> {
    cfg.validate()?;
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::InvalidArgument(format!("invalid layer sizes {sizes:?}")));
    }
    let normalization = Normalization::fit(data, CELL_ATTRIBUTES)?;
    let mut inputs: Vec<Vec<f64>> = data.iter().map(|v| normalization.apply(v)).collect();
    let mut layers = Vec::with_capacity(sizes.len());
    let mut reports = Vec::with_capacity(sizes.len());
    for (l, &hidden) in sizes.iter().enumerate() {
        let seed = train::layer_seed(cfg, l);
        let init = DenoisingLayer::new(inputs[0].len(), hidden, &mut rng(seed));
        let layer_cfg = TrainConfig {
            seed: crate::seed::derive(seed, 1),
            ..cfg.clone()
        };
        let (layer, report) = train_layer(init, &inputs, &layer_cfg)?;
        if l + 1 < sizes.len() {
            inputs = inputs.iter().map(|p| layer.encode(p)).collect::<Result<_>>()?;
        }
        layers.push(layer);
        reports.push(report);
    }
    Ok((
        SdaModel {
            normalization,
            layers,
        },
        StackReport { layers: reports },
    ))
}

impl SdaModel {
    /// A model with freshly initialized (untrained) layers and the given normalization.
    pub fn untrained(normalization: Normalization, input: usize, sizes: &[usize], cfg: &TrainConfig) -> Self {
        let mut layers = Vec::with_capacity(sizes.len());
        let mut n = input;
        for (l, &hidden) in sizes.iter().enumerate() {
            layers.push(DenoisingLayer::new(n, hidden, &mut rng(train::layer_seed(cfg, l))));
            n = hidden;
        }
        SdaModel {
            normalization,
            layers,
        }
    }

    pub fn input_len(&self) -> usize {
        self.layers.first().map_or(0, |l| l.input)
    }

    pub fn feature_len(&self) -> usize {
        self.layers.last().map_or(0, |l| l.hidden)
    }

    /// Top-layer code of the clean, normalized input.
    pub fn extract_features(&self, aog: &[f64]) -> Result<Vec<f64>> {
        if aog.len() != self.input_len() {
            return Err(Error::DimensionMismatch {
                expected: self.input_len(),
                got: aog.len(),
            });
        }
        let mut x = self.normalization.apply(aog);
        for layer in &self.layers {
            x = layer.encode(&x)?;
        }
        Ok(x)
    }

    /// `|r - p|` for the first layer on the clean, normalized input `p`.
    pub fn reconstruction_error(&self, aog: &[f64]) -> Result<f64> {
        let first = self.layers.first().ok_or(Error::Empty("SDA layers"))?;
        let p = self.normalization.apply(aog);
        let r = first.reconstruct(&p)?;
        Ok(r.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = Writer::new(MODEL_MAGIC, MODEL_VERSION);
        w.u32(self.normalization.mean.len() as u32);
        w.f64s(&self.normalization.mean);
        w.f64s(&self.normalization.scale);
        w.u32(self.layers.len() as u32);
        for l in &self.layers {
            w.u32(l.input as u32);
            w.u32(l.hidden as u32);
            w.u8(l.activation.tag());
            w.u8(l.reconstruction.tag());
            w.f64s(&l.w);
            w.f64s(&l.b);
            w.f64s(&l.b_prime);
        }
        w.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = Reader::open(path, MODEL_MAGIC, "SDA model", MODEL_VERSION)?;
        let attributes = r.u32()? as usize;
        let mean = r.f64s(attributes)?;
        let scale = r.f64s(attributes)?;
        let count = r.u32()? as usize;
        let mut layers = Vec::new();
        for k in 0..count {
            let input = r.u32()? as usize;
            let hidden = r.u32()? as usize;
            let activation = Activation::from_tag(r.u8()?).ok_or_else(|| r.error("unknown activation tag"))?;
            let reconstruction = Activation::from_tag(r.u8()?).ok_or_else(|| r.error("unknown activation tag"))?;
            if let Some(prev) = layers.last().map(|l: &DenoisingLayer| l.hidden) {
                if prev != input {
                    return Err(r.error(format!("layer {k} expects {input} inputs, previous layer has {prev} units")));
                }
            }
            let w = r.f64s(input * hidden)?;
            let b = r.f64s(hidden)?;
            let b_prime = r.f64s(input)?;
            layers.push(DenoisingLayer {
                input,
                hidden,
                w,
                b,
                b_prime,
                activation,
                reconstruction,
            });
        }
        r.finish()?;
        Ok(SdaModel {
            normalization: Normalization { mean, scale },
            layers,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn data(n: usize, dim: usize) -> Vec<Vec<f64>> {
        let mut r = rng(4);
        (0..n)
            .map(|_| (0..dim).map(|k| if k % 5 == 0 { r.random_range(0..2) as f64 } else { r.random_range(-7.0..13.0) }).collect())
            .collect()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            max_iterations: 20,
            batch_size: 8,
            learning_rate: 0.01,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn normalization_per_attribute() {
        let d = vec![vec![0.0, 2.0, 1.0, 4.0], vec![1.0, 6.0, 1.0, 8.0]];
        let n = Normalization::fit(&d, 2).unwrap();
        assert_eq!(n.mean, vec![0.75, 5.0]);
        assert_eq!(n.scale, vec![1.0, 6.0]);
        let c = Normalization::fit(&[vec![3.0, 3.0]], 1).unwrap();
        assert_eq!(c.scale, vec![1.0]);
        assert_eq!(c.apply(&[3.0]), vec![0.0]);
    }

    #[test]
    fn stack_shapes() {
        let d = data(16, 40);
        let (m, rep) = train_stack(&d, &[12, 8, 4], &quick()).unwrap();
        assert_eq!(m.feature_len(), 4);
        assert_eq!(rep.layers.len(), 3);
        assert_eq!(m.extract_features(&d[0]).unwrap().len(), 4);
        assert!(m.extract_features(&d[0][..35]).is_err());
        // features are a pure function of the input
        assert_eq!(m.extract_features(&d[3]).unwrap(), m.extract_features(&d[3]).unwrap());
    }

    #[test]
    fn single_layer_stack_is_train_layer() {
        let d = data(16, 20);
        let cfg = quick();
        let (m, _) = train_stack(&d, &[6], &cfg).unwrap();
        let norm = Normalization::fit(&d, 5).unwrap();
        let x: Vec<Vec<f64>> = d.iter().map(|v| norm.apply(v)).collect();
        let init = DenoisingLayer::new(20, 6, &mut rng(train::layer_seed(&cfg, 0)));
        let layer_cfg = TrainConfig {
            seed: crate::seed::derive(train::layer_seed(&cfg, 0), 1),
            ..cfg
        };
        let (l, _) = train_layer(init, &x, &layer_cfg).unwrap();
        assert_eq!(m.layers, vec![l]);
    }

    #[test]
    fn identity_model_reconstructs_exactly() {
        let m = SdaModel {
            normalization: Normalization::identity(5),
            layers: vec![DenoisingLayer::identity(10)],
        };
        let x: Vec<f64> = (0..10).map(|k| k as f64 * 0.7 - 2.0).collect();
        assert_eq!(m.reconstruction_error(&x).unwrap(), 0.0);
        assert_eq!(m.reconstruction_error(&[0.0; 10]).unwrap(), 0.0);
    }

    #[test]
    fn deterministic_and_file_round_trip() {
        let d = data(16, 20);
        let (a, _) = train_stack(&d, &[6, 3], &quick()).unwrap();
        let (b, _) = train_stack(&d, &[6, 3], &quick()).unwrap();
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.sda");
        a.save(&path).unwrap();
        assert_eq!(SdaModel::load(&path).unwrap(), a);

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 9;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(SdaModel::load(&path), Err(Error::UnknownVersion { found: 9, .. })));
        bytes[4] = 1;
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(SdaModel::load(&path), Err(Error::Format { .. })));
    }
}
