use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layer::{layer_gradients, DenoisingLayer};
use crate::seed::{derive, rng};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Standard deviation of the Gaussian corruption (normalized units).
    pub noise_std: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    /// Mini-batch updates per layer.
    pub max_iterations: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            noise_std: 0.3,
            learning_rate: 0.001,
            weight_decay: 0.005,
            momentum: 0.9,
            max_iterations: 400,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.noise_std >= 0.0
            && self.learning_rate > 0.0
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&self.momentum)
            && self.batch_size > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid SDA training config {self:?}")))
        }
    }
}

/// `p + eps`, `eps ~ N(0, noise_std^2)` i.i.d.
pub fn corrupt_with<R: Rng>(p: &[f64], noise_std: f64, rng: &mut R) -> Vec<f64> {
    if noise_std == 0.0 {
        return p.to_vec();
    }
    let normal = Normal::new(0.0, noise_std).expect("noise_std is finite and non-negative");
    p.iter().map(|&x| x + normal.sample(rng)).collect()
}

pub fn corrupt(p: &[f64], noise_std: f64, seed: u64) -> Vec<f64> {
    corrupt_with(p, noise_std, &mut rng(seed))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerReport {
    /// Mean mini-batch loss of every (possibly partial) epoch.
    pub loss_trace: Vec<f64>,
    pub iterations: usize,
}

/// Mini-batch SGD with momentum on the layer loss. Samples are reshuffled and freshly
/// corrupted every epoch.
pub fn train_layer(
    mut layer: DenoisingLayer,
    data: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<(DenoisingLayer, LayerReport)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training data"));
    }
    let mut rng = rng(cfg.seed);
    let mut vw = vec![0.0; layer.w.len()];
    let mut vb = vec![0.0; layer.b.len()];
    let mut vbp = vec![0.0; layer.b_prime.len()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::new();
    let mut iteration = 0;
    while iteration < cfg.max_iterations {
        order.shuffle(&mut rng);
        let (mut sum, mut batches) = (0.0, 0);
        for chunk in order.chunks(cfg.batch_size) {
            if iteration == cfg.max_iterations {
                break;
            }
            let clean: Vec<Vec<f64>> = chunk.iter().map(|&k| data[k].clone()).collect();
            let corrupted: Vec<Vec<f64>> = clean
                .iter()
                .map(|p| corrupt_with(p, cfg.noise_std, &mut rng))
                .collect();
            let (loss, g) = layer_gradients(&layer, &clean, &corrupted, cfg.weight_decay)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { iteration, loss });
            }
            let step = |param: &mut [f64], vel: &mut [f64], grad: &[f64]| {
                for ((p, v), g) in param.iter_mut().zip(vel.iter_mut()).zip(grad) {
                    *v = cfg.momentum * *v - cfg.learning_rate * g;
                    *p += *v;
                }
            };
            step(&mut layer.w, &mut vw, &g.w);
            step(&mut layer.b, &mut vb, &g.b);
            step(&mut layer.b_prime, &mut vbp, &g.b_prime);
            if !layer.is_finite() {
                return Err(Error::Divergence {
                    iteration,
                    loss: f64::NAN,
                });
            }
            sum += loss;
            batches += 1;
            iteration += 1;
        }
        trace.push(sum / batches as f64);
    }
    Ok((
        layer,
        LayerReport {
            loss_trace: trace,
            iterations: iteration,
        },
    ))
}

/// Seed of layer `l` within a stack trained with `cfg.seed`.
pub(crate) fn layer_seed(cfg: &TrainConfig, l: usize) -> u64 {
    derive(cfg.seed, l as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rank-2 data in 12 dimensions.
    fn low_rank(n: usize) -> Vec<Vec<f64>> {
        let mut r = rng(5);
        let u: Vec<f64> = (0..12).map(|_| r.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..12).map(|_| r.random_range(-1.0..1.0)).collect();
        (0..n)
            .map(|_| {
                let (a, b) = (r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
                (0..12).map(|k| a * u[k] + b * v[k]).collect()
            })
            .collect()
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.05,
            max_iterations: 300,
            batch_size: 16,
            noise_std: 0.1,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_noise_is_identity() {
        assert_eq!(corrupt(&[1.0, 2.0], 0.0, 1), vec![1.0, 2.0]);
        assert_eq!(corrupt(&[1.0, 2.0], 0.3, 1), corrupt(&[1.0, 2.0], 0.3, 1));
    }

    #[test]
    fn noise_is_centered() {
        let n = 100_000;
        let x = corrupt(&vec![0.0; n], 0.3, 42);
        let mean = x.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() <= 3.0 * 0.3 / (n as f64).sqrt(), "{mean}");
        let var = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((var.sqrt() - 0.3).abs() < 0.005);
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let data = low_rank(64);
        let layer = DenoisingLayer::new(12, 4, &mut rng(1));
        let (a, rep) = train_layer(layer.clone(), &data, &cfg()).unwrap();
        assert!(rep.loss_trace.last().unwrap() < &rep.loss_trace[0]);
        assert_eq!(rep.iterations, 300);
        assert_eq!(rep.loss_trace.len(), 75);
        let (b, _) = train_layer(layer, &data, &cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn weight_decay_shrinks_weights() {
        let data = low_rank(64);
        let layer = DenoisingLayer::new(12, 4, &mut rng(1));
        let (free, _) = train_layer(layer.clone(), &data, &TrainConfig { weight_decay: 0.0, ..cfg() }).unwrap();
        let (tight, _) = train_layer(layer, &data, &TrainConfig { weight_decay: 10.0, learning_rate: 0.01, ..cfg() }).unwrap();
        assert!(tight.weight_norm_sq() < free.weight_norm_sq());
    }

    #[test]
    fn divergence_is_reported() {
        let data = low_rank(32);
        let layer = DenoisingLayer::new(12, 4, &mut rng(1));
        let bad = TrainConfig {
            learning_rate: 1e6,
            ..cfg()
        };
        assert!(matches!(train_layer(layer, &data, &bad), Err(Error::Divergence { .. })));
    }
}
