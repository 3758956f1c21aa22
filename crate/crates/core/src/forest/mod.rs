//! Regression random forests and the per-cell forest bank mapping a feature vector
//! to a predicted occupancy grid.
//!
//! # Bank file
//!
//! Little-endian throughout.
//!
//! ```text
//! b"PRFB" | version: u32 = 1
//! grid: cols u32 | rows u32 | cell_length f64 | cell_width f64 | origin 2 x f64 | ego_cg 2 x f64
//! t_pred: f64 | variant: u8 (0 raw, 1 reduced) | input_len: u32 | seed: u64
//! forests: u32
//! per forest: cell (linear index) u32 | trees u32
//!   per tree: nodes u32
//!     per node: feature u32 (u32::MAX for a leaf) | threshold f64 | left u32 | right u32 | value f64
//! ```

mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::binio::{Reader, Writer};
use crate::grid::{GridSpec, PredictedOccupancyGrid};
use crate::seed::{derive, rng};
use crate::{Error, Result};

pub use tree::{fit_tree_on, Node, RegressionTree, LEAF};

pub const BANK_MAGIC: &[u8; 4] = b"PRFB";
pub const BANK_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub trees: usize,
    /// Features searched per split; `None` means `ceil(sqrt(d))`.
    pub mtry: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 50,
            mtry: None,
            min_samples_leaf: 5,
            max_depth: None,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    /// One unpruned tree on the full sample searching every feature.
    pub fn memorize() -> Self {
        ForestParams {
            trees: 1,
            mtry: Some(usize::MAX),
            min_samples_leaf: 1,
            max_depth: None,
            bootstrap: false,
        }
    }

    pub fn mtry_for(&self, d: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 || self.mtry == Some(0) {
            return Err(Error::InvalidArgument("forest needs trees >= 1 and mtry >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomForest {
    pub features: usize,
    pub trees: Vec<RegressionTree>,
}

impl RandomForest {
    /// Mean of the tree outputs.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

fn check_rows(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::Empty("forest training data"));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::Empty("feature vector"));
    }
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: row.len(),
        });
    }
    Ok(d)
}

/// Single tree on all rows.
pub fn fit_tree(x: &[Vec<f64>], y: &[f64], params: &ForestParams, seed: u64) -> Result<RegressionTree> {
    check_rows(x, y)?;
    fit_tree_on(x, y, (0..x.len()).collect(), params, &mut rng(seed))
}

/// `params.trees` trees, tree `t` seeded with `derive(seed, t)`; bootstrap samples
/// draw `n` rows with replacement.
pub fn fit_forest(x: &[Vec<f64>], y: &[f64], params: &ForestParams, seed: u64) -> Result<RandomForest> {
    params.validate()?;
    let d = check_rows(x, y)?;
    let n = x.len();
    let trees = (0..params.trees)
        .map(|t| {
            let mut r = rng(derive(seed, t as u64));
            let idx = if params.bootstrap {
                (0..n).map(|_| r.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_on(x, y, idx, params, &mut r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RandomForest { features: d, trees })
}

/// Which representation of the AOG the bank consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputVariant {
    /// The flattened AOG itself.
    Raw,
    /// SDA features.
    Reduced,
}

impl InputVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            InputVariant::Raw => "raw",
            InputVariant::Reduced => "reduced",
        }
    }
}

impl fmt::Display for InputVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InputVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(InputVariant::Raw),
            "reduced" => Ok(InputVariant::Reduced),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

/// One forest per grid cell for a single prediction instant. Cells without a forest
/// predict exactly 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ForestBank {
    pub spec: GridSpec,
    pub t_pred: f64,
    pub variant: InputVariant,
    pub input_len: usize,
    pub seed: u64,
    /// Indexed by linear cell index.
    pub forests: Vec<Option<RandomForest>>,
}

/// Trains a forest for every cell whose target is nonzero in at least one scene;
/// cell `c` uses seed `derive(seed, c)`.
pub fn fit_bank(
    features: &[Vec<f64>],
    targets: &[PredictedOccupancyGrid],
    variant: InputVariant,
    params: &ForestParams,
    seed: u64,
) -> Result<ForestBank> {
    params.validate()?;
    let first = targets.first().ok_or(Error::Empty("bank targets"))?;
    if features.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            got: features.len(),
        });
    }
    let (spec, t_pred) = (first.spec, first.t_pred);
    if let Some(t) = targets.iter().find(|t| t.spec != spec || t.t_pred != t_pred) {
        return Err(Error::InvalidArgument(format!(
            "targets mix grids or instants (t_pred {} vs {t_pred})",
            t.t_pred
        )));
    }
    let input_len = check_rows(features, &vec![0.0; features.len()])?;
    let forests = (0..spec.cell_count())
        .map(|c| {
            let y: Vec<f64> = targets.iter().map(|t| t.probs[c]).collect();
            if y.iter().all(|&v| v == 0.0) {
                return Ok(None);
            }
            fit_forest(features, &y, params, derive(seed, c as u64)).map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestBank {
        spec,
        t_pred,
        variant,
        input_len,
        seed,
        forests,
    })
}

impl ForestBank {
    pub fn forest_count(&self) -> usize {
        self.forests.iter().filter(|f| f.is_some()).count()
    }

    pub fn predict_pog(&self, features: &[f64]) -> Result<PredictedOccupancyGrid> {
        if features.len() != self.input_len {
            return Err(Error::DimensionMismatch {
                expected: self.input_len,
                got: features.len(),
            });
        }
        let mut pog = PredictedOccupancyGrid::zeros(self.spec, self.t_pred);
        for (c, f) in self.forests.iter().enumerate() {
            if let Some(f) = f {
                pog.probs[c] = f.predict(features).clamp(0.0, 1.0);
            }
        }
        Ok(pog)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = Writer::new(BANK_MAGIC, BANK_VERSION);
        let s = &self.spec;
        w.u32(s.cols as u32);
        w.u32(s.rows as u32);
        w.f64s(&[s.cell_length, s.cell_width, s.origin[0], s.origin[1], s.ego_cg[0], s.ego_cg[1]]);
        w.f64(self.t_pred);
        w.u8(match self.variant {
            InputVariant::Raw => 0,
            InputVariant::Reduced => 1,
        });
        w.u32(self.input_len as u32);
        w.u64(self.seed);
        w.u32(self.forest_count() as u32);
        for (c, f) in self.forests.iter().enumerate() {
            let Some(f) = f else { continue };
            w.u32(c as u32);
            w.u32(f.trees.len() as u32);
            for t in &f.trees {
                w.u32(t.nodes.len() as u32);
                for n in &t.nodes {
                    w.u32(n.feature);
                    w.f64(n.threshold);
                    w.u32(n.left);
                    w.u32(n.right);
                    w.f64(n.value);
                }
            }
        }
        w.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = Reader::open(path, BANK_MAGIC, "forest bank", BANK_VERSION)?;
        let cols = r.u32()? as usize;
        let rows = r.u32()? as usize;
        let g = r.f64s(6)?;
        let spec = GridSpec {
            cols,
            rows,
            cell_length: g[0],
            cell_width: g[1],
            origin: [g[2], g[3]],
            ego_cg: [g[4], g[5]],
        };
        spec.validate().map_err(|e| r.error(e.to_string()))?;
        let t_pred = r.f64()?;
        let variant = match r.u8()? {
            0 => InputVariant::Raw,
            1 => InputVariant::Reduced,
            t => return Err(r.error(format!("unknown input variant tag {t}"))),
        };
        let input_len = r.u32()? as usize;
        let seed = r.u64()?;
        let count = r.u32()? as usize;
        let mut forests = vec![None; spec.cell_count()];
        for _ in 0..count {
            let c = r.u32()? as usize;
            if c >= forests.len() || forests[c].is_some() {
                return Err(r.error(format!("invalid or repeated cell index {c}")));
            }
            let n_trees = r.u32()? as usize;
            let mut trees = Vec::with_capacity(n_trees.min(1 << 16));
            for _ in 0..n_trees {
                let n_nodes = r.u32()? as usize;
                let mut nodes = Vec::with_capacity(n_nodes.min(1 << 20));
                for _ in 0..n_nodes {
                    nodes.push(Node {
                        feature: r.u32()?,
                        threshold: r.f64()?,
                        left: r.u32()?,
                        right: r.u32()?,
                        value: r.f64()?,
                    });
                }
                let tree = RegressionTree { nodes };
                tree.validate(input_len).map_err(|m| r.error(format!("cell {c}: {m}")))?;
                trees.push(tree);
            }
            if trees.is_empty() {
                return Err(r.error(format!("cell {c} has no trees")));
            }
            forests[c] = Some(RandomForest {
                features: input_len,
                trees,
            });
        }
        r.finish()?;
        Ok(ForestBank {
            spec,
            t_pred,
            variant,
            input_len,
            seed,
            forests,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellIndex;
    use proptest::prelude::*;
    use rand::Rng;

    fn toy(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut r = rng(seed);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect();
        let y = x.iter().map(|v| if v[0] + 0.5 * v[1] > 0.0 { 0.9 } else { 0.1 }).collect();
        (x, y)
    }

    #[test]
    fn memorization_is_exact() {
        let (x, y) = toy(60, 5, 1);
        let f = fit_forest(&x, &y, &ForestParams::memorize(), 3).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(f.predict(xi), *yi);
        }
    }

    #[test]
    fn deterministic_and_row_order_free() {
        let (x, y) = toy(40, 6, 2);
        let p = ForestParams {
            trees: 5,
            min_samples_leaf: 2,
            bootstrap: false,
            ..ForestParams::default()
        };
        let a = fit_forest(&x, &y, &p, 9).unwrap();
        assert_eq!(a, fit_forest(&x, &y, &p, 9).unwrap());
        let mut perm: Vec<usize> = (0..40).collect();
        perm.reverse();
        let xr: Vec<Vec<f64>> = perm.iter().map(|&k| x[k].clone()).collect();
        let yr: Vec<f64> = perm.iter().map(|&k| y[k]).collect();
        assert_eq!(a, fit_forest(&xr, &yr, &p, 9).unwrap());
    }

    fn bank_data() -> (Vec<Vec<f64>>, Vec<PredictedOccupancyGrid>) {
        let spec = GridSpec::square(4);
        let (x, y) = toy(30, 3, 4);
        let pogs = y
            .iter()
            .map(|&v| {
                let mut g = PredictedOccupancyGrid::zeros(spec, 1.0);
                g.set(CellIndex::new(1, 2), v);
                g.set(CellIndex::new(3, 3), 1.0);
                g
            })
            .collect();
        (x, pogs)
    }

    #[test]
    fn bank_skips_empty_cells() {
        let (x, pogs) = bank_data();
        let bank = fit_bank(&x, &pogs, InputVariant::Reduced, &ForestParams::default(), 1).unwrap();
        assert_eq!(bank.forest_count(), 2);
        let pred = bank.predict_pog(&x[0]).unwrap();
        assert_eq!(pred.get(CellIndex::new(3, 3)), 1.0);
        assert_eq!(pred.get(CellIndex::new(0, 0)), 0.0);
        assert!(bank.predict_pog(&[0.0; 2]).is_err());
        assert!(fit_bank(&x[..5], &pogs, InputVariant::Raw, &ForestParams::default(), 1).is_err());
    }

    #[test]
    fn bank_file_round_trip() {
        let (x, pogs) = bank_data();
        let bank = fit_bank(&x, &pogs, InputVariant::Raw, &ForestParams { trees: 3, ..Default::default() }, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.rfb");
        bank.save(&path).unwrap();
        assert_eq!(ForestBank::load(&path).unwrap(), bank);
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(ForestBank::load(&path), Err(Error::Format { .. })));
    }

    proptest! {
        #[test]
        fn predictions_stay_in_target_range(seed in 0u64..1000, probe in proptest::collection::vec(-5.0..5.0f64, 4)) {
            let (x, _) = toy(25, 4, seed);
            let mut r = rng(seed + 1);
            let y: Vec<f64> = (0..25).map(|_| r.random_range(0.0..=1.0)).collect();
            let f = fit_forest(&x, &y, &ForestParams { trees: 4, min_samples_leaf: 1, ..Default::default() }, seed).unwrap();
            let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let p = f.predict(&probe);
            prop_assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
        }
    }
}
