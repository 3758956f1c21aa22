//! Quality measures: SDA reconstruction error, the POG error with its probability
//! bands, and confusion matrices.
//!
//! The POG error compares the nonzero supports `B` (truth) and `D` (estimate):
//! `eps = sqrt(sum (p_hat - p)^2 / K)` with `K = |B xor D|`. When the supports
//! coincide `K` falls back to `|B u D|`, and two empty grids score 0.

use std::fmt::Display;

use serde::{Deserialize, Serialize};

use crate::grid::PredictedOccupancyGrid;
use crate::sda::SdaModel;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PogError {
    pub error: f64,
    /// Divisor actually used.
    pub k: usize,
    /// `|B xor D|`.
    pub symmetric_difference: usize,
    /// `|B u D|`.
    pub union: usize,
    /// True when `K` fell back to `|B u D|`.
    pub fallback: bool,
}

fn check_pair(truth: &PredictedOccupancyGrid, estimate: &PredictedOccupancyGrid) -> Result<()> {
    if truth.spec != estimate.spec || truth.probs.len() != estimate.probs.len() {
        return Err(Error::InvalidArgument("POGs are defined on different grids".into()));
    }
    if truth.t_pred != estimate.t_pred {
        return Err(Error::InvalidArgument(format!(
            "POGs predict different instants ({} vs {})",
            truth.t_pred, estimate.t_pred
        )));
    }
    Ok(())
}

/// Error over the cells selected by `keep`, or `None` when none of them is nonzero
/// in either grid.
fn error_over(truth: &[f64], estimate: &[f64], keep: impl Fn(f64) -> bool) -> Option<PogError> {
    let (mut sq, mut xor, mut union) = (0.0, 0usize, 0usize);
    for (&p, &q) in truth.iter().zip(estimate) {
        if !keep(p) {
            continue;
        }
        let (b, d) = (p != 0.0, q != 0.0);
        if b || d {
            union += 1;
            sq += (q - p) * (q - p);
        }
        if b != d {
            xor += 1;
        }
    }
    if union == 0 {
        return None;
    }
    let (k, fallback) = if xor == 0 { (union, true) } else { (xor, false) };
    Some(PogError {
        error: (sq / k as f64).sqrt(),
        k,
        symmetric_difference: xor,
        union,
        fallback,
    })
}

pub fn pog_error(truth: &PredictedOccupancyGrid, estimate: &PredictedOccupancyGrid) -> Result<PogError> {
    check_pair(truth, estimate)?;
    Ok(error_over(&truth.probs, &estimate.probs, |_| true).unwrap_or(PogError {
        error: 0.0,
        k: 0,
        symmetric_difference: 0,
        union: 0,
        fallback: false,
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    /// Truth in `[0, 0.25]`.
    Low,
    /// Truth in `(0.25, 0.75]`.
    Mid,
    /// Truth in `(0.75, 1]`.
    High,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::Low, Band::Mid, Band::High];

    pub fn of(p: f64) -> Band {
        if p <= 0.25 {
            Band::Low
        } else if p <= 0.75 {
            Band::Mid
        } else {
            Band::High
        }
    }
}

/// Errors restricted to the cells of each ground-truth band; `None` for a band with no
/// nonzero cell in either grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandedErrors {
    pub low: Option<PogError>,
    pub mid: Option<PogError>,
    pub high: Option<PogError>,
}

impl BandedErrors {
    pub fn get(&self, band: Band) -> Option<PogError> {
        match band {
            Band::Low => self.low,
            Band::Mid => self.mid,
            Band::High => self.high,
        }
    }
}

pub fn banded_errors(truth: &PredictedOccupancyGrid, estimate: &PredictedOccupancyGrid) -> Result<BandedErrors> {
    check_pair(truth, estimate)?;
    let band = |b: Band| error_over(&truth.probs, &estimate.probs, |p| Band::of(p) == b);
    Ok(BandedErrors {
        low: band(Band::Low),
        mid: band(Band::Mid),
        high: band(Band::High),
    })
}

/// Dataset means of the overall and banded errors; undefined bands are skipped.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub samples: usize,
    pub mean: f64,
    pub mean_low: Option<f64>,
    pub mean_mid: Option<f64>,
    pub mean_high: Option<f64>,
    pub fallbacks: usize,
}

impl ErrorSummary {
    pub fn from_pairs(pairs: &[(PredictedOccupancyGrid, PredictedOccupancyGrid)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Empty("evaluation pairs"));
        }
        let mut overall = Vec::with_capacity(pairs.len());
        let mut bands: [Vec<f64>; 3] = Default::default();
        let mut fallbacks = 0;
        for (truth, est) in pairs {
            let e = pog_error(truth, est)?;
            fallbacks += e.fallback as usize;
            overall.push(e.error);
            let b = banded_errors(truth, est)?;
            for (k, band) in Band::ALL.into_iter().enumerate() {
                if let Some(e) = b.get(band) {
                    bands[k].push(e.error);
                }
            }
        }
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        Ok(ErrorSummary {
            samples: pairs.len(),
            mean: mean(&overall).unwrap_or(0.0),
            mean_low: mean(&bands[0]),
            mean_mid: mean(&bands[1]),
            mean_high: mean(&bands[2]),
            fallbacks,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSummary {
    /// Per-sample `|r - p|`.
    pub errors: Vec<f64>,
    pub mean_error: f64,
    /// Mean of `|r - p| / sqrt(len)` (root mean square per entry).
    pub mean_rms_per_entry: f64,
    /// Mean absolute normalized input value per entry.
    pub mean_abs_value: f64,
}

pub fn reconstruction_rmse_mean(model: &SdaModel, data: &[Vec<f64>]) -> Result<ReconstructionSummary> {
    if data.is_empty() {
        return Err(Error::Empty("reconstruction data"));
    }
    let errors = data
        .iter()
        .map(|x| model.reconstruction_error(x))
        .collect::<Result<Vec<_>>>()?;
    let n = data.len() as f64;
    let len = data[0].len().max(1) as f64;
    let abs: f64 = data
        .iter()
        .map(|x| model.normalization.apply(x).iter().map(|v| v.abs()).sum::<f64>() / len)
        .sum();
    Ok(ReconstructionSummary {
        mean_error: errors.iter().sum::<f64>() / n,
        mean_rms_per_entry: errors.iter().map(|e| e / len.sqrt()).sum::<f64>() / n,
        mean_abs_value: abs / n,
        errors,
    })
}

/// Counts with rows indexed by the true class and columns by the prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix<L> {
    pub classes: Vec<L>,
    pub counts: Vec<Vec<usize>>,
}

impl<L: PartialEq + Display + Clone> ConfusionMatrix<L> {
    pub fn new(truth: &[L], predicted: &[L], classes: &[L]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                got: predicted.len(),
            });
        }
        let index = |l: &L| {
            classes
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| Error::UnknownLabel(l.to_string()))
        };
        let mut counts = vec![vec![0; classes.len()]; classes.len()];
        for (t, p) in truth.iter().zip(predicted) {
            counts[index(t)?][index(p)?] += 1;
        }
        Ok(ConfusionMatrix {
            classes: classes.to_vec(),
            counts,
        })
    }

    pub fn from_pairs(pairs: &[(L, L)], classes: &[L]) -> Result<Self> {
        let (t, p): (Vec<L>, Vec<L>) = pairs.iter().cloned().unzip();
        Self::new(&t, &p, classes)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.classes.len()).map(|k| self.counts[k][k]).sum()
    }

    /// `trace / total`; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.correct() as f64 / n as f64,
        }
    }

    /// CSV with a header row of predicted classes and one row per true class.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for c in &self.classes {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
        for (c, row) in self.classes.iter().zip(&self.counts) {
            out.push_str(&c.to_string());
            for n in row {
                out.push_str(&format!(",{n}"));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use proptest::prelude::*;

    fn grid(cells: &[(usize, f64)]) -> PredictedOccupancyGrid {
        let mut g = PredictedOccupancyGrid::zeros(GridSpec::square(2), 1.0);
        for &(c, p) in cells {
            g.probs[c] = p;
        }
        g
    }

    #[test]
    fn identical_grids_use_the_fallback() {
        let g = grid(&[(0, 0.3), (3, 1.0)]);
        let e = pog_error(&g, &g).unwrap();
        assert_eq!(e.error, 0.0);
        assert!(e.fallback);
        assert_eq!(e.k, 2);
        let empty = grid(&[]);
        assert_eq!(pog_error(&empty, &empty).unwrap().error, 0.0);
    }

    #[test]
    fn lone_missed_cell() {
        let e = pog_error(&grid(&[(1, 1.0)]), &grid(&[])).unwrap();
        assert_eq!((e.k, e.error, e.fallback), (1, 1.0, false));
    }

    #[test]
    fn two_by_two_hand_case() {
        let e = pog_error(&grid(&[(0, 0.8)]), &grid(&[(0, 0.6), (1, 0.2)])).unwrap();
        assert_eq!(e.k, 1);
        assert_eq!(e.union, 2);
        let expect = ((0.2f64 * 0.2 + 0.2 * 0.2) / 1.0).sqrt();
        assert!((e.error - expect).abs() < 1e-12);
        assert!((e.error - 0.2828).abs() < 1e-4);
    }

    #[test]
    fn bands() {
        let all_one = grid(&[(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)]);
        let b = banded_errors(&all_one, &all_one).unwrap();
        assert_eq!(b.high.unwrap().error, 0.0);
        assert!(b.low.is_none() && b.mid.is_none());

        let b = banded_errors(&grid(&[(2, 0.5)]), &grid(&[(2, 0.4)])).unwrap();
        assert!((b.mid.unwrap().error - 0.1).abs() < 1e-12);
        assert!(b.low.is_none() && b.high.is_none());
        assert_eq!(Band::of(0.25), Band::Low);
        assert_eq!(Band::of(0.75), Band::Mid);
        assert_eq!(Band::of(0.0), Band::Low);
    }

    #[test]
    fn spec_mismatch_is_an_error() {
        let a = grid(&[]);
        let mut b = grid(&[]);
        b.t_pred = 2.0;
        assert!(pog_error(&a, &b).is_err());
        let c = PredictedOccupancyGrid::zeros(GridSpec::square(3), 1.0);
        assert!(banded_errors(&a, &c).is_err());
    }

    #[test]
    fn doubling_deviations_scales_by_sqrt_two() {
        // K fixed at 1 (cell 3 only in the estimate); deviations in cells 0 and 1
        let one = pog_error(&grid(&[(0, 0.5)]), &grid(&[(0, 0.7), (3, 0.0001)])).unwrap();
        let two = pog_error(&grid(&[(0, 0.5), (1, 0.5)]), &grid(&[(0, 0.7), (1, 0.7), (3, 0.0001)])).unwrap();
        assert_eq!((one.k, two.k), (1, 1));
        let base = 0.2f64 * 0.2;
        assert!((one.error - (base + 1e-8).sqrt()).abs() < 1e-12);
        assert!((two.error - (2.0 * base + 1e-8).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn confusion_counts() {
        let classes = ["a", "b", "c"];
        let truth = ["a", "a", "b", "c", "c", "c", "a", "b", "c", "a"];
        let mut pred = truth;
        let m = ConfusionMatrix::new(&truth, &pred, &classes).unwrap();
        assert_eq!(m.accuracy(), 1.0);
        assert_eq!(m.counts, vec![vec![4, 0, 0], vec![0, 2, 0], vec![0, 0, 4]]);
        pred[3] = "b";
        let m = ConfusionMatrix::new(&truth, &pred, &classes).unwrap();
        assert_eq!(m.accuracy(), 0.9);
        assert_eq!(m.counts[2][1], 1);
        assert!(ConfusionMatrix::new(&["z"], &["a"], &classes).is_err());
        assert!(m.to_csv().starts_with("true\\predicted,a,b,c\na,4,0,0\n"));
    }

    fn arb_grid() -> impl Strategy<Value = PredictedOccupancyGrid> {
        proptest::collection::vec(prop_oneof![Just(0.0), 0.0..=1.0f64], 16).prop_map(|v| {
            let mut g = PredictedOccupancyGrid::zeros(GridSpec::square(4), 0.5);
            g.probs = v;
            g
        })
    }

    proptest! {
        #[test]
        fn self_error_is_zero(g in arb_grid()) {
            prop_assert_eq!(pog_error(&g, &g).unwrap().error, 0.0);
        }

        #[test]
        fn symmetric(a in arb_grid(), b in arb_grid()) {
            prop_assert_eq!(pog_error(&a, &b).unwrap(), pog_error(&b, &a).unwrap());
        }

        #[test]
        fn bands_partition_the_union(a in arb_grid(), b in arb_grid()) {
            let banded = banded_errors(&a, &b).unwrap();
            let total: usize = Band::ALL.iter().map(|&k| banded.get(k).map_or(0, |e| e.union)).sum();
            prop_assert_eq!(total, pog_error(&a, &b).unwrap().union);
        }
    }
}
