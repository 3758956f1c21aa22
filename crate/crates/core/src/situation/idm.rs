//! Image distortion model (IDM) distance and k-NN road classification.

use rand::Rng;

use super::templates::TemplateLibrary;
use crate::grid::{CellIndex, GridSpec};
use crate::pgm::GrayImage;
use crate::scenario::{Road, RoadClass};
use crate::{Error, Result};

/// Binary image, row-major, top row first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryImage {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<bool>,
}

impl BinaryImage {
    pub fn new(rows: usize, cols: usize) -> Self {
        BinaryImage {
            rows,
            cols,
            pixels: vec![false; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.pixels[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.pixels[r * self.cols + c] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    /// Thresholds at mid-gray.
    pub fn from_gray(img: &GrayImage) -> Self {
        BinaryImage {
            rows: img.height,
            cols: img.width,
            pixels: img.pixels.iter().map(|&p| p >= 128).collect(),
        }
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.cols,
            height: self.rows,
            pixels: self.pixels.iter().map(|&p| if p { 255 } else { 0 }).collect(),
        }
    }

    /// Moves the content by `(dr, dc)` pixels; uncovered pixels are 0.
    pub fn shifted(&self, dr: i64, dc: i64) -> Self {
        let mut out = BinaryImage::new(self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let (sr, sc) = (r as i64 - dr, c as i64 - dc);
                if sr >= 0 && sc >= 0 && (sr as usize) < self.rows && (sc as usize) < self.cols {
                    out.set(r, c, self.get(sr as usize, sc as usize));
                }
            }
        }
        out
    }

    /// Flips exactly `round(fraction * pixels)` distinct pixels.
    pub fn with_flips<R: Rng>(&self, fraction: f64, rng: &mut R) -> Self {
        let n = self.pixels.len();
        let flips = (fraction.clamp(0.0, 1.0) * n as f64).round() as usize;
        let mut out = self.clone();
        for k in rand::seq::index::sample(rng, n, flips) {
            out.pixels[k] = !out.pixels[k];
        }
        out
    }
}

/// Drivable area of `road` rendered like a POG image: `x` up, `y` left.
pub fn road_image(road: &Road, spec: &GridSpec) -> BinaryImage {
    let (cols, rows) = (spec.cols, spec.rows);
    let mut img = BinaryImage::new(cols, rows);
    for r in 0..cols {
        for c in 0..rows {
            let cell = CellIndex::new(cols - 1 - r, rows - 1 - c);
            img.set(r, c, road.is_drivable(spec.cell_center(cell)));
        }
    }
    img
}

/// Inclusive 2-D prefix sums of the foreground, `(rows + 1) x (cols + 1)`.
struct Integral {
    cols: usize,
    sums: Vec<u32>,
}

impl Integral {
    fn new(img: &BinaryImage) -> Self {
        let w = img.cols + 1;
        let mut sums = vec![0u32; (img.rows + 1) * w];
        for r in 0..img.rows {
            for c in 0..img.cols {
                sums[(r + 1) * w + c + 1] = img.get(r, c) as u32 + sums[r * w + c + 1]
                    + sums[(r + 1) * w + c]
                    - sums[r * w + c];
            }
        }
        Integral { cols: w, sums }
    }

    /// Foreground count in rows `r0..r1`, cols `c0..c1` (exclusive ends).
    fn count(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> u32 {
        let w = self.cols;
        self.sums[r1 * w + c1] + self.sums[r0 * w + c0] - self.sums[r0 * w + c1] - self.sums[r1 * w + c0]
    }
}

/// IDM distance of test image `a` to reference `r`: every pixel of `a` pays the
/// smallest local distance `|a_ij - r_mn|` over the `(2 delta + 1)^2` window around
/// `(i, j)` in `r`, clipped to the image. Not symmetric.
pub fn idm_distance(a: &BinaryImage, r: &BinaryImage, delta: usize) -> Result<f64> {
    if (a.rows, a.cols) != (r.rows, r.cols) {
        return Err(Error::DimensionMismatch {
            expected: r.rows * r.cols,
            got: a.rows * a.cols,
        });
    }
    let integral = Integral::new(r);
    let mut d = 0u64;
    for i in 0..a.rows {
        let (r0, r1) = (i.saturating_sub(delta), (i + delta + 1).min(a.rows));
        for j in 0..a.cols {
            let (c0, c1) = (j.saturating_sub(delta), (j + delta + 1).min(a.cols));
            let ones = integral.count(r0, r1, c0, c1) as usize;
            let matched = if a.get(i, j) {
                ones > 0
            } else {
                ones < (r1 - r0) * (c1 - c0)
            };
            if !matched {
                d += 1;
            }
        }
    }
    Ok(d as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbour {
    pub index: usize,
    pub label: RoadClass,
    pub distance: f64,
}

/// All templates ranked by `(distance, index)`.
pub fn rank_templates(a: &BinaryImage, lib: &TemplateLibrary, delta: usize) -> Result<Vec<Neighbour>> {
    let mut ranked = lib
        .templates
        .iter()
        .enumerate()
        .map(|(index, t)| {
            Ok(Neighbour {
                index,
                label: t.label,
                distance: idm_distance(a, &t.image, delta)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|x, y| x.distance.total_cmp(&y.distance).then(x.index.cmp(&y.index)));
    Ok(ranked)
}

/// Majority label among the `k` nearest templates. Ties go to the smaller summed
/// distance, then to the label holding the lowest template index.
pub fn classify_road(a: &BinaryImage, lib: &TemplateLibrary, k: usize, delta: usize) -> Result<RoadClass> {
    if lib.templates.is_empty() {
        return Err(Error::Empty("template library"));
    }
    if k == 0 || k > lib.templates.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in 1..={}",
            lib.templates.len()
        )));
    }
    let ranked = rank_templates(a, lib, delta)?;
    // (label, votes, summed distance, lowest index)
    let mut tally: Vec<(RoadClass, usize, f64, usize)> = Vec::new();
    for n in &ranked[..k] {
        match tally.iter_mut().find(|t| t.0 == n.label) {
            Some(t) => {
                t.1 += 1;
                t.2 += n.distance;
                t.3 = t.3.min(n.index);
            }
            None => tally.push((n.label, 1, n.distance, n.index)),
        }
    }
    tally.sort_by(|x, y| {
        y.1.cmp(&x.1)
            .then(x.2.total_cmp(&y.2))
            .then(x.3.cmp(&y.3))
    });
    Ok(tally[0].0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;
    use crate::situation::Template;
    use proptest::prelude::*;

    /// Direct transcription of the window minimum.
    fn brute(a: &BinaryImage, r: &BinaryImage, delta: i64) -> f64 {
        let mut d = 0.0;
        for i in 0..a.rows as i64 {
            for j in 0..a.cols as i64 {
                let mut best = f64::INFINITY;
                for m in i - delta..=i + delta {
                    for n in j - delta..=j + delta {
                        if m < 0 || n < 0 || m >= a.rows as i64 || n >= a.cols as i64 {
                            continue;
                        }
                        let x = a.get(i as usize, j as usize) as u8 as f64;
                        let y = r.get(m as usize, n as usize) as u8 as f64;
                        best = best.min(((x - y) * (x - y)).sqrt());
                    }
                }
                d += best;
            }
        }
        d
    }

    fn arb_pair(rows: usize, cols: usize) -> impl Strategy<Value = (BinaryImage, BinaryImage)> {
        let n = rows * cols;
        (
            proptest::collection::vec(any::<bool>(), n),
            proptest::collection::vec(any::<bool>(), n),
        )
            .prop_map(move |(a, b)| {
                (
                    BinaryImage { rows, cols, pixels: a },
                    BinaryImage { rows, cols, pixels: b },
                )
            })
    }

    #[test]
    fn single_pixel_three_by_three() {
        let mut a = BinaryImage::new(3, 3);
        a.set(0, 0, true);
        let mut r = BinaryImage::new(3, 3);
        r.set(2, 2, true);
        assert_eq!(idm_distance(&a, &r, 1).unwrap(), 1.0);
        assert_eq!(brute(&a, &r, 1), 1.0);
        assert_eq!(idm_distance(&a, &r, 2).unwrap(), 0.0);
        assert_eq!(idm_distance(&a, &r, 0).unwrap(), 2.0);
    }

    #[test]
    fn shift_within_window_is_free() {
        let mut a = BinaryImage::new(12, 12);
        for r in 4..8 {
            for c in 3..9 {
                a.set(r, c, true);
            }
        }
        for dr in -2..=2 {
            for dc in -2..=2 {
                assert_eq!(idm_distance(&a.shifted(dr, dc), &a, 2).unwrap(), 0.0);
            }
        }
        assert!(idm_distance(&a.shifted(3, 0), &a, 2).unwrap() > 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(idm_distance(&BinaryImage::new(2, 3), &BinaryImage::new(3, 2), 1).is_err());
    }

    #[test]
    fn flips_exact_count() {
        let a = BinaryImage::new(10, 10);
        let b = a.with_flips(0.02, &mut rng(1));
        assert_eq!(b.count_ones(), 2);
    }

    #[test]
    fn knn_majority_and_ties() {
        let blank = BinaryImage::new(4, 4);
        let mut full = BinaryImage::new(4, 4);
        full.pixels.iter_mut().for_each(|p| *p = true);
        let t = |label, image: &BinaryImage| Template {
            label,
            image: image.clone(),
        };
        let lib = TemplateLibrary {
            templates: vec![
                t(RoadClass::Straight, &full),
                t(RoadClass::Fork, &blank),
                t(RoadClass::Crossroads, &blank),
            ],
        };
        assert_eq!(classify_road(&blank, &lib, 1, 0).unwrap(), RoadClass::Fork);
        // one vote each for fork and crossroads, equal sums: lowest index wins
        assert_eq!(classify_road(&blank, &lib, 2, 0).unwrap(), RoadClass::Fork);
        assert_eq!(classify_road(&full, &lib, 3, 0).unwrap(), RoadClass::Straight);
        assert!(classify_road(&blank, &lib, 4, 0).is_err());
        assert!(classify_road(&blank, &TemplateLibrary::default(), 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force((a, r) in arb_pair(6, 7), delta in 0usize..4) {
            prop_assert_eq!(idm_distance(&a, &r, delta).unwrap(), brute(&a, &r, delta as i64));
        }

        #[test]
        fn identity_and_monotone((a, r) in arb_pair(8, 8), delta in 0usize..4) {
            prop_assert_eq!(idm_distance(&a, &a, delta).unwrap(), 0.0);
            let d0 = idm_distance(&a, &r, delta).unwrap();
            let d1 = idm_distance(&a, &r, delta + 1).unwrap();
            prop_assert!(d1 <= d0);
        }
    }
}
