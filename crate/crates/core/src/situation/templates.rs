//! Road-geometry template library: one binary template per road class, stored as
//! PGM files plus a JSON manifest.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::idm::{classify_road, road_image, BinaryImage};
use crate::grid::GridSpec;
use crate::pgm::GrayImage;
use crate::scenario::RoadClass;
use crate::seed::derived_rng;
use crate::{Error, Result};

pub const TEMPLATE_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
/// Side length of the shipped templates in pixels.
pub const TEMPLATE_SIZE: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct Template {
    pub label: RoadClass,
    pub image: BinaryImage,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TemplateLibrary {
    pub templates: Vec<Template>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    rows: usize,
    cols: usize,
    templates: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    file: String,
    label: RoadClass,
}

impl TemplateLibrary {
    /// Renders every road class on an `n x n` grid over the standard 40 m area.
    pub fn synthetic(n: usize) -> Self {
        let spec = GridSpec::square(n);
        TemplateLibrary {
            templates: RoadClass::ALL
                .iter()
                .map(|&label| Template {
                    label,
                    image: road_image(&label.layout(), &spec),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// Image dimensions `(rows, cols)` shared by all templates.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.templates.first().map(|t| (t.image.rows, t.image.cols))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let (rows, cols) = self.dims().ok_or(Error::Empty("template library"))?;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut entries = Vec::new();
        for (k, t) in self.templates.iter().enumerate() {
            let file = format!("{k:02}_{}.pgm", t.label);
            t.image.to_gray().write(&dir.join(&file))?;
            entries.push(ManifestEntry { file, label: t.label });
        }
        let manifest = Manifest {
            version: TEMPLATE_VERSION,
            rows,
            cols,
            templates: entries,
        };
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).map_err(|source| Error::Json {
            path: path.clone(),
            source,
        })?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.clone(),
            source,
        })?;
        if manifest.version != TEMPLATE_VERSION {
            return Err(Error::UnknownVersion {
                path,
                kind: "template manifest",
                found: manifest.version,
                expected: TEMPLATE_VERSION,
            });
        }
        if manifest.templates.is_empty() {
            return Err(Error::Empty("template library"));
        }
        let templates = manifest
            .templates
            .iter()
            .map(|e| {
                let file = dir.join(&e.file);
                let image = BinaryImage::from_gray(&GrayImage::read(&file)?);
                if (image.rows, image.cols) != (manifest.rows, manifest.cols) {
                    return Err(Error::format(
                        &file,
                        format!(
                            "template is {}x{}, manifest says {}x{}",
                            image.rows, image.cols, manifest.rows, manifest.cols
                        ),
                    ));
                }
                Ok(Template {
                    label: e.label,
                    image,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TemplateLibrary { templates })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub samples_per_template: usize,
    /// Largest shift per axis in pixels.
    pub max_shift: i64,
    /// Largest fraction of flipped pixels.
    pub max_flip: f64,
    pub k: usize,
    pub delta: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            samples_per_template: 20,
            max_shift: 2,
            max_flip: 0.02,
            k: 1,
            delta: 2,
        }
    }
}

/// Classifies perturbed copies of every template (random shift and flip noise, both
/// bounded by `cfg`) and returns `(true, predicted)` label pairs.
pub fn perturbation_benchmark(
    lib: &TemplateLibrary,
    cfg: &BenchmarkConfig,
    seed: u64,
) -> Result<Vec<(RoadClass, RoadClass)>> {
    let mut pairs = Vec::with_capacity(lib.len() * cfg.samples_per_template);
    for (k, t) in lib.templates.iter().enumerate() {
        let mut rng = derived_rng(seed, k as u64);
        for _ in 0..cfg.samples_per_template {
            let dr = rng.random_range(-cfg.max_shift..=cfg.max_shift);
            let dc = rng.random_range(-cfg.max_shift..=cfg.max_shift);
            let flip = rng.random_range(0.0..=cfg.max_flip);
            let noisy = t.image.shifted(dr, dc).with_flips(flip, &mut rng);
            pairs.push((t.label, classify_road(&noisy, lib, cfg.k, cfg.delta)?));
        }
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_templates_are_distinct() {
        let lib = TemplateLibrary::synthetic(TEMPLATE_SIZE);
        assert_eq!(lib.len(), 9);
        for a in 0..lib.len() {
            assert!(lib.templates[a].image.count_ones() > 0);
            for b in a + 1..lib.len() {
                assert_ne!(lib.templates[a].image, lib.templates[b].image);
            }
        }
    }

    #[test]
    fn template_classifies_as_itself() {
        let lib = TemplateLibrary::synthetic(TEMPLATE_SIZE);
        for t in &lib.templates {
            assert_eq!(classify_road(&t.image, &lib, 1, 2).unwrap(), t.label);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let lib = TemplateLibrary::synthetic(16);
        lib.save(dir.path()).unwrap();
        assert_eq!(TemplateLibrary::load(dir.path()).unwrap(), lib);
    }
}
