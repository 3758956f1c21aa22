//! End-to-end commands behind the `pog` binary.
//!
//! Commands exchange plain files: JSON manifests and reports, CSV tables, PGM
//! images, and the binary model (`PSDA`) and bank (`PRFB`) containers. Every
//! manifest and report echoes the resolved [`PipelineConfig`]. Wall-clock times are
//! appended to the `timing.log` sidecar only, so reruns with the same configuration
//! produce byte-identical reports.
//!
//! Dataset directory:
//!
//! ```text
//! manifest.json        DatasetManifest
//! scenes/NNNN.json     one scenario file per scene
//! aog.csv              scene index, then the flattened AOG
//! pog_K.csv            scene index, then the ground-truth POG at instant K
//! ```
//!
//! All random streams derive from `PipelineConfig::seed`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::forest::{fit_bank, ForestBank, ForestParams, InputVariant};
use crate::grid::{encode_aog, flatten, rasterize_footprint, GridSpec, PredictedOccupancyGrid};
use crate::metrics::{reconstruction_rmse_mean, ErrorSummary};
use crate::planner::{plan, PlanReport, PlannerConfig};
use crate::scenario::{
    generate_all_hypotheses, oracle_pogs, sample_dataset, DatasetConfig, IntendedPath, RoadClass,
    ScenarioFile, Scene,
};
use crate::sda::{train_stack, SdaModel, TrainConfig};
use crate::seed::derive;
use crate::situation::{
    classify_constellation, classify_road, rank_templates, road_image, select_relevant,
    Constellation, RelevanceVerdict, TemplateLibrary, DEFAULT_RELEVANCE_MARGIN,
};
use crate::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;
pub const TIMING_LOG: &str = "timing.log";
pub const MODEL_FILE: &str = "model.psda";

const STREAM_SDA: u64 = 1;
const STREAM_FOREST: u64 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SdaSettings {
    /// Hidden units per layer, input side first.
    pub layers: Vec<usize>,
    /// `seed` is overwritten by the stream derived from the pipeline seed.
    pub train: TrainConfig,
}

impl Default for SdaSettings {
    fn default() -> Self {
        SdaSettings {
            layers: vec![512, 256, 128],
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SituationSettings {
    /// IDM warp radius in pixels.
    pub delta: usize,
    /// Neighbours in the k-NN vote.
    pub k: usize,
    /// Extra relevance clearance in meters.
    pub margin: f64,
}

impl Default for SituationSettings {
    fn default() -> Self {
        SituationSettings {
            delta: 2,
            k: 1,
            margin: DEFAULT_RELEVANCE_MARGIN,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportSettings {
    /// Test scenes exported as POG images by `evaluate`.
    pub image_scenes: usize,
    pub histogram_bins: usize,
}

impl Default for ReportSettings {
    fn default() -> Self {
        ReportSettings {
            image_scenes: 3,
            histogram_bins: 20,
        }
    }
}

/// Everything a run depends on. Only `seed` is required in JSON; other sections
/// default to the desk-scale setup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    #[serde(default = "DatasetConfig::desk")]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub sda: SdaSettings,
    #[serde(default)]
    pub forest: ForestParams,
    #[serde(default)]
    pub situation: SituationSettings,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub report: ReportSettings,
}

impl PipelineConfig {
    pub fn new(seed: u64) -> Self {
        PipelineConfig {
            seed,
            dataset: DatasetConfig::desk(),
            sda: SdaSettings::default(),
            forest: ForestParams::default(),
            situation: SituationSettings::default(),
            planner: PlannerConfig::default(),
            report: ReportSettings::default(),
        }
        .resolved()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: PipelineConfig = read_json(path)?;
        Ok(cfg.resolved())
    }

    /// Fills in derived seeds.
    pub fn resolved(mut self) -> Self {
        self.sda.train.seed = derive(self.seed, STREAM_SDA);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.sda.train.validate()?;
        self.forest.validate()?;
        if self.sda.layers.is_empty() || self.sda.layers.contains(&0) {
            return Err(Error::InvalidArgument("SDA layer sizes must be positive".into()));
        }
        if self.situation.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        self.planner.motion.validate()
    }

    fn forest_seed(&self, instant: usize) -> u64 {
        derive(derive(self.seed, STREAM_FOREST), instant as u64)
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn check_version(path: &Path, kind: &'static str, found: u32) -> Result<()> {
    if found != MANIFEST_VERSION {
        return Err(Error::UnknownVersion {
            path: path.to_path_buf(),
            kind,
            found,
            expected: MANIFEST_VERSION,
        });
    }
    Ok(())
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv<S: AsRef<str>>(path: &Path, header: Option<&[&str]>, rows: impl IntoIterator<Item = Vec<S>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err(path))?;
    if let Some(h) = header {
        w.write_record(h).map_err(csv_err(path))?;
    }
    for row in rows {
        w.write_record(row.iter().map(|s| s.as_ref())).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Rows of `index, v_0, .., v_{width-1}` with indices `0, 1, ..` in order.
fn write_matrix<'a>(path: &Path, rows: impl IntoIterator<Item = &'a [f64]>) -> Result<()> {
    write_csv(
        path,
        None,
        rows.into_iter().enumerate().map(|(k, r)| {
            std::iter::once(k.to_string())
                .chain(r.iter().map(|v| v.to_string()))
                .collect::<Vec<_>>()
        }),
    )
}

fn read_matrix(path: &Path, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err(path))?;
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        if rec.len() != width + 1 {
            return Err(Error::format(path, format!("row {k} has {} values, expected {}", rec.len(), width + 1)));
        }
        if rec[0].parse::<usize>().ok() != Some(k) {
            return Err(Error::format(path, format!("row {k} is labelled `{}`", &rec[0])));
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|_| Error::format(path, format!("row {k}: bad number `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        out.push(row);
    }
    Ok(out)
}

fn append_timing(dir: &Path, what: &str, elapsed: Duration) -> Result<()> {
    use std::io::Write;
    let path = dir.join(TIMING_LOG);
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    writeln!(f, "{what}\t{:.3} s", elapsed.as_secs_f64()).map_err(|e| Error::io(&path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub config: PipelineConfig,
    pub instants: Vec<f64>,
    pub train_count: usize,
    pub test_count: usize,
    /// Scenes with 1, 2 and 3 participants.
    pub participant_histogram: [usize; 3],
    pub scenes: Vec<String>,
    pub aog_file: String,
    pub pog_files: Vec<String>,
}

/// A dataset read back from disk; scenes stay on disk.
#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
    pub aogs: Vec<Vec<f64>>,
    /// `pogs[k][s]`: ground truth of scene `s` at instant `k`.
    pub pogs: Vec<Vec<PredictedOccupancyGrid>>,
}

impl LoadedDataset {
    pub fn grid(&self) -> GridSpec {
        self.manifest.config.dataset.grid
    }

    pub fn train_range(&self) -> std::ops::Range<usize> {
        0..self.manifest.train_count
    }

    pub fn test_range(&self) -> std::ops::Range<usize> {
        self.manifest.train_count..self.aogs.len()
    }

    pub fn scene(&self, index: usize) -> Result<Scene> {
        let name = self
            .manifest
            .scenes
            .get(index)
            .ok_or_else(|| Error::InvalidArgument(format!("no scene {index}")))?;
        Ok(ScenarioFile::read(&self.dir.join(name))?.scene())
    }
}

pub fn cmd_generate(cfg: &PipelineConfig, out: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    let started = Instant::now();
    let ds = sample_dataset(&cfg.dataset, cfg.seed)?;
    create_dir(&out.join("scenes"))?;
    let grid = cfg.dataset.grid;
    let mut scenes = Vec::with_capacity(ds.samples.len());
    for (k, s) in ds.samples.iter().enumerate() {
        let name = format!("scenes/{k:04}.json");
        ScenarioFile::new(&s.scene, grid, &cfg.dataset.hypotheses, cfg.seed).write(&out.join(&name))?;
        scenes.push(name);
    }
    let aogs: Vec<Vec<f64>> = ds.samples.iter().map(|s| flatten(&s.aog)).collect();
    write_matrix(&out.join("aog.csv"), aogs.iter().map(|v| v.as_slice()))?;
    let instants = cfg.dataset.hypotheses.instants();
    let mut pog_files = Vec::new();
    for k in 0..instants.len() {
        let name = format!("pog_{k}.csv");
        write_matrix(&out.join(&name), ds.samples.iter().map(|s| s.pogs[k].probs.as_slice()))?;
        pog_files.push(name);
    }
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        config: cfg.clone(),
        instants,
        train_count: cfg.dataset.train_count,
        test_count: cfg.dataset.count - cfg.dataset.train_count,
        participant_histogram: ds.participant_histogram(),
        scenes,
        aog_file: "aog.csv".into(),
        pog_files,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    append_timing(out, "generate", started.elapsed())?;
    Ok(manifest)
}

pub fn load_dataset(dir: &Path) -> Result<LoadedDataset> {
    let path = dir.join("manifest.json");
    let manifest: DatasetManifest = read_json(&path)?;
    check_version(&path, "dataset manifest", manifest.version)?;
    let grid = manifest.config.dataset.grid;
    let aogs = read_matrix(&dir.join(&manifest.aog_file), grid.flat_len())?;
    let n = manifest.train_count + manifest.test_count;
    if aogs.len() != n || manifest.scenes.len() != n {
        return Err(Error::format(&path, format!("manifest lists {n} scenes, found {} AOGs", aogs.len())));
    }
    if manifest.pog_files.len() != manifest.instants.len() {
        return Err(Error::format(&path, "one POG file per instant expected"));
    }
    let pogs = manifest
        .pog_files
        .iter()
        .zip(&manifest.instants)
        .map(|(file, &t)| {
            let rows = read_matrix(&dir.join(file), grid.cell_count())?;
            if rows.len() != n {
                return Err(Error::format(dir.join(file), format!("{} rows, expected {n}", rows.len())));
            }
            Ok(rows
                .into_iter()
                .map(|probs| PredictedOccupancyGrid { spec: grid, probs, t_pred: t })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedDataset {
        dir: dir.to_path_buf(),
        manifest,
        aogs,
        pogs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdaManifest {
    pub version: u32,
    pub config: PipelineConfig,
    pub model_file: String,
    pub input_len: usize,
    pub feature_len: usize,
    pub iterations: Vec<usize>,
    pub final_loss: Vec<f64>,
    /// Mean reconstruction error on the training split.
    pub train_error: f64,
}

pub fn cmd_train_sda(cfg: &PipelineConfig, dataset: &Path, out: &Path) -> Result<SdaManifest> {
    cfg.validate()?;
    let data = load_dataset(dataset)?;
    let train = &data.aogs[data.train_range()];
    let started = Instant::now();
    let (model, report) = train_stack(train, &cfg.sda.layers, &cfg.sda.train)?;
    let elapsed = started.elapsed();
    create_dir(out)?;
    model.save(&out.join(MODEL_FILE))?;
    let mut rows = Vec::new();
    for (l, layer) in report.layers.iter().enumerate() {
        for (e, loss) in layer.loss_trace.iter().enumerate() {
            rows.push(vec![l.to_string(), e.to_string(), loss.to_string()]);
        }
    }
    write_csv(&out.join("loss_trace.csv"), Some(&["layer", "epoch", "loss"]), rows)?;
    let manifest = SdaManifest {
        version: MANIFEST_VERSION,
        config: cfg.clone(),
        model_file: MODEL_FILE.into(),
        input_len: model.input_len(),
        feature_len: model.feature_len(),
        iterations: report.layers.iter().map(|l| l.iterations).collect(),
        final_loss: report
            .layers
            .iter()
            .map(|l| l.loss_trace.last().copied().unwrap_or(f64::NAN))
            .collect(),
        train_error: reconstruction_rmse_mean(&model, train)?.mean_error,
    };
    write_json(&out.join("sda.json"), &manifest)?;
    append_timing(out, "train-sda", elapsed)?;
    Ok(manifest)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub file: String,
    pub t_pred: f64,
    pub forests: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankManifest {
    pub version: u32,
    pub config: PipelineConfig,
    pub variant: InputVariant,
    pub input_len: usize,
    pub banks: Vec<BankEntry>,
}

fn bank_manifest_path(dir: &Path, variant: InputVariant) -> PathBuf {
    dir.join(format!("rf_{variant}.json"))
}

/// Raw flattened AOGs or the SDA features of them.
pub fn input_features(aogs: &[Vec<f64>], variant: InputVariant, model: Option<&SdaModel>) -> Result<Vec<Vec<f64>>> {
    match variant {
        InputVariant::Raw => Ok(aogs.to_vec()),
        InputVariant::Reduced => {
            let model = model.ok_or_else(|| Error::InvalidArgument("the reduced variant needs an SDA model".into()))?;
            aogs.iter().map(|a| model.extract_features(a)).collect()
        }
    }
}

fn load_model(path: Option<&Path>) -> Result<Option<SdaModel>> {
    path.map(SdaModel::load).transpose()
}

/// Trains one bank per prediction instant. The returned duration covers bank
/// fitting only.
pub fn cmd_train_rf(
    cfg: &PipelineConfig,
    dataset: &Path,
    model: Option<&Path>,
    variant: InputVariant,
    out: &Path,
) -> Result<(BankManifest, Duration)> {
    cfg.validate()?;
    let data = load_dataset(dataset)?;
    let model = load_model(model)?;
    let train = data.train_range();
    let x = input_features(&data.aogs[train.clone()], variant, model.as_ref())?;
    create_dir(out)?;
    let mut banks = Vec::new();
    let mut elapsed = Duration::ZERO;
    for (k, pogs) in data.pogs.iter().enumerate() {
        let started = Instant::now();
        let bank = fit_bank(&x, &pogs[train.clone()], variant, &cfg.forest, cfg.forest_seed(k))?;
        elapsed += started.elapsed();
        let file = format!("bank_{variant}_{k}.prfb");
        bank.save(&out.join(&file))?;
        banks.push(BankEntry {
            file,
            t_pred: bank.t_pred,
            forests: bank.forest_count(),
        });
    }
    let manifest = BankManifest {
        version: MANIFEST_VERSION,
        config: cfg.clone(),
        variant,
        input_len: x.first().map_or(0, Vec::len),
        banks,
    };
    write_json(&bank_manifest_path(out, variant), &manifest)?;
    append_timing(out, &format!("train-rf {variant}"), elapsed)?;
    Ok((manifest, elapsed))
}

pub fn load_banks(dir: &Path, variant: InputVariant) -> Result<Vec<ForestBank>> {
    let path = bank_manifest_path(dir, variant);
    let manifest: BankManifest = read_json(&path)?;
    check_version(&path, "bank manifest", manifest.version)?;
    manifest
        .banks
        .iter()
        .map(|b| ForestBank::load(&dir.join(&b.file)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstantErrors {
    pub t_pred: f64,
    pub summary: ErrorSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: InputVariant,
    pub instants: Vec<InstantErrors>,
    /// Over all test scenes and instants.
    pub overall: ErrorSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub mean_error: f64,
    pub mean_rms_per_entry: f64,
    pub mean_abs_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub version: u32,
    pub config: PipelineConfig,
    pub test_scenes: usize,
    pub variants: Vec<VariantReport>,
    pub reconstruction: Option<ReconstructionReport>,
}

/// Scores every bank set present in `banks` on the test split, writes
/// `report.json`, `table1.csv`, `reconstruction_hist.csv` (with a model) and POG
/// images of the first test scenes.
pub fn cmd_evaluate(
    cfg: &PipelineConfig,
    dataset: &Path,
    banks: &Path,
    model: Option<&Path>,
    out: &Path,
) -> Result<EvaluationReport> {
    let data = load_dataset(dataset)?;
    let model = load_model(model)?;
    let test = data.test_range();
    if test.is_empty() {
        return Err(Error::Empty("test split"));
    }
    create_dir(&out.join("images"))?;
    let shown = test.start..test.end.min(test.start + cfg.report.image_scenes);
    for s in shown.clone() {
        for (k, pogs) in data.pogs.iter().enumerate() {
            pogs[s].to_image().write(&out.join(format!("images/{s:04}_{k}_truth.pgm")))?;
        }
    }

    let mut variants = Vec::new();
    for variant in [InputVariant::Raw, InputVariant::Reduced] {
        if !bank_manifest_path(banks, variant).exists() {
            continue;
        }
        let bank_set = load_banks(banks, variant)?;
        if bank_set.len() != data.pogs.len() {
            return Err(Error::format(
                bank_manifest_path(banks, variant),
                format!("{} banks for {} instants", bank_set.len(), data.pogs.len()),
            ));
        }
        let x = input_features(&data.aogs[test.clone()], variant, model.as_ref())?;
        let mut instants = Vec::new();
        let mut all = Vec::new();
        for (k, bank) in bank_set.iter().enumerate() {
            let mut pairs = Vec::with_capacity(x.len());
            for (s, feat) in test.clone().zip(&x) {
                let est = bank.predict_pog(feat)?;
                if shown.contains(&s) {
                    est.to_image().write(&out.join(format!("images/{s:04}_{k}_{variant}.pgm")))?;
                }
                pairs.push((data.pogs[k][s].clone(), est));
            }
            instants.push(InstantErrors {
                t_pred: bank.t_pred,
                summary: ErrorSummary::from_pairs(&pairs)?,
            });
            all.extend(pairs);
        }
        variants.push(VariantReport {
            variant,
            instants,
            overall: ErrorSummary::from_pairs(&all)?,
        });
    }
    if variants.is_empty() {
        return Err(Error::InvalidArgument(format!("no bank manifests in {}", banks.display())));
    }

    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    let mut rows = Vec::new();
    for v in &variants {
        let tagged = v
            .instants
            .iter()
            .map(|i| (i.t_pred.to_string(), &i.summary))
            .chain(std::iter::once(("all".to_string(), &v.overall)));
        for (t, s) in tagged {
            rows.push(vec![
                v.variant.to_string(),
                t,
                opt(s.mean_low),
                opt(s.mean_mid),
                opt(s.mean_high),
                s.mean.to_string(),
                s.fallbacks.to_string(),
            ]);
        }
    }
    write_csv(
        &out.join("table1.csv"),
        Some(&["variant", "t_pred", "mean_low", "mean_mid", "mean_high", "mean", "fallbacks"]),
        rows,
    )?;

    let reconstruction = match &model {
        Some(m) => {
            let r = reconstruction_rmse_mean(m, &data.aogs[test.clone()])?;
            write_csv(
                &out.join("reconstruction_hist.csv"),
                Some(&["bin_low", "bin_high", "count"]),
                histogram(&r.errors, cfg.report.histogram_bins)
                    .into_iter()
                    .map(|(lo, hi, n)| vec![lo.to_string(), hi.to_string(), n.to_string()]),
            )?;
            Some(ReconstructionReport {
                mean_error: r.mean_error,
                mean_rms_per_entry: r.mean_rms_per_entry,
                mean_abs_value: r.mean_abs_value,
            })
        }
        None => None,
    };

    let report = EvaluationReport {
        version: MANIFEST_VERSION,
        config: cfg.clone(),
        test_scenes: test.len(),
        variants,
        reconstruction,
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

/// Equal-width bins over `[0, max]`; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let bins = bins.max(1);
    let max = values.iter().copied().fold(0.0, f64::max);
    let width = if max > 0.0 { max / bins as f64 } else { 1.0 };
    let mut counts = vec![0; bins];
    for &v in values {
        counts[((v / width) as usize).min(bins - 1)] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, n)| (b as f64 * width, (b + 1) as f64 * width, n))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighbourEntry {
    pub label: RoadClass,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstellationEntry {
    pub id: u32,
    pub constellation: Constellation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub version: u32,
    pub road_class: RoadClass,
    /// Templates ranked by IDM distance.
    pub neighbours: Vec<NeighbourEntry>,
    pub constellations: Vec<ConstellationEntry>,
    pub relevance: Vec<RelevanceVerdict>,
}

impl ClassifyReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("road class: {}\n", self.road_class);
        if let Some(n) = self.neighbours.first() {
            s += &format!("nearest template: {} (distance {})\n", n.label, n.distance);
        }
        for c in &self.constellations {
            s += &format!("participant {}: {}\n", c.id, c.constellation);
        }
        for v in &self.relevance {
            let ids: Vec<String> = v.relevant_ids().iter().map(u32::to_string).collect();
            s += &format!("path {}: relevant [{}]\n", v.path, ids.join(", "));
        }
        s
    }
}

pub fn cmd_classify(cfg: &PipelineConfig, scenario: &Path, templates: &Path) -> Result<ClassifyReport> {
    let file = ScenarioFile::read(scenario)?;
    let scene = file.scene();
    let lib = TemplateLibrary::load(templates)?;
    let (rows, cols) = lib.dims().ok_or(Error::Empty("template library"))?;
    if rows != cols {
        return Err(Error::InvalidArgument(format!("templates must be square, got {rows}x{cols}")));
    }
    let image = road_image(&scene.road, &GridSpec::square(rows));
    let (delta, k) = (cfg.situation.delta, cfg.situation.k);
    let road_class = classify_road(&image, &lib, k, delta)?;
    let neighbours = rank_templates(&image, &lib, delta)?
        .into_iter()
        .map(|n| NeighbourEntry {
            label: n.label,
            distance: n.distance,
        })
        .collect();
    let constellations = scene
        .participants
        .iter()
        .map(|p| ConstellationEntry {
            id: p.id,
            constellation: classify_constellation(&p.state, &scene.ego.state),
        })
        .collect();
    let hypos = generate_all_hypotheses(&scene, &file.hypothesis_config())?;
    let relevance = [IntendedPath::Straight, IntendedPath::Left, IntendedPath::Right]
        .into_iter()
        .map(|path| select_relevant(&scene, &hypos, path, cfg.situation.margin))
        .collect();
    Ok(ClassifyReport {
        version: MANIFEST_VERSION,
        road_class,
        neighbours,
        constellations,
        relevance,
    })
}

/// Where `plan` takes its POGs from.
#[derive(Clone, Debug, PartialEq)]
pub enum PogSource {
    Oracle,
    Banks {
        dir: PathBuf,
        variant: InputVariant,
        model: Option<PathBuf>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanOutput {
    pub version: u32,
    pub source: String,
    pub plan: PlanReport,
}

impl PlanOutput {
    pub fn to_text(&self) -> String {
        let mut s = format!("source: {}\n", self.source);
        for (c, cost) in self.plan.candidates.iter().zip(&self.plan.costs) {
            let costs: Vec<String> = cost.costs.iter().map(|v| format!("{v:.4}")).collect();
            let mark = if c.index == self.plan.candidates[self.plan.selected].index { " *" } else { "" };
            s += &format!(
                "{:>2} {:<16} costs [{}] worst {:.4} sum {:.4}{mark}\n",
                c.index,
                c.maneuver,
                costs.join(", "),
                cost.worst,
                cost.total
            );
        }
        s += &format!("selected: {}\n", self.plan.selected);
        s
    }
}

/// POGs of `scene` at every instant of `file`, from the oracle or trained banks.
pub fn scene_pogs(file: &ScenarioFile, source: &PogSource) -> Result<Vec<PredictedOccupancyGrid>> {
    let scene = file.scene();
    match source {
        PogSource::Oracle => {
            let hypos = generate_all_hypotheses(&scene, &file.hypothesis_config())?;
            oracle_pogs(&scene, &hypos, &file.header.grid)
        }
        PogSource::Banks { dir, variant, model } => {
            let banks = load_banks(dir, *variant)?;
            let spec = banks.first().ok_or(Error::Empty("bank set"))?.spec;
            let aog = flatten(&encode_aog(&scene, &spec)?);
            let model = load_model(model.as_deref())?;
            let x = input_features(&[aog], *variant, model.as_ref())?.remove(0);
            banks.iter().map(|b| b.predict_pog(&x)).collect()
        }
    }
}

/// Scores the EGO candidates of a scenario file; with `overlay`, writes each POG
/// with the selected footprint drawn in mid gray.
pub fn cmd_plan(cfg: &PipelineConfig, scenario: &Path, source: &PogSource, overlay: Option<&Path>) -> Result<PlanOutput> {
    let file = ScenarioFile::read(scenario)?;
    let scene = file.scene();
    let hyp = file.hypothesis_config();
    let mut pcfg = cfg.planner.clone();
    pcfg.motion.horizon = hyp.horizon;
    pcfg.motion.kappa = hyp.kappa;
    let pogs = scene_pogs(&file, source)?;
    let report = plan(&scene.ego, &scene.road, &pogs, &pcfg)?;
    if let Some(dir) = overlay {
        create_dir(dir)?;
        let best = &report.candidates[report.selected];
        for (k, (pog, pose)) in pogs.iter().zip(&best.poses).enumerate() {
            let mut img = pog.to_image();
            let spec = pog.spec;
            for c in rasterize_footprint(pose.position(), pose.psi, scene.ego.length, scene.ego.width, &spec) {
                img.set(spec.cols - 1 - c.i, spec.rows - 1 - c.j, 128);
            }
            img.write(&dir.join(format!("plan_{k}.pgm")))?;
        }
    }
    let source = match source {
        PogSource::Oracle => "oracle".to_string(),
        PogSource::Banks { variant, .. } => variant.to_string(),
    };
    Ok(PlanOutput {
        version: MANIFEST_VERSION,
        source,
        plan: report,
    })
}

/// Writes the synthetic template library.
pub fn cmd_templates(out: &Path, size: usize) -> Result<TemplateLibrary> {
    let lib = TemplateLibrary::synthetic(size);
    lib.save(out)?;
    Ok(lib)
}
