//! Situation classification: road geometry by IDM + k-NN template matching, then
//! per-participant constellations and safety relevance for the EGO's intended path.

mod constellation;
mod idm;
mod templates;

pub use constellation::{
    classify_constellation, crossing_scene, select_relevant, Constellation, ParticipantVerdict,
    RelevanceVerdict, DEFAULT_RELEVANCE_MARGIN, LANE_CORRIDOR_HALF_WIDTH,
};
pub use idm::{classify_road, idm_distance, rank_templates, road_image, BinaryImage, Neighbour};
pub use templates::{
    perturbation_benchmark, BenchmarkConfig, Template, TemplateLibrary, MANIFEST_FILE,
    TEMPLATE_SIZE, TEMPLATE_VERSION,
};
