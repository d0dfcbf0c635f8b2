//! Segmentation, fold construction, feature extraction and cross-validation.

pub mod corpus;
pub mod cv;
pub mod features;
pub mod folds;
pub mod ftns;
pub mod segment;

pub use corpus::{PlantedCorpus, MIRROR_PAIRS, WITHIN_LEFT_PAIRS};
pub use cv::{
    majority_fraction, run_cv, shuffle_trial_labels, ChannelStats, CvConfig, CvOutcome, CvReport, FoldGranularity,
    FoldReport,
};
pub use features::{FeatureConfig, FeatureExtractor, FeatureKind, FeatureTensor, OrderingTag};
pub use folds::{make_folds, make_stratified_folds, FoldPlan, N_FOLDS};
pub use ftns::{decode_features, encode_features, read_features, write_features, FTNS_MAGIC, FTNS_VERSION};
pub use segment::{accuracy, binarize_valence, segment, segment_bounds, window_and_hop, Segment, HOP_S, WINDOW_S};
