//! No-reference video quality assessment.
//!
//! * [`media`]: Y4M / PNG-directory ingest, one-second clips, frame sampling
//! * [`descriptors`]: handcrafted per-frame distortion descriptors
//! * [`features`]: semantic / motion provider contracts, toy backbones,
//!   binary feature files and the dataset manifest
//! * [`model`]: the fusion regressor, its gradients, training and model files
//! * [`study`]: raw subjective ratings to MOS
//! * [`eval`]: SRCC / PLCC, logistic fitting, splits and the repeated protocol
//! * [`synthetic`]: seeded synthetic videos for tests and demos

pub mod descriptors;
pub mod eval;
pub mod features;
pub mod media;
pub mod model;
pub mod rng;
pub mod study;
pub mod synthetic;

pub use descriptors::{distortion_vector, DistortionVector, N_D};
pub use eval::{plcc_after_fit, run_protocol, split_dataset, srcc, EvalError, EvalReport, LogisticFit, ProtocolConfig};
pub use features::{
    ClipFeatures, FeatureDims, FeatureError, FeatureFile, FeatureKind, Manifest, ManifestEntry, MotionProvider,
    SemanticProvider,
};
pub use media::{Clip, Frame, FrameRate, FrameSequence, LumaPlane, MediaError, SamplerConfig};
pub use model::{LabeledVideo, ModelDims, ModelError, ModelParams, TrainConfig};
pub use study::{MosTable, RatingRecord, StudyConfig, StudyError, SubjectTable};
