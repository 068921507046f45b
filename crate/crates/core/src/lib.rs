//! Joint image clustering and representation learning.
//!
//! Mini-batch k-means assigns pseudo-labels, a small trainable head is
//! fine-tuned on the most reliable of them, and centroid updates use
//! drift-compensated features so that the moving representation does not
//! corrupt the running centroid means.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`] and [`rng`]: dense `f64` containers and a seeded generator.
//! - [`backbone`]: frozen feature extractors.
//! - [`head`]: the trainable layers with hand-written backpropagation.
//! - [`clustering`]: centroid bank, k-means++ seeding, Lloyd baseline.
//! - [`trainer`]: the joint loop and its baselines.
//! - [`metrics`]: normalized mutual information.
//! - [`dataio`]: IDX/CSV/synthetic datasets, label files, checkpoints.

pub mod backbone;
pub mod clustering;
pub mod config;
pub mod dataio;
pub mod error;
pub mod head;
pub mod metrics;
pub mod rng;
pub mod tensor;
pub mod trainer;

pub use backbone::{Backbone, BackboneKind, BackboneSpec, Shape};
pub use clustering::{lloyd_kmeans, seed_kmeanspp, Assignment, CentroidBank, LloydResult};
pub use config::KvDoc;
pub use dataio::{Checkpoint, Dataset, Pixels, Progress};
pub use error::{Error, Result};
pub use head::{init_head, one_hot, sse_loss, FeatureHead, ForwardTrace, Gradients};
pub use metrics::{build_contingency, entropy, nmi, nmi_report, ContingencyTable, NmiReport};
pub use rng::SeededRng;
pub use tensor::{argmin, matvec, sq_euclidean, DenseMatrix, DenseVector};
pub use trainer::{
    run, run_baseline, run_full, select_top_km, FineTuneBuffer, FullSetFeatures, Mode,
    RollbackMode, RunResult, Trainer, TrainerConfig,
};
