//! Vulnerability detection over slice property graphs.
//!
//! C sources are parsed into ASTs, lifted to a code property graph, sliced
//! from syntax-based vulnerability candidates into slice property graphs
//! (SPGs), and classified by a relational graph network with attention.

pub mod embed;
pub mod frontend;
pub mod graphs;
pub mod model;
pub mod pipeline;
pub mod slicer;
pub mod spg;
pub mod syvc;
pub mod tensor;

pub use embed::{Embeddings, NodeInitConfig, SkipGramConfig, Vocabulary};
pub use frontend::{normalize, parse_source, SourceUnit};
pub use graphs::{build_cpg, Cpg, EdgeKind};
pub use model::{Model, ModelConfig};
pub use pipeline::{DatasetManifest, Metrics, PipelineConfig, PipelineError, SpgOptions, TrainConfig};
pub use spg::{Spg, SpgCriterion, VulnerableLines};
pub use syvc::{Syvc, SyvcKind};
pub use tensor::{Tensor, TensorError};
