//! Decomposition of multi-view data into common-source, distinctive-source
//! and noise matrices, `Y_k = C_k + D_k + E_k`.
//!
//! Pipeline: each view is denoised by a soft-thresholded SVD
//! ([`signal`]), the factor scores of all views go through Carroll's GCCA
//! ([`gcca`]), nuisance parameters are fixed or chosen by tests
//! ([`nuisance`]) and the common/distinctive matrices are built from the
//! GCCA stages ([`decomposition`]). [`simulation`] and [`evaluation`]
//! reproduce the simulation studies.

pub mod dataset;
pub mod decomposition;
pub mod error;
pub mod evaluation;
pub mod gcca;
pub mod linalg;
pub mod manifest;
pub mod nuisance;
mod par;
pub mod params;
pub mod rng;
pub mod signal;
pub mod simulation;
pub mod stats;

pub use nalgebra;
pub use dataset::{assemble_dataset, load_matrix, row_center, Format, Matrix, MultiViewDataset};
pub use decomposition::hierarchy::{decompose_hierarchical, HierarchyConfig, HierarchyResult, StopReason};
pub use decomposition::{decompose, DecompositionResult};
pub use error::{Error, Result};
pub use gcca::{population_gcca, sample_gcca, GccaModel};
pub use nuisance::{select_all, Overrides, SelectionConfig};
pub use params::NuisanceParams;
pub use signal::{recover_all, select_rank_ed, soft_threshold_svd, SignalEstimate};
