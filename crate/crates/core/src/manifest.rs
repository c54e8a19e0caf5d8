//! JSON manifests describing a decomposition run.

use serde::{Deserialize, Serialize};

use crate::decomposition::hierarchy::{HierarchyResult, StopReason};
use crate::decomposition::{DecompositionResult, StageAlpha};
use crate::params::NuisanceParams;

/// Bumped on any incompatible change of the manifest layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelManifest {
    pub level: usize,
    pub ranks: Vec<usize>,
    #[serde(rename = "L")]
    pub l: usize,
    /// 0-based stage indices.
    #[serde(rename = "I0")]
    pub i0: Vec<usize>,
    pub r_star: Vec<usize>,
    pub r_star_used: Vec<usize>,
    pub stages: Vec<StageAlpha>,
    pub eigenvalues: Vec<f64>,
    pub view_pve_c: Vec<f64>,
    pub view_pve_d: Vec<f64>,
    pub params: NuisanceParams,
    pub warnings: Vec<String>,
}

impl LevelManifest {
    pub fn from_result(level: usize, r: &DecompositionResult) -> LevelManifest {
        let pve_c: Vec<f64> = r.views.iter().map(|v| v.pve_view_c).collect();
        LevelManifest {
            level,
            ranks: r.params.ranks.clone(),
            l: r.params.l,
            i0: r.params.i0.clone(),
            r_star: r.params.r_star.clone(),
            r_star_used: r.views.iter().map(|v| v.r_star_used).collect(),
            stages: r.alphas.clone(),
            eigenvalues: r.eigenvalues.clone(),
            view_pve_d: pve_c.iter().map(|c| 1.0 - c).collect(),
            view_pve_c: pve_c,
            params: r.params.clone(),
            warnings: r.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewFiles {
    pub name: String,
    pub source: String,
    pub p: usize,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionManifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub seed_generated: bool,
    pub rng: String,
    pub n: usize,
    pub views: Vec<ViewFiles>,
    pub levels: Vec<LevelManifest>,
    pub stop_reason: StopReason,
    pub stage_indexing: String,
}

impl DecompositionManifest {
    pub fn new(h: &HierarchyResult, n: usize, seed: u64, seed_generated: bool, views: Vec<ViewFiles>) -> DecompositionManifest {
        DecompositionManifest {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            seed_generated,
            rng: crate::rng::GENERATOR_NAME.to_string(),
            n,
            views,
            levels: h
                .levels
                .iter()
                .enumerate()
                .map(|(t, r)| LevelManifest::from_result(t + 1, r))
                .collect(),
            stop_reason: h.stop_reason,
            stage_indexing: "stages and views are numbered from 0".into(),
        }
    }
}
