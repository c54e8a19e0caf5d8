//! Multi-level decomposition: each level decomposes the distinctive parts
//! left over by the previous one.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{decompose_signals, DecompositionResult};
use crate::dataset::MultiViewDataset;
use crate::error::{Error, Result};
use crate::gcca;
use crate::nuisance::{self, Overrides, SelectionConfig, SelectionReport};
use crate::params::NuisanceParams;
use crate::signal::{self, SignalEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxLevels,
    EmptyI0,
    PveFloor,
}

#[derive(Debug, Clone)]
pub struct HierarchyResult {
    pub levels: Vec<DecompositionResult>,
    pub reports: Vec<SelectionReport>,
    pub stop_reason: StopReason,
}

impl HierarchyResult {
    /// `D̂` of the last level.
    pub fn final_distinctive(&self) -> Vec<&DMatrix<f64>> {
        self.levels
            .last()
            .map(|r| r.views.iter().map(|v| &v.d_hat).collect())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone)]
pub struct HierarchyConfig {
    pub max_levels: usize,
    pub pve_floor: f64,
    pub selection: SelectionConfig,
    /// Fixed parameters per level (index 0 is the first level); missing or
    /// `None` entries are selected by tests.
    pub level_params: Vec<Option<NuisanceParams>>,
    /// Fixed ranks for levels after the first; `None` uses the inner-level
    /// rank rule.
    pub inner_ranks: Vec<Option<Vec<usize>>>,
    /// User-fixed quantities for the first level when it is selected.
    pub overrides: Overrides,
}

impl HierarchyConfig {
    pub fn new(max_levels: usize, pve_floor: f64, selection: SelectionConfig) -> HierarchyConfig {
        HierarchyConfig {
            max_levels,
            pve_floor,
            selection,
            level_params: Vec::new(),
            inner_ranks: Vec::new(),
            overrides: Overrides::default(),
        }
    }
}

/// Signal estimates of an already-denoised matrix: exact truncated SVD whose
/// `x_hat` is the input itself, so the levels telescope.
fn inner_signals(mats: &[DMatrix<f64>], ranks: Option<&Vec<usize>>) -> Result<Vec<SignalEstimate>> {
    if let Some(r) = ranks {
        if r.len() != mats.len() {
            return Err(Error::Arity(format!("{} ranks for {} views", r.len(), mats.len())));
        }
    }
    mats.iter()
        .enumerate()
        .map(|(k, m)| {
            let r = match ranks {
                Some(r) => r[k],
                None => signal::inner_level_rank(m)?,
            };
            let mut est = signal::exact_truncation(m, r)?;
            est.x_hat = m.clone();
            Ok(est)
        })
        .collect()
}

pub fn decompose_hierarchical(ds: &MultiViewDataset, cfg: &HierarchyConfig) -> Result<HierarchyResult> {
    if cfg.max_levels < 1 {
        return Err(Error::Config("hierarchy needs at least one level".into()));
    }
    if !(cfg.pve_floor >= 0.0) {
        return Err(Error::Config("pve floor must be nonnegative".into()));
    }
    let k = ds.k();
    let mut levels: Vec<DecompositionResult> = Vec::new();
    let mut reports = Vec::new();
    let mut remaining = vec![1.0; k];
    let mut input: Option<Vec<DMatrix<f64>>> = None;

    for t in 0..cfg.max_levels {
        let fixed = cfg.level_params.get(t).cloned().flatten();
        let (signals, model, params, report) = match &input {
            None => match fixed {
                Some(p) => {
                    p.validate(k)?;
                    let signals = signal::recover_all(ds, Some(&p.ranks), cfg.selection.k_max)?;
                    let model = gcca::sample_gcca(&signals)?;
                    (signals, model, p, SelectionReport::default())
                }
                None => {
                    let sel = nuisance::select_all(ds, &cfg.selection, &cfg.overrides)?;
                    (sel.signals, sel.model, sel.params, sel.report)
                }
            },
            Some(mats) => {
                let ranks = fixed
                    .as_ref()
                    .map(|p| p.ranks.clone())
                    .or_else(|| cfg.inner_ranks.get(t).cloned().flatten());
                let signals = inner_signals(mats, ranks.as_ref())?;
                let model = gcca::sample_gcca(&signals)?;
                let mut report = SelectionReport::default();
                let params = match fixed {
                    Some(p) => p,
                    None => {
                        let mut sel_cfg = cfg.selection.clone();
                        sel_cfg.seed = cfg.selection.seed.wrapping_add(t as u64);
                        let ranks = signals.iter().map(|s| s.rank).collect();
                        nuisance::select_from_model(&model, ranks, &sel_cfg, &Overrides::default(), &mut report)?
                    }
                };
                (signals, model, params, report)
            }
        };
        let result = decompose_signals(&signals, &model, &params)?;
        let empty = result.params.i0.is_empty();
        let mut below_floor = true;
        for (v, view) in result.views.iter().enumerate() {
            if view.pve_view_c * remaining[v] > cfg.pve_floor {
                below_floor = false;
            }
            remaining[v] *= 1.0 - view.pve_view_c;
        }
        input = Some(result.views.iter().map(|v| v.d_hat.clone()).collect());
        levels.push(result);
        reports.push(report);
        let reason = if empty {
            Some(StopReason::EmptyI0)
        } else if below_floor {
            Some(StopReason::PveFloor)
        } else if t + 1 == cfg.max_levels {
            Some(StopReason::MaxLevels)
        } else {
            None
        };
        if let Some(stop_reason) = reason {
            return Ok(HierarchyResult { levels, reports, stop_reason });
        }
    }
    unreachable!("loop returns at the last level")
}
