//! Nuisance parameters consumed by the decomposition.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// View pair `(j, k)` with `j < k`.
pub type Pair = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    User,
    Selected,
    Truth,
}

/// Per-stage settings for a stage in `I0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageParams {
    pub delta_pos: Vec<Pair>,
    pub delta_zero: Vec<Pair>,
    /// +1 or -1.
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceParams {
    pub ranks: Vec<usize>,
    pub l: usize,
    /// 0-based stage indices, increasing.
    pub i0: Vec<usize>,
    pub r_star: Vec<usize>,
    pub stages: BTreeMap<usize, StageParams>,
    pub alpha_level: Option<f64>,
    pub provenance: Provenance,
}

impl NuisanceParams {
    /// Parameters with an empty common part.
    pub fn empty(ranks: Vec<usize>, provenance: Provenance) -> NuisanceParams {
        let k = ranks.len();
        NuisanceParams {
            ranks,
            l: 0,
            i0: Vec::new(),
            r_star: vec![0; k],
            stages: BTreeMap::new(),
            alpha_level: None,
            provenance,
        }
    }

    /// Checks the structural invariants against `k` views.
    pub fn validate(&self, k: usize) -> Result<()> {
        if self.ranks.len() != k {
            return Err(Error::Arity(format!("{} ranks for {k} views", self.ranks.len())));
        }
        if self.r_star.len() != k {
            return Err(Error::Arity(format!("{} r* values for {k} views", self.r_star.len())));
        }
        if self.i0.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("I0 must be strictly increasing".into()));
        }
        if let Some(&last) = self.i0.last() {
            if last >= self.l {
                return Err(Error::Config(format!(
                    "I0 contains stage {last} but L = {}",
                    self.l
                )));
            }
        }
        for (v, &r) in self.r_star.iter().enumerate() {
            if r > self.i0.len() {
                return Err(Error::Rank(format!(
                    "r* = {r} for view {v} exceeds |I0| = {}",
                    self.i0.len()
                )));
            }
        }
        for &l in &self.i0 {
            let st = self
                .stages
                .get(&l)
                .ok_or_else(|| Error::Config(format!("no delta sets or sign for stage {l}")))?;
            if st.sign != 1 && st.sign != -1 {
                return Err(Error::Config(format!("sign at stage {l} must be +1 or -1")));
            }
            for p in st.delta_pos.iter().chain(&st.delta_zero) {
                if p.0 >= p.1 || p.1 >= k {
                    return Err(Error::Config(format!("invalid pair {p:?} at stage {l}")));
                }
            }
            if st.delta_pos.iter().any(|p| st.delta_zero.contains(p)) {
                return Err(Error::Config(format!("delta sets overlap at stage {l}")));
            }
            if st.delta_pos.is_empty() && st.delta_zero.is_empty() {
                return Err(Error::Config(format!("both delta sets empty at stage {l}")));
            }
        }
        Ok(())
    }
}

/// All pairs `j < k` over `k` views.
pub fn all_pairs(k: usize) -> Vec<Pair> {
    let mut out = Vec::new();
    for j in 0..k {
        for m in j + 1..k {
            out.push((j, m));
        }
    }
    out
}
