//! Pivot selection and the semantic distance criteria (SDO / PSDO).

use serde::{Deserialize, Serialize};

use crate::engine::Individual;
use crate::error::{Error, Result};
use crate::expr::Semantics;
use crate::pareto::{crowding_distance, nondominated_indices};

/// Upper bounds explored in the experiment grid.
pub const UBSS_GRID: [f64; 4] = [0.25, 0.5, 0.75, 1.0];
/// Lower bounds explored in the experiment grid; `None` selects the
/// single-bound form of the distance.
pub const LBSS_GRID: [Option<f64>; 4] = [None, Some(0.001), Some(0.01), Some(0.1)];

/// Semantic similarity band. With `lbss` present a fitness case counts when
/// `lbss <= |diff| <= ubss`; without it, when `|diff| >= ubss`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticBounds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lbss: Option<f64>,
    pub ubss: f64,
}

impl SemanticBounds {
    pub fn new(lbss: Option<f64>, ubss: f64) -> Result<Self> {
        let b = Self { lbss, ubss };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ubss.is_finite() && self.ubss > 0.0) {
            return Err(Error::Config(format!("ubss must be positive, got {}", self.ubss)));
        }
        if let Some(lo) = self.lbss {
            if !(lo > 0.0 && lo < self.ubss) {
                return Err(Error::Config(format!(
                    "lbss must satisfy 0 < lbss < ubss, got lbss={lo} ubss={}",
                    self.ubss
                )));
            }
        }
        Ok(())
    }

    /// Every (lbss, ubss) combination of the experiment grid, lbss-major.
    pub fn paper_grid() -> Vec<SemanticBounds> {
        LBSS_GRID
            .iter()
            .flat_map(|&lbss| UBSS_GRID.iter().map(move |&ubss| SemanticBounds { lbss, ubss }))
            .collect()
    }

    #[inline]
    fn counts(&self, diff: f64) -> bool {
        match self.lbss {
            Some(lo) => lo <= diff && diff <= self.ubss,
            None => diff >= self.ubss,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Prefers individuals semantically far from the pivot.
    Sdo,
    /// Complement of SDO: prefers individuals close to the pivot.
    Psdo,
}

/// Index (within `front`) of the member with the largest crowding distance
/// over the first two objectives. Ties go to the lowest index.
pub fn select_pivot<T: AsRef<[f64]>>(front: &[T]) -> Result<usize> {
    if front.is_empty() {
        return Err(Error::Usage("pivot requested from an empty front".into()));
    }
    let two: Vec<&[f64]> = front.iter().map(|o| &o.as_ref()[..2]).collect();
    let crowding = crowding_distance(&two)?;
    Ok(argmax_lowest(&crowding))
}

pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_len(pivot: &Semantics, v: &Semantics) -> Result<()> {
    if pivot.len() != v.len() {
        return Err(Error::Usage(format!(
            "semantics length mismatch: {} vs {}",
            pivot.len(),
            v.len()
        )));
    }
    Ok(())
}

/// Number of fitness cases whose absolute output difference falls in the
/// band.
pub fn sdo_distance(pivot: &Semantics, v: &Semantics, b: &SemanticBounds) -> Result<usize> {
    check_len(pivot, v)?;
    Ok(pivot
        .values()
        .iter()
        .zip(v.values())
        .filter(|(p, x)| b.counts((*p - *x).abs()))
        .count())
}

/// `l - sdo_distance`, with `l` the number of fitness cases.
pub fn psdo_distance(pivot: &Semantics, v: &Semantics, b: &SemanticBounds) -> Result<usize> {
    Ok(pivot.len() - sdo_distance(pivot, v, b)?)
}

pub fn distance(criterion: Criterion, pivot: &Semantics, v: &Semantics, b: &SemanticBounds) -> Result<usize> {
    match criterion {
        Criterion::Sdo => sdo_distance(pivot, v, b),
        Criterion::Psdo => psdo_distance(pivot, v, b),
    }
}

/// Picks the pivot from the first front (on TPR/TNR) and sets each
/// member's third objective to its semantic distance from the pivot.
/// Returns the pivot's index in `pop`.
pub fn augment_objectives(pop: &mut [Individual], criterion: Criterion, b: &SemanticBounds) -> Result<usize> {
    if pop.is_empty() {
        return Err(Error::Usage("cannot augment an empty population".into()));
    }
    let two: Vec<&[f64]> = pop.iter().map(|ind| &ind.objectives[..2]).collect();
    let front = nondominated_indices(&two);
    let front_objs: Vec<&[f64]> = front.iter().map(|&i| two[i]).collect();
    let pivot = front[select_pivot(&front_objs)?];
    let pivot_sem = pop[pivot].semantics.clone();
    for ind in pop.iter_mut() {
        let d = distance(criterion, &pivot_sem, &ind.semantics, b)?;
        ind.objectives.truncate(2);
        ind.objectives.push(d as f64);
    }
    Ok(pivot)
}
