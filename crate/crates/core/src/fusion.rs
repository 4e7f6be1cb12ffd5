//! Fusion groupings: canonical schedules, enumeration and SRAM residency.

use std::ops::Range;

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hwmodel::SramSizes;
use crate::netmodel::NetworkModel;

pub const DEFAULT_GROUPING_CAP: u64 = 1 << 20;

/// An ordered partition of `0..layer_count` into contiguous, non-empty
/// layer ranges. Each range executes as one fused group.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FusionGrouping {
    groups: Vec<Range<usize>>,
}

impl FusionGrouping {
    /// Checks that `groups` partitions `0..layer_count` in order.
    pub fn new(groups: Vec<Range<usize>>, layer_count: usize) -> Result<Self> {
        let mut next = 0;
        for (i, g) in groups.iter().enumerate() {
            if g.start != next {
                return Err(Error::InvalidGrouping(format!(
                    "group {i} starts at {} but {next} was expected",
                    g.start
                )));
            }
            if g.is_empty() {
                return Err(Error::EmptyGroup);
            }
            next = g.end;
        }
        if next != layer_count || groups.is_empty() {
            return Err(Error::InvalidGrouping(format!(
                "groups cover 0..{next}, model has {layer_count} layers"
            )));
        }
        Ok(FusionGrouping { groups })
    }

    /// Builds a grouping from the indices at which new groups start
    /// (excluding 0), e.g. `[3, 6]` over 8 layers gives `0..3, 3..6, 6..8`.
    pub fn from_starts(starts: &[usize], layer_count: usize) -> Result<Self> {
        let mut groups = Vec::with_capacity(starts.len() + 1);
        let mut prev = 0;
        for &s in starts {
            if s <= prev || s >= layer_count {
                return Err(Error::InvalidGrouping(format!(
                    "boundary {s} must be increasing and within 1..{layer_count}"
                )));
            }
            groups.push(prev..s);
            prev = s;
        }
        groups.push(prev..layer_count);
        Self::new(groups, layer_count)
    }

    pub fn groups(&self) -> &[Range<usize>] {
        &self.groups
    }

    /// Group count.
    pub fn m(&self) -> usize {
        self.groups.len()
    }

    /// Layers per group.
    pub fn n_p(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.len()).collect()
    }

    pub fn layer_count(&self) -> usize {
        self.groups.last().map_or(0, |g| g.end)
    }

    pub fn is_all_singletons(&self) -> bool {
        self.groups.iter().all(|g| g.len() == 1)
    }

    /// Group start indices after the first group.
    pub fn starts(&self) -> Vec<usize> {
        self.groups[1..].iter().map(|g| g.start).collect()
    }

    /// Merges groups `i` and `i + 1`.
    pub fn merge_adjacent(&self, i: usize) -> Option<FusionGrouping> {
        if i + 1 >= self.groups.len() {
            return None;
        }
        let mut groups = self.groups.clone();
        let tail = groups.remove(i + 1);
        groups[i].end = tail.end;
        Some(FusionGrouping { groups })
    }

    /// Full validation against a model: partition coverage plus the rule that
    /// a pool never starts a group. The all-singleton (layer-by-layer)
    /// grouping is exempt from the pool rule, as is a pool at layer 0, which
    /// has no producer to fuse with.
    pub fn validate_for(&self, model: &NetworkModel) -> Result<()> {
        if self.layer_count() != model.len() {
            return Err(Error::InvalidGrouping(format!(
                "grouping covers {} layers, model has {}",
                self.layer_count(),
                model.len()
            )));
        }
        if self.is_all_singletons() {
            return Ok(());
        }
        for g in &self.groups[1..] {
            if model.layers[g.start].is_pool() {
                return Err(Error::InvalidGrouping(format!(
                    "pool layer {} ({}) starts a group",
                    g.start, model.layers[g.start].name
                )));
            }
        }
        Ok(())
    }
}

impl Serialize for FusionGrouping {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.groups.len()))?;
        for g in &self.groups {
            seq.serialize_element(&[g.start, g.end])?;
        }
        seq.end()
    }
}

pub fn layer_by_layer(model: &NetworkModel) -> FusionGrouping {
    FusionGrouping {
        groups: (0..model.len()).map(|i| i..i + 1).collect(),
    }
}

/// Groups that close at (and include) each pool layer; layers after the last
/// pool form a final group.
pub fn pool_delimited(model: &NetworkModel) -> FusionGrouping {
    let mut groups: Vec<Range<usize>> = Vec::new();
    let mut start = 0;
    for (i, l) in model.layers.iter().enumerate() {
        if !l.is_pool() {
            continue;
        }
        match groups.last_mut() {
            // back-to-back pools fuse into the group that just closed
            Some(prev) if i == start => prev.end = i + 1,
            _ => groups.push(start..i + 1),
        }
        start = i + 1;
    }
    if start < model.len() {
        groups.push(start..model.len());
    }
    FusionGrouping { groups }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingMode {
    PoolDelimitedOnly,
    AllContiguous,
}

/// Gaps (indices `g` meaning "between layer g-1 and g") that may carry a
/// group boundary: any gap not followed by a pool.
fn free_gaps(model: &NetworkModel) -> Vec<usize> {
    (1..model.len())
        .filter(|&g| !model.layers[g].is_pool())
        .collect()
}

pub fn grouping_count(model: &NetworkModel, mode: GroupingMode) -> u128 {
    match mode {
        GroupingMode::PoolDelimitedOnly => 1,
        GroupingMode::AllContiguous => 1u128
            .checked_shl(free_gaps(model).len() as u32)
            .unwrap_or(u128::MAX),
    }
}

/// Candidate groupings in deterministic order.
///
/// For `AllContiguous`, each candidate corresponds to a bit-vector over the
/// free gaps in layer order (bit set = group boundary); candidates are
/// listed in ascending lexicographic order of that vector, so the first is
/// the fully fused network and the last cuts at every free gap.
pub fn enumerate_groupings(
    model: &NetworkModel,
    mode: GroupingMode,
    cap: u64,
) -> Result<Vec<FusionGrouping>> {
    let count = grouping_count(model, mode);
    if count > cap as u128 {
        return Err(Error::TooManyGroupings { count, cap });
    }
    match mode {
        GroupingMode::PoolDelimitedOnly => Ok(vec![pool_delimited(model)]),
        GroupingMode::AllContiguous => {
            let gaps = free_gaps(model);
            let k = gaps.len();
            let n = model.len();
            Ok((0..count as u64)
                .map(|bits| {
                    let starts: Vec<usize> = gaps
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| bits >> (k - 1 - j) & 1 == 1)
                        .map(|(_, &g)| g)
                        .collect();
                    FusionGrouping::from_starts(&starts, n)
                        .expect("free gaps form a valid partition")
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Requirement {
    GroupInput,
    Weights,
    Intermediate,
    GroupOutput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ResidencyViolation {
    pub group: usize,
    pub layer: usize,
    pub requirement: Requirement,
    pub required_bytes: u64,
    pub available_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Feasibility {
    Feasible,
    Violation(ResidencyViolation),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

/// Checks SRAM residency for every multi-layer group. Singleton groups stream
/// and are always feasible.
pub fn check_feasibility(
    model: &NetworkModel,
    grouping: &FusionGrouping,
    caps: &SramSizes,
) -> Feasibility {
    let bpe = model.bytes_per_element;
    let intermediate_cap = caps.ifm_bytes.min(caps.ofm_bytes);
    for (gi, g) in grouping.groups().iter().enumerate() {
        if g.len() < 2 {
            continue;
        }
        let check = |layer: usize, requirement, required: u64, available: u64| {
            (required > available).then_some(ResidencyViolation {
                group: gi,
                layer,
                requirement,
                required_bytes: required,
                available_bytes: available,
            })
        };
        let first = &model.layers[g.start];
        if let Some(v) = check(
            g.start,
            Requirement::GroupInput,
            first.input_elems() * bpe,
            caps.ifm_bytes,
        ) {
            return Feasibility::Violation(v);
        }
        for li in g.clone() {
            let layer = &model.layers[li];
            let out = layer.output_elems() * bpe;
            let found = check(
                li,
                Requirement::Weights,
                layer.weight_elems() * bpe,
                caps.wb_bytes,
            )
            .or_else(|| {
                if li + 1 < g.end {
                    check(li, Requirement::Intermediate, out, intermediate_cap)
                } else {
                    check(li, Requirement::GroupOutput, out, caps.ofm_bytes)
                }
            });
            if let Some(v) = found {
                return Feasibility::Violation(v);
            }
        }
    }
    Feasibility::Feasible
}
