//! View-subset partitioning and coding order.
//!
//! Two prediction patterns are built in:
//!
//! * `H2` (hierarchical): a checkerboard over the angular grid, the central
//!   view's parity forming Subset 1. Derived programmatically.
//! * `C2` (circular): loaded from a bundled pattern file. The shipped layouts
//!   alternate concentric rings between the subsets and are marked
//!   non-authoritative.
//!
//! Pattern files are JSON:
//!
//! ```json
//! { "kind": "c2", "rows": 3, "cols": 3, "authoritative": false,
//!   "cells": ["1 1 1", "1 2 1", "1 1 1"],
//!   "order1": [[0, 0], [-1, -1]] }
//! ```
//!
//! `order1`/`order2` are optional; when absent the spiral order is used.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lightfield::{AngularGrid, LightField, View, ViewCoord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    #[serde(rename = "c2")]
    Circular2,
    #[serde(rename = "h2")]
    Hierarchical2,
    Custom,
}

impl PatternKind {
    /// Identifier stored in the container header.
    pub fn id(self) -> u8 {
        match self {
            PatternKind::Circular2 => 0,
            PatternKind::Hierarchical2 => 1,
            PatternKind::Custom => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(PatternKind::Circular2),
            1 => Some(PatternKind::Hierarchical2),
            2 => Some(PatternKind::Custom),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PatternKind::Circular2 => "C2",
            PatternKind::Hierarchical2 => "H2",
            PatternKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubsetLabel {
    Subset1,
    Subset2,
}

/// Subset membership plus the coding order of each subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionPattern {
    kind: PatternKind,
    grid: AngularGrid,
    membership: Vec<SubsetLabel>,
    order1: Vec<ViewCoord>,
    order2: Vec<ViewCoord>,
}

static BUNDLED_C2: &[(usize, &str)] = &[
    (3, include_str!("../patterns/c2_3x3.json")),
    (5, include_str!("../patterns/c2_5x5.json")),
    (7, include_str!("../patterns/c2_7x7.json")),
    (9, include_str!("../patterns/c2_9x9.json")),
    (11, include_str!("../patterns/c2_11x11.json")),
    (13, include_str!("../patterns/c2_13x13.json")),
    (15, include_str!("../patterns/c2_15x15.json")),
];

impl PredictionPattern {
    /// Builds a pattern from an explicit membership map (raster order). Orders
    /// default to the spiral order of each subset.
    pub fn new(kind: PatternKind, grid: AngularGrid, membership: Vec<SubsetLabel>) -> Result<Self> {
        Self::with_orders(kind, grid, membership, None, None)
    }

    pub fn with_orders(
        kind: PatternKind,
        grid: AngularGrid,
        membership: Vec<SubsetLabel>,
        order1: Option<Vec<ViewCoord>>,
        order2: Option<Vec<ViewCoord>>,
    ) -> Result<Self> {
        if membership.len() != grid.len() {
            return Err(Error::BadPattern(format!(
                "{} membership labels for a {}-view grid",
                membership.len(),
                grid.len()
            )));
        }
        let members = |label| -> Vec<ViewCoord> {
            grid.coords().zip(&membership).filter(|(_, &l)| l == label).map(|(c, _)| c).collect()
        };
        let m1 = members(SubsetLabel::Subset1);
        let m2 = members(SubsetLabel::Subset2);
        if m1.is_empty() {
            return Err(Error::BadPattern("subset 1 is empty".into()));
        }
        let order1 = match order1 {
            Some(o) => validate_order(&o, &m1, "order1").map(|_| o)?,
            None => spiral_order(&m1),
        };
        let order2 = match order2 {
            Some(o) => validate_order(&o, &m2, "order2").map(|_| o)?,
            None => spiral_order(&m2),
        };
        Ok(Self { kind, grid, membership, order1, order2 })
    }

    /// Alternate-view checkerboard; the central view belongs to Subset 1.
    pub fn hierarchical2(grid: AngularGrid) -> Self {
        let membership = grid
            .coords()
            .map(|c| if (c.s + c.t).rem_euclid(2) == 0 { SubsetLabel::Subset1 } else { SubsetLabel::Subset2 })
            .collect();
        Self::new(PatternKind::Hierarchical2, grid, membership).expect("checkerboard is a valid partition")
    }

    /// Bundled circular pattern for square grids of side 3..=15.
    pub fn circular2(grid: AngularGrid) -> Result<Self> {
        let side = grid.rows();
        if grid.rows() != grid.cols() {
            return Err(Error::BadPattern(format!(
                "no bundled C2 layout for a {}x{} grid",
                grid.rows(),
                grid.cols()
            )));
        }
        let text = BUNDLED_C2
            .iter()
            .find(|(n, _)| *n == side)
            .map(|(_, t)| *t)
            .ok_or_else(|| Error::BadPattern(format!("no bundled C2 layout for a {side}x{side} grid")))?;
        Self::from_json(text)
    }

    /// Resolves a built-in pattern by kind.
    pub fn builtin(kind: PatternKind, grid: AngularGrid) -> Result<Self> {
        match kind {
            PatternKind::Circular2 => Self::circular2(grid),
            PatternKind::Hierarchical2 => Ok(Self::hierarchical2(grid)),
            PatternKind::Custom => Err(Error::BadPattern("custom patterns must be loaded from a file".into())),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PatternFile = serde_json::from_str(text)?;
        file.into_pattern()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let file = PatternFile {
            kind: self.kind,
            rows: self.grid.rows(),
            cols: self.grid.cols(),
            authoritative: None,
            note: None,
            cells: (0..self.grid.rows())
                .map(|r| {
                    (0..self.grid.cols())
                        .map(|c| match self.membership[r * self.grid.cols() + c] {
                            SubsetLabel::Subset1 => "1",
                            SubsetLabel::Subset2 => "2",
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect(),
            order1: Some(self.order1.iter().map(|c| [c.s, c.t]).collect()),
            order2: Some(self.order2.iter().map(|c| [c.s, c.t]).collect()),
        };
        serde_json::to_string_pretty(&file).expect("pattern serializes")
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn grid(&self) -> AngularGrid {
        self.grid
    }

    pub fn label(&self, c: ViewCoord) -> Option<SubsetLabel> {
        self.grid.index(c).map(|i| self.membership[i])
    }

    pub fn membership(&self) -> &[SubsetLabel] {
        &self.membership
    }

    pub fn order1(&self) -> &[ViewCoord] {
        &self.order1
    }

    pub fn order2(&self) -> &[ViewCoord] {
        &self.order2
    }

    pub fn order(&self, label: SubsetLabel) -> &[ViewCoord] {
        match label {
            SubsetLabel::Subset1 => &self.order1,
            SubsetLabel::Subset2 => &self.order2,
        }
    }
}

fn validate_order(order: &[ViewCoord], members: &[ViewCoord], name: &str) -> Result<()> {
    let mut sorted = order.to_vec();
    sorted.sort();
    let mut expected = members.to_vec();
    expected.sort();
    if sorted != expected {
        return Err(Error::BadPattern(format!("{name} does not enumerate every subset member exactly once")));
    }
    if let Some(&first) = order.first() {
        let best = members.iter().map(|c| c.ring()).min().unwrap_or(0);
        if first.ring() != best {
            return Err(Error::BadPattern(format!("{name} must begin at the member nearest the grid center")));
        }
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct PatternFile {
    kind: PatternKind,
    rows: usize,
    cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    authoritative: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    cells: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order1: Option<Vec<[i32; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order2: Option<Vec<[i32; 2]>>,
}

impl PatternFile {
    fn into_pattern(self) -> Result<PredictionPattern> {
        let grid = AngularGrid::from_dims(self.rows, self.cols)
            .map_err(|e| Error::BadPattern(e.to_string()))?;
        if self.cells.len() != self.rows {
            return Err(Error::BadPattern(format!("{} cell rows, expected {}", self.cells.len(), self.rows)));
        }
        let mut membership = Vec::with_capacity(grid.len());
        for (r, line) in self.cells.iter().enumerate() {
            let labels: Vec<&str> = line.split_whitespace().collect();
            if labels.len() != self.cols {
                return Err(Error::BadPattern(format!("row {r} has {} cells, expected {}", labels.len(), self.cols)));
            }
            for l in labels {
                membership.push(match l {
                    "1" => SubsetLabel::Subset1,
                    "2" => SubsetLabel::Subset2,
                    other => return Err(Error::BadPattern(format!("unknown subset label `{other}`"))),
                });
            }
        }
        let conv = |o: Option<Vec<[i32; 2]>>| o.map(|v| v.into_iter().map(|[s, t]| ViewCoord::new(s, t)).collect());
        PredictionPattern::with_orders(self.kind, grid, membership, conv(self.order1), conv(self.order2))
    }
}

/// Position of `c` when walking its ring clockwise from the top-left corner.
fn clockwise_position(c: ViewCoord) -> i32 {
    let r = c.ring();
    if r == 0 {
        0
    } else if c.s == -r {
        c.t + r
    } else if c.t == r {
        2 * r + (c.s + r)
    } else if c.s == r {
        4 * r + (r - c.t)
    } else {
        6 * r + (r - c.s)
    }
}

/// Center-out spiral over a set of grid coordinates.
///
/// The first element is the member closest (Chebyshev) to `(0, 0)`, ties
/// broken by smaller `s` then smaller `t`. Members are then visited ring by
/// ring; within a ring the walk is clockwise starting at the top-most,
/// left-most cell. The innermost ring is rotated to start at the first
/// element.
pub fn spiral_order(members: &[ViewCoord]) -> Vec<ViewCoord> {
    let mut out = members.to_vec();
    out.sort_by_key(|&c| (c.ring(), clockwise_position(c)));
    out.dedup();
    let Some(first) = out.iter().copied().min_by_key(|c| (c.ring(), c.s, c.t)) else {
        return out;
    };
    let inner = out.iter().take_while(|c| c.ring() == first.ring()).count();
    let start = out.iter().position(|&c| c == first).expect("first is a member");
    out[..inner].rotate_left(start);
    out
}

/// Ordered list of views forming one subset of a light field.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSubset {
    grid: AngularGrid,
    height: usize,
    width: usize,
    entries: Vec<(ViewCoord, View)>,
}

impl ViewSubset {
    pub fn new(grid: AngularGrid, entries: Vec<(ViewCoord, View)>) -> Result<Self> {
        let (height, width) = entries.first().map(|(_, v)| v.dims()).unwrap_or((0, 0));
        let mut seen = std::collections::HashSet::new();
        for (c, v) in &entries {
            if !grid.contains(*c) {
                return Err(Error::DimensionMismatch(format!("view {c} outside the parent grid")));
            }
            if !seen.insert(*c) {
                return Err(Error::BadPattern(format!("duplicate view {c} in subset")));
            }
            if v.dims() != (height, width) {
                return Err(Error::DimensionMismatch(format!("view {c} has different spatial size")));
            }
        }
        Ok(Self { grid, height, width, entries })
    }

    pub fn grid(&self) -> AngularGrid {
        self.grid
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn coords(&self) -> Vec<ViewCoord> {
        self.entries.iter().map(|(c, _)| *c).collect()
    }

    pub fn views(&self) -> impl Iterator<Item = &View> {
        self.entries.iter().map(|(_, v)| v)
    }

    pub fn entries(&self) -> &[(ViewCoord, View)] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<(ViewCoord, View)> {
        self.entries
    }

    /// Largest `|s|` and `|t|` among the members.
    pub fn max_offsets(&self) -> (usize, usize) {
        self.entries.iter().fold((0, 0), |(s, t), (c, _)| {
            (s.max(c.s.unsigned_abs() as usize), t.max(c.t.unsigned_abs() as usize))
        })
    }
}

/// Splits a light field into the two subsets of `pattern`, each in coding order.
pub fn partition_views(lf: &LightField, pattern: &PredictionPattern) -> Result<(ViewSubset, ViewSubset)> {
    if lf.grid() != pattern.grid() {
        return Err(Error::DimensionMismatch(format!(
            "pattern grid {}x{} vs light field grid {}x{}",
            pattern.grid().rows(),
            pattern.grid().cols(),
            lf.grid().rows(),
            lf.grid().cols()
        )));
    }
    let take = |order: &[ViewCoord]| {
        let entries = order.iter().map(|&c| (c, lf.view(c).expect("pattern coords lie on the grid").clone())).collect();
        ViewSubset::new(lf.grid(), entries)
    };
    Ok((take(pattern.order1())?, take(pattern.order2())?))
}

/// Reassembles a light field from two subsets covering the grid.
pub fn merge_subsets(a: &ViewSubset, b: &ViewSubset) -> Result<LightField> {
    let grid = a.grid();
    let mut slots: Vec<Option<View>> = vec![None; grid.len()];
    for (c, v) in a.entries().iter().chain(b.entries()) {
        let i = grid.index(*c).ok_or_else(|| Error::DimensionMismatch(format!("view {c} outside grid")))?;
        slots[i] = Some(v.clone());
    }
    let mut views = Vec::with_capacity(grid.len());
    for (i, slot) in slots.into_iter().enumerate() {
        let c = grid.coord(i);
        views.push(slot.ok_or(Error::MissingView { s: c.s, t: c.t })?);
    }
    LightField::new(grid, views)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: i32, t: i32) -> ViewCoord {
        ViewCoord::new(s, t)
    }

    #[test]
    fn spiral_full_3x3() {
        let g = AngularGrid::new(1, 1);
        let all: Vec<_> = g.coords().collect();
        let order = spiral_order(&all);
        assert_eq!(
            order,
            vec![c(0, 0), c(-1, -1), c(-1, 0), c(-1, 1), c(0, 1), c(1, 1), c(1, 0), c(1, -1), c(0, -1)]
        );
    }

    #[test]
    fn spiral_single_member() {
        assert_eq!(spiral_order(&[c(2, 2)]), vec![c(2, 2)]);
    }

    #[test]
    fn spiral_rotates_inner_ring_to_tie_break() {
        // Ring 1 without the top row: the tie-break picks (0,-1) and the walk
        // wraps around the ring from there.
        let order = spiral_order(&[c(0, 1), c(1, 0), c(0, -1)]);
        assert_eq!(order, vec![c(0, -1), c(0, 1), c(1, 0)]);
    }

    #[test]
    fn h2_counts() {
        let p = PredictionPattern::hierarchical2(AngularGrid::new(4, 4));
        assert_eq!(p.order1().len(), 41);
        assert_eq!(p.order2().len(), 40);
        assert_eq!(p.order1()[0], ViewCoord::CENTER);

        let p3 = PredictionPattern::hierarchical2(AngularGrid::new(1, 1));
        let mut s1 = p3.order1().to_vec();
        s1.sort();
        assert_eq!(s1, vec![c(-1, -1), c(-1, 1), c(0, 0), c(1, -1), c(1, 1)]);
        let mut s2 = p3.order2().to_vec();
        s2.sort();
        assert_eq!(s2, vec![c(-1, 0), c(0, -1), c(0, 1), c(1, 0)]);
    }

    #[test]
    fn bundled_c2_is_a_partition() {
        for side in (3..=15).step_by(2) {
            let g = AngularGrid::from_dims(side, side).unwrap();
            let p = PredictionPattern::circular2(g).unwrap();
            assert_eq!(p.order1().len() + p.order2().len(), side * side);
            assert_eq!(p.kind(), PatternKind::Circular2);
        }
        assert!(PredictionPattern::circular2(AngularGrid::new(1, 2)).is_err());
    }

    #[test]
    fn pattern_json_round_trip() {
        let p = PredictionPattern::hierarchical2(AngularGrid::new(2, 2));
        let q = PredictionPattern::from_json(&p.to_json()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn explicit_order_must_cover_members() {
        let text = r#"{"kind":"custom","rows":3,"cols":3,"cells":["1 2 1","2 1 2","1 2 1"],
                       "order1":[[0,0],[-1,-1]]}"#;
        assert!(matches!(PredictionPattern::from_json(text), Err(Error::BadPattern(_))));
        let text = r#"{"kind":"custom","rows":3,"cols":3,"cells":["1 2 1","2 1 2","1 2 1"],
                       "order1":[[-1,-1],[0,0],[-1,1],[1,1],[1,-1]]}"#;
        assert!(matches!(PredictionPattern::from_json(text), Err(Error::BadPattern(_))));
        let text = r#"{"kind":"custom","rows":3,"cols":3,"cells":["1 2 1","2 1 2","1 2 1"],
                       "order1":[[0,0],[1,1],[-1,-1],[-1,1],[1,-1]]}"#;
        let p = PredictionPattern::from_json(text).unwrap();
        assert_eq!(p.order1()[1], c(1, 1));
    }

    #[test]
    fn partition_dimension_mismatch() {
        let lf = LightField::from_fn(AngularGrid::new(1, 1), |_| View::new(2, 2)).unwrap();
        let p = PredictionPattern::hierarchical2(AngularGrid::new(2, 2));
        assert!(matches!(partition_views(&lf, &p), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn partition_then_merge() {
        let g = AngularGrid::new(2, 2);
        let lf = LightField::from_fn(g, |c| View::filled(2, 3, (c.s * 10 + c.t) as f64)).unwrap();
        let p = PredictionPattern::circular2(g).unwrap();
        let (a, b) = partition_views(&lf, &p).unwrap();
        assert_eq!(a.coords(), p.order1());
        assert_eq!(merge_subsets(&a, &b).unwrap(), lf);
    }
}
