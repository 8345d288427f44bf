//! Two-objective Pareto machinery: dominance, nondominated filtering, the
//! archive of evaluated nondominated points, and the adaptive hypercube grid
//! used to pick leaders.
//!
//! Both objectives are minimized. Leader selection follows the MOPSO scheme:
//! the bounding box of the objectives is split into `divisions x divisions`
//! cells, each occupied cell gets fitness `10 / occupancy`, a cell is drawn by
//! roulette wheel, then a member of that cell is drawn uniformly.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fitness numerator of an occupied cell. Cancels in the roulette
/// normalization; kept for parity with the MOPSO formulation.
pub const CELL_FITNESS: f64 = 10.0;

/// Default grid resolution per objective.
pub const DEFAULT_DIVISIONS: usize = 10;

/// `f1` is energy-like, `f2` RMSD-like in the docking use case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePair {
    pub f1: f64,
    pub f2: f64,
}

impl ObjectivePair {
    pub const fn new(f1: f64, f2: f64) -> Self {
        Self { f1, f2 }
    }

    pub fn is_finite(&self) -> bool {
        self.f1.is_finite() && self.f2.is_finite()
    }

    pub fn dominates(&self, other: &ObjectivePair) -> bool {
        dominates(self, other)
    }
}

impl From<(f64, f64)> for ObjectivePair {
    fn from((f1, f2): (f64, f64)) -> Self {
        Self { f1, f2 }
    }
}

/// `a` is no worse than `b` in both objectives and strictly better in one.
#[inline]
pub fn dominates(a: &ObjectivePair, b: &ObjectivePair) -> bool {
    a.f1 <= b.f1 && a.f2 <= b.f2 && (a.f1 < b.f1 || a.f2 < b.f2)
}

/// Indices of the nondominated entries of `ys`, ascending. Exact duplicates
/// of a nondominated pair are all kept. Returns `None` for empty input.
pub fn pareto_front(ys: &[ObjectivePair]) -> Option<Vec<usize>> {
    if ys.is_empty() {
        return None;
    }
    let mut order: Vec<usize> = (0..ys.len()).collect();
    order.sort_by(|&i, &j| {
        ys[i].f1
            .total_cmp(&ys[j].f1)
            .then(ys[i].f2.total_cmp(&ys[j].f2))
    });

    // Sweep groups of equal f1. Inside a group only the minimal f2 can
    // survive, and it survives iff every strictly-smaller f1 seen so far has
    // a strictly larger f2.
    let mut front = Vec::new();
    let mut best_f2 = f64::INFINITY;
    let mut start = 0;
    while start < order.len() {
        let f1 = ys[order[start]].f1;
        let mut end = start;
        while end < order.len() && ys[order[end]].f1 == f1 {
            end += 1;
        }
        let group_min = ys[order[start]].f2;
        if group_min < best_f2 {
            front.extend(
                order[start..end]
                    .iter()
                    .copied()
                    .filter(|&i| ys[i].f2 == group_min),
            );
            best_f2 = group_min;
        }
        start = end;
    }
    front.sort_unstable();
    Some(front)
}

/// Hypervolume (area) dominated by `points` and bounded by `reference`.
/// Points not strictly better than the reference in both objectives
/// contribute nothing.
pub fn hypervolume(points: &[ObjectivePair], reference: ObjectivePair) -> f64 {
    let inside: Vec<ObjectivePair> = points
        .iter()
        .copied()
        .filter(|p| p.f1 < reference.f1 && p.f2 < reference.f2)
        .collect();
    let Some(front) = pareto_front(&inside) else {
        return 0.0;
    };
    let mut pts: Vec<ObjectivePair> = front.into_iter().map(|i| inside[i]).collect();
    pts.sort_by(|a, b| a.f1.total_cmp(&b.f1));
    let mut area = 0.0;
    for (k, p) in pts.iter().enumerate() {
        let next_f1 = pts.get(k + 1).map_or(reference.f1, |q| q.f1);
        area += (next_f1 - p.f1) * (reference.f2 - p.f2);
    }
    area
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    /// Unit-cube coordinates of the evaluated point.
    pub point: Vec<f64>,
    pub objectives: ObjectivePair,
    /// Position of the evaluation in the run history.
    pub eval_index: usize,
}

/// Mutually nondominated set of truly evaluated points. Unbounded.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParetoArchive {
    entries: Vec<ArchiveEntry>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts the candidate unless an archived entry dominates it; entries
    /// the candidate dominates are evicted. Returns whether it was added.
    pub fn insert(&mut self, point: Vec<f64>, objectives: ObjectivePair, eval_index: usize) -> bool {
        if self
            .entries
            .iter()
            .any(|e| dominates(&e.objectives, &objectives))
        {
            return false;
        }
        self.entries
            .retain(|e| !dominates(&objectives, &e.objectives));
        self.entries.push(ArchiveEntry {
            point,
            objectives,
            eval_index,
        });
        true
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn objectives(&self) -> Vec<ObjectivePair> {
        self.entries.iter().map(|e| e.objectives).collect()
    }

    /// True when no entry dominates another.
    pub fn is_mutually_nondominated(&self) -> bool {
        self.entries.iter().all(|a| {
            self.entries
                .iter()
                .all(|b| !dominates(&a.objectives, &b.objectives))
        })
    }

    pub fn build_grid(&self, divisions: usize) -> Grid {
        Grid::build(&self.objectives(), divisions)
    }

    /// Draws the leader (`x_best`) via hypercube roulette over `grid`, which
    /// must have been built from this archive.
    pub fn select_leader<R: Rng + ?Sized>(&self, grid: &Grid, rng: &mut R) -> Option<&ArchiveEntry> {
        grid.select(rng).map(|i| &self.entries[i])
    }
}

/// Cell coordinates `(f1 bin, f2 bin)`.
pub type Cell = (usize, usize);

/// Adaptive hypercube grid over a set of objective pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    divisions: usize,
    f1_bounds: (f64, f64),
    f2_bounds: (f64, f64),
    cells: Vec<Cell>,
    members: BTreeMap<Cell, Vec<usize>>,
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn bin(value: f64, (lo, hi): (f64, f64), divisions: usize) -> usize {
    // degenerate axis collapses to one cell
    if hi <= lo {
        return 0;
    }
    let k = ((value - lo) / (hi - lo) * divisions as f64).floor();
    (k.max(0.0) as usize).min(divisions - 1)
}

impl Grid {
    /// Splits the bounding box of `objectives` into `divisions` bins per
    /// objective. Points on the upper edge land in the last bin.
    ///
    /// Panics if `divisions` is zero.
    pub fn build(objectives: &[ObjectivePair], divisions: usize) -> Self {
        assert!(divisions > 0, "grid needs at least one division");
        let f1_bounds = bounds(objectives.iter().map(|o| o.f1));
        let f2_bounds = bounds(objectives.iter().map(|o| o.f2));
        let cells: Vec<Cell> = objectives
            .iter()
            .map(|o| (bin(o.f1, f1_bounds, divisions), bin(o.f2, f2_bounds, divisions)))
            .collect();
        let mut members: BTreeMap<Cell, Vec<usize>> = BTreeMap::new();
        for (i, &c) in cells.iter().enumerate() {
            members.entry(c).or_default().push(i);
        }
        Self {
            divisions,
            f1_bounds,
            f2_bounds,
            cells,
            members,
        }
    }

    pub fn divisions(&self) -> usize {
        self.divisions
    }

    pub fn f1_bounds(&self) -> (f64, f64) {
        self.f1_bounds
    }

    pub fn f2_bounds(&self) -> (f64, f64) {
        self.f2_bounds
    }

    /// Cell of the `i`-th input pair.
    pub fn cell_of(&self, i: usize) -> Cell {
        self.cells[i]
    }

    /// Occupied cells and their counts, in cell order.
    pub fn occupancy(&self) -> BTreeMap<Cell, usize> {
        self.members.iter().map(|(&c, m)| (c, m.len())).collect()
    }

    pub fn members(&self, cell: Cell) -> &[usize] {
        self.members.get(&cell).map_or(&[], Vec::as_slice)
    }

    /// Exact probability that [`Grid::select`] returns input `i`.
    pub fn selection_probability(&self, i: usize) -> f64 {
        let total: f64 = self
            .members
            .values()
            .map(|m| CELL_FITNESS / m.len() as f64)
            .sum();
        let occ = self.members[&self.cells[i]].len() as f64;
        (CELL_FITNESS / occ) / total / occ
    }

    /// Roulette wheel over occupied cells weighted by `10 / occupancy`, then
    /// a uniform member of the drawn cell. Returns an index into the pairs
    /// the grid was built from, or `None` if the grid is empty.
    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        if self.members.is_empty() {
            return None;
        }
        let total: f64 = self
            .members
            .values()
            .map(|m| CELL_FITNESS / m.len() as f64)
            .sum();
        let spin = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = self.members.values().next_back().expect("nonempty");
        for m in self.members.values() {
            acc += CELL_FITNESS / m.len() as f64;
            if spin < acc {
                chosen = m;
                break;
            }
        }
        Some(chosen[rng.random_range(0..chosen.len())])
    }
}
