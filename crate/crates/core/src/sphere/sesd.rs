//! Schnorr–Euchner sphere decoding over a finite label box.

use super::subproblem::SubproblemInstance;

#[derive(Debug, Clone, PartialEq)]
pub struct SphereSolution {
    /// Minimizing labels, interleaved real coordinates.
    pub a: Vec<f64>,
    /// Label indices of `a`.
    pub indices: Vec<usize>,
    /// `‖e − R a‖²`.
    pub objective: f64,
    /// Candidate evaluations across all tree levels.
    pub nodes_visited: u64,
    /// Label indices of the first leaf reached.
    pub first_leaf: Vec<usize>,
}

/// Nearest label index to `x`; exact midpoints go to the lower index.
fn nearest_label(labels: &[f64], x: f64) -> usize {
    let upper = labels.partition_point(|&l| l < x);
    if upper == 0 {
        0
    } else if upper == labels.len() {
        labels.len() - 1
    } else if labels[upper] - x < x - labels[upper - 1] {
        upper
    } else {
        upper - 1
    }
}

/// Per-level zig-zag state: candidates come out in order of increasing
/// distance from the level's center, restricted to the label box.
#[derive(Debug, Clone, Copy, Default)]
struct Level {
    center: f64,
    /// Next untried index below the start (may be −1) and above it.
    below: isize,
    above: usize,
    started: bool,
    start: usize,
}

impl Level {
    #[inline]
    fn reset(&mut self, labels: &[f64], center: f64) {
        let z = nearest_label(labels, center);
        *self = Level {
            center,
            below: z as isize - 1,
            above: z + 1,
            started: false,
            start: z,
        };
    }

    #[inline]
    fn next(&mut self, labels: &[f64]) -> Option<usize> {
        if !self.started {
            self.started = true;
            return Some(self.start);
        }
        let has_lo = self.below >= 0;
        let has_hi = self.above < labels.len();
        let take_lo = match (has_lo, has_hi) {
            // ties prefer the lower label
            (true, true) => {
                labels[self.above] - self.center >= self.center - labels[self.below as usize]
            }
            (true, false) => true,
            (false, true) => false,
            (false, false) => return None,
        };
        if take_lo {
            let z = self.below as usize;
            self.below -= 1;
            Some(z)
        } else {
            let z = self.above;
            self.above += 1;
            Some(z)
        }
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

struct Outcome {
    best_idx: Option<Vec<usize>>,
    first_leaf: Option<Vec<usize>>,
    nodes: u64,
    complete: bool,
}

fn search(inst: &SubproblemInstance, initial_radius_sq: f64, max_nodes: u64) -> Outcome {
    let n = inst.dim();
    let labels = &inst.labels[..];
    let diag: Vec<f64> = (0..n).map(|i| inst.r(i, i)).collect();
    let mut levels = vec![Level::default(); n];
    let mut idx = vec![0usize; n];
    let mut a = vec![0.0f64; n];
    // partial[m] = distance accumulated over levels m..n; partial[n] = 0
    let mut partial = vec![0.0f64; n + 1];

    let mut best = initial_radius_sq;
    let mut best_idx: Option<Vec<usize>> = None;
    let mut first_leaf: Option<Vec<usize>> = None;
    let mut nodes = 0u64;

    let center_at = |m: usize, a: &[f64]| -> f64 {
        (inst.e[m] - dot(inst.r_row_tail(m), &a[m + 1..])) / diag[m]
    };

    let mut m = n - 1;
    levels[m].reset(labels, center_at(m, &a));
    loop {
        let mut descended = false;
        if let Some(z) = levels[m].next(labels) {
            nodes += 1;
            if nodes > max_nodes {
                return Outcome {
                    best_idx,
                    first_leaf,
                    nodes,
                    complete: false,
                };
            }
            let diff = diag[m] * (levels[m].center - labels[z]);
            let d = partial[m + 1] + diff * diff;
            if d < best {
                idx[m] = z;
                a[m] = labels[z];
                if m == 0 {
                    best = d;
                    match &mut best_idx {
                        Some(b) => b.copy_from_slice(&idx),
                        None => best_idx = Some(idx.clone()),
                    }
                    if first_leaf.is_none() {
                        first_leaf = Some(idx.clone());
                    }
                    // remaining siblings are farther from the center
                } else {
                    partial[m] = d;
                    m -= 1;
                    let c = center_at(m, &a);
                    levels[m].reset(labels, c);
                    descended = true;
                }
            }
        }
        if !descended {
            if m == n - 1 {
                break;
            }
            m += 1;
        }
    }
    Outcome {
        best_idx,
        first_leaf,
        nodes,
        complete: true,
    }
}

fn solution(
    inst: &SubproblemInstance,
    indices: Vec<usize>,
    nodes: u64,
    first_leaf: Option<Vec<usize>>,
) -> SphereSolution {
    let a: Vec<f64> = indices.iter().map(|&z| inst.labels[z]).collect();
    SphereSolution {
        objective: inst.residual(&a),
        a,
        indices,
        nodes_visited: nodes,
        first_leaf: first_leaf.unwrap_or_default(),
    }
}

/// Global minimizer of `‖e − R a‖²` over `a ∈ 𝓛^{2M}`.
///
/// Depth-first from the last coordinate; children are visited in zig-zag
/// order around the decision-feedback center, and a level is abandoned as
/// soon as its partial distance reaches the best radius. `initial_radius_sq`
/// is a squared radius (`f64::INFINITY` for none). If no lattice point lies
/// strictly inside a finite initial radius the search is rerun without one.
pub fn sesd_solve(inst: &SubproblemInstance, initial_radius_sq: f64) -> SphereSolution {
    match sesd_solve_capped(inst, initial_radius_sq, u64::MAX) {
        Capped::Complete(sol) => sol,
        Capped::Incomplete { .. } => unreachable!("uncapped search always completes"),
    }
}

/// Result of a node-limited search.
#[derive(Debug, Clone, PartialEq)]
pub enum Capped {
    Complete(SphereSolution),
    /// The budget ran out; `best` is the best leaf seen (if any).
    Incomplete {
        best: Option<Vec<usize>>,
        nodes: u64,
    },
}

/// [`sesd_solve`] that gives up after `max_nodes` candidate evaluations.
/// A completed search returns exactly what [`sesd_solve`] returns for any
/// radius above the optimum.
pub fn sesd_solve_capped(
    inst: &SubproblemInstance,
    initial_radius_sq: f64,
    max_nodes: u64,
) -> Capped {
    let out = search(inst, initial_radius_sq, max_nodes);
    if !out.complete {
        return Capped::Incomplete {
            best: out.best_idx,
            nodes: out.nodes,
        };
    }
    match out.best_idx {
        Some(indices) => Capped::Complete(solution(inst, indices, out.nodes, out.first_leaf)),
        None if initial_radius_sq.is_finite() => {
            match sesd_solve_capped(inst, f64::INFINITY, max_nodes.saturating_sub(out.nodes)) {
                Capped::Complete(mut sol) => {
                    sol.nodes_visited += out.nodes;
                    Capped::Complete(sol)
                }
                Capped::Incomplete { best, nodes } => Capped::Incomplete {
                    best,
                    nodes: nodes + out.nodes,
                },
            }
        }
        None => unreachable!("an unbounded search reaches a leaf"),
    }
}

/// Nulling-and-cancelling point: nearest label at each level with decision
/// feedback, clipped to the label box.
pub fn babai_point(inst: &SubproblemInstance) -> Vec<usize> {
    let n = inst.dim();
    let mut a = vec![0.0; n];
    let mut idx = vec![0; n];
    for m in (0..n).rev() {
        let tail: f64 = (m + 1..n).map(|j| inst.r(m, j) * a[j]).sum();
        let z = nearest_label(&inst.labels, (inst.e[m] - tail) / inst.r(m, m));
        idx[m] = z;
        a[m] = inst.labels[z];
    }
    idx
}
