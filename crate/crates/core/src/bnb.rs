//! Best-first branch-and-bound over products of arcs.
//!
//! Each node carries an arc box, the solution of its segment relaxation, and
//! the unit-modulus point obtained by normalizing the relaxed `c`. The node
//! with the smallest lower bound is expanded by halving the arc on which the
//! relaxed point is farthest from its projection.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{objective, CVector, QuadraticProblem};
use crate::relaxation::{
    solve_segment_relaxation_with, ArcBox, RelaxationOptions, RelaxationSolution,
};

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_NODE_CAP: usize = 200_000;
pub const DEFAULT_TIME_CAP: Duration = Duration::from_secs(600);

/// Absolute pruning margin, in units of the normalized problem.
const PRUNE_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Node {
    pub bx: ArcBox,
    pub relax: RelaxationSolution,
    /// Projection of `relax.c` onto the box.
    pub v_feas: CVector,
    /// `f(v_feas)`.
    pub upper: f64,
    /// Certified lower bound over the box.
    pub lower: f64,
    pub depth: usize,
}

/// Normalizes each `c_i` onto the unit circle and clamps its argument into
/// arc `i`. A zero entry maps to the arc midpoint.
pub fn project_feasible(c: &CVector, bx: &ArcBox) -> CVector {
    CVector::from_iterator(
        c.len(),
        c.iter().enumerate().map(|(i, z)| {
            let phi = if z.norm() > 0.0 && z.re.is_finite() && z.im.is_finite() {
                bx.clamp_angle(i, z.arg())
            } else {
                bx.midpoint(i)
            };
            Complex64::from_polar(1.0, phi)
        }),
    )
}

/// Coordinate to split: largest `|c_i - v_i|` among non-degenerate arcs,
/// smallest index on ties.
pub fn branching_index(node: &Node) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..node.bx.len() {
        if node.bx.is_degenerate(i) {
            continue;
        }
        let d = (node.relax.c[i] - node.v_feas[i]).norm();
        if best.is_none_or(|(_, bd)| d > bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Bisects the arc selected by [`branching_index`].
pub fn branch(node: &Node) -> Result<(ArcBox, ArcBox)> {
    let i = branching_index(node).ok_or(Error::DegenerateBox)?;
    Ok(node.bx.bisect(i))
}

/// Symmetric relative gap `(U - L) / max(|U|, |L|, 1e-12)`.
pub fn relative_gap(upper: f64, lower: f64) -> f64 {
    (upper - lower) / upper.abs().max(lower.abs()).max(1e-12)
}

struct Entry {
    lower: f64,
    seq: u64,
    node: Node,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed so that the max-heap pops the smallest bound, then the oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .lower
            .total_cmp(&self.lower)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Open nodes ordered by lower bound, first-in first-out on ties.
#[derive(Default)]
pub struct OpenSet {
    heap: BinaryHeap<Entry>,
    next_seq: u64,
}

impl OpenSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, node: Node) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry {
            lower: node.lower,
            seq,
            node,
        });
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn min_lower(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.lower)
    }

    /// Removes and returns the node with the smallest lower bound.
    pub fn select_node(&mut self) -> Result<Node> {
        self.heap.pop().map(|e| e.node).ok_or(Error::EmptyOpenSet)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    NodeCap,
    TimeCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub upper: f64,
    pub lower: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(serialize_with = "crate::model::serialize_cvector")]
    pub v_star: CVector,
    pub objective: f64,
    /// Final global lower bound.
    pub lower_bound: f64,
    pub gap: f64,
    pub iterations: usize,
    pub nodes_explored: usize,
    pub max_depth: usize,
    pub trace: Vec<TracePoint>,
    pub wall_time: f64,
    pub status: Termination,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == Termination::Converged
    }
}

#[derive(Debug, Clone)]
pub struct BnbOptions {
    pub eps: f64,
    pub node_cap: usize,
    pub time_cap: Duration,
    pub relaxation: RelaxationOptions,
    /// Solve the two child relaxations of a node on separate threads.
    pub parallel_children: bool,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            node_cap: DEFAULT_NODE_CAP,
            time_cap: DEFAULT_TIME_CAP,
            relaxation: RelaxationOptions::default(),
            parallel_children: false,
        }
    }
}

/// Solves `min v^H R v` over unit-modulus `v` to relative accuracy `eps`.
pub fn solve(
    prob: &QuadraticProblem,
    eps: f64,
    node_cap: usize,
    time_cap: Duration,
) -> Result<SolveReport> {
    solve_with(
        prob,
        &BnbOptions {
            eps,
            node_cap,
            time_cap,
            ..Default::default()
        },
    )
}

fn evaluate(
    prob: &QuadraticProblem,
    bx: ArcBox,
    parent_lower: f64,
    depth: usize,
    opts: &RelaxationOptions,
) -> Result<Node> {
    let relax = match solve_segment_relaxation_with(prob, &bx, opts) {
        Ok(sol) => sol,
        Err(Error::IterationLimit { partial, .. }) => {
            log::debug!("relaxation hit its iteration cap at depth {depth}; using the certified partial bound");
            *partial
        }
        Err(e) => return Err(e),
    };
    let v_feas = project_feasible(&relax.c, &bx);
    let upper = objective(prob, &v_feas)?;
    let lower = relax.certified_bound.max(parent_lower).min(upper);
    Ok(Node {
        bx,
        relax,
        v_feas,
        upper,
        lower,
        depth,
    })
}

pub fn solve_with(prob: &QuadraticProblem, opts: &BnbOptions) -> Result<SolveReport> {
    if !(opts.eps > 0.0) {
        return Err(Error::InvalidInput("eps must be positive".into()));
    }
    let start = Instant::now();
    let norm = prob.scale();
    let scale = if norm > 0.0 { norm } else { 1.0 };
    let scaled = QuadraticProblem {
        r_mat: prob.r_mat.unscale(scale),
        offset: prob.offset / scale,
        m: prob.m,
    };

    let root = evaluate(
        &scaled,
        ArcBox::full(scaled.dim()),
        f64::NEG_INFINITY,
        0,
        &opts.relaxation,
    )?;
    let mut incumbent = root.v_feas.clone();
    let mut upper = root.upper;
    let mut lower = root.lower;
    let mut max_depth = 0;
    let mut nodes_explored = 1;
    let mut iterations = 0;
    let mut trace = vec![TracePoint {
        iteration: 0,
        upper: upper * scale,
        lower: lower * scale,
    }];
    let mut open = OpenSet::new();
    if root.lower < upper - PRUNE_MARGIN {
        open.push(root);
    }

    let status = loop {
        if relative_gap(upper, lower) <= opts.eps {
            break Termination::Converged;
        }
        if nodes_explored >= opts.node_cap {
            break Termination::NodeCap;
        }
        if start.elapsed() >= opts.time_cap {
            break Termination::TimeCap;
        }
        let node = match open.select_node() {
            Ok(node) => node,
            Err(_) => {
                lower = upper;
                continue;
            }
        };
        if node.lower >= upper - PRUNE_MARGIN {
            continue;
        }
        let Ok((left, right)) = branch(&node) else {
            // A single point: its bound is its value, already in the incumbent.
            continue;
        };
        iterations += 1;
        let depth = node.depth + 1;
        let (l, r) = if opts.parallel_children {
            rayon::join(
                || evaluate(&scaled, left, node.lower, depth, &opts.relaxation),
                || evaluate(&scaled, right, node.lower, depth, &opts.relaxation),
            )
        } else {
            (
                evaluate(&scaled, left, node.lower, depth, &opts.relaxation),
                evaluate(&scaled, right, node.lower, depth, &opts.relaxation),
            )
        };
        nodes_explored += 2;
        max_depth = max_depth.max(depth);
        for child in [l?, r?] {
            if child.upper < upper {
                upper = child.upper;
                incumbent = child.v_feas.clone();
            }
            if child.lower < upper - PRUNE_MARGIN {
                open.push(child);
            }
        }
        let open_lower = open.min_lower().unwrap_or(upper).min(upper);
        lower = lower.max(open_lower);
        trace.push(TracePoint {
            iteration: iterations,
            upper: upper * scale,
            lower: lower * scale,
        });
    };

    Ok(SolveReport {
        objective: objective(prob, &incumbent)?,
        v_star: incumbent,
        lower_bound: lower * scale,
        gap: relative_gap(upper, lower).max(0.0),
        iterations,
        nodes_explored,
        max_depth,
        trace,
        wall_time: start.elapsed().as_secs_f64(),
        status,
    })
}
