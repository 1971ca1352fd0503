//! Best-first branch and bound over the binary offloading decisions.
//!
//! With the offloading set `O` fixed, the optimal edge split gives a total
//! edge-delay cost of `(sum_{i in O} s_i)^2` with `s_i = sqrt(w_time C_i / F)`.
//! A node fixes some vehicles to local (`F0`) or offload (`F1`) and leaves the
//! rest free (`U`). With `a = sum_{F1} s_i`, every completion costs at least
//!
//! ```text
//! sum_{F0} L_i + sum_{F1} T_i + a^2 + sum_{u in U} min(L_u, T_u + 2 a s_u + s_u^2)
//! ```
//!
//! because `(a + b)^2 >= a^2 + sum_u (2 a s_u + s_u^2)` for the free
//! offloaders' share `b`. The free-vehicle offload term equals the vehicle's
//! offload cost at allocation `s_u / (2a + s_u)`, its marginal share of the
//! remaining budget. The bound is exact at leaves and never decreases along
//! a branch.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::{evaluate_decision, BranchingRule, SbbConfig, SolveReport};
use crate::error::Result;
use crate::system::{
    decision_index, local_cost_unchecked, transmission_cost, uplink_rate, OffloadInstance,
    OffloadSolution,
};

/// Search events, reported in the order they happen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SbbEvent {
    /// A node was taken off the queue.
    Expanded {
        depth: usize,
        bound: f64,
        parent_bound: Option<f64>,
    },
    /// The incumbent improved.
    Incumbent { cost: f64 },
}

pub fn solve_sbb(inst: &OffloadInstance, cfg: &SbbConfig) -> Result<SolveReport> {
    solve_sbb_observed(inst, cfg, |_| {})
}

pub fn solve_sbb_observed(
    inst: &OffloadInstance,
    cfg: &SbbConfig,
    mut observe: impl FnMut(SbbEvent),
) -> Result<SolveReport> {
    let start = Instant::now();
    cfg.validate()?;
    inst.validate()?;
    let terms = Terms::new(inst)?;
    let n = terms.n;

    let root = Node {
        bound: terms.bound(0, 0),
        depth: 0,
        fixed: 0,
        ones: 0,
        parent_bound: None,
        seq: 0,
    };
    let mut incumbent = evaluate_decision(inst, &terms.greedy_completion(0, 0))?;
    observe(SbbEvent::Incumbent {
        cost: incumbent.cost,
    });

    let mut heap = BinaryHeap::new();
    heap.push(root);
    let mut seq = 1u64;
    let mut nodes = 0usize;
    let mut proven = false;

    loop {
        let Some(node) = heap.peek() else {
            proven = true;
            break;
        };
        if incumbent.cost - node.bound <= cfg.gap_tolerance * incumbent.cost.abs() {
            proven = true;
            break;
        }
        if nodes >= cfg.max_nodes {
            break;
        }
        let node = heap.pop().expect("peeked");
        nodes += 1;
        observe(SbbEvent::Expanded {
            depth: node.depth,
            bound: node.bound,
            parent_bound: node.parent_bound,
        });

        if node.depth == n {
            let candidate = evaluate_decision(inst, &terms.decisions(node.ones))?;
            improve(&mut incumbent, candidate, &mut observe);
            continue;
        }

        let greedy = evaluate_decision(inst, &terms.greedy_completion(node.fixed, node.ones))?;
        improve(&mut incumbent, greedy, &mut observe);

        let var = terms.branch_variable(cfg.branching_rule, node.fixed, node.ones);
        let bit = 1u32 << var;
        for ones in [node.ones, node.ones | bit] {
            let fixed = node.fixed | bit;
            let bound = terms.bound(fixed, ones);
            if incumbent.cost - bound <= cfg.gap_tolerance * incumbent.cost.abs() {
                continue;
            }
            heap.push(Node {
                bound,
                depth: node.depth + 1,
                fixed,
                ones,
                parent_bound: Some(node.bound),
                seq,
            });
            seq += 1;
        }
    }

    Ok(SolveReport {
        solution: incumbent,
        nodes_explored: nodes,
        proven_optimal: proven,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn improve(
    incumbent: &mut OffloadSolution,
    candidate: OffloadSolution,
    observe: &mut impl FnMut(SbbEvent),
) {
    let better = candidate.cost < incumbent.cost
        || (candidate.cost == incumbent.cost
            && decision_index(&candidate.decisions) < decision_index(&incumbent.decisions));
    if better {
        *incumbent = candidate;
        observe(SbbEvent::Incumbent {
            cost: incumbent.cost,
        });
    }
}

/// Per-vehicle cost pieces. Masks use bit `i` for vehicle `i`.
struct Terms {
    n: usize,
    local: Vec<f64>,
    tx: Vec<f64>,
    root: Vec<f64>,
}

impl Terms {
    fn new(inst: &OffloadInstance) -> Result<Self> {
        let w = &inst.weights;
        let mut tx = Vec::with_capacity(inst.n_vehicles());
        for v in &inst.vehicles {
            tx.push(transmission_cost(v, w, uplink_rate(v, &inst.edge)?));
        }
        Ok(Terms {
            n: inst.n_vehicles(),
            local: inst
                .vehicles
                .iter()
                .map(|v| local_cost_unchecked(v, w))
                .collect(),
            tx,
            root: inst
                .vehicles
                .iter()
                .map(|v| (w.w_time * v.cpu_cycles / inst.edge.edge_freq).sqrt())
                .collect(),
        })
    }

    fn offload_mass(&self, fixed: u32, ones: u32) -> f64 {
        (0..self.n)
            .filter(|&i| fixed & ones & (1 << i) != 0)
            .map(|i| self.root[i])
            .sum()
    }

    fn optimistic_offload(&self, i: usize, mass: f64) -> f64 {
        self.tx[i] + (2.0 * mass + self.root[i]) * self.root[i]
    }

    fn bound(&self, fixed: u32, ones: u32) -> f64 {
        let mass = self.offload_mass(fixed, ones);
        let mut total = mass * mass;
        for i in 0..self.n {
            let bit = 1 << i;
            total += if fixed & bit == 0 {
                self.local[i].min(self.optimistic_offload(i, mass))
            } else if ones & bit != 0 {
                self.tx[i]
            } else {
                self.local[i]
            };
        }
        total
    }

    /// Free vehicles offload when that beats local execution at an equal
    /// share of the edge among all vehicles that may still offload.
    fn greedy_completion(&self, fixed: u32, ones: u32) -> Vec<bool> {
        let candidates = (0..self.n)
            .filter(|&i| fixed & (1 << i) == 0 || ones & (1 << i) != 0)
            .count()
            .max(1) as f64;
        (0..self.n)
            .map(|i| {
                let bit = 1 << i;
                if fixed & bit != 0 {
                    ones & bit != 0
                } else {
                    let edge = self.root[i] * self.root[i] * candidates;
                    self.tx[i] + edge < self.local[i]
                }
            })
            .collect()
    }

    fn branch_variable(&self, rule: BranchingRule, fixed: u32, ones: u32) -> usize {
        let free = (0..self.n).filter(|&i| fixed & (1 << i) == 0);
        match rule {
            BranchingRule::LowestIndex => free.min().expect("node has a free vehicle"),
            BranchingRule::MostFractionalFirst => {
                let mass = self.offload_mass(fixed, ones);
                let mut best = None;
                let mut best_gap = f64::INFINITY;
                for i in free {
                    let off = self.optimistic_offload(i, mass);
                    let gap = (self.local[i] - off).abs() / self.local[i].max(off);
                    if gap < best_gap {
                        best_gap = gap;
                        best = Some(i);
                    }
                }
                best.expect("node has a free vehicle")
            }
        }
    }

    fn decisions(&self, ones: u32) -> Vec<bool> {
        (0..self.n).map(|i| ones & (1 << i) != 0).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bound: f64,
    depth: usize,
    fixed: u32,
    ones: u32,
    parent_bound: Option<f64>,
    seq: u64,
}

// BinaryHeap is a max-heap: smaller bound means higher priority, and among
// equal bounds the earlier-created node wins.
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}
