use std::time::Instant;

use super::SolveReport;
use crate::error::{Error, Result};
use crate::system::{
    decisions_from_index, edge_compute_cost, local_cost_unchecked, make_solution,
    transmission_cost, uplink_rate, OffloadInstance,
};

/// Upper bound on `(1/grid_step)^N` accepted by [`solve_grid`].
pub const GRID_POINT_LIMIT: f64 = 1e8;

/// Traverses decision vectors together with allocation vectors on the simplex
/// grid `{k * grid_step : k >= 1}`, keeping the cheapest point. This is the
/// label-generation scheme that discretizes the allocation ratios; it never
/// claims optimality.
pub fn solve_grid(inst: &OffloadInstance, grid_step: f64) -> Result<SolveReport> {
    let start = Instant::now();
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "grid_step must lie in (0, 0.5], got {grid_step}"
        )));
    }
    inst.validate()?;
    let n = inst.n_vehicles();
    let points = (1.0 / grid_step).powi(n as i32);
    if points > GRID_POINT_LIMIT {
        return Err(Error::SizeLimit(format!(
            "grid of step {grid_step} over {n} vehicles has {points:.3e} points (limit {GRID_POINT_LIMIT:.0e})"
        )));
    }
    let levels = (1.0 / grid_step + 1e-9).floor() as usize;

    let w = &inst.weights;
    let local: Vec<f64> = inst
        .vehicles
        .iter()
        .map(|v| local_cost_unchecked(v, w))
        .collect();
    let mut tx = Vec::with_capacity(n);
    let mut edge_unit = Vec::with_capacity(n);
    for v in &inst.vehicles {
        tx.push(transmission_cost(v, w, uplink_rate(v, &inst.edge)?));
        // edge cost at allocation k * grid_step is edge_unit / k
        edge_unit.push(edge_compute_cost(v, &inst.edge, w, grid_step));
    }

    let mut search = GridSearch {
        edge_unit: &edge_unit,
        best_cost: f64::INFINITY,
        best: None,
        evaluated: 0,
    };
    let mut ks = Vec::with_capacity(n);
    for index in 0..(1usize << n) {
        let decisions = decisions_from_index(index, n);
        let offloaders: Vec<usize> = (0..n).filter(|&i| decisions[i]).collect();
        if offloaders.len() > levels {
            continue;
        }
        let base: f64 = (0..n)
            .map(|i| if decisions[i] { tx[i] } else { local[i] })
            .sum();
        ks.clear();
        search.visit(index, &offloaders, base, 0, levels, &mut ks);
    }

    let (index, ks) = search
        .best
        .ok_or_else(|| Error::InvalidParameter("grid search found no feasible point".into()))?;
    let decisions = decisions_from_index(index, n);
    let mut ks = ks.into_iter();
    let alloc = decisions
        .iter()
        .map(|&d| {
            if d {
                ks.next().unwrap_or(0) as f64 * grid_step
            } else {
                0.0
            }
        })
        .collect();
    let solution = make_solution(inst, decisions, alloc)?;
    Ok(SolveReport {
        solution,
        nodes_explored: search.evaluated,
        proven_optimal: false,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

struct GridSearch<'a> {
    edge_unit: &'a [f64],
    best_cost: f64,
    best: Option<(usize, Vec<usize>)>,
    evaluated: usize,
}

impl GridSearch<'_> {
    fn visit(
        &mut self,
        index: usize,
        offloaders: &[usize],
        partial: f64,
        depth: usize,
        remaining: usize,
        ks: &mut Vec<usize>,
    ) {
        if depth == offloaders.len() {
            self.evaluated += 1;
            if partial < self.best_cost {
                self.best_cost = partial;
                self.best = Some((index, ks.clone()));
            }
            return;
        }
        // leave at least one level for each later offloader
        let later = offloaders.len() - depth - 1;
        let unit = self.edge_unit[offloaders[depth]];
        for k in 1..=remaining.saturating_sub(later) {
            ks.push(k);
            self.visit(
                index,
                offloaders,
                partial + unit / k as f64,
                depth + 1,
                remaining - k,
                ks,
            );
            ks.pop();
        }
    }
}
