use crate::error::Result;
use crate::system::{make_solution, OffloadInstance, OffloadSolution};

/// Closed-form optimal edge-CPU split for a fixed decision vector.
///
/// Minimizing `sum_i w_time * C_i / (alpha_i * F)` over the simplex gives
/// `alpha_i ∝ sqrt(w_time * C_i)`. The weight is common to all vehicles and
/// cancels, so the split depends on the cycle counts alone. Offloaders share
/// the whole budget; everyone else gets zero.
pub fn optimal_allocation(inst: &OffloadInstance, decisions: &[bool]) -> Vec<f64> {
    let roots: Vec<f64> = inst
        .vehicles
        .iter()
        .zip(decisions)
        .map(|(v, &d)| if d { v.cpu_cycles.sqrt() } else { 0.0 })
        .collect();
    let total: f64 = roots.iter().sum();
    if total == 0.0 {
        return roots;
    }
    roots.into_iter().map(|r| r / total).collect()
}

/// Scores a decision vector at its optimal allocation.
pub fn evaluate_decision(inst: &OffloadInstance, decisions: &[bool]) -> Result<OffloadSolution> {
    let alloc = optimal_allocation(inst, decisions);
    make_solution(inst, decisions.to_vec(), alloc)
}
