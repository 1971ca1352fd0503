//! Problem definition for multi-vehicle task offloading to a shared edge
//! server, and the latency/energy cost model.
//!
//! Each vehicle either computes its task locally or uploads it over its own
//! (orthogonal) uplink and receives a fraction of the edge CPU. The objective
//! is the weighted sum of delay and vehicle-side energy over all vehicles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported fleet size. The classifier head of the learned solver is
/// `2^N`-way, so this bounds it at 65536 classes.
pub const MAX_VEHICLES: usize = 16;

/// Tolerance used when checking that allocation fractions stay on the simplex.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Task input size in bits.
    pub data_size: f64,
    /// Cycles needed to process the task.
    pub cpu_cycles: f64,
    /// Vehicle CPU frequency, cycles/s.
    pub local_freq: f64,
    /// Transmit power, W.
    pub tx_power: f64,
    /// Linear power gain of the uplink, at most 1.
    pub channel_gain: f64,
    /// Dedicated uplink bandwidth, Hz.
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeParams {
    /// Total divisible edge CPU capacity, cycles/s.
    pub edge_freq: f64,
    /// Receiver noise power, W.
    pub noise_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub w_time: f64,
    pub w_energy: f64,
    /// Effective switched capacitance of the vehicle CPU (J·s²/cycle³).
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadInstance {
    pub vehicles: Vec<VehicleParams>,
    pub edge: EdgeParams,
    pub weights: CostWeights,
    /// Provenance tag: the seed this instance was drawn from.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadSolution {
    /// `true` means the vehicle offloads its task.
    pub decisions: Vec<bool>,
    /// Edge CPU fraction granted to each vehicle.
    pub alloc: Vec<f64>,
    pub cost: f64,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{name} is not finite ({v})"
        )));
    }
    if v <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive ({v})"
        )));
    }
    Ok(())
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("data_size", self.data_size)?;
        check_positive("cpu_cycles", self.cpu_cycles)?;
        check_positive("local_freq", self.local_freq)?;
        check_positive("tx_power", self.tx_power)?;
        check_positive("channel_gain", self.channel_gain)?;
        check_positive("bandwidth", self.bandwidth)?;
        if self.channel_gain > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "channel_gain must not exceed 1 ({})",
                self.channel_gain
            )));
        }
        Ok(())
    }
}

impl EdgeParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("edge_freq", self.edge_freq)?;
        check_positive("noise_power", self.noise_power)
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("w_time", self.w_time), ("w_energy", self.w_energy)] {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and non-negative ({w})"
                )));
            }
        }
        if self.w_time == 0.0 && self.w_energy == 0.0 {
            return Err(Error::InvalidParameter(
                "w_time and w_energy cannot both be zero".into(),
            ));
        }
        check_positive("kappa", self.kappa)
    }

    /// Same weights with both cost weights multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        CostWeights {
            w_time: self.w_time * factor,
            w_energy: self.w_energy * factor,
            kappa: self.kappa,
        }
    }
}

impl OffloadInstance {
    pub fn n_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vehicles.len();
        if n == 0 || n > MAX_VEHICLES {
            return Err(Error::SizeLimit(format!(
                "instance has {n} vehicles, supported range is 1..={MAX_VEHICLES}"
            )));
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            v.validate()
                .map_err(|e| Error::InvalidParameter(format!("vehicle {i}: {e}")))?;
        }
        self.edge.validate()?;
        self.weights.validate()
    }
}

impl OffloadSolution {
    /// Checks the structural invariants: matching lengths, alloc strictly
    /// positive exactly for offloaders, and the allocation on the simplex.
    pub fn check_structure(&self, n: usize) -> Result<()> {
        if self.decisions.len() != n || self.alloc.len() != n {
            return Err(Error::Shape(format!(
                "solution has {} decisions and {} allocations, expected {n}",
                self.decisions.len(),
                self.alloc.len()
            )));
        }
        check_allocation(&self.decisions, &self.alloc)?;
        if !self.cost.is_finite() || self.cost < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "solution cost {}",
                self.cost
            )));
        }
        Ok(())
    }

    pub fn decision_index(&self) -> usize {
        decision_index(&self.decisions)
    }
}

fn check_allocation(decisions: &[bool], alloc: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for (i, (&d, &a)) in decisions.iter().zip(alloc).enumerate() {
        if !a.is_finite() || a < 0.0 {
            return Err(Error::InvalidAllocation(format!("alloc[{i}] = {a}")));
        }
        if d && a == 0.0 {
            return Err(Error::InvalidAllocation(format!(
                "vehicle {i} offloads with zero allocation"
            )));
        }
        if !d && a != 0.0 {
            return Err(Error::InvalidAllocation(format!(
                "vehicle {i} computes locally but holds allocation {a}"
            )));
        }
        sum += a;
    }
    if sum > 1.0 + SIMPLEX_TOL {
        return Err(Error::InvalidAllocation(format!(
            "allocations sum to {sum} > 1"
        )));
    }
    Ok(())
}

/// Class index of a decision vector. Vehicle 0 is the most significant bit,
/// so numeric order on indices equals lexicographic order on bit-vectors.
pub fn decision_index(decisions: &[bool]) -> usize {
    decisions
        .iter()
        .fold(0usize, |acc, &d| (acc << 1) | usize::from(d))
}

/// Inverse of [`decision_index`].
pub fn decisions_from_index(index: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| (index >> (n - 1 - i)) & 1 == 1).collect()
}

/// Shannon rate of a vehicle's dedicated uplink, bits/s.
pub fn uplink_rate(v: &VehicleParams, e: &EdgeParams) -> Result<f64> {
    let inputs = [v.bandwidth, v.tx_power, v.channel_gain, e.noise_power];
    if inputs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "non-finite link parameter in {inputs:?}"
        )));
    }
    let snr = v.tx_power * v.channel_gain / e.noise_power;
    Ok(v.bandwidth * snr.ln_1p() / std::f64::consts::LN_2)
}

/// Weighted cost of computing the task on the vehicle itself.
pub fn local_cost(v: &VehicleParams, w: &CostWeights) -> Result<f64> {
    v.validate()?;
    Ok(local_cost_unchecked(v, w))
}

pub(crate) fn local_cost_unchecked(v: &VehicleParams, w: &CostWeights) -> f64 {
    let delay = v.cpu_cycles / v.local_freq;
    let energy = w.kappa * v.local_freq * v.local_freq * v.cpu_cycles;
    w.w_time * delay + w.w_energy * energy
}

/// Weighted cost of offloading when the vehicle is granted `alloc_fraction`
/// of the edge CPU. Only vehicle-side energy (transmission) is counted, and
/// result download is ignored.
pub fn offload_cost(
    v: &VehicleParams,
    e: &EdgeParams,
    w: &CostWeights,
    alloc_fraction: f64,
) -> Result<f64> {
    if !(alloc_fraction > 0.0) || !alloc_fraction.is_finite() {
        return Err(Error::InvalidAllocation(format!(
            "allocation fraction must be in (0, 1], got {alloc_fraction}"
        )));
    }
    let rate = uplink_rate(v, e)?;
    Ok(transmission_cost(v, w, rate) + edge_compute_cost(v, e, w, alloc_fraction))
}

/// Weighted delay + energy of uploading the task at `rate`.
pub(crate) fn transmission_cost(v: &VehicleParams, w: &CostWeights, rate: f64) -> f64 {
    let t_tx = v.data_size / rate;
    w.w_time * t_tx + w.w_energy * v.tx_power * t_tx
}

pub(crate) fn edge_compute_cost(
    v: &VehicleParams,
    e: &EdgeParams,
    w: &CostWeights,
    alloc_fraction: f64,
) -> f64 {
    w.w_time * v.cpu_cycles / (alloc_fraction * e.edge_freq)
}

/// Objective value of a full decision/allocation pair.
pub fn total_cost(inst: &OffloadInstance, decisions: &[bool], alloc: &[f64]) -> Result<f64> {
    let n = inst.n_vehicles();
    if decisions.len() != n || alloc.len() != n {
        return Err(Error::Shape(format!(
            "expected {n} decisions and allocations, got {} and {}",
            decisions.len(),
            alloc.len()
        )));
    }
    let mut cost = 0.0;
    for (i, v) in inst.vehicles.iter().enumerate() {
        cost += if decisions[i] {
            if alloc[i] <= 0.0 {
                return Err(Error::InvalidAllocation(format!(
                    "vehicle {i} offloads with allocation {}",
                    alloc[i]
                )));
            }
            offload_cost(v, &inst.edge, &inst.weights, alloc[i])?
        } else {
            local_cost_unchecked(v, &inst.weights)
        };
    }
    Ok(cost)
}

/// Builds a solution from a decision/allocation pair, checking its structure
/// and computing its cost.
pub fn make_solution(
    inst: &OffloadInstance,
    decisions: Vec<bool>,
    alloc: Vec<f64>,
) -> Result<OffloadSolution> {
    check_allocation(&decisions, &alloc)?;
    let cost = total_cost(inst, &decisions, &alloc)?;
    Ok(OffloadSolution {
        decisions,
        alloc,
        cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn vehicle() -> VehicleParams {
        VehicleParams {
            data_size: 2e6,
            cpu_cycles: 1e9,
            local_freq: 1e9,
            tx_power: 10.0,
            channel_gain: 1e-6,
            bandwidth: 1e6,
        }
    }

    fn edge() -> EdgeParams {
        EdgeParams {
            edge_freq: 1e10,
            noise_power: 1e-9,
        }
    }

    #[test]
    fn rate_unit_snr() {
        let mut v = vehicle();
        v.tx_power = 1.0;
        v.channel_gain = 1e-9;
        let r = uplink_rate(&v, &edge()).unwrap();
        assert!((r - 1e6).abs() < 1e-6);
    }

    #[test]
    fn rate_vanishes_with_snr() {
        let mut v = vehicle();
        v.channel_gain = 1e-300;
        assert!(uplink_rate(&v, &edge()).unwrap() < 1e-280);
    }

    #[test]
    fn rate_rejects_non_finite() {
        let mut v = vehicle();
        v.bandwidth = f64::NAN;
        assert!(matches!(
            uplink_rate(&v, &edge()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn local_cost_delay_only_and_energy_only() {
        let v = vehicle();
        let w = CostWeights {
            w_time: 1.0,
            w_energy: 0.0,
            kappa: 1e-27,
        };
        assert_eq!(local_cost(&v, &w).unwrap(), 1.0);
        let w = CostWeights {
            w_time: 0.0,
            w_energy: 1.0,
            kappa: 1e-27,
        };
        assert!((local_cost(&v, &w).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn offload_cost_rejects_non_positive_allocation() {
        let w = CostWeights {
            w_time: 1.0,
            w_energy: 1.0,
            kappa: 1e-27,
        };
        for a in [0.0, -0.5, f64::NAN] {
            assert!(matches!(
                offload_cost(&vehicle(), &edge(), &w, a),
                Err(Error::InvalidAllocation(_))
            ));
        }
    }

    #[test]
    fn offload_cost_without_data_is_edge_delay() {
        let mut v = vehicle();
        v.data_size = 1e-300;
        let w = CostWeights {
            w_time: 1.0,
            w_energy: 1.0,
            kappa: 1e-27,
        };
        let c = offload_cost(&v, &edge(), &w, 1.0).unwrap();
        assert!((c - 0.1).abs() < 1e-12);
    }

    #[test]
    fn total_cost_flags_offloader_without_allocation() {
        let inst = OffloadInstance {
            vehicles: vec![vehicle(), vehicle()],
            edge: edge(),
            weights: CostWeights {
                w_time: 1.0,
                w_energy: 1.0,
                kappa: 1e-27,
            },
            seed: 0,
        };
        assert!(matches!(
            total_cost(&inst, &[true, false], &[0.0, 0.0]),
            Err(Error::InvalidAllocation(_))
        ));
        let local = total_cost(&inst, &[false, false], &[0.3, 0.3]).unwrap();
        assert_eq!(local, 2.0 * local_cost(&vehicle(), &inst.weights).unwrap());
    }

    #[test]
    fn decision_index_is_msb_first() {
        assert_eq!(decision_index(&[true, false, false]), 4);
        assert_eq!(decision_index(&[false, false, true]), 1);
        for idx in 0..32 {
            assert_eq!(decision_index(&decisions_from_index(idx, 5)), idx);
        }
    }

    #[test]
    fn structure_check() {
        let ok = OffloadSolution {
            decisions: vec![true, false],
            alloc: vec![1.0, 0.0],
            cost: 1.0,
        };
        ok.check_structure(2).unwrap();
        let bad = OffloadSolution {
            decisions: vec![false, false],
            alloc: vec![0.1, 0.0],
            cost: 1.0,
        };
        assert!(bad.check_structure(2).is_err());
        let over = OffloadSolution {
            decisions: vec![true, true],
            alloc: vec![0.6, 0.6],
            cost: 1.0,
        };
        assert!(over.check_structure(2).is_err());
    }

    #[test]
    fn validation_rejects_amplifying_channel() {
        let mut v = vehicle();
        v.channel_gain = 1.5;
        assert!(v.validate().is_err());
    }
}
