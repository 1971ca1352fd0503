//! Edge-vehicle joint inference over a segmented detection network.
//!
//! The first `k` layers (the shallow part) run on the vehicle, the output of
//! layer `k` is uploaded, and the remaining layers run on the edge. Frame
//! quality is binary: a fraction `eta` of frames is "bad", which hurts the
//! shallow network's accuracy but not the full network's. Misdetections are
//! charged `miss_penalty` each, and all strategy costs are closed-form
//! per-frame expectations.
//!
//! The three strategies:
//!
//! * local: every frame runs the on-vehicle shallow layers only;
//! * edge: every raw frame is uploaded and the full network runs on the edge;
//! * joint: every frame runs the shallow layers plus a quality gate; good
//!   frames exit locally, bad frames upload their feature maps to the edge.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance_gen::RangeConfig;
use crate::system::{uplink_rate, CostWeights, EdgeParams, VehicleParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub compute_cycles: f64,
    /// Bytes.
    pub output_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerProfile {
    /// Raw frame size in bytes.
    pub input_size: f64,
    pub layers: Vec<Layer>,
}

impl LayerProfile {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidParameter("layer profile is empty".into()));
        }
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.input_size) {
            return Err(Error::InvalidParameter(format!(
                "input size must be positive, got {}",
                self.input_size
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if !ok(l.compute_cycles) || !ok(l.output_size) {
                return Err(Error::InvalidParameter(format!(
                    "layer {i} has non-positive cycles or output size"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Bytes crossing a split after `k` layers: the raw frame for `k = 0`,
    /// otherwise the output of layer `k`.
    pub fn output_after(&self, k: usize) -> f64 {
        if k == 0 {
            self.input_size
        } else {
            self.layers[k - 1].output_size
        }
    }

    fn cycles(&self, range: std::ops::Range<usize>) -> f64 {
        self.layers[range].iter().map(|l| l.compute_cycles).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyModel {
    pub acc_snn_good: f64,
    pub acc_snn_bad: f64,
    pub acc_full: f64,
    /// Cost charged per misdetected frame.
    pub miss_penalty: f64,
}

impl AccuracyModel {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.acc_snn_good) && unit(self.acc_snn_bad) && unit(self.acc_full)) {
            return Err(Error::InvalidParameter(
                "accuracies must lie in [0, 1]".into(),
            ));
        }
        if !(self.acc_snn_bad <= self.acc_snn_good && self.acc_snn_good <= self.acc_full) {
            return Err(Error::InvalidParameter(
                "accuracies must satisfy snn_bad <= snn_good <= full".into(),
            ));
        }
        if !(self.miss_penalty >= 0.0 && self.miss_penalty.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "miss_penalty must be non-negative, got {}",
                self.miss_penalty
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceScenario {
    pub vehicle: VehicleParams,
    pub edge: EdgeParams,
    pub weights: CostWeights,
    pub profile: LayerProfile,
    pub acc: AccuracyModel,
    /// Number of layers on the vehicle in the local and joint strategies.
    pub split_index: usize,
    /// Fraction of bad frames.
    pub eta: f64,
    /// Per-frame cycles of the frame-quality gate run in joint mode.
    pub gate_cycles: f64,
}

impl InferenceScenario {
    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate()?;
        self.edge.validate()?;
        self.weights.validate()?;
        self.profile.validate()?;
        self.acc.validate()?;
        if self.split_index > self.profile.len() {
            return Err(Error::Index(format!(
                "split index {} exceeds layer count {}",
                self.split_index,
                self.profile.len()
            )));
        }
        check_eta(self.eta)?;
        if !(self.gate_cycles >= 0.0 && self.gate_cycles.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gate_cycles must be non-negative, got {}",
                self.gate_cycles
            )));
        }
        Ok(())
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        InferenceScenario {
            eta,
            ..self.clone()
        }
    }

    fn local_compute(&self, cycles: f64) -> f64 {
        let f = self.vehicle.local_freq;
        self.weights.w_time * cycles / f
            + self.weights.w_energy * self.weights.kappa * f * f * cycles
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!(
            "eta must lie in [0, 1], got {eta}"
        )));
    }
    Ok(())
}

/// Cost of running layers `1..=k` on the vehicle, uploading `upload_bytes`,
/// and running layers `k+1..=L` on the edge (whose full CPU serves this
/// vehicle).
pub fn segment_cost(sc: &InferenceScenario, k: usize, upload_bytes: f64) -> Result<f64> {
    let l = sc.profile.len();
    if k > l {
        return Err(Error::Index(format!(
            "split index {k} exceeds layer count {l}"
        )));
    }
    if !(upload_bytes >= 0.0 && upload_bytes.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "upload size must be non-negative, got {upload_bytes}"
        )));
    }
    let w = &sc.weights;
    let local = sc.local_compute(sc.profile.cycles(0..k));
    let tx = if upload_bytes > 0.0 {
        let t = 8.0 * upload_bytes / uplink_rate(&sc.vehicle, &sc.edge)?;
        w.w_time * t + w.w_energy * sc.vehicle.tx_power * t
    } else {
        0.0
    };
    let edge = w.w_time * sc.profile.cycles(k..l) / sc.edge.edge_freq;
    Ok(local + tx + edge)
}

/// Cheapest split point. Uploads the output of layer `k` (the raw frame for
/// `k = 0`, nothing for `k = L`); ties go to the smallest `k`.
pub fn best_split(sc: &InferenceScenario) -> Result<(usize, f64)> {
    sc.validate()?;
    let l = sc.profile.len();
    let mut best = (0, f64::INFINITY);
    for k in 0..=l {
        let upload = if k == l {
            0.0
        } else {
            sc.profile.output_after(k)
        };
        let c = segment_cost(sc, k, upload)?;
        if c < best.1 {
            best = (k, c);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Local,
    Edge,
    Joint,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" => Ok(Strategy::Local),
            "edge" => Ok(Strategy::Edge),
            "joint" => Ok(Strategy::Joint),
            other => Err(Error::InvalidParameter(format!(
                "unknown strategy `{other}`"
            ))),
        }
    }
}

/// Expected per-frame cost of a strategy at the scenario's `eta`.
pub fn strategy_cost(sc: &InferenceScenario, strategy: Strategy) -> Result<f64> {
    sc.validate()?;
    let eta = sc.eta;
    let acc = &sc.acc;
    let k = sc.split_index;
    // shallow layers only, no upload and no edge work
    let snn_exit = sc.local_compute(sc.profile.cycles(0..k));
    let miss_good = (1.0 - acc.acc_snn_good) * acc.miss_penalty;
    let miss_bad = (1.0 - acc.acc_snn_bad) * acc.miss_penalty;
    let miss_full = (1.0 - acc.acc_full) * acc.miss_penalty;
    Ok(match strategy {
        Strategy::Local => snn_exit + eta * miss_bad + (1.0 - eta) * miss_good,
        Strategy::Edge => segment_cost(sc, 0, sc.profile.input_size)? + miss_full,
        Strategy::Joint => {
            let offload = segment_cost(sc, k, sc.profile.output_after(k))?;
            sc.local_compute(sc.gate_cycles)
                + (1.0 - eta) * (snn_exit + miss_good)
                + eta * (offload + miss_full)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaSweepRecord {
    pub eta: f64,
    pub cost_local: f64,
    pub cost_edge: f64,
    pub cost_joint: f64,
}

pub fn eta_sweep(sc: &InferenceScenario, etas: &[f64]) -> Result<Vec<EtaSweepRecord>> {
    for &eta in etas {
        check_eta(eta)?;
    }
    if etas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(
            "eta grid must be sorted ascending".into(),
        ));
    }
    etas.iter()
        .map(|&eta| {
            let s = sc.with_eta(eta);
            Ok(EtaSweepRecord {
                eta,
                cost_local: strategy_cost(&s, Strategy::Local)?,
                cost_edge: strategy_cost(&s, Strategy::Edge)?,
                cost_joint: strategy_cost(&s, Strategy::Joint)?,
            })
        })
        .collect()
}

/// Evenly spaced grid `0, step, ..., 1`.
pub fn eta_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eta step must lie in (0, 1], got {step}"
        )));
    }
    let count = (1.0 / step).round() as usize;
    Ok((0..=count)
        .map(|i| (i as f64 / count as f64).min(1.0))
        .collect())
}

pub fn sweep_csv(records: &[EtaSweepRecord]) -> String {
    let mut out = String::from("eta,cost_local,cost_edge,cost_joint\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.eta, r.cost_local, r.cost_edge, r.cost_joint
        ));
    }
    out
}

/// `local - joint` as a function of `eta` is affine; returns the `eta` in
/// `[0, 1]` where it changes sign, if any.
pub fn local_joint_crossover(sc: &InferenceScenario) -> Result<Option<f64>> {
    let diff = |eta: f64| -> Result<f64> {
        let s = sc.with_eta(eta);
        Ok(strategy_cost(&s, Strategy::Local)? - strategy_cost(&s, Strategy::Joint)?)
    };
    let (d0, d1) = (diff(0.0)?, diff(1.0)?);
    if d0 == d1 || d0.signum() == d1.signum() {
        return Ok(None);
    }
    Ok(Some(d0 / (d0 - d1)))
}

/// Miss penalty at which the local and joint strategies cost the same at
/// `target_eta`. Both costs are affine in the penalty.
pub fn calibrate_miss_penalty(sc: &InferenceScenario, target_eta: f64) -> Result<f64> {
    check_eta(target_eta)?;
    let diff = |penalty: f64| -> Result<f64> {
        let mut s = sc.with_eta(target_eta);
        s.acc.miss_penalty = penalty;
        Ok(strategy_cost(&s, Strategy::Local)? - strategy_cost(&s, Strategy::Joint)?)
    };
    let (d0, d1) = (diff(0.0)?, diff(1.0)?);
    let slope = d1 - d0;
    if slope == 0.0 {
        return Err(Error::InvalidParameter(
            "local and joint costs do not depend on the penalty at this eta".into(),
        ));
    }
    let penalty = -d0 / slope;
    if !(penalty >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "no non-negative penalty balances the strategies at eta = {target_eta} (got {penalty})"
        )));
    }
    Ok(penalty)
}

/// `[split]` section of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub input_bytes: f64,
    pub layer_cycles: Vec<f64>,
    pub layer_output_bytes: Vec<f64>,
    pub split_index: usize,
    pub gate_cycles: f64,
    pub local_freq: f64,
    pub tx_power: f64,
    pub bandwidth: f64,
    pub channel_gain: f64,
    pub acc_snn_good: f64,
    pub acc_snn_bad: f64,
    pub acc_full: f64,
    pub miss_penalty: f64,
    pub eta_step: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            input_bytes: 150_528.0,
            layer_cycles: vec![1.0e8, 1.5e8, 8.0e7, 6.0e7, 4.0e7, 1.0e7],
            layer_output_bytes: vec![401_408.0, 802_816.0, 100_352.0, 25_088.0, 6_272.0, 64.0],
            split_index: 3,
            gate_cycles: 2.0e7,
            local_freq: 1e9,
            tx_power: 10.0,
            bandwidth: 1e6,
            channel_gain: 1e-6,
            acc_snn_good: 0.92,
            acc_snn_bad: 0.40,
            acc_full: 0.98,
            miss_penalty: 1.4,
            eta_step: 0.05,
        }
    }
}

impl SplitConfig {
    /// Scenario at `eta = 0` using the edge and weights from the instance
    /// config.
    pub fn scenario(&self, base: &RangeConfig) -> Result<InferenceScenario> {
        if self.layer_cycles.len() != self.layer_output_bytes.len() {
            return Err(Error::Config(format!(
                "split: {} layer cycle entries but {} output sizes",
                self.layer_cycles.len(),
                self.layer_output_bytes.len()
            )));
        }
        let layers: Vec<Layer> = self
            .layer_cycles
            .iter()
            .zip(&self.layer_output_bytes)
            .map(|(&c, &o)| Layer {
                compute_cycles: c,
                output_size: o,
            })
            .collect();
        let sc = InferenceScenario {
            vehicle: VehicleParams {
                data_size: 8.0 * self.input_bytes,
                cpu_cycles: layers
                    .iter()
                    .map(|l| l.compute_cycles)
                    .sum::<f64>()
                    .max(1.0),
                local_freq: self.local_freq,
                tx_power: self.tx_power,
                channel_gain: self.channel_gain,
                bandwidth: self.bandwidth,
            },
            edge: base.edge(),
            weights: base.weights(),
            profile: LayerProfile {
                input_size: self.input_bytes,
                layers,
            },
            acc: AccuracyModel {
                acc_snn_good: self.acc_snn_good,
                acc_snn_bad: self.acc_snn_bad,
                acc_full: self.acc_full,
                miss_penalty: self.miss_penalty,
            },
            split_index: self.split_index,
            eta: 0.0,
            gate_cycles: self.gate_cycles,
        };
        sc.validate()
            .map_err(|e| Error::Config(format!("split: {e}")))?;
        Ok(sc)
    }
}
