//! Shared-trunk feedforward network with a classification head over the
//! `2^N` joint decisions and a regression head for the allocation vector.

use rand::Rng;

use super::features::{feature_len, FeatureStats};
use crate::error::{Error, Result};
use crate::system::MAX_VEHICLES;

/// Fully connected layer, weights stored row-major as `[n_out][n_in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Dense {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    /// He-uniform initialization with zero bias.
    pub fn init(n_in: usize, n_out: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / n_in as f64).sqrt();
        Dense {
            n_in,
            n_out,
            weights: (0..n_in * n_out)
                .map(|_| rng.gen_range(-limit..limit))
                .collect(),
            bias: vec![0.0; n_out],
        }
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.n_in).zip(&self.bias))
        {
            *o = b + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
        }
    }

    /// Accumulates parameter gradients for upstream gradient `dy` at input
    /// `x`, and writes the input gradient into `dx` when given.
    fn backward(
        &self,
        x: &[f64],
        dy: &[f64],
        dw: &mut [f64],
        db: &mut [f64],
        dx: Option<&mut [f64]>,
    ) {
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            db[o] += g;
            for (dw, &x) in dw[o * self.n_in..(o + 1) * self.n_in].iter_mut().zip(x) {
                *dw += g * x;
            }
        }
        if let Some(dx) = dx {
            dx.iter_mut().for_each(|d| *d = 0.0);
            for (o, &g) in dy.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
                for (d, w) in dx.iter_mut().zip(row) {
                    *d += g * w;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MtlModel {
    pub n_vehicles: usize,
    pub hidden_sizes: Vec<usize>,
    pub stats: FeatureStats,
    pub trunk: Vec<Dense>,
    pub class_head: Dense,
    pub reg_head: Dense,
}

/// Output of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Softmax over the `2^N` joint decisions.
    pub class_probs: Vec<f64>,
    /// Allocation on the sub-simplex: non-negative, summing to at most one.
    pub alloc: Vec<f64>,
}

impl MtlModel {
    fn check_shape(n_vehicles: usize, hidden_sizes: &[usize]) -> Result<()> {
        if n_vehicles == 0 || n_vehicles > MAX_VEHICLES {
            return Err(Error::SizeLimit(format!(
                "model for {n_vehicles} vehicles, supported range is 1..={MAX_VEHICLES}"
            )));
        }
        if hidden_sizes.is_empty() || hidden_sizes.contains(&0) {
            return Err(Error::Shape(format!(
                "hidden sizes must be non-empty and positive, got {hidden_sizes:?}"
            )));
        }
        Ok(())
    }

    fn build(
        n_vehicles: usize,
        hidden_sizes: &[usize],
        stats: FeatureStats,
        mut layer: impl FnMut(usize, usize) -> Dense,
    ) -> Result<Self> {
        Self::check_shape(n_vehicles, hidden_sizes)?;
        let n_in = feature_len(n_vehicles);
        if stats.len() != n_in {
            return Err(Error::Shape(format!(
                "statistics cover {} features, model expects {n_in}",
                stats.len()
            )));
        }
        let mut trunk = Vec::with_capacity(hidden_sizes.len());
        let mut width = n_in;
        for &h in hidden_sizes {
            trunk.push(layer(width, h));
            width = h;
        }
        Ok(MtlModel {
            n_vehicles,
            hidden_sizes: hidden_sizes.to_vec(),
            stats,
            trunk,
            class_head: layer(width, 1 << n_vehicles),
            reg_head: layer(width, n_vehicles),
        })
    }

    pub fn zeros(n_vehicles: usize, hidden_sizes: &[usize], stats: FeatureStats) -> Result<Self> {
        Self::build(n_vehicles, hidden_sizes, stats, Dense::zeros)
    }

    pub fn init(
        n_vehicles: usize,
        hidden_sizes: &[usize],
        stats: FeatureStats,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Self::build(n_vehicles, hidden_sizes, stats, |i, o| {
            Dense::init(i, o, rng)
        })
    }

    pub fn n_features(&self) -> usize {
        feature_len(self.n_vehicles)
    }

    pub fn n_classes(&self) -> usize {
        1 << self.n_vehicles
    }

    pub fn n_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Every trainable tensor: trunk layers in order (weights, bias), then the
    /// classification head, then the regression head.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.trunk.len() + 4);
        for d in self.trunk.iter().chain([&self.class_head, &self.reg_head]) {
            out.push(d.weights.as_slice());
            out.push(d.bias.as_slice());
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::with_capacity(2 * self.trunk.len() + 4);
        for d in self
            .trunk
            .iter_mut()
            .chain([&mut self.class_head, &mut self.reg_head])
        {
            out.push(&mut d.weights);
            out.push(&mut d.bias);
        }
        out
    }

    /// Rounds every stored value to the nearest `f32`, matching what a saved
    /// and reloaded model holds.
    pub fn round_to_f32(&mut self) {
        let round = |v: &mut f64| *v = *v as f32 as f64;
        for t in self.tensors_mut() {
            t.iter_mut().for_each(round);
        }
        self.stats.mean.iter_mut().for_each(round);
        self.stats.std.iter_mut().for_each(round);
    }

    pub fn forward(&self, features: &[f64]) -> Result<Prediction> {
        self.check_features(features)?;
        let mut tape = Tape::new(self);
        self.run(features, &mut tape, true);
        let mut class_probs = tape.logits.clone();
        softmax_in_place(&mut class_probs);
        Ok(Prediction {
            class_probs,
            alloc: project_alloc(&tape.reg_raw).0,
        })
    }

    /// Regression output only, skipping the classification head.
    pub fn forward_alloc(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_features(features)?;
        let mut tape = Tape::new(self);
        self.run(features, &mut tape, false);
        Ok(project_alloc(&tape.reg_raw).0)
    }

    fn check_features(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.n_features() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.n_features(),
                features.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn run(&self, x: &[f64], tape: &mut Tape, with_class: bool) {
        tape.input.copy_from_slice(x);
        for (l, layer) in self.trunk.iter().enumerate() {
            let (before, after) = tape.acts.split_at_mut(l);
            let input = if l == 0 {
                &tape.input[..]
            } else {
                &before[l - 1][..]
            };
            let out = &mut after[0];
            layer.forward(input, out);
            out.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        let top = tape.acts.last().expect("non-empty trunk");
        if with_class {
            self.class_head.forward(top, &mut tape.logits);
        }
        self.reg_head.forward(top, &mut tape.reg_raw);
    }

    /// Backpropagates head gradients through the network recorded in `tape`.
    /// `dlogits` may be `None` when the classification loss has zero weight.
    pub(crate) fn backward(
        &self,
        tape: &mut Tape,
        dlogits: Option<&[f64]>,
        dreg: &[f64],
        grads: &mut [Vec<f64>],
    ) {
        let depth = self.trunk.len();
        let (trunk_grads, head_grads) = grads.split_at_mut(2 * depth);
        let top = &tape.acts[depth - 1];
        let dtop = &mut tape.dacts[depth - 1];
        let (cw, rest) = head_grads.split_at_mut(1);
        let (cb, rest) = rest.split_at_mut(1);
        let (rw, rb) = rest.split_at_mut(1);
        self.reg_head
            .backward(top, dreg, &mut rw[0], &mut rb[0], Some(dtop));
        if let Some(dl) = dlogits {
            self.class_head
                .backward(top, dl, &mut cw[0], &mut cb[0], Some(&mut tape.scratch));
            for (d, s) in dtop.iter_mut().zip(&tape.scratch) {
                *d += s;
            }
        }
        for l in (0..depth).rev() {
            // through ReLU
            let (acts_before, acts_rest) = tape.acts.split_at(l);
            let act = &acts_rest[0];
            let (dacts_before, dacts_rest) = tape.dacts.split_at_mut(l);
            let dact = &mut dacts_rest[0];
            for (d, a) in dact.iter_mut().zip(act) {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            }
            let input = if l == 0 {
                &tape.input[..]
            } else {
                &acts_before[l - 1][..]
            };
            let (gw, gb) = trunk_grads[2 * l..2 * l + 2].split_at_mut(1);
            let dx = if l == 0 {
                None
            } else {
                Some(&mut dacts_before[l - 1][..])
            };
            self.trunk[l].backward(input, dact, &mut gw[0], &mut gb[0], dx);
        }
    }

    pub(crate) fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.tensors().iter().map(|t| vec![0.0; t.len()]).collect()
    }
}

/// Activation buffers reused across samples.
pub(crate) struct Tape {
    pub input: Vec<f64>,
    pub acts: Vec<Vec<f64>>,
    pub dacts: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub reg_raw: Vec<f64>,
    pub scratch: Vec<f64>,
}

impl Tape {
    pub fn new(model: &MtlModel) -> Self {
        let top = *model.hidden_sizes.last().expect("non-empty trunk");
        Tape {
            input: vec![0.0; model.n_features()],
            acts: model.hidden_sizes.iter().map(|&h| vec![0.0; h]).collect(),
            dacts: model.hidden_sizes.iter().map(|&h| vec![0.0; h]).collect(),
            logits: vec![0.0; model.n_classes()],
            reg_raw: vec![0.0; model.n_vehicles],
            scratch: vec![0.0; top],
        }
    }
}

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    v.iter_mut().for_each(|x| *x /= sum);
}

/// Clamps at zero, then rescales onto the simplex when the clamped entries
/// sum past one. Returns the projection and the clamped sum.
pub(crate) fn project_alloc(raw: &[f64]) -> (Vec<f64>, f64) {
    let clamped: Vec<f64> = raw.iter().map(|r| r.max(0.0)).collect();
    let sum: f64 = clamped.iter().sum();
    if sum > 1.0 {
        (clamped.iter().map(|c| c / sum).collect(), sum)
    } else {
        (clamped, sum)
    }
}

/// Gradient of a loss with respect to the raw regression outputs, given its
/// gradient `dy` with respect to the projected allocation `y`.
pub(crate) fn project_alloc_backward(
    raw: &[f64],
    y: &[f64],
    sum: f64,
    dy: &[f64],
    out: &mut [f64],
) {
    if sum > 1.0 {
        let dot: f64 = dy.iter().zip(y).map(|(g, y)| g * y).sum();
        for ((o, g), r) in out.iter_mut().zip(dy).zip(raw) {
            *o = if *r > 0.0 { (g - dot) / sum } else { 0.0 };
        }
    } else {
        for ((o, g), r) in out.iter_mut().zip(dy).zip(raw) {
            *o = if *r > 0.0 { *g } else { 0.0 };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_model_is_uniform() {
        for n in 1..=4 {
            let m = MtlModel::zeros(n, &[16, 8], FeatureStats::identity(feature_len(n))).unwrap();
            let p = m.forward(&vec![0.3; feature_len(n)]).unwrap();
            for q in &p.class_probs {
                assert!((q - 1.0 / (1 << n) as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn outputs_on_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=5 {
            let mut m = MtlModel::init(
                n,
                &[12, 7],
                FeatureStats::identity(feature_len(n)),
                &mut rng,
            )
            .unwrap();
            // push the regression head toward large outputs to exercise rescaling
            m.reg_head
                .bias
                .iter_mut()
                .for_each(|b| *b = rng.gen_range(-1.0..3.0));
            for _ in 0..50 {
                let x: Vec<f64> = (0..feature_len(n))
                    .map(|_| rng.gen_range(-3.0..3.0))
                    .collect();
                let p = m.forward(&x).unwrap();
                let s: f64 = p.class_probs.iter().sum();
                assert!((s - 1.0).abs() < 1e-6);
                assert!(p.alloc.iter().all(|a| *a >= 0.0));
                assert!(p.alloc.iter().sum::<f64>() <= 1.0 + 1e-6);
            }
        }
    }

    #[test]
    fn feature_length_checked() {
        let m = MtlModel::zeros(2, &[4], FeatureStats::identity(16)).unwrap();
        assert!(matches!(m.forward(&[0.0; 15]), Err(Error::Shape(_))));
    }

    #[test]
    fn projection_cases() {
        let (y, _) = project_alloc(&[-0.5, 0.25]);
        assert_eq!(y, vec![0.0, 0.25]);
        let (y, s) = project_alloc(&[1.0, 3.0]);
        assert_eq!(s, 4.0);
        assert_eq!(y, vec![0.25, 0.75]);
    }
}
