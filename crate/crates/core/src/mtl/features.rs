use crate::error::{Error, Result};
use crate::system::OffloadInstance;

pub const FEATURES_PER_VEHICLE: usize = 6;
pub const GLOBAL_FEATURES: usize = 4;

pub fn feature_len(n_vehicles: usize) -> usize {
    FEATURES_PER_VEHICLE * n_vehicles + GLOBAL_FEATURES
}

/// Unnormalized features: one block of six per vehicle in index order, then
/// the edge and weight parameters.
pub fn raw_features(inst: &OffloadInstance) -> Vec<f64> {
    let mut x = Vec::with_capacity(feature_len(inst.n_vehicles()));
    for v in &inst.vehicles {
        x.extend_from_slice(&[
            v.data_size,
            v.cpu_cycles,
            v.local_freq,
            v.tx_power,
            v.channel_gain,
            v.bandwidth,
        ]);
    }
    x.extend_from_slice(&[
        inst.edge.edge_freq,
        inst.edge.noise_power,
        inst.weights.w_time,
        inst.weights.w_energy,
    ]);
    x
}

/// Per-feature z-score statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub fn identity(len: usize) -> Self {
        FeatureStats {
            mean: vec![0.0; len],
            std: vec![1.0; len],
        }
    }

    /// Population mean and standard deviation of `rows`. Constant features
    /// get a unit deviation so normalization stays finite.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Shape("cannot fit statistics on no rows".into()))?;
        let len = first.len();
        let count = rows.len() as f64;
        let mut mean = vec![0.0; len];
        for row in rows {
            if row.len() != len {
                return Err(Error::Shape(format!(
                    "feature row of length {} among rows of length {len}",
                    row.len()
                )));
            }
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        let mut var = vec![0.0; len];
        for row in rows {
            for ((s, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / count).sqrt();
                // relative floor: spread below float noise counts as constant
                if sd > 1e-12 * m.abs().max(f64::MIN_POSITIVE) {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(FeatureStats { mean, std })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn normalize(&self, raw: &[f64]) -> Result<Vec<f64>> {
        self.check_len(raw.len())?;
        Ok(raw
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }

    pub fn denormalize(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_len(z.len())?;
        Ok(z.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((z, m), s)| z * s + m)
            .collect())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::Shape(format!(
                "feature vector has length {len}, statistics expect {}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Normalized feature vector of length `6N + 4`.
pub fn featurize(inst: &OffloadInstance, stats: &FeatureStats) -> Result<Vec<f64>> {
    stats.normalize(&raw_features(inst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance_gen::{generate_instances, RangeConfig};

    #[test]
    fn length_and_mean_maps_to_zero() {
        let insts = generate_instances(2, 100, &RangeConfig::default(), 4).unwrap();
        let rows: Vec<_> = insts.iter().map(raw_features).collect();
        assert_eq!(rows[0].len(), 16);
        let stats = FeatureStats::fit(&rows).unwrap();
        let z = stats.normalize(&stats.mean).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
        assert!(stats.std.iter().all(|s| *s > 0.0));
    }

    #[test]
    fn round_trip() {
        let insts = generate_instances(3, 50, &RangeConfig::default(), 9).unwrap();
        let rows: Vec<_> = insts.iter().map(raw_features).collect();
        let stats = FeatureStats::fit(&rows).unwrap();
        for row in &rows {
            let back = stats.denormalize(&stats.normalize(row).unwrap()).unwrap();
            for (a, b) in row.iter().zip(&back) {
                assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn shape_mismatch() {
        let insts = generate_instances(3, 1, &RangeConfig::default(), 9).unwrap();
        let stats = FeatureStats::identity(16);
        assert!(matches!(featurize(&insts[0], &stats), Err(Error::Shape(_))));
    }
}
