//! Seeded random instance generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{CostWeights, EdgeParams, OffloadInstance, VehicleParams, MAX_VEHICLES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub fn fixed(v: f64) -> Self {
        Range { min: v, max: v }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) || self.min <= 0.0 {
            return Err(Error::Config(format!(
                "{name}: bounds must be finite and positive ({} .. {})",
                self.min, self.max
            )));
        }
        if self.min > self.max {
            return Err(Error::Config(format!(
                "{name}: min {} exceeds max {}",
                self.min, self.max
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.gen_range(self.min..=self.max)
        }
    }
}

/// Parameter ranges for instance generation. Field names follow the keys of
/// the flat config file (`data_size_bits.min`, `gain.max`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeConfig {
    pub n_vehicles: usize,
    pub data_size_bits: Range,
    pub cpu_cycles: Range,
    pub local_freq: f64,
    pub tx_power: f64,
    pub bandwidth: f64,
    pub gain: Range,
    pub noise_power: f64,
    pub edge_freq: f64,
    pub kappa: f64,
    pub w_time: f64,
    pub w_energy: f64,
}

impl Default for RangeConfig {
    fn default() -> Self {
        RangeConfig {
            n_vehicles: 2,
            data_size_bits: Range {
                min: 0.5e6,
                max: 4e6,
            },
            cpu_cycles: Range {
                min: 0.2e9,
                max: 2e9,
            },
            local_freq: 1e9,
            tx_power: 10.0,
            bandwidth: 1e6,
            gain: Range {
                min: 1e-7,
                max: 1e-4,
            },
            noise_power: 1e-9,
            edge_freq: 1e10,
            kappa: 1e-27,
            w_time: 1.0,
            w_energy: 1.0,
        }
    }
}

impl RangeConfig {
    pub fn validate(&self) -> Result<()> {
        self.data_size_bits.validate("data_size_bits")?;
        self.cpu_cycles.validate("cpu_cycles")?;
        self.gain.validate("gain")?;
        if self.gain.max > 1.0 {
            return Err(Error::Config(format!(
                "gain.max {} exceeds 1",
                self.gain.max
            )));
        }
        for (name, v) in [
            ("local_freq", self.local_freq),
            ("tx_power", self.tx_power),
            ("bandwidth", self.bandwidth),
            ("noise_power", self.noise_power),
            ("edge_freq", self.edge_freq),
            ("kappa", self.kappa),
        ] {
            Range::fixed(v).validate(name)?;
        }
        self.weights()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn edge(&self) -> EdgeParams {
        EdgeParams {
            edge_freq: self.edge_freq,
            noise_power: self.noise_power,
        }
    }

    pub fn weights(&self) -> CostWeights {
        CostWeights {
            w_time: self.w_time,
            w_energy: self.w_energy,
            kappa: self.kappa,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent seed for stream `stream` under base seed `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(base) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn generate_instance(n_vehicles: usize, ranges: &RangeConfig, seed: u64) -> OffloadInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vehicles = (0..n_vehicles)
        .map(|_| VehicleParams {
            data_size: ranges.data_size_bits.sample(&mut rng),
            cpu_cycles: ranges.cpu_cycles.sample(&mut rng),
            local_freq: ranges.local_freq,
            tx_power: ranges.tx_power,
            channel_gain: ranges.gain.sample(&mut rng),
            bandwidth: ranges.bandwidth,
        })
        .collect();
    OffloadInstance {
        vehicles,
        edge: ranges.edge(),
        weights: ranges.weights(),
        seed,
    }
}

/// Draws `n_instances` instances, each from its own derived seed, so the
/// result is independent of how the work is scheduled across threads.
pub fn generate_instances(
    n_vehicles: usize,
    n_instances: usize,
    ranges: &RangeConfig,
    seed: u64,
) -> Result<Vec<OffloadInstance>> {
    if n_vehicles == 0 || n_vehicles > MAX_VEHICLES {
        return Err(Error::SizeLimit(format!(
            "n_vehicles = {n_vehicles}, supported range is 1..={MAX_VEHICLES}"
        )));
    }
    ranges.validate()?;
    Ok((0..n_instances as u64)
        .into_par_iter()
        .map(|i| generate_instance(n_vehicles, ranges, derive_seed(seed, i)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_seed_sensitive() {
        let r = RangeConfig::default();
        let a = generate_instances(3, 50, &r, 7).unwrap();
        let b = generate_instances(3, 50, &r, 7).unwrap();
        let c = generate_instances(3, 50, &r, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for inst in &a {
            inst.validate().unwrap();
        }
    }

    #[test]
    fn parallel_equals_sequential() {
        let r = RangeConfig::default();
        let par = generate_instances(2, 64, &r, 3).unwrap();
        let seq: Vec<_> = (0..64)
            .map(|i| generate_instance(2, &r, derive_seed(3, i)))
            .collect();
        assert_eq!(par, seq);
    }

    #[test]
    fn forty_thousand_samples() {
        let insts = generate_instances(2, 40_000, &RangeConfig::default(), 1).unwrap();
        assert_eq!(insts.len(), 40_000);
    }

    #[test]
    fn degenerate_range_is_constant() {
        let r = RangeConfig {
            cpu_cycles: Range::fixed(1e9),
            ..RangeConfig::default()
        };
        let insts = generate_instances(4, 20, &r, 11).unwrap();
        assert!(insts
            .iter()
            .flat_map(|i| &i.vehicles)
            .all(|v| v.cpu_cycles == 1e9));
    }

    #[test]
    fn samples_stay_in_range() {
        let r = RangeConfig::default();
        for inst in generate_instances(5, 200, &r, 5).unwrap() {
            for v in &inst.vehicles {
                assert!((r.gain.min..=r.gain.max).contains(&v.channel_gain));
                assert!((r.data_size_bits.min..=r.data_size_bits.max).contains(&v.data_size));
            }
        }
    }

    #[test]
    fn invalid_ranges_rejected() {
        let r = RangeConfig {
            gain: Range {
                min: 1e-3,
                max: 1e-5,
            },
            ..RangeConfig::default()
        };
        assert!(matches!(
            generate_instances(2, 1, &r, 0),
            Err(Error::Config(_))
        ));
        let mut r = RangeConfig::default();
        r.data_size_bits.min = 0.0;
        assert!(matches!(
            generate_instances(2, 1, &r, 0),
            Err(Error::Config(_))
        ));
        assert!(generate_instances(17, 1, &RangeConfig::default(), 0).is_err());
    }
}
