//! Seeded generation of random valid programs.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::program::{Horizon, MotionProgram, MotionSpec, SensorTarget, Target};
use crate::registry::JointSet;

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: u32,
    pub max: u32,
}

impl CountRange {
    pub const fn new(min: u32, max: u32) -> Self {
        Self { min, max }
    }

    pub const fn exactly(n: u32) -> Self {
        Self { min: n, max: n }
    }
}

impl std::str::FromStr for CountRange {
    type Err = String;

    /// Parses `N` or `MIN..MAX` / `MIN-MAX`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parse = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("{t:?}: {e}"));
        match s.split_once("..").or_else(|| s.split_once('-')) {
            Some((a, b)) => Ok(Self::new(parse(a)?, parse(b.trim_start_matches('='))?)),
            None => parse(s).map(Self::exactly),
        }
    }
}

/// Probability that a window is shortened to leave a gap before it.
pub const GAP_PROBABILITY: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub motions: CountRange,
    pub sensors: CountRange,
    pub horizon: Horizon,
    /// Fraction digits of sampled targets, at most 4.
    pub target_decimals: u8,
    #[serde(skip, default)]
    pub joints: JointSet,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            motions: CountRange::new(1, 4),
            sensors: CountRange::new(1, 3),
            horizon: Horizon::DEFAULT,
            target_decimals: Target::DECIMALS as u8,
            joints: JointSet::all(),
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn check(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        let channels = self.joints.len() as u32 * 3;
        for (name, r) in [("motions", self.motions), ("sensors", self.sensors)] {
            if r.min == 0 || r.min > r.max {
                return fail(format!(
                    "{name} range {}..{} must be non-empty with positive lower bound",
                    r.min, r.max
                ));
            }
        }
        if self.horizon.get() < 2 {
            return fail(format!("horizon {} must be at least 2", self.horizon));
        }
        if self.sensors.max > channels {
            return fail(format!(
                "at most {channels} distinct channels per motion, asked for {}",
                self.sensors.max
            ));
        }
        if self.motions.max > self.horizon.get() {
            return fail(format!(
                "{} motions do not fit in horizon {}",
                self.motions.max, self.horizon
            ));
        }
        if usize::from(self.target_decimals) > Target::DECIMALS {
            return fail(format!(
                "target_decimals {} exceeds {}",
                self.target_decimals,
                Target::DECIMALS
            ));
        }
        Ok(())
    }
}

/// Draws one program. The same config always yields the same program.
///
/// The horizon is cut into consecutive windows sharing their boundaries;
/// each window is then shortened from the left with probability
/// [`GAP_PROBABILITY`]. Every motion samples distinct channels and targets
/// uniformly on the decimal grid of `[-1, 1]`.
pub fn sample_program(config: &SamplerConfig) -> Result<MotionProgram> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let horizon = config.horizon.get();
    let count = rng.gen_range(config.motions.min..=config.motions.max);

    // Floyd's algorithm: `count - 1` distinct cut points in 1..horizon.
    let mut cuts = BTreeSet::new();
    let pool = horizon - 1;
    for j in (pool - (count - 1))..pool {
        let r = rng.gen_range(0..=j) + 1;
        if !cuts.insert(r) {
            cuts.insert(j + 1);
        }
    }
    let mut bounds: Vec<u32> = vec![0];
    bounds.extend(cuts);
    bounds.push(horizon);

    let channels = config.joints.channels();
    let step = 10i32.pow(Target::DECIMALS as u32 - u32::from(config.target_decimals));
    let grid = 10i32.pow(u32::from(config.target_decimals));

    let mut motions = Vec::with_capacity(count as usize);
    for w in bounds.windows(2) {
        let (mut t_start, t_end) = (w[0], w[1]);
        if t_end - t_start >= 2 && rng.gen_bool(GAP_PROBABILITY) {
            t_start = rng.gen_range(t_start + 1..t_end);
        }
        let n = rng.gen_range(config.sensors.min..=config.sensors.max) as usize;
        let mut pool: Vec<_> = channels.clone();
        let mut sensors = Vec::with_capacity(n);
        for i in 0..n {
            let j = rng.gen_range(i as u32..pool.len() as u32) as usize;
            pool.swap(i, j);
            let target = Target::from_scaled(rng.gen_range(-grid..=grid) * step);
            sensors.push(SensorTarget::new(pool[i], target));
        }
        motions.push(MotionSpec::new(t_start, t_end, sensors));
    }
    Ok(MotionProgram::new(motions))
}

/// `n` programs drawn with seeds `config.seed, config.seed + 1, ...`.
pub fn sample_many(config: &SamplerConfig, n: usize) -> impl Iterator<Item = Result<(u64, MotionProgram)>> + '_ {
    (0..n as u64).map(move |i| {
        let seed = config.seed.wrapping_add(i);
        sample_program(&config.with_seed(seed)).map(|p| (seed, p))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse, print};
    use crate::program::validate;
    use crate::registry::Side;

    #[test]
    fn minimal_shape() {
        let cfg = SamplerConfig {
            motions: CountRange::exactly(1),
            sensors: CountRange::exactly(1),
            ..SamplerConfig::default()
        };
        let p = sample_program(&cfg).unwrap();
        assert_eq!(p.motions.len(), 1);
        assert_eq!(p.motions[0].sensors.len(), 1);
        let text = print(&p);
        assert_eq!(parse(&text, cfg.horizon).unwrap(), p);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SamplerConfig::default().with_seed(42);
        assert_eq!(sample_program(&cfg).unwrap(), sample_program(&cfg).unwrap());
        assert_ne!(
            sample_program(&cfg).unwrap(),
            sample_program(&cfg.with_seed(43)).unwrap()
        );
    }

    #[test]
    fn motion_counts_look_uniform() {
        let cfg = SamplerConfig {
            motions: CountRange::new(1, 4),
            ..SamplerConfig::default()
        };
        let mut hist = [0u32; 4];
        for seed in 0..1000 {
            let p = sample_program(&cfg.with_seed(seed)).unwrap();
            hist[p.motions.len() - 1] += 1;
        }
        assert!(hist.iter().all(|&c| c > 0), "{hist:?}");
        let expected = 250.0;
        let chi2: f64 = hist.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 99.9% quantile of chi-square with 3 degrees of freedom.
        assert!(chi2 < 16.27, "chi2 = {chi2}, hist = {hist:?}");
    }

    #[test]
    fn samples_validate_and_respect_joint_subset() {
        let cfg = SamplerConfig {
            motions: CountRange::new(1, 6),
            sensors: CountRange::new(1, 5),
            horizon: Horizon::new(40).unwrap(),
            target_decimals: 1,
            joints: JointSet::side(Side::Left),
            ..SamplerConfig::default()
        };
        for seed in 0..300 {
            let p = sample_program(&cfg.with_seed(seed)).unwrap();
            assert!(validate(&p, cfg.horizon).is_valid(), "{p}");
            assert!(p.is_canonical());
            for s in p.sensors() {
                assert_eq!(s.channel.side(), Side::Left);
                assert_eq!(s.target.scaled() % 1000, 0);
            }
        }
    }

    #[test]
    fn dense_windows_at_tiny_horizon() {
        let cfg = SamplerConfig {
            motions: CountRange::exactly(2),
            horizon: Horizon::new(2).unwrap(),
            ..SamplerConfig::default()
        };
        let p = sample_program(&cfg).unwrap();
        let w: Vec<_> = p.motions.iter().map(|m| (m.t_start, m.t_end)).collect();
        assert_eq!(w, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn infeasible_configs() {
        let base = SamplerConfig::default();
        for cfg in [
            SamplerConfig {
                sensors: CountRange::new(1, 70),
                ..base
            },
            SamplerConfig {
                sensors: CountRange::new(0, 2),
                ..base
            },
            SamplerConfig {
                motions: CountRange::new(3, 2),
                ..base
            },
            SamplerConfig {
                motions: CountRange::exactly(3),
                horizon: Horizon::new(2).unwrap(),
                ..base
            },
            SamplerConfig {
                horizon: Horizon::new(1).unwrap(),
                ..base
            },
            SamplerConfig {
                target_decimals: 5,
                ..base
            },
            SamplerConfig {
                joints: JointSet::side(Side::Center),
                sensors: CountRange::exactly(16),
                ..base
            },
        ] {
            assert!(matches!(sample_program(&cfg), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn count_range_from_str() {
        assert_eq!("3".parse::<CountRange>().unwrap(), CountRange::exactly(3));
        assert_eq!("1..4".parse::<CountRange>().unwrap(), CountRange::new(1, 4));
        assert_eq!("1..=4".parse::<CountRange>().unwrap(), CountRange::new(1, 4));
        assert_eq!("2-5".parse::<CountRange>().unwrap(), CountRange::new(2, 5));
        assert!("x".parse::<CountRange>().is_err());
    }
}
