//! Program AST: motions over time windows, each holding sensor targets.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::registry::JointAxisChannel;

/// Maximum timestep count of a program's execution window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Horizon(u32);

impl Horizon {
    pub const DEFAULT: Horizon = Horizon(1024);

    pub fn new(steps: u32) -> Option<Self> {
        (steps > 0).then_some(Horizon(steps))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl Default for Horizon {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Target position with four decimal digits, stored as `value * 10_000`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Target(i32);

impl Target {
    pub const SCALE: i32 = 10_000;
    pub const DECIMALS: usize = 4;
    pub const ZERO: Target = Target(0);
    pub const MIN: Target = Target(-Self::SCALE);
    pub const MAX: Target = Target(Self::SCALE);

    /// Wraps a scaled value without range checking; see [`Target::in_range`].
    pub const fn from_scaled(scaled: i32) -> Self {
        Target(scaled)
    }

    /// Rounds to the nearest representable value; `None` outside `[-1, 1]`.
    pub fn from_f64(value: f64) -> Option<Self> {
        let scaled = (value * Self::SCALE as f64).round();
        (scaled.abs() <= Self::SCALE as f64).then_some(Target(scaled as i32))
    }

    pub fn scaled(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / Self::SCALE as f64
    }

    pub fn in_range(self) -> bool {
        self.0.abs() <= Self::SCALE
    }
}

impl fmt::Display for Target {
    /// Shortest decimal form with at least one fraction digit: `0.3`, `-0.25`, `1.0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let int = abs / Self::SCALE as u32;
        let frac = format!("{:04}", abs % Self::SCALE as u32);
        let frac = frac.trim_end_matches('0');
        let frac = if frac.is_empty() { "0" } else { frac };
        write!(f, "{sign}{int}.{frac}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SensorTarget {
    pub channel: JointAxisChannel,
    pub target: Target,
}

impl SensorTarget {
    pub fn new(channel: JointAxisChannel, target: Target) -> Self {
        Self { channel, target }
    }
}

impl fmt::Display for SensorTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.channel, self.target)
    }
}

/// A closed time window `[t_start, t_end]` with its sensor targets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MotionSpec {
    pub t_start: u32,
    pub t_end: u32,
    pub sensors: Vec<SensorTarget>,
}

impl MotionSpec {
    pub fn new(t_start: u32, t_end: u32, sensors: Vec<SensorTarget>) -> Self {
        Self {
            t_start,
            t_end,
            sensors,
        }
    }

    pub fn covers(&self, t: u32) -> bool {
        self.t_start <= t && t <= self.t_end
    }
}

impl fmt::Display for MotionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.t_start, self.t_end)?;
        for (i, s) in self.sensors.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MotionProgram {
    pub motions: Vec<MotionSpec>,
}

impl MotionProgram {
    pub fn new(motions: Vec<MotionSpec>) -> Self {
        Self { motions }
    }

    /// Motions sorted by `(t_start, t_end)`; ties keep source order.
    pub fn canonicalize(&self) -> MotionProgram {
        let mut motions = self.motions.clone();
        motions.sort_by_key(|m| (m.t_start, m.t_end));
        MotionProgram { motions }
    }

    pub fn is_canonical(&self) -> bool {
        self.motions
            .windows(2)
            .all(|w| (w[0].t_start, w[0].t_end) <= (w[1].t_start, w[1].t_end))
    }

    /// Number of motions.
    pub fn len(&self) -> usize {
        self.motions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.motions.is_empty()
    }

    pub fn sensor_count(&self) -> usize {
        self.motions.iter().map(|m| m.sensors.len()).sum()
    }

    pub fn channels(&self) -> BTreeSet<JointAxisChannel> {
        self.sensors().map(|s| s.channel).collect()
    }

    pub fn sensors(&self) -> impl Iterator<Item = &SensorTarget> {
        self.motions.iter().flat_map(|m| m.sensors.iter())
    }

    /// Largest `t_end`, or 0 for an empty program.
    pub fn max_end(&self) -> u32 {
        self.motions.iter().map(|m| m.t_end).max().unwrap_or(0)
    }
}

impl fmt::Display for MotionProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.motions.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    EmptyProgram,
    EmptySensors,
    /// `t_start >= t_end`.
    DegenerateWindow {
        t_start: u32,
        t_end: u32,
    },
    /// `t_end > T`.
    BeyondHorizon {
        t_end: u32,
        horizon: u32,
    },
    TargetOutOfRange {
        sensor: usize,
        scaled: i32,
    },
    DuplicateChannel {
        sensor: usize,
        channel: String,
    },
    /// Warning only: two motion windows share at least one timestep.
    Overlap {
        other: usize,
    },
}

/// A constraint violation located by motion (and sensor) index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub motion: usize,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.motion;
        match &self.kind {
            ViolationKind::EmptyProgram => write!(f, "program has no motions"),
            ViolationKind::EmptySensors => write!(f, "motion {m} has no sensors"),
            ViolationKind::DegenerateWindow { t_start, t_end } => {
                write!(f, "motion {m}: [{t_start},{t_end}] violates t_start < t_end")
            }
            ViolationKind::BeyondHorizon { t_end, horizon } => {
                write!(f, "motion {m}: t_end {t_end} violates t_end <= T ({horizon})")
            }
            ViolationKind::TargetOutOfRange { sensor, scaled } => write!(
                f,
                "motion {m} sensor {sensor}: target {} out of [-1,1]",
                *scaled as f64 / Target::SCALE as f64
            ),
            ViolationKind::DuplicateChannel { sensor, channel } => {
                write!(f, "motion {m} sensor {sensor}: duplicate channel {channel}")
            }
            ViolationKind::Overlap { other } => {
                write!(f, "motion {m} overlaps motion {other}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Checks the structural constraints of a program against a horizon.
/// Overlapping windows are reported as warnings.
pub fn validate(program: &MotionProgram, horizon: Horizon) -> ValidationReport {
    let mut report = ValidationReport::default();
    if program.motions.is_empty() {
        report.errors.push(Violation {
            motion: 0,
            kind: ViolationKind::EmptyProgram,
        });
    }
    for (i, m) in program.motions.iter().enumerate() {
        let mut err = |kind| report.errors.push(Violation { motion: i, kind });
        if m.t_start >= m.t_end {
            err(ViolationKind::DegenerateWindow {
                t_start: m.t_start,
                t_end: m.t_end,
            });
        }
        if m.t_end > horizon.get() {
            err(ViolationKind::BeyondHorizon {
                t_end: m.t_end,
                horizon: horizon.get(),
            });
        }
        if m.sensors.is_empty() {
            err(ViolationKind::EmptySensors);
        }
        let mut seen = BTreeSet::new();
        for (k, s) in m.sensors.iter().enumerate() {
            if !s.target.in_range() {
                err(ViolationKind::TargetOutOfRange {
                    sensor: k,
                    scaled: s.target.scaled(),
                });
            }
            if !seen.insert(s.channel) {
                err(ViolationKind::DuplicateChannel {
                    sensor: k,
                    channel: s.channel.to_string(),
                });
            }
        }
    }
    for (i, a) in program.motions.iter().enumerate() {
        for (j, b) in program.motions.iter().enumerate().skip(i + 1) {
            if a.t_start <= b.t_end && b.t_start <= a.t_end {
                report.warnings.push(Violation {
                    motion: j,
                    kind: ViolationKind::Overlap { other: i },
                });
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::{Axis, Joint};

    fn sensor(joint: Joint, axis: Axis, scaled: i32) -> SensorTarget {
        SensorTarget::new(JointAxisChannel::new(joint, axis), Target::from_scaled(scaled))
    }

    fn single(t0: u32, t1: u32) -> MotionProgram {
        MotionProgram::new(vec![MotionSpec::new(
            t0,
            t1,
            vec![sensor(Joint::LShoulder, Axis::X, 3000)],
        )])
    }

    #[test]
    fn target_display() {
        assert_eq!(Target::from_scaled(3000).to_string(), "0.3");
        assert_eq!(Target::from_scaled(-2500).to_string(), "-0.25");
        assert_eq!(Target::ZERO.to_string(), "0.0");
        assert_eq!(Target::MAX.to_string(), "1.0");
        assert_eq!(Target::MIN.to_string(), "-1.0");
        assert_eq!(Target::from_scaled(1).to_string(), "0.0001");
        assert_eq!(Target::from_scaled(-10).to_string(), "-0.001");
    }

    #[test]
    fn target_from_f64() {
        assert_eq!(Target::from_f64(0.3), Some(Target::from_scaled(3000)));
        assert_eq!(Target::from_f64(-1.0), Some(Target::MIN));
        assert_eq!(Target::from_f64(1.5), None);
    }

    #[test]
    fn two_motion_example_is_valid() {
        let report = validate(&single(0, 100), Horizon::DEFAULT);
        assert!(report.is_valid());
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn degenerate_window() {
        let report = validate(&single(100, 100), Horizon::DEFAULT);
        assert_eq!(report.errors.len(), 1);
        assert!(report.errors[0].to_string().contains("t_start < t_end"));
    }

    #[test]
    fn beyond_horizon() {
        let report = validate(&single(0, 2000), Horizon::DEFAULT);
        assert_eq!(report.errors.len(), 1);
        assert!(report.errors[0].to_string().contains("t_end <= T"));
    }

    #[test]
    fn end_at_horizon_is_allowed() {
        assert!(validate(&single(0, 1024), Horizon::DEFAULT).is_valid());
    }

    #[test]
    fn duplicate_channel_and_range() {
        let p = MotionProgram::new(vec![MotionSpec::new(
            0,
            10,
            vec![
                sensor(Joint::Neck, Axis::Y, 0),
                sensor(Joint::Neck, Axis::Y, 100),
                sensor(Joint::Head, Axis::Y, 20_000),
            ],
        )]);
        let kinds: Vec<_> = validate(&p, Horizon::DEFAULT)
            .errors
            .into_iter()
            .map(|v| v.kind)
            .collect();
        assert!(matches!(kinds[0], ViolationKind::DuplicateChannel { sensor: 1, .. }));
        assert!(matches!(kinds[1], ViolationKind::TargetOutOfRange { sensor: 2, .. }));
    }

    #[test]
    fn shared_boundary_is_an_overlap_warning() {
        let mut p = single(0, 300);
        p.motions
            .push(MotionSpec::new(300, 600, vec![sensor(Joint::RShoulder, Axis::Y, 1000)]));
        let report = validate(&p, Horizon::DEFAULT);
        assert!(report.is_valid());
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn canonicalize_sorts_and_is_idempotent() {
        let mut p = single(50, 60);
        p.motions.extend(single(0, 10).motions);
        p.motions.extend(single(0, 5).motions);
        let c = p.canonicalize();
        let windows: Vec<_> = c.motions.iter().map(|m| (m.t_start, m.t_end)).collect();
        assert_eq!(windows, vec![(0, 5), (0, 10), (50, 60)]);
        assert_eq!(c.canonicalize(), c);
        assert!(c.is_canonical());
    }
}
