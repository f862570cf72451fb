//! Compilation of programs into latent reward timelines and Q-value
//! evaluation through forward-backward representations.
//!
//! A motion compiles to the buffer average of its sensor response times the
//! backward embedding of each buffered state:
//!
//! ```text
//! z = 1/|D| * sum_{(s, r) in D} prod_k sigma((s.pos[c_k] - x_k)^2) * B(s)
//! ```
//!
//! and `Q(s, a, t) = F(s, a) . z_t`, with `z_t = 0` outside every window.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{compose_disjunction, Disjunction};
use crate::program::{Horizon, MotionProgram, MotionSpec, SensorTarget};
use crate::registry::CHANNEL_COUNT;

/// Full proprioceptive state dimension (positions, velocities and the rest).
pub const STATE_DIM: usize = 358;

/// Agent state. Only `pos` is read by the sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSample {
    pub pos: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vel: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<Vec<f64>>,
}

impl StateSample {
    pub fn from_pos(pos: Vec<f64>) -> Result<Self> {
        let s = Self {
            pos,
            vel: None,
            extra: None,
        };
        s.check()?;
        Ok(s)
    }

    pub fn zeros() -> Self {
        Self {
            pos: vec![0.0; CHANNEL_COUNT],
            vel: None,
            extra: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.pos.len() + self.vel.as_ref().map_or(0, Vec::len) + self.extra.as_ref().map_or(0, Vec::len)
    }

    pub fn check(&self) -> Result<()> {
        let mismatch = |expected, found| Err(Error::DimensionMismatch { expected, found });
        if self.pos.len() != CHANNEL_COUNT {
            return mismatch(CHANNEL_COUNT, self.pos.len());
        }
        if let Some(vel) = &self.vel {
            if vel.len() != CHANNEL_COUNT {
                return mismatch(CHANNEL_COUNT, vel.len());
            }
        }
        if self.extra.is_some() && self.dim() != STATE_DIM {
            return mismatch(STATE_DIM, self.dim());
        }
        if !self.components().all(f64::is_finite) {
            return Err(Error::Format("state has non-finite components".into()));
        }
        Ok(())
    }

    /// Position, velocity and extra components in order.
    pub fn components(&self) -> impl Iterator<Item = f64> + '_ {
        self.pos
            .iter()
            .chain(self.vel.iter().flatten())
            .chain(self.extra.iter().flatten())
            .copied()
    }
}

/// Control signal: one force per channel, each in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionSample(Vec<f64>);

impl ActionSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != CHANNEL_COUNT {
            return Err(Error::DimensionMismatch {
                expected: CHANNEL_COUNT,
                found: values.len(),
            });
        }
        if !values.iter().all(|v| (-1.0..=1.0).contains(v)) {
            return Err(Error::Format("action component outside [-1, 1]".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferEntry {
    #[serde(flatten)]
    pub state: StateSample,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentVector(pub Vec<f64>);

impl LatentVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &LatentVector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn scale(&self, factor: f64) -> LatentVector {
        LatentVector(self.0.iter().map(|v| v * factor).collect())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Forward and backward maps into a shared latent space.
pub trait RepresentationProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn backward(&self, state: &StateSample) -> LatentVector;
    fn forward(&self, state: &StateSample, action: &ActionSample) -> LatentVector;
}

/// Deterministic stand-in for pretrained representations: inputs are
/// quantized to 1e-3, hashed to 64 bits, expanded to `dim` values in
/// `(-1, 1)` and normalized to unit length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockProvider {
    pub seed: u64,
    pub dim: usize,
}

impl MockProvider {
    pub const DEFAULT_DIM: usize = 32;
    pub const QUANTUM: f64 = 1e-3;

    pub fn new(seed: u64, dim: usize) -> Self {
        Self { seed, dim }
    }

    fn digest(&self, tag: u64, parts: &[&[f64]]) -> u64 {
        let mut h = mix64(self.seed ^ tag);
        for (i, part) in parts.iter().enumerate() {
            h = mix64(h ^ (0xa076_1d64_78bd_642f ^ (i as u64 + 1) << 32 ^ part.len() as u64));
            for &x in *part {
                let q = (x / Self::QUANTUM).round() as i64;
                h = mix64(h.rotate_left(7) ^ q as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
            }
        }
        h
    }

    fn expand(&self, digest: u64) -> LatentVector {
        let raw: Vec<f64> = (0..self.dim as u64)
            .map(|j| {
                let bits = mix64(digest ^ mix64(j.wrapping_add(0x632b_e59b_d9b4_e019)));
                let u = ((bits >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
                2.0 * u - 1.0
            })
            .collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        LatentVector(raw.into_iter().map(|v| v / norm).collect())
    }

    fn state_parts(state: &StateSample) -> [&[f64]; 3] {
        [
            &state.pos,
            state.vel.as_deref().unwrap_or(&[]),
            state.extra.as_deref().unwrap_or(&[]),
        ]
    }
}

impl Default for MockProvider {
    fn default() -> Self {
        Self::new(0, Self::DEFAULT_DIM)
    }
}

impl RepresentationProvider for MockProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn backward(&self, state: &StateSample) -> LatentVector {
        self.expand(self.digest(0xb, &Self::state_parts(state)))
    }

    fn forward(&self, state: &StateSample, action: &ActionSample) -> LatentVector {
        let [p, v, e] = Self::state_parts(state);
        self.expand(self.digest(0xf, &[p, v, e, action.values()]))
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Sign of the squared error fed to the sigmoid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorSemantics {
    /// `sigma((s - x)^2)`, in `[0.5, 1)`.
    #[default]
    AsWritten,
    /// `sigma(-(s - x)^2)`, in `(0, 0.5]`, peaking at the target.
    Negated,
}

pub fn eval_sensor(sensor: &SensorTarget, state: &StateSample, semantics: SensorSemantics) -> f64 {
    let err = state.pos[sensor.channel.index()] - sensor.target.value();
    match semantics {
        SensorSemantics::AsWritten => logistic(err * err),
        SensorSemantics::Negated => logistic(-(err * err)),
    }
}

/// Product of the sensor responses.
pub fn eval_sensors(sensors: &[SensorTarget], state: &StateSample, semantics: SensorSemantics) -> f64 {
    sensors.iter().map(|s| eval_sensor(s, state, semantics)).product()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileOptions {
    pub semantics: SensorSemantics,
    pub disjunction: Disjunction,
}

/// One window of a timeline, covering `[t_start, t_end]` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t_start: u32,
    pub t_end: u32,
    pub z: LatentVector,
}

/// A buffer together with the backward embedding of every state.
pub struct EncodedBuffer<'a> {
    entries: &'a [BufferEntry],
    backward: Vec<LatentVector>,
    dim: usize,
}

impl<'a> EncodedBuffer<'a> {
    pub fn new(entries: &'a [BufferEntry], provider: &dyn RepresentationProvider) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let dim = provider.dim();
        let backward: Vec<LatentVector> = entries.par_iter().map(|e| provider.backward(&e.state)).collect();
        if let Some(bad) = backward.iter().find(|b| b.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(Self { entries, backward, dim })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Compiles one motion. Rewards in the buffer are not read.
    pub fn compile_motion(&self, motion: &MotionSpec, semantics: SensorSemantics) -> Segment {
        let weights: Vec<f64> = self
            .entries
            .par_iter()
            .map(|e| eval_sensors(&motion.sensors, &e.state, semantics))
            .collect();
        let mut z = vec![0.0; self.dim];
        for (w, b) in weights.iter().zip(&self.backward) {
            for (acc, v) in z.iter_mut().zip(&b.0) {
                *acc += w * v;
            }
        }
        let n = self.entries.len() as f64;
        Segment {
            t_start: motion.t_start,
            t_end: motion.t_end,
            z: LatentVector(z.into_iter().map(|v| v / n).collect()),
        }
    }

    pub fn compile_program(
        &self,
        program: &MotionProgram,
        horizon: Horizon,
        options: CompileOptions,
    ) -> Result<LatentTimeline> {
        let report = crate::program::validate(program, horizon);
        if !report.is_valid() {
            return Err(Error::Invalid(report.errors));
        }
        let raw: Vec<Segment> = program
            .motions
            .iter()
            .map(|m| self.compile_motion(m, options.semantics))
            .collect();
        LatentTimeline::overlay(horizon, self.dim, &raw, options.disjunction)
    }
}

pub fn compile_motion(
    motion: &MotionSpec,
    buffer: &[BufferEntry],
    provider: &dyn RepresentationProvider,
    semantics: SensorSemantics,
) -> Result<Segment> {
    Ok(EncodedBuffer::new(buffer, provider)?.compile_motion(motion, semantics))
}

pub fn compile_program(
    program: &MotionProgram,
    buffer: &[BufferEntry],
    provider: &dyn RepresentationProvider,
    horizon: Horizon,
    options: CompileOptions,
) -> Result<LatentTimeline> {
    EncodedBuffer::new(buffer, provider)?.compile_program(program, horizon, options)
}

/// Piecewise-constant map from timestep to latent vector, zero outside
/// its segments. Segments are sorted and never overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentTimeline {
    pub dim: usize,
    pub horizon: Horizon,
    pub segments: Vec<Segment>,
}

impl LatentTimeline {
    pub fn empty(horizon: Horizon, dim: usize) -> Self {
        Self {
            dim,
            horizon,
            segments: Vec::new(),
        }
    }

    /// Resolves possibly overlapping segments: every timestep covered by
    /// several segments gets the disjunction of their vectors.
    pub fn overlay(horizon: Horizon, dim: usize, raw: &[Segment], disjunction: Disjunction) -> Result<Self> {
        if let Some(bad) = raw.iter().find(|s| s.z.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.z.dim(),
            });
        }
        let mut cuts: Vec<u32> = raw.iter().flat_map(|s| [s.t_start, s.t_end + 1]).collect();
        cuts.sort_unstable();
        cuts.dedup();
        let mut segments = Vec::new();
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1] - 1);
            let cover: Vec<&LatentVector> = raw
                .iter()
                .filter(|s| s.t_start <= lo && hi <= s.t_end)
                .map(|s| &s.z)
                .collect();
            let z = match cover.as_slice() {
                [] => continue,
                [single] => (*single).clone(),
                many => compose_disjunction(many, disjunction)?,
            };
            segments.push(Segment {
                t_start: lo,
                t_end: hi,
                z,
            });
        }
        Ok(Self { dim, horizon, segments })
    }

    pub fn segment_at(&self, t: u32) -> Option<&Segment> {
        let i = self.segments.partition_point(|s| s.t_end < t);
        self.segments.get(i).filter(|s| s.t_start <= t)
    }

    /// `z_t`, or the zero vector when no segment covers `t`.
    pub fn lookup(&self, t: u32) -> LatentVector {
        self.segment_at(t)
            .map(|s| s.z.clone())
            .unwrap_or_else(|| LatentVector::zeros(self.dim))
    }

    pub fn scale(&self, factor: f64) -> LatentTimeline {
        LatentTimeline {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    z: s.z.scale(factor),
                    ..s.clone()
                })
                .collect(),
            ..self.clone()
        }
    }
}

/// `F(s, a) . z_t`.
pub fn q_value(
    state: &StateSample,
    action: &ActionSample,
    t: u32,
    timeline: &LatentTimeline,
    provider: &dyn RepresentationProvider,
) -> Result<f64> {
    if t > timeline.horizon.get() {
        return Err(Error::TimestepOutOfRange {
            t,
            horizon: timeline.horizon.get(),
        });
    }
    if provider.dim() != timeline.dim {
        return Err(Error::DimensionMismatch {
            expected: timeline.dim,
            found: provider.dim(),
        });
    }
    match timeline.segment_at(t) {
        None => Ok(0.0),
        Some(seg) => provider.forward(state, action).dot(&seg.z),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub n_candidates: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            n_candidates: 64,
            step: 0.05,
            seed: 0,
        }
    }
}

/// Greedy random-shooting rollout under toy dynamics
/// `pos <- clip(pos + step * a, -1, 1)`. Returns `horizon + 1` states.
pub fn rollout(
    initial: &StateSample,
    timeline: &LatentTimeline,
    provider: &dyn RepresentationProvider,
    config: RolloutConfig,
) -> Result<Vec<StateSample>> {
    initial.check()?;
    if config.n_candidates == 0 {
        return Err(Error::Config("n_candidates must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut states = Vec::with_capacity(timeline.horizon.get() as usize + 1);
    states.push(initial.clone());
    for t in 0..timeline.horizon.get() {
        let current = states.last().expect("non-empty");
        let mut best: Option<(f64, ActionSample)> = None;
        for _ in 0..config.n_candidates {
            let action = ActionSample((0..CHANNEL_COUNT).map(|_| rng.gen_range(-1.0..=1.0)).collect());
            let q = q_value(current, &action, t, timeline, provider)?;
            if best.as_ref().is_none_or(|(b, _)| q > *b) {
                best = Some((q, action));
            }
        }
        let (_, action) = best.expect("n_candidates > 0");
        let pos: Vec<f64> = current
            .pos
            .iter()
            .zip(action.values())
            .map(|(p, a)| (p + config.step * a).clamp(-1.0, 1.0))
            .collect();
        let vel = pos.iter().zip(&current.pos).map(|(n, o)| n - o).collect();
        states.push(StateSample {
            pos,
            vel: Some(vel),
            extra: current.extra.clone(),
        });
    }
    Ok(states)
}
