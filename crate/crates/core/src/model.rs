//! Executable action models: a bounded, diversity-selected set of programs
//! whose latent timelines are composed by arithmetic disjunction.

use std::borrow::Borrow;
use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parser::print;
use crate::program::{Horizon, MotionProgram, MotionSpec};
use crate::registry::JointAxisChannel;
use crate::runtime::{
    q_value, ActionSample, BufferEntry, CompileOptions, EncodedBuffer, LatentTimeline, LatentVector,
    RepresentationProvider, StateSample,
};

/// Default bound on programs per action.
pub const DEFAULT_CAP: usize = 100;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disjunction {
    /// `1 - sum_i (1 - z_i)`. Leaves `[0, 1]` for three or more inputs.
    #[default]
    AsWritten,
    /// `1 - prod_i (1 - z_i)`, the probabilistic OR.
    Product,
}

/// Componentwise disjunction of equally sized vectors. A single input is
/// returned unchanged.
pub fn compose_disjunction<Z: Borrow<LatentVector>>(zs: &[Z], mode: Disjunction) -> Result<LatentVector> {
    let first = zs.first().ok_or(Error::Empty("disjunction input"))?.borrow();
    let dim = first.dim();
    if let Some(bad) = zs.iter().map(Borrow::borrow).find(|z| z.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.dim(),
        });
    }
    if zs.len() == 1 {
        return Ok(first.clone());
    }
    let out = (0..dim)
        .map(|k| {
            let terms = zs.iter().map(|z| 1.0 - z.borrow().0[k]);
            match mode {
                Disjunction::AsWritten => 1.0 - terms.sum::<f64>(),
                Disjunction::Product => 1.0 - terms.product::<f64>(),
            }
        })
        .collect();
    Ok(LatentVector(out))
}

/// `|len(p) - len(q)| + |channels(p) xor channels(q)|`, with length counted in motions.
pub fn diversity_distance(p: &MotionProgram, q: &MotionProgram) -> usize {
    diversity_distance_of(&Features::of(p), &Features::of(q))
}

struct Features {
    len: usize,
    channels: BTreeSet<JointAxisChannel>,
}

impl Features {
    fn of(p: &MotionProgram) -> Self {
        Self {
            len: p.len(),
            channels: p.channels(),
        }
    }
}

fn diversity_distance_of(a: &Features, b: &Features) -> usize {
    a.len.abs_diff(b.len) + a.channels.symmetric_difference(&b.channels).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionMeta {
    pub candidate_count: usize,
    /// Mean pairwise diversity distance of the selected programs.
    pub diversity_score: f64,
}

/// Indices of at most `cap` candidates, chosen by greedy farthest-point
/// selection starting from the longest program. Ties go to the candidate
/// whose canonical text sorts first.
pub fn select_diverse_indices(candidates: &[MotionProgram], cap: usize) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidates"));
    }
    if cap == 0 {
        return Err(Error::Config("cap must be at least 1".into()));
    }
    if candidates.len() <= cap {
        return Ok((0..candidates.len()).collect());
    }
    let features: Vec<Features> = candidates.iter().map(Features::of).collect();
    let texts: Vec<String> = candidates.iter().map(|p| print(&p.canonicalize())).collect();
    let better = |a: (usize, usize), b: (usize, usize)| {
        // (score, index): higher score, then smaller text, then smaller index.
        a.0 > b.0 || (a.0 == b.0 && (&texts[a.1], a.1) < (&texts[b.1], b.1))
    };

    let mut first = 0;
    for i in 1..candidates.len() {
        if better((features[i].len, i), (features[first].len, first)) {
            first = i;
        }
    }
    let mut selected = vec![first];
    let mut taken = vec![false; candidates.len()];
    taken[first] = true;
    let mut nearest: Vec<usize> = features
        .iter()
        .map(|f| diversity_distance_of(f, &features[first]))
        .collect();
    while selected.len() < cap {
        let mut best: Option<usize> = None;
        for i in (0..candidates.len()).filter(|&i| !taken[i]) {
            if best.is_none_or(|b| better((nearest[i], i), (nearest[b], b))) {
                best = Some(i);
            }
        }
        let pick = best.expect("fewer selected than candidates");
        taken[pick] = true;
        selected.push(pick);
        for (i, n) in nearest.iter_mut().enumerate() {
            *n = (*n).min(diversity_distance_of(&features[i], &features[pick]));
        }
    }
    Ok(selected)
}

pub fn select_diverse(candidates: &[MotionProgram], cap: usize) -> Result<Vec<MotionProgram>> {
    Ok(select_diverse_indices(candidates, cap)?
        .into_iter()
        .map(|i| candidates[i].clone())
        .collect())
}

fn mean_pairwise_distance(programs: &[MotionProgram]) -> f64 {
    let features: Vec<Features> = programs.iter().map(Features::of).collect();
    let mut total = 0usize;
    let mut pairs = 0usize;
    for (i, a) in features.iter().enumerate() {
        for b in &features[i + 1..] {
            total += diversity_distance_of(a, b);
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total as f64 / pairs as f64
    }
}

/// Appends `second` after `first`, shifting its windows by the last end of `first`.
pub fn merge_sequential(first: &MotionProgram, second: &MotionProgram, horizon: Horizon) -> Result<MotionProgram> {
    let offset = first.max_end();
    let span = offset + second.max_end();
    if span > horizon.get() {
        return Err(Error::HorizonExceeded {
            span,
            horizon: horizon.get(),
        });
    }
    let shifted = second
        .motions
        .iter()
        .map(|m| MotionSpec::new(m.t_start + offset, m.t_end + offset, m.sensors.clone()));
    Ok(MotionProgram::new(
        first.motions.iter().cloned().chain(shifted).collect(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutableActionModel {
    pub action_label: String,
    pub programs: Vec<MotionProgram>,
    pub cap: usize,
    pub horizon: Horizon,
    pub selection_meta: SelectionMeta,
    /// Composed timeline, present once [`ExecutableActionModel::compile`] ran.
    pub composed: Option<LatentTimeline>,
}

impl ExecutableActionModel {
    /// Selects the program set without compiling it.
    pub fn select(
        action_label: impl Into<String>,
        candidates: &[MotionProgram],
        cap: usize,
        horizon: Horizon,
    ) -> Result<Self> {
        let programs = select_diverse(candidates, cap)?;
        Ok(Self {
            action_label: action_label.into(),
            selection_meta: SelectionMeta {
                candidate_count: candidates.len(),
                diversity_score: mean_pairwise_distance(&programs),
            },
            programs,
            cap,
            horizon,
            composed: None,
        })
    }

    /// Compiles every program and composes them pointwise: timesteps covered
    /// by several programs get the disjunction of their vectors, uncovered
    /// timesteps stay zero.
    pub fn compile(
        &mut self,
        buffer: &[BufferEntry],
        provider: &dyn RepresentationProvider,
        options: CompileOptions,
    ) -> Result<&LatentTimeline> {
        let encoded = EncodedBuffer::new(buffer, provider)?;
        let timelines = self
            .programs
            .par_iter()
            .map(|p| encoded.compile_program(p, self.horizon, options))
            .collect::<Result<Vec<_>>>()?;
        let segments: Vec<_> = timelines.into_iter().flat_map(|t| t.segments).collect();
        let composed = LatentTimeline::overlay(self.horizon, encoded.dim(), &segments, options.disjunction)?;
        Ok(self.composed.insert(composed))
    }

    pub fn q_value(
        &self,
        state: &StateSample,
        action: &ActionSample,
        t: u32,
        provider: &dyn RepresentationProvider,
    ) -> Result<f64> {
        let timeline = self
            .composed
            .as_ref()
            .ok_or_else(|| Error::Config("model has not been compiled".into()))?;
        q_value(state, action, t, timeline, provider)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn build_model(
    action_label: &str,
    candidates: &[MotionProgram],
    cap: usize,
    buffer: &[BufferEntry],
    provider: &dyn RepresentationProvider,
    horizon: Horizon,
    options: CompileOptions,
) -> Result<ExecutableActionModel> {
    let mut model = ExecutableActionModel::select(action_label, candidates, cap, horizon)?;
    model.compile(buffer, provider, options)?;
    Ok(model)
}

pub fn model_q_value(
    model: &ExecutableActionModel,
    state: &StateSample,
    action: &ActionSample,
    t: u32,
    provider: &dyn RepresentationProvider,
) -> Result<f64> {
    model.q_value(state, action, t, provider)
}
