//! File formats: program collections and buffers as JSON-lines, timelines,
//! model bundles and AUROC reports as JSON.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::assess::{AurocMatrix, EditCostConfig, ScoreMode};
use crate::config::{ProviderConfig, RunConfig};
use crate::error::{Error, Result};
use crate::model::{ExecutableActionModel, SelectionMeta};
use crate::parser::parse;
use crate::program::{Horizon, MotionProgram};
use crate::runtime::{BufferEntry, LatentTimeline};

fn line_error(line: usize, what: impl std::fmt::Display) -> Error {
    Error::Format(format!("line {line}: {what}"))
}

/// Deserializes every non-blank line, reporting 1-based line numbers.
pub fn read_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<(usize, T)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|v| (i + 1, v))
                .map_err(|e| line_error(i + 1, e))
        })
        .collect()
}

pub fn write_jsonl<'a, T: Serialize + 'a>(items: impl IntoIterator<Item = &'a T>) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).map_err(|e| Error::Format(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectionRecord {
    pub action_label: String,
    pub program: String,
    pub source_id: String,
}

/// One parsed collection line.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledProgram {
    pub line: usize,
    pub action_label: String,
    pub source_id: String,
    pub program: MotionProgram,
}

pub fn read_collection(text: &str, horizon: Horizon) -> Result<Vec<LabeledProgram>> {
    read_jsonl::<CollectionRecord>(text)?
        .into_iter()
        .map(|(line, r)| {
            let program = parse(&r.program, horizon).map_err(|e| line_error(line, e))?;
            Ok(LabeledProgram {
                line,
                action_label: r.action_label,
                source_id: r.source_id,
                program,
            })
        })
        .collect()
}

/// Programs grouped by action label, labels in sorted order.
pub fn group_by_action(records: impl IntoIterator<Item = LabeledProgram>) -> BTreeMap<String, Vec<MotionProgram>> {
    let mut groups: BTreeMap<String, Vec<MotionProgram>> = BTreeMap::new();
    for r in records {
        groups.entry(r.action_label).or_default().push(r.program);
    }
    groups
}

pub fn read_buffer(text: &str) -> Result<Vec<BufferEntry>> {
    let entries = read_jsonl::<BufferEntry>(text)?
        .into_iter()
        .map(|(line, e)| {
            e.state.check().map_err(|err| line_error(line, err))?;
            if !e.reward.is_finite() {
                return Err(line_error(line, "reward must be finite"));
            }
            Ok(e)
        })
        .collect::<Result<Vec<_>>>()?;
    if entries.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    Ok(entries)
}

/// Line of `sample` output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub program: String,
    pub seed: u64,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineFile {
    #[serde(flatten)]
    pub timeline: LatentTimeline,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub action_label: String,
    pub programs: Vec<String>,
    pub cap: usize,
    pub selection_meta: SelectionMeta,
    pub provider: ProviderConfig,
    pub horizon: Horizon,
    pub config: RunConfig,
}

impl ModelBundle {
    pub fn new(model: &ExecutableActionModel, config: &RunConfig) -> Self {
        Self {
            action_label: model.action_label.clone(),
            programs: model.programs.iter().map(ToString::to_string).collect(),
            cap: model.cap,
            selection_meta: model.selection_meta,
            provider: config.provider,
            horizon: model.horizon,
            config: *config,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("model bundle: {e}")))
    }

    pub fn programs(&self) -> Result<Vec<MotionProgram>> {
        self.programs
            .iter()
            .enumerate()
            .map(|(i, p)| parse(p, self.horizon).map_err(|e| Error::Format(format!("model bundle program {i}: {e}"))))
            .collect()
    }

    /// The uncompiled model described by the bundle.
    pub fn to_model(&self) -> Result<ExecutableActionModel> {
        Ok(ExecutableActionModel {
            action_label: self.action_label.clone(),
            programs: self.programs()?,
            cap: self.cap,
            horizon: self.horizon,
            selection_meta: self.selection_meta,
            composed: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub action_label: String,
    pub query: String,
    pub score: f64,
    pub mode: ScoreMode,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AurocReport {
    pub actions: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    pub mean_auc: f64,
    pub mode: ScoreMode,
    pub costs: EditCostConfig,
    pub config: RunConfig,
}

impl AurocReport {
    pub fn new(result: AurocMatrix, mode: ScoreMode, config: &RunConfig) -> Self {
        Self {
            actions: result.actions,
            matrix: result.matrix,
            mean_auc: result.mean_auc,
            mode,
            costs: config.costs,
            config: *config,
        }
    }

    /// Header row of query actions, then one row per target action.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header = std::iter::once("target").chain(self.actions.iter().map(String::as_str));
        let csv_err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(header).map_err(csv_err)?;
        for (a, row) in self.actions.iter().zip(&self.matrix) {
            let cells = std::iter::once(a.clone()).chain(row.iter().map(f64::to_string));
            w.write_record(cells).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }
}
