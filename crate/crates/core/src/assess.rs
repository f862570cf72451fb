//! Action similarity: weighted unordered tree edit distance between
//! programs, sigmoid scoring against executable models, and AUROC
//! evaluation.
//!
//! Program trees have fixed depth (program -> motions -> sensors) and time
//! windows are dropped, so the unordered distance is exact with one optimal
//! assignment per level: sensors within a pair of motions, then motions.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::program::{MotionProgram, Target};
use crate::registry::{Axis, JointAxisChannel, Side};
use crate::runtime::logistic;

/// Leaf label: a sensor without its motion's time window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SensorLabel {
    pub channel: JointAxisChannel,
    pub target: Target,
}

impl SensorLabel {
    pub fn side(&self) -> Side {
        self.channel.side()
    }

    /// Joint name without its side prefix.
    pub fn joint(&self) -> &'static str {
        self.channel.joint.base()
    }

    pub fn axis(&self) -> Axis {
        self.channel.axis
    }
}

impl fmt::Display for SensorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}:{}.{}({})", self.side(), self.joint(), self.axis(), self.target)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MotionNode {
    pub sensors: Vec<SensorLabel>,
}

/// Root -> motion nodes -> sensor leaves.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProgramTree {
    pub motions: Vec<MotionNode>,
}

impl ProgramTree {
    pub fn node_count(&self) -> usize {
        1 + self.motions.iter().map(|m| 1 + m.sensors.len()).sum::<usize>()
    }
}

pub fn to_tree(program: &MotionProgram) -> ProgramTree {
    ProgramTree {
        motions: program
            .motions
            .iter()
            .map(|m| MotionNode {
                sensors: m
                    .sensors
                    .iter()
                    .map(|s| SensorLabel {
                        channel: s.channel,
                        target: s.target,
                    })
                    .collect(),
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EditCostConfig {
    pub w_side: f64,
    pub w_joint: f64,
    pub w_axis: f64,
    /// Per unit of target difference.
    pub w_target: f64,
    pub ins_del_sensor: f64,
    pub ins_del_motion: f64,
}

impl Default for EditCostConfig {
    fn default() -> Self {
        Self {
            w_side: 4.0,
            w_joint: 2.0,
            w_axis: 1.0,
            w_target: 0.5,
            ins_del_sensor: 3.0,
            ins_del_motion: 1.0,
        }
    }
}

impl EditCostConfig {
    pub fn check(&self) -> Result<()> {
        let weights = [
            self.w_side,
            self.w_joint,
            self.w_axis,
            self.w_target,
            self.ins_del_sensor,
            self.ins_del_motion,
        ];
        if !weights.iter().all(|w| w.is_finite() && *w > 0.0) {
            return Err(Error::Config("edit costs must be positive and finite".into()));
        }
        if !(self.w_side > self.w_joint && self.w_joint > self.w_axis) {
            return Err(Error::Config(
                "edit costs must satisfy w_side > w_joint > w_axis".into(),
            ));
        }
        Ok(())
    }

    pub fn relabel(&self, a: &SensorLabel, b: &SensorLabel) -> f64 {
        let flag = |differs: bool, w: f64| if differs { w } else { 0.0 };
        flag(a.side() != b.side(), self.w_side)
            + flag(a.joint() != b.joint(), self.w_joint)
            + flag(a.axis() != b.axis(), self.w_axis)
            + self.w_target * (a.target.value() - b.target.value()).abs()
    }

    /// Cost of inserting or deleting a motion together with its sensors.
    pub fn motion_subtree(&self, m: &MotionNode) -> f64 {
        self.ins_del_motion + self.ins_del_sensor * m.sensors.len() as f64
    }
}

/// Minimum total cost of a perfect matching on a square matrix
/// (shortest augmenting paths with potentials, O(n^3)).
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    if n == 0 {
        return 0.0;
    }
    // 1-based arrays; column 0 is the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| cost[row_of[j] - 1][j - 1]).sum()
}

/// Optimal matching between two child lists where unmatched children are
/// deleted or inserted at their own cost.
fn match_children(
    m: usize,
    n: usize,
    pair: impl Fn(usize, usize) -> f64,
    delete: impl Fn(usize) -> f64,
    insert: impl Fn(usize) -> f64,
) -> f64 {
    if m == 0 {
        return (0..n).map(insert).sum();
    }
    if n == 0 {
        return (0..m).map(delete).sum();
    }
    let size = m + n;
    let forbidden = 1.0 + (0..m).map(&delete).sum::<f64>() + (0..n).map(&insert).sum::<f64>();
    let mut cost = vec![vec![0.0; size]; size];
    for i in 0..m {
        for j in 0..n {
            cost[i][j] = pair(i, j).min(forbidden);
        }
        for k in 0..m {
            cost[i][n + k] = if k == i { delete(i) } else { forbidden };
        }
    }
    for j in 0..n {
        for k in 0..n {
            cost[m + j][k] = if k == j { insert(j) } else { forbidden };
        }
    }
    min_cost_assignment(&cost)
}

fn motion_distance(a: &MotionNode, b: &MotionNode, costs: &EditCostConfig) -> f64 {
    match_children(
        a.sensors.len(),
        b.sensors.len(),
        |i, j| costs.relabel(&a.sensors[i], &b.sensors[j]),
        |_| costs.ins_del_sensor,
        |_| costs.ins_del_sensor,
    )
}

/// Exact unordered tree edit distance between two program trees.
pub fn edit_distance(a: &ProgramTree, b: &ProgramTree, costs: &EditCostConfig) -> f64 {
    match_children(
        a.motions.len(),
        b.motions.len(),
        |i, j| motion_distance(&a.motions[i], &b.motions[j], costs),
        |i| costs.motion_subtree(&a.motions[i]),
        |j| costs.motion_subtree(&b.motions[j]),
    )
}

pub const ORACLE_MAX_MOTIONS: usize = 4;
pub const ORACLE_MAX_SENSORS: usize = 3;

/// Exhaustive minimum over every partial injective child mapping at both
/// levels. Only for small trees; used to cross-check [`edit_distance`].
pub fn brute_force_edit_distance(a: &ProgramTree, b: &ProgramTree, costs: &EditCostConfig) -> Result<f64> {
    for t in [a, b] {
        if t.motions.len() > ORACLE_MAX_MOTIONS || t.motions.iter().any(|m| m.sensors.len() > ORACLE_MAX_SENSORS) {
            return Err(Error::OracleBound(format!(
                "at most {ORACLE_MAX_MOTIONS} motions of at most {ORACLE_MAX_SENSORS} sensors"
            )));
        }
    }
    Ok(exhaustive(
        a.motions.len(),
        b.motions.len(),
        &|i, j| {
            let (ma, mb) = (&a.motions[i], &b.motions[j]);
            exhaustive(
                ma.sensors.len(),
                mb.sensors.len(),
                &|x, y| costs.relabel(&ma.sensors[x], &mb.sensors[y]),
                &|_| costs.ins_del_sensor,
                &|_| costs.ins_del_sensor,
            )
        },
        &|i| costs.motion_subtree(&a.motions[i]),
        &|j| costs.motion_subtree(&b.motions[j]),
    ))
}

fn exhaustive(
    m: usize,
    n: usize,
    pair: &dyn Fn(usize, usize) -> f64,
    delete: &dyn Fn(usize) -> f64,
    insert: &dyn Fn(usize) -> f64,
) -> f64 {
    fn go(
        i: usize,
        m: usize,
        n: usize,
        used: &mut Vec<bool>,
        pair: &dyn Fn(usize, usize) -> f64,
        delete: &dyn Fn(usize) -> f64,
        insert: &dyn Fn(usize) -> f64,
    ) -> f64 {
        if i == m {
            return (0..n).filter(|&j| !used[j]).map(insert).sum();
        }
        let mut best = delete(i) + go(i + 1, m, n, used, pair, delete, insert);
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                best = best.min(pair(i, j) + go(i + 1, m, n, used, pair, delete, insert));
                used[j] = false;
            }
        }
        best
    }
    go(0, m, n, &mut vec![false; n], pair, delete, insert)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Mean of `sigma(-d)` over the model programs.
    #[default]
    MeanSigma,
    /// Minimum of `sigma(-d)`, i.e. the response of the farthest program.
    MinSigma,
    /// Maximum of `sigma(-d)`, i.e. the nearest program.
    MaxSigma,
}

impl fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreMode::MeanSigma => "mean_sigma",
            ScoreMode::MinSigma => "min_sigma",
            ScoreMode::MaxSigma => "max_sigma",
        })
    }
}

impl std::str::FromStr for ScoreMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "mean_sigma" | "mean" => Ok(ScoreMode::MeanSigma),
            "min_sigma" | "min" => Ok(ScoreMode::MinSigma),
            "max_sigma" | "max" | "nearest" => Ok(ScoreMode::MaxSigma),
            other => Err(format!("unknown score mode `{other}`")),
        }
    }
}

/// Density estimate of one action built from its model programs.
#[derive(Debug, Clone, PartialEq)]
pub struct AssessmentModel {
    pub target_action: String,
    pub programs: Vec<MotionProgram>,
    pub costs: EditCostConfig,
    pub mode: ScoreMode,
    trees: Vec<ProgramTree>,
}

impl AssessmentModel {
    pub fn new(
        target_action: impl Into<String>,
        programs: Vec<MotionProgram>,
        costs: EditCostConfig,
        mode: ScoreMode,
    ) -> Result<Self> {
        if programs.is_empty() {
            return Err(Error::Empty("assessment model programs"));
        }
        costs.check()?;
        Ok(Self {
            target_action: target_action.into(),
            trees: programs.iter().map(to_tree).collect(),
            programs,
            costs,
            mode,
        })
    }

    pub fn with_mode(&self, mode: ScoreMode) -> Self {
        Self { mode, ..self.clone() }
    }

    /// Distance from the query to every model program.
    pub fn distances(&self, query: &MotionProgram) -> Vec<f64> {
        let q = to_tree(query);
        self.trees.iter().map(|t| edit_distance(t, &q, &self.costs)).collect()
    }

    pub fn score(&self, query: &MotionProgram) -> f64 {
        let responses = self.distances(query).into_iter().map(|d| logistic(-d));
        match self.mode {
            ScoreMode::MeanSigma => responses.sum::<f64>() / self.trees.len() as f64,
            ScoreMode::MinSigma => responses.fold(f64::INFINITY, f64::min),
            ScoreMode::MaxSigma => responses.fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

pub fn score(model: &AssessmentModel, query: &MotionProgram) -> f64 {
    model.score(query)
}

/// Mann-Whitney estimate of the area under the ROC curve: the fraction of
/// (positive, negative) pairs with the positive scored higher, ties counting
/// one half.
pub fn auroc(positive_scores: &[f64], negative_scores: &[f64]) -> Result<f64> {
    if positive_scores.is_empty() {
        return Err(Error::Empty("positive scores"));
    }
    if negative_scores.is_empty() {
        return Err(Error::Empty("negative scores"));
    }
    if positive_scores.iter().chain(negative_scores).any(|s| s.is_nan()) {
        return Err(Error::Format("scores must not be NaN".into()));
    }
    let mut neg = negative_scores.to_vec();
    neg.sort_by(f64::total_cmp);
    // Twice the number of wins, so ties stay integral.
    let mut twice: u128 = 0;
    for &p in positive_scores {
        let below = neg.partition_point(|&x| x < p);
        let not_above = neg.partition_point(|&x| x <= p);
        twice += 2 * below as u128 + (not_above - below) as u128;
    }
    let pairs = positive_scores.len() as u128 * negative_scores.len() as u128;
    Ok(twice as f64 / (2 * pairs) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AurocMatrix {
    pub actions: Vec<String>,
    /// `matrix[target][query]`.
    pub matrix: Vec<Vec<f64>>,
    /// Mean over the off-diagonal cells.
    pub mean_auc: f64,
}

/// Cell `(target, query)` compares the target's own instances with the
/// query's instances, both scored by the target's model.
pub fn auroc_matrix(models: &[AssessmentModel], instances: &[Vec<MotionProgram>]) -> Result<AurocMatrix> {
    if models.len() < 2 {
        return Err(Error::Config("at least two actions are required".into()));
    }
    if models.len() != instances.len() {
        return Err(Error::Config(format!(
            "{} models but {} instance sets",
            models.len(),
            instances.len()
        )));
    }
    if instances.iter().any(Vec::is_empty) {
        return Err(Error::Empty("action instances"));
    }
    let k = models.len();
    let scores: Vec<Vec<Vec<f64>>> = models
        .par_iter()
        .map(|model| {
            instances
                .iter()
                .map(|set| set.iter().map(|q| model.score(q)).collect())
                .collect()
        })
        .collect();
    let mut matrix = vec![vec![0.0; k]; k];
    let mut off_diagonal = 0.0;
    for t in 0..k {
        for q in 0..k {
            matrix[t][q] = auroc(&scores[t][t], &scores[t][q])?;
            if t != q {
                off_diagonal += matrix[t][q];
            }
        }
    }
    Ok(AurocMatrix {
        actions: models.iter().map(|m| m.target_action.clone()).collect(),
        matrix,
        mean_auc: off_diagonal / (k * (k - 1)) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::program::Horizon;
    use crate::registry::Joint;

    fn tree(text: &str) -> ProgramTree {
        to_tree(&parse(text, Horizon::DEFAULT).unwrap())
    }

    fn d(a: &str, b: &str) -> f64 {
        edit_distance(&tree(a), &tree(b), &EditCostConfig::default())
    }

    #[test]
    fn tree_shape() {
        let t = tree("[0,100]LArm.x(0.3)");
        assert_eq!(t.motions.len(), 1);
        let leaf = t.motions[0].sensors[0];
        assert_eq!(leaf.side(), Side::Left);
        assert_eq!(leaf.joint(), "Shoulder");
        assert_eq!(leaf.axis(), Axis::X);
        assert_eq!(leaf.target, Target::from_scaled(3000));
        assert_eq!(leaf.channel.joint, Joint::LShoulder);
        assert_eq!(tree("[0,100]LArm.x(0.3)"), tree("[7,900]LArm.x(0.3)"));
        assert_eq!(tree("[0,1]Neck.x(0);[1,2]Head.y(0)").motions.len(), 2);
        assert_eq!(tree("[0,1]Neck.x(0);[1,2]Head.y(0)").node_count(), 5);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(d("[0,100]LArm.x(0.3)", "[0,100]LArm.x(0.3)"), 0.0);
        assert_eq!(d("[0,100]LArm.x(0.3)", "[0,100]RArm.x(0.3)"), 4.0);
        assert_eq!(d("[0,100]LArm.x(0.3)", "[0,100]LArm.x(0.3);[100,200]LArm.y(0.3)"), 4.0);
        assert_eq!(d("[0,100]LArm.x(0.3)", "[0,100]LArm.y(0.3)"), 1.0);
        assert_eq!(d("[0,100]LArm.x(0.3)", "[0,100]LElbow.x(0.3)"), 2.0);
        assert_eq!(d("[0,100]LArm.x(0.3)", "[0,100]LArm.x(-0.1)"), 0.2);
        // Side + joint + axis exceeds delete-and-insert.
        assert_eq!(d("[0,100]LArm.x(0.3)", "[0,100]RElbow.y(0.3)"), 6.0);
    }

    #[test]
    fn distance_ignores_order_and_time() {
        let a = "[0,10]Neck.x(0.1) LHip.y(-0.5);[10,20]RWrist.z(1)";
        let b = "[3,4]RWrist.z(1);[5,600]LHip.y(-0.5) Neck.x(0.1)";
        assert_eq!(d(a, b), 0.0);
    }

    #[test]
    fn brute_force_small_cases() {
        let costs = EditCostConfig::default();
        let a = tree("[0,100]LArm.x(0.3)");
        assert_eq!(brute_force_edit_distance(&a, &a, &costs).unwrap(), 0.0);
        let b = tree("[0,100]LArm.y(0.3)");
        assert_eq!(brute_force_edit_distance(&a, &b, &costs).unwrap(), 1.0);
        let big = tree("[0,1]Neck.x(0);[1,2]Neck.x(0);[2,3]Neck.x(0);[3,4]Neck.x(0);[4,5]Neck.x(0)");
        assert!(matches!(
            brute_force_edit_distance(&a, &big, &costs),
            Err(Error::OracleBound(_))
        ));
    }

    #[test]
    fn assignment_solver() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        assert_eq!(min_cost_assignment(&cost), 5.0);
        assert_eq!(min_cost_assignment(&[]), 0.0);
    }

    #[test]
    fn cost_config_checks() {
        assert!(EditCostConfig::default().check().is_ok());
        assert!(EditCostConfig {
            w_joint: 5.0,
            ..Default::default()
        }
        .check()
        .is_err());
        assert!(EditCostConfig {
            w_target: 0.0,
            ..Default::default()
        }
        .check()
        .is_err());
    }

    #[test]
    fn scores() {
        let p = parse("[0,100]LArm.x(0.3)", Horizon::DEFAULT).unwrap();
        let q = parse("[0,100]RArm.x(0.3)", Horizon::DEFAULT).unwrap();
        let costs = EditCostConfig::default();
        for mode in [ScoreMode::MeanSigma, ScoreMode::MinSigma, ScoreMode::MaxSigma] {
            let m = AssessmentModel::new("a", vec![p.clone()], costs, mode).unwrap();
            assert_eq!(m.score(&p), 0.5);
        }
        let single = AssessmentModel::new("a", vec![p.clone()], costs, ScoreMode::MeanSigma).unwrap();
        assert!((single.score(&q) - 0.017_986_209_962_091_56).abs() < 1e-12);
        let pair = AssessmentModel::new("a", vec![p.clone(), q.clone()], costs, ScoreMode::MeanSigma).unwrap();
        assert!((pair.score(&p) - 0.258_993_104_981_045_8).abs() < 1e-12);
        assert!((pair.with_mode(ScoreMode::MinSigma).score(&p) - 0.017_986_209_962_091_56).abs() < 1e-12);
        assert_eq!(pair.with_mode(ScoreMode::MaxSigma).score(&p), 0.5);
        assert!(AssessmentModel::new("a", vec![], costs, ScoreMode::MeanSigma).is_err());
    }

    #[test]
    fn auroc_cases() {
        assert_eq!(auroc(&[0.9, 0.8], &[0.2, 0.1]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3, 0.1, 0.3], &[0.1, 0.3, 0.3]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.8, 0.3], &[0.5, 0.2]).unwrap(), 0.75);
        assert_eq!(auroc(&[0.1], &[0.2]).unwrap(), 0.0);
        assert!(auroc(&[], &[0.2]).is_err());
        assert!(auroc(&[0.1], &[]).is_err());
    }

    #[test]
    fn matrix_of_identical_actions() {
        let progs: Vec<_> = ["[0,1]Neck.x(0)", "[0,1]Head.y(0.5)"]
            .iter()
            .map(|t| parse(t, Horizon::DEFAULT).unwrap())
            .collect();
        let costs = EditCostConfig::default();
        let models = vec![
            AssessmentModel::new("a", progs.clone(), costs, ScoreMode::MeanSigma).unwrap(),
            AssessmentModel::new("b", progs.clone(), costs, ScoreMode::MeanSigma).unwrap(),
        ];
        let m = auroc_matrix(&models, &[progs.clone(), progs.clone()]).unwrap();
        assert!(m.matrix.iter().flatten().all(|&c| c == 0.5));
        assert_eq!(m.mean_auc, 0.5);
        assert!(auroc_matrix(&models[..1], std::slice::from_ref(&progs)).is_err());
        assert!(auroc_matrix(&models, &[progs, vec![]]).is_err());
    }

    #[test]
    fn crafted_sides_separate_under_min_sigma() {
        let left: Vec<_> = ["[0,1]LArm.x(0.3)", "[0,50]LArm.x(0.3)"]
            .iter()
            .map(|t| parse(t, Horizon::DEFAULT).unwrap())
            .collect();
        let right: Vec<_> = ["[0,1]RArm.x(0.3)", "[5,9]RArm.x(0.3)"]
            .iter()
            .map(|t| parse(t, Horizon::DEFAULT).unwrap())
            .collect();
        let costs = EditCostConfig::default();
        let models = vec![
            AssessmentModel::new("left", left.clone(), costs, ScoreMode::MinSigma).unwrap(),
            AssessmentModel::new("right", right.clone(), costs, ScoreMode::MinSigma).unwrap(),
        ];
        let m = auroc_matrix(&models, &[left, right]).unwrap();
        assert_eq!(m.matrix, vec![vec![0.5, 1.0], vec![1.0, 0.5]]);
        assert_eq!(m.mean_auc, 1.0);
    }
}
