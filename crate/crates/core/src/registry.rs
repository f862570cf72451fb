//! The fixed skeleton registry: 23 SMPL body joints (root excluded), three
//! axes each, for 69 position channels.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::RegistryError;

/// Which half of the body a joint belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
    Center,
}

impl Side {
    pub fn mirror(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
            Side::Center => Side::Center,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(ordinal: usize) -> Option<Axis> {
        Axis::ALL.get(ordinal).copied()
    }

    pub fn as_char(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }

    pub fn from_char(c: char) -> Option<Axis> {
        match c {
            'x' => Some(Axis::X),
            'y' => Some(Axis::Y),
            'z' => Some(Axis::Z),
            _ => None,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// One row of the registry table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointInfo {
    pub name: &'static str,
    pub ordinal: u8,
    pub side: Side,
    /// Joint name with the side prefix removed (`LElbow` and `RElbow` share `Elbow`).
    pub base: &'static str,
    pub aliases: &'static [&'static str],
}

macro_rules! joints {
    ($( $variant:ident = $ord:literal, $side:ident, $base:literal, [$($alias:literal),*] ;)*) => {
        /// Canonical joint, in SMPL order with the pelvis root removed.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum Joint {
            $($variant = $ord,)*
        }

        /// The registry: name, ordinal, side and aliases of every joint.
        pub const REGISTRY: [JointInfo; 23] = [
            $(JointInfo {
                name: stringify!($variant),
                ordinal: $ord,
                side: Side::$side,
                base: $base,
                aliases: &[$($alias),*],
            },)*
        ];

        impl Joint {
            pub const ALL: [Joint; 23] = [$(Joint::$variant,)*];
        }
    };
}

joints! {
    LHip = 0, Left, "Hip", [];
    RHip = 1, Right, "Hip", [];
    Spine1 = 2, Center, "Spine1", [];
    LKnee = 3, Left, "Knee", [];
    RKnee = 4, Right, "Knee", [];
    Spine2 = 5, Center, "Spine2", [];
    LAnkle = 6, Left, "Ankle", [];
    RAnkle = 7, Right, "Ankle", [];
    Spine3 = 8, Center, "Spine3", [];
    LFoot = 9, Left, "Foot", [];
    RFoot = 10, Right, "Foot", [];
    Neck = 11, Center, "Neck", [];
    LCollar = 12, Left, "Collar", [];
    RCollar = 13, Right, "Collar", [];
    Head = 14, Center, "Head", [];
    LShoulder = 15, Left, "Shoulder", ["LArm"];
    RShoulder = 16, Right, "Shoulder", ["RArm"];
    LElbow = 17, Left, "Elbow", [];
    RElbow = 18, Right, "Elbow", [];
    LWrist = 19, Left, "Wrist", [];
    RWrist = 20, Right, "Wrist", [];
    LHand = 21, Left, "Hand", [];
    RHand = 22, Right, "Hand", [];
}

/// Number of joint position channels (23 joints x 3 axes).
pub const CHANNEL_COUNT: usize = 69;

impl Joint {
    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(ordinal: usize) -> Option<Joint> {
        Joint::ALL.get(ordinal).copied()
    }

    pub fn info(self) -> &'static JointInfo {
        &REGISTRY[self.ordinal()]
    }

    pub fn name(self) -> &'static str {
        self.info().name
    }

    pub fn side(self) -> Side {
        self.info().side
    }

    pub fn base(self) -> &'static str {
        self.info().base
    }

    /// Name used when printing programs: the first alias if one exists
    /// (`LArm` for the left shoulder), the canonical name otherwise.
    pub fn surface_name(self) -> &'static str {
        self.info().aliases.first().copied().unwrap_or(self.name())
    }

    /// Joint with the same base on the opposite side; center joints map to themselves.
    pub fn mirror(self) -> Joint {
        let side = self.side().mirror();
        Joint::ALL
            .into_iter()
            .find(|j| j.side() == side && j.base() == self.base())
            .unwrap_or(self)
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Side implied by a joint name: an `L` or `R` followed by an upper-case letter.
pub fn side_from_name(name: &str) -> Side {
    let mut chars = name.chars();
    match (chars.next(), chars.next()) {
        (Some('L'), Some(c)) if c.is_ascii_uppercase() => Side::Left,
        (Some('R'), Some(c)) if c.is_ascii_uppercase() => Side::Right,
        _ => Side::Center,
    }
}

/// Every spelling the parser accepts: canonical names and aliases.
pub fn surface_names() -> impl Iterator<Item = (&'static str, Joint)> {
    Joint::ALL.into_iter().flat_map(|j| {
        std::iter::once(j.name())
            .chain(j.info().aliases.iter().copied())
            .map(move |n| (n, j))
    })
}

/// Resolves a canonical name or alias.
pub fn resolve_joint(name: &str) -> Result<Joint, RegistryError> {
    surface_names()
        .find(|(n, _)| *n == name)
        .map(|(_, j)| j)
        .ok_or_else(|| RegistryError::UnknownJoint {
            name: name.to_string(),
            suggestions: nearest_names(name, 3),
        })
}

fn nearest_names(name: &str, count: usize) -> Vec<String> {
    let mut scored: Vec<(usize, &str)> = surface_names()
        .map(|(n, _)| (levenshtein(&name.to_ascii_lowercase(), &n.to_ascii_lowercase()), n))
        .collect();
    scored.sort();
    scored.into_iter().take(count).map(|(_, n)| n.to_string()).collect()
}

fn levenshtein(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let next = (diag + usize::from(ca != cb)).min(row[j] + 1).min(row[j + 1] + 1);
            diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[b.len()]
}

/// A joint/axis pair addressing one component of the 69-dim position vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JointAxisChannel {
    pub joint: Joint,
    pub axis: Axis,
}

impl JointAxisChannel {
    pub fn new(joint: Joint, axis: Axis) -> Self {
        Self { joint, axis }
    }

    pub fn side(self) -> Side {
        self.joint.side()
    }

    /// `joint_ordinal * 3 + axis_ordinal`, in `0..69`.
    pub fn index(self) -> usize {
        self.joint.ordinal() * 3 + self.axis.ordinal()
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Some(Self {
            joint: Joint::from_ordinal(index / 3)?,
            axis: Axis::from_ordinal(index % 3)?,
        })
    }
}

pub fn channel_index(channel: JointAxisChannel) -> usize {
    channel.index()
}

impl fmt::Display for JointAxisChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.joint.surface_name(), self.axis)
    }
}

/// A subset of the registry, used to restrict the sampler and the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JointSet(u32);

impl JointSet {
    pub const fn all() -> Self {
        JointSet((1 << 23) - 1)
    }

    pub const fn empty() -> Self {
        JointSet(0)
    }

    pub fn of(joints: &[Joint]) -> Self {
        joints.iter().fold(Self::empty(), |s, &j| s.with(j))
    }

    pub fn side(side: Side) -> Self {
        Joint::ALL
            .into_iter()
            .filter(|j| j.side() == side)
            .fold(Self::empty(), |s, j| s.with(j))
    }

    pub fn with(self, joint: Joint) -> Self {
        JointSet(self.0 | (1 << joint.ordinal()))
    }

    pub fn contains(self, joint: Joint) -> bool {
        self.0 & (1 << joint.ordinal()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Joint> {
        Joint::ALL.into_iter().filter(move |&j| self.contains(j))
    }

    /// All channels of the member joints, in channel-index order.
    pub fn channels(self) -> Vec<JointAxisChannel> {
        self.iter()
            .flat_map(|j| Axis::ALL.into_iter().map(move |a| JointAxisChannel::new(j, a)))
            .collect()
    }
}

impl Default for JointSet {
    fn default() -> Self {
        Self::all()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_index_corners() {
        let first = JointAxisChannel::new(Joint::ALL[0], Axis::X);
        assert_eq!(channel_index(first), 0);
        assert_eq!(channel_index(JointAxisChannel::new(Joint::ALL[0], Axis::Z)), 2);
        assert_eq!(channel_index(JointAxisChannel::new(Joint::ALL[22], Axis::Z)), 68);
    }

    #[test]
    fn channel_index_is_a_bijection() {
        let mut seen = [false; CHANNEL_COUNT];
        for i in 0..CHANNEL_COUNT {
            let ch = JointAxisChannel::from_index(i).unwrap();
            assert_eq!(ch.index(), i);
            assert!(!seen[i]);
            seen[i] = true;
        }
        assert!(JointAxisChannel::from_index(CHANNEL_COUNT).is_none());
    }

    #[test]
    fn registry_shape() {
        assert_eq!(REGISTRY.len(), 23);
        let count = |s| REGISTRY.iter().filter(|j| j.side == s).count();
        // SMPL without the pelvis: nine paired limbs per side plus five spine/head joints.
        assert_eq!(count(Side::Left), 9);
        assert_eq!(count(Side::Right), 9);
        assert_eq!(count(Side::Center), 5);
        for (i, info) in REGISTRY.iter().enumerate() {
            assert_eq!(info.ordinal as usize, i);
            assert_eq!(side_from_name(info.name), info.side, "{}", info.name);
            for alias in info.aliases {
                assert_eq!(side_from_name(alias), info.side);
            }
        }
    }

    #[test]
    fn aliases_resolve() {
        assert_eq!(resolve_joint("LArm").unwrap(), Joint::LShoulder);
        assert_eq!(resolve_joint("RArm").unwrap(), Joint::RShoulder);
        assert_eq!(resolve_joint("LShoulder").unwrap(), Joint::LShoulder);
    }

    #[test]
    fn unknown_joint_suggests_neighbours() {
        let err = resolve_joint("LArn").unwrap_err();
        let RegistryError::UnknownJoint { suggestions, .. } = err;
        assert_eq!(suggestions[0], "LArm");
    }

    #[test]
    fn mirror_pairs() {
        assert_eq!(Joint::LElbow.mirror(), Joint::RElbow);
        assert_eq!(Joint::RHand.mirror(), Joint::LHand);
        assert_eq!(Joint::Neck.mirror(), Joint::Neck);
        for j in Joint::ALL {
            assert_eq!(j.mirror().mirror(), j);
        }
    }

    #[test]
    fn joint_sets() {
        assert_eq!(JointSet::all().len(), 23);
        assert_eq!(JointSet::side(Side::Left).len(), 9);
        assert_eq!(JointSet::all().channels().len(), CHANNEL_COUNT);
        let s = JointSet::of(&[Joint::Neck, Joint::LHip]);
        assert!(s.contains(Joint::Neck) && !s.contains(Joint::Head));
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![Joint::LHip, Joint::Neck]);
    }
}
