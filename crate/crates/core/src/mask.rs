//! Character-level automaton over program text, used to build validity
//! masks for constrained decoding.
//!
//! A state is live iff some completion of the consumed prefix parses and
//! validates. Besides the syntax, the automaton tracks the constraints that
//! can be decided left to right: `t_start < t_end <= T`, `|x| <= 1`, known
//! joint names (through a trie) and distinct channels within a motion.

use serde::Serialize;

use crate::parser::{is_whitespace, Language, MAX_FRACTION_DIGITS};
use crate::registry::{surface_names, Axis, Joint, JointAxisChannel};

/// Vocabulary entry standing for end of generation.
pub const EOF_TOKEN: &str = "<eof>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Phase {
    /// Expecting `[`.
    MotionOpen,
    /// After `[`.
    StartEmpty,
    StartDigits {
        value: u32,
        zero: bool,
    },
    /// After `,`.
    EndEmpty,
    EndDigits {
        value: u32,
        zero: bool,
    },
    /// After `]`: the first sensor's joint name, without whitespace.
    SensorStart,
    /// Inside a joint name, at a trie node.
    Name {
        node: u16,
    },
    /// After `.`.
    Axis,
    /// After the axis letter, expecting `(`.
    AxisDone,
    /// After `(`.
    ValueStart,
    /// After `-`.
    ValueSign,
    /// After the integer digit of the target (0 or 1).
    ValueInt {
        one: bool,
    },
    /// After the decimal point.
    ValueDot {
        one: bool,
    },
    ValueFrac {
        one: bool,
        digits: u8,
    },
    /// After `)`: accepting.
    SensorDone,
    /// After whitespace following a sensor.
    Separator,
}

/// Automaton state reached by consuming a string prefix. Only live states
/// are ever handed out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrefixState {
    phase: Phase,
    t_start: u32,
    joint: u8,
    /// Channels already used in the current motion.
    used: u128,
}

impl PrefixState {
    pub fn is_accepting(&self) -> bool {
        self.phase == Phase::SensorDone
    }
}

/// Returned when a character would make the prefix unrecoverable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("character {rejected:?} rejected; admissible: {admissible:?}")]
pub struct Rejection {
    pub rejected: char,
    /// Byte offset of the rejected character when scanning a prefix.
    pub position: usize,
    pub admissible: Vec<char>,
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: Vec<(u8, u16)>,
    terminal: Option<Joint>,
    /// Joints whose names pass through this node, as a bitmask.
    reachable: u32,
}

/// The automaton for one [`Language`].
#[derive(Debug, Clone)]
pub struct Matcher {
    language: Language,
    trie: Vec<TrieNode>,
}

const ALL_AXES: u128 = 0b111;

impl Matcher {
    pub fn new(language: Language) -> Self {
        let mut trie = vec![TrieNode::default()];
        for (name, joint) in surface_names().filter(|(_, j)| language.joints.contains(*j)) {
            let mut node = 0usize;
            trie[0].reachable |= 1 << joint.ordinal();
            for b in name.bytes() {
                let next = match trie[node].children.iter().find(|(c, _)| *c == b) {
                    Some(&(_, n)) => n as usize,
                    None => {
                        trie.push(TrieNode::default());
                        let n = trie.len() - 1;
                        trie[node].children.push((b, n as u16));
                        n
                    }
                };
                node = next;
                trie[node].reachable |= 1 << joint.ordinal();
            }
            trie[node].terminal = Some(joint);
        }
        Self { language, trie }
    }

    pub fn language(&self) -> &Language {
        &self.language
    }

    /// State for the empty prefix.
    pub fn start(&self) -> PrefixState {
        PrefixState {
            phase: Phase::MotionOpen,
            t_start: 0,
            joint: 0,
            used: 0,
        }
    }

    /// Consumes a whole prefix from the start state.
    pub fn scan(&self, prefix: &str) -> Result<PrefixState, Rejection> {
        self.scan_from(self.start(), prefix)
    }

    pub fn scan_from(&self, state: PrefixState, text: &str) -> Result<PrefixState, Rejection> {
        let mut state = state;
        for (i, c) in text.char_indices() {
            state = self.advance(&state, c).map_err(|mut r| {
                r.position = i;
                r
            })?;
        }
        Ok(state)
    }

    /// Consumes one character. Fails, listing the admissible characters,
    /// when no completion of the extended prefix would be a valid program.
    pub fn advance(&self, state: &PrefixState, c: char) -> Result<PrefixState, Rejection> {
        self.step(state, c).ok_or_else(|| Rejection {
            rejected: c,
            position: 0,
            admissible: self.admissible(state),
        })
    }

    /// Like [`Matcher::advance`] without building the rejection report.
    pub fn try_advance(&self, state: &PrefixState, c: char) -> Option<PrefixState> {
        self.step(state, c)
    }

    /// Characters accepted from `state`.
    pub fn admissible(&self, state: &PrefixState) -> Vec<char> {
        ['\t', '\n', '\r']
            .into_iter()
            .chain((0x20u8..0x7f).map(char::from))
            .filter(|&c| self.step(state, c).is_some())
            .collect()
    }

    /// Mask over `vocab`: entry `i` is true iff consuming `vocab[i]` keeps the
    /// automaton live. [`EOF_TOKEN`] is allowed iff the state is accepting.
    pub fn allowed_tokens<S: AsRef<str>>(&self, state: &PrefixState, vocab: &[S]) -> Vec<bool> {
        vocab
            .iter()
            .map(|tok| match tok.as_ref() {
                EOF_TOKEN => state.is_accepting(),
                text => self.scan_from(*state, text).is_ok(),
            })
            .collect()
    }

    fn horizon(&self) -> u32 {
        self.language.horizon.get()
    }

    fn joint_has_free_axis(used: u128, joint: usize) -> bool {
        (used >> (joint * 3)) & ALL_AXES != ALL_AXES
    }

    /// Some joint reachable from `node` still has an unused axis.
    fn node_live(&self, node: usize, used: u128) -> bool {
        let reachable = self.trie[node].reachable;
        (0..23).any(|j| reachable & (1 << j) != 0 && Self::joint_has_free_axis(used, j))
    }

    fn child(&self, node: usize, c: char) -> Option<usize> {
        let b = u8::try_from(c).ok()?;
        self.trie[node]
            .children
            .iter()
            .find(|(k, _)| *k == b)
            .map(|&(_, n)| n as usize)
    }

    /// Some extension of the digit string `value` (no leading zeros) lies in `(low, high]`.
    fn end_reachable(value: u32, zero: bool, low: u32, high: u32) -> bool {
        let (mut lo, mut span) = (u64::from(value), 1u64);
        loop {
            if lo > u64::from(high) {
                return false;
            }
            let hi = lo + span - 1;
            if hi > u64::from(low) {
                return true;
            }
            if zero {
                return false;
            }
            lo *= 10;
            span *= 10;
        }
    }

    fn step(&self, s: &PrefixState, c: char) -> Option<PrefixState> {
        let digit = c.to_digit(10);
        let with = |phase| Some(PrefixState { phase, ..*s });
        match s.phase {
            Phase::MotionOpen => (c == '[').then_some(PrefixState {
                phase: Phase::StartEmpty,
                t_start: 0,
                joint: 0,
                used: 0,
            }),
            Phase::StartEmpty => {
                let d = digit?;
                (d < self.horizon()).then_some(PrefixState {
                    phase: Phase::StartDigits { value: d, zero: d == 0 },
                    ..*s
                })
            }
            Phase::StartDigits { value, zero } => match (c, digit) {
                (',', _) => Some(PrefixState {
                    phase: Phase::EndEmpty,
                    t_start: value,
                    ..*s
                }),
                (_, Some(d)) if !zero => {
                    let v = value.checked_mul(10)?.checked_add(d)?;
                    (v < self.horizon()).then_some(PrefixState {
                        phase: Phase::StartDigits { value: v, zero: false },
                        ..*s
                    })
                }
                _ => None,
            },
            Phase::EndEmpty => {
                let d = digit?;
                let zero = d == 0;
                Self::end_reachable(d, zero, s.t_start, self.horizon()).then_some(PrefixState {
                    phase: Phase::EndDigits { value: d, zero },
                    ..*s
                })
            }
            Phase::EndDigits { value, zero } => match (c, digit) {
                (']', _) => (s.t_start < value && value <= self.horizon()).then_some(PrefixState {
                    phase: Phase::SensorStart,
                    ..*s
                }),
                (_, Some(d)) if !zero => {
                    let v = value.checked_mul(10)?.checked_add(d)?;
                    Self::end_reachable(v, false, s.t_start, self.horizon()).then_some(PrefixState {
                        phase: Phase::EndDigits { value: v, zero: false },
                        ..*s
                    })
                }
                _ => None,
            },
            Phase::SensorStart | Phase::Separator => {
                if s.phase == Phase::Separator && is_whitespace(c) {
                    return Some(*s);
                }
                let node = self.child(0, c)?;
                self.node_live(node, s.used).then_some(PrefixState {
                    phase: Phase::Name { node: node as u16 },
                    ..*s
                })
            }
            Phase::Name { node } => {
                let node = node as usize;
                if c == '.' {
                    let joint = self.trie[node].terminal?;
                    return Self::joint_has_free_axis(s.used, joint.ordinal()).then(|| PrefixState {
                        phase: Phase::Axis,
                        joint: joint.ordinal() as u8,
                        ..*s
                    });
                }
                let next = self.child(node, c)?;
                self.node_live(next, s.used).then_some(PrefixState {
                    phase: Phase::Name { node: next as u16 },
                    ..*s
                })
            }
            Phase::Axis => {
                let axis = Axis::from_char(c)?;
                let joint = Joint::from_ordinal(s.joint as usize)?;
                let bit = 1u128 << JointAxisChannel::new(joint, axis).index();
                (s.used & bit == 0).then_some(PrefixState {
                    phase: Phase::AxisDone,
                    used: s.used | bit,
                    ..*s
                })
            }
            Phase::AxisDone => (c == '(').then_some(PrefixState {
                phase: Phase::ValueStart,
                ..*s
            }),
            Phase::ValueStart | Phase::ValueSign => match (c, digit) {
                ('-', _) if s.phase == Phase::ValueStart => with(Phase::ValueSign),
                (_, Some(d)) if d <= 1 => with(Phase::ValueInt { one: d == 1 }),
                _ => None,
            },
            Phase::ValueInt { one } => match c {
                '.' => with(Phase::ValueDot { one }),
                ')' => with(Phase::SensorDone),
                _ => None,
            },
            Phase::ValueDot { one } | Phase::ValueFrac { one, .. } => {
                let digits = match s.phase {
                    Phase::ValueFrac { digits, .. } => digits,
                    _ => 0,
                };
                match (c, digit) {
                    (')', _) if digits > 0 => with(Phase::SensorDone),
                    (_, Some(d)) if (digits as usize) < MAX_FRACTION_DIGITS && (!one || d == 0) => {
                        with(Phase::ValueFrac {
                            one,
                            digits: digits + 1,
                        })
                    }
                    _ => None,
                }
            }
            Phase::SensorDone => match c {
                ';' => with(Phase::MotionOpen),
                c if is_whitespace(c) => self.node_live(0, s.used).then_some(PrefixState {
                    phase: Phase::Separator,
                    ..*s
                }),
                _ => None,
            },
        }
    }
}

/// Convenience wrapper over [`Matcher::advance`].
pub fn advance(matcher: &Matcher, state: &PrefixState, c: char) -> Result<PrefixState, Rejection> {
    matcher.advance(state, c)
}

/// Convenience wrapper over [`Matcher::allowed_tokens`].
pub fn allowed_tokens<S: AsRef<str>>(matcher: &Matcher, state: &PrefixState, vocab: &[S]) -> Vec<bool> {
    matcher.allowed_tokens(state, vocab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::Horizon;
    use crate::registry::JointSet;

    fn matcher() -> Matcher {
        Matcher::new(Language::default())
    }

    #[test]
    fn start_symbol() {
        let m = matcher();
        assert!(m.advance(&m.start(), '[').is_ok());
        let r = m.advance(&m.start(), 'L').unwrap_err();
        assert_eq!(r.admissible, vec!['[']);
        assert_eq!(m.allowed_tokens(&m.start(), &["[", "("]), vec![true, false]);
    }

    #[test]
    fn after_full_program() {
        let m = matcher();
        let s = m.scan("[0,100]LArm.x(0.3)").unwrap();
        assert!(s.is_accepting());
        assert!(m.advance(&s, ';').is_ok());
        assert_eq!(m.allowed_tokens(&s, &[";", EOF_TOKEN]), vec![true, true]);
    }

    #[test]
    fn inside_target() {
        let m = matcher();
        let s = m.scan("[0,100]LArm.x(0.3").unwrap();
        assert_eq!(m.allowed_tokens(&s, &[")", ";", "]"]), vec![true, false, false]);
        assert!(!s.is_accepting());
        assert_eq!(m.allowed_tokens(&s, &[EOF_TOKEN]), vec![false]);
    }

    #[test]
    fn window_constraints() {
        let m = Matcher::new(Language::new(Horizon::new(150).unwrap()));
        assert!(m.scan("[100,").is_ok());
        // 1 -> 10x..19x intersects (100, 150]
        assert!(m.scan("[100,1").is_ok());
        assert!(m.scan("[100,10").is_ok());
        assert!(m.scan("[100,100").is_err());
        assert!(m.scan("[100,15").is_ok());
        assert!(m.scan("[100,100]").is_err());
        assert!(m.scan("[100,101]").is_ok());
        assert!(m.scan("[100,2").is_err());
        assert!(m.scan("[100,151").is_err());
        assert!(m.scan("[100,0").is_err());
        assert!(m.scan("[150").is_err());
        assert!(m.scan("[149,150]").is_ok());
        assert!(m.scan("[01").is_err());
    }

    #[test]
    fn target_constraints() {
        let m = matcher();
        for ok in [
            "[0,1]Neck.x(1.0000)",
            "[0,1]Neck.x(-1)",
            "[0,1]Neck.x(-0.9999)",
            "[0,1]Neck.x(0)",
        ] {
            assert!(m.scan(ok).unwrap().is_accepting(), "{ok}");
        }
        for bad in [
            "[0,1]Neck.x(2",
            "[0,1]Neck.x(1.1",
            "[0,1]Neck.x(0.12345",
            "[0,1]Neck.x(00",
            "[0,1]Neck.x(0.)",
            "[0,1]Neck.x(--",
            "[0,1]Neck.x(1)2",
        ] {
            assert!(m.scan(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn joint_names_and_channels() {
        let m = matcher();
        assert!(m.scan("[0,1]LAr").is_ok());
        assert!(m.scan("[0,1]LAx").is_err());
        assert!(m.scan("[0,1]LArm.x(0) LShoulder.").is_ok());
        assert!(m.scan("[0,1]LArm.x(0) LShoulder.x").is_err());
        assert!(m.scan("[0,1]LArm.x(0);[1,2]LShoulder.x").is_ok());
        assert!(m.scan("[0,1]Neck .").is_err());
        assert!(m.scan("[0,1] Neck").is_err());
    }

    #[test]
    fn exhausted_channels_block_separator() {
        let lang = Language::default().restrict(JointSet::of(&[Joint::Neck]));
        let m = Matcher::new(lang);
        assert!(m.scan("[0,1]Neck.x(0) Neck.y(0)").is_ok());
        assert!(m.scan("[0,1]Neck.x(0) Neck.y(0) Neck.z(0)").unwrap().is_accepting());
        assert!(m.scan("[0,1]Neck.x(0) Neck.y(0) Neck.z(0) ").is_err());
    }

    #[test]
    fn rejection_position() {
        let m = matcher();
        let r = m.scan("[0,1]Neck.q").unwrap_err();
        assert_eq!(r.position, 10);
        assert_eq!(r.admissible, vec!['x', 'y', 'z']);
    }

    #[test]
    fn empty_token_keeps_state() {
        let m = matcher();
        assert_eq!(m.allowed_tokens(&m.start(), &["", "[0", "[0,"]), vec![true, true, true]);
    }
}
