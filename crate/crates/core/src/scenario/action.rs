// SPDX-License-Identifier: Apache-2.0

//! Basic and composite actions.
//!
//! Every interaction in a procedure decomposes into four basic actions:
//! rotate, press, hold and hide. Composites are named sequences of them,
//! e.g. `screw` is a rotation followed by a press.
//!
//! Actions also have a compact text notation used in event payloads and on
//! the command line:
//!
//! ```text
//! rotate(cw,1.5)   press   hold(500)   hide
//! screw[rotate(cw,1)+press]
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationDirection {
    Cw,
    Ccw,
}

impl RotationDirection {
    pub fn reversed(self) -> Self {
        match self {
            Self::Cw => Self::Ccw,
            Self::Ccw => Self::Cw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasicKind {
    Rotate,
    Press,
    Hold,
    Hide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BasicAction {
    Rotate {
        direction: RotationDirection,
        turns: f64,
    },
    Press,
    Hold {
        #[serde(default)]
        min_duration_ms: u64,
    },
    Hide,
}

impl BasicAction {
    pub fn rotate_cw(turns: f64) -> Self {
        Self::Rotate { direction: RotationDirection::Cw, turns }
    }

    pub fn rotate_ccw(turns: f64) -> Self {
        Self::Rotate { direction: RotationDirection::Ccw, turns }
    }

    pub fn hold(min_duration_ms: u64) -> Self {
        Self::Hold { min_duration_ms }
    }

    pub fn kind(&self) -> BasicKind {
        match self {
            Self::Rotate { .. } => BasicKind::Rotate,
            Self::Press => BasicKind::Press,
            Self::Hold { .. } => BasicKind::Hold,
            Self::Hide => BasicKind::Hide,
        }
    }

    /// Reverse of this action. Rotation flips direction; press, hold and hide
    /// are their own inverses (hiding a hidden part restores it).
    pub fn inverse(&self) -> Self {
        match self {
            Self::Rotate { direction, turns } => Self::Rotate { direction: direction.reversed(), turns: *turns },
            other => other.clone(),
        }
    }

    /// Returns a description of the first broken parameter constraint.
    pub fn check(&self) -> Result<(), String> {
        match self {
            Self::Rotate { turns, .. } if !(turns.is_finite() && *turns > 0.0) => {
                Err(format!("rotate turns must be positive, got {turns}"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeAction {
    pub name: String,
    pub sequence: Vec<BasicAction>,
}

impl CompositeAction {
    pub fn new(name: impl Into<String>, sequence: Vec<BasicAction>) -> Self {
        Self { name: name.into(), sequence }
    }

    /// Rotate clockwise, then press.
    pub fn screw(turns: f64) -> Self {
        Self::new("screw", vec![BasicAction::rotate_cw(turns), BasicAction::Press])
    }

    /// Press, then rotate counter-clockwise.
    pub fn unscrew(turns: f64) -> Self {
        Self::new("unscrew", vec![BasicAction::Press, BasicAction::rotate_ccw(turns)])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Basic(BasicAction),
    Composite(CompositeAction),
}

impl Action {
    /// The basic actions this action performs, in order.
    pub fn basics(&self) -> &[BasicAction] {
        match self {
            Self::Basic(b) => std::slice::from_ref(b),
            Self::Composite(c) => &c.sequence,
        }
    }

    pub fn contains_hide(&self) -> bool {
        self.basics().iter().any(|b| matches!(b, BasicAction::Hide))
    }

    pub fn check(&self) -> Result<(), String> {
        if let Self::Composite(c) = self {
            if c.name.is_empty() {
                return Err("composite name is empty".into());
            }
            if c.sequence.is_empty() {
                return Err(format!("composite `{}` has an empty sequence", c.name));
            }
        }
        self.basics().iter().try_for_each(BasicAction::check)
    }
}

impl From<BasicAction> for Action {
    fn from(b: BasicAction) -> Self {
        Self::Basic(b)
    }
}

impl From<CompositeAction> for Action {
    fn from(c: CompositeAction) -> Self {
        Self::Composite(c)
    }
}

/// Registry of composite names and their inverses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InverseLibrary {
    pairs: BTreeMap<String, String>,
}

impl Default for InverseLibrary {
    fn default() -> Self {
        Self::standard()
    }
}

impl InverseLibrary {
    pub fn empty() -> Self {
        Self { pairs: BTreeMap::new() }
    }

    /// `screw`/`unscrew`, `insert`/`extract`, `lock`/`unlock`,
    /// `attach`/`detach`.
    pub fn standard() -> Self {
        Self::empty()
            .with_pair("screw", "unscrew")
            .with_pair("insert", "extract")
            .with_pair("lock", "unlock")
            .with_pair("attach", "detach")
    }

    /// Registers `a` and `b` as inverses of each other. A name paired with
    /// itself is self-inverse.
    pub fn with_pair(mut self, a: &str, b: &str) -> Self {
        self.pairs.insert(a.to_owned(), b.to_owned());
        self.pairs.insert(b.to_owned(), a.to_owned());
        self
    }

    pub fn inverse_name(&self, name: &str) -> Option<&str> {
        self.pairs.get(name).map(String::as_str)
    }

    /// Inverts a composite: the registered inverse name, with the sequence
    /// reversed and every basic action inverted.
    pub fn invert_composite(&self, c: &CompositeAction) -> Option<CompositeAction> {
        let name = self.inverse_name(&c.name)?;
        Some(CompositeAction {
            name: name.to_owned(),
            sequence: c.sequence.iter().rev().map(BasicAction::inverse).collect(),
        })
    }

    pub fn invert(&self, action: &Action) -> Option<Action> {
        match action {
            Action::Basic(b) => Some(Action::Basic(b.inverse())),
            Action::Composite(c) => self.invert_composite(c).map(Action::Composite),
        }
    }
}

impl fmt::Display for RotationDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cw => "cw",
            Self::Ccw => "ccw",
        })
    }
}

impl fmt::Display for BasicAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Rotate { direction, turns } => write!(f, "rotate({direction},{turns})"),
            Self::Press => f.write_str("press"),
            Self::Hold { min_duration_ms } => write!(f, "hold({min_duration_ms})"),
            Self::Hide => f.write_str("hide"),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Basic(b) => b.fmt(f),
            Self::Composite(c) => {
                write!(f, "{}[", c.name)?;
                for (i, b) in c.sequence.iter().enumerate() {
                    if i > 0 {
                        f.write_str("+")?;
                    }
                    b.fmt(f)?;
                }
                f.write_str("]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid action notation `{input}`: {reason}")]
pub struct ActionParseError {
    pub input: String,
    pub reason: String,
}

impl FromStr for BasicAction {
    type Err = ActionParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| ActionParseError { input: s.to_owned(), reason: reason.to_owned() };
        let s = s.trim();
        let (head, args) = match s.find('(') {
            Some(open) => {
                let args = s[open + 1..].strip_suffix(')').ok_or_else(|| err("missing `)`"))?;
                (&s[..open], Some(args))
            }
            None => (s, None),
        };
        match (head, args) {
            ("press", None) => Ok(Self::Press),
            ("hide", None) => Ok(Self::Hide),
            ("hold", None) => Ok(Self::hold(0)),
            ("hold", Some(a)) => {
                a.trim().parse().map(Self::hold).map_err(|_| err("hold duration must be a non-negative integer"))
            }
            ("rotate", Some(a)) => {
                let (dir, turns) = a.split_once(',').ok_or_else(|| err("expected rotate(dir,turns)"))?;
                let direction = match dir.trim() {
                    "cw" => RotationDirection::Cw,
                    "ccw" => RotationDirection::Ccw,
                    _ => return Err(err("rotation direction must be cw or ccw")),
                };
                let turns: f64 = turns.trim().parse().map_err(|_| err("turns must be a number"))?;
                Ok(Self::Rotate { direction, turns })
            }
            ("press" | "hide", Some(_)) => Err(err("action takes no parameters")),
            ("rotate", None) => Err(err("rotate needs (dir,turns)")),
            _ => Err(err("unknown basic action")),
        }
    }
}

impl FromStr for Action {
    type Err = ActionParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.find('[') {
            Some(open) => {
                let body = s[open + 1..]
                    .strip_suffix(']')
                    .ok_or_else(|| ActionParseError { input: s.to_owned(), reason: "missing `]`".into() })?;
                let sequence = body
                    .split('+')
                    .filter(|p| !p.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<Vec<BasicAction>, _>>()?;
                Ok(Self::Composite(CompositeAction::new(&s[..open], sequence)))
            }
            None => s.parse().map(Self::Basic),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn screw_and_unscrew_are_library_inverses() {
        let lib = InverseLibrary::standard();
        assert_eq!(lib.invert_composite(&CompositeAction::screw(2.0)), Some(CompositeAction::unscrew(2.0)));
        assert_eq!(lib.invert_composite(&CompositeAction::unscrew(2.0)), Some(CompositeAction::screw(2.0)));
    }

    #[test]
    fn screw_is_rotate_then_press() {
        let kinds: Vec<_> = CompositeAction::screw(1.0).sequence.iter().map(BasicAction::kind).collect();
        assert_eq!(kinds, [BasicKind::Rotate, BasicKind::Press]);
        let kinds: Vec<_> = CompositeAction::unscrew(1.0).sequence.iter().map(BasicAction::kind).collect();
        assert_eq!(kinds, [BasicKind::Press, BasicKind::Rotate]);
    }

    #[test]
    fn unknown_composite_has_no_inverse() {
        let c = CompositeAction::new("wiggle", vec![BasicAction::Press]);
        assert!(InverseLibrary::standard().invert_composite(&c).is_none());
    }

    #[test]
    fn notation_examples() {
        assert_eq!("press".parse::<Action>().unwrap(), Action::Basic(BasicAction::Press));
        assert_eq!("hold".parse::<Action>().unwrap(), Action::Basic(BasicAction::hold(0)));
        assert_eq!(
            "screw[rotate(cw,1)+press]".parse::<Action>().unwrap(),
            Action::Composite(CompositeAction::screw(1.0))
        );
        assert_eq!(Action::from(CompositeAction::unscrew(0.5)).to_string(), "unscrew[press+rotate(ccw,0.5)]");
        assert!("spin".parse::<Action>().is_err());
        assert!("rotate(up,1)".parse::<Action>().is_err());
        assert!("hold(-3)".parse::<Action>().is_err());
    }

    #[test]
    fn json_shape() {
        let a = Action::from(CompositeAction::screw(1.0));
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(
            json,
            r#"{"composite":{"name":"screw","sequence":[{"kind":"rotate","direction":"cw","turns":1.0},{"kind":"press"}]}}"#
        );
        let hold: BasicAction = serde_json::from_str(r#"{"kind":"hold"}"#).unwrap();
        assert_eq!(hold, BasicAction::hold(0));
        assert!(serde_json::from_str::<BasicAction>(r#"{"kind":"twist"}"#).is_err());
    }

    #[test]
    fn nonpositive_turns_rejected() {
        assert!(BasicAction::rotate_cw(0.0).check().is_err());
        assert!(BasicAction::rotate_cw(f64::NAN).check().is_err());
        assert!(Action::Composite(CompositeAction::new("x", vec![])).check().is_err());
    }

    fn basic() -> impl Strategy<Value = BasicAction> {
        prop_oneof![
            (any::<bool>(), 1u32..10_000).prop_map(|(cw, t)| {
                let turns = f64::from(t) / 64.0;
                if cw {
                    BasicAction::rotate_cw(turns)
                } else {
                    BasicAction::rotate_ccw(turns)
                }
            }),
            Just(BasicAction::Press),
            (0u64..100_000).prop_map(BasicAction::hold),
            Just(BasicAction::Hide),
        ]
    }

    proptest! {
        #[test]
        fn notation_round_trips(seq in proptest::collection::vec(basic(), 1..6), composite in any::<bool>()) {
            let action = if composite {
                Action::Composite(CompositeAction::new("screw", seq))
            } else {
                Action::Basic(seq[0].clone())
            };
            prop_assert_eq!(action.to_string().parse::<Action>().unwrap(), action);
        }

        #[test]
        fn library_inversion_is_involution(seq in proptest::collection::vec(basic(), 1..6)) {
            let lib = InverseLibrary::standard();
            let c = CompositeAction::new("insert", seq);
            let back = lib.invert_composite(&lib.invert_composite(&c).unwrap()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
