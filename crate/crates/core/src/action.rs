use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Per-cell tilt action. `Down` decreases the downtilt by the step size,
/// `Up` increases it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Down,
    Stay,
    Up,
}

impl Action {
    /// Fixed order used for tie-breaking.
    pub const ALL: [Action; 3] = [Action::Down, Action::Stay, Action::Up];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    /// Multiplier of the tilt step: -1, 0 or +1.
    pub fn sign(self) -> i8 {
        match self {
            Action::Down => -1,
            Action::Stay => 0,
            Action::Up => 1,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Action::Down => "-a",
            Action::Stay => "0",
            Action::Up => "+a",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "-a" | "down" | "-1" => Ok(Action::Down),
            "0" | "stay" => Ok(Action::Stay),
            "+a" | "up" | "1" | "+1" => Ok(Action::Up),
            other => Err(format!("unknown action `{other}`")),
        }
    }
}

/// Subset of the three actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ActionSet(u8);

impl ActionSet {
    pub const ALL: ActionSet = ActionSet(0b111);
    pub const EMPTY: ActionSet = ActionSet(0);

    pub fn only(a: Action) -> Self {
        ActionSet(1 << a.index())
    }

    pub fn contains(self, a: Action) -> bool {
        self.0 >> a.index() & 1 == 1
    }

    pub fn insert(&mut self, a: Action) {
        self.0 |= 1 << a.index();
    }

    pub fn remove(&mut self, a: Action) {
        self.0 &= !(1 << a.index());
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Action> {
        Action::ALL.into_iter().filter(move |a| self.contains(*a))
    }
}

impl FromIterator<Action> for ActionSet {
    fn from_iter<I: IntoIterator<Item = Action>>(iter: I) -> Self {
        let mut s = ActionSet::EMPTY;
        for a in iter {
            s.insert(a);
        }
        s
    }
}
