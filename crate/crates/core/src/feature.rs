//! Per-cell observation features shared by the simulator, the intent
//! bindings and the abstraction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// An observable per-cell feature.
///
/// Coverage, capacity and quality are produced by the simulator as
/// deficiencies (0 is healthy) but are exposed to intents and the
/// discretizer as health values `1 - deficiency`, so that `covHigh` means
/// good coverage. The remaining features are used as produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Tilt,
    Coverage,
    Capacity,
    Quality,
    Sinr,
    Overshoot,
    Congestion,
}

/// How a feature's stored value relates to the simulator's raw KPI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `1 - deficiency`.
    Health,
    /// The normalized KPI as emitted.
    Raw,
}

impl Feature {
    /// Schema order. Feature selections and vectors follow this order.
    pub const ALL: [Feature; 7] = [
        Feature::Tilt,
        Feature::Coverage,
        Feature::Capacity,
        Feature::Quality,
        Feature::Sinr,
        Feature::Overshoot,
        Feature::Congestion,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn orientation(self) -> Orientation {
        match self {
            Feature::Coverage | Feature::Capacity | Feature::Quality => Orientation::Health,
            _ => Orientation::Raw,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Tilt => "tilt",
            Feature::Coverage => "coverage",
            Feature::Capacity => "capacity",
            Feature::Quality => "quality",
            Feature::Sinr => "sinr",
            Feature::Overshoot => "overshoot",
            Feature::Congestion => "congestion",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown feature `{0}`")]
pub struct UnknownFeature(pub String);

impl FromStr for Feature {
    type Err = UnknownFeature;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "tilt" => Feature::Tilt,
            "coverage" | "cov" => Feature::Coverage,
            "capacity" | "cap" => Feature::Capacity,
            "quality" | "qual" => Feature::Quality,
            "sinr" => Feature::Sinr,
            "overshoot" | "ta_os" => Feature::Overshoot,
            "congestion" | "rrc_cong_rate" => Feature::Congestion,
            _ => return Err(UnknownFeature(s.to_string())),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_aliases() {
        assert_eq!("cov".parse::<Feature>().unwrap(), Feature::Coverage);
        assert_eq!("TA_OS".parse::<Feature>().unwrap(), Feature::Overshoot);
        assert!("foo".parse::<Feature>().is_err());
    }

    #[test]
    fn schema_order_matches_index() {
        for (i, f) in Feature::ALL.iter().enumerate() {
            assert_eq!(f.index(), i);
        }
    }
}
