use std::fmt;

use serde::{Deserialize, Serialize};

/// Amplitude scintillation severity on the corrected, smoothed S4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SeverityClass {
    /// S4 below the low threshold.
    Class1,
    Class2,
    /// S4 at or above the high threshold.
    Class3,
}

impl SeverityClass {
    pub const ALL: [SeverityClass; 3] = [Self::Class1, Self::Class2, Self::Class3];

    /// Zero-based class index used by the models.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// One-based class number used in files.
    pub fn number(self) -> usize {
        self.index() + 1
    }
}

impl fmt::Display for SeverityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Class{}", self.number())
    }
}

/// Half-open class boundaries: `[0, low)`, `[low, high)`, `[high, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityThresholds {
    pub low: f64,
    pub high: f64,
}

impl Default for SeverityThresholds {
    fn default() -> Self {
        Self {
            low: 0.2,
            high: 0.3,
        }
    }
}

impl SeverityThresholds {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.low.is_finite() && self.high.is_finite() && 0.0 < self.low && self.low < self.high) {
            return Err(format!(
                "thresholds must satisfy 0 < low < high, got low={} high={}",
                self.low, self.high
            ));
        }
        Ok(())
    }

    pub fn classify(&self, s4: f64) -> SeverityClass {
        if s4 < self.low {
            SeverityClass::Class1
        } else if s4 < self.high {
            SeverityClass::Class2
        } else {
            SeverityClass::Class3
        }
    }
}

pub fn label_severity(mean_s4: f64) -> SeverityClass {
    SeverityThresholds::default().classify(mean_s4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn thresholds() {
        assert_eq!(label_severity(0.19), SeverityClass::Class1);
        assert_eq!(label_severity(0.20), SeverityClass::Class2);
        assert_eq!(label_severity(0.30), SeverityClass::Class3);
        assert_eq!(label_severity(0.0), SeverityClass::Class1);
        assert_eq!(label_severity(0.29999), SeverityClass::Class2);
        assert_eq!(label_severity(7.5), SeverityClass::Class3);
    }

    #[test]
    fn index_round_trip() {
        for c in SeverityClass::ALL {
            assert_eq!(SeverityClass::from_index(c.index()), Some(c));
        }
        assert_eq!(SeverityClass::from_index(3), None);
        assert_eq!(SeverityClass::Class2.to_string(), "Class2");
    }

    proptest! {
        #[test]
        fn labeling_is_monotone(a in 0.0f64..2.0, b in 0.0f64..2.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(label_severity(lo) <= label_severity(hi));
        }
    }
}
