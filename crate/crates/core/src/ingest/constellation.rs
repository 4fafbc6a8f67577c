//! Receiver SVID numbering.
//!
//! SVIDs follow the numbering used by Septentrio PolaRx scintillation
//! receivers, whose ISMR logs carry one satellite per line:
//!
//! | SVID      | System              |
//! |-----------|---------------------|
//! | 1-37      | GPS PRN 1-37        |
//! | 38-61     | GLONASS slot 1-24   |
//! | 62        | GLONASS, slot unknown |
//! | 63-68     | GLONASS slot 25-30  |
//! | 71-106    | Galileo E01-E36     |
//! | 141-180   | BeiDou C01-C40      |
//! | 223-245   | BeiDou C41-C63      |
//!
//! Everything else (SBAS, QZSS, NavIC, L-band) maps to [`Constellation::Other`].

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SvId(pub u16);

impl fmt::Display for SvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Constellation {
    Gps,
    Glonass,
    Galileo,
    Beidou,
    Other,
}

impl Constellation {
    /// The four systems retained by the pipeline, in one-hot order.
    pub const TRACKED: [Constellation; 4] = [
        Constellation::Gps,
        Constellation::Glonass,
        Constellation::Galileo,
        Constellation::Beidou,
    ];

    pub fn is_tracked(self) -> bool {
        self != Constellation::Other
    }

    /// Position in [`Self::TRACKED`].
    pub fn one_hot_index(self) -> Option<usize> {
        Self::TRACKED.iter().position(|&c| c == self)
    }

    pub fn name(self) -> &'static str {
        match self {
            Constellation::Gps => "GPS",
            Constellation::Glonass => "GLONASS",
            Constellation::Galileo => "GALILEO",
            Constellation::Beidou => "BEIDOU",
            Constellation::Other => "OTHER",
        }
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn svid_to_constellation(svid: SvId) -> Constellation {
    match svid.0 {
        1..=37 => Constellation::Gps,
        38..=68 => Constellation::Glonass,
        71..=106 => Constellation::Galileo,
        141..=180 | 223..=245 => Constellation::Beidou,
        _ => Constellation::Other,
    }
}
