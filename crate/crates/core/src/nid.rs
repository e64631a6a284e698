//! Structured 13-digit national identifier.
//!
//! Layout is `DDRTTUUSSSSSS`: district (2), RMO (1), thana (2), union (2)
//! and a six digit serial. No checksum is defined for the format, so any
//! digit combination is structurally valid. An optional district
//! allow-list can narrow that down when a deployment has one.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Total number of digits in the canonical form.
pub const NID_LEN: usize = 13;

/// Segment widths in positional order.
const WIDTHS: [(Segment, usize); 5] = [
    (Segment::District, 2),
    (Segment::Rmo, 1),
    (Segment::Thana, 2),
    (Segment::Union, 2),
    (Segment::Serial, 6),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Segment {
    District,
    Rmo,
    Thana,
    Union,
    Serial,
}

impl Segment {
    pub fn name(self) -> &'static str {
        match self {
            Segment::District => "district",
            Segment::Rmo => "rmo",
            Segment::Thana => "thana",
            Segment::Union => "union",
            Segment::Serial => "serial",
        }
    }

    fn max(self) -> u32 {
        match self {
            Segment::District | Segment::Thana | Segment::Union => 99,
            Segment::Rmo => 9,
            Segment::Serial => 999_999,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NidError {
    #[error("national id must be {NID_LEN} digits, got {found} characters")]
    Length { found: usize },
    /// `position` is the zero-based character index.
    #[error("non-digit {found:?} at position {position}")]
    Digit { position: usize, found: char },
    #[error("{} value {value} does not fit its width", segment.name())]
    Range { segment: Segment, value: u32 },
    #[error("district {district:02} is not in the allow-list")]
    DistrictNotAllowed { district: u8 },
}

/// A parsed national id. Fields are public so callers can build values
/// directly; [`format_nid`] rejects out-of-range segments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NationalId {
    pub district: u8,
    pub rmo: u8,
    pub thana: u8,
    pub union_code: u8,
    pub serial: u32,
}

impl NationalId {
    /// Builds a validated id.
    pub fn new(district: u8, rmo: u8, thana: u8, union_code: u8, serial: u32) -> Result<Self, NidError> {
        let id = NationalId { district, rmo, thana, union_code, serial };
        id.check_ranges()?;
        Ok(id)
    }

    fn segments(&self) -> [(Segment, u32); 5] {
        [
            (Segment::District, u32::from(self.district)),
            (Segment::Rmo, u32::from(self.rmo)),
            (Segment::Thana, u32::from(self.thana)),
            (Segment::Union, u32::from(self.union_code)),
            (Segment::Serial, self.serial),
        ]
    }

    fn check_ranges(&self) -> Result<(), NidError> {
        for (segment, value) in self.segments() {
            if value > segment.max() {
                return Err(NidError::Range { segment, value });
            }
        }
        Ok(())
    }

    /// Canonical 13-digit text. Panics never; out-of-range ids are
    /// rejected at construction or by [`format_nid`].
    pub fn canonical(&self) -> String {
        format!(
            "{:02}{:01}{:02}{:02}{:06}",
            self.district, self.rmo, self.thana, self.union_code, self.serial
        )
    }
}

impl fmt::Display for NationalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl FromStr for NationalId {
    type Err = NidError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_nid(s)
    }
}

impl Serialize for NationalId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.canonical())
    }
}

impl<'de> Deserialize<'de> for NationalId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_nid(&text).map_err(serde::de::Error::custom)
    }
}

/// Splits `text` positionally into the five segments.
pub fn parse_nid(text: &str) -> Result<NationalId, NidError> {
    let found = text.chars().count();
    if found != NID_LEN {
        return Err(NidError::Length { found });
    }
    if let Some((position, found)) = text.chars().enumerate().find(|(_, c)| !c.is_ascii_digit()) {
        return Err(NidError::Digit { position, found });
    }
    // All 13 chars are ASCII digits, so byte offsets equal char offsets.
    let bytes = text.as_bytes();
    let mut values = [0u32; 5];
    let mut offset = 0;
    for (slot, (_, width)) in values.iter_mut().zip(WIDTHS) {
        *slot = bytes[offset..offset + width]
            .iter()
            .fold(0u32, |acc, b| acc * 10 + u32::from(b - b'0'));
        offset += width;
    }
    Ok(NationalId {
        district: values[0] as u8,
        rmo: values[1] as u8,
        thana: values[2] as u8,
        union_code: values[3] as u8,
        serial: values[4],
    })
}

pub fn format_nid(id: &NationalId) -> Result<String, NidError> {
    id.check_ranges()?;
    Ok(id.canonical())
}

/// Optional district restriction loaded from configuration.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NidPolicy {
    allowed_districts: Option<BTreeSet<u8>>,
}

impl NidPolicy {
    pub fn permissive() -> Self {
        NidPolicy::default()
    }

    pub fn with_districts<I: IntoIterator<Item = u8>>(districts: I) -> Self {
        NidPolicy { allowed_districts: Some(districts.into_iter().collect()) }
    }

    /// Reads an allow-list file: district codes separated by whitespace or
    /// commas, `#` starts a comment.
    pub fn from_allow_list(text: &str) -> Result<Self, String> {
        let mut set = BTreeSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
                let code: u8 = tok
                    .parse()
                    .ok()
                    .filter(|c| *c <= 99)
                    .ok_or_else(|| format!("line {}: bad district code {tok:?}", lineno + 1))?;
                set.insert(code);
            }
        }
        Ok(NidPolicy { allowed_districts: Some(set) })
    }

    pub fn parse(&self, text: &str) -> Result<NationalId, NidError> {
        let id = parse_nid(text)?;
        self.check(&id)?;
        Ok(id)
    }

    pub fn check(&self, id: &NationalId) -> Result<(), NidError> {
        match &self.allowed_districts {
            Some(set) if !set.contains(&id.district) => {
                Err(NidError::DistrictNotAllowed { district: id.district })
            }
            _ => Ok(()),
        }
    }
}
