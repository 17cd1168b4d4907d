use alloc::string::String;
use core::fmt;

use crate::grid::RegionId;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A configuration value violates its documented invariant.
    InvalidConfig(String),
    DegenerateBBox,
    GridTooSmall { rows: usize, cols: usize },
    RegionOutOfRange { region: usize, count: usize },
    NonPositiveInterval { seconds: i64 },
    DimensionMismatch { expected: usize, actual: usize },
    LengthMismatch { left: usize, right: usize },
    EmptyData(&'static str),
    ObservationOutOfRange { value: usize, max: usize },
    LabelOutOfRange { value: usize, max: usize },
    NegativeLambda(f64),
    /// NMSE is undefined when the reference series is identically zero.
    ZeroTruth { region: Option<RegionId> },
    UnknownFeatureSet(String),
    NonFinite(&'static str),
    MissingFeatures { region: RegionId, day: i64, hour: u8 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::DegenerateBBox => f.write_str("bounding box is degenerate"),
            Error::GridTooSmall { rows, cols } => {
                write!(f, "{rows}x{cols} grid is too small for 8-neighbor sets (need at least 3x3)")
            }
            Error::RegionOutOfRange { region, count } => {
                write!(f, "region {region} outside 1..={count}")
            }
            Error::NonPositiveInterval { seconds } => {
                write!(f, "segment time difference must be positive, got {seconds} s")
            }
            Error::DimensionMismatch { expected, actual } => {
                write!(f, "input has {actual} values, model expects {expected}")
            }
            Error::LengthMismatch { left, right } => {
                write!(f, "series lengths differ ({left} vs {right})")
            }
            Error::EmptyData(what) => write!(f, "no data: {what}"),
            Error::ObservationOutOfRange { value, max } => {
                write!(f, "observation {value} outside 1..={max}")
            }
            Error::LabelOutOfRange { value, max } => write!(f, "label {value} outside 1..={max}"),
            Error::NegativeLambda(l) => write!(f, "combination coefficient must be >= 0, got {l}"),
            Error::ZeroTruth { region: Some(k) } => {
                write!(f, "region {k} has all-zero ground truth; NMSE undefined")
            }
            Error::ZeroTruth { region: None } => {
                f.write_str("ground truth is all zero; NMSE undefined")
            }
            Error::UnknownFeatureSet(tag) => write!(f, "unknown feature set `{tag}`"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::MissingFeatures { region, day, hour } => {
                write!(f, "no feature row for region {region}, day {day}, hour {hour}")
            }
        }
    }
}

#[cfg(test)]
impl std::error::Error for Error {}

#[cfg(not(test))]
impl core::error::Error for Error {}
