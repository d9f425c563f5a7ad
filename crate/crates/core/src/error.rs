use thiserror::Error;

use crate::geom::Point;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeomError {
    #[error("cannot parse rational `{0}`")]
    Parse(String),
    #[error("segment {0:?} -> {1:?} is not axis-aligned and non-degenerate")]
    NotAxisAligned(Point, Point),
    #[error("invalid rectilinear polygon: {0}")]
    BadPolygon(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DrawingError {
    #[error("line passes through feature point {0:?}")]
    LineHitsFeature(Point),
    #[error("strip width too large (must be below {limit})")]
    SigmaTooLarge { limit: String },
    #[error("strip width must be positive")]
    SigmaNotPositive,
    #[error("invalid selection: {0}")]
    InvalidSelection(String),
    #[error("drawing is invalid: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InstanceError {
    #[error("malformed instance: {0}")]
    Malformed(String),
    #[error("no reduction branch is valid")]
    NoValidBranch,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SectorError {
    #[error("port ray of anchor {anchor} leaves the face immediately")]
    PortBlocked { anchor: String },
    #[error("anchor {0} is not on the face boundary")]
    AnchorNotOnBoundary(String),
    #[error("sector {0} has no baseline")]
    NoBaseline(usize),
    #[error("face must be bounded")]
    Unbounded,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TdError {
    #[error("tree decomposition check failed: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Sector(#[from] SectorError),
    #[error(transparent)]
    Td(#[from] TdError),
    #[error("internal inconsistency: {0}")]
    Internal(String),
    #[error("enumeration limit of {0} search steps exceeded")]
    EnumerationLimit(usize),
    #[error("{0} reduction branches exceed the branch limit")]
    BranchLimit(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance too large for the oracle: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}
