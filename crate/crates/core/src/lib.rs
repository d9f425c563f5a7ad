//! Bend-minimal extension of partial planar orthogonal drawings.

pub mod dp;
pub mod drawing;
pub mod error;
pub mod gen;
pub mod geom;
pub mod instance;
pub mod oracle;
pub mod reduction;
pub mod region;
pub mod routing;
pub mod sector;
pub mod td;
