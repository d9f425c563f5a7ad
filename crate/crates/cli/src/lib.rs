//! Document format, SVG rendering and the command-line surface.

pub mod app;
pub mod doc;
pub mod render;
