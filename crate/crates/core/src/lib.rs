//! Semantic scanpaths for gaze- and speech-driven robot assistants.
//!
//! Head poses are ranked against scene objects ([`geometry`]), turned into
//! fixation segments ([`segmentation`]), paired with the spoken request
//! ([`scanpath`]) and handed to a tool-using LLM agent ([`agent`]).
//! [`eval`] reproduces the combinatorial evaluation protocol and [`io`]
//! holds the file formats.

pub mod agent;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod scanpath;
pub mod segmentation;

use thiserror::Error;

/// Any error raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Segmentation(#[from] segmentation::SegmentationError),
    #[error(transparent)]
    Scanpath(#[from] scanpath::ScanpathError),
    #[error(transparent)]
    Parse(#[from] scanpath::ParseError),
    #[error(transparent)]
    Backend(#[from] agent::BackendError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Stats(#[from] eval::StatsError),
    #[error(transparent)]
    Io(#[from] io::IoError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
