use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("backward root must be a scalar, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),
    #[error("invalid axis {axis} for a grid of rank {rank}")]
    InvalidAxis { axis: usize, rank: usize },
    #[error("slice [{start}, {end}) out of bounds for extent {extent}")]
    SliceOutOfBounds {
        start: usize,
        end: usize,
        extent: usize,
    },
    #[error("concatenation needs at least one input")]
    EmptyConcat,
}
