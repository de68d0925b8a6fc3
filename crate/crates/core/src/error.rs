use crate::mesh::Element;
use thiserror::Error;

/// Errors shared by the mesh, estimator, marking, and driver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("macro count must be at least 1")]
    ZeroMacroCount,

    #[error("partitions are over different macro counts: {0} vs {1}")]
    MacroCountMismatch(u32, u32),

    #[error("element (macro {}, gen {}, offset {}) is not a leaf of the partition", .0.macro_cell, .0.gen, .0.offset)]
    NotALeaf(Element),

    #[error("macro index {index} out of range 1..={max}")]
    MacroIndexOutOfRange { index: u32, max: u32 },

    #[error("refinement would exceed the maximum generation {limit}")]
    GenerationLimitExceeded { limit: u32 },

    #[error("partition is not a refinement of the coarser argument")]
    NotNested,

    #[error("explicit enumeration of {count_log2_bound} bits worth of leaves exceeds the materialization limit")]
    TooManyLeaves { count_log2_bound: u32 },

    #[error("offset arithmetic overflow: element too deep for explicit representation")]
    OffsetOverflow,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("total indicator is zero; marking is undefined")]
    ZeroTotalIndicator,

    #[error("trajectory too short: need at least {need} records, got {got}")]
    TrajectoryTooShort { need: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
