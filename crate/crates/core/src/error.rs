use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpectraError {
    #[error("cyclic tuple must have at least one entry")]
    EmptyTuple,
    #[error("boundary classes canonicalized under different policies")]
    PolicyMismatch,
    #[error("{0}")]
    TableMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("chord {chord} is not incident to exactly two matching vertices")]
    DanglingChord { chord: usize },
    #[error("chord {chord} is twisted in an oriented diagram")]
    TwistInOrientedMode { chord: usize },
    #[error("odd Euler defect {defect} in oriented mode")]
    NonIntegerGenus { defect: i64 },
    #[error("negative Euler index {0}")]
    NegativeEulerIndex(i64),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{chords} chords need {} chord ends but only {vertices} vertices exist", 2 * chords)]
    TooManyChords { chords: u32, vertices: u64 },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeriesError {
    #[error("series use different cyclic policies")]
    PolicyMismatch,
    #[error("series use different truncations")]
    TruncationMismatch,
    #[error("series has constant term {0}; log needs the form 1 + N")]
    NotLogarithmizable(String),
    #[error("series term {0} has zero grading; exp/log would not terminate")]
    ZeroGradeTerm(String),
    #[error("oriented series term {0} carries an odd power of x")]
    OddGenusPower(String),
    #[error("coefficient {value} of {monomial} is not a nonnegative integer")]
    NonIntegralCount { monomial: String, value: String },
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CutJoinError {
    #[error("constructed tuple entry would be negative ({0})")]
    NegativeEntry(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("no table available for b={backbones} at k={k}")]
    MissingTable { backbones: String, k: u32 },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}
