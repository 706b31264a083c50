use thiserror::Error;

/// Crate-wide error type. Variants map one-to-one onto the failure modes of
/// the individual subsystems.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum Error {
    #[error("bit access out of bounds at bit {offset} (buffer holds {total} bits)")]
    OutOfBounds { offset: u64, total: u64 },

    #[error("value {value} does not fit in {length} bits")]
    ValueTooWide { value: u32, length: u32 },

    #[error("syntax error at bit {bit_offset}: expected {expected}")]
    SyntaxError { bit_offset: u64, expected: &'static str },

    #[error("unsupported stream construct: {0}")]
    UnsupportedStream(&'static str),

    #[error("unencodable {element}: {reason}")]
    UnencodableValue { element: &'static str, reason: String },

    #[error("payload width {got} does not match site width {want}")]
    WidthMismatch { want: u32, got: u32 },

    #[error("cipher mode does not support this operation: {0}")]
    ModeMismatch(&'static str),

    #[error("stream already carries a PVEA metadata header")]
    AlreadyProvisioned,

    #[error("no UID available (neither embedded header nor sidecar)")]
    MissingUid,

    #[error("toggle schedule references picture {index} but the stream has {pictures}")]
    ScheduleOutOfRange { index: usize, pictures: usize },

    #[error("picture {0} is not an I-picture")]
    NotIntraPicture(usize),

    #[error("plane dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("inconsistent known-plaintext pairs in sub-band {band}: shifts {a} and {b}")]
    InconsistentPairs { band: usize, a: i32, b: i32 },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("bad sidecar file: {0}")]
    BadSidecar(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
