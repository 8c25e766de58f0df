use std::path::PathBuf;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    // volume format
    #[error("bad NIfTI magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("NIfTI-2 files are not supported")]
    Nifti2Unsupported,
    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("invalid NIfTI header: {0}")]
    InvalidHeader(String),
    #[error("truncated voxel data: expected {expected} bytes, found {actual}")]
    TruncatedData { expected: usize, actual: usize },
    #[error("{count} non-finite voxel values")]
    NonFiniteVoxels { count: usize },
    #[error("label volume holds a non-integer or negative value {0}")]
    NonIntegerLabel(f64),

    // geometry
    #[error("singular transform (|det| = {0:e})")]
    SingularTransform(f64),
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    // regions
    #[error("no voxels carry any of the labels {0:?}")]
    EmptyRegion(Vec<u32>),
    #[error("reference region mean {0} is not positive")]
    ZeroReference(f64),
    #[error("invalid region definition: {0}")]
    InvalidRegion(String),

    // calibration
    #[error("unknown tracer {0:?}")]
    UnknownTracer(String),
    #[error("tracer {tracer} has no {scale} line")]
    ScaleMismatch { tracer: String, scale: String },
    #[error("degenerate anchors: group means are equal")]
    DegenerateAnchors,
    #[error("degenerate fit: {0}")]
    DegenerateFit(&'static str),
    #[error("need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("paired inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("calibration registry: {0}")]
    Registry(String),

    // staging
    #[error("age {age} outside model range [{min}, {max}]")]
    AgeOutOfRange { age: f64, min: f64, max: f64 },
    #[error("missing structure {0:?}")]
    MissingStructure(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),

    // statistics
    #[error("pooled standard deviation is zero")]
    ZeroPooledSd,
    #[error("degenerate ANOVA: {0}")]
    DegenerateAnova(&'static str),

    // mask derivation
    #[error("label {0} has no contralateral partner")]
    MissingPartner(u32),
    #[error("no structure passes the threshold")]
    EmptySelection,

    #[error("phantom blocks for labels {0} and {1} overlap")]
    OverlappingBlocks(u32, u32),
    #[error("invalid phantom: {0}")]
    InvalidPhantom(String),

    #[error("incomplete result: {0}")]
    IncompleteResult(String),
    #[error("configuration: {0}")]
    Config(String),
}

impl Error {
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping file/context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::File { source, .. } | Error::Context { source, .. } => source.root(),
            e => e,
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self.root() {
            Io(_) => 2,
            Json(_) | Csv(_) | Config(_) => 3,
            BadMagic(_) | Nifti2Unsupported | UnsupportedDatatype(_) | InvalidHeader(_)
            | TruncatedData { .. } | NonFiniteVoxels { .. } | NonIntegerLabel(_) => 4,
            SingularTransform(_) | InvalidTransform(_) | GeometryMismatch(_) => 5,
            EmptyRegion(_) | ZeroReference(_) | InvalidRegion(_) => 6,
            UnknownTracer(_) | ScaleMismatch { .. } | DegenerateAnchors | DegenerateFit(_)
            | InsufficientData { .. } | LengthMismatch(..) | Registry(_) => 7,
            AgeOutOfRange { .. } | MissingStructure(_) | OutOfRange(_) | InvalidModel(_) => 8,
            ZeroPooledSd | DegenerateAnova(_) => 9,
            MissingPartner(_) | EmptySelection => 10,
            OverlappingBlocks(..) | InvalidPhantom(_) => 11,
            IncompleteResult(_) => 12,
            File { .. } | Context { .. } => unreachable!("root() unwraps wrappers"),
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn in_file(self, path: impl Into<PathBuf>) -> Result<T>;
    fn context(self, context: impl Into<String>) -> Result<T>;
}

impl<T, E: Into<Error>> ResultExt<T> for std::result::Result<T, E> {
    fn in_file(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|e| e.into().in_file(path))
    }

    fn context(self, context: impl Into<String>) -> Result<T> {
        self.map_err(|e| e.into().context(context))
    }
}
