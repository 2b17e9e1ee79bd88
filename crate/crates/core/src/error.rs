use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter point {point:?} is outside the domain (coordinate {coord} not in [{lo}, {hi}])")]
    OutsideDomain {
        point: Vec<f64>,
        coord: usize,
        lo: f64,
        hi: f64,
    },

    #[error("differential has rank < n at {point:?} (singular values {sigma_min:e} / {sigma_max:e})")]
    RankDeficient {
        point: Vec<f64>,
        sigma_min: f64,
        sigma_max: f64,
    },

    #[error("immersion is sample-defined; Taylor evaluation unavailable")]
    NotAnalytic,

    #[error("linear system is singular (relative pivot {pivot:e})")]
    SingularSystem { pivot: f64 },

    #[error("second fundamental form is degenerate or indefinite at {point:?} (eigenvalues {eigenvalues:?})")]
    NotConvex {
        point: Vec<f64>,
        eigenvalues: Vec<f64>,
    },

    #[error("Blaschke condition `{condition}` violated by {defect:e} at {point:?}")]
    BlaschkeCondition {
        condition: &'static str,
        defect: f64,
        point: Vec<f64>,
    },

    #[error("quadric detected: shape operator and Ricci tensor are isotropic and |K| = {k_norm:e}")]
    QuadricDetected { k_norm: f64 },

    #[error("canonical frame undefined: {0}")]
    FrameUndefined(String),

    #[error("convexity condition fails at t = {t}: signed value {value:e}")]
    ConvexityViolated { t: f64, value: f64 },

    #[error("degenerate curve at t = {t}: {what}")]
    DegenerateCurve { t: f64, what: &'static str },

    #[error("no real (n+2)-th root with an admissible sign at t = {t} (right-hand side {rhs:e})")]
    NoRealRoot { t: f64, rhs: f64 },

    #[error("{kind} affine spheres are not classified for {case}")]
    InadmissibleSphere { kind: String, case: String },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("zeta changes sign along t (min {min:e}, max {max:e}); input spans several classification cases")]
    ZetaSignChange { min: f64, max: f64 },

    #[error("gauge coefficient vanishes at t = {t}")]
    GaugeVanishes { t: f64 },

    #[error("invalid family definition: {0}")]
    InvalidSpec(String),

    #[error("unknown curve `{0}`")]
    UnknownCurve(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
