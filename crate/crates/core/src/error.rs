use thiserror::Error;

/// Problems with a model description.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("malformed model: {0}")]
    Structural(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("model rejected: {0}")]
    Rejected(String),
    #[error(
        "operation requires L_i = B_i B_i^T to be the identity for every interaction; \
         failing interactions: {0:?}"
    )]
    NonIdentityGram(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoiseError {
    #[error("noise window overflow: {requested} shells requested, maximum is {max}")]
    WindowOverflow { requested: usize, max: usize },
    #[error("shell index {shell} outside noise window [{lo}, {hi}]")]
    OutOfWindow { shell: i64, lo: i64, hi: i64 },
    #[error("bridge requires a GOY model")]
    NotGoy,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A single path that left the finite range.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFailure {
    pub path: u64,
    pub step: u64,
    pub t: f64,
    pub shell: usize,
    pub value: f64,
}

impl std::fmt::Display for PathFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "path {} step {} (t = {:.6e}): shell {} reached {}",
            self.path, self.step, self.t, self.shell, self.value
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("non-finite state: {0}")]
    PathFailure(PathFailure),
    #[error("{count} of {paths} paths failed; first failure: {first}")]
    EnsembleFailure {
        count: usize,
        paths: usize,
        first: PathFailure,
    },
    #[error("slab dt {slab} does not match step dt {step}")]
    StepMismatch { slab: f64, step: f64 },
    #[error("state has {got} shells of dimension {got_d}, truncation expects {want} of dimension {want_d}")]
    StateShape {
        got: usize,
        got_d: usize,
        want: usize,
        want_d: usize,
    },
    #[error("invalid simulation setting: {0}")]
    Setting(String),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MomentError {
    #[error(
        "the second-moment closure needs every L_i to be the identity; failing interactions: {0:?}"
    )]
    NonIdentityGram(Vec<String>),
    #[error("rate matrix is not symmetric: |pi[{n}][{m}] - pi[{m}][{n}]| = {gap:e}")]
    Asymmetric { n: usize, m: usize, gap: f64 },
    #[error("initial moments must be finite and non-negative (entry {0})")]
    BadInitial(usize),
    #[error("initial vector has {got} entries, matrix has {want} levels")]
    Dimension { got: usize, want: usize },
    #[error("time grid must be finite, non-negative and nondecreasing")]
    BadGrid,
    #[error(
        "implicit solver failed to converge on [{t0}, {t1}] after {substeps} substeps; \
         try a smaller truncation or the spectral/expm mode"
    )]
    Stiffness { t0: f64, t1: f64, substeps: usize },
    #[error("symmetric eigensolver did not converge in {0} sweeps")]
    Eigen(usize),
    #[error("level {0} has zero total rate; expected visits are unbounded")]
    ZeroRate(usize),
    #[error("transition matrix I - P is singular")]
    Singular,
    #[error(
        "occupation-time tail not converged: relative change {rel:e} of nu between N = {n} and N = {n_plus}"
    )]
    TailNotConverged { n: usize, n_plus: usize, rel: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("start distribution must be non-negative with positive mass")]
    BadStart,
    #[error("time grid must be finite, non-negative and nondecreasing")]
    BadGrid,
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Any failure of a composed experiment.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
