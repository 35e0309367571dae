use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("gap closes at k = ({kx:.6}, {ky:.6}): |d(k)| = {norm:.3e}")]
    GapClosure { kx: f64, ky: f64, norm: f64 },

    #[error("Chern sum {value} is not within tolerance of an integer (mesh too coarse or gap closing)")]
    NonIntegerChern { value: f64 },

    #[error("spectral density is empty")]
    EmptyDensity,

    #[error("no quantum-noise channel: equal-time correlator {value:.3e} vanishes")]
    ZeroNoise { value: f64 },

    #[error("accelerated Matsubara sum did not converge: estimates {first} and {second}")]
    NotConverged { first: f64, second: f64 },

    #[error("{0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{sites} sites exceed the exact-diagonalization limit of {max}")]
    DimensionTooLarge { sites: usize, max: usize },

    #[error("current operator has vanishing Kubo-Mori norm")]
    ZeroCurrentNorm,

    #[error("Mori chain terminated at level {0} (Krylov space exhausted)")]
    ChainTerminated(usize),

    #[error("eigenpair residual {residual:.3e} exceeds tolerance")]
    Diagonalization { residual: f64 },
}

impl Error {
    /// Physics-domain failures as opposed to resource guards or bad input.
    pub fn is_physics_domain(&self) -> bool {
        matches!(
            self,
            Error::GapClosure { .. }
                | Error::NonIntegerChern { .. }
                | Error::EmptyDensity
                | Error::ZeroNoise { .. }
                | Error::NotConverged { .. }
                | Error::ZeroCurrentNorm
                | Error::ChainTerminated(_)
        )
    }
}
