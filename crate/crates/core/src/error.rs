use thiserror::Error;

pub type Result<T> = std::result::Result<T, CcdError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CcdError {
    #[error("grid needs at least 3 nodes, got {0}")]
    GridTooSmall(usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point outside the feasible set: {0}")]
    Infeasible(String),

    #[error("matrix is not Hurwitz (max real eigenvalue {max_re:e})")]
    NotHurwitz { max_re: f64 },

    #[error("real Schur reduction did not converge within {0} iterations")]
    SchurNoConvergence(usize),

    #[error("singular block in Schur back-substitution at ({row}, {col})")]
    SingularSylvester { row: usize, col: usize },

    #[error("time-step matrix is singular for dt = {dt:e}")]
    SingularStep { dt: f64 },
}
