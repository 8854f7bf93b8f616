use thiserror::Error;

#[derive(Debug, Error)]
pub enum SymError {
    #[error("no Loc rule for {0}")]
    NoLocRule(String),
    #[error("supersymmetry broken in {basis}: boson part {boson}, fermion part {fermion}")]
    Supersymmetry { basis: String, boson: String, fermion: String },
    #[error("asymmetric two-point term: {0}")]
    Asymmetric(String),
    #[error("constant term of P is {0}, expected 0")]
    ConstantNonzero(String),
    #[error("unbound symbol `{0}`")]
    Unbound(String),
}

pub type Result<T> = std::result::Result<T, SymError>;
