use std::fmt;

use sdl_mri::MriError;
use sdl_net::NetError;
use sdl_train::TrainError;

/// Failure category, printed as the `error[kind]` prefix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Io,
    Format,
    Config,
    Train,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Usage => "usage",
            Kind::Io => "io",
            Kind::Format => "format",
            Kind::Config => "config",
            Kind::Train => "train",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Usage => 2,
            Kind::Io => 3,
            Kind::Format => 4,
            Kind::Config => 5,
            Kind::Train => 6,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    /// The single diagnostic line written to stderr.
    pub fn line(&self) -> String {
        format!("error[{}]: {}", self.kind.as_str(), self.message.replace('\n', " "))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

impl std::error::Error for CliError {}

fn mri_kind(e: &MriError) -> Kind {
    match e {
        MriError::Io(_) => Kind::Io,
        MriError::Format(_) => Kind::Format,
        MriError::Config(_) | MriError::EmptySplit { .. } => Kind::Config,
        MriError::Tensor(_) => Kind::Train,
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        let kind = match &e {
            TrainError::Io { .. } => Kind::Io,
            TrainError::Format(_) | TrainError::Csv(_) => Kind::Format,
            TrainError::Config(_) => Kind::Config,
            TrainError::Mri(m) | TrainError::Net(NetError::Mri(m)) => mri_kind(m),
            TrainError::Net(NetError::Config(_) | NetError::Param(_)) => Kind::Config,
            TrainError::Net(NetError::Tensor(_)) | TrainError::Tensor(_) | TrainError::Metric(_) | TrainError::NonFinite { .. } => {
                Kind::Train
            }
        };
        Self::new(kind, e.to_string())
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        TrainError::from(e).into()
    }
}

impl From<MriError> for CliError {
    fn from(e: MriError) -> Self {
        TrainError::from(e).into()
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
