//! Campaign driver: sweeps over `(L, p)` cells with resumable storage,
//! randomized audits, collapse fits and the reproduction recipes.

pub mod campaign;
pub mod config;
pub mod error;
pub mod recipes;
pub mod stats;
pub mod store;
pub mod verify;

pub use config::{CampaignConfig, StateKind};
pub use error::{CliError, Result};
pub use store::{CellRecord, Estimator, ResultStore};
