//! Parametric inference for field failure data with unknown sales dates.
//!
//! A manufacturer ships units through retailers and only learns the sales
//! date of a unit when it fails within warranty before the end of study;
//! the rest of the fleet is missing both its sales lag and its lifetime.
//! This crate estimates the joint law of the sales lag and the lifetime
//! (optionally with a report delay) from such data:
//!
//! * [`distributions`] — exponential / Weibull / lognormal / gamma families
//!   and the bivariate lognormal, with complete-data maximum likelihood fits;
//! * [`data`] — observation schemes, CSV ingestion, and validation;
//! * [`sem`] — the stochastic EM cycle: acceptance-rejection imputation of
//!   the missing records, complete-data maximization, and burn-in-averaged
//!   estimation;
//! * [`information`] — standard errors from the missing information
//!   principle, approximated by Monte Carlo imputation at the estimate;
//! * [`baseline`] — the direct incomplete-data likelihood, its numerical
//!   MLE (which degrades at high missing rates), and AIC comparison;
//! * [`sim`] — synthetic-batch generation and bias/RMSE studies.

pub mod baseline;
pub mod data;
pub mod distributions;
pub mod error;
pub mod information;
pub mod quad;
pub mod rng;
pub mod sem;
pub mod sim;

pub use data::{AuxTarget, FieldDataset, Scheme, UnitRecord};
pub use distributions::{Family, JointModel, ParamSet, Structure};
pub use error::{Error, Result};
