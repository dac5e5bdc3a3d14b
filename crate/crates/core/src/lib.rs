//! Weighted stay-length analytics.
//!
//! Booking rows carry frequency weights (the number of identical
//! reservations collapsed into the row). The modules build on each other:
//!
//! - [`ingest`]: parsing, filtering, collapsing and phase labelling
//! - [`wstats`]: weighted moments and ECDF quantiles
//! - [`densfit`]: weighted maximum-likelihood density fits and IC ranking
//! - [`glm`]: weighted negative-binomial and logistic regression
//! - [`hurdle`]: two-part long-stay model and its impact decomposition
//! - [`sarima`]: regression with (0,1,1)(0,1,1)₁₂ errors and diagnostics
//! - [`optim`]: the optimizers used by the fitting code
//! - [`simgen`]: seeded synthetic data with known ground truth

pub mod densfit;
pub mod error;
pub mod glm;
pub mod hurdle;
pub mod ingest;
pub mod numeric;
pub mod optim;
pub mod quadrature;
pub mod rng;
pub mod sarima;
pub mod simgen;
pub mod wstats;

pub use error::{Error, Result};
pub use ingest::{BookingRecord, BookingTable, MonthlyPoint, Phase, PhaseBoundaries, YearMonth};
