//! Utility-indifference pricing in a limit order market with permanent
//! market impact.
//!
//! * [`levy`]: closed-form cumulants of the supported Lévy drivers.
//! * [`indifference`]: exponential certainty equivalents and price curves.
//! * [`paths`]: seeded driver paths and shock schedules.
//! * [`efficient`]: optimal demander strategy and efficient prices for Lévy drivers.
//! * [`markov`]: Brownian Markov market fields via Cole–Hopf quadrature,
//!   quadratic closed forms and the Burgers shock wave.
//! * [`dp`]: discrete-time dynamic programming on a binomial lattice.
//! * [`runner`]: scenario configs, CSV output and the verification suite.

pub mod dp;
pub mod efficient;
pub mod error;
pub mod indifference;
pub mod levy;
pub mod markov;
pub mod numeric;
pub mod paths;
pub mod runner;

pub use error::{Error, Result};
