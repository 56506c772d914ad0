//! Secure list decoding over discrete memoryless channels.
//!
//! The crate builds list codes whose decoder (Bob) learns a short list that
//! contains the sent message while being unable to single it out, and whose
//! sender (Alice) cannot make a second message land in the list. It provides
//!
//! * channels, priors and product extensions ([`channels`]),
//! * information quantities, capacity and the score functions used by the
//!   random-coding construction ([`info`]),
//! * the achievable rate region and its boundary curve ([`region`]),
//! * list codes with threshold, partition, grouped and product decoders ([`codes`]),
//! * exact and Monte-Carlo evaluation of the four security parameters ([`security`]),
//! * the random-coding and expurgation pipeline ([`random_coding`]),
//! * bit commitment and anonymous auction protocols ([`protocols`]).
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`.

pub mod channels;
pub mod codes;
pub mod error;
pub mod info;
pub mod random_coding;
pub mod protocols;
pub mod real;
pub mod region;
pub mod rng;
pub mod security;
pub mod words;

pub use error::{Error, Hypothesis, Result};
pub use real::Real;
pub use words::Word;

pub type Channel = channels::Channel<f64>;
pub type Distribution = channels::Distribution<f64>;
pub type InfoContext = info::InfoContext<f64>;
pub type ListCode = codes::ListCode<f64>;
pub type RateRegion = region::RateRegion<f64>;
pub type SecurityReport = security::SecurityReport<f64>;
pub type ParameterSchedule = random_coding::ParameterSchedule<f64>;
pub type ConstructionReport = random_coding::ConstructionReport<f64>;
