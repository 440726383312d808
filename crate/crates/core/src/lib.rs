//! Secure coded caching.
//!
//! Centralized and decentralized cache placement with one-time-pad keys,
//! keyed XOR multicast delivery, per-user decoding, exact wiretap leakage
//! computation at tiny scale, and the rate / lower-bound / gap analysis
//! that goes with the two schemes.
//!
//! The crate is `no_std` (with `alloc`) when built without the default
//! `std` feature. File formats, configuration and the command-line front
//! end live in the companion `securecache` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analysis;
pub mod bits;
pub mod centralized;
pub mod decentralized;
pub mod error;
pub mod model;
pub mod rng;
pub mod secrecy;
pub mod subset;

pub use bits::BitBlock;
pub use error::{Error, Result};
pub use model::{
    DeliveryPayload, DemandVector, FileLibrary, KeyRegistry, Layout, PayloadRecord, Scheme,
    SystemParams, UserCache,
};
pub use rng::{KeySource, Pad, PadOrigin, SeededStream};
pub use subset::{binomial, enumerate_subsets, SubsetId};
