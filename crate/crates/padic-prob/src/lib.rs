//! Exact probability theory over the p-adic numbers on finite sample
//! spaces.
//!
//! Expectation here is set-valued: the expectation of a `Q_p`-valued random
//! variable is the smallest closed ball containing its support, and
//! conditional expectation assigns one ball per atom of the conditioning
//! partition. The crate provides the exact arithmetic ([`padic`]), the
//! measure-theoretic scaffolding ([`space`]), the expectation operators
//! ([`expectation`]), martingale constructions ([`martingale`]),
//! independent brute-force oracles ([`oracle`]), a seeded law-verification
//! suite ([`verify`]), and the JSON schema shared with the CLI ([`schema`]).

pub mod expectation;
pub mod martingale;
pub mod oracle;
pub mod padic;
pub mod schema;
pub mod space;
pub mod verify;
