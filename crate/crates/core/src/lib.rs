//! Discord-witness analysis for prepare-and-measure quantum key distribution.

pub mod channels;
pub mod decoy;
pub mod discord;
pub mod error;
pub mod keyrate;
pub mod protosim;
pub mod qmath;
pub mod states;
pub mod tolerances;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/states.md")]
    mod states {}
    #[doc = include_str!("../../../book/src/witness.md")]
    mod witness {}
    #[doc = include_str!("../../../book/src/channels.md")]
    mod channels {}
    #[doc = include_str!("../../../book/src/key-rates.md")]
    mod key_rates {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/decoy.md")]
    mod decoy {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
