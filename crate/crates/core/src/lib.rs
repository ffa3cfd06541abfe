//! A desk-scale laboratory for the two-player adversarial training game:
//! a reverse-mode tape, Gaussian mixture targets, small MLPs, the game's
//! costs, a training loop and the analysis used to test the theory.

pub mod analysis;
pub mod costs;
pub mod distributions;
pub mod error;
pub mod gamedyn;
pub mod ndcore;
pub mod nets;
pub mod trainer;

// The guide's Rust snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/tape.md")]
    mod tape {}
    #[doc = include_str!("../../../book/src/divergences.md")]
    mod divergences {}
    #[doc = include_str!("../../../book/src/discriminator.md")]
    mod discriminator {}
    #[doc = include_str!("../../../book/src/costs.md")]
    mod costs {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/ssl.md")]
    mod ssl {}
}
