//! Gradient exclusion processes on the discrete torus.
//!
//! The crate implements the Bernstein exclusion model `B(n, L)`, whose
//! exchange rate across a node is the fraction of surrounding boxes of
//! `L + 2` sites holding exactly `n + 1` particles, together with the reduced
//! porous media model `PMM_L(ℓ)`, the classical porous media model and the
//! simple symmetric exclusion process. Around these models it provides
//!
//! * exact rational evaluation of rates, currents and gradient potentials
//!   ([`constraints`]),
//! * an exhaustive verification engine for the algebraic identities that tie
//!   the models together ([`identities`]),
//! * state-space analysis of the Markov chain on small tori ([`graph`]),
//! * an event-driven simulator at diffusive scale ([`simulate`]) and a
//!   reference solver for the limiting equation `∂_t ρ = ∂_u² Φ(ρ)` ([`hydro`]).
//!
//! ```
//! use bernstein_exclusion::{constraints, exact::rat, Configuration, ModelSpec};
//!
//! let eta: Configuration = "00111011100000".parse().unwrap();
//! let model: ModelSpec = "bernstein:n=2,L=4".parse().unwrap();
//! assert_eq!(constraints::rate(&model, &eta, 4).unwrap(), rat(1, 5));
//! ```

pub mod cli;
pub mod constraints;
pub mod error;
pub mod exact;
pub mod graph;
pub mod hydro;
pub mod identities;
pub mod lattice;
pub mod model;
pub mod simulate;

pub use error::{Error, Result};
pub use exact::Rational;
pub use lattice::Configuration;
pub use model::ModelSpec;

/// Identifies the build in output metadata.
pub const BUILD_ID: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/lattice.md")]
    mod lattice {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/gradient.md")]
    mod gradient {}
    #[doc = include_str!("../../../book/src/identities.md")]
    mod identities {}
    #[doc = include_str!("../../../book/src/state-space.md")]
    mod state_space {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/hydrodynamics.md")]
    mod hydrodynamics {}
}
