//! Quantum field theory of a massless scalar field on flat spacetimes with
//! Dirichlet boundaries, built around the method of images.
//!
//! The library covers three geometries — full Minkowski space, the half-space
//! `z >= 0`, and the slab `0 <= z <= d` — and provides, for each:
//!
//! * causal structure and image enumeration ([`geometry`]),
//! * smooth compactly supported test functions and their image expansions
//!   ([`testfields`]),
//! * retarded/advanced/causal propagators and the causal pairing that seeds
//!   canonical commutation relations ([`propagators`]),
//! * vacuum and image two-point functions, the boundary-subtracted kernel,
//!   and singularity probes ([`states`]),
//! * a formal star-product algebra on polynomial functionals ([`algebra`]),
//! * renormalized Casimir observables with an independent mode-sum oracle
//!   ([`casimir`]),
//! * seeded self-check suites used by the CLI `verify` subcommand ([`verify`]).
//!
//! Conventions: metric signature `(+,-,-,-)` for the interval, wave operator
//! `P = -d^2/dt^2 + laplacian`, and plane waves `exp(i(k.x - w t))` in all
//! momentum-space formulas.  All heavy reductions run through [`exec`], which
//! keeps summation order fixed so results are bit-identical no matter how many
//! threads are in use.

pub mod algebra;
pub mod casimir;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod imagesum;
pub mod momentum;
pub mod propagators;
pub mod quad;
pub mod states;
pub mod testfields;
pub mod verify;

pub use error::{Error, Result};
