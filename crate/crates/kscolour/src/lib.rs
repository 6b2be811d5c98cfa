//! Kochen-Specker sphere colourings, computably.
//!
//! The toolkit covers five connected pieces:
//!
//! * [`sets`] — finite integer ray sets, exact orthogonality graphs, and a
//!   complete colourability decision procedure (with a brute-force oracle);
//!   the bundled 31-direction Conway-Kochen set is uncolourable.
//! * [`rational`] — exact arithmetic on the rational sphere: primitive
//!   Pythagorean quadruples, parity classes, quaternion triads, and rational
//!   rays in caps (enumerated or sampled).
//! * [`colouring`] / [`pheno`] — the colouring abstraction with the explicit
//!   regular polar-cap colouring and the rational parity colouring, condition
//!   validators, the U0/U1/D phenomenological classifier, and density
//!   profiles of the discontinuity region.
//! * [`deficit`] — rotation maps around an uncolourable set, their numerical
//!   Jacobians with the exact covering-identity cross-check, and the Monte
//!   Carlo lower bound on the uncovered measure.
//! * [`precision`] — finite-precision measurement simulation and the
//!   knowability probe of `p(k, epsilon)` trends.
//!
//! All randomness flows through [`sphere::RandomStream`]; fixed seeds replay
//! bit-identically at any worker count.

pub mod colouring;
pub mod data;
pub mod deficit;
pub mod error;
pub mod pheno;
pub mod precision;
pub mod rational;
pub mod report;
pub mod sets;
pub mod sphere;

pub use colouring::{Colour, Colouring, Ray};
pub use error::{KsError, Result};
pub use rational::{ParityClass, RationalRay};
pub use sets::RaySet;
pub use sphere::{Cap, RandomStream, Rotation, UnitVec};
