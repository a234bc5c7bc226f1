//! Persistence analysis for seasonally pulsed reaction-diffusion populations.
//!
//! The model couples two stages per season. Within a season of unit length
//! the density `u(x, t)` obeys
//!
//! ```text
//! u_t = div(d grad u - a u) + f(u)    on  Omega x (0, 1],
//! u   = 0                             on  the hostile boundary,
//! ```
//!
//! and between seasons a recruitment map acts pointwise:
//!
//! ```text
//! N_{m+1}(x) = u^{(m)}(x, 1),    u^{(m)}(x, 0) = g(N_m(x)).
//! ```
//!
//! Whether `N_m` dies out or settles on a positive profile is decided, at low
//! density, by the per-season multiplier `rho = g'(0) exp(f'(0) - lambda1)`,
//! where `lambda1` is the principal Dirichlet eigenvalue of the dispersal
//! operator `-d lap(u) + a . grad(u)` on `Omega`. Everything in this crate
//! feeds that comparison:
//!
//! * [`kinetics`] - growth maps `g`, reaction terms `f`, viability and
//!   nonspatial equilibria;
//! * [`geometry`] - domains (boxes, balls, raster masks) and their grids;
//! * [`spectral`] - `lambda1` by closed form, Bessel zeros, a finite
//!   difference eigensolver, and Faber-Krahn / Li-Yau lower bounds;
//! * [`thresholds`] - critical lengths, radii, extreme volumes, spreading
//!   speeds, and the four worked application presets;
//! * [`sim`] - the season propagator and the persistence classifier;
//! * [`cli`] - the `patchcrit` command-line front end.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod kinetics;
pub(crate) mod linalg;
pub mod sim;
pub mod spectral;
pub mod thresholds;

pub use error::{Error, Result};
