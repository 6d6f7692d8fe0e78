//! Numerical toolkit for `x' = eps*phi(t, x) + psi(t, x)` with `T`-periodic
//! right-hand sides and a small parameter `eps`.
//!
//! The crate evaluates the existence conditions for `T`-periodic solutions
//! that are phrased through the auxiliary linear system
//! `y' = phi(t, Omega(t,0,xi)) + psi'(t, Omega(t,0,xi)) y` and its solution
//! `eta(t, s, xi)` with `eta(s) = 0`: boundary periodicity, the
//! nonvanishing period defect `eta(T,s,xi) - eta(0,s,xi)`, its rotation
//! number over a planar region, the Melnikov-type integral along a cycle,
//! Floquet multipliers, and the averaged field
//! `Phi(xi) = -lim eta(-nT, 0, xi) / (nT)`. Every prediction can then be
//! confirmed by direct simulation: periodic orbits by shooting, averaged
//! dynamics by integrating the full system over `[0, d/eps]`.
//!
//! Module map:
//!
//! - [`expr`]: expression parser, evaluator and symbolic derivatives
//! - [`flow`]: systems, DOP853 integration with dense output, `Omega`
//! - [`variational`]: `eta`, period defects, monodromy and multipliers
//! - [`topology`]: planar regions, winding numbers, product degrees
//! - [`conditions`]: hypothesis checks, Melnikov profile, resonance map
//! - [`averaging`]: averaged field, Cauchy-problem verification, standard form
//! - [`periodic`]: shooting, membership in the localization set, sweeps
//! - [`cli`]: configuration files, CSV/SVG output, subcommand dispatch

pub mod error;
pub mod expr;
pub mod flow;
pub mod averaging;
pub mod cli;
pub mod conditions;
pub mod periodic;
pub mod registry;
pub mod topology;
pub mod variational;

pub use error::{Error, Result};
pub use flow::{flow_omega, flow_trajectory, integrate, IntegratorConfig, SystemDef, Trajectory};
