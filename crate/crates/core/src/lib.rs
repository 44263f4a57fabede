//! Orthogonal polynomials of the equilibrium measure on weakly equilibrium
//! Cantor sets `K(γ)`: the polynomial tower, moments and expansions of the
//! monic orthogonal polynomials, Jacobi parameters, Widom factors, and an
//! independent Stieltjes/quadrature oracle.
//!
//! All positive scale quantities are carried as [`LogScalar`]s at the
//! working precision of the [`GammaSpec`].

pub mod algebra;
pub mod error;
pub mod gamma;
pub mod jacobi;
pub mod numeric;
pub mod oracle;
pub mod presets;
pub mod tower;
pub mod widom;

pub use algebra::{AWord, BWord, Moment, QExpansion};
pub use error::{Error, Result};
pub use gamma::{CustomTail, GammaSpec, Tail};
pub use jacobi::JacobiTable;
pub use numeric::{LogScalar, DEFAULT_PRECISION};
pub use oracle::DiscreteMeasure;
pub use tower::{Interval, NodeSet};
pub use widom::WidomSeries;

pub use rug::{Float, Rational};
