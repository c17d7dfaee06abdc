//! Numerical light ray transform on symmetric 2-tensors over 3+1 Minkowski space.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: Minkowski covectors, causal classes and the packed symmetric
//!   2-tensor [`tensor::Sym2`].
//! - [`field`]: gridded tensor fields on a 4D box, the symmetric differential and
//!   gauge fields `c g + d^s w`.
//! - [`symbol`]: the normal-operator symbol `a(eta)`, its null space and the
//!   regularised pseudoinverse used by the parametrix.
//! - [`raytransform`]: forward transform over light rays, backprojection and the
//!   geometric normal operator.
//! - [`fourier`]: FFT realisation of the normal operator, space-like cutoff,
//!   gauge projector and the parametrix reconstruction.
//! - [`phantoms`]: synthetic fields with controlled wavefront sets.
//! - [`io`], [`report`]: `.t2f` / `.rays` file formats, JSON reports and PGM slices.
//! - [`experiments`]: measured experiments shared by the CLI and the acceptance suite.

pub mod error;
pub mod experiments;
pub mod fft;
pub mod field;
pub mod fourier;
pub mod interp;
pub mod io;
pub mod phantoms;
pub mod raytransform;
pub mod report;
pub mod sphere;
pub mod symbol;
pub mod tensor;

pub use error::{Error, Result};
pub use field::{Domain, Grid4, Sym2Field};
pub use symbol::{CutoffSpec, SymbolOperator};
pub use tensor::{CausalClass, Covector, Sym2, Vec4};
