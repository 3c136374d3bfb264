//! Special functions and numerical kernels.

mod bessel;
mod legendre;
mod marcum;
mod optimize;
mod quad;

pub use bessel::{bessel_i, bessel_i_scaled};
pub use legendre::assoc_legendre;
pub(crate) use legendre::on_cut;
pub use marcum::marcum_q;
pub use optimize::maximize_1d;
pub use quad::{integrate, Quadrature};
