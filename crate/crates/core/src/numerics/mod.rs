//! Small numerical kernels shared by the geometry modules: quadrature,
//! the complete elliptic integral, ODE steppers, bracketing root finders
//! and cubic interpolation.

pub mod elliptic;
pub mod interp;
pub mod mat3;
pub mod ode;
pub mod quad;
pub mod roots;
