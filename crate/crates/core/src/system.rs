//! The semilinear view `u' = A u + g(t, u)` consumed by the steppers.

use crate::error::Result;
use crate::field::Field;

pub trait SemilinearSystem: Send + Sync {
    fn shape(&self) -> &[usize];

    /// Full right-hand side `F(t, u)`.
    fn rhs(&self, t: f64, u: &Field) -> Result<Field>;

    /// `A u` for the extracted linear part.
    fn apply_linear(&self, u: &Field) -> Result<Field>;

    /// `g(t, u) = F(t, u) − A u`.
    fn nonlinear(&self, t: f64, u: &Field) -> Result<Field>;

    /// `F` and `g` together; implementors may share work.
    fn rhs_and_nonlinear(&self, t: f64, u: &Field) -> Result<(Field, Field)> {
        Ok((self.rhs(t, u)?, self.nonlinear(t, u)?))
    }

    /// Action of `∂F/∂u` at `u` on `v`.
    fn jacobian_matvec(&self, t: f64, u: &Field, v: &Field) -> Result<Field>;

    fn is_autonomous(&self) -> bool;
}
