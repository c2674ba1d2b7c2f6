//! Scalar abstraction: the whole engine is generic over the real field.

use num_complex::Complex;
use num_traits::{FromPrimitive, Num, NumCast};

/// Real scalar type for all numerics. Implemented by `f32` and `f64`.
///
/// `nalgebra::RealField` supplies the linear-algebra side (and, through
/// `ComplexField for Complex<R>`, complex matrix decompositions);
/// the `num-traits` bounds supply conversions from literals and counters.
pub trait Scalar:
    nalgebra::RealField
    + Copy
    + Num
    + FromPrimitive
    + NumCast
    + std::iter::Sum<Self>
    + std::iter::Product<Self>
{
}

impl<T> Scalar for T where
    T: nalgebra::RealField
        + Copy
        + Num
        + FromPrimitive
        + NumCast
        + std::iter::Sum<T>
        + std::iter::Product<T>
{
}

/// Complex number over the generic real scalar.
pub type C<R> = Complex<R>;
/// Dense complex matrix.
pub type CMat<R> = nalgebra::DMatrix<C<R>>;
/// Dense complex column vector.
pub type CVec<R> = nalgebra::DVector<C<R>>;

/// Convert an `f64` constant into the generic scalar.
///
/// Panics only if the target type cannot represent ordinary finite `f64`
/// values, which no `Scalar` implementor does.
#[inline]
pub fn rr<R: Scalar>(x: f64) -> R {
    R::from_f64(x).expect("finite f64 constant must convert to the scalar type")
}

/// Convert a usize counter into the generic scalar.
#[inline]
pub fn rn<R: Scalar>(n: usize) -> R {
    R::from_usize(n).expect("usize count must convert to the scalar type")
}

/// Real constant as a complex scalar.
#[inline]
pub fn cre<R: Scalar>(x: f64) -> C<R> {
    Complex::new(rr(x), R::zero())
}

/// Complex scalar from real/imaginary `f64` parts.
#[inline]
pub fn cc<R: Scalar>(re: f64, im: f64) -> C<R> {
    Complex::new(rr(re), rr(im))
}

/// Lift a real scalar into the complex field.
#[inline]
pub fn lift<R: Scalar>(x: R) -> C<R> {
    Complex::new(x, R::zero())
}

/// Modulus of a complex scalar (avoids the `Float` bound of
/// `Complex::norm`).
#[inline]
pub fn cnorm<R: Scalar>(z: C<R>) -> R {
    (z.re * z.re + z.im * z.im).sqrt()
}

/// Lossy view of a generic scalar as `f64` (for error payloads and I/O).
#[inline]
pub fn as_f64<R: Scalar>(x: R) -> f64 {
    x.to_f64().expect("scalar must be viewable as f64")
}
