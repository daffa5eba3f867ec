use num_traits::{Float, FromPrimitive};
use std::fmt::Debug;

/// Floating-point type usable by the generic profile and channel code.
pub trait Scalar: Float + FromPrimitive + Debug + Send + Sync + 'static {
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal must be representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `|x|^e` with an integer fast path.
#[inline]
pub fn abs_pow<T: Scalar>(x: T, e: T, e_int: Option<i32>) -> T {
    let ax = x.abs();
    match e_int {
        Some(k) => ax.powi(k),
        None => {
            if ax == T::zero() {
                if e > T::zero() {
                    T::zero()
                } else {
                    T::one()
                }
            } else {
                ax.powf(e)
            }
        }
    }
}

pub(crate) fn integer_exponent(e: f64) -> Option<i32> {
    if e.fract() == 0.0 && e.abs() < 64.0 {
        Some(e as i32)
    } else {
        None
    }
}
