use crate::scalar::{abs_pow, integer_exponent, Scalar};

/// The curve `|x|^β + |y|^β = a^β`.
#[derive(Clone, Copy, Debug)]
pub struct Superellipse<T> {
    beta: T,
    a: T,
    a_beta: T,
    b0: Option<i32>,
    b1: Option<i32>,
    b2: Option<i32>,
}

impl<T: Scalar> Superellipse<T> {
    pub fn new(beta: T, a: T) -> Self {
        let bf = beta.to_f64().unwrap_or(f64::NAN);
        Self {
            beta,
            a,
            a_beta: abs_pow(a, beta, integer_exponent(bf)),
            b0: integer_exponent(bf),
            b1: integer_exponent(bf - 1.0),
            b2: integer_exponent(bf - 2.0),
        }
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn radius(&self) -> T {
        self.a
    }

    /// `|x|^β`
    #[inline]
    pub fn pow_b(&self, x: T) -> T {
        abs_pow(x, self.beta, self.b0)
    }

    /// `|x|^(β-1)`
    #[inline]
    pub fn pow_b1(&self, x: T) -> T {
        abs_pow(x, self.beta - T::one(), self.b1)
    }

    /// `|x|^(β-2)`
    #[inline]
    pub fn pow_b2(&self, x: T) -> T {
        abs_pow(x, self.beta - T::lit(2.0), self.b2)
    }

    /// Negative inside, zero on the curve, positive outside.
    #[inline]
    pub fn implicit(&self, x: T, y: T) -> T {
        self.pow_b(x) + self.pow_b(y) - self.a_beta
    }

    /// Unit outward normal at a curve point.
    pub fn outward_normal(&self, x: T, y: T) -> (T, T) {
        let gx = self.pow_b1(x) * x.signum();
        let gy = self.pow_b1(y) * y.signum();
        let n = gx.hypot(gy);
        (gx / n, gy / n)
    }

    /// Curvature at a curve point, zero at the four axis points.
    pub fn curvature(&self, x: T, y: T) -> T {
        let num = (self.beta - T::one()) * self.a_beta * self.pow_b2(x) * self.pow_b2(y);
        let gx = self.pow_b1(x);
        let gy = self.pow_b1(y);
        let den = (gx * gx + gy * gy).powf(T::lit(1.5));
        num / den
    }

    /// Height of the arc over the tangential coordinate `s`, `|s| <= a`.
    #[inline]
    pub fn graph(&self, s: T) -> T {
        let h = self.a_beta - self.pow_b(s);
        if h <= T::zero() {
            T::zero()
        } else {
            match self.b0 {
                Some(2) => h.sqrt(),
                Some(4) => h.sqrt().sqrt(),
                Some(6) => h.sqrt().cbrt(),
                Some(8) => h.sqrt().sqrt().sqrt(),
                _ => h.powf(T::one() / self.beta),
            }
        }
    }

    /// Derivative of [`Self::graph`].
    #[inline]
    pub fn graph_slope(&self, s: T) -> T {
        let y = self.graph(s);
        -s.signum() * self.pow_b1(s) / self.pow_b1(y)
    }

    /// Coefficient `c` of the local model `-c|s|^β` at a flat point.
    pub fn flat_coefficient(&self) -> T {
        T::one() / (self.beta * self.pow_b1(self.a))
    }

    /// Curvature of the local model, `β(β-1)c|s|^(β-2)`.
    pub fn model_curvature(&self, s: T) -> T {
        self.beta * (self.beta - T::one()) * self.flat_coefficient() * self.pow_b2(s)
    }

    /// Coordinate where the curve crosses the diagonal.
    pub fn diagonal(&self) -> T {
        self.a * T::lit(2.0).powf(-T::one() / self.beta)
    }
}
