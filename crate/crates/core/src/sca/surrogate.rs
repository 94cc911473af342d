//! Tangent bounds used to convexify the rate and kinematic constraints.

use serde::Serialize;

use crate::scalar::{Scalar, Vec2};

/// Affine global under-estimator of `f(x) = log2(1 + gamma0/(H² + x))` in
/// the squared horizontal distance `x`, tight at `expansion_sq_distance`.
///
/// `f` is convex and decreasing in `x`, so its tangent lies below it
/// everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurrogateRate<T> {
    pub expansion_sq_distance: T,
    pub constant: T,
    pub slope: T,
}

impl<T: Scalar> SurrogateRate<T> {
    pub fn eval(&self, sq_distance: T) -> T {
        self.constant + self.slope * sq_distance
    }
}

/// `log2(1 + gamma0/(H² + x))`.
pub fn rate_of_sq_distance<T: Scalar>(gamma0: T, altitude_sq: T, x: T) -> T {
    (gamma0 / (altitude_sq + x)).ln_1p() / T::LN_2()
}

pub fn rate_surrogate<T: Scalar>(gamma0: T, altitude_sq: T, x_r: T) -> SurrogateRate<T> {
    let d = altitude_sq + x_r;
    let value = rate_of_sq_distance(gamma0, altitude_sq, x_r);
    let slope = -gamma0 / (T::LN_2() * d * (d + gamma0));
    SurrogateRate {
        expansion_sq_distance: x_r,
        constant: value - slope * x_r,
        slope,
    }
}

/// An affine map `x ↦ constant + gradient·x` on the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineForm2<T> {
    pub constant: T,
    pub gradient: Vec2<T>,
}

impl<T: Scalar> AffineForm2<T> {
    pub fn eval(&self, x: Vec2<T>) -> T {
        self.constant + self.gradient.dot(x)
    }
}

/// `x ↦ ‖r‖² + 2r·(x − r)`, a global lower bound on `‖x‖²` tight at `r`.
pub fn norm_sq_tangent<T: Scalar>(reference: Vec2<T>) -> AffineForm2<T> {
    AffineForm2 {
        constant: -reference.norm_sq(),
        gradient: reference.scale(T::lit(2.0)),
    }
}

/// Tangent of `F(d) = log2(1 + Σ_j a_j/(h2_j + d_j))` at `d_r`; `F` is
/// jointly convex in `d`, so the tangent is a global lower bound.
///
/// Returns `(F(d_r), ∂F/∂d_j)`.
pub fn log_sum_inv_tangent<T: Scalar>(a: &[T], h2: &[T], d_r: &[T]) -> (T, Vec<T>) {
    let mut total = T::zero();
    for j in 0..a.len() {
        total = total + a[j] / (h2[j] + d_r[j]);
    }
    let value = total.ln_1p() / T::LN_2();
    let denom = T::LN_2() * (T::one() + total);
    let grads = (0..a.len())
        .map(|j| {
            let e = h2[j] + d_r[j];
            -a[j] / (e * e) / denom
        })
        .collect();
    (value, grads)
}
