//! Tiny fixed-size 3-vector helpers used across the geometry and field code.

use crate::real::Real;

#[inline]
pub fn sub<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn dot<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn scale<T: Real>(a: [T; 3], s: T) -> [T; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn norm_sq<T: Real>(a: [T; 3]) -> T {
    dot(a, a)
}

#[inline]
pub fn norm<T: Real>(a: [T; 3]) -> T {
    norm_sq(a).sqrt()
}

#[inline]
pub fn dist_sq<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    norm_sq(sub(a, b))
}

#[inline]
pub fn is_finite<T: Real>(a: [T; 3]) -> bool {
    a.iter().all(|c| c.is_finite())
}

/// Unit vector along `a`, or `None` when the norm is below `eps`.
pub fn normalized<T: Real>(a: [T; 3], eps: T) -> Option<[T; 3]> {
    let n = norm(a);
    if n <= eps {
        None
    } else {
        Some(scale(a, T::one() / n))
    }
}
