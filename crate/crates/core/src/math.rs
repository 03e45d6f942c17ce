//! Float helpers backed by `libm` so the crate stays `no_std`.

pub type Point = [f64; 2];
pub type Vector = [f64; 2];
/// Row-major 2x2 tensor, `t[a][b] = d v_a / d x_b` for velocity gradients.
pub type Tensor = [[f64; 2]; 2];

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}
#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}
#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}
#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}
#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}
#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

#[inline]
pub fn dot(a: Vector, b: Vector) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}
#[inline]
pub fn norm(a: Vector) -> f64 {
    sqrt(dot(a, a))
}
#[inline]
pub fn sub(a: Vector, b: Vector) -> Vector {
    [a[0] - b[0], a[1] - b[1]]
}
#[inline]
pub fn add(a: Vector, b: Vector) -> Vector {
    [a[0] + b[0], a[1] + b[1]]
}
#[inline]
pub fn scale(s: f64, a: Vector) -> Vector {
    [s * a[0], s * a[1]]
}
/// `t n`
#[inline]
pub fn tmul(t: &Tensor, n: Vector) -> Vector {
    [t[0][0] * n[0] + t[0][1] * n[1], t[1][0] * n[0] + t[1][1] * n[1]]
}
#[inline]
pub fn ddot(a: &Tensor, b: &Tensor) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}
#[inline]
pub fn cross(a: Vector, b: Vector) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}
