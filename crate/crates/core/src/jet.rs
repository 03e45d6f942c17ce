//! Truncated bivariate Taylor polynomials for forward-mode differentiation
//! up to third order.
//!
//! Coefficient `c[idx(i, j)]` multiplies `dx^i dy^j` with `i + j <= 3`, so
//! `d^{i+j} f / dx^i dy^j = i! j! c[idx(i, j)]`.

use core::ops::{Add, Div, Mul, Neg, Sub};

use crate::math;

pub const ORDER: usize = 3;
const LEN: usize = 10;

const fn idx(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub c: [f64; LEN],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = v;
        Jet { c }
    }

    /// The coordinate functions `x` and `y` expanded around `p`.
    pub fn variables(p: [f64; 2]) -> (Jet, Jet) {
        let mut x = Jet::constant(p[0]);
        let mut y = Jet::constant(p[1]);
        x.c[idx(1, 0)] = 1.0;
        y.c[idx(0, 1)] = 1.0;
        (x, y)
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Partial derivative `d^{i+j} / dx^i dy^j` at the expansion point.
    pub fn derivative(&self, i: usize, j: usize) -> f64 {
        assert!(i + j <= ORDER);
        const FACT: [f64; 4] = [1.0, 1.0, 2.0, 6.0];
        FACT[i] * FACT[j] * self.c[idx(i, j)]
    }

    pub fn dx(&self) -> f64 {
        self.derivative(1, 0)
    }
    pub fn dy(&self) -> f64 {
        self.derivative(0, 1)
    }

    pub fn powi(self, n: u32) -> Jet {
        let mut out = Jet::constant(1.0);
        for _ in 0..n {
            out = out * self;
        }
        out
    }

    /// `f(a0 + h)` where `f` has derivatives `d[k]` at `a0` and `h = self - a0`.
    fn compose(self, d: [f64; ORDER + 1]) -> Jet {
        let mut h = self;
        h.c[0] = 0.0;
        let h2 = h * h;
        let h3 = h2 * h;
        let mut out = Jet::constant(d[0]);
        for k in 1..LEN {
            out.c[k] = d[1] * h.c[k] + d[2] / 2.0 * h2.c[k] + d[3] / 6.0 * h3.c[k];
        }
        out
    }

    pub fn exp(self) -> Jet {
        let e = math::exp(self.c[0]);
        self.compose([e; 4])
    }

    pub fn sin(self) -> Jet {
        let (s, c) = (math::sin(self.c[0]), math::cos(self.c[0]));
        self.compose([s, c, -s, -c])
    }

    pub fn cos(self) -> Jet {
        let (s, c) = (math::sin(self.c[0]), math::cos(self.c[0]));
        self.compose([c, -s, -c, s])
    }

    pub fn recip(self) -> Jet {
        let a = self.c[0];
        self.compose([1.0 / a, -1.0 / (a * a), 2.0 / (a * a * a), -6.0 / (a * a * a * a)])
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::constant(v)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, o: Jet) -> Jet {
        for k in 0..LEN {
            self.c[k] += o.c[k];
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, o: Jet) -> Jet {
        for k in 0..LEN {
            self.c[k] -= o.c[k];
        }
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for k in 0..LEN {
            self.c[k] = -self.c[k];
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut c = [0.0; LEN];
        for i1 in 0..=ORDER {
            for j1 in 0..=ORDER - i1 {
                let a = self.c[idx(i1, j1)];
                if a == 0.0 {
                    continue;
                }
                for i2 in 0..=ORDER - i1 - j1 {
                    for j2 in 0..=ORDER - i1 - j1 - i2 {
                        c[idx(i1 + i2, j1 + j2)] += a * o.c[idx(i2, j2)];
                    }
                }
            }
        }
        Jet { c }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

macro_rules! scalar_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr<f64> for Jet {
            type Output = Jet;
            fn $m(self, o: f64) -> Jet { $tr::$m(self, Jet::constant(o)) }
        }
        impl $tr<Jet> for f64 {
            type Output = Jet;
            fn $m(self, o: Jet) -> Jet { $tr::$m(Jet::constant(self), o) }
        }
    )*};
}
scalar_ops!(Add add, Sub sub, Mul mul, Div div);

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: &dyn Fn(f64, f64) -> f64, p: [f64; 2], i: usize, j: usize) -> f64 {
        // nested central differences
        let h = 1e-3;
        match (i, j) {
            (0, 0) => f(p[0], p[1]),
            (i, j) if i > 0 => {
                (fd(f, [p[0] + h, p[1]], i - 1, j) - fd(f, [p[0] - h, p[1]], i - 1, j)) / (2.0 * h)
            }
            (_, j) => (fd(f, [p[0], p[1] + h], 0, j - 1) - fd(f, [p[0], p[1] - h], 0, j - 1)) / (2.0 * h),
        }
    }

    #[test]
    fn polynomial_derivatives_exact() {
        let (x, y) = Jet::variables([0.5, -2.0]);
        let f = x.powi(3) * y + 2.0 * x * y * y - y.powi(2);
        // f_x = 3x^2 y + 2y^2, f_xy = 3x^2 + 4y, f_xxx = 6y, f_xxy = 6x
        assert_eq!(f.value(), 0.125 * -2.0 + 2.0 * 0.5 * 4.0 - 4.0);
        assert_eq!(f.dx(), 3.0 * 0.25 * -2.0 + 8.0);
        assert_eq!(f.derivative(1, 1), 0.75 - 8.0);
        assert_eq!(f.derivative(3, 0), -12.0);
        assert_eq!(f.derivative(2, 1), 3.0);
        assert_eq!(f.derivative(0, 3), 0.0);
    }

    #[test]
    fn transcendental_against_differences() {
        let p = [0.3, 0.7];
        let g = |x: f64, y: f64| math::exp(x * y) * math::sin(3.0 * x) + math::cos(x - y) / (1.0 + y * y);
        let (x, y) = Jet::variables(p);
        let j = (x * y).exp() * (3.0 * x).sin() + (x - y).cos() / (1.0 + y * y);
        for d in 0..=ORDER {
            for i in 0..=d {
                let exact = j.derivative(i, d - i);
                let approx = fd(&g, p, i, d - i);
                assert!((exact - approx).abs() < 1e-4 * (1.0 + exact.abs()), "{i},{} {exact} {approx}", d - i);
            }
        }
    }
}
