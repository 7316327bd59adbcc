use std::ops::{Add, Mul, Sub};

use num_traits::Float;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn from_angle(theta: T) -> Self {
        Self::new(Float::cos(theta), Float::sin(theta))
    }

    pub fn norm(self) -> T {
        Float::hypot(self.x, self.y)
    }

    pub fn dist(self, other: Self) -> T {
        (other - self).norm()
    }

    pub fn angle(self) -> T {
        Float::atan2(self.y, self.x)
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    /// Unit vector, or zero for the zero vector.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            self * (T::one() / n)
        } else {
            Self::zero()
        }
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        Self::new(self.x * k, self.y * k)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Real>(theta: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut a = theta % two_pi;
    if a > T::PI() {
        a = a - two_pi;
    } else if a <= -T::PI() {
        a = a + two_pi;
    }
    a
}

/// Arena bounds, centred on the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bounds<T> {
    Rect { half_width: T, half_height: T },
    Circle { radius: T },
}

impl<T: Real> Bounds<T> {
    pub fn contains(&self, p: Vec2<T>) -> bool {
        match *self {
            Bounds::Rect {
                half_width,
                half_height,
            } => Float::abs(p.x) <= half_width && Float::abs(p.y) <= half_height,
            Bounds::Circle { radius } => p.norm() <= radius,
        }
    }

    /// Clamps `p` into the bounds. When clamping was needed, the heading is
    /// reflected off the wall that was hit.
    pub fn clamp_and_turn(&self, p: Vec2<T>, heading: T) -> (Vec2<T>, T) {
        match *self {
            Bounds::Rect {
                half_width,
                half_height,
            } => {
                let mut dir = Vec2::from_angle(heading);
                let mut q = p;
                if Float::abs(p.x) > half_width {
                    q.x = p.x.clamp_to(-half_width, half_width);
                    dir.x = -dir.x;
                }
                if Float::abs(p.y) > half_height {
                    q.y = p.y.clamp_to(-half_height, half_height);
                    dir.y = -dir.y;
                }
                if q == p {
                    (p, heading)
                } else {
                    (q, dir.angle())
                }
            }
            Bounds::Circle { radius } => {
                let r = p.norm();
                if r <= radius {
                    return (p, heading);
                }
                let n = p * (T::one() / r);
                let mut q = n * radius;
                // Rounding can leave the projection a hair outside.
                while q.norm() > radius {
                    q = q * (T::one() - T::epsilon());
                }
                let dir = Vec2::from_angle(heading);
                let reflected = dir - n * (T::two() * dir.dot(n));
                (q, reflected.angle())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_keeps_range() {
        for k in -20..20 {
            let a = wrap_angle(k as f64 * 0.9);
            assert!(a > -std::f64::consts::PI && a <= std::f64::consts::PI);
        }
    }

    #[test]
    fn rect_clamp_reflects() {
        let b = Bounds::Rect {
            half_width: 1.0,
            half_height: 1.0,
        };
        let (p, h) = b.clamp_and_turn(Vec2::new(1.5, 0.0), 0.0);
        assert_eq!(p, Vec2::new(1.0, 0.0));
        assert!((Float::abs(h) - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn circle_clamp_stays_inside() {
        let b = Bounds::Circle { radius: 2.0f64 };
        let (p, h) = b.clamp_and_turn(Vec2::new(3.0, 4.0), 0.3);
        assert!(b.contains(p));
        assert!(Vec2::from_angle(h).dot(p) < 0.0);
    }
}
