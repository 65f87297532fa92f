//! Unit-sphere primitives and rigid motions of R³.

use std::fmt;

use nalgebra::{Matrix3, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

const UNIT_TOL: f64 = 1e-12;
const ORTHO_TOL: f64 = 1e-10;

/// A unit vector in R³.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct SphereDirection(Vec3);

impl SphereDirection {
    pub fn new(v: Vec3) -> Result<Self> {
        if ((v.norm() - 1.0).abs()) <= UNIT_TOL {
            Ok(SphereDirection(v))
        } else {
            Err(Error::InvalidArgument(format!(
                "direction has norm {}, expected 1",
                v.norm()
            )))
        }
    }

    /// Normalizes `v`; fails on the zero vector.
    pub fn normalize(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::DegenerateChord);
        }
        Ok(SphereDirection(v / n))
    }

    pub fn from_azimuth_height(theta: f64, z: f64) -> Self {
        let z = z.clamp(-1.0, 1.0);
        let r = ((1.0 - z) * (1.0 + z)).sqrt();
        let (s, c) = theta.sin_cos();
        SphereDirection(Vec3::new(r * c, r * s, z))
    }

    pub fn vector(&self) -> Vec3 {
        self.0
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }

    pub fn y(&self) -> f64 {
        self.0.y
    }

    pub fn z(&self) -> f64 {
        self.0.z
    }

    /// Azimuth of the horizontal component in `[0, 2π)`.
    pub fn azimuth(&self) -> f64 {
        let a = self.0.y.atan2(self.0.x);
        if a < 0.0 {
            a + std::f64::consts::TAU
        } else {
            a
        }
    }

    pub fn antipode(&self) -> Self {
        SphereDirection(-self.0)
    }

    /// Great-circle distance.
    pub fn angle_to(&self, other: &SphereDirection) -> f64 {
        // atan2 form stays accurate for nearly equal and nearly antipodal pairs.
        self.0.cross(&other.0).norm().atan2(self.0.dot(&other.0))
    }
}

impl TryFrom<[f64; 3]> for SphereDirection {
    type Error = Error;
    fn try_from(v: [f64; 3]) -> Result<Self> {
        SphereDirection::new(Vec3::new(v[0], v[1], v[2]))
    }
}

impl From<SphereDirection> for [f64; 3] {
    fn from(d: SphereDirection) -> Self {
        [d.0.x, d.0.y, d.0.z]
    }
}

/// `(p − q)/|p − q|`.
pub fn direction_of_chord(p: Vec3, q: Vec3) -> Result<SphereDirection> {
    if p == q {
        return Err(Error::DegenerateChord);
    }
    SphereDirection::normalize(p - q)
}

/// The deformation `(x, y, z) ↦ (x, y, cz)/|(x, y, cz)|` induced on chord
/// directions by `f ↦ c·f`.
pub fn psi(c: f64, v: SphereDirection) -> Result<SphereDirection> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidScale(format!("scale must be positive, got {c}")));
    }
    let u = v.vector();
    SphereDirection::normalize(Vec3::new(u.x, u.y, c * u.z))
}

/// `arctan(c·d) − arctan(d)`.
pub fn alpha_angle(c: f64, d: f64) -> f64 {
    (c * d).atan() - d.atan()
}

/// `sqrt((1/(d² + 1))·(1 + 1/(c·d)²))`, the scale of the trace of the rotated
/// graph of `g(x) + d·y` on the xy-plane.
pub fn w_coefficient(c: f64, d: f64) -> Result<f64> {
    if !(c > 0.0) || !(d > 0.0) {
        return Err(Error::InvalidScale(format!(
            "w requires c > 0 and d > 0, got c = {c}, d = {d}"
        )));
    }
    let cd = c * d;
    Ok(((1.0 + 1.0 / (cd * cd)) / (d * d + 1.0)).sqrt())
}

pub fn rotation_x(alpha: f64) -> Matrix3<f64> {
    let (s, c) = alpha.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rotation_y(beta: f64) -> Matrix3<f64> {
    let (s, c) = beta.sin_cos();
    Matrix3::new(c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c)
}

pub fn rotation_z(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn rotate_about_x(p: Vec3, alpha: f64) -> Vec3 {
    rotation_x(alpha) * p
}

/// Height on the sphere of a direction with horizontal slope `m`:
/// `m/√(1 + m²)`, with `±∞ ↦ ±1`.
pub fn slope_height_map(m: f64) -> f64 {
    if m.is_nan() {
        return f64::NAN;
    }
    if m.abs() <= 1.0 {
        m / (1.0 + m * m).sqrt()
    } else {
        m.signum() / (1.0 + 1.0 / (m * m)).sqrt()
    }
}

/// Inverse of [`slope_height_map`]; `±1 ↦ ±∞`.
pub fn height_slope_map(z: f64) -> f64 {
    if z >= 1.0 {
        return f64::INFINITY;
    }
    if z <= -1.0 {
        return f64::NEG_INFINITY;
    }
    z / ((1.0 - z) * (1.0 + z)).sqrt()
}

/// A rigid motion `p ↦ Q·p + t` with `Q` orthogonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IsometryRepr", into = "IsometryRepr")]
pub struct Isometry3 {
    q: Matrix3<f64>,
    t: Vec3,
    orientation: i8,
}

#[derive(Serialize, Deserialize)]
struct IsometryRepr {
    matrix: [f64; 9],
    translation: [f64; 3],
    orientation: i8,
}

impl TryFrom<IsometryRepr> for Isometry3 {
    type Error = Error;
    fn try_from(r: IsometryRepr) -> Result<Self> {
        let iso = Isometry3::new(
            Matrix3::from_row_slice(&r.matrix),
            Vec3::from_column_slice(&r.translation),
        )?;
        if iso.orientation != r.orientation {
            return Err(Error::InvalidArgument(format!(
                "orientation {} does not match determinant sign {}",
                r.orientation, iso.orientation
            )));
        }
        Ok(iso)
    }
}

impl From<Isometry3> for IsometryRepr {
    fn from(iso: Isometry3) -> Self {
        let m = iso.q;
        IsometryRepr {
            matrix: [
                m[(0, 0)],
                m[(0, 1)],
                m[(0, 2)],
                m[(1, 0)],
                m[(1, 1)],
                m[(1, 2)],
                m[(2, 0)],
                m[(2, 1)],
                m[(2, 2)],
            ],
            translation: [iso.t.x, iso.t.y, iso.t.z],
            orientation: iso.orientation,
        }
    }
}

fn orthogonality_defect(q: &Matrix3<f64>) -> f64 {
    (q.transpose() * q - Matrix3::identity()).abs().max()
}

impl Isometry3 {
    pub fn new(q: Matrix3<f64>, t: Vec3) -> Result<Self> {
        if q.iter().chain(t.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NotOrthogonal {
                deviation: f64::INFINITY,
            });
        }
        let deviation = orthogonality_defect(&q);
        if deviation > ORTHO_TOL {
            return Err(Error::NotOrthogonal { deviation });
        }
        let orientation = if q.determinant() > 0.0 { 1 } else { -1 };
        Ok(Isometry3 { q, t, orientation })
    }

    /// The orthogonal matrix nearest to `m` in Frobenius norm, paired with `t`.
    pub fn reorthonormalized(m: Matrix3<f64>, t: Vec3) -> Result<Self> {
        let svd = SVD::new(m, true, true);
        let (u, vt) = match (svd.u, svd.v_t) {
            (Some(u), Some(vt)) => (u, vt),
            _ => {
                return Err(Error::NotOrthogonal {
                    deviation: f64::INFINITY,
                })
            }
        };
        Isometry3::new(u * vt, t)
    }

    pub fn identity() -> Self {
        Isometry3 {
            q: Matrix3::identity(),
            t: Vec3::zeros(),
            orientation: 1,
        }
    }

    pub fn translation(t: Vec3) -> Self {
        Isometry3 {
            t,
            ..Isometry3::identity()
        }
    }

    fn rotation(q: Matrix3<f64>) -> Self {
        Isometry3 {
            q,
            t: Vec3::zeros(),
            orientation: 1,
        }
    }

    pub fn rotation_x(alpha: f64) -> Self {
        Self::rotation(rotation_x(alpha))
    }

    pub fn rotation_y(beta: f64) -> Self {
        Self::rotation(rotation_y(beta))
    }

    pub fn rotation_z(theta: f64) -> Self {
        Self::rotation(rotation_z(theta))
    }

    /// `(x, y, z) ↦ (x, y, −z)`.
    pub fn reflection_z() -> Self {
        Isometry3 {
            q: Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0)),
            t: Vec3::zeros(),
            orientation: -1,
        }
    }

    /// `(x, y, z) ↦ (x, −y, z)`.
    pub fn reflection_y() -> Self {
        Isometry3 {
            q: Matrix3::from_diagonal(&Vec3::new(1.0, -1.0, 1.0)),
            t: Vec3::zeros(),
            orientation: -1,
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.q
    }

    pub fn translation_part(&self) -> Vec3 {
        self.t
    }

    pub fn orientation(&self) -> i8 {
        self.orientation
    }

    pub fn is_translation(&self) -> bool {
        self.q == Matrix3::identity()
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.q * p + self.t
    }

    /// Applies only the orthogonal part.
    pub fn apply_linear(&self, v: Vec3) -> Vec3 {
        self.q * v
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Isometry3) -> Isometry3 {
        Isometry3 {
            q: self.q * other.q,
            t: self.q * other.t + self.t,
            orientation: self.orientation * other.orientation,
        }
    }

    pub fn inverse(&self) -> Isometry3 {
        let qt = self.q.transpose();
        Isometry3 {
            q: qt,
            t: -(qt * self.t),
            orientation: self.orientation,
        }
    }

    /// `other ∘ self ∘ other⁻¹`.
    pub fn conjugate_by(&self, other: &Isometry3) -> Isometry3 {
        other.compose(self).compose(&other.inverse())
    }

    /// Splits into `(orthogonal, translation)` with `self = translation ∘ orthogonal`.
    pub fn decompose(&self) -> (Isometry3, Isometry3) {
        (
            Isometry3 {
                q: self.q,
                t: Vec3::zeros(),
                orientation: self.orientation,
            },
            Isometry3::translation(self.t),
        )
    }

    /// Re-checks the orthogonality invariant.
    pub fn check(&self) -> Result<()> {
        let deviation = orthogonality_defect(&self.q);
        if deviation > ORTHO_TOL || !deviation.is_finite() {
            Err(Error::NotOrthogonal { deviation })
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for Isometry3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.q;
        write!(
            f,
            "Q = [[{:.6}, {:.6}, {:.6}], [{:.6}, {:.6}, {:.6}], [{:.6}, {:.6}, {:.6}]], t = ({:.6}, {:.6}, {:.6})",
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
            self.t.x,
            self.t.y,
            self.t.z
        )
    }
}

pub fn apply_isometry(iso: &Isometry3, p: Vec3) -> Result<Vec3> {
    iso.check()?;
    Ok(iso.apply(p))
}

pub fn decompose_isometry(iso: &Isometry3) -> (Isometry3, Isometry3) {
    iso.decompose()
}
