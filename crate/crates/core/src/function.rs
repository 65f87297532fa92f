//! Candidate functions `f: R² → R`: closed-form rigid families, parsed
//! expressions and sampled grids, plus the graph transformations used to
//! normalize the `a + b·e^{kx} + d·y` family.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::{Vec2, Vec3};

/// `s(y)` for the `a + s(y)·e^{kx}` family.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveSpec {
    Expression(Expr),
    /// Linear interpolation between strictly increasing abscissae.
    Table { ys: Vec<f64>, values: Vec<f64> },
}

impl CurveSpec {
    pub fn expression(expr: Expr) -> Result<Self> {
        if expr.mentions_x() {
            return Err(Error::InvalidSpec("s(y) must not depend on x".into()));
        }
        Ok(CurveSpec::Expression(expr))
    }

    pub fn table(ys: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if ys.len() < 2 || ys.len() != values.len() {
            return Err(Error::InvalidSpec(
                "curve table needs at least two (y, value) pairs".into(),
            ));
        }
        if ys.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSpec(
                "curve table abscissae must be strictly increasing".into(),
            ));
        }
        if ys.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("curve table entries must be finite".into()));
        }
        Ok(CurveSpec::Table { ys, values })
    }

    pub fn eval(&self, y: f64) -> Result<f64> {
        match self {
            CurveSpec::Expression(e) => e.eval(0.0, y),
            CurveSpec::Table { ys, values } => {
                let n = ys.len();
                if y < ys[0] || y > ys[n - 1] {
                    return Err(Error::OutOfDomain { x: f64::NAN, y });
                }
                let j = match ys.binary_search_by(|v| v.total_cmp(&y)) {
                    Ok(j) => return Ok(values[j]),
                    Err(j) => j,
                };
                let (y0, y1) = (ys[j - 1], ys[j]);
                let t = (y - y0) / (y1 - y0);
                Ok(values[j - 1] * (1.0 - t) + values[j] * t)
            }
        }
    }
}

impl fmt::Display for CurveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveSpec::Expression(e) => write!(f, "{e}"),
            CurveSpec::Table { ys, .. } => write!(
                f,
                "table[{} points on [{}, {}]]",
                ys.len(),
                ys[0],
                ys[ys.len() - 1]
            ),
        }
    }
}

/// The three canonical rigid families.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `a + b·x + d·y`
    Affine { a: f64, b: f64, d: f64 },
    /// `a + s(y)·e^{kx}`
    ExpStrip { a: f64, k: f64, s: CurveSpec },
    /// `a + b·e^{kx} + d·y`
    ExpAffine { a: f64, b: f64, d: f64, k: f64 },
}

impl Family {
    fn validate(&self) -> Result<()> {
        let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
        match self {
            Family::Affine { a, b, d } if finite(&[*a, *b, *d]) => Ok(()),
            Family::ExpStrip { a, k, .. } if finite(&[*a, *k]) => {
                if *k == 0.0 {
                    Err(Error::InvalidSpec("expstrip requires k != 0".into()))
                } else {
                    Ok(())
                }
            }
            Family::ExpAffine { a, b, d, k } if finite(&[*a, *b, *d, *k]) => {
                if *k == 0.0 {
                    Err(Error::InvalidSpec("expaffine requires k != 0".into()))
                } else {
                    Ok(())
                }
            }
            _ => Err(Error::InvalidSpec("family parameters must be finite".into())),
        }
    }

    fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let v = match self {
            Family::Affine { a, b, d } => a + b * x + d * y,
            Family::ExpStrip { a, k, s } => a + s.eval(y)? * (k * x).exp(),
            Family::ExpAffine { a, b, d, k } => a + b * (k * x).exp() + d * y,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Eval(format!("non-finite value at ({x}, {y})")))
        }
    }

    pub fn tag(&self) -> FamilyTag {
        match self {
            Family::Affine { .. } => FamilyTag::Affine,
            Family::ExpStrip { .. } => FamilyTag::ExpStrip,
            Family::ExpAffine { .. } => FamilyTag::ExpAffine,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FamilyTag {
    Affine,
    ExpAffine,
    ExpStrip,
}

impl FamilyTag {
    /// Number of free scalar parameters, used to break near-ties.
    pub fn complexity(self) -> u8 {
        match self {
            FamilyTag::Affine => 0,
            FamilyTag::ExpAffine => 1,
            FamilyTag::ExpStrip => 2,
        }
    }
}

impl fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyTag::Affine => "affine",
            FamilyTag::ExpAffine => "expaffine",
            FamilyTag::ExpStrip => "expstrip",
        })
    }
}

/// A function sampled on a regular lattice, evaluated by bilinear
/// interpolation inside its hull.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    origin: Vec2,
    spacing: Vec2,
    nx: usize,
    ny: usize,
    /// Row-major: `values[iy * nx + ix]`.
    values: Vec<f64>,
}

impl Grid {
    pub fn new(origin: Vec2, spacing: Vec2, nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if !(spacing.x > 0.0 && spacing.y > 0.0) {
            return Err(Error::InvalidSpec("grid spacing must be positive".into()));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidSpec(
                "grid needs at least two nodes per axis".into(),
            ));
        }
        if values.len() != nx * ny {
            return Err(Error::InvalidSpec(format!(
                "grid has {} values, expected {}x{}",
                values.len(),
                nx,
                ny
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("grid values must be finite".into()));
        }
        Ok(Grid {
            origin,
            spacing,
            nx,
            ny,
            values,
        })
    }

    /// Samples `spec` on the nodes of `window`.
    pub fn sample(spec: &FunctionSpec, window: &Window) -> Result<Self> {
        let mut values = Vec::with_capacity(window.nx * window.ny);
        for iy in 0..window.ny {
            for ix in 0..window.nx {
                let p = window.node(ix, iy);
                values.push(spec.evaluate(p.x, p.y)?);
            }
        }
        let spacing = Vec2::new(
            (window.xmax - window.xmin) / (window.nx - 1) as f64,
            (window.ymax - window.ymin) / (window.ny - 1) as f64,
        );
        Grid::new(
            Vec2::new(window.xmin, window.ymin),
            spacing,
            window.nx,
            window.ny,
            values,
        )
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn spacing(&self) -> Vec2 {
        self.spacing
    }

    pub fn hull(&self) -> Window {
        Window {
            xmin: self.origin.x,
            xmax: self.origin.x + self.spacing.x * (self.nx - 1) as f64,
            ymin: self.origin.y,
            ymax: self.origin.y + self.spacing.y * (self.ny - 1) as f64,
            nx: self.nx,
            ny: self.ny,
        }
    }

    fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let locate = |v: f64, o: f64, h: f64, n: usize| -> Option<(usize, f64)> {
            let mut u = (v - o) / h;
            let last = (n - 1) as f64;
            // Snap to nodes so that lattice points reproduce stored values exactly.
            if (u - u.round()).abs() < 1e-9 {
                u = u.round();
            }
            if !(0.0..=last).contains(&u) {
                return None;
            }
            let i = (u.floor() as usize).min(n - 2);
            Some((i, u - i as f64))
        };
        let (ix, tx) = locate(x, self.origin.x, self.spacing.x, self.nx)
            .ok_or(Error::OutOfDomain { x, y })?;
        let (iy, ty) = locate(y, self.origin.y, self.spacing.y, self.ny)
            .ok_or(Error::OutOfDomain { x, y })?;
        let v = |i: usize, j: usize| self.values[j * self.nx + i];
        if tx == 0.0 && ty == 0.0 {
            return Ok(v(ix, iy));
        }
        Ok((1.0 - ty) * ((1.0 - tx) * v(ix, iy) + tx * v(ix + 1, iy))
            + ty * ((1.0 - tx) * v(ix, iy + 1) + tx * v(ix + 1, iy + 1)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    ClosedForm(Family),
    Expression(Expr),
    Grid(Grid),
}

/// A bivariate function together with a rotation of its input about the
/// z-axis: `evaluate(p) = body(R(-rotation)·p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSpec {
    pub body: Body,
    pub rotation_z: f64,
}

impl FunctionSpec {
    pub fn new(body: Body) -> Result<Self> {
        if let Body::ClosedForm(fam) = &body {
            fam.validate()?;
        }
        Ok(FunctionSpec {
            body,
            rotation_z: 0.0,
        })
    }

    pub fn closed_form(family: Family) -> Result<Self> {
        Self::new(Body::ClosedForm(family))
    }

    pub fn expression(src: &str) -> Result<Self> {
        Self::new(Body::Expression(Expr::parse(src)?))
    }

    pub fn grid(grid: Grid) -> Self {
        FunctionSpec {
            body: Body::Grid(grid),
            rotation_z: 0.0,
        }
    }

    pub fn affine(a: f64, b: f64, d: f64) -> Self {
        FunctionSpec {
            body: Body::ClosedForm(Family::Affine { a, b, d }),
            rotation_z: 0.0,
        }
    }

    pub fn exp_affine(a: f64, b: f64, d: f64, k: f64) -> Result<Self> {
        Self::closed_form(Family::ExpAffine { a, b, d, k })
    }

    pub fn exp_strip(a: f64, k: f64, s: CurveSpec) -> Result<Self> {
        Self::closed_form(Family::ExpStrip { a, k, s })
    }

    pub fn with_rotation(mut self, theta: f64) -> Self {
        self.rotation_z = theta;
        self
    }

    pub fn evaluate(&self, x: f64, y: f64) -> Result<f64> {
        let (u, v) = if self.rotation_z == 0.0 {
            (x, y)
        } else {
            let (s, c) = self.rotation_z.sin_cos();
            (c * x + s * y, -s * x + c * y)
        };
        match &self.body {
            Body::ClosedForm(fam) => fam.eval(u, v),
            Body::Expression(e) => e.eval(u, v),
            Body::Grid(g) => g.eval(u, v),
        }
    }

    pub fn eval_at(&self, p: Vec2) -> Result<f64> {
        self.evaluate(p.x, p.y)
    }

    /// The graph point `(x, y, f(x, y))`.
    pub fn graph_point(&self, p: Vec2) -> Result<Vec3> {
        Ok(Vec3::new(p.x, p.y, self.eval_at(p)?))
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.body {
            Body::ClosedForm(Family::Affine { a, b, d }) => write!(f, "affine(a={a}, b={b}, d={d})")?,
            Body::ClosedForm(Family::ExpStrip { a, k, s }) => {
                write!(f, "expstrip(a={a}, k={k}, s(y)={s})")?
            }
            Body::ClosedForm(Family::ExpAffine { a, b, d, k }) => {
                write!(f, "expaffine(a={a}, b={b}, d={d}, k={k})")?
            }
            Body::Expression(e) => write!(f, "{e}")?,
            Body::Grid(g) => {
                let h = g.hull();
                write!(
                    f,
                    "grid({}x{} on [{}, {}]x[{}, {}])",
                    g.nx, g.ny, h.xmin, h.xmax, h.ymin, h.ymax
                )?
            }
        }
        if self.rotation_z != 0.0 {
            write!(f, " rotated by {} rad", self.rotation_z)?;
        }
        Ok(())
    }
}

/// Rotates the graph of `spec` about the z-axis by `theta`.
pub fn rotate_about_z(spec: &FunctionSpec, theta: f64) -> FunctionSpec {
    let mut out = spec.clone();
    out.rotation_z += theta;
    out
}

/// Slope of `f` over the segment `[a, b]`.
pub fn directional_slope(spec: &FunctionSpec, a: Vec2, b: Vec2) -> Result<f64> {
    let len = (b - a).norm();
    if len == 0.0 {
        return Err(Error::DegenerateSegment);
    }
    Ok((spec.eval_at(b)? - spec.eval_at(a)?) / len)
}

/// A rectangular analysis window with a sampling resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Window {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(xmin < xmax && ymin < ymax) {
            return Err(Error::InvalidArgument(format!(
                "window [{xmin}, {xmax}]x[{ymin}, {ymax}] is empty"
            )));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidArgument(
                "window grid counts must be at least 2".into(),
            ));
        }
        Ok(Window {
            xmin,
            xmax,
            ymin,
            ymax,
            nx,
            ny,
        })
    }

    /// `[-r, r]²` with `n` nodes per axis.
    pub fn square(r: f64, n: usize) -> Self {
        Window::new(-r, r, -r, r, n, n).expect("square window with r > 0 and n >= 2")
    }

    pub fn with_resolution(mut self, nx: usize, ny: usize) -> Self {
        self.nx = nx.max(2);
        self.ny = ny.max(2);
        self
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (self.xmin..=self.xmax).contains(&p.x) && (self.ymin..=self.ymax).contains(&p.y)
    }

    pub fn node(&self, ix: usize, iy: usize) -> Vec2 {
        let tx = ix as f64 / (self.nx - 1) as f64;
        let ty = iy as f64 / (self.ny - 1) as f64;
        Vec2::new(
            if ix + 1 == self.nx { self.xmax } else { self.xmin + tx * self.width() },
            if iy + 1 == self.ny { self.ymax } else { self.ymin + ty * self.height() },
        )
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec2> + '_ {
        (0..self.ny).flat_map(move |iy| (0..self.nx).map(move |ix| self.node(ix, iy)))
    }

    /// This window scaled about its center by `factor`.
    pub fn scaled(&self, factor: f64) -> Window {
        let c = self.center();
        let hw = 0.5 * self.width() * factor;
        let hh = 0.5 * self.height() * factor;
        Window {
            xmin: c.x - hw,
            xmax: c.x + hw,
            ymin: c.y - hh,
            ymax: c.y + hh,
            ..*self
        }
    }

    /// `rungs` nested windows ending at `self`: rung `i` is `self` scaled by
    /// `(i + 1) / rungs`.
    pub fn ladder(&self, rungs: usize) -> Vec<Window> {
        let rungs = rungs.max(1);
        (1..=rungs)
            .map(|i| {
                if i == rungs {
                    *self
                } else {
                    self.scaled(i as f64 / rungs as f64)
                }
            })
            .collect()
    }
}

/// One step of a graph transformation, acting on points of R³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphTransform {
    /// `(x, y, z) ↦ (x + t, y, z)`
    TranslateX(f64),
    /// `(x, y, z) ↦ (x, y, λz)`, λ ≠ 0
    VerticalScale(f64),
    /// `(x, y, z) ↦ (x, -y, z)`
    ReflectY,
    /// `(x, y, z) ↦ (x, y, z + a)`
    VerticalShift(f64),
    /// `p ↦ s·p`, s ≠ 0
    Homothety(f64),
    /// rotation of the `(x, y)` plane by the angle
    RotateZ(f64),
}

impl GraphTransform {
    pub fn apply(&self, p: Vec3) -> Vec3 {
        match *self {
            GraphTransform::TranslateX(t) => Vec3::new(p.x + t, p.y, p.z),
            GraphTransform::VerticalScale(l) => Vec3::new(p.x, p.y, l * p.z),
            GraphTransform::ReflectY => Vec3::new(p.x, -p.y, p.z),
            GraphTransform::VerticalShift(a) => Vec3::new(p.x, p.y, p.z + a),
            GraphTransform::Homothety(s) => p * s,
            GraphTransform::RotateZ(theta) => {
                let (s, c) = theta.sin_cos();
                Vec3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z)
            }
        }
    }
}

/// Transformations applied in order to the graph of a normal form to obtain
/// the graph of the original function.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransformChain {
    pub steps: Vec<GraphTransform>,
}

impl TransformChain {
    pub fn is_identity(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.steps.iter().fold(p, |q, s| s.apply(q))
    }
}

/// Reduces `a + b·e^{kx} + d·y` (possibly rotated) to `e^x + y`.
///
/// The returned chain maps `graph(e^x + y)` onto `graph(f)`. Steps, in order:
/// x-translation by `-log(b'/d')`, vertical scaling by `d'`, optional
/// reflection `y ↦ -y`, vertical shift by `k·a`, homothety by `1/k`, and the
/// input's z-rotation. Here `b' = k·b` and `d' = ±d` with `sign(d') = sign(b')`.
pub fn normalize_exp_affine(spec: &FunctionSpec) -> Result<(FunctionSpec, TransformChain)> {
    let (a, b, d, k) = match &spec.body {
        Body::ClosedForm(Family::ExpAffine { a, b, d, k }) => (*a, *b, *d, *k),
        _ => {
            return Err(Error::InvalidSpec(
                "normalization applies to the expaffine family only".into(),
            ))
        }
    };
    if b == 0.0 || d == 0.0 {
        return Err(Error::DegenerateFamily(format!(
            "expaffine with b = {b}, d = {d} belongs to a simpler family"
        )));
    }
    if k == 0.0 {
        return Err(Error::InvalidSpec("expaffine requires k != 0".into()));
    }
    // After the homothety by k: k·a + (k·b)·e^x + d·y.
    let shift = k * a;
    let b1 = k * b;
    let reflect = b1.signum() != d.signum();
    let d1 = if reflect { -d } else { d };
    let log_ratio = (b1 / d1).ln();

    let mut steps = Vec::new();
    if log_ratio != 0.0 {
        steps.push(GraphTransform::TranslateX(-log_ratio));
    }
    if d1 != 1.0 {
        steps.push(GraphTransform::VerticalScale(d1));
    }
    if reflect {
        steps.push(GraphTransform::ReflectY);
    }
    if shift != 0.0 {
        steps.push(GraphTransform::VerticalShift(shift));
    }
    if k != 1.0 {
        steps.push(GraphTransform::Homothety(1.0 / k));
    }
    if spec.rotation_z != 0.0 {
        steps.push(GraphTransform::RotateZ(spec.rotation_z));
    }
    let normal = FunctionSpec::exp_affine(0.0, 1.0, 1.0, 1.0)?;
    Ok((normal, TransformChain { steps }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, FRAC_PI_2, PI};

    #[test]
    fn evaluate_examples() {
        let f = FunctionSpec::affine(0.0, 1.0, 0.0);
        assert_eq!(f.evaluate(2.0, 5.0).unwrap(), 2.0);
        let g = FunctionSpec::exp_affine(0.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(g.evaluate(0.0, 0.0).unwrap(), 1.0);
        let s = CurveSpec::expression(Expr::parse("2+cos(y)").unwrap()).unwrap();
        let h = FunctionSpec::exp_strip(1.0, 2.0, s).unwrap();
        assert_eq!(h.evaluate(0.0, 0.0).unwrap(), 4.0);
    }

    #[test]
    fn zero_k_rejected() {
        assert!(FunctionSpec::exp_affine(0.0, 1.0, 1.0, 0.0).is_err());
        let s = CurveSpec::expression(Expr::Num(1.0)).unwrap();
        assert!(FunctionSpec::exp_strip(0.0, 0.0, s).is_err());
    }

    #[test]
    fn rotation_examples() {
        let f = FunctionSpec::affine(0.0, 1.0, 0.0);
        let r = rotate_about_z(&f, FRAC_PI_2);
        assert!((r.evaluate(0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let r = rotate_about_z(&f, PI);
        assert!((r.evaluate(1.0, 0.0).unwrap() + 1.0).abs() < 1e-15);
        let r = rotate_about_z(&f, 0.0);
        assert_eq!(r.evaluate(0.3, 0.7).unwrap(), 0.3);
    }

    #[test]
    fn curve_table_interpolates_and_validates() {
        let c = CurveSpec::table(vec![0.0, 1.0, 3.0], vec![1.0, 3.0, 7.0]).unwrap();
        assert_eq!(c.eval(0.5).unwrap(), 2.0);
        assert_eq!(c.eval(1.0).unwrap(), 3.0);
        assert_eq!(c.eval(2.0).unwrap(), 5.0);
        assert!(c.eval(3.5).is_err());
        assert!(CurveSpec::table(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(CurveSpec::expression(Expr::parse("x+y").unwrap()).is_err());
    }

    #[test]
    fn grid_reproduces_nodes_and_rejects_outside() {
        let f = FunctionSpec::expression("exp(x)*cos(y) + x*y").unwrap();
        let w = Window::new(-1.0, 1.0, -0.5, 2.0, 21, 17).unwrap();
        let g = FunctionSpec::grid(Grid::sample(&f, &w).unwrap());
        for p in w.nodes() {
            assert_eq!(g.eval_at(p).unwrap(), f.eval_at(p).unwrap());
        }
        assert!(matches!(g.evaluate(1.01, 0.0), Err(Error::OutOfDomain { .. })));
        assert!(matches!(g.evaluate(0.0, -0.6), Err(Error::OutOfDomain { .. })));
        // bilinear reproduces planes exactly up to rounding
        let plane = FunctionSpec::affine(1.0, 2.0, -1.0);
        let gp = FunctionSpec::grid(Grid::sample(&plane, &w).unwrap());
        let v = gp.evaluate(0.123, 1.456).unwrap();
        assert!((v - plane.evaluate(0.123, 1.456).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn grid_invariants() {
        let o = Vec2::new(0.0, 0.0);
        assert!(Grid::new(o, Vec2::new(0.0, 1.0), 2, 2, vec![0.0; 4]).is_err());
        assert!(Grid::new(o, Vec2::new(1.0, 1.0), 2, 2, vec![0.0; 3]).is_err());
        assert!(Grid::new(o, Vec2::new(1.0, 1.0), 1, 2, vec![0.0; 2]).is_err());
    }

    #[test]
    fn slope_examples() {
        let f = FunctionSpec::affine(0.0, 1.0, 0.0);
        let o = Vec2::zeros();
        assert_eq!(directional_slope(&f, o, Vec2::new(1.0, 0.0)).unwrap(), 1.0);
        assert_eq!(directional_slope(&f, o, Vec2::new(0.0, 1.0)).unwrap(), 0.0);
        assert!(matches!(
            directional_slope(&f, o, o),
            Err(Error::DegenerateSegment)
        ));
        let g = FunctionSpec::expression("exp(x)").unwrap();
        let m = directional_slope(&g, o, Vec2::new(1.0, 0.0)).unwrap();
        assert!((m - (E - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn slope_is_symmetric_in_endpoints() {
        let f = FunctionSpec::expression("sin(x)*y + x^2").unwrap();
        let a = Vec2::new(0.2, -1.0);
        let b = Vec2::new(1.3, 0.4);
        let ab = directional_slope(&f, a, b).unwrap();
        let ba = directional_slope(&f, b, a).unwrap();
        assert_eq!(ab - (-ba), 0.0);
    }

    fn check_chain(a: f64, b: f64, d: f64, k: f64, theta: f64) -> TransformChain {
        let f = FunctionSpec::exp_affine(a, b, d, k).unwrap().with_rotation(theta);
        let (normal, chain) = normalize_exp_affine(&f).unwrap();
        let w = Window::square(2.0, 21);
        let mut worst: f64 = 0.0;
        for p in w.nodes() {
            let q = chain.apply(normal.graph_point(p).unwrap());
            let err = (q.z - f.evaluate(q.x, q.y).unwrap()).abs();
            worst = worst.max(err / (1.0 + q.z.abs()));
        }
        assert!(worst < 1e-9, "chain error {worst} for {a} {b} {d} {k}");
        chain
    }

    #[test]
    fn normalization_examples() {
        assert!(check_chain(0.0, 1.0, 1.0, 1.0, 0.0).is_identity());
        assert_eq!(
            check_chain(2.0, 1.0, 1.0, 1.0, 0.0).steps,
            vec![GraphTransform::VerticalShift(2.0)]
        );
        let c = check_chain(0.0, E * E, 1.0, 1.0, 0.0);
        assert_eq!(c.steps.len(), 1);
        match c.steps[0] {
            GraphTransform::TranslateX(t) => assert!((t + 2.0).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn normalization_handles_signs_and_rotation() {
        check_chain(2.0, 3.0, -0.7, 1.5, 0.0);
        check_chain(-1.0, -2.0, -0.5, -0.8, 0.4);
        check_chain(0.5, -0.3, 4.0, 2.0, -1.1);
    }

    #[test]
    fn normalization_rejects_degenerate() {
        let f = FunctionSpec::exp_affine(0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(normalize_exp_affine(&f), Err(Error::DegenerateFamily(_))));
        let f = FunctionSpec::exp_affine(0.0, 1.0, 0.0, 1.0).unwrap();
        assert!(matches!(normalize_exp_affine(&f), Err(Error::DegenerateFamily(_))));
    }

    #[test]
    fn ladder_is_nested() {
        let w = Window::square(3.0, 11);
        let l = w.ladder(3);
        assert_eq!(l.len(), 3);
        assert!((l[0].xmax - 1.0).abs() < 1e-15);
        assert!((l[1].xmax - 2.0).abs() < 1e-15);
        assert_eq!(l[2], w);
    }
}
