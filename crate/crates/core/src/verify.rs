//! Witness isometries between `graph(f)` and `graph(c·f)`, translation
//! searches and the structure of the translation group.

use std::f64::consts::FRAC_PI_4;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::direction::DirectionSample;
use crate::error::{Error, Result};
use crate::fit::FamilyFit;
use crate::function::{normalize_exp_affine, FamilyTag, FunctionSpec, GraphTransform, Window};
use crate::sphere::{psi, w_coefficient, Isometry3};
use crate::{Vec2, Vec3};

/// Which isometries a certificate may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum IsometryClass {
    All,
    Translations,
    HorizontalTranslations,
}

/// The finite set of scales to certify and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationPlan {
    pub c_list: Vec<f64>,
    pub isometry_class: IsometryClass,
    /// Verification lattice.
    pub window: Window,
    /// Pass iff `residualMax < residual_tol · (1 + max|f|)`.
    pub residual_tol: f64,
    pub min_coverage: f64,
}

impl VerificationPlan {
    pub fn new(c_list: Vec<f64>, window: Window) -> Result<Self> {
        let plan = VerificationPlan {
            c_list,
            isometry_class: IsometryClass::All,
            window,
            residual_tol: 1e-6,
            min_coverage: 0.5,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_list.is_empty() {
            return Err(Error::InvalidArgument("scale list is empty".into()));
        }
        if let Some(c) = self.c_list.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidScale(format!("scale {c} is not positive")));
        }
        Ok(())
    }
}

fn check_scale(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidScale(format!("scale must be positive, got {c}")))
    }
}

/// Horizontal translation witness `(x, z) ↦ (x − t, z + a(c − 1))` for a
/// function with `f(x + t) − a = c·(f(x) − a)`.
pub fn translation_isometry(t: Vec2, a: f64, c: f64) -> Isometry3 {
    Isometry3::translation(Vec3::new(-t.x, -t.y, a * (c - 1.0)))
}

/// Witness for `a + s(y)·e^{kx}` (rotated by the fit's angle): the
/// translation by `(−log(c)/k, 0, a(c − 1))` in the fitted frame.
pub fn witness_exp_strip(fit: &FamilyFit, c: f64) -> Result<Isometry3> {
    check_scale(c)?;
    let k = fit.k();
    if k == 0.0 || !k.is_finite() {
        return Err(Error::InvalidScale(format!("rate must be nonzero, got {k}")));
    }
    let (s, co) = fit.theta.sin_cos();
    let shift = -c.ln() / k;
    Ok(translation_isometry(
        -Vec2::new(co * shift, s * shift),
        fit.params.a,
        c,
    ))
}

/// Witness for `e^x + y`: rotation about the x-axis by `arctan(c) − π/4`
/// followed by the x-translation `log w(c, 1)`.
pub fn normal_form_witness(c: f64) -> Result<Isometry3> {
    check_scale(c)?;
    let alpha = c.atan() - FRAC_PI_4;
    let shift = w_coefficient(c, 1.0)?.ln();
    Ok(Isometry3::translation(Vec3::new(shift, 0.0, 0.0)).compose(&Isometry3::rotation_x(alpha)))
}

fn step_isometry(step: &GraphTransform) -> Option<Isometry3> {
    match *step {
        GraphTransform::TranslateX(t) => Some(Isometry3::translation(Vec3::new(t, 0.0, 0.0))),
        GraphTransform::ReflectY => Some(Isometry3::reflection_y()),
        GraphTransform::RotateZ(theta) => Some(Isometry3::rotation_z(theta)),
        _ => None,
    }
}

/// Transports the normal-form witness through the first `steps` of the chain.
fn lift_witness(steps: &[GraphTransform], c: f64) -> Result<Isometry3> {
    let Some((last, rest)) = steps.split_last() else {
        return normal_form_witness(c);
    };
    if let Some(s) = step_isometry(last) {
        return Ok(lift_witness(rest, c)?.conjugate_by(&s));
    }
    match *last {
        GraphTransform::Homothety(s) => {
            let w = lift_witness(rest, c)?;
            Isometry3::new(*w.matrix(), w.translation_part() * s)
        }
        GraphTransform::VerticalShift(a) => {
            let w = lift_witness(rest, c)?;
            Ok(Isometry3::translation(Vec3::new(0.0, 0.0, c * a))
                .compose(&w)
                .compose(&Isometry3::translation(Vec3::new(0.0, 0.0, -a))))
        }
        GraphTransform::VerticalScale(l) => {
            // graph(|l|·g) → graph(c|l|·g) through graph(g).
            let m = l.abs();
            let w = lift_witness(rest, c * m)?.compose(&lift_witness(rest, m)?.inverse());
            Ok(if l < 0.0 {
                w.conjugate_by(&Isometry3::reflection_z())
            } else {
                w
            })
        }
        _ => unreachable!("isometric steps handled above"),
    }
}

/// Witness for `a + b·e^{kx} + d·y` (rotated by the fit's angle), obtained by
/// conjugating the normal-form witness through the normalization chain.
pub fn witness_exp_affine(fit: &FamilyFit, c: f64) -> Result<Isometry3> {
    check_scale(c)?;
    let spec = FunctionSpec::exp_affine(
        fit.params.a,
        fit.params.b.unwrap_or(0.0),
        fit.params.d.unwrap_or(0.0),
        fit.k(),
    )?
    .with_rotation(fit.theta);
    let (_, chain) = normalize_exp_affine(&spec)?;
    lift_witness(&chain.steps, c)
}

/// Witness for a plane: align the gradient with `+x`, tilt about the y-axis
/// from slope `β` to `cβ`, and shift vertically back onto `graph(c·f)`.
pub fn witness_affine(fit: &FamilyFit, c: f64) -> Result<Isometry3> {
    check_scale(c)?;
    let a = fit.params.a;
    let (b, d) = (fit.params.b.unwrap_or(0.0), fit.params.d.unwrap_or(0.0));
    let beta = b.hypot(d);
    if beta == 0.0 {
        return Ok(Isometry3::translation(Vec3::new(0.0, 0.0, a * (c - 1.0))));
    }
    let gamma = (c * beta).atan() - beta.atan();
    let (sg, cg) = gamma.sin_cos();
    let tz = c * a - a * cg - c * beta * a * sg;
    let tilt = Isometry3::translation(Vec3::new(0.0, 0.0, tz)).compose(&Isometry3::rotation_y(gamma));
    let frame = Isometry3::rotation_z(d.atan2(b) + fit.theta);
    Ok(tilt.conjugate_by(&frame))
}

/// The family witness for a fit. Exponential fits with a negligible linear
/// term use the strip translation.
pub fn witness_for_fit(fit: &FamilyFit, c: f64) -> Result<Isometry3> {
    match fit.family {
        FamilyTag::Affine => witness_affine(fit, c),
        FamilyTag::ExpStrip => witness_exp_strip(fit, c),
        FamilyTag::ExpAffine => {
            let b = fit.params.b.unwrap_or(0.0);
            let d = fit.params.d.unwrap_or(0.0);
            if d.abs() <= 1e-9 * (b * fit.k()).abs() {
                witness_exp_strip(fit, c)
            } else {
                witness_exp_affine(fit, c)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WitnessCheck {
    pub residual_max: f64,
    pub residual_rms: f64,
    /// Fraction of lattice points whose image lands inside the window.
    pub coverage: f64,
}

/// Measures how far `iso(graph(f))` is from `graph(c·f)` on the window
/// lattice: for each image point inside the window, the vertical gap.
pub fn verify_witness(
    spec: &FunctionSpec,
    c: f64,
    iso: &Isometry3,
    window: &Window,
    min_coverage: f64,
) -> Result<WitnessCheck> {
    iso.check()?;
    let total = window.nx * window.ny;
    let mut covered = 0usize;
    let mut max = 0.0f64;
    let mut sq = 0.0;
    for p in window.nodes() {
        let q = iso.apply(spec.graph_point(p)?);
        let base = Vec2::new(q.x, q.y);
        if !window.contains(base) {
            continue;
        }
        let Ok(v) = spec.eval_at(base) else { continue };
        let r = (q.z - c * v).abs();
        covered += 1;
        max = max.max(r);
        sq += r * r;
    }
    let coverage = covered as f64 / total as f64;
    if covered == 0 || coverage < min_coverage {
        return Err(Error::CoverageTooLow {
            coverage,
            required: min_coverage,
        });
    }
    Ok(WitnessCheck {
        residual_max: max,
        residual_rms: (sq / covered as f64).sqrt(),
        coverage,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TranslationWitness {
    /// `f(x + t) − a = c·(f(x) − a)`.
    pub t: Vec2,
    pub a: f64,
    /// Probe rms of the functional equation relative to `1 + max|c·f|`.
    pub residual: f64,
}

impl TranslationWitness {
    pub fn isometry(&self, c: f64) -> Isometry3 {
        translation_isometry(self.t, self.a, c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslationSearch {
    /// Candidate translations lie in this box.
    pub search_box: Window,
    /// Coarse scan resolution per axis.
    pub coarse: usize,
    /// Probe points `x` are the nodes of this window.
    pub probes: Window,
    pub offset: bool,
    pub tol: f64,
}

impl TranslationSearch {
    pub fn new(probes: Window) -> Self {
        TranslationSearch {
            search_box: Window::square(10.0, 2),
            coarse: 201,
            probes: probes.with_resolution(21, 21),
            offset: true,
            tol: 1e-6,
        }
    }
}

struct Equation<'a> {
    spec: &'a FunctionSpec,
    c: f64,
    xs: Vec<Vec2>,
    cf: Vec<f64>,
    offset: bool,
    scale: f64,
}

impl Equation<'_> {
    /// Residuals `f(x + t) − c·f(x) − a(1 − c)` with `a` eliminated, and `a`.
    fn residuals(&self, t: Vec2, xs: &[Vec2], cf: &[f64]) -> Option<(Vec<f64>, f64)> {
        let mut r = Vec::with_capacity(xs.len());
        for (x, v) in xs.iter().zip(cf) {
            let w = self.spec.eval_at(x + t).ok()?;
            r.push(w - v);
        }
        let mut a = 0.0;
        if self.offset && self.c != 1.0 {
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            a = mean / (1.0 - self.c);
            r.iter_mut().for_each(|v| *v -= mean);
        }
        Some((r, a))
    }

    fn error(&self, t: Vec2, stride: usize) -> f64 {
        let xs: Vec<Vec2> = self.xs.iter().step_by(stride).copied().collect();
        let cf: Vec<f64> = self.cf.iter().step_by(stride).copied().collect();
        match self.residuals(t, &xs, &cf) {
            Some((r, _)) => (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt() / self.scale,
            None => f64::INFINITY,
        }
    }

    fn full(&self, t: Vec2) -> f64 {
        self.error(t, 1)
    }
}

fn nelder_mead(f: impl Fn(Vec2) -> f64, start: Vec2, size: f64, iters: usize) -> (Vec2, f64) {
    let mut s = [
        start,
        start + Vec2::new(size, 0.0),
        start + Vec2::new(0.0, size),
    ];
    let mut v = s.map(&f);
    for _ in 0..iters {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        s = idx.map(|i| s[i]);
        v = idx.map(|i| v[i]);
        if (s[1] - s[0]).norm().max((s[2] - s[0]).norm()) < 1e-13 * (1.0 + s[0].norm()) {
            break;
        }
        let centroid = (s[0] + s[1]) * 0.5;
        let xr = centroid + (centroid - s[2]);
        let fr = f(xr);
        if fr < v[0] {
            let xe = centroid + (centroid - s[2]) * 2.0;
            let fe = f(xe);
            if fe < fr {
                s[2] = xe;
                v[2] = fe;
            } else {
                s[2] = xr;
                v[2] = fr;
            }
        } else if fr < v[1] {
            s[2] = xr;
            v[2] = fr;
        } else {
            let xc = centroid + (s[2] - centroid) * 0.5;
            let fc = f(xc);
            if fc < v[2] {
                s[2] = xc;
                v[2] = fc;
            } else {
                for i in 1..3 {
                    s[i] = s[0] + (s[i] - s[0]) * 0.5;
                    v[i] = f(s[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| v[i].total_cmp(&v[j])).expect("three vertices");
    (s[best], v[best])
}

/// Gauss–Newton on the residual vector with a central-difference Jacobian.
fn gauss_newton(eq: &Equation<'_>, mut t: Vec2, iters: usize) -> Vec2 {
    let mut err = eq.full(t);
    for _ in 0..iters {
        let h = 1e-6 * (1.0 + t.norm());
        let Some((r, _)) = eq.residuals(t, &eq.xs, &eq.cf) else { break };
        let mut cols = [Vec::new(), Vec::new()];
        for (k, e) in [Vec2::new(h, 0.0), Vec2::new(0.0, h)].iter().enumerate() {
            let (Some((rp, _)), Some((rm, _))) =
                (eq.residuals(t + e, &eq.xs, &eq.cf), eq.residuals(t - e, &eq.xs, &eq.cf))
            else {
                return t;
            };
            cols[k] = rp.iter().zip(&rm).map(|(p, m)| (p - m) / (2.0 * h)).collect();
        }
        let (mut g00, mut g01, mut g11, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..r.len() {
            let (j0, j1) = (cols[0][i], cols[1][i]);
            g00 += j0 * j0;
            g01 += j0 * j1;
            g11 += j1 * j1;
            b0 += j0 * r[i];
            b1 += j1 * r[i];
        }
        let det = g00 * g11 - g01 * g01;
        if !(det.abs() > 0.0) || !det.is_finite() {
            break;
        }
        let step = Vec2::new((g11 * b0 - g01 * b1) / det, (g00 * b1 - g01 * b0) / det);
        let next = t - step;
        let e = eq.full(next);
        if e < err {
            t = next;
            err = e;
        } else {
            break;
        }
    }
    t
}

/// Searches for `t` (and `a` when `offset`) with `f(x + t) = c·f(x) + a(1 − c)`
/// on the probe lattice: coarse scan of the box, simplex descent from the best
/// cells, Gauss–Newton polish.
pub fn find_translation_witness(
    spec: &FunctionSpec,
    c: f64,
    search: &TranslationSearch,
) -> Result<Option<TranslationWitness>> {
    check_scale(c)?;
    let xs: Vec<Vec2> = search.probes.nodes().collect();
    let cf: Vec<f64> = xs
        .iter()
        .map(|x| spec.eval_at(*x).map(|v| c * v))
        .collect::<Result<_>>()?;
    let scale = 1.0 + cf.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eq = Equation {
        spec,
        c,
        xs,
        cf,
        offset: search.offset,
        scale,
    };
    let witness = |t: Vec2| -> TranslationWitness {
        let a = eq.residuals(t, &eq.xs, &eq.cf).map_or(0.0, |r| r.1);
        TranslationWitness {
            t,
            a,
            residual: eq.full(t),
        }
    };
    if c == 1.0 {
        let w = witness(Vec2::zeros());
        return Ok((w.residual < search.tol).then_some(w));
    }

    let b = &search.search_box;
    let n = search.coarse.max(2);
    let cell = Vec2::new(b.width(), b.height()) / (n - 1) as f64;
    // Sparse probes for the scan.
    let stride = (eq.xs.len() / 64).max(1);
    let mut coarse: Vec<(f64, Vec2)> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let t = Vec2::new(
                b.xmin + cell.x * (idx % n) as f64,
                b.ymin + cell.y * (idx / n) as f64,
            );
            (eq.error(t, stride), t)
        })
        .collect();
    coarse.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.x.total_cmp(&b.1.x)).then(a.1.y.total_cmp(&b.1.y)));

    // Seeds from distinct basins: periodic profiles repeat the minimum.
    let mut seeds: Vec<Vec2> = Vec::new();
    let spread = 3.0 * cell.x.max(cell.y);
    for &(e, t0) in &coarse {
        if seeds.len() == 6 || !e.is_finite() {
            break;
        }
        if seeds.iter().all(|s| (s - t0).amax() > spread) {
            seeds.push(t0);
        }
    }
    let mut polished: Vec<(f64, Vec2)> = seeds
        .into_iter()
        .map(|t0| {
            let (t1, _) = nelder_mead(|t| eq.full(t), t0, 0.5 * cell.x.max(cell.y), 400);
            let (t2, _) = nelder_mead(|t| eq.full(t), t1, 0.05 * cell.x.max(cell.y), 400);
            let t3 = gauss_newton(&eq, t2, 20);
            (eq.full(t3), t3)
        })
        .collect();
    // Among accepted translations the shortest wins.
    polished.sort_by(|a, b| {
        let (pa, pb) = (a.0 < search.tol, b.0 < search.tol);
        pb.cmp(&pa).then_with(|| {
            if pa {
                a.1.norm().total_cmp(&b.1.norm())
            } else {
                a.0.total_cmp(&b.0)
            }
        })
    });
    Ok(polished
        .first()
        .and_then(|&(e, t)| (e < search.tol).then(|| witness(t))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multiplicativity {
    pub residual: f64,
    pub positive: bool,
}

/// `|g(t₁ + t₂) − g(t₁)·g(t₂)|` for `g = f/f(0)`, with positivity of
/// `g(t₁)` and `g(t₂)`.
pub fn multiplicativity_residual(spec: &FunctionSpec, t1: Vec2, t2: Vec2) -> Result<Multiplicativity> {
    let f0 = spec.evaluate(0.0, 0.0)?;
    if f0 == 0.0 {
        return Err(Error::NormalizationImpossible);
    }
    let g = |t: Vec2| spec.eval_at(t).map(|v| v / f0);
    let (g1, g2) = (g(t1)?, g(t2)?);
    Ok(Multiplicativity {
        residual: (g(t1 + t2)? - g1 * g2).abs(),
        positive: g1 > 0.0 && g2 > 0.0,
    })
}

/// Closure of a finitely generated subgroup of R², up to tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum GroupClosure {
    Trivial,
    Lattice1 { u: Vec2, r: f64 },
    Line { u: Vec2 },
    Lattice2 { u1: Vec2, u2: Vec2 },
    LineLattice { u: Vec2, r: f64 },
    Plane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationGroupEstimate {
    pub generators: Vec<Vec2>,
    pub closure: GroupClosure,
    /// Largest leftover from the final reduction.
    pub residual: f64,
}

/// `v` or `−v`, whichever has azimuth in `[0, π)`.
fn canonical(v: Vec2) -> Vec2 {
    if v.y < 0.0 || (v.y == 0.0 && v.x < 0.0) {
        -v
    } else {
        v
    }
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Lagrange–Gauss reduction of a planar basis.
fn gauss_reduce(mut b1: Vec2, mut b2: Vec2) -> (Vec2, Vec2) {
    for _ in 0..200 {
        if b2.norm_squared() < b1.norm_squared() {
            std::mem::swap(&mut b1, &mut b2);
        }
        let m = (b1.dot(&b2) / b1.norm_squared()).round();
        if m == 0.0 {
            break;
        }
        b2 -= b1 * m;
    }
    if b2.norm_squared() < b1.norm_squared() {
        std::mem::swap(&mut b1, &mut b2);
    }
    (b1, b2)
}

/// Real Euclid with tolerance on non-negative reals.
fn tolerance_gcd(mut a: f64, mut b: f64, tol: f64) -> f64 {
    if a < b {
        std::mem::swap(&mut a, &mut b);
    }
    while b > tol {
        let r = (a - (a / b).round() * b).abs();
        a = b;
        b = r;
    }
    a
}

/// Classifies the closure of the group generated by `generators`; vectors
/// shorter than `tol_rel · max|g|` count as zero and a reduced generator
/// shorter than `√tol_rel · max|g|` marks a dense direction.
pub fn classify_translation_group(generators: &[Vec2], tol_rel: f64) -> TranslationGroupEstimate {
    let scale = generators.iter().fold(0.0f64, |m, g| m.max(g.norm()));
    let tol = tol_rel * scale;
    let dense = tol_rel.sqrt() * scale;
    let estimate = |closure, residual| TranslationGroupEstimate {
        generators: generators.to_vec(),
        closure,
        residual,
    };
    let mut set: Vec<Vec2> = generators.iter().copied().filter(|g| g.norm() > tol).collect();
    if set.is_empty() {
        return estimate(GroupClosure::Trivial, scale);
    }
    set.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let u = set[0] / set[0].norm();
    if set.iter().all(|v| cross(u, *v).abs() <= tol) {
        let u = canonical(u);
        let g = set
            .iter()
            .map(|v| v.dot(&u).abs())
            .fold(0.0, |acc, s| if acc == 0.0 { s } else { tolerance_gcd(acc, s, tol) });
        let residual = set
            .iter()
            .map(|v| cross(u, *v).abs())
            .fold(0.0, f64::max);
        return if g <= dense {
            estimate(GroupClosure::Line { u }, residual)
        } else {
            estimate(GroupClosure::Lattice1 { u, r: g }, residual)
        };
    }

    let mut residual = 0.0;
    for _ in 0..500 {
        set.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        let b1 = set[0];
        let b2 = *set
            .iter()
            .find(|v| cross(b1, **v).abs() / b1.norm() > tol)
            .expect("set spans the plane");
        let (b1, b2) = gauss_reduce(b1, b2);
        let det = cross(b1, b2);
        let mut next = vec![b1, b2];
        residual = 0.0f64;
        for v in &set {
            let c1 = (cross(*v, b2) / det).round();
            let c2 = (cross(b1, *v) / det).round();
            let rem = v - b1 * c1 - b2 * c2;
            if rem.norm() > tol {
                next.push(rem);
            } else {
                residual = residual.max(rem.norm());
            }
        }
        let done = next.len() == 2;
        set = next;
        if done {
            break;
        }
    }
    set.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let (b1, b2) = gauss_reduce(set[0], set[1]);
    let closure = if b2.norm() <= dense {
        GroupClosure::Plane
    } else if b1.norm() <= dense {
        GroupClosure::LineLattice {
            u: canonical(b1 / b1.norm()),
            r: cross(b1, b2).abs() / b1.norm(),
        }
    } else {
        GroupClosure::Lattice2 {
            u1: canonical(b1),
            u2: canonical(b2),
        }
    };
    estimate(closure, residual)
}

/// Closest point of `sorted` (ascending in z) to `p`; the chord length bounds
/// the z gap, so the scan stops once the gap exceeds the best chord.
fn nearest(sorted: &[Vec3], p: &Vec3) -> Vec3 {
    let start = sorted.partition_point(|v| v.z < p.z);
    let mut best = (f64::INFINITY, sorted[start.min(sorted.len() - 1)]);
    let mut visit = |v: &Vec3| {
        let d = (v - p).norm_squared();
        if d < best.0 {
            best = (d, *v);
        }
        (v.z - p.z).powi(2) <= best.0
    };
    for v in &sorted[start..] {
        if !visit(v) {
            break;
        }
    }
    for v in sorted[..start].iter().rev() {
        if !visit(v) {
            break;
        }
    }
    best.1
}

/// Symmetric Hausdorff distance, in radians, between `ψ_c(sample)` and
/// `Q(sample)` for an orthogonal `Q`.
pub fn strip_transport_check(sample: &DirectionSample, c: f64, q: &Isometry3) -> Result<f64> {
    q.check()?;
    if q.translation_part() != Vec3::zeros() {
        return Err(Error::InvalidArgument(
            "transport check needs a purely orthogonal map".into(),
        ));
    }
    let a: Vec<Vec3> = sample
        .directions
        .iter()
        .map(|v| psi(c, *v).map(|d| d.vector()))
        .collect::<Result<_>>()?;
    let b: Vec<Vec3> = sample
        .directions
        .iter()
        .map(|v| q.apply_linear(v.vector()))
        .collect();
    let directed = |from: &[Vec3], to: &[Vec3]| -> f64 {
        let mut sorted = to.to_vec();
        sorted.sort_by(|x, y| x.z.total_cmp(&y.z));
        from.par_iter()
            .map(|p| {
                let q = nearest(&sorted, p);
                p.cross(&q).norm().atan2(p.dot(&q))
            })
            .reduce(|| 0.0, f64::max)
    };
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(directed(&a, &b).max(directed(&b, &a)))
}
