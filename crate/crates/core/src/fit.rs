//! Least-squares fits of the rigid families, each up to a rotation about the
//! z-axis.
//!
//! A fit with rotation `theta` describes `f(p) = member(R(−theta)·p)`, so the
//! fitted function is `member.with_rotation(theta)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::golden_min;
use crate::error::{Error, Result};
use crate::function::{CurveSpec, FamilyTag, FunctionSpec, Window};
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

/// Sampled `s(y)` of a strip fit, in the rotated frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub y: Vec<f64>,
    pub s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FamilyFit {
    pub family: FamilyTag,
    pub theta: f64,
    pub params: FitParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<CurveTable>,
    pub rms: f64,
    /// `max − min` of the sampled values.
    pub range: f64,
    pub window: Window,
}

impl FamilyFit {
    pub fn k(&self) -> f64 {
        self.params.k.unwrap_or(0.0)
    }

    /// The fitted member as a function.
    pub fn to_spec(&self) -> Result<FunctionSpec> {
        let p = &self.params;
        let spec = match self.family {
            FamilyTag::Affine => {
                FunctionSpec::affine(p.a, p.b.unwrap_or(0.0), p.d.unwrap_or(0.0))
            }
            FamilyTag::ExpAffine => FunctionSpec::exp_affine(
                p.a,
                p.b.unwrap_or(0.0),
                p.d.unwrap_or(0.0),
                self.k(),
            )?,
            FamilyTag::ExpStrip => {
                let table = self
                    .s
                    .as_ref()
                    .ok_or_else(|| Error::InvalidSpec("strip fit without s table".into()))?;
                FunctionSpec::exp_strip(
                    p.a,
                    self.k(),
                    CurveSpec::table(table.y.clone(), table.s.clone())?,
                )?
            }
        };
        Ok(spec.with_rotation(self.theta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Rotation candidates in `[0, π)`.
    pub thetas: usize,
    /// Log-spaced rate candidates per sign.
    pub rates: usize,
    /// Rates scanned are `|k|·L ∈ [rate_min, rate_max]` for half-extent `L`.
    pub rate_min: f64,
    pub rate_max: f64,
    pub refine_theta: bool,
    /// Acceptance threshold relative to the dynamic range.
    pub accept: f64,
    /// Relative rms margin within which a simpler family wins.
    pub tie: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            thetas: 180,
            rates: 48,
            rate_min: 0.05,
            rate_max: 30.0,
            refine_theta: true,
            accept: 1e-6,
            tie: 0.1,
        }
    }
}

fn value_range(z: &[f64]) -> f64 {
    let (lo, hi) = z
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

fn rms_of(residuals: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for r in residuals {
        s += r * r;
        n += 1;
    }
    (s / n.max(1) as f64).sqrt()
}

/// Least-squares plane through the graph sampled on the window lattice.
pub fn fit_affine(spec: &FunctionSpec, window: &Window) -> Result<FamilyFit> {
    let pts: Vec<Vec2> = window.nodes().collect();
    let z: Vec<f64> = pts.iter().map(|p| spec.eval_at(*p)).collect::<Result<_>>()?;
    let c = window.center();
    let mut g = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (p, &v) in pts.iter().zip(&z) {
        let row = Vector3::new(1.0, p.x - c.x, p.y - c.y);
        g += row * row.transpose();
        rhs += row * v;
    }
    let sol = g
        .cholesky()
        .ok_or_else(|| Error::FitFailed("singular plane system".into()))?
        .solve(&rhs);
    let (b, d) = (sol[1], sol[2]);
    let a = sol[0] - b * c.x - d * c.y;
    let rms = rms_of(pts.iter().zip(&z).map(|(p, v)| v - (a + b * p.x + d * p.y)));
    Ok(FamilyFit {
        family: FamilyTag::Affine,
        theta: 0.0,
        params: FitParams {
            a,
            b: Some(b),
            d: Some(d),
            k: None,
        },
        s: None,
        rms,
        range: value_range(&z),
        window: *window,
    })
}

/// Samples of `f` on a lattice aligned with the frame rotated by `theta`.
struct Lattice {
    us: Vec<f64>,
    vs: Vec<f64>,
    /// `z[j * us.len() + i]` at `(us[i], vs[j])`.
    z: Vec<f64>,
    half_u: f64,
}

impl Lattice {
    fn new(spec: &FunctionSpec, window: &Window, theta: f64) -> Result<Self> {
        let (s, c) = theta.sin_cos();
        let (w, h) = (window.width(), window.height());
        let (ac, as_) = (c.abs(), s.abs());
        // Largest centred rectangle of the window's aspect that fits after rotation.
        let lambda = (w / (ac * w + as_ * h)).min(h / (as_ * w + ac * h));
        let (hu, hv) = (0.5 * lambda * w, 0.5 * lambda * h);
        let ctr = window.center();
        let q0 = Vec2::new(c * ctr.x + s * ctr.y, -s * ctr.x + c * ctr.y);
        let axis = |n: usize, mid: f64, half: f64| -> Vec<f64> {
            (0..n)
                .map(|i| mid + half * (2.0 * i as f64 / (n - 1) as f64 - 1.0))
                .collect()
        };
        let us = axis(window.nx, q0.x, hu);
        let vs = axis(window.ny, q0.y, hv);
        let mut z = Vec::with_capacity(us.len() * vs.len());
        for &v in &vs {
            for &u in &us {
                let p = Vec2::new(
                    (c * u - s * v).clamp(window.xmin, window.xmax),
                    (s * u + c * v).clamp(window.ymin, window.ymax),
                );
                z.push(spec.eval_at(p)?);
            }
        }
        Ok(Lattice {
            us,
            vs,
            z,
            half_u: hu,
        })
    }

    fn rates(&self, opts: &FitOptions) -> Vec<f64> {
        let lo = (opts.rate_min / self.half_u).ln();
        let hi = (opts.rate_max / self.half_u).ln();
        let n = opts.rates.max(2);
        let pos: Vec<f64> = (0..n)
            .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
            .collect();
        pos.iter().rev().map(|k| -k).chain(pos.iter().copied()).collect()
    }
}

/// `a + b·e^{ku} + d·v` at fixed `k`: linear parameters and rms.
fn exp_affine_at(lat: &Lattice, k: f64) -> Option<([f64; 3], f64)> {
    let (nu, nv) = (lat.us.len() as f64, lat.vs.len() as f64);
    let e: Vec<f64> = lat.us.iter().map(|u| (k * u).exp()).collect();
    if e.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let vbar = lat.vs.iter().sum::<f64>() / nv;
    let se: f64 = e.iter().sum();
    let see: f64 = e.iter().map(|v| v * v).sum();
    let svv: f64 = lat.vs.iter().map(|v| (v - vbar).powi(2)).sum();
    let mut rhs = Vector3::zeros();
    for (j, v) in lat.vs.iter().enumerate() {
        let row = &lat.z[j * e.len()..(j + 1) * e.len()];
        for (zi, ei) in row.iter().zip(&e) {
            rhs += Vector3::new(*zi, zi * ei, zi * (v - vbar));
        }
    }
    // Centred v is orthogonal to the other two columns on a lattice.
    let g = Matrix3::new(nu * nv, nv * se, 0.0, nv * se, nv * see, 0.0, 0.0, 0.0, nu * svv);
    let dscale = Vector3::new(g[(0, 0)].sqrt(), g[(1, 1)].sqrt(), g[(2, 2)].sqrt().max(1e-300));
    let geq = Matrix3::from_fn(|r, c| g[(r, c)] / (dscale[r] * dscale[c]));
    let y = geq.lu().solve(&rhs.component_div(&dscale))?;
    let sol = y.component_div(&dscale);
    let (a0, b, d) = (sol[0], sol[1], sol[2]);
    if !(a0.is_finite() && b.is_finite() && d.is_finite()) {
        return None;
    }
    let mut res = Vec::with_capacity(lat.z.len());
    for (j, v) in lat.vs.iter().enumerate() {
        for (i, ei) in e.iter().enumerate() {
            res.push(lat.z[j * e.len() + i] - (a0 + b * ei + d * (v - vbar)));
        }
    }
    Some(([a0 - d * vbar, b, d], rms_of(res.into_iter())))
}

/// Accurate linear solve for `a + b·e^{ku} + d·v` by QR on the full design.
fn exp_affine_polish(lat: &Lattice, k: f64) -> Option<([f64; 3], f64)> {
    let n = lat.z.len();
    let nu = lat.us.len();
    let vbar = lat.vs.iter().sum::<f64>() / lat.vs.len() as f64;
    let e: Vec<f64> = lat.us.iter().map(|u| (k * u).exp()).collect();
    let mut m = DMatrix::zeros(n, 3);
    for idx in 0..n {
        let (i, j) = (idx % nu, idx / nu);
        m[(idx, 0)] = 1.0;
        m[(idx, 1)] = e[i];
        m[(idx, 2)] = lat.vs[j] - vbar;
    }
    let norms: Vec<f64> = (0..3).map(|c| m.column(c).norm().max(1e-300)).collect();
    for (c, nrm) in norms.iter().enumerate() {
        m.column_mut(c).scale_mut(1.0 / nrm);
    }
    let rhs = DVector::from_column_slice(&lat.z);
    let qr = m.clone().qr();
    let qtb = qr.q().transpose() * &rhs;
    let y = qr.r().solve_upper_triangular(&qtb)?;
    let sol: Vec<f64> = (0..3).map(|c| y[c] / norms[c]).collect();
    let res = &rhs - &m * &y;
    let rms = (res.norm_squared() / n as f64).sqrt();
    Some(([sol[0] - sol[2] * vbar, sol[1], sol[2]], rms))
}

/// `a + s_j·e^{k u_i}` at fixed `k` with free per-column `s_j`:
/// offset, column amplitudes and rms.
fn exp_strip_at(lat: &Lattice, k: f64) -> Option<(f64, Vec<f64>, f64)> {
    let nu = lat.us.len();
    let e: Vec<f64> = lat.us.iter().map(|u| (k * u).exp()).collect();
    if e.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let se: f64 = e.iter().sum();
    let see: f64 = e.iter().map(|v| v * v).sum();
    let proj: Vec<f64> = lat
        .z
        .chunks(nu)
        .map(|row| row.iter().zip(&e).map(|(z, e)| z * e).sum::<f64>())
        .collect();
    // With s eliminated column by column, the offset solves a scalar problem.
    let w: Vec<f64> = e.iter().map(|ei| 1.0 - ei * se / see).collect();
    let ww: f64 = w.iter().map(|v| v * v).sum();
    let a = if ww > 1e-12 * nu as f64 {
        let mut num = 0.0;
        for (row, pj) in lat.z.chunks(nu).zip(&proj) {
            for i in 0..nu {
                num += (row[i] - e[i] * pj / see) * w[i];
            }
        }
        num / (ww * lat.vs.len() as f64)
    } else {
        0.0
    };
    let s: Vec<f64> = proj.iter().map(|pj| (pj - a * se) / see).collect();
    let mut res = Vec::with_capacity(lat.z.len());
    for (row, sj) in lat.z.chunks(nu).zip(&s) {
        for i in 0..nu {
            res.push(row[i] - a - sj * e[i]);
        }
    }
    let rms = rms_of(res.into_iter());
    (a.is_finite() && rms.is_finite()).then_some((a, s, rms))
}

/// Best rate for a lattice by scan plus golden-section refinement.
fn best_rate(lat: &Lattice, opts: &FitOptions, rms_at: impl Fn(f64) -> Option<f64>) -> Option<(f64, f64)> {
    let ks = lat.rates(opts);
    let scores: Vec<f64> = ks.iter().map(|&k| rms_at(k).unwrap_or(f64::INFINITY)).collect();
    let (i, &best) = scores
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    if !best.is_finite() {
        return None;
    }
    let k = ks[i];
    let ratio = (ks[ks.len() - 1] / ks[ks.len() - 2]).abs();
    let (lo, hi) = (k.abs() / ratio, k.abs() * ratio);
    let sign = k.signum();
    let (m, score) = golden_min(lo.ln(), hi.ln(), 60, |t| {
        Ok::<f64, ()>(rms_at(sign * t.exp()).unwrap_or(f64::INFINITY))
    })
    .ok()?;
    if score <= best {
        Some((sign * m.exp(), score))
    } else {
        Some((k, best))
    }
}

struct Candidate {
    theta: f64,
    k: f64,
    rms: f64,
}

/// Scans rotations, picks the smallest-rms one (smallest angle on ties) and
/// optionally refines it.
fn scan_rotations(
    spec: &FunctionSpec,
    window: &Window,
    opts: &FitOptions,
    rms_at: &(dyn Fn(&Lattice, f64) -> Option<f64> + Sync),
) -> Result<Candidate> {
    let n = opts.thetas.max(1);
    let step = PI / n as f64;
    let evaluate = |theta: f64| -> Result<Option<Candidate>> {
        let lat = Lattice::new(spec, window, theta)?;
        Ok(best_rate(&lat, opts, |k| rms_at(&lat, k)).map(|(k, rms)| Candidate { theta, k, rms }))
    };
    let cands: Vec<Option<Candidate>> = (0..n)
        .into_par_iter()
        .map(|i| evaluate(i as f64 * step))
        .collect::<Result<_>>()?;
    let cands: Vec<Candidate> = cands.into_iter().flatten().collect();
    let min = cands
        .iter()
        .map(|c| c.rms)
        .min_by(|a, b| a.total_cmp(b))
        .ok_or_else(|| Error::FitFailed("no rotation gave finite parameters".into()))?;
    let lat0 = Lattice::new(spec, window, 0.0)?;
    let floor = 1e-11 * value_range(&lat0.z);
    let best = cands
        .into_iter()
        .find(|c| c.rms <= min + floor)
        .expect("minimum is attained");
    if !opts.refine_theta || best.rms <= floor || n == 1 {
        return Ok(best);
    }
    let mut failure = None;
    let (t, _) = golden_min(best.theta - step, best.theta + step, 60, |t| {
        Ok::<f64, ()>(match evaluate(t) {
            Ok(Some(c)) => c.rms,
            Ok(None) => f64::INFINITY,
            Err(e) => {
                failure = Some(e);
                f64::INFINITY
            }
        })
    })
    .expect("objective is infallible");
    if let Some(e) = failure {
        return Err(e);
    }
    match evaluate(t)? {
        Some(c) if c.rms < best.rms => Ok(c),
        _ => Ok(best),
    }
}

/// Fits `a + b·e^{kx} + d·y` after an unknown rotation about the z-axis.
pub fn fit_exp_affine(spec: &FunctionSpec, window: &Window, opts: &FitOptions) -> Result<FamilyFit> {
    let best = scan_rotations(spec, window, opts, &|lat, k| exp_affine_at(lat, k).map(|r| r.1))?;
    let lat = Lattice::new(spec, window, best.theta)?;
    let ([a, b, d], rms) = exp_affine_polish(&lat, best.k)
        .or_else(|| exp_affine_at(&lat, best.k))
        .ok_or_else(|| Error::FitFailed("singular exponential system".into()))?;
    Ok(FamilyFit {
        family: FamilyTag::ExpAffine,
        theta: best.theta,
        params: FitParams {
            a,
            b: Some(b),
            d: Some(d),
            k: Some(best.k),
        },
        s: None,
        rms,
        range: value_range(&lat.z),
        window: *window,
    })
}

/// Fits `a + s(y)·e^{kx}` after an unknown rotation about the z-axis; `s` is
/// returned as a table over the rotated lattice.
pub fn fit_exp_strip(spec: &FunctionSpec, window: &Window, opts: &FitOptions) -> Result<FamilyFit> {
    let best = scan_rotations(spec, window, opts, &|lat, k| exp_strip_at(lat, k).map(|r| r.2))?;
    let lat = Lattice::new(spec, window, best.theta)?;
    let (a, s, rms) = exp_strip_at(&lat, best.k)
        .ok_or_else(|| Error::FitFailed("singular strip system".into()))?;
    Ok(FamilyFit {
        family: FamilyTag::ExpStrip,
        theta: best.theta,
        params: FitParams {
            a,
            b: None,
            d: None,
            k: Some(best.k),
        },
        s: Some(CurveTable { y: lat.vs.clone(), s }),
        rms,
        range: value_range(&lat.z),
        window: *window,
    })
}

/// All three fits, best first.
pub fn fit_all(spec: &FunctionSpec, window: &Window, opts: &FitOptions) -> Result<Vec<FamilyFit>> {
    let mut fits = vec![fit_affine(spec, window)?];
    for fit in [fit_exp_affine(spec, window, opts), fit_exp_strip(spec, window, opts)] {
        match fit {
            Ok(f) => fits.push(f),
            Err(Error::FitFailed(_)) => {}
            Err(e) => return Err(e),
        }
    }
    fits.sort_by(|a, b| a.rms.total_cmp(&b.rms));
    Ok(fits)
}

/// Chooses among fits: the lowest rms wins unless a simpler family is within
/// the tie margin; nothing is returned above the acceptance threshold.
pub fn select_family(fits: &[FamilyFit], opts: &FitOptions) -> Option<FamilyFit> {
    let accepted: Vec<&FamilyFit> = fits
        .iter()
        .filter(|f| f.rms <= opts.accept * f.range)
        .collect();
    let min = accepted.iter().map(|f| f.rms).min_by(|a, b| a.total_cmp(b))?;
    let floor = 1e-12 * accepted.iter().map(|f| f.range).fold(0.0, f64::max);
    accepted
        .into_iter()
        .filter(|f| f.rms <= (1.0 + opts.tie) * min + floor)
        .min_by(|a, b| {
            a.family
                .complexity()
                .cmp(&b.family.complexity())
                .then(a.rms.total_cmp(&b.rms))
        })
        .cloned()
}

/// Runs every fit and returns the accepted one, if any.
pub fn best_family(spec: &FunctionSpec, window: &Window, opts: &FitOptions) -> Result<Option<FamilyFit>> {
    Ok(select_family(&fit_all(spec, window, opts)?, opts))
}
