//! Sampling of the chord-direction set of a graph and estimation of its top
//! boundary per azimuth.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::{FunctionSpec, Window};
use crate::sphere::{direction_of_chord, height_slope_map, slope_height_map, SphereDirection};
use crate::{Vec2, Vec3};

/// Chord directions of a graph, antipodally closed: entry `2i + 1` is the
/// antipode of entry `2i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSample {
    pub directions: Vec<SphereDirection>,
    /// Chord endpoints `(p, q)` with `direction = (p − q)/|p − q|`.
    pub chords: Vec<(Vec3, Vec3)>,
    pub seed: u64,
    pub window: Window,
}

impl DirectionSample {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// Draws `npairs` point pairs from `window` and records both chord orders.
///
/// The first endpoint is stratified over a square grid of cells, the second is
/// uniform in the window.
pub fn sample_direction_set(
    spec: &FunctionSpec,
    window: &Window,
    npairs: usize,
    seed: u64,
) -> Result<DirectionSample> {
    if npairs == 0 {
        return Err(Error::InvalidArgument("npairs must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = (npairs as f64).sqrt().ceil() as usize;
    let (w, h) = (window.width(), window.height());
    let mut directions = Vec::with_capacity(2 * npairs);
    let mut chords = Vec::with_capacity(2 * npairs);
    for i in 0..npairs {
        let cell = i % (cells * cells);
        let (cx, cy) = ((cell % cells) as f64, (cell / cells) as f64);
        let (p, q) = loop {
            let p = Vec2::new(
                window.xmin + w * (cx + rng.random::<f64>()) / cells as f64,
                window.ymin + h * (cy + rng.random::<f64>()) / cells as f64,
            );
            let q = Vec2::new(
                window.xmin + w * rng.random::<f64>(),
                window.ymin + h * rng.random::<f64>(),
            );
            if p != q {
                break (p, q);
            }
        };
        let gp = spec.graph_point(p)?;
        let gq = spec.graph_point(q)?;
        let d = direction_of_chord(gp, gq)?;
        directions.push(d);
        directions.push(d.antipode());
        chords.push((gp, gq));
        chords.push((gq, gp));
    }
    Ok(DirectionSample {
        directions,
        chords,
        seed,
        window: *window,
    })
}

/// One azimuth bin of an [`H3Profile`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfileBin {
    pub theta: f64,
    /// Height of the top boundary, `1` when saturated.
    pub top: f64,
    pub bottom: f64,
    pub top_saturated: bool,
    pub bottom_saturated: bool,
    /// Largest sampled slope along `theta` on the outermost window.
    pub top_slope: f64,
    /// Smallest sampled slope along `theta` on the outermost window.
    pub bottom_slope: f64,
}

/// Top and bottom boundary heights of the direction set for `n` equispaced
/// azimuths `theta0 + 2πi/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct H3Profile {
    pub theta0: f64,
    pub bins: Vec<ProfileBin>,
    pub ladder: Vec<Window>,
    pub growth_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    pub nbins: usize,
    /// Base points per bin and window rung.
    pub segments: usize,
    pub seed: u64,
    /// Total growth of the extreme slope across the ladder that flags an
    /// unbounded slope.
    pub growth_factor: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            nbins: 360,
            segments: 256,
            seed: 0,
            growth_factor: 4.0,
        }
    }
}

fn is_saturated(first: f64, last: f64, growth: f64) -> bool {
    let rise = last - first;
    let scale = 1.0 + first.abs().max(last.abs());
    last > 0.0 && rise > (growth - 1.0) * first.abs() && rise > 1e-9 * scale
}

impl H3Profile {
    pub fn nbins(&self) -> usize {
        self.bins.len()
    }

    pub fn bin_width(&self) -> f64 {
        TAU / self.bins.len() as f64
    }

    pub fn antipodal_bin(&self, i: usize) -> usize {
        (i + self.bins.len() / 2) % self.bins.len()
    }

    /// Bin whose azimuth is closest to `theta`.
    pub fn bin_of(&self, theta: f64) -> usize {
        let n = self.bins.len();
        let u = (theta - self.theta0).rem_euclid(TAU) / self.bin_width();
        (u.round() as usize) % n
    }

    /// Builds a profile from top heights and saturation flags; bottoms are
    /// derived from the antipodal bins.
    pub fn from_tops(theta0: f64, tops: &[f64], saturated: &[bool]) -> Result<Self> {
        let n = tops.len();
        if n < 8 || n % 2 != 0 || saturated.len() != n {
            return Err(Error::InvalidProfile(
                "profile needs an even number (at least 8) of bins".into(),
            ));
        }
        let bins = (0..n)
            .map(|i| {
                let j = (i + n / 2) % n;
                let top = if saturated[i] { 1.0 } else { tops[i] };
                let anti = if saturated[j] { 1.0 } else { tops[j] };
                ProfileBin {
                    theta: theta0 + TAU * i as f64 / n as f64,
                    top,
                    bottom: -anti,
                    top_saturated: saturated[i],
                    bottom_saturated: saturated[j],
                    top_slope: height_slope_map(top),
                    bottom_slope: -height_slope_map(anti),
                }
            })
            .collect();
        let profile = H3Profile {
            theta0,
            bins,
            ladder: Vec::new(),
            growth_factor: 4.0,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Overwrites the top of bin `i` and the bottom of its antipode.
    pub fn set_top(&mut self, i: usize, top: f64, saturated: bool) {
        let j = self.antipodal_bin(i);
        let top = if saturated { 1.0 } else { top };
        self.bins[i].top = top;
        self.bins[i].top_saturated = saturated;
        self.bins[i].top_slope = height_slope_map(top);
        self.bins[j].bottom = -top;
        self.bins[j].bottom_saturated = saturated;
        self.bins[j].bottom_slope = -height_slope_map(top);
    }

    /// Checks the structural invariants of a boundary profile.
    pub fn validate(&self) -> Result<()> {
        let n = self.bins.len();
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidProfile(format!(
                "{n} bins; need an even count of at least 8"
            )));
        }
        for (i, b) in self.bins.iter().enumerate() {
            let a = &self.bins[self.antipodal_bin(i)];
            if !(b.top.is_finite() && b.bottom.is_finite()) {
                return Err(Error::InvalidProfile(format!("bin {i} has non-finite heights")));
            }
            if (b.bottom + a.top).abs() > 1e-9 || b.bottom_saturated != a.top_saturated {
                return Err(Error::InvalidProfile(format!(
                    "bin {i}: bottom {} is not the reflection of the antipodal top {}",
                    b.bottom, a.top
                )));
            }
            if b.top < b.bottom {
                return Err(Error::InvalidProfile(format!(
                    "bin {i}: top {} below bottom {}",
                    b.top, b.bottom
                )));
            }
            if b.top <= -1.0 || b.top > 1.0 {
                return Err(Error::InvalidProfile(format!("bin {i}: top {} out of range", b.top)));
            }
        }
        Ok(())
    }

    /// The profile rotated about the z-axis by `delta`.
    pub fn rotated(&self, delta: f64) -> H3Profile {
        let mut out = self.clone();
        out.theta0 += delta;
        for b in &mut out.bins {
            b.theta += delta;
        }
        out
    }

    /// The profile of `c·f` given the profile of `f`.
    pub fn scaled(&self, c: f64) -> H3Profile {
        let mut out = self.clone();
        for b in &mut out.bins {
            b.top_slope *= c;
            b.bottom_slope *= c;
            if !b.top_saturated {
                b.top = slope_height_map(b.top_slope);
            }
            if !b.bottom_saturated {
                b.bottom = slope_height_map(b.bottom_slope);
            }
        }
        out
    }
}

/// Direction of azimuth `theta` in the plane.
fn unit(theta: f64) -> Vec2 {
    let (s, c) = theta.sin_cos();
    Vec2::new(c, s)
}

/// Parameter interval `[lo, hi]` of the line `p + t·u` inside `w`.
fn clip_line(w: &Window, p: Vec2, u: Vec2) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (pc, uc, a, b) in [(p.x, u.x, w.xmin, w.xmax), (p.y, u.y, w.ymin, w.ymax)] {
        if uc.abs() < 1e-15 {
            continue;
        }
        let (t0, t1) = ((a - pc) / uc, (b - pc) / uc);
        lo = lo.max(t0.min(t1));
        hi = hi.min(t0.max(t1));
    }
    (lo, hi)
}

/// Extreme slopes along `u` over segments inside `w`.
fn extreme_slopes(
    spec: &FunctionSpec,
    w: &Window,
    u: Vec2,
    segments: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    let g = ((segments as f64).sqrt().ceil() as usize).max(1);
    let mut bases = Vec::with_capacity(g * g + 4 * g + 13);
    for iy in 0..g {
        for ix in 0..g {
            bases.push(Vec2::new(
                w.xmin + w.width() * (ix as f64 + rng.random::<f64>()) / g as f64,
                w.ymin + w.height() * (iy as f64 + rng.random::<f64>()) / g as f64,
            ));
        }
    }
    let c = w.center();
    for (x, y) in [
        (w.xmin, w.ymin),
        (w.xmax, w.ymin),
        (w.xmin, w.ymax),
        (w.xmax, w.ymax),
        (c.x, w.ymin),
        (c.x, w.ymax),
        (w.xmin, c.y),
        (w.xmax, c.y),
        (c.x, c.y),
    ] {
        bases.push(Vec2::new(x, y));
    }
    let ell = 1e-4 * w.diagonal();
    // Corners pulled inside so outward diagonals still have a segment there.
    for (x, y) in [
        (w.xmin + ell, w.ymin + ell),
        (w.xmax - ell, w.ymin + ell),
        (w.xmin + ell, w.ymax - ell),
        (w.xmax - ell, w.ymax - ell),
    ] {
        bases.push(Vec2::new(x, y));
    }
    for j in 0..g {
        let f = (j as f64 + 0.5) / g as f64;
        let (x, y) = (w.xmin + f * w.width(), w.ymin + f * w.height());
        bases.extend([
            Vec2::new(x, w.ymin),
            Vec2::new(x, w.ymax),
            Vec2::new(w.xmin, y),
            Vec2::new(w.xmax, y),
        ]);
    }
    let min_len = 1e-9 * w.diagonal();
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    let mut slope = |t0: f64, t1: f64, b: Vec2| -> Result<()> {
        if t1 - t0 <= min_len {
            return Ok(());
        }
        let (p, q) = (b + u * t0, b + u * t1);
        let m = (spec.eval_at(q)? - spec.eval_at(p)?) / (t1 - t0);
        max = max.max(m);
        min = min.min(m);
        Ok(())
    };
    for b in bases {
        let (lo, hi) = clip_line(w, b, u);
        if hi - lo <= min_len {
            continue;
        }
        if hi - lo <= ell {
            slope(lo, hi, b)?;
            continue;
        }
        let mid = 0.0f64.clamp(lo + 0.5 * ell, hi - 0.5 * ell);
        slope(mid - 0.5 * ell, mid + 0.5 * ell, b)?;
        slope(lo, hi, b)?;
        slope(lo, lo + ell, b)?;
        slope(hi - ell, hi, b)?;
    }
    if !(max.is_finite() && min.is_finite()) {
        return Err(Error::Eval("no finite slope sampled".into()));
    }
    Ok((max, min))
}

/// Estimates the top and bottom boundary of the direction set per azimuth.
///
/// Each bin pairs with its antipode: the same segments give the largest slope
/// along `θ` and, negated, the largest slope along `θ + π`.
pub fn estimate_h3_profile(
    spec: &FunctionSpec,
    ladder: &[Window],
    opts: &ProfileOptions,
) -> Result<H3Profile> {
    let n = opts.nbins;
    if n < 8 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "bin count must be even and at least 8, got {n}"
        )));
    }
    if ladder.is_empty() {
        return Err(Error::InvalidArgument("window ladder is empty".into()));
    }
    let half = n / 2;
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..half)
        .into_par_iter()
        .map(|i| {
            let u = unit(TAU * i as f64 / n as f64);
            let mut maxes = Vec::with_capacity(ladder.len());
            let mut mins = Vec::with_capacity(ladder.len());
            for (r, w) in ladder.iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(((i as u64) << 16) | r as u64);
                let (mx, mn) = extreme_slopes(spec, w, u, opts.segments, &mut rng)?;
                maxes.push(mx);
                mins.push(mn);
            }
            Ok((maxes, mins))
        })
        .collect::<Result<_>>()?;

    let mut slopes = vec![0.0; n];
    let mut saturated = vec![false; n];
    for (i, (maxes, mins)) in rows.iter().enumerate() {
        let (last_max, last_min) = (maxes[maxes.len() - 1], mins[mins.len() - 1]);
        slopes[i] = last_max;
        slopes[i + half] = -last_min;
        saturated[i] = is_saturated(maxes[0], last_max, opts.growth_factor);
        saturated[i + half] = is_saturated(-mins[0], -last_min, opts.growth_factor);
    }
    let bins = (0..n)
        .map(|i| {
            let j = (i + half) % n;
            ProfileBin {
                theta: TAU * i as f64 / n as f64,
                top: if saturated[i] { 1.0 } else { slope_height_map(slopes[i]) },
                bottom: if saturated[j] { -1.0 } else { -slope_height_map(slopes[j]) },
                top_saturated: saturated[i],
                bottom_saturated: saturated[j],
                top_slope: slopes[i],
                bottom_slope: -slopes[j],
            }
        })
        .collect();
    Ok(H3Profile {
        theta0: 0.0,
        bins,
        ladder: ladder.to_vec(),
        growth_factor: opts.growth_factor,
    })
}

/// Chord directions between antipodal points of the circle of radius `r`.
pub fn jordan_curve(spec: &FunctionSpec, r: f64, nsamples: usize) -> Result<Vec<SphereDirection>> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    (0..nsamples)
        .map(|j| {
            let x = unit(TAU * j as f64 / nsamples as f64) * r;
            direction_of_chord(spec.graph_point(x)?, spec.graph_point(-x)?)
        })
        .collect()
}

/// Tolerances for [`audit_strip_properties`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditTolerances {
    pub pole: f64,
    pub lsc: f64,
    pub convexity: f64,
    /// Angular tolerance when matching antipodes.
    pub symmetry: f64,
}

impl Default for AuditTolerances {
    fn default() -> Self {
        AuditTolerances {
            pole: 1e-6,
            lsc: 0.05,
            convexity: 0.02,
            symmetry: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &str, violations: Vec<Violation>) -> PropertyCheck {
    PropertyCheck {
        name: name.to_string(),
        passed: violations.is_empty(),
        violations,
    }
}

const MAX_LISTED: usize = 64;

fn push(v: &mut Vec<Violation>, index: usize, detail: String) {
    if v.len() < MAX_LISTED {
        v.push(Violation { index, detail });
    }
}

/// Audits a sample and profile for the structural properties every direction
/// set has: antipodal symmetry, no vertical directions, a nonempty arc per
/// azimuth, no isolated upward spikes and great-circle convexity of the top.
pub fn audit_strip_properties(
    sample: &DirectionSample,
    profile: &H3Profile,
    tol: &AuditTolerances,
) -> PropertyReport {
    let mut checks = Vec::new();

    let mut sym = Vec::new();
    let dirs = &sample.directions;
    let mut unmatched: Vec<usize> = Vec::new();
    for i in (0..dirs.len()).step_by(2) {
        let paired = i + 1 < dirs.len() && dirs[i].antipode().angle_to(&dirs[i + 1]) <= tol.symmetry;
        if !paired {
            unmatched.push(i);
            if i + 1 < dirs.len() {
                unmatched.push(i + 1);
            }
        }
    }
    for &i in &unmatched {
        let a = dirs[i].antipode();
        if !dirs.iter().any(|d| d.angle_to(&a) <= tol.symmetry) {
            push(&mut sym, i, format!("antipode of direction {i} missing"));
        }
    }
    checks.push(check("symmetry", sym));

    let mut pole = Vec::new();
    for (i, d) in dirs.iter().enumerate() {
        if d.z().abs() >= 1.0 - tol.pole {
            push(&mut pole, i, format!("|z| = {} too close to a pole", d.z().abs()));
        }
    }
    checks.push(check("poleExclusion", pole));

    let bins = &profile.bins;
    let n = bins.len();
    let mut nonempty = Vec::new();
    for (i, b) in bins.iter().enumerate() {
        if !(b.top.is_finite() && b.bottom.is_finite() && b.top >= b.bottom) {
            push(&mut nonempty, i, format!("empty arc: top {} bottom {}", b.top, b.bottom));
        }
    }
    checks.push(check("nonempty", nonempty));

    let mut lsc = Vec::new();
    for i in 0..n {
        let b = &bins[i];
        if b.top_saturated {
            continue;
        }
        let left = bins[(i + n - 1) % n].top;
        let right = bins[(i + 1) % n].top;
        if b.top > left.max(right) + tol.lsc {
            push(
                &mut lsc,
                i,
                format!("top {} exceeds both neighbours ({left}, {right})", b.top),
            );
        }
    }
    checks.push(check("lowerSemicontinuity", lsc));

    checks.push(check("convexity", convexity_violations(profile, tol.convexity)));
    PropertyReport { checks }
}

fn convexity_violations(profile: &H3Profile, tol: f64) -> Vec<Violation> {
    let bins = &profile.bins;
    let n = bins.len();
    let half = n / 2;
    // For each intermediate bin, the worst excess over all spanning chords.
    let excess: Vec<Option<(f64, usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|k| {
            if bins[k].top_saturated {
                return None;
            }
            let uk = unit(bins[k].theta);
            let zk = bins[k].top;
            let mut worst: Option<(f64, usize, usize)> = None;
            for back in 1..half {
                let i = (k + n - back) % n;
                if bins[i].top_saturated {
                    continue;
                }
                for fwd in 1..(half - back) {
                    let j = (k + fwd) % n;
                    if bins[j].top_saturated {
                        continue;
                    }
                    let (ui, uj) = (unit(bins[i].theta), unit(bins[j].theta));
                    let det = ui.x * uj.y - ui.y * uj.x;
                    if det.abs() < 1e-12 {
                        continue;
                    }
                    let (mi, mj) = (bins[i].top_slope, bins[j].top_slope);
                    let g = Vec2::new((mi * uj.y - mj * ui.y) / det, (ui.x * mj - uj.x * mi) / det);
                    let bound = slope_height_map(g.dot(&uk));
                    let e = zk - bound;
                    if e > tol && worst.is_none_or(|w| e > w.0) {
                        worst = Some((e, i, j));
                    }
                }
            }
            worst
        })
        .collect();
    let mut out = Vec::new();
    for (k, e) in excess.iter().enumerate() {
        if let Some((e, i, j)) = e {
            push(
                &mut out,
                k,
                format!("top exceeds the great circle through bins {i} and {j} by {e:.4}"),
            );
        }
    }
    out
}

/// Azimuth of bin `i` for `n` bins starting at `theta0`, reduced to `[0, 2π)`.
pub fn bin_azimuth(theta0: f64, i: usize, n: usize) -> f64 {
    (theta0 + TAU * i as f64 / n as f64).rem_euclid(TAU)
}

/// Smallest absolute angular difference between two azimuths.
pub fn azimuth_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Reduces an angle to `[0, π)`.
pub fn reduce_half_turn(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    if t >= PI {
        0.0
    } else {
        t
    }
}
