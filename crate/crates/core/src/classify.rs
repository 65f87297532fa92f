//! Shape classification of the direction set of a rigid function.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::direction::{reduce_half_turn, H3Profile};
use crate::error::Result;
use crate::function::{FunctionSpec, Window};
use crate::Vec2;

/// The possible shapes of the direction set of a rigid function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", content = "params")]
pub enum RigidityCase {
    /// A vertical great circle meets the set in two points: along `azimuth`
    /// the function has constant slope `slope`.
    A { azimuth: f64, slope: f64 },
    /// Sphere minus the poles.
    B,
    /// Sphere minus two quarter great circles; the top vanishes only at `azimuth`.
    C { azimuth: f64 },
    /// Sphere minus two spherical triangles; the top vanishes on `[start, end]`.
    D { start: f64, end: f64 },
    #[serde(rename = "indeterminate")]
    Indeterminate { reason: String },
}

impl RigidityCase {
    pub fn label(&self) -> &'static str {
        match self {
            RigidityCase::A { .. } => "A",
            RigidityCase::B => "B",
            RigidityCase::C { .. } => "C",
            RigidityCase::D { .. } => "D",
            RigidityCase::Indeterminate { .. } => "indeterminate",
        }
    }

    pub fn same_variant(&self, other: &RigidityCase) -> bool {
        self.label() == other.label()
    }
}

/// An azimuth along which the function has constant slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineDirection {
    pub azimuth: f64,
    pub slope: f64,
}

impl AffineDirection {
    /// Same line, reported with a non-negative slope and azimuth in `[0, 2π)`.
    fn canonical(self) -> Self {
        let (azimuth, slope) = if self.slope < 0.0 {
            (self.azimuth + PI, -self.slope)
        } else {
            (self.azimuth, self.slope)
        };
        AffineDirection {
            azimuth: azimuth.rem_euclid(TAU),
            slope,
        }
    }
}

/// Probe segments used to test slope constancy.
struct Probes {
    bases: Vec<Vec2>,
    half_len: f64,
}

impl Probes {
    fn new(window: &Window, n: usize) -> Self {
        let half_len = 0.25 * window.width().min(window.height());
        let inner = Window {
            xmin: window.xmin + half_len,
            xmax: window.xmax - half_len,
            ymin: window.ymin + half_len,
            ymax: window.ymax - half_len,
            ..*window
        };
        // Halton points in the shrunken window keep every segment inside.
        let halton = |mut i: usize, b: usize| {
            let (mut f, mut r) = (1.0, 0.0);
            while i > 0 {
                f /= b as f64;
                r += f * (i % b) as f64;
                i /= b;
            }
            r
        };
        let bases = (1..=n.max(2))
            .map(|i| {
                Vec2::new(
                    inner.xmin + inner.width() * halton(i, 2),
                    inner.ymin + inner.height() * halton(i, 3),
                )
            })
            .collect();
        Probes { bases, half_len }
    }

    /// Mean slope and maximal deviation from it along `theta`.
    fn spread(&self, spec: &FunctionSpec, theta: f64) -> Result<(f64, f64)> {
        let u = Vec2::new(theta.cos(), theta.sin()) * self.half_len;
        let mut slopes = Vec::with_capacity(self.bases.len());
        for b in &self.bases {
            let m = (spec.eval_at(b + u)? - spec.eval_at(b - u)?) / (2.0 * self.half_len);
            slopes.push(m);
        }
        let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
        let dev = slopes.iter().fold(0.0f64, |acc, m| acc.max((m - mean).abs()));
        Ok((mean, dev))
    }
}

/// Golden-section minimization of `f` on `[a, b]`.
pub(crate) fn golden_min<E>(
    mut a: f64,
    mut b: f64,
    iters: usize,
    mut f: impl FnMut(f64) -> std::result::Result<f64, E>,
) -> std::result::Result<(f64, f64), E> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..iters {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// Finds an azimuth along which every probed slope is within `tol` of a
/// common value.
///
/// Scans `nbins` azimuths over a half turn for the smallest slope spread and
/// refines the best one by golden section. A plane has constant slope in every
/// direction; it is reported along its gradient.
pub fn detect_affine_direction(
    spec: &FunctionSpec,
    window: &Window,
    nbins: usize,
    nprobes: usize,
    tol: f64,
) -> Result<Option<AffineDirection>> {
    let probes = Probes::new(window, nprobes);
    let (mx, dx) = probes.spread(spec, 0.0)?;
    let (my, dy) = probes.spread(spec, 0.5 * PI)?;
    if dx <= tol && dy <= tol {
        let g = Vec2::new(mx, my);
        let azimuth = if g.norm() == 0.0 { 0.0 } else { my.atan2(mx) };
        return Ok(Some(
            AffineDirection {
                azimuth,
                slope: g.norm(),
            }
            .canonical(),
        ));
    }
    let n = nbins.max(4);
    let step = PI / n as f64;
    let mut best = (0.0, f64::INFINITY);
    for i in 0..n {
        let theta = i as f64 * step;
        let (_, d) = probes.spread(spec, theta)?;
        if d < best.1 {
            best = (theta, d);
        }
    }
    let (mut theta, mut dev) = best;
    if dev > 0.0 {
        let (t, d) = golden_min(best.0 - step, best.0 + step, 80, |t| {
            probes.spread(spec, t).map(|s| s.1)
        })?;
        if d < dev {
            theta = t;
            dev = d;
        }
    }
    if dev > tol {
        return Ok(None);
    }
    let (slope, _) = probes.spread(spec, theta)?;
    Ok(Some(AffineDirection { azimuth: theta, slope }.canonical()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyTolerances {
    /// Tops with `|top|` at most this are treated as zero.
    pub zero: f64,
    /// Gaps of up to this many bins inside a zero arc are bridged.
    pub gap: usize,
}

impl Default for ClassifyTolerances {
    fn default() -> Self {
        ClassifyTolerances { zero: 0.02, gap: 1 }
    }
}

/// A maximal run of zero bins, `[first, last]` in circular bin order.
#[derive(Debug, Clone, Copy)]
struct Arc {
    first: usize,
    last: usize,
    len: usize,
}

fn zero_arcs(zero: &[bool], gap: usize) -> Vec<Arc> {
    let n = zero.len();
    let Some(start) = (0..n).find(|&i| !zero[i]) else {
        return vec![Arc {
            first: 0,
            last: n - 1,
            len: n,
        }];
    };
    // Runs as offsets from `start`, which is never inside a run.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for k in 1..n {
        if !zero[(start + k) % n] {
            continue;
        }
        match runs.last_mut() {
            Some((_, last)) if k - *last - 1 <= gap => *last = k,
            _ => runs.push((k, k)),
        }
    }
    if runs.len() > 1 {
        let first = runs[0].0;
        let last = runs[runs.len() - 1].1;
        if first + n - last - 1 <= gap {
            let (f, _) = runs.pop().expect("at least two runs");
            runs[0] = (f, runs[0].1 + n);
        }
    }
    runs.into_iter()
        .map(|(f, l)| Arc {
            first: (start + f) % n,
            last: (start + l) % n,
            len: l - f + 1,
        })
        .collect()
}

/// Maps a boundary profile (and an optional constant-slope azimuth) to the
/// shape taxonomy of rigid direction sets.
pub fn classify_case(
    profile: &H3Profile,
    affine: Option<AffineDirection>,
    tol: &ClassifyTolerances,
) -> Result<RigidityCase> {
    profile.validate()?;
    if let Some(a) = affine {
        return Ok(RigidityCase::A {
            azimuth: a.azimuth,
            slope: a.slope,
        });
    }
    let bins = &profile.bins;
    let n = bins.len();
    let width = profile.bin_width();
    let zero: Vec<bool> = bins
        .iter()
        .map(|b| !b.top_saturated && b.top.abs() <= tol.zero)
        .collect();
    let indeterminate = |reason: String| Ok(RigidityCase::Indeterminate { reason });

    if !zero.iter().any(|&z| z) {
        return if bins.iter().all(|b| b.top_saturated && b.bottom_saturated) {
            Ok(RigidityCase::B)
        } else {
            let k = bins.iter().filter(|b| !b.top_saturated).count();
            indeterminate(format!(
                "top never vanishes but {k} of {n} azimuths show bounded slope"
            ))
        };
    }

    let arcs = zero_arcs(&zero, tol.gap);
    // Off-arc bins must be saturated, except transition bins next to an arc.
    let saturated_outside = |arcs: &[Arc]| {
        let mut covered = vec![false; n];
        for a in arcs {
            for s in 0..a.len + 2 * tol.gap {
                covered[(a.first + n - tol.gap + s) % n] = true;
            }
        }
        (0..n).all(|i| covered[i] || bins[i].top_saturated)
    };

    if arcs.len() == 1 {
        let a = arcs[0];
        let span = (a.len - 1) as f64 * width;
        let start = bins[a.first].theta;
        if a.len == n || span >= PI {
            let mid = start + 0.5 * span;
            return Ok(RigidityCase::A {
                azimuth: reduce_half_turn(mid - 0.5 * PI),
                slope: 0.0,
            });
        }
        if !saturated_outside(&arcs) {
            return indeterminate(format!(
                "top vanishes on [{start:.4}, {:.4}] but is bounded elsewhere",
                start + span
            ));
        }
        if a.len == 1 {
            if !bins[profile.antipodal_bin(a.first)].top_saturated {
                return indeterminate("isolated zero without antipodal saturation".into());
            }
            return Ok(RigidityCase::C { azimuth: start });
        }
        let mut end = bins[a.last].theta;
        if end < start {
            end += TAU;
        }
        return Ok(RigidityCase::D { start, end });
    }

    if arcs.len() == 2 {
        let (a, b) = (arcs[0], arcs[1]);
        let centre = |x: Arc| bins[x.first].theta + 0.5 * (x.len - 1) as f64 * width;
        let d = (centre(b) - centre(a)).rem_euclid(TAU);
        if (d - PI).abs() <= (tol.gap as f64 + 0.5) * width && a.len.max(b.len) <= 1 + tol.gap {
            return Ok(RigidityCase::A {
                azimuth: reduce_half_turn(centre(a)),
                slope: 0.0,
            });
        }
    }
    indeterminate(format!("top vanishes on {} separate arcs", arcs.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::FunctionSpec;

    fn synthetic(n: usize, theta0: f64, zero_bins: &[usize]) -> H3Profile {
        let mut tops = vec![0.0; n];
        let mut sat = vec![true; n];
        for &i in zero_bins {
            sat[i] = false;
            tops[i] = 0.0;
        }
        H3Profile::from_tops(theta0, &tops, &sat).unwrap()
    }

    #[test]
    fn all_saturated_is_case_b() {
        let p = synthetic(36, 0.0, &[]);
        assert_eq!(classify_case(&p, None, &Default::default()).unwrap(), RigidityCase::B);
    }

    #[test]
    fn single_zero_is_case_c() {
        let p = synthetic(360, 1.0, &[0]);
        assert_eq!(
            classify_case(&p, None, &Default::default()).unwrap(),
            RigidityCase::C { azimuth: 1.0 }
        );
    }

    #[test]
    fn zero_interval_is_case_d() {
        let n = 360;
        // zero on bins 0..=57, i.e. [1.0, 1.0 + 57°] ≈ [1.0, 1.995]
        let k = 57;
        let p = synthetic(n, 1.0, &(0..=k).collect::<Vec<_>>());
        let end = p.bins[k].theta;
        match classify_case(&p, None, &Default::default()).unwrap() {
            RigidityCase::D { start, end: e } => {
                assert_eq!(start, 1.0);
                assert_eq!(e, end);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_arcs_bridge_single_gaps_and_wrap() {
        let mut z = vec![false; 20];
        for i in [18, 19, 0, 2, 3] {
            z[i] = true;
        }
        let arcs = zero_arcs(&z, 1);
        assert_eq!(arcs.len(), 1);
        assert_eq!((arcs[0].first, arcs[0].last, arcs[0].len), (18, 3, 6));
        let arcs = zero_arcs(&z, 0);
        assert_eq!(arcs.len(), 2);
        z[10] = true;
        assert_eq!(zero_arcs(&z, 1).len(), 2);
    }

    #[test]
    fn antipodal_pair_and_half_circle_are_case_a() {
        let n = 36;
        let mut tops = vec![0.5; n];
        tops[9] = 0.0;
        tops[27] = 0.0;
        let p = H3Profile::from_tops(0.0, &tops, &vec![false; n]).unwrap();
        match classify_case(&p, None, &Default::default()).unwrap() {
            RigidityCase::A { azimuth, slope } => {
                assert!((azimuth - 0.5 * PI).abs() < 1e-12);
                assert_eq!(slope, 0.0);
            }
            other => panic!("{other:?}"),
        }
        let p = synthetic(n, 0.0, &(9..=27).collect::<Vec<_>>());
        match classify_case(&p, None, &Default::default()).unwrap() {
            RigidityCase::A { azimuth, .. } => assert!((azimuth - 0.5 * PI).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unsaturated_pattern_is_indeterminate() {
        let n = 36;
        let p = H3Profile::from_tops(0.0, &vec![0.3; n], &vec![false; n]).unwrap();
        assert!(matches!(
            classify_case(&p, None, &Default::default()).unwrap(),
            RigidityCase::Indeterminate { .. }
        ));
    }

    #[test]
    fn broken_profile_is_rejected() {
        let mut p = synthetic(36, 0.0, &[3]);
        p.bins[5].bottom = 0.3;
        assert!(classify_case(&p, None, &Default::default()).is_err());
    }

    #[test]
    fn affine_direction_examples() {
        let w = Window::square(3.0, 2);
        let f = FunctionSpec::exp_affine(0.0, 1.0, 1.0, 1.0).unwrap();
        let a = detect_affine_direction(&f, &w, 180, 64, 1e-6).unwrap().unwrap();
        assert!((a.azimuth - 0.5 * PI).abs() < 1e-9);
        assert!((a.slope - 1.0).abs() < 1e-6);

        let plane = FunctionSpec::affine(0.0, 3.0, -1.0);
        let a = detect_affine_direction(&plane, &w, 180, 64, 1e-6).unwrap().unwrap();
        assert!((a.slope - 10f64.sqrt()).abs() < 1e-9);
        assert!((a.azimuth - (-1f64).atan2(3.0).rem_euclid(TAU)).abs() < 1e-9);

        let g = FunctionSpec::expression("exp(x)*(2+cos(y))").unwrap();
        assert!(detect_affine_direction(&g, &w, 180, 64, 1e-3).unwrap().is_none());
    }

    #[test]
    fn affine_direction_follows_rotation() {
        let w = Window::square(3.0, 2);
        let f = FunctionSpec::exp_affine(0.5, 2.0, -0.5, 0.7)
            .unwrap()
            .with_rotation(0.4);
        let a = detect_affine_direction(&f, &w, 180, 64, 1e-6).unwrap().unwrap();
        // rotated y-axis is the direction 0.4 + π/2; d < 0 flips it
        let expected = (0.4 + 1.5 * PI).rem_euclid(TAU);
        assert!((a.azimuth - expected).abs() < 1e-7, "{a:?}");
        assert!((a.slope - 0.5).abs() < 1e-6);
    }
}
