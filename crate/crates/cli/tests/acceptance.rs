//! Acceptance criteria, one PASS/FAIL line each.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrigid_core::direction::AuditTolerances;
use vrigid_core::fit::FitParams;
use vrigid_core::pipeline::analyze_shape;
use vrigid_core::*;

const BIN: &str = env!("CARGO_BIN_EXE_vrigid");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn criterion_lattice() -> Window {
    Window::square(2.0, 101)
}

fn strip_fit(a: f64, k: f64) -> FamilyFit {
    FamilyFit {
        family: FamilyTag::ExpStrip,
        theta: 0.0,
        params: FitParams {
            a,
            b: None,
            d: None,
            k: Some(k),
        },
        s: None,
        rms: 0.0,
        range: 0.0,
        window: criterion_lattice(),
    }
}

const STRIP: &str = "1 + (2 + cos(y))*exp(2*x)";
const SCALES: [f64; 3] = [0.5, 2.0, 10.0];

/// Family witnesses of criterion 1, as `(c, isometry, residual)`.
fn strip_witnesses() -> Vec<(f64, Isometry3, f64)> {
    let f = FunctionSpec::expression(STRIP).unwrap();
    SCALES
        .iter()
        .map(|&c| {
            let iso = witness_exp_strip(&strip_fit(1.0, 2.0), c).unwrap();
            let r = verify_witness(&f, c, &iso, &criterion_lattice(), 0.5).unwrap();
            (c, iso, r.residual_max)
        })
        .collect()
}

fn exp_line_witness() -> Isometry3 {
    // Closed form: rotate by atan(2) − π/4, then shift x by ln sqrt((1 + 1/4)/2).
    let alpha = 2f64.atan() - FRAC_PI_4;
    let shift = (1.25f64 / 2.0).sqrt().ln();
    Isometry3::translation(Vec3::new(shift, 0.0, 0.0)).compose(&Isometry3::rotation_x(alpha))
}

fn c1_strip_witness() -> Outcome {
    let f = FunctionSpec::expression(STRIP).unwrap();
    let mut worst = 0.0f64;
    let mut slowest = 0.0f64;
    for &c in &SCALES {
        let start = Instant::now();
        let iso = witness_exp_strip(&strip_fit(1.0, 2.0), c).unwrap();
        let r = verify_witness(&f, c, &iso, &criterion_lattice(), 0.5).unwrap();
        slowest = slowest.max(start.elapsed().as_secs_f64());
        worst = worst.max(r.residual_max);
    }
    outcome(
        worst < 1e-9 && slowest < 1.0,
        format!("max residual {worst:.3e} (< 1e-9), slowest c {slowest:.3}s (< 1s)"),
    )
}

fn c2_exp_line_witness() -> Outcome {
    let alpha = 2f64.atan() - FRAC_PI_4;
    let shift = (1.25f64 / 2.0).sqrt().ln();
    let constants = (alpha - 0.321751).abs() < 5e-7 && (shift + 0.23500).abs() < 5e-6;
    let f = FunctionSpec::expression("exp(x) + y").unwrap();
    let r = verify_witness(&f, 2.0, &exp_line_witness(), &criterion_lattice(), 0.5).unwrap();
    let library = normal_form_witness_matches();
    outcome(
        constants && library && r.residual_max < 1e-9,
        format!(
            "angle {alpha:.6}, shift {shift:.5}, residual {:.3e} (< 1e-9), library witness agrees: {library}",
            r.residual_max
        ),
    )
}

fn normal_form_witness_matches() -> bool {
    let lib = vrigid_core::verify::normal_form_witness(2.0).unwrap();
    let ours = exp_line_witness();
    (lib.matrix() - ours.matrix()).amax() < 1e-14 && (lib.translation_part() - ours.translation_part()).amax() < 1e-14
}

/// Root of a monotone function on a bracket grown from `[-1, 1]`.
fn bisect(g: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (-1.0, 1.0);
    while g(lo).signum() == g(hi).signum() {
        lo *= 2.0;
        hi *= 2.0;
    }
    let rising = g(hi) > g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn c3_level_set_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for c in [2.0, 3.0, 10.0] {
        let alpha = alpha_angle(c, 1.0);
        let w = ((1.0 + 1.0 / (c * c)) / 2.0).sqrt();
        for i in 0..=600 {
            let x = -3.0 + 0.01 * i as f64;
            let lift = |y: f64| rotate_about_x(Vec3::new(x, y, x.exp() + y), alpha);
            let y = bisect(|y| lift(y).z);
            let p = lift(y);
            worst = worst.max((p.y + w * p.x.exp()).abs());
        }
    }
    outcome(worst < 1e-6, format!("max level-set error {worst:.3e} (< 1e-6) over c in {{2, 3, 10}}"))
}

fn c4_w_monotone() -> Outcome {
    let mut violations = 0;
    for d in [0.1, 1.0, 10.0] {
        let ws: Vec<f64> = (0..1000)
            .map(|i| w_coefficient(10f64.powf(-3.0 + 6.0 * i as f64 / 999.0), d).unwrap())
            .collect();
        violations += ws.windows(2).filter(|p| p[1] >= p[0]).count();
    }
    outcome(violations == 0, format!("{violations} violations over 3 x 1000 points"))
}

fn c5_profile_accuracy() -> Outcome {
    let config = AnalysisConfig::default();
    let f = FunctionSpec::expression("x").unwrap();
    let p = estimate_h3_profile(&f, &config.ladder_windows(), &config.profile_options()).unwrap();
    let worst = p
        .bins
        .iter()
        .map(|b| {
            let want = b.theta.cos() / (1.0 + b.theta.cos().powi(2)).sqrt();
            (b.top - want).abs()
        })
        .fold(0.0f64, f64::max);
    outcome(
        p.nbins() == 360 && worst < 0.01,
        format!("max |top - cos/sqrt(1+cos^2)| {worst:.3e} (< 0.01) at {} bins", p.nbins()),
    )
}

fn family_members() -> Vec<FunctionSpec> {
    let mut out = Vec::new();
    for (a, b, d) in [(0.0, 1.0, 0.0), (1.0, 2.0, -1.0), (-3.0, 0.1, 0.4), (2.0, -5.0, 5.0), (0.0, 0.0, 0.0)] {
        out.push(FunctionSpec::affine(a, b, d));
    }
    for (a, s, k) in [
        (1.0, "2 + cos(y)", 1.2),
        (0.0, "cos(y)", 1.0),
        (-2.0, "exp(0.5*y)", -1.0),
        (0.5, "1 + y^2", 0.7),
        (0.0, "sin(2*y) - 3", 1.2),
    ] {
        let curve = CurveSpec::expression(Expr::parse(s).unwrap()).unwrap();
        out.push(FunctionSpec::exp_strip(a, k, curve).unwrap());
    }
    for (a, b, d, k, rot) in [
        (0.0, 1.0, 1.0, 1.0, 0.0),
        (2.0, 3.0, -0.7, 1.5, 0.0),
        (-1.0, -0.5, 2.0, -0.8, 0.7),
        (0.3, 2.0, 0.5, 1.2, -1.2),
        (1.0, 0.2, -3.0, 0.4, 2.0),
    ] {
        out.push(FunctionSpec::exp_affine(a, b, d, k).unwrap().with_rotation(rot));
    }
    out
}

fn c6_strip_audit() -> Outcome {
    let config = AnalysisConfig::default();
    let tol = AuditTolerances::default();
    let mut failed = Vec::new();
    for f in family_members() {
        let p = estimate_h3_profile(&f, &config.ladder_windows(), &config.profile_options()).unwrap();
        let s = sample_direction_set(&f, &config.window, config.npairs, config.seed).unwrap();
        let report = audit_strip_properties(&s, &p, &tol);
        if !report.all_passed() {
            failed.push(f.to_string());
        }
    }
    let f = FunctionSpec::expression("x").unwrap();
    let p = estimate_h3_profile(&f, &config.ladder_windows(), &config.profile_options()).unwrap();
    let s = sample_direction_set(&f, &config.window, config.npairs, config.seed).unwrap();
    let spikes = [7, 90, 181, 333];
    let caught = spikes
        .iter()
        .filter(|&&i| {
            let mut q = p.clone();
            q.set_top(i, q.bins[i].top + 0.3, false);
            let report = audit_strip_properties(&s, &q, &tol);
            report
                .check("lowerSemicontinuity")
                .is_some_and(|c| !c.passed && c.violations.iter().any(|v| v.index == i))
        })
        .count();
    outcome(
        failed.is_empty() && caught == spikes.len(),
        format!(
            "{}/15 members pass all five checks, {caught}/{} spikes reported at their bin{}",
            15 - failed.len(),
            spikes.len(),
            if failed.is_empty() { String::new() } else { format!("; failing: {}", failed.join(", ")) }
        ),
    )
}

fn synthetic(theta0: f64, zero_bins: &[usize]) -> H3Profile {
    let tops = vec![0.0; 360];
    let mut sat = vec![true; 360];
    for &i in zero_bins {
        sat[i] = false;
    }
    H3Profile::from_tops(theta0, &tops, &sat).unwrap()
}

fn c7_classifier() -> Outcome {
    let config = AnalysisConfig::default();
    let case_of = |src: &str| analyze_shape(&FunctionSpec::expression(src).unwrap(), &config).unwrap().case;

    let line = case_of("exp(x) + y");
    let a_ok = match line {
        RigidityCase::A { azimuth, slope } => {
            // (azimuth, slope) and (azimuth + π, −slope) describe the same line.
            let (az, s) = if (azimuth - FRAC_PI_2).rem_euclid(TAU).min((FRAC_PI_2 - azimuth).rem_euclid(TAU)) > FRAC_PI_2 {
                (azimuth - PI, -slope)
            } else {
                (azimuth, slope)
            };
            let gap = (az - FRAC_PI_2).rem_euclid(TAU);
            gap.min(TAU - gap) < 1f64.to_radians() && (s - 1.0).abs() < 1e-3
        }
        _ => false,
    };

    let strip = case_of("(2 + cos(y))*exp(2*x)");
    let b_ok = strip == RigidityCase::B;

    let c_profile = synthetic(1.0, &[0]);
    let c_ok = classify_case(&c_profile, None, &Default::default()).unwrap() == RigidityCase::C { azimuth: 1.0 };
    let zeros: Vec<usize> = (0..=57).collect();
    let d_profile = synthetic(1.0, &zeros);
    let d_want = RigidityCase::D {
        start: 1.0,
        end: d_profile.bins[57].theta,
    };
    let d_ok = classify_case(&d_profile, None, &Default::default()).unwrap() == d_want;

    outcome(
        a_ok && b_ok && c_ok && d_ok,
        format!(
            "exp(x)+y -> {line:?} [{}]; (2+cos y)e^(2x) -> {strip:?} [{}], want B; synthetic C [{}], synthetic D [{}]",
            ok(a_ok),
            ok(b_ok),
            ok(c_ok),
            ok(d_ok)
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "mismatch"
    }
}

fn c8_translations() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_t = 0.0f64;
    for _ in 0..20 {
        let a = rng.random_range(-2.0..2.0);
        let k = rng.random_range(0.5..2.5) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let c: f64 = [0.5, 2.0, 5.0, 10.0][rng.random_range(0..4)];
        let f = FunctionSpec::expression(&format!("{a} + (2 + cos(y))*exp({k}*x)")).unwrap();
        let want = Vec2::new(c.ln() / k, 0.0);
        worst_t = match find_translation_witness(&f, c, &TranslationSearch::new(criterion_lattice())).unwrap() {
            Some(w) => worst_t.max((w.t - want).amax()),
            None => f64::INFINITY,
        };
    }

    let mut worst_m = 0.0f64;
    let mut positive = true;
    for (k, beta) in [(1.0, 0.5), (-0.7, 1.3), (2.0, -0.4)] {
        let f = FunctionSpec::expression(&format!("exp({k}*x + {beta}*y)")).unwrap();
        for _ in 0..100 {
            let t1 = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let t2 = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let m = multiplicativity_residual(&f, t1, t2).unwrap();
            worst_m = worst_m.max(m.residual);
            positive &= m.positive;
        }
    }

    let s2 = 2f64.sqrt();
    let kinds: Vec<&str> = [
        vec![Vec2::new(1.0, 0.0), Vec2::new(s2, 0.0)],
        vec![Vec2::new(1.0, 0.0), Vec2::new(0.0, 2.0)],
        vec![Vec2::new(1.0, 0.0), Vec2::new(s2, 0.0), Vec2::new(0.0, 2.0)],
    ]
    .iter()
    .map(|g| match classify_translation_group(g, 1e-9).closure {
        vrigid_core::verify::GroupClosure::Line { .. } => "line",
        vrigid_core::verify::GroupClosure::Lattice2 { .. } => "lattice2",
        vrigid_core::verify::GroupClosure::LineLattice { .. } => "lineLattice",
        _ => "other",
    })
    .collect();
    let groups_ok = kinds == ["line", "lattice2", "lineLattice"];
    outcome(
        worst_t < 1e-6 && worst_m < 1e-10 && positive && groups_ok,
        format!(
            "translation error {worst_t:.3e} (< 1e-6) over 20 strips; multiplicativity {worst_m:.3e} (< 1e-10) over 300 pairs; groups {kinds:?}"
        ),
    )
}

fn c9_transport() -> Outcome {
    let f = FunctionSpec::expression("exp(x) + y").unwrap();
    let q = Isometry3::rotation_x(2f64.atan() - FRAC_PI_4);
    let window = Window::square(3.0, 2);
    let small = sample_direction_set(&f, &window, 1000, 0).unwrap();
    let d = strip_transport_check(&small, 2.0, &q).unwrap();
    let large = sample_direction_set(&f, &window, 50_000, 0).unwrap();
    let big = strip_transport_check(&large, 2.0, &q).unwrap();
    outcome(
        d < 0.02,
        format!(
            "Hausdorff {d:.4} rad on {} directions (< 0.02); {big:.4} rad on {} directions",
            small.len(),
            large.len()
        ),
    )
}

fn analyze_exit(src: &str) -> (Option<i32>, String) {
    let out = Command::new(BIN).args(["analyze", "--f", src]).output().unwrap();
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap_or(serde_json::Value::Null);
    (out.status.code(), json["verdict"].as_str().unwrap_or("none").to_string())
}

const ADVERSARIAL: [&str; 20] = [
    "x^2 + y^2",
    "sin(x) + y",
    "x*y",
    "exp(x) + y^2",
    "x^2 - y^2",
    "x^2 + y",
    "x^3",
    "exp(x) + x",
    "exp(2*x) + exp(x)",
    "(exp(x) + exp(-x))/2",
    "sin(x)*sin(y)",
    "exp(-x^2 - y^2)",
    "log(1 + x^2 + y^2)",
    "1/(1 + x^2 + y^2)",
    "x*exp(x) + y",
    "exp(x) + y + 0.001*x^2",
    "exp(x)*(2 + cos(y)) + 0.01*x^2",
    "sin(x + y) + x",
    "exp(0.5*x^2) + y",
    "x^4 + y",
];

fn c10_negative_controls() -> Outcome {
    let mut named = Vec::new();
    let mut named_ok = true;
    for src in ["x^2 + y^2", "sin(x) + y"] {
        let (code, verdict) = analyze_exit(src);
        named_ok &= code == Some(2) && verdict == "NotRigidEvidence";
        named.push(format!("{src}: {verdict}/{code:?}"));
    }
    let false_certs: Vec<&str> = ADVERSARIAL
        .iter()
        .copied()
        .filter(|src| {
            let (code, verdict) = analyze_exit(src);
            code == Some(0) || verdict == "RigidCertified"
        })
        .collect();
    outcome(
        named_ok && false_certs.is_empty(),
        format!(
            "{}; false certificates {}/20{}",
            named.join(", "),
            false_certs.len(),
            if false_certs.is_empty() { String::new() } else { format!(" ({})", false_certs.join(", ")) }
        ),
    )
}

fn c11_composition() -> Outcome {
    let mut runs = Vec::new();
    for (c, iso, r) in strip_witnesses() {
        runs.push((STRIP, c, iso, r));
    }
    let line = FunctionSpec::expression("exp(x) + y").unwrap();
    let r = verify_witness(&line, 2.0, &exp_line_witness(), &criterion_lattice(), 0.5).unwrap();
    runs.push(("exp(x) + y", 2.0, exp_line_witness(), r.residual_max));

    let mut pairs = 0;
    let mut worst_ratio = 0.0f64;
    let mut failures = Vec::new();
    for (src0, c0, w0, r0) in &runs {
        for (src, c, w, r) in &runs {
            if src0 != src {
                continue;
            }
            let scaled = FunctionSpec::expression(&format!("{c0} * ({src})")).unwrap();
            let composed = w.compose(&w0.inverse());
            let check = verify_witness(&scaled, c / c0, &composed, &criterion_lattice(), 0.5);
            pairs += 1;
            match check {
                Ok(k) if k.residual_max < 10.0 * (r0 + r) || k.residual_max == 0.0 => {
                    if r0 + r > 0.0 {
                        worst_ratio = worst_ratio.max(k.residual_max / (r0 + r));
                    }
                }
                Ok(k) => failures.push(format!("{src} c0={c0} c={c}: {:.3e} vs {:.3e}", k.residual_max, r0 + r)),
                Err(e) => failures.push(format!("{src} c0={c0} c={c}: {e}")),
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{pairs} witness pairs, worst composed/original ratio {worst_ratio:.2} (< 10){}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn run_outputs(dir: &Path) -> Vec<Vec<u8>> {
    let files = ["report.json", "profile.csv", "sphere.pgm"].map(|n| dir.join(n));
    let status = Command::new(BIN)
        .args(["analyze", "--f", "exp(x)+y", "--seed", "42", "--out"])
        .arg(&files[0])
        .arg("--profile")
        .arg(&files[1])
        .arg("--raster")
        .arg(&files[2])
        .status()
        .unwrap();
    assert!(status.code().is_some_and(|c| c != 1));
    files.iter().map(|f| std::fs::read(f).unwrap()).collect()
}

fn c12_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_outputs(a.path());
    let second = run_outputs(b.path());
    let same: Vec<bool> = first.iter().zip(&second).map(|(x, y)| x == y).collect();
    outcome(
        same.iter().all(|&s| s),
        format!(
            "JSON {} bytes, CSV {} bytes, raster {} bytes; identical {same:?}",
            first[0].len(),
            first[1].len(),
            first[2].len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("strip translation witness", c1_strip_witness),
        ("exp-affine normal form witness", c2_exp_line_witness),
        ("rotated level set oracle", c3_level_set_oracle),
        ("w strictly decreasing in c", c4_w_monotone),
        ("profile accuracy for f = x", c5_profile_accuracy),
        ("strip audit on family members", c6_strip_audit),
        ("classifier cases", c7_classifier),
        ("translation machinery", c8_translations),
        ("strip transport by the rotation", c9_transport),
        ("negative controls", c10_negative_controls),
        ("witness composition", c11_composition),
        ("determinism", c12_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!result.pass);
        println!(
            "criterion {:>2} {} {name}: {} [{:.1}s]",
            i + 1,
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
