//! End-to-end analysis: profile, audit, classify, fit, verify, verdict.

use serde::{Deserialize, Serialize};

use crate::classify::{classify_case, detect_affine_direction, AffineDirection, ClassifyTolerances, RigidityCase};
use crate::direction::{
    audit_strip_properties, estimate_h3_profile, sample_direction_set, AuditTolerances, DirectionSample,
    H3Profile, ProfileOptions, PropertyReport,
};
use crate::error::{Error, Result};
use crate::fit::{fit_all, select_family, FamilyFit, FitOptions};
use crate::function::{FamilyTag, FunctionSpec, Window};
use crate::sphere::Isometry3;
use crate::verify::{
    find_translation_witness, verify_witness, witness_for_fit, IsometryClass, TranslationSearch, VerificationPlan,
};

/// Numeric thresholds of a run; each can be overridden by key.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Tolerances {
    /// Max slope spread for a constant-slope azimuth.
    pub affine: f64,
    /// Relative fit acceptance, rms over value range.
    pub fit: f64,
    /// Relative witness residual.
    pub residual: f64,
    pub coverage: f64,
    /// Relative translation-search residual.
    pub translation: f64,
    /// Height below which a profile bin counts as zero.
    pub zero: f64,
    pub growth: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            affine: 1e-6,
            fit: 1e-6,
            residual: 1e-6,
            coverage: 0.5,
            translation: 1e-6,
            zero: 0.02,
            growth: 4.0,
        }
    }
}

impl Tolerances {
    pub const KEYS: [&'static str; 7] = ["affine", "fit", "residual", "coverage", "translation", "zero", "growth"];

    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let valid = match key {
            "coverage" => (0.0..=1.0).contains(&value),
            "growth" => value > 1.0 && value.is_finite(),
            _ => value > 0.0 && value.is_finite(),
        };
        if !valid {
            return Err(Error::InvalidArgument(format!("tolerance {key} = {value} is out of range")));
        }
        let slot = match key {
            "affine" => &mut self.affine,
            "fit" => &mut self.fit,
            "residual" => &mut self.residual,
            "coverage" => &mut self.coverage,
            "translation" => &mut self.translation,
            "zero" => &mut self.zero,
            "growth" => &mut self.growth,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown tolerance `{key}` (expected one of {})",
                    Self::KEYS.join(", ")
                )))
            }
        };
        *slot = value;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisConfig {
    pub window: Window,
    /// Number of nested windows used for saturation.
    pub ladder: usize,
    pub nbins: usize,
    pub npairs: usize,
    pub segments: usize,
    pub seed: u64,
    pub c_list: Vec<f64>,
    pub fit_resolution: usize,
    pub verify_resolution: usize,
    pub isometry_class: IsometryClass,
    pub tolerances: Tolerances,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            window: Window::square(3.0, 2),
            ladder: 3,
            nbins: 360,
            npairs: 1000,
            segments: 256,
            seed: 0,
            c_list: vec![0.5, 2.0, 10.0],
            fit_resolution: 41,
            verify_resolution: 101,
            isometry_class: IsometryClass::All,
            tolerances: Tolerances::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        Window::new(
            self.window.xmin,
            self.window.xmax,
            self.window.ymin,
            self.window.ymax,
            2,
            2,
        )?;
        if !(2..=16).contains(&self.ladder) {
            return Err(Error::InvalidArgument(format!("ladder must be in 2..=16, got {}", self.ladder)));
        }
        if self.nbins < 8 || self.nbins % 2 != 0 || self.nbins > 100_000 {
            return Err(Error::InvalidArgument(format!(
                "bins must be even and in 8..=100000, got {}",
                self.nbins
            )));
        }
        if self.npairs == 0 || self.segments == 0 {
            return Err(Error::InvalidArgument("pairs and segments must be positive".into()));
        }
        if self.fit_resolution < 5 || self.verify_resolution < 5 {
            return Err(Error::InvalidArgument("lattice resolutions must be at least 5".into()));
        }
        self.plan().map(|_| ())
    }

    pub fn ladder_windows(&self) -> Vec<Window> {
        self.window.ladder(self.ladder)
    }

    pub fn profile_options(&self) -> ProfileOptions {
        ProfileOptions {
            nbins: self.nbins,
            segments: self.segments,
            seed: self.seed,
            growth_factor: self.tolerances.growth,
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            accept: self.tolerances.fit,
            ..FitOptions::default()
        }
    }

    pub fn fit_window(&self) -> Window {
        self.window.with_resolution(self.fit_resolution, self.fit_resolution)
    }

    pub fn plan(&self) -> Result<VerificationPlan> {
        let mut plan = VerificationPlan::new(
            self.c_list.clone(),
            self.window.with_resolution(self.verify_resolution, self.verify_resolution),
        )?;
        plan.isometry_class = self.isometry_class;
        plan.residual_tol = self.tolerances.residual;
        plan.min_coverage = self.tolerances.coverage;
        Ok(plan)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    RigidCertified,
    NotRigidEvidence,
    Unknown,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::RigidCertified => 0,
            Verdict::NotRigidEvidence => 2,
            Verdict::Unknown => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfileSummary {
    pub nbins: usize,
    pub saturated_bins: usize,
    pub zero_bins: usize,
    pub min_top: f64,
    pub max_unsaturated_top: Option<f64>,
}

impl ProfileSummary {
    pub fn of(profile: &H3Profile, zero: f64) -> Self {
        let tops = profile.bins.iter().map(|b| b.top);
        ProfileSummary {
            nbins: profile.nbins(),
            saturated_bins: profile.bins.iter().filter(|b| b.top_saturated).count(),
            zero_bins: profile.bins.iter().filter(|b| b.top.abs() <= zero).count(),
            min_top: tops.fold(f64::INFINITY, f64::min),
            max_unsaturated_top: profile
                .bins
                .iter()
                .filter(|b| !b.top_saturated)
                .map(|b| b.top)
                .max_by(|a, b| a.total_cmp(b)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum WitnessMethod {
    Family,
    Translation,
    None,
}

/// Outcome of certifying one scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScaleRecord {
    pub c: f64,
    pub method: WitnessMethod,
    pub isometry: Option<Isometry3>,
    pub residual_max: Option<f64>,
    pub residual_rms: Option<f64>,
    pub coverage: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FitSummary {
    pub family: FamilyTag,
    pub theta: f64,
    pub rms: f64,
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RigidityReport {
    pub function: String,
    pub config: AnalysisConfig,
    pub profile: ProfileSummary,
    pub audit: PropertyReport,
    /// Case label, `A` to `D` or `indeterminate`.
    pub case: String,
    pub case_detail: RigidityCase,
    pub affine_direction: Option<AffineDirection>,
    pub fit: Option<FamilyFit>,
    pub candidates: Vec<FitSummary>,
    pub scales: Vec<ScaleRecord>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl RigidityReport {
    pub fn exit_code(&self) -> i32 {
        self.verdict.exit_code()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Profile, sample, audit and case of a function.
#[derive(Debug, Clone)]
pub struct Shape {
    pub profile: H3Profile,
    pub sample: DirectionSample,
    pub audit: PropertyReport,
    pub affine: Option<AffineDirection>,
    pub case: RigidityCase,
}

pub fn analyze_shape(spec: &FunctionSpec, config: &AnalysisConfig) -> Result<Shape> {
    config.validate()?;
    let profile = estimate_h3_profile(spec, &config.ladder_windows(), &config.profile_options())?;
    let sample = sample_direction_set(spec, &config.window, config.npairs, config.seed)?;
    let audit = audit_strip_properties(&sample, &profile, &AuditTolerances::default());
    let affine = detect_affine_direction(spec, &config.window, config.nbins / 2, 64, config.tolerances.affine)?;
    let case = classify_case(
        &profile,
        affine,
        &ClassifyTolerances {
            zero: config.tolerances.zero,
            ..ClassifyTolerances::default()
        },
    )?;
    Ok(Shape {
        profile,
        sample,
        audit,
        affine,
        case,
    })
}

/// All fits (best first) and the selected one.
pub fn fit_families(spec: &FunctionSpec, config: &AnalysisConfig) -> Result<(Vec<FamilyFit>, Option<FamilyFit>)> {
    let opts = config.fit_options();
    let fits = fit_all(spec, &config.fit_window(), &opts)?;
    let chosen = select_family(&fits, &opts);
    Ok((fits, chosen))
}

fn allowed(iso: &Isometry3, class: IsometryClass) -> bool {
    match class {
        IsometryClass::All => true,
        IsometryClass::Translations => iso.is_translation(),
        IsometryClass::HorizontalTranslations => iso.is_translation() && iso.translation_part().z.abs() <= 1e-12,
    }
}

fn sup_norm(spec: &FunctionSpec, window: &Window) -> Result<f64> {
    window
        .nodes()
        .try_fold(0.0f64, |m, p| spec.eval_at(p).map(|v| m.max(v.abs())))
}

/// Certifies each scale of the plan, first with the fitted family witness,
/// then with a searched translation.
pub fn verify_scales(
    spec: &FunctionSpec,
    fit: Option<&FamilyFit>,
    plan: &VerificationPlan,
    translation_tol: f64,
) -> Result<Vec<ScaleRecord>> {
    plan.validate()?;
    let threshold = plan.residual_tol * (1.0 + sup_norm(spec, &plan.window)?);
    let mut search = TranslationSearch::new(plan.window);
    search.tol = translation_tol;
    search.offset = plan.isometry_class != IsometryClass::HorizontalTranslations;
    let mut records = Vec::with_capacity(plan.c_list.len());
    for &c in &plan.c_list {
        let mut record = ScaleRecord {
            c,
            method: WitnessMethod::None,
            isometry: None,
            residual_max: None,
            residual_rms: None,
            coverage: None,
            threshold,
            pass: false,
            note: None,
        };
        let mut notes = Vec::new();
        let attempt = |method: WitnessMethod, iso: Isometry3, record: &mut ScaleRecord, notes: &mut Vec<String>| -> bool {
            if !allowed(&iso, plan.isometry_class) {
                notes.push(format!("{method:?} witness is outside the isometry class").to_lowercase());
                return false;
            }
            match verify_witness(spec, c, &iso, &plan.window, plan.min_coverage) {
                Ok(check) => {
                    let pass = check.residual_max < threshold;
                    *record = ScaleRecord {
                        method,
                        isometry: Some(iso),
                        residual_max: Some(check.residual_max),
                        residual_rms: Some(check.residual_rms),
                        coverage: Some(check.coverage),
                        pass,
                        ..record.clone()
                    };
                    pass
                }
                Err(Error::CoverageTooLow { coverage, .. }) => {
                    notes.push(format!("coverage {coverage:.3} too low"));
                    false
                }
                Err(e) => {
                    notes.push(e.to_string());
                    false
                }
            }
        };
        let mut done = false;
        if let Some(fit) = fit {
            match witness_for_fit(fit, c) {
                Ok(iso) => done = attempt(WitnessMethod::Family, iso, &mut record, &mut notes),
                Err(e) => notes.push(format!("no family witness: {e}")),
            }
        }
        if !done {
            match find_translation_witness(spec, c, &search) {
                Ok(Some(w)) => done = attempt(WitnessMethod::Translation, w.isometry(c), &mut record, &mut notes),
                Ok(None) => notes.push("translation search found no witness".into()),
                Err(e) => notes.push(format!("translation search failed: {e}")),
            }
        }
        if !done && !notes.is_empty() {
            record.note = Some(notes.join("; "));
        }
        records.push(record);
    }
    Ok(records)
}

/// Combines the evidence into a verdict.
///
/// Certified needs a passing witness at every scale. Evidence against needs
/// every family fit rejected, some scale without any witness, and a shape that
/// no rigid function outside the fitted families produces.
pub fn issue_verdict(shape_case: &RigidityCase, affine: Option<&AffineDirection>, fit: Option<&FamilyFit>, scales: &[ScaleRecord]) -> Verdict {
    if !scales.is_empty() && scales.iter().all(|s| s.pass) {
        return Verdict::RigidCertified;
    }
    let witnessless = scales.iter().any(|s| s.method == WitnessMethod::None);
    let shape_against = match shape_case {
        RigidityCase::Indeterminate { .. } => true,
        RigidityCase::A { .. } => affine.is_some(),
        _ => false,
    };
    if fit.is_none() && witnessless && shape_against {
        Verdict::NotRigidEvidence
    } else {
        Verdict::Unknown
    }
}

/// Runs the whole analysis; returns the report with the shape for rendering.
pub fn run_analysis(spec: &FunctionSpec, config: &AnalysisConfig) -> Result<(RigidityReport, Shape)> {
    let shape = analyze_shape(spec, config)?;
    let (fits, chosen) = fit_families(spec, config)?;
    let scales = verify_scales(spec, chosen.as_ref(), &config.plan()?, config.tolerances.translation)?;
    let verdict = issue_verdict(&shape.case, shape.affine.as_ref(), chosen.as_ref(), &scales);

    let mut notes = Vec::new();
    if !shape.audit.all_passed() {
        let failed: Vec<&str> = shape
            .audit
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        notes.push(format!("audit failed: {}", failed.join(", ")));
    }
    if matches!(shape.case, RigidityCase::B)
        && verdict == Verdict::RigidCertified
        && scales.iter().all(|s| s.method == WitnessMethod::Translation)
    {
        notes.push("case B certified by translations alone".into());
    }
    if let (Some(fit), RigidityCase::A { .. }) = (&chosen, &shape.case) {
        if fit.family == FamilyTag::ExpStrip {
            notes.push("strip fit on a case A shape".into());
        }
    }
    if verdict == Verdict::RigidCertified && chosen.is_none() {
        notes.push("no family fit; certified by searched witnesses only".into());
    }

    let report = RigidityReport {
        function: spec.to_string(),
        config: config.clone(),
        profile: ProfileSummary::of(&shape.profile, config.tolerances.zero),
        audit: shape.audit.clone(),
        case: shape.case.label().to_string(),
        case_detail: shape.case.clone(),
        affine_direction: shape.affine,
        fit: chosen,
        candidates: fits
            .iter()
            .map(|f| FitSummary {
                family: f.family,
                theta: f.theta,
                rms: f.rms,
                range: f.range,
            })
            .collect(),
        scales,
        verdict,
        notes,
    };
    Ok((report, shape))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> AnalysisConfig {
        AnalysisConfig {
            nbins: 72,
            npairs: 200,
            segments: 64,
            fit_resolution: 21,
            verify_resolution: 41,
            ..AnalysisConfig::default()
        }
    }

    #[test]
    fn exp_plus_linear_is_certified() {
        let f = FunctionSpec::expression("exp(x) + y").unwrap();
        let (r, _) = run_analysis(&f, &quick()).unwrap();
        assert_eq!(r.case, "A");
        assert_eq!(r.verdict, Verdict::RigidCertified, "{:#?}", r.scales);
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn paraboloid_is_evidence_against() {
        let f = FunctionSpec::expression("x^2 + y^2").unwrap();
        let (r, _) = run_analysis(&f, &quick()).unwrap();
        assert_eq!(r.verdict, Verdict::NotRigidEvidence, "{} {:?}", r.case, r.scales);
        assert_eq!(r.exit_code(), 2);
    }

    #[test]
    fn report_json_round_trips() {
        let f = FunctionSpec::affine(1.0, 2.0, -1.0);
        let (r, _) = run_analysis(&f, &quick()).unwrap();
        assert_eq!(r.fit.as_ref().unwrap().family, FamilyTag::Affine);
        let back = RigidityReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn tolerance_overrides() {
        let mut t = Tolerances::default();
        t.set("residual", 1e-8).unwrap();
        assert_eq!(t.residual, 1e-8);
        assert!(t.set("nope", 1.0).is_err());
        assert!(t.set("coverage", 2.0).is_err());
        assert!(t.set("fit", -1.0).is_err());
    }
}
