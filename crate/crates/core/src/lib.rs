//! Numerical analysis of vertical rigidity for surfaces `z = f(x, y)`.
//!
//! A function is vertically rigid when the graph of `c·f` is congruent to the
//! graph of `f` for every `c > 0`. The crate estimates the set of chord
//! directions of a graph on the unit sphere, classifies its shape, fits the
//! rigid families `a + bx + dy`, `a + s(y)e^{kx}` and `a + be^{kx} + dy` (up
//! to a rotation about the z-axis), builds explicit isometries between
//! `graph(f)` and `graph(c·f)` and checks them numerically.

pub mod classify;
pub mod direction;
pub mod error;
pub mod expr;
pub mod fit;
pub mod function;
pub mod io;
pub mod pipeline;
pub mod sphere;
pub mod verify;

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

pub use classify::{classify_case, detect_affine_direction, AffineDirection, RigidityCase};
pub use direction::{
    audit_strip_properties, estimate_h3_profile, jordan_curve, sample_direction_set,
    DirectionSample, H3Profile, ProfileOptions, PropertyReport,
};
pub use error::{Error, Result};
pub use expr::Expr;
pub use fit::{best_family, fit_affine, fit_all, fit_exp_affine, fit_exp_strip, select_family, FamilyFit, FitOptions};
pub use function::{
    directional_slope, normalize_exp_affine, rotate_about_z, Body, CurveSpec, Family, FamilyTag,
    FunctionSpec, GraphTransform, Grid, TransformChain, Window,
};
pub use io::{parse_grid_csv, parse_spec_file, write_profile_csv, write_raster, write_sample_csv};
pub use pipeline::{issue_verdict, run_analysis, AnalysisConfig, RigidityReport, Tolerances, Verdict};
pub use sphere::{
    alpha_angle, apply_isometry, decompose_isometry, direction_of_chord, psi, rotate_about_x,
    slope_height_map, w_coefficient, Isometry3, SphereDirection,
};
pub use verify::{
    classify_translation_group, find_translation_witness, multiplicativity_residual,
    strip_transport_check, verify_witness, witness_affine, witness_exp_affine, witness_exp_strip,
    IsometryClass, TranslationGroupEstimate, TranslationSearch, VerificationPlan,
};
