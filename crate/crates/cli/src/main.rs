//! `vrigid`: vertical rigidity analysis from the command line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use vrigid_core::pipeline::{analyze_shape, fit_families, verify_scales, FitSummary, ProfileSummary, Shape};
use vrigid_core::{
    parse_grid_csv, parse_spec_file, run_analysis, write_profile_csv, write_raster, AnalysisConfig, Body,
    FunctionSpec, IsometryClass, Tolerances, Window,
};

#[derive(Parser)]
#[command(name = "vrigid", version, about = "Test whether graph(c·f) is congruent to graph(f) for all scales c")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and issue a verdict (exit 0 certified, 2 evidence against, 3 unknown).
    Analyze(Run),
    /// Estimate the direction set profile and classify its shape.
    Classify(Run),
    /// Fit the rigid families.
    Fit(Run),
    /// Fit, then build and check a witness isometry for every scale.
    Verify(Run),
    /// Write the profile CSV and the sphere raster only.
    Render(Run),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Input {
    /// Expression in x and y, e.g. "exp(x) + y".
    #[arg(long = "f", value_name = "EXPR")]
    expr: Option<String>,
    /// Spec file with `key = value` lines.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// CSV with header x,y,z on a rectangular lattice, x varying fastest.
    #[arg(long, value_name = "CSV")]
    grid: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Class {
    All,
    Translations,
    HorizontalTranslations,
}

#[derive(Args)]
struct Run {
    #[command(flatten)]
    input: Input,
    /// Analysis window [default: -3 3 -3 3, or the lattice hull for --grid].
    #[arg(long, num_args = 4, value_names = ["XMIN", "XMAX", "YMIN", "YMAX"], allow_negative_numbers = true)]
    window: Option<Vec<f64>>,
    /// Nested windows used to detect saturation.
    #[arg(long, default_value_t = 3)]
    ladder: usize,
    /// Azimuth bins of the profile (even).
    #[arg(long, default_value_t = 360)]
    bins: usize,
    /// Random chord pairs in the direction sample.
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
    /// Scales to certify.
    #[arg(long, value_delimiter = ',', default_value = "0.5,2,10")]
    c_list: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Isometries a witness may use.
    #[arg(long, value_enum, default_value_t = Class::All)]
    isometry: Class,
    /// Tolerance overrides: affine=1e-6 fit=1e-6 residual=1e-6 coverage=0.5
    /// translation=1e-6 zero=0.02 growth=4.
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    tol: Vec<String>,
    /// Report JSON [default: stdout].
    #[arg(long, value_name = "JSON")]
    out: Option<PathBuf>,
    /// Profile CSV: theta,top,bottom,topSaturated,bottomSaturated.
    #[arg(long, value_name = "CSV")]
    profile: Option<PathBuf>,
    /// Equirectangular (azimuth, z) raster of the direction sample, plain PGM.
    #[arg(long, value_name = "IMG")]
    raster: Option<PathBuf>,
    /// Raster size.
    #[arg(long, value_name = "WxH", default_value = "720x360", value_parser = parse_size)]
    raster_size: (usize, usize),
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width `{w}`"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height `{h}`"))?;
    if w == 0 || h == 0 || w > 20_000 || h > 20_000 {
        return Err("raster sides must be in 1..=20000".into());
    }
    Ok((w, h))
}

type Failure = Box<dyn std::error::Error>;

fn context<E: std::fmt::Display>(what: impl std::fmt::Display) -> impl FnOnce(E) -> Failure {
    move |e| format!("{what}: {e}").into()
}

impl Run {
    fn function(&self) -> Result<FunctionSpec, Failure> {
        if let Some(src) = &self.input.expr {
            return FunctionSpec::expression(src).map_err(context("--f"));
        }
        if let Some(path) = &self.input.spec {
            let text = std::fs::read_to_string(path).map_err(context(path.display()))?;
            return parse_spec_file(&text).map_err(context(path.display()));
        }
        let path = self.input.grid.as_ref().expect("clap enforces one input");
        let file = File::open(path).map_err(context(path.display()))?;
        let grid = parse_grid_csv(file).map_err(context(path.display()))?;
        Ok(FunctionSpec::grid(grid))
    }

    fn config(&self, spec: &FunctionSpec) -> Result<AnalysisConfig, Failure> {
        let window = match (&self.window, &spec.body) {
            (Some(w), _) => Window::new(w[0], w[1], w[2], w[3], 2, 2).map_err(context("--window"))?,
            (None, Body::Grid(g)) => g.hull().with_resolution(2, 2),
            (None, _) => Window::square(3.0, 2),
        };
        let mut tolerances = Tolerances::default();
        for item in &self.tol {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| format!("--tol: expected KEY=VALUE, got `{item}`"))?;
            let value: f64 = value.trim().parse().map_err(context(format!("--tol {key}")))?;
            tolerances.set(key.trim(), value).map_err(context("--tol"))?;
        }
        let config = AnalysisConfig {
            window,
            ladder: self.ladder,
            nbins: self.bins,
            npairs: self.pairs,
            seed: self.seed,
            c_list: self.c_list.clone(),
            isometry_class: match self.isometry {
                Class::All => IsometryClass::All,
                Class::Translations => IsometryClass::Translations,
                Class::HorizontalTranslations => IsometryClass::HorizontalTranslations,
            },
            tolerances,
            ..AnalysisConfig::default()
        };
        config.validate().map_err(context("configuration"))?;
        Ok(config)
    }

    fn emit_json(&self, value: &impl serde::Serialize) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        match &self.out {
            Some(path) => std::fs::write(path, text).map_err(context(path.display()))?,
            None => std::io::stdout().write_all(text.as_bytes())?,
        }
        Ok(())
    }

    fn render(&self, shape: &Shape) -> Result<(), Failure> {
        if let Some(path) = &self.profile {
            write_profile_csv(&shape.profile, create(path)?).map_err(context(path.display()))?;
        }
        if let Some(path) = &self.raster {
            let (w, h) = self.raster_size;
            write_raster(&shape.sample, w, h, create(path)?).map_err(context(path.display()))?;
        }
        Ok(())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path).map_err(context(path.display()))?))
}

fn summaries(fits: &[vrigid_core::FamilyFit]) -> Vec<FitSummary> {
    fits.iter()
        .map(|f| FitSummary {
            family: f.family,
            theta: f.theta,
            rms: f.rms,
            range: f.range,
        })
        .collect()
}

fn execute(command: &Command) -> Result<i32, Failure> {
    let (run, name) = match command {
        Command::Analyze(r) => (r, "analyze"),
        Command::Classify(r) => (r, "classify"),
        Command::Fit(r) => (r, "fit"),
        Command::Verify(r) => (r, "verify"),
        Command::Render(r) => (r, "render"),
    };
    let spec = run.function()?;
    let config = run.config(&spec)?;
    match name {
        "analyze" => {
            let (report, shape) = run_analysis(&spec, &config).map_err(context("analysis"))?;
            run.emit_json(&report)?;
            run.render(&shape)?;
            Ok(report.exit_code())
        }
        "classify" => {
            let shape = analyze_shape(&spec, &config).map_err(context("classification"))?;
            run.emit_json(&json!({
                "function": spec.to_string(),
                "profile": ProfileSummary::of(&shape.profile, config.tolerances.zero),
                "audit": shape.audit,
                "case": shape.case.label(),
                "caseDetail": shape.case,
                "affineDirection": shape.affine,
            }))?;
            run.render(&shape)?;
            Ok(0)
        }
        "fit" => {
            let (fits, chosen) = fit_families(&spec, &config).map_err(context("fit"))?;
            run.emit_json(&json!({
                "function": spec.to_string(),
                "fit": chosen,
                "candidates": summaries(&fits),
            }))?;
            Ok(if chosen.is_some() { 0 } else { 3 })
        }
        "verify" => {
            let (_, chosen) = fit_families(&spec, &config).map_err(context("fit"))?;
            let plan = config.plan()?;
            let scales =
                verify_scales(&spec, chosen.as_ref(), &plan, config.tolerances.translation).map_err(context("verify"))?;
            let all = scales.iter().all(|s| s.pass);
            run.emit_json(&json!({
                "function": spec.to_string(),
                "fit": chosen,
                "scales": scales,
                "pass": all,
            }))?;
            Ok(if all { 0 } else { 3 })
        }
        _ => {
            if run.profile.is_none() && run.raster.is_none() {
                return Err("render: give --profile and/or --raster".into());
            }
            let shape = analyze_shape(&spec, &config).map_err(context("render"))?;
            run.render(&shape)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(&cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
