//! Text formats: function spec files, grid CSV input, profile and sample CSV
//! output and the direction raster.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::io::{Read, Write};

use crate::direction::{DirectionSample, H3Profile};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::function::{Body, CurveSpec, Family, FunctionSpec, Grid};
use crate::Vec2;

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

struct Entry<'a> {
    line: usize,
    key_col: usize,
    value: &'a str,
    value_col: usize,
}

const KEYS: [&str; 8] = ["f(x,y)", "family", "a", "b", "d", "k", "s(y)", "rotation_z"];

/// Parses a spec file of `key = value` lines. `#` starts a comment.
///
/// Either `f(x,y) = <expr>` or `family = affine|expstrip|expaffine` with its
/// parameters (`a`, `b`, `d`, `k`, `s(y)`); `rotation_z` applies to both.
pub fn parse_spec_file(text: &str) -> Result<FunctionSpec> {
    let mut entries: HashMap<String, Entry> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            let col = content.len() - content.trim_start().len() + 1;
            return Err(parse_error(line, col, "expected `key = value`"));
        };
        let key_part = &content[..eq];
        let key_col = key_part.len() - key_part.trim_start().len() + 1;
        let key: String = key_part.chars().filter(|c| !c.is_whitespace()).collect();
        if !KEYS.contains(&key.as_str()) {
            return Err(parse_error(line, key_col, format!("unknown key `{}`", key_part.trim())));
        }
        let value_raw = &content[eq + 1..];
        let value = value_raw.trim();
        let value_col = eq + 2 + (value_raw.len() - value_raw.trim_start().len());
        if value.is_empty() {
            return Err(parse_error(line, value_col, format!("missing value for `{key}`")));
        }
        if let Some(prev) = entries.get(&key) {
            return Err(parse_error(
                line,
                key_col,
                format!("duplicate key `{key}` (first set on line {})", prev.line),
            ));
        }
        entries.insert(
            key,
            Entry {
                line,
                key_col,
                value,
                value_col,
            },
        );
    }

    let number = |key: &str| -> Result<Option<f64>> {
        match entries.get(key) {
            None => Ok(None),
            Some(e) => {
                let v = Expr::parse_at(e.value, e.line, e.value_col)?;
                if v.mentions_x() || v.eval(f64::NAN, f64::NAN).map_or(true, |r| r.is_nan()) {
                    return Err(parse_error(e.line, e.value_col, format!("`{key}` must be a constant")));
                }
                Ok(Some(v.eval(0.0, 0.0)?))
            }
        }
    };
    let rotation = number("rotation_z")?.unwrap_or(0.0);

    let body = match (entries.get("f(x,y)"), entries.get("family")) {
        (Some(e), None) => {
            for key in ["a", "b", "d", "k", "s(y)"] {
                if let Some(p) = entries.get(key) {
                    return Err(parse_error(
                        p.line,
                        p.key_col,
                        format!("`{key}` only applies to a family spec"),
                    ));
                }
            }
            Body::Expression(Expr::parse_at(e.value, e.line, e.value_col)?)
        }
        (None, Some(e)) => {
            let a = number("a")?.unwrap_or(0.0);
            let b = number("b")?.unwrap_or(0.0);
            let d = number("d")?.unwrap_or(0.0);
            let reject = |keys: &[&str], family: &str| -> Result<()> {
                for key in keys {
                    if let Some(p) = entries.get(*key) {
                        return Err(parse_error(
                            p.line,
                            p.key_col,
                            format!("`{key}` does not apply to family {family}"),
                        ));
                    }
                }
                Ok(())
            };
            let rate = || -> Result<f64> {
                let Some(k) = entries.get("k") else {
                    return Err(parse_error(e.line, e.value_col, "family needs a rate `k`"));
                };
                let v = number("k")?.expect("k present");
                if v == 0.0 {
                    return Err(parse_error(k.line, k.value_col, "k must be nonzero"));
                }
                Ok(v)
            };
            match e.value {
                "affine" => {
                    reject(&["k", "s(y)"], "affine")?;
                    Body::ClosedForm(Family::Affine { a, b, d })
                }
                "expaffine" => {
                    reject(&["s(y)"], "expaffine")?;
                    Body::ClosedForm(Family::ExpAffine { a, b, d, k: rate()? })
                }
                "expstrip" => {
                    reject(&["b", "d"], "expstrip")?;
                    let k = rate()?;
                    let Some(s) = entries.get("s(y)") else {
                        return Err(parse_error(e.line, e.value_col, "expstrip needs `s(y)`"));
                    };
                    let expr = Expr::parse_at(s.value, s.line, s.value_col)?;
                    let curve = CurveSpec::expression(expr)
                        .map_err(|_| parse_error(s.line, s.value_col, "s(y) must not use x"))?;
                    Body::ClosedForm(Family::ExpStrip { a, k, s: curve })
                }
                other => {
                    return Err(parse_error(
                        e.line,
                        e.value_col,
                        format!("unknown family `{other}` (expected affine, expstrip or expaffine)"),
                    ))
                }
            }
        }
        (Some(_), Some(e)) => {
            return Err(parse_error(e.line, e.key_col, "give either `f(x,y)` or `family`, not both"))
        }
        (None, None) => return Err(parse_error(1, 1, "spec needs `f(x,y)` or `family`")),
    };
    Ok(FunctionSpec::new(body)
        .map_err(|e| parse_error(1, 1, e.to_string()))?
        .with_rotation(rotation))
}

/// Reads a grid from CSV with header `x,y,z`, rows ordered with `x` varying
/// fastest, on a rectangular lattice with uniform spacing.
pub fn parse_grid_csv<R: Read>(reader: R) -> Result<Grid> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_error(1, 1, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["x", "y", "z"] {
        return Err(parse_error(1, 1, "header must be `x,y,z`"));
    }
    let mut pts: Vec<(f64, f64, f64, usize)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(line, 1, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let mut vals = [0.0; 3];
        for (i, v) in vals.iter_mut().enumerate() {
            let field = rec.get(i).unwrap_or("");
            *v = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(line, i + 1, format!("row {line}: `{field}` is not a finite number")))?;
        }
        pts.push((vals[0], vals[1], vals[2], line));
    }
    if pts.len() < 4 {
        return Err(parse_error(1, 1, "grid needs at least 2x2 nodes"));
    }
    let y0 = pts[0].1;
    let nx = pts.iter().take_while(|p| p.1 == y0).count();
    if nx < 2 || pts.len() % nx != 0 {
        let bad = pts.get(nx).map_or(pts[pts.len() - 1].3, |p| p.3);
        return Err(parse_error(
            bad,
            1,
            format!("row {bad}: lattice is not rectangular ({} points, {nx} per row)", pts.len()),
        ));
    }
    let ny = pts.len() / nx;
    let (x0, hx) = (pts[0].0, pts[1].0 - pts[0].0);
    let hy = if ny > 1 { pts[nx].1 - y0 } else { 0.0 };
    if !(hx > 0.0 && hy > 0.0) {
        return Err(parse_error(pts[1].3, 1, "grid spacing must be positive"));
    }
    let tol = 1e-9;
    let mut values = Vec::with_capacity(pts.len());
    for (idx, &(x, y, z, line)) in pts.iter().enumerate() {
        let (ix, iy) = (idx % nx, idx / nx);
        let (ex, ey) = (x0 + hx * ix as f64, y0 + hy * iy as f64);
        if (x - ex).abs() > tol * (1.0 + ex.abs()) * (nx as f64) || (y - ey).abs() > tol * (1.0 + ey.abs()) * (ny as f64) {
            return Err(parse_error(
                line,
                1,
                format!("row {line}: ({x}, {y}) breaks the rectangular lattice, expected ({ex}, {ey})"),
            ));
        }
        values.push(z);
    }
    Grid::new(Vec2::new(x0, y0), Vec2::new(hx, hy), nx, ny, values)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Writes `theta,top,bottom,topSaturated,bottomSaturated`.
pub fn write_profile_csv<W: Write>(profile: &H3Profile, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theta", "top", "bottom", "topSaturated", "bottomSaturated"])
        .map_err(csv_error)?;
    for b in &profile.bins {
        w.write_record([
            b.theta.to_string(),
            b.top.to_string(),
            b.bottom.to_string(),
            b.top_saturated.to_string(),
            b.bottom_saturated.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `x,y,z` per sampled direction.
pub fn write_sample_csv<W: Write>(sample: &DirectionSample, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "z"]).map_err(csv_error)?;
    for d in &sample.directions {
        w.write_record([d.x().to_string(), d.y().to_string(), d.z().to_string()])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Occupancy raster over (azimuth, height): column from azimuth in
/// `[0, 2π)`, row 0 at height 1.
pub fn raster(sample: &DirectionSample, width: usize, height: usize) -> Vec<u8> {
    let mut px = vec![0u8; width * height];
    for d in &sample.directions {
        let col = ((d.azimuth() / TAU) * width as f64).floor() as usize;
        let row = (((1.0 - d.z()) / 2.0) * height as f64).floor() as usize;
        px[row.min(height - 1) * width + col.min(width - 1)] = 255;
    }
    px
}

/// Writes the raster as a plain-text grayscale image (PGM, `P2`).
pub fn write_raster<W: Write>(sample: &DirectionSample, width: usize, height: usize, mut out: W) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument("raster dimensions must be positive".into()));
    }
    let px = raster(sample, width, height);
    writeln!(out, "P2")?;
    writeln!(out, "{width} {height}")?;
    writeln!(out, "255")?;
    for row in px.chunks(width) {
        for chunk in row.chunks(16) {
            let line: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::Window;

    #[test]
    fn spec_file_expression() {
        let f = parse_spec_file("# test\nf(x, y) = exp(x) + y\nrotation_z = 0.5\n").unwrap();
        assert_eq!(f.rotation_z, 0.5);
        assert!(matches!(f.body, Body::Expression(_)));
    }

    #[test]
    fn spec_file_families() {
        let f = parse_spec_file("family = expaffine\na = 2\nb = 3\nd = -0.7\nk = 1.5\n").unwrap();
        assert_eq!(f.evaluate(0.0, 0.0).unwrap(), 5.0);
        let g = parse_spec_file("family = expstrip\na = 1\nk = 2\ns(y) = 2 + cos(y)\n").unwrap();
        assert_eq!(g.evaluate(0.0, 0.0).unwrap(), 4.0);
        let h = parse_spec_file("family = affine\nb = 1\n").unwrap();
        assert_eq!(h.evaluate(2.0, 5.0).unwrap(), 2.0);
    }

    #[test]
    fn spec_file_errors_carry_positions() {
        let err = parse_spec_file("family = expaffine\nb = 1\nd = 1\nk = 0\n").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 4,
                column: 5,
                message: "k must be nonzero".into()
            }
        );
        match parse_spec_file("f(x,y) = x\ncolour = red\n").unwrap_err() {
            Error::Parse { line: 2, column: 1, message } => assert!(message.contains("colour")),
            other => panic!("{other:?}"),
        }
        match parse_spec_file("f(x,y) = 1 + $\n").unwrap_err() {
            Error::Parse { line: 1, column: 14, .. } => {}
            other => panic!("{other:?}"),
        }
        assert!(parse_spec_file("f(x,y) = x\nf(x,y) = y\n").is_err());
        assert!(parse_spec_file("family = affine\nk = 1\n").is_err());
        assert!(parse_spec_file("family = cubic\n").is_err());
        assert!(parse_spec_file("just text\n").is_err());
    }

    fn grid_csv(rows: &[(f64, f64, f64)]) -> String {
        let mut s = String::from("x,y,z\n");
        for (x, y, z) in rows {
            s.push_str(&format!("{x},{y},{z}\n"));
        }
        s
    }

    #[test]
    fn grid_csv_round_trip() {
        let mut rows = Vec::new();
        for j in 0..3 {
            for i in 0..4 {
                let (x, y) = (i as f64 * 0.5, j as f64 - 1.0);
                rows.push((x, y, 1.0 + 2.0 * x - y));
            }
        }
        let g = parse_grid_csv(grid_csv(&rows).as_bytes()).unwrap();
        assert_eq!(g.dims(), (4, 3));
        let f = FunctionSpec::grid(g);
        assert_eq!(f.evaluate(1.0, 0.0).unwrap(), 3.0);
    }

    #[test]
    fn grid_csv_rejects_ragged_lattice() {
        let rows = vec![
            (0.0, 0.0, 0.0),
            (1.0, 0.0, 0.0),
            (0.0, 1.0, 0.0),
            (1.0, 1.0, 0.0),
            (0.0, 2.0, 0.0),
        ];
        match parse_grid_csv(grid_csv(&rows).as_bytes()).unwrap_err() {
            Error::Parse { message, .. } => assert!(message.contains("row"), "{message}"),
            other => panic!("{other:?}"),
        }
        let rows = vec![
            (0.0, 0.0, 0.0),
            (1.0, 0.0, 0.0),
            (0.0, 1.0, 0.0),
            (1.5, 1.0, 0.0),
        ];
        match parse_grid_csv(grid_csv(&rows).as_bytes()).unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 5);
                assert!(message.contains("row 5"));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_grid_csv("a,b,c\n1,2,3\n".as_bytes()).is_err());
    }

    #[test]
    fn raster_of_constant_is_equator() {
        let f = FunctionSpec::affine(0.0, 0.0, 0.0);
        let s = crate::direction::sample_direction_set(&f, &Window::square(1.0, 2), 100, 1).unwrap();
        let px = raster(&s, 720, 360);
        for (i, v) in px.iter().enumerate() {
            if *v != 0 {
                assert_eq!(i / 720, 180);
            }
        }
        let mut out = Vec::new();
        write_raster(&s, 720, 360, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("P2\n720 360\n255\n"));
        assert!(text.lines().all(|l| l.len() <= 70));
    }
}
