//! Delimited text for surfaces and series, JSON for summaries.
//!
//! A surface file starts with `# key: value` comment lines, then a header
//! row whose first cell is [`SURFACE_CORNER`] followed by the `tau3`
//! values, then one row per `tau2`. Undefined cells are written as `NaN`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::engine::{CorrelationSurface, Normalization, SurfaceMeta, TauAxis, Window};
use crate::error::{RelayError, Result};

pub const SURFACE_CORNER: &str = "tau2_ps\\tau3_ps";

/// Writes a surface; `extra` comments follow the surface metadata.
pub fn write_surface(mut w: impl Write, s: &CorrelationSurface, extra: &[(&str, String)]) -> Result<()> {
    let m = &s.meta;
    if !m.label.is_empty() {
        writeln!(w, "# label: {}", m.label)?;
    }
    if let Some(i) = m.input {
        writeln!(w, "# input: {i}")?;
    }
    if let Some(a) = m.analyzer {
        writeln!(w, "# analyzer: {a}")?;
    }
    if let Some(n) = m.normalization {
        writeln!(w, "# normalization: {}", n.as_str())?;
    }
    for (k, v) in extra {
        writeln!(w, "# {k}: {v}")?;
    }
    let axis = s.axis();
    let taus = axis.taus();
    write!(w, "{SURFACE_CORNER}")?;
    for t in &taus {
        write!(w, ",{t}")?;
    }
    writeln!(w)?;
    for (i, t2) in taus.iter().enumerate() {
        write!(w, "{t2}")?;
        for v in s.row(i) {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn save_surface(path: &Path, s: &CorrelationSurface, extra: &[(&str, String)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_surface(&mut w, s, extra)?;
    w.flush()?;
    Ok(())
}

/// A surface read back from disk with all of its comment entries.
#[derive(Debug, Clone)]
pub struct SurfaceFile {
    pub surface: CorrelationSurface,
    pub comments: BTreeMap<String, String>,
}

impl SurfaceFile {
    /// A numeric comment entry.
    pub fn number(&self, key: &str) -> Option<f64> {
        self.comments.get(key)?.parse().ok()
    }
}

pub fn load_surface(path: &Path) -> Result<SurfaceFile> {
    let err = |row: usize, reason: String| RelayError::Ingestion {
        path: path.to_path_buf(),
        row,
        reason,
    };
    let reader = BufReader::new(File::open(path)?);
    let mut comments = BTreeMap::new();
    let mut taus: Option<Vec<f64>> = None;
    let mut values = Vec::new();
    let mut rows = 0;
    for (k, line) in reader.lines().enumerate() {
        let row = k + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if let Some((key, v)) = c.split_once(':') {
                comments.insert(key.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        let mut cells = line.split(',');
        let first = cells.next().unwrap_or_default().trim();
        let parse = |c: &str| c.trim().parse::<f64>().map_err(|_| err(row, format!("`{}` is not a number", c.trim())));
        match &taus {
            None => {
                if first != SURFACE_CORNER {
                    return Err(err(row, format!("expected the `{SURFACE_CORNER}` header")));
                }
                taus = Some(cells.map(parse).collect::<Result<_>>()?);
            }
            Some(t) => {
                let t2 = parse(first)?;
                let expect = t.get(rows).copied().ok_or_else(|| err(row, "more rows than columns".into()))?;
                if (t2 - expect).abs() > 1e-6 {
                    return Err(err(row, format!("row delay {t2} does not match column delay {expect}")));
                }
                let before = values.len();
                for c in cells {
                    values.push(parse(c)?);
                }
                if values.len() - before != t.len() {
                    return Err(err(row, format!("expected {} values, found {}", t.len(), values.len() - before)));
                }
                rows += 1;
            }
        }
    }
    let taus = taus.ok_or_else(|| err(0, "no header row".into()))?;
    if taus.len() < 3 || taus.len() % 2 == 0 || rows != taus.len() {
        return Err(err(0, "the grid must be square with an odd number of delays".into()));
    }
    let half = taus.len() / 2;
    let axis = TauAxis::new(taus[taus.len() - 1], taus[half + 1] - taus[half])?;
    if axis.len() != taus.len() || taus.iter().enumerate().any(|(i, &t)| (t - axis.tau(i)).abs() > 1e-6) {
        return Err(err(0, "delays must be evenly spaced and symmetric about zero".into()));
    }
    let mut surface = CorrelationSurface::from_values(axis, values)?;
    surface.meta = SurfaceMeta {
        label: comments.get("label").cloned().unwrap_or_default(),
        input: comments.get("input").and_then(|s| s.parse().ok()),
        analyzer: comments.get("analyzer").and_then(|s| s.parse().ok()),
        normalization: comments.get("normalization").and_then(|s| match s.as_str() {
            "raw" => Some(Normalization::Raw),
            "uncorrelated-limit" => Some(Normalization::UncorrelatedLimit),
            _ => None,
        }),
    };
    Ok(SurfaceFile { surface, comments })
}

/// Writes equal-length named columns.
pub fn write_series(mut w: impl Write, columns: &[(&str, &[f64])], comments: &[(&str, String)]) -> Result<()> {
    let n = columns.first().map_or(0, |c| c.1.len());
    if columns.iter().any(|c| c.1.len() != n) {
        return Err(RelayError::invalid("series", "columns differ in length"));
    }
    for (k, v) in comments {
        writeln!(w, "# {k}: {v}")?;
    }
    let names: Vec<&str> = columns.iter().map(|c| c.0).collect();
    writeln!(w, "{}", names.join(","))?;
    for i in 0..n {
        let row: Vec<String> = columns.iter().map(|c| c.1[i].to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn save_series(path: &Path, columns: &[(&str, &[f64])], comments: &[(&str, String)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_series(&mut w, columns, comments)?;
    w.flush()?;
    Ok(())
}

/// Writes a rectangular table: `corner` and the column values, then one row
/// per entry of `rows`.
pub fn save_grid(path: &Path, corner: &str, rows: &[f64], cols: &[f64], values: &[f64]) -> Result<()> {
    if values.len() != rows.len() * cols.len() {
        return Err(RelayError::invalid("grid", "values do not fill the table"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "{corner}")?;
    for c in cols {
        write!(w, ",{c}")?;
    }
    writeln!(w)?;
    for (r, chunk) in rows.iter().zip(values.chunks(cols.len().max(1))) {
        write!(w, "{r}")?;
        for v in chunk {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn save_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceSummary {
    pub label: String,
    pub input: Option<String>,
    pub analyzer: Option<String>,
    pub normalization: Option<String>,
    pub peak: f64,
    pub peak_tau2_ps: f64,
    pub peak_tau3_ps: f64,
    pub window: Option<Window>,
}

pub fn surface_summary(s: &CorrelationSurface, window: Option<&Window>) -> SurfaceSummary {
    let (t2, t3, peak) = s.argmax();
    SurfaceSummary {
        label: s.meta.label.clone(),
        input: s.meta.input.map(|p| p.to_string()),
        analyzer: s.meta.analyzer.map(|p| p.to_string()),
        normalization: s.meta.normalization.map(|n| n.as_str().to_string()),
        peak,
        peak_tau2_ps: t2,
        peak_tau3_ps: t3,
        window: window.copied(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::PolarizationState;

    fn surface() -> CorrelationSurface {
        let axis = TauAxis::new(32.0, 16.0).unwrap();
        let mut s = CorrelationSurface::from_fn(axis, |a, b| 1.0 + a * 0.01 - b * b * 1e-4 + 1.0 / 3.0);
        s.meta = SurfaceMeta {
            label: "g3".into(),
            input: Some(PolarizationState::D),
            analyzer: Some(PolarizationState::new(0.3, 1.1).unwrap()),
            normalization: Some(Normalization::UncorrelatedLimit),
        };
        s
    }

    #[test]
    fn surfaces_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = surface();
        save_surface(&path, &s, &[("plateau", "2.5".into())]).unwrap();
        let back = load_surface(&path).unwrap();
        assert_eq!(back.surface, s);
        assert_eq!(back.number("plateau"), Some(2.5));
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# label: g3\n# input: D\n"));
        assert!(text.contains("tau2_ps\\tau3_ps,-32,-16,0,16,32\n"));
    }

    #[test]
    fn undefined_cells_survive_as_nan() {
        let axis = TauAxis::new(16.0, 16.0).unwrap();
        let s = CorrelationSurface::from_values(axis, vec![f64::NAN, 1.0, 2.0, 3.0, f64::NAN, 5.0, 6.0, 7.0, 8.0]).unwrap();
        let mut buf = Vec::new();
        write_surface(&mut buf, &s, &[]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        std::fs::write(&path, &buf).unwrap();
        let back = load_surface(&path).unwrap().surface;
        assert!(back.get(0, 0).is_nan() && back.get(1, 1).is_nan());
        assert_eq!(back.get(2, 2), 8.0);
    }

    #[test]
    fn malformed_files_report_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "# label: x\ntau2_ps\\tau3_ps,-16,0,16\n-16,1,2,3\n0,1,oops,3\n16,1,2,3\n").unwrap();
        match load_surface(&path) {
            Err(RelayError::Ingestion { row, .. }) => assert_eq!(row, 4),
            other => panic!("{other:?}"),
        }
        std::fs::write(&path, "tau2_ps\\tau3_ps,-16,0,16\n-16,1,2,3\n0,1,2\n").unwrap();
        assert!(matches!(load_surface(&path), Err(RelayError::Ingestion { row: 3, .. })));
        std::fs::write(&path, "1,2,3\n").unwrap();
        assert!(load_surface(&path).is_err());
    }

    #[test]
    fn series_need_equal_columns() {
        let mut buf = Vec::new();
        write_series(&mut buf, &[("tau_ps", &[0.0, 16.0]), ("s", &[2.5, 2.4])], &[("unit", "none".into())]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# unit: none\ntau_ps,s\n0,2.5\n16,2.4\n");
        assert!(write_series(Vec::new(), &[("a", &[0.0]), ("b", &[])], &[]).is_err());
    }

    #[test]
    fn grids_are_rectangular() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        save_grid(&path, "w\\d", &[1.0, 2.0], &[10.0, 20.0, 30.0], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "w\\d,10,20,30\n1,1,2,3\n2,4,5,6\n");
        assert!(save_grid(&path, "x", &[1.0], &[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn summary_points_at_the_peak() {
        let s = surface();
        let sum = surface_summary(&s, Some(&Window::default()));
        assert_eq!((sum.peak_tau2_ps, sum.peak_tau3_ps), (32.0, 0.0));
        assert_eq!(sum.input.as_deref(), Some("D"));
    }
}
