//! Plain-text tables for measured profiles and cascade kernels.
//!
//! Lines starting with `#` are comments; one optional non-numeric header
//! line is skipped; fields are separated by commas or whitespace. Times come
//! first. Row numbers in errors are 1-based file lines.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{RelayError, Result};
use crate::grid::{interp_clamped, PeriodicGrid};

use super::{DelayGrid, TemporalProfile};

fn ingestion(path: &Path, row: usize, reason: impl Into<String>) -> RelayError {
    RelayError::Ingestion {
        path: path.to_path_buf(),
        row,
        reason: reason.into(),
    }
}

/// Parses numeric rows of exactly `width` columns.
pub fn read_rows(path: &Path, width: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Err(_) if !header_seen && rows.is_empty() => {
                header_seen = true;
            }
            Err(e) => return Err(ingestion(path, line_no, format!("not a number: {e}"))),
            Ok(values) => {
                if values.len() != width {
                    return Err(ingestion(
                        path,
                        line_no,
                        format!("expected {width} columns, found {}", values.len()),
                    ));
                }
                if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
                    return Err(ingestion(path, line_no, format!("non-finite value {bad}")));
                }
                rows.push((line_no, values));
            }
        }
    }
    if rows.is_empty() {
        return Err(ingestion(path, 0, "no data rows"));
    }
    Ok(rows)
}

/// Loads `time_ps, intensity` samples within one period and resamples them
/// onto `grid`: periodic linear interpolation, averaged over each grid cell
/// when the table is finer than the grid.
pub fn load_profile(path: &Path, grid: PeriodicGrid) -> Result<TemporalProfile> {
    let rows = read_rows(path, 2)?;
    let mut prev = f64::NEG_INFINITY;
    for (line, v) in &rows {
        if v[0] <= prev {
            return Err(ingestion(path, *line, "times must be strictly increasing"));
        }
        if v[0] < 0.0 || v[0] >= grid.period {
            return Err(ingestion(
                path,
                *line,
                format!("time {} outside [0, {})", v[0], grid.period),
            ));
        }
        if v[1] < 0.0 {
            return Err(ingestion(path, *line, "negative intensity"));
        }
        prev = v[0];
    }
    let ts: Vec<f64> = rows.iter().map(|(_, v)| v[0]).collect();
    let ys: Vec<f64> = rows.iter().map(|(_, v)| v[1]).collect();
    let finest = ts
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(grid.period, f64::min);
    let sub = ((grid.dt / finest) - 1e-9).ceil().max(1.0) as usize;
    let samples = (0..grid.len)
        .map(|k| {
            let t0 = grid.time(k) - 0.5 * grid.dt;
            (0..sub)
                .map(|j| {
                    let t = t0 + (j as f64 + 0.5) * grid.dt / sub as f64;
                    interp_periodic_nonuniform(&ts, &ys, grid.period, t.rem_euclid(grid.period))
                })
                .sum::<f64>()
                / sub as f64
        })
        .collect();
    TemporalProfile::from_samples(samples, grid).map_err(|e| ingestion(path, 0, e.to_string()))
}

fn interp_periodic_nonuniform(ts: &[f64], ys: &[f64], period: f64, t: f64) -> f64 {
    let n = ts.len();
    if n == 1 {
        return ys[0];
    }
    let hi = ts.partition_point(|&x| x <= t);
    let (t0, y0, t1, y1) = if hi == 0 {
        (ts[n - 1] - period, ys[n - 1], ts[0], ys[0])
    } else if hi == n {
        (ts[n - 1], ys[n - 1], ts[0] + period, ys[0])
    } else {
        (ts[hi - 1], ys[hi - 1], ts[hi], ys[hi])
    };
    y0 + (y1 - y0) * (t - t0) / (t1 - t0)
}

pub fn write_profile(path: &Path, profile: &TemporalProfile) -> Result<()> {
    let g = profile.grid();
    let mut out = format!("# period_ps: {}\n# dt_ps: {}\ntime_ps,intensity\n", g.period, g.dt);
    for (k, v) in profile.samples().iter().enumerate() {
        writeln!(out, "{},{}", g.time(k), v).expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Loads a cascade kernel from `u_ps, delay_ps, value` rows on a
/// rectangular grid (delays varying fastest) and resamples it onto `grid`.
pub fn load_kernel(path: &Path, grid: PeriodicGrid) -> Result<DelayGrid> {
    let rows = read_rows(path, 3)?;
    let u0 = rows[0].1[0];
    let n_delay = rows.iter().take_while(|(_, v)| v[0] == u0).count();
    if rows.len() % n_delay != 0 {
        return Err(ingestion(path, rows.last().unwrap().0, "incomplete kernel row block"));
    }
    let n_u = rows.len() / n_delay;
    let delays: Vec<f64> = rows[..n_delay].iter().map(|(_, v)| v[1]).collect();
    let mut us = Vec::with_capacity(n_u);
    for b in 0..n_u {
        let block = &rows[b * n_delay..(b + 1) * n_delay];
        let u = block[0].1[0];
        if let Some(&u_prev) = us.last() {
            if u <= u_prev {
                return Err(ingestion(path, block[0].0, "u must be strictly increasing"));
            }
        }
        if u < 0.0 || u >= grid.period {
            return Err(ingestion(path, block[0].0, format!("u {u} outside the period")));
        }
        for ((line, v), d) in block.iter().zip(&delays) {
            if v[0] != u || v[1] != *d {
                return Err(ingestion(path, *line, "kernel rows are not on a rectangular grid"));
            }
            if v[2] < 0.0 {
                return Err(ingestion(path, *line, "negative kernel value"));
            }
        }
        us.push(u);
    }
    let step = if n_delay > 1 { delays[1] - delays[0] } else { grid.dt };
    for (j, w) in delays.windows(2).enumerate() {
        if ((w[1] - w[0]) - step).abs() > 1e-9 * step.abs().max(1.0) || step <= 0.0 {
            return Err(ingestion(path, rows[j + 1].0, "delays must be uniformly spaced"));
        }
    }
    if delays[0] < 0.0 {
        return Err(ingestion(path, rows[0].0, "delays must be >= 0"));
    }
    let value = |b: usize, j: usize| rows[b * n_delay + j].1[2];
    let exact = n_u == grid.len
        && (step - grid.dt).abs() < 1e-9
        && delays[0] == 0.0
        && us.iter().enumerate().all(|(k, &u)| (u - grid.time(k)).abs() < 1e-9);
    if exact {
        return Ok(DelayGrid::from_fn(grid, 0.0, n_delay, value));
    }
    // resample: linear in delay on each stored row, periodic linear in u
    let d_max = delays[n_delay - 1];
    let out_n = ((d_max / grid.dt).floor() as usize + 1).max(2);
    let per_row: Vec<Vec<f64>> = (0..n_u)
        .map(|b| {
            let row: Vec<f64> = (0..n_delay).map(|j| value(b, j)).collect();
            (0..out_n)
                .map(|j| interp_clamped(&row, delays[0], step, j as f64 * grid.dt))
                .collect()
        })
        .collect();
    Ok(DelayGrid::from_fn(grid, 0.0, out_n, |i, j| {
        let col: Vec<f64> = per_row.iter().map(|r| r[j]).collect();
        interp_periodic_nonuniform(&us, &col, grid.period, grid.time(i))
    }))
}

pub fn write_kernel(path: &Path, kernel: &DelayGrid) -> Result<()> {
    let g = kernel.grid();
    let mut out = format!(
        "# period_ps: {}\n# dt_ps: {}\nu_ps,delay_ps,value\n",
        g.period, g.dt
    );
    for i in 0..g.len {
        for j in 0..kernel.n_delay() {
            writeln!(out, "{},{},{}", g.time(i), kernel.delay(j), kernel.value(i, j))
                .expect("string write");
        }
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{make_cascade_kernel, make_gaussian_pulse};

    fn grid() -> PeriodicGrid {
        PeriodicGrid::new(4926.0, 8.0).unwrap()
    }

    #[test]
    fn profile_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        let p = make_gaussian_pulse(400.0, 1300.0, 4926.0, 8.0).unwrap();
        write_profile(&path, &p).unwrap();
        let q = load_profile(&path, grid()).unwrap();
        for (a, b) in p.samples().iter().zip(q.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        let p = make_gaussian_pulse(400.0, 1300.0, 4926.0, 8.0).unwrap();
        let k = make_cascade_kernel(&p, 100.0).unwrap();
        write_kernel(&path, &k).unwrap();
        let back = load_kernel(&path, grid()).unwrap();
        assert_eq!(back.n_delay(), k.n_delay());
        for i in (0..grid().len).step_by(7) {
            for j in 0..k.n_delay() {
                assert!((back.value(i, j) - k.value(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coarse_profile_is_resampled() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        fs::write(&path, "# coarse\n0 1\n1000 3\n3000 1\n").unwrap();
        let p = load_profile(&path, grid()).unwrap();
        assert!((p.mean() - 1.0).abs() < 1e-9);
        assert!((p.peak_time() - 1000.0).abs() <= 8.0);
    }

    #[test]
    fn constant_table_and_averaging_down() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flat.txt");
        fs::write(&path, "0 5.0\n2000 5.0\n4000 5.0\n").unwrap();
        let p = load_profile(&path, grid()).unwrap();
        assert!(p.samples().iter().all(|v| (v - 1.0).abs() < 1e-12));

        // alternating 8 ps samples average to a flat 16 ps profile
        let g16 = PeriodicGrid::new(4926.0, 16.0).unwrap();
        let fine = PeriodicGrid::new(4926.0, g16.dt / 2.0).unwrap();
        let mut text = String::new();
        for k in 0..fine.len {
            let v = if k % 2 == 0 { 1.0 } else { 3.0 };
            text.push_str(&format!("{} {}\n", fine.time(k), v));
        }
        fs::write(&path, text).unwrap();
        let p = load_profile(&path, g16).unwrap();
        assert!(p.samples().iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn errors_carry_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "time,value\n0,1\n# note\n10,abc\n").unwrap();
        match load_profile(&path, grid()) {
            Err(RelayError::Ingestion { row, .. }) => assert_eq!(row, 4),
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&path, "0,1\n10,2,3\n").unwrap();
        assert!(matches!(
            load_profile(&path, grid()),
            Err(RelayError::Ingestion { row: 2, .. })
        ));
        fs::write(&path, "0,1\n0,2\n").unwrap();
        assert!(matches!(
            load_profile(&path, grid()),
            Err(RelayError::Ingestion { row: 2, .. })
        ));
        fs::write(&path, "0,1\n10,-2\n").unwrap();
        assert!(load_profile(&path, grid()).is_err());
        fs::write(&path, "0,0,1\n0,8,1\n8,0,1\n").unwrap();
        assert!(matches!(
            load_kernel(&path, grid()),
            Err(RelayError::Ingestion { .. })
        ));
    }
}
