use super::surface::CorrelationSurface;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use crate::error::{RelayError, Result};

/// Cell offsets of a box of `k` cells centered on zero.
fn offsets(k: usize) -> std::ops::RangeInclusive<isize> {
    let lo = -((k / 2) as isize);
    lo..=(lo + k as isize - 1)
}

fn cells(width_ps: f64, step: f64, key: &'static str) -> Result<usize> {
    let k = width_ps / step;
    if !(k.is_finite() && k >= 1.0 - 1e-9) || (k - k.round()).abs() > 1e-6 {
        return Err(RelayError::invalid(
            key,
            format!("{width_ps} ps is not a positive multiple of the {step} ps grid step"),
        ));
    }
    Ok(k.round() as usize)
}

/// Axes spanned by a coincidence window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowShape {
    /// Widths apply to `tau2` and `tau3`.
    Delays,
    /// Widths apply to `tau1 = tau2 - tau3` and `tau2`, a sheared box on the grid.
    #[default]
    Sheared,
}

impl WindowShape {
    pub fn as_str(self) -> &'static str {
        match self {
            WindowShape::Delays => "delays",
            WindowShape::Sheared => "sheared",
        }
    }
}

/// Coincidence window: two widths in ps and the axes they span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Window {
    pub first_ps: f64,
    pub second_ps: f64,
    pub shape: WindowShape,
}

impl Default for Window {
    fn default() -> Self {
        Window { first_ps: 32.0, second_ps: 112.0, shape: WindowShape::Sheared }
    }
}

impl Window {
    /// Both widths must be whole multiples of the delay step.
    pub fn validate_for(&self, step_ps: f64) -> Result<()> {
        cells(self.first_ps, step_ps, "window.first_ps")?;
        cells(self.second_ps, step_ps, "window.second_ps")?;
        Ok(())
    }

    pub fn apply(&self, surface: &CorrelationSurface) -> Result<CorrelationSurface> {
        self.validate_for(surface.axis().step)?;
        match self.shape {
            WindowShape::Delays => integrate_window(surface, self.first_ps, self.second_ps),
            WindowShape::Sheared => integrate_window_sheared(surface, self.first_ps, self.second_ps),
        }
    }
}

fn box_mean(
    surface: &CorrelationSurface,
    k1: usize,
    k2: usize,
    cell: impl Fn(isize, isize) -> (isize, isize) + Sync,
) -> Result<CorrelationSurface> {
    let n = surface.n();
    if k1 > n || k2 > n {
        return Err(RelayError::invalid("window", format!("window exceeds the {n}-cell grid")));
    }
    let ni = n as isize;
    let src = surface.values();
    let mut out = surface.clone();
    out.values_mut().par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            let (mut s, mut c) = (0.0, 0usize);
            for o1 in offsets(k1) {
                for o2 in offsets(k2) {
                    let (di, dj) = cell(o1, o2);
                    let (a, b) = (i as isize + di, j as isize + dj);
                    if a >= 0 && a < ni && b >= 0 && b < ni {
                        s += src[a as usize * n + b as usize];
                        c += 1;
                    }
                }
            }
            *v = s / c as f64;
        }
    });
    Ok(out)
}

/// Box mean over `w2` ps along `tau2` and `w3` ps along `tau3`. Boxes
/// reaching past the edge average over the cells that exist.
pub fn integrate_window(
    surface: &CorrelationSurface,
    w2_ps: f64,
    w3_ps: f64,
) -> Result<CorrelationSurface> {
    let step = surface.axis().step;
    let (k2, k3) = (cells(w2_ps, step, "window.w2_ps")?, cells(w3_ps, step, "window.w3_ps")?);
    box_mean(surface, k2, k3, |o2, o3| (o2, o3))
}

/// Box mean over `w1` ps along `tau1` and `w2` ps along `tau2`, holding
/// the other delay fixed: a cell offset (o1, o2) reads `tau2 + o2` and
/// `tau3 + o2 - o1`.
pub fn integrate_window_sheared(
    surface: &CorrelationSurface,
    w1_ps: f64,
    w2_ps: f64,
) -> Result<CorrelationSurface> {
    let step = surface.axis().step;
    let (k1, k2) = (cells(w1_ps, step, "window.w1_ps")?, cells(w2_ps, step, "window.w2_ps")?);
    box_mean(surface, k1, k2, |o1, o2| (o2, o2 - o1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::surface::TauAxis;

    #[test]
    fn single_cell_window_is_identity() {
        let axis = TauAxis::new(64.0, 16.0).unwrap();
        let s = CorrelationSurface::from_fn(axis, |a, b| a * a - b);
        assert_eq!(integrate_window(&s, 16.0, 16.0).unwrap(), s);
    }

    #[test]
    fn constant_stays_constant() {
        let axis = TauAxis::new(320.0, 16.0).unwrap();
        let s = CorrelationSurface::from_fn(axis, |_, _| 2.5);
        let w = integrate_window(&s, 32.0, 112.0).unwrap();
        assert!(w.values().iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn box_mean_in_the_interior() {
        let axis = TauAxis::new(320.0, 16.0).unwrap();
        let s = CorrelationSurface::from_fn(axis, |a, b| a + 3.0 * b);
        let w = integrate_window(&s, 32.0, 112.0).unwrap();
        // 2 cells along tau2 cover offsets -1..0, 7 along tau3 cover -3..3
        assert!((w.at(0.0, 0.0).unwrap() - (-8.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_windows() {
        let axis = TauAxis::new(32.0, 16.0).unwrap();
        let s = CorrelationSurface::zeros(axis);
        assert!(integrate_window(&s, 20.0, 16.0).is_err());
        assert!(integrate_window(&s, 16.0, 0.0).is_err());
        assert!(integrate_window(&s, 16.0, 160.0).is_err());
        assert!(integrate_window_sheared(&s, 20.0, 16.0).is_err());
    }

    #[test]
    fn sheared_box_follows_tau1() {
        let axis = TauAxis::new(320.0, 16.0).unwrap();
        // depends on tau1 only: averaging along tau2 at fixed tau1 changes nothing
        let s = CorrelationSurface::from_fn(axis, |a, b| (a - b).powi(2));
        let w = integrate_window_sheared(&s, 16.0, 112.0).unwrap();
        assert!((w.at(0.0, 0.0).unwrap()).abs() < 1e-12);
        assert!((w.at(32.0, 0.0).unwrap() - 1024.0).abs() < 1e-9);
        // two tau1 cells at offsets -1 and 0 mix tau1 = 0 and tau1 = 16
        let w = integrate_window_sheared(&s, 32.0, 16.0).unwrap();
        assert!((w.at(0.0, 0.0).unwrap() - 128.0).abs() < 1e-9);
    }

    #[test]
    fn default_window_is_sheared_and_preserves_constants() {
        let axis = TauAxis::new(320.0, 16.0).unwrap();
        let s = CorrelationSurface::from_fn(axis, |_, _| 1.5);
        let w = Window::default().apply(&s).unwrap();
        assert!(w.values().iter().all(|v| (v - 1.5).abs() < 1e-12));
    }
}
