use serde::{Deserialize, Serialize};

use crate::error::{RelayError, Result};
use crate::optics::PolarizationState;

/// Symmetric delay axis `tau_i = (i - half) * step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauAxis {
    pub half: usize,
    pub step: f64,
}

impl TauAxis {
    pub fn new(half_range_ps: f64, step_ps: f64) -> Result<Self> {
        if !(step_ps.is_finite() && step_ps > 0.0) {
            return Err(RelayError::invalid("engine.tau_step_ps", "must be > 0"));
        }
        if !(half_range_ps.is_finite() && half_range_ps >= 0.0) {
            return Err(RelayError::invalid("engine.tau_range_ps", "must be >= 0"));
        }
        Ok(Self {
            half: (half_range_ps / step_ps - 1e-9).ceil().max(0.0) as usize,
            step: step_ps,
        })
    }

    pub fn len(&self) -> usize {
        2 * self.half + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tau(&self, i: usize) -> f64 {
        (i as f64 - self.half as f64) * self.step
    }

    pub fn taus(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.tau(i)).collect()
    }

    /// Nearest grid index, if `tau` lies within half a step of the axis.
    pub fn index_of(&self, tau: f64) -> Option<usize> {
        let k = (tau / self.step).round() + self.half as f64;
        if k < 0.0 || k >= self.len() as f64 {
            None
        } else {
            Some(k as usize)
        }
    }

    pub fn extent(&self) -> f64 {
        self.half as f64 * self.step
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// The printed sum in units of `eta_B * eta_L * eta_X`.
    Raw,
    /// Divided by the product of the three detectors' mean rates, so that
    /// uncorrelated detections average to 1.
    #[default]
    UncorrelatedLimit,
}

impl Normalization {
    pub fn as_str(&self) -> &'static str {
        match self {
            Normalization::Raw => "raw",
            Normalization::UncorrelatedLimit => "uncorrelated-limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SurfaceMeta {
    pub label: String,
    pub input: Option<PolarizationState>,
    pub analyzer: Option<PolarizationState>,
    pub normalization: Option<Normalization>,
}

/// Values over `(tau2, tau3)`, row-major with `tau2` selecting the row.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSurface {
    axis: TauAxis,
    values: Vec<f64>,
    pub meta: SurfaceMeta,
}

impl CorrelationSurface {
    pub fn zeros(axis: TauAxis) -> Self {
        Self {
            axis,
            values: vec![0.0; axis.len() * axis.len()],
            meta: SurfaceMeta::default(),
        }
    }

    pub fn from_values(axis: TauAxis, values: Vec<f64>) -> Result<Self> {
        if values.len() != axis.len() * axis.len() {
            return Err(RelayError::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                axis.len(),
                axis.len()
            )));
        }
        Ok(Self {
            axis,
            values,
            meta: SurfaceMeta::default(),
        })
    }

    pub fn from_fn(axis: TauAxis, f: impl Fn(f64, f64) -> f64) -> Self {
        let taus = axis.taus();
        let mut values = Vec::with_capacity(taus.len() * taus.len());
        for &t2 in &taus {
            for &t3 in &taus {
                values.push(f(t2, t3));
            }
        }
        Self {
            axis,
            values,
            meta: SurfaceMeta::default(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.meta.label = label.into();
        self
    }

    pub fn axis(&self) -> TauAxis {
        self.axis
    }

    pub fn n(&self) -> usize {
        self.axis.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i2: usize, i3: usize) -> f64 {
        self.values[i2 * self.n() + i3]
    }

    pub fn row(&self, i2: usize) -> &[f64] {
        let n = self.n();
        &self.values[i2 * n..(i2 + 1) * n]
    }

    /// Value at the grid point nearest to `(tau2, tau3)`.
    pub fn at(&self, tau2: f64, tau3: f64) -> Option<f64> {
        Some(self.get(self.axis.index_of(tau2)?, self.axis.index_of(tau3)?))
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.axis.half == other.axis.half && (self.axis.step - other.axis.step).abs() < 1e-12
    }

    pub fn ensure_same_grid(&self, other: &Self) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(RelayError::GridMismatch(format!(
                "surfaces on different grids ({} x {} ps vs {} x {} ps)",
                self.n(),
                self.axis.step,
                other.n(),
                other.axis.step
            )))
        }
    }

    /// Swaps the roles of `tau2` and `tau3`.
    pub fn transposed(&self) -> Self {
        let n = self.n();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[j * n + i] = self.values[i * n + j];
            }
        }
        Self {
            axis: self.axis,
            values,
            meta: self.meta.clone(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    /// `self += weight * other`, reading `other` transposed if asked.
    pub fn add_scaled(&mut self, other: &Self, weight: f64, transposed: bool) {
        debug_assert!(self.same_grid(other));
        if weight == 0.0 {
            return;
        }
        let n = self.n();
        if transposed {
            for i in 0..n {
                for j in 0..n {
                    self.values[i * n + j] += weight * other.values[j * n + i];
                }
            }
        } else {
            for (a, b) in self.values.iter_mut().zip(&other.values) {
                *a += weight * b;
            }
        }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `(tau2, tau3, value)` of the first maximum in row-major order.
    pub fn argmax(&self) -> (f64, f64, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (k, &v) in self.values.iter().enumerate() {
            if v > best.1 {
                best = (k, v);
            }
        }
        let n = self.n();
        (self.axis.tau(best.0 / n), self.axis.tau(best.0 % n), best.1)
    }

    /// Values along `tau2 = tau3`.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.get(i, i)).collect()
    }
}
