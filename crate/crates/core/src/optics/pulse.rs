use std::sync::Arc;

use crate::error::{RelayError, Result};
use crate::grid::PeriodicGrid;

use super::profile::gaussian_on_grid;
use super::TemporalProfile;

/// A laser envelope family, selected by name from a [`PulseShapeRegistry`].
pub trait PulseShape: Send + Sync {
    fn name(&self) -> &str;

    /// Mean-normalized envelope with its maximum at `center_ps`.
    fn envelope(&self, grid: PeriodicGrid, fwhm_ps: f64, center_ps: f64)
        -> Result<TemporalProfile>;
}

pub struct GaussianPulse;

impl PulseShape for GaussianPulse {
    fn name(&self) -> &str {
        "gaussian"
    }

    fn envelope(
        &self,
        grid: PeriodicGrid,
        fwhm_ps: f64,
        center_ps: f64,
    ) -> Result<TemporalProfile> {
        crate::error::ensure_positive("laser.fwhm_ps", fwhm_ps)?;
        gaussian_on_grid(grid, fwhm_ps, center_ps)
    }
}

/// A measured envelope; the width argument is ignored and the table's own
/// peak is moved to the requested center.
pub struct TabulatedPulse {
    profile: TemporalProfile,
}

impl TabulatedPulse {
    pub fn new(profile: TemporalProfile) -> Self {
        Self { profile }
    }
}

impl PulseShape for TabulatedPulse {
    fn name(&self) -> &str {
        "tabulated"
    }

    fn envelope(
        &self,
        grid: PeriodicGrid,
        _fwhm_ps: f64,
        center_ps: f64,
    ) -> Result<TemporalProfile> {
        if !self.profile.grid().same_as(&grid) {
            return Err(RelayError::GridMismatch(
                "tabulated laser profile was resampled onto a different grid".into(),
            ));
        }
        Ok(self.profile.shifted(center_ps - self.profile.peak_time()))
    }
}

#[derive(Clone)]
pub struct PulseShapeRegistry {
    shapes: Vec<Arc<dyn PulseShape>>,
}

impl PulseShapeRegistry {
    pub fn empty() -> Self {
        Self { shapes: Vec::new() }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(GaussianPulse));
        r
    }

    /// Adds a shape, replacing any previous entry with the same name.
    pub fn register(&mut self, shape: Arc<dyn PulseShape>) {
        self.shapes.retain(|s| s.name() != shape.name());
        self.shapes.push(shape);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn PulseShape>> {
        self.shapes
            .iter()
            .find(|s| s.name() == name)
            .cloned()
            .ok_or_else(|| RelayError::UnknownStrategy {
                kind: "pulse shape",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&str> {
        self.shapes.iter().map(|s| s.name()).collect()
    }
}

impl Default for PulseShapeRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}
