//! Photon-field ingredients: intensity profiles, decoherence, polarization
//! states, and the pair-source and laser models built from them.

mod polarization;
mod profile;
mod pulse;
mod source;
pub mod table;

pub use polarization::PolarizationState;
pub use profile::{make_gaussian_pulse, TemporalProfile};
pub use pulse::{GaussianPulse, PulseShape, PulseShapeRegistry, TabulatedPulse};
pub use source::{
    make_cascade_biphoton, make_cascade_kernel, overlap_reference, DelayGrid, LaserModel,
    PairKernel, SourceModel, SourceParams, DEFAULT_DOUBLE_PAIR_PROB, DEFAULT_ENTANGLED_FRACTION,
};

use crate::error::{ensure_positive, Result};

/// Reduced Planck constant in µeV·ps.
pub const HBAR_UEV_PS: f64 = 658.212;

/// Converts an energy in µeV to an angular frequency in rad/ps.
pub fn energy_to_angular_rate(energy_uev: f64) -> f64 {
    energy_uev / HBAR_UEV_PS
}

/// Phase-averaged first-order coherence `exp(-|delta|/coherence)` of a field
/// with Lorentzian phase diffusion.
pub fn decoherence_envelope(delta_ps: f64, coherence_ps: f64) -> Result<f64> {
    ensure_positive("coherence_time_ps", coherence_ps)?;
    Ok((-delta_ps.abs() / coherence_ps).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_values() {
        assert_eq!(decoherence_envelope(0.0, 3.0).unwrap(), 1.0);
        let e = decoherence_envelope(141.6, 141.6).unwrap();
        assert!((e - (-1.0f64).exp()).abs() < 1e-12);
        assert!((e - 0.3679).abs() < 1e-4);
        let sym = decoherence_envelope(-100.0, 200.0).unwrap();
        assert!((sym - (-0.5f64).exp()).abs() < 1e-12);
        assert!(decoherence_envelope(1.0, 0.0).is_err());
        assert!(decoherence_envelope(1.0, -2.0).is_err());
    }

    #[test]
    fn envelope_is_monotone_and_one_only_at_zero() {
        let mut last = 1.0;
        for k in 1..200 {
            let e = decoherence_envelope(k as f64 * 3.7, 141.6).unwrap();
            assert!(e < last && e < 1.0);
            last = e;
        }
    }

    #[test]
    fn energy_conversion() {
        assert_eq!(energy_to_angular_rate(0.0), 0.0);
        assert!((energy_to_angular_rate(658.212) - 1.0).abs() < 1e-12);
        // 4.2 / 658.212 evaluated independently
        assert!((energy_to_angular_rate(4.2) - 6.380922e-3).abs() < 1e-8);
        assert!((energy_to_angular_rate(1.0) - 0.0015193).abs() < 1e-7);
    }
}
