use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{RelayError, Result};

/// `cos(a)|H> + e^{ib} sin(a)|V>` with `a` in `[0, π/2]` and `b` in `[-π, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationState {
    pub a: f64,
    pub b: f64,
}

fn wrap_phase(b: f64) -> f64 {
    let w = (b + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

impl PolarizationState {
    pub const H: Self = Self { a: 0.0, b: 0.0 };
    pub const V: Self = Self { a: FRAC_PI_2, b: 0.0 };
    pub const D: Self = Self { a: FRAC_PI_4, b: 0.0 };
    pub const A: Self = Self { a: FRAC_PI_4, b: -PI };

    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(0.0..=FRAC_PI_2 + 1e-12).contains(&a) || !b.is_finite() {
            return Err(RelayError::invalid(
                "polarization.a",
                format!("polar angle must lie in [0, pi/2], got {a}"),
            ));
        }
        Ok(Self {
            a: a.min(FRAC_PI_2),
            b: wrap_phase(b),
        })
    }

    /// Looks up one of the four BB84 states by letter.
    pub fn named(name: &str) -> Option<Self> {
        match name.trim().to_ascii_uppercase().as_str() {
            "H" => Some(Self::H),
            "V" => Some(Self::V),
            "D" => Some(Self::D),
            "A" => Some(Self::A),
            _ => None,
        }
    }

    /// Letter of a BB84 state, if this is one.
    pub fn name(&self) -> Option<&'static str> {
        Self::bb84().into_iter().find(|(_, s)| s == self).map(|(n, _)| n)
    }

    pub fn bb84() -> [(&'static str, Self); 4] {
        [("H", Self::H), ("V", Self::V), ("D", Self::D), ("A", Self::A)]
    }

    /// State with `<self|other> = 0`.
    pub fn orthogonal(&self) -> Self {
        Self {
            a: FRAC_PI_2 - self.a,
            b: wrap_phase(self.b + PI),
        }
    }

    /// State the relay delivers for this input: `cos(a)|V> + e^{ib} sin(a)|H>`,
    /// written back in canonical form after removing the global phase `e^{ib}`.
    pub fn expected_output(&self) -> Self {
        Self {
            a: FRAC_PI_2 - self.a,
            b: wrap_phase(-self.b),
        }
    }

    /// `<self|other>` as (re, im).
    pub fn overlap(&self, other: &Self) -> (f64, f64) {
        let h = self.a.cos() * other.a.cos();
        let s = self.a.sin() * other.a.sin();
        let dphi = other.b - self.b;
        (h + s * dphi.cos(), s * dphi.sin())
    }

    pub fn fidelity_with(&self, other: &Self) -> f64 {
        let (re, im) = self.overlap(other);
        re * re + im * im
    }
}

impl std::fmt::Display for PolarizationState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.name() {
            Some(n) => f.write_str(n),
            None => write!(f, "a={},b={}", self.a, self.b),
        }
    }
}

impl std::str::FromStr for PolarizationState {
    type Err = RelayError;

    /// A BB84 letter or `a=<rad>,b=<rad>`, the forms [`Display`] writes.
    ///
    /// [`Display`]: std::fmt::Display
    fn from_str(s: &str) -> Result<Self> {
        if let Some(st) = Self::named(s) {
            return Ok(st);
        }
        let bad = || RelayError::invalid("polarization", format!("cannot parse `{s}`"));
        let (a, b) = s.trim().split_once(',').ok_or_else(bad)?;
        let num = |part: &str, key: &str| -> Result<f64> {
            part.trim().strip_prefix(key).and_then(|v| v.trim().parse().ok()).ok_or_else(bad)
        };
        Self::new(num(a, "a=")?, num(b, "b=")?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(x: &PolarizationState, y: &PolarizationState) -> bool {
        (x.fidelity_with(y) - 1.0).abs() < 1e-12
    }

    #[test]
    fn named_constants() {
        assert!(close(&PolarizationState::H.orthogonal(), &PolarizationState::V));
        assert!(close(&PolarizationState::D.orthogonal(), &PolarizationState::A));
        assert_eq!(PolarizationState::named("d"), Some(PolarizationState::D));
        assert_eq!(PolarizationState::named("x"), None);
        assert!(PolarizationState::new(2.0, 0.0).is_err());
    }

    #[test]
    fn relay_bit_flip() {
        assert!(close(&PolarizationState::H.expected_output(), &PolarizationState::V));
        assert!(close(&PolarizationState::V.expected_output(), &PolarizationState::H));
        assert!(close(&PolarizationState::D.expected_output(), &PolarizationState::D));
        assert!(close(&PolarizationState::A.expected_output(), &PolarizationState::A));
    }

    proptest! {
        #[test]
        fn orthogonal_has_zero_overlap(a in 0.0..FRAC_PI_2, b in -PI..PI) {
            let s = PolarizationState::new(a, b).unwrap();
            let (re, im) = s.overlap(&s.orthogonal());
            prop_assert!(re.hypot(im) < 1e-12);
        }

        #[test]
        fn orthogonal_twice_is_identity(a in 0.0..FRAC_PI_2, b in -PI..PI) {
            let s = PolarizationState::new(a, b).unwrap();
            let back = s.orthogonal().orthogonal();
            prop_assert!((s.fidelity_with(&back) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn expected_output_is_an_involution(a in 0.0..FRAC_PI_2, b in -PI..PI) {
            let s = PolarizationState::new(a, b).unwrap();
            let back = s.expected_output().expected_output();
            prop_assert!((s.fidelity_with(&back) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn text_form_round_trips() {
        for (n, st) in PolarizationState::bb84() {
            assert_eq!(st.to_string(), n);
            assert_eq!(n.parse::<PolarizationState>().unwrap(), st);
        }
        let st = PolarizationState::new(0.3, 1.1).unwrap();
        assert_eq!(st.to_string().parse::<PolarizationState>().unwrap(), st);
        assert!("Q".parse::<PolarizationState>().is_err());
        assert!("a=2,b=0".parse::<PolarizationState>().is_err());
    }
}
