//! The object/probe joint measurement scheme.
//!
//! The object input `α|+⟩ + β|−⟩` is entangled with a probe into
//! [`final_state`], after which spin components along `o = (θ_o, φ_o)` and
//! `p = (θ_p, φ_p)` are measured. [`four_effects`] gives the closed-form
//! object effects reproducing the four outcome-pair probabilities, and
//! [`oracle_probability`] computes the same probabilities directly in the
//! two-qubit space.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::qubit::{
    random_pure_state, reduce_azimuth, tensor_expectation, Direction, Effect, QubitState, Sign,
    TwoQubitState, VALIDATION_TOL,
};
use crate::{Error, Result};

/// The five angles of the measurement configuration, in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub theta_o: f64,
    pub phi_o: f64,
    pub theta_p: f64,
    pub phi_p: f64,
    pub phi: f64,
}

impl SchemeParams {
    /// Validates the polar angles and reduces the azimuths mod 2π.
    pub fn new(theta_o: f64, phi_o: f64, theta_p: f64, phi_p: f64, phi: f64) -> Result<Self> {
        let all = [theta_o, phi_o, theta_p, phi_p, phi];
        if all.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "angles must be finite, got {all:?}"
            )));
        }
        for (name, t) in [("theta_o", theta_o), ("theta_p", theta_p)] {
            if !(0.0..=PI).contains(&t) {
                return Err(Error::InvalidParams(format!(
                    "{name} = {t} outside [0, pi]"
                )));
            }
        }
        Ok(Self {
            theta_o,
            phi_o: reduce_azimuth(phi_o),
            theta_p,
            phi_p: reduce_azimuth(phi_p),
            phi: reduce_azimuth(phi),
        })
    }

    pub fn object_direction(&self) -> Direction {
        Direction::new(self.theta_o, self.phi_o).expect("validated in SchemeParams::new")
    }

    pub fn probe_direction(&self) -> Direction {
        Direction::new(self.theta_p, self.phi_p).expect("validated in SchemeParams::new")
    }
}

/// Trigonometric coefficients of the four effects.
#[allow(non_snake_case)]
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedCoefficients {
    pub A: f64,
    pub B: f64,
    pub W: f64,
    pub X: f64,
    pub Y: f64,
    pub Z: f64,
    pub N1: f64,
    pub N2: f64,
}

impl DerivedCoefficients {
    /// `|N| = √(N1² + N2²)`.
    pub fn n_norm(&self) -> f64 {
        self.N1.hypot(self.N2)
    }
}

pub fn derived_coefficients(p: &SchemeParams) -> DerivedCoefficients {
    let (s_o, c_o) = p.theta_o.sin_cos();
    let (s_p, c_p) = p.theta_p.sin_cos();
    let (s_op, c_op) = (p.phi_o + p.phi).sin_cos();
    let (x, w) = (p.phi - p.phi_p).sin_cos();
    let a = -s_o * c_op;
    let b = c_p;
    let y = c_o * s_p;
    let z = s_o * s_op * s_p;
    DerivedCoefficients {
        A: a,
        B: b,
        W: w,
        X: x,
        Y: y,
        Z: z,
        N1: w * y + x * z,
        N2: -x * y + w * z,
    }
}

/// `|Ψ_f⟩ = [α(|+⟩ − e^{−iφ}|−⟩)|+⟩ + β(e^{iφ}|+⟩ + |−⟩)|−⟩]/√2`.
pub fn final_state(alpha: Complex64, beta: Complex64, phi: f64) -> Result<TwoQubitState> {
    QubitState::pure(alpha, beta)?;
    let k = FRAC_1_SQRT_2;
    let e_plus = Complex64::from_polar(1.0, phi);
    let e_minus = Complex64::from_polar(1.0, -phi);
    TwoQubitState::new([alpha * k, beta * e_plus * k, -alpha * e_minus * k, beta * k])
}

/// Effects for the outcome pairs (object sign, probe sign).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourOutcomePovm {
    pub f_pp: Effect,
    pub f_pm: Effect,
    pub f_mp: Effect,
    pub f_mm: Effect,
}

impl FourOutcomePovm {
    /// Closed-form effects for a given coefficient set.
    pub fn from_coefficients(c: &DerivedCoefficients) -> Self {
        let ab = c.A * c.B;
        let q = |e: Effect| e.scale(0.25);
        Self {
            f_pp: q(Effect::new(1.0 + ab, [c.N1, c.N2, c.A + c.B])),
            f_pm: q(Effect::new(1.0 - ab, [-c.N1, -c.N2, c.A - c.B])),
            f_mp: q(Effect::new(1.0 - ab, [-c.N1, -c.N2, -(c.A - c.B)])),
            f_mm: q(Effect::new(1.0 + ab, [c.N1, c.N2, -(c.A + c.B)])),
        }
    }

    pub fn effect(&self, object: Sign, probe: Sign) -> &Effect {
        match (object, probe) {
            (Sign::Plus, Sign::Plus) => &self.f_pp,
            (Sign::Plus, Sign::Minus) => &self.f_pm,
            (Sign::Minus, Sign::Plus) => &self.f_mp,
            (Sign::Minus, Sign::Minus) => &self.f_mm,
        }
    }

    /// Effects in the fixed outcome order `++, +−, −+, −−`.
    pub fn effects(&self) -> [Effect; 4] {
        [self.f_pp, self.f_pm, self.f_mp, self.f_mm]
    }

    pub fn total(&self) -> Effect {
        self.f_pp + self.f_pm + self.f_mp + self.f_mm
    }

    /// Checks positivity of every effect and completeness within 1e-12.
    pub fn validate(&self) -> Result<()> {
        for e in self.effects() {
            e.validate()?;
        }
        let dev = self.total().max_abs_diff(&Effect::identity());
        if dev > VALIDATION_TOL {
            return Err(Error::InvalidPovm(format!(
                "effects sum deviates from identity by {dev:e}"
            )));
        }
        Ok(())
    }

    /// Outcome probabilities in the fixed order `++, +−, −+, −−`.
    pub fn probabilities(&self, state: &QubitState) -> Result<[f64; 4]> {
        let e = self.effects();
        Ok([
            e[0].expectation(state)?,
            e[1].expectation(state)?,
            e[2].expectation(state)?,
            e[3].expectation(state)?,
        ])
    }
}

pub fn four_effects(p: &SchemeParams) -> FourOutcomePovm {
    FourOutcomePovm::from_coefficients(&derived_coefficients(p))
}

/// `⟨Ψ_f| P^o ⊗ P^p |Ψ_f⟩` for a pure input state.
pub fn oracle_probability(
    p: &SchemeParams,
    state: &QubitState,
    sign_o: Sign,
    sign_p: Sign,
) -> Result<f64> {
    let (alpha, beta) = state
        .amplitudes()
        .ok_or_else(|| Error::InvalidState("oracle requires a pure input state".to_string()))?;
    let psi = final_state(alpha, beta, p.phi)?;
    tensor_expectation(
        &psi,
        sign_o,
        &p.object_direction(),
        sign_p,
        &p.probe_direction(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_states: usize,
    pub max_abs_deviation: f64,
}

/// Compares closed-form effect expectations against the oracle on
/// `n_states` Haar-random inputs drawn from a ChaCha8 stream seeded with
/// `seed`.
pub fn validate_scheme(p: &SchemeParams, n_states: usize, seed: u64) -> Result<ValidationReport> {
    if n_states == 0 {
        return Err(Error::InvalidParams("n_states must be at least 1".into()));
    }
    let povm = four_effects(p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_dev = 0.0f64;
    for _ in 0..n_states {
        let s = random_pure_state(&mut rng);
        for so in Sign::BOTH {
            for sp in Sign::BOTH {
                let closed = povm.effect(so, sp).expectation(&s)?;
                let oracle = oracle_probability(p, &s, so, sp)?;
                max_dev = max_dev.max((closed - oracle).abs());
            }
        }
    }
    Ok(ValidationReport {
        n_states,
        max_abs_deviation: max_dev,
    })
}
