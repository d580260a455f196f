//! Binary marginals of the four-outcome POVM and the quantities built on
//! them: contrasts, unsharpness, pay-off relations, outcome variance and
//! reconstruction of sharp `σ3` / `σ_n` probabilities.

use serde::{Deserialize, Serialize};

use crate::qubit::{norm, Effect, QubitState, Vec3, VALIDATION_TOL};
use crate::scheme::{DerivedCoefficients, FourOutcomePovm};
use crate::{Error, Result};

/// Below this, `|A|` or `|N|` is treated as a trivial marginal.
pub const TRIVIAL_THRESHOLD: f64 = 1e-9;

/// Two-outcome POVM `{plus, minus = I − plus}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryPovm {
    pub plus: Effect,
    pub minus: Effect,
}

impl BinaryPovm {
    pub fn new(plus: Effect, minus: Effect) -> Result<Self> {
        plus.validate()?;
        minus.validate()?;
        let dev = (plus + minus).max_abs_diff(&Effect::identity());
        if dev > VALIDATION_TOL {
            return Err(Error::InvalidPovm(format!(
                "binary effects sum deviates from identity by {dev:e}"
            )));
        }
        Ok(Self { plus, minus })
    }

    pub fn from_plus(plus: Effect) -> Result<Self> {
        Self::new(plus, plus.complement())
    }

    /// Spread of the `+` effect's eigenvalues.
    pub fn contrast(&self) -> f64 {
        self.plus.contrast()
    }
}

/// The three groupings of the four outcomes: by object sign, by probe sign,
/// and by equal/opposite signs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marginals {
    pub first: BinaryPovm,
    pub second: BinaryPovm,
    pub third: BinaryPovm,
}

pub fn marginals(povm: &FourOutcomePovm) -> Result<Marginals> {
    povm.validate()?;
    let FourOutcomePovm {
        f_pp,
        f_pm,
        f_mp,
        f_mm,
    } = *povm;
    Ok(Marginals {
        first: BinaryPovm::new(f_pp + f_pm, f_mp + f_mm)?,
        second: BinaryPovm::new(f_pp + f_mp, f_pm + f_mm)?,
        third: BinaryPovm::new(f_pp + f_mm, f_pm + f_mp)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contrasts {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Contrasts {
    pub fn unsharpness(&self) -> Unsharpness {
        Unsharpness {
            u1: 1.0 - self.c1 * self.c1,
            u2: 1.0 - self.c2 * self.c2,
            u3: 1.0 - self.c3 * self.c3,
        }
    }
}

pub fn contrasts(c: &DerivedCoefficients) -> Contrasts {
    Contrasts {
        c1: c.A.abs(),
        c2: c.B.abs(),
        c3: c.n_norm(),
    }
}

/// `U_i = 1 − C_i²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unsharpness {
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffReport {
    /// `|C3² − (1 − C1²)(1 − C2²)|`
    pub identity_residual: f64,
    /// `1 − C1² − C3²`
    pub pair1_slack: f64,
    /// `1 − C2² − C3²`
    pub pair2_slack: f64,
    /// `U1 + U3 ≥ 1` and `U2 + U3 ≥ 1`, within 1e-12.
    pub u_form_ok: bool,
}

pub fn payoff_check(ct: &Contrasts) -> PayoffReport {
    let (s1, s2, s3) = (ct.c1 * ct.c1, ct.c2 * ct.c2, ct.c3 * ct.c3);
    let u = ct.unsharpness();
    PayoffReport {
        identity_residual: (s3 - (1.0 - s1) * (1.0 - s2)).abs(),
        pair1_slack: 1.0 - s1 - s3,
        pair2_slack: 1.0 - s2 - s3,
        u_form_ok: u.u1 + u.u3 >= 1.0 - VALIDATION_TOL && u.u2 + u.u3 >= 1.0 - VALIDATION_TOL,
    }
}

/// Variance of the ±1-valued outcome of `m`: `1 − t̄²`, `t̄ = ⟨m+⟩ − ⟨m−⟩`.
pub fn variance(m: &BinaryPovm, state: &QubitState) -> Result<f64> {
    let mean = m.plus.expectation(state)? - m.minus.expectation(state)?;
    Ok(1.0 - mean * mean)
}

/// Point estimates of `⟨P^{σ3}_+⟩` and `⟨P^n_+⟩`, unclamped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpProbabilities {
    pub p_sigma3_plus: f64,
    pub p_n_plus: f64,
    /// Both estimates lie in `[0, 1]`.
    pub in_range: bool,
}

/// Inverts `p1 = A·p(σ3=+) + (1 − A)/2`.
pub fn reconstruct_sigma3_prob(p1_plus: f64, c: &DerivedCoefficients) -> Result<f64> {
    if c.A.abs() < TRIVIAL_THRESHOLD {
        return Err(Error::TrivialSigma3Marginal(c.A.abs()));
    }
    Ok((p1_plus - (1.0 - c.A) / 2.0) / c.A)
}

/// Inverts `p3 = |N|·p(σn=+) + (1 + AB − |N|)/2`.
pub fn reconstruct_n_prob(p3_plus: f64, c: &DerivedCoefficients) -> Result<f64> {
    let n = c.n_norm();
    if n < TRIVIAL_THRESHOLD {
        return Err(Error::TrivialInterferenceMarginal(n));
    }
    Ok((p3_plus - (1.0 + c.A * c.B - n) / 2.0) / n)
}

pub fn reconstruct_sharp_probs(
    p1_plus: f64,
    p3_plus: f64,
    c: &DerivedCoefficients,
) -> Result<SharpProbabilities> {
    let p_sigma3_plus = reconstruct_sigma3_prob(p1_plus, c)?;
    let p_n_plus = reconstruct_n_prob(p3_plus, c)?;
    let unit = 0.0..=1.0;
    Ok(SharpProbabilities {
        p_sigma3_plus,
        p_n_plus,
        in_range: unit.contains(&p_sigma3_plus) && unit.contains(&p_n_plus),
    })
}

/// Equatorial unit vector `n = N/|N|` of the smeared complementary observable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterferenceDirection {
    pub n: Vec3,
}

impl InterferenceDirection {
    /// Sharp projection `(I + n·σ)/2`.
    pub fn plus_projector(&self) -> Effect {
        Effect::new(0.5, [self.n[0] / 2.0, self.n[1] / 2.0, 0.0])
    }
}

pub fn interference_direction(c: &DerivedCoefficients) -> Result<InterferenceDirection> {
    let len = c.n_norm();
    if len < TRIVIAL_THRESHOLD {
        return Err(Error::DirectionUndefined(len));
    }
    let n = [c.N1 / len, c.N2 / len, 0.0];
    debug_assert!((norm(&n) - 1.0).abs() < 1e-12);
    Ok(InterferenceDirection { n })
}
