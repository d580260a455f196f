//! Single-qubit effects and states in Pauli/Bloch form, plus the two-qubit
//! pure-state expectation of product projectors.
//!
//! Conventions: `σ1 = [[0,1],[1,0]]`, `σ2 = [[0,-i],[i,0]]`,
//! `σ3 = [[1,0],[0,-1]]`, with `|+⟩ = (1,0)ᵀ` and `|-⟩ = (0,1)ᵀ`. Two-qubit
//! amplitudes are stored object-major: index `2·i_o + i_p`, where index 0 is
//! `|+⟩` and 1 is `|-⟩`.

use std::f64::consts::PI;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Vec3 = [f64; 3];

/// Absolute tolerance for validity checks on O(1) quantities.
pub const VALIDATION_TOL: f64 = 1e-12;

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome label of a two-valued spin measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// A Hermitian qubit operator `f0·I + f·σ`.
///
/// Construction does not check positivity; call [`Effect::is_valid`] or
/// [`Effect::validate`] to test `0 ≤ F ≤ I`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub f0: f64,
    pub f: Vec3,
}

impl Effect {
    pub const fn new(f0: f64, f: Vec3) -> Self {
        Self { f0, f }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, [0.0; 3])
    }

    pub const fn zero() -> Self {
        Self::new(0.0, [0.0; 3])
    }

    /// `(λmin, λmax) = (f0 − |f|, f0 + |f|)`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let r = norm(&self.f);
        (self.f0 - r, self.f0 + r)
    }

    /// Smallest eigenvalue, used as the positivity margin of the operator.
    pub fn min_eigenvalue(&self) -> f64 {
        self.f0 - norm(&self.f)
    }

    /// Spread between largest and smallest eigenvalue.
    pub fn contrast(&self) -> f64 {
        2.0 * norm(&self.f)
    }

    pub fn is_valid(&self) -> bool {
        let (min, max) = self.eigenvalues();
        min >= -VALIDATION_TOL && max <= 1.0 + VALIDATION_TOL
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            let (min, max) = self.eigenvalues();
            Err(Error::InvalidEffect { min, max })
        }
    }

    /// Outcome probability `Tr(ρF) = f0 + f·r`.
    pub fn expectation(&self, state: &QubitState) -> Result<f64> {
        self.validate()?;
        state.validate()?;
        Ok(self.f0 + dot(&self.f, &state.bloch_vector()))
    }

    /// `I − F`.
    pub fn complement(&self) -> Self {
        Effect::identity() - *self
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(k * self.f0, [k * self.f[0], k * self.f[1], k * self.f[2]])
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &Effect) -> f64 {
        let mut d = (self.f0 - other.f0).abs();
        for k in 0..3 {
            d = d.max((self.f[k] - other.f[k]).abs());
        }
        d
    }
}

impl Add for Effect {
    type Output = Effect;
    fn add(self, rhs: Effect) -> Effect {
        Effect::new(
            self.f0 + rhs.f0,
            [
                self.f[0] + rhs.f[0],
                self.f[1] + rhs.f[1],
                self.f[2] + rhs.f[2],
            ],
        )
    }
}

impl Sub for Effect {
    type Output = Effect;
    fn sub(self, rhs: Effect) -> Effect {
        self + (-rhs)
    }
}

impl Neg for Effect {
    type Output = Effect;
    fn neg(self) -> Effect {
        self.scale(-1.0)
    }
}

/// Object state: a pure amplitude pair or a Bloch vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QubitState {
    Pure { alpha: Complex64, beta: Complex64 },
    Mixed { r: Vec3 },
}

impl QubitState {
    /// Pure state `α|+⟩ + β|−⟩`; rejects `||α|² + |β|² − 1| > 1e-12`.
    pub fn pure(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let s = QubitState::Pure { alpha, beta };
        s.validate()?;
        Ok(s)
    }

    /// Accepts amplitudes whose squared norm is within `tol` of 1 and
    /// rescales them to unit norm.
    pub fn pure_renormalized(alpha: Complex64, beta: Complex64, tol: f64) -> Result<Self> {
        let n2 = alpha.norm_sqr() + beta.norm_sqr();
        if !n2.is_finite() || (n2 - 1.0).abs() > tol {
            return Err(Error::InvalidState(format!(
                "|alpha|^2 + |beta|^2 = {n2} is not 1 within {tol:e}"
            )));
        }
        let k = n2.sqrt();
        Ok(QubitState::Pure {
            alpha: alpha / k,
            beta: beta / k,
        })
    }

    pub fn mixed(r: Vec3) -> Result<Self> {
        let s = QubitState::Mixed { r };
        s.validate()?;
        Ok(s)
    }

    pub fn plus() -> Self {
        QubitState::Pure {
            alpha: Complex64::new(1.0, 0.0),
            beta: Complex64::new(0.0, 0.0),
        }
    }

    pub fn maximally_mixed() -> Self {
        QubitState::Mixed { r: [0.0; 3] }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            QubitState::Pure { alpha, beta } => {
                let n2 = alpha.norm_sqr() + beta.norm_sqr();
                if n2.is_finite() && (n2 - 1.0).abs() <= VALIDATION_TOL {
                    Ok(())
                } else {
                    Err(Error::InvalidState(format!("|alpha|^2 + |beta|^2 = {n2}")))
                }
            }
            QubitState::Mixed { r } => {
                let len = norm(&r);
                if len.is_finite() && len <= 1.0 + VALIDATION_TOL {
                    Ok(())
                } else {
                    Err(Error::InvalidState(format!("|r| = {len} exceeds 1")))
                }
            }
        }
    }

    /// `r = (2Re(αβ̄), −2Im(αβ̄), |α|² − |β|²)` for pure states.
    pub fn bloch_vector(&self) -> Vec3 {
        match *self {
            QubitState::Pure { alpha, beta } => {
                let c = alpha * beta.conj();
                [2.0 * c.re, -2.0 * c.im, alpha.norm_sqr() - beta.norm_sqr()]
            }
            QubitState::Mixed { r } => r,
        }
    }

    pub fn amplitudes(&self) -> Option<(Complex64, Complex64)> {
        match *self {
            QubitState::Pure { alpha, beta } => Some((alpha, beta)),
            QubitState::Mixed { .. } => None,
        }
    }
}

/// Haar-random pure state `(cos(ϑ/2), e^{iφ} sin(ϑ/2))` with `cos ϑ`
/// uniform on `[-1, 1]` and `φ` uniform on `[0, 2π)`.
pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R) -> QubitState {
    let cos_t: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..2.0 * PI);
    let half = cos_t.clamp(-1.0, 1.0).acos() / 2.0;
    let alpha = Complex64::new(half.cos(), 0.0);
    let beta = Complex64::from_polar(half.sin(), phi);
    // renormalize against rounding in cos²+sin²
    let k = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
    QubitState::Pure {
        alpha: alpha / k,
        beta: beta / k,
    }
}

/// Point on the unit sphere given by polar angle `theta ∈ [0, π]` and
/// azimuth `phi` (reduced to `[0, 2π)`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    theta: f64,
    phi: f64,
}

impl Direction {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::InvalidParams(format!(
                "direction angles must be finite (theta={theta}, phi={phi})"
            )));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::InvalidParams(format!(
                "polar angle {theta} outside [0, pi]"
            )));
        }
        Ok(Self {
            theta,
            phi: reduce_azimuth(phi),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn unit_vector(&self) -> Vec3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

pub(crate) fn reduce_azimuth(phi: f64) -> f64 {
    let r = phi.rem_euclid(2.0 * PI);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if r >= 2.0 * PI {
        0.0
    } else {
        r
    }
}

/// Spectral projection `(I ± n·σ)/2`.
pub fn projector_from_direction(d: &Direction, sign: Sign) -> Effect {
    let n = d.unit_vector();
    let s = 0.5 * sign.value();
    Effect::new(0.5, [s * n[0], s * n[1], s * n[2]])
}

/// Normalized pure state of object and probe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoQubitState {
    amp: [Complex64; 4],
}

impl TwoQubitState {
    pub fn new(amp: [Complex64; 4]) -> Result<Self> {
        let n2: f64 = amp.iter().map(|a| a.norm_sqr()).sum();
        if !n2.is_finite() || (n2 - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::InvalidState(format!(
                "two-qubit state has squared norm {n2}"
            )));
        }
        Ok(Self { amp })
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.amp
    }

    /// Amplitude of `|i_o⟩|i_p⟩`.
    pub fn amplitude(&self, object: Sign, probe: Sign) -> Complex64 {
        self.amp[basis_index(object, probe)]
    }
}

fn basis_index(object: Sign, probe: Sign) -> usize {
    let bit = |s: Sign| match s {
        Sign::Plus => 0,
        Sign::Minus => 1,
    };
    2 * bit(object) + bit(probe)
}

type Mat2 = [[Complex64; 2]; 2];

fn operator_matrix(e: &Effect) -> Mat2 {
    let [x, y, z] = e.f;
    [
        [Complex64::new(e.f0 + z, 0.0), Complex64::new(x, -y)],
        [Complex64::new(x, y), Complex64::new(e.f0 - z, 0.0)],
    ]
}

/// `⟨ψ| P^o_± ⊗ P^p_± |ψ⟩` evaluated in the four-dimensional product space.
#[allow(clippy::needless_range_loop)]
pub fn tensor_expectation(
    psi: &TwoQubitState,
    sign_o: Sign,
    dir_o: &Direction,
    sign_p: Sign,
    dir_p: &Direction,
) -> Result<f64> {
    // guards against states assembled without `TwoQubitState::new`
    TwoQubitState::new(psi.amp)?;
    let po = operator_matrix(&projector_from_direction(dir_o, sign_o));
    let pp = operator_matrix(&projector_from_direction(dir_p, sign_p));
    let mut acc = Complex64::new(0.0, 0.0);
    for io in 0..2 {
        for ip in 0..2 {
            let mut out = Complex64::new(0.0, 0.0);
            for jo in 0..2 {
                for jp in 0..2 {
                    out += po[io][jo] * pp[ip][jp] * psi.amp[2 * jo + jp];
                }
            }
            acc += psi.amp[2 * io + ip].conj() * out;
        }
    }
    Ok(acc.re)
}
