//! Joint measurability (coexistence) of two-valued qubit POVMs.
//!
//! Unbiased pairs `{(I ± a·σ)/2}`, `{(I ± b·σ)/2}` are decided analytically
//! by `|a+b|/2 + |a−b|/2 ≤ 1`, which for `a ⊥ b` reduces to
//! `|a|² + |b|² ≤ 1`. Arbitrary pairs `{E, I−E}`, `{F, I−F}` are decided
//! numerically: a joint POVM exists iff some Hermitian `G` makes
//!
//! ```text
//! G,  E − G,  F − G,  I − E − F + G
//! ```
//!
//! all positive. [`joint_feasibility`] maximizes the smallest eigenvalue
//! among those four operators over `G = g0·I + g·σ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::marginals::marginals;
use crate::qubit::{dot, norm, Effect, Vec3, VALIDATION_TOL};
use crate::scheme::{four_effects, SchemeParams};
use crate::{Error, Result};

/// Largest `|a·b|` accepted as perpendicular.
pub const PERPENDICULAR_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnbiasedPair {
    a: Vec3,
    b: Vec3,
}

impl UnbiasedPair {
    pub fn new(a: Vec3, b: Vec3) -> Result<Self> {
        for (name, v) in [("a", &a), ("b", &b)] {
            let len = norm(v);
            if !len.is_finite() || len > 1.0 + VALIDATION_TOL {
                return Err(Error::InvalidPovm(format!("|{name}| = {len} exceeds 1")));
            }
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> Vec3 {
        self.a
    }

    pub fn b(&self) -> Vec3 {
        self.b
    }

    /// `(I + a·σ)/2`
    pub fn first_plus(&self) -> Effect {
        half_vector_effect(&self.a)
    }

    /// `(I + b·σ)/2`
    pub fn second_plus(&self) -> Effect {
        half_vector_effect(&self.b)
    }
}

fn half_vector_effect(v: &Vec3) -> Effect {
    Effect::new(0.5, [v[0] / 2.0, v[1] / 2.0, v[2] / 2.0])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub coexistent: bool,
    pub lhs: f64,
}

/// `|a+b|/2 + |a−b|/2 ≤ 1`.
pub fn busch_criterion(p: &UnbiasedPair) -> CriterionResult {
    let (a, b) = (p.a, p.b);
    let sum = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
    let diff = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let lhs = norm(&sum) / 2.0 + norm(&diff) / 2.0;
    CriterionResult {
        coexistent: lhs <= 1.0 + VALIDATION_TOL,
        lhs,
    }
}

/// `|a|² + |b|² ≤ 1` for `a ⊥ b`.
pub fn perpendicular_criterion(p: &UnbiasedPair) -> Result<CriterionResult> {
    let ab = dot(&p.a, &p.b);
    if ab.abs() > PERPENDICULAR_TOL {
        return Err(Error::PerpendicularityViolated(ab));
    }
    let lhs = dot(&p.a, &p.a) + dot(&p.b, &p.b);
    Ok(CriterionResult {
        coexistent: lhs <= 1.0 + VALIDATION_TOL,
        lhs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Grid points per axis of the `(g0, g1, g2, g3)` box.
    pub grid_resolution: usize,
    /// Nelder-Mead iterations per refinement round.
    pub refine_iterations: usize,
    /// Feasible iff the best margin is `≥ −tolerance`.
    pub tolerance: f64,
    /// Seeds the orientation of the refinement simplices.
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid_resolution: 15,
            refine_iterations: 200,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidParams(format!(
                "search tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.grid_resolution == 0 {
            return Err(Error::InvalidParams(
                "grid_resolution must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityResult {
    pub feasible: bool,
    /// Best smallest eigenvalue found across the four joint effects.
    pub margin: f64,
    /// The `G_++` achieving `margin`.
    pub witness: Effect,
}

/// The joint POVM `[G, E − G, F − G, I − E − F + G]` induced by a witness,
/// in the outcome order `++, +−, −+, −−`.
pub fn joint_effects(e_plus: &Effect, f_plus: &Effect, g: &Effect) -> [Effect; 4] {
    [
        *g,
        *e_plus - *g,
        *f_plus - *g,
        Effect::identity() - *e_plus - *f_plus + *g,
    ]
}

/// Smallest eigenvalue over the four induced joint effects.
pub fn witness_margin(e_plus: &Effect, f_plus: &Effect, g: &Effect) -> f64 {
    joint_effects(e_plus, f_plus, g)
        .iter()
        .map(Effect::min_eigenvalue)
        .fold(f64::INFINITY, f64::min)
}

/// Numerical coexistence test for `{E, I−E}` and `{F, I−F}`.
pub fn joint_feasibility(
    e_plus: &Effect,
    f_plus: &Effect,
    cfg: &SearchConfig,
) -> Result<FeasibilityResult> {
    joint_feasibility_with_hints(e_plus, f_plus, cfg, &[])
}

/// As [`joint_feasibility`], with extra candidate witnesses that compete
/// with the best grid point as the refinement start.
pub fn joint_feasibility_with_hints(
    e_plus: &Effect,
    f_plus: &Effect,
    cfg: &SearchConfig,
    hints: &[Effect],
) -> Result<FeasibilityResult> {
    e_plus.validate()?;
    f_plus.validate()?;
    cfg.validate()?;

    let objective = |x: &[f64; 4]| witness_margin(e_plus, f_plus, &to_effect(x));
    let smoothed = |x: &[f64; 4], mu: f64| smoothed_margin(e_plus, f_plus, &to_effect(x), mu);

    let (mut best, mut best_val) = grid_search(&objective, cfg.grid_resolution);
    for h in hints {
        let x = from_effect(h);
        let v = objective(&x);
        if v > best_val {
            best = x;
            best_val = v;
        }
    }

    let spacing = if cfg.grid_resolution > 1 {
        1.0 / (cfg.grid_resolution - 1) as f64
    } else {
        0.5
    };
    let (x, val) = refine(&objective, &smoothed, best, best_val, spacing, cfg);
    Ok(FeasibilityResult {
        feasible: val >= -cfg.tolerance,
        margin: val,
        witness: to_effect(&x),
    })
}

fn to_effect(x: &[f64; 4]) -> Effect {
    Effect::new(x[0], [x[1], x[2], x[3]])
}

fn from_effect(e: &Effect) -> [f64; 4] {
    [e.f0, e.f[0], e.f[1], e.f[2]]
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo + hi) / 2.0];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

// Ties keep the lexicographically first grid index.
fn grid_search<F: Fn(&[f64; 4]) -> f64>(objective: &F, resolution: usize) -> ([f64; 4], f64) {
    let g0s = linspace(0.0, 1.0, resolution);
    let gs = linspace(-1.0, 1.0, resolution);
    let mut best = [g0s[0], gs[0], gs[0], gs[0]];
    let mut best_val = f64::NEG_INFINITY;
    for &g0 in &g0s {
        for &x in &gs {
            for &y in &gs {
                for &z in &gs {
                    let p = [g0, x, y, z];
                    let v = objective(&p);
                    if v > best_val {
                        best = p;
                        best_val = v;
                    }
                }
            }
        }
    }
    (best, best_val)
}

/// Smooth lower bound on [`witness_margin`]: each `|h|` becomes
/// `√(|h|² + μ²)` and the min over the four effects becomes a log-sum-exp
/// soft minimum at temperature `μ`. Exact at `μ = 0`; below the true margin
/// by at most `μ(1 + ln 4)`.
pub fn smoothed_margin(e_plus: &Effect, f_plus: &Effect, g: &Effect, mu: f64) -> f64 {
    let lam = joint_effects(e_plus, f_plus, g).map(|h| h.f0 - (dot(&h.f, &h.f) + mu * mu).sqrt());
    let hard = lam.iter().copied().fold(f64::INFINITY, f64::min);
    if mu == 0.0 {
        return hard;
    }
    let tail: f64 = lam.iter().map(|l| (-(l - hard) / mu).exp()).sum();
    hard - mu * tail.ln()
}

const MIN_TEMPERATURE: f64 = 1e-13;
const TEMPERATURE_DECAY: f64 = 0.1;
const ROUNDS_PER_TEMPERATURE: usize = 2;

/// Nelder-Mead ascent on [`smoothed_margin`] with the temperature lowered
/// geometrically from the grid spacing to `MIN_TEMPERATURE`. Each round
/// starts a randomly oriented simplex of size `10μ` at the incumbent. The
/// returned point is the best found under the exact margin.
fn refine<F, S>(
    objective: &F,
    smoothed: &S,
    start: [f64; 4],
    start_val: f64,
    initial_step: f64,
    cfg: &SearchConfig,
) -> ([f64; 4], f64)
where
    F: Fn(&[f64; 4]) -> f64,
    S: Fn(&[f64; 4], f64) -> f64,
{
    let mut best = start;
    let mut best_val = start_val;
    if cfg.refine_iterations == 0 {
        return (best, best_val);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = start;
    let mut mu = initial_step;
    while mu >= MIN_TEMPERATURE {
        let f = |p: &[f64; 4]| smoothed(p, mu);
        for _ in 0..ROUNDS_PER_TEMPERATURE {
            let axes = random_orthonormal_basis(&mut rng);
            let step = (10.0 * mu).min(initial_step);
            x = nelder_mead(&f, x, f(&x), step, &axes, cfg.refine_iterations).0;
        }
        let v = objective(&x);
        if v > best_val {
            best = x;
            best_val = v;
        }
        mu *= TEMPERATURE_DECAY;
    }
    (best, best_val)
}

fn random_orthonormal_basis<R: Rng>(rng: &mut R) -> [[f64; 4]; 4] {
    loop {
        let mut basis = [[0.0; 4]; 4];
        let mut ok = true;
        for i in 0..4 {
            let mut v = [0.0; 4];
            for c in v.iter_mut() {
                *c = rng.gen_range(-1.0..1.0);
            }
            for prev in basis.iter().take(i) {
                let d: f64 = (0..4).map(|k| v[k] * prev[k]).sum();
                for k in 0..4 {
                    v[k] -= d * prev[k];
                }
            }
            let len = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if len < 1e-3 {
                ok = false;
                break;
            }
            for c in v.iter_mut() {
                *c /= len;
            }
            basis[i] = v;
        }
        if ok {
            return basis;
        }
    }
}

/// Maximizes `objective` from a simplex `x0 + step·axes[i]`. Returns the
/// best vertex, its value and the final simplex diameter.
fn nelder_mead<F: Fn(&[f64; 4]) -> f64>(
    objective: &F,
    x0: [f64; 4],
    f0: f64,
    step: f64,
    axes: &[[f64; 4]; 4],
    iterations: usize,
) -> ([f64; 4], f64, f64) {
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let along = |x: &[f64; 4], d: &[f64; 4], t: f64| -> [f64; 4] {
        [
            x[0] + t * d[0],
            x[1] + t * d[1],
            x[2] + t * d[2],
            x[3] + t * d[3],
        ]
    };

    let mut simplex: Vec<([f64; 4], f64)> = Vec::with_capacity(5);
    simplex.push((x0, f0));
    for axis in axes {
        let p = along(&x0, axis, step);
        simplex.push((p, objective(&p)));
    }

    for _ in 0..iterations {
        // best first; stable sort keeps earlier vertices ahead on ties
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let worst = simplex[4];
        let mut centroid = [0.0; 4];
        for (p, _) in &simplex[..4] {
            for k in 0..4 {
                centroid[k] += p[k] / 4.0;
            }
        }
        let dir = [
            centroid[0] - worst.0[0],
            centroid[1] - worst.0[1],
            centroid[2] - worst.0[2],
            centroid[3] - worst.0[3],
        ];
        let xr = along(&centroid, &dir, REFLECT);
        let fr = objective(&xr);
        if fr > simplex[0].1 {
            let xe = along(&centroid, &dir, EXPAND);
            let fe = objective(&xe);
            simplex[4] = if fe > fr { (xe, fe) } else { (xr, fr) };
        } else if fr > simplex[3].1 {
            simplex[4] = (xr, fr);
        } else {
            let outside = fr > worst.1;
            let xc = along(&centroid, &dir, if outside { CONTRACT } else { -CONTRACT });
            let fc = objective(&xc);
            let accept = if outside { fc >= fr } else { fc > worst.1 };
            if accept {
                simplex[4] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    let p = [
                        best[0] + SHRINK * (v.0[0] - best[0]),
                        best[1] + SHRINK * (v.0[1] - best[1]),
                        best[2] + SHRINK * (v.0[2] - best[2]),
                        best[3] + SHRINK * (v.0[3] - best[3]),
                    ];
                    *v = (p, objective(&p));
                }
            }
        }
    }
    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
    let best = simplex[0].0;
    let diameter = simplex[1..]
        .iter()
        .map(|(p, _)| (0..4).map(|k| (p[k] - best[k]).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    (simplex[0].0, simplex[0].1, diameter)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCoexistence {
    pub pair13: FeasibilityResult,
    pub pair23: FeasibilityResult,
}

impl ModelCoexistence {
    pub fn pair13_margin(&self) -> f64 {
        self.pair13.margin
    }

    pub fn pair23_margin(&self) -> f64 {
        self.pair23.margin
    }
}

/// Feasibility of the scheme's marginal pairs (1,3) and (2,3). The scheme's
/// own `F_++` is offered as a candidate witness for both pairs.
pub fn model_marginal_coexistence(
    p: &SchemeParams,
    cfg: &SearchConfig,
) -> Result<ModelCoexistence> {
    let povm = four_effects(p);
    let m = marginals(&povm)?;
    let hint = [povm.f_pp];
    Ok(ModelCoexistence {
        pair13: joint_feasibility_with_hints(&m.first.plus, &m.third.plus, cfg, &hint)?,
        pair23: joint_feasibility_with_hints(&m.second.plus, &m.third.plus, cfg, &hint)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{
        prop_assert, prop_assert_eq, prop_assume, proptest, ProptestConfig, Strategy,
    };

    #[test]
    fn busch_examples() {
        let r = busch_criterion(&UnbiasedPair::new([0., 0., 1.], [0., 0., 1.]).unwrap());
        assert!(r.coexistent && (r.lhs - 1.0).abs() < 1e-15);
        let r = busch_criterion(&UnbiasedPair::new([0.6, 0., 0.], [0., 0.6, 0.]).unwrap());
        assert!(r.coexistent && (r.lhs - 0.72f64.sqrt()).abs() < 1e-15);
        let r = busch_criterion(&UnbiasedPair::new([0., 0., 1.], [1., 0., 0.]).unwrap());
        assert!(!r.coexistent && (r.lhs - 2f64.sqrt()).abs() < 1e-15);
        assert!(UnbiasedPair::new([0., 0., 1.1], [0., 0., 0.]).is_err());
    }

    #[test]
    fn perpendicular_examples() {
        let r = perpendicular_criterion(&UnbiasedPair::new([0., 0., 0.6], [0.8, 0., 0.]).unwrap())
            .unwrap();
        assert!(r.coexistent && (r.lhs - 1.0).abs() < 1e-15);
        let r = perpendicular_criterion(&UnbiasedPair::new([0., 0., 0.9], [0.9, 0., 0.]).unwrap())
            .unwrap();
        assert!(!r.coexistent && (r.lhs - 1.62).abs() < 1e-15);
        assert!(matches!(
            perpendicular_criterion(&UnbiasedPair::new([0., 0., 0.5], [0.1, 0., 0.5]).unwrap()),
            Err(Error::PerpendicularityViolated(_))
        ));
    }

    #[test]
    fn feasibility_unbiased_examples() {
        let cfg = SearchConfig::default();
        let r = joint_feasibility(
            &Effect::new(0.5, [0., 0., 0.3]),
            &Effect::new(0.5, [0.3, 0., 0.]),
            &cfg,
        )
        .unwrap();
        assert!(r.feasible && r.margin >= -1e-6);
        // sharp complementary pair (I + σ3)/2, (I + σ1)/2
        let r = joint_feasibility(
            &Effect::new(0.5, [0., 0., 0.5]),
            &Effect::new(0.5, [0.5, 0., 0.]),
            &cfg,
        )
        .unwrap();
        assert!(!r.feasible && r.margin < 0.0);
        // Pauli vectors of unit length are not themselves effects
        assert!(joint_feasibility(
            &Effect::new(0.5, [0., 0., 1.]),
            &Effect::new(0.5, [1., 0., 0.]),
            &cfg,
        )
        .is_err());
    }

    #[test]
    fn feasibility_rejects_invalid_inputs() {
        let ok = Effect::new(0.5, [0., 0., 0.3]);
        let bad = Effect::new(0.5, [0., 0., 0.7]);
        let cfg = SearchConfig::default();
        assert!(joint_feasibility(&bad, &ok, &cfg).is_err());
        assert!(joint_feasibility(&ok, &bad, &cfg).is_err());
        let cfg = SearchConfig {
            tolerance: 0.0,
            ..cfg
        };
        assert!(joint_feasibility(&ok, &ok, &cfg).is_err());
    }

    #[test]
    fn feasibility_is_deterministic() {
        let cfg = SearchConfig {
            seed: 9,
            ..SearchConfig::default()
        };
        let e = Effect::new(0.5, [0., 0., 0.5]);
        let f = Effect::new(0.45, [0.4, 0., 0.]);
        assert_eq!(
            joint_feasibility(&e, &f, &cfg).unwrap(),
            joint_feasibility(&e, &f, &cfg).unwrap()
        );
    }

    #[test]
    fn grid_ties_keep_first_index() {
        let (x, v) = grid_search(&|_: &[f64; 4]| 0.0, 3);
        assert_eq!((x, v), ([0.0, -1.0, -1.0, -1.0], 0.0));
    }

    #[test]
    fn scheme_witness_certifies_model_pairs() {
        use std::f64::consts::PI;
        let p = SchemeParams::new(PI / 3.0, 0.0, PI / 3.0, 0.0, 0.0).unwrap();
        let povm = four_effects(&p);
        let m = marginals(&povm).unwrap();
        assert!(witness_margin(&m.first.plus, &m.third.plus, &povm.f_pp) >= -1e-15);
        assert!(witness_margin(&m.second.plus, &m.third.plus, &povm.f_pp) >= -1e-15);
        let r = model_marginal_coexistence(&p, &SearchConfig::default()).unwrap();
        assert!(r.pair13.feasible && r.pair23.feasible);
    }

    #[test]
    fn degenerate_model_pairs_are_feasible() {
        use std::f64::consts::{FRAC_PI_2, PI};
        let cfg = SearchConfig::default();
        // A = B = 1: all three marginals sharp and commuting
        let sharp = SchemeParams::new(FRAC_PI_2, PI, 0.0, 0.0, 0.0).unwrap();
        // A = B = 0: first two marginals trivial, third sharp
        let trivial = SchemeParams::new(FRAC_PI_2, FRAC_PI_2, FRAC_PI_2, 0.0, 0.0).unwrap();
        for p in [sharp, trivial] {
            let r = model_marginal_coexistence(&p, &cfg).unwrap();
            assert!(r.pair13.feasible && r.pair23.feasible);
            assert!(r.pair13_margin() >= -1e-9 && r.pair23_margin() >= -1e-9);
        }
        let m = marginals(&four_effects(&trivial)).unwrap();
        assert!(m.first.plus.max_abs_diff(&Effect::identity().scale(0.5)) < 1e-15);
    }

    #[test]
    fn biased_sharp_pair_matches_sampling_oracle() {
        // E is a sharp projector, F does not commute with it.
        let e = Effect::new(0.5, [0., 0., 0.5]);
        let f = Effect::new(0.45, [0.4, 0., 0.]);
        let r = joint_feasibility(&e, &f, &SearchConfig::default()).unwrap();
        assert!(!r.feasible);
        assert!((r.margin - (-0.070786596)).abs() < 1e-8, "{}", r.margin);
        assert!((witness_margin(&e, &f, &r.witness) - r.margin).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut sampled = f64::NEG_INFINITY;
        for _ in 0..1_000_000 {
            // G ≤ E confines g0 to [0, ½] and |g| to g0
            let g = Effect::new(
                rng.gen_range(0.0..0.5),
                [
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                ],
            );
            sampled = sampled.max(witness_margin(&e, &f, &g));
        }
        assert!(sampled <= r.margin + 1e-12);
        assert!(sampled < 0.0 && sampled > r.margin - 0.01, "{sampled}");
    }

    #[test]
    fn feasible_verdicts_carry_certificates() {
        let cfg = SearchConfig::default();
        let pairs = [
            (
                Effect::new(0.5, [0., 0., 0.3]),
                Effect::new(0.5, [0.3, 0., 0.]),
            ),
            (
                Effect::new(0.6, [0.1, 0., 0.2]),
                Effect::new(0.3, [0., 0.2, 0.]),
            ),
            (
                Effect::new(0.5, [0., 0., 0.3]),
                Effect::new(0.5, [0., 0.4, 0.]),
            ),
        ];
        for (e, f) in pairs {
            let r = joint_feasibility(&e, &f, &cfg).unwrap();
            assert!(r.feasible);
            for h in joint_effects(&e, &f, &r.witness) {
                assert!(h.min_eigenvalue() >= -10.0 * cfg.tolerance);
            }
        }
    }

    fn rotate(q: &[f64; 4], v: &Vec3) -> Vec3 {
        let [w, x, y, z] = *q;
        [
            (1. - 2. * (y * y + z * z)) * v[0]
                + 2. * (x * y - w * z) * v[1]
                + 2. * (x * z + w * y) * v[2],
            2. * (x * y + w * z) * v[0]
                + (1. - 2. * (x * x + z * z)) * v[1]
                + 2. * (y * z - w * x) * v[2],
            2. * (x * z - w * y) * v[0]
                + 2. * (y * z + w * x) * v[1]
                + (1. - 2. * (x * x + y * y)) * v[2],
        ]
    }

    fn effect_strategy() -> impl Strategy<Value = Effect> {
        (
            0.05f64..0.95,
            -1.0f64..1.0,
            -1.0f64..1.0,
            -1.0f64..1.0,
            0.0f64..1.0,
        )
            .prop_map(|(f0, x, y, z, s)| {
                let n = norm(&[x, y, z]).max(1e-9);
                let len = s * f0.min(1.0 - f0);
                Effect::new(f0, [len * x / n, len * y / n, len * z / n])
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn margin_is_rotation_invariant(
            e in effect_strategy(),
            f in effect_strategy(),
            q in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
        ) {
            let qn = (q.0 * q.0 + q.1 * q.1 + q.2 * q.2 + q.3 * q.3).sqrt();
            prop_assume!(qn > 1e-3);
            let q = [q.0 / qn, q.1 / qn, q.2 / qn, q.3 / qn];
            let cfg = SearchConfig::default();
            let r = joint_feasibility(&e, &f, &cfg).unwrap();
            let er = Effect::new(e.f0, rotate(&q, &e.f));
            let fr = Effect::new(f.f0, rotate(&q, &f.f));
            let rr = joint_feasibility(&er, &fr, &cfg).unwrap();
            prop_assert!((r.margin - rr.margin).abs() < 1e-7, "{} vs {}", r.margin, rr.margin);
        }

        #[test]
        fn solver_agrees_with_busch_off_boundary(
            a in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, 0.0f64..1.0),
            b in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, 0.0f64..1.0),
        ) {
            let unit = |(x, y, z, s): (f64, f64, f64, f64)| {
                let n = norm(&[x, y, z]).max(1e-9);
                [s * x / n, s * y / n, s * z / n]
            };
            let pair = UnbiasedPair::new(unit(a), unit(b)).unwrap();
            let c = busch_criterion(&pair);
            prop_assume!((c.lhs - 1.0).abs() > 1e-3);
            let r = joint_feasibility(&pair.first_plus(), &pair.second_plus(), &SearchConfig::default()).unwrap();
            prop_assert_eq!(r.feasible, c.coexistent, "lhs {} margin {}", c.lhs, r.margin);
        }

        #[test]
        fn smoothing_is_a_tight_lower_bound(
            e in effect_strategy(),
            f in effect_strategy(),
            g0 in 0.0f64..1.0,
            g in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
            mu in 1e-12f64..0.1,
        ) {
            let g = Effect::new(g0, [g.0, g.1, g.2]);
            let hard = witness_margin(&e, &f, &g);
            let soft = smoothed_margin(&e, &f, &g, mu);
            prop_assert!(soft <= hard + 1e-15);
            prop_assert!(soft >= hard - mu * (1.0 + 4f64.ln()) - 1e-12);
            prop_assert_eq!(smoothed_margin(&e, &f, &g, 0.0), hard);
        }
    }
}
