//! Seeded simulation of the counting experiment: `N` object/probe pairs are
//! prepared, both spins measured, and outcome pairs tallied.
//!
//! Sampling uses ChaCha8 (`rand_chacha`), which is bit-identical across
//! platforms. Replicate `k` of a study seeded with `s` draws from
//! [`rep_seed`]`(s, k)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::marginals::{interference_direction, reconstruct_n_prob, reconstruct_sigma3_prob};
use crate::qubit::{Effect, QubitState};
use crate::scheme::{
    derived_coefficients, four_effects, DerivedCoefficients, FourOutcomePovm, SchemeParams,
};
use crate::{Error, Result};

/// Maximum deviation of outcome probabilities from summing to one.
pub const PROBABILITY_SUM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub n_pp: u64,
    pub n_pm: u64,
    pub n_mp: u64,
    pub n_mm: u64,
    pub n_total: u64,
}

impl CountTable {
    pub fn new(n_pp: u64, n_pm: u64, n_mp: u64, n_mm: u64) -> Self {
        Self {
            n_pp,
            n_pm,
            n_mp,
            n_mm,
            n_total: n_pp + n_pm + n_mp + n_mm,
        }
    }

    /// Counts in the fixed order `++, +−, −+, −−`.
    pub fn counts(&self) -> [u64; 4] {
        [self.n_pp, self.n_pm, self.n_mp, self.n_mm]
    }
}

/// SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `k`: `splitmix64(seed ⊕ splitmix64(k))`.
pub fn rep_seed(seed: u64, k: u64) -> u64 {
    splitmix64(seed ^ splitmix64(k))
}

/// Draws `n` outcome pairs by inverse CDF over `++, +−, −+, −−`.
pub fn sample_counts(
    povm: &FourOutcomePovm,
    state: &QubitState,
    n: u64,
    seed: u64,
) -> Result<CountTable> {
    if n == 0 {
        return Err(Error::InvalidParams(
            "number of samples must be at least 1".into(),
        ));
    }
    let probs = povm.probabilities(state)?;
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(Error::Inconsistent(format!(
            "outcome probabilities sum to {total}"
        )));
    }
    let c0 = probs[0];
    let c1 = c0 + probs[1];
    let c2 = c1 + probs[2];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [0u64; 4];
    for _ in 0..n {
        let u: f64 = rng.gen();
        // u < cdf selects the earliest outcome on ties
        let k = if u < c0 {
            0
        } else if u < c1 {
            1
        } else if u < c2 {
            2
        } else {
            3
        };
        counts[k] += 1;
    }
    Ok(CountTable::new(counts[0], counts[1], counts[2], counts[3]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    /// `(N_++ + N_+−)/N`
    pub p_hat_1: f64,
    /// `(N_++ + N_−+)/N`
    pub p_hat_2: f64,
    /// `(N_++ + N_−−)/N`
    pub p_hat_3: f64,
    /// Reconstructed `p(σ3 = +)`; `None` when the first marginal is trivial.
    pub p_sigma3_hat: Option<f64>,
    /// Reconstructed `p(σn = +)`; `None` when the third marginal is trivial.
    pub p_n_hat: Option<f64>,
    pub se_sigma3: Option<f64>,
    pub se_n: Option<f64>,
}

/// Marginal frequencies and the two sharp-probability reconstructions with
/// binomial standard errors scaled by `1/|A|` and `1/|N|`. Fails only when
/// both marginals are trivial.
pub fn estimate(counts: &CountTable, c: &DerivedCoefficients) -> Result<EstimateReport> {
    if counts.n_total == 0 {
        return Err(Error::InvalidParams("count table is empty".into()));
    }
    if counts.counts().iter().sum::<u64>() != counts.n_total {
        return Err(Error::Inconsistent(
            "counts do not add up to n_total".into(),
        ));
    }
    let n = counts.n_total as f64;
    let p1 = (counts.n_pp + counts.n_pm) as f64 / n;
    let p2 = (counts.n_pp + counts.n_mp) as f64 / n;
    let p3 = (counts.n_pp + counts.n_mm) as f64 / n;
    let binomial_se = |p: f64| (p * (1.0 - p) / n).sqrt();

    let sigma3 = reconstruct_sigma3_prob(p1, c);
    let sharp_n = reconstruct_n_prob(p3, c);
    if let (Err(e), Err(_)) = (&sigma3, &sharp_n) {
        return Err(e.clone());
    }
    Ok(EstimateReport {
        p_hat_1: p1,
        p_hat_2: p2,
        p_hat_3: p3,
        p_sigma3_hat: sigma3.as_ref().ok().copied(),
        p_n_hat: sharp_n.as_ref().ok().copied(),
        se_sigma3: sigma3.ok().map(|_| binomial_se(p1) / c.A.abs()),
        se_n: sharp_n.ok().map(|_| binomial_se(p3) / c.n_norm()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: u64,
    pub rmse_sigma3: f64,
    pub rmse_n: f64,
}

/// Exact `⟨P^{σ3}_+⟩` and `⟨P^n_+⟩` for a state.
pub fn exact_sharp_probs(c: &DerivedCoefficients, state: &QubitState) -> Result<(f64, f64)> {
    let sigma3 = Effect::new(0.5, [0.0, 0.0, 0.5]).expectation(state)?;
    let sharp_n = interference_direction(c)?
        .plus_projector()
        .expectation(state)?;
    Ok((sigma3, sharp_n))
}

/// RMSE of both reconstructions over `reps` replicates at each sample size.
/// Replicate `k` uses `rep_seed(seed, k)` at every `n`.
pub fn convergence_study(
    p: &SchemeParams,
    state: &QubitState,
    n_list: &[u64],
    reps: u64,
    seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    if reps == 0 {
        return Err(Error::InvalidParams("reps must be at least 1".into()));
    }
    if let Some(&bad) = n_list.iter().find(|&&n| n < 10) {
        return Err(Error::InvalidParams(format!("sample size {bad} below 10")));
    }
    let c = derived_coefficients(p);
    let povm = four_effects(p);
    let (truth_sigma3, truth_n) = exact_sharp_probs(&c, state)?;
    reconstruct_sigma3_prob(0.5, &c)?;

    let mut sizes = n_list.to_vec();
    sizes.sort_unstable();
    let mut rows = Vec::with_capacity(sizes.len());
    for n in sizes {
        let (mut se_sigma3, mut se_n) = (0.0, 0.0);
        for k in 0..reps {
            let counts = sample_counts(&povm, state, n, rep_seed(seed, k))?;
            let est = estimate(&counts, &c)?;
            let d3 = est.p_sigma3_hat.expect("checked nontrivial") - truth_sigma3;
            let dn = est.p_n_hat.expect("checked nontrivial") - truth_n;
            se_sigma3 += d3 * d3;
            se_n += dn * dn;
        }
        rows.push(ConvergenceRow {
            n,
            rmse_sigma3: (se_sigma3 / reps as f64).sqrt(),
            rmse_n: (se_n / reps as f64).sqrt(),
        });
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`. `None` with fewer than two
/// distinct `x` or any non-positive value.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|&v| v.is_nan() || v <= 0.0)
    {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}
