//! Closed-form regret bounds and spectral comparison quantities.
//!
//! Everything here is a pure function of scalars and spectra, evaluated for
//! reporting next to empirical curves and for acceptance checks. The
//! delayed-UCB bounds come in a finite-time form with explicit constants, a
//! sharper variant that keeps the small correction terms, and asymptotic
//! forms (accelerated and plain mixing). The problem lower bound and the
//! instance-independent bound are order-level statements evaluated with
//! hidden constant 1 and must be read as such. The comparison terms `B` and
//! the aggregate `epsilon_c` factor summarize how a running-consensus bound
//! depends on the whole gossip spectrum rather than on `lambda2` alone.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid bound inputs: {reason}")]
    InvalidInputs { reason: String },
    #[error("spectrum contains a non-principal eigenvalue of unit magnitude: {value}")]
    SpectrumContainsUnitEigenvalue { value: f64 },
}

/// Magnitudes within this distance of 1 are treated as unit eigenvalues.
const UNIT_EIGENVALUE_TOL: f64 = 1e-12;

/// Scalar inputs of the closed-form bounds.
///
/// `delay` is the stage length actually used (the computed delay or any
/// upper bound of it; the finite-time bound stays valid under substitution).
/// `gap_cap` is an upper bound on all gaps, used only by the
/// instance-independent bound. `full_spectrum` and `gamma` feed the
/// consensus comparison terms.
#[derive(Debug, Clone)]
pub struct BoundInputs {
    pub gaps: Vec<f64>,
    pub sigma: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub n_nodes: usize,
    pub horizon: u64,
    pub delay: usize,
    pub lambda2_abs: f64,
    pub gamma: f64,
    pub gap_cap: f64,
    pub full_spectrum: Option<Vec<f64>>,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let fail = |reason: String| Err(AnalysisError::InvalidInputs { reason });
        if !(self.eta > 1.0) {
            return fail(format!("eta must be > 1, got {}", self.eta));
        }
        let cap = (self.eta - 1.0) / (7.0 * (self.eta + 1.0));
        if !(self.epsilon > 0.0 && self.epsilon < cap) {
            return fail(format!("epsilon must lie in (0, {cap:.6}), got {}", self.epsilon));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return fail(format!("sigma must be nonnegative, got {}", self.sigma));
        }
        if self.gaps.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return fail("gaps must be nonnegative and finite".into());
        }
        if self.n_nodes == 0 {
            return fail("n_nodes must be >= 1".into());
        }
        if self.delay == 0 {
            return fail("delay must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.lambda2_abs) {
            return fail(format!("lambda2 must be in [0, 1), got {}", self.lambda2_abs));
        }
        let max_gap = self.gaps.iter().cloned().fold(0.0, f64::max);
        if self.gap_cap < max_gap {
            return fail(format!(
                "gap cap {} is below the largest gap {max_gap}",
                self.gap_cap
            ));
        }
        Ok(())
    }

    fn ln_tn(&self) -> f64 {
        ((self.horizon as f64) * (self.n_nodes as f64)).ln().max(0.0)
    }

    fn gap_sum(&self) -> f64 {
        self.gaps.iter().sum()
    }

    /// `sum over positive gaps of scale / gap`.
    fn inverse_gap_sum(&self, scale: f64) -> f64 {
        self.gaps.iter().filter(|g| **g > 0.0).map(|g| scale / g).sum()
    }
}

/// Finite-time regret bound of delayed UCB with explicit constants:
/// `sum_{gap>0} 16 eta (1+2 eps) sigma^2 ln(TN) / gap` plus
/// `(N (6C+1) + 2 eta/(eta-1)) * sum of gaps`.
pub fn dducb_finite_time_bound(inputs: &BoundInputs) -> f64 {
    let first_scale =
        16.0 * inputs.eta * (1.0 + 2.0 * inputs.epsilon) * inputs.sigma * inputs.sigma
            * inputs.ln_tn();
    let n = inputs.n_nodes as f64;
    let c = inputs.delay as f64;
    let multiplier = n * (6.0 * c + 1.0) + 2.0 * inputs.eta / (inputs.eta - 1.0);
    inputs.inverse_gap_sum(first_scale) + multiplier * inputs.gap_sum()
}

/// Finite-time bound keeping the correction terms the plain form rounds up
/// (`1/K^eta`, `1/N^eta`, and `1/(NC)^(eta-1)` not replaced by 1). Never
/// exceeds [`dducb_finite_time_bound`].
pub fn dducb_finite_time_bound_sharp(inputs: &BoundInputs) -> f64 {
    let first_scale =
        16.0 * inputs.eta * (1.0 + 2.0 * inputs.epsilon) * inputs.sigma * inputs.sigma
            * inputs.ln_tn();
    let n = inputs.n_nodes as f64;
    let c = inputs.delay as f64;
    let k = inputs.gaps.len().max(1) as f64;
    let eta = inputs.eta;
    let multiplier = n * (2.0 * c + 1.0)
        + (2.0 * n * c / k.powf(eta)) * (1.0 + 1.0 / n.powf(eta))
        + 2.0 * eta / ((eta - 1.0) * (n * c).powf(eta - 1.0));
    inputs.inverse_gap_sum(first_scale) + multiplier * inputs.gap_sum()
}

/// `N ln(N/eps) / sqrt(ln(1/lambda2))`, the accelerated delay term of the
/// asymptotic bound; 0 when the spectrum already averages exactly.
fn accelerated_delay_term(inputs: &BoundInputs) -> f64 {
    if inputs.lambda2_abs <= 0.0 {
        return 0.0;
    }
    let n = inputs.n_nodes as f64;
    n * (n / inputs.epsilon).ln() / (1.0 / inputs.lambda2_abs).ln().sqrt()
}

/// Asymptotic regret bound with Chebyshev-accelerated mixing:
/// `sum_{gap>0} eta (1+eps) sigma^2 ln(TN) / gap` plus
/// `(N ln(N/eps)/sqrt(ln(1/lambda2)) + eta/(eta-1)) * sum of gaps`.
pub fn dducb_asymptotic_bound(inputs: &BoundInputs) -> f64 {
    let first_scale =
        inputs.eta * (1.0 + inputs.epsilon) * inputs.sigma * inputs.sigma * inputs.ln_tn();
    let tail = accelerated_delay_term(inputs) + inputs.eta / (inputs.eta - 1.0);
    inputs.inverse_gap_sum(first_scale) + tail * inputs.gap_sum()
}

/// Asymptotic regret bound with plain mixing: the delay term grows as
/// `N ln(N/eps) / ln(1/lambda2)`.
pub fn dducb_asymptotic_bound_unaccel(inputs: &BoundInputs) -> f64 {
    let first_scale =
        inputs.eta * (1.0 + inputs.epsilon) * inputs.sigma * inputs.sigma * inputs.ln_tn();
    let n = inputs.n_nodes as f64;
    let delay_term = if inputs.lambda2_abs <= 0.0 {
        0.0
    } else {
        n * (n / inputs.epsilon).ln() / (1.0 / inputs.lambda2_abs).ln()
    };
    let tail = delay_term + inputs.eta / (inputs.eta - 1.0);
    inputs.inverse_gap_sum(first_scale) + tail * inputs.gap_sum()
}

/// Order-level lower bound for the networked problem, with unit constants:
/// `sum_{gap>0} sigma^2 ln(TN)/gap + (N/K + 1) * sum of gaps`.
pub fn problem_lower_bound(inputs: &BoundInputs) -> f64 {
    let first_scale = inputs.sigma * inputs.sigma * inputs.ln_tn();
    let k = inputs.gaps.len().max(1) as f64;
    let second = (inputs.n_nodes as f64 / k + 1.0) * inputs.gap_sum();
    inputs.inverse_gap_sum(first_scale) + second
}

/// Order-level gap-free bound, with unit constants:
/// `sqrt(K T N sigma^2 ln(TN)) + K N gap_cap ln(N)/sqrt(ln(1/lambda2))`.
pub fn instance_independent_bound(inputs: &BoundInputs) -> f64 {
    let k = inputs.gaps.len().max(1) as f64;
    let n = inputs.n_nodes as f64;
    let first = if inputs.horizon == 0 {
        0.0
    } else {
        (k * inputs.horizon as f64 * n * inputs.sigma * inputs.sigma * inputs.ln_tn()).sqrt()
    };
    let second = if inputs.lambda2_abs <= 0.0 {
        0.0
    } else {
        k * n * inputs.gap_cap * n.ln() / (1.0 / inputs.lambda2_abs).ln().sqrt()
    };
    first + second
}

/// The delay factor multiplying the gap sum in the asymptotic bound,
/// `N ln N / sqrt(ln(1/lambda2))`, used in order comparisons.
pub fn dducb_second_term_proxy(n_nodes: usize, lambda2_abs: f64) -> f64 {
    if lambda2_abs <= 0.0 {
        return 0.0;
    }
    let n = n_nodes as f64;
    n * n.ln() / (1.0 / lambda2_abs).ln().sqrt()
}

/// Spectrum-dependent terms of the running-consensus comparison bound.
#[derive(Debug, Clone)]
pub struct CoopBoundTerms {
    /// `B = N (gamma/(gamma-1) + sqrt(N) sum_{j>=2} |l_j|/(1-|l_j|))`.
    pub b_exact: f64,
    /// `N (1 + l2'/ln(sqrt(N)/l2'))` with `l2' = sqrt(N) |lambda2|`; never
    /// exceeds `b_exact`.
    pub b_lower: f64,
    /// `sum_{j>=2} l_j^2/(1-l_j^2)`, the aggregate of the graph-dependent
    /// per-eigenvector inflation factors of a symmetric matrix.
    pub eps_c_aggregate: f64,
}

/// Evaluates the comparison terms from a full symmetric-matrix spectrum.
///
/// One eigenvalue (the one closest to +1, the principal one) is excluded;
/// it must be 1 up to numerical tolerance. Every remaining eigenvalue must
/// have magnitude strictly below 1, otherwise the sums diverge and
/// [`AnalysisError::SpectrumContainsUnitEigenvalue`] is returned.
pub fn coop_ucb_bound_terms(
    full_spectrum: &[f64],
    gamma: f64,
    n_nodes: usize,
) -> Result<CoopBoundTerms, AnalysisError> {
    if !(gamma > 1.0) {
        return Err(AnalysisError::InvalidInputs {
            reason: format!("gamma must be > 1, got {gamma}"),
        });
    }
    if full_spectrum.len() != n_nodes || n_nodes == 0 {
        return Err(AnalysisError::InvalidInputs {
            reason: format!(
                "spectrum has {} entries for {n_nodes} nodes",
                full_spectrum.len()
            ),
        });
    }
    let principal = full_spectrum
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.partial_cmp(b).expect("finite eigenvalues"))
        .map(|(i, _)| i)
        .expect("nonempty spectrum");
    if (full_spectrum[principal] - 1.0).abs() > 1e-9 {
        return Err(AnalysisError::InvalidInputs {
            reason: format!(
                "principal eigenvalue is {}, expected 1",
                full_spectrum[principal]
            ),
        });
    }
    let rest: Vec<f64> = full_spectrum
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != principal)
        .map(|(_, v)| *v)
        .collect();
    for &value in &rest {
        if value.abs() >= 1.0 - UNIT_EIGENVALUE_TOL {
            return Err(AnalysisError::SpectrumContainsUnitEigenvalue { value });
        }
    }
    let n = n_nodes as f64;
    let attenuation: f64 = rest.iter().map(|l| l.abs() / (1.0 - l.abs())).sum();
    let b_exact = n * (gamma / (gamma - 1.0) + n.sqrt() * attenuation);
    let lambda2_abs = rest.iter().map(|l| l.abs()).fold(0.0, f64::max);
    let lambda2_prime = n.sqrt() * lambda2_abs;
    let b_lower = if lambda2_prime <= 0.0 {
        n
    } else {
        n * (1.0 + lambda2_prime / (n.sqrt() / lambda2_prime).ln())
    };
    let eps_c_aggregate: f64 = rest.iter().map(|l| l * l / (1.0 - l * l)).sum();
    Ok(CoopBoundTerms { b_exact, b_lower, eps_c_aggregate })
}
