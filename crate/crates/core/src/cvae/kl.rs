//! Closed-form KL terms of the mixture upper bound.

use crate::error::{Error, Result};

use super::prior::GmmPrior;

/// `KL(N(mu_q, diag var_q) || N(mu_p, diag var_p))`.
pub fn kl_diag_gaussians(mu_q: &[f64], var_q: &[f64], mu_p: &[f64], var_p: &[f64]) -> Result<f64> {
    let h = mu_q.len();
    if var_q.len() != h || mu_p.len() != h || var_p.len() != h {
        return Err(Error::DimensionMismatch {
            expected: h,
            got: var_q.len().min(mu_p.len()).min(var_p.len()),
        });
    }
    if let Some(v) = var_q.iter().chain(var_p).find(|&&v| !(v > 0.0)) {
        return Err(Error::invalid(format!("variance must be positive, got {v}")));
    }
    let mut kl = 0.0;
    for j in 0..h {
        let d = mu_p[j] - mu_q[j];
        kl += var_q[j] / var_p[j] + d * d / var_p[j] - 1.0 + (var_p[j] / var_q[j]).ln();
    }
    Ok(0.5 * kl)
}

/// KL between the diagonal Gaussian `(mu, exp(logvar))` and an isotropic
/// component `N(mean, s2 I)`. This is the form used inside training.
pub(crate) fn kl_logvar_isotropic(mu: &[f64], logvar: &[f64], mean: &[f64], s2: f64) -> f64 {
    let ln_s2 = s2.ln();
    let mut kl = 0.0;
    for j in 0..mu.len() {
        let d = mean[j] - mu[j];
        kl += logvar[j].exp() / s2 + d * d / s2 - 1.0 + ln_s2 - logvar[j];
    }
    0.5 * kl
}

/// `KL(w || pi)` with `0 ln(0 / q) = 0`. Mass in `w` where `pi` is zero is a
/// degenerate input.
pub fn categorical_kl(w: &[f64], pi: &[f64]) -> Result<f64> {
    if w.len() != pi.len() {
        return Err(Error::DimensionMismatch {
            expected: pi.len(),
            got: w.len(),
        });
    }
    let mut kl = 0.0;
    for (c, (&a, &b)) in w.iter().zip(pi).enumerate() {
        if a <= 0.0 {
            continue;
        }
        if b <= 0.0 {
            return Err(Error::Degenerate(format!(
                "prior weight of component {c} is zero where the classifier assigns {a}"
            )));
        }
        kl += a * (a / b).ln();
    }
    Ok(kl)
}

fn check_simplex(w: &[f64]) -> Result<()> {
    if w.iter().any(|&v| !(v >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("classifier weights must form a simplex"));
    }
    Ok(())
}

/// The mixture KL upper bound for one row:
/// `sum_c w_c KL(q(z | x, c) || p(z | c)) + KL(w || p(c))`.
///
/// `heads[c] = (mu_c, logvar_c)` are the encoder outputs for component `c`.
pub fn kl_upper_bound(heads: &[(Vec<f64>, Vec<f64>)], prior: &GmmPrior, weights: &[f64]) -> Result<f64> {
    let (gauss, cat) = kl_upper_bound_parts(heads, prior, weights)?;
    Ok(gauss + cat)
}

/// The two summands of [`kl_upper_bound`]: weighted Gaussian part, categorical part.
pub fn kl_upper_bound_parts(heads: &[(Vec<f64>, Vec<f64>)], prior: &GmmPrior, weights: &[f64]) -> Result<(f64, f64)> {
    let k = prior.components();
    if heads.len() != k || weights.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: heads.len().min(weights.len()),
        });
    }
    check_simplex(weights)?;
    let mut gauss = 0.0;
    for (c, (mu, logvar)) in heads.iter().enumerate() {
        if weights[c] == 0.0 {
            continue;
        }
        let var_q: Vec<f64> = logvar.iter().map(|v| v.exp()).collect();
        let var_p = vec![prior.variances[c]; mu.len()];
        gauss += weights[c] * kl_diag_gaussians(mu, &var_q, &prior.means[c], &var_p)?;
    }
    Ok((gauss, categorical_kl(weights, &prior.weights)?))
}
