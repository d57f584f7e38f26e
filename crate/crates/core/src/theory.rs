//! Finite-sample constants of the support recovery guarantee, as a calculator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryInputs {
    pub n: u64,
    pub p: u64,
    #[serde(rename = "M")]
    pub m: u64,
    /// Number of true differential edges.
    pub s: u64,
    /// Eigenvalue decay exponent, `> 1`.
    pub beta: f64,
    pub sigma_max: f64,
    /// Smallest eigenvalue of the population Kronecker Hessian.
    pub lambda_min: f64,
    /// Entrywise l1 norm of the truncated difference matrix.
    pub delta_l1: f64,
    /// Truncation bias.
    pub nu: f64,
    /// Smallest Hilbert-Schmidt norm over true edges.
    pub tau: f64,
    /// Overrides the concentration radius; `0` gives the zero-noise limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl TheoryInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.m == 0 || self.s == 0 {
            return Err(Error::InvalidArgument("n, p, M and s must be positive".into()));
        }
        if !(self.beta > 1.0) || !self.beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta must exceed 1, got {}", self.beta)));
        }
        for (name, v) in [
            ("sigma_max", self.sigma_max),
            ("lambda_min", self.lambda_min),
            ("delta_l1", self.delta_l1),
            ("nu", self.nu),
            ("tau", self.tau),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(Error::InvalidArgument(format!("delta must be finite and >= 0, got {d}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub delta: f64,
    pub lambda_n: f64,
    pub kappa: f64,
    pub omega: f64,
    /// Undefined when `kappa <= 0`.
    pub gamma: Option<f64>,
    /// Open interval of admissible edge thresholds, if nonempty.
    pub epsilon_window: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_reason: Option<String>,
}

/// `M^{1+beta} sqrt(2 (log p + log M + log n) / n)`.
pub fn concentration_radius(n: u64, p: u64, m: u64, beta: f64) -> f64 {
    let (n, p, m) = (n as f64, p as f64, m as f64);
    m.powf(1.0 + beta) * (2.0 * (p.ln() + m.ln() + n.ln()) / n).sqrt()
}

pub fn compute_constants(inp: &TheoryInputs) -> Result<TheoryConstants> {
    inp.validate()?;
    let (p, m, s) = (inp.p as f64, inp.m as f64, inp.s as f64);
    let delta = inp
        .delta
        .unwrap_or_else(|| concentration_radius(inp.n, inp.p, inp.m, inp.beta));
    let spread = delta * delta + 2.0 * delta * inp.sigma_max;
    let lambda_n = 2.0 * m * (spread * inp.delta_l1 + 2.0 * delta);
    let kappa = 0.5 * inp.lambda_min - 8.0 * m * m * s * spread;
    let omega = 4.0 * m * p * p * inp.nu * spread.sqrt();
    let gamma = (kappa > 0.0).then(|| {
        9.0 * lambda_n * lambda_n * s / (kappa * kappa)
            + 2.0 * lambda_n / kappa * (omega * omega + 2.0 * p * p * inp.nu)
    });
    let (epsilon_window, window_reason) = match gamma {
        None => (None, Some(format!("kappa = {kappa} is not positive"))),
        Some(g) => {
            let lo = g + inp.nu;
            let hi = inp.tau - lo;
            if lo < hi {
                (Some((lo, hi)), None)
            } else {
                (None, Some(format!("tau = {} <= 2 (Gamma + nu) = {}", inp.tau, 2.0 * lo)))
            }
        }
    };
    Ok(TheoryConstants {
        delta,
        lambda_n,
        kappa,
        omega,
        gamma,
        epsilon_window,
        window_reason,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `0 <= Gamma < tau/2 - nu`.
    pub gamma_ok: bool,
    /// `tau/2 - nu - Gamma`; absent when Gamma is undefined.
    pub gamma_slack: Option<f64>,
    /// `delta < bound`.
    pub delta_ok: bool,
    pub delta_bound: f64,
    pub delta_slack: f64,
}

pub fn check_conditions(inp: &TheoryInputs) -> Result<ConditionReport> {
    let c = compute_constants(inp)?;
    let (m, s) = (inp.m as f64, inp.s as f64);
    let gamma_slack = c.gamma.map(|g| inp.tau / 2.0 - inp.nu - g);
    let gamma_ok = matches!((c.gamma, gamma_slack), (Some(g), Some(sl)) if g >= 0.0 && sl > 0.0);
    let delta_bound = 0.25
        * ((inp.lambda_min + 16.0 * m * m * s * inp.sigma_max * inp.sigma_max) / (m * m * s)).sqrt()
        - inp.sigma_max;
    let delta_slack = delta_bound - c.delta;
    Ok(ConditionReport {
        gamma_ok,
        gamma_slack,
        delta_ok: delta_slack > 0.0,
        delta_bound,
        delta_slack,
    })
}
