//! Parametric two-sample machinery.
//!
//! Both sample sets on either side of a candidate edge are summarised as Normal
//! distributions. Their dissimilarity is the total variation (TV) distance
//! between the two densities, evaluated in closed form from the Normal CDF at
//! the points where the two densities cross. Because the TV distance is
//! invariant to a common shift and scale, it only depends on the normalized
//! mean difference and the standard deviation ratio, so it is tabulated once
//! in a two-dimensional [`TvLut`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard deviations are clamped to this floor (gray units) before they are
/// divided by. Flat windows have zero variance.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Below this |a| the crossing-point quadratic is treated as linear
/// (equal variances).
const DEGENERATE_QUADRATIC: f64 = 1e-12;

/// Parameters of a Normal distribution fitted to one sample window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalParams {
    pub mu: f64,
    pub sigma: f64,
}

impl NormalParams {
    pub fn new(mu: f64, sigma: f64) -> Self {
        Self { mu, sigma }
    }

    pub fn from_variance(mu: f64, sigma2: f64) -> Self {
        Self {
            mu,
            sigma: sigma2.max(0.0).sqrt(),
        }
    }

    /// Copy with `sigma` raised to [`SIGMA_FLOOR`].
    pub fn clamped(self) -> Self {
        Self {
            mu: self.mu,
            sigma: self.sigma.max(SIGMA_FLOOR),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        (-0.5 * z * z).exp() / (self.sigma * (2.0 * std::f64::consts::PI).sqrt())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        std_normal_cdf((x - self.mu) / self.sigma)
    }
}

/// Shift- and scale-free form of a pair of Normal distributions: the mean
/// difference in units of the smaller deviation, and the deviation ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedPair {
    pub mu_prime: f64,
    pub sigma_prime: f64,
}

/// Standard Normal CDF via the complementary error function.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Abscissae where the two densities are equal, in ascending order.
///
/// Distributions with (numerically) equal deviations cross once, at the
/// midpoint of the means; the coincident pair is returned.
pub fn pdf_intersections(a: NormalParams, b: NormalParams) -> (f64, f64) {
    let (va, vb) = (a.sigma * a.sigma, b.sigma * b.sigma);
    let qa = 1.0 / (2.0 * va) - 1.0 / (2.0 * vb);
    if qa.abs() < DEGENERATE_QUADRATIC {
        let mid = 0.5 * (a.mu + b.mu);
        return (mid, mid);
    }
    let qb = -a.mu / va + b.mu / vb;
    let qc = a.mu * a.mu / (2.0 * va) - b.mu * b.mu / (2.0 * vb) - (b.sigma / a.sigma).ln();
    // Two Normals with different deviations always cross twice, so the
    // discriminant is non-negative up to round-off.
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
    // Stable form: avoid subtracting nearly equal quantities.
    let q = -0.5 * (qb + qb.signum() * disc);
    let (r1, r2) = if q == 0.0 {
        // qb == 0 and disc == 0: double root at zero.
        (0.0, 0.0)
    } else {
        (q / qa, qc / q)
    };
    if r1 <= r2 {
        (r1, r2)
    } else {
        (r2, r1)
    }
}

/// Probability mass of `p` on `[lo, hi]`, computed on the tail that keeps the
/// subtraction well conditioned.
fn mass(p: NormalParams, lo: f64, hi: f64) -> f64 {
    let zl = (lo - p.mu) / p.sigma;
    let zh = (hi - p.mu) / p.sigma;
    if zl > 0.0 {
        std_normal_cdf(-zl) - std_normal_cdf(-zh)
    } else {
        std_normal_cdf(zh) - std_normal_cdf(zl)
    }
}

/// Total variation distance between two Normal distributions, in `[0, 1]`.
///
/// The real line is split at the density crossings; on each interval one
/// density dominates, so the absolute difference integrates to the absolute
/// difference of the interval masses.
pub fn tv_distance(a: NormalParams, b: NormalParams) -> f64 {
    if a == b {
        return 0.0;
    }
    let (x1, x2) = pdf_intersections(a, b);
    let bounds = [f64::NEG_INFINITY, x1, x2, f64::INFINITY];
    let total: f64 = bounds
        .windows(2)
        .map(|w| (mass(a, w[0], w[1]) - mass(b, w[0], w[1])).abs())
        .sum();
    (0.5 * total).clamp(0.0, 1.0)
}

/// Reduce a pair to `(|Δμ| / min σ, max σ / min σ)`. Symmetric in its arguments.
pub fn normalize(a: NormalParams, b: NormalParams) -> NormalizedPair {
    let (lo, hi) = if a.sigma <= b.sigma {
        (a.sigma, b.sigma)
    } else {
        (b.sigma, a.sigma)
    };
    NormalizedPair {
        mu_prime: (b.mu - a.mu).abs() / lo,
        sigma_prime: hi / lo,
    }
}

/// Two-sample t statistic for windows of `m` samples each.
pub fn t_statistic(a: NormalParams, b: NormalParams, m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidConfig(format!(
            "t statistic needs at least 2 samples, got {m}"
        )));
    }
    let pooled = a.sigma * a.sigma + b.sigma * b.sigma;
    if pooled <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((a.mu - b.mu) / (pooled / m as f64).sqrt())
}

/// Extent and resolution of a [`TvLut`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LutConfig {
    pub mu_max: f64,
    pub sigma_max: f64,
    pub step: f64,
}

impl Default for LutConfig {
    fn default() -> Self {
        Self {
            mu_max: 8.0,
            sigma_max: 8.0,
            step: 1.0 / 64.0,
        }
    }
}

/// Tabulated TV distance `Δ(μ′, σ′)` between `N(0, 1)` and `N(μ′, σ′²)`.
#[derive(Debug, Clone)]
pub struct TvLut {
    config: LutConfig,
    mu_len: usize,
    sigma_len: usize,
    inv_step: f64,
    /// Row-major over (sigma index, mu index).
    values: Vec<f64>,
}

impl TvLut {
    pub fn build(config: LutConfig) -> Result<Self> {
        let LutConfig {
            mu_max,
            sigma_max,
            step,
        } = config;
        if !(mu_max > 0.0 && mu_max.is_finite()) {
            return Err(Error::InvalidConfig(format!("LUT mu_max must be > 0, got {mu_max}")));
        }
        if !(sigma_max >= 1.0 && sigma_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "LUT sigma_max must be >= 1, got {sigma_max}"
            )));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidConfig(format!("LUT step must be > 0, got {step}")));
        }
        let mu_len = (mu_max / step).round() as usize + 1;
        let sigma_len = ((sigma_max - 1.0) / step).round() as usize + 1;
        let reference = NormalParams::new(0.0, 1.0);
        let mut values = Vec::with_capacity(mu_len * sigma_len);
        for si in 0..sigma_len {
            let sigma = 1.0 + si as f64 * step;
            for mi in 0..mu_len {
                let mu = mi as f64 * step;
                values.push(tv_distance(reference, NormalParams::new(mu, sigma)));
            }
        }
        Ok(Self {
            config,
            mu_len,
            sigma_len,
            inv_step: 1.0 / step,
            values,
        })
    }

    pub fn config(&self) -> LutConfig {
        self.config
    }

    /// Grid shape as `(mu nodes, sigma nodes)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.mu_len, self.sigma_len)
    }

    pub fn mu_at(&self, mi: usize) -> f64 {
        mi as f64 * self.config.step
    }

    pub fn sigma_at(&self, si: usize) -> f64 {
        1.0 + si as f64 * self.config.step
    }

    /// Table entry at grid node `(mi, si)`.
    pub fn node(&self, mi: usize, si: usize) -> f64 {
        self.values[si * self.mu_len + mi]
    }

    /// Bilinear interpolation; coordinates outside the table clamp to its edge.
    pub fn lookup(&self, p: NormalizedPair) -> f64 {
        let (mi, mf) = axis_cell(p.mu_prime * self.inv_step, self.mu_len);
        let (si, sf) = axis_cell((p.sigma_prime - 1.0) * self.inv_step, self.sigma_len);
        let row0 = si * self.mu_len;
        let v00 = self.values[row0 + mi];
        if mf == 0.0 && sf == 0.0 {
            return v00;
        }
        let mi1 = (mi + 1).min(self.mu_len - 1);
        let row1 = (si + 1).min(self.sigma_len - 1) * self.mu_len;
        let v10 = self.values[row0 + mi1];
        let v01 = self.values[row1 + mi];
        let v11 = self.values[row1 + mi1];
        let lo = v00 + (v10 - v00) * mf;
        let hi = v01 + (v11 - v01) * mf;
        lo + (hi - lo) * sf
    }

    /// TV distance of a raw pair through the table.
    pub fn distance(&self, a: NormalParams, b: NormalParams) -> f64 {
        self.lookup(normalize(a.clamped(), b.clamped()))
    }

    /// Rows of `(mu_prime, sigma_prime, delta)` for debugging.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "mu_prime,sigma_prime,delta")?;
        for si in 0..self.sigma_len {
            for mi in 0..self.mu_len {
                writeln!(out, "{},{},{}", self.mu_at(mi), self.sigma_at(si), self.node(mi, si))?;
            }
        }
        Ok(())
    }
}

/// Split a fractional grid coordinate into a cell index and weight, clamped
/// to `[0, len - 1]`.
fn axis_cell(coord: f64, len: usize) -> (usize, f64) {
    let last = (len - 1) as f64;
    if !(coord > 0.0) {
        return (0, 0.0);
    }
    if coord >= last {
        return (len - 1, 0.0);
    }
    let i = coord.floor();
    (i as usize, coord - i)
}
