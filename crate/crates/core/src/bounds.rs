//! Midpoint curvature `ρ₀ = S''(β/2)/S(0)` and its universal bound.
//!
//! For any non-negative spectral weight the integrands of numerator and
//! denominator compare pointwise, so with `x = βω/2`
//!
//! ```text
//! ρ₀ ≤ (2/β)² · sup_x x²/cosh x
//! ```
//!
//! and, for the order-`n` nested moment with kernel `ω^(n+1)/sinh(βω/2)`,
//! the same argument gives the prefactor `(2/β)ⁿ · sup_x xⁿ/cosh x`. The
//! supremum sits at the root of `x·tanh x = n`.

use std::io::Write;

use rayon::prelude::*;

use crate::geometry::BandGrid;
use crate::matsubara::{curvature_at_midpoint, equal_time, nested_moment, SpectralDensity};
use crate::numeric::{bisect, coth, csch, kahan_sum};
use crate::{Error, Result};

/// Denominators below this are treated as "no noise channel".
pub const ZERO_NOISE: f64 = 1e-14;
/// Highest nested-moment order supported.
pub const MAX_ORDER: u32 = 6;

/// Rounded constants as usually quoted for the second-order bound.
pub const ROUNDED_X_STAR: f64 = 2.07;
pub const ROUNDED_SUP: f64 = 1.06;
pub const ROUNDED_A: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub order: u32,
    /// Root of `x·tanh x = order`.
    pub x_star: f64,
    /// `x_starⁿ / cosh x_star`.
    pub sup_val: f64,
    /// `2·sup_val^(1/n)`, so that the order-n moment ratio is at most
    /// `(a_const/β)ⁿ`; for `n = 2` this is `2√sup_val`.
    pub a_const: f64,
}

impl BoundConstants {
    /// `(2/β)ⁿ · sup_val`.
    pub fn bound(&self, beta: f64) -> f64 {
        (2.0 / beta).powi(self.order as i32) * self.sup_val
    }

    /// Gap that saturates the bound for a single peak: `2 x_star / β`.
    pub fn saturating_gap(&self, beta: f64) -> f64 {
        2.0 * self.x_star / beta
    }
}

pub fn bound_constants(order: u32) -> Result<BoundConstants> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::InvalidArgument(format!("bound order {order} outside 1..={MAX_ORDER}")));
    }
    let n = order as f64;
    let x_star = bisect(|x| x * x.tanh() - n, 1e-6, 50.0, 1e-13);
    let sup_val = x_star.powi(order as i32) / x_star.cosh();
    Ok(BoundConstants {
        order,
        x_star,
        sup_val,
        a_const: 2.0 * sup_val.powf(1.0 / n),
    })
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    Ok(())
}

/// Band-space midpoint curvature
/// `Σ_k Δ⁴ G_xx / sinh(βΔ/2)  /  Σ_k Δ² G_xx / tanh(βΔ/2)`.
pub fn rho0_band(grid: &BandGrid, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let points = grid.points();
    let den = kahan_sum(
        points
            .iter()
            .map(|p| p.gap * p.gap * coth(0.5 * beta * p.gap) * p.metric.xx),
    ) * grid.weight();
    if den < ZERO_NOISE {
        return Err(Error::ZeroNoise { value: den });
    }
    let num = kahan_sum(
        points
            .iter()
            .map(|p| p.gap.powi(4) * csch(0.5 * beta * p.gap) * p.metric.xx),
    ) * grid.weight();
    Ok(num / den)
}

/// `ρ₀ = S''(β/2) / S(0)` from a spectral density.
pub fn rho0_spectral(d: &SpectralDensity, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let den = equal_time(d, beta)?;
    if d.is_empty() || den < ZERO_NOISE {
        return Err(Error::ZeroNoise { value: den });
    }
    Ok(curvature_at_midpoint(d, beta)? / den)
}

/// Margin `(2/β)ⁿ sup_val − M_n(β/2)/S(0)`; never negative for a valid
/// density beyond rounding.
pub fn check_bound(d: &SpectralDensity, beta: f64, order: u32) -> Result<f64> {
    check_beta(beta)?;
    let constants = bound_constants(order)?;
    let den = equal_time(d, beta)?;
    if d.is_empty() || den < ZERO_NOISE {
        return Err(Error::ZeroNoise { value: den });
    }
    Ok(constants.bound(beta) - nested_moment(d, beta, order) / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub rho0: f64,
    pub rho0_beta2_over4: f64,
    pub margin: f64,
}

/// `ρ₀` of uniform-gap (single-peak) densities for `steps` gaps evenly
/// spaced over `[start, stop]`.
pub fn saturation_sweep(beta: f64, start: f64, stop: f64, steps: usize) -> Result<Vec<SweepRow>> {
    check_beta(beta)?;
    if steps < 10 {
        return Err(Error::InvalidArgument(format!("sweep needs at least 10 steps, got {steps}")));
    }
    if !(start > 0.0 && stop > start && stop.is_finite()) {
        return Err(Error::InvalidArgument(format!("bad sweep range {start}:{stop}")));
    }
    let step = (stop - start) / (steps - 1) as f64;
    (0..steps)
        .into_par_iter()
        .map(|i| {
            let delta = start + step * i as f64;
            let d = SpectralDensity::single(delta, 1.0)?;
            let rho0 = rho0_spectral(&d, beta)?;
            Ok(SweepRow {
                delta,
                rho0,
                rho0_beta2_over4: rho0 * beta * beta / 4.0,
                margin: check_bound(&d, beta, 2)?,
            })
        })
        .collect()
}

/// Row with the largest `ρ₀β²/4`.
pub fn sweep_maximum(rows: &[SweepRow]) -> Option<SweepRow> {
    rows.iter()
        .copied()
        .max_by(|a, b| a.rho0_beta2_over4.total_cmp(&b.rho0_beta2_over4))
}

/// Writes `delta,rho0,rho0_beta2_over4,margin` with 12 significant digits.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "delta,rho0,rho0_beta2_over4,margin")?;
    for r in rows {
        writeln!(
            out,
            "{:.11e},{:.11e},{:.11e},{:.11e}",
            r.delta, r.rho0, r.rho0_beta2_over4, r.margin
        )?;
    }
    Ok(())
}
