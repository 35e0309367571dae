//! Spectral densities, hyperbolic imaginary-time kernels and Matsubara
//! resummation.
//!
//! A [`SpectralDensity`] is a finite list of delta peaks of `Re σ_xx(ω)`,
//! each standing for the symmetric pair `±ω_p`. Every imaginary-time quantity
//! follows from it through the kernel
//!
//! ```text
//! K_m(ω, τ) = ω^(2m+1) cosh[(β/2 − τ)ω] / sinh(βω/2)
//! ```
//!
//! with the `1/2π` frequency measure and the two symmetric peaks combining
//! into an overall `1/π`. The Matsubara transform of one peak is
//! `(w/π)·2ω²/(ω² + ω_n²)`; all resummations use the `(1/β)Σ_n` convention.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;

use crate::geometry::BandGrid;
use crate::numeric::{cosh_over_sinh, euler_average, kahan_sum, richardson_doubling, Dd, KahanSum};
use crate::{Error, Result};

/// Below this `|βω|` the kernel uses its small-frequency series.
pub const SMALL_FREQUENCY: f64 = 1e-6;
/// Largest kernel order `m` accepted by [`kernel`].
pub const MAX_KERNEL_ORDER: u32 = 6;
/// Partial sums entering the Euler transformation.
pub const EULER_WINDOW: usize = 64;
/// Minimum number of positive Matsubara indices for a resummation.
pub const MIN_MATSUBARA: usize = 64;
/// Relative disagreement between successive accelerated estimates that is
/// reported as [`Error::NotConverged`].
pub const CONVERGENCE_TOL: f64 = 1e-6;

/// One delta peak of `Re σ_xx`, shared by `±omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub omega: f64,
    pub weight: f64,
}

/// Non-negative, even spectral weight as a list of delta peaks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectralDensity {
    peaks: Vec<Peak>,
}

impl SpectralDensity {
    /// Validates `omega ≥ 0` and `weight ≥ 0` for every peak.
    pub fn new(peaks: Vec<Peak>) -> Result<Self> {
        for p in &peaks {
            if !(p.omega.is_finite() && p.omega >= 0.0) {
                return Err(Error::InvalidArgument(format!("peak frequency {} must be ≥ 0", p.omega)));
            }
            if !(p.weight.is_finite() && p.weight >= 0.0) {
                return Err(Error::InvalidArgument(format!("peak weight {} must be ≥ 0", p.weight)));
            }
        }
        Ok(SpectralDensity { peaks })
    }

    pub fn from_pairs<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(omega, weight)| Peak { omega, weight })
                .collect(),
        )
    }

    pub fn single(omega: f64, weight: f64) -> Result<Self> {
        Self::from_pairs([(omega, weight)])
    }

    pub fn peaks(&self) -> &[Peak] {
        &self.peaks
    }

    pub fn total_weight(&self) -> f64 {
        kahan_sum(self.peaks.iter().map(|p| p.weight))
    }

    /// No peaks, or no weight in any of them.
    pub fn is_empty(&self) -> bool {
        self.peaks.iter().all(|p| p.weight == 0.0)
    }

    /// Multiplies every weight by `factor ≥ 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        SpectralDensity {
            peaks: self
                .peaks
                .iter()
                .map(|p| Peak {
                    omega: p.omega,
                    weight: p.weight * factor,
                })
                .collect(),
        }
    }

    /// Merges peaks whose frequencies agree to `rel_tol` (relative), summing
    /// their weights. The result is sorted by frequency.
    pub fn coalesced(&self, rel_tol: f64) -> Self {
        let mut sorted = self.peaks.clone();
        sorted.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        let mut out: Vec<Peak> = Vec::new();
        let mut run_start = f64::NAN;
        let mut weight = KahanSum::new();
        let mut moment = KahanSum::new();
        for p in sorted {
            if run_start.is_nan() {
                run_start = p.omega;
            } else if p.omega - run_start > rel_tol * run_start.abs() {
                out.push(merged_peak(run_start, &weight, &moment));
                run_start = p.omega;
                weight = KahanSum::new();
                moment = KahanSum::new();
            }
            weight.add(p.weight);
            moment.add(p.weight * p.omega);
        }
        if !run_start.is_nan() {
            out.push(merged_peak(run_start, &weight, &moment));
        }
        SpectralDensity { peaks: out }
    }

    /// `(1/π) Σ_p w_p f(ω_p)`.
    fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        kahan_sum(self.peaks.iter().map(|p| p.weight * f(p.omega))) / PI
    }
}

fn merged_peak(start: f64, weight: &KahanSum, moment: &KahanSum) -> Peak {
    let w = weight.value();
    let omega = if w > 0.0 { moment.value() / w } else { start };
    Peak { omega, weight: w }
}

/// `|ω|^power · cosh(offset·ω) / sinh(βω/2)` with `offset = β/2 − τ`.
///
/// For `|βω| < 1e-6` returns the leading small-frequency term
/// `(2/β)|ω|^(power−1)`, which is `2/β` for `power = 1` and tends to zero
/// for higher powers.
pub fn hyperbolic_kernel(power: i32, omega: f64, offset: f64, beta: f64) -> f64 {
    let w = omega.abs();
    if beta * w < SMALL_FREQUENCY {
        return 2.0 / beta * w.powi(power - 1);
    }
    w.powi(power) * cosh_over_sinh(offset * w, 0.5 * beta * w)
}

/// `ω^(2m+1) cosh[(β/2 − τ)ω] / sinh(βω/2)` for `0 ≤ τ ≤ β`, `m ≤ 6`.
pub fn kernel(m: u32, omega: f64, tau: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if m > MAX_KERNEL_ORDER {
        return Err(Error::InvalidArgument(format!("kernel order {m} exceeds {MAX_KERNEL_ORDER}")));
    }
    if !(0.0..=beta).contains(&tau) {
        return Err(Error::Domain(format!("tau = {tau} outside [0, {beta}]")));
    }
    Ok(hyperbolic_kernel(2 * m as i32 + 1, omega, 0.5 * beta - tau, beta))
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    Ok(())
}

/// `S(τ)` sampled on `τ_j = jβ/(n_tau − 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TauCorrelator {
    beta: f64,
    values: Vec<f64>,
}

impl TauCorrelator {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n_tau(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tau(&self, j: usize) -> f64 {
        self.beta * j as f64 / (self.values.len() - 1) as f64
    }

    /// Midpoint value `S(β/2)` (grid size is odd).
    pub fn midpoint(&self) -> f64 {
        self.values[self.values.len() / 2]
    }

    /// `s(τ) = S(τ)/S(0)`.
    pub fn normalized(&self) -> Vec<f64> {
        let s0 = self.values[0];
        self.values.iter().map(|v| v / s0).collect()
    }

    /// Largest `|S(τ_j) − S(β − τ_j)|` relative to `S(0)`.
    pub fn kms_violation(&self) -> f64 {
        let n = self.values.len();
        (0..n)
            .map(|j| (self.values[j] - self.values[n - 1 - j]).abs())
            .fold(0.0, f64::max)
            / self.values[0]
    }

    /// Nonincreasing on `[0, β/2]` up to `rel_tol·S(0)`.
    pub fn is_monotone_to_midpoint(&self, rel_tol: f64) -> bool {
        let half = self.values.len() / 2;
        let slack = rel_tol * self.values[0];
        self.values[..=half].windows(2).all(|w| w[1] <= w[0] + slack)
    }

    /// Writes `tau,S,s_normalized` with 12 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "tau,S,s_normalized")?;
        let s = self.normalized();
        for (j, (v, sn)) in self.values.iter().zip(&s).enumerate() {
            writeln!(out, "{:.11e},{:.11e},{:.11e}", self.tau(j), v, sn)?;
        }
        Ok(())
    }
}

/// `S(τ_j) = (1/π) Σ_p w_p K_0(ω_p, τ_j)` on an odd grid of `n_tau` points.
pub fn spectral_correlator(d: &SpectralDensity, beta: f64, n_tau: usize) -> Result<TauCorrelator> {
    check_beta(beta)?;
    if d.is_empty() {
        return Err(Error::EmptyDensity);
    }
    if n_tau < 3 || n_tau.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("n_tau must be odd and ≥ 3, got {n_tau}")));
    }
    let last = n_tau - 1;
    let values = (0..n_tau)
        .map(|j| {
            // β/2 − τ_j, exactly antisymmetric under j ↔ n_tau − 1 − j
            let offset = beta * (last as f64 - 2.0 * j as f64) / (2.0 * last as f64);
            d.integrate(|w| hyperbolic_kernel(1, w, offset, beta))
        })
        .collect();
    Ok(TauCorrelator { beta, values })
}

/// Equal-time correlator `S(0) = (1/π) Σ_p w_p ω_p coth(βω_p/2)`.
pub fn equal_time(d: &SpectralDensity, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(d.integrate(|w| hyperbolic_kernel(1, w, 0.5 * beta, beta)))
}

/// `S(τ)` at a single imaginary time.
pub fn correlator_at(d: &SpectralDensity, tau: f64, beta: f64) -> Result<f64> {
    kernel(0, 0.0, tau, beta)?;
    Ok(d.integrate(|w| hyperbolic_kernel(1, w, 0.5 * beta - tau, beta)))
}

/// Relative tolerance for merging degenerate band gaps into one peak.
pub const COALESCE_TOL: f64 = 1e-12;

/// Spectral density of the interband bubble on a mesh: one peak
/// `(Δ(k), π Δ(k) G_xx(k) (2π/n)²)` per point, negligible peaks dropped and
/// equal gaps merged.
pub fn band_density(grid: &BandGrid) -> SpectralDensity {
    let weight = grid.weight();
    let raw: Vec<Peak> = grid
        .points()
        .iter()
        .map(|p| Peak {
            omega: p.gap,
            weight: PI * p.gap * p.metric.xx * weight,
        })
        .collect();
    let max = raw.iter().map(|p| p.weight).fold(0.0, f64::max);
    let kept: Vec<Peak> = raw
        .into_iter()
        .filter(|p| max > 0.0 && p.weight >= 1e-14 * max)
        .collect();
    SpectralDensity { peaks: kept }.coalesced(COALESCE_TOL)
}

fn matsubara_frequency(n: i64, beta: f64) -> Dd {
    Dd::PI.scale(2.0 * n as f64) / Dd::from_f64(beta)
}

/// `π·S(iω_n)` per peak before the `1/π`, in double-double:
/// `Σ_p w_p 2ω_p² ω_n^(2·power) /(ω_p² + ω_n²)`.
fn peak_sum_dd(d: &SpectralDensity, n: i64, beta: f64, power: u32) -> Dd {
    let wn = matsubara_frequency(n, beta);
    let wn2 = wn * wn;
    let mut lift = Dd::from_f64(1.0);
    for _ in 0..power {
        lift = lift * wn2;
    }
    let mut acc = Dd::ZERO;
    for p in &d.peaks {
        if p.weight == 0.0 {
            continue;
        }
        let term = if p.omega == 0.0 {
            // ω → 0 limit: 2 at n = 0, zero otherwise
            if n == 0 && power == 0 {
                Dd::from_f64(2.0)
            } else {
                Dd::ZERO
            }
        } else {
            let w2 = Dd::prod(p.omega, p.omega);
            (w2.scale(2.0) * lift) / (w2 + wn2)
        };
        acc += term * Dd::from_f64(p.weight);
    }
    acc
}

/// `S(iω_n) = ∫₀^β e^{iω_n τ} S(τ) dτ = (1/π) Σ_p w_p 2ω_p²/(ω_p² + ω_n²)`.
pub fn matsubara_transform(d: &SpectralDensity, beta: f64, n: i64) -> f64 {
    (peak_sum_dd(d, n, beta, 0) / Dd::PI).to_f64()
}

/// Matsubara components `S(iω_n)` for `n = −N..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatsubaraSeries {
    beta: f64,
    max_index: usize,
    terms: Vec<f64>,
}

impl MatsubaraSeries {
    pub fn new(d: &SpectralDensity, beta: f64, max_index: usize) -> Result<Self> {
        check_beta(beta)?;
        let n = max_index as i64;
        let terms = (-n..=n)
            .into_par_iter()
            .map(|k| matsubara_transform(d, beta, k))
            .collect();
        Ok(MatsubaraSeries {
            beta,
            max_index,
            terms,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn max_index(&self) -> usize {
        self.max_index
    }

    /// `S(iω_n)` for `|n| ≤ N`.
    pub fn get(&self, n: i64) -> Option<f64> {
        let idx = n + self.max_index as i64;
        usize::try_from(idx).ok().and_then(|i| self.terms.get(i).copied())
    }

    pub fn terms(&self) -> &[f64] {
        &self.terms
    }

    /// Plain truncated `(1/β) Σ_{|n| ≤ N} S(iω_n)`.
    pub fn truncated_sum(&self) -> f64 {
        kahan_sum(self.terms.iter().copied()) / self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Series {
    /// `Σ S(iω_n)`
    Direct,
    /// `Σ (−1)ⁿ S(iω_n)`
    Alternating,
    /// `Σ (−1)^{n+1} ω_n² S(iω_n)`
    WeightedAlternating,
}

/// Symmetric partial sums `P_k = (1/β)(a_0 + 2 Σ_{n=1}^{k} σ_n a_n)` for
/// `k = 0..=N`, in double-double.
fn partial_sums(d: &SpectralDensity, beta: f64, max_index: usize, series: Series) -> Vec<Dd> {
    let power = if series == Series::WeightedAlternating { 1 } else { 0 };
    let terms: Vec<Dd> = (0..=max_index as i64)
        .into_par_iter()
        .map(|n| peak_sum_dd(d, n, beta, power))
        .collect();
    let norm = Dd::from_f64(1.0) / (Dd::PI * Dd::from_f64(beta));
    let mut out = Vec::with_capacity(terms.len());
    let mut acc = Dd::ZERO;
    for (n, t) in terms.into_iter().enumerate() {
        let sign = match series {
            Series::Direct => 1.0,
            Series::Alternating => {
                if n % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Series::WeightedAlternating => {
                if n % 2 == 0 {
                    -1.0
                } else {
                    1.0
                }
            }
        };
        let multiplicity = if n == 0 { 1.0 } else { 2.0 };
        acc += t.scale(sign * multiplicity);
        out.push(acc * norm);
    }
    out
}

fn check_resummation(beta: f64, max_index: usize) -> Result<()> {
    check_beta(beta)?;
    if max_index < MIN_MATSUBARA {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_MATSUBARA} Matsubara indices, got {max_index}"
        )));
    }
    Ok(())
}

fn euler_tail(partials: &[Dd]) -> Result<f64> {
    let window = &partials[partials.len() - EULER_WINDOW..];
    let (value, previous) = euler_average(window);
    let scale = window.iter().map(|p| p.to_f64().abs()).fold(0.0, f64::max);
    let diff = (value - previous).abs().to_f64();
    let (v, prev) = (value.to_f64(), previous.to_f64());
    if diff > CONVERGENCE_TOL * v.abs() + 1e-28 * scale {
        return Err(Error::NotConverged {
            first: v,
            second: prev,
        });
    }
    Ok(v)
}

/// `(1/β) Σ_{n=−N..N} (−1)ⁿ S(iω_n)`, equal to `S(β/2)` in the limit.
///
/// With `accelerate`, the last 64 partial sums go through Euler's
/// transformation; successive Euler levels disagreeing by more than 1e-6
/// relative raise [`Error::NotConverged`].
pub fn alternating_sum(d: &SpectralDensity, beta: f64, max_index: usize, accelerate: bool) -> Result<f64> {
    check_resummation(beta, max_index)?;
    if d.is_empty() {
        return Ok(0.0);
    }
    let partials = partial_sums(d, beta, max_index, Series::Alternating);
    if accelerate {
        euler_tail(&partials)
    } else {
        Ok(partials[max_index].to_f64())
    }
}

/// `(1/β) Σ_{n=−N..N} (−1)^{n+1} ω_n² S(iω_n)`, the midpoint curvature
/// `d²S/dτ²|_{β/2}`.
///
/// The raw series does not converge (terms tend to `±2ω²` per peak), so the
/// value is only defined through Euler summation, which is always applied.
pub fn weighted_alternating_sum(d: &SpectralDensity, beta: f64, max_index: usize) -> Result<f64> {
    check_resummation(beta, max_index)?;
    if d.is_empty() {
        return Ok(0.0);
    }
    euler_tail(&partial_sums(d, beta, max_index, Series::WeightedAlternating))
}

/// `(1/β) Σ_{n=−N..N} S(iω_n)`, equal to `S(0)` in the limit.
///
/// The positive series converges like `1/N`; with `accelerate`, Richardson
/// extrapolation over `N/16, N/8, …, N` removes the power-law tail.
pub fn direct_sum(d: &SpectralDensity, beta: f64, max_index: usize, accelerate: bool) -> Result<f64> {
    check_resummation(beta, max_index)?;
    if d.is_empty() {
        return Ok(0.0);
    }
    let partials = partial_sums(d, beta, max_index, Series::Direct);
    if !accelerate {
        return Ok(partials[max_index].to_f64());
    }
    let levels: Vec<f64> = (0..5)
        .rev()
        .map(|shift| partials[max_index >> shift].to_f64())
        .collect();
    let full = richardson_doubling(&levels);
    let coarse = richardson_doubling(&levels[1..]);
    if (full - coarse).abs() > CONVERGENCE_TOL * full.abs() {
        return Err(Error::NotConverged {
            first: full,
            second: coarse,
        });
    }
    Ok(full)
}

/// `d²S/dτ²|_{β/2} = (1/π) Σ_p w_p ω_p³ / sinh(βω_p/2)`.
pub fn curvature_at_midpoint(d: &SpectralDensity, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if d.is_empty() {
        return Err(Error::EmptyDensity);
    }
    Ok(nested_moment(d, beta, 2))
}

/// Order-`n` nested moment at the midpoint, `(1/π) Σ_p w_p ω_p^(n+1)/sinh(βω_p/2)`.
///
/// For even `n` this is `dⁿS/dτⁿ` at `β/2`; odd orders use the same
/// magnitude-weighted kernel.
pub fn nested_moment(d: &SpectralDensity, beta: f64, order: u32) -> f64 {
    d.integrate(|w| hyperbolic_kernel(order as i32 + 1, w, 0.0, beta))
}
