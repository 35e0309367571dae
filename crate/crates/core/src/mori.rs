//! Exact diagonalization of interacting spinless fermion rings and the Mori
//! memory-function machinery built on the Kubo–Mori inner product.
//!
//! The ring Hamiltonian and current are
//!
//! ```text
//! H = −t Σ_j (c†_{j+1} c_j + h.c.) + V Σ_j n_j n_{j+1}
//! J = i t Σ_j (c†_{j+1} c_j − h.c.)
//! ```
//!
//! with `c_L ≡ c_0`. Occupation-number states are bit strings ordered by
//! site (Jordan–Wigner), so the boundary hop `c†_0 c_{L−1}` picks up the sign
//! `(−1)^(N−1)` from the other particles it passes: periodic for odd and
//! antiperiodic for even particle number in the spin language.
//!
//! Everything downstream lives in the energy eigenbasis, where the
//! Liouvillian `L = [H, ·]` acts on `|m⟩⟨n|` as multiplication by
//! `E_m − E_n`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::bounds::bound_constants;
use crate::matsubara::{Peak, SpectralDensity};
use crate::numeric::kahan_sum;
use crate::{Error, Result};

pub const MAX_SITES: usize = 12;
pub const MAX_LEVELS: usize = 6;
pub const MAX_NESTED_ORDER: u32 = 6;
/// Level spacing treated as an exact degeneracy in Kubo–Mori weights.
pub const DEGENERACY_TOL: f64 = 1e-10;
/// `b²_k` below this ends the Mori chain.
pub const TERMINATION_TOL: f64 = 1e-12;
/// `(J|J)` below this counts as a vanishing current.
pub const ZERO_NORM: f64 = 1e-14;
const RESIDUAL_TOL: f64 = 1e-10;

/// Diagonalized ring with its current operator.
#[derive(Debug, Clone)]
pub struct EdSystem {
    sites: usize,
    hopping: f64,
    interaction: f64,
    particles: usize,
    basis: Vec<u32>,
    hamiltonian: DMatrix<f64>,
    /// Real antisymmetric `K` with `J = iK` in the occupation basis.
    current_generator: DMatrix<f64>,
    energies: Vec<f64>,
    vectors: DMatrix<f64>,
    current: DMatrix<Complex64>,
}

/// `c†_to c_from |state⟩`, or `None` if it vanishes.
fn hop(state: u32, from: usize, to: usize) -> Option<(u32, f64)> {
    if state & (1 << from) == 0 {
        return None;
    }
    let removed = state & !(1 << from);
    if removed & (1 << to) != 0 {
        return None;
    }
    let below = |s: u32, site: usize| (s & ((1u32 << site) - 1)).count_ones();
    let parity = below(state, from) + below(removed, to);
    let sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
    Some((removed | (1 << to), sign))
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

impl EdSystem {
    /// Builds and fully diagonalizes the ring.
    pub fn build(sites: usize, hopping: f64, interaction: f64, particles: usize) -> Result<Self> {
        if sites > MAX_SITES {
            return Err(Error::DimensionTooLarge {
                sites,
                max: MAX_SITES,
            });
        }
        if sites < 2 {
            return Err(Error::InvalidArgument(format!("ring needs at least 2 sites, got {sites}")));
        }
        if particles > sites {
            return Err(Error::InvalidArgument(format!(
                "{particles} particles do not fit on {sites} sites"
            )));
        }
        if !(hopping.is_finite() && interaction.is_finite()) {
            return Err(Error::InvalidArgument("hopping and interaction must be finite".into()));
        }

        let basis: Vec<u32> = (0u32..1 << sites)
            .filter(|s| s.count_ones() as usize == particles)
            .collect();
        let dim = basis.len();
        debug_assert_eq!(dim, binomial(sites, particles));
        let index = |s: u32| basis.binary_search(&s).expect("hop preserves particle number");

        let mut hamiltonian = DMatrix::<f64>::zeros(dim, dim);
        let mut generator = DMatrix::<f64>::zeros(dim, dim);
        for (col, &state) in basis.iter().enumerate() {
            for j in 0..sites {
                let next = (j + 1) % sites;
                if state & (1 << j) != 0 && state & (1 << next) != 0 {
                    hamiltonian[(col, col)] += interaction;
                }
                if let Some((s, sign)) = hop(state, j, next) {
                    let row = index(s);
                    hamiltonian[(row, col)] -= hopping * sign;
                    generator[(row, col)] += hopping * sign;
                }
                if let Some((s, sign)) = hop(state, next, j) {
                    let row = index(s);
                    hamiltonian[(row, col)] -= hopping * sign;
                    generator[(row, col)] -= hopping * sign;
                }
            }
        }

        let eigen = SymmetricEigen::new(hamiltonian.clone());
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));
        let energies: Vec<f64> = order.iter().map(|&i| eigen.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(dim, dim, |r, c| eigen.eigenvectors[(r, order[c])]);

        let residual = (&hamiltonian * &vectors - &vectors * DMatrix::from_diagonal(&energies.clone().into()))
            .column_iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        if residual > RESIDUAL_TOL {
            return Err(Error::Diagonalization { residual });
        }

        let rotated = vectors.transpose() * &generator * &vectors;
        let current = rotated.map(|k| Complex64::new(0.0, k));

        Ok(EdSystem {
            sites,
            hopping,
            interaction,
            particles,
            basis,
            hamiltonian,
            current_generator: generator,
            energies,
            vectors,
            current,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn hopping(&self) -> f64 {
        self.hopping
    }

    pub fn interaction(&self) -> f64 {
        self.interaction
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    /// Occupation-number basis states as bit strings (bit `j` = site `j`).
    pub fn basis(&self) -> &[u32] {
        &self.basis
    }

    /// Ascending many-body energies.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Eigenvectors as columns, in the order of [`energies`](Self::energies).
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Hamiltonian in the occupation basis.
    pub fn hamiltonian(&self) -> &DMatrix<f64> {
        &self.hamiltonian
    }

    /// Current operator in the occupation basis.
    pub fn current_site_basis(&self) -> DMatrix<Complex64> {
        self.current_generator.map(|k| Complex64::new(0.0, k))
    }

    /// Current matrix elements `J_mn` in the energy eigenbasis.
    pub fn current(&self) -> &DMatrix<Complex64> {
        &self.current
    }

    /// Rotates an occupation-basis operator into the energy eigenbasis.
    pub fn to_eigenbasis(&self, op: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let v = self.vectors.map(|x| Complex64::new(x, 0.0));
        v.transpose() * op * v
    }

    /// Liouvillian frequency `E_m − E_n`.
    pub fn frequency(&self, m: usize, n: usize) -> f64 {
        self.energies[m] - self.energies[n]
    }

    /// Normalized Boltzmann weights `p_m`, computed from energies shifted by
    /// the ground state.
    pub fn boltzmann(&self, beta: f64) -> Vec<f64> {
        let e0 = self.energies[0];
        let raw: Vec<f64> = self.energies.iter().map(|e| (-beta * (e - e0)).exp()).collect();
        let z = kahan_sum(raw.iter().copied());
        raw.into_iter().map(|w| w / z).collect()
    }

    /// Kubo–Mori weights `w_mn / (Zβ)` with
    /// `w_mn = (e^{−βE_n} − e^{−βE_m})/(E_m − E_n)` and the limit
    /// `β e^{−βE_m}` on (near-)degenerate pairs.
    pub fn kubo_mori_weights(&self, beta: f64) -> DMatrix<f64> {
        let p = self.boltzmann(beta);
        let dim = self.dimension();
        DMatrix::from_fn(dim, dim, |m, n| {
            let nu = self.frequency(m, n);
            if nu.abs() < DEGENERACY_TOL {
                p[m]
            } else {
                (p[n] - p[m]) / (beta * nu)
            }
        })
    }

    /// Thermal expectation `⟨A⟩` of an eigenbasis operator.
    pub fn thermal_average(&self, op: &DMatrix<Complex64>, beta: f64) -> Complex64 {
        let p = self.boltzmann(beta);
        p.iter().enumerate().map(|(m, pm)| op[(m, m)] * *pm).sum()
    }

    /// Lehmann spectral density of the current: one peak
    /// `(|E_m − E_n|, (πβ/2)|J_mn|² w_mn/(Zβ))` per ordered pair, degenerate
    /// pairs placed at zero frequency, equal frequencies merged.
    pub fn lehmann_density(&self, beta: f64) -> SpectralDensity {
        let w = self.kubo_mori_weights(beta);
        let dim = self.dimension();
        let mut peaks = Vec::with_capacity(dim * dim);
        for m in 0..dim {
            for n in 0..dim {
                let weight = 0.5 * std::f64::consts::PI * beta * self.current[(m, n)].norm_sqr() * w[(m, n)];
                if weight == 0.0 {
                    continue;
                }
                let nu = self.frequency(m, n).abs();
                let omega = if nu < DEGENERACY_TOL { 0.0 } else { nu };
                peaks.push(Peak { omega, weight });
            }
        }
        SpectralDensity::new(peaks)
            .expect("Lehmann weights are non-negative")
            .coalesced(1e-12)
    }
}

/// Complex Kubo–Mori product `(A|B) = (1/Zβ) Σ_mn conj(A_mn) B_mn w_mn`.
pub fn kubo_mori_product(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, weights: &DMatrix<f64>) -> Complex64 {
    let mut re = Vec::with_capacity(weights.len());
    let mut im = Vec::with_capacity(weights.len());
    for ((x, y), w) in a.iter().zip(b.iter()).zip(weights.iter()) {
        let z = x.conj() * y * *w;
        re.push(z.re);
        im.push(z.im);
    }
    Complex64::new(kahan_sum(re), kahan_sum(im))
}

/// Kubo–Mori inner product of two eigenbasis operators, equal to
/// `(1/β) ∫₀^β ⟨A†(τ) B⟩ dτ`. Real for the Hermitian and anti-Hermitian
/// operators used here; the real part is returned.
pub fn kubo_mori_inner(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, sys: &EdSystem, beta: f64) -> f64 {
    kubo_mori_product(a, b, &sys.kubo_mori_weights(beta)).re
}

/// `(J|L^{2k}|J) = (1/Zβ) Σ_mn |J_mn|² (E_m − E_n)^{2k} w_mn`.
pub fn liouvillian_moment(sys: &EdSystem, beta: f64, k: u32) -> Result<f64> {
    if k > MAX_LEVELS as u32 {
        return Err(Error::InvalidArgument(format!("moment order 2·{k} too high")));
    }
    let w = sys.kubo_mori_weights(beta);
    let dim = sys.dimension();
    let terms = (0..dim).flat_map(|m| (0..dim).map(move |n| (m, n))).map(|(m, n)| {
        sys.current[(m, n)].norm_sqr() * sys.frequency(m, n).powi(2 * k as i32) * w[(m, n)]
    });
    Ok(kahan_sum(terms))
}

/// Continued-fraction data of the current resolvent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoriChain {
    pub beta: f64,
    /// `(J|J)`.
    pub norm0: f64,
    /// `b²_1, b²_2, …` up to the last level above [`TERMINATION_TOL`].
    pub b_sq: Vec<f64>,
    /// Level at which the Krylov space was exhausted, if it was.
    pub terminated_at: Option<usize>,
}

impl MoriChain {
    /// `S(z) = (J|J) / (z − b²_1/(z − b²_2/(… z)))`, hard-truncated.
    pub fn resolvent(&self, z: Complex64) -> Complex64 {
        let mut tail = z;
        for b2 in self.b_sq.iter().rev() {
            tail = z - *b2 / tail;
        }
        self.norm0 / tail
    }
}

fn apply_liouvillian(op: &DMatrix<Complex64>, freq: &DMatrix<f64>) -> DMatrix<Complex64> {
    op.zip_map(freq, |x, nu| x * nu)
}

/// Mori–Lanczos recursion seeded by `J`, up to `levels` coefficients.
///
/// Stops early (recording `terminated_at`) when some `b²_k` falls below
/// [`TERMINATION_TOL`].
pub fn mori_chain(sys: &EdSystem, beta: f64, levels: usize) -> Result<MoriChain> {
    if levels > MAX_LEVELS {
        return Err(Error::InvalidArgument(format!("at most {MAX_LEVELS} Mori levels, got {levels}")));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    let weights = sys.kubo_mori_weights(beta);
    let dim = sys.dimension();
    let freq = DMatrix::from_fn(dim, dim, |m, n| sys.frequency(m, n));
    let inner = |a: &DMatrix<Complex64>, b: &DMatrix<Complex64>| kubo_mori_product(a, b, &weights);

    let seed = sys.current().clone();
    let norm0 = inner(&seed, &seed).re;
    if norm0 <= ZERO_NORM {
        return Err(Error::ZeroCurrentNorm);
    }

    let mut basis: Vec<DMatrix<Complex64>> = vec![seed / Complex64::new(norm0.sqrt(), 0.0)];
    let mut b_sq = Vec::new();
    let mut b_prev = 0.0;
    let mut terminated_at = None;
    for level in 1..=levels {
        let q = basis.last().expect("seeded");
        let lq = apply_liouvillian(q, &freq);
        let alpha = inner(q, &lq);
        let mut r = lq - q * alpha;
        if basis.len() >= 2 {
            r -= &basis[basis.len() - 2] * Complex64::new(b_prev, 0.0);
        }
        for v in &basis {
            let overlap = inner(v, &r);
            r -= v * overlap;
        }
        let b2 = inner(&r, &r).re;
        if b2 < TERMINATION_TOL {
            terminated_at = Some(level);
            break;
        }
        b_sq.push(b2);
        b_prev = b2.sqrt();
        basis.push(r / Complex64::new(b_prev, 0.0));
    }
    Ok(MoriChain {
        beta,
        norm0,
        b_sq,
        terminated_at,
    })
}

/// Like [`mori_chain`] but an exhausted Krylov space is an error.
pub fn mori_coefficients(sys: &EdSystem, beta: f64, levels: usize) -> Result<MoriChain> {
    let chain = mori_chain(sys, beta, levels)?;
    match chain.terminated_at {
        Some(level) => Err(Error::ChainTerminated(level)),
        None => Ok(chain),
    }
}

/// Dynamical conductivity from the truncated Mori resolvent,
/// `σ(ω) = iβ S(ω + iη)`.
///
/// This is the Kubo formula `β ∫₀^∞ e^{izt} (J|J(t)) dt` written through the
/// Kubo–Mori resolvent; it coincides with `S^R(ω)/(iω)` up to the purely
/// imaginary diamagnetic term and `O(η)`. The real part is a sum of
/// Lorentzians with non-negative weights, and it stays finite as `ω → 0`.
pub fn resolvent_sigma(chain: &MoriChain, omega: f64, eta: f64) -> Result<Complex64> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!("broadening must be positive, got {eta}")));
    }
    let z = Complex64::new(omega, eta);
    Ok(Complex64::new(0.0, chain.beta) * chain.resolvent(z))
}

/// `⟨(LⁿJ)(τ) J⟩` from the Lehmann sum
/// `(1/Z) Σ_mn |J_mn|² |E_m − E_n|ⁿ e^{−βE_m} e^{τ(E_m − E_n)}`.
///
/// For even `n` this is the n-th τ-derivative of `⟨J(τ)J⟩`; odd orders use
/// `|E_m − E_n|ⁿ` so that the result stays KMS-symmetric about `β/2`.
pub fn nested_correlator(sys: &EdSystem, order: u32, tau: f64, beta: f64) -> Result<f64> {
    if order > MAX_NESTED_ORDER {
        return Err(Error::InvalidArgument(format!("nested order {order} exceeds {MAX_NESTED_ORDER}")));
    }
    if !(beta > 0.0 && (0.0..=beta).contains(&tau)) {
        return Err(Error::Domain(format!("tau = {tau} outside [0, {beta}]")));
    }
    let e0 = sys.energies[0];
    let shifted: Vec<f64> = sys.energies.iter().map(|e| e - e0).collect();
    let z = kahan_sum(shifted.iter().map(|e| (-beta * e).exp()));
    let dim = sys.dimension();
    let terms = (0..dim).flat_map(|m| (0..dim).map(move |n| (m, n))).map(|(m, n)| {
        let boltz = (-(beta - tau) * shifted[m] - tau * shifted[n]).exp();
        sys.current[(m, n)].norm_sqr() * (shifted[m] - shifted[n]).abs().powi(order as i32) * boltz
    });
    Ok(kahan_sum(terms) / z)
}

/// Outcome of comparing `b²_1` with the midpoint curvature ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct B1Check {
    pub b1_sq: f64,
    /// `⟨(L²J)(β/2) J⟩ / ⟨J J⟩`.
    pub midpoint_ratio: f64,
    /// `b1_sq ≥ midpoint_ratio − 1e-10`.
    pub holds: bool,
    /// `(4/β²) sup x²/cosh x − midpoint_ratio`.
    pub bound_margin: f64,
    pub universal_holds: bool,
}

pub fn b1_bound_check(sys: &EdSystem, beta: f64) -> Result<B1Check> {
    let norm0 = liouvillian_moment(sys, beta, 0)?;
    if norm0 <= ZERO_NORM {
        return Err(Error::ZeroCurrentNorm);
    }
    let b1_sq = liouvillian_moment(sys, beta, 1)? / norm0;
    let midpoint_ratio = nested_correlator(sys, 2, 0.5 * beta, beta)? / nested_correlator(sys, 0, 0.0, beta)?;
    let bound_margin = bound_constants(2)?.bound(beta) - midpoint_ratio;
    Ok(B1Check {
        b1_sq,
        midpoint_ratio,
        holds: b1_sq >= midpoint_ratio - 1e-10,
        bound_margin,
        universal_holds: bound_margin >= -1e-10,
    })
}

/// Margin `(2/β)ⁿ sup xⁿ/cosh x − ⟨(LⁿJ)(β/2) J⟩/⟨J J⟩` of the order-n
/// nested correlator.
pub fn nested_bound_margin(sys: &EdSystem, beta: f64, order: u32) -> Result<f64> {
    let constants = bound_constants(order)?;
    let ratio = nested_correlator(sys, order, 0.5 * beta, beta)? / nested_correlator(sys, 0, 0.0, beta)?;
    Ok(constants.bound(beta) - ratio)
}

/// JSON report of a `mori` run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoriReport {
    #[serde(rename = "L")]
    pub sites: usize,
    pub t: f64,
    #[serde(rename = "V")]
    pub interaction: f64,
    #[serde(rename = "Np")]
    pub particles: usize,
    pub beta: f64,
    pub norm0: f64,
    /// Chain coefficients; a terminated level is reported as an exact zero.
    pub b_sq: Vec<f64>,
    pub terminated_at: Option<usize>,
    pub b1_sq: f64,
    pub midpoint_ratio: f64,
    pub bound_margin: f64,
    pub holds: bool,
    /// Margins of the order-3 and order-4 nested bounds.
    pub nested_margins: Vec<f64>,
}

impl MoriReport {
    pub fn run(sys: &EdSystem, beta: f64, levels: usize) -> Result<Self> {
        let chain = mori_chain(sys, beta, levels)?;
        let check = b1_bound_check(sys, beta)?;
        let mut b_sq = chain.b_sq.clone();
        if chain.terminated_at.is_some() {
            b_sq.push(0.0);
        }
        Ok(MoriReport {
            sites: sys.sites(),
            t: sys.hopping(),
            interaction: sys.interaction(),
            particles: sys.particles(),
            beta,
            norm0: chain.norm0,
            b_sq,
            terminated_at: chain.terminated_at,
            b1_sq: check.b1_sq,
            midpoint_ratio: check.midpoint_ratio,
            bound_margin: check.bound_margin,
            holds: check.holds && check.universal_holds,
            nested_margins: vec![nested_bound_margin(sys, beta, 3)?, nested_bound_margin(sys, beta, 4)?],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::rho0_spectral;
    use crate::matsubara::{equal_time, spectral_correlator};
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn free_ground_energy(sites: usize, particles: usize, t: f64) -> f64 {
        let mut levels: Vec<f64> = (0..sites)
            .map(|j| -2.0 * t * (2.0 * PI * j as f64 / sites as f64).cos())
            .collect();
        levels.sort_by(f64::total_cmp);
        levels[..particles].iter().sum()
    }

    #[test]
    fn two_site_ring() {
        // both bonds connect the same pair: H = −2t(c†_1 c_0 + h.c.), J = 0
        let sys = EdSystem::build(2, 1.0, 0.0, 1).unwrap();
        assert_eq!(sys.dimension(), 2);
        assert!((sys.energies()[0] + 2.0).abs() < 1e-14);
        assert!((sys.energies()[1] - 2.0).abs() < 1e-14);
        assert!(sys.current().iter().all(|z| z.norm() < 1e-15));
        let full = EdSystem::build(2, 1.0, 3.0, 2).unwrap();
        assert!((full.energies()[0] - 6.0).abs() < 1e-14);
    }

    #[test]
    fn jordan_wigner_signs_match_free_fermions() {
        for (sites, particles) in [(3, 1), (4, 2), (5, 2), (6, 3), (8, 4)] {
            let sys = EdSystem::build(sites, 1.0, 0.0, particles).unwrap();
            let exact = free_ground_energy(sites, particles, 1.0);
            assert!((sys.energies()[0] - exact).abs() < 1e-10, "{sites}/{particles}");
        }
    }

    #[test]
    fn build_guards_and_invariants() {
        assert_eq!(
            EdSystem::build(13, 1.0, 1.0, 6).unwrap_err(),
            Error::DimensionTooLarge { sites: 13, max: 12 }
        );
        assert!(EdSystem::build(4, 1.0, 1.0, 5).is_err());
        let sys = EdSystem::build(6, 1.0, 1.5, 3).unwrap();
        assert_eq!(sys.dimension(), 20);
        assert!(sys.energies().windows(2).all(|w| w[0] <= w[1]));
        let j = sys.current();
        for m in 0..sys.dimension() {
            for n in 0..sys.dimension() {
                assert!((j[(m, n)] - j[(n, m)].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn inner_product_examples() {
        let sys = EdSystem::build(6, 1.0, 1.0, 3).unwrap();
        let beta = 0.8;
        let dim = sys.dimension();
        let id = DMatrix::<Complex64>::identity(dim, dim);
        assert!((kubo_mori_inner(&id, &id, &sys, beta) - 1.0).abs() < 1e-13);
        let h = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            dim,
            sys.energies().iter().map(|e| Complex64::new(*e, 0.0)),
        ));
        let h2 = sys.thermal_average(&(&h * &h), beta).re;
        assert!(rel(kubo_mori_inner(&h, &h, &sys, beta), h2) < 1e-12);
    }

    /// Composite Simpson quadrature of (1/β)∫₀^β ⟨A†(τ) B⟩ dτ, evaluated
    /// from the Lehmann sum at every node.
    fn quadrature_inner(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, sys: &EdSystem, beta: f64) -> f64 {
        let intervals = 10_000;
        let h = beta / intervals as f64;
        let e0 = sys.energies()[0];
        let e: Vec<f64> = sys.energies().iter().map(|x| x - e0).collect();
        let z: f64 = e.iter().map(|x| (-beta * x).exp()).sum();
        let dim = sys.dimension();
        let mut pairs = Vec::new();
        for m in 0..dim {
            for n in 0..dim {
                let c = (a[(m, n)].conj() * b[(m, n)]).re;
                if c != 0.0 {
                    pairs.push((c, e[m], e[n]));
                }
            }
        }
        // Tr(e^{−βH} e^{τH} A† e^{−τH} B) = Σ conj(A_mn) B_mn e^{−(β−τ)E_n − τE_m}
        let f = |tau: f64| -> f64 {
            pairs
                .iter()
                .map(|(c, em, en)| c * (-(beta - tau) * en - tau * em).exp())
                .sum::<f64>()
                / z
        };
        let mut s = f(0.0) + f(beta);
        for j in 1..intervals {
            s += if j % 2 == 1 { 4.0 } else { 2.0 } * f(j as f64 * h);
        }
        s * h / 3.0 / beta
    }

    #[test]
    fn inner_product_matches_quadrature() {
        let sys = EdSystem::build(8, 1.0, 2.0, 4).unwrap();
        let beta = 1.0;
        let j = sys.current();
        let closed = kubo_mori_inner(j, j, &sys, beta);
        assert!(closed > 0.0);
        assert!(rel(closed, quadrature_inner(j, j, &sys, beta)) < 1e-8);
    }

    #[test]
    fn moments_examples() {
        let sys = EdSystem::build(6, 1.0, 1.0, 3).unwrap();
        let beta = 2.0;
        let j = sys.current();
        assert!(rel(liouvillian_moment(&sys, beta, 0).unwrap(), kubo_mori_inner(j, j, &sys, beta)) < 1e-14);

        // brute-force [H, J] in the occupation basis
        let h = sys.hamiltonian().map(|x| Complex64::new(x, 0.0));
        let js = sys.current_site_basis();
        let comm = sys.to_eigenbasis(&(&h * &js - &js * &h));
        let brute = kubo_mori_inner(&comm, &comm, &sys, beta);
        assert!(rel(liouvillian_moment(&sys, beta, 1).unwrap(), brute) < 1e-10);

        let free = EdSystem::build(8, 1.0, 0.0, 4).unwrap();
        for k in 1..=3 {
            assert!(liouvillian_moment(&free, 1.0, k).unwrap() < 1e-20);
        }
    }

    #[test]
    fn chain_matches_moment_formulas() {
        let sys = EdSystem::build(8, 1.0, 2.0, 4).unwrap();
        let beta = 1.0;
        let chain = mori_coefficients(&sys, beta, 4).unwrap();
        let m0 = liouvillian_moment(&sys, beta, 0).unwrap();
        let m2 = liouvillian_moment(&sys, beta, 1).unwrap();
        let m4 = liouvillian_moment(&sys, beta, 2).unwrap();
        assert!(rel(chain.norm0, m0) < 1e-12);
        assert!(rel(chain.b_sq[0], m2 / m0) < 1e-10);
        assert!(rel(chain.b_sq[1], m4 / m2 - m2 / m0) < 1e-8);
        assert!(chain.b_sq.iter().all(|b| *b > 0.0));
    }

    #[test]
    fn free_ring_chain_terminates() {
        let sys = EdSystem::build(8, 1.0, 0.0, 4).unwrap();
        assert_eq!(mori_coefficients(&sys, 1.0, 4), Err(Error::ChainTerminated(1)));
        let chain = mori_chain(&sys, 1.0, 4).unwrap();
        assert_eq!(chain.terminated_at, Some(1));
        assert!(chain.norm0 > 0.0);
        assert!(chain.b_sq.is_empty());
        assert!(mori_chain(&sys, 1.0, 7).is_err());
    }

    #[test]
    fn zero_current_norm() {
        let sys = EdSystem::build(2, 1.0, 0.0, 1).unwrap();
        assert_eq!(mori_chain(&sys, 1.0, 2), Err(Error::ZeroCurrentNorm));
        assert_eq!(b1_bound_check(&sys, 1.0), Err(Error::ZeroCurrentNorm));
    }

    #[test]
    fn one_level_resolvent_has_poles_at_b1() {
        let chain = MoriChain {
            beta: 1.0,
            norm0: 1.0,
            b_sq: vec![4.0],
            terminated_at: None,
        };
        // S(z) = z/(z² − b²): real-axis peaks of −Im S at ±2
        let eta = 0.01;
        let re = |w: f64| resolvent_sigma(&chain, w, eta).unwrap().re;
        assert!(re(2.0) > 10.0 * re(1.5));
        assert!(re(-2.0) > 10.0 * re(-1.5));
        assert!((re(2.0) - re(-2.0)).abs() < 1e-12);
        assert!(resolvent_sigma(&chain, 1.0, 0.0).is_err());
    }

    #[test]
    fn full_depth_chain_reproduces_lehmann_conductivity() {
        let sys = EdSystem::build(4, 1.0, 1.0, 2).unwrap();
        let beta = 1.0;
        let chain = mori_chain(&sys, beta, MAX_LEVELS).unwrap();
        assert!(chain.terminated_at.is_some(), "Krylov space should close for L=4");
        let w = sys.kubo_mori_weights(beta);
        let eta = 0.05;
        for i in -200..=200 {
            let omega = i as f64 * 0.05;
            let mut lehmann = 0.0;
            for m in 0..sys.dimension() {
                for n in 0..sys.dimension() {
                    let nu = sys.frequency(m, n);
                    lehmann += beta * sys.current()[(m, n)].norm_sqr() * w[(m, n)] * eta
                        / ((omega - nu).powi(2) + eta * eta);
                }
            }
            let sigma = resolvent_sigma(&chain, omega, eta).unwrap().re;
            assert!((sigma - lehmann).abs() < 1e-9 * lehmann.max(1.0), "ω = {omega}");
        }
    }

    #[test]
    fn conductivity_positive_with_stable_weight() {
        let sys = EdSystem::build(6, 1.0, 1.0, 3).unwrap();
        let beta = 1.0;
        let chain = mori_chain(&sys, beta, MAX_LEVELS).unwrap();
        let total = |eta: f64| {
            let (lo, hi, steps) = (-60.0, 60.0, 24_000);
            let h = (hi - lo) / steps as f64;
            let mut acc = 0.0;
            for i in 0..=steps {
                let s = resolvent_sigma(&chain, lo + h * i as f64, eta).unwrap().re;
                assert!(s >= -1e-10);
                acc += if i == 0 || i == steps { 0.5 } else { 1.0 } * s;
            }
            acc * h
        };
        let weights: Vec<f64> = [0.05, 0.1, 0.2].iter().map(|e| total(*e)).collect();
        // f-sum: ∫ Re σ dω = πβ (J|J)
        let exact = PI * beta * chain.norm0;
        for w in &weights {
            assert!(rel(*w, exact) < 0.02, "{w} vs {exact}");
        }
    }

    #[test]
    fn nested_correlator_examples() {
        let sys = EdSystem::build(8, 1.0, 2.0, 4).unwrap();
        let beta = 1.0;
        let jj = sys.thermal_average(&(sys.current() * sys.current()), beta).re;
        assert!(rel(nested_correlator(&sys, 0, 0.0, beta).unwrap(), jj) < 1e-12);

        let c = |tau: f64| nested_correlator(&sys, 0, tau, beta).unwrap();
        let mid = beta / 2.0;
        let fd = |h: f64| (c(mid + h) - 2.0 * c(mid) + c(mid - h)) / (h * h);
        let exact = nested_correlator(&sys, 2, mid, beta).unwrap();
        // the O(h²) error of a bare β/400 stencil is ~5e-6 here; one
        // Richardson step removes it
        let h = beta / 400.0;
        let extrapolated = (4.0 * fd(h / 2.0) - fd(h)) / 3.0;
        assert!(rel(fd(h), exact) < 1e-5);
        assert!(rel(extrapolated, exact) < 1e-8, "{extrapolated} vs {exact}");

        let free = EdSystem::build(8, 1.0, 0.0, 4).unwrap();
        assert!(nested_correlator(&free, 2, 0.5, 1.0).unwrap().abs() < 1e-20);
        assert!(matches!(nested_correlator(&sys, 0, 1.5, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn ed_correlator_is_kms_symmetric_and_monotone() {
        let sys = EdSystem::build(6, 1.0, 2.0, 3).unwrap();
        let beta = 2.0;
        let n = 41;
        let values: Vec<f64> = (0..n)
            .map(|j| nested_correlator(&sys, 0, beta * j as f64 / (n - 1) as f64, beta).unwrap())
            .collect();
        for j in 0..n {
            assert!((values[j] - values[n - 1 - j]).abs() <= 1e-10 * values[0]);
        }
        assert!(values[..=n / 2].windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-14)));
    }

    #[test]
    fn lehmann_density_reproduces_ed_correlator() {
        let sys = EdSystem::build(6, 1.0, 1.0, 3).unwrap();
        let beta = 1.5;
        let d = sys.lehmann_density(beta);
        let corr = spectral_correlator(&d, beta, 21).unwrap();
        for j in 0..21 {
            let ed = nested_correlator(&sys, 0, corr.tau(j), beta).unwrap();
            assert!(rel(corr.values()[j], ed) < 1e-10);
        }
        let s0 = equal_time(&d, beta).unwrap();
        let ratio = nested_correlator(&sys, 2, beta / 2.0, beta).unwrap() / s0;
        assert!(rel(rho0_spectral(&d, beta).unwrap(), ratio) < 1e-10);
    }

    #[test]
    fn b1_check_examples() {
        let free = EdSystem::build(8, 1.0, 0.0, 4).unwrap();
        let check = b1_bound_check(&free, 1.0).unwrap();
        assert!(check.b1_sq.abs() < 1e-12 && check.midpoint_ratio.abs() < 1e-12 && check.holds);

        let sup = bound_constants(2).unwrap().sup_val;
        let sys = EdSystem::build(8, 1.0, 2.0, 4).unwrap();
        for beta in [0.5, 1.0, 2.0] {
            let check = b1_bound_check(&sys, beta).unwrap();
            assert!(check.holds && check.universal_holds);
            assert!(check.midpoint_ratio * beta * beta / 4.0 <= sup + 1e-10);
            assert!(check.midpoint_ratio * beta * beta / 4.0 <= 1.065);
        }
    }

    #[test]
    fn kubo_mori_positive_for_random_hermitian() {
        use rand::{Rng, SeedableRng};
        let sys = EdSystem::build(6, 1.0, 1.0, 3).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let dim = sys.dimension();
        for _ in 0..100 {
            let mut a = DMatrix::<Complex64>::zeros(dim, dim);
            for m in 0..dim {
                for n in m..dim {
                    let z = Complex64::new(rng.gen_range(-1.0..1.0), if m == n { 0.0 } else { rng.gen_range(-1.0..1.0) });
                    a[(m, n)] = z;
                    a[(n, m)] = z.conj();
                }
            }
            let beta = rng.gen_range(0.1..5.0);
            assert!(kubo_mori_inner(&a, &a, &sys, beta) >= -1e-12);
        }
    }

    #[test]
    fn report_serializes_expected_keys() {
        let sys = EdSystem::build(6, 1.0, 1.0, 3).unwrap();
        let report = MoriReport::run(&sys, 1.0, 3).unwrap();
        let value = serde_json::to_value(&report).unwrap();
        for key in ["L", "t", "V", "Np", "beta", "norm0", "b_sq", "midpoint_ratio", "bound_margin"] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
        assert_eq!(value["b_sq"].as_array().unwrap().len(), 3);
        assert!(report.holds);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn ed_invariants(v in 0.2f64..4.0, beta in 0.2f64..4.0, frac in 0.0f64..=1.0) {
                let sys = EdSystem::build(6, 1.0, v, 3).unwrap();
                let tau = frac * beta;
                let c = nested_correlator(&sys, 0, tau, beta).unwrap();
                let mirror = nested_correlator(&sys, 0, beta - tau, beta).unwrap();
                prop_assert!((c - mirror).abs() <= 1e-10 * c);
                prop_assert!(c >= nested_correlator(&sys, 0, 0.5 * beta, beta).unwrap() * (1.0 - 1e-13));

                let check = b1_bound_check(&sys, beta).unwrap();
                prop_assert!(check.holds && check.universal_holds);
                for order in 1..=4 {
                    prop_assert!(nested_bound_margin(&sys, beta, order).unwrap() >= -1e-10);
                }
                let chain = mori_chain(&sys, beta, 3).unwrap();
                prop_assert!(chain.b_sq.iter().all(|b| *b >= -1e-12));
            }
        }
    }
}
