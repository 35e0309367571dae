//! Catalog of two-band Bloch Hamiltonians `H(k) = d(k)·σ`.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::{Error, Result};

/// Minimum `|d(k)|` accepted as gapped.
pub const GAP_CLOSURE_THRESHOLD: f64 = 1e-9;

pub type Vec3 = [f64; 3];

/// 2×2 complex matrix, row-major.
pub type Mat2 = [[Complex64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Qi–Wu–Zhang Chern insulator, `d = (sin kx, sin ky, m + cos kx + cos ky)`.
    Qwz,
    /// QWZ with the spectrum flattened to `±delta/2`, eigenvectors unchanged.
    FlatChern,
    /// Momentum-independent `d = (0, 0, delta/2)`.
    TrivialFlat,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qwz" => Ok(ModelKind::Qwz),
            "flatchern" | "flat-chern" | "flat_chern" => Ok(ModelKind::FlatChern),
            "trivialflat" | "trivial-flat" | "trivial_flat" => Ok(ModelKind::TrivialFlat),
            other => Err(Error::InvalidArgument(format!("unknown model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    X,
    Y,
}

/// Crystal momentum in the fundamental domain `[0, 2π)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KPoint {
    pub kx: f64,
    pub ky: f64,
}

impl KPoint {
    pub fn new(kx: f64, ky: f64) -> Self {
        KPoint {
            kx: wrap(kx),
            ky: wrap(ky),
        }
    }

    /// Point `(i, j)` of the uniform `n × n` mesh.
    pub fn on_mesh(i: usize, j: usize, n: usize) -> Self {
        let step = TAU / n as f64;
        KPoint {
            kx: step * i as f64,
            ky: step * j as f64,
        }
    }

    pub fn component(&self, dir: Direction) -> f64 {
        match dir {
            Direction::X => self.kx,
            Direction::Y => self.ky,
        }
    }

    pub fn shifted(&self, dir: Direction, h: f64) -> Self {
        match dir {
            Direction::X => KPoint::new(self.kx + h, self.ky),
            Direction::Y => KPoint::new(self.kx, self.ky + h),
        }
    }
}

fn wrap(k: f64) -> f64 {
    let w = k.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// A validated model: gapped on every point of the reference mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochModel {
    kind: ModelKind,
    m: f64,
    delta: f64,
}

/// Mesh used to validate gappedness at construction.
const VALIDATION_MESH: usize = 64;

impl BlochModel {
    /// Builds and validates a model.
    ///
    /// Fails with [`Error::GapClosure`] if `|d(k)|` drops below
    /// [`GAP_CLOSURE_THRESHOLD`] anywhere on a 64×64 mesh (which contains
    /// all high-symmetry points where QWZ can close its gap).
    pub fn new(kind: ModelKind, m: f64, delta: f64) -> Result<Self> {
        if !m.is_finite() || !delta.is_finite() {
            return Err(Error::InvalidArgument("model parameters must be finite".into()));
        }
        if kind != ModelKind::Qwz && delta <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "flat models need delta > 0, got {delta}"
            )));
        }
        let model = BlochModel { kind, m, delta };
        for i in 0..VALIDATION_MESH {
            for j in 0..VALIDATION_MESH {
                model.check_gap(KPoint::on_mesh(i, j, VALIDATION_MESH))?;
            }
        }
        Ok(model)
    }

    pub fn qwz(m: f64) -> Result<Self> {
        Self::new(ModelKind::Qwz, m, 0.0)
    }

    pub fn flat_chern(m: f64, delta: f64) -> Result<Self> {
        Self::new(ModelKind::FlatChern, m, delta)
    }

    pub fn trivial_flat(delta: f64) -> Result<Self> {
        Self::new(ModelKind::TrivialFlat, 0.0, delta)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn qwz_d(&self, k: KPoint) -> Vec3 {
        [k.kx.sin(), k.ky.sin(), self.m + k.kx.cos() + k.ky.cos()]
    }

    fn qwz_dd(&self, k: KPoint, dir: Direction) -> Vec3 {
        match dir {
            Direction::X => [k.kx.cos(), 0.0, -k.kx.sin()],
            Direction::Y => [0.0, k.ky.cos(), -k.ky.sin()],
        }
    }

    pub fn d_vector(&self, k: KPoint) -> Vec3 {
        match self.kind {
            ModelKind::Qwz => self.qwz_d(k),
            ModelKind::FlatChern => {
                let d = self.qwz_d(k);
                let r = norm(d);
                scale(d, 0.5 * self.delta / r)
            }
            ModelKind::TrivialFlat => [0.0, 0.0, 0.5 * self.delta],
        }
    }

    /// `∂d/∂k_dir`, analytic for every variant.
    pub fn d_derivative(&self, k: KPoint, dir: Direction) -> Vec3 {
        match self.kind {
            ModelKind::Qwz => self.qwz_dd(k, dir),
            ModelKind::FlatChern => {
                let d = self.qwz_d(k);
                let dd = self.qwz_dd(k, dir);
                scale(unit_derivative(d, dd), 0.5 * self.delta)
            }
            ModelKind::TrivialFlat => [0.0; 3],
        }
    }

    /// Unit vector `d̂(k)` and its derivatives along x and y.
    ///
    /// Flattening does not change `d̂`, so QWZ and FlatChern share it.
    pub fn unit_frame(&self, k: KPoint) -> Result<(Vec3, Vec3, Vec3)> {
        self.check_gap(k)?;
        match self.kind {
            ModelKind::TrivialFlat => Ok(([0.0, 0.0, 1.0], [0.0; 3], [0.0; 3])),
            ModelKind::Qwz | ModelKind::FlatChern => {
                let d = self.qwz_d(k);
                let r = norm(d);
                let dx = unit_derivative(d, self.qwz_dd(k, Direction::X));
                let dy = unit_derivative(d, self.qwz_dd(k, Direction::Y));
                Ok((scale(d, 1.0 / r), dx, dy))
            }
        }
    }

    pub fn check_gap(&self, k: KPoint) -> Result<f64> {
        let r = norm(self.d_vector(k));
        // FlatChern normalizes the QWZ vector; its gap closes where QWZ's does.
        let raw = match self.kind {
            ModelKind::FlatChern => norm(self.qwz_d(k)),
            _ => r,
        };
        if raw.is_nan() || raw < GAP_CLOSURE_THRESHOLD {
            return Err(Error::GapClosure {
                kx: k.kx,
                ky: k.ky,
                norm: raw,
            });
        }
        Ok(r)
    }

    /// `(E₋, E₊, Δ)` with `E∓ = ∓|d|` and `Δ = 2|d|`.
    pub fn bands(&self, k: KPoint) -> Result<(f64, f64, f64)> {
        let r = self.check_gap(k)?;
        Ok((-r, r, 2.0 * r))
    }

    pub fn hamiltonian(&self, k: KPoint) -> Mat2 {
        pauli_dot(self.d_vector(k))
    }

    /// Velocity operator `∂H/∂k_dir`.
    pub fn velocity(&self, k: KPoint, dir: Direction) -> Mat2 {
        pauli_dot(self.d_derivative(k, dir))
    }
}

/// Derivative of `d/|d|` given `d` and `∂d`.
fn unit_derivative(d: Vec3, dd: Vec3) -> Vec3 {
    let r = norm(d);
    let proj = dot(d, dd) / (r * r);
    [
        (dd[0] - d[0] * proj) / r,
        (dd[1] - d[1] * proj) / r,
        (dd[2] - d[2] * proj) / r,
    ]
}

/// `v·σ` as a 2×2 Hermitian matrix.
pub fn pauli_dot(v: Vec3) -> Mat2 {
    let c = Complex64::new;
    [
        [c(v[2], 0.0), c(v[0], -v[1])],
        [c(v[0], v[1]), c(-v[2], 0.0)],
    ]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Lower-band eigenvector of `d·σ`, in whichever of the two standard gauges
/// is regular at this `d`.
pub fn lower_eigenvector(d: Vec3) -> [Complex64; 2] {
    let r = norm(d);
    let c = Complex64::new;
    // (H + r) u = 0; two independent choices of the null vector.
    let a = [c(d[0], -d[1]), c(-(d[2] + r), 0.0)];
    let b = [c(r - d[2], 0.0), c(-d[0], -d[1])];
    let na = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
    let nb = (b[0].norm_sqr() + b[1].norm_sqr()).sqrt();
    if na >= nb {
        [a[0] / na, a[1] / na]
    } else {
        [b[0] / nb, b[1] / nb]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix2;
    use std::f64::consts::PI;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (0..3).all(|i| (a[i] - b[i]).abs() <= tol)
    }

    fn mat_close(a: &Mat2, b: &Mat2, tol: f64) -> bool {
        (0..2).all(|i| (0..2).all(|j| (a[i][j] - b[i][j]).norm() <= tol))
    }

    fn finite_difference_velocity(model: &BlochModel, k: KPoint, dir: Direction) -> Mat2 {
        let h = 1e-5;
        let plus = model.hamiltonian(k.shifted(dir, h));
        let minus = model.hamiltonian(k.shifted(dir, -h));
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = (plus[i][j] - minus[i][j]) / (2.0 * h);
            }
        }
        out
    }

    #[test]
    fn d_vector_examples() {
        let qwz = BlochModel::qwz(1.0).unwrap();
        assert!(close(qwz.d_vector(KPoint::new(0.0, 0.0)), [0.0, 0.0, 3.0], 1e-15));
        assert!(close(qwz.d_vector(KPoint::new(PI, PI)), [0.0, 0.0, -1.0], 1e-15));
        let flat = BlochModel::flat_chern(1.0, 1.0).unwrap();
        assert!(close(flat.d_vector(KPoint::new(0.0, 0.0)), [0.0, 0.0, 0.5], 1e-15));
        let trivial = BlochModel::trivial_flat(2.0).unwrap();
        assert_eq!(trivial.d_vector(KPoint::new(1.0, 2.0)), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn bands_examples() {
        let qwz = BlochModel::qwz(1.0).unwrap();
        let (lo, hi, gap) = qwz.bands(KPoint::new(0.0, 0.0)).unwrap();
        assert!((lo + 3.0).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15 && (gap - 6.0).abs() < 1e-15);
        let (lo, hi, gap) = qwz.bands(KPoint::new(PI, 0.0)).unwrap();
        assert!((lo + 1.0).abs() < 1e-15 && (hi - 1.0).abs() < 1e-15 && (gap - 2.0).abs() < 1e-15);
        let flat = BlochModel::flat_chern(1.0, 1.0).unwrap();
        for &(kx, ky) in &[(0.1, 0.2), (2.0, 5.0), (PI, PI)] {
            let (_, _, gap) = flat.bands(KPoint::new(kx, ky)).unwrap();
            assert!((gap - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gap_closure_rejected() {
        // m = 2 closes at (0, π) and (π, 0); m = 0 at (0, π) too.
        for m in [2.0, -2.0, 0.0] {
            assert!(matches!(BlochModel::qwz(m), Err(Error::GapClosure { .. })));
            assert!(matches!(
                BlochModel::flat_chern(m, 1.0),
                Err(Error::GapClosure { .. })
            ));
        }
        assert!(BlochModel::trivial_flat(0.0).is_err());
    }

    #[test]
    fn velocity_examples() {
        let qwz = BlochModel::qwz(1.0).unwrap();
        let v = qwz.velocity(KPoint::new(0.0, 0.0), Direction::X);
        assert!(mat_close(&v, &pauli_dot([1.0, 0.0, 0.0]), 1e-15));

        let trivial = BlochModel::trivial_flat(1.0).unwrap();
        for dir in [Direction::X, Direction::Y] {
            let v = trivial.velocity(KPoint::new(0.7, 1.9), dir);
            assert!(mat_close(&v, &pauli_dot([0.0; 3]), 0.0));
        }

        // d = (0,0,3) at Γ: ∂x d̂ = (1/3,0,0), times delta/2 = 1/2.
        let flat = BlochModel::flat_chern(1.0, 1.0).unwrap();
        let v = flat.velocity(KPoint::new(0.0, 0.0), Direction::X);
        assert!(mat_close(&v, &pauli_dot([1.0 / 6.0, 0.0, 0.0]), 1e-15));
        let fd = finite_difference_velocity(&flat, KPoint::new(0.0, 0.0), Direction::X);
        assert!(mat_close(&v, &fd, 1e-8));
    }

    #[test]
    fn velocity_matches_finite_differences_on_mesh() {
        let models = [
            BlochModel::qwz(1.0).unwrap(),
            BlochModel::qwz(-1.3).unwrap(),
            BlochModel::flat_chern(1.0, 1.0).unwrap(),
            BlochModel::flat_chern(3.0, 2.0).unwrap(),
        ];
        let n = 64;
        for model in &models {
            for i in 0..n {
                for j in 0..n {
                    let k = KPoint::on_mesh(i, j, n);
                    for dir in [Direction::X, Direction::Y] {
                        let v = model.velocity(k, dir);
                        let fd = finite_difference_velocity(model, k, dir);
                        assert!(mat_close(&v, &fd, 1e-7), "{model:?} at {k:?} {dir:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn bands_match_dense_eigensolve() {
        let model = BlochModel::qwz(1.0).unwrap();
        let n = 16;
        for i in 0..n {
            for j in 0..n {
                let k = KPoint::on_mesh(i, j, n);
                let h = model.hamiltonian(k);
                let m = Matrix2::new(h[0][0], h[0][1], h[1][0], h[1][1]);
                let eig = m.symmetric_eigenvalues();
                let (lo, hi) = (eig[0].min(eig[1]), eig[0].max(eig[1]));
                let (e_minus, e_plus, _) = model.bands(k).unwrap();
                assert!((lo - e_minus).abs() < 1e-12);
                assert!((hi - e_plus).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flattening_preserves_eigenvectors() {
        let qwz = BlochModel::qwz(1.0).unwrap();
        let flat = BlochModel::flat_chern(1.0, 1.0).unwrap();
        let n = 16;
        for i in 0..n {
            for j in 0..n {
                let k = KPoint::on_mesh(i, j, n);
                let u = lower_eigenvector(qwz.d_vector(k));
                let w = lower_eigenvector(flat.d_vector(k));
                let overlap = u[0].conj() * w[0] + u[1].conj() * w[1];
                assert!((overlap.norm() - 1.0).abs() < 1e-12);
                // and u really is an eigenvector of the flat Hamiltonian
                let h = flat.hamiltonian(k);
                for row in 0..2 {
                    let hu = h[row][0] * w[0] + h[row][1] * w[1];
                    assert!((hu + 0.5 * w[row]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn kpoint_wraps() {
        let k = KPoint::new(-0.5, 7.0);
        assert!((k.kx - (TAU - 0.5)).abs() < 1e-15);
        assert!((k.ky - (7.0 - TAU)).abs() < 1e-15);
    }

    #[test]
    fn parse_model_kind() {
        assert_eq!("QWZ".parse::<ModelKind>().unwrap(), ModelKind::Qwz);
        assert_eq!("flatchern".parse::<ModelKind>().unwrap(), ModelKind::FlatChern);
        assert!("haldane".parse::<ModelKind>().is_err());
    }
}
