//! Quantum geometry of the lower band: metric, Berry curvature, Chern number,
//! and the per-k mesh that every Brillouin-zone sum is drawn from.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bloch::{cross, dot, lower_eigenvector, BlochModel, KPoint};
use crate::numeric::{coth, csch, KahanSum};
use crate::{Error, Result};

/// Smallest mesh accepted for grids and Chern numbers.
pub const MIN_MESH: usize = 16;

/// Residual from the nearest integer above which a Chern sum is rejected.
pub const CHERN_INTEGER_TOL: f64 = 1e-6;

/// Real part of the quantum geometric tensor of the lower band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Metric {
    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }
}

/// `G_ij = (1/4) ∂_i d̂ · ∂_j d̂`.
pub fn quantum_metric(model: &BlochModel, k: KPoint) -> Result<Metric> {
    let (_, dx, dy) = model.unit_frame(k)?;
    Ok(Metric {
        xx: 0.25 * dot(dx, dx),
        xy: 0.25 * dot(dx, dy),
        yy: 0.25 * dot(dy, dy),
    })
}

/// Lower-band Berry curvature, `Ω = −½ d̂ · (∂_x d̂ × ∂_y d̂)`.
///
/// The orientation is pinned so that QWZ with `0 < m < 2` has `C = +1`;
/// with it `Σ_k Ω(k) (2π/n)² = 2πC` for the [`chern_number`] convention.
/// This is minus the curvature of the connection `i⟨u|∂u⟩`.
pub fn berry_curvature(model: &BlochModel, k: KPoint) -> Result<f64> {
    let (d, dx, dy) = model.unit_frame(k)?;
    Ok(-0.5 * dot(d, cross(dx, dy)))
}

/// Integer Chern number of the lower band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChernNumber(pub i64);

impl std::fmt::Display for ChernNumber {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Raw Fukui–Hatsuda–Suzuki plaquette sum `(1/2π) Σ F_plaquette`, before
/// rounding.
pub fn chern_sum(model: &BlochModel, n: usize) -> Result<f64> {
    if n < MIN_MESH {
        return Err(Error::InvalidArgument(format!("mesh {n} below minimum {MIN_MESH}")));
    }
    let mut states = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let k = KPoint::on_mesh(i, j, n);
            model.check_gap(k)?;
            states.push(lower_eigenvector(model.d_vector(k)));
        }
    }
    let at = |i: usize, j: usize| &states[(i % n) * n + (j % n)];
    let link = |a: &[Complex64; 2], b: &[Complex64; 2]| {
        let z = a[0].conj() * b[0] + a[1].conj() * b[1];
        z / z.norm()
    };
    let mut total = KahanSum::new();
    for i in 0..n {
        for j in 0..n {
            let u00 = at(i, j);
            let u10 = at(i + 1, j);
            let u11 = at(i + 1, j + 1);
            let u01 = at(i, j + 1);
            let loop_product =
                link(u00, u10) * link(u10, u11) * link(u11, u01) * link(u01, u00);
            // Orientation pinned so that QWZ(m = 1) yields +1.
            total.add(loop_product.arg());
        }
    }
    Ok(total.value() / TAU)
}

/// Chern number of the lower band via the FHS lattice field strength.
pub fn chern_number(model: &BlochModel, n: usize) -> Result<ChernNumber> {
    let value = chern_sum(model, n)?;
    let rounded = value.round();
    if (value - rounded).abs() > CHERN_INTEGER_TOL {
        return Err(Error::NonIntegerChern { value });
    }
    Ok(ChernNumber(rounded as i64))
}

/// Per-k record of a [`BandGrid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub k: KPoint,
    pub gap: f64,
    pub metric: Metric,
    pub curvature: f64,
}

/// Uniform `n × n` Brillouin-zone mesh with gap, metric and curvature.
///
/// Points are stored row-major in `(i, j)` with `k = 2π(i, j)/n`; every sum
/// runs in that order with compensated accumulation, so results do not
/// depend on how many threads filled the mesh.
#[derive(Debug, Clone)]
pub struct BandGrid {
    n: usize,
    model: BlochModel,
    points: Vec<GridPoint>,
}

impl BandGrid {
    pub fn build(model: &BlochModel, n: usize) -> Result<Self> {
        if n < MIN_MESH {
            return Err(Error::InvalidArgument(format!("mesh {n} below minimum {MIN_MESH}")));
        }
        let points = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let k = KPoint::on_mesh(idx / n, idx % n, n);
                let (_, _, gap) = model.bands(k)?;
                Ok(GridPoint {
                    k,
                    gap,
                    metric: quantum_metric(model, k)?,
                    curvature: berry_curvature(model, k)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BandGrid {
            n,
            model: *model,
            points,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn model(&self) -> &BlochModel {
        &self.model
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    /// Integration weight `(2π/n)²` of one mesh point.
    pub fn weight(&self) -> f64 {
        let step = TAU / self.n as f64;
        step * step
    }

    /// `Σ_k f(point) (2π/n)²` in fixed order.
    pub fn bz_sum<F: Fn(&GridPoint) -> f64>(&self, f: F) -> f64 {
        let acc: KahanSum = self.points.iter().map(f).collect();
        acc.value() * self.weight()
    }

    pub fn min_gap(&self) -> (KPoint, f64) {
        let p = self
            .points
            .iter()
            .min_by(|a, b| a.gap.total_cmp(&b.gap))
            .expect("grid is never empty");
        (p.k, p.gap)
    }

    /// `Σ_k Ω (2π/n)²`, equal to `2πC` for a gapped model.
    pub fn curvature_integral(&self) -> f64 {
        self.bz_sum(|p| p.curvature)
    }

    /// Equal-time correlator `S_xx(0) = Σ_k Δ²/tanh(βΔ/2) G_xx (2π/n)²`.
    ///
    /// `beta = None` gives the zero-temperature geometric sum `Σ_k Δ² G_xx`.
    pub fn noise_sum(&self, beta: Option<f64>) -> f64 {
        self.bz_sum(|p| {
            let thermal = beta.map_or(1.0, |b| coth(0.5 * b * p.gap));
            p.gap * p.gap * thermal * p.metric.xx
        })
    }

    /// Midpoint curvature `Σ_k Δ⁴/sinh(βΔ/2) G_xx (2π/n)²` (zero at `T = 0`).
    pub fn curvature_sum(&self, beta: Option<f64>) -> f64 {
        match beta {
            None => 0.0,
            Some(b) => self.bz_sum(|p| p.gap.powi(4) * csch(0.5 * b * p.gap) * p.metric.xx),
        }
    }

    /// Writes `kx,ky,gap,Gxx,Gxy,Gyy,Omega` rows with 12 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "kx,ky,gap,Gxx,Gxy,Gyy,Omega")?;
        for p in &self.points {
            writeln!(
                out,
                "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
                p.k.kx, p.k.ky, p.gap, p.metric.xx, p.metric.xy, p.metric.yy, p.curvature
            )?;
        }
        Ok(())
    }
}

/// Location of a mesh point nearest to `(kx, ky)`, for diagnostics.
pub fn mesh_index(k: KPoint, n: usize) -> (usize, usize) {
    let step = TAU / n as f64;
    (
        ((k.kx / step).round() as usize) % n,
        ((k.ky / step).round() as usize) % n,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{Direction, ModelKind};

    /// Independent metric oracle: finite-difference projector formula
    /// `G_ij = ½ Tr[∂_i P ∂_j P]` for the lower-band projector.
    fn projector(model: &BlochModel, k: KPoint) -> [[Complex64; 2]; 2] {
        let u = lower_eigenvector(model.d_vector(k));
        let mut p = [[Complex64::new(0.0, 0.0); 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                p[a][b] = u[a] * u[b].conj();
            }
        }
        p
    }

    fn projector_derivative(model: &BlochModel, k: KPoint, dir: Direction) -> [[Complex64; 2]; 2] {
        let h = 1e-5;
        let plus = projector(model, k.shifted(dir, h));
        let minus = projector(model, k.shifted(dir, -h));
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                out[a][b] = (plus[a][b] - minus[a][b]) / (2.0 * h);
            }
        }
        out
    }

    fn oracle_metric(model: &BlochModel, k: KPoint) -> (f64, f64, f64, f64) {
        let px = projector_derivative(model, k, Direction::X);
        let py = projector_derivative(model, k, Direction::Y);
        let p = projector(model, k);
        let tr = |a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]| {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..2 {
                for j in 0..2 {
                    s += a[i][j] * b[j][i];
                }
            }
            s
        };
        // Berry curvature from Ω = −i Tr(P [∂x P, ∂y P]) (pinned orientation).
        let mut comm = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    comm[i][j] += px[i][l] * py[l][j] - py[i][l] * px[l][j];
                }
            }
        }
        let omega = (Complex64::new(0.0, -1.0) * tr(&p, &comm)).re;
        (
            0.5 * tr(&px, &px).re,
            0.5 * tr(&px, &py).re,
            0.5 * tr(&py, &py).re,
            omega,
        )
    }

    #[test]
    fn metric_examples() {
        // d = (0,0,3) at Γ for m = 1, so ∂_x d̂ = (1/3,0,0).
        let flat = BlochModel::flat_chern(1.0, 1.0).unwrap();
        let g = quantum_metric(&flat, KPoint::new(0.0, 0.0)).unwrap();
        assert!((g.xx - 1.0 / 36.0).abs() < 1e-15);
        assert!(g.xy.abs() < 1e-15);
        assert!((g.yy - 1.0 / 36.0).abs() < 1e-15);
        let (ox, oxy, oy, _) = oracle_metric(&flat, KPoint::new(0.0, 0.0));
        assert!((ox - g.xx).abs() < 1e-8 && oxy.abs() < 1e-8 && (oy - g.yy).abs() < 1e-8);

        let trivial = BlochModel::trivial_flat(1.0).unwrap();
        let g = quantum_metric(&trivial, KPoint::new(0.4, 2.2)).unwrap();
        assert_eq!((g.xx, g.xy, g.yy), (0.0, 0.0, 0.0));

        let qwz = BlochModel::qwz(1.0).unwrap();
        let k = KPoint::new(1.0, 0.3);
        assert_eq!(quantum_metric(&qwz, k).unwrap(), quantum_metric(&flat, k).unwrap());
    }

    #[test]
    fn curvature_examples() {
        let flat = BlochModel::flat_chern(1.0, 1.0).unwrap();
        let omega = berry_curvature(&flat, KPoint::new(0.0, 0.0)).unwrap();
        // −½ ẑ·(x̂/3 × ŷ/3)
        assert!((omega + 1.0 / 18.0).abs() < 1e-15);
        let trivial = BlochModel::trivial_flat(1.0).unwrap();
        assert_eq!(berry_curvature(&trivial, KPoint::new(1.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn curvature_flips_under_mass_reversal() {
        let plus = BlochModel::qwz(1.0).unwrap();
        let minus = BlochModel::qwz(-1.0).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let k = KPoint::on_mesh(i, j, 16);
                let mirrored = KPoint::new(k.kx + std::f64::consts::PI, k.ky + std::f64::consts::PI);
                let a = berry_curvature(&plus, k).unwrap();
                let b = berry_curvature(&minus, mirrored).unwrap();
                assert!((a + b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn metric_and_curvature_match_projector_oracle() {
        for model in [
            BlochModel::qwz(1.0).unwrap(),
            BlochModel::qwz(-1.5).unwrap(),
            BlochModel::flat_chern(2.7, 0.5).unwrap(),
        ] {
            for i in 0..16 {
                for j in 0..16 {
                    let k = KPoint::on_mesh(i, j, 16);
                    let g = quantum_metric(&model, k).unwrap();
                    let omega = berry_curvature(&model, k).unwrap();
                    let (ox, oxy, oy, oomega) = oracle_metric(&model, k);
                    assert!((g.xx - ox).abs() < 1e-7);
                    assert!((g.xy - oxy).abs() < 1e-7);
                    assert!((g.yy - oy).abs() < 1e-7);
                    assert!((omega - oomega).abs() < 1e-7, "{omega} vs {oomega}");
                }
            }
        }
    }

    #[test]
    fn chern_examples() {
        assert_eq!(chern_number(&BlochModel::qwz(1.0).unwrap(), 32).unwrap(), ChernNumber(1));
        assert_eq!(chern_number(&BlochModel::qwz(-1.0).unwrap(), 32).unwrap(), ChernNumber(-1));
        assert_eq!(chern_number(&BlochModel::qwz(3.0).unwrap(), 32).unwrap(), ChernNumber(0));
        assert_eq!(
            chern_number(&BlochModel::trivial_flat(1.0).unwrap(), 32).unwrap(),
            ChernNumber(0)
        );
        assert_eq!(
            chern_number(&BlochModel::flat_chern(1.0, 1.0).unwrap(), 32).unwrap(),
            ChernNumber(1)
        );
        assert!(chern_number(&BlochModel::qwz(1.0).unwrap(), 8).is_err());
    }

    #[test]
    fn chern_stable_under_refinement() {
        for m in [-3.0, -1.0, 0.5, 1.7, 2.5] {
            let model = BlochModel::qwz(m).unwrap();
            let c16 = chern_number(&model, 16).unwrap();
            assert_eq!(c16, chern_number(&model, 32).unwrap());
            assert_eq!(c16, chern_number(&model, 64).unwrap());
        }
    }

    #[test]
    fn grid_examples() {
        let flat = BandGrid::build(&BlochModel::flat_chern(1.0, 1.0).unwrap(), 64).unwrap();
        assert!(flat.points().iter().all(|p| (p.gap - 1.0).abs() < 1e-14));

        let qwz = BandGrid::build(&BlochModel::qwz(1.0).unwrap(), 64).unwrap();
        // |d| = 1 along the whole kx = π and ky = π lines, including (π, π)
        let (_, gap) = qwz.min_gap();
        assert!((gap - 2.0).abs() < 1e-14);
        let corner = qwz.points()[32 * 64 + 32];
        assert_eq!(mesh_index(corner.k, 64), (32, 32));
        assert!((corner.gap - gap).abs() < 1e-14);
        assert!(BandGrid::build(&BlochModel::qwz(1.0).unwrap(), 15).is_err());
    }

    #[test]
    fn curvature_integral_matches_chern() {
        for (kind, m, delta) in [
            (ModelKind::Qwz, 1.0, 0.0),
            (ModelKind::Qwz, -1.0, 0.0),
            (ModelKind::Qwz, 3.0, 0.0),
            (ModelKind::FlatChern, 1.0, 1.0),
            (ModelKind::TrivialFlat, 0.0, 1.0),
        ] {
            let model = BlochModel::new(kind, m, delta).unwrap();
            let grid = BandGrid::build(&model, 64).unwrap();
            let c = chern_number(&model, 64).unwrap().0 as f64;
            assert!((grid.curvature_integral() - TAU * c).abs() < 1e-6);
        }
    }

    #[test]
    fn two_band_identity_and_trace_bound() {
        let model = BlochModel::qwz(1.0).unwrap();
        let grid = BandGrid::build(&model, 64).unwrap();
        for p in grid.points() {
            assert!(p.metric.xx >= 0.0 && p.metric.yy >= 0.0);
            assert!(p.metric.det() >= -1e-15);
            assert!((p.metric.det().max(0.0).sqrt() - 0.5 * p.curvature.abs()).abs() <= 1e-8);
        }
        let trace = grid.bz_sum(|p| p.metric.trace());
        assert!(trace >= TAU - 1e-6);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let grid = BandGrid::build(&BlochModel::qwz(1.0).unwrap(), 16).unwrap();
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("kx,ky,gap,Gxx,Gxy,Gyy,Omega"));
        assert_eq!(lines.count(), 256);
    }
}
