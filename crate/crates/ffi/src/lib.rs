//! C ABI for `corrcurv`.
//!
//! Every fallible function returns a [`CcStatus`] and writes results through
//! out-pointers. Objects are opaque handles created by `*_new` and released
//! by the matching `*_free`. After a status other than `CC_STATUS_OK`,
//! [`cc_last_error_message`] retrieves a description for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use corrcurv::bloch::{BlochModel, ModelKind};
use corrcurv::bounds;
use corrcurv::geometry::{self, BandGrid};
use corrcurv::matsubara::{self, SpectralDensity};
use corrcurv::mori::{self, EdSystem};
use corrcurv::Error;

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcStatus {
    Ok = 0,
    GapClosure = 1,
    NonIntegerChern = 2,
    EmptyDensity = 3,
    ZeroNoise = 4,
    NotConverged = 5,
    Domain = 6,
    InvalidArgument = 7,
    DimensionTooLarge = 8,
    ZeroCurrentNorm = 9,
    ChainTerminated = 10,
    Diagonalization = 11,
    NullPointer = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcModelKind {
    Qwz = 0,
    FlatChern = 1,
    TrivialFlat = 2,
}

/// Two-band model: QWZ mass `m` and flat-band gap `delta`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CcModelParams {
    pub kind: CcModelKind,
    pub m: f64,
    pub delta: f64,
}

/// Supremum constants of the order-n bound.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CcBoundConstants {
    pub order: u32,
    pub x_star: f64,
    pub sup_val: f64,
    pub a_const: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CcB1Check {
    pub b1_sq: f64,
    pub midpoint_ratio: f64,
    pub bound_margin: f64,
    pub holds: bool,
    pub universal_holds: bool,
}

/// Opaque k-mesh of metric and curvature data.
pub struct CcBandGrid {
    inner: BandGrid,
}

/// Opaque delta-peak spectral density.
pub struct CcSpectralDensity {
    inner: SpectralDensity,
}

/// Opaque diagonalized fermion ring.
pub struct CcEdSystem {
    inner: EdSystem,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

struct Failure(CcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::GapClosure { .. } => CcStatus::GapClosure,
            Error::NonIntegerChern { .. } => CcStatus::NonIntegerChern,
            Error::EmptyDensity => CcStatus::EmptyDensity,
            Error::ZeroNoise { .. } => CcStatus::ZeroNoise,
            Error::NotConverged { .. } => CcStatus::NotConverged,
            Error::Domain(_) => CcStatus::Domain,
            Error::InvalidArgument(_) => CcStatus::InvalidArgument,
            Error::DimensionTooLarge { .. } => CcStatus::DimensionTooLarge,
            Error::ZeroCurrentNorm => CcStatus::ZeroCurrentNorm,
            Error::ChainTerminated(_) => CcStatus::ChainTerminated,
            Error::Diagonalization { .. } => CcStatus::Diagonalization,
        };
        Failure(status, e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(CcStatus::NullPointer, format!("{name} is NULL"))
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> CcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CcStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {message}"));
            CcStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn put<T>(out: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

fn model(params: &CcModelParams) -> Result<BlochModel, Failure> {
    let kind = match params.kind {
        CcModelKind::Qwz => ModelKind::Qwz,
        CcModelKind::FlatChern => ModelKind::FlatChern,
        CcModelKind::TrivialFlat => ModelKind::TrivialFlat,
    };
    Ok(BlochModel::new(kind, params.m, params.delta)?)
}

/// `None` for `beta = +inf` (zero temperature).
fn temperature(beta: f64) -> Result<Option<f64>, Failure> {
    if beta == f64::INFINITY {
        Ok(None)
    } else if beta > 0.0 && beta.is_finite() {
        Ok(Some(beta))
    } else {
        Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")).into())
    }
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length including the NUL,
/// or 0 if there is no message.
///
/// # Safety
/// `buf` must be NULL or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cc_bound_constants(order: u32, out: *mut CcBoundConstants) -> CcStatus {
    guard(|| {
        let c = bounds::bound_constants(order)?;
        put(
            out,
            CcBoundConstants {
                order: c.order,
                x_star: c.x_star,
                sup_val: c.sup_val,
                a_const: c.a_const,
            },
            "out",
        )
    })
}

/// Chern number of the lower band on an `n × n` mesh.
///
/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cc_chern_number(params: *const CcModelParams, n: usize, out: *mut i64) -> CcStatus {
    guard(|| {
        let m = model(get(params, "params")?)?;
        put(out, geometry::chern_number(&m, n)?.0, "out")
    })
}

/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cc_band_grid_new(
    params: *const CcModelParams,
    n: usize,
    out: *mut *mut CcBandGrid,
) -> CcStatus {
    guard(|| {
        let m = model(get(params, "params")?)?;
        let grid = BandGrid::build(&m, n)?;
        put(out, Box::into_raw(Box::new(CcBandGrid { inner: grid })), "out")
    })
}

/// # Safety
/// `grid` must be NULL or a handle from [`cc_band_grid_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cc_band_grid_free(grid: *mut CcBandGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of mesh points per direction.
///
/// # Safety
/// `grid` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cc_band_grid_size(grid: *const CcBandGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.inner.n())
}

/// Equal-time sum `Σ_k Δ² coth(βΔ/2) G_xx (2π/n)²`; `beta = INFINITY` gives
/// the zero-temperature limit.
///
/// # Safety
/// `grid` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cc_band_grid_noise_sum(grid: *const CcBandGrid, beta: f64, out: *mut f64) -> CcStatus {
    guard(|| {
        let g = get(grid, "grid")?;
        put(out, g.inner.noise_sum(temperature(beta)?), "out")
    })
}

/// # Safety
/// `grid` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cc_band_grid_curvature_sum(grid: *const CcBandGrid, beta: f64, out: *mut f64) -> CcStatus {
    guard(|| {
        let g = get(grid, "grid")?;
        put(out, g.inner.curvature_sum(temperature(beta)?), "out")
    })
}

/// Writes rows `kx, ky, gap, Gxx, Gxy, Gyy, Omega` (7 doubles per point,
/// row-major mesh order) into `buf` of `len` doubles.
///
/// # Safety
/// `grid` must be valid; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cc_band_grid_points(grid: *const CcBandGrid, buf: *mut f64, len: usize) -> CcStatus {
    guard(|| {
        let g = get(grid, "grid")?;
        let points = g.inner.points();
        if points.len() * 7 > len {
            return Err(Failure(
                CcStatus::BufferTooSmall,
                format!("need {} doubles, got {len}", points.len() * 7),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        let out = std::slice::from_raw_parts_mut(buf, points.len() * 7);
        for (row, p) in out.chunks_exact_mut(7).zip(points) {
            row.copy_from_slice(&[p.k.kx, p.k.ky, p.gap, p.metric.xx, p.metric.xy, p.metric.yy, p.curvature]);
        }
        Ok(())
    })
}

/// `ρ₀` from the band sums.
///
/// # Safety
/// `grid` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cc_rho0_band(grid: *const CcBandGrid, beta: f64, out: *mut f64) -> CcStatus {
    guard(|| put(out, bounds::rho0_band(&get(grid, "grid")?.inner, beta)?, "out"))
}

/// Density from `len` peaks at `omegas[i] ≥ 0` with weights `weights[i] ≥ 0`.
///
/// # Safety
/// `omegas` and `weights` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cc_density_new(
    omegas: *const f64,
    weights: *const f64,
    len: usize,
    out: *mut *mut CcSpectralDensity,
) -> CcStatus {
    guard(|| {
        if len > 0 && (omegas.is_null() || weights.is_null()) {
            return Err(null("omegas/weights"));
        }
        let (w, p) = if len == 0 {
            (&[][..], &[][..])
        } else {
            (std::slice::from_raw_parts(omegas, len), std::slice::from_raw_parts(weights, len))
        };
        let d = SpectralDensity::from_pairs(w.iter().copied().zip(p.iter().copied()))?;
        put(out, Box::into_raw(Box::new(CcSpectralDensity { inner: d })), "out")
    })
}

/// Interband spectral density of a band grid.
///
/// # Safety
/// `grid` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cc_density_from_band_grid(
    grid: *const CcBandGrid,
    out: *mut *mut CcSpectralDensity,
) -> CcStatus {
    guard(|| {
        let d = matsubara::band_density(&get(grid, "grid")?.inner);
        put(out, Box::into_raw(Box::new(CcSpectralDensity { inner: d })), "out")
    })
}

/// # Safety
/// `d` must be NULL or a live density handle.
#[no_mangle]
pub unsafe extern "C" fn cc_density_free(d: *mut CcSpectralDensity) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Number of peaks.
///
/// # Safety
/// `d` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cc_density_len(d: *const CcSpectralDensity) -> usize {
    d.as_ref().map_or(0, |d| d.inner.peaks().len())
}

/// `S(τ_j)` on `n_tau` (odd) evenly spaced points of `[0, β]`.
///
/// # Safety
/// `d` must be valid; `values` must point to `n_tau` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cc_correlator(
    d: *const CcSpectralDensity,
    beta: f64,
    n_tau: usize,
    values: *mut f64,
) -> CcStatus {
    guard(|| {
        let corr = matsubara::spectral_correlator(&get(d, "density")?.inner, beta, n_tau)?;
        if values.is_null() {
            return Err(null("values"));
        }
        std::slice::from_raw_parts_mut(values, n_tau).copy_from_slice(corr.values());
        Ok(())
    })
}

/// # Safety
/// `d` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cc_equal_time(d: *const CcSpectralDensity, beta: f64, out: *mut f64) -> CcStatus {
    guard(|| put(out, matsubara::equal_time(&get(d, "density")?.inner, beta)?, "out"))
}

/// # Safety
/// `d` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cc_rho0_spectral(d: *const CcSpectralDensity, beta: f64, out: *mut f64) -> CcStatus {
    guard(|| put(out, bounds::rho0_spectral(&get(d, "density")?.inner, beta)?, "out"))
}

/// Accelerated `(1/β) Σ_n (−1)ⁿ S(iω_n)`, equal to `S(β/2)`.
///
/// # Safety
/// `d` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cc_alternating_sum(
    d: *const CcSpectralDensity,
    beta: f64,
    max_index: usize,
    out: *mut f64,
) -> CcStatus {
    guard(|| {
        put(
            out,
            matsubara::alternating_sum(&get(d, "density")?.inner, beta, max_index, true)?,
            "out",
        )
    })
}

/// Margin of the order-n universal bound.
///
/// # Safety
/// `d` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cc_check_bound(d: *const CcSpectralDensity, beta: f64, order: u32, out: *mut f64) -> CcStatus {
    guard(|| put(out, bounds::check_bound(&get(d, "density")?.inner, beta, order)?, "out"))
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cc_ed_new(
    sites: usize,
    hopping: f64,
    interaction: f64,
    particles: usize,
    out: *mut *mut CcEdSystem,
) -> CcStatus {
    guard(|| {
        let sys = EdSystem::build(sites, hopping, interaction, particles)?;
        put(out, Box::into_raw(Box::new(CcEdSystem { inner: sys })), "out")
    })
}

/// # Safety
/// `sys` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cc_ed_free(sys: *mut CcEdSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Hilbert-space dimension.
///
/// # Safety
/// `sys` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cc_ed_dimension(sys: *const CcEdSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.inner.dimension())
}

/// Copies the ascending energies into `buf` of `len` doubles.
///
/// # Safety
/// `sys` must be valid; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cc_ed_energies(sys: *const CcEdSystem, buf: *mut f64, len: usize) -> CcStatus {
    guard(|| {
        let e = get(sys, "sys")?.inner.energies();
        if len < e.len() {
            return Err(Failure(CcStatus::BufferTooSmall, format!("need {} doubles, got {len}", e.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, e.len()).copy_from_slice(e);
        Ok(())
    })
}

/// Mori chain up to `levels` coefficients. `b_sq` receives the valid
/// coefficients and `out_len` their count; `out_terminated_at` is the level
/// at which the Krylov space closed, or 0.
///
/// # Safety
/// `sys` must be valid; `b_sq` must point to `levels` writable doubles; the
/// other out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cc_mori_chain(
    sys: *const CcEdSystem,
    beta: f64,
    levels: usize,
    out_norm0: *mut f64,
    b_sq: *mut f64,
    out_len: *mut usize,
    out_terminated_at: *mut usize,
) -> CcStatus {
    guard(|| {
        let chain = mori::mori_chain(&get(sys, "sys")?.inner, beta, levels)?;
        if !chain.b_sq.is_empty() {
            if b_sq.is_null() {
                return Err(null("b_sq"));
            }
            std::slice::from_raw_parts_mut(b_sq, chain.b_sq.len()).copy_from_slice(&chain.b_sq);
        }
        put(out_norm0, chain.norm0, "out_norm0")?;
        put(out_len, chain.b_sq.len(), "out_len")?;
        put(out_terminated_at, chain.terminated_at.unwrap_or(0), "out_terminated_at")
    })
}

/// # Safety
/// `sys` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cc_b1_bound_check(sys: *const CcEdSystem, beta: f64, out: *mut CcB1Check) -> CcStatus {
    guard(|| {
        let c = mori::b1_bound_check(&get(sys, "sys")?.inner, beta)?;
        put(
            out,
            CcB1Check {
                b1_sq: c.b1_sq,
                midpoint_ratio: c.midpoint_ratio,
                bound_margin: c.bound_margin,
                holds: c.holds,
                universal_holds: c.universal_holds,
            },
            "out",
        )
    })
}

/// `⟨(LⁿJ)(τ) J⟩` from the Lehmann sum.
///
/// # Safety
/// `sys` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cc_nested_correlator(
    sys: *const CcEdSystem,
    order: u32,
    tau: f64,
    beta: f64,
    out: *mut f64,
) -> CcStatus {
    guard(|| put(out, mori::nested_correlator(&get(sys, "sys")?.inner, order, tau, beta)?, "out"))
}
