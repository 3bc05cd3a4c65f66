//! C ABI over the simulator core.
//!
//! Every function returns an [`AerosimStatus`] and writes results through
//! out-pointers. On failure the message is kept per thread and can be read
//! with [`aerosim_last_error`]. Handles are opaque and must be released
//! with their `_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use aerosim::antenna::{AntennaArrayConfig, AntennaPattern};
use aerosim::channel::fspl_db;
use aerosim::config::{parse_config, RunConfig};
use aerosim::deployment::{build_layout, wrap_distance, NetworkLayout, Point2};
use aerosim::enhancements::{classify_aerial, AerialClassifierConfig};
use aerosim::experiment::{run_experiment, Experiment};
use aerosim::uplink::{ul_tx_power, PowerControlConfig};
use aerosim::SimError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AerosimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    DomainError = 4,
    IoError = 5,
    ParseError = 6,
    RuntimeError = 7,
    Panic = 8,
}

/// Parsed run configuration.
pub struct AerosimConfig {
    inner: RunConfig,
}

/// Hexagonal network layout with wraparound.
pub struct AerosimLayout {
    inner: NetworkLayout,
}

/// Sampled base-station array pattern.
pub struct AerosimPattern {
    inner: AntennaPattern,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Sim(SimError),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Sim(e)
    }
}

fn status_of(e: &SimError) -> AerosimStatus {
    match e.root() {
        SimError::Config { .. } => AerosimStatus::ConfigError,
        SimError::Domain(_) => AerosimStatus::DomainError,
        SimError::Io { .. } => AerosimStatus::IoError,
        SimError::Parse { .. } => AerosimStatus::ParseError,
        _ => AerosimStatus::RuntimeError,
    }
}

/// Runs `f`, records any failure and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AerosimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            AerosimStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            AerosimStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            AerosimStatus::InvalidArgument
        }
        Ok(Err(Failure::Sim(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            AerosimStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Arg(format!("{what} is not valid UTF-8")))
}

fn finite(x: f64, what: &str) -> Result<f64, Failure> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Failure::Arg(format!("{what} must be finite")))
    }
}

/// Message of the last failed call on this thread, or NULL. Valid until
/// the next call on the same thread.
#[no_mangle]
pub extern "C" fn aerosim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Free-space pathloss in dB.
///
/// # Safety
/// `out_db` must be NULL or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn aerosim_fspl_db(d3d_m: f64, fc_ghz: f64, out_db: *mut f64) -> AerosimStatus {
    guard(|| {
        let o = out(out_db, "out_db")?;
        if !(finite(d3d_m, "d3d_m")? > 0.0 && finite(fc_ghz, "fc_ghz")? > 0.0) {
            return Err(Failure::Arg("d3d_m and fc_ghz must be > 0".into()));
        }
        *o = fspl_db(d3d_m, fc_ghz);
        Ok(())
    })
}

/// Open-loop fractional uplink power in dBm for `n_rb` resource blocks.
///
/// # Safety
/// `out_dbm` must be NULL or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn aerosim_ul_tx_power_dbm(
    p0_dbm: f64,
    alpha: f64,
    p_max_dbm: f64,
    n_rb: usize,
    pathloss_db: f64,
    out_dbm: *mut f64,
) -> AerosimStatus {
    guard(|| {
        let o = out(out_dbm, "out_dbm")?;
        let pc = PowerControlConfig {
            p0_dbm: finite(p0_dbm, "p0_dbm")?,
            alpha: finite(alpha, "alpha")?,
            p_max_dbm: finite(p_max_dbm, "p_max_dbm")?,
        };
        pc.validate("power_control")?;
        if n_rb == 0 {
            return Err(Failure::Arg("n_rb must be >= 1".into()));
        }
        *o = ul_tx_power(&pc, n_rb, finite(pathloss_db, "pathloss_db")?);
        Ok(())
    })
}

/// Flags a received-power profile as aerial when at least `k_cells` cells
/// lie within `delta_db` of the strongest.
///
/// # Safety
/// `profile_dbm` must point to `len` readable doubles; `out_aerial` must be
/// NULL or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn aerosim_classify_aerial(
    profile_dbm: *const f64,
    len: usize,
    delta_db: f64,
    k_cells: usize,
    out_aerial: *mut bool,
) -> AerosimStatus {
    guard(|| {
        let o = out(out_aerial, "out_aerial")?;
        if profile_dbm.is_null() {
            return Err(Failure::Null("profile_dbm"));
        }
        let profile = std::slice::from_raw_parts(profile_dbm, len);
        *o = classify_aerial(profile, &AerialClassifierConfig { delta_db, k_cells })?;
        Ok(())
    })
}

/// Baseline configuration with every section at its default.
///
/// # Safety
/// `out_config` must be NULL or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn aerosim_config_baseline(out_config: *mut *mut AerosimConfig) -> AerosimStatus {
    guard(|| {
        let o = out(out_config, "out_config")?;
        *o = Box::into_raw(Box::new(AerosimConfig {
            inner: RunConfig::baseline(),
        }));
        Ok(())
    })
}

/// Parses and validates a TOML configuration file.
///
/// # Safety
/// `path` must be NULL or a NUL-terminated string; `out_config` must be
/// NULL or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn aerosim_config_load(path: *const c_char, out_config: *mut *mut AerosimConfig) -> AerosimStatus {
    guard(|| {
        let o = out(out_config, "out_config")?;
        let p = c_str(path, "path")?;
        let cfg = parse_config(Path::new(p))?;
        *o = Box::into_raw(Box::new(AerosimConfig { inner: cfg }));
        Ok(())
    })
}

/// # Safety
/// `config` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn aerosim_config_free(config: *mut AerosimConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Pathloss in dB under the configuration's channel model and carrier.
///
/// # Safety
/// `config` must be NULL or a live handle; `out_db` must be NULL or valid
/// for one write.
#[no_mangle]
pub unsafe extern "C" fn aerosim_pathloss_db(
    config: *const AerosimConfig,
    d2d_m: f64,
    h_bs_m: f64,
    h_ut_m: f64,
    los: bool,
    out_db: *mut f64,
) -> AerosimStatus {
    guard(|| {
        let o = out(out_db, "out_db")?;
        let cfg = &handle(config, "config")?.inner;
        *o = cfg.channel_model()?.pathloss_at(d2d_m, h_bs_m, h_ut_m, los)?;
        Ok(())
    })
}

/// Runs an experiment by name and writes its results into `out_dir`.
///
/// # Safety
/// `config` must be NULL or a live handle; the strings must be NULL or
/// NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn aerosim_run_experiment(
    config: *const AerosimConfig,
    experiment: *const c_char,
    out_dir: *const c_char,
) -> AerosimStatus {
    guard(|| {
        let cfg = &handle(config, "config")?.inner;
        let exp: Experiment = c_str(experiment, "experiment")?.parse()?;
        let dir = c_str(out_dir, "out_dir")?;
        run_experiment(cfg, exp, Path::new(dir))?;
        Ok(())
    })
}

/// Wraparound layout with three cells per site.
///
/// # Safety
/// `out_layout` must be NULL or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn aerosim_layout_new(
    isd_m: f64,
    n_sites: usize,
    bs_height_m: f64,
    out_layout: *mut *mut AerosimLayout,
) -> AerosimStatus {
    guard(|| {
        let o = out(out_layout, "out_layout")?;
        let inner = build_layout(isd_m, n_sites, bs_height_m)?;
        *o = Box::into_raw(Box::new(AerosimLayout { inner }));
        Ok(())
    })
}

/// # Safety
/// `layout` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn aerosim_layout_free(layout: *mut AerosimLayout) {
    if !layout.is_null() {
        drop(Box::from_raw(layout));
    }
}

/// # Safety
/// `layout` must be NULL or a live handle; `out_cells` must be NULL or
/// valid for one write.
#[no_mangle]
pub unsafe extern "C" fn aerosim_layout_n_cells(layout: *const AerosimLayout, out_cells: *mut usize) -> AerosimStatus {
    guard(|| {
        let o = out(out_cells, "out_cells")?;
        *o = handle(layout, "layout")?.inner.n_cells();
        Ok(())
    })
}

/// Shortest distance between two points over the wraparound images.
///
/// # Safety
/// `layout` must be NULL or a live handle; `out_m` must be NULL or valid
/// for one write.
#[no_mangle]
pub unsafe extern "C" fn aerosim_wrap_distance(
    layout: *const AerosimLayout,
    ax: f64,
    ay: f64,
    bx: f64,
    by: f64,
    out_m: *mut f64,
) -> AerosimStatus {
    guard(|| {
        let o = out(out_m, "out_m")?;
        let l = &handle(layout, "layout")?.inner;
        for (x, w) in [(ax, "ax"), (ay, "ay"), (bx, "bx"), (by, "by")] {
            finite(x, w)?;
        }
        *o = wrap_distance(Point2::new(ax, ay), Point2::new(bx, by), l);
        Ok(())
    })
}

/// Array pattern of the default 8x1x2 panel with 6 degree tilt.
///
/// # Safety
/// `out_pattern` must be NULL or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn aerosim_pattern_default(out_pattern: *mut *mut AerosimPattern) -> AerosimStatus {
    guard(|| {
        let o = out(out_pattern, "out_pattern")?;
        let inner = AntennaPattern::synthesize(&AntennaArrayConfig::default())?;
        *o = Box::into_raw(Box::new(AerosimPattern { inner }));
        Ok(())
    })
}

/// # Safety
/// `pattern` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn aerosim_pattern_free(pattern: *mut AerosimPattern) {
    if !pattern.is_null() {
        drop(Box::from_raw(pattern));
    }
}

/// Interpolated array gain in dBi. `theta_deg` is zenith angle in [0, 180],
/// `phi_deg` azimuth relative to boresight.
///
/// # Safety
/// `pattern` must be NULL or a live handle; `out_dbi` must be NULL or valid
/// for one write.
#[no_mangle]
pub unsafe extern "C" fn aerosim_pattern_gain(
    pattern: *const AerosimPattern,
    theta_deg: f64,
    phi_deg: f64,
    out_dbi: *mut f64,
) -> AerosimStatus {
    guard(|| {
        let o = out(out_dbi, "out_dbi")?;
        let p = &handle(pattern, "pattern")?.inner;
        if !(0.0..=180.0).contains(&finite(theta_deg, "theta_deg")?) {
            return Err(Failure::Arg("theta_deg must lie in [0, 180]".into()));
        }
        *o = p.gain(theta_deg, finite(phi_deg, "phi_deg")?);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_is_recorded_and_cleared() {
        let mut x = 0.0;
        assert_eq!(unsafe { aerosim_fspl_db(-1.0, 0.7, &mut x) }, AerosimStatus::InvalidArgument);
        assert!(!aerosim_last_error().is_null());
        assert_eq!(unsafe { aerosim_fspl_db(1000.0, 0.7, &mut x) }, AerosimStatus::Ok);
        assert!(aerosim_last_error().is_null());
    }

    #[test]
    fn null_out_pointer() {
        let s = unsafe { aerosim_fspl_db(1000.0, 0.7, std::ptr::null_mut()) };
        assert_eq!(s, AerosimStatus::NullPointer);
    }
}
