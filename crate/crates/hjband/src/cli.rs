//! Configuration, table generation, and report formatting for the `hjband`
//! binary. The binary itself only parses flags and forwards here.
//!
//! Output contracts:
//!
//! - `dispersion` CSV header: `energy,cos_ke,allowed,k_bloch`
//! - `bands` CSV header: `band_index,e_lower,e_upper,clipped_lower,clipped_upper`
//! - `action` CSV header: `x,s0,ds0,r,region`
//!
//! CSV floats are printed with 17 significant digits and a `.` decimal
//! separator regardless of locale, so identical configurations produce
//! byte-identical files. Metadata rides in `#`-prefixed comment lines above
//! the header. JSON output is a single object that echoes the lattice and
//! re-parses to the exact input values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use thiserror::Error;

use crate::action::qshje_residual;
use crate::bloch::{
    apply_mobius, bloch_defect, bloch_derivative_residuals, bloch_interface_ab,
    bloch_value_residuals, bohm_defect, interface_quantities, mobius_coefficients, BlochAction,
    BlochError, SuperpositionParams,
};
use crate::model::{classify_point, schrodinger_residual, wavenumbers, LatticeSpec, Region};
use crate::spectrum::{
    bloch_wavenumber, dispersion_rhs, find_bands, transfer_matrix_oracle, BlochPoint, SpectrumError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl From<BlochError> for CliError {
    fn from(e: BlochError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<SpectrumError> for CliError {
    fn from(e: SpectrumError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(CliError::Config(format!(
                "format: expected `csv` or `json`, got `{other}`"
            ))),
        }
    }
}

/// Fully validated run configuration. Field names match the flag and
/// config-file keys.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub lattice: LatticeSpec,
    pub e_min: f64,
    pub e_max: f64,
    pub n_samples: usize,
    pub gamma: f64,
    pub delta: f64,
    pub energy: Option<f64>,
    pub periods: usize,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    pub plot_script: bool,
    pub inject_error: bool,
    pub tolerances: BTreeMap<String, f64>,
}

/// Raw settings before validation; every field optional so that file values
/// and flag overrides can be merged.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub v0: Option<f64>,
    pub c: Option<f64>,
    pub d: Option<f64>,
    pub emin: Option<f64>,
    pub emax: Option<f64>,
    pub samples: Option<usize>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub energy: Option<f64>,
    pub periods: Option<usize>,
    pub format: Option<String>,
    pub out: Option<PathBuf>,
    pub plot_script: bool,
    pub inject_error: bool,
    pub tolerances: BTreeMap<String, f64>,
}

impl RawConfig {
    /// Applies `self` on top of `base`: set fields win.
    pub fn over(self, base: RawConfig) -> RawConfig {
        let mut tolerances = base.tolerances;
        tolerances.extend(self.tolerances);
        RawConfig {
            v0: self.v0.or(base.v0),
            c: self.c.or(base.c),
            d: self.d.or(base.d),
            emin: self.emin.or(base.emin),
            emax: self.emax.or(base.emax),
            samples: self.samples.or(base.samples),
            gamma: self.gamma.or(base.gamma),
            delta: self.delta.or(base.delta),
            energy: self.energy.or(base.energy),
            periods: self.periods.or(base.periods),
            format: self.format.or(base.format),
            out: self.out.or(base.out),
            plot_script: self.plot_script || base.plot_script,
            inject_error: self.inject_error || base.inject_error,
            tolerances,
        }
    }

    /// Validates and fills defaults, naming the offending field on failure.
    pub fn validate(self) -> Result<RunConfig, CliError> {
        let v0 = self.v0.unwrap_or(10.0);
        let c = self.c.unwrap_or(1.0);
        let d = self.d.unwrap_or(1.0);
        let lattice = LatticeSpec::new(v0, c, d).map_err(|e| CliError::Config(e.to_string()))?;
        let e_min = self.emin.unwrap_or(0.1);
        let e_max = self.emax.unwrap_or(40.0);
        if !e_min.is_finite() || e_min <= 0.0 {
            return Err(CliError::Config(format!(
                "emin: must be positive and finite, got {e_min}"
            )));
        }
        if !e_max.is_finite() || e_min >= e_max {
            return Err(CliError::Config(format!(
                "emax: must exceed emin = {e_min}, got {e_max}"
            )));
        }
        let n_samples = self.samples.unwrap_or(4000);
        if n_samples < 2 {
            return Err(CliError::Config(format!(
                "samples: need at least 2, got {n_samples}"
            )));
        }
        let gamma = self.gamma.unwrap_or(1.0);
        if !gamma.is_finite() || !(-1.0..=1.0).contains(&gamma) {
            return Err(CliError::Config(format!(
                "gamma: must lie in [-1, 1], got {gamma}"
            )));
        }
        let delta = self.delta.unwrap_or(0.0);
        if !delta.is_finite() {
            return Err(CliError::Config(format!(
                "delta: must be finite, got {delta}"
            )));
        }
        if let Some(e) = self.energy {
            if !e.is_finite() || e <= 0.0 {
                return Err(CliError::Config(format!(
                    "energy: must be positive and finite, got {e}"
                )));
            }
        }
        let periods = self.periods.unwrap_or(2);
        if periods == 0 {
            return Err(CliError::Config("periods: must be at least 1".into()));
        }
        let format = match self.format.as_deref() {
            None => OutputFormat::Csv,
            Some(s) => OutputFormat::parse(s)?,
        };
        if self.plot_script && self.out.is_none() {
            return Err(CliError::Config(
                "plot_script: requires an output path (--out)".into(),
            ));
        }
        for (name, tol) in &self.tolerances {
            if !tol.is_finite() || *tol <= 0.0 {
                return Err(CliError::Config(format!(
                    "tol.{name}: must be positive and finite, got {tol}"
                )));
            }
        }
        Ok(RunConfig {
            lattice,
            e_min,
            e_max,
            n_samples,
            gamma,
            delta,
            energy: self.energy,
            periods,
            format,
            out: self.out,
            plot_script: self.plot_script,
            inject_error: self.inject_error,
            tolerances: self.tolerances,
        })
    }
}

/// Parses a `key=value` config file. Unknown keys are errors; `tol.<name>`
/// keys feed the tolerance override map.
pub fn parse_config_file(path: &Path) -> Result<RawConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("config: cannot read {}: {e}", path.display())))?;
    let mut raw = RawConfig::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("config line {}: expected key=value", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        let parse_f64 = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| CliError::Config(format!("config key `{key}`: bad number `{v}`")))
        };
        let parse_usize = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| CliError::Config(format!("config key `{key}`: bad integer `{v}`")))
        };
        let parse_bool = |v: &str| match v {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(CliError::Config(format!(
                "config key `{key}`: bad boolean `{v}`"
            ))),
        };
        match key {
            "v0" => raw.v0 = Some(parse_f64(value)?),
            "c" => raw.c = Some(parse_f64(value)?),
            "d" => raw.d = Some(parse_f64(value)?),
            "emin" => raw.emin = Some(parse_f64(value)?),
            "emax" => raw.emax = Some(parse_f64(value)?),
            "samples" => raw.samples = Some(parse_usize(value)?),
            "gamma" => raw.gamma = Some(parse_f64(value)?),
            "delta" => raw.delta = Some(parse_f64(value)?),
            "energy" => raw.energy = Some(parse_f64(value)?),
            "periods" => raw.periods = Some(parse_usize(value)?),
            "format" => raw.format = Some(value.to_string()),
            "out" => raw.out = Some(PathBuf::from(value)),
            "plot_script" => raw.plot_script = parse_bool(value)?,
            _ => {
                if let Some(name) = key.strip_prefix("tol.") {
                    raw.tolerances.insert(name.to_string(), parse_f64(value)?);
                } else {
                    return Err(CliError::Config(format!("config: unknown key `{key}`")));
                }
            }
        }
    }
    Ok(raw)
}

/// 17 significant digits, locale independent.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn lattice_json(lat: &LatticeSpec) -> serde_json::Value {
    serde_json::json!({
        "v0": lat.v0(),
        "c": lat.c(),
        "d": lat.d(),
        "period": lat.period(),
    })
}

/// `dispersion`: the dispersion table over the configured energy grid.
pub fn cmd_dispersion(cfg: &RunConfig) -> Result<String, CliError> {
    let step = (cfg.e_max - cfg.e_min) / (cfg.n_samples - 1) as f64;
    let mut points = Vec::with_capacity(cfg.n_samples);
    for i in 0..cfg.n_samples {
        let e = cfg.e_min + i as f64 * step;
        points.push(bloch_wavenumber(e, &cfg.lattice)?);
    }
    Ok(match cfg.format {
        OutputFormat::Csv => {
            let mut out = String::new();
            let _ = writeln!(out, "energy,cos_ke,allowed,k_bloch");
            for p in &points {
                let k = p.k_bloch.map(fmt_float).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    fmt_float(p.energy),
                    fmt_float(p.cos_ke),
                    p.allowed,
                    k
                );
            }
            out
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = points.iter().map(point_json).collect();
            let doc = serde_json::json!({
                "lattice": lattice_json(&cfg.lattice),
                "emin": cfg.e_min,
                "emax": cfg.e_max,
                "samples": cfg.n_samples,
                "points": rows,
            });
            format!("{doc:#}\n")
        }
    })
}

fn point_json(p: &BlochPoint) -> serde_json::Value {
    serde_json::json!({
        "energy": p.energy,
        "cos_ke": p.cos_ke,
        "allowed": p.allowed,
        "k_bloch": p.k_bloch,
    })
}

/// `bands`: the allowed bands found on the configured range. An empty table
/// is a valid answer.
pub fn cmd_bands(cfg: &RunConfig) -> Result<String, CliError> {
    let bands = find_bands(&cfg.lattice, cfg.e_min, cfg.e_max, cfg.n_samples)?;
    Ok(match cfg.format {
        OutputFormat::Csv => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "band_index,e_lower,e_upper,clipped_lower,clipped_upper"
            );
            for b in &bands {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    b.index,
                    fmt_float(b.e_lo),
                    fmt_float(b.e_hi),
                    b.clipped_lo,
                    b.clipped_hi
                );
            }
            out
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = bands
                .iter()
                .map(|b| {
                    serde_json::json!({
                        "band_index": b.index,
                        "e_lower": b.e_lo,
                        "e_upper": b.e_hi,
                        "clipped_lower": b.clipped_lo,
                        "clipped_upper": b.clipped_hi,
                    })
                })
                .collect();
            let doc = serde_json::json!({
                "lattice": lattice_json(&cfg.lattice),
                "emin": cfg.e_min,
                "emax": cfg.e_max,
                "samples": cfg.n_samples,
                "bands": rows,
            });
            format!("{doc:#}\n")
        }
    })
}

/// `action`: the constructed reduced-action profile over the configured
/// number of periods, with the solved constants in the header.
pub fn cmd_action(cfg: &RunConfig) -> Result<String, CliError> {
    let energy = cfg
        .energy
        .ok_or_else(|| CliError::Config("energy: required for `action`".into()))?;
    let sp = SuperpositionParams::from_gamma_delta(cfg.gamma, cfg.delta)?;
    let x_lo = -cfg.lattice.d();
    let x_hi = cfg.periods as f64 * cfg.lattice.period();
    let action = BlochAction::solve_over(energy, &cfg.lattice, &sp, x_lo, x_hi)?;

    let n = cfg.n_samples;
    let step = (x_hi - x_lo) / (n - 1) as f64;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let x = x_lo + i as f64 * step;
        let s = action.sample(x)?;
        let region = match classify_point(x, &cfg.lattice).0 {
            Region::Well => "well",
            Region::Barrier => "barrier",
        };
        rows.push((s, region));
    }

    Ok(match cfg.format {
        OutputFormat::Csv => {
            let mut out = String::new();
            let _ = writeln!(out, "# energy={}", fmt_float(energy));
            let _ = writeln!(out, "# mu1={}", fmt_float(action.mu1()));
            let _ = writeln!(out, "# nu1={}", fmt_float(action.nu1()));
            let _ = writeln!(out, "# gamma={}", fmt_float(cfg.gamma));
            let _ = writeln!(out, "# delta={}", fmt_float(cfg.delta));
            let _ = writeln!(out, "# k_bloch={}", fmt_float(action.k_bloch()));
            let _ = writeln!(out, "# winding_n={}", action.winding());
            let _ = writeln!(out, "x,s0,ds0,r,region");
            for (s, region) in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    fmt_float(s.x),
                    fmt_float(s.s0),
                    fmt_float(s.ds0),
                    fmt_float(s.r),
                    region
                );
            }
            out
        }
        OutputFormat::Json => {
            let json_rows: Vec<serde_json::Value> = rows
                .iter()
                .map(|(s, region)| {
                    serde_json::json!({
                        "x": s.x,
                        "s0": s.s0,
                        "ds0": s.ds0,
                        "r": s.r,
                        "region": region,
                    })
                })
                .collect();
            let doc = serde_json::json!({
                "lattice": lattice_json(&cfg.lattice),
                "energy": energy,
                "gamma": cfg.gamma,
                "delta": cfg.delta,
                "mu1": action.mu1(),
                "nu1": action.nu1(),
                "k_bloch": action.k_bloch(),
                "winding_n": action.winding(),
                "rows": json_rows,
            });
            format!("{doc:#}\n")
        }
    })
}

struct Check {
    name: &'static str,
    residual: f64,
    tolerance: f64,
}

impl Check {
    fn pass(&self) -> bool {
        self.residual <= self.tolerance
    }
}

/// `verify`: runs the invariant battery at one energy and reports one line
/// per check. Returns the report and whether every check passed.
pub fn cmd_verify(cfg: &RunConfig) -> Result<(String, bool), CliError> {
    let energy = cfg
        .energy
        .ok_or_else(|| CliError::Config("energy: required for `verify`".into()))?;
    let sp = SuperpositionParams::from_gamma_delta(cfg.gamma, cfg.delta)?;
    let lat = &cfg.lattice;
    let tol = |name: &str, default: f64| cfg.tolerances.get(name).copied().unwrap_or(default);

    let mut checks: Vec<Check> = Vec::new();

    // dispersion against the transfer-matrix oracle
    let f = dispersion_rhs(energy, lat)?;
    let half_trace = transfer_matrix_oracle(energy, lat)?.half_trace();
    checks.push(Check {
        name: "dispersion_transfer_agreement",
        residual: (f - half_trace).abs(),
        tolerance: tol("dispersion_transfer_agreement", 1e-12),
    });

    // dispersion against the reduced-action chain
    if sp.gamma().abs() > 1e-12 {
        let via = crate::bloch::dispersion_via_action(energy, lat, &sp)?;
        checks.push(Check {
            name: "dispersion_action_agreement",
            residual: (f - via).abs(),
            tolerance: tol("dispersion_action_agreement", 1e-9),
        });
    }

    let action = BlochAction::solve_over(energy, lat, &sp, -lat.d(), 2.0 * lat.period())?;
    let ke = action.ke();
    let (mu1, nu1) = (action.mu1(), action.nu1());
    // test-only negative control: corrupt the solved constants
    let (mu1, nu1) = if cfg.inject_error {
        (mu1, nu1 + 0.01)
    } else {
        (mu1, nu1)
    };
    let wn = wavenumbers(energy, lat).map_err(|e| CliError::Numeric(e.to_string()))?;

    // value and derivative forms of the periodicity constraints
    let (a_val, b_val) = bloch_interface_ab(mu1, nu1, &wn, lat)?;
    let (tan_form, cos_form) = bloch_value_residuals(sp.gamma(), a_val, b_val, ke);
    checks.push(Check {
        name: "bloch_value",
        residual: tan_form,
        tolerance: tol("bloch_value", 1e-9),
    });
    checks.push(Check {
        name: "bloch_cos_form",
        residual: cos_form,
        tolerance: tol("bloch_cos_form", 1e-9),
    });
    let g2 = sp.gamma() * sp.gamma();
    let lhs = g2 * (b_val - a_val).powi(2);
    let rhs =
        (1.0 + g2 * b_val * b_val) + (1.0 + g2 * a_val * a_val) - 2.0 * (1.0 + g2 * a_val * b_val);
    checks.push(Check {
        name: "superposition_identity",
        residual: (lhs - rhs).abs(),
        tolerance: tol("superposition_identity", 1e-12),
    });
    // difference factorization, stated for the propagating-barrier regime
    if let Ok(q) = interface_quantities(mu1, nu1, &wn, lat) {
        let (k1, k2) = (wn.k1.unwrap_or(0.0), wn.k2);
        let expect = mu1 / k2 * (k1 * (k2 * lat.c()).tan() + k2 * (k1 * lat.d()).tan());
        checks.push(Check {
            name: "interface_difference",
            residual: (q.b_val - q.a_val - expect).abs(),
            tolerance: tol("interface_difference", 1e-12),
        });
    }
    let derivs = bloch_derivative_residuals(mu1, nu1, sp.gamma(), &wn, lat)?;
    checks.push(Check {
        name: "bloch_slope",
        residual: derivs[0].abs(),
        tolerance: tol("bloch_slope", 1e-9),
    });
    checks.push(Check {
        name: "bloch_curvature",
        residual: derivs[1].abs(),
        tolerance: tol("bloch_curvature", 1e-9),
    });

    // periodicity of the constructed action, tangent and Mobius forms
    let map = mobius_coefficients(&sp, ke);
    let mut worst_defect: f64 = 0.0;
    let mut worst_mobius: f64 = 0.0;
    let mut worst_bloch_wave: f64 = 0.0;
    let mut wave_scale: f64 = 0.0;
    let factor = Complex64::new(0.0, ke).exp();
    for i in 0..20 {
        let x = -0.8 * lat.d() + (lat.period() + 0.6 * lat.d()) * i as f64 / 19.0;
        let s_a = action.sample(x)?;
        let s_b = action.sample(x + lat.period())?;
        let (defect, _) = bloch_defect(s_a.s0, s_b.s0, &sp, ke)?;
        worst_defect = worst_defect.max(defect);
        let z = Complex64::new(0.0, 2.0 * s_a.s0).exp();
        let w = Complex64::new(0.0, 2.0 * s_b.s0).exp();
        worst_mobius = worst_mobius.max((w - apply_mobius(&map, z)?).norm());
        let phi_a = action.wavefunction(x)?;
        let phi_b = action.wavefunction(x + lat.period())?;
        wave_scale = wave_scale.max(phi_a.norm());
        worst_bloch_wave = worst_bloch_wave.max((phi_b - factor * phi_a).norm());
    }
    checks.push(Check {
        name: "action_periodicity_defect",
        residual: worst_defect,
        tolerance: tol("action_periodicity_defect", 1e-9),
    });
    checks.push(Check {
        name: "mobius_consistency",
        residual: worst_mobius,
        tolerance: tol("mobius_consistency", 1e-8),
    });
    checks.push(Check {
        name: "wavefunction_bloch",
        residual: worst_bloch_wave / wave_scale.max(1e-300),
        tolerance: tol("wavefunction_bloch", 1e-9),
    });
    let trace_residual = (map.trace()
        - 4.0 * sp.gamma() * (Complex64::new(1.0, 0.0) + Complex64::new(0.0, 2.0 * ke).exp()))
    .norm();
    checks.push(Check {
        name: "mobius_trace",
        residual: trace_residual,
        tolerance: tol("mobius_trace", 1e-12),
    });

    // Bohm limit, when applicable
    if (sp.gamma() - 1.0).abs() < 1e-12 && sp.delta().abs() < 1e-12 {
        let mut worst = 0.0f64;
        let mut worst_shift = 0.0f64;
        for i in 0..10 {
            let x = -0.5 * lat.d() + lat.period() * i as f64 / 9.0;
            let s_a = action.sample(x)?;
            let s_b = action.sample(x + lat.period())?;
            let (defect, n, shift) = bohm_defect(s_a.s0, s_b.s0, ke);
            worst = worst.max(defect);
            worst_shift = worst_shift.max((shift - n as f64).abs());
        }
        checks.push(Check {
            name: "bohm_shift",
            residual: worst,
            tolerance: tol("bohm_shift", 1e-9),
        });
        checks.push(Check {
            name: "bohm_winding",
            residual: worst_shift,
            tolerance: tol("bohm_winding", 1e-9),
        });
    }

    // the stationary Hamilton-Jacobi equation on the constructed action;
    // the finite-difference floor depends on window placement, so the
    // five-point window slides across the well and the barrier
    let h = 2e-4;
    let mut qshje = f64::INFINITY;
    let (c, d) = (lat.c(), lat.d());
    for (lo, hi) in [(0.02 * c, 0.98 * c), (c + 0.02 * d, c + 0.98 * d)] {
        let steps = 400;
        let span = 4.0 * h;
        for i in 0..steps {
            let start = lo + (hi - lo - span) * i as f64 / steps as f64;
            let grid: Vec<f64> = (0..5).map(|j| start + j as f64 * h).collect();
            let samples: Result<Vec<_>, _> = grid.iter().map(|&x| action.sample(x)).collect();
            if let Ok(r) = qshje_residual(&grid, &samples?, energy, lat) {
                qshje = qshje.min(r);
            }
        }
    }
    checks.push(Check {
        name: "qshje_residual",
        residual: qshje,
        tolerance: tol("qshje_residual", 1e-6),
    });

    // the reconstructed wave function solves the Schrodinger equation;
    // the residual is linear in the solution, so the samples are taken at
    // unit magnitude
    let grid: Vec<f64> = (0..11).map(|i| 0.4 * lat.c() + i as f64 * h).collect();
    let phi: Result<Vec<Complex64>, _> = grid.iter().map(|&x| action.wavefunction(x)).collect();
    let phi = phi?;
    let scale = phi.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let re: Vec<f64> = phi.iter().map(|z| z.re / scale).collect();
    let im: Vec<f64> = phi.iter().map(|z| z.im / scale).collect();
    let r_re = schrodinger_residual(&grid, &re, energy, lat)
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    let r_im = schrodinger_residual(&grid, &im, energy, lat)
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    checks.push(Check {
        name: "schrodinger_residual",
        residual: r_re.max(r_im),
        tolerance: tol("schrodinger_residual", 1e-7),
    });

    let all_pass = checks.iter().all(Check::pass);
    let report = match cfg.format {
        OutputFormat::Csv => {
            let mut out = String::new();
            for check in &checks {
                let _ = writeln!(
                    out,
                    "{:<32} residual={:12.5e} tolerance={:9.1e} {}",
                    check.name,
                    check.residual,
                    check.tolerance,
                    if check.pass() { "PASS" } else { "FAIL" }
                );
            }
            let _ = writeln!(
                out,
                "verify: {} of {} checks passed",
                checks.iter().filter(|c| c.pass()).count(),
                checks.len()
            );
            out
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = checks
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "name": c.name,
                        "residual": c.residual,
                        "tolerance": c.tolerance,
                        "pass": c.pass(),
                    })
                })
                .collect();
            let doc = serde_json::json!({
                "lattice": lattice_json(&cfg.lattice),
                "energy": energy,
                "gamma": cfg.gamma,
                "delta": cfg.delta,
                "checks": rows,
                "all_pass": all_pass,
            });
            format!("{doc:#}\n")
        }
    };
    Ok((report, all_pass))
}

/// Plain-text gnuplot script pointing at the emitted CSV.
pub fn plot_script(subcommand: &str, csv_path: &Path) -> String {
    let csv = csv_path.display();
    let body = match subcommand {
        "dispersion" => format!(
            "plot '{csv}' using 1:2 with lines title 'cos(Ke)', 1 lc rgb 'gray' notitle, -1 lc rgb 'gray' notitle\n"
        ),
        "bands" => format!(
            "plot '{csv}' using 2:1 with points pt 7 title 'lower edge', '{csv}' using 3:1 with points pt 6 title 'upper edge'\n"
        ),
        "action" => format!(
            "plot '{csv}' using 1:2 with lines title 's0(x)', '{csv}' using 1:4 with lines title 'R(x)'\n"
        ),
        _ => format!("plot '{csv}' using 1:2 with lines\n"),
    };
    format!(
        "# gnuplot script generated by hjband\nset datafile separator ','\nset key left top\n{body}"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_raw() -> RawConfig {
        RawConfig {
            v0: Some(10.0),
            c: Some(1.0),
            d: Some(1.0),
            emin: Some(0.1),
            emax: Some(40.0),
            samples: Some(400),
            ..RawConfig::default()
        }
    }

    #[test]
    fn validation_names_offending_field() {
        let mut raw = base_raw();
        raw.emin = Some(-1.0);
        let err = raw.validate().unwrap_err().to_string();
        assert!(err.contains("emin"), "{err}");

        let mut raw = base_raw();
        raw.emax = Some(0.05);
        let err = raw.validate().unwrap_err().to_string();
        assert!(err.contains("emax"), "{err}");

        let mut raw = base_raw();
        raw.c = Some(0.0);
        let err = raw.validate().unwrap_err().to_string();
        assert!(err.contains("c"), "{err}");

        let mut raw = base_raw();
        raw.gamma = Some(1.5);
        let err = raw.validate().unwrap_err().to_string();
        assert!(err.contains("gamma"), "{err}");
    }

    #[test]
    fn flags_override_config_file() {
        let dir = std::env::temp_dir().join("hjband-cli-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("config.txt");
        std::fs::write(
            &path,
            "v0 = 3.0\nsamples = 100\ntol.qshje_residual = 1e-5\n",
        )
        .unwrap();
        let file = parse_config_file(&path).unwrap();
        let flags = RawConfig {
            v0: Some(7.0),
            ..RawConfig::default()
        };
        let merged = flags.over(file);
        assert_eq!(merged.v0, Some(7.0));
        assert_eq!(merged.samples, Some(100));
        assert_eq!(merged.tolerances.get("qshje_residual"), Some(&1e-5));
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        let dir = std::env::temp_dir().join("hjband-cli-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.txt");
        std::fs::write(&path, "vee_zero = 3.0\n").unwrap();
        let err = parse_config_file(&path).unwrap_err().to_string();
        assert!(err.contains("unknown key"), "{err}");
    }

    #[test]
    fn float_formatting_is_fixed_width_17_digits() {
        assert_eq!(fmt_float(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_float(13.0), "1.3000000000000000e1");
        let x = std::f64::consts::LN_2;
        let s = fmt_float(x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
    }

    #[test]
    fn dispersion_free_lattice_rows() {
        let mut raw = base_raw();
        raw.v0 = Some(0.0);
        raw.emin = Some(1.0);
        raw.emax = Some(2.0);
        raw.samples = Some(3);
        let cfg = raw.validate().unwrap();
        let csv = cmd_dispersion(&cfg).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "energy,cos_ke,allowed,k_bloch");
        for (i, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            let e = 1.0 + 0.5 * i as f64;
            let expect = (e.sqrt() * 2.0).cos();
            let got: f64 = cols[1].parse().unwrap();
            assert!((got - expect).abs() < 1e-14);
            assert_eq!(cols[2], "true");
        }
    }

    #[test]
    fn dispersion_gap_row_is_disallowed() {
        let mut raw = base_raw();
        raw.emin = Some(5.0);
        raw.emax = Some(5.5);
        raw.samples = Some(2);
        let cfg = raw.validate().unwrap();
        let csv = cmd_dispersion(&cfg).unwrap();
        let row = csv.lines().nth(1).unwrap();
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[2], "false");
        assert_eq!(cols[3], "");
    }

    #[test]
    fn bands_csv_schema() {
        let cfg = base_raw().validate().unwrap();
        let csv = cmd_bands(&cfg).unwrap();
        assert!(csv.starts_with("band_index,e_lower,e_upper,clipped_lower,clipped_upper\n"));
        assert!(csv.lines().count() >= 4);
    }

    #[test]
    fn verify_passes_and_inject_error_fails() {
        let mut raw = base_raw();
        raw.energy = Some(3.5);
        raw.gamma = Some(0.5);
        let cfg = raw.clone().validate().unwrap();
        let (report, all_pass) = cmd_verify(&cfg).unwrap();
        assert!(all_pass, "verify failed:\n{report}");

        raw.inject_error = true;
        let cfg = raw.validate().unwrap();
        let (report, all_pass) = cmd_verify(&cfg).unwrap();
        assert!(!all_pass);
        assert!(report.contains("bloch_value"));
        assert!(report.contains("FAIL"));
    }
}
