//! Physical parameters of the two-mode system and its bosonic reservoir.
//!
//! Units have ħ = 1. The ground mode `g` sits at frequency zero; only the
//! excited-mode frequency `omega_e` is a parameter.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Tolerance on `|c1|^2 + |c2|^2 = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservoirMode {
    #[serde(rename = "omega")]
    pub omega: f64,
    /// Coupling d(omega_j); stored non-negative.
    #[serde(rename = "d")]
    pub coupling: f64,
}

impl ReservoirMode {
    pub fn new(omega: f64, coupling: f64) -> Self {
        Self { omega, coupling }
    }
}

/// Coefficients of the measured field operator `c1 b_g + c2 b_e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementCoeffs {
    pub c1: Complex64,
    pub c2: Complex64,
}

impl MeasurementCoeffs {
    pub fn new(c1: Complex64, c2: Complex64) -> Self {
        Self { c1, c2 }
    }

    /// c1 = c2 = 1/sqrt(2).
    pub fn balanced() -> Self {
        let c = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { c1: c, c2: c }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c1.norm_sqr() + self.c2.norm_sqr()
    }

    pub fn is_balanced(&self) -> bool {
        let b = Self::balanced();
        (self.c1 - b.c1).norm() < NORMALIZATION_TOL && (self.c2 - b.c2).norm() < NORMALIZATION_TOL
    }
}

impl Default for MeasurementCoeffs {
    fn default() -> Self {
        Self::balanced()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega_e: f64,
    pub modes: Vec<ReservoirMode>,
    #[serde(default)]
    pub measurement: MeasurementCoeffs,
}

impl ModelParams {
    pub fn new(omega_e: f64, modes: Vec<ReservoirMode>) -> Self {
        Self {
            omega_e,
            modes,
            measurement: MeasurementCoeffs::balanced(),
        }
    }

    /// One reservoir mode at `omega_j` with coupling `d`.
    pub fn single_mode(omega_e: f64, omega_j: f64, d: f64) -> Self {
        Self::new(omega_e, vec![ReservoirMode::new(omega_j, d)])
    }

    pub fn with_measurement(mut self, measurement: MeasurementCoeffs) -> Self {
        self.measurement = measurement;
        self
    }

    /// Copy with every coupling multiplied by `factor`.
    pub fn scale_couplings(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for m in &mut out.modes {
            m.coupling *= factor;
        }
        out
    }

    /// Stable 16-hex-digit fingerprint of the parameter set, used as provenance.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("model parameters serialize");
        let hash = Sha256::digest(&json);
        hex::encode(&hash[..8])
    }
}

/// Equally spaced comb of reservoir modes with uniform coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombSpec {
    pub center: f64,
    pub half_bandwidth: f64,
    pub count: usize,
    pub coupling: f64,
}

impl CombSpec {
    /// Mode spacing; `None` for a single-mode comb.
    pub fn spacing(&self) -> Option<f64> {
        (self.count > 1).then(|| 2.0 * self.half_bandwidth / (self.count - 1) as f64)
    }

    /// Mode density 1/spacing.
    pub fn density(&self) -> Option<f64> {
        self.spacing().map(|s| 1.0 / s)
    }
}

pub fn build_comb(spec: &CombSpec) -> Result<Vec<ReservoirMode>> {
    if spec.count == 0 {
        return Err(Error::InvalidInput("comb count must be at least 1".into()));
    }
    if !(spec.center.is_finite() && spec.half_bandwidth.is_finite() && spec.coupling.is_finite()) {
        return Err(Error::InvalidInput("comb parameters must be finite".into()));
    }
    if spec.count > 1 && spec.half_bandwidth <= 0.0 {
        return Err(Error::InvalidInput(
            "comb half-bandwidth must be positive when count > 1".into(),
        ));
    }
    if spec.count == 1 {
        return Ok(vec![ReservoirMode::new(spec.center, spec.coupling)]);
    }
    let last = (spec.count - 1) as f64;
    // Mirror index i and count-1-i around the center so the comb is exactly symmetric.
    let modes = (0..spec.count)
        .map(|i| {
            let offset = spec.half_bandwidth * (2.0 * i as f64 - last) / last;
            ReservoirMode::new(spec.center + offset, spec.coupling)
        })
        .collect();
    Ok(modes)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonFinite { field: String },
    NonPositiveOmegaE { value: f64 },
    NegativeCoupling { mode: usize, value: f64 },
    Normalization { norm_sqr: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { field } => write!(f, "{field} is not finite"),
            Violation::NonPositiveOmegaE { value } => {
                write!(f, "omega_e must be positive, got {value}")
            }
            Violation::NegativeCoupling { mode, value } => {
                write!(f, "mode {mode} has negative coupling {value}")
            }
            Violation::Normalization { norm_sqr } => {
                write!(f, "|c1|^2 + |c2|^2 = {norm_sqr}, expected 1")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    DuplicateFrequency {
        first: usize,
        second: usize,
        omega: f64,
    },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::DuplicateFrequency {
                first,
                second,
                omega,
            } => {
                write!(f, "modes {first} and {second} share frequency {omega}")
            }
        }
    }
}

/// Every invariant violated by a parameter set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

impl std::error::Error for ValidationReport {}

#[derive(Debug, Clone)]
pub struct Validated {
    pub params: ModelParams,
    pub warnings: Vec<Warning>,
}

pub fn validate(params: ModelParams) -> std::result::Result<Validated, ValidationReport> {
    let mut violations = Vec::new();
    if !params.omega_e.is_finite() {
        violations.push(Violation::NonFinite {
            field: "omega_e".into(),
        });
    } else if params.omega_e <= 0.0 {
        violations.push(Violation::NonPositiveOmegaE {
            value: params.omega_e,
        });
    }
    for (j, m) in params.modes.iter().enumerate() {
        if !m.omega.is_finite() {
            violations.push(Violation::NonFinite {
                field: format!("modes[{j}].omega"),
            });
        }
        if !m.coupling.is_finite() {
            violations.push(Violation::NonFinite {
                field: format!("modes[{j}].d"),
            });
        } else if m.coupling < 0.0 {
            violations.push(Violation::NegativeCoupling {
                mode: j,
                value: m.coupling,
            });
        }
    }
    let c = &params.measurement;
    if ![c.c1.re, c.c1.im, c.c2.re, c.c2.im]
        .iter()
        .all(|x| x.is_finite())
    {
        violations.push(Violation::NonFinite {
            field: "measurement".into(),
        });
    } else if (c.norm_sqr() - 1.0).abs() > NORMALIZATION_TOL {
        violations.push(Violation::Normalization {
            norm_sqr: c.norm_sqr(),
        });
    }
    if !violations.is_empty() {
        return Err(ValidationReport { violations });
    }

    let mut warnings = Vec::new();
    for i in 0..params.modes.len() {
        for j in i + 1..params.modes.len() {
            if params.modes[i].omega == params.modes[j].omega {
                warnings.push(Warning::DuplicateFrequency {
                    first: i,
                    second: j,
                    omega: params.modes[i].omega,
                });
            }
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Validated { params, warnings })
}

/// Like [`validate`], folding the report into the crate error type.
pub fn validated(params: ModelParams) -> Result<ModelParams> {
    validate(params)
        .map(|v| v.params)
        .map_err(Error::Validation)
}

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Continuum reservoir: mode density rho(omega) and coupling profile d(omega)
/// on a closed support interval.
#[derive(Clone)]
pub struct SpectralDensity {
    rho: Profile,
    coupling: Profile,
    pub support: (f64, f64),
}

impl SpectralDensity {
    pub fn new<R, D>(rho: R, coupling: D, support: (f64, f64)) -> Result<Self>
    where
        R: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let (lo, hi) = support;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidInput(format!(
                "bad spectral support [{lo}, {hi}]"
            )));
        }
        Ok(Self {
            rho: Arc::new(rho),
            coupling: Arc::new(coupling),
            support,
        })
    }

    /// Constant density and coupling on `support`.
    pub fn flat(rho: f64, coupling: f64, support: (f64, f64)) -> Result<Self> {
        if !(rho.is_finite() && rho >= 0.0 && coupling.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "flat spectrum needs finite rho >= 0 and finite d (rho={rho}, d={coupling})"
            )));
        }
        Self::new(move |_| rho, move |_| coupling, support)
    }

    pub fn rho(&self, omega: f64) -> f64 {
        (self.rho)(omega)
    }

    pub fn coupling(&self, omega: f64) -> f64 {
        (self.coupling)(omega)
    }

    pub fn contains_interior(&self, omega: f64) -> bool {
        self.support.0 < omega && omega < self.support.1
    }
}

impl fmt::Debug for SpectralDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralDensity")
            .field("support", &self.support)
            .finish_non_exhaustive()
    }
}

/// JSON configuration file layout.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub omega_e: Option<f64>,
    pub modes: Option<Vec<ReservoirMode>>,
    pub comb: Option<CombSpec>,
    pub measurement: Option<MeasurementConfig>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    pub c1_re: f64,
    #[serde(default)]
    pub c1_im: f64,
    pub c2_re: f64,
    #[serde(default)]
    pub c2_im: f64,
}

impl From<MeasurementConfig> for MeasurementCoeffs {
    fn from(m: MeasurementConfig) -> Self {
        MeasurementCoeffs::new(
            Complex64::new(m.c1_re, m.c1_im),
            Complex64::new(m.c2_re, m.c2_im),
        )
    }
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    /// Resolves the reservoir description into a mode list.
    ///
    /// Exactly one of `modes`/`comb` may be given; with `require_reservoir`
    /// one of them must be.
    pub fn reservoir(&self, require_reservoir: bool) -> Result<Vec<ReservoirMode>> {
        match (&self.modes, &self.comb) {
            (Some(_), Some(_)) => Err(Error::InvalidInput(
                "config must contain exactly one of `modes` and `comb`".into(),
            )),
            (Some(modes), None) => Ok(modes.clone()),
            (None, Some(comb)) => build_comb(comb),
            (None, None) if require_reservoir => Err(Error::InvalidInput(
                "config must contain one of `modes` or `comb`".into(),
            )),
            (None, None) => Ok(Vec::new()),
        }
    }

    pub fn into_params(&self, require_reservoir: bool) -> Result<ModelParams> {
        let omega_e = self
            .omega_e
            .ok_or_else(|| Error::InvalidInput("config is missing `omega_e`".into()))?;
        let measurement = self.measurement.map(Into::into).unwrap_or_default();
        let params = ModelParams::new(omega_e, self.reservoir(require_reservoir)?)
            .with_measurement(measurement);
        validated(params)
    }
}
