//! Experiment configuration: a flat key-value TOML file with defaults
//! matching the reference experiment.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use hqfilter::model::{
    analog_cavity, build_qubit, CavityAnalog, OuProcess, QubitParams, QubitSystem,
};
use hqfilter::operators::{coherent_state, pauli, tensor, FockTruncation, Pauli};
use hqfilter::qekf::SForm;
use hqfilter::state::{DensityMatrix, Tolerances};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Qubit-field coupling strength (1/time).
    pub k1: f64,
    /// Disturbance decay rate (1/time).
    pub u: f64,
    /// Disturbance noise gain (1/sqrt(time)).
    pub v: f64,
    /// Disturbance initial value.
    pub q0: f64,
    /// Qubit initial state as Bloch components.
    pub rho1_x: f64,
    pub rho1_y: f64,
    pub rho1_z: f64,
    /// Cavity initial coherent amplitude; when absent it is derived as
    /// `q0 * alpha` so the cavity readout starts at `q0`.
    pub beta_re: Option<f64>,
    pub beta_im: f64,
    /// Fock levels kept for the cavity.
    pub n_prime: usize,
    /// Integration step (time).
    pub dt: f64,
    /// Horizon (time).
    pub t_final: f64,
    /// Number of Monte Carlo trajectories.
    pub ensemble: usize,
    /// Riccati inflation (moment filter).
    pub lambda: f64,
    /// Noise floor of the robustified covariance (moment filter).
    pub mu: f64,
    /// Initial covariance scale of the moment filter.
    pub p0: f64,
    /// Cross-correlation form: "derived" or "paper".
    pub s_matrix: String,
    /// Master seed for all noise streams.
    pub seed: u64,
    /// Output stride in steps.
    pub stride: usize,
    /// Worker threads for the ensemble runner.
    pub workers: usize,
    /// Admissible population leakage of the truncated cavity initial
    /// state.
    pub coherent_leakage: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            k1: 0.55,
            u: 0.25,
            v: 1.0 / (2.0 * 2.0_f64.sqrt()),
            q0: 0.25,
            rho1_x: 1.0,
            rho1_y: 0.0,
            rho1_z: 0.0,
            beta_re: None,
            beta_im: 0.0,
            n_prime: 8,
            dt: 1e-3,
            t_final: 20.0,
            ensemble: 20,
            lambda: 0.0,
            mu: 0.01,
            p0: 0.01,
            s_matrix: "derived".to_string(),
            seed: 42,
            stride: 10,
            workers: 2,
            coherent_leakage: 1e-6,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0) {
            bail!("k1 must be nonnegative");
        }
        if !(self.u > 0.0) {
            bail!("u must be positive");
        }
        if self.v == 0.0 && self.q0 != 0.0 {
            bail!(
                "v = 0 with q0 != 0: the disturbance is deterministic decay and \
                 has no cavity analog; set q0 = 0 for the decoupled limit"
            );
        }
        if self.n_prime < 2 {
            bail!("n_prime must be at least 2");
        }
        if !(self.dt > 0.0) || self.t_final < self.dt {
            bail!("need 0 < dt <= t_final");
        }
        if self.ensemble < 1 {
            bail!("ensemble size must be at least 1");
        }
        if self.stride == 0 {
            bail!("stride must be positive");
        }
        if self.workers == 0 {
            bail!("workers must be positive");
        }
        let bloch = (self.rho1_x.powi(2) + self.rho1_y.powi(2) + self.rho1_z.powi(2)).sqrt();
        if bloch > 1.0 + 1e-12 {
            bail!("qubit Bloch vector has norm {bloch} > 1");
        }
        if self.s_matrix != "derived" && self.s_matrix != "paper" {
            bail!("s_matrix must be \"derived\" or \"paper\"");
        }
        if !(self.lambda >= 0.0) {
            bail!("lambda must be nonnegative");
        }
        if !(self.mu > 0.0) {
            bail!("mu must be positive");
        }
        if !(self.p0 >= 0.0) {
            bail!("p0 must be nonnegative");
        }
        if !(self.coherent_leakage > 0.0) {
            bail!("coherent_leakage must be positive");
        }
        Ok(())
    }

    pub fn s_form(&self) -> SForm {
        if self.s_matrix == "paper" {
            SForm::Paper
        } else {
            SForm::Derived
        }
    }

    pub fn ou(&self) -> Result<OuProcess> {
        Ok(OuProcess::new(self.u, self.v, self.q0)?)
    }

    pub fn qubit(&self) -> Result<QubitSystem> {
        Ok(build_qubit(QubitParams::new(self.k1)?, pauli(Pauli::Z))?)
    }

    /// Cavity analog; `v = 0` (with `q0 = 0`) maps to the decoupled limit.
    pub fn analog(&self) -> Result<CavityAnalog> {
        let trunc = FockTruncation::new(self.n_prime)?;
        if self.v == 0.0 {
            Ok(CavityAnalog::decoupled(self.u, trunc)?)
        } else {
            Ok(analog_cavity(&self.ou()?, trunc)?)
        }
    }

    /// Effective coherent amplitude of the cavity initial state.
    pub fn beta(&self, analog: &CavityAnalog) -> Complex64 {
        let re = self.beta_re.unwrap_or_else(|| {
            if self.q0 == 0.0 || analog.alpha.is_infinite() {
                0.0
            } else {
                self.q0 * analog.alpha
            }
        });
        Complex64::new(re, self.beta_im)
    }

    /// Qubit initial state from the Bloch components.
    pub fn rho1(&self) -> Result<DensityMatrix> {
        Ok(DensityMatrix::from_bloch(
            self.rho1_x,
            self.rho1_y,
            self.rho1_z,
            &Tolerances::default(),
        )?)
    }

    /// Joint initial state of the enlarged system.
    pub fn enlarged_initial(&self, analog: &CavityAnalog) -> Result<DensityMatrix> {
        let cavity = coherent_state(
            self.beta(analog),
            analog.trunc,
            self.coherent_leakage,
            &Tolerances::default(),
        )?;
        Ok(DensityMatrix::new(
            tensor(self.rho1()?.matrix(), cavity.matrix()),
            &Tolerances::default(),
        )?)
    }
}

/// The manifest written next to experiment outputs: the effective
/// configuration plus the tool version, sufficient to re-run exactly.
pub fn manifest_toml(config: &ExperimentConfig) -> Result<String> {
    let mut out = String::new();
    out.push_str("# experiment manifest: effective configuration and tool version\n");
    out.push_str("# rates in 1/time, noise gain in 1/sqrt(time), horizon in time units\n");
    out.push_str(&format!(
        "tool_version = \"{}\"\n",
        env!("CARGO_PKG_VERSION")
    ));
    out.push_str(&config.to_toml()?);
    Ok(out)
}

/// Read back the config section of a manifest (ignoring `tool_version`).
pub fn config_from_manifest(text: &str) -> Result<ExperimentConfig> {
    #[derive(Deserialize)]
    struct Manifest {
        #[allow(dead_code)]
        tool_version: String,
        #[serde(flatten)]
        config: ExperimentConfig,
    }
    let m: Manifest = toml::from_str(text)?;
    m.config.validate()?;
    Ok(m.config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml().unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn manifest_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.seed = 1234;
        cfg.ensemble = 7;
        let text = manifest_toml(&cfg).unwrap();
        let back = config_from_manifest(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn beta_defaults_to_matching_the_initial_disturbance() {
        let cfg = ExperimentConfig::default();
        let analog = cfg.analog().unwrap();
        let beta = cfg.beta(&analog);
        assert!((beta.re - 0.25 * analog.alpha).abs() < 1e-12);
        assert_eq!(beta.im, 0.0);
    }

    #[test]
    fn zero_noise_requires_zero_initial_disturbance() {
        let mut cfg = ExperimentConfig::default();
        cfg.v = 0.0;
        assert!(cfg.validate().is_err());
        cfg.q0 = 0.0;
        cfg.validate().unwrap();
        let analog = cfg.analog().unwrap();
        assert!(analog.alpha.is_infinite());
        assert_eq!(cfg.beta(&analog), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn rejects_unknown_keys() {
        let err = toml::from_str::<ExperimentConfig>("k1 = 0.5\nbogus = 1\n");
        assert!(err.is_err());
    }
}
