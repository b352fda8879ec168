//! JSON run configuration.
//!
//! Units: `hbar = 1` and `2m = 1`, so the kinetic energy is `-d^2/dx^2`;
//! lengths are in the units of `model.length`, energies in inverse length
//! squared. Fourier coefficients follow `v(x) = (1/L) sum_k vhat(k) e^{2 pi i k x / L}`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use bosegas_core::decay::Parity;
use bosegas_core::hamiltonian::Variant;
use bosegas_core::lemmas::LemmaId;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Free-form note; see the module docs for the unit conventions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<String>,
    pub model: ModelConfig,
    pub many_body: ManyBodyConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub analyses: AnalysesConfig,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Torus,
    Trap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub geometry: Geometry,
    #[serde(rename = "L")]
    pub length: f64,
    pub n: usize,
    #[serde(default)]
    pub external: ExternalSpec,
    pub potential: PotentialSpec,
    #[serde(default = "default_hartree_tol")]
    pub hartree_tol: f64,
}

fn default_hartree_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ExternalSpec {
    #[default]
    None,
    /// `omega^2 (x - L/2)^2`.
    Harmonic { omega: f64 },
    /// Values at the grid nodes.
    Table { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficient {
    pub mode: i64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    /// Bounded potential of positive type with period `L`.
    Bounded {
        coefficients: Vec<Coefficient>,
        #[serde(default)]
        symmetrize: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantSpec {
    Full,
    Bogoliubov,
}

impl From<VariantSpec> for Variant {
    fn from(v: VariantSpec) -> Self {
        match v {
            VariantSpec::Full => Variant::Full,
            VariantSpec::Bogoliubov => Variant::Bogoliubov,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManyBodyConfig {
    #[serde(rename = "N")]
    pub n_particles: usize,
    pub m: usize,
    #[serde(rename = "M")]
    pub cutoff: usize,
    pub variant: VariantSpec,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn default_budget() -> usize {
    bosegas_core::fock::DEFAULT_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub tol: f64,
    pub seed: u64,
    pub max_iter: usize,
    pub krylov: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        let d = bosegas_core::solver::LanczosOptions::default();
        Self { tol: d.tol, seed: d.seed, max_iter: d.max_iter, krylov: d.krylov }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParitySpec {
    Even,
    Odd,
    All,
}

impl From<ParitySpec> for Parity {
    fn from(p: ParitySpec) -> Self {
        match p {
            ParitySpec::Even => Parity::Even,
            ParitySpec::Odd => Parity::Odd,
            ParitySpec::All => Parity::All,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysesConfig {
    pub decay: DecayConfig,
    pub lemmas: LemmaConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coulomb: Option<CoulombConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    /// Inclusive sector range of the fit.
    pub fit_range: [usize; 2],
    pub parity: ParitySpec,
    /// Window half-widths tabulated in the decay CSV.
    pub windows: Vec<usize>,
    pub max_half_width: usize,
    pub target_sigma: f64,
    /// Sector truncation of the closed-form profile; the cutoff `M` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_truncation: Option<usize>,
    /// Splitting sector of the tail check.
    pub tail_cut: usize,
    /// Re-solve with `M + 2` and compare `P(l)` on the valid range.
    pub stability: bool,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            fit_range: [2, 8],
            parity: ParitySpec::Even,
            windows: vec![1, 2, 3],
            max_half_width: 10,
            target_sigma: 2.05,
            oracle_truncation: None,
            tail_cut: 6,
            stability: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmaConfig {
    /// Subset of `k1, k2, k3, k4, gap`; `k2c` runs from the `coulomb` section.
    pub which: Vec<String>,
    pub samples: usize,
    pub seed: u64,
    pub delta: f64,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        Self { which: ["k1", "k2", "k3", "k4", "gap"].map(String::from).to_vec(), samples: 1000, seed: 0, delta: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoulombConfig {
    pub lambda: f64,
    pub kappas: Vec<f64>,
    #[serde(default = "default_coulomb_points")]
    pub grid_points: usize,
    /// Plane-wave momenta of the surrogate modes.
    pub momenta: Vec<i64>,
    #[serde(rename = "M")]
    pub cutoff: usize,
    pub epsilon: f64,
    #[serde(default = "default_coulomb_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_coulomb_points() -> usize {
    256
}

fn default_coulomb_samples() -> usize {
    500
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(LabError::Config(format!("{name} must be positive and finite, got {x}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let config: RunConfig =
            serde_json::from_str(&text).map_err(|source| LabError::Parse { path: path.to_path_buf(), source })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        positive("model.L", m.length)?;
        positive("model.hartree_tol", m.hartree_tol)?;
        if m.n < 8 {
            return Err(LabError::Config(format!("model.n must be at least 8, got {}", m.n)));
        }
        match &m.external {
            ExternalSpec::None => {}
            ExternalSpec::Harmonic { omega } => positive("model.external.omega", *omega)?,
            ExternalSpec::Table { values } if values.len() != m.n => {
                return Err(LabError::Config(format!(
                    "model.external.values has {} entries for {} grid points",
                    values.len(),
                    m.n
                )))
            }
            ExternalSpec::Table { .. } => {}
        }
        if m.geometry == Geometry::Torus && m.external != ExternalSpec::None {
            return Err(LabError::Config("the torus geometry takes no external potential".into()));
        }
        let b = &self.many_body;
        if b.m == 0 || b.cutoff == 0 {
            return Err(LabError::Config("many_body.m and many_body.M must be positive".into()));
        }
        if b.n_particles < 2 || b.n_particles <= b.cutoff {
            return Err(LabError::Config(format!(
                "many_body.N = {} must exceed the occupation cutoff M = {} (N > M)",
                b.n_particles, b.cutoff
            )));
        }
        if b.cutoff > 255 {
            return Err(LabError::Config("many_body.M must not exceed 255".into()));
        }
        positive("solve.tol", self.solve.tol)?;
        if self.solve.max_iter == 0 || self.solve.krylov < 2 {
            return Err(LabError::Config("solve.max_iter must be positive and solve.krylov at least 2".into()));
        }
        let d = &self.analyses.decay;
        if d.fit_range[0] > d.fit_range[1] || d.fit_range[1] > b.cutoff {
            return Err(LabError::Config(format!("analyses.decay.fit_range {:?} must lie in [0, M]", d.fit_range)));
        }
        positive("analyses.decay.target_sigma", d.target_sigma - 2.0)
            .map_err(|_| LabError::Config("analyses.decay.target_sigma must exceed 2".into()))?;
        if d.max_half_width == 0 || d.windows.contains(&0) {
            return Err(LabError::Config("window half-widths must be positive".into()));
        }
        if d.tail_cut == 0 {
            return Err(LabError::Config("analyses.decay.tail_cut must be positive".into()));
        }
        let l = &self.analyses.lemmas;
        for name in &l.which {
            match LemmaId::from_name(name) {
                Some(LemmaId::K2Coulomb) => {
                    return Err(LabError::Config("k2c is configured in analyses.coulomb, not analyses.lemmas".into()))
                }
                Some(_) => {}
                None => return Err(LabError::Config(format!("unknown lemma `{name}`"))),
            }
        }
        positive("analyses.lemmas.delta", l.delta)?;
        if l.delta > 1.0 {
            return Err(LabError::Config("analyses.lemmas.delta must not exceed 1".into()));
        }
        if let Some(c) = &self.analyses.coulomb {
            positive("analyses.coulomb.lambda", c.lambda)?;
            positive("analyses.coulomb.epsilon", c.epsilon)?;
            if c.kappas.is_empty() {
                return Err(LabError::Config("analyses.coulomb.kappas is empty".into()));
            }
            for &k in &c.kappas {
                positive("analyses.coulomb.kappas", k)?;
            }
            if c.kappas.windows(2).any(|w| w[1] >= w[0]) {
                return Err(LabError::Config("analyses.coulomb.kappas must be strictly decreasing".into()));
            }
            if c.momenta.is_empty() || c.momenta.contains(&0) || c.cutoff < 2 || c.grid_points < 8 {
                return Err(LabError::Config(
                    "analyses.coulomb needs nonzero momenta, M >= 2 and at least 8 grid points".into(),
                ));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        digest_json(self)
    }
}

pub fn digest_json<T: Serialize>(value: &T) -> String {
    digest_bytes(&serde_json::to_vec(value).expect("value serializes"))
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = include_str!("../configs/toy_torus.json");

    #[test]
    fn shipped_config_round_trips() {
        let config: RunConfig = serde_json::from_str(TOY).unwrap();
        config.validate().unwrap();
        let again: RunConfig = serde_json::from_str(&config.to_json()).unwrap();
        assert_eq!(config, again);
        assert_eq!(config.hash(), again.hash());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = TOY.replacen("\"geometry\"", "\"shape\": 1, \"geometry\"", 1);
        assert!(serde_json::from_str::<RunConfig>(&text).is_err());
    }

    #[test]
    fn cutoff_must_stay_below_particle_number() {
        let mut config: RunConfig = serde_json::from_str(TOY).unwrap();
        config.many_body.n_particles = config.many_body.cutoff;
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("N > M"));
        assert_eq!(err.exit_code(), 2);
    }
}
