//! Run configuration: TOML with dotted sections, strict keys, a stable hash
//! and environment overrides of the form `OCTACAGE_<SECTION>_<KEY>`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::{AngularForm, OrbitalParams, RadialModel, RadialTable};
use crate::error::{Error, Result};
use crate::geometry::{self, ELECTRON_DEUTERON_MASS_RATIO};
use crate::quadrature::{QuadratureSpec, ZQuadratureSpec};

/// Prefix of environment overrides.
pub const ENV_PREFIX: &str = "OCTACAGE_";

const MANDATORY: [&str; 2] = ["r1", "r2"];
const SECTIONS: [&str; 5] = ["z_quadrature", "quadrature", "sweep", "molecule", "convergence"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadialKind {
    Hydrogen3d,
    #[default]
    Rho2exp,
    CustomTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZKinetic {
    /// Differentiate the moving charge orbitals as well as the polynomials.
    #[default]
    Full,
    PolynomialOnly,
}

/// Integration domain of the isolated-molecule curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoleculeDomain {
    /// Untruncated orbitals, closed-form two-center integrals.
    #[default]
    Free,
    /// Same volume rule as the cage.
    Octahedron,
}

/// Grid of half-separations `l`, uniform over `[l_min, l_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub l_min: f64,
    pub l_max: f64,
    pub points: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            l_min: 0.045,
            l_max: 0.95,
            points: 20,
        }
    }
}

impl SweepSpec {
    pub fn grid(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.l_min],
            n => (0..n)
                .map(|i| self.l_min + (self.l_max - self.l_min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MoleculeSpec {
    pub domain: MoleculeDomain,
}

/// Settings of the sensitivity sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSpec {
    /// Half-separation at which the static problem is probed.
    pub l: f64,
    pub deltas: Vec<f64>,
    pub points: Vec<usize>,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        Self {
            l: 0.5,
            deltas: vec![1e-2, 1e-3, 1e-4],
            points: vec![2_000, 20_000, 200_000],
        }
    }
}

/// All physical and numerical parameters. Lengths are in units of the cage
/// half-diagonal `a` unless the name says otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CageConfig {
    pub a_angstrom: f64,
    pub z_eff: f64,
    /// Electron to positive-charge mass ratio.
    pub mass_ratio: f64,
    pub r1: f64,
    pub r2: f64,
    pub n_legendre: usize,
    pub z_max: f64,
    pub overlap_threshold: f64,
    pub angular_form: AngularForm,
    pub radial_model: RadialKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radial_table: Option<PathBuf>,
    pub normalize_per_z: bool,
    pub z_kinetic: ZKinetic,
    /// Replaces the value derived from `a_angstrom` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kinetic_prefactor: Option<f64>,
    pub collision_z0: f64,
    pub quadrature: QuadratureSpec,
    pub z_quadrature: ZQuadratureSpec,
    pub sweep: SweepSpec,
    pub molecule: MoleculeSpec,
    pub convergence: ConvergenceSpec,
}

impl Default for CageConfig {
    fn default() -> Self {
        Self {
            a_angstrom: 2.05,
            z_eff: 10.0,
            mass_ratio: ELECTRON_DEUTERON_MASS_RATIO,
            r1: 0.25,
            r2: 0.2,
            n_legendre: 8,
            z_max: 1.9,
            overlap_threshold: 1e-6,
            angular_form: AngularForm::Squared,
            radial_model: RadialKind::Rho2exp,
            radial_table: None,
            normalize_per_z: true,
            z_kinetic: ZKinetic::Full,
            kinetic_prefactor: None,
            collision_z0: 0.0,
            quadrature: QuadratureSpec::default(),
            z_quadrature: ZQuadratureSpec::default(),
            sweep: SweepSpec::default(),
            molecule: MoleculeSpec::default(),
            convergence: ConvergenceSpec::default(),
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive, got {v}")))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be non-negative, got {v}")))
    }
}

impl CageConfig {
    pub fn validate(&self) -> Result<()> {
        positive("a_angstrom", self.a_angstrom)?;
        non_negative("z_eff", self.z_eff)?;
        non_negative("mass_ratio", self.mass_ratio)?;
        positive("r1", self.r1)?;
        positive("r2", self.r2)?;
        if self.n_legendre == 0 {
            return Err(Error::invalid("n_legendre", "must be at least 1"));
        }
        if !(self.z_max > 0.0 && self.z_max < 2.0) {
            return Err(Error::invalid("z_max", "must lie in (0, 2)"));
        }
        if !(self.overlap_threshold > 0.0 && self.overlap_threshold < 1.0) {
            return Err(Error::invalid("overlap_threshold", "must lie in (0, 1)"));
        }
        if let Some(k) = self.kinetic_prefactor {
            positive("kinetic_prefactor", k)?;
        }
        if !(self.collision_z0 >= 0.0 && self.collision_z0 <= self.z_max) {
            return Err(Error::invalid("collision_z0", "must lie in [0, z_max]"));
        }
        if (self.radial_model == RadialKind::CustomTable) != self.radial_table.is_some() {
            return Err(Error::invalid(
                "radial_table",
                "required exactly when radial_model = \"custom-table\"",
            ));
        }
        self.quadrature.validate()?;
        self.z_quadrature.validate()?;
        let s = &self.sweep;
        if !(s.l_min > 0.0 && s.l_min <= s.l_max && 2.0 * s.l_max <= self.z_max) {
            return Err(Error::invalid("sweep", "need 0 < l_min <= l_max <= z_max / 2"));
        }
        if s.points == 0 {
            return Err(Error::invalid("sweep.points", "must be at least 1"));
        }
        let c = &self.convergence;
        if !(c.l > 0.0 && 2.0 * c.l <= self.z_max) {
            return Err(Error::invalid("convergence.l", "need 0 < l <= z_max / 2"));
        }
        if c.deltas.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::invalid("convergence.deltas", "must be non-negative"));
        }
        if c.points.contains(&0) {
            return Err(Error::invalid("convergence.points", "must be at least 1"));
        }
        Ok(())
    }

    /// Parses TOML text. `r1` and `r2` must be present.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        for key in MANDATORY {
            if !table.contains_key(key) {
                return Err(Error::Config(format!("missing mandatory key `{key}`")));
            }
        }
        let config: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file, applies environment overrides and resolves a
    /// relative `radial_table` against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env(path: &Path, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("{}: {e}", path.display())))?;
        apply_env(&mut table, env)?;
        let mut config = Self::from_table(table)?;
        if let Some(t) = &config.radial_table {
            if t.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                config.radial_table = Some(base.join(t));
            }
        }
        Ok(config)
    }

    /// Defaults with environment overrides applied.
    pub fn default_with_env(env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut table = toml::Table::try_from(Self::default())
            .map_err(|e| Error::Serialization(e.to_string()))?;
        apply_env(&mut table, env)?;
        Self::from_table(table)
    }

    /// Full parameter set as TOML; parses back to an identical config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// First 16 hex digits of the SHA-256 of [`CageConfig::to_toml`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Kinetic prefactor in energy units, `a0 / (2a)` unless overridden.
    pub fn kappa(&self) -> f64 {
        self.kinetic_prefactor.unwrap_or_else(|| {
            geometry::kinetic_prefactor(self.a_angstrom).expect("validated a_angstrom")
        })
    }

    pub fn energy_unit_ev(&self) -> f64 {
        geometry::energy_unit_ev(self.a_angstrom).expect("validated a_angstrom")
    }

    pub fn radial(&self) -> Result<RadialModel> {
        Ok(match self.radial_model {
            RadialKind::Hydrogen3d => RadialModel::Hydrogen3d,
            RadialKind::Rho2exp => RadialModel::Rho2Exp,
            RadialKind::CustomTable => {
                let path = self
                    .radial_table
                    .as_ref()
                    .ok_or_else(|| Error::invalid("radial_table", "not set"))?;
                RadialModel::Table(RadialTable::load(path)?)
            }
        })
    }

    pub fn orbital_params(&self) -> Result<OrbitalParams> {
        OrbitalParams::new(self.r1, self.r2, self.angular_form, self.radial()?)
    }
}

/// Applies `OCTACAGE_<SECTION>_<KEY>=<value>` pairs. Values are parsed as
/// TOML literals, falling back to a bare string.
fn apply_env(table: &mut toml::Table, env: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let mut pairs: Vec<(String, String)> = env
        .into_iter()
        .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|k| (k.to_ascii_lowercase(), v)))
        .collect();
    pairs.sort();
    for (name, raw) in pairs {
        let value = parse_value(&raw);
        let section = SECTIONS
            .iter()
            .find(|s| name.strip_prefix(*s).is_some_and(|rest| rest.starts_with('_')));
        match section {
            Some(s) => {
                let key = name[s.len() + 1..].to_string();
                let entry = table
                    .entry(s.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()));
                match entry {
                    toml::Value::Table(t) => {
                        t.insert(key, value);
                    }
                    _ => return Err(Error::Config(format!("`{s}` is not a section"))),
                }
            }
            None => {
                table.insert(name, value);
            }
        }
    }
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
