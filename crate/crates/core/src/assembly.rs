//! Hamiltonian and overlap matrices in the raw, non-orthogonal basis.
//!
//! Every matrix element is accumulated from the same volume nodes, so the
//! overlap and kinetic blocks are exact Gram matrices of the sampled
//! functions: symmetric and positive semidefinite by construction.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{
    dynamic_basis, electron_orbitals, static_basis, BasisDescriptor, MappedLegendre, OrbitalKind,
    OrbitalParams, SNorm,
};
use crate::config::{CageConfig, ZKinetic};
use crate::error::{Error, Result};
use crate::geometry::{charge_position, Charge, Point, Vertex};
use crate::quadrature::{coulomb, mc_standard_error, QuadratureMethod, VolumeRule, ZRule};

/// Symmetric `H` and `S` with per-element error estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPair {
    pub h: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub h_err: DMatrix<f64>,
    pub s_err: DMatrix<f64>,
    pub labels: Vec<String>,
    pub config_hash: String,
}

#[derive(Serialize, Deserialize)]
struct MatrixPairFile {
    format: String,
    dim: usize,
    config_hash: String,
    labels: Vec<String>,
    h: Vec<f64>,
    s: Vec<f64>,
    h_err: Vec<f64>,
    s_err: Vec<f64>,
}

const PAIR_FORMAT: &str = "octacage-matrix-pair/1";

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl MatrixPair {
    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = MatrixPairFile {
            format: PAIR_FORMAT.into(),
            dim: self.dim(),
            config_hash: self.config_hash.clone(),
            labels: self.labels.clone(),
            h: row_major(&self.h),
            s: row_major(&self.s),
            h_err: row_major(&self.h_err),
            s_err: row_major(&self.s_err),
        };
        serde_json::to_string(&file).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: MatrixPairFile =
            serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        if f.format != PAIR_FORMAT {
            return Err(Error::Serialization(format!("unknown format `{}`", f.format)));
        }
        let n = f.dim;
        for v in [&f.h, &f.s, &f.h_err, &f.s_err] {
            if v.len() != n * n {
                return Err(Error::Serialization(format!("expected {} entries", n * n)));
            }
        }
        if f.labels.len() != n {
            return Err(Error::Serialization(format!("expected {n} labels")));
        }
        let m = |v: &[f64]| DMatrix::from_row_slice(n, n, v);
        Ok(Self {
            h: m(&f.h),
            s: m(&f.s),
            h_err: m(&f.h_err),
            s_err: m(&f.s_err),
            labels: f.labels,
            config_hash: f.config_hash,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Rejects non-finite entries.
    pub fn check_finite(&self) -> Result<()> {
        for m in [&self.h, &self.s] {
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    if !m[(i, j)].is_finite() {
                        return Err(Error::NonFiniteMatrix { row: i, col: j });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Exact charge-charge and charge-vertex energy at half-separation `l`.
pub fn static_offset(l: f64, z_eff: f64) -> Result<f64> {
    if !(l > 0.0 && l < 1.0) {
        return Err(Error::invalid("l", format!("half-separation {l} outside (0, 1)")));
    }
    let mut cage = 0.0;
    for charge in Charge::BOTH {
        let y = charge_position(charge, 2.0 * l);
        for v in Vertex::ALL {
            cage += 1.0 / (y - v.position(1.0)).norm();
        }
    }
    Ok(1.0 / (2.0 * l) + z_eff * cage)
}

/// Softened charge-charge and charge-vertex energy at separation `z`.
pub fn softened_offset(z: f64, z_eff: f64, delta: f64) -> f64 {
    let mut cage = 0.0;
    for charge in Charge::BOTH {
        let y = charge_position(charge, z);
        for v in Vertex::ALL {
            cage += coulomb((y - v.position(1.0)).norm(), delta);
        }
    }
    coulomb(z, delta) + z_eff * cage
}

/// Electron potential `-Z Σ_k 1/|x - p_k| - Σ_j 1/|x - y_j|`, softened.
#[inline]
pub fn electron_potential(x: &Point, separation: f64, z_eff: f64, delta: f64) -> f64 {
    let mut vertices = 0.0;
    if z_eff != 0.0 {
        for v in Vertex::ALL {
            vertices += coulomb((x - v.position(1.0)).norm(), delta);
        }
    }
    let mut charges = 0.0;
    for c in Charge::BOTH {
        charges += coulomb((x - charge_position(c, separation)).norm(), delta);
    }
    -z_eff * vertices - charges
}

/// Raw-orbital moments at one separation, all `n × n` column-major.
#[derive(Debug, Clone)]
struct RawMoments {
    n: usize,
    s: Vec<f64>,
    t: Vec<f64>,
    v: Vec<f64>,
    /// `∫ (∂z r_a) r_b`
    r: Vec<f64>,
    /// `∫ ∂z r_a ∂z r_b`
    q: Vec<f64>,
    s_sq: Vec<f64>,
    h_sq: Vec<f64>,
    bad: Option<(usize, usize)>,
}

impl RawMoments {
    fn zeros(n: usize) -> Self {
        let z = vec![0.0; n * n];
        Self {
            n,
            s: z.clone(),
            t: z.clone(),
            v: z.clone(),
            r: z.clone(),
            q: z.clone(),
            s_sq: z.clone(),
            h_sq: z,
            bad: None,
        }
    }

    fn add(mut self, o: Self) -> Self {
        for (a, b) in [
            (&mut self.s, &o.s),
            (&mut self.t, &o.t),
            (&mut self.v, &o.v),
            (&mut self.r, &o.r),
            (&mut self.q, &o.q),
            (&mut self.s_sq, &o.s_sq),
            (&mut self.h_sq, &o.h_sq),
        ] {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.bad = self.bad.or(o.bad);
        self
    }
}

/// What to integrate at a fixed separation.
struct Kernel<'a> {
    params: &'a OrbitalParams,
    orbitals: &'a [OrbitalKind],
    separation: f64,
    z_eff: f64,
    delta: f64,
    kappa: f64,
    with_dz: bool,
}

impl Kernel<'_> {
    fn accumulate(&self, rule: &VolumeRule) -> RawMoments {
        let n = self.orbitals.len();
        let groups = rule.groups() as f64;
        let order = rule.symmetry().order();
        rule.fold(
            || RawMoments::zeros(n),
            |acc, i, w, images| {
                let mut gs = vec![0.0; n * n];
                let mut gh = vec![0.0; n * n];
                let mut val = vec![0.0; n];
                let mut grad = vec![Point::zeros(); n];
                let mut dz = vec![0.0; n];
                for (img, x) in images.iter().enumerate() {
                    for (a, kind) in self.orbitals.iter().enumerate() {
                        let o = self.params.raw_full(*kind, x, self.separation);
                        val[a] = o.value;
                        grad[a] = o.gradient;
                        dz[a] = o.dz;
                    }
                    let pot = electron_potential(x, self.separation, self.z_eff, self.delta);
                    if !pot.is_finite() || val.iter().any(|v| !v.is_finite()) {
                        acc.bad.get_or_insert((i * order + img, 0));
                        continue;
                    }
                    for b in 0..n {
                        for a in 0..=b {
                            let k = b * n + a;
                            let ss = val[a] * val[b];
                            let tt = grad[a].dot(&grad[b]);
                            gs[k] += ss;
                            gh[k] += self.kappa * tt + pot * ss;
                            acc.s[k] += w * ss;
                            acc.t[k] += w * tt;
                            acc.v[k] += w * pot * ss;
                        }
                    }
                    if self.with_dz {
                        for b in 0..n {
                            for a in 0..n {
                                acc.r[b * n + a] += w * dz[a] * val[b];
                            }
                            for a in 0..=b {
                                acc.q[b * n + a] += w * dz[a] * dz[b];
                            }
                        }
                    }
                }
                for k in 0..n * n {
                    acc.s_sq[k] += (groups * w * gs[k]).powi(2);
                    acc.h_sq[k] += (groups * w * gh[k]).powi(2);
                }
            },
            RawMoments::add,
        )
    }
}

/// Normalized blocks at one separation, `n × n`.
#[derive(Debug, Clone)]
pub struct ElectronBlocks {
    /// `∫ χ_a χ_b`
    pub s: DMatrix<f64>,
    /// `∫ ∇χ_a · ∇χ_b`
    pub t: DMatrix<f64>,
    /// `∫ χ_a χ_b V`
    pub v: DMatrix<f64>,
    /// `∫ ∂zχ_a χ_b`
    pub b: DMatrix<f64>,
    /// `∫ ∂zχ_a ∂zχ_b`
    pub d: DMatrix<f64>,
    pub s_err: DMatrix<f64>,
    /// Error of `κ t + v`.
    pub h_err: DMatrix<f64>,
}

/// How the charge orbitals are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SNormMode {
    PerSeparation,
    FreeSpace,
}

struct BlockBuilder<'a> {
    params: &'a OrbitalParams,
    orbitals: Vec<OrbitalKind>,
    rule: &'a VolumeRule,
    z_eff: f64,
    delta: f64,
    kappa: f64,
    s_norm: SNormMode,
}

impl BlockBuilder<'_> {
    fn raw(&self, separation: f64, with_dz: bool, rule: &VolumeRule) -> Result<RawMoments> {
        let m = Kernel {
            params: self.params,
            orbitals: &self.orbitals,
            separation,
            z_eff: self.z_eff,
            delta: self.delta,
            kappa: self.kappa,
            with_dz,
        }
        .accumulate(rule);
        match m.bad {
            Some((node, _)) => Err(Error::Element {
                row: 0,
                col: 0,
                source: Box::new(Error::NonFiniteIntegrand { node }),
            }),
            None => Ok(m),
        }
    }

    fn blocks(&self, separation: f64, with_dz: bool) -> Result<ElectronBlocks> {
        let m = self.raw(separation, with_dz, self.rule)?;
        let n = m.n;
        let at = |v: &[f64], a: usize, b: usize| {
            if a <= b {
                v[b * n + a]
            } else {
                v[a * n + b]
            }
        };
        let mut norms = Vec::with_capacity(n);
        for (a, kind) in self.orbitals.iter().enumerate() {
            let norm = match (kind, self.s_norm) {
                (OrbitalKind::S(_), SNormMode::FreeSpace) => Ok(SNorm::free_space(self.params.r1)),
                (OrbitalKind::S(_), SNormMode::PerSeparation) => {
                    SNorm::from_integral(m.s[a * n + a], 2.0 * m.r[a * n + a])
                }
                (OrbitalKind::D(_), _) => SNorm::from_integral(m.s[a * n + a], 0.0),
            };
            norms.push(norm.map_err(|e| Error::Element {
                row: a,
                col: a,
                source: Box::new(e),
            })?);
        }

        let scaled = |v: &[f64]| {
            DMatrix::from_fn(n, n, |a, b| norms[a].value * norms[b].value * at(v, a, b))
        };
        let s = scaled(&m.s);
        let t = scaled(&m.t);
        let v = scaled(&m.v);
        let r = |a: usize, b: usize| m.r[b * n + a];
        let b = DMatrix::from_fn(n, n, |a, b| {
            norms[a].dz * norms[b].value * at(&m.s, a, b) + norms[a].value * norms[b].value * r(a, b)
        });
        let d = DMatrix::from_fn(n, n, |a, b| {
            let (na, nb) = (norms[a], norms[b]);
            na.dz * nb.dz * at(&m.s, a, b)
                + na.dz * nb.value * r(b, a)
                + na.value * nb.dz * r(a, b)
                + na.value * nb.value * at(&m.q, a, b)
        });

        let (s_err, h_err) = match (self.rule.method(), self.rule.coarse()) {
            (QuadratureMethod::ProductGauss, Some(coarse)) => {
                let c = self.raw(separation, false, coarse)?;
                let diff = |fine: &dyn Fn(usize) -> f64, crude: &dyn Fn(usize) -> f64| {
                    DMatrix::from_fn(n, n, |a, b| {
                        let k = if a <= b { b * n + a } else { a * n + b };
                        norms[a].value * norms[b].value * (fine(k) - crude(k)).abs()
                    })
                };
                (
                    diff(&|k| m.s[k], &|k| c.s[k]),
                    diff(&|k| self.kappa * m.t[k] + m.v[k], &|k| self.kappa * c.t[k] + c.v[k]),
                )
            }
            (QuadratureMethod::ProductGauss, None) => (DMatrix::zeros(n, n), DMatrix::zeros(n, n)),
            (QuadratureMethod::MonteCarlo, _) => {
                let groups = self.rule.groups();
                let se = |mean: &dyn Fn(usize) -> f64, sq: &[f64]| {
                    DMatrix::from_fn(n, n, |a, b| {
                        let k = if a <= b { b * n + a } else { a * n + b };
                        norms[a].value * norms[b].value * mc_standard_error(mean(k), sq[k], groups)
                    })
                };
                (
                    se(&|k| m.s[k], &m.s_sq),
                    se(&|k| self.kappa * m.t[k] + m.v[k], &m.h_sq),
                )
            }
        };
        Ok(ElectronBlocks {
            s,
            t,
            v,
            b,
            d,
            s_err,
            h_err,
        })
    }
}

fn labels(basis: &[BasisDescriptor]) -> Vec<String> {
    basis.iter().map(ToString::to_string).collect()
}

/// Exact mirror of the upper triangle onto the lower.
fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// The one-electron problem with the charges held at `±l` on the axis.
#[derive(Debug, Clone)]
pub struct StaticProblem {
    pub params: OrbitalParams,
    pub rule: VolumeRule,
    pub z_eff: f64,
    pub kappa: f64,
    pub delta: f64,
    pub z_max: f64,
    pub include_d: bool,
    pub config_hash: String,
}

impl StaticProblem {
    pub fn new(config: &CageConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            params: config.orbital_params()?,
            rule: VolumeRule::new(&config.quadrature)?,
            z_eff: config.z_eff,
            kappa: config.kappa(),
            delta: config.quadrature.delta,
            z_max: config.z_max,
            include_d: true,
            config_hash: config.hash(),
        })
    }

    /// The same problem with different vertex charge and basis.
    pub fn variant(&self, z_eff: f64, include_d: bool) -> Self {
        Self {
            z_eff,
            include_d,
            ..self.clone()
        }
    }

    pub fn basis(&self) -> Vec<BasisDescriptor> {
        let mut b = static_basis();
        if !self.include_d {
            b.truncate(2);
        }
        b
    }

    pub fn blocks(&self, l: f64) -> Result<ElectronBlocks> {
        if !(l > 0.0 && 2.0 * l <= self.z_max) {
            return Err(Error::invalid("l", format!("need 0 < 2l <= z_max, got l = {l}")));
        }
        BlockBuilder {
            params: &self.params,
            orbitals: electron_orbitals(self.include_d),
            rule: &self.rule,
            z_eff: self.z_eff,
            delta: self.delta,
            kappa: self.kappa,
            s_norm: SNormMode::PerSeparation,
        }
        .blocks(2.0 * l, false)
    }

    pub fn matrix(&self, l: f64) -> Result<MatrixPair> {
        let b = self.blocks(l)?;
        let mut h = &b.t * self.kappa + &b.v;
        let mut s = b.s;
        symmetrize(&mut h);
        symmetrize(&mut s);
        let pair = MatrixPair {
            h,
            s,
            h_err: b.h_err,
            s_err: b.s_err,
            labels: labels(&self.basis()),
            config_hash: self.config_hash.clone(),
        };
        pair.check_finite()?;
        Ok(pair)
    }
}

/// Static `8 × 8` matrices at half-separation `l`.
pub fn static_electron_matrix(l: f64, config: &CageConfig) -> Result<MatrixPair> {
    StaticProblem::new(config)?.matrix(l)
}

/// Two charge orbitals of an isolated pair in free space, from the closed
/// form two-center integrals of normalized exponentials.
pub fn free_space_pair(l: f64, config: &CageConfig) -> Result<MatrixPair> {
    if !(l > 0.0) {
        return Err(Error::invalid("l", "must be positive"));
    }
    let zeta = 1.0 / config.r1;
    let kappa = config.kappa();
    let sep = 2.0 * l;
    let w = zeta * sep;
    let e = (-w).exp();
    let overlap = e * (1.0 + w + w * w / 3.0);
    // ∫ χ_a χ_b / r_b
    let exchange = zeta * e * (1.0 + w);
    // ∫ χ_a² / r_b
    let coulomb_other = (1.0 - (1.0 + w) * e * e) / sep;
    let h_aa = kappa * zeta * zeta - zeta - coulomb_other;
    let h_ab = kappa * (-zeta * zeta * overlap + 2.0 * zeta * exchange) - 2.0 * exchange;
    let h = DMatrix::from_row_slice(2, 2, &[h_aa, h_ab, h_ab, h_aa]);
    let s = DMatrix::from_row_slice(2, 2, &[1.0, overlap, overlap, 1.0]);
    let mut basis = static_basis();
    basis.truncate(2);
    Ok(MatrixPair {
        h,
        s,
        h_err: DMatrix::zeros(2, 2),
        s_err: DMatrix::zeros(2, 2),
        labels: labels(&basis),
        config_hash: config.hash(),
    })
}

/// The coupled electron and separation problem in the `8N` product basis.
#[derive(Debug, Clone)]
pub struct DynamicProblem {
    pub params: OrbitalParams,
    pub rule: VolumeRule,
    pub z_rule: ZRule,
    pub config: CageConfig,
    kappa: f64,
}

impl DynamicProblem {
    pub fn new(config: &CageConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            params: config.orbital_params()?,
            rule: VolumeRule::new(&config.quadrature)?,
            z_rule: ZRule::new((0.0, config.z_max), &config.z_quadrature)?,
            config: config.clone(),
            kappa: config.kappa(),
        })
    }

    pub fn basis(&self) -> Vec<BasisDescriptor> {
        dynamic_basis(self.config.n_legendre)
    }

    pub fn legendre(&self) -> MappedLegendre {
        MappedLegendre {
            z_max: self.config.z_max,
        }
    }

    fn builder(&self) -> BlockBuilder<'_> {
        BlockBuilder {
            params: &self.params,
            orbitals: electron_orbitals(true),
            rule: &self.rule,
            z_eff: self.config.z_eff,
            delta: self.config.quadrature.delta,
            kappa: self.kappa,
            s_norm: if self.config.normalize_per_z {
                SNormMode::PerSeparation
            } else {
                SNormMode::FreeSpace
            },
        }
    }

    /// Normalized electron blocks at separation `z`.
    pub fn electron_blocks(&self, z: f64) -> Result<ElectronBlocks> {
        self.builder()
            .blocks(z, self.config.z_kinetic == ZKinetic::Full)
    }

    /// `∫ χ_a(x; z) χ_b(x; z) d³x` at separation `z`.
    pub fn electron_overlap(&self, z: f64) -> Result<DMatrix<f64>> {
        if !(0.0..2.0).contains(&z) {
            return Err(Error::invalid("z", format!("separation {z} outside [0, 2)")));
        }
        let mut s = self.builder().blocks(z, false)?.s;
        symmetrize(&mut s);
        Ok(s)
    }

    pub fn matrix(&self) -> Result<MatrixPair> {
        let n_leg = self.config.n_legendre;
        let k = 8;
        let dim = k * n_leg;
        let leg = self.legendre();
        let c = 2.0 * self.kappa * self.config.mass_ratio;
        let full = self.config.z_kinetic == ZKinetic::Full;
        let mut h = DMatrix::zeros(dim, dim);
        let mut s = DMatrix::zeros(dim, dim);
        let mut h_err = DMatrix::zeros(dim, dim);
        let mut s_err = DMatrix::zeros(dim, dim);
        for (&z, &wz) in self.z_rule.nodes.iter().zip(&self.z_rule.weights) {
            let blk = self.electron_blocks(z)?;
            let u = softened_offset(z, self.config.z_eff, self.config.quadrature.delta);
            let hz = &blk.t * self.kappa + &blk.v + &blk.s * u;
            let (p, dp) = leg.eval_all(n_leg, z);
            for m in 0..n_leg {
                for n in 0..n_leg {
                    let pp = p[n] * p[m];
                    for beta in 0..k {
                        for alpha in 0..k {
                            let (i, j) = (n * k + alpha, m * k + beta);
                            let sab = blk.s[(alpha, beta)];
                            let mut zkin = dp[n] * dp[m] * sab;
                            if full {
                                zkin += pp * blk.d[(alpha, beta)]
                                    + p[n] * dp[m] * blk.b[(alpha, beta)]
                                    + dp[n] * p[m] * blk.b[(beta, alpha)];
                            }
                            s[(i, j)] += wz * pp * sab;
                            h[(i, j)] += wz * (pp * hz[(alpha, beta)] + c * zkin);
                            let se = blk.s_err[(alpha, beta)];
                            s_err[(i, j)] += wz * pp.abs() * se;
                            h_err[(i, j)] += wz
                                * (pp.abs() * (blk.h_err[(alpha, beta)] + u.abs() * se)
                                    + c * (dp[n] * dp[m]).abs() * se);
                        }
                    }
                }
            }
        }
        symmetrize(&mut h);
        symmetrize(&mut s);
        let pair = MatrixPair {
            h,
            s,
            h_err,
            s_err,
            labels: labels(&self.basis()),
            config_hash: self.config.hash(),
        };
        pair.check_finite()?;
        Ok(pair)
    }
}

/// Dynamic `8N × 8N` matrices.
pub fn dynamic_matrix(config: &CageConfig) -> Result<MatrixPair> {
    DynamicProblem::new(config)?.matrix()
}
