//! Electron basis functions: `s` orbitals on the two charges, `m = 0`
//! `d` orbitals on the six vertices, and the Legendre factor used for the
//! separation coordinate.
//!
//! Raw (unnormalized) evaluators live on [`OrbitalParams`]; normalization
//! constants are computed over the cage with a [`VolumeRule`].

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{charge_position, Charge, Point, Vertex};
use crate::quadrature::{IntegralResult, VolumeRule};

/// Angular factor of the vertex orbitals as a function of `cos θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngularForm {
    /// `3 cos²θ - 1`, the `d_z²` harmonic.
    #[default]
    Squared,
    /// `3 cos θ - 1`.
    Linear,
}

impl AngularForm {
    #[inline]
    fn eval(self, c: f64) -> (f64, f64) {
        match self {
            AngularForm::Squared => (3.0 * c * c - 1.0, 6.0 * c),
            AngularForm::Linear => (3.0 * c - 1.0, 3.0),
        }
    }
}

/// Tabulated radial profile `g(ρ)`, linearly interpolated.
///
/// The table is anchored at `g(0) = 0` when it does not start at the origin,
/// and `g` vanishes beyond the last entry.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialTable {
    rho: Vec<f64>,
    g: Vec<f64>,
}

impl RadialTable {
    pub fn new(mut rho: Vec<f64>, mut g: Vec<f64>) -> Result<Self> {
        if rho.len() != g.len() || rho.is_empty() {
            return Err(Error::invalid("radial_table", "needs matching non-empty columns"));
        }
        if rho[0] < 0.0 || rho.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("radial_table", "rho must be non-negative and increasing"));
        }
        if g.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("radial_table", "g must be finite and non-negative"));
        }
        if rho[0] > 0.0 {
            rho.insert(0, 0.0);
            g.insert(0, 0.0);
        }
        Ok(Self { rho, g })
    }

    /// Parses two whitespace- or comma-separated columns; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rho = Vec::new();
        let mut g = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    Error::invalid("radial_table", format!("line {}: bad number `{s}`", n + 1))
                })
            };
            if cols.len() != 2 {
                return Err(Error::invalid(
                    "radial_table",
                    format!("line {}: expected two columns", n + 1),
                ));
            }
            rho.push(parse(cols[0])?);
            g.push(parse(cols[1])?);
        }
        Self::new(rho, g)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    fn eval(&self, rho: f64) -> (f64, f64) {
        let last = self.rho.len() - 1;
        if rho > self.rho[last] || last == 0 {
            return (0.0, 0.0);
        }
        let i = match self.rho.partition_point(|&r| r <= rho) {
            0 => 0,
            p => (p - 1).min(last - 1),
        };
        let slope = (self.g[i + 1] - self.g[i]) / (self.rho[i + 1] - self.rho[i]);
        (self.g[i] + slope * (rho - self.rho[i]), slope)
    }
}

/// Radial shape `g(ρ)` of the vertex orbitals, `ρ = |x - p| / r2`.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialModel {
    /// `ρ² exp(-ρ/3)`
    Hydrogen3d,
    /// `ρ² exp(-ρ)`
    Rho2Exp,
    Table(RadialTable),
}

impl RadialModel {
    /// `(g(ρ), g'(ρ))`
    #[inline]
    pub fn eval(&self, rho: f64) -> (f64, f64) {
        match self {
            RadialModel::Hydrogen3d => {
                let e = (-rho / 3.0).exp();
                (rho * rho * e, (2.0 * rho - rho * rho / 3.0) * e)
            }
            RadialModel::Rho2Exp => {
                let e = (-rho).exp();
                (rho * rho * e, (2.0 * rho - rho * rho) * e)
            }
            RadialModel::Table(t) => t.eval(rho),
        }
    }
}

/// Shape parameters shared by all orbitals. Radii are in units of `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitalParams {
    pub r1: f64,
    pub r2: f64,
    pub angular: AngularForm,
    pub radial: RadialModel,
}

/// Value, Cartesian gradient and separation derivative of one orbital.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitalValue {
    pub value: f64,
    pub gradient: Point,
    pub dz: f64,
}

impl OrbitalParams {
    pub fn new(r1: f64, r2: f64, angular: AngularForm, radial: RadialModel) -> Result<Self> {
        if !(r1 > 0.0 && r1.is_finite()) {
            return Err(Error::invalid("r1", "must be positive"));
        }
        if !(r2 > 0.0 && r2.is_finite()) {
            return Err(Error::invalid("r2", "must be positive"));
        }
        Ok(Self {
            r1,
            r2,
            angular,
            radial,
        })
    }

    /// Unnormalized vertex orbital `r2^{-3/2} A(cos θ) g(|x - p|/r2)`.
    #[inline]
    pub fn d_raw(&self, vertex: Vertex, x: &Point) -> f64 {
        let u = x - vertex.position(1.0);
        let r = u.norm();
        if r == 0.0 {
            return 0.0;
        }
        let c = u.dot(&vertex.inward()) / r;
        let (a, _) = self.angular.eval(c);
        let (g, _) = self.radial.eval(r / self.r2);
        self.r2.powf(-1.5) * a * g
    }

    /// Unnormalized vertex orbital with its gradient; `dz` is always zero.
    #[inline]
    pub fn d_raw_full(&self, vertex: Vertex, x: &Point) -> OrbitalValue {
        let u = x - vertex.position(1.0);
        let r = u.norm();
        if r == 0.0 {
            return OrbitalValue {
                value: 0.0,
                gradient: Point::zeros(),
                dz: 0.0,
            };
        }
        let e = vertex.inward();
        let c = u.dot(&e) / r;
        let (a, da) = self.angular.eval(c);
        let (g, dg) = self.radial.eval(r / self.r2);
        let scale = self.r2.powf(-1.5);
        let grad_c = (e - u * (c / r)) / r;
        let grad_rho = u / (r * self.r2);
        OrbitalValue {
            value: scale * a * g,
            gradient: (grad_c * (da * g) + grad_rho * (a * dg)) * scale,
            dz: 0.0,
        }
    }

    /// Unnormalized charge orbital `exp(-|x - y_j(z)| / r1)`.
    #[inline]
    pub fn s_raw(&self, charge: Charge, x: &Point, separation: f64) -> f64 {
        (-(x - charge_position(charge, separation)).norm() / self.r1).exp()
    }

    /// Unnormalized charge orbital with gradient and `∂/∂z` at fixed `x`.
    ///
    /// At the orbital center the direction is undefined; the gradient and
    /// `∂/∂z` there are given their angular average, zero.
    #[inline]
    pub fn s_raw_full(&self, charge: Charge, x: &Point, separation: f64) -> OrbitalValue {
        let u = x - charge_position(charge, separation);
        let r = u.norm();
        let value = (-r / self.r1).exp();
        if r == 0.0 {
            return OrbitalValue {
                value,
                gradient: Point::zeros(),
                dz: 0.0,
            };
        }
        // center moves as (0, 0, ±z/2)
        let dr_dz = -0.5 * charge.sign() * u[2] / r;
        OrbitalValue {
            value,
            gradient: u * (-value / (self.r1 * r)),
            dz: -value / self.r1 * dr_dz,
        }
    }

    /// Raw orbital value, gradient and `∂/∂z`.
    #[inline]
    pub fn raw_full(&self, kind: OrbitalKind, x: &Point, separation: f64) -> OrbitalValue {
        match kind {
            OrbitalKind::S(c) => self.s_raw_full(c, x, separation),
            OrbitalKind::D(v) => self.d_raw_full(v, x),
        }
    }
}

/// Where an electron orbital is centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrbitalKind {
    S(Charge),
    D(Vertex),
}

impl fmt::Display for OrbitalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrbitalKind::S(c) => write!(f, "s{}", c.label()),
            OrbitalKind::D(v) => write!(f, "d{:+}", v.index()),
        }
    }
}

/// One function of the variational basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisDescriptor {
    pub kind: OrbitalKind,
    /// Legendre degree for the separation coordinate (dynamic mode only).
    pub legendre: Option<usize>,
}

impl fmt::Display for BasisDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.legendre {
            Some(n) => write!(f, "{}:P{n}", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}

/// Electron orbitals in matrix order: `s1, s2`, then `d` for `k = -3..+3`.
pub fn electron_orbitals(include_d: bool) -> Vec<OrbitalKind> {
    let mut out = vec![OrbitalKind::S(Charge::Upper), OrbitalKind::S(Charge::Lower)];
    if include_d {
        out.extend(Vertex::ALL.map(OrbitalKind::D));
    }
    out
}

/// The eight static basis functions.
pub fn static_basis() -> Vec<BasisDescriptor> {
    electron_orbitals(true)
        .into_iter()
        .map(|kind| BasisDescriptor {
            kind,
            legendre: None,
        })
        .collect()
}

/// The `8N` product functions, Legendre-major: index `n * 8 + α`.
pub fn dynamic_basis(n_legendre: usize) -> Vec<BasisDescriptor> {
    let orbitals = electron_orbitals(true);
    (0..n_legendre)
        .flat_map(|n| {
            orbitals.iter().map(move |&kind| BasisDescriptor {
                kind,
                legendre: Some(n),
            })
        })
        .collect()
}

/// Legendre polynomial `P_n(t)` by the three-term recurrence.
pub fn legendre(n: usize, t: f64) -> f64 {
    legendre_with_derivative(n, t).0
}

/// `(P_n(t), P_n'(t))`.
pub fn legendre_with_derivative(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    let (mut d0, mut d1) = (0.0, 1.0);
    if n == 0 {
        return (p0, d0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * t * p1 - kf * p0) / (kf + 1.0);
        // P'_{k+1} = P'_{k-1} + (2k + 1) P_k
        let d2 = d0 + (2.0 * kf + 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

/// Legendre polynomials mapped from `[-1, 1]` onto `[0, z_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappedLegendre {
    pub z_max: f64,
}

impl MappedLegendre {
    /// `P̃_n(z)` and `dP̃_n/dz` for `n < count`.
    pub fn eval_all(&self, count: usize, z: f64) -> (Vec<f64>, Vec<f64>) {
        let t = 2.0 * z / self.z_max - 1.0;
        let jac = 2.0 / self.z_max;
        (0..count)
            .map(|n| {
                let (p, d) = legendre_with_derivative(n, t);
                (p, d * jac)
            })
            .unzip()
    }
}

/// Constant `c` with `∫ (c φ)² = 1`, and the raw integral it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub constant: f64,
    pub integral: IntegralResult,
}

/// Normalizes `f` over the cage.
pub fn normalize<F>(f: F, rule: &VolumeRule) -> Result<Normalization>
where
    F: Fn(&Point) -> f64 + Sync,
{
    let integral = rule.integrate(|x| f(x).powi(2))?;
    if !(integral.value > 0.0) {
        return Err(Error::invalid("normalize", "function vanishes on the cage"));
    }
    Ok(Normalization {
        constant: integral.value.powf(-0.5),
        integral,
    })
}

/// A vertex orbital, usable after [`DOrbital::normalize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DOrbital {
    pub vertex: Vertex,
    norm: Option<f64>,
}

impl DOrbital {
    pub fn new(vertex: Vertex) -> Self {
        Self { vertex, norm: None }
    }

    pub fn with_norm(vertex: Vertex, norm: f64) -> Self {
        Self {
            vertex,
            norm: Some(norm),
        }
    }

    pub fn normalize(&mut self, params: &OrbitalParams, rule: &VolumeRule) -> Result<Normalization> {
        let n = normalize(|x| params.d_raw(self.vertex, x), rule)?;
        self.norm = Some(n.constant);
        Ok(n)
    }

    pub fn norm(&self) -> Option<f64> {
        self.norm
    }

    pub fn eval(&self, params: &OrbitalParams, x: &Point) -> Result<f64> {
        let n = self.norm.ok_or(Error::Unnormalized)?;
        Ok(n * params.d_raw(self.vertex, x))
    }
}

/// Normalization of a charge orbital at one separation, with its
/// derivative along the separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SNorm {
    pub value: f64,
    pub dz: f64,
}

impl SNorm {
    /// Normalization of the untruncated exponential, `(π r1³)^{-1/2}`.
    pub fn free_space(r1: f64) -> Self {
        Self {
            value: (std::f64::consts::PI * r1.powi(3)).powf(-0.5),
            dz: 0.0,
        }
    }

    /// Normalizes over the cage at separation `z`, differentiating the
    /// same quadrature sum with respect to `z`.
    pub fn over_cage(
        params: &OrbitalParams,
        charge: Charge,
        separation: f64,
        rule: &VolumeRule,
    ) -> Result<Self> {
        let (i, di) = rule.fold(
            || (0.0, 0.0),
            |acc, _, w, images| {
                for x in images {
                    let o = params.s_raw_full(charge, x, separation);
                    acc.0 += w * o.value * o.value;
                    acc.1 += w * 2.0 * o.value * o.dz;
                }
            },
            |a, b| (a.0 + b.0, a.1 + b.1),
        );
        Self::from_integral(i, di)
    }

    pub(crate) fn from_integral(i: f64, di: f64) -> Result<Self> {
        if !(i > 0.0) {
            return Err(Error::invalid("normalize", "s orbital vanishes on the cage"));
        }
        let value = i.powf(-0.5);
        Ok(Self {
            value,
            dz: -0.5 * value.powi(3) * di,
        })
    }
}

/// Normalized charge orbital `N0 exp(-|x - y_j| / r1)`.
pub fn eval_s(params: &OrbitalParams, charge: Charge, x: &Point, separation: f64, norm: SNorm) -> f64 {
    norm.value * params.s_raw(charge, x, separation)
}

/// `∂/∂z` of [`eval_s`] at fixed `x`, including the separation dependence
/// of the normalization.
pub fn eval_s_dz(
    params: &OrbitalParams,
    charge: Charge,
    x: &Point,
    separation: f64,
    norm: SNorm,
) -> f64 {
    let o = params.s_raw_full(charge, x, separation);
    norm.dz * o.value + norm.value * o.dz
}

/// Normalized vertex orbital.
pub fn eval_d(params: &OrbitalParams, orbital: &DOrbital, x: &Point) -> Result<f64> {
    orbital.eval(params, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{QuadratureMethod, QuadratureSpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params() -> OrbitalParams {
        OrbitalParams::new(0.25, 0.2, AngularForm::Squared, RadialModel::Rho2Exp).unwrap()
    }

    fn rule(points: usize) -> VolumeRule {
        VolumeRule::new(&QuadratureSpec {
            method: QuadratureMethod::MonteCarlo,
            points,
            seed: 11,
            delta: 1e-3,
        })
        .unwrap()
    }

    #[test]
    fn legendre_values() {
        for i in 0..=20 {
            let t = -1.0 + 0.1 * f64::from(i);
            assert_eq!(legendre(0, t), 1.0);
        }
        assert_relative_eq!(legendre(3, 0.5), -0.4375, max_relative = 1e-15);
        for n in 0..8 {
            assert_relative_eq!(legendre(n, 1.0), 1.0, max_relative = 1e-14);
            let (_, d) = legendre_with_derivative(n, 1.0);
            assert_relative_eq!(d, (n * (n + 1)) as f64 / 2.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn legendre_derivative_against_finite_difference() {
        let h = 1e-6;
        for n in 0..9 {
            for &t in &[-0.9, -0.3, 0.1, 0.77] {
                let fd = (legendre(n, t + h) - legendre(n, t - h)) / (2.0 * h);
                let (_, d) = legendre_with_derivative(n, t);
                assert!((fd - d).abs() < 1e-7 * (1.0 + d.abs()));
            }
        }
    }

    proptest! {
        #[test]
        fn legendre_recurrence(t in -1.0f64..1.0, n in 1usize..30) {
            let lhs = (n as f64 + 1.0) * legendre(n + 1, t);
            let rhs = (2.0 * n as f64 + 1.0) * t * legendre(n, t) - n as f64 * legendre(n - 1, t);
            prop_assert!((lhs - rhs).abs() <= 1e-14 * (1.0 + lhs.abs()) * n as f64);
        }

        #[test]
        fn s_orbital_mirror(x1 in -0.5f64..0.5, x2 in -0.4f64..0.4, x3 in -0.4f64..0.4, z in 0.0f64..1.9) {
            let p = params();
            let up = p.s_raw(Charge::Upper, &Point::new(x1, x2, x3), z);
            let down = p.s_raw(Charge::Lower, &Point::new(x1, x2, -x3), z);
            prop_assert_eq!(up, down);
        }

        #[test]
        fn d_orbital_covariance(x1 in -0.5f64..0.5, x2 in -0.4f64..0.4, x3 in -0.4f64..0.4,
                                perm in 0usize..6, bits in 0u8..8, k in 0usize..6) {
            let p = params();
            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let pm = perms[perm];
            let sign = |i: usize| if bits >> i & 1 == 1 { -1.0 } else { 1.0 };
            let x = Point::new(x1, x2, x3);
            // (g x)_i = s_i x_{pm[i]}
            let gx = Point::new(sign(0) * x[pm[0]], sign(1) * x[pm[1]], sign(2) * x[pm[2]]);
            let v = Vertex::ALL[k];
            let gv_pos = {
                let pos = v.position(1.0);
                Point::new(sign(0) * pos[pm[0]], sign(1) * pos[pm[1]], sign(2) * pos[pm[2]])
            };
            let gv = *Vertex::ALL.iter().find(|w| w.position(1.0) == gv_pos).unwrap();
            let a = p.d_raw(v, &x);
            let b = p.d_raw(gv, &gx);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn d_orbital_angular_factor() {
        let p = params();
        let v = Vertex::new(3).unwrap();
        // on the axis between vertex and center: 3·1 - 1 = 2
        let x = Point::new(0.0, 0.0, 0.6);
        let (g, _) = p.radial.eval(0.4 / p.r2);
        assert_relative_eq!(p.d_raw(v, &x), 2.0 * g * p.r2.powf(-1.5), max_relative = 1e-14);
        // cos²θ = 1/3 is a node
        let d = 0.3;
        let x = Point::new(d * (2.0f64 / 3.0).sqrt(), 0.0, 1.0 - d / 3f64.sqrt());
        assert!(p.d_raw(v, &x).abs() < 1e-14);
        assert_eq!(p.d_raw(v, &v.position(1.0)), 0.0);
    }

    #[test]
    fn linear_angular_form() {
        let p = OrbitalParams {
            angular: AngularForm::Linear,
            ..params()
        };
        let v = Vertex::new(-1).unwrap();
        let x = Point::new(-0.6, 0.0, 0.0);
        let (g, _) = p.radial.eval(0.4 / p.r2);
        assert_relative_eq!(p.d_raw(v, &x), 2.0 * g * p.r2.powf(-1.5), max_relative = 1e-14);
    }

    #[test]
    fn s_orbital_values() {
        let p = params();
        let z = 0.8;
        let norm = SNorm { value: 3.0, dz: 0.0 };
        let y = Point::new(0.0, 0.0, 0.4);
        assert_eq!(eval_s(&p, Charge::Upper, &y, z, norm), 3.0);
        let x = y + Point::new(p.r1, 0.0, 0.0);
        assert_relative_eq!(
            eval_s(&p, Charge::Upper, &x, z, norm),
            3.0 / std::f64::consts::E,
            max_relative = 1e-14
        );
    }

    fn fd_check(p: &OrbitalParams, kind: OrbitalKind, x: Point, z: f64) {
        let h = 1e-5;
        let o = p.raw_full(kind, &x, z);
        for axis in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[axis] += h;
            xm[axis] -= h;
            let fd = (p.raw_full(kind, &xp, z).value - p.raw_full(kind, &xm, z).value) / (2.0 * h);
            assert!((fd - o.gradient[axis]).abs() <= 1e-6 * (1.0 + fd.abs()), "{kind} axis {axis}");
        }
        let fd = (p.raw_full(kind, &x, z + h).value - p.raw_full(kind, &x, z - h).value) / (2.0 * h);
        assert!((fd - o.dz).abs() <= 1e-6 * (1.0 + fd.abs()));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let models = [RadialModel::Hydrogen3d, RadialModel::Rho2Exp];
        for radial in models {
            for angular in [AngularForm::Squared, AngularForm::Linear] {
                let p = OrbitalParams::new(0.25, 0.35, angular, radial.clone()).unwrap();
                for kind in electron_orbitals(true) {
                    fd_check(&p, kind, Point::new(0.13, -0.21, 0.31), 0.7);
                    fd_check(&p, kind, Point::new(-0.4, 0.05, -0.12), 1.3);
                }
            }
        }
    }

    #[test]
    fn s_dz_with_normalization_against_finite_difference() {
        let p = params();
        let r = rule(24_000);
        let h = 1e-5;
        for &z in &[0.3, 0.9, 1.6] {
            for charge in Charge::BOTH {
                let x = Point::new(0.1, -0.05, 0.2);
                let n = SNorm::over_cage(&p, charge, z, &r).unwrap();
                let np = SNorm::over_cage(&p, charge, z + h, &r).unwrap();
                let nm = SNorm::over_cage(&p, charge, z - h, &r).unwrap();
                let fd = (eval_s(&p, charge, &x, z + h, np) - eval_s(&p, charge, &x, z - h, nm))
                    / (2.0 * h);
                let exact = eval_s_dz(&p, charge, &x, z, n);
                assert!((fd - exact).abs() <= 1e-6 * fd.abs().max(1e-3), "{fd} vs {exact}");
            }
        }
    }

    #[test]
    fn s_dz_symmetric_pair_on_midplane() {
        let p = params();
        let norm = SNorm::free_space(p.r1);
        let x = Point::new(0.2, 0.1, 0.0);
        // both centers recede from the midplane at the same rate
        let up = eval_s_dz(&p, Charge::Upper, &x, 0.6, norm);
        let down = eval_s_dz(&p, Charge::Lower, &x, 0.6, norm);
        assert!(up < 0.0);
        assert_relative_eq!(up, down, max_relative = 1e-14);
    }

    #[test]
    fn s_dz_vanishes_for_wide_orbitals() {
        let x = Point::new(0.2, 0.1, 0.1);
        let mut last = f64::INFINITY;
        for r1 in [1.0, 10.0, 100.0, 1e4] {
            let p = OrbitalParams { r1, ..params() };
            let d = eval_s_dz(&p, Charge::Upper, &x, 0.6, SNorm { value: 1.0, dz: 0.0 }).abs();
            assert!(d < last);
            last = d;
        }
        assert!(last < 1e-4);
    }

    #[test]
    fn unnormalized_evaluation_rejected() {
        let p = params();
        let d = DOrbital::new(Vertex::new(1).unwrap());
        assert!(matches!(eval_d(&p, &d, &Point::zeros()), Err(Error::Unnormalized)));
    }

    #[test]
    fn normalization_of_constant() {
        let n = normalize(|_| 1.0, &rule(4_800)).unwrap();
        assert_relative_eq!(n.constant, (0.75f64).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn normalized_orbitals_have_unit_norm() {
        let p = params();
        let r = rule(60_000);
        for v in Vertex::ALL {
            let mut d = DOrbital::new(v);
            let n = d.normalize(&p, &r).unwrap();
            let check = r.integrate(|x| d.eval(&p, x).unwrap().powi(2)).unwrap();
            assert!((check.value - 1.0).abs() <= 1e-12);
            // relative error of the raw integral carries over
            assert!(n.integral.error_estimate / n.integral.value < 0.05);
        }
        for charge in Charge::BOTH {
            let norm = SNorm::over_cage(&p, charge, 0.9, &r).unwrap();
            let check = r
                .integrate(|x| eval_s(&p, charge, x, 0.9, norm).powi(2))
                .unwrap();
            assert_relative_eq!(check.value, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn smaller_radius_raises_normalization() {
        // brute force: the integral of exp(-2r/r1) shrinks with r1
        let p = params();
        let r = rule(60_000);
        let wide = SNorm::over_cage(&p, Charge::Upper, 0.4, &r).unwrap();
        let narrow = SNorm::over_cage(&OrbitalParams { r1: 0.125, ..p }, Charge::Upper, 0.4, &r).unwrap();
        assert!(narrow.value > wide.value);
        // deep inside the cage truncation is negligible: ratio ≈ 2^{3/2}
        assert_relative_eq!(narrow.value / wide.value, 2f64.powf(1.5), max_relative = 0.05);
    }

    #[test]
    fn radial_table_interpolates() {
        let t = RadialTable::parse("# rho g\n0.5, 1.0\n1.0 2.0\n2.0 0.0\n").unwrap();
        let m = RadialModel::Table(t);
        assert_eq!(m.eval(0.0).0, 0.0);
        assert_relative_eq!(m.eval(0.25).0, 0.5);
        assert_relative_eq!(m.eval(0.75).0, 1.5);
        assert_relative_eq!(m.eval(1.5).0, 1.0);
        assert_relative_eq!(m.eval(1.5).1, -2.0);
        assert_eq!(m.eval(3.0), (0.0, 0.0));
        assert!(RadialTable::parse("1 2 3").is_err());
        assert!(RadialTable::parse("1 2\n0.5 1").is_err());
    }

    #[test]
    fn basis_layouts() {
        let s = static_basis();
        assert_eq!(s.len(), 8);
        assert_eq!(s[0].to_string(), "s1");
        assert_eq!(s[2].to_string(), "d-3");
        let d = dynamic_basis(8);
        assert_eq!(d.len(), 64);
        assert_eq!(d[9].to_string(), "s2:P1");
    }

    #[test]
    fn mapped_legendre_endpoints() {
        let m = MappedLegendre { z_max: 1.9 };
        let (p, _) = m.eval_all(8, 0.0);
        for (n, v) in p.iter().enumerate() {
            assert_relative_eq!(*v, if n % 2 == 0 { 1.0 } else { -1.0 }, max_relative = 1e-14);
        }
    }
}
