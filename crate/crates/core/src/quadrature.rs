//! Integration over the cage volume and over the charge-separation interval.
//!
//! Volume rules are built from base points in the positive simplex
//! `{x >= 0, x1 + x2 + x3 <= 1}` and expanded into images under a symmetry
//! group of the octahedron. Monte Carlo rules use the full 48-element group
//! (signed axis permutations); product Gauss rules use the 8 sign flips only,
//! because the collapsed-coordinate map is not permutation symmetric.
//!
//! Summation order is part of the contract: base points are split into
//! fixed chunks of [`CHUNK`] points, each chunk is summed sequentially in
//! index order, and chunk partials are combined by a fixed pairwise tree.
//! Results are therefore bit-identical for any number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Base points per work unit.
pub const CHUNK: usize = 256;

/// Softened Coulomb kernel `1 / sqrt(r^2 + delta^2)`.
#[inline]
pub fn coulomb(r: f64, delta: f64) -> f64 {
    1.0 / (r * r + delta * delta).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureMethod {
    MonteCarlo,
    ProductGauss,
}

/// Volume quadrature settings.
///
/// For Monte Carlo `points` is the total node count (rounded up to a whole
/// number of 48-point orbits); for product Gauss it is the order per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    pub method: QuadratureMethod,
    pub points: usize,
    pub seed: u64,
    pub delta: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            method: QuadratureMethod::MonteCarlo,
            points: 200_000,
            seed: 20_250_611,
            delta: 1e-3,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::invalid("quadrature.points", "must be at least 1"));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid("quadrature.delta", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult {
    pub value: f64,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    /// Sign flips of each coordinate, 8 images.
    Signs,
    /// Signed axis permutations, 48 images.
    Full,
}

const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

impl Symmetry {
    pub fn order(self) -> usize {
        match self {
            Symmetry::Signs => 8,
            Symmetry::Full => 48,
        }
    }

    /// Writes the images of `p` into `out` (length [`Symmetry::order`]).
    #[inline]
    pub fn images(self, p: &[f64; 3], out: &mut [Point]) {
        let perms: &[[usize; 3]] = match self {
            Symmetry::Signs => &PERMUTATIONS[..1],
            Symmetry::Full => &PERMUTATIONS,
        };
        let mut i = 0;
        for perm in perms {
            for bits in 0..8u8 {
                let s = |axis: u8| if bits >> axis & 1 == 1 { -1.0 } else { 1.0 };
                out[i] = Point::new(
                    s(0) * p[perm[0]],
                    s(1) * p[perm[1]],
                    s(2) * p[perm[2]],
                );
                i += 1;
            }
        }
    }
}

/// A fixed set of weighted nodes covering the unit octahedron.
#[derive(Debug, Clone)]
pub struct VolumeRule {
    method: QuadratureMethod,
    symmetry: Symmetry,
    base: Vec<[f64; 3]>,
    /// Weight of every image of the corresponding base point.
    weights: Vec<f64>,
    coarse: Option<Box<VolumeRule>>,
}

impl VolumeRule {
    pub fn new(spec: &QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        Ok(match spec.method {
            QuadratureMethod::MonteCarlo => Self::monte_carlo(spec.points, spec.seed),
            QuadratureMethod::ProductGauss => {
                let mut rule = Self::product_gauss(spec.points);
                if spec.points > 1 {
                    rule.coarse = Some(Box::new(Self::product_gauss(spec.points.div_ceil(2))));
                }
                rule
            }
        })
    }

    fn monte_carlo(points: usize, seed: u64) -> Self {
        let symmetry = Symmetry::Full;
        let count = points.div_ceil(symmetry.order()).max(2);
        let starts: Vec<usize> = (0..count).step_by(CHUNK).collect();
        let base: Vec<[f64; 3]> = starts
            .par_iter()
            .flat_map_iter(|&start| {
                let end = (start + CHUNK).min(count);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                // four u64 draws per base point, eight 32-bit words
                rng.set_word_pos(start as u128 * 8);
                (start..end).map(move |_| simplex_point(&mut rng))
            })
            .collect();
        let weight = 4.0 / 3.0 / (count * symmetry.order()) as f64;
        Self {
            method: QuadratureMethod::MonteCarlo,
            symmetry,
            weights: vec![weight; base.len()],
            base,
            coarse: None,
        }
    }

    fn product_gauss(order: usize) -> Self {
        let (t, w) = gauss_legendre(order);
        let unit: Vec<(f64, f64)> = t
            .iter()
            .zip(&w)
            .map(|(t, w)| (0.5 * (t + 1.0), 0.5 * w))
            .collect();
        let mut base = Vec::with_capacity(order.pow(3));
        let mut weights = Vec::with_capacity(order.pow(3));
        for &(u, wu) in &unit {
            for &(v, wv) in &unit {
                for &(s, ws) in &unit {
                    // collapsed coordinates for the simplex
                    let x = u;
                    let y = (1.0 - u) * v;
                    let z = (1.0 - u) * (1.0 - v) * s;
                    base.push([x, y, z]);
                    weights.push(wu * wv * ws * (1.0 - u).powi(2) * (1.0 - v));
                }
            }
        }
        Self {
            method: QuadratureMethod::ProductGauss,
            symmetry: Symmetry::Signs,
            base,
            weights,
            coarse: None,
        }
    }

    pub fn method(&self) -> QuadratureMethod {
        self.method
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    /// Number of base points (symmetry orbits).
    pub fn groups(&self) -> usize {
        self.base.len()
    }

    pub fn node_count(&self) -> usize {
        self.base.len() * self.symmetry.order()
    }

    pub fn base_point(&self, i: usize) -> [f64; 3] {
        self.base[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Embedded lower-order rule used for error estimates of Gauss rules.
    pub fn coarse(&self) -> Option<&VolumeRule> {
        self.coarse.as_deref()
    }

    /// Deterministic parallel fold over symmetry orbits.
    ///
    /// `visit` receives the base index, the per-image weight and the images
    /// of one orbit. Chunk partials are merged with `combine` in a fixed
    /// pairwise order.
    pub fn fold<A, I, V, C>(&self, init: I, visit: V, combine: C) -> A
    where
        A: Send,
        I: Fn() -> A + Sync,
        V: Fn(&mut A, usize, f64, &[Point]) + Sync,
        C: Fn(A, A) -> A + Sync,
    {
        let order = self.symmetry.order();
        let partials: Vec<A> = (0..self.base.len().div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                let mut images = vec![Point::zeros(); order];
                let end = ((c + 1) * CHUNK).min(self.base.len());
                for i in c * CHUNK..end {
                    self.symmetry.images(&self.base[i], &mut images);
                    visit(&mut acc, i, self.weights[i], &images);
                }
                acc
            })
            .collect();
        pairwise(partials, &combine).unwrap_or_else(init)
    }

    /// Integrates `f` over the unit octahedron.
    pub fn integrate<F>(&self, f: F) -> Result<IntegralResult>
    where
        F: Fn(&Point) -> f64 + Sync,
    {
        let moments = self.moments(&f)?;
        let error_estimate = match (self.method, &self.coarse) {
            (QuadratureMethod::MonteCarlo, _) => moments.standard_error(self.groups()),
            (QuadratureMethod::ProductGauss, Some(coarse)) => {
                (moments.sum - coarse.moments(&f)?.sum).abs()
            }
            (QuadratureMethod::ProductGauss, None) => 0.0,
        };
        Ok(IntegralResult {
            value: moments.sum,
            error_estimate,
        })
    }

    fn moments<F>(&self, f: &F) -> Result<Moments>
    where
        F: Fn(&Point) -> f64 + Sync,
    {
        let groups = self.groups() as f64;
        let order = self.symmetry.order();
        let acc = self.fold(
            || Ok(Moments::default()),
            |acc: &mut Result<Moments>, i, w, images| {
                let Ok(m) = acc else { return };
                let mut group = 0.0;
                for (s, x) in images.iter().enumerate() {
                    let v = f(x);
                    if !v.is_finite() {
                        *acc = Err(Error::NonFiniteIntegrand { node: i * order + s });
                        return;
                    }
                    group += v;
                }
                m.sum += w * group;
                m.sum_sq += (groups * w * group).powi(2);
            },
            |a, b| match (a, b) {
                (Ok(a), Ok(b)) => Ok(Moments {
                    sum: a.sum + b.sum,
                    sum_sq: a.sum_sq + b.sum_sq,
                }),
                (Err(e), _) | (_, Err(e)) => Err(e),
            },
        );
        acc
    }
}

/// Running first and second moments of per-orbit estimates.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn standard_error(&self, groups: usize) -> f64 {
        mc_standard_error(self.sum, self.sum_sq, groups)
    }
}

/// Standard error of the mean from `sum = mean` of per-orbit estimates and
/// `sum_sq = Σ X_i^2`.
pub(crate) fn mc_standard_error(mean: f64, sum_sq: f64, groups: usize) -> f64 {
    let n = groups as f64;
    if groups < 2 {
        return 0.0;
    }
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    (var / n).sqrt()
}

pub(crate) fn pairwise<A>(mut items: Vec<A>, combine: &impl Fn(A, A) -> A) -> Option<A> {
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

/// Uniform point in the positive unit simplex via normalized exponentials.
fn simplex_point(rng: &mut impl Rng) -> [f64; 3] {
    let mut e = [0.0f64; 4];
    for x in &mut e {
        // 1 - u lies in (0, 1], keeping the logarithm finite
        *x = -(1.0 - rng.random::<f64>()).ln();
    }
    let total: f64 = e.iter().sum();
    [e[0] / total, e[1] / total, e[2] / total]
}

/// Integrates `f` over the unit octahedron with the given settings.
pub fn integrate_volume<F>(f: F, spec: &QuadratureSpec) -> Result<IntegralResult>
where
    F: Fn(&Point) -> f64 + Sync,
{
    VolumeRule::new(spec)?.integrate(f)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = crate::basis::legendre_with_derivative(n, t);
            dp = d;
            let step = p / d;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = crate::basis::legendre_with_derivative(n, t);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        nodes[i] = -t;
        nodes[n - 1 - i] = t;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre settings for the separation coordinate.
///
/// With `panels > 1` the interval is split geometrically toward its lower
/// end, panel boundaries at `lo + (hi - lo) * grading^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZQuadratureSpec {
    pub order: usize,
    pub panels: usize,
    pub grading: f64,
}

impl Default for ZQuadratureSpec {
    fn default() -> Self {
        Self {
            order: 16,
            panels: 1,
            grading: 0.25,
        }
    }
}

impl ZQuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::invalid("z_quadrature.order", "must be at least 1"));
        }
        if self.panels == 0 {
            return Err(Error::invalid("z_quadrature.panels", "must be at least 1"));
        }
        if !(self.grading > 0.0 && self.grading < 1.0) {
            return Err(Error::invalid("z_quadrature.grading", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Nodes and weights for integrals over a separation interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ZRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ZRule {
    pub fn new(range: (f64, f64), spec: &ZQuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let (lo, hi) = range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid("z_range", format!("empty range [{lo}, {hi}]")));
        }
        let mut bounds = vec![lo];
        for k in (0..spec.panels - 1).rev() {
            bounds.push(lo + (hi - lo) * spec.grading.powi(k as i32 + 1));
        }
        bounds.push(hi);
        let (t, w) = gauss_legendre(spec.order);
        let mut nodes = Vec::with_capacity(t.len() * spec.panels);
        let mut weights = Vec::with_capacity(t.len() * spec.panels);
        for pair in bounds.windows(2) {
            let half = 0.5 * (pair[1] - pair[0]);
            let mid = 0.5 * (pair[1] + pair[0]);
            for (t, w) in t.iter().zip(&w) {
                nodes.push(mid + half * t);
                weights.push(half * w);
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }
}

/// Integrates `f` over a separation interval inside `[0, 2)`. The error
/// estimate compares against the same panels at half the order.
pub fn integrate_z(
    f: impl Fn(f64) -> f64,
    range: (f64, f64),
    spec: &ZQuadratureSpec,
) -> Result<IntegralResult> {
    if range.0 < 0.0 || range.1 >= 2.0 {
        return Err(Error::invalid(
            "z_range",
            format!("[{}, {}] not inside [0, 2)", range.0, range.1),
        ));
    }
    let fine = ZRule::new(range, spec)?;
    let coarse = ZRule::new(
        range,
        &ZQuadratureSpec {
            order: spec.order.div_ceil(2),
            ..*spec
        },
    )?;
    let value = fine.integrate(&f);
    Ok(IntegralResult {
        value,
        error_estimate: (value - coarse.integrate(&f)).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mc(points: usize, seed: u64) -> QuadratureSpec {
        QuadratureSpec {
            method: QuadratureMethod::MonteCarlo,
            points,
            seed,
            delta: 1e-3,
        }
    }

    #[test]
    fn coulomb_kernel() {
        assert_eq!(coulomb(1.0, 0.0), 1.0);
        assert_relative_eq!(coulomb(0.0, 1e-3), 1000.0, max_relative = 1e-12);
        let (r, d) = (2.0, 0.01);
        let rel = (coulomb(r, d) - 1.0 / r).abs() * r;
        assert!(rel <= 0.5 * (d / r).powi(2));
    }

    #[test]
    fn gauss_legendre_matches_known_rules() {
        let (t, w) = gauss_legendre(2);
        assert_relative_eq!(t[1], 1.0 / 3f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(w[0], 1.0, max_relative = 1e-14);
        let (t, w) = gauss_legendre(5);
        assert_eq!(t[2], 0.0);
        assert_relative_eq!(w[2], 128.0 / 225.0, max_relative = 1e-14);
        for n in 1..40 {
            let (t, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-13);
            assert!(t.windows(2).all(|p| p[0] < p[1]));
            // exact for degree 2n-1
            let deg = 2 * n - 2;
            let q: f64 = t.iter().zip(&w).map(|(t, w)| w * t.powi(deg as i32)).sum();
            assert_relative_eq!(q, 2.0 / (deg as f64 + 1.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn octahedron_volume() {
        let r = integrate_volume(|_| 1.0, &mc(200_000, 1)).unwrap();
        assert_relative_eq!(r.value, 4.0 / 3.0, max_relative = 1e-12);
        let g = QuadratureSpec {
            method: QuadratureMethod::ProductGauss,
            points: 6,
            ..mc(1, 1)
        };
        let r = integrate_volume(|_| 1.0, &g).unwrap();
        assert_relative_eq!(r.value, 4.0 / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn product_gauss_is_exact_for_polynomials() {
        // ∫ x1^2 over the unit octahedron = 2/15
        let g = QuadratureSpec {
            method: QuadratureMethod::ProductGauss,
            points: 6,
            ..mc(1, 1)
        };
        let r = integrate_volume(|x| x[0] * x[0], &g).unwrap();
        assert_relative_eq!(r.value, 2.0 / 15.0, max_relative = 1e-13);
        assert!(r.error_estimate < 1e-12);
    }

    #[test]
    fn odd_integrand_vanishes() {
        let r = integrate_volume(|x| x[0], &mc(20_000, 3)).unwrap();
        assert!(r.value.abs() <= 3.0 * r.error_estimate + 1e-15);
    }

    #[test]
    fn monte_carlo_smooth_integrand_within_error() {
        // ∫ exp(-|x|^2) has no closed form on the octahedron; compare a
        // coarse MC run against a fine product Gauss reference.
        let f = |x: &Point| (-2.0 * x.norm_squared()).exp() * (1.0 + x[0] + 0.5 * x[1] * x[2]);
        let reference = integrate_volume(
            f,
            &QuadratureSpec {
                method: QuadratureMethod::ProductGauss,
                points: 24,
                ..mc(1, 1)
            },
        )
        .unwrap();
        let r = integrate_volume(f, &mc(50_000, 9)).unwrap();
        assert!((r.value - reference.value).abs() < 4.0 * r.error_estimate);
    }

    #[test]
    fn nodes_are_inside_the_cage() {
        let rule = VolumeRule::new(&mc(4_800, 5)).unwrap();
        let inside = rule.fold(
            || true,
            |ok, _, _, images| *ok &= images.iter().all(|x| crate::geometry::contains(x, 1.0)),
            |a, b| a && b,
        );
        assert!(inside);
    }

    #[test]
    fn non_finite_integrand_reported() {
        let err = integrate_volume(|x| 1.0 / (x[0] - x[0]), &mc(480, 1)).unwrap_err();
        assert!(matches!(err, Error::NonFiniteIntegrand { .. }));
    }

    #[test]
    fn rule_generation_is_deterministic() {
        let a = VolumeRule::new(&mc(30_000, 42)).unwrap();
        let b = VolumeRule::new(&mc(30_000, 42)).unwrap();
        let c = VolumeRule::new(&mc(30_000, 43)).unwrap();
        assert_eq!(a.base, b.base);
        assert_ne!(a.base, c.base);
    }

    #[test]
    fn z_rule_integrates_polynomials() {
        let spec = ZQuadratureSpec {
            order: 1,
            ..Default::default()
        };
        let r = integrate_z(|_| 1.0, (0.0, 1.9), &spec).unwrap();
        assert_relative_eq!(r.value, 1.9, max_relative = 1e-15);
        let spec = ZQuadratureSpec {
            order: 2,
            ..Default::default()
        };
        let t2 = |z: f64| (2.0 * z / 1.9 - 1.0).powi(2);
        let r = integrate_z(t2, (0.0, 1.9), &spec).unwrap();
        assert_relative_eq!(r.value, 1.9 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn graded_panels_cover_the_interval() {
        let spec = ZQuadratureSpec {
            order: 6,
            panels: 5,
            grading: 0.2,
        };
        let rule = ZRule::new((0.0, 1.9), &spec).unwrap();
        assert_eq!(rule.nodes.len(), 30);
        assert_relative_eq!(rule.weights.iter().sum::<f64>(), 1.9, max_relative = 1e-14);
        assert!(rule.nodes.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn z_range_checked() {
        let spec = ZQuadratureSpec::default();
        assert!(integrate_z(|_| 1.0, (1.0, 1.0), &spec).is_err());
        assert!(integrate_z(|_| 1.0, (0.0, 2.0), &spec).is_err());
        assert!(integrate_z(|_| 1.0, (-0.1, 1.0), &spec).is_err());
    }

    #[test]
    fn softened_inverse_separation_against_tenfold_order() {
        let delta = 1e-3;
        let f = |z: f64| 1.0 / (z + delta);
        let spec = ZQuadratureSpec {
            order: 400,
            ..Default::default()
        };
        let reference = ZQuadratureSpec {
            order: 4000,
            ..Default::default()
        };
        let a = integrate_z(f, (0.0, 1.9), &spec).unwrap();
        let b = integrate_z(f, (0.0, 1.9), &reference).unwrap();
        assert_relative_eq!(a.value, b.value, max_relative = 1e-6);
        assert_relative_eq!(b.value, (1.9f64 / delta + 1.0).ln(), max_relative = 1e-10);
    }
}
