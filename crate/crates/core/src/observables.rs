//! Quantities reported from solved spectra: filled-level energies along a
//! separation sweep, projected separation densities and collision tables.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{free_space_pair, static_offset, DynamicProblem, MatrixPair, StaticProblem};
use crate::config::{CageConfig, MoleculeDomain};
use crate::eigensolver::{solve, Spectrum};
use crate::error::{Error, Result};

/// Levels reported per sweep row.
pub const SWEEP_LEVELS: usize = 8;

/// Energy of `count` electrons: one in the lowest level, or `count / 2`
/// doubly occupied levels, plus the static offset `h0`.
pub fn filling_energy(eigs: &[f64], h0: f64, count: usize) -> Result<f64> {
    let invalid = Error::InvalidFilling {
        count,
        levels: eigs.len(),
    };
    match count {
        1 if !eigs.is_empty() => Ok(eigs[0] + h0),
        c if c >= 2 && c % 2 == 0 && c / 2 <= eigs.len() => {
            Ok(eigs[..c / 2].iter().map(|l| 2.0 * l).sum::<f64>() + h0)
        }
        _ => Err(invalid),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub l: f64,
    /// Lowest levels, at most [`SWEEP_LEVELS`].
    pub lambdas: Vec<f64>,
    pub h0: f64,
    pub e1: f64,
    pub e2: f64,
    /// Absent when fewer than eight levels exist.
    pub e16: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub config_hash: String,
}

impl SweepTable {
    /// Half-separation minimizing `energy` over the grid; ties go to the
    /// smaller `l`.
    pub fn argmin(&self, energy: impl Fn(&SweepRow) -> Option<f64>) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| energy(r).map(|e| (r.l, e)))
            .fold(None, |best: Option<(f64, f64)>, (l, e)| match best {
                Some((_, b)) if b <= e => best,
                _ => Some((l, e)),
            })
            .map(|(l, _)| l)
    }

    /// True when the minimum lies strictly inside the grid.
    pub fn has_interior_minimum(&self, energy: impl Fn(&SweepRow) -> Option<f64>) -> bool {
        match (self.argmin(&energy), self.rows.first(), self.rows.last()) {
            (Some(l), Some(first), Some(last)) => l > first.l && l < last.l,
            _ => false,
        }
    }
}

fn row(l: f64, eigs: &[f64], h0: f64) -> Result<SweepRow> {
    let lambdas: Vec<f64> = eigs.iter().take(SWEEP_LEVELS).copied().collect();
    Ok(SweepRow {
        l,
        h0,
        e1: filling_energy(eigs, h0, 1)?,
        e2: filling_energy(eigs, h0, 2)?,
        e16: filling_energy(eigs, h0, 16).ok(),
        lambdas,
    })
}

fn check_grid(grid: &[f64], z_max: f64) -> Result<()> {
    if let Some(&l) = grid.iter().find(|&&l| !(l > 0.0 && 2.0 * l <= z_max)) {
        return Err(Error::invalid("l_grid", format!("{l} outside (0, z_max / 2]")));
    }
    Ok(())
}

/// Solves `problem` at every grid point; rows keep grid order.
pub fn sweep_with(problem: &StaticProblem, grid: &[f64], threshold: f64) -> Result<SweepTable> {
    check_grid(grid, problem.z_max)?;
    let rows = grid
        .par_iter()
        .map(|&l| {
            let spectrum = solve(&problem.matrix(l)?, threshold)?;
            row(l, &spectrum.eigenvalues, static_offset(l, problem.z_eff)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        rows,
        config_hash: problem.config_hash.clone(),
    })
}

pub fn static_sweep(grid: &[f64], config: &CageConfig) -> Result<SweepTable> {
    sweep_with(&StaticProblem::new(config)?, grid, config.overlap_threshold)
}

/// The two charges alone: no vertex charges, charge orbitals only.
pub fn molecule_sweep(grid: &[f64], config: &CageConfig) -> Result<SweepTable> {
    match config.molecule.domain {
        MoleculeDomain::Octahedron => {
            let problem = StaticProblem::new(config)?.variant(0.0, false);
            sweep_with(&problem, grid, config.overlap_threshold)
        }
        MoleculeDomain::Free => {
            check_grid(grid, config.z_max)?;
            let rows = grid
                .iter()
                .map(|&l| {
                    let spectrum = solve(&free_space_pair(l, config)?, config.overlap_threshold)?;
                    row(l, &spectrum.eigenvalues, static_offset(l, 0.0)?)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepTable {
                rows,
                config_hash: config.hash(),
            })
        }
    }
}

/// First-order quadrature error of level `k`: `|c|ᵀ (ΔH + |λ| ΔS) |c|`.
pub fn level_error_estimate(pair: &MatrixPair, spectrum: &Spectrum, k: usize) -> Result<f64> {
    let c = spectrum.vector(k)?.abs();
    let lambda = spectrum.eigenvalues[k].abs();
    let m = &pair.h_err + &pair.s_err * lambda;
    Ok((c.transpose() * m * &c)[(0, 0)])
}

/// `|ψ_k(z)|²` on a grid of separations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedDensity {
    /// Zero-based level index.
    pub level: usize,
    pub z: Vec<f64>,
    pub values: Vec<f64>,
}

/// Evaluates projected densities, sharing the electron overlap at each
/// separation across levels.
pub struct DensityEvaluator<'a> {
    problem: &'a DynamicProblem,
    spectrum: &'a Spectrum,
}

impl<'a> DensityEvaluator<'a> {
    pub fn new(problem: &'a DynamicProblem, spectrum: &'a Spectrum) -> Result<Self> {
        let expected = 8 * problem.config.n_legendre;
        if spectrum.dim() != expected {
            return Err(Error::invalid(
                "spectrum",
                format!("dimension {} does not match basis {expected}", spectrum.dim()),
            ));
        }
        Ok(Self { problem, spectrum })
    }

    /// `Σ c_{nα} c_{mβ} P_n(z) P_m(z) S_αβ(z)` for each level.
    fn at(&self, z: f64, s: &DMatrix<f64>, levels: &[usize]) -> Result<Vec<f64>> {
        let n_leg = self.problem.config.n_legendre;
        let (p, _) = self.problem.legendre().eval_all(n_leg, z);
        levels
            .iter()
            .map(|&k| {
                let c = self.spectrum.vector(k)?;
                // φ_α(z) = Σ_n c_{nα} P_n(z)
                let phi = DVector::from_fn(8, |a, _| (0..n_leg).map(|n| c[n * 8 + a] * p[n]).sum());
                Ok((phi.transpose() * s * &phi)[(0, 0)])
            })
            .collect()
    }

    pub fn densities(&self, levels: &[usize], z_grid: &[f64]) -> Result<Vec<ProjectedDensity>> {
        for &k in levels {
            self.spectrum.vector(k)?;
        }
        if let Some(&z) = z_grid
            .iter()
            .find(|&&z| !(z >= 0.0 && z <= self.problem.config.z_max))
        {
            return Err(Error::invalid("z_grid", format!("{z} outside [0, z_max]")));
        }
        let columns = z_grid
            .iter()
            .map(|&z| self.at(z, &self.problem.electron_overlap(z)?, levels))
            .collect::<Result<Vec<_>>>()?;
        Ok(levels
            .iter()
            .enumerate()
            .map(|(i, &level)| ProjectedDensity {
                level,
                z: z_grid.to_vec(),
                values: columns.iter().map(|col| col[i]).collect(),
            })
            .collect())
    }

    /// `∫ |ψ_k|² dz` with the separation rule used in assembly.
    pub fn norm(&self, level: usize) -> Result<f64> {
        let rule = &self.problem.z_rule;
        let d = self.densities(&[level], &rule.nodes)?;
        Ok(d[0].values.iter().zip(&rule.weights).map(|(v, w)| v * w).sum())
    }
}

pub fn projected_density(
    problem: &DynamicProblem,
    spectrum: &Spectrum,
    level: usize,
    z_grid: &[f64],
) -> Result<ProjectedDensity> {
    Ok(DensityEvaluator::new(problem, spectrum)?
        .densities(&[level], z_grid)?
        .remove(0))
}

/// `n` evenly spaced separations covering `[0, z_max]`.
pub fn uniform_z_grid(z_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n)
            .map(|i| if i + 1 == n { z_max } else { z_max * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionRow {
    /// One-based level number, ascending in `lambda`.
    pub k: usize,
    pub lambda: f64,
    pub psi0_sq: f64,
}

/// Density at the collision separation for every retained level.
pub fn collision_table(problem: &DynamicProblem, spectrum: &Spectrum) -> Result<Vec<CollisionRow>> {
    let levels: Vec<usize> = (0..spectrum.retained).collect();
    let z0 = problem.config.collision_z0;
    let d = DensityEvaluator::new(problem, spectrum)?.densities(&levels, &[z0])?;
    Ok(d
        .iter()
        .map(|pd| CollisionRow {
            k: pd.level + 1,
            lambda: spectrum.eigenvalues[pd.level],
            psi0_sq: pd.values[0],
        })
        .collect())
}

/// Lowest level whose collision density reaches `fraction` of the largest.
pub fn first_collision_level(table: &[CollisionRow], fraction: f64) -> Option<&CollisionRow> {
    let max = table.iter().map(|r| r.psi0_sq).fold(f64::NEG_INFINITY, f64::max);
    table.iter().find(|r| r.psi0_sq >= fraction * max)
}

/// Gap between the first collision level and the ground level, in eV.
pub fn collision_gap_ev(table: &[CollisionRow], fraction: f64, energy_unit_ev: f64) -> Option<f64> {
    let ground = table.first()?;
    first_collision_level(table, fraction).map(|r| (r.lambda - ground.lambda) * energy_unit_ev)
}
