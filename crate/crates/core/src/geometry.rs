//! Cage geometry, charge placement and the scale factors that connect the
//! dimensionless Hamiltonian to physical units.
//!
//! Lengths are measured in units of the half-diagonal `a`, so internally the
//! cage is the unit L1 ball. The physical size `a` (in Angstrom) enters only
//! through [`kinetic_prefactor`] and [`energy_unit_ev`].

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Vector3<f64>;

/// Bohr radius in Angstrom (CODATA 2018).
pub const BOHR_RADIUS_ANGSTROM: f64 = 0.529_177_210_903;

/// e^2 / (4 pi eps0) in eV * Angstrom (CODATA 2018).
pub const COULOMB_EV_ANGSTROM: f64 = 14.399_645_478_4;

/// Electron to deuteron mass ratio (CODATA 2018).
pub const ELECTRON_DEUTERON_MASS_RATIO: f64 = 1.0 / 3_670.482_967_88;

/// Index of a cage vertex, `k` in `{±1, ±2, ±3}`.
///
/// Vertex `k` sits at `sign(k) * a * e_|k|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vertex(i8);

impl Vertex {
    /// All six vertices in the order `k = -3, -2, -1, +1, +2, +3`.
    pub const ALL: [Vertex; 6] = [
        Vertex(-3),
        Vertex(-2),
        Vertex(-1),
        Vertex(1),
        Vertex(2),
        Vertex(3),
    ];

    pub fn new(k: i8) -> Result<Self> {
        if k == 0 || k.abs() > 3 {
            return Err(Error::invalid("vertex", format!("index {k} not in ±1..±3")));
        }
        Ok(Vertex(k))
    }

    pub fn index(self) -> i8 {
        self.0
    }

    /// Axis number `|k| - 1` (0 for x, 1 for y, 2 for z).
    pub fn axis(self) -> usize {
        (self.0.unsigned_abs() - 1) as usize
    }

    pub fn sign(self) -> f64 {
        f64::from(self.0.signum())
    }

    pub fn opposite(self) -> Vertex {
        Vertex(-self.0)
    }

    /// Position for a cage of half-diagonal `a`.
    pub fn position(self, a: f64) -> Point {
        let mut p = Point::zeros();
        p[self.axis()] = self.sign() * a;
        p
    }

    /// Unit vector pointing from the vertex toward the cage center.
    pub fn inward(self) -> Point {
        let mut e = Point::zeros();
        e[self.axis()] = -self.sign();
        e
    }
}

/// The regular octahedron `|x1| + |x2| + |x3| <= a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Octahedron {
    half_diagonal: f64,
}

impl Octahedron {
    pub fn new(half_diagonal: f64) -> Result<Self> {
        if !(half_diagonal > 0.0 && half_diagonal.is_finite()) {
            return Err(Error::invalid("a", "half-diagonal must be positive"));
        }
        Ok(Self { half_diagonal })
    }

    /// The cage in internal units, `a = 1`.
    pub fn unit() -> Self {
        Self { half_diagonal: 1.0 }
    }

    pub fn half_diagonal(&self) -> f64 {
        self.half_diagonal
    }

    pub fn volume(&self) -> f64 {
        4.0 * self.half_diagonal.powi(3) / 3.0
    }

    pub fn vertices(&self) -> [Point; 6] {
        Vertex::ALL.map(|v| v.position(self.half_diagonal))
    }

    pub fn contains(&self, x: &Point) -> bool {
        contains(x, self.half_diagonal)
    }
}

/// Vertices `±a e_i` in the order `k = -3, -2, -1, +1, +2, +3`.
pub fn vertices(a: f64) -> Result<[Point; 6]> {
    Ok(Octahedron::new(a)?.vertices())
}

/// Membership in the closed L1 ball of radius `a`.
pub fn contains(x: &Point, a: f64) -> bool {
    x.iter().map(|c| c.abs()).sum::<f64>() <= a
}

/// Two charges placed symmetrically on the z axis, `y1 = (0,0,z/2)` and
/// `y2 = (0,0,-z/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargePair {
    separation: f64,
}

impl ChargePair {
    /// `z` must lie in `[0, 2)` so that both charges are strictly inside the
    /// unit cage.
    pub fn new(separation: f64) -> Result<Self> {
        if !(0.0..2.0).contains(&separation) {
            return Err(Error::invalid(
                "separation",
                format!("{separation} outside [0, 2)"),
            ));
        }
        Ok(Self { separation })
    }

    /// Static placement at `(0, 0, ±l)`.
    pub fn from_half_separation(l: f64) -> Result<Self> {
        Self::new(2.0 * l)
    }

    pub fn separation(&self) -> f64 {
        self.separation
    }

    pub fn half_separation(&self) -> f64 {
        0.5 * self.separation
    }

    pub fn position(&self, charge: Charge) -> Point {
        charge_position(charge, self.separation)
    }
}

/// Which of the two positive charges: `Upper` sits at `+z/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Charge {
    Upper,
    Lower,
}

impl Charge {
    pub const BOTH: [Charge; 2] = [Charge::Upper, Charge::Lower];

    /// `+1` for the upper charge, `-1` for the lower one.
    pub fn sign(self) -> f64 {
        match self {
            Charge::Upper => 1.0,
            Charge::Lower => -1.0,
        }
    }

    /// One-based label `j` used in output headers.
    pub fn label(self) -> usize {
        match self {
            Charge::Upper => 1,
            Charge::Lower => 2,
        }
    }
}

pub(crate) fn charge_position(charge: Charge, separation: f64) -> Point {
    Point::new(0.0, 0.0, 0.5 * charge.sign() * separation)
}

fn check_angstrom(a_angstrom: f64) -> Result<()> {
    if a_angstrom > 0.0 && a_angstrom.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("a_angstrom", "must be positive"))
    }
}

/// Physical size of one dimensionless energy unit, `e^2 / (4 pi eps0 a)`, in eV.
pub fn energy_unit_ev(a_angstrom: f64) -> Result<f64> {
    check_angstrom(a_angstrom)?;
    Ok(COULOMB_EV_ANGSTROM / a_angstrom)
}

/// Electron kinetic prefactor `hbar^2 / (2 m_e a) * 4 pi eps0 / e^2`, which
/// equals half the Bohr radius over `a`.
pub fn kinetic_prefactor(a_angstrom: f64) -> Result<f64> {
    check_angstrom(a_angstrom)?;
    Ok(0.5 * BOHR_RADIUS_ANGSTROM / a_angstrom)
}

/// Converts an energy difference in dimensionless units to eV.
pub fn units_to_ev(units: f64, a_angstrom: f64) -> Result<f64> {
    Ok(units * energy_unit_ev(a_angstrom)?)
}
