//! Constructors for spin-pair, apparatus and Schmidt-form states.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::tensor::{c64, CMatrix, CVector, Ket, Operator, SpaceSignature, C64, NORM_TOL};

/// Label of the apparatus (pointer) coordinate.
pub const POINTER: &str = "y";
/// Label of the first spin.
pub const SPIN_A: &str = "A";
/// Label of the second spin.
pub const SPIN_B: &str = "B";

/// Uniform one-dimensional grid `origin + j·spacing`, `j = 0..points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct PointerGrid {
    points: usize,
    spacing: f64,
    origin: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridRepr {
    points: usize,
    spacing: f64,
    #[serde(default)]
    origin: f64,
}

impl TryFrom<GridRepr> for PointerGrid {
    type Error = LabError;
    fn try_from(g: GridRepr) -> Result<Self> {
        PointerGrid::new(g.points, g.spacing, g.origin)
    }
}

impl From<PointerGrid> for GridRepr {
    fn from(g: PointerGrid) -> Self {
        GridRepr {
            points: g.points,
            spacing: g.spacing,
            origin: g.origin,
        }
    }
}

impl PointerGrid {
    pub fn new(points: usize, spacing: f64, origin: f64) -> Result<Self> {
        if points < 2 {
            return Err(LabError::GridTooSmall {
                min: 2,
                found: points,
            });
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(LabError::InvalidGrid(format!(
                "spacing must be positive and finite, got {spacing}"
            )));
        }
        if !origin.is_finite() {
            return Err(LabError::InvalidGrid(format!("origin {origin} not finite")));
        }
        Ok(Self {
            points,
            spacing,
            origin,
        })
    }

    /// Grid symmetric about zero.
    pub fn centered(points: usize, spacing: f64) -> Result<Self> {
        Self::new(points, spacing, -0.5 * (points as f64 - 1.0) * spacing)
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn coord(&self, j: usize) -> f64 {
        self.origin + j as f64 * self.spacing
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.coord(j)).collect()
    }

    pub fn midpoint(&self) -> f64 {
        self.origin + 0.5 * (self.points as f64 - 1.0) * self.spacing
    }

    pub fn signature(&self, label: &str) -> SpaceSignature {
        SpaceSignature::single(label, self.points).expect("points >= 2")
    }
}

/// Discrete Gaussian pointer centered mid-grid with width `8·Δy`, unit
/// Euclidean norm.
pub fn default_pointer_wave(grid: &PointerGrid) -> Vec<C64> {
    gaussian_pointer_wave(grid, grid.midpoint(), 8.0 * grid.spacing())
}

/// Gaussian amplitude `exp(−(y − center)²/(4w²))` renormalized on the grid,
/// so that `|φ|²` has standard deviation `w` in the continuum limit.
pub fn gaussian_pointer_wave(grid: &PointerGrid, center: f64, width: f64) -> Vec<C64> {
    let raw: Vec<f64> = grid
        .coords()
        .iter()
        .map(|y| (-(y - center).powi(2) / (4.0 * width * width)).exp())
        .collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.iter().map(|v| c64(v / norm, 0.0)).collect()
}

/// Orthonormal eigenbasis of `σ_θ = cos θ·σ_z + sin θ·σ_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinBasis {
    pub theta: f64,
    pub plus: [C64; 2],
    pub minus: [C64; 2],
}

/// Spin basis along angle `theta` in the x–z plane.
///
/// The coefficient of `|+⟩` in `|+_θ⟩` is kept real and non-negative, and
/// `|−_θ⟩` is the rotation of `|−⟩` by the same angle.
pub fn spin_basis(theta: f64) -> SpinBasis {
    let (mut s, mut c) = (0.5 * theta).sin_cos();
    if c < 0.0 || (c == 0.0 && s < 0.0) {
        s = -s;
        c = -c;
    }
    SpinBasis {
        theta,
        plus: [c64(c, 0.0), c64(s, 0.0)],
        minus: [c64(-s, 0.0), c64(c, 0.0)],
    }
}

impl SpinBasis {
    /// `|+_θ⟩` for `sign > 0`, `|−_θ⟩` otherwise.
    pub fn ket(&self, sign: i8) -> [C64; 2] {
        if sign > 0 {
            self.plus
        } else {
            self.minus
        }
    }

    /// `σ_θ` as an operator on the qubit `label`.
    pub fn observable(&self, label: &str) -> Operator {
        spin_observable(self.theta, label)
    }
}

/// `σ_θ = cos θ·σ_z + sin θ·σ_x` on the qubit `label`.
pub fn spin_observable(theta: f64, label: &str) -> Operator {
    let (s, c) = theta.sin_cos();
    Operator::hermitian(
        CMatrix::from_row_slice(2, 2, &[c64(c, 0.0), c64(s, 0.0), c64(s, 0.0), c64(-c, 0.0)]),
        SpaceSignature::single(label, 2).expect("valid label"),
    )
    .expect("real symmetric")
}

fn outer2(a: &[C64; 2], b: &[C64; 2]) -> [C64; 4] {
    [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
}

/// Two-spin state `(|+_α⟩|−_β⟩ − |−_α⟩|+_β⟩)/√2` on `(A, B)`.
pub fn spin_pair(alpha: f64, beta: f64) -> [C64; 4] {
    let (ba, bb) = (spin_basis(alpha), spin_basis(beta));
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let first = outer2(&ba.plus, &bb.minus);
    let second = outer2(&ba.minus, &bb.plus);
    let mut out = [c64(0.0, 0.0); 4];
    for k in 0..4 {
        out[k] = (first[k] - second[k]) * r;
    }
    out
}

/// Pointer wave times the spin pair, on the signature `(y, A, B)`.
pub fn singlet_with_apparatus(
    grid: &PointerGrid,
    pointer_wave: &[C64],
    alpha: f64,
    beta: f64,
) -> Result<Ket> {
    let pointer = Ket::normalized(
        CVector::from_column_slice(pointer_wave),
        grid.signature(POINTER),
    )?;
    let spins = Ket::from_slice(
        &spin_pair(alpha, beta),
        SpaceSignature::new([(SPIN_A, 2), (SPIN_B, 2)])?,
    )?;
    pointer.tensor(&spins)
}

/// Diagonal Schmidt-form state `Σ c_i |b′_i⟩|a_i⟩` on `b_prime ⊗ a`.
pub fn schmidt_state(coeffs: &[C64], b_prime: &SpaceSignature, a: &SpaceSignature) -> Result<Ket> {
    let (db, da) = (b_prime.dim(), a.dim());
    let limit = db.min(da);
    if coeffs.len() > limit {
        return Err(LabError::DimensionMismatch {
            expected: limit,
            found: coeffs.len(),
        });
    }
    let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(LabError::NotNormalized(norm));
    }
    let mut amps = CVector::zeros(db * da);
    for (i, &c) in coeffs.iter().enumerate() {
        amps[i * da + i] = c;
    }
    Ket::new(amps, b_prime.concat(a)?)
}

/// Permutation operator exchanging two equal-dimension subsystems.
pub fn swap_operator(signature: &SpaceSignature, first: &str, second: &str) -> Result<Operator> {
    let (p, q) = (signature.position(first)?, signature.position(second)?);
    if p == q {
        return Err(LabError::DuplicateLabel(first.to_string()));
    }
    let dims = signature.dims();
    if dims[p] != dims[q] {
        return Err(LabError::DimensionMismatch {
            expected: dims[p],
            found: dims[q],
        });
    }
    let d = signature.dim();
    let mut m = CMatrix::zeros(d, d);
    let mut digits = vec![0usize; dims.len()];
    for i in 0..d {
        let mut rem = i;
        for k in (0..dims.len()).rev() {
            digits[k] = rem % dims[k];
            rem /= dims[k];
        }
        digits.swap(p, q);
        let j = digits
            .iter()
            .zip(&dims)
            .fold(0, |acc, (&dig, &dim)| acc * dim + dig);
        m[(j, i)] = c64(1.0, 0.0);
    }
    Operator::hermitian(m, signature.clone())?.checked_unitary()
}

fn exchange_project(ket: &Ket, labels: (&str, &str), sign: f64) -> Result<Ket> {
    let swap = swap_operator(ket.signature(), labels.0, labels.1)?;
    let swapped = swap.apply(ket)?;
    let projected = ket.amplitudes() + swapped.amplitudes() * c64(sign, 0.0);
    let norm = projected.norm();
    if norm < 1e-10 * ket.norm().max(f64::MIN_POSITIVE) {
        return Err(LabError::DegenerateProjection);
    }
    Ket::new(projected.unscale(norm), ket.signature().clone())
}

/// Normalized image of `(1 + SWAP)` on the labeled pair.
pub fn symmetrize(ket: &Ket, labels: (&str, &str)) -> Result<Ket> {
    exchange_project(ket, labels, 1.0)
}

/// Normalized image of `(1 − SWAP)` on the labeled pair.
pub fn antisymmetrize(ket: &Ket, labels: (&str, &str)) -> Result<Ket> {
    exchange_project(ket, labels, -1.0)
}
