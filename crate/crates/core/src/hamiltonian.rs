//! Hamiltonian builders: local sums, von Neumann pointer couplings, the
//! exchange-symmetric pointer coupling and the 1D Schrödinger Hamiltonian.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::state::{PointerGrid, POINTER};
use crate::tensor::{c64, embed_labeled, embed_on, kron, CMatrix, Operator, SpaceSignature};

/// Label of the position coordinate used by [`bohm_hamiltonian_1d`].
pub const POSITION: &str = "x";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Periodic,
    HardWall,
}

/// How the pointer derivative `∂/∂y` enters a coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hermitization {
    /// `∂/∂y → i·p_y` with the factor `i` absorbed into λ; Hermitian.
    #[default]
    MomentumForm,
    /// The bare antisymmetric difference operator; anti-Hermitian, so it
    /// cannot generate unitary evolution.
    RawDerivative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    pub lambda: f64,
    #[serde(default)]
    pub hermitization: Hermitization,
    #[serde(default)]
    pub boundary: Boundary,
}

impl CouplingConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(LabError::InvalidArgument(format!(
                "coupling strength must be finite, got {lambda}"
            )));
        }
        Ok(Self {
            lambda,
            hermitization: Hermitization::MomentumForm,
            boundary: Boundary::Periodic,
        })
    }

    pub fn with_hermitization(mut self, h: Hermitization) -> Self {
        self.hermitization = h;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
        }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite() && mass > 0.0 && mass.is_finite()) {
            return Err(LabError::InvalidArgument(format!(
                "hbar and mass must be positive, got hbar = {hbar}, m = {mass}"
            )));
        }
        Ok(Self { hbar, mass })
    }

    /// `ℏ²/2m`.
    pub fn kinetic_prefactor(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.mass)
    }
}

fn check_min_points(grid: &PointerGrid, min: usize) -> Result<()> {
    if grid.points() < min {
        return Err(LabError::GridTooSmall {
            min,
            found: grid.points(),
        });
    }
    Ok(())
}

fn check_disjoint(a: &SpaceSignature, b: &SpaceSignature) -> Result<()> {
    match a.labels().into_iter().find(|l| b.contains(l)) {
        Some(label) => Err(LabError::OverlappingSupports(label.to_string())),
        None => Ok(()),
    }
}

/// Three-point second-difference matrix `L` on the grid.
///
/// Hard-wall treats the grid as the interior points of a box whose walls
/// sit one spacing beyond either end.
pub fn laplacian(grid: &PointerGrid, boundary: Boundary) -> Result<CMatrix> {
    check_min_points(grid, 3)?;
    let n = grid.points();
    let h2 = grid.spacing() * grid.spacing();
    let mut m = CMatrix::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = c64(-2.0 / h2, 0.0);
        if j + 1 < n {
            m[(j, j + 1)] = c64(1.0 / h2, 0.0);
            m[(j + 1, j)] = c64(1.0 / h2, 0.0);
        }
    }
    if boundary == Boundary::Periodic {
        m[(0, n - 1)] = c64(1.0 / h2, 0.0);
        m[(n - 1, 0)] = c64(1.0 / h2, 0.0);
    }
    Ok(m)
}

/// Central-difference derivative matrix `D` (real antisymmetric).
pub fn central_difference(grid: &PointerGrid, boundary: Boundary) -> Result<CMatrix> {
    check_min_points(grid, 3)?;
    let n = grid.points();
    let w = 0.5 / grid.spacing();
    let mut m = CMatrix::zeros(n, n);
    for j in 0..n - 1 {
        m[(j, j + 1)] = c64(w, 0.0);
        m[(j + 1, j)] = c64(-w, 0.0);
    }
    if boundary == Boundary::Periodic {
        m[(n - 1, 0)] = c64(w, 0.0);
        m[(0, n - 1)] = c64(-w, 0.0);
    }
    Ok(m)
}

/// Hermitian pointer momentum `p_y = −i·D` with periodic boundary.
pub fn pointer_momentum(grid: &PointerGrid) -> Result<Operator> {
    pointer_momentum_with(grid, Boundary::Periodic)
}

pub fn pointer_momentum_with(grid: &PointerGrid, boundary: Boundary) -> Result<Operator> {
    let d = central_difference(grid, boundary)?;
    Operator::hermitian(d * c64(0.0, -1.0), grid.signature(POINTER))
}

/// `H_A ⊗ 1 + H_DB ⊗ 1` on `signature`, each term placed by its own labels.
pub fn local_sum(h_a: &Operator, h_db: &Operator, signature: &SpaceSignature) -> Result<Operator> {
    h_a.require_hermitian()?;
    h_db.require_hermitian()?;
    check_disjoint(h_a.signature(), h_db.signature())?;
    let a = embed_labeled(h_a, signature)?;
    let b = embed_labeled(h_db, signature)?;
    a.add(&b)
}

fn pointer_factor(grid: &PointerGrid, cfg: &CouplingConfig) -> Result<Operator> {
    match cfg.hermitization {
        Hermitization::MomentumForm => pointer_momentum_with(grid, cfg.boundary),
        Hermitization::RawDerivative => Operator::new(
            central_difference(grid, cfg.boundary)?,
            grid.signature(POINTER),
        ),
    }
}

fn check_pointer(grid: &PointerGrid, signature: &SpaceSignature) -> Result<()> {
    let dim = signature.dim_of(POINTER)?;
    if dim != grid.points() {
        return Err(LabError::DimensionMismatch {
            expected: dim,
            found: grid.points(),
        });
    }
    Ok(())
}

/// Single-wing measurement coupling `λ·O ⊗ p_y`, identity elsewhere.
///
/// `observable` acts on the subsystems named by its own signature; the
/// pointer is the subsystem labeled `y`.
pub fn von_neumann_coupling(
    observable: &Operator,
    grid: &PointerGrid,
    cfg: &CouplingConfig,
    signature: &SpaceSignature,
) -> Result<Operator> {
    observable.require_hermitian()?;
    check_pointer(grid, signature)?;
    let p = pointer_factor(grid, cfg)?;
    let local = kron(&[observable, &p])?;
    let mut labels = observable.signature().labels();
    labels.push(POINTER);
    let op = embed_on(&local, signature, &labels)?;
    finish_coupling(op, cfg)
}

/// Exchange-symmetric coupling `λ·(O_A ⊗ 1 + 1 ⊗ O_B) ⊗ p_y`.
pub fn symmetrized_coupling(
    o_a: &Operator,
    o_b: &Operator,
    grid: &PointerGrid,
    cfg: &CouplingConfig,
    signature: &SpaceSignature,
) -> Result<Operator> {
    o_a.require_hermitian()?;
    o_b.require_hermitian()?;
    if o_a.dim() != o_b.dim() {
        return Err(LabError::DimensionMismatch {
            expected: o_a.dim(),
            found: o_b.dim(),
        });
    }
    check_pointer(grid, signature)?;
    let pair = o_a.signature().concat(o_b.signature())?;
    let sum = embed_labeled(o_a, &pair)?.add(&embed_labeled(o_b, &pair)?)?;
    let p = pointer_factor(grid, cfg)?;
    let local = kron(&[&sum, &p])?;
    let mut labels = pair.labels();
    labels.push(POINTER);
    let op = embed_on(&local, signature, &labels)?;
    finish_coupling(op, cfg)
}

fn finish_coupling(op: Operator, cfg: &CouplingConfig) -> Result<Operator> {
    Ok(op.scale(cfg.lambda))
}

/// Discretized `−(ℏ²/2m)∇² + V` on the grid, labeled `x`.
pub fn bohm_hamiltonian_1d(
    grid: &PointerGrid,
    potential: &[f64],
    consts: &PhysicalConstants,
    boundary: Boundary,
) -> Result<Operator> {
    check_min_points(grid, 3)?;
    if potential.len() != grid.points() {
        return Err(LabError::DimensionMismatch {
            expected: grid.points(),
            found: potential.len(),
        });
    }
    if let Some(v) = potential.iter().find(|v| !v.is_finite()) {
        return Err(LabError::InvalidArgument(format!(
            "non-finite potential value {v}"
        )));
    }
    let mut h = laplacian(grid, boundary)? * c64(-consts.kinetic_prefactor(), 0.0);
    for (j, v) in potential.iter().enumerate() {
        h[(j, j)] += c64(*v, 0.0);
    }
    Operator::hermitian(h, grid.signature(POSITION))
}
