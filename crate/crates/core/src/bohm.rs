//! Amplitude/phase decomposition of grid wavefunctions and the quantum
//! potential `Q = s·(ℏ²/2m)·∇²R/R`, including the two-particle additivity
//! comparison against marginal-amplitude potentials.

use std::f64::consts::PI;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::hamiltonian::PhysicalConstants;
use crate::state::PointerGrid;
use crate::tensor::{c64, C64};

/// Points with `R` below this fraction of `max R` are nodes.
pub const NODE_THRESHOLD_REL: f64 = 1e-8;
/// Allowed deviation of `Σ|ψ|²·dV` from one.
pub const GRID_NORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldGrid {
    Line(PointerGrid),
    /// `(x₁, x₂)` with values stored row-major, `x₁` slowest.
    Plane(PointerGrid, PointerGrid),
}

impl FieldGrid {
    pub fn len(&self) -> usize {
        match self {
            FieldGrid::Line(g) => g.points(),
            FieldGrid::Plane(g1, g2) => g1.points() * g2.points(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        match self {
            FieldGrid::Line(g) => g.spacing(),
            FieldGrid::Plane(g1, g2) => g1.spacing() * g2.spacing(),
        }
    }
}

/// `ψ = R·e^{i(S/ℏ + φ₀)}` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    grid: FieldGrid,
    r: Vec<f64>,
    /// Action per point, `NaN` at nodes; absent for 2D fields.
    s: Option<Vec<f64>>,
    node_mask: Vec<bool>,
    /// Phase of the first non-node point, removed from `S`.
    anchor_phase: f64,
    hbar: f64,
}

impl WaveField {
    pub fn grid(&self) -> &FieldGrid {
        &self.grid
    }

    pub fn amplitude(&self) -> &[f64] {
        &self.r
    }

    pub fn action(&self) -> Option<&[f64]> {
        self.s.as_deref()
    }

    pub fn node_mask(&self) -> &[bool] {
        &self.node_mask
    }

    pub fn anchor_phase(&self) -> f64 {
        self.anchor_phase
    }

    /// `R·e^{i(S/ℏ + φ₀)}`, zero at nodes. `None` for magnitude-only fields.
    pub fn reconstruct(&self) -> Option<Vec<C64>> {
        let s = self.s.as_ref()?;
        Some(
            self.r
                .iter()
                .zip(s)
                .zip(&self.node_mask)
                .map(|((&r, &s), &node)| {
                    if node {
                        c64(0.0, 0.0)
                    } else {
                        C64::from_polar(r, s / self.hbar + self.anchor_phase)
                    }
                })
                .collect(),
        )
    }
}

fn check_values(psi: &[C64], grid: &FieldGrid) -> Result<Vec<f64>> {
    if psi.len() != grid.len() {
        return Err(LabError::DimensionMismatch {
            expected: grid.len(),
            found: psi.len(),
        });
    }
    if psi.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(LabError::Numerical("non-finite wavefunction value".into()));
    }
    let r: Vec<f64> = psi.iter().map(|z| z.norm()).collect();
    if r.iter().all(|&x| x == 0.0) {
        return Err(LabError::AllNodes);
    }
    let norm: f64 = r.iter().map(|x| x * x).sum::<f64>() * grid.cell_volume();
    if (norm - 1.0).abs() > GRID_NORM_TOL {
        return Err(LabError::NotNormalized(norm));
    }
    Ok(r)
}

fn nodes_of(r: &[f64]) -> Vec<bool> {
    let threshold = NODE_THRESHOLD_REL * r.iter().cloned().fold(0.0, f64::max);
    r.iter().map(|&x| x < threshold).collect()
}

/// Wrap an angle difference into `(−π, π]`.
fn wrap(d: f64) -> f64 {
    let w = d - 2.0 * PI * (d / (2.0 * PI)).round();
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Scale `ψ` so that `Σ|ψ|²·Δ = 1` on the grid.
pub fn normalize_on_grid(psi: &[C64], cell_volume: f64) -> Result<Vec<C64>> {
    let norm = (psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * cell_volume).sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(LabError::AllNodes);
    }
    Ok(psi.iter().map(|z| z / norm).collect())
}

/// Split a 1D wavefunction into `R = |ψ|` and the unwrapped action `S`.
pub fn decompose(psi: &[C64], grid: &PointerGrid, consts: &PhysicalConstants) -> Result<WaveField> {
    let field_grid = FieldGrid::Line(*grid);
    let r = check_values(psi, &field_grid)?;
    let node_mask = nodes_of(&r);
    let mut s = vec![f64::NAN; psi.len()];
    let mut anchor_phase = 0.0;
    let mut prev: Option<(f64, f64)> = None; // (raw arg, unwrapped phase)
    for (j, z) in psi.iter().enumerate() {
        if node_mask[j] {
            continue;
        }
        let raw = z.arg();
        let phase = match prev {
            None => {
                anchor_phase = raw;
                0.0
            }
            Some((prev_raw, prev_phase)) => prev_phase + wrap(raw - prev_raw),
        };
        s[j] = consts.hbar * phase;
        prev = Some((raw, phase));
    }
    Ok(WaveField {
        grid: field_grid,
        r,
        s: Some(s),
        node_mask,
        anchor_phase,
        hbar: consts.hbar,
    })
}

/// Magnitude-only decomposition of a two-coordinate wavefunction.
pub fn decompose_2d(
    psi: &[C64],
    g1: &PointerGrid,
    g2: &PointerGrid,
    consts: &PhysicalConstants,
) -> Result<WaveField> {
    let field_grid = FieldGrid::Plane(*g1, *g2);
    let r = check_values(psi, &field_grid)?;
    let node_mask = nodes_of(&r);
    Ok(WaveField {
        grid: field_grid,
        r,
        s: None,
        node_mask,
        anchor_phase: 0.0,
        hbar: consts.hbar,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// `Q = +(ℏ²/2m)∇²R/R`.
    #[default]
    Paper,
    /// `Q = −(ℏ²/2m)∇²R/R`.
    Standard,
}

impl SignConvention {
    pub fn value(self) -> f64 {
        match self {
            SignConvention::Paper => 1.0,
            SignConvention::Standard => -1.0,
        }
    }
}

/// Treatment of the second difference at the ends of each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeRule {
    /// `R = 0` one spacing beyond either end.
    HardWall,
    Periodic,
    /// Second-order one-sided stencil `(2R₀ − 5R₁ + 4R₂ − R₃)/Δ²`.
    #[default]
    OneSided,
}

impl EdgeRule {
    fn min_points(self) -> usize {
        match self {
            EdgeRule::OneSided => 4,
            _ => 3,
        }
    }
}

fn check_axis(grid: &PointerGrid, edge: EdgeRule) -> Result<()> {
    if grid.points() < edge.min_points() {
        return Err(LabError::GridTooSmall {
            min: edge.min_points(),
            found: grid.points(),
        });
    }
    Ok(())
}

fn second_difference(v: &[f64], spacing: f64, edge: EdgeRule) -> Vec<f64> {
    let n = v.len();
    let h2 = spacing * spacing;
    (0..n)
        .map(|j| {
            let interior = |l: f64, r: f64| (l - 2.0 * v[j] + r) / h2;
            if j > 0 && j + 1 < n {
                return interior(v[j - 1], v[j + 1]);
            }
            let at_start = j == 0;
            match edge {
                EdgeRule::HardWall if at_start => interior(0.0, v[1]),
                EdgeRule::HardWall => interior(v[n - 2], 0.0),
                EdgeRule::Periodic if at_start => interior(v[n - 1], v[1]),
                EdgeRule::Periodic => interior(v[n - 2], v[0]),
                EdgeRule::OneSided if at_start => {
                    (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2
                }
                EdgeRule::OneSided => {
                    (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / h2
                }
            }
        })
        .collect()
}

/// Discrete `∇²R` for the field, axis by axis.
fn laplacian_of(field: &WaveField, edge: EdgeRule) -> Result<Vec<f64>> {
    match field.grid {
        FieldGrid::Line(g) => {
            check_axis(&g, edge)?;
            Ok(second_difference(&field.r, g.spacing(), edge))
        }
        FieldGrid::Plane(g1, g2) => {
            check_axis(&g1, edge)?;
            check_axis(&g2, edge)?;
            let (n1, n2) = (g1.points(), g2.points());
            let mut out: Vec<f64> = field
                .r
                .par_chunks(n2)
                .flat_map_iter(|row| second_difference(row, g2.spacing(), edge))
                .collect();
            let columns: Vec<Vec<f64>> = (0..n2)
                .into_par_iter()
                .map(|j| {
                    let col: Vec<f64> = (0..n1).map(|i| field.r[i * n2 + j]).collect();
                    second_difference(&col, g1.spacing(), edge)
                })
                .collect();
            for (j, col) in columns.iter().enumerate() {
                for (i, d) in col.iter().enumerate() {
                    out[i * n2 + j] += d;
                }
            }
            Ok(out)
        }
    }
}

/// Quantum potential on a grid; masked entries hold `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    pub grid: FieldGrid,
    pub values: Vec<f64>,
    pub masked: Vec<bool>,
}

impl PotentialField {
    pub fn at(&self, index: usize) -> Result<f64> {
        match self.masked.get(index) {
            None => Err(LabError::InvalidArgument(format!(
                "index {index} outside grid of {} points",
                self.values.len()
            ))),
            Some(true) => Err(LabError::NodeEvaluation(index)),
            Some(false) => Ok(self.values[index]),
        }
    }

    pub fn unmasked(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .zip(&self.masked)
            .enumerate()
            .filter(|(_, (_, &m))| !m)
            .map(|(j, (&q, _))| (j, q))
    }
}

pub fn quantum_potential(
    field: &WaveField,
    consts: &PhysicalConstants,
    sign: SignConvention,
    edge: EdgeRule,
) -> Result<PotentialField> {
    let lap = laplacian_of(field, edge)?;
    let pref = sign.value() * consts.kinetic_prefactor();
    let values = lap
        .iter()
        .zip(&field.r)
        .zip(&field.node_mask)
        .map(|((&l, &r), &node)| if node { f64::NAN } else { pref * l / r })
        .collect();
    Ok(PotentialField {
        grid: field.grid,
        values,
        masked: field.node_mask.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoParticlePotential {
    pub total: PotentialField,
    /// From `√(∫|ψ|²dx₂)` on the first axis.
    pub q1: PotentialField,
    /// From `√(∫|ψ|²dx₁)` on the second axis.
    pub q2: PotentialField,
    /// `‖Q_total − Q₁⊕Q₂‖ / max(‖Q_total‖, ‖Q₁⊕Q₂‖)` over points unmasked in all three.
    pub additivity_defect: f64,
}

impl TwoParticlePotential {
    /// `Q₁(x₁) + Q₂(x₂)` at flat index `k`, `NaN` if either is masked.
    pub fn separable_at(&self, k: usize) -> f64 {
        let n2 = self.q2.values.len();
        self.q1.values[k / n2] + self.q2.values[k % n2]
    }
}

fn marginal_field(r2: &[f64], grid: &PointerGrid, consts: &PhysicalConstants) -> Result<WaveField> {
    let psi: Vec<C64> = r2.iter().map(|&p| c64(p.sqrt(), 0.0)).collect();
    decompose(&normalize_on_grid(&psi, grid.spacing())?, grid, consts)
}

/// Full 2D potential compared against the sum of marginal potentials.
pub fn quantum_potential_2particle(
    psi: &[C64],
    g1: &PointerGrid,
    g2: &PointerGrid,
    consts: &PhysicalConstants,
    sign: SignConvention,
    edge: EdgeRule,
) -> Result<TwoParticlePotential> {
    check_axis(g1, edge)?;
    check_axis(g2, edge)?;
    let field = decompose_2d(psi, g1, g2, consts)?;
    let total = quantum_potential(&field, consts, sign, edge)?;

    let (n1, n2) = (g1.points(), g2.points());
    let density: Vec<f64> = field.r.iter().map(|r| r * r).collect();
    let m1: Vec<f64> = (0..n1)
        .map(|i| density[i * n2..(i + 1) * n2].iter().sum::<f64>() * g2.spacing())
        .collect();
    let m2: Vec<f64> = (0..n2)
        .map(|j| (0..n1).map(|i| density[i * n2 + j]).sum::<f64>() * g1.spacing())
        .collect();
    let q1 = quantum_potential(&marginal_field(&m1, g1, consts)?, consts, sign, edge)?;
    let q2 = quantum_potential(&marginal_field(&m2, g2, consts)?, consts, sign, edge)?;

    let (mut diff, mut norm_t, mut norm_s) = (0.0, 0.0, 0.0);
    for (k, qt) in total.unmasked() {
        let qs = q1.values[k / n2] + q2.values[k % n2];
        if qs.is_nan() {
            continue;
        }
        diff += (qt - qs).powi(2);
        norm_t += qt * qt;
        norm_s += qs * qs;
    }
    let dv = field.grid.cell_volume();
    let (diff, norm_t, norm_s) = (
        (diff * dv).sqrt(),
        (norm_t * dv).sqrt(),
        (norm_s * dv).sqrt(),
    );
    // below this both fields are rounding noise of an exactly zero potential
    let area = (n1 as f64 * g1.spacing()) * (n2 as f64 * g2.spacing());
    let floor = 1e-9
        * consts.kinetic_prefactor()
        * (g1.spacing().powi(-2) + g2.spacing().powi(-2))
        * area.sqrt();
    let additivity_defect = diff / norm_t.max(norm_s).max(floor);
    Ok(TwoParticlePotential {
        total,
        q1,
        q2,
        additivity_defect,
    })
}

/// Grid used for the bundled two-particle state: 128 points, spacing 0.1.
pub fn pair_grid() -> PointerGrid {
    PointerGrid::centered(128, 0.1).expect("fixed grid")
}

/// `G(x₁ − d)G(x₂ − d) + G(x₁ + d)G(x₂ + d)` with real Gaussians
/// `G(x) = e^{−x²/4σ²}`, normalized on the grid.
pub fn displaced_gaussian_pair(
    g1: &PointerGrid,
    g2: &PointerGrid,
    offset: f64,
    sigma: f64,
) -> Result<Vec<C64>> {
    if !(sigma > 0.0 && sigma.is_finite() && offset.is_finite()) {
        return Err(LabError::InvalidArgument(format!(
            "need finite offset and positive width, got d = {offset}, sigma = {sigma}"
        )));
    }
    let gauss = |x: f64| (-x * x / (4.0 * sigma * sigma)).exp();
    let mut psi = Vec::with_capacity(g1.points() * g2.points());
    for x1 in g1.coords() {
        for x2 in g2.coords() {
            let v =
                gauss(x1 - offset) * gauss(x2 - offset) + gauss(x1 + offset) * gauss(x2 + offset);
            psi.push(c64(v, 0.0));
        }
    }
    normalize_on_grid(&psi, g1.spacing() * g2.spacing())
}

/// The bundled entangled state: offset 2, width 1 on [`pair_grid`] squared.
pub fn bundled_entangled_pair() -> Vec<C64> {
    let g = pair_grid();
    displaced_gaussian_pair(&g, &g, 2.0, 1.0).expect("fixed parameters")
}

pub const FIELD_CSV_HEADER: &str = "x,R,S,Q,masked";
pub const FIELD_2D_CSV_HEADER: &str = "x1,x2,R,Q,Q1,Q2,masked";

fn sig12(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.11e}")
    }
}

/// One row per grid point; `S` is `nan` for nodes and magnitude-only fields.
pub fn write_field_csv<W: Write>(
    field: &WaveField,
    q: &PotentialField,
    mut out: W,
) -> io::Result<()> {
    let FieldGrid::Line(grid) = field.grid else {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "1D writer given a 2D field",
        ));
    };
    writeln!(out, "{FIELD_CSV_HEADER}")?;
    for j in 0..grid.points() {
        let s = field.s.as_ref().map_or(f64::NAN, |s| s[j]);
        writeln!(
            out,
            "{},{},{},{},{}",
            sig12(grid.coord(j)),
            sig12(field.r[j]),
            sig12(s),
            sig12(q.values[j]),
            q.masked[j]
        )?;
    }
    Ok(())
}

pub fn write_field_2d_csv<W: Write>(
    field: &WaveField,
    pot: &TwoParticlePotential,
    mut out: W,
) -> io::Result<()> {
    let FieldGrid::Plane(g1, g2) = field.grid else {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "2D writer given a 1D field",
        ));
    };
    writeln!(out, "{FIELD_2D_CSV_HEADER}")?;
    let n2 = g2.points();
    for i in 0..g1.points() {
        for j in 0..n2 {
            let k = i * n2 + j;
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                sig12(g1.coord(i)),
                sig12(g2.coord(j)),
                sig12(field.r[k]),
                sig12(pot.total.values[k]),
                sig12(pot.q1.values[i]),
                sig12(pot.q2.values[j]),
                pot.total.masked[k]
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::seeded;
    use rand::Rng;

    fn gaussian(grid: &PointerGrid, center: f64, sigma: f64, k: f64) -> Vec<C64> {
        let psi: Vec<C64> = grid
            .coords()
            .iter()
            .map(|&x| C64::from_polar((-(x - center).powi(2) / (4.0 * sigma * sigma)).exp(), k * x))
            .collect();
        normalize_on_grid(&psi, grid.spacing()).unwrap()
    }

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn real_gaussian_has_zero_action() {
        let g = PointerGrid::centered(101, 0.1).unwrap();
        let f = decompose(&gaussian(&g, 0.0, 1.0, 0.0), &g, &consts()).unwrap();
        assert!(f.action().unwrap().iter().all(|&s| s == 0.0));
        assert!(f.node_mask().iter().all(|&m| !m));
    }

    #[test]
    fn plane_wave_action_is_linear_and_unwrapped() {
        let g = PointerGrid::new(200, 0.05, 0.0).unwrap();
        let k = 3.0;
        let psi = normalize_on_grid(
            &g.coords()
                .iter()
                .map(|&x| C64::from_polar(1.0, k * x))
                .collect::<Vec<_>>(),
            g.spacing(),
        )
        .unwrap();
        let hbar = 0.7;
        let f = decompose(&psi, &g, &PhysicalConstants::new(hbar, 1.0).unwrap()).unwrap();
        for (j, s) in f.action().unwrap().iter().enumerate() {
            assert!((s - hbar * k * g.coord(j)).abs() < 1e-10);
        }
        // total phase advance far exceeds 2π
        assert!(f.action().unwrap()[199] / hbar > 5.0 * PI);
    }

    #[test]
    fn seeded_reconstruction_round_trip() {
        let g = PointerGrid::centered(300, 0.05).unwrap();
        let mut rng = seeded(31);
        for _ in 0..5 {
            let mut psi = vec![c64(0.0, 0.0); g.points()];
            for _ in 0..4 {
                let (c, s, k) = (
                    rng.random_range(-4.0..4.0),
                    rng.random_range(0.5..2.0),
                    rng.random_range(-5.0..5.0),
                );
                let w = c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                for (z, x) in psi.iter_mut().zip(g.coords()) {
                    *z += w * C64::from_polar((-(x - c).powi(2) / (4.0 * s * s)).exp(), k * x);
                }
            }
            let psi = normalize_on_grid(&psi, g.spacing()).unwrap();
            let f = decompose(&psi, &g, &consts()).unwrap();
            let back = f.reconstruct().unwrap();
            for j in 0..g.points() {
                if !f.node_mask()[j] {
                    assert!((back[j] - psi[j]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn decompose_errors() {
        let g = PointerGrid::centered(10, 0.1).unwrap();
        assert_eq!(
            decompose(&[c64(0.0, 0.0); 10], &g, &consts()).unwrap_err(),
            LabError::AllNodes
        );
        assert!(matches!(
            decompose(&[c64(2.0, 0.0); 10], &g, &consts()),
            Err(LabError::NotNormalized(_))
        ));
        assert!(matches!(
            decompose(&[c64(1.0, 0.0); 3], &g, &consts()),
            Err(LabError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn plane_wave_potential_vanishes() {
        let g = PointerGrid::new(64, 0.1, 0.0).unwrap();
        let psi = normalize_on_grid(
            &g.coords()
                .iter()
                .map(|&x| C64::from_polar(1.0, 2.0 * x))
                .collect::<Vec<_>>(),
            g.spacing(),
        )
        .unwrap();
        let f = decompose(&psi, &g, &consts()).unwrap();
        for edge in [EdgeRule::Periodic, EdgeRule::OneSided] {
            let q = quantum_potential(&f, &consts(), SignConvention::Paper, edge).unwrap();
            assert!(q.values.iter().all(|v| v.abs() < 1e-9));
        }
    }

    fn box_error(n: usize, length: f64) -> f64 {
        let dx = length / (n + 1) as f64;
        let g = PointerGrid::new(n, dx, dx).unwrap();
        let psi: Vec<C64> = g
            .coords()
            .iter()
            .map(|&x| c64((PI * x / length).sin(), 0.0))
            .collect();
        let f = decompose(&normalize_on_grid(&psi, dx).unwrap(), &g, &consts()).unwrap();
        let q =
            quantum_potential(&f, &consts(), SignConvention::Standard, EdgeRule::HardWall).unwrap();
        let exact = 0.5 * PI * PI / (length * length);
        q.values
            .iter()
            .map(|v| (v - exact).abs())
            .fold(0.0, f64::max)
            / exact
    }

    #[test]
    fn box_ground_mode_converges_at_second_order() {
        let coarse = box_error(256, 1.0);
        let fine = box_error(513, 1.0);
        assert!(coarse < 1e-4);
        let ratio = coarse / fine;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn gaussian_potential_closed_form() {
        let sigma = 1.0;
        let errs: Vec<f64> = [0.05, 0.025]
            .iter()
            .map(|&dx| {
                let g = PointerGrid::centered((12.0 / dx) as usize + 1, dx).unwrap();
                let f = decompose(&gaussian(&g, 0.0, sigma, 0.0), &g, &consts()).unwrap();
                let q =
                    quantum_potential(&f, &consts(), SignConvention::Standard, EdgeRule::OneSided)
                        .unwrap();
                g.coords()
                    .iter()
                    .zip(&q.values)
                    .filter(|(x, _)| x.abs() <= 3.0 * sigma)
                    .map(|(&x, &v)| {
                        let exact = 0.5 * (0.5 / sigma.powi(2) - x * x / (4.0 * sigma.powi(4)));
                        (v - exact).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(errs[0] < 1e-3, "{errs:?}");
        let ratio = errs[0] / errs[1];
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn sign_modes_are_negatives() {
        let g = PointerGrid::centered(80, 0.1).unwrap();
        let f = decompose(&gaussian(&g, 0.3, 0.7, 1.5), &g, &consts()).unwrap();
        let p =
            quantum_potential(&f, &consts(), SignConvention::Paper, EdgeRule::OneSided).unwrap();
        let s =
            quantum_potential(&f, &consts(), SignConvention::Standard, EdgeRule::OneSided).unwrap();
        for (a, b) in p.values.iter().zip(&s.values) {
            assert!(a.is_nan() && b.is_nan() || *a == -*b);
        }
    }

    #[test]
    fn global_phase_does_not_change_potential() {
        let g = PointerGrid::centered(80, 0.1).unwrap();
        let psi = gaussian(&g, 0.3, 0.7, 1.5);
        let q = |psi: &[C64]| {
            let f = decompose(psi, &g, &consts()).unwrap();
            quantum_potential(&f, &consts(), SignConvention::Paper, EdgeRule::OneSided).unwrap()
        };
        let base = q(&psi);
        let rotated: Vec<C64> = psi.iter().map(|z| z * c64(0.0, 1.0)).collect();
        assert_eq!(q(&rotated), base);
        let phased: Vec<C64> = psi.iter().map(|z| z * C64::from_polar(1.0, 0.83)).collect();
        for (a, b) in q(&phased).values.iter().zip(&base.values) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn nodes_are_masked_and_refuse_evaluation() {
        let g = PointerGrid::centered(41, 0.1).unwrap();
        // first excited box-like state with an exact zero at the centre
        let psi: Vec<C64> = g
            .coords()
            .iter()
            .map(|&x| c64(x * (-x * x).exp(), 0.0))
            .collect();
        let f = decompose(
            &normalize_on_grid(&psi, g.spacing()).unwrap(),
            &g,
            &consts(),
        )
        .unwrap();
        assert!(f.node_mask()[20]);
        assert!(f.action().unwrap()[20].is_nan());
        let q =
            quantum_potential(&f, &consts(), SignConvention::Paper, EdgeRule::OneSided).unwrap();
        assert_eq!(q.at(20).unwrap_err(), LabError::NodeEvaluation(20));
        assert!(q.at(10).unwrap().is_finite());
    }

    fn product_state(a: &[C64], b: &[C64]) -> Vec<C64> {
        a.iter()
            .flat_map(|x| b.iter().map(move |y| x * y))
            .collect()
    }

    #[test]
    fn product_states_are_additive() {
        let g1 = PointerGrid::centered(48, 0.2).unwrap();
        let g2 = PointerGrid::centered(40, 0.25).unwrap();
        let mut rng = seeded(12);
        for _ in 0..10 {
            let a = gaussian(
                &g1,
                rng.random_range(-1.0..1.0),
                rng.random_range(0.6..1.2),
                rng.random_range(-2.0..2.0),
            );
            let b = gaussian(
                &g2,
                rng.random_range(-1.0..1.0),
                rng.random_range(0.6..1.2),
                rng.random_range(-2.0..2.0),
            );
            let psi = product_state(&a, &b);
            let t = quantum_potential_2particle(
                &psi,
                &g1,
                &g2,
                &consts(),
                SignConvention::Paper,
                EdgeRule::OneSided,
            )
            .unwrap();
            assert!(t.additivity_defect < 1e-6, "{}", t.additivity_defect);
        }
    }

    #[test]
    fn plane_wave_products_have_zero_potential() {
        let g1 = PointerGrid::new(32, 0.1, 0.0).unwrap();
        let g2 = PointerGrid::new(24, 0.1, 0.0).unwrap();
        let wave = |g: &PointerGrid, k: f64| {
            normalize_on_grid(
                &g.coords()
                    .iter()
                    .map(|&x| C64::from_polar(1.0, k * x))
                    .collect::<Vec<_>>(),
                g.spacing(),
            )
            .unwrap()
        };
        let psi = product_state(&wave(&g1, 1.0), &wave(&g2, -2.0));
        let t = quantum_potential_2particle(
            &psi,
            &g1,
            &g2,
            &consts(),
            SignConvention::Paper,
            EdgeRule::Periodic,
        )
        .unwrap();
        assert!(t.total.values.iter().all(|v| v.abs() < 1e-9));
        assert!(t.additivity_defect < 1e-6);
    }

    #[test]
    fn two_particle_grid_too_small() {
        let g1 = PointerGrid::centered(2, 0.1).unwrap();
        let g2 = PointerGrid::centered(8, 0.1).unwrap();
        assert!(matches!(
            quantum_potential_2particle(
                &[c64(1.0, 0.0); 16],
                &g1,
                &g2,
                &consts(),
                SignConvention::Paper,
                EdgeRule::HardWall
            ),
            Err(LabError::GridTooSmall { .. })
        ));
    }

    #[test]
    fn field_csv_rows() {
        let g = PointerGrid::centered(5, 0.5).unwrap();
        let f = decompose(&gaussian(&g, 0.0, 1.0, 0.0), &g, &consts()).unwrap();
        let q =
            quantum_potential(&f, &consts(), SignConvention::Paper, EdgeRule::OneSided).unwrap();
        let mut buf = Vec::new();
        write_field_csv(&f, &q, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], FIELD_CSV_HEADER);
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("-1.00000000000e0,"));
        assert!(lines[1].ends_with(",false"));
    }
}
