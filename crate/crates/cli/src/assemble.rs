//! Turn configuration specs into operators, states and grid wavefunctions.

use nosig_core::audit::audit_probe_state;
use nosig_core::bohm::{displaced_gaussian_pair, normalize_on_grid, pair_grid};
use nosig_core::hamiltonian::{
    bohm_hamiltonian_1d, symmetrized_coupling, von_neumann_coupling, CouplingConfig,
    PhysicalConstants,
};
use nosig_core::random::{random_hermitian, random_ket, seeded};
use nosig_core::state::{
    default_pointer_wave, schmidt_state, singlet_with_apparatus, spin_observable, PointerGrid,
    POINTER,
};
use nosig_core::tensor::{c64, eigh, CMatrix, Ket, Operator, Pauli, SpaceSignature, C64};

use crate::config::{
    Config, GridSpec, HamiltonianSpec, OperatorSpec, PauliName, StateSpec, Support,
};
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn support_signature(on: &Support) -> Result<SpaceSignature> {
    Ok(match on {
        Support::Qubit(label) => SpaceSignature::single(label.as_str(), 2)?,
        Support::Subsystems(subs) => {
            SpaceSignature::new(subs.iter().map(|s| (s.label.clone(), s.dim)))?
        }
    })
}

fn qubit_label(on: &Support, what: &str) -> Result<String> {
    let sig = support_signature(on)?;
    if sig.len() != 1 || sig.dim() != 2 {
        return Err(config_err(format!(
            "{what} needs a single qubit, got [{sig}]"
        )));
    }
    Ok(sig.labels()[0].to_string())
}

fn matrix_from_rows(re: &[Vec<f64>], im: Option<&Vec<Vec<f64>>>, dim: usize) -> Result<CMatrix> {
    let square = |rows: &[Vec<f64>]| rows.len() == dim && rows.iter().all(|r| r.len() == dim);
    if !square(re) || im.is_some_and(|m| !square(m)) {
        return Err(config_err(format!("matrix must be {dim}x{dim}")));
    }
    Ok(CMatrix::from_fn(dim, dim, |r, c| {
        c64(re[r][c], im.map_or(0.0, |m| m[r][c]))
    }))
}

pub fn operator(spec: &OperatorSpec) -> Result<Operator> {
    let given = [
        spec.pauli.is_some(),
        spec.spin.is_some(),
        spec.matrix.is_some(),
        spec.random_hermitian.is_some(),
    ];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(config_err(
            "operator needs exactly one of `pauli`, `spin`, `matrix`, `random_hermitian`",
        ));
    }
    if let Some(p) = spec.pauli {
        let label = qubit_label(&spec.on, "pauli operator")?;
        let pauli = match p {
            PauliName::I => Pauli::I,
            PauliName::X => Pauli::X,
            PauliName::Y => Pauli::Y,
            PauliName::Z => Pauli::Z,
        };
        return Ok(pauli.on(&label));
    }
    if let Some(theta) = spec.spin {
        return Ok(spin_observable(
            theta,
            &qubit_label(&spec.on, "spin observable")?,
        ));
    }
    let sig = support_signature(&spec.on)?;
    if let Some(m) = &spec.matrix {
        let entries = matrix_from_rows(&m.re, m.im.as_ref(), sig.dim())?;
        return Ok(Operator::hermitian(entries, sig)?);
    }
    let seed = spec.random_hermitian.expect("one kind present").seed;
    Ok(random_hermitian(&sig, &mut seeded(seed))?)
}

pub fn line_grid(config: &Config, default: PointerGrid) -> Result<PointerGrid> {
    match config.grid {
        None => Ok(default),
        Some(GridSpec::Line(g)) => Ok(g),
        Some(GridSpec::Plane(_)) => Err(config_err("expected a single grid, got two")),
    }
}

pub fn plane_grids(config: &Config) -> (PointerGrid, PointerGrid) {
    match config.grid {
        None => (pair_grid(), pair_grid()),
        Some(GridSpec::Line(g)) => (g, g),
        Some(GridSpec::Plane([g1, g2])) => (g1, g2),
    }
}

pub fn spin_grid(config: &Config) -> Result<PointerGrid> {
    line_grid(config, PointerGrid::centered(8, 0.5)?)
}

/// `y` followed by every operator subsystem, first occurrence order.
pub fn coupling_signature(grid: &PointerGrid, ops: &[&Operator]) -> Result<SpaceSignature> {
    let mut sig = grid.signature(POINTER);
    for op in ops {
        for sub in op.signature().subsystems() {
            if !sig.contains(&sub.label) {
                sig = sig.concat(&SpaceSignature::single(sub.label.as_str(), sub.dim)?)?;
            }
        }
    }
    Ok(sig)
}

/// Pointer coupling from a `von_neumann` or `symmetrized` spec, with an
/// optional λ override.
pub struct Coupling {
    spec: HamiltonianSpec,
    ops: Vec<Operator>,
    grid: PointerGrid,
    signature: SpaceSignature,
}

impl Coupling {
    pub fn new(
        spec: &HamiltonianSpec,
        grid: PointerGrid,
        signature: Option<&SpaceSignature>,
    ) -> Result<Self> {
        let ops = match spec {
            HamiltonianSpec::VonNeumann { observable, .. } => vec![operator(observable)?],
            HamiltonianSpec::Symmetrized { o_a, o_b, .. } => vec![operator(o_a)?, operator(o_b)?],
            other => {
                return Err(config_err(format!(
                    "expected a pointer coupling, got `{}`",
                    other.kind()
                )))
            }
        };
        let signature = match signature {
            Some(s) => s.clone(),
            None => coupling_signature(&grid, &ops.iter().collect::<Vec<_>>())?,
        };
        Ok(Self {
            spec: spec.clone(),
            ops,
            grid,
            signature,
        })
    }

    pub fn signature(&self) -> &SpaceSignature {
        &self.signature
    }

    /// Labels of the operator(s) the coupling measures, first one first.
    pub fn first_labels(&self) -> Vec<String> {
        self.ops[0]
            .signature()
            .labels()
            .iter()
            .map(|l| l.to_string())
            .collect()
    }

    pub fn lambda(&self) -> f64 {
        match self.spec {
            HamiltonianSpec::VonNeumann { lambda, .. }
            | HamiltonianSpec::Symmetrized { lambda, .. } => lambda,
            _ => unreachable!("checked in new"),
        }
    }

    pub fn build(&self, lambda: f64) -> nosig_core::Result<Operator> {
        match &self.spec {
            HamiltonianSpec::VonNeumann {
                hermitization,
                boundary,
                ..
            } => {
                let cfg = CouplingConfig::new(lambda)?.with_hermitization(*hermitization);
                let cfg = CouplingConfig {
                    boundary: *boundary,
                    ..cfg
                };
                von_neumann_coupling(&self.ops[0], &self.grid, &cfg, &self.signature)
            }
            HamiltonianSpec::Symmetrized {
                hermitization,
                boundary,
                ..
            } => {
                let cfg = CouplingConfig::new(lambda)?.with_hermitization(*hermitization);
                let cfg = CouplingConfig {
                    boundary: *boundary,
                    ..cfg
                };
                symmetrized_coupling(
                    &self.ops[0],
                    &self.ops[1],
                    &self.grid,
                    &cfg,
                    &self.signature,
                )
            }
            _ => unreachable!("checked in new"),
        }
    }
}

/// Spin-sector state; `signature` is required for random states.
pub fn spin_state(
    spec: &StateSpec,
    grid: &PointerGrid,
    signature: Option<&SpaceSignature>,
) -> Result<Ket> {
    match spec {
        StateSpec::Schmidt {
            coefficients,
            b_prime,
            a,
        } => {
            let to_sig = |subs: &[nosig_core::tensor::Subsystem]| {
                SpaceSignature::new(subs.iter().map(|s| (s.label.clone(), s.dim)))
            };
            let coeffs: Vec<C64> = coefficients.iter().map(|&c| c64(c, 0.0)).collect();
            Ok(schmidt_state(&coeffs, &to_sig(b_prime)?, &to_sig(a)?)?)
        }
        StateSpec::Random { seed } => {
            let sig = signature.ok_or_else(|| {
                config_err("random state needs a Hamiltonian to fix its signature")
            })?;
            Ok(random_ket(sig, &mut seeded(*seed))?)
        }
        StateSpec::SingletApparatus { alpha, beta } => Ok(singlet_with_apparatus(
            grid,
            &default_pointer_wave(grid),
            *alpha,
            *beta,
        )?),
        StateSpec::AuditProbe { chi } => Ok(audit_probe_state(grid, *chi)?),
        other => Err(config_err(format!(
            "state `{}` is a grid wavefunction, not a spin state",
            state_kind(other)
        ))),
    }
}

pub fn state_kind(spec: &StateSpec) -> &'static str {
    match spec {
        StateSpec::Schmidt { .. } => "schmidt",
        StateSpec::Random { .. } => "random",
        StateSpec::SingletApparatus { .. } => "singlet_apparatus",
        StateSpec::AuditProbe { .. } => "audit_probe",
        StateSpec::Gaussian { .. } => "gaussian",
        StateSpec::PlaneWave { .. } => "plane_wave",
        StateSpec::BoxMode { .. } => "box_mode",
        StateSpec::GroundState => "ground_state",
        StateSpec::GaussianPair { .. } => "gaussian_pair",
    }
}

fn bohm_operator(
    spec: Option<&HamiltonianSpec>,
    grid: &PointerGrid,
    consts: &PhysicalConstants,
) -> Result<Operator> {
    let Some(HamiltonianSpec::Bohm1d {
        potential,
        harmonic_omega,
        boundary,
    }) = spec
    else {
        return Err(config_err("ground_state needs a `bohm_1d` hamiltonian"));
    };
    let v = match (potential, harmonic_omega) {
        (Some(_), Some(_)) => {
            return Err(config_err(
                "give either `potential` or `harmonic_omega`, not both",
            ))
        }
        (Some(v), None) => v.clone(),
        (None, Some(w)) => grid
            .coords()
            .iter()
            .map(|x| 0.5 * consts.mass * w * w * x * x)
            .collect(),
        (None, None) => vec![0.0; grid.points()],
    };
    Ok(bohm_hamiltonian_1d(grid, &v, consts, *boundary)?)
}

/// One-dimensional wavefunction normalized so that `Σ|ψ|²Δ = 1`.
pub fn line_wave(
    spec: &StateSpec,
    grid: &PointerGrid,
    hamiltonian: Option<&HamiltonianSpec>,
    consts: &PhysicalConstants,
) -> Result<Vec<C64>> {
    let xs = grid.coords();
    let raw: Vec<C64> = match spec {
        StateSpec::Gaussian {
            center,
            width,
            momentum,
        } => {
            if !(width.is_finite() && *width > 0.0) {
                return Err(config_err("gaussian width must be positive"));
            }
            xs.iter()
                .map(|x| {
                    C64::from_polar(
                        (-(x - center).powi(2) / (4.0 * width * width)).exp(),
                        momentum * x,
                    )
                })
                .collect()
        }
        StateSpec::PlaneWave { k } => xs.iter().map(|x| C64::from_polar(1.0, k * x)).collect(),
        StateSpec::BoxMode { mode } => {
            if *mode == 0 {
                return Err(config_err("box mode index starts at 1"));
            }
            let length = (grid.points() + 1) as f64 * grid.spacing();
            (0..grid.points())
                .map(|j| {
                    let xi = (j + 1) as f64 * grid.spacing();
                    c64(
                        (*mode as f64 * std::f64::consts::PI * xi / length).sin(),
                        0.0,
                    )
                })
                .collect()
        }
        StateSpec::GroundState => {
            let h = bohm_operator(hamiltonian, grid, consts)?;
            let (_, vecs) = eigh(h.entries());
            let col = vecs.column(0);
            let sign = if col.iter().map(|z| z.re).sum::<f64>() < 0.0 {
                -1.0
            } else {
                1.0
            };
            col.iter().map(|z| z * sign).collect()
        }
        other => {
            return Err(config_err(format!(
                "state `{}` is not a one-dimensional wavefunction",
                state_kind(other)
            )))
        }
    };
    Ok(normalize_on_grid(&raw, grid.spacing())?)
}

/// Two-coordinate wavefunction, row-major with `x₁` slowest.
pub fn plane_wave_function(
    spec: &StateSpec,
    g1: &PointerGrid,
    g2: &PointerGrid,
) -> Result<Vec<C64>> {
    match spec {
        StateSpec::GaussianPair { offset, sigma } => {
            Ok(displaced_gaussian_pair(g1, g2, *offset, *sigma)?)
        }
        other => Err(config_err(format!(
            "state `{}` is not a two-coordinate wavefunction",
            state_kind(other)
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{MatrixSpec, RandomSpec};
    use nosig_core::tensor::Subsystem;

    fn on_qubit(label: &str) -> Support {
        Support::Qubit(label.into())
    }

    fn bare(on: Support) -> OperatorSpec {
        OperatorSpec {
            pauli: None,
            spin: None,
            matrix: None,
            random_hermitian: None,
            on,
        }
    }

    #[test]
    fn operator_kinds() {
        let mut s = bare(on_qubit("A"));
        s.pauli = Some(PauliName::Z);
        assert_eq!(operator(&s).unwrap(), Pauli::Z.on("A"));

        let mut m = bare(Support::Subsystems(vec![Subsystem {
            label: "A".into(),
            dim: 2,
        }]));
        m.matrix = Some(MatrixSpec {
            re: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            im: None,
        });
        let built = operator(&m).unwrap();
        assert_eq!(built.entries(), Pauli::X.on("A").entries());
        assert_eq!(built.signature(), Pauli::X.on("A").signature());

        let mut r = bare(on_qubit("B"));
        r.random_hermitian = Some(RandomSpec { seed: 4 });
        assert_eq!(operator(&r).unwrap(), operator(&r).unwrap());
    }

    #[test]
    fn operator_spec_errors() {
        assert!(operator(&bare(on_qubit("A"))).is_err());
        let mut two = bare(on_qubit("A"));
        two.pauli = Some(PauliName::X);
        two.spin = Some(0.3);
        assert!(operator(&two).is_err());
        let mut wide = bare(Support::Subsystems(vec![Subsystem {
            label: "D".into(),
            dim: 3,
        }]));
        wide.pauli = Some(PauliName::X);
        assert!(operator(&wide).is_err());
        let mut skew = bare(on_qubit("A"));
        skew.matrix = Some(MatrixSpec {
            re: vec![vec![0.0, 1.0], vec![-1.0, 0.0]],
            im: None,
        });
        assert!(matches!(operator(&skew), Err(CliError::Config(_))));
    }

    #[test]
    fn box_mode_wave_is_grid_normalized() {
        let g = PointerGrid::new(50, 0.02, 0.02).unwrap();
        let psi = line_wave(
            &StateSpec::BoxMode { mode: 2 },
            &g,
            None,
            &PhysicalConstants::default(),
        )
        .unwrap();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * g.spacing();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ground_state_of_box_is_positive() {
        let g = PointerGrid::new(40, 0.025, 0.025).unwrap();
        let h = HamiltonianSpec::Bohm1d {
            potential: None,
            harmonic_omega: None,
            boundary: nosig_core::hamiltonian::Boundary::HardWall,
        };
        let psi = line_wave(
            &StateSpec::GroundState,
            &g,
            Some(&h),
            &PhysicalConstants::default(),
        )
        .unwrap();
        assert!(psi.iter().all(|z| z.re > 0.0));
    }
}
