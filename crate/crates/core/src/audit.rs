//! Marginal-invariance audits: the spin-expectation calculation for a
//! unitary on apparatus plus one wing, the local-sum expectation
//! calculation, and a generic trace-distance audit over settings.

use std::fmt::Display;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::evolution::evolve;
use crate::hamiltonian::{local_sum, pointer_momentum};
use crate::state::{
    default_pointer_wave, singlet_with_apparatus, spin_basis, spin_observable, PointerGrid,
    POINTER, SPIN_A, SPIN_B,
};
use crate::tensor::{
    c64, embed, embed_labeled, embed_on, expm_hermitian, partial_trace, trace_distance, CMatrix,
    DensityOp, Ket, Operator, PhaseSign, SpaceSignature,
};

/// Invariance tolerance applied to both audit maxima.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Invariant,
    Varies,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub scenario: String,
    pub settings: Vec<String>,
    pub expectations: Vec<f64>,
    pub remote_marginals: Vec<DensityOp>,
    pub max_expectation_delta: f64,
    pub max_trace_distance: f64,
    pub verdict: Verdict,
    pub tolerance: f64,
}

impl AuditReport {
    /// Compute the pairwise maxima and the verdict.
    pub fn assemble(
        scenario: impl Into<String>,
        settings: Vec<String>,
        expectations: Vec<f64>,
        remote_marginals: Vec<DensityOp>,
        tolerance: f64,
    ) -> Result<Self> {
        let max_expectation_delta = if expectations.is_empty() {
            0.0
        } else {
            let hi = expectations
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let lo = expectations.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo
        };
        let mut max_trace_distance: f64 = 0.0;
        for (i, a) in remote_marginals.iter().enumerate() {
            for b in &remote_marginals[i + 1..] {
                max_trace_distance = max_trace_distance.max(trace_distance(a, b)?);
            }
        }
        let verdict = if max_expectation_delta < tolerance && max_trace_distance < tolerance {
            Verdict::Invariant
        } else {
            Verdict::Varies
        };
        Ok(Self {
            scenario: scenario.into(),
            settings,
            expectations,
            remote_marginals,
            max_expectation_delta,
            max_trace_distance,
            verdict,
            tolerance,
        })
    }

    pub fn is_invariant(&self) -> bool {
        self.verdict == Verdict::Invariant
    }

    /// Re-judge the verdict against a different tolerance.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.verdict =
            if self.max_expectation_delta < tolerance && self.max_trace_distance < tolerance {
                Verdict::Invariant
            } else {
                Verdict::Varies
            };
        self.tolerance = tolerance;
        self
    }
}

/// Unitary on `(y, A)` that rotates A's basis from `alpha` to `alpha_prime`
/// while translating the pointer in a direction set by the spin outcome.
///
/// `U = Σ_s T_s ⊗ |s_α′⟩⟨s_α|` with `T_s = exp(−i·s·κ·(α′ − α)·p_y)` and
/// `κ = N·Δy/8` per radian, so `α′ = α` gives the identity.
pub fn bohm_hiley_unitary(alpha: f64, alpha_prime: f64, grid: &PointerGrid) -> Result<Operator> {
    let (from, to) = (spin_basis(alpha), spin_basis(alpha_prime));
    let p = pointer_momentum(grid)?;
    let kappa = grid.points() as f64 * grid.spacing() / 8.0;
    let turn = alpha_prime - alpha;
    let n = grid.points();
    let mut u = CMatrix::zeros(2 * n, 2 * n);
    for sign in [1i8, -1] {
        let shift = expm_hermitian(&p, f64::from(sign) * kappa * turn, PhaseSign::Minus)?;
        let (ket, bra) = (to.ket(sign), from.ket(sign));
        let flip = CMatrix::from_fn(2, 2, |r, c| ket[r] * bra[c].conj());
        u += shift.entries().kronecker(&flip);
    }
    Operator::unitary(u, SpaceSignature::new([(POINTER, n), (SPIN_A, 2)])?)
}

/// Spin expectation on B before and after a unitary on apparatus plus A.
pub fn bohm_hiley_scenario(
    alpha: f64,
    alpha_prime: f64,
    beta: f64,
    grid: &PointerGrid,
) -> Result<AuditReport> {
    let psi0 = singlet_with_apparatus(grid, &default_pointer_wave(grid), alpha, beta)?;
    let sig = psi0.signature().clone();
    let u = embed_on(
        &bohm_hiley_unitary(alpha, alpha_prime, grid)?,
        &sig,
        &[POINTER, SPIN_A],
    )?;
    let psi1 = u.apply(&psi0)?;
    let sigma_b = embed(&spin_observable(beta, SPIN_B), &sig, SPIN_B)?;
    let expectations = vec![
        sigma_b.expectation(&psi0)?.re,
        sigma_b.expectation(&psi1)?.re,
    ];
    let marginals = vec![
        partial_trace(&psi0.density(), &[SPIN_B])?,
        partial_trace(&psi1.density(), &[SPIN_B])?,
    ];
    AuditReport::assemble(
        "bohm_hiley",
        vec![
            format!("before (alpha = {alpha})"),
            format!("after (alpha' = {alpha_prime})"),
        ],
        expectations,
        marginals,
        DEFAULT_TOLERANCE,
    )
}

/// Expectation of `g` on A under local-sum evolution, one run per remote
/// Hamiltonian.
///
/// `psi0` carries the signature of the whole system; `h_a` and `g` act on
/// A's labels and each remote Hamiltonian must stay off them.
pub fn shimony_scenario(
    h_a: &Operator,
    h_db_settings: &[Operator],
    psi0: &Ket,
    g: &Operator,
    t: f64,
) -> Result<AuditReport> {
    let sig = psi0.signature();
    let a_labels = h_a.signature().labels();
    for (k, h_db) in h_db_settings.iter().enumerate() {
        if let Some(l) = h_db
            .signature()
            .labels()
            .iter()
            .find(|l| a_labels.contains(l))
        {
            return Err(LabError::LocalityViolation(format!(
                "remote Hamiltonian {k} acts on `{l}`, which belongs to A"
            )));
        }
    }
    if let Some(l) = g
        .signature()
        .labels()
        .iter()
        .find(|l| !a_labels.contains(l))
    {
        return Err(LabError::LocalityViolation(format!(
            "observable acts on `{l}`, outside A"
        )));
    }
    let g_tot = embed_labeled(g, sig)?;
    let runs: Vec<(f64, DensityOp)> = h_db_settings
        .par_iter()
        .map(|h_db| {
            let h = local_sum(h_a, h_db, sig)?;
            let psi = evolve(&h, psi0, t)?;
            let rho_a = partial_trace(&psi.density(), &a_labels)?;
            Ok((g_tot.expectation(&psi)?.re, rho_a))
        })
        .collect::<Result<_>>()?;
    let (expectations, marginals) = runs.into_iter().unzip();
    AuditReport::assemble(
        "shimony",
        (0..h_db_settings.len())
            .map(|k| format!("H_DB[{k}]"))
            .collect(),
        expectations,
        marginals,
        DEFAULT_TOLERANCE,
    )
}

/// Reduced state of `remote_label` after evolving `psi0` for time `t` under
/// the Hamiltonian built for each setting.
///
/// When `probe` is given (an operator on the remote subsystem) its
/// expectation is recorded per setting as well.
pub fn marginal_audit<T, F>(
    builder: F,
    psi0: &Ket,
    remote_label: &str,
    settings: &[T],
    t: f64,
    probe: Option<&Operator>,
) -> Result<AuditReport>
where
    T: Display + Sync,
    F: Fn(&T) -> Result<Operator> + Sync,
{
    let sig = psi0.signature();
    sig.position(remote_label)?;
    let probe = probe.map(|p| embed(p, sig, remote_label)).transpose()?;
    let runs: Vec<(Option<f64>, DensityOp)> = settings
        .par_iter()
        .map(|s| {
            let h = builder(s)?;
            let psi = evolve(&h, psi0, t)?;
            let rho = partial_trace(&psi.density(), &[remote_label])?;
            let e = probe
                .as_ref()
                .map(|p| p.expectation(&psi).map(|z| z.re))
                .transpose()?;
            Ok((e, rho))
        })
        .collect::<Result<_>>()?;
    let (exps, marginals): (Vec<Option<f64>>, Vec<DensityOp>) = runs.into_iter().unzip();
    AuditReport::assemble(
        "marginal_audit",
        settings.iter().map(|s| s.to_string()).collect(),
        exps.into_iter().flatten().collect(),
        marginals,
        DEFAULT_TOLERANCE,
    )
}

/// Entangled pointer-plus-pair state used to probe exchange-symmetric
/// couplings: `φ₀ ⊗ (cos χ|+_x⟩|0⟩ + sin χ|−_x⟩|1⟩)` on `(y, A, B)`.
///
/// For `χ ∉ {0, π/4, π/2}` the reduced state of A is entangled yet carries
/// coherence in the σ_z basis, which a σ_z pointer coupling can erode.
pub fn audit_probe_state(grid: &PointerGrid, chi: f64) -> Result<Ket> {
    let pointer = Ket::from_slice(&default_pointer_wave(grid), grid.signature(POINTER))?;
    let x = spin_basis(std::f64::consts::FRAC_PI_2);
    let (s, c) = chi.sin_cos();
    let mut amps = [c64(0.0, 0.0); 4];
    for a in 0..2 {
        amps[2 * a] += x.plus[a] * c;
        amps[2 * a + 1] += x.minus[a] * s;
    }
    let pair = Ket::from_slice(&amps, SpaceSignature::new([(SPIN_A, 2), (SPIN_B, 2)])?)?;
    pointer.tensor(&pair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{symmetrized_coupling, CouplingConfig};
    use crate::random::{random_hermitian, seeded};
    use crate::state::schmidt_state;
    use crate::tensor::{Pauli, C64};
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_8, PI};

    fn grid8() -> PointerGrid {
        PointerGrid::centered(8, 0.5).unwrap()
    }

    #[test]
    fn bohm_hiley_invariance_and_zero_value() {
        let r = bohm_hiley_scenario(0.0, PI / 3.0, 0.77, &grid8()).unwrap();
        assert!(r.max_expectation_delta < 1e-12);
        assert!(r.expectations.iter().all(|e| e.abs() < 1e-12));
        assert!(r.max_trace_distance < 1e-12);
        assert!(r.is_invariant());
    }

    #[test]
    fn bohm_hiley_unitary_is_identity_for_no_rotation() {
        let g = grid8();
        let u = bohm_hiley_unitary(0.4, 0.4, &g).unwrap();
        let id = CMatrix::identity(16, 16);
        assert!(crate::tensor::max_abs_diff(u.entries(), &id) < 1e-13);
        let moved = bohm_hiley_unitary(0.4, 1.4, &g).unwrap();
        assert!(crate::tensor::max_abs_diff(moved.entries(), &id) > 0.1);
        assert!(moved.unitarity_defect() < 1e-10);
    }

    #[test]
    fn bohm_hiley_rotation_moves_pointer_and_a_but_not_b() {
        let g = grid8();
        let psi0 = singlet_with_apparatus(&g, &default_pointer_wave(&g), 0.0, 0.3).unwrap();
        let u = embed_on(
            &bohm_hiley_unitary(0.0, 1.0, &g).unwrap(),
            psi0.signature(),
            &[POINTER, SPIN_A],
        )
        .unwrap();
        let psi1 = u.apply(&psi0).unwrap();
        let ya0 = partial_trace(&psi0.density(), &[POINTER, SPIN_A]).unwrap();
        let ya1 = partial_trace(&psi1.density(), &[POINTER, SPIN_A]).unwrap();
        assert!(trace_distance(&ya0, &ya1).unwrap() > 1e-3);
    }

    fn shimony_fixture(seed: u64) -> (Operator, Vec<Operator>, Ket, Operator) {
        let mut rng = seeded(seed);
        let a = SpaceSignature::single(SPIN_A, 2).unwrap();
        let bp = SpaceSignature::new([("D", 2), (SPIN_B, 2)]).unwrap();
        let h_a = random_hermitian(&a, &mut rng).unwrap();
        let settings = vec![
            random_hermitian(&bp, &mut rng).unwrap(),
            random_hermitian(&bp, &mut rng).unwrap(),
        ];
        let r = FRAC_1_SQRT_2;
        let psi0 = schmidt_state(&[c64(r, 0.0), c64(-r, 0.0)], &bp, &a).unwrap();
        let g = random_hermitian(&a, &mut rng).unwrap();
        (h_a, settings, psi0, g)
    }

    #[test]
    fn shimony_two_random_settings_invariant() {
        let (h_a, settings, psi0, g) = shimony_fixture(4);
        let r = shimony_scenario(&h_a, &settings, &psi0, &g, 1.3).unwrap();
        assert!(r.max_expectation_delta < 1e-10);
        assert!(r.max_trace_distance < 1e-9);
        assert!(r.is_invariant());
        // cross-check against Tr(G ρ_A)
        for (e, rho) in r.expectations.iter().zip(&r.remote_marginals) {
            let tr: C64 = g.expectation_in(rho).unwrap();
            assert!((tr.re - e).abs() < 1e-12);
        }
    }

    #[test]
    fn shimony_single_setting_has_zero_delta() {
        let (h_a, settings, psi0, g) = shimony_fixture(6);
        let r = shimony_scenario(&h_a, &settings[..1], &psi0, &g, 0.8).unwrap();
        assert_eq!(r.max_expectation_delta, 0.0);
        assert_eq!(r.max_trace_distance, 0.0);
    }

    #[test]
    fn shimony_rejects_remote_hamiltonian_on_a() {
        let (h_a, _, psi0, g) = shimony_fixture(6);
        let bad = kron_on_a_and_b();
        assert!(matches!(
            shimony_scenario(&h_a, &[bad], &psi0, &g, 1.0),
            Err(LabError::LocalityViolation(_))
        ));
    }

    fn kron_on_a_and_b() -> Operator {
        crate::tensor::kron(&[&Pauli::Z.on(SPIN_B), &Pauli::Z.on(SPIN_A)]).unwrap()
    }

    #[test]
    fn marginal_audit_local_family_is_invariant() {
        let (h_a, settings, psi0, _) = shimony_fixture(12);
        let sig = psi0.signature().clone();
        let r = marginal_audit(
            |k: &usize| local_sum(&h_a, &settings[*k], &sig),
            &psi0,
            SPIN_A,
            &[0usize, 1],
            2.0,
            Some(&Pauli::X.on(SPIN_A)),
        )
        .unwrap();
        assert!(r.max_trace_distance < 1e-9, "{}", r.max_trace_distance);
        assert!(r.is_invariant());
        assert_eq!(r.expectations.len(), 2);
    }

    fn symmetric_builder(
        grid: PointerGrid,
        sig: SpaceSignature,
    ) -> impl Fn(&f64) -> Result<Operator> + Sync {
        move |lambda: &f64| {
            symmetrized_coupling(
                &Pauli::Z.on(SPIN_A),
                &Pauli::Z.on(SPIN_B),
                &grid,
                &CouplingConfig::new(*lambda)?,
                &sig,
            )
        }
    }

    #[test]
    fn marginal_audit_symmetrized_coupling_varies() {
        let g = grid8();
        let psi0 = audit_probe_state(&g, FRAC_PI_8).unwrap();
        let build = symmetric_builder(g, psi0.signature().clone());
        let r = marginal_audit(&build, &psi0, SPIN_A, &[0.0, 1.0], 1.0, None).unwrap();
        assert!(r.max_trace_distance > 1e-6);
        assert_eq!(r.verdict, Verdict::Varies);
        assert!(r.expectations.is_empty());
    }

    #[test]
    fn marginal_audit_at_time_zero_is_invariant() {
        let g = grid8();
        let psi0 = audit_probe_state(&g, FRAC_PI_8).unwrap();
        let build = symmetric_builder(g, psi0.signature().clone());
        let r = marginal_audit(&build, &psi0, SPIN_A, &[0.0, 1.0], 0.0, None).unwrap();
        assert_eq!(r.max_trace_distance, 0.0);
        assert!(r.is_invariant());
    }

    #[test]
    fn probe_state_is_normalized_and_entangled() {
        let psi = audit_probe_state(&grid8(), FRAC_PI_8).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        let rho_a = partial_trace(&psi.density(), &[SPIN_A]).unwrap();
        assert!(rho_a.purity() < 0.99);
        // coherence in the σ_z basis
        assert!(rho_a.entries()[(0, 1)].norm() > 0.1);
    }

    #[test]
    fn report_serializes_with_listed_fields() {
        let r = bohm_hiley_scenario(0.0, 0.5, 0.0, &grid8()).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in [
            "scenario",
            "settings",
            "expectations",
            "remote_marginals",
            "max_expectation_delta",
            "max_trace_distance",
            "verdict",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["verdict"], "invariant");
        assert!((v["remote_marginals"][0]["re"][0][0].as_f64().unwrap() - 0.5).abs() < 1e-12);
    }
}
