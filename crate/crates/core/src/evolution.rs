//! Unitary evolution, the product-exponential identity for local sums, and
//! the locality defect of a generator across a bipartition.

use crate::error::{LabError, Result};
use crate::hamiltonian::local_sum;
use crate::tensor::{
    c64, embed_on, expm_hermitian, kron, max_abs_diff, partial_trace_operator, Ket, Operator,
    PhaseSign,
};

/// `e^{iHt}|ψ₀⟩` with the default phase sign.
pub fn evolve(h: &Operator, psi0: &Ket, t: f64) -> Result<Ket> {
    evolve_with(h, psi0, t, PhaseSign::default())
}

pub fn evolve_with(h: &Operator, psi0: &Ket, t: f64, sign: PhaseSign) -> Result<Ket> {
    if h.signature() != psi0.signature() {
        return Err(LabError::SignatureMismatch {
            left: h.signature().to_string(),
            right: psi0.signature().to_string(),
        });
    }
    expm_hermitian(h, t, sign)?.apply(psi0)
}

/// `‖e^{i(H_A⊗1 + 1⊗H_B)t} − e^{iH_A t} ⊗ e^{iH_B t}‖_max`.
///
/// The two generators must live on disjoint label sets; the full space is
/// their concatenation.
pub fn verify_factorization(h_a: &Operator, h_b: &Operator, t: f64) -> Result<f64> {
    if let Some(label) = h_a
        .signature()
        .labels()
        .into_iter()
        .find(|l| h_b.signature().contains(l))
    {
        return Err(LabError::OverlappingSupports(label.to_string()));
    }
    let full = h_a.signature().concat(h_b.signature())?;
    let joint = expm_hermitian(&local_sum(h_a, h_b, &full)?, t, PhaseSign::Plus)?;
    let product = kron(&[
        &expm_hermitian(h_a, t, PhaseSign::Plus)?,
        &expm_hermitian(h_b, t, PhaseSign::Plus)?,
    ])?;
    Ok(max_abs_diff(joint.entries(), product.entries()))
}

/// Frobenius-orthogonal split of a generator into local and interaction parts.
#[derive(Debug, Clone)]
pub struct LocalityDecomposition {
    /// `‖H − H_A⊗1 − 1⊗H_B‖_F`.
    pub defect: f64,
    /// `H_A⊗1 + 1⊗H_B` embedded in the original signature.
    pub local: Operator,
    /// `H − local`.
    pub interaction: Operator,
    pub part_a: Operator,
    pub part_b: Operator,
}

/// Project `h` onto `span{X⊗1, 1⊗Y}` for the bipartition `(side_a | side_b)`.
///
/// The identity component is shared equally between the two local parts.
pub fn generator_locality_defect(
    h: &Operator,
    side_a: &[&str],
    side_b: &[&str],
) -> Result<LocalityDecomposition> {
    let sig = h.signature();
    if side_a.is_empty() || side_b.is_empty() {
        return Err(LabError::InvalidPartition(
            "both sides must be nonempty".into(),
        ));
    }
    if let Some(l) = side_a.iter().find(|l| side_b.contains(l)) {
        return Err(LabError::InvalidPartition(format!(
            "`{l}` appears on both sides"
        )));
    }
    for l in side_a.iter().chain(side_b) {
        if !sig.contains(l) {
            return Err(LabError::InvalidPartition(format!("unknown label `{l}`")));
        }
    }
    if side_a.len() + side_b.len() != sig.len() {
        return Err(LabError::InvalidPartition(format!(
            "sides do not cover [{sig}]"
        )));
    }

    let tr_b = partial_trace_operator(h, side_a)?;
    let tr_a = partial_trace_operator(h, side_b)?;
    let (d_a, d_b) = (tr_b.dim() as f64, tr_a.dim() as f64);
    let shared = h.trace() / (d_a * d_b) * c64(0.5, 0.0);
    let part_a = Operator::new(
        tr_b.entries() / c64(d_b, 0.0)
            - crate::tensor::CMatrix::identity(tr_b.dim(), tr_b.dim()) * shared,
        tr_b.signature().clone(),
    )?;
    let part_b = Operator::new(
        tr_a.entries() / c64(d_a, 0.0)
            - crate::tensor::CMatrix::identity(tr_a.dim(), tr_a.dim()) * shared,
        tr_a.signature().clone(),
    )?;
    let labels_a = part_a.signature().labels();
    let labels_b = part_b.signature().labels();
    let local = embed_on(&part_a, sig, &labels_a)?.add(&embed_on(&part_b, sig, &labels_b)?)?;
    let interaction = Operator::new(h.entries() - local.entries(), sig.clone())?;
    Ok(LocalityDecomposition {
        defect: interaction.frobenius_norm(),
        local,
        interaction,
        part_a,
        part_b,
    })
}
