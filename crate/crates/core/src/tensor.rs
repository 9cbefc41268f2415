//! Dense complex linear algebra over labeled composite Hilbert spaces.
//!
//! Composite basis indices follow the declaration order of a
//! [`SpaceSignature`]: the leftmost subsystem varies slowest, so for
//! `A:2, B:3` the basis state `|a, b⟩` sits at index `3a + b`.

use std::fmt;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{LabError, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Maximum tolerated `‖M − M†‖_max` for an operator flagged Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Maximum tolerated `‖M†M − I‖_max` for an operator flagged unitary.
pub const UNITARY_TOL: f64 = 1e-10;
/// Norm tolerance for normalized kets and unit-trace density operators.
pub const NORM_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted in a density operator.
pub const PHYSICALITY_TOL: f64 = 1e-10;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subsystem {
    pub label: String,
    pub dim: usize,
}

/// Ordered list of labeled subsystem dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Subsystem>", into = "Vec<Subsystem>")]
pub struct SpaceSignature {
    subsystems: Vec<Subsystem>,
}

impl TryFrom<Vec<Subsystem>> for SpaceSignature {
    type Error = LabError;

    fn try_from(subsystems: Vec<Subsystem>) -> Result<Self> {
        SpaceSignature::new(subsystems.into_iter().map(|s| (s.label, s.dim)))
    }
}

impl From<SpaceSignature> for Vec<Subsystem> {
    fn from(sig: SpaceSignature) -> Self {
        sig.subsystems
    }
}

impl SpaceSignature {
    pub fn new<I, S>(subsystems: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut out: Vec<Subsystem> = Vec::new();
        for (label, dim) in subsystems {
            let label = label.into();
            if dim == 0 {
                return Err(LabError::ZeroDimension(label));
            }
            if out.iter().any(|s| s.label == label) {
                return Err(LabError::DuplicateLabel(label));
            }
            out.push(Subsystem { label, dim });
        }
        if out.is_empty() {
            return Err(LabError::EmptySignature);
        }
        Ok(Self { subsystems: out })
    }

    pub fn single(label: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new([(label, dim)])
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    /// Total dimension, the product of the subsystem dimensions.
    pub fn dim(&self) -> usize {
        self.subsystems.iter().map(|s| s.dim).product()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.subsystems.iter().map(|s| s.dim).collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.subsystems.iter().map(|s| s.label.as_str()).collect()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.subsystems.iter().any(|s| s.label == label)
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.subsystems
            .iter()
            .position(|s| s.label == label)
            .ok_or_else(|| LabError::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.subsystems[self.position(label)?].dim)
    }

    /// Signature of `self ⊗ other`; labels must stay unique.
    pub fn concat(&self, other: &SpaceSignature) -> Result<Self> {
        Self::new(
            self.subsystems
                .iter()
                .chain(other.subsystems.iter())
                .map(|s| (s.label.clone(), s.dim)),
        )
    }

    /// Sub-signature holding `labels`, kept in this signature's order.
    pub fn select(&self, labels: &[&str]) -> Result<Self> {
        self.positions_of(labels)?;
        Self::new(
            self.subsystems
                .iter()
                .filter(|s| labels.contains(&s.label.as_str()))
                .map(|s| (s.label.clone(), s.dim)),
        )
    }

    /// Labels not in `labels`, in signature order.
    pub fn complement(&self, labels: &[&str]) -> Result<Vec<String>> {
        self.positions_of(labels)?;
        Ok(self
            .subsystems
            .iter()
            .filter(|s| !labels.contains(&s.label.as_str()))
            .map(|s| s.label.clone())
            .collect())
    }

    /// Rename subsystems positionally, keeping dimensions.
    pub fn relabel(&self, labels: &[&str]) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(LabError::DimensionMismatch {
                expected: self.len(),
                found: labels.len(),
            });
        }
        Self::new(
            labels
                .iter()
                .zip(&self.subsystems)
                .map(|(l, s)| (l.to_string(), s.dim)),
        )
    }

    fn positions_of(&self, labels: &[&str]) -> Result<Vec<usize>> {
        let mut positions = Vec::with_capacity(labels.len());
        for (k, label) in labels.iter().enumerate() {
            if labels[..k].contains(label) {
                return Err(LabError::DuplicateLabel(label.to_string()));
            }
            positions.push(self.position(label)?);
        }
        Ok(positions)
    }
}

impl fmt::Display for SpaceSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, s) in self.subsystems.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}:{}", s.label, s.dim)?;
        }
        Ok(())
    }
}

fn check_same_signature(a: &SpaceSignature, b: &SpaceSignature) -> Result<()> {
    if a != b {
        return Err(LabError::SignatureMismatch {
            left: a.to_string(),
            right: b.to_string(),
        });
    }
    Ok(())
}

/// Groups full-space basis indices into fibers over the complement of the
/// selected subsystems.
///
/// `fibers[r][s]` is the composite index whose selected digits (taken in the
/// order of `selected`) encode `s` and whose remaining digits (in signature
/// order) encode `r`.
fn fibers(sig: &SpaceSignature, selected: &[usize]) -> Vec<Vec<usize>> {
    let dims = sig.dims();
    let sel_dim: usize = selected.iter().map(|&p| dims[p]).product();
    let rest: Vec<usize> = (0..dims.len()).filter(|p| !selected.contains(p)).collect();
    let rest_dim: usize = rest.iter().map(|&p| dims[p]).product();

    let mut out = vec![vec![0usize; sel_dim]; rest_dim];
    let mut digits = vec![0usize; dims.len()];
    for full in 0..sig.dim() {
        let mut rem = full;
        for p in (0..dims.len()).rev() {
            digits[p] = rem % dims[p];
            rem /= dims[p];
        }
        let s = selected.iter().fold(0, |acc, &p| acc * dims[p] + digits[p]);
        let r = rest.iter().fold(0, |acc, &p| acc * dims[p] + digits[p]);
        out[r][s] = full;
    }
    out
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    max_abs(&(m.adjoint() * m - CMatrix::identity(n, n)))
}

/// `‖a − b‖_max`, the largest entrywise modulus of the difference.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    max_abs(&(a - b))
}

/// Kronecker product of two matrices: entry `(iK+k, jL+l)` is `a(i,j)·b(k,l)`.
pub fn kron_matrices(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues and the
/// matching orthonormal eigenvectors as columns.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> CMatrix {
        let (o, l, i) = (c64(0.0, 0.0), c64(1.0, 0.0), c64(0.0, 1.0));
        match self {
            Pauli::I => CMatrix::from_row_slice(2, 2, &[l, o, o, l]),
            Pauli::X => CMatrix::from_row_slice(2, 2, &[o, l, l, o]),
            Pauli::Y => CMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
            Pauli::Z => CMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
        }
    }

    /// The Pauli matrix as an operator on a single qubit labeled `label`.
    pub fn on(self, label: &str) -> Operator {
        Operator {
            entries: self.matrix(),
            signature: SpaceSignature::single(label, 2).expect("nonempty label set"),
            hermitian: true,
            unitary: true,
        }
    }
}

/// Dense complex square matrix over a signature, with declared
/// Hermiticity and unitarity flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    entries: CMatrix,
    signature: SpaceSignature,
    hermitian: bool,
    unitary: bool,
}

impl Operator {
    /// Wrap a matrix without asserting any structure.
    pub fn new(entries: CMatrix, signature: SpaceSignature) -> Result<Self> {
        let d = signature.dim();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(LabError::DimensionMismatch {
                expected: d,
                found: entries.nrows().max(entries.ncols()),
            });
        }
        Ok(Self {
            entries,
            signature,
            hermitian: false,
            unitary: false,
        })
    }

    /// Wrap a matrix and flag it Hermitian, verifying the defect bound.
    pub fn hermitian(entries: CMatrix, signature: SpaceSignature) -> Result<Self> {
        let mut op = Self::new(entries, signature)?;
        let defect = hermiticity_defect(&op.entries);
        if defect >= HERMITIAN_TOL {
            return Err(LabError::NotHermitian(defect));
        }
        op.hermitian = true;
        Ok(op)
    }

    /// Wrap a matrix and flag it unitary, verifying the defect bound.
    pub fn unitary(entries: CMatrix, signature: SpaceSignature) -> Result<Self> {
        Self::new(entries, signature)?.checked_unitary()
    }

    /// Set the unitary flag after verifying the defect bound.
    pub fn checked_unitary(mut self) -> Result<Self> {
        let defect = self.unitarity_defect();
        if defect >= UNITARY_TOL {
            return Err(LabError::Numerical(format!(
                "matrix is not unitary (defect {defect:.3e})"
            )));
        }
        self.unitary = true;
        Ok(self)
    }

    pub fn from_real(rows: usize, values: &[f64], signature: SpaceSignature) -> Result<Self> {
        if values.len() != rows * rows {
            return Err(LabError::DimensionMismatch {
                expected: rows * rows,
                found: values.len(),
            });
        }
        let m = CMatrix::from_row_iterator(rows, rows, values.iter().map(|&v| c64(v, 0.0)));
        Self::new(m, signature)
    }

    pub fn identity(signature: SpaceSignature) -> Self {
        let d = signature.dim();
        Self {
            entries: CMatrix::identity(d, d),
            signature,
            hermitian: true,
            unitary: true,
        }
    }

    pub fn zeros(signature: SpaceSignature) -> Self {
        let d = signature.dim();
        Self {
            entries: CMatrix::zeros(d, d),
            signature,
            hermitian: true,
            unitary: false,
        }
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn signature(&self) -> &SpaceSignature {
        &self.signature
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.entries)
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.entries)
    }

    /// Same matrix on renamed subsystems.
    pub fn relabel(&self, labels: &[&str]) -> Result<Self> {
        Ok(Self {
            signature: self.signature.relabel(labels)?,
            ..self.clone()
        })
    }

    pub fn dagger(&self) -> Self {
        Self {
            entries: self.entries.adjoint(),
            ..self.clone()
        }
    }

    /// Real rescaling; Hermiticity survives, unitarity only for |c| = 1.
    pub fn scale(&self, c: f64) -> Self {
        Self {
            entries: &self.entries * c64(c, 0.0),
            signature: self.signature.clone(),
            hermitian: self.hermitian,
            unitary: self.unitary && (c.abs() - 1.0).abs() < f64::EPSILON,
        }
    }

    pub fn add(&self, other: &Operator) -> Result<Self> {
        check_same_signature(&self.signature, &other.signature)?;
        Ok(Self {
            entries: &self.entries + &other.entries,
            signature: self.signature.clone(),
            hermitian: self.hermitian && other.hermitian,
            unitary: false,
        })
    }

    pub fn sub(&self, other: &Operator) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn matmul(&self, other: &Operator) -> Result<Self> {
        check_same_signature(&self.signature, &other.signature)?;
        Ok(Self {
            entries: &self.entries * &other.entries,
            signature: self.signature.clone(),
            hermitian: false,
            unitary: self.unitary && other.unitary,
        })
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &Operator) -> Result<Self> {
        check_same_signature(&self.signature, &other.signature)?;
        let m = &self.entries * &other.entries - &other.entries * &self.entries;
        Self::new(m, self.signature.clone())
    }

    pub fn apply(&self, ket: &Ket) -> Result<Ket> {
        check_same_signature(&self.signature, &ket.signature)?;
        Ok(Ket {
            amplitudes: &self.entries * &ket.amplitudes,
            signature: ket.signature.clone(),
        })
    }

    /// `⟨ψ|M|ψ⟩`.
    pub fn expectation(&self, ket: &Ket) -> Result<C64> {
        check_same_signature(&self.signature, &ket.signature)?;
        Ok(ket.amplitudes.dotc(&(&self.entries * &ket.amplitudes)))
    }

    /// `Tr(M·ρ)`.
    pub fn expectation_in(&self, rho: &DensityOp) -> Result<C64> {
        check_same_signature(&self.signature, &rho.signature)?;
        Ok((&self.entries * &rho.entries).trace())
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }

    pub fn max_norm(&self) -> f64 {
        max_abs(&self.entries)
    }

    /// Eigenvalues in ascending order; requires the Hermitian flag.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        self.require_hermitian()?;
        Ok(eigvalsh(&self.entries))
    }

    /// Accept when flagged Hermitian or when the defect is below tolerance.
    pub fn require_hermitian(&self) -> Result<()> {
        if self.hermitian {
            return Ok(());
        }
        let defect = self.hermiticity_defect();
        if defect < HERMITIAN_TOL {
            Ok(())
        } else {
            Err(LabError::NotHermitian(defect))
        }
    }
}

/// Complex amplitude vector over a composite basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amplitudes: CVector,
    signature: SpaceSignature,
}

impl Ket {
    pub fn new(amplitudes: CVector, signature: SpaceSignature) -> Result<Self> {
        if amplitudes.len() != signature.dim() {
            return Err(LabError::DimensionMismatch {
                expected: signature.dim(),
                found: amplitudes.len(),
            });
        }
        Ok(Self {
            amplitudes,
            signature,
        })
    }

    /// Like [`Ket::new`] but rejects vectors whose norm is not 1 ± 1e-10.
    pub fn normalized(amplitudes: CVector, signature: SpaceSignature) -> Result<Self> {
        let ket = Self::new(amplitudes, signature)?;
        let norm = ket.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(LabError::NotNormalized(norm));
        }
        Ok(ket)
    }

    pub fn from_slice(amplitudes: &[C64], signature: SpaceSignature) -> Result<Self> {
        Self::new(CVector::from_column_slice(amplitudes), signature)
    }

    pub fn basis(signature: SpaceSignature, index: usize) -> Result<Self> {
        let d = signature.dim();
        if index >= d {
            return Err(LabError::InvalidArgument(format!(
                "basis index {index} out of range for dimension {d}"
            )));
        }
        let mut v = CVector::zeros(d);
        v[index] = c64(1.0, 0.0);
        Ok(Self {
            amplitudes: v,
            signature,
        })
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn signature(&self) -> &SpaceSignature {
        &self.signature
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Rescale to unit norm; fails on the zero vector.
    pub fn renormalize(&self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(LabError::NotNormalized(norm));
        }
        Ok(Self {
            amplitudes: self.amplitudes.unscale(norm),
            signature: self.signature.clone(),
        })
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Ket) -> Result<C64> {
        check_same_signature(&self.signature, &other.signature)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|self⟩ ⊗ |other⟩`.
    pub fn tensor(&self, other: &Ket) -> Result<Self> {
        Ok(Self {
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
            signature: self.signature.concat(&other.signature)?,
        })
    }

    pub fn density(&self) -> DensityOp {
        DensityOp {
            entries: &self.amplitudes * self.amplitudes.adjoint(),
            signature: self.signature.clone(),
        }
    }

    pub fn max_abs_diff(&self, other: &Ket) -> f64 {
        (&self.amplitudes - &other.amplitudes)
            .iter()
            .fold(0.0, |acc, z| acc.max(z.norm()))
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix over a signature.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOp {
    entries: CMatrix,
    signature: SpaceSignature,
}

impl DensityOp {
    /// Validating constructor: Hermitian within 1e-12, trace 1 ± 1e-10,
    /// eigenvalues ≥ −1e-10.
    pub fn new(entries: CMatrix, signature: SpaceSignature) -> Result<Self> {
        let d = signature.dim();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(LabError::DimensionMismatch {
                expected: d,
                found: entries.nrows().max(entries.ncols()),
            });
        }
        let defect = hermiticity_defect(&entries);
        if defect >= HERMITIAN_TOL {
            return Err(LabError::InvalidDensity(format!(
                "hermiticity defect {defect:.3e}"
            )));
        }
        let tr = entries.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(LabError::InvalidDensity(format!("trace {tr}")));
        }
        let min_eig = eigvalsh(&entries)[0];
        if min_eig < -PHYSICALITY_TOL {
            return Err(LabError::InvalidDensity(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { entries, signature })
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn signature(&self) -> &SpaceSignature {
        &self.signature
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigvalsh(&self.entries)
    }

    pub fn purity(&self) -> f64 {
        (&self.entries * &self.entries).trace().re
    }

    /// `ρ ⊗ σ`.
    pub fn tensor(&self, other: &DensityOp) -> Result<Self> {
        Ok(Self {
            entries: self.entries.kronecker(&other.entries),
            signature: self.signature.concat(&other.signature)?,
        })
    }
}

#[derive(Serialize)]
struct DensityOpRepr<'a> {
    signature: &'a SpaceSignature,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Serialize for DensityOp {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows = |f: fn(&C64) -> f64| -> Vec<Vec<f64>> {
            self.entries
                .row_iter()
                .map(|row| row.iter().map(f).collect())
                .collect()
        };
        DensityOpRepr {
            signature: &self.signature,
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
        .serialize(serializer)
    }
}

/// Tensor product of one or more operators, signatures concatenated in order.
pub fn kron(factors: &[&Operator]) -> Result<Operator> {
    let (first, rest) = factors.split_first().ok_or(LabError::EmptyFactors)?;
    let mut acc = (*first).clone();
    for f in rest {
        acc = Operator {
            entries: acc.entries.kronecker(&f.entries),
            signature: acc.signature.concat(&f.signature)?,
            hermitian: acc.hermitian && f.hermitian,
            unitary: acc.unitary && f.unitary,
        };
    }
    Ok(acc)
}

/// `op` tensored with the identity on every other subsystem of `signature`.
///
/// `op` acts on the single subsystem `target_label`; its own label is ignored.
pub fn embed(op: &Operator, signature: &SpaceSignature, target_label: &str) -> Result<Operator> {
    let target = signature.dim_of(target_label)?;
    if op.dim() != target {
        return Err(LabError::DimensionMismatch {
            expected: target,
            found: op.dim(),
        });
    }
    embed_on(op, signature, &[target_label])
}

/// Embed an operator acting on the ordered subsystems `labels` (which need
/// not be adjacent in `signature`) into the full space.
pub fn embed_on(op: &Operator, signature: &SpaceSignature, labels: &[&str]) -> Result<Operator> {
    let positions = signature.positions_of(labels)?;
    let sel_dim: usize = positions.iter().map(|&p| signature.dims()[p]).product();
    if op.dim() != sel_dim {
        return Err(LabError::DimensionMismatch {
            expected: sel_dim,
            found: op.dim(),
        });
    }
    let d = signature.dim();
    let mut m = CMatrix::zeros(d, d);
    for fiber in fibers(signature, &positions) {
        for (a, &i) in fiber.iter().enumerate() {
            for (b, &j) in fiber.iter().enumerate() {
                m[(i, j)] = op.entries[(a, b)];
            }
        }
    }
    Ok(Operator {
        entries: m,
        signature: signature.clone(),
        hermitian: op.hermitian,
        unitary: op.unitary,
    })
}

/// Embed an operator into `signature` using the operator's own labels.
pub fn embed_labeled(op: &Operator, signature: &SpaceSignature) -> Result<Operator> {
    let labels = op.signature.labels();
    for s in op.signature.subsystems() {
        let found = signature.dim_of(&s.label)?;
        if found != s.dim {
            return Err(LabError::DimensionMismatch {
                expected: found,
                found: s.dim,
            });
        }
    }
    embed_on(op, signature, &labels)
}

fn partial_trace_matrix(
    m: &CMatrix,
    signature: &SpaceSignature,
    keep_labels: &[&str],
) -> Result<(CMatrix, SpaceSignature)> {
    if keep_labels.is_empty() {
        return Err(LabError::EmptyKeepSet);
    }
    let kept = signature.select(keep_labels)?;
    let positions: Vec<usize> = kept
        .labels()
        .iter()
        .map(|l| signature.position(l))
        .collect::<Result<_>>()?;
    let k = kept.dim();
    let mut out = CMatrix::zeros(k, k);
    for fiber in fibers(signature, &positions) {
        for (a, &i) in fiber.iter().enumerate() {
            for (b, &j) in fiber.iter().enumerate() {
                out[(a, b)] += m[(i, j)];
            }
        }
    }
    Ok((out, kept))
}

/// Reduced state on `keep_labels`, returned in signature order.
pub fn partial_trace(rho: &DensityOp, keep_labels: &[&str]) -> Result<DensityOp> {
    let (entries, signature) = partial_trace_matrix(&rho.entries, &rho.signature, keep_labels)?;
    Ok(DensityOp { entries, signature })
}

/// Partial trace of an arbitrary operator (no normalization).
pub fn partial_trace_operator(op: &Operator, keep_labels: &[&str]) -> Result<Operator> {
    let (entries, signature) = partial_trace_matrix(&op.entries, &op.signature, keep_labels)?;
    Ok(Operator {
        entries,
        signature,
        hermitian: op.hermitian,
        unitary: false,
    })
}

/// Sign of the exponent in `e^{±iHt}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseSign {
    #[default]
    Plus,
    Minus,
}

impl PhaseSign {
    pub fn value(self) -> f64 {
        match self {
            PhaseSign::Plus => 1.0,
            PhaseSign::Minus => -1.0,
        }
    }
}

/// `e^{±iHt}` through the eigendecomposition of the Hermitian generator.
pub fn expm_hermitian(h: &Operator, t: f64, sign: PhaseSign) -> Result<Operator> {
    h.require_hermitian()?;
    let n = h.dim();
    if t == 0.0 {
        return Ok(Operator::identity(h.signature.clone()));
    }
    let (values, vectors) = eigh(&h.entries);
    let s = sign.value();
    let phases = CVector::from_iterator(n, values.iter().map(|&e| c64(0.0, s * e * t).exp()));
    let mut scaled = vectors.clone();
    for (mut col, &p) in scaled.column_iter_mut().zip(phases.iter()) {
        col *= p;
    }
    let u = scaled * vectors.adjoint();
    Operator::unitary(u, h.signature.clone())
}

/// Half the trace norm of `a − b`, in `[0, 1]`.
pub fn trace_distance(a: &DensityOp, b: &DensityOp) -> Result<f64> {
    check_same_signature(&a.signature, &b.signature)?;
    let diff = &a.entries - &b.entries;
    let sum: f64 = eigvalsh(&diff).iter().map(|e| e.abs()).sum();
    Ok((0.5 * sum).min(1.0))
}
