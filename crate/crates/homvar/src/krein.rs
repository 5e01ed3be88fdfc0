//! Linear algebra of the indefinite inner product space `(V, ≺·|·≻)`.
//!
//! `V ≃ ℂ^{2n}` carries the spin scalar product `≺u|v≻ = ⟨u|Sv⟩` in the fixed
//! standard basis, where `S = diag(1,…,1,−1,…,−1)` is the signature matrix.
//! This module provides the adjoint `A* = S A† S`, the s-unitary and
//! positivity predicates, eigenvalues with algebraic multiplicity, the
//! spectral weight `|A| = Σ|λᵢ|`, the column-sum norm, and approximate
//! diagonalization of operators with `−M` positive by s-unitaries.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, EigVals, Eigh, Inverse, UPLO};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for the self-adjointness / unitarity / positivity predicates.
pub const PREDICATE_TOL: f64 = 1e-9;
/// Default error budget for [`SignatureSpace::approximate_diagonalize`].
pub const DIAG_EPSILON: f64 = 1e-6;
/// Pivots with `|≺v|v≻|` below this threshold count as neutral.
const NEUTRAL_THRESHOLD: f64 = 1e-8;

/// The indefinite inner product space `(ℂ^{2n}, ≺·|·≻)` of signature `(n, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureSpace {
    n: usize,
}

impl SignatureSpace {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("signature space needs n >= 1"));
        }
        Ok(SignatureSpace { n })
    }

    /// Half-dimension `n`.
    pub fn half_dim(&self) -> usize {
        self.n
    }

    /// Full dimension `2n`.
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// Sign of the i-th basis vector: `+1` for `i < n`, `−1` otherwise.
    pub fn sign(&self, i: usize) -> f64 {
        if i < self.n {
            1.0
        } else {
            -1.0
        }
    }

    /// The signature matrix `S = diag(1,…,1,−1,…,−1)`.
    pub fn signature_matrix(&self) -> Operator {
        let dim = self.dim();
        let mut s = Array2::zeros((dim, dim));
        for i in 0..dim {
            s[(i, i)] = Complex64::new(self.sign(i), 0.0);
        }
        Operator { data: s }
    }

    fn check_dim(&self, a: &Operator) -> Result<()> {
        if a.dim() != self.dim() {
            return Err(Error::dim(format!(
                "operator dim {} does not match space dim {}",
                a.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn check_vec(&self, u: &[Complex64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::dim(format!(
                "vector length {} does not match space dim {}",
                u.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Spin scalar product `≺u|v≻ = ⟨u|Sv⟩`, conjugate-linear in `u`.
    pub fn ssp(&self, u: &[Complex64], v: &[Complex64]) -> Result<Complex64> {
        self.check_vec(u)?;
        self.check_vec(v)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.dim() {
            acc += u[i].conj() * self.sign(i) * v[i];
        }
        Ok(acc)
    }

    /// Adjoint with respect to `≺·|·≻`: `A* = S A† S`.
    pub fn adjoint(&self, a: &Operator) -> Result<Operator> {
        self.check_dim(a)?;
        let dim = self.dim();
        let mut out = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                out[(i, j)] = self.sign(i) * self.sign(j) * a.data[(j, i)].conj();
            }
        }
        Ok(Operator { data: out })
    }

    /// `A = A*` within `tol` in the column-sum norm.
    pub fn is_s_selfadjoint(&self, a: &Operator, tol: f64) -> Result<bool> {
        let adj = self.adjoint(a)?;
        Ok(a.sub(&adj).column_sum_norm() <= tol)
    }

    /// `U U* = 1` within `tol` in the column-sum norm.
    pub fn is_s_unitary(&self, u: &Operator, tol: f64) -> Result<bool> {
        let adj = self.adjoint(u)?;
        let prod = u.matmul(&adj);
        Ok(prod.sub(&Operator::identity(self.dim())).column_sum_norm() <= tol)
    }

    /// `≺u|Bu≻ ≥ 0` for all `u`: equivalently `SB` Hermitian with minimum
    /// eigenvalue `≥ −tol`.
    pub fn is_positive_wrt_ssp(&self, b: &Operator, tol: f64) -> Result<bool> {
        self.check_dim(b)?;
        let sb = self.signature_matrix().matmul(b);
        let herm_defect = sb.sub(&sb.dagger()).column_sum_norm();
        if herm_defect > tol {
            return Ok(false);
        }
        // Hermitian part; eigh gives real eigenvalues.
        let h = sb.add(&sb.dagger()).scale_re(0.5);
        let (evals, _) = h
            .data
            .eigh(UPLO::Lower)
            .map_err(|e| Error::Eigensolver {
                norm_one: h.column_sum_norm(),
                detail: e.to_string(),
            })?;
        let min = evals.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(min >= -tol)
    }

    /// Approximately diagonalize `M` (with `−M` positive w.r.t. `≺·|·≻`) by an
    /// s-unitary: `U M U⁻¹ = −D + Δ` with `D` real diagonal sorted descending
    /// and `‖Δ‖₁ < ε`.
    ///
    /// Eigenvectors are grouped into eigenvalue clusters and S-orthonormalized
    /// by Gram–Schmidt in `≺·|·≻`; a neutral pivot triggers one retry on the
    /// perturbed input `M − δ′S` with `δ′ = ε/(8n)`, and a second failure is a
    /// [`Error::NeutralDegeneracy`].
    pub fn approximate_diagonalize(&self, m: &Operator, eps: f64) -> Result<ApproxDiag> {
        self.check_dim(m)?;
        if !(eps > 0.0) {
            return Err(Error::validation("diagonalization epsilon must be positive"));
        }
        let pos_tol = PREDICATE_TOL * (1.0 + m.column_sum_norm());
        if !self.is_positive_wrt_ssp(&m.neg(), pos_tol)? {
            return Err(Error::validation(
                "approximate_diagonalize requires -M positive w.r.t. the spin scalar product",
            ));
        }
        match self.try_diagonalize(m, m, eps) {
            Ok(res) => Ok(res),
            Err(Error::NeutralDegeneracy(_)) => {
                let delta_prime = eps / (8.0 * self.n as f64);
                let perturbed = m.sub(&self.signature_matrix().scale_re(delta_prime));
                self.try_diagonalize(&perturbed, m, eps)
            }
            Err(e) => Err(e),
        }
    }

    /// One diagonalization attempt. `work` is eigendecomposed; the returned
    /// residual `Δ` is always measured against `orig`.
    fn try_diagonalize(&self, work: &Operator, orig: &Operator, eps: f64) -> Result<ApproxDiag> {
        let dim = self.dim();
        let scale = 1.0 + work.column_sum_norm();
        let (vals, vecs) = work.data.eig().map_err(|e| Error::Eigensolver {
            norm_one: work.column_sum_norm(),
            detail: e.to_string(),
        })?;

        // Positive operators have real spectrum; a visibly complex pair signals
        // a defective (neutral) structure that the perturbation may lift.
        let imag_mass: f64 = vals.iter().map(|l| l.im.abs()).sum();
        if imag_mass > eps / 4.0 {
            return Err(Error::NeutralDegeneracy(format!(
                "spectrum not real within budget: sum |Im lambda| = {imag_mass:.3e}"
            )));
        }

        // Order by descending real eigenvalue; clusters share a pivot ordering.
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| vals[b].re.total_cmp(&vals[a].re));

        // S-Gram-Schmidt over the ordered eigenvectors. Projecting against all
        // previous vectors orthonormalizes within clusters and sweeps out the
        // residual cross-cluster contamination.
        let mut basis: Vec<Array1<Complex64>> = Vec::with_capacity(dim);
        let mut signs: Vec<f64> = Vec::with_capacity(dim);
        let mut lambdas: Vec<f64> = Vec::with_capacity(dim);
        for &idx in &order {
            let mut w: Array1<Complex64> = vecs.column(idx).to_owned();
            for _pass in 0..2 {
                for (u, &sigma) in basis.iter().zip(&signs) {
                    let coeff = sigma
                        * self
                            .ssp(u.as_slice().unwrap(), w.as_slice().unwrap())
                            .expect("dims checked");
                    w = &w - &u.mapv(|x| x * coeff);
                }
            }
            let euclid = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if euclid < 1e-14 * scale {
                return Err(Error::NeutralDegeneracy(
                    "eigenvector collapsed under S-orthogonalization".into(),
                ));
            }
            w.mapv_inplace(|x| x / euclid);
            let q = self
                .ssp(w.as_slice().unwrap(), w.as_slice().unwrap())
                .expect("dims checked")
                .re;
            if q.abs() < NEUTRAL_THRESHOLD {
                return Err(Error::NeutralDegeneracy(format!(
                    "pivot with |<v|v>| = {:.3e} below threshold",
                    q.abs()
                )));
            }
            let sigma = q.signum();
            w.mapv_inplace(|x| x / q.abs().sqrt());
            basis.push(w);
            signs.push(sigma);
            lambdas.push(vals[idx].re);
        }

        let n_plus = signs.iter().filter(|&&s| s > 0.0).count();
        if n_plus != self.n {
            return Err(Error::NeutralDegeneracy(format!(
                "signature split ({}, {}) does not match ({}, {})",
                n_plus,
                dim - n_plus,
                self.n,
                self.n
            )));
        }

        // Slot layout: positive-sign vectors first, each block sorted by
        // descending D-entry (= -lambda). Theory puts the positive block at
        // D >= 0 and the negative block at D <= 0, so this is a global
        // descending order after the zero clamp below.
        let clamp = 1e-13 * scale;
        let mut plus: Vec<usize> = (0..dim).filter(|&k| signs[k] > 0.0).collect();
        let mut minus: Vec<usize> = (0..dim).filter(|&k| signs[k] < 0.0).collect();
        let d_of = |k: usize| {
            let d = -lambdas[k];
            if d.abs() <= clamp {
                0.0
            } else {
                d
            }
        };
        plus.sort_by(|&a, &b| d_of(b).total_cmp(&d_of(a)));
        minus.sort_by(|&a, &b| d_of(b).total_cmp(&d_of(a)));
        let slots: Vec<usize> = plus.into_iter().chain(minus).collect();

        let mut t = Array2::zeros((dim, dim));
        let mut d = Vec::with_capacity(dim);
        for (col, &k) in slots.iter().enumerate() {
            for row in 0..dim {
                t[(row, col)] = basis[k][row];
            }
            d.push(d_of(k));
        }
        let t = Operator { data: t };
        // T is s-unitary by construction, so U = T⁻¹ = S T† S.
        let u = self.adjoint(&t).expect("dims checked");

        let unitary_defect = u
            .matmul(&self.adjoint(&u)?)
            .sub(&Operator::identity(dim))
            .column_sum_norm();
        if unitary_defect > eps / 10.0 {
            return Err(Error::NeutralDegeneracy(format!(
                "s-unitarity defect {unitary_defect:.3e} exceeds eps/10"
            )));
        }

        let conj = u.matmul(orig).matmul(&t);
        let delta = conj.add(&Operator::diag_re(&d));
        if delta.column_sum_norm() >= eps {
            return Err(Error::NeutralDegeneracy(format!(
                "residual off-diagonal norm {:.3e} exceeds eps",
                delta.column_sum_norm()
            )));
        }
        Ok(ApproxDiag { u, d, delta })
    }
}

/// Result of [`SignatureSpace::approximate_diagonalize`]:
/// `U M U⁻¹ = −diag(d) + delta`.
#[derive(Clone, Debug)]
pub struct ApproxDiag {
    pub u: Operator,
    pub d: Vec<f64>,
    pub delta: Operator,
}

/// A bounded linear operator on `V`, stored as a dense complex matrix in the
/// fixed standard basis. Entries are finite by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    data: Array2<Complex64>,
}

impl Operator {
    pub fn from_array(data: Array2<Complex64>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::dim(format!(
                "operator must be square, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("operator entry is NaN or infinite".into()));
        }
        Ok(Operator { data })
    }

    pub fn zeros(dim: usize) -> Self {
        Operator {
            data: Array2::zeros((dim, dim)),
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = Array2::zeros((dim, dim));
        for i in 0..dim {
            data[(i, i)] = Complex64::new(1.0, 0.0);
        }
        Operator { data }
    }

    pub fn diag_re(entries: &[f64]) -> Self {
        let dim = entries.len();
        let mut data = Array2::zeros((dim, dim));
        for (i, &x) in entries.iter().enumerate() {
            data[(i, i)] = Complex64::new(x, 0.0);
        }
        Operator { data }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[(i, j)]
    }

    pub fn matmul(&self, other: &Operator) -> Operator {
        Operator {
            data: self.data.dot(&other.data),
        }
    }

    /// Euclidean adjoint `A†` (conjugate transpose).
    pub fn dagger(&self) -> Operator {
        Operator {
            data: self.data.t().mapv(|z| z.conj()),
        }
    }

    pub fn add(&self, other: &Operator) -> Operator {
        Operator {
            data: &self.data + &other.data,
        }
    }

    pub fn sub(&self, other: &Operator) -> Operator {
        Operator {
            data: &self.data - &other.data,
        }
    }

    pub fn neg(&self) -> Operator {
        Operator {
            data: self.data.mapv(|z| -z),
        }
    }

    pub fn scale(&self, factor: Complex64) -> Operator {
        Operator {
            data: self.data.mapv(|z| z * factor),
        }
    }

    pub fn scale_re(&self, factor: f64) -> Operator {
        Operator {
            data: self.data.mapv(|z| z * factor),
        }
    }

    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.dim() {
            return Err(Error::dim("matrix-vector length mismatch"));
        }
        let x = Array1::from(v.to_vec());
        Ok(self.data.dot(&x).to_vec())
    }

    pub fn trace(&self) -> Complex64 {
        self.data.diag().sum()
    }

    /// Column-sum norm `‖A‖₁ = max_j Σ_i |A_ij|`.
    pub fn column_sum_norm(&self) -> f64 {
        let mut best = 0.0f64;
        for j in 0..self.dim() {
            let s: f64 = self.data.column(j).iter().map(|z| z.norm()).sum();
            best = best.max(s);
        }
        best
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// All eigenvalues with algebraic multiplicity, canonically ordered.
    pub fn eigenvalues(&self) -> Result<EigenList> {
        let vals = self.data.eigvals().map_err(|e| Error::Eigensolver {
            norm_one: self.column_sum_norm(),
            detail: e.to_string(),
        })?;
        Ok(EigenList::new(vals.to_vec()))
    }

    /// Spectral weight `|A| = Σ |λᵢ|`.
    pub fn spectral_weight(&self) -> Result<f64> {
        Ok(self
            .eigenvalues()?
            .values()
            .iter()
            .map(|l| l.norm())
            .sum())
    }

    pub fn inverse(&self) -> Result<Operator> {
        let inv = self.data.inv().map_err(|e| Error::Eigensolver {
            norm_one: self.column_sum_norm(),
            detail: format!("inversion failed: {e}"),
        })?;
        Ok(Operator { data: inv })
    }
}

/// Matrix exponential by scaling-and-squaring with a Taylor series; intended
/// for well-scaled generators of s-unitaries.
pub(crate) fn expm(a: &Operator) -> Operator {
    let norm = a.column_sum_norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.scale_re(1.0 / f64::powi(2.0, squarings as i32));
    let mut result = Operator::identity(a.dim());
    let mut term = Operator::identity(a.dim());
    for k in 1..=20 {
        term = term.matmul(&scaled).scale_re(1.0 / k as f64);
        result = result.add(&term);
        if term.column_sum_norm() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

/// Eigenvalues counted with algebraic multiplicity, ordered descending by
/// real part with ties broken by descending imaginary part.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenList {
    values: Vec<Complex64>,
}

impl EigenList {
    pub fn new(mut values: Vec<Complex64>) -> Self {
        values.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        EigenList { values }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct OperatorRepr {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Serialize for Operator {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let dim = self.dim();
        let mut re = vec![vec![0.0; dim]; dim];
        let mut im = vec![vec![0.0; dim]; dim];
        for i in 0..dim {
            for j in 0..dim {
                re[i][j] = self.data[(i, j)].re;
                im[i][j] = self.data[(i, j)].im;
            }
        }
        OperatorRepr { re, im }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let repr = OperatorRepr::deserialize(deserializer)?;
        let dim = repr.re.len();
        if repr.im.len() != dim
            || repr.re.iter().any(|row| row.len() != dim)
            || repr.im.iter().any(|row| row.len() != dim)
        {
            return Err(D::Error::custom("operator re/im blocks must be square and matching"));
        }
        let mut data = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                data[(i, j)] = Complex64::new(repr.re[i][j], repr.im[i][j]);
            }
        }
        Operator::from_array(data).map_err(D::Error::custom)
    }
}
