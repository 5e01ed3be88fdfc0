//! Atomic operator-valued and negative definite measures on a compact
//! momentum box `K̂`.
//!
//! A measure is a finite list of atoms `(k, M)` with `k ∈ K̂` and `M` an
//! operator on `V`. Scalarizations `d≺u|ω v≻` are then finite complex
//! measures automatically, and all norms and integrals are exact finite sums.
//! Canonical form: atoms sorted lexicographically by `k`, coincident points
//! merged by weight addition, zero weights pruned. The variation is taken
//! entrywise in the fixed standard basis.

use std::cmp::Ordering;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::krein::{Operator, SignatureSpace, PREDICATE_TOL};

/// Minkowski pairing `⟨k,ξ⟩ = k⁰ξ⁰ − k⃗·ξ⃗` of signature `(+,−,−,−)`.
pub fn minkowski_pairing(k: &[f64; 4], xi: &[f64; 4]) -> f64 {
    k[0] * xi[0] - k[1] * xi[1] - k[2] * xi[2] - k[3] * xi[3]
}

/// A point of momentum space `ℝ⁴`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MomentumPoint(pub [f64; 4]);

impl MomentumPoint {
    pub fn new(k: [f64; 4]) -> Result<Self> {
        if k.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("momentum point has a non-finite entry".into()));
        }
        Ok(MomentumPoint(k))
    }

    fn lex_cmp(&self, other: &MomentumPoint) -> Ordering {
        for i in 0..4 {
            match self.0[i].total_cmp(&other.0[i]) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }

    fn same_point(&self, other: &MomentumPoint) -> bool {
        (0..4).all(|i| self.0[i] == other.0[i])
    }
}

/// Axis-aligned closed box in momentum space; membership tolerance is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactBox {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
}

impl CompactBox {
    pub fn new(lo: [f64; 4], hi: [f64; 4]) -> Result<Self> {
        if lo.iter().chain(hi.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("box corner has a non-finite entry".into()));
        }
        if (0..4).any(|i| lo[i] > hi[i]) {
            return Err(Error::validation("box needs lo <= hi componentwise"));
        }
        Ok(CompactBox { lo, hi })
    }

    pub fn contains(&self, k: &MomentumPoint) -> bool {
        (0..4).all(|i| self.lo[i] <= k.0[i] && k.0[i] <= self.hi[i])
    }
}

/// One atom `(k, M)` of an operator-valued measure.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub point: MomentumPoint,
    pub weight: Operator,
}

/// Finitely-supported operator-valued measure on `K̂`, in canonical form.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicMeasure {
    space: SignatureSpace,
    domain: CompactBox,
    atoms: Vec<Atom>,
}

impl AtomicMeasure {
    pub fn new(
        space: SignatureSpace,
        domain: CompactBox,
        atoms: Vec<(MomentumPoint, Operator)>,
    ) -> Result<Self> {
        for (point, weight) in &atoms {
            if weight.dim() != space.dim() {
                return Err(Error::dim(format!(
                    "atom weight dim {} does not match space dim {}",
                    weight.dim(),
                    space.dim()
                )));
            }
            if !domain.contains(point) {
                return Err(Error::validation(format!(
                    "atom at {:?} lies outside the momentum box",
                    point.0
                )));
            }
        }
        let mut atoms: Vec<Atom> = atoms
            .into_iter()
            .map(|(point, weight)| Atom { point, weight })
            .collect();
        atoms.sort_by(|a, b| a.point.lex_cmp(&b.point));
        // Merge coincident points, then prune exact-zero weights.
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for atom in atoms {
            match merged.last_mut() {
                Some(last) if last.point.same_point(&atom.point) => {
                    last.weight = last.weight.add(&atom.weight);
                }
                _ => merged.push(atom),
            }
        }
        merged.retain(|a| !a.weight.is_zero());
        Ok(AtomicMeasure {
            space,
            domain,
            atoms: merged,
        })
    }

    pub fn empty(space: SignatureSpace, domain: CompactBox) -> Self {
        AtomicMeasure {
            space,
            domain,
            atoms: Vec::new(),
        }
    }

    pub fn space(&self) -> SignatureSpace {
        self.space
    }

    pub fn domain(&self) -> CompactBox {
        self.domain
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn natoms(&self) -> usize {
        self.atoms.len()
    }

    /// `ω(Ω)` for `Ω` given as a decidable predicate on atom points.
    pub fn evaluate(&self, omega: impl Fn(&MomentumPoint) -> bool) -> Operator {
        let mut acc = Operator::zeros(self.space.dim());
        for atom in &self.atoms {
            if omega(&atom.point) {
                acc = acc.add(&atom.weight);
            }
        }
        acc
    }

    /// `ω(K̂)`, the total weight.
    pub fn total(&self) -> Operator {
        self.evaluate(|_| true)
    }

    /// The complex measure `d≺u|ω v≻` as a list of atom weights.
    pub fn scalar_measure(
        &self,
        u: &[Complex64],
        v: &[Complex64],
    ) -> Result<Vec<(MomentumPoint, Complex64)>> {
        self.atoms
            .iter()
            .map(|atom| {
                let mv = atom.weight.apply(v)?;
                Ok((atom.point, self.space.ssp(u, &mv)?))
            })
            .collect()
    }

    /// Same scalar measure computed through the four-term polarization
    /// identity from the quadratic forms `d≺w|ω w≻`.
    pub fn scalar_measure_polarized(
        &self,
        u: &[Complex64],
        v: &[Complex64],
    ) -> Result<Vec<(MomentumPoint, Complex64)>> {
        let dim = self.space.dim();
        if u.len() != dim || v.len() != dim {
            return Err(Error::dim("polarization vectors must match space dim"));
        }
        let i = Complex64::new(0.0, 1.0);
        let combine = |sign: Complex64| -> Vec<Complex64> {
            u.iter().zip(v).map(|(a, b)| a + sign * b).collect()
        };
        let w_pv = combine(Complex64::new(1.0, 0.0));
        let w_mv = combine(Complex64::new(-1.0, 0.0));
        let w_piv = combine(i);
        let w_miv = combine(-i);
        let mut out = Vec::with_capacity(self.atoms.len());
        for atom in &self.atoms {
            let q = |w: &[Complex64]| -> Result<Complex64> {
                let mw = atom.weight.apply(w)?;
                self.space.ssp(w, &mw)
            };
            let val =
                (q(&w_pv)? - q(&w_mv)? - i * (q(&w_piv)? - q(&w_miv)?)) * Complex64::new(0.25, 0.0);
            out.push((atom.point, val));
        }
        Ok(out)
    }

    /// The atomic variation `d|ω|`: weight `Σ_{ij} |≺eᵢ|M eⱼ≻|` at each atom.
    pub fn variation(&self) -> Vec<(MomentumPoint, f64)> {
        self.atoms
            .iter()
            .map(|atom| {
                let mut sum = 0.0;
                for i in 0..self.space.dim() {
                    for j in 0..self.space.dim() {
                        sum += (self.space.sign(i) * atom.weight.get(i, j)).norm();
                    }
                }
                (atom.point, sum)
            })
            .collect()
    }

    /// Total variation `d‖ω‖ = Σ_a Σ_{ij} |≺eᵢ|M_a eⱼ≻|`.
    pub fn total_variation(&self) -> f64 {
        self.variation().iter().map(|(_, w)| w).sum()
    }

    /// Variation mass of a single scalarization `d‖≺eᵢ|ω eⱼ≻‖`.
    pub fn entry_variation(&self, i: usize, j: usize) -> f64 {
        self.atoms
            .iter()
            .map(|atom| (self.space.sign(i) * atom.weight.get(i, j)).norm())
            .sum()
    }

    /// `∫ f dω = Σ_a f(k_a) M_a`.
    pub fn integrate(&self, f: impl Fn(&MomentumPoint) -> Complex64) -> Result<Operator> {
        let mut acc = Operator::zeros(self.space.dim());
        for atom in &self.atoms {
            let val = f(&atom.point);
            if !val.re.is_finite() || !val.im.is_finite() {
                return Err(Error::NonFinite(format!(
                    "integrand non-finite at {:?}",
                    atom.point.0
                )));
            }
            acc = acc.add(&atom.weight.scale(val));
        }
        Ok(acc)
    }

    /// Conjugated measure `U ω U⁻¹` (atom points unchanged).
    pub fn conjugate(&self, u: &Operator) -> Result<AtomicMeasure> {
        if u.dim() != self.space.dim() {
            return Err(Error::dim("conjugating operator dim mismatch"));
        }
        let u_inv = u.inverse()?;
        let atoms = self
            .atoms
            .iter()
            .map(|atom| (atom.point, u.matmul(&atom.weight).matmul(&u_inv)))
            .collect();
        AtomicMeasure::new(self.space, self.domain, atoms)
    }

    /// Scaled measure `t·ω`.
    pub fn scale(&self, t: Complex64) -> AtomicMeasure {
        let atoms = self
            .atoms
            .iter()
            .map(|atom| (atom.point, atom.weight.scale(t)))
            .collect();
        AtomicMeasure::new(self.space, self.domain, atoms).expect("scaling preserves validity")
    }

    pub fn scale_re(&self, t: f64) -> AtomicMeasure {
        self.scale(Complex64::new(t, 0.0))
    }

    /// Sum of two measures on the same space and domain.
    pub fn add(&self, other: &AtomicMeasure) -> Result<AtomicMeasure> {
        if self.space != other.space {
            return Err(Error::dim("measure addition requires a shared space"));
        }
        if self.domain != other.domain {
            return Err(Error::validation(
                "measure addition requires a shared momentum box",
            ));
        }
        let atoms = self
            .atoms
            .iter()
            .chain(&other.atoms)
            .map(|a| (a.point, a.weight.clone()))
            .collect();
        AtomicMeasure::new(self.space, self.domain, atoms)
    }

    /// Support: atom points with strictly positive variation weight.
    pub fn support(&self) -> Vec<MomentumPoint> {
        self.variation()
            .into_iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(p, _)| p)
            .collect()
    }

    /// Distance functional over a family of test functions: the largest gap
    /// between the scalarized integrals `∫ f d≺eᵢ|ω eⱼ≻` of the two measures.
    pub fn weak_distance(&self, other: &AtomicMeasure, family: &[TestFunction]) -> Result<f64> {
        if self.space != other.space {
            return Err(Error::dim("weak distance requires a shared space"));
        }
        if family.is_empty() {
            return Err(Error::validation("weak distance needs a nonempty test family"));
        }
        let dim = self.space.dim();
        let mut worst = 0.0f64;
        for f in family {
            for i in 0..dim {
                for j in 0..dim {
                    let mine = self.scalar_integral(f, i, j);
                    let theirs = other.scalar_integral(f, i, j);
                    worst = worst.max((mine - theirs).norm());
                }
            }
        }
        Ok(worst)
    }

    fn scalar_integral(&self, f: &TestFunction, i: usize, j: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for atom in &self.atoms {
            acc += f.eval(&atom.point) * self.space.sign(i) * atom.weight.get(i, j);
        }
        acc
    }

    /// Largest entrywise weight gap against a measure on the same point set.
    pub fn max_weight_distance(&self, other: &AtomicMeasure) -> Result<f64> {
        if self.atoms.len() != other.atoms.len()
            || self
                .atoms
                .iter()
                .zip(&other.atoms)
                .any(|(a, b)| !a.point.same_point(&b.point))
        {
            return Err(Error::validation(
                "weight distance requires identical atom point sets",
            ));
        }
        let mut worst = 0.0f64;
        for (a, b) in self.atoms.iter().zip(&other.atoms) {
            worst = worst.max(a.weight.sub(&b.weight).max_abs());
        }
        Ok(worst)
    }

    /// Canonical JSON encoding (compact, atoms in canonical order).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("measure serialization cannot fail")
    }

    /// SHA-256 of the canonical JSON, as lowercase hex.
    pub fn canonical_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_json(text: &str) -> Result<AtomicMeasure> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("measure JSON: {e}")))
    }
}

/// An atomic measure whose every weight `M` has `−M` positive w.r.t. `≺·|·≻`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct NegativeDefiniteMeasure {
    inner: AtomicMeasure,
}

impl NegativeDefiniteMeasure {
    pub fn new(inner: AtomicMeasure) -> Result<Self> {
        Self::with_tolerance(inner, PREDICATE_TOL)
    }

    pub fn with_tolerance(inner: AtomicMeasure, tol: f64) -> Result<Self> {
        for (idx, atom) in inner.atoms.iter().enumerate() {
            if !inner.space.is_positive_wrt_ssp(&atom.weight.neg(), tol)? {
                return Err(Error::validation(format!(
                    "atom {idx} at {:?}: -M is not positive w.r.t. the spin scalar product",
                    atom.point.0
                )));
            }
        }
        Ok(NegativeDefiniteMeasure { inner })
    }

    pub fn as_atomic(&self) -> &AtomicMeasure {
        &self.inner
    }

    pub fn into_atomic(self) -> AtomicMeasure {
        self.inner
    }

    /// Conjugation by an s-unitary preserves the cone; the result is revalidated.
    pub fn conjugate(&self, u: &Operator) -> Result<NegativeDefiniteMeasure> {
        if !self.inner.space.is_s_unitary(u, 1e-8)? {
            return Err(Error::validation(
                "conjugation of a negative definite measure needs an s-unitary",
            ));
        }
        let conj = self.inner.conjugate(u)?;
        let scale = 1.0 + conj.atoms.iter().map(|a| a.weight.column_sum_norm()).fold(0.0, f64::max);
        NegativeDefiniteMeasure::with_tolerance(conj, PREDICATE_TOL * scale)
    }

    /// Positive rescaling stays in the cone.
    pub fn scale_re(&self, t: f64) -> Result<NegativeDefiniteMeasure> {
        if !(t >= 0.0) {
            return Err(Error::validation("cone scaling needs t >= 0"));
        }
        Ok(NegativeDefiniteMeasure {
            inner: self.inner.scale_re(t),
        })
    }
}

impl std::ops::Deref for NegativeDefiniteMeasure {
    type Target = AtomicMeasure;

    fn deref(&self) -> &AtomicMeasure {
        &self.inner
    }
}

impl<'de> Deserialize<'de> for NegativeDefiniteMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let inner = AtomicMeasure::deserialize(deserializer)?;
        NegativeDefiniteMeasure::new(inner).map_err(D::Error::custom)
    }
}

/// Test functions for the weak-convergence distance.
#[derive(Clone, Debug)]
pub enum TestFunction {
    Constant,
    /// `k ↦ e^{i⟨k,ξ⟩}` with the Minkowski pairing.
    PlaneWave([f64; 4]),
}

impl TestFunction {
    pub fn eval(&self, k: &MomentumPoint) -> Complex64 {
        match self {
            TestFunction::Constant => Complex64::new(1.0, 0.0),
            TestFunction::PlaneWave(xi) => {
                Complex64::from_polar(1.0, minkowski_pairing(&k.0, xi))
            }
        }
    }
}

/// The constant function plus plane waves on a fixed lattice of 32 spacetime
/// points: sign patterns `(±0.75)⁴` at the two scales 1 and 2.
pub fn default_test_family() -> Vec<TestFunction> {
    let mut family = vec![TestFunction::Constant];
    for &scale in &[1.0f64, 2.0] {
        for bits in 0..16u32 {
            let mut xi = [0.0; 4];
            for (mu, x) in xi.iter_mut().enumerate() {
                *x = scale * if bits >> mu & 1 == 1 { 0.75 } else { -0.75 };
            }
            family.push(TestFunction::PlaneWave(xi));
        }
    }
    family
}

/// Jordan decomposition of an atomic complex scalar measure into four
/// positive parts: `d≺·≻ = Re⁺ − Re⁻ + i Im⁺ − i Im⁻`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct JordanSplit {
    pub re_pos: Vec<(MomentumPoint, f64)>,
    pub re_neg: Vec<(MomentumPoint, f64)>,
    pub im_pos: Vec<(MomentumPoint, f64)>,
    pub im_neg: Vec<(MomentumPoint, f64)>,
}

pub fn jordan_split(scalar: &[(MomentumPoint, Complex64)]) -> JordanSplit {
    let mut split = JordanSplit::default();
    for &(point, w) in scalar {
        if w.re > 0.0 {
            split.re_pos.push((point, w.re));
        } else if w.re < 0.0 {
            split.re_neg.push((point, -w.re));
        }
        if w.im > 0.0 {
            split.im_pos.push((point, w.im));
        } else if w.im < 0.0 {
            split.im_neg.push((point, -w.im));
        }
    }
    split
}

/// Deterministic Bolzano–Weierstrass on the stacked weight entries: iterated
/// bisection keeps the majority half per coordinate (ties to the lower half)
/// until every coordinate spread is at most `tol/2`. Returns the surviving
/// index subsequence together with its last element as the limit measure,
/// so constant and alternating inputs reproduce their cluster point exactly.
///
/// All measures must live on the same atom point set; the uniform
/// total-variation bound (hypothesis of the subsequence lemma) is checked,
/// and tightness is automatic on a compact box.
pub fn extract_convergent_subsequence(
    seq: &[AtomicMeasure],
    tol: f64,
) -> Result<(Vec<usize>, AtomicMeasure)> {
    if seq.is_empty() {
        return Err(Error::validation("subsequence extraction needs a nonempty sequence"));
    }
    if !(tol > 0.0) {
        return Err(Error::validation("subsequence tolerance must be positive"));
    }
    let first = &seq[0];
    for (idx, m) in seq.iter().enumerate() {
        if m.space != first.space {
            return Err(Error::dim(format!("measure {idx} has a different space")));
        }
        if m.atoms.len() != first.atoms.len()
            || m.atoms
                .iter()
                .zip(&first.atoms)
                .any(|(a, b)| !a.point.same_point(&b.point))
        {
            return Err(Error::validation(format!(
                "measure {idx} is not supported on the shared atom point set"
            )));
        }
    }
    let sup_tv = seq
        .iter()
        .map(|m| m.total_variation())
        .fold(0.0f64, f64::max);
    if !sup_tv.is_finite() {
        return Err(Error::Unbounded(format!(
            "total variations are not uniformly bounded: sup d|nu|(K) = {sup_tv}"
        )));
    }

    let dim = first.space.dim();
    let natoms = first.atoms.len();
    let coords_per = natoms * dim * dim * 2;
    let stacked: Vec<Vec<f64>> = seq
        .iter()
        .map(|m| {
            let mut v = Vec::with_capacity(coords_per);
            for atom in &m.atoms {
                for i in 0..dim {
                    for j in 0..dim {
                        let z = atom.weight.get(i, j);
                        v.push(z.re);
                        v.push(z.im);
                    }
                }
            }
            v
        })
        .collect();

    let mut candidates: Vec<usize> = (0..seq.len()).collect();
    let target = tol / 2.0;
    for c in 0..coords_per {
        loop {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &idx in &candidates {
                lo = lo.min(stacked[idx][c]);
                hi = hi.max(stacked[idx][c]);
            }
            if hi - lo <= target {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let lower: Vec<usize> = candidates
                .iter()
                .copied()
                .filter(|&idx| stacked[idx][c] <= mid)
                .collect();
            let upper: Vec<usize> = candidates
                .iter()
                .copied()
                .filter(|&idx| stacked[idx][c] > mid)
                .collect();
            candidates = if lower.len() >= upper.len() { lower } else { upper };
        }
    }

    let limit = seq[*candidates.last().expect("candidates never empty")].clone();
    Ok((candidates, limit))
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    n: usize,
    domain: CompactBox,
    atoms: Vec<AtomRepr>,
}

#[derive(Serialize, Deserialize)]
struct AtomRepr {
    k: [f64; 4],
    #[serde(rename = "M")]
    weight: Operator,
}

impl Serialize for AtomicMeasure {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = MeasureRepr {
            n: self.space.half_dim(),
            domain: self.domain,
            atoms: self
                .atoms
                .iter()
                .map(|a| AtomRepr {
                    k: a.point.0,
                    weight: a.weight.clone(),
                })
                .collect(),
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AtomicMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let repr = MeasureRepr::deserialize(deserializer)?;
        let space = SignatureSpace::new(repr.n).map_err(D::Error::custom)?;
        let domain = CompactBox::new(repr.domain.lo, repr.domain.hi).map_err(D::Error::custom)?;
        let atoms = repr
            .atoms
            .into_iter()
            .map(|a| Ok((MomentumPoint::new(a.k).map_err(D::Error::custom)?, a.weight)))
            .collect::<std::result::Result<Vec<_>, D::Error>>()?;
        AtomicMeasure::new(space, domain, atoms).map_err(D::Error::custom)
    }
}
