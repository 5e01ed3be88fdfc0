//! Causal action machinery on a truncated spacetime box.
//!
//! For an atomic measure `ω` the kernel of the fermionic projector is the
//! finite Fourier sum `P(ξ) = Σ_a e^{i⟨k_a,ξ⟩} M_a`, the closed chain is
//! `A(ξ) = P(ξ)P(−ξ)`, and the Lagrangian is the spectral-weight combination
//! `L(ξ) = |A(ξ)²| − |A(ξ)|²/2n ≥ 0`. The causal action and the functional
//! `T` integrate `L` and `|A|²` over spacetime; the full integrals generically
//! diverge for almost-periodic integrands, so every reported number is the
//! box truncation `S_Λ`, `T_Λ` over a tensor-product trapezoid rule whose box
//! and resolution are echoed into the reports.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krein::Operator;
use crate::measure::{minkowski_pairing, AtomicMeasure, CompactBox, NegativeDefiniteMeasure};

/// Clamp width for tiny negative Lagrangian values produced by rounding.
pub const LAGRANGIAN_CLAMP: f64 = 1e-10;

/// A point of spacetime (units of length).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpacetimePoint(pub [f64; 4]);

impl SpacetimePoint {
    pub fn new(xi: [f64; 4]) -> Result<Self> {
        if xi.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("spacetime point has a non-finite entry".into()));
        }
        Ok(SpacetimePoint(xi))
    }

    pub fn neg(&self) -> SpacetimePoint {
        SpacetimePoint([-self.0[0], -self.0[1], -self.0[2], -self.0[3]])
    }
}

/// Truncated integration domain `Λ = Π_μ [−R_μ, R_μ]` with per-axis
/// trapezoid weights standing in for the Lebesgue measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureBox {
    pub half_widths: [f64; 4],
    pub points_per_axis: [usize; 4],
}

impl QuadratureBox {
    pub fn new(half_widths: [f64; 4], points_per_axis: [usize; 4]) -> Result<Self> {
        if half_widths.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::validation("quadrature box needs positive finite half-widths"));
        }
        if points_per_axis.iter().any(|&n| n == 0) {
            return Err(Error::validation("quadrature box needs >= 1 point per axis"));
        }
        let qb = QuadratureBox {
            half_widths,
            points_per_axis,
        };
        // Trapezoid weights must reproduce the box volume.
        let vol = qb.volume();
        let total: f64 = (0..4)
            .map(|axis| qb.axis_rule(axis).iter().map(|(_, w)| w).sum::<f64>())
            .product();
        if (total - vol).abs() > 1e-12 * vol {
            return Err(Error::validation(format!(
                "quadrature weights sum to {total}, expected volume {vol}"
            )));
        }
        Ok(qb)
    }

    pub fn volume(&self) -> f64 {
        self.half_widths.iter().map(|r| 2.0 * r).product()
    }

    /// Nodes and trapezoid weights along one axis. A single point sits at the
    /// origin and carries the full axis length.
    pub fn axis_rule(&self, axis: usize) -> Vec<(f64, f64)> {
        let r = self.half_widths[axis];
        let n = self.points_per_axis[axis];
        if n == 1 {
            return vec![(0.0, 2.0 * r)];
        }
        let h = 2.0 * r / (n - 1) as f64;
        (0..n)
            .map(|j| {
                let x = -r + h * j as f64;
                let w = if j == 0 || j == n - 1 { 0.5 * h } else { h };
                (x, w)
            })
            .collect()
    }

    /// All grid nodes with their tensor-product weights, in a fixed
    /// row-major order.
    pub fn nodes(&self) -> Vec<(SpacetimePoint, f64)> {
        let rules: Vec<Vec<(f64, f64)>> = (0..4).map(|a| self.axis_rule(a)).collect();
        let mut out =
            Vec::with_capacity(self.points_per_axis.iter().product::<usize>());
        for &(x0, w0) in &rules[0] {
            for &(x1, w1) in &rules[1] {
                for &(x2, w2) in &rules[2] {
                    for &(x3, w3) in &rules[3] {
                        out.push((SpacetimePoint([x0, x1, x2, x3]), w0 * w1 * w2 * w3));
                    }
                }
            }
        }
        out
    }
}

/// Active constraint mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintMode {
    /// Trace constraint plus `Tr(−Sν(K̂)) ≤ f`.
    TraceF,
    /// Trace constraint plus the spectral-weight bound `|ν(K̂)| ≤ f`.
    TraceSwf,
    /// Trace constraint plus the boundedness constraint `T_Λ(ν) ≤ C`.
    TraceBoundedness,
}

/// Constraint constants: the trace value `c ≠ 0` and, per mode, `f` or `C`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub mode: ConstraintMode,
    pub c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<f64>,
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    pub c_bound: Option<f64>,
}

impl ConstraintSet {
    pub fn new(mode: ConstraintMode, c: f64, f: Option<f64>, c_bound: Option<f64>) -> Result<Self> {
        if c == 0.0 || !c.is_finite() {
            return Err(Error::validation("trace constraint needs finite c != 0"));
        }
        match mode {
            ConstraintMode::TraceF | ConstraintMode::TraceSwf => {
                match (f, c_bound) {
                    (Some(fv), None) if fv > 0.0 => {}
                    _ => {
                        return Err(Error::validation(
                            "modes trace+f and trace+swf need exactly the field f > 0",
                        ))
                    }
                }
            }
            ConstraintMode::TraceBoundedness => match (f, c_bound) {
                (None, Some(cb)) if cb > 0.0 => {}
                _ => {
                    return Err(Error::validation(
                        "mode trace+boundedness needs exactly the field C > 0",
                    ))
                }
            },
        }
        Ok(ConstraintSet { mode, c, f, c_bound })
    }
}

/// `P(ξ) = Σ_a e^{i⟨k_a,ξ⟩} M_a` with the Minkowski pairing.
pub fn fermionic_projector(omega: &AtomicMeasure, xi: &SpacetimePoint) -> Operator {
    omega
        .integrate(|k| Complex64::from_polar(1.0, minkowski_pairing(&k.0, &xi.0)))
        .expect("plane wave is finite")
}

/// Closed chain `A(ξ) = P(ξ) P(−ξ)`.
pub fn closed_chain(omega: &AtomicMeasure, xi: &SpacetimePoint) -> Operator {
    fermionic_projector(omega, xi).matmul(&fermionic_projector(omega, &xi.neg()))
}

/// Lagrangian before clamping: `|A²| − |A|²/2n`. Nonnegative up to rounding
/// by Jensen's inequality on the eigenvalue moduli.
pub fn lagrangian_raw(omega: &AtomicMeasure, xi: &SpacetimePoint) -> Result<f64> {
    let a = closed_chain(omega, xi);
    lagrangian_of_chain(&a, omega.space().dim())
}

pub(crate) fn lagrangian_of_chain(a: &Operator, dim: usize) -> Result<f64> {
    let w2 = a.matmul(a).spectral_weight()?;
    let w1 = a.spectral_weight()?;
    Ok(w2 - w1 * w1 / dim as f64)
}

/// Lagrangian with values in `(−LAGRANGIAN_CLAMP, 0)` clamped to zero.
pub fn lagrangian(omega: &AtomicMeasure, xi: &SpacetimePoint) -> Result<f64> {
    let raw = lagrangian_raw(omega, xi)?;
    if raw < 0.0 && raw > -LAGRANGIAN_CLAMP {
        Ok(0.0)
    } else {
        Ok(raw)
    }
}

/// Deterministic pairwise tree sum; the reduction tree depends only on the
/// slice length, so serial and parallel evaluations agree bit for bit.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 4 {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

fn sum_over_grid(
    omega: &AtomicMeasure,
    qbox: &QuadratureBox,
    integrand: impl Fn(&Operator, usize) -> Result<f64> + Sync,
) -> Result<f64> {
    let nodes = qbox.nodes();
    let dim = omega.space().dim();
    let values: Vec<Result<f64>> = nodes
        .par_iter()
        .map(|(xi, w)| {
            let a = closed_chain(omega, xi);
            integrand(&a, dim).map(|v| w * v).map_err(|e| match e {
                Error::Eigensolver { norm_one, detail } => Error::Eigensolver {
                    norm_one,
                    detail: format!("{detail} (at grid point {:?})", xi.0),
                },
                other => other,
            })
        })
        .collect();
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    Ok(pairwise_sum(&values))
}

/// Box-truncated causal action `S_Λ(ω) = Σ_grid w(ξ) L[ω](ξ)`.
pub fn action(omega: &AtomicMeasure, qbox: &QuadratureBox) -> Result<f64> {
    sum_over_grid(omega, qbox, |a, dim| {
        let raw = lagrangian_of_chain(a, dim)?;
        Ok(if raw < 0.0 && raw > -LAGRANGIAN_CLAMP { 0.0 } else { raw })
    })
}

/// Box-truncated functional `T_Λ(ω) = Σ_grid w(ξ) |A(ξ)|²`.
pub fn t_functional(omega: &AtomicMeasure, qbox: &QuadratureBox) -> Result<f64> {
    sum_over_grid(omega, qbox, |a, _| {
        let w = a.spectral_weight()?;
        Ok(w * w)
    })
}

/// Both `S_Λ` and `T_Λ` in one grid sweep.
pub fn action_and_t(omega: &AtomicMeasure, qbox: &QuadratureBox) -> Result<(f64, f64)> {
    let nodes = qbox.nodes();
    let dim = omega.space().dim();
    let values: Vec<Result<(f64, f64)>> = nodes
        .par_iter()
        .map(|(xi, w)| {
            let a = closed_chain(omega, xi);
            let raw = lagrangian_of_chain(&a, dim)?;
            let l = if raw < 0.0 && raw > -LAGRANGIAN_CLAMP { 0.0 } else { raw };
            let sw = a.spectral_weight()?;
            Ok((w * l, w * sw * sw))
        })
        .collect();
    let values: Vec<(f64, f64)> = values.into_iter().collect::<Result<_>>()?;
    let s: Vec<f64> = values.iter().map(|(a, _)| *a).collect();
    let t: Vec<f64> = values.iter().map(|(_, b)| *b).collect();
    Ok((pairwise_sum(&s), pairwise_sum(&t)))
}

/// Constraint quantities and residuals of a validated measure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// `Tr ν(K̂)` (real part; the imaginary part is asserted small).
    pub trace: f64,
    /// `Tr(−S ν(K̂))`.
    pub strace_s: f64,
    /// Spectral weight `|ν(K̂)|`.
    pub sweight: f64,
    /// `T_Λ` when the boundedness mode is active.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_value: Option<f64>,
    pub residuals: Residuals,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Residuals {
    /// `|Tr ν(K̂) − c|`.
    pub trace: f64,
    /// `max(0, q − bound)` for the active inequality `q ≤ bound`.
    pub inequality: f64,
}

/// Evaluate the constraint quantities of `ν` against `cs`. The boundedness
/// mode needs a quadrature box for `T_Λ`.
pub fn constraint_report(
    nu: &NegativeDefiniteMeasure,
    cs: &ConstraintSet,
    qbox: Option<&QuadratureBox>,
) -> Result<ConstraintReport> {
    let total = nu.total();
    let scale = 1.0 + total.column_sum_norm();
    let tr = total.trace();
    if tr.im.abs() > 1e-10 * scale {
        return Err(Error::validation(format!(
            "trace of nu(K) has imaginary part {:.3e}",
            tr.im
        )));
    }
    let strace = nu
        .space()
        .signature_matrix()
        .matmul(&total)
        .neg()
        .trace();
    if strace.im.abs() > 1e-10 * scale {
        return Err(Error::validation(format!(
            "Tr(-S nu(K)) has imaginary part {:.3e}",
            strace.im
        )));
    }
    let sweight = total.spectral_weight()?;
    let (t_value, inequality) = match cs.mode {
        ConstraintMode::TraceF => {
            let f = cs.f.expect("validated");
            (None, (strace.re - f).max(0.0))
        }
        ConstraintMode::TraceSwf => {
            let f = cs.f.expect("validated");
            (None, (sweight - f).max(0.0))
        }
        ConstraintMode::TraceBoundedness => {
            let qbox = qbox.ok_or_else(|| {
                Error::validation("boundedness mode needs a quadrature box for T")
            })?;
            let t = t_functional(nu.as_atomic(), qbox)?;
            (Some(t), (t - cs.c_bound.expect("validated")).max(0.0))
        }
    };
    Ok(ConstraintReport {
        trace: tr.re,
        strace_s: strace.re,
        sweight,
        t_value,
        residuals: Residuals {
            trace: (tr.re - cs.c).abs(),
            inequality,
        },
    })
}

/// Full evaluation report for a measure on a box: configuration echo plus
/// `S_Λ`, `S_Λ/vol(Λ)`, `T_Λ` and the constraint quantities.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub inputs: InputsEcho,
    pub outputs: Outputs,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InputsEcho {
    pub measure_hash: String,
    pub n: usize,
    pub atom_count: usize,
    pub domain: CompactBox,
    pub quadrature: QuadratureBox,
    pub grid_axes: Vec<AxisEcho>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AxisEcho {
    pub half_width: f64,
    pub points: usize,
    pub spacing: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Outputs {
    pub s: f64,
    pub s_per_volume: f64,
    pub t: f64,
    pub trace: f64,
    pub strace_s: f64,
    pub sweight: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Residuals>,
}

pub fn evaluation_report(
    nu: &NegativeDefiniteMeasure,
    qbox: &QuadratureBox,
    cs: Option<&ConstraintSet>,
) -> Result<EvaluationReport> {
    let (s, t) = action_and_t(nu.as_atomic(), qbox)?;
    let total = nu.total();
    let tr = total.trace();
    let strace = nu.space().signature_matrix().matmul(&total).neg().trace();
    let sweight = total.spectral_weight()?;
    let residuals = match cs {
        Some(cs) => Some(constraint_report(nu, cs, Some(qbox))?.residuals),
        None => None,
    };
    let grid_axes = (0..4)
        .map(|axis| AxisEcho {
            half_width: qbox.half_widths[axis],
            points: qbox.points_per_axis[axis],
            spacing: if qbox.points_per_axis[axis] > 1 {
                2.0 * qbox.half_widths[axis] / (qbox.points_per_axis[axis] - 1) as f64
            } else {
                2.0 * qbox.half_widths[axis]
            },
        })
        .collect();
    Ok(EvaluationReport {
        inputs: InputsEcho {
            measure_hash: nu.canonical_hash(),
            n: nu.space().half_dim(),
            atom_count: nu.natoms(),
            domain: nu.domain(),
            quadrature: qbox.clone(),
            grid_axes,
        },
        outputs: Outputs {
            s,
            s_per_volume: s / qbox.volume(),
            t,
            trace: tr.re,
            strace_s: strace.re,
            sweight,
            residuals,
        },
    })
}

/// Write a CSV profile of `L(ξ)` along one spacetime axis.
pub fn write_lagrangian_profile_csv(
    out: &mut impl std::io::Write,
    omega: &AtomicMeasure,
    axis: usize,
    half_width: f64,
    points: usize,
) -> Result<()> {
    if axis > 3 {
        return Err(Error::validation("profile axis must be 0..=3"));
    }
    if points < 2 {
        return Err(Error::validation("profile needs >= 2 points"));
    }
    writeln!(out, "xi,lagrangian")?;
    let h = 2.0 * half_width / (points - 1) as f64;
    for j in 0..points {
        let x = -half_width + h * j as f64;
        let mut xi = [0.0; 4];
        xi[axis] = x;
        let l = lagrangian(omega, &SpacetimePoint(xi))?;
        writeln!(out, "{x},{l}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krein::SignatureSpace;
    use crate::measure::MomentumPoint;
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit_box() -> CompactBox {
        CompactBox::new([-10.0; 4], [10.0; 4]).unwrap()
    }

    fn random_weight(dim: usize, rng: &mut ChaCha8Rng) -> Operator {
        let mut data = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                data[(i, j)] = c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
        Operator::from_array(data).unwrap()
    }

    fn random_ndm(space: SignatureSpace, natoms: usize, rng: &mut ChaCha8Rng) -> NegativeDefiniteMeasure {
        let s = space.signature_matrix();
        let atoms = (0..natoms)
            .map(|_| {
                let b = random_weight(space.dim(), rng);
                let weight = s.matmul(&b.dagger().matmul(&b)).neg();
                let k = MomentumPoint([
                    rng.random::<f64>() * 4.0 - 2.0,
                    rng.random::<f64>() * 4.0 - 2.0,
                    rng.random::<f64>() * 4.0 - 2.0,
                    rng.random::<f64>() * 4.0 - 2.0,
                ]);
                (k, weight)
            })
            .collect();
        NegativeDefiniteMeasure::new(
            AtomicMeasure::new(space, unit_box(), atoms).unwrap(),
        )
        .unwrap()
    }

    fn random_xi(rng: &mut ChaCha8Rng) -> SpacetimePoint {
        SpacetimePoint([
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        ])
    }

    fn small_qbox() -> QuadratureBox {
        QuadratureBox::new([1.0; 4], [3, 3, 3, 3]).unwrap()
    }

    #[test]
    fn quadrature_weights_sum_to_volume() {
        for points in [[1usize, 1, 1, 1], [2, 3, 4, 5], [7, 7, 7, 7]] {
            let qb = QuadratureBox::new([1.0, 2.0, 0.5, 3.0], points).unwrap();
            let total: f64 = qb.nodes().iter().map(|(_, w)| w).sum();
            assert!((total - qb.volume()).abs() <= 1e-12 * qb.volume());
        }
    }

    #[test]
    fn projector_values() {
        let sp = SignatureSpace::new(1).unwrap();
        let m = Operator::diag_re(&[1.0, -0.5]);
        let k0 = MomentumPoint([0.7, 0.2, -0.1, 0.4]);
        let single =
            AtomicMeasure::new(sp, unit_box(), vec![(k0, m.clone())]).unwrap();
        // xi = 0 -> nu(K)
        assert_eq!(
            fermionic_projector(&single, &SpacetimePoint([0.0; 4])),
            single.total()
        );
        // single atom -> phase times weight
        let xi = SpacetimePoint([0.3, -0.2, 0.9, 0.1]);
        let expect = m.scale(Complex64::from_polar(1.0, minkowski_pairing(&k0.0, &xi.0)));
        assert!(fermionic_projector(&single, &xi).sub(&expect).column_sum_norm() < 1e-14);

        // atoms at ±k0 with the same weight -> 2 cos(<k0,xi>) M
        let pair = AtomicMeasure::new(
            sp,
            unit_box(),
            vec![
                (k0, m.clone()),
                (MomentumPoint([-k0.0[0], -k0.0[1], -k0.0[2], -k0.0[3]]), m.clone()),
            ],
        )
        .unwrap();
        let expect = m.scale_re(2.0 * minkowski_pairing(&k0.0, &xi.0).cos());
        assert!(fermionic_projector(&pair, &xi).sub(&expect).column_sum_norm() < 1e-14);
    }

    #[test]
    fn closed_chain_single_atom_constant() {
        let sp = SignatureSpace::new(1).unwrap();
        let m = Operator::diag_re(&[2.0, 1.0]);
        let single = AtomicMeasure::new(
            sp,
            unit_box(),
            vec![(MomentumPoint([0.4, 0.3, 0.0, 0.0]), m.clone())],
        )
        .unwrap();
        let m_sq = m.matmul(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let xi = random_xi(&mut rng);
            assert!(closed_chain(&single, &xi).sub(&m_sq).column_sum_norm() < 1e-12);
        }
        // empty measure -> 0
        let empty = AtomicMeasure::empty(sp, unit_box());
        assert!(closed_chain(&empty, &SpacetimePoint([1.0; 4])).is_zero());
    }

    #[test]
    fn chain_spectrum_reflection_symmetric() {
        let sp = SignatureSpace::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let nu = random_ndm(sp, 3, &mut rng);
            let xi = random_xi(&mut rng);
            let a_pos = closed_chain(nu.as_atomic(), &xi).eigenvalues().unwrap();
            let a_neg = closed_chain(nu.as_atomic(), &xi.neg()).eigenvalues().unwrap();
            let drift = crate::harness::bottleneck_match(a_pos.values(), a_neg.values());
            assert!(drift < 1e-8, "A(xi) vs A(-xi) spectra differ by {drift}");
        }
    }

    #[test]
    fn lagrangian_special_values() {
        let sp = SignatureSpace::new(1).unwrap();
        // single atom with M = -aS gives A = a^2 I and L = 0
        let a_val = 1.7;
        let m = sp.signature_matrix().scale_re(-a_val);
        let nu = AtomicMeasure::new(sp, unit_box(), vec![(MomentumPoint([0.0; 4]), m)]).unwrap();
        let l = lagrangian(&nu, &SpacetimePoint([0.5, 0.0, 0.0, 0.0])).unwrap();
        assert!(l.abs() < 1e-12);

        // measure engineered so A(0) = diag(1, 0): M = diag(1,0) at one atom,
        // A(0) = M^2 = diag(1,0), L = 1 - 1/2.
        let m = Operator::diag_re(&[1.0, 0.0]);
        let nu = AtomicMeasure::new(sp, unit_box(), vec![(MomentumPoint([0.0; 4]), m)]).unwrap();
        let l = lagrangian(&nu, &SpacetimePoint([0.0; 4])).unwrap();
        assert!((l - 0.5).abs() < 1e-12);

        // nilpotent chain: single atom with M nilpotent
        let mut nil = Array2::zeros((2, 2));
        nil[(0, 1)] = c(1.0, 0.0);
        let m = Operator::from_array(nil).unwrap();
        let nu = AtomicMeasure::new(sp, unit_box(), vec![(MomentumPoint([0.0; 4]), m)]).unwrap();
        let l = lagrangian(&nu, &SpacetimePoint([0.0; 4])).unwrap();
        assert!(l.abs() < 1e-12);
    }

    #[test]
    fn lagrangian_nonnegative_on_random_measures() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1usize, 2] {
            let sp = SignatureSpace::new(n).unwrap();
            for _ in 0..500 {
                let nu = random_ndm(sp, 2, &mut rng);
                let xi = random_xi(&mut rng);
                let raw = lagrangian_raw(nu.as_atomic(), &xi).unwrap();
                assert!(raw >= -LAGRANGIAN_CLAMP, "raw Lagrangian {raw}");
                assert!(lagrangian(nu.as_atomic(), &xi).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn action_zero_measure_and_single_atom() {
        let sp = SignatureSpace::new(1).unwrap();
        let empty = AtomicMeasure::empty(sp, unit_box());
        let qb = small_qbox();
        assert_eq!(action(&empty, &qb).unwrap(), 0.0);
        assert_eq!(t_functional(&empty, &qb).unwrap(), 0.0);

        // constant integrand for a single atom: S = L(M^2) vol, T = |M^2|^2 vol
        let m = Operator::diag_re(&[1.0, 0.25]);
        let nu = AtomicMeasure::new(sp, unit_box(), vec![(MomentumPoint([0.3; 4]), m.clone())])
            .unwrap();
        let m_sq = m.matmul(&m);
        let l = lagrangian_of_chain(&m_sq, 2).unwrap();
        let s = action(&nu, &qb).unwrap();
        assert!((s - l * qb.volume()).abs() <= 1e-10 * (1.0 + s.abs()));
        let t = t_functional(&nu, &qb).unwrap();
        let expect = m_sq.spectral_weight().unwrap().powi(2) * qb.volume();
        assert!((t - expect).abs() <= 1e-10 * (1.0 + t.abs()));
    }

    #[test]
    fn action_scaling_quartic() {
        let sp = SignatureSpace::new(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let qb = small_qbox();
        for _ in 0..20 {
            let nu = random_ndm(sp, 2, &mut rng);
            let (s, t) = action_and_t(nu.as_atomic(), &qb).unwrap();
            for &factor in &[0.5f64, 2.0] {
                let scaled = nu.as_atomic().scale_re(factor);
                let (s2, t2) = action_and_t(&scaled, &qb).unwrap();
                let f4 = factor.powi(4);
                assert!((s2 - f4 * s).abs() <= 1e-9 * (1.0 + s2.max(f4 * s)));
                assert!((t2 - f4 * t).abs() <= 1e-9 * (1.0 + t2.max(f4 * t)));
            }
        }
    }

    #[test]
    fn action_reflection_symmetric_box() {
        // L(xi) = L(-xi), so the symmetric trapezoid grid gives the same sum
        // if we flip the whole grid.
        let sp = SignatureSpace::new(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let nu = random_ndm(sp, 3, &mut rng);
        let qb = small_qbox();
        let nodes = qb.nodes();
        let direct: Vec<f64> = nodes
            .iter()
            .map(|(xi, w)| w * lagrangian(nu.as_atomic(), xi).unwrap())
            .collect();
        let reflected: Vec<f64> = nodes
            .iter()
            .map(|(xi, w)| w * lagrangian(nu.as_atomic(), &xi.neg()).unwrap())
            .collect();
        let a = pairwise_sum(&direct);
        let b = pairwise_sum(&reflected);
        assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn pairwise_sum_matches_serial() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let values: Vec<f64> = (0..1000).map(|_| rng.random::<f64>() - 0.5).collect();
        let serial: f64 = values.iter().sum();
        assert!((pairwise_sum(&values) - serial).abs() < 1e-12);
    }

    #[test]
    fn constraint_report_rest_frame_atom() {
        let sea = crate::dirac::build_dirac_sea(
            &crate::dirac::ShellGrid::new(1.0, 0.0, 1, false).unwrap(),
        )
        .unwrap();
        let v0 = 1.0;
        let cs = ConstraintSet::new(ConstraintMode::TraceSwf, 2.0 * v0, Some(10.0), None).unwrap();
        let report = constraint_report(&sea, &cs, None).unwrap();
        assert!((report.trace - 2.0 * v0).abs() < 1e-12);
        assert!((report.strace_s - 2.0 * v0).abs() < 1e-12);
        assert!((report.sweight - 2.0 * v0).abs() < 1e-10);
        assert!(report.residuals.trace < 1e-12);
        assert_eq!(report.residuals.inequality, 0.0);
    }

    #[test]
    fn constraint_report_zero_measure() {
        let sp = SignatureSpace::new(1).unwrap();
        let zero =
            NegativeDefiniteMeasure::new(AtomicMeasure::empty(sp, unit_box())).unwrap();
        let cs = ConstraintSet::new(ConstraintMode::TraceF, 1.5, Some(1.0), None).unwrap();
        let report = constraint_report(&zero, &cs, None).unwrap();
        assert_eq!(report.trace, 0.0);
        assert_eq!(report.residuals.trace, 1.5);
    }

    #[test]
    fn constraint_report_sweight_conjugation_invariant() {
        let sp = SignatureSpace::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let nu = random_ndm(sp, 3, &mut rng);
        let y = random_weight(4, &mut rng);
        let x = y.sub(&sp.adjoint(&y).unwrap()).scale_re(0.25);
        let u = crate::krein::expm(&x);
        let conj = nu.conjugate(&u).unwrap();
        let cs = ConstraintSet::new(ConstraintMode::TraceSwf, 1.0, Some(5.0), None).unwrap();
        let a = constraint_report(&nu, &cs, None).unwrap();
        let b = constraint_report(&conj, &cs, None).unwrap();
        assert!((a.sweight - b.sweight).abs() <= 1e-8 * (1.0 + a.sweight));
    }

    #[test]
    fn constraint_set_field_validation() {
        assert!(ConstraintSet::new(ConstraintMode::TraceF, 0.0, Some(1.0), None).is_err());
        assert!(ConstraintSet::new(ConstraintMode::TraceF, 1.0, None, None).is_err());
        assert!(ConstraintSet::new(ConstraintMode::TraceF, 1.0, Some(1.0), Some(1.0)).is_err());
        assert!(ConstraintSet::new(ConstraintMode::TraceBoundedness, 1.0, Some(1.0), None).is_err());
        assert!(ConstraintSet::new(ConstraintMode::TraceBoundedness, 1.0, None, Some(2.0)).is_ok());
    }

    #[test]
    fn unitary_invariance_of_lagrangian_and_action() {
        let sp = SignatureSpace::new(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let qb = small_qbox();
        for _ in 0..25 {
            let nu = random_ndm(sp, 2, &mut rng);
            let y = random_weight(2, &mut rng);
            let x = y.sub(&sp.adjoint(&y).unwrap()).scale_re(0.25);
            let u = crate::krein::expm(&x);
            let conj = nu.conjugate(&u).unwrap();
            let xi = random_xi(&mut rng);
            let l0 = lagrangian(nu.as_atomic(), &xi).unwrap();
            let l1 = lagrangian(conj.as_atomic(), &xi).unwrap();
            assert!((l0 - l1).abs() <= 1e-8 * (1.0 + l0));
            let s0 = action(nu.as_atomic(), &qb).unwrap();
            let s1 = action(conj.as_atomic(), &qb).unwrap();
            assert!((s0 - s1).abs() <= 1e-7 * (1.0 + s0.max(s1)));
        }
    }

    #[test]
    fn integrate_cross_check_with_projector() {
        let sp = SignatureSpace::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let nu = random_ndm(sp, 3, &mut rng);
        let xi = random_xi(&mut rng);
        let by_integrate = nu
            .integrate(|k| Complex64::from_polar(1.0, minkowski_pairing(&k.0, &xi.0)))
            .unwrap();
        let by_projector = fermionic_projector(nu.as_atomic(), &xi);
        assert!(by_integrate.sub(&by_projector).column_sum_norm() <= 1e-12);
    }

    #[test]
    fn lagrangian_profile_csv() {
        let sp = SignatureSpace::new(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let nu = random_ndm(sp, 2, &mut rng);
        let mut buf = Vec::new();
        write_lagrangian_profile_csv(&mut buf, nu.as_atomic(), 0, 1.0, 5).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "xi,lagrangian");
        assert_eq!(lines.len(), 6);
    }
}
