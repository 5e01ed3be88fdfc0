//! Discretized Dirac-sea reference measure on the lower mass shell.
//!
//! The distributional measure `(k̸+m) δ(k²−m²) Θ(−k⁰) d⁴k` reduces on the
//! lower shell `k⁰ = −ω(k⃗)`, `ω(k⃗) = √(k⃗²+m²)`, to the spatial density
//! `d³k/(2ω)`. The ball `|k⃗| ≤ kmax` is discretized by a uniform cell-centered
//! Cartesian grid with cell-volume weights, which yields a finitely-supported
//! negative definite measure.
//!
//! Gamma matrices are fixed in the Dirac representation with metric signature
//! `(+,−,−,−)`, so that `γ⁰` coincides with the signature matrix `S` of the
//! `n = 2` spin space.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::krein::{Operator, SignatureSpace};
use crate::measure::{AtomicMeasure, CompactBox, MomentumPoint, NegativeDefiniteMeasure};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// The four gamma matrices in the Dirac representation.
#[derive(Clone, Debug)]
pub struct GammaSet {
    gammas: [Operator; 4],
}

impl GammaSet {
    /// Dirac representation: `γ⁰ = diag(1,1,−1,−1)`,
    /// `γⁱ = [[0, σⁱ], [−σⁱ, 0]]`.
    pub fn dirac() -> Self {
        let c = Complex64::new;
        let zero = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        let i = c(0.0, 1.0);

        let sigma = [
            // sigma_x
            [[zero, one], [one, zero]],
            // sigma_y
            [[zero, -i], [i, zero]],
            // sigma_z
            [[one, zero], [zero, -one]],
        ];

        let mut g0 = Array2::zeros((4, 4));
        g0[(0, 0)] = one;
        g0[(1, 1)] = one;
        g0[(2, 2)] = -one;
        g0[(3, 3)] = -one;

        let mut gammas = vec![Operator::from_array(g0).unwrap()];
        for s in &sigma {
            let mut g = Array2::zeros((4, 4));
            for a in 0..2 {
                for b in 0..2 {
                    g[(a, b + 2)] = s[a][b];
                    g[(a + 2, b)] = -s[a][b];
                }
            }
            gammas.push(Operator::from_array(g).unwrap());
        }
        GammaSet {
            gammas: gammas.try_into().unwrap(),
        }
    }

    pub fn gamma(&self, mu: usize) -> &Operator {
        &self.gammas[mu]
    }

    /// `k̸ = k⁰γ⁰ − Σᵢ kⁱγⁱ` (index-lowered contraction with `η`).
    pub fn slash(&self, k: &MomentumPoint) -> Operator {
        let mut acc = self.gammas[0].scale_re(k.0[0]);
        for mu in 1..4 {
            acc = acc.sub(&self.gammas[mu].scale_re(k.0[mu]));
        }
        acc
    }

    /// Energy-shell projectors `p± = (k̸+m)γ⁰/(2k⁰)` at `k⁰ = ±ω(k⃗)`:
    /// idempotent, Hermitian w.r.t. the Euclidean product, and satisfying
    /// `p±(k⃗)γ⁰ = γ⁰ p±(−k⃗)`.
    pub fn shell_projectors(&self, kvec: [f64; 3], m: f64) -> Result<(Operator, Operator)> {
        if !(m > 0.0) {
            return Err(Error::validation("shell projectors need m > 0"));
        }
        let omega = (kvec.iter().map(|x| x * x).sum::<f64>() + m * m).sqrt();
        let project = |k0: f64| {
            let k = MomentumPoint([k0, kvec[0], kvec[1], kvec[2]]);
            self.slash(&k)
                .add(&Operator::identity(4).scale_re(m))
                .matmul(&self.gammas[0])
                .scale_re(1.0 / (2.0 * k0))
        };
        Ok((project(omega), project(-omega)))
    }
}

/// Discretization of the lower mass shell: a cell-centered grid of `nk`
/// points per spatial axis over `[−kmax, kmax]³`, restricted to the ball
/// `|k⃗| ≤ kmax`. With `kmax = 0` the grid degenerates to the rest point with
/// a unit cell volume.
#[derive(Clone, Copy, Debug)]
pub struct ShellGrid {
    pub mass: f64,
    pub kmax: f64,
    pub nk: usize,
    /// Include the `1/(2π)⁴` Fourier normalization in the weights.
    pub two_pi_normalization: bool,
}

impl ShellGrid {
    pub fn new(mass: f64, kmax: f64, nk: usize, two_pi_normalization: bool) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(Error::validation("shell grid needs mass > 0"));
        }
        if !(kmax >= 0.0) || !kmax.is_finite() {
            return Err(Error::validation("shell grid needs finite kmax >= 0"));
        }
        if nk == 0 {
            return Err(Error::validation("shell grid needs nk >= 1"));
        }
        Ok(ShellGrid {
            mass,
            kmax,
            nk,
            two_pi_normalization,
        })
    }

    /// Cell volume of the spatial discretization.
    pub fn cell_volume(&self) -> f64 {
        if self.kmax > 0.0 {
            (2.0 * self.kmax / self.nk as f64).powi(3)
        } else {
            1.0
        }
    }

    fn spatial_points(&self) -> Vec<[f64; 3]> {
        let mut points = Vec::new();
        let h = if self.kmax > 0.0 {
            2.0 * self.kmax / self.nk as f64
        } else {
            0.0
        };
        for ix in 0..self.nk {
            for iy in 0..self.nk {
                for iz in 0..self.nk {
                    let coord = |idx: usize| -self.kmax + h * (idx as f64 + 0.5);
                    let k = [coord(ix), coord(iy), coord(iz)];
                    if k.iter().map(|x| x * x).sum::<f64>().sqrt() <= self.kmax {
                        points.push(k);
                    }
                }
            }
        }
        points
    }
}

/// Build the discretized Dirac-sea measure: atoms at `k = (−ω(k⃗), k⃗)` with
/// weights `κ (k̸+m) Δ³k/(2ω)`, where `κ` is 1 or `1/(2π)⁴`.
pub fn build_dirac_sea(grid: &ShellGrid) -> Result<NegativeDefiniteMeasure> {
    let space = SignatureSpace::new(2)?;
    let gammas = GammaSet::dirac();
    let kappa = if grid.two_pi_normalization {
        TWO_PI.powi(-4)
    } else {
        1.0
    };
    let cell = grid.cell_volume();
    let m_id = Operator::identity(4).scale_re(grid.mass);

    let mut atoms = Vec::new();
    let mut lo = [f64::INFINITY; 4];
    let mut hi = [f64::NEG_INFINITY; 4];
    for kvec in grid.spatial_points() {
        let omega = (kvec.iter().map(|x| x * x).sum::<f64>() + grid.mass * grid.mass).sqrt();
        let point = MomentumPoint([-omega, kvec[0], kvec[1], kvec[2]]);
        let weight = gammas
            .slash(&point)
            .add(&m_id)
            .scale_re(kappa * cell / (2.0 * omega));
        for i in 0..4 {
            lo[i] = lo[i].min(point.0[i]);
            hi[i] = hi[i].max(point.0[i]);
        }
        atoms.push((point, weight));
    }
    if atoms.is_empty() {
        return Err(Error::validation("shell grid produced no atoms"));
    }
    let domain = CompactBox::new(lo, hi)?;
    let measure = AtomicMeasure::new(space, domain, atoms)?;
    NegativeDefiniteMeasure::new(measure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krein::PREDICATE_TOL;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn gamma_anticommutation() {
        let g = GammaSet::dirac();
        let eta = [1.0, -1.0, -1.0, -1.0];
        for mu in 0..4 {
            for nu in 0..4 {
                let anti = g
                    .gamma(mu)
                    .matmul(g.gamma(nu))
                    .add(&g.gamma(nu).matmul(g.gamma(mu)));
                let expect = if mu == nu {
                    Operator::identity(4).scale_re(2.0 * eta[mu])
                } else {
                    Operator::zeros(4)
                };
                assert!(anti.sub(&expect).column_sum_norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gamma0_is_signature_matrix() {
        let g = GammaSet::dirac();
        let s = SignatureSpace::new(2).unwrap().signature_matrix();
        assert_eq!(*g.gamma(0), s);
    }

    #[test]
    fn slash_clifford_identity() {
        let g = GammaSet::dirac();
        assert_eq!(*g.gamma(0), g.slash(&MomentumPoint([1.0, 0.0, 0.0, 0.0])));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let k = MomentumPoint([
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            ]);
            let ksq = crate::measure::minkowski_pairing(&k.0, &k.0);
            let slash = g.slash(&k);
            let expect = Operator::identity(4).scale_re(ksq);
            assert!(slash.matmul(&slash).sub(&expect).column_sum_norm() < 1e-12);
        }
    }

    #[test]
    fn rest_frame_slash() {
        let g = GammaSet::dirac();
        let m = 1.3;
        let k = MomentumPoint([-m, 0.0, 0.0, 0.0]);
        let got = g.slash(&k).add(&Operator::identity(4).scale_re(m));
        let expect = Operator::diag_re(&[0.0, 0.0, 2.0 * m, 2.0 * m]);
        assert!(got.sub(&expect).column_sum_norm() < 1e-12);
    }

    #[test]
    fn shell_projector_properties() {
        let g = GammaSet::dirac();
        let m = 1.0;
        // at rest: p_minus = (1 - gamma0)/2 = diag(0,0,1,1)
        let (_, p_minus) = g.shell_projectors([0.0, 0.0, 0.0], m).unwrap();
        assert!(
            p_minus
                .sub(&Operator::diag_re(&[0.0, 0.0, 1.0, 1.0]))
                .column_sum_norm()
                < 1e-12
        );
        let (p_plus, _) = g.shell_projectors([0.0, 0.0, 0.0], m).unwrap();
        assert!(p_plus.matmul(&p_minus).column_sum_norm() == 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let kvec = [
                rng.random::<f64>() * 4.0 - 2.0,
                rng.random::<f64>() * 4.0 - 2.0,
                rng.random::<f64>() * 4.0 - 2.0,
            ];
            let (pp, pm) = g.shell_projectors(kvec, m).unwrap();
            for p in [&pp, &pm] {
                // idempotent
                assert!(p.matmul(p).sub(p).column_sum_norm() < 1e-10);
                // symmetric w.r.t. the Euclidean product
                assert!(p.sub(&p.dagger()).column_sum_norm() < 1e-12);
            }
            // p±(k) gamma0 = gamma0 p±(-k)
            let neg = [-kvec[0], -kvec[1], -kvec[2]];
            let (pp_neg, pm_neg) = g.shell_projectors(neg, m).unwrap();
            for (p, p_neg) in [(&pp, &pp_neg), (&pm, &pm_neg)] {
                let lhs = p.matmul(g.gamma(0));
                let rhs = g.gamma(0).matmul(p_neg);
                assert!(lhs.sub(&rhs).column_sum_norm() < 1e-12);
            }
        }
    }

    #[test]
    fn footnote_positivity_identity() {
        // <u|(kslash+m)u> = 2 k0 <p-(−k⃗)u | p-(−k⃗)u> on the lower shell
        let g = GammaSet::dirac();
        let sp = SignatureSpace::new(2).unwrap();
        let m = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let kvec = [
                rng.random::<f64>() * 4.0 - 2.0,
                rng.random::<f64>() * 4.0 - 2.0,
                rng.random::<f64>() * 4.0 - 2.0,
            ];
            let omega = (kvec.iter().map(|x| x * x).sum::<f64>() + m * m).sqrt();
            let k0 = -omega;
            let k = MomentumPoint([k0, kvec[0], kvec[1], kvec[2]]);
            let op = g.slash(&k).add(&Operator::identity(4).scale_re(m));
            let u: Vec<Complex64> = (0..4)
                .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let lhs = sp.ssp(&u, &op.apply(&u).unwrap()).unwrap();
            let neg = [-kvec[0], -kvec[1], -kvec[2]];
            let (_, pm_neg) = g.shell_projectors(neg, m).unwrap();
            let pu = pm_neg.apply(&u).unwrap();
            let rhs = 2.0 * k0 * pu.iter().map(|z| z.norm_sqr()).sum::<f64>();
            assert!((lhs - c(rhs, 0.0)).norm() <= 1e-10 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn single_rest_atom() {
        let grid = ShellGrid::new(1.0, 0.0, 1, false).unwrap();
        let sea = build_dirac_sea(&grid).unwrap();
        assert_eq!(sea.natoms(), 1);
        let v0 = grid.cell_volume();
        assert_eq!(v0, 1.0);
        let expect = Operator::diag_re(&[0.0, 0.0, v0, v0]);
        assert!(sea.atoms()[0].weight.sub(&expect).column_sum_norm() < 1e-12);
        let trace = sea.total().trace();
        assert!((trace - c(2.0 * v0, 0.0)).norm() < 1e-12);
        // Tr(-S nu(K)) = 2 kappa V0 as well
        let sp = sea.space();
        let strace = sp
            .signature_matrix()
            .matmul(&sea.total())
            .neg()
            .trace();
        assert!((strace - c(2.0 * v0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn positivity_across_grid() {
        let sp = SignatureSpace::new(2).unwrap();
        for &kmax in &[1.0f64, 5.0] {
            for &nk in &[3usize, 7] {
                let grid = ShellGrid::new(1.0, kmax, nk, false).unwrap();
                let sea = build_dirac_sea(&grid).unwrap();
                for atom in sea.atoms() {
                    assert!(sp
                        .is_positive_wrt_ssp(&atom.weight.neg(), 1e-10)
                        .unwrap());
                }
            }
        }
    }

    #[test]
    fn two_pi_normalization_scales_weights() {
        let plain = build_dirac_sea(&ShellGrid::new(1.0, 1.0, 3, false).unwrap()).unwrap();
        let scaled = build_dirac_sea(&ShellGrid::new(1.0, 1.0, 3, true).unwrap()).unwrap();
        let factor = TWO_PI.powi(-4);
        let a = plain.total().scale_re(factor);
        let b = scaled.total();
        assert!(a.sub(&b).column_sum_norm() < 1e-15);
    }

    #[test]
    fn projector_symmetry_of_sea() {
        // P(-xi) = adjoint(P(xi)) since the weights are s-selfadjoint
        let sp = SignatureSpace::new(2).unwrap();
        let sea = build_dirac_sea(&ShellGrid::new(1.0, 2.0, 3, false).unwrap()).unwrap();
        for atom in sea.atoms() {
            assert!(sp
                .is_s_selfadjoint(&atom.weight, PREDICATE_TOL * (1.0 + atom.weight.column_sum_norm()))
                .unwrap());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..100 {
            let xi = [
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            ];
            let p_pos = sea
                .integrate(|k| Complex64::from_polar(1.0, crate::measure::minkowski_pairing(&k.0, &xi)))
                .unwrap();
            let neg_xi = [-xi[0], -xi[1], -xi[2], -xi[3]];
            let p_neg = sea
                .integrate(|k| Complex64::from_polar(1.0, crate::measure::minkowski_pairing(&k.0, &neg_xi)))
                .unwrap();
            let adj = sp.adjoint(&p_pos).unwrap();
            assert!(p_neg.sub(&adj).column_sum_norm() <= 1e-10 * (1.0 + p_pos.column_sum_norm()));
        }
    }

    #[test]
    fn isotropy_of_trace() {
        // permuting spatial axes permutes atoms; the total trace is unchanged
        let grid = ShellGrid::new(1.0, 2.0, 4, false).unwrap();
        let sea = build_dirac_sea(&grid).unwrap();
        let base_trace = sea.total().trace();
        // swap axes 1 and 3 by permuting atom coordinates
        let swapped: Vec<(MomentumPoint, Operator)> = sea
            .atoms()
            .iter()
            .map(|a| {
                let k = a.point.0;
                (MomentumPoint([k[0], k[3], k[2], k[1]]), a.weight.clone())
            })
            .collect();
        let swapped = AtomicMeasure::new(sea.space(), sea.domain(), swapped).unwrap();
        assert_eq!(swapped.total().trace(), base_trace);
    }
}
