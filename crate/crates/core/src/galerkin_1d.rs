//! Galerkin system for depth-dependent media: `A γ = m` with
//! `A ∈ C^{(3N−2)×N}`, unknowns `γ(y) = Σ_j γ_j h_j(2y)`.
//!
//! Entry formula, with `c_{kl} = p̃_{kl} + i p_{kl}` and `t = j + l − 2n`:
//! `A_{s,j} = Σ_{k,l} c_{kl} Σ_n β_{j,l,n} ζ_t Φ_{k,t,s}`, where `Φ_{k,t,s}`
//! is the coefficient of `h_s` in `ω^t h_k(ω)` (see [`MonomialTable`]).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{feldheim_beta, fill_hermite_functions, AxisRole, MonomialTable};
use crate::quadrature::{Grid1D, Interval};
use crate::spectral::{zeta, HermiteExpansion};

/// Where a system came from; carried into saved artifacts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub phantom: String,
    pub noise_p: f64,
    pub noise_m: f64,
    pub seed: u64,
    pub inverse_crime: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct System1D {
    pub n: usize,
    pub a: DMatrix<Complex64>,
    pub m: DVector<Complex64>,
    pub freq_window: Interval,
    pub meta: Provenance,
}

impl System1D {
    pub fn new(a: DMatrix<Complex64>, m: DVector<Complex64>, freq_window: Interval, meta: Provenance) -> Result<Self> {
        let n = a.ncols();
        if n == 0 || a.nrows() != 3 * n - 2 || m.len() != 3 * n - 2 {
            return Err(Error::Domain(format!(
                "1-D system must be (3N-2)xN with rhs 3N-2, got {}x{} and {}",
                a.nrows(),
                a.ncols(),
                m.len()
            )));
        }
        Ok(Self { n, a, m, freq_window, meta })
    }
}

/// Number of test functions (rows) for order `n`.
pub fn rows_1d(n: usize) -> usize {
    3 * n - 2
}

/// Validates a rank-2 PAT expansion pair and returns `c = p̃ + i p` row-major.
fn kernel_coeffs_2(p: &HermiteExpansion, p_tilde: &HermiteExpansion, n: usize) -> Result<Vec<Complex64>> {
    if p.rank() != 2 || p_tilde.rank() != 2 {
        return Err(Error::Domain("1-D assembly needs rank-2 (frequency x depth) expansions".into()));
    }
    if p.shape() != [n, n] || p_tilde.shape() != [n, n] {
        return Err(Error::Domain(format!(
            "PAT expansions have shapes {:?} and {:?}, expected [{n}, {n}]",
            p.shape(),
            p_tilde.shape()
        )));
    }
    if p.bases() != p_tilde.bases() {
        return Err(Error::Domain("PAT expansion and its Hilbert transform use different bases".into()));
    }
    let freq = p.bases()[0];
    if freq.role != AxisRole::Frequency || freq.dilation != 1.0 {
        return Err(Error::Domain("axis 0 must be the undilated frequency axis".into()));
    }
    let depth = p.bases()[1];
    if depth.role != AxisRole::Space || depth.dilation != 2.0 {
        return Err(Error::Domain("1-D depth axis must be a space axis with dilation 2".into()));
    }
    Ok(p_tilde
        .coeffs()
        .iter()
        .zip(p.coeffs())
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect())
}

/// Assembles `A` from the PAT coefficients `p_{kl}` (basis `h_k(ω) h_l(2y)`)
/// and their frequency-axis Hilbert transform `p̃`.
pub fn assemble_a(p: &HermiteExpansion, p_tilde: &HermiteExpansion, n: usize) -> Result<DMatrix<Complex64>> {
    let c = kernel_coeffs_2(p, p_tilde, n)?;
    let t_count = 2 * n - 1;
    let phi = MonomialTable::new(n, t_count)?;
    let zetas: Vec<Complex64> = (0..t_count).map(zeta).collect::<Result<_>>()?;
    let rows = rows_1d(n);
    let mut a = DMatrix::<Complex64>::zeros(rows, n);
    // w[k][t] = Σ_l c_{kl} Σ_n β_{j,l,n} ζ_t, rebuilt per column j
    let mut w = vec![Complex64::new(0.0, 0.0); n * t_count];
    for j in 0..n {
        w.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for l in 0..n {
            for nn in 0..=j.min(l) {
                let t = j + l - 2 * nn;
                let f = zetas[t] * feldheim_beta(j, l, nn)?;
                for k in 0..n {
                    w[k * t_count + t] += c[k * n + l] * f;
                }
            }
        }
        for k in 0..n {
            for t in 0..t_count {
                let wkt = w[k * t_count + t];
                if wkt == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (s, &phi_s) in phi.row(k, t).iter().enumerate() {
                    if phi_s != 0.0 {
                        a[(s, j)] += wkt * phi_s;
                    }
                }
            }
        }
    }
    Ok(a)
}

/// `m_s = ∫_W 2 e^{ω²/4} m(ω) h_s(ω) dω` for `s < 3N−2`, by the quadrature
/// rule `grid`, which must lie inside `window`.
pub fn assemble_rhs_m(samples: &[Complex64], grid: &Grid1D, window: Interval, n: usize) -> Result<DVector<Complex64>> {
    let rows = rows_1d(n);
    weighted_projection(samples, grid, window, rows, 0.25, 2.0)
}

/// `Σ_i w_i · scale · e^{rate ω_i²} m_i h_s(ω_i)` for `s < rows`.
pub(crate) fn weighted_projection(
    samples: &[Complex64],
    grid: &Grid1D,
    window: Interval,
    rows: usize,
    rate: f64,
    scale: f64,
) -> Result<DVector<Complex64>> {
    if samples.len() != grid.len() {
        return Err(Error::Domain(format!(
            "{} OCT samples for a grid of {} nodes",
            samples.len(),
            grid.len()
        )));
    }
    grid.check_inside(window, "OCT frequency")?;
    if grid.len() < 4 * rows {
        return Err(Error::Precondition(format!(
            "OCT grid has {} nodes, {} test functions need at least {}",
            grid.len(),
            rows,
            4 * rows
        )));
    }
    let mut out = DVector::<Complex64>::zeros(rows);
    let mut h = vec![0.0; rows];
    for ((&x, &w), &m) in grid.nodes.iter().zip(&grid.weights).zip(samples) {
        fill_hermite_functions(x, &mut h);
        let f = m * (scale * w * (rate * x * x).exp());
        for (o, &hs) in out.iter_mut().zip(&h) {
            *o += f * hs;
        }
    }
    Ok(out)
}

/// Direct double-quadrature Galerkin matrix
/// `A_{s,j} = 2 ∫∫ e^{ω²/4} h_s(ω) (H[p] + i p)(ω, y) e^{−2iωy} h_j(2y) dy dω`,
/// where `H[p] + i p = Σ c_{kl} h_k(ω) h_l(2y)` is taken from the same
/// coefficient pair as [`assemble_a`].
///
/// The ω integral runs over `[−12, 12]`: the closed form is a full-line
/// integral, and restricting to a frequency window changes the matrix.
pub fn oracle_assemble_a(p: &HermiteExpansion, p_tilde: &HermiteExpansion, n: usize) -> Result<DMatrix<Complex64>> {
    if n > 6 {
        return Err(Error::Precondition(format!("oracle assembly limited to N <= 6, got {n}")));
    }
    let c = kernel_coeffs_2(p, p_tilde, n)?;
    let omega = Grid1D::composite_gauss_legendre(Interval::symmetric(12.0), 48, 16);
    let ygrid = Grid1D::composite_gauss_legendre(Interval::symmetric(6.0), 48, 16);
    let rows = rows_1d(n);
    let hy: Vec<Vec<f64>> = ygrid
        .nodes
        .iter()
        .map(|&y| {
            let mut h = vec![0.0; n];
            fill_hermite_functions(2.0 * y, &mut h);
            h
        })
        .collect();
    let mut a = DMatrix::<Complex64>::zeros(rows, n);
    let mut hw = vec![0.0; rows];
    for (&om, &wo) in omega.nodes.iter().zip(&omega.weights) {
        // K[l][j] = ∫ h_l(2y) h_j(2y) e^{−2iωy} dy
        let mut kern = vec![Complex64::new(0.0, 0.0); n * n];
        for ((&y, &wy), h) in ygrid.nodes.iter().zip(&ygrid.weights).zip(&hy) {
            let e = Complex64::from_polar(wy, -2.0 * om * y);
            for l in 0..n {
                for j in 0..n {
                    kern[l * n + j] += e * (h[l] * h[j]);
                }
            }
        }
        fill_hermite_functions(om, &mut hw);
        let g = 2.0 * wo * (0.25 * om * om).exp();
        for j in 0..n {
            let mut inner = Complex64::new(0.0, 0.0);
            for k in 0..n {
                for l in 0..n {
                    inner += c[k * n + l] * hw[k] * kern[l * n + j];
                }
            }
            for (s, &hs) in hw.iter().enumerate() {
                a[(s, j)] += inner * (g * hs);
            }
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::HermiteBasisSpec;
    use crate::hermite::eval_hermite_fn;

    fn bases(n: usize) -> Vec<HermiteBasisSpec> {
        vec![HermiteBasisSpec::frequency(n).unwrap(), HermiteBasisSpec::space(n, 2.0).unwrap()]
    }

    fn sample_pair(n: usize) -> (HermiteExpansion, HermiteExpansion) {
        let p: Vec<f64> = (0..n * n).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let pt: Vec<f64> = (0..n * n).map(|i| ((i * 13 % 7) as f64 - 3.0) / 5.0).collect();
        (
            HermiteExpansion::new(bases(n), p).unwrap(),
            HermiteExpansion::new(bases(n), pt).unwrap(),
        )
    }

    fn rel_frobenius(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn shape_and_zero_kernel() {
        let z = HermiteExpansion::zeros(bases(15)).unwrap();
        let a = assemble_a(&z, &z, 15).unwrap();
        assert_eq!(a.shape(), (43, 15));
        assert!(a.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let (p, _) = sample_pair(4);
        let (_, pt) = sample_pair(3);
        assert!(matches!(assemble_a(&p, &pt, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn matches_oracle_small_orders() {
        for n in [2, 3, 4] {
            let (p, pt) = sample_pair(n);
            let a = assemble_a(&p, &pt, n).unwrap();
            let o = oracle_assemble_a(&p, &pt, n).unwrap();
            assert!(rel_frobenius(&a, &o) < 1e-7, "n={n}: {}", rel_frobenius(&a, &o));
        }
    }

    #[test]
    fn oracle_limited_to_small_orders() {
        let (p, pt) = sample_pair(7);
        assert!(matches!(oracle_assemble_a(&p, &pt, 7), Err(Error::Precondition(_))));
    }

    #[test]
    fn linear_in_kernel() {
        let (p, pt) = sample_pair(5);
        let a = assemble_a(&p, &pt, 5).unwrap();
        let p3 = p.axpby(3.0, &p, 0.0).unwrap();
        let pt3 = pt.axpby(3.0, &pt, 0.0).unwrap();
        let a3 = assemble_a(&p3, &pt3, 5).unwrap();
        assert!(rel_frobenius(&a3, &(a * Complex64::new(3.0, 0.0))) < 1e-14);
    }

    fn fine_window() -> (Grid1D, Interval) {
        let w = Interval::symmetric(4.0);
        (Grid1D::composite_gauss_legendre(w, 64, 16), w)
    }

    // on [-4,4] the tail mass of h_2 h_s is ~1e-5, so the unit-vector
    // identity is checked on a window wide enough to hold it to 1e-8
    #[test]
    fn rhs_unit_vector() {
        let w = Interval::symmetric(8.0);
        let g = Grid1D::composite_gauss_legendre(w, 64, 16);
        let m: Vec<Complex64> = g
            .nodes
            .iter()
            .map(|&x| Complex64::new((-0.25 * x * x).exp() * eval_hermite_fn(2, x) / 2.0, 0.0))
            .collect();
        let r = assemble_rhs_m(&m, &g, w, 5).unwrap();
        for (s, v) in r.iter().enumerate() {
            let want = if s == 2 { 1.0 } else { 0.0 };
            assert!((v - want).norm() < 1e-8, "s={s}: {v}");
        }
    }

    #[test]
    fn rhs_zero_and_window_check() {
        let (g, w) = fine_window();
        let zero = vec![Complex64::new(0.0, 0.0); g.len()];
        assert!(assemble_rhs_m(&zero, &g, w, 5).unwrap().iter().all(|v| v.norm() == 0.0));
        assert!(matches!(
            assemble_rhs_m(&zero, &g, Interval::symmetric(3.0), 5),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn rhs_parity_for_hermitian_data() {
        let (g, w) = fine_window();
        let m: Vec<Complex64> = g
            .nodes
            .iter()
            .map(|&x| Complex64::new((-x * x).exp() * (1.0 + x * x), x * (-0.5 * x * x).exp()))
            .collect();
        let r = assemble_rhs_m(&m, &g, w, 6).unwrap();
        for (s, v) in r.iter().enumerate() {
            if s % 2 == 0 {
                assert!(v.im.abs() < 1e-8);
            } else {
                assert!(v.re.abs() < 1e-8);
            }
        }
    }
}
