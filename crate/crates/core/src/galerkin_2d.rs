//! Galerkin system for media constant along one axis, observed from in-plane
//! directions `θ = (0, θ₂, θ₃)`.
//!
//! With `c_{anu} = p̃_{anu} + i p_{anu}`, `t₁ = k + n − 2r`, `t₂ = l + u − 2q`:
//! `B_{k,l,μ}(θ) = Σ_{a,n,u} c_{anu} Σ_{r,q} β_{k,n,r} ζ_{t₁} θ₂^{t₁}
//!                 β_{l,u,q} ζ_{t₂} θ̃₃^{t₂} Φ_{a, t₁+t₂, μ}`,
//! and the stacked system `D ζ = d` has `K(5N−4)` rows and `N²` unknowns
//! ordered `γ_{0,0}, γ_{0,1}, …, γ_{N−1,N−1}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin_1d::{weighted_projection, Provenance};
use crate::hermite::{feldheim_beta, fill_hermite_functions, AxisRole, MonomialTable};
use crate::quadrature::{Grid1D, Interval};
use crate::spectral::{zeta, HermiteExpansion};

/// Unit detection direction with `θ₁ = 0` and `θ₃ > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct DetectionDirection {
    theta: [f64; 3],
}

impl DetectionDirection {
    pub fn new(theta: [f64; 3]) -> Result<Self> {
        let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        if theta[0] != 0.0 || !(theta[2] > 0.0) || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "detection direction {theta:?} must have θ₁ = 0, θ₃ > 0 and unit norm"
            )));
        }
        Ok(Self { theta })
    }

    /// `(0, cos φ, sin φ)` for `φ ∈ (0, π)`.
    pub fn from_angle(phi: f64) -> Result<Self> {
        Self::new([0.0, phi.cos(), phi.sin()])
    }

    pub fn theta(&self) -> [f64; 3] {
        self.theta
    }

    pub fn theta2(&self) -> f64 {
        self.theta[1]
    }

    /// `θ̃₃ = θ₃ + 1`
    pub fn theta3_tilde(&self) -> f64 {
        self.theta[2] + 1.0
    }
}

impl TryFrom<[f64; 3]> for DetectionDirection {
    type Error = Error;
    fn try_from(theta: [f64; 3]) -> Result<Self> {
        Self::new(theta)
    }
}

impl From<DetectionDirection> for [f64; 3] {
    fn from(d: DetectionDirection) -> Self {
        d.theta
    }
}

/// Number of test functions (rows per direction) for order `n`.
pub fn rows_2d(n: usize) -> usize {
    5 * n - 4
}

/// `B_{k,l,μ}` stored with `μ` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct BTensor {
    n: usize,
    data: Vec<Complex64>,
}

impl BTensor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.n, self.n, rows_2d(self.n)]
    }

    pub fn get(&self, k: usize, l: usize, mu: usize) -> Complex64 {
        self.data[(k * self.n + l) * rows_2d(self.n) + mu]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// `C(θ)`: rows `μ`, columns `(k, l)` row-major.
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let n = self.n;
        let rows = rows_2d(n);
        DMatrix::from_fn(rows, n * n, |mu, col| self.data[col * rows + mu])
    }

    /// Relative Frobenius distance `‖self − other‖/‖other‖`.
    pub fn rel_diff(&self, other: &Self) -> f64 {
        let num: f64 = self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = other.data.iter().map(|b| b.norm_sqr()).sum();
        (num / den).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct System2D {
    pub n: usize,
    pub directions: Vec<DetectionDirection>,
    pub d: DMatrix<Complex64>,
    pub rhs: DVector<Complex64>,
    pub freq_window: Interval,
    pub meta: Provenance,
}

fn kernel_coeffs_3(p: &HermiteExpansion, p_tilde: &HermiteExpansion, n: usize) -> Result<Vec<Complex64>> {
    if p.rank() != 3 || p_tilde.rank() != 3 {
        return Err(Error::Domain("2-D assembly needs rank-3 (frequency x y2 x y3) expansions".into()));
    }
    if p.shape() != [n, n, n] || p_tilde.shape() != [n, n, n] {
        return Err(Error::Domain(format!(
            "PAT expansions have shapes {:?} and {:?}, expected [{n}, {n}, {n}]",
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
    if p.bases()[1..].iter().any(|b| b.role != AxisRole::Space || b.dilation != 1.0) {
        return Err(Error::Domain("2-D spatial axes must be undilated space axes".into()));
    }
    Ok(p_tilde
        .coeffs()
        .iter()
        .zip(p.coeffs())
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect())
}

/// `U[k][n][t] = Σ_r β_{k,n,r} ζ_t x^t` over `t = k + n − 2r`.
fn fourier_product_table(n: usize, x: f64, zetas: &[Complex64]) -> Result<Vec<Complex64>> {
    let tc = 2 * n - 1;
    let mut u = vec![Complex64::new(0.0, 0.0); n * n * tc];
    for k in 0..n {
        for m in 0..n {
            for r in 0..=k.min(m) {
                let t = k + m - 2 * r;
                u[(k * n + m) * tc + t] += zetas[t] * (feldheim_beta(k, m, r)? * x.powi(t as i32));
            }
        }
    }
    Ok(u)
}

/// Assembly for arbitrary `(θ₂, θ̃₃)`; entries are polynomials in both.
pub(crate) fn assemble_b_raw(c: &[Complex64], n: usize, theta2: f64, theta3_tilde: f64) -> Result<BTensor> {
    let tc = 2 * n - 1;
    let sc = 2 * tc - 1;
    let rows = rows_2d(n);
    let phi = MonomialTable::new(n, sc)?;
    let zetas: Vec<Complex64> = (0..tc).map(zeta).collect::<Result<_>>()?;
    let u = fourier_product_table(n, theta2, &zetas)?;
    let v = fourier_product_table(n, theta3_tilde, &zetas)?;
    let zero = Complex64::new(0.0, 0.0);
    let blocks: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            // z[a][uu][t1] = Σ_nn c[a][nn][uu] U[k][nn][t1]
            let mut z = vec![zero; n * n * tc];
            for a in 0..n {
                for nn in 0..n {
                    let urow = &u[(k * n + nn) * tc..(k * n + nn + 1) * tc];
                    for uu in 0..n {
                        let cv = c[(a * n + nn) * n + uu];
                        if cv == zero {
                            continue;
                        }
                        let zrow = &mut z[(a * n + uu) * tc..(a * n + uu + 1) * tc];
                        for (zt, &ut) in zrow.iter_mut().zip(urow) {
                            *zt += cv * ut;
                        }
                    }
                }
            }
            let mut out = vec![zero; n * rows];
            let mut e = vec![zero; n * sc];
            for l in 0..n {
                // e[a][t1+t2] = Σ_uu z[a][uu][t1] V[l][uu][t2]
                e.iter_mut().for_each(|x| *x = zero);
                for a in 0..n {
                    for uu in 0..n {
                        let zrow = &z[(a * n + uu) * tc..(a * n + uu + 1) * tc];
                        let vrow = &v[(l * n + uu) * tc..(l * n + uu + 1) * tc];
                        for (t1, &zt) in zrow.iter().enumerate() {
                            if zt == zero {
                                continue;
                            }
                            for (t2, &vt) in vrow.iter().enumerate() {
                                e[a * sc + t1 + t2] += zt * vt;
                            }
                        }
                    }
                }
                let dst = &mut out[l * rows..(l + 1) * rows];
                for a in 0..n {
                    for s in 0..sc {
                        let es = e[a * sc + s];
                        if es == zero {
                            continue;
                        }
                        for (d, &ph) in dst.iter_mut().zip(phi.row(a, s)) {
                            *d += es * ph;
                        }
                    }
                }
            }
            out
        })
        .collect();
    Ok(BTensor { n, data: blocks.concat() })
}

/// Assembles `B(θ)` from rank-3 PAT coefficients (basis
/// `h_a(ω) h_n(y₂) h_u(y₃)`) and their frequency-axis Hilbert transform.
pub fn assemble_b(p: &HermiteExpansion, p_tilde: &HermiteExpansion, theta: &DetectionDirection, n: usize) -> Result<BTensor> {
    let c = kernel_coeffs_3(p, p_tilde, n)?;
    assemble_b_raw(&c, n, theta.theta2(), theta.theta3_tilde())
}

/// `m_μ(θ) = ∫_W e^{ω²θ̃₃/2} m(θ, ω) h_μ(ω) dω` for `μ < 5N−4`.
pub fn assemble_rhs_theta(
    samples: &[Complex64],
    grid: &Grid1D,
    window: Interval,
    theta: &DetectionDirection,
    n: usize,
) -> Result<DVector<Complex64>> {
    weighted_projection(samples, grid, window, rows_2d(n), 0.5 * theta.theta3_tilde(), 1.0)
}

/// One direction's contribution to the stacked system.
#[derive(Debug, Clone)]
pub struct DirectionBlock {
    pub direction: DetectionDirection,
    pub b: BTensor,
    pub m: DVector<Complex64>,
}

/// Stacks `C(θ^{(i)})` and `m(θ^{(i)})` vertically in list order.
pub fn stack_d(blocks: &[DirectionBlock], freq_window: Interval, meta: Provenance) -> Result<System2D> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::Domain("at least one detection direction is required".into()))?;
    let n = first.b.n;
    let rows = rows_2d(n);
    for blk in blocks {
        if blk.b.n != n || blk.m.len() != rows {
            return Err(Error::Domain(format!(
                "direction blocks disagree on N: expected {n} (rhs {rows}), got {} (rhs {})",
                blk.b.n,
                blk.m.len()
            )));
        }
    }
    let k = blocks.len();
    let mut d = DMatrix::<Complex64>::zeros(k * rows, n * n);
    let mut rhs = DVector::<Complex64>::zeros(k * rows);
    for (i, blk) in blocks.iter().enumerate() {
        d.rows_mut(i * rows, rows).copy_from(&blk.b.to_matrix());
        rhs.rows_mut(i * rows, rows).copy_from(&blk.m);
    }
    Ok(System2D {
        n,
        directions: blocks.iter().map(|b| b.direction).collect(),
        d,
        rhs,
        freq_window,
        meta,
    })
}

/// Direct triple-quadrature tensor
/// `B_{k,l,μ} = ∫∫∫ e^{ω²θ̃₃/2} h_μ(ω) (H[p]+ip)(ω,y₂,y₃) e^{−iω(θ₂y₂+θ̃₃y₃)} h_k(y₂) h_l(y₃)`,
/// with `H[p] + i p` taken from the same coefficients as [`assemble_b`].
///
/// ω runs over `[−8, 8]`: wide enough that the full-line integrand has decayed,
/// narrow enough that `e^{ω²θ̃₃/2}` does not amplify quadrature rounding.
pub fn oracle_assemble_b(
    p: &HermiteExpansion,
    p_tilde: &HermiteExpansion,
    theta: &DetectionDirection,
    n: usize,
) -> Result<BTensor> {
    if n > 4 {
        return Err(Error::Precondition(format!("oracle assembly limited to N <= 4, got {n}")));
    }
    let c = kernel_coeffs_3(p, p_tilde, n)?;
    let rows = rows_2d(n);
    let omega = Grid1D::composite_gauss_legendre(Interval::symmetric(8.0), 32, 16);
    let ygrid = Grid1D::composite_gauss_legendre(Interval::symmetric(9.0), 36, 16);
    let hy: Vec<Vec<f64>> = ygrid
        .nodes
        .iter()
        .map(|&y| {
            let mut h = vec![0.0; n];
            fill_hermite_functions(y, &mut h);
            h
        })
        .collect();
    let (th2, th3) = (theta.theta2(), theta.theta3_tilde());
    let overlap = |om: f64, scale: f64| {
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for ((&y, &w), h) in ygrid.nodes.iter().zip(&ygrid.weights).zip(&hy) {
            let e = Complex64::from_polar(w, -om * scale * y);
            for a in 0..n {
                for b in 0..n {
                    out[a * n + b] += e * (h[a] * h[b]);
                }
            }
        }
        out
    };
    let parts: Vec<Vec<Complex64>> = omega
        .nodes
        .par_iter()
        .zip(&omega.weights)
        .map(|(&om, &wo)| {
            let i2 = overlap(om, th2);
            let i3 = overlap(om, th3);
            let mut hw = vec![0.0; rows];
            fill_hermite_functions(om, &mut hw);
            let g = wo * (0.5 * th3 * om * om).exp();
            let mut local = vec![Complex64::new(0.0, 0.0); n * n * rows];
            for k in 0..n {
                for l in 0..n {
                    let mut inner = Complex64::new(0.0, 0.0);
                    for a in 0..n {
                        for nn in 0..n {
                            for uu in 0..n {
                                inner += c[(a * n + nn) * n + uu] * hw[a] * i2[nn * n + k] * i3[uu * n + l];
                            }
                        }
                    }
                    let dst = &mut local[(k * n + l) * rows..(k * n + l + 1) * rows];
                    for (d, &hm) in dst.iter_mut().zip(&hw) {
                        *d += inner * (g * hm);
                    }
                }
            }
            local
        })
        .collect();
    // fixed-order reduction keeps the result independent of the thread count
    let mut data = vec![Complex64::new(0.0, 0.0); n * n * rows];
    for part in &parts {
        for (d, v) in data.iter_mut().zip(part) {
            *d += v;
        }
    }
    Ok(BTensor { n, data })
}
