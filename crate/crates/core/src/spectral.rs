//! Coefficient-space operators on truncated Hermite expansions: projection of
//! sampled data, evaluation, the Hilbert transform along the frequency axis,
//! and the closed-form Fourier integral of `e^{-x²/2} h_k(x)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hermite::{fill_hermite_functions, normalization_alpha, AxisRole, HermiteBasisSpec};
use crate::quadrature::{Grid1D, Interval, TensorGrid};

/// Truncated tensor-product Hermite expansion
/// `f(x_0, …) = Σ c_{k_0 …} Π_j h_{k_j}(σ_j x_j)` with real coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteExpansion {
    bases: Vec<HermiteBasisSpec>,
    coeffs: Vec<f64>,
}

impl HermiteExpansion {
    pub fn new(bases: Vec<HermiteBasisSpec>, coeffs: Vec<f64>) -> Result<Self> {
        if bases.is_empty() || bases.len() > 3 {
            return Err(Error::Domain(format!("expansion rank {} not in 1..=3", bases.len())));
        }
        if bases.iter().skip(1).any(|b| b.role == AxisRole::Frequency) {
            return Err(Error::Domain("a frequency axis may only appear first".into()));
        }
        let size: usize = bases.iter().map(|b| b.count).product();
        if coeffs.len() != size {
            return Err(Error::Domain(format!(
                "coefficient tensor has {} entries, shape requires {size}",
                coeffs.len()
            )));
        }
        Ok(Self { bases, coeffs })
    }

    pub fn zeros(bases: Vec<HermiteBasisSpec>) -> Result<Self> {
        let size = bases.iter().map(|b| b.count).product();
        Self::new(bases, vec![0.0; size])
    }

    pub fn rank(&self) -> usize {
        self.bases.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.bases.iter().map(|b| b.count).collect()
    }

    pub fn bases(&self) -> &[HermiteBasisSpec] {
        &self.bases
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Coefficient at a multi-index.
    pub fn get(&self, index: &[usize]) -> f64 {
        self.coeffs[self.flat_index(index)]
    }

    fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.rank());
        index
            .iter()
            .zip(&self.bases)
            .fold(0, |acc, (&i, b)| acc * b.count + i)
    }

    /// `a·self + b·other`; bases must agree.
    pub fn axpby(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.bases != other.bases {
            return Err(Error::Domain("expansion bases differ".into()));
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| a * x + b * y).collect();
        Self::new(self.bases.clone(), coeffs)
    }
}

/// Contracts axis `axis` of a row-major tensor with `mat` (`rows × shape[axis]`).
pub(crate) fn contract_axis(data: &[f64], shape: &[usize], axis: usize, mat: &[f64], rows: usize) -> (Vec<f64>, Vec<usize>) {
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let len = shape[axis];
    debug_assert_eq!(mat.len(), rows * len);
    let mut out = vec![0.0; outer * rows * inner];
    out.par_chunks_mut(rows * inner).enumerate().for_each(|(o, block)| {
        let src = &data[o * len * inner..(o + 1) * len * inner];
        for r in 0..rows {
            let dst = &mut block[r * inner..(r + 1) * inner];
            let mrow = &mat[r * len..(r + 1) * len];
            for (i, &m) in mrow.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let s = &src[i * inner..(i + 1) * inner];
                for (d, &v) in dst.iter_mut().zip(s) {
                    *d += m * v;
                }
            }
        }
    });
    let mut new_shape = shape.to_vec();
    new_shape[axis] = rows;
    (out, new_shape)
}

/// `count × nodes` matrix of `h_k(σ x_i)`.
pub(crate) fn basis_matrix(basis: &HermiteBasisSpec, nodes: &[f64]) -> Vec<f64> {
    let n = basis.count;
    let mut cols = vec![0.0; nodes.len() * n];
    for (i, &x) in nodes.iter().enumerate() {
        fill_hermite_functions(basis.dilation * x, &mut cols[i * n..(i + 1) * n]);
    }
    // transpose to k-major
    let mut out = vec![0.0; n * nodes.len()];
    for i in 0..nodes.len() {
        for k in 0..n {
            out[k * nodes.len() + i] = cols[i * n + k];
        }
    }
    out
}

/// Projects samples on a tensor Gauss–Legendre grid onto a truncated basis:
/// `c_k = Π_j σ_j ∫ f(x) Π_j h_{k_j}(σ_j x_j) dx`.
///
/// For a dilated axis the factor `σ` is the Jacobian of `x = σ y`.
pub fn project(samples: &[f64], grid: &TensorGrid, bases: &[HermiteBasisSpec]) -> Result<HermiteExpansion> {
    if grid.rank() != bases.len() {
        return Err(Error::Domain(format!(
            "grid rank {} does not match basis rank {}",
            grid.rank(),
            bases.len()
        )));
    }
    if samples.len() != grid.len() {
        return Err(Error::Domain(format!(
            "{} samples for a grid of {} points",
            samples.len(),
            grid.len()
        )));
    }
    for (axis, (g, b)) in grid.axes.iter().zip(bases).enumerate() {
        if g.len() < 4 * b.count {
            return Err(Error::Precondition(format!(
                "axis {axis}: {} nodes, projection onto {} functions needs at least {}",
                g.len(),
                b.count,
                4 * b.count
            )));
        }
    }
    let mut data = samples.to_vec();
    let mut shape = grid.shape();
    for (axis, (g, b)) in grid.axes.iter().zip(bases).enumerate() {
        let mut mat = basis_matrix(b, &g.nodes);
        let n = g.len();
        for k in 0..b.count {
            for i in 0..n {
                mat[k * n + i] *= b.dilation * g.weights[i];
            }
        }
        let (d, s) = contract_axis(&data, &shape, axis, &mat, b.count);
        data = d;
        shape = s;
    }
    HermiteExpansion::new(bases.to_vec(), data)
}

/// Evaluates an expansion at every point of the tensor grid (weights ignored).
pub fn eval_expansion(e: &HermiteExpansion, grid: &TensorGrid) -> Result<Vec<f64>> {
    if grid.rank() != e.rank() {
        return Err(Error::Domain("grid rank does not match expansion rank".into()));
    }
    let mut data = e.coeffs.clone();
    let mut shape = e.shape();
    for (axis, (g, b)) in grid.axes.iter().zip(&e.bases).enumerate() {
        let km = basis_matrix(b, &g.nodes);
        let n = g.len();
        // transpose k-major into node-major
        let mut mat = vec![0.0; n * b.count];
        for k in 0..b.count {
            for i in 0..n {
                mat[i * b.count + k] = km[k * n + i];
            }
        }
        let (d, s) = contract_axis(&data, &shape, axis, &mat, n);
        data = d;
        shape = s;
    }
    Ok(data)
}

/// `S_{k,m} = ∫ sign(x) h_k(x) h_m(x) dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignOverlapMatrix {
    order: usize,
    entries: Vec<f64>,
}

impl SignOverlapMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, k: usize, m: usize) -> f64 {
        self.entries[k * self.order + m]
    }
}

/// Builds `S` for `k, m < order`.
///
/// Only `k + m` odd survives; those entries equal `2 ∫_0^∞ h_k h_m`, taken by
/// Gauss–Legendre on `[0, U]` with `U = max(12, √(2·order+1) + 6)`, which
/// reduces to the 200-node rule on `[0, 12]` for `order ≤ 16`.
pub fn sign_overlap_matrix(order: usize) -> Result<SignOverlapMatrix> {
    if order == 0 || order > crate::hermite::MAX_DEGREE {
        return Err(Error::Range(format!("sign overlap order {order} outside 1..=64")));
    }
    let upper = 12f64.max((2.0 * order as f64 + 1.0).sqrt() + 6.0);
    let nodes = 200usize.max(8 * order);
    let grid = Grid1D::gauss_legendre(Interval::new(0.0, upper), nodes);
    let mut acc = vec![0.0; order * order];
    let mut h = vec![0.0; order];
    for (&x, &w) in grid.nodes.iter().zip(&grid.weights) {
        fill_hermite_functions(x, &mut h);
        for k in 0..order {
            for m in ((k + 1) % 2..order).step_by(2) {
                acc[k * order + m] += 2.0 * w * h[k] * h[m];
            }
        }
    }
    // symmetrise from the upper triangle so that S == Sᵀ exactly
    for k in 0..order {
        for m in 0..k {
            acc[k * order + m] = acc[m * order + k];
        }
    }
    Ok(SignOverlapMatrix { order, entries: acc })
}

/// Real matrix `T` with `H[f]_k = Σ_m T_{k,m} f_m`, where
/// `H[f](ω) = (1/π) p.v.∫ f(ω̃)/(ω̃ − ω) dω̃`.
///
/// `T_{k,m} = Re( i^{k+1} (−i)^m ) S_{k,m}`; the phase is real because
/// `S_{k,m}` vanishes unless `k + m` is odd.
pub fn hilbert_matrix(s: &SignOverlapMatrix, n: usize) -> Result<Vec<f64>> {
    if s.order() < n {
        return Err(Error::Domain(format!(
            "sign overlap matrix of order {} cannot serve {n} coefficients",
            s.order()
        )));
    }
    let mut t = vec![0.0; n * n];
    for k in 0..n {
        for m in ((k + 1) % 2..n).step_by(2) {
            // i^{k+1}(−i)^m = (−1)^m i^{k+m+1}, and k+m+1 is even
            let sign_m = if m % 2 == 0 { 1.0 } else { -1.0 };
            let sign_i = if (k + m).div_ceil(2) % 2 == 0 { 1.0 } else { -1.0 };
            t[k * n + m] = sign_m * sign_i * s.get(k, m);
        }
    }
    Ok(t)
}

/// Hilbert transform in frequency, applied to the coefficients along axis 0.
pub fn hilbert_coeffs(f: &HermiteExpansion, s: &SignOverlapMatrix) -> Result<HermiteExpansion> {
    if f.bases[0].role != AxisRole::Frequency || f.bases[0].dilation != 1.0 {
        return Err(Error::Domain("Hilbert transform needs an undilated frequency axis 0".into()));
    }
    if let Some(bad) = f.coeffs.iter().find(|c| !c.is_finite()) {
        return Err(Error::Domain(format!("non-real coefficient {bad}")));
    }
    let n = f.bases[0].count;
    let t = hilbert_matrix(s, n)?;
    let (coeffs, _) = contract_axis(&f.coeffs, &f.shape(), 0, &t, n);
    HermiteExpansion::new(f.bases.clone(), coeffs)
}

/// `ζ_k = √π (−i)^k α_k`, the constant in
/// `∫ e^{−x²/2} h_k(x) e^{−iωx} dx = ζ_k e^{−ω²/4} ω^k`.
pub fn zeta(k: usize) -> Result<Complex64> {
    let mag = PI.sqrt() * normalization_alpha(k)?;
    Ok(mag * minus_i_pow(k))
}

/// `(−i)^k`
pub fn minus_i_pow(k: usize) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// `∫ e^{−x²/2} h_k(x) e^{−iωx} dx = ζ_k e^{−ω²/4} ω^k`.
pub fn fourier_kernel(k: usize, omega: f64) -> Result<Complex64> {
    let z = zeta(k)?;
    if omega == 0.0 {
        return Ok(if k == 0 { z } else { Complex64::new(0.0, 0.0) });
    }
    let ln_mag = -0.25 * omega * omega + k as f64 * omega.abs().ln();
    let sign = if omega < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
    Ok(z * (sign * ln_mag.exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{eval_hermite_fn, hermite_functions};

    fn gl(a: f64, b: f64, n: usize) -> Grid1D {
        Grid1D::gauss_legendre(Interval::new(a, b), n)
    }

    #[test]
    fn sign_overlap_examples() {
        let s = sign_overlap_matrix(8).unwrap();
        assert_eq!(s.get(0, 0), 0.0);
        let expected = 2f64.sqrt() / PI.sqrt();
        assert!((s.get(0, 1) - expected).abs() < 1e-13);
        assert!((s.get(0, 1) - 0.79788).abs() < 1e-5);
        for k in 0..8 {
            for m in 0..8 {
                assert_eq!(s.get(k, m), s.get(m, k));
                if (k + m) % 2 == 0 {
                    assert_eq!(s.get(k, m), 0.0);
                }
            }
        }
    }

    #[test]
    fn project_single_basis_function() {
        let grid = TensorGrid::new(vec![gl(-12.0, 12.0, 300)]);
        let samples: Vec<f64> = grid.axes[0].nodes.iter().map(|&x| eval_hermite_fn(3, x)).collect();
        let e = project(&samples, &grid, &[HermiteBasisSpec::frequency(8).unwrap()]).unwrap();
        for (k, &c) in e.coeffs().iter().enumerate() {
            let want = if k == 3 { 1.0 } else { 0.0 };
            assert!((c - want).abs() < 1e-10, "k={k}: {c}");
        }
    }

    #[test]
    fn project_rejects_coarse_grid() {
        let grid = TensorGrid::new(vec![gl(-12.0, 12.0, 20)]);
        let err = project(&[0.0; 20], &grid, &[HermiteBasisSpec::frequency(8).unwrap()]);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    fn round_trip_error(n: usize) -> f64 {
        let f = |x: f64| (2.0 * x.powi(4) + 1.0) * (-x * x).exp();
        let basis = [HermiteBasisSpec::frequency(n).unwrap()];
        let grid = TensorGrid::new(vec![gl(-12.0, 12.0, 300)]);
        let samples: Vec<f64> = grid.axes[0].nodes.iter().map(|&x| f(x)).collect();
        let e = project(&samples, &grid, &basis).unwrap();
        let back = eval_expansion(&e, &grid).unwrap();
        let w = &grid.axes[0].weights;
        let num: f64 = back.iter().zip(&samples).zip(w).map(|((a, b), w)| w * (a - b).powi(2)).sum();
        let den: f64 = samples.iter().zip(w).map(|(b, w)| w * b * b).sum();
        (num / den).sqrt()
    }

    // coefficients of this f decay like 3^{-k/2} times a degree-4 polynomial factor,
    // so N=30 stalls near 1e-5 and N=40 is needed for 1e-6
    #[test]
    fn project_eval_round_trip_smooth_function() {
        let e30 = round_trip_error(30);
        let e40 = round_trip_error(40);
        assert!(e30 < 2e-5, "{e30}");
        assert!(e40 < 1e-6, "{e40}");
        assert!(e40 < e30);
    }

    #[test]
    fn dilated_axis_round_trip() {
        // g(y) = h_2(2y) has coefficient vector e_2 on a σ=2 axis
        let basis = [HermiteBasisSpec::space(6, 2.0).unwrap()];
        let grid = TensorGrid::new(vec![gl(-6.0, 6.0, 200)]);
        let samples: Vec<f64> = grid.axes[0].nodes.iter().map(|&y| eval_hermite_fn(2, 2.0 * y)).collect();
        let e = project(&samples, &grid, &basis).unwrap();
        for (k, &c) in e.coeffs().iter().enumerate() {
            assert!((c - if k == 2 { 1.0 } else { 0.0 }).abs() < 1e-10);
        }
    }

    #[test]
    fn separable_rank2_projection() {
        let bases = [HermiteBasisSpec::frequency(5).unwrap(), HermiteBasisSpec::space(5, 1.0).unwrap()];
        let grid = TensorGrid::new(vec![gl(-12.0, 12.0, 120), gl(-12.0, 12.0, 100)]);
        let mut samples = Vec::new();
        for &w in &grid.axes[0].nodes {
            for &x in &grid.axes[1].nodes {
                samples.push(eval_hermite_fn(1, w) * (-(x - 0.3).powi(2)).exp());
            }
        }
        let e = project(&samples, &grid, &bases).unwrap();
        for k in 0..5 {
            for l in 0..5 {
                if k != 1 {
                    assert!(e.get(&[k, l]).abs() < 1e-12);
                }
            }
        }
        assert!(e.get(&[1, 0]).abs() > 0.1);
    }

    #[test]
    fn eval_zero_and_linearity() {
        let basis = vec![HermiteBasisSpec::frequency(6).unwrap()];
        let grid = TensorGrid::new(vec![gl(-5.0, 5.0, 37)]);
        let z = HermiteExpansion::zeros(basis.clone()).unwrap();
        assert!(eval_expansion(&z, &grid).unwrap().iter().all(|&v| v == 0.0));
        let e1 = HermiteExpansion::new(basis.clone(), vec![1.0, -2.0, 0.5, 0.0, 3.0, 1.0]).unwrap();
        let e2 = HermiteExpansion::new(basis, vec![0.0, 1.0, 1.0, -1.0, 0.25, 2.0]).unwrap();
        let comb = e1.axpby(2.0, &e2, -3.0).unwrap();
        let v = eval_expansion(&comb, &grid).unwrap();
        let v1 = eval_expansion(&e1, &grid).unwrap();
        let v2 = eval_expansion(&e2, &grid).unwrap();
        for i in 0..v.len() {
            assert!((v[i] - (2.0 * v1[i] - 3.0 * v2[i])).abs() < 1e-14);
        }
    }

    /// The Hilbert transform of the odd function `h_1` at 0 is
    /// `(1/π) ∫ h_1(t)/t dt = 2α_1 √(2π)/π > 0`; the phase
    /// `(−i)^{k+1}(−i)^m` would give the opposite sign here.
    #[test]
    fn hilbert_of_h1_at_origin() {
        let n = 40;
        let s = sign_overlap_matrix(n).unwrap();
        let mut c = vec![0.0; n];
        c[1] = 1.0;
        let f = HermiteExpansion::new(vec![HermiteBasisSpec::frequency(n).unwrap()], c).unwrap();
        let hf = hilbert_coeffs(&f, &s).unwrap();
        let h0 = hermite_functions(n, 0.0);
        let v: f64 = hf.coeffs().iter().zip(&h0).map(|(a, b)| a * b).sum();
        let exact = 2.0 * normalization_alpha(1).unwrap() * (2.0 * PI).sqrt() / PI;
        assert!((v - exact).abs() < 2e-2 * exact, "{v} vs {exact}");
    }

    #[test]
    fn hilbert_of_zero_is_zero() {
        let s = sign_overlap_matrix(10).unwrap();
        let f = HermiteExpansion::zeros(vec![HermiteBasisSpec::frequency(10).unwrap()]).unwrap();
        assert!(hilbert_coeffs(&f, &s).unwrap().coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn hilbert_matches_complex_arithmetic() {
        let n = 24;
        let s = sign_overlap_matrix(n).unwrap();
        let c: Vec<f64> = (0..n).map(|k| ((k * 7 % 5) as f64 - 2.0) / (1.0 + k as f64)).collect();
        let f = HermiteExpansion::new(vec![HermiteBasisSpec::frequency(n).unwrap()], c.clone()).unwrap();
        let hf = hilbert_coeffs(&f, &s).unwrap();
        let i = Complex64::new(0.0, 1.0);
        for k in 0..n {
            let z: Complex64 = (0..n)
                .map(|m| i.powu(k as u32 + 1) * minus_i_pow(m) * s.get(k, m) * c[m])
                .sum();
            assert!(z.im.abs() < 1e-12);
            assert!((z.re - hf.coeffs()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn fourier_kernel_examples() {
        assert!((fourier_kernel(0, 0.0).unwrap().re - PI.powf(0.25)).abs() < 1e-14);
        assert!((fourier_kernel(0, 0.0).unwrap().re - 1.33133).abs() < 1e-5);
        assert_eq!(fourier_kernel(1, 0.0).unwrap(), Complex64::new(0.0, 0.0));
        let g = gl(-12.0, 12.0, 400);
        let (re, im) = g.nodes.iter().zip(&g.weights).fold((0.0, 0.0), |(re, im), (&x, &w)| {
            let v = w * (-0.5 * x * x).exp() * eval_hermite_fn(3, x);
            (re + v * (2.0 * x).cos(), im - v * (2.0 * x).sin())
        });
        let k = fourier_kernel(3, 2.0).unwrap();
        let q = Complex64::new(re, im);
        assert!((k - q).norm() < 1e-9 * q.norm());
    }
}
