//! Hermite polynomials `H_k`, normalised Hermite functions
//! `h_k(x) = α_k H_k(x) e^{-x²/2}` and the closed-form expansions (products,
//! powers, shifts, dilations) that the Galerkin assembly is built from.
//!
//! Every factorial ratio is accumulated in log space so that degrees up to
//! [`MAX_DEGREE`] never overflow an intermediate.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Largest degree accepted by the combinatorial routines.
pub const MAX_DEGREE: usize = 64;

const LN_FACT_TABLE: usize = 512;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_TABLE);
        let mut acc = 0.0f64;
        t.push(0.0);
        for k in 1..LN_FACT_TABLE {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(n!)`, tabulated for `n < 512`.
pub fn ln_factorial(n: usize) -> f64 {
    ln_fact_table()[n]
}

fn check_degree(k: usize, what: &str) -> Result<()> {
    if k > MAX_DEGREE {
        return Err(Error::Range(format!("{what}: degree {k} exceeds {MAX_DEGREE}")));
    }
    Ok(())
}

/// Which physical axis a basis is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisRole {
    Frequency,
    Space,
}

/// Truncated Hermite-function basis `{h_k(σ x) : k < count}` on one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HermiteBasisSpec {
    /// Number of retained functions `N`.
    pub count: usize,
    /// Argument dilation `σ`.
    pub dilation: f64,
    pub role: AxisRole,
}

impl HermiteBasisSpec {
    pub fn new(count: usize, dilation: f64, role: AxisRole) -> Result<Self> {
        if count == 0 || count > MAX_DEGREE {
            return Err(Error::Range(format!("basis size {count} outside 1..={MAX_DEGREE}")));
        }
        if dilation != 1.0 && dilation != 2.0 {
            return Err(Error::Domain(format!("unsupported dilation {dilation}; expected 1 or 2")));
        }
        Ok(Self { count, dilation, role })
    }

    pub fn frequency(count: usize) -> Result<Self> {
        Self::new(count, 1.0, AxisRole::Frequency)
    }

    pub fn space(count: usize, dilation: f64) -> Result<Self> {
        Self::new(count, dilation, AxisRole::Space)
    }
}

/// Sparse list of `(degree, weight)` pairs with strictly increasing degrees.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExpansionCoeffList {
    pub entries: Vec<(usize, f64)>,
}

impl ExpansionCoeffList {
    fn from_unsorted(mut entries: Vec<(usize, f64)>) -> Self {
        entries.retain(|&(_, w)| w != 0.0);
        entries.sort_by_key(|&(d, _)| d);
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weight(&self, degree: usize) -> f64 {
        self.entries
            .iter()
            .find(|&&(d, _)| d == degree)
            .map_or(0.0, |&(_, w)| w)
    }
}

/// Physicists' Hermite polynomial `H_k(x)` by the three-term recurrence.
///
/// Overflows to infinity for large `k` and `|x|`; that is accepted.
pub fn eval_hermite_poly(k: usize, x: f64) -> f64 {
    let mut h0 = 1.0;
    if k == 0 {
        return h0;
    }
    let mut h1 = 2.0 * x;
    for j in 1..k {
        let h2 = 2.0 * x * h1 - 2.0 * j as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// `h_0(x), ..., h_{n-1}(x)` by the normalised recurrence
/// `h_{k+1} = x √(2/(k+1)) h_k − √(k/(k+1)) h_{k−1}`.
pub fn hermite_functions(n: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    fill_hermite_functions(x, &mut out);
    out
}

pub(crate) fn fill_hermite_functions(x: f64, out: &mut [f64]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if n == 1 {
        return;
    }
    out[1] = std::f64::consts::SQRT_2 * x * out[0];
    for k in 1..n - 1 {
        let kf = k as f64;
        out[k + 1] = x * (2.0 / (kf + 1.0)).sqrt() * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

/// Normalised Hermite function `h_k(x)`.
pub fn eval_hermite_fn(k: usize, x: f64) -> f64 {
    let mut buf = vec![0.0; k + 1];
    fill_hermite_functions(x, &mut buf);
    buf[k]
}

fn ln_alpha(k: usize) -> f64 {
    -0.5 * (k as f64 * std::f64::consts::LN_2 + ln_factorial(k) + 0.5 * PI.ln())
}

/// `α_k = (2^k k! √π)^{-1/2}`.
pub fn normalization_alpha(k: usize) -> Result<f64> {
    check_degree(k, "normalization_alpha")?;
    Ok(ln_alpha(k).exp())
}

pub(crate) fn ln_beta(k: usize, l: usize, m: usize) -> f64 {
    // fixed argument order keeps the value bit-symmetric in (k, l)
    let (k, l) = (k.max(l), k.min(l));
    -0.25 * PI.ln() + 0.5 * (ln_factorial(k) + ln_factorial(l) + ln_factorial(k + l - 2 * m))
        - ln_factorial(m)
        - ln_factorial(k - m)
        - ln_factorial(l - m)
}

/// Product coefficient
/// `β_{k,l,m} = π^{-1/4} (k! l! (k+l−2m)!)^{1/2} / (m! (k−m)! (l−m)!)`.
pub fn feldheim_beta(k: usize, l: usize, m: usize) -> Result<f64> {
    if m > k.min(l) {
        return Err(Error::Domain(format!("beta({k},{l},{m}): m must not exceed min(k,l)")));
    }
    check_degree(k.max(l), "feldheim_beta")?;
    Ok(ln_beta(k, l, m).exp())
}

/// `h_k h_l = e^{-x²/2} Σ_m β_{k,l,m} h_{k+l−2m}`.
pub fn product_expand(k: usize, l: usize) -> Result<ExpansionCoeffList> {
    check_degree(k.max(l), "product_expand")?;
    let entries = (0..=k.min(l))
        .map(|m| (k + l - 2 * m, ln_beta(k, l, m).exp()))
        .collect();
    Ok(ExpansionCoeffList::from_unsorted(entries))
}

/// `x^k = e^{x²/2} Σ_q w_q h_{k−2q}(x)` with
/// `w_q = (k!/2^k) / (q! (k−2q)! α_{k−2q})`.
pub fn power_expand(k: usize) -> Result<ExpansionCoeffList> {
    check_degree(k, "power_expand")?;
    let entries = (0..=k / 2)
        .map(|q| (k - 2 * q, ln_power_weight(k, q).exp()))
        .collect();
    Ok(ExpansionCoeffList::from_unsorted(entries))
}

pub(crate) fn ln_power_weight(k: usize, q: usize) -> f64 {
    ln_factorial(k) - k as f64 * std::f64::consts::LN_2
        - ln_factorial(q)
        - ln_factorial(k - 2 * q)
        - ln_alpha(k - 2 * q)
}

/// Addition formula: `H_k(x+y) = Σ_m C(k,m) (2y)^{k−m} H_m(x)`.
pub fn shift_expand(k: usize, y: f64) -> Result<ExpansionCoeffList> {
    check_degree(k, "shift_expand")?;
    let entries = (0..=k)
        .map(|m| {
            let binom = (ln_factorial(k) - ln_factorial(k - m) - ln_factorial(m)).exp();
            (m, binom * (2.0 * y).powi((k - m) as i32))
        })
        .collect();
    Ok(ExpansionCoeffList::from_unsorted(entries))
}

/// Multiplication formula:
/// `H_k(ρx) = k! Σ_m ρ^k / (m! (k−2m)!) (1 − 1/ρ²)^m H_{k−2m}(x)`.
pub fn scale_expand(k: usize, rho: f64) -> Result<ExpansionCoeffList> {
    check_degree(k, "scale_expand")?;
    if rho == 0.0 || !rho.is_finite() {
        return Err(Error::Domain(format!("scale factor must be finite and nonzero, got {rho}")));
    }
    let c = 1.0 - 1.0 / (rho * rho);
    let entries = (0..=k / 2)
        .map(|m| {
            let mag = (ln_factorial(k) - ln_factorial(m) - ln_factorial(k - 2 * m)
                + k as f64 * rho.abs().ln())
            .exp();
            let sign = if rho < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
            (k - 2 * m, sign * mag * c.powi(m as i32))
        })
        .collect();
    Ok(ExpansionCoeffList::from_unsorted(entries))
}

/// Coefficients of `x^t h_k(x)` in the Hermite functions, obtained by
/// expanding `x^t` with [`power_expand`] and each resulting product
/// `h_k h_q` with [`product_expand`]:
///
/// `x^t h_k = (t!/2^t) Σ_r 1/(r! q! α_q) Σ_s 𝟙_{[|k−q|, k+q]}(s) β_{k,q,(k+q−s)/2} h_s`,
/// `q = t − 2r`, restricted to `(k+q−s)` even.
pub fn monomial_times_hermite(k: usize, t: usize) -> Result<ExpansionCoeffList> {
    check_degree(k.max(t), "monomial_times_hermite")?;
    let mut acc = vec![0.0; k + t + 1];
    accumulate_monomial_times_hermite(k, t, &mut acc);
    Ok(ExpansionCoeffList::from_unsorted(acc.into_iter().enumerate().collect()))
}

fn accumulate_monomial_times_hermite(k: usize, t: usize, acc: &mut [f64]) {
    for r in 0..=t / 2 {
        let q = t - 2 * r;
        let lw = ln_power_weight(t, r);
        let lo = k.abs_diff(q);
        let hi = k + q;
        let mut s = lo;
        while s <= hi {
            if (k + q - s).is_multiple_of(2) {
                let m = (k + q - s) / 2;
                acc[s] += (lw + ln_beta(k, q, m)).exp();
            }
            s += 2;
        }
    }
}

/// Dense table `Φ[k][t][s]`: coefficient of `h_s` in `x^t h_k(x)`.
#[derive(Debug, Clone)]
pub struct MonomialTable {
    k_count: usize,
    t_count: usize,
    s_count: usize,
    data: Vec<f64>,
}

impl MonomialTable {
    /// Table for `k < k_count`, `t < t_count`; rows `s` span `0..k_count+t_count−1`.
    pub fn new(k_count: usize, t_count: usize) -> Result<Self> {
        check_degree((k_count + t_count).saturating_sub(2), "MonomialTable")?;
        let s_count = k_count + t_count - 1;
        let mut data = vec![0.0; k_count * t_count * s_count];
        for k in 0..k_count {
            for t in 0..t_count {
                let off = (k * t_count + t) * s_count;
                accumulate_monomial_times_hermite(k, t, &mut data[off..off + s_count]);
            }
        }
        Ok(Self { k_count, t_count, s_count, data })
    }

    pub fn s_count(&self) -> usize {
        self.s_count
    }

    pub fn t_count(&self) -> usize {
        self.t_count
    }

    pub fn k_count(&self) -> usize {
        self.k_count
    }

    /// Row `Φ[k][t][·]`.
    pub fn row(&self, k: usize, t: usize) -> &[f64] {
        let off = (k * self.t_count + t) * self.s_count;
        &self.data[off..off + self.s_count]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{Grid1D, Interval};

    fn test_grid() -> Vec<f64> {
        (0..241).map(|i| -6.0 + 12.0 * i as f64 / 240.0).collect()
    }

    #[test]
    fn hermite_poly_examples() {
        assert_eq!(eval_hermite_poly(0, 7.3), 1.0);
        assert_eq!(eval_hermite_poly(1, 2.0), 4.0);
        // H_3 = 8x^3 - 12x
        assert_eq!(eval_hermite_poly(3, 1.0), -4.0);
    }

    #[test]
    fn hermite_fn_examples() {
        assert!((eval_hermite_fn(0, 0.0) - PI.powf(-0.25)).abs() < 1e-14);
        assert!((eval_hermite_fn(0, 0.0) - 0.75112554).abs() < 1e-8);
        assert_eq!(eval_hermite_fn(1, 0.0), 0.0);
        let direct = normalization_alpha(5).unwrap() * eval_hermite_poly(5, 1.5) * (-1.125f64).exp();
        assert!((eval_hermite_fn(5, 1.5) - direct).abs() < 1e-14);
    }

    #[test]
    fn recurrence_matches_direct_formula() {
        for k in 0..=15 {
            let a = normalization_alpha(k).unwrap();
            for &x in &test_grid() {
                let direct = a * eval_hermite_poly(k, x) * (-0.5 * x * x).exp();
                let rec = eval_hermite_fn(k, x);
                let scale = direct.abs().max(1e-300);
                assert!(
                    (rec - direct).abs() <= 1e-10 * scale + 1e-300,
                    "k={k} x={x}: {rec} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn alpha_values() {
        assert!((normalization_alpha(0).unwrap() - PI.powf(-0.25)).abs() < 1e-14);
        assert!((normalization_alpha(1).unwrap() - (2.0 * PI.sqrt()).powf(-0.5)).abs() < 1e-14);
        assert!((normalization_alpha(1).unwrap() - 0.531125).abs() < 1e-6);
        for k in 1..MAX_DEGREE {
            assert!(normalization_alpha(k + 1).unwrap() < normalization_alpha(k).unwrap());
        }
        assert!(matches!(normalization_alpha(65), Err(Error::Range(_))));
    }

    #[test]
    fn beta_basic() {
        assert!((feldheim_beta(0, 0, 0).unwrap() - PI.powf(-0.25)).abs() < 1e-14);
        assert_eq!(feldheim_beta(5, 2, 1).unwrap(), feldheim_beta(2, 5, 1).unwrap());
        assert!(matches!(feldheim_beta(3, 2, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn beta_matches_least_squares_fit() {
        // fit h_3 h_2 e^{x²/2} against {h_5, h_3, h_1} by quadrature projection
        let g = Grid1D::composite_gauss_legendre(Interval::symmetric(12.0), 24, 24);
        for (m, deg) in [(0usize, 5usize), (1, 3), (2, 1)] {
            let proj = g.integrate(|x| {
                let h = hermite_functions(6, x);
                h[3] * h[2] * (0.5 * x * x).exp() * h[deg]
            });
            assert!((proj - feldheim_beta(3, 2, m).unwrap()).abs() < 1e-10, "m={m}");
        }
    }

    #[test]
    fn product_expand_examples() {
        let e = product_expand(0, 0).unwrap();
        assert_eq!(e.entries, vec![(0, PI.powf(-0.25))]);
        let e = product_expand(7, 0).unwrap();
        assert_eq!(e.entries, vec![(7, feldheim_beta(7, 0, 0).unwrap())]);
        let e = product_expand(4, 3).unwrap();
        for &x in &test_grid() {
            let h = hermite_functions(8, x);
            let rhs: f64 = (-0.5 * x * x).exp() * e.entries.iter().map(|&(d, w)| w * h[d]).sum::<f64>();
            assert!((h[4] * h[3] - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn power_expand_examples() {
        let e = power_expand(0).unwrap();
        assert_eq!(e.entries.len(), 1);
        assert!((e.weight(0) - 1.0 / normalization_alpha(0).unwrap()).abs() < 1e-15);
        let e = power_expand(1).unwrap();
        assert!((e.weight(1) - 0.5 / normalization_alpha(1).unwrap()).abs() < 1e-15);
        let w = 1.7f64;
        let h = hermite_functions(2, w);
        assert!(((0.5 * w * w).exp() * e.weight(1) * h[1] - w).abs() < 1e-14);
        let e = power_expand(6).unwrap();
        for i in 0..161 {
            let w = -4.0 + 8.0 * i as f64 / 160.0;
            let h = hermite_functions(7, w);
            let v = (0.5 * w * w).exp() * e.entries.iter().map(|&(d, c)| c * h[d]).sum::<f64>();
            let exact = w.powi(6);
            assert!((v - exact).abs() <= 1e-10 * exact.abs().max(1e-3), "w={w}");
        }
    }

    #[test]
    fn shift_expand_examples() {
        assert_eq!(shift_expand(5, 0.0).unwrap().entries, vec![(5, 1.0)]);
        assert_eq!(shift_expand(1, 1.0).unwrap().entries, vec![(0, 2.0), (1, 1.0)]);
        let e = shift_expand(3, 0.5).unwrap();
        for i in 0..101 {
            let x = -5.0 + 0.1 * i as f64;
            let lhs = eval_hermite_poly(3, x + 0.5);
            let rhs: f64 = e.entries.iter().map(|&(d, w)| w * eval_hermite_poly(d, x)).sum();
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn scale_expand_examples() {
        assert_eq!(scale_expand(6, 1.0).unwrap().entries, vec![(6, 1.0)]);
        let e = scale_expand(2, 2.0).unwrap();
        assert_eq!(e.entries.len(), 2);
        assert!((e.weight(0) - 6.0).abs() < 1e-13 && (e.weight(2) - 4.0).abs() < 1e-13);
        let e = scale_expand(5, 0.5).unwrap();
        for i in 0..81 {
            let x = -4.0 + 0.1 * i as f64;
            let lhs = eval_hermite_poly(5, 0.5 * x);
            let rhs: f64 = e.entries.iter().map(|&(d, w)| w * eval_hermite_poly(d, x)).sum();
            assert!((lhs - rhs).abs() < 1e-9);
        }
        assert!(scale_expand(3, 0.0).is_err());
    }

    /// Multiplication by x acts as `x h_k = √(k/2) h_{k−1} + √((k+1)/2) h_{k+1}`;
    /// applying it t times is an oracle for the monomial table that never
    /// touches the power or product formulas.
    #[test]
    fn monomial_table_matches_repeated_shift_operator() {
        let (kc, tc) = (6, 12);
        let table = MonomialTable::new(kc, tc).unwrap();
        for k in 0..kc {
            let mut v = vec![0.0f64; kc + tc + 1];
            v[k] = 1.0;
            for t in 0..tc {
                let row = table.row(k, t);
                for s in 0..table.s_count() {
                    let scale = v.iter().fold(0.0f64, |a: f64, b| a.max(b.abs()));
                    assert!((row[s] - v[s]).abs() <= 1e-12 * scale, "k={k} t={t} s={s}");
                }
                let mut next = vec![0.0; v.len()];
                for (j, &c) in v.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    if j > 0 {
                        next[j - 1] += c * (j as f64 / 2.0).sqrt();
                    }
                    if j + 1 < next.len() {
                        next[j + 1] += c * ((j as f64 + 1.0) / 2.0).sqrt();
                    }
                }
                v = next;
            }
        }
    }
}
