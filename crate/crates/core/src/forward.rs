//! Synthetic PAT and OCT measurements, noise injection, and the on-disk
//! container for generated data.
//!
//! PAT data is `p = Im ψ / γ`. OCT data is the left-hand side of the
//! Fredholm equation evaluated with the true `γ`:
//! `m(ω) = ∫ (H[Im ψ] + i Im ψ)(ω, y) e^{−2iωy} dy` in depth-only media and
//! `m(ω, θ) = ∬ (H[Im ψ] + i Im ψ)(ω, y) e^{−iω(θ₂y₂ + θ̃₃y₃)} dy` otherwise.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::galerkin_2d::DetectionDirection;
use crate::hermite::{feldheim_beta, fill_hermite_functions};
use crate::phantom::{Phantom, PhantomId};
use crate::quadrature::{gauss_legendre_unit, Grid1D, Interval, TensorGrid};
use crate::spectral::{fourier_kernel, HermiteExpansion};

/// Spatial axes of an OCT forward computation need at least this many nodes
/// to resolve `e^{−iξy}` over the support box.
pub const MIN_FORWARD_NODES: usize = 128;

/// `|Im ψ|` below this fraction of its grid maximum counts as zero when
/// forming `Im ψ / γ`; quartic-exponential profiles are ~1e−200 where a
/// Gaussian `γ` is ~1e−14, and their ratio is not data.
pub const PSI_ZERO_FRACTION: f64 = 1e-14;

/// `p = Im ψ / γ` on `omega × space…`, row-major with ω slowest.
pub fn synth_pat(phantom: &Phantom, omega: &Grid1D, space: &[Grid1D]) -> Result<Vec<f64>> {
    if space.len() != phantom.dim() {
        return Err(Error::Domain(format!(
            "{}-D phantom needs {} spatial grids, got {}",
            phantom.dim(),
            phantom.dim(),
            space.len()
        )));
    }
    let mut axes = vec![omega.clone()];
    axes.extend(space.iter().cloned());
    let grid = TensorGrid::new(axes);
    let psi = crate::phantom::phantom_eval(phantom, crate::phantom::Field::ImPsi, &grid)?;
    let gamma = crate::phantom::phantom_eval(phantom, crate::phantom::Field::Gamma, &TensorGrid::new(space.to_vec()))?;
    let floor = PSI_ZERO_FRACTION * psi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let per_omega = gamma.len();
    let mut out = vec![0.0; psi.len()];
    for (i, (&v, o)) in psi.iter().zip(out.iter_mut()).enumerate() {
        if v == 0.0 || v.abs() <= floor {
            continue;
        }
        let g = gamma[i % per_omega];
        if g < 1e-12 {
            return Err(Error::DegeneratePhantom(format!(
                "gamma = {g:e} where Im psi = {v:e} (grid index {i})"
            )));
        }
        *o = v / g;
    }
    Ok(out)
}

/// `H[f](x) = (1/π) p.v.∫ f(t)/(t − x) dt` for a smooth, decaying `f`,
/// as `(1/π) ∫_0^T (f(x+t) − f(x−t))/t dt` with `T = |x| + reach`.
///
/// The symmetric pairing removes the singularity: the integrand tends to
/// `2f'(x)` at `t = 0`.
pub fn hilbert_pv(f: &dyn Fn(f64) -> f64, x: f64, reach: f64) -> f64 {
    const PER_PANEL: usize = 16;
    let (u, w) = gauss_legendre_unit(PER_PANEL);
    let upper = x.abs() + reach;
    let panels = (upper / 0.5).ceil() as usize;
    let h = upper / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let c = h * (p as f64 + 0.5);
        for (ui, wi) in u.iter().zip(&w) {
            let t = c + 0.5 * h * ui;
            acc += 0.5 * h * wi * (f(x + t) - f(x - t)) / t;
        }
    }
    acc / PI
}

/// Reach of the principal-value integral past `|ω|`; all frequency profiles
/// used here are Hermite-type and negligible beyond it.
const PV_REACH: f64 = 16.0;

/// `ĝ(ξ) = ∫ g(y) e^{−iξy} dy` by the rule `grid`.
fn fourier(g: &dyn Fn(f64) -> f64, grid: &Grid1D, xi: f64) -> Complex64 {
    grid.nodes
        .iter()
        .zip(&grid.weights)
        .map(|(&y, &w)| Complex64::from_polar(w * g(y), -xi * y))
        .sum()
}

/// OCT trace on `omega` for each direction (direction-major). Depth-only
/// phantoms take no directions (the single detector sits on `e₃`).
pub fn synth_oct(
    phantom: &Phantom,
    omega: &Grid1D,
    space: &[Grid1D],
    directions: &[DetectionDirection],
) -> Result<Vec<Complex64>> {
    if space.len() != phantom.dim() {
        return Err(Error::Domain(format!(
            "{}-D phantom needs {} spatial grids",
            phantom.dim(),
            phantom.dim()
        )));
    }
    if let Some(g) = space.iter().find(|g| g.len() < MIN_FORWARD_NODES) {
        return Err(Error::Precondition(format!(
            "forward spatial grid has {} nodes, at least {MIN_FORWARD_NODES} required",
            g.len()
        )));
    }
    // (ξ-scale per spatial axis) for each block
    let scales: Vec<Vec<f64>> = match phantom.dim() {
        1 => {
            if !directions.is_empty() {
                return Err(Error::Domain("depth-only data uses the single detector on e3".into()));
            }
            vec![vec![2.0]]
        }
        _ => {
            if directions.is_empty() {
                return Err(Error::Domain("at least one detection direction is required".into()));
            }
            directions.iter().map(|d| vec![d.theta2(), d.theta3_tilde()]).collect()
        }
    };
    let terms = phantom.psi_terms();
    let analytic: Vec<Vec<Complex64>> = terms
        .iter()
        .map(|t| {
            omega
                .nodes
                .par_iter()
                .map(|&w| Complex64::new(hilbert_pv(&*t.freq, w, PV_REACH), (t.freq)(w)))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(scales.len() * omega.len());
    for sc in &scales {
        let block: Vec<Complex64> = omega
            .nodes
            .par_iter()
            .enumerate()
            .map(|(i, &w)| {
                terms
                    .iter()
                    .zip(&analytic)
                    .map(|(t, a)| {
                        let spatial: Complex64 = t
                            .space
                            .iter()
                            .zip(space)
                            .zip(sc)
                            .map(|((g, grid), &s)| fourier(&**g, grid, w * s))
                            .product();
                        a[i] * spatial
                    })
                    .sum()
            })
            .collect();
        out.extend(block);
    }
    Ok(out)
}

fn kernel_coeffs(p: &HermiteExpansion, p_tilde: &HermiteExpansion) -> Result<Vec<Complex64>> {
    if p.shape() != p_tilde.shape() || p.bases() != p_tilde.bases() {
        return Err(Error::Domain("PAT expansion and its Hilbert transform differ in shape".into()));
    }
    Ok(p_tilde.coeffs().iter().zip(p.coeffs()).map(|(&a, &b)| Complex64::new(a, b)).collect())
}

/// `∫ h_a(x) h_b(x) e^{−iξx} dx = Σ_r β_{a,b,r} ζ_t e^{−ξ²/4} ξ^t`, `t = a+b−2r`.
fn product_fourier(n: usize, xi: f64) -> Result<Vec<Complex64>> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for a in 0..n {
        for b in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..=a.min(b) {
                acc += fourier_kernel(a + b - 2 * r, xi)? * feldheim_beta(a, b, r)?;
            }
            out[a * n + b] = acc;
        }
    }
    Ok(out)
}

/// Depth-only OCT data generated from the truncated kernel itself:
/// `m(ω) = Σ_j γ_j Σ_{kl} c_{kl} h_k(ω) ∫ h_l(2y) h_j(2y) e^{−2iωy} dy`,
/// the inner integral in closed form.
pub fn inverse_crime_oct_1d(
    p: &HermiteExpansion,
    p_tilde: &HermiteExpansion,
    gamma: &[f64],
    omega: &Grid1D,
) -> Result<Vec<Complex64>> {
    let c = kernel_coeffs(p, p_tilde)?;
    let n = gamma.len();
    if p.shape() != [n, n] {
        return Err(Error::Domain(format!("kernel shape {:?} does not match N = {n}", p.shape())));
    }
    omega
        .nodes
        .iter()
        .map(|&w| {
            // ∫ h_l(2y) h_j(2y) e^{−2iωy} dy = ½ ∫ h_l h_j e^{−iωx} dx
            let pf = product_fourier(n, w)?;
            let mut hk = vec![0.0; n];
            fill_hermite_functions(w, &mut hk);
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                for l in 0..n {
                    let inner: Complex64 = (0..n).map(|j| pf[l * n + j] * gamma[j]).sum();
                    acc += c[k * n + l] * hk[k] * inner * 0.5;
                }
            }
            Ok(acc)
        })
        .collect()
}

/// Two-axis OCT data generated from the truncated kernel for one direction,
/// `γ` given row-major over `(k, l)`.
pub fn inverse_crime_oct_2d(
    p: &HermiteExpansion,
    p_tilde: &HermiteExpansion,
    gamma: &[f64],
    direction: &DetectionDirection,
    omega: &Grid1D,
) -> Result<Vec<Complex64>> {
    let c = kernel_coeffs(p, p_tilde)?;
    let n = p.shape()[0];
    if p.shape() != [n, n, n] || gamma.len() != n * n {
        return Err(Error::Domain(format!(
            "kernel shape {:?} and {} coefficients are inconsistent",
            p.shape(),
            gamma.len()
        )));
    }
    omega
        .nodes
        .par_iter()
        .map(|&w| {
            let f2 = product_fourier(n, w * direction.theta2())?;
            let f3 = product_fourier(n, w * direction.theta3_tilde())?;
            let mut ha = vec![0.0; n];
            fill_hermite_functions(w, &mut ha);
            // s[nn][uu] = Σ_{k,l} γ_{kl} F2[nn][k] F3[uu][l]
            let mut s = vec![Complex64::new(0.0, 0.0); n * n];
            for nn in 0..n {
                for uu in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..n {
                        for l in 0..n {
                            acc += f2[nn * n + k] * f3[uu * n + l] * gamma[k * n + l];
                        }
                    }
                    s[nn * n + uu] = acc;
                }
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..n {
                for nn in 0..n {
                    for uu in 0..n {
                        acc += c[(a * n + nn) * n + uu] * ha[a] * s[nn * n + uu];
                    }
                }
            }
            Ok(acc)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub delta_p: f64,
    pub delta_m: f64,
    pub seed: u64,
}

/// PAT and OCT samples on explicit grids, noiseless and noisy.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub phantom: PhantomId,
    /// `ω × space…`
    pub pat_grid: TensorGrid,
    pub pat: Vec<f64>,
    pub pat_noisy: Vec<f64>,
    pub oct_grid: Grid1D,
    /// Empty for depth-only data.
    pub directions: Vec<DetectionDirection>,
    /// Direction-major blocks of `oct_grid.len()` samples.
    pub oct: Vec<Complex64>,
    pub oct_noisy: Vec<Complex64>,
    pub noise: NoiseSpec,
    pub inverse_crime: bool,
}

impl SyntheticData {
    /// Wraps noiseless fields; noisy copies start equal to them.
    pub fn noiseless(
        phantom: PhantomId,
        pat_grid: TensorGrid,
        pat: Vec<f64>,
        oct_grid: Grid1D,
        directions: Vec<DetectionDirection>,
        oct: Vec<Complex64>,
        inverse_crime: bool,
    ) -> Result<Self> {
        if pat.len() != pat_grid.len() {
            return Err(Error::Domain("PAT samples do not match the PAT grid".into()));
        }
        if oct.len() != oct_grid.len() * directions.len().max(1) {
            return Err(Error::Domain("OCT samples do not match grid x directions".into()));
        }
        Ok(Self {
            phantom,
            pat_grid,
            pat_noisy: pat.clone(),
            pat,
            oct_grid,
            directions,
            oct_noisy: oct.clone(),
            oct,
            noise: NoiseSpec { delta_p: 0.0, delta_m: 0.0, seed: 0 },
            inverse_crime,
        })
    }

    /// OCT block of direction `i` (the only block for depth-only data).
    pub fn oct_block(&self, i: usize, noisy: bool) -> &[Complex64] {
        let n = self.oct_grid.len();
        let src = if noisy { &self.oct_noisy } else { &self.oct };
        &src[i * n..(i + 1) * n]
    }
}

fn l2(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// `p_δ = p + δ_p (‖p‖/‖v‖) v` with real Gaussian `v`, and
/// `m_δ = m + δ_m (‖m‖/‖w‖) w` with complex Gaussian `w`, norms taken over
/// the whole sample vectors. `p` and `m` draw from separate ChaCha streams.
pub fn add_noise(data: &SyntheticData, delta_p: f64, delta_m: f64, seed: u64) -> Result<SyntheticData> {
    if !(delta_p >= 0.0 && delta_m >= 0.0) {
        return Err(Error::Domain(format!("noise levels must be nonnegative, got {delta_p}, {delta_m}")));
    }
    let mut out = data.clone();
    out.noise = NoiseSpec { delta_p, delta_m, seed };
    out.pat_noisy = data.pat.clone();
    out.oct_noisy = data.oct.clone();
    if delta_p > 0.0 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let v: Vec<f64> = (0..data.pat.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let scale = delta_p * l2(data.pat.iter().copied()) / l2(v.iter().copied());
        for (p, vi) in out.pat_noisy.iter_mut().zip(&v) {
            *p += scale * vi;
        }
    }
    if delta_m > 0.0 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(2);
        let w: Vec<Complex64> = (0..data.oct.len())
            .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        let scale = delta_m * l2(data.oct.iter().map(|z| z.norm())) / l2(w.iter().map(|z| z.norm()));
        for (m, wi) in out.oct_noisy.iter_mut().zip(&w) {
            *m += wi * scale;
        }
    }
    Ok(out)
}

/// Default grids for generated data.
#[derive(Debug, Clone, PartialEq)]
pub struct DataGrids {
    pub pat: TensorGrid,
    pub oct: Grid1D,
    pub forward_space: Vec<Grid1D>,
}

impl DataGrids {
    /// Depth-only: PAT on `W × Ω` with 257 × 257 Gauss–Legendre nodes; OCT on
    /// `W` with 64 × 16 composite nodes; forward depth grid 64 × 16 on `Ω_L`.
    pub fn default_1d(phantom: &Phantom) -> Self {
        Self {
            pat: TensorGrid::new(vec![
                Grid1D::gauss_legendre(phantom.freq_window, 257),
                Grid1D::gauss_legendre(phantom.omega_box, 257),
            ]),
            oct: Grid1D::composite_gauss_legendre(phantom.freq_window, 64, 16),
            forward_space: vec![Grid1D::composite_gauss_legendre(phantom.support_box, 64, 16)],
        }
    }

    /// Two axes: PAT on `W × Ω²` with 129 × 97²; OCT on `W` with 128 × 16
    /// composite nodes; forward grids 12 × 16 per axis on `Ω_L`.
    pub fn default_2d(phantom: &Phantom) -> Self {
        let sp = Grid1D::gauss_legendre(phantom.omega_box, 97);
        let fw = Grid1D::composite_gauss_legendre(phantom.support_box, 12, 16);
        Self {
            pat: TensorGrid::new(vec![Grid1D::gauss_legendre(phantom.freq_window, 129), sp.clone(), sp]),
            oct: Grid1D::composite_gauss_legendre(phantom.freq_window, 128, 16),
            forward_space: vec![fw.clone(), fw],
        }
    }

    pub fn default_for(phantom: &Phantom) -> Self {
        if phantom.dim() == 1 {
            Self::default_1d(phantom)
        } else {
            Self::default_2d(phantom)
        }
    }
}

/// Noiseless PAT and OCT data for a phantom on the given grids.
pub fn synthesize(phantom: &Phantom, grids: &DataGrids, directions: &[DetectionDirection]) -> Result<SyntheticData> {
    let pat = synth_pat(phantom, &grids.pat.axes[0], &grids.pat.axes[1..])?;
    let oct = synth_oct(phantom, &grids.oct, &grids.forward_space, directions)?;
    SyntheticData::noiseless(
        phantom.id,
        grids.pat.clone(),
        pat,
        grids.oct.clone(),
        directions.to_vec(),
        oct,
        false,
    )
}

/// Full-line frequency window used by inverse-crime data; the closed-form
/// kernel is exact only for unrestricted frequency integrals.
pub const INVERSE_CRIME_WINDOW: Interval = Interval::symmetric(12.0);

pub const CONTAINER_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"HPATDAT\0";

#[derive(Serialize, Deserialize)]
struct Sidecar {
    format_version: u32,
    phantom: PhantomId,
    pat_grid: TensorGrid,
    oct_grid: Grid1D,
    directions: Vec<DetectionDirection>,
    noise: NoiseSpec,
    inverse_crime: bool,
    pat_len: usize,
    oct_len: usize,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

impl SyntheticData {
    /// Writes `<stem>.bin` and `<stem>.json`.
    ///
    /// Binary layout, little-endian: 8-byte magic `HPATDAT\0`, `u32` version,
    /// `u64` PAT length `P`, `u64` OCT length `M`, then `P` f64 (pat), `P` f64
    /// (pat_noisy), `2M` f64 (oct as re, im pairs), `2M` f64 (oct_noisy).
    pub fn save(&self, stem: &Path) -> Result<()> {
        let (bin, json) = paths(stem);
        let mut buf = Vec::with_capacity(28 + 8 * (2 * self.pat.len() + 4 * self.oct.len()));
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.pat.len() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.oct.len() as u64).to_le_bytes());
        for v in self.pat.iter().chain(&self.pat_noisy) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for z in self.oct.iter().chain(&self.oct_noisy) {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        fs::File::create(bin)?.write_all(&buf)?;
        let side = Sidecar {
            format_version: CONTAINER_VERSION,
            phantom: self.phantom,
            pat_grid: self.pat_grid.clone(),
            oct_grid: self.oct_grid.clone(),
            directions: self.directions.clone(),
            noise: self.noise,
            inverse_crime: self.inverse_crime,
            pat_len: self.pat.len(),
            oct_len: self.oct.len(),
        };
        fs::write(json, serde_json::to_vec_pretty(&side)?)?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let (bin, json) = paths(stem);
        let side: Sidecar = serde_json::from_slice(&fs::read(json)?)?;
        if side.format_version != CONTAINER_VERSION {
            return Err(Error::Format(format!("unsupported container version {}", side.format_version)));
        }
        let mut raw = Vec::new();
        fs::File::open(bin)?.read_to_end(&mut raw)?;
        if raw.len() < 28 || &raw[..8] != MAGIC {
            return Err(Error::Format("missing container header".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(raw[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(raw[o..o + 8].try_into().unwrap()) as usize;
        if u32_at(8) != CONTAINER_VERSION {
            return Err(Error::Format(format!("binary version {} differs from sidecar", u32_at(8))));
        }
        let (p, m) = (u64_at(12), u64_at(20));
        if p != side.pat_len || m != side.oct_len || raw.len() != 28 + 8 * (2 * p + 4 * m) {
            return Err(Error::Format("payload length disagrees with header or sidecar".into()));
        }
        let mut vals = raw[28..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let pat: Vec<f64> = vals.by_ref().take(p).collect();
        let pat_noisy: Vec<f64> = vals.by_ref().take(p).collect();
        let mut complex = |len: usize| -> Vec<Complex64> {
            (0..len).map(|_| Complex64::new(vals.next().unwrap(), vals.next().unwrap())).collect()
        };
        let oct = complex(m);
        let oct_noisy = complex(m);
        let data = Self {
            phantom: side.phantom,
            pat_grid: side.pat_grid,
            pat,
            pat_noisy,
            oct_grid: side.oct_grid,
            directions: side.directions,
            oct,
            oct_noisy,
            noise: side.noise,
            inverse_crime: side.inverse_crime,
        };
        if data.pat.len() != data.pat_grid.len() || data.oct.len() != data.oct_grid.len() * data.directions.len().max(1) {
            return Err(Error::Format("sample counts do not match the stored grids".into()));
        }
        Ok(data)
    }
}
