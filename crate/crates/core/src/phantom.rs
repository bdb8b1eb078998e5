//! Closed-form ground truth: the reciprocal Grüneisen parameter `γ` and the
//! absorptive susceptibility `Im ψ`, plus the boxes they live in.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hermite::eval_hermite_fn;
use crate::quadrature::{Interval, TensorGrid};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type FieldFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhantomId {
    Ex1,
    Ex2,
    Ex3,
    Ex4,
    Ex5,
    Custom,
}

impl PhantomId {
    pub const PRESETS: [PhantomId; 5] = [Self::Ex1, Self::Ex2, Self::Ex3, Self::Ex4, Self::Ex5];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Ex1 => "ex1",
            Self::Ex2 => "ex2",
            Self::Ex3 => "ex3",
            Self::Ex4 => "ex4",
            Self::Ex5 => "ex5",
            Self::Custom => "custom",
        }
    }
}

impl fmt::Display for PhantomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhantomId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ex1" => Ok(Self::Ex1),
            "ex2" => Ok(Self::Ex2),
            "ex3" => Ok(Self::Ex3),
            "ex4" => Ok(Self::Ex4),
            "ex5" => Ok(Self::Ex5),
            "custom" => Ok(Self::Custom),
            other => Err(Error::Domain(format!("unknown phantom id `{other}`"))),
        }
    }
}

/// One separable term `f(ω) Π_i g_i(x_i)` of `Im ψ`.
#[derive(Clone)]
pub struct PsiTerm {
    pub freq: ScalarFn,
    pub space: Vec<ScalarFn>,
}

impl PsiTerm {
    pub fn new(freq: ScalarFn, space: Vec<ScalarFn>) -> Self {
        Self { freq, space }
    }

    fn eval(&self, omega: f64, x: &[f64]) -> f64 {
        (self.freq)(omega) * self.space.iter().zip(x).map(|(g, &xi)| g(xi)).product::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Gamma,
    ImPsi,
}

/// Ground-truth pair with its domain boxes. Spatial boxes are the same
/// interval along every spatial axis.
#[derive(Clone)]
pub struct Phantom {
    pub id: PhantomId,
    dim: usize,
    gamma: FieldFn,
    psi: Vec<PsiTerm>,
    /// Ω: where `Im ψ(ω, ·)` lives and PAT data is measured.
    pub omega_box: Interval,
    /// Ω_L: support of `γ`.
    pub support_box: Interval,
    /// W: frequency window of the measurements.
    pub freq_window: Interval,
}

impl fmt::Debug for Phantom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Phantom")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("psi_terms", &self.psi.len())
            .field("omega_box", &self.omega_box)
            .field("support_box", &self.support_box)
            .field("freq_window", &self.freq_window)
            .finish()
    }
}

fn h(k: usize) -> ScalarFn {
    Arc::new(move |x| eval_hermite_fn(k, x))
}

fn h1_plus_h1_double(scale: f64) -> ScalarFn {
    Arc::new(move |w| scale * (eval_hermite_fn(1, w) + eval_hermite_fn(1, 2.0 * w)))
}

fn quartic_bump(shift: f64, rate: f64) -> ScalarFn {
    Arc::new(move |x| (-rate * (x + shift).powi(4)).exp())
}

fn gauss2(cx: f64, cy: f64) -> impl Fn(&[f64]) -> f64 {
    move |x| (-(x[0] - cx).powi(2) - (x[1] - cy).powi(2)).exp()
}

impl Phantom {
    pub fn preset(id: PhantomId) -> Result<Self> {
        let ex1_gamma: FieldFn = Arc::new(|x: &[f64]| (2.0 * x[0].powi(4) + 1.0) * (-x[0] * x[0]).exp());
        let ex1_psi = || {
            vec![PsiTerm::new(
                h(1),
                vec![Arc::new(|x: f64| (x.powi(4) + x.powi(3) + x * x + 0.1) * (-2.0 * x * x).exp())],
            )]
        };
        let (box_1d, box_2d) = (
            (Interval::symmetric(3.5), Interval::symmetric(4.0)),
            (Interval::symmetric(4.0), Interval::symmetric(4.5)),
        );
        let make = |dim, gamma, psi, boxes: (Interval, Interval), w| Self {
            id,
            dim,
            gamma,
            psi,
            omega_box: boxes.0,
            support_box: boxes.1,
            freq_window: Interval::symmetric(w),
        };
        Ok(match id {
            PhantomId::Ex1 => make(1, ex1_gamma, ex1_psi(), box_1d, 4.0),
            PhantomId::Ex2 => {
                let gamma: FieldFn = Arc::new(|x: &[f64]| {
                    eval_hermite_fn(0, x[0]) + eval_hermite_fn(0, 2.0 * x[0]) + eval_hermite_fn(1, 3.0 * x[0])
                });
                make(1, gamma, ex1_psi(), box_1d, 4.0)
            }
            PhantomId::Ex3 => {
                let psi = vec![PsiTerm::new(
                    h1_plus_h1_double(1.0),
                    vec![Arc::new(|x: f64| (x * x + 0.1) * (-2.0 * x * x).exp())],
                )];
                make(1, ex1_gamma, psi, box_1d, 4.0)
            }
            PhantomId::Ex4 => {
                let gamma: FieldFn = Arc::new(gauss2(-1.5, -1.5));
                let psi = vec![PsiTerm::new(
                    h1_plus_h1_double(0.7),
                    vec![quartic_bump(1.6, 1.0), quartic_bump(1.6, 0.5)],
                )];
                make(2, gamma, psi, box_2d, 3.0)
            }
            PhantomId::Ex5 => {
                let (a, b, c) = (gauss2(-0.5, -2.0), gauss2(-2.0, -0.5), gauss2(2.0, 2.0));
                let gamma: FieldFn = Arc::new(move |x: &[f64]| a(x) + 0.8 * b(x) + c(x));
                let h1 = h(1);
                let h1_08: ScalarFn = Arc::new(|w| 0.8 * eval_hermite_fn(1, w));
                let psi = vec![
                    PsiTerm::new(h1.clone(), vec![quartic_bump(0.5, 1.0), quartic_bump(2.0, 1.0)]),
                    PsiTerm::new(h1, vec![quartic_bump(2.0, 0.6), quartic_bump(0.5, 1.0)]),
                    PsiTerm::new(h1_08, vec![quartic_bump(-2.0, 1.0), quartic_bump(-2.0, 1.0)]),
                ];
                make(2, gamma, psi, box_2d, 2.0)
            }
            PhantomId::Custom => {
                return Err(Error::Domain("custom phantoms are built with Phantom::custom".into()));
            }
        })
    }

    pub fn custom(
        dim: usize,
        gamma: FieldFn,
        psi: Vec<PsiTerm>,
        omega_box: Interval,
        support_box: Interval,
        freq_window: Interval,
    ) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Domain(format!("phantom dimension {dim} not in 1..=2")));
        }
        if psi.iter().any(|t| t.space.len() != dim) {
            return Err(Error::Domain("every Im ψ term needs one spatial factor per axis".into()));
        }
        Ok(Self { id: PhantomId::Custom, dim, gamma, psi, omega_box, support_box, freq_window })
    }

    /// Spatial dimension (1 or 2).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn psi_terms(&self) -> &[PsiTerm] {
        &self.psi
    }

    pub fn gamma_at(&self, x: &[f64]) -> f64 {
        (self.gamma)(x)
    }

    pub fn im_psi_at(&self, omega: f64, x: &[f64]) -> f64 {
        self.psi.iter().map(|t| t.eval(omega, x)).sum()
    }
}

/// Samples `γ` (grid rank = dim) or `Im ψ` (grid rank = dim + 1, ω first)
/// at every grid point, row-major.
pub fn phantom_eval(phantom: &Phantom, which: Field, points: &TensorGrid) -> Result<Vec<f64>> {
    let want = match which {
        Field::Gamma => phantom.dim,
        Field::ImPsi => phantom.dim + 1,
    };
    if points.rank() != want {
        return Err(Error::Domain(format!(
            "{which:?} of a {}-D phantom needs a rank-{want} grid, got rank {}",
            phantom.dim,
            points.rank()
        )));
    }
    let shape = points.shape();
    let total = points.len();
    let mut out = Vec::with_capacity(total);
    let mut coord = vec![0.0; want];
    for flat in 0..total {
        let mut rem = flat;
        for axis in (0..want).rev() {
            coord[axis] = points.axes[axis].nodes[rem % shape[axis]];
            rem /= shape[axis];
        }
        out.push(match which {
            Field::Gamma => phantom.gamma_at(&coord),
            Field::ImPsi => phantom.im_psi_at(coord[0], &coord[1..]),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::Grid1D;
    use std::f64::consts::PI;

    #[test]
    fn preset_values() {
        let ex1 = Phantom::preset(PhantomId::Ex1).unwrap();
        assert_eq!(ex1.gamma_at(&[0.0]), 1.0);
        let ex4 = Phantom::preset(PhantomId::Ex4).unwrap();
        assert_eq!(ex4.gamma_at(&[-1.5, -1.5]), 1.0);
        let ex2 = Phantom::preset(PhantomId::Ex2).unwrap();
        assert!((ex2.gamma_at(&[0.0]) - 2.0 * PI.powf(-0.25)).abs() < 1e-15);
        let ex5 = Phantom::preset(PhantomId::Ex5).unwrap();
        assert_eq!(ex5.psi_terms().len(), 3);
        assert_eq!(ex5.freq_window, Interval::symmetric(2.0));
    }

    #[test]
    fn ids_parse() {
        for id in PhantomId::PRESETS {
            assert_eq!(id.as_str().parse::<PhantomId>().unwrap(), id);
        }
        assert!(matches!("ex9".parse::<PhantomId>(), Err(Error::Domain(_))));
        assert!(Phantom::preset(PhantomId::Custom).is_err());
    }

    #[test]
    fn eval_layout() {
        let ex4 = Phantom::preset(PhantomId::Ex4).unwrap();
        let gx = Grid1D { nodes: vec![-1.5, 0.0], weights: vec![1.0; 2] };
        let gy = Grid1D { nodes: vec![-1.5, 1.0, 2.0], weights: vec![1.0; 3] };
        let v = phantom_eval(&ex4, Field::Gamma, &TensorGrid::new(vec![gx.clone(), gy.clone()])).unwrap();
        assert_eq!(v[0], 1.0);
        assert_eq!(v[4], ex4.gamma_at(&[0.0, 1.0]));
        let gw = Grid1D { nodes: vec![0.5], weights: vec![1.0] };
        let p = phantom_eval(&ex4, Field::ImPsi, &TensorGrid::new(vec![gw, gx, gy])).unwrap();
        assert_eq!(p[5], ex4.im_psi_at(0.5, &[0.0, 2.0]));
        assert!(phantom_eval(&ex4, Field::ImPsi, &TensorGrid::new(vec![])).is_err());
    }

    #[test]
    fn gamma_positive_on_support() {
        for id in PhantomId::PRESETS {
            let ph = Phantom::preset(id).unwrap();
            let b = ph.support_box;
            let xs: Vec<f64> = (0..81).map(|i| b.lo + b.len() * i as f64 / 80.0).collect();
            if ph.dim() == 1 {
                assert!(xs.iter().all(|&x| ph.gamma_at(&[x]) > 0.0), "{id}");
            } else {
                for &x in &xs {
                    assert!(xs.iter().all(|&y| ph.gamma_at(&[x, y]) > 0.0), "{id}");
                }
            }
        }
    }
}
