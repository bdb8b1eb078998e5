//! End-to-end experiments: phantom → data → projections → Galerkin system →
//! regularized solve → fields → metrics → artifacts.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::forward::{
    add_noise, inverse_crime_oct_1d, inverse_crime_oct_2d, synthesize, DataGrids, SyntheticData,
    INVERSE_CRIME_WINDOW,
};
use crate::galerkin_1d::{assemble_a, assemble_rhs_m, Provenance};
use crate::galerkin_2d::{assemble_b, assemble_rhs_theta, stack_d, DetectionDirection, DirectionBlock};
use crate::hermite::HermiteBasisSpec;
use crate::phantom::{phantom_eval, Field, Phantom, PhantomId};
use crate::quadrature::{Grid1D, Interval, TensorGrid};
use crate::spectral::{eval_expansion, hilbert_coeffs, project, sign_overlap_matrix, HermiteExpansion};
use crate::tikhonov::{log_grid, residual_norm, select_lambda_lcurve, solve_tikhonov, LCurve};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum LambdaChoice {
    Fixed { value: f64 },
    Lcurve { min: f64, max: f64, count: usize },
}

impl LambdaChoice {
    /// 25 log-spaced values in `[1e−8, 1]`.
    pub const DEFAULT_LCURVE: Self = Self::Lcurve { min: 1e-8, max: 1.0, count: 25 };
}

/// Run configuration; the TOML schema mirrors the field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: PhantomId,
    pub n: usize,
    pub lambda: LambdaChoice,
    pub noise_p: f64,
    pub noise_m: f64,
    pub seed: u64,
    #[serde(default)]
    pub inverse_crime: bool,
    /// Zero out negative values of the reconstructed γ.
    #[serde(default)]
    pub clamp_negative: bool,
    /// Detection angles φ in degrees, `θ = (0, cos φ, sin φ)`; two-axis media only.
    #[serde(default)]
    pub angles_deg: Vec<f64>,
    /// Half-width overriding the phantom's frequency window.
    #[serde(default)]
    pub freq_window: Option<f64>,
    #[serde(default)]
    pub save_system: bool,
}

impl ExperimentConfig {
    /// Settings of the five reference experiments.
    pub fn preset(id: PhantomId) -> Result<Self> {
        let base = Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            experiment: id,
            n: 15,
            lambda: LambdaChoice::Fixed { value: 1e-4 },
            noise_p: 0.03,
            noise_m: 0.03,
            seed: 1,
            inverse_crime: false,
            clamp_negative: false,
            angles_deg: vec![],
            freq_window: None,
            save_system: false,
        };
        Ok(match id {
            PhantomId::Ex1 | PhantomId::Ex2 | PhantomId::Ex3 => base,
            PhantomId::Ex4 => Self { n: 5, lambda: LambdaChoice::DEFAULT_LCURVE, angles_deg: vec![90.0], ..base },
            PhantomId::Ex5 => Self {
                n: 5,
                lambda: LambdaChoice::DEFAULT_LCURVE,
                angles_deg: vec![75.0, 90.0, 105.0],
                clamp_negative: true,
                ..base
            },
            PhantomId::Custom => return Err(Error::Config("custom phantoms have no preset".into())),
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn directions(&self) -> Result<Vec<DetectionDirection>> {
        self.angles_deg.iter().map(|a| DetectionDirection::from_angle(a.to_radians())).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return bad(format!("schema_version {} unsupported", self.schema_version));
        }
        if self.experiment == PhantomId::Custom {
            return bad("custom phantoms cannot be run from a config file".into());
        }
        let two_d = matches!(self.experiment, PhantomId::Ex4 | PhantomId::Ex5);
        let max_n = if two_d { 13 } else { 22 };
        if self.n == 0 || self.n > max_n {
            return bad(format!("n = {} outside 1..={max_n}", self.n));
        }
        if !(self.noise_p >= 0.0 && self.noise_m >= 0.0) {
            return bad("noise levels must be nonnegative".into());
        }
        match self.lambda {
            LambdaChoice::Fixed { value } if !(value > 0.0) => return bad("fixed lambda must be positive".into()),
            LambdaChoice::Lcurve { min, max, count } if !(min > 0.0 && max > min && count >= 1) => {
                return bad("lcurve grid needs 0 < min < max and count >= 1".into());
            }
            _ => {}
        }
        if two_d {
            if self.angles_deg.is_empty() {
                return bad("two-axis experiments need at least one detection angle".into());
            }
            self.directions().map_err(|e| Error::Config(e.to_string()))?;
        } else if !self.angles_deg.is_empty() {
            return bad("depth-only experiments use the single detector; remove angles_deg".into());
        }
        if let Some(w) = self.freq_window {
            if !(w > 0.0) {
                return bad("freq_window must be positive".into());
            }
        }
        Ok(())
    }
}

/// A Galerkin system `G x = g` ready for regularized solution.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinSystem {
    pub n: usize,
    pub directions: Vec<DetectionDirection>,
    pub g: DMatrix<Complex64>,
    pub rhs: DVector<Complex64>,
    pub meta: Provenance,
}

const SYSTEM_MAGIC: &[u8; 8] = b"HPATSYS\0";

impl GalerkinSystem {
    /// Little-endian: magic `HPATSYS\0`, `u32` version 1, `u64` rows, `u64`
    /// cols, then `G` row-major as (re, im) f64 pairs, then `g` likewise.
    pub fn to_bytes(&self) -> Vec<u8> {
        let (r, c) = self.g.shape();
        let mut buf = Vec::with_capacity(28 + 16 * (r * c + r));
        buf.extend_from_slice(SYSTEM_MAGIC);
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.extend_from_slice(&(r as u64).to_le_bytes());
        buf.extend_from_slice(&(c as u64).to_le_bytes());
        let mut push = |z: &Complex64| {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        };
        for i in 0..r {
            for j in 0..c {
                push(&self.g[(i, j)]);
            }
        }
        self.rhs.iter().for_each(push);
        buf
    }

    /// Inverse of [`Self::to_bytes`] for the matrix and right-hand side.
    pub fn matrices_from_bytes(raw: &[u8]) -> Result<(DMatrix<Complex64>, DVector<Complex64>)> {
        if raw.len() < 28 || &raw[..8] != SYSTEM_MAGIC {
            return Err(Error::Format("missing system header".into()));
        }
        let r = u64::from_le_bytes(raw[12..20].try_into().unwrap()) as usize;
        let c = u64::from_le_bytes(raw[20..28].try_into().unwrap()) as usize;
        if raw.len() != 28 + 16 * (r * c + r) {
            return Err(Error::Format("system payload length mismatch".into()));
        }
        let vals: Vec<Complex64> = raw[28..]
            .chunks_exact(16)
            .map(|b| {
                Complex64::new(
                    f64::from_le_bytes(b[..8].try_into().unwrap()),
                    f64::from_le_bytes(b[8..].try_into().unwrap()),
                )
            })
            .collect();
        Ok((DMatrix::from_row_slice(r, c, &vals[..r * c]), DVector::from_column_slice(&vals[r * c..])))
    }
}

/// Basis of the unknown `γ`: `h_j(2y)` in depth-only media, `h_k(y₂) h_l(y₃)` otherwise.
pub fn gamma_bases(dim: usize, n: usize) -> Result<Vec<HermiteBasisSpec>> {
    Ok(match dim {
        1 => vec![HermiteBasisSpec::space(n, 2.0)?],
        _ => vec![HermiteBasisSpec::space(n, 1.0)?, HermiteBasisSpec::space(n, 1.0)?],
    })
}

/// Basis of the PAT field: frequency axis first, spatial axes as for `γ`.
pub fn pat_bases(dim: usize, n: usize) -> Result<Vec<HermiteBasisSpec>> {
    let mut b = vec![HermiteBasisSpec::frequency(n)?];
    b.extend(gamma_bases(dim, n)?);
    Ok(b)
}

/// Projected PAT coefficients and their frequency-axis Hilbert transform.
pub fn pat_coefficients(samples: &[f64], grid: &TensorGrid, dim: usize, n: usize) -> Result<(HermiteExpansion, HermiteExpansion)> {
    let p = project(samples, grid, &pat_bases(dim, n)?)?;
    let pt = hilbert_coeffs(&p, &sign_overlap_matrix(n)?)?;
    Ok((p, pt))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[serde(rename = "1d")]
    OneD,
    #[serde(rename = "2d")]
    TwoD,
}

impl Mode {
    pub fn dim(self) -> usize {
        match self {
            Mode::OneD => 1,
            Mode::TwoD => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fields {
    /// `γ̂` on the output grid.
    pub gamma: Vec<f64>,
    /// `Im ψ̂ = p_noisy · γ̂` on the PAT grid.
    pub im_chi: Vec<f64>,
}

/// Evaluates `γ̂` from coefficients and forms `Im ψ̂ = p · γ̂`.
pub fn reconstruct_fields(
    x: &[f64],
    mode: Mode,
    n: usize,
    gamma_grid: &TensorGrid,
    pat_grid: &TensorGrid,
    pat_noisy: &[f64],
    clamp_negative: bool,
) -> Result<Fields> {
    let dim = mode.dim();
    if x.len() != n.pow(dim as u32) {
        return Err(Error::Domain(format!("{} coefficients for N = {n} in {dim}-D", x.len())));
    }
    if gamma_grid.rank() != dim || pat_grid.rank() != dim + 1 || pat_noisy.len() != pat_grid.len() {
        return Err(Error::Domain("grid ranks or PAT sample count do not match the mode".into()));
    }
    let e = HermiteExpansion::new(gamma_bases(dim, n)?, x.to_vec())?;
    let clamp = |v: Vec<f64>| -> Vec<f64> {
        if clamp_negative {
            v.into_iter().map(|g| g.max(0.0)).collect()
        } else {
            v
        }
    };
    let gamma = clamp(eval_expansion(&e, gamma_grid)?);
    let on_pat = clamp(eval_expansion(&e, &TensorGrid::new(pat_grid.axes[1..].to_vec()))?);
    let im_chi = pat_noisy
        .iter()
        .enumerate()
        .map(|(i, &p)| p * on_pat[i % on_pat.len()])
        .collect();
    Ok(Fields { gamma, im_chi })
}

/// `‖field − truth‖/‖truth‖` in the weighted L² norm of `grid`.
pub fn error_metrics(field: &[f64], truth: &[f64], grid: &TensorGrid) -> Result<f64> {
    if field.len() != truth.len() || truth.len() != grid.len() {
        return Err(Error::Domain("field, truth and grid sizes differ".into()));
    }
    let w = grid.weights();
    let num: f64 = field.iter().zip(truth).zip(&w).map(|((f, t), w)| w * (f - t).powi(2)).sum();
    let den: f64 = truth.iter().zip(&w).map(|(t, w)| w * t * t).sum();
    if den == 0.0 {
        return Err(Error::Domain("relative error against a zero truth".into()));
    }
    Ok((num / den).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rel_l2_gamma: f64,
    pub rel_l2_imchi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub x: Vec<f64>,
    pub lambda: f64,
    pub residual_norm: f64,
    pub solution_norm: f64,
    pub gamma_grid: TensorGrid,
    pub gamma_truth: Vec<f64>,
    pub gamma_field: Vec<f64>,
    pub imchi_grid: TensorGrid,
    pub imchi_truth: Vec<f64>,
    pub imchi_field: Vec<f64>,
    pub metrics: Metrics,
    pub lcurve: Option<LCurve>,
    /// Truncated-span coefficients of the true `γ` (inverse-crime runs).
    pub planted: Option<Vec<f64>>,
}

impl ReconstructionResult {
    /// `max_i |x_i − planted_i|` for inverse-crime runs.
    pub fn coefficient_error(&self) -> Option<f64> {
        self.planted
            .as_ref()
            .map(|p| p.iter().zip(&self.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

/// Everything a run produces in memory.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub data: SyntheticData,
    pub system: GalerkinSystem,
    pub result: ReconstructionResult,
    /// Wall-clock seconds per stage, in execution order.
    pub timings: Vec<(&'static str, f64)>,
}

/// Uniform output grid on `Ω_L` per axis: 401 points in depth, 91² in the plane.
pub fn output_grid(phantom: &Phantom) -> TensorGrid {
    let b = phantom.support_box;
    match phantom.dim() {
        1 => TensorGrid::new(vec![Grid1D::uniform_trapezoid(b, 401)]),
        _ => {
            let g = Grid1D::uniform_trapezoid(b, 91);
            TensorGrid::new(vec![g.clone(), g])
        }
    }
}

struct Stopwatch {
    t: Instant,
    log: Vec<(&'static str, f64)>,
}

impl Stopwatch {
    fn lap(&mut self, stage: &'static str) {
        self.log.push((stage, self.t.elapsed().as_secs_f64()));
        self.t = Instant::now();
    }
}

/// Runs the full pipeline in memory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut sw = Stopwatch { t: Instant::now(), log: vec![] };
    let n = config.n;
    let mut phantom = Phantom::preset(config.experiment).map_err(|e| e.in_stage("phantom"))?;
    if let Some(w) = config.freq_window {
        phantom.freq_window = Interval::symmetric(w);
    }
    let dim = phantom.dim();
    let mode = if dim == 1 { Mode::OneD } else { Mode::TwoD };
    let directions = config.directions()?;
    sw.lap("phantom");

    let grids = DataGrids::default_for(&phantom);
    let clean = synthesize(&phantom, &grids, &directions).map_err(|e| e.in_stage("synthesis"))?;
    sw.lap("synthesis");

    let (p_clean, pt_clean) =
        pat_coefficients(&clean.pat, &clean.pat_grid, dim, n).map_err(|e| e.in_stage("projection"))?;
    let ggrid = output_grid(&phantom);
    let gamma_truth = phantom_eval(&phantom, Field::Gamma, &ggrid)?;
    let (clean, planted, window) = if config.inverse_crime {
        let planted = planted_gamma(&phantom, n).map_err(|e| e.in_stage("projection"))?;
        let og = Grid1D::composite_gauss_legendre(INVERSE_CRIME_WINDOW, 96, 16);
        let oct = if dim == 1 {
            inverse_crime_oct_1d(&p_clean, &pt_clean, &planted, &og)
        } else {
            directions
                .iter()
                .map(|d| inverse_crime_oct_2d(&p_clean, &pt_clean, &planted, d, &og))
                .collect::<Result<Vec<_>>>()
                .map(|v| v.concat())
        }
        .map_err(|e| e.in_stage("synthesis"))?;
        let data = SyntheticData::noiseless(
            phantom.id,
            clean.pat_grid.clone(),
            clean.pat.clone(),
            og,
            directions.clone(),
            oct,
            true,
        )?;
        (data, Some(planted), INVERSE_CRIME_WINDOW)
    } else {
        (clean, None, phantom.freq_window)
    };
    let data = add_noise(&clean, config.noise_p, config.noise_m, config.seed).map_err(|e| e.in_stage("noise"))?;
    sw.lap("noise");

    let (p, pt) = pat_coefficients(&data.pat_noisy, &data.pat_grid, dim, n).map_err(|e| e.in_stage("projection"))?;
    sw.lap("projection");

    let meta = Provenance {
        phantom: phantom.id.to_string(),
        noise_p: config.noise_p,
        noise_m: config.noise_m,
        seed: config.seed,
        inverse_crime: config.inverse_crime,
    };
    let system = assemble_system(&p, &pt, &data, window, &directions, n, meta).map_err(|e| e.in_stage("assembly"))?;
    sw.lap("assembly");

    let (lambda, lcurve) = match config.lambda {
        LambdaChoice::Fixed { value } => (value, None),
        LambdaChoice::Lcurve { min, max, count } => {
            let (l, c) = select_lambda_lcurve(&system.g, &system.rhs, &log_grid(min, max, count))
                .map_err(|e| e.in_stage("solve"))?;
            (l, Some(c))
        }
    };
    let x = solve_tikhonov(&system.g, &system.rhs, lambda).map_err(|e| e.in_stage("solve"))?;
    let res = residual_norm(&system.g, &system.rhs, &x);
    sw.lap("solve");

    let fields = reconstruct_fields(x.as_slice(), mode, n, &ggrid, &data.pat_grid, &data.pat_noisy, config.clamp_negative)
        .map_err(|e| e.in_stage("fields"))?;
    let imchi_truth = phantom_eval(&phantom, Field::ImPsi, &data.pat_grid)?;
    let metrics = Metrics {
        rel_l2_gamma: error_metrics(&fields.gamma, &gamma_truth, &ggrid).map_err(|e| e.in_stage("metrics"))?,
        rel_l2_imchi: error_metrics(&fields.im_chi, &imchi_truth, &data.pat_grid).map_err(|e| e.in_stage("metrics"))?,
    };
    sw.lap("fields");

    let result = ReconstructionResult {
        solution_norm: x.norm(),
        x: x.as_slice().to_vec(),
        lambda,
        residual_norm: res,
        gamma_grid: ggrid,
        gamma_truth,
        gamma_field: fields.gamma,
        imchi_grid: data.pat_grid.clone(),
        imchi_truth,
        imchi_field: fields.im_chi,
        metrics,
        lcurve,
        planted,
    };
    Ok(RunOutput { config: config.clone(), data, system, result, timings: sw.log })
}

/// Truncated-span coefficients of the true `γ`, projected over `Ω_L`.
pub fn planted_gamma(phantom: &Phantom, n: usize) -> Result<Vec<f64>> {
    let nodes = if phantom.dim() == 1 { 257 } else { 97 };
    let axis = Grid1D::gauss_legendre(phantom.support_box, nodes);
    let grid = TensorGrid::new(vec![axis; phantom.dim()]);
    let samples = phantom_eval(phantom, Field::Gamma, &grid)?;
    Ok(project(&samples, &grid, &gamma_bases(phantom.dim(), n)?)?.coeffs().to_vec())
}

/// Builds `A γ = m` or `D ζ = d` from PAT coefficients and noisy OCT data.
pub fn assemble_system(
    p: &HermiteExpansion,
    pt: &HermiteExpansion,
    data: &SyntheticData,
    window: Interval,
    directions: &[DetectionDirection],
    n: usize,
    meta: Provenance,
) -> Result<GalerkinSystem> {
    if p.rank() == 2 {
        let a = assemble_a(p, pt, n)?;
        let m = assemble_rhs_m(data.oct_block(0, true), &data.oct_grid, window, n)?;
        let sys = crate::galerkin_1d::System1D::new(a, m, window, meta)?;
        Ok(GalerkinSystem { n, directions: vec![], g: sys.a, rhs: sys.m, meta: sys.meta })
    } else {
        let blocks = directions
            .iter()
            .enumerate()
            .map(|(i, d)| {
                Ok(DirectionBlock {
                    direction: *d,
                    b: assemble_b(p, pt, d, n)?,
                    m: assemble_rhs_theta(data.oct_block(i, true), &data.oct_grid, window, d, n)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let sys = stack_d(&blocks, window, meta)?;
        Ok(GalerkinSystem { n, directions: sys.directions, g: sys.d, rhs: sys.rhs, meta: sys.meta })
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    experiment: PhantomId,
    n: usize,
    directions: Vec<[f64; 3]>,
    rows: usize,
    cols: usize,
    lambda: f64,
    lambda_mode: &'static str,
    lcurve_degenerate: Option<bool>,
    residual_norm: f64,
    solution_norm: f64,
    rel_l2_gamma: f64,
    rel_l2_imchi: f64,
    coefficient_error: Option<f64>,
    noise_p: f64,
    noise_m: f64,
    seed: u64,
    inverse_crime: bool,
    clamp_negative: bool,
    versions: Versions,
    /// All wall-clock information lives here so the rest of the file is reproducible.
    timestamp: Timestamp<'a>,
}

#[derive(Serialize)]
struct Versions {
    crate_version: &'static str,
    config_schema: u32,
    data_container: u32,
}

#[derive(Serialize)]
struct Timestamp<'a> {
    unix_seconds: u64,
    stage_seconds: Vec<(&'a str, f64)>,
}

/// Writes `gamma.csv`, `imchi.csv`, `metrics.json`, `lcurve.csv` (L-curve
/// runs) and `system.bin` (when `save_system` is set) into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let r = &out.result;
    let dim = r.gamma_grid.rank();

    let mut csv = String::from(if dim == 1 { "y,truth,reconstruction\n" } else { "y2,y3,truth,reconstruction\n" });
    let shape = r.gamma_grid.shape();
    for i in 0..r.gamma_truth.len() {
        let coords = unravel(i, &shape);
        for (axis, &c) in coords.iter().enumerate() {
            write!(csv, "{},", num(r.gamma_grid.axes[axis].nodes[c])).unwrap();
        }
        writeln!(csv, "{},{}", num(r.gamma_truth[i]), num(r.gamma_field[i])).unwrap();
    }
    fs::write(dir.join("gamma.csv"), csv)?;

    // two-axis PAT grids are subsampled to keep the file plot-sized
    let stride: Vec<usize> = if dim == 1 { vec![1, 1] } else { vec![8, 4, 4] };
    let mut csv = String::from(if dim == 1 {
        "omega,y,truth,reconstruction\n"
    } else {
        "omega,y2,y3,truth,reconstruction\n"
    });
    let shape = r.imchi_grid.shape();
    for i in 0..r.imchi_truth.len() {
        let coords = unravel(i, &shape);
        if coords.iter().zip(&stride).any(|(c, s)| c % s != 0) {
            continue;
        }
        for (axis, &c) in coords.iter().enumerate() {
            write!(csv, "{},", num(r.imchi_grid.axes[axis].nodes[c])).unwrap();
        }
        writeln!(csv, "{},{}", num(r.imchi_truth[i]), num(r.imchi_field[i])).unwrap();
    }
    fs::write(dir.join("imchi.csv"), csv)?;

    if let Some(lc) = &r.lcurve {
        let mut csv = String::from("lambda,residual_norm,solution_norm,curvature,selected\n");
        for (i, p) in lc.points.iter().enumerate() {
            writeln!(
                csv,
                "{},{},{},{},{}",
                num(p.lambda),
                num(p.residual_norm),
                num(p.solution_norm),
                p.curvature.map(num).unwrap_or_default(),
                u8::from(i == lc.selected)
            )
            .unwrap();
        }
        fs::write(dir.join("lcurve.csv"), csv)?;
    }

    if out.config.save_system {
        fs::File::create(dir.join("system.bin"))?.write_all(&out.system.to_bytes())?;
    }

    let metrics = MetricsFile {
        experiment: out.config.experiment,
        n: out.config.n,
        directions: out.system.directions.iter().map(|d| d.theta()).collect(),
        rows: out.system.g.nrows(),
        cols: out.system.g.ncols(),
        lambda: r.lambda,
        lambda_mode: match out.config.lambda {
            LambdaChoice::Fixed { .. } => "fixed",
            LambdaChoice::Lcurve { .. } => "lcurve",
        },
        lcurve_degenerate: r.lcurve.as_ref().map(|c| c.degenerate),
        residual_norm: r.residual_norm,
        solution_norm: r.solution_norm,
        rel_l2_gamma: r.metrics.rel_l2_gamma,
        rel_l2_imchi: r.metrics.rel_l2_imchi,
        coefficient_error: r.coefficient_error(),
        noise_p: out.config.noise_p,
        noise_m: out.config.noise_m,
        seed: out.config.seed,
        inverse_crime: out.config.inverse_crime,
        clamp_negative: out.config.clamp_negative,
        versions: Versions {
            crate_version: env!("CARGO_PKG_VERSION"),
            config_schema: CONFIG_SCHEMA_VERSION,
            data_container: crate::forward::CONTAINER_VERSION,
        },
        timestamp: Timestamp {
            unix_seconds: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            stage_seconds: out.timings.clone(),
        },
    };
    fs::write(dir.join("metrics.json"), serde_json::to_vec_pretty(&metrics)?)?;
    Ok(())
}

fn unravel(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut out = vec![0; shape.len()];
    for axis in (0..shape.len()).rev() {
        out[axis] = flat % shape[axis];
        flat /= shape[axis];
    }
    out
}

/// Runs and writes artifacts; failures of the write step are tagged `output`.
pub fn run_experiment_to_dir(config: &ExperimentConfig, dir: &Path) -> Result<RunOutput> {
    let out = run_experiment(config)?;
    write_outputs(&out, dir).map_err(|e| e.in_stage("output"))?;
    Ok(out)
}
