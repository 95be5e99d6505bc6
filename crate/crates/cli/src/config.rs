//! Problem-config JSON and its translation into library objects.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use affine_sobolev::energy::random_unimodular;
use affine_sobolev::field::{
    AffineMap, AxisBox, Ball, DomainMask, GridSpec, LogStrip, Region, ScalarField, Transformed,
};
use affine_sobolev::field::io::load_afld;
use affine_sobolev::linalg::Mat;
use affine_sobolev::profiles::ProfileOptions;
use affine_sobolev::solvers::{BubbleOptions, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Deserialize)]
pub struct ProblemConfig {
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub grid: Option<GridConfig>,
    pub mask: Option<MaskConfig>,
    pub p: Option<f64>,
    /// Single input field (energy, j2-check, invariance).
    pub field: Option<FieldConfig>,
    /// Input sequence (profiles).
    #[serde(default)]
    pub fields: Vec<FieldConfig>,
    /// Right-hand side (poisson).
    pub f: Option<FieldConfig>,
    /// Potential (penalty).
    #[serde(rename = "V")]
    pub v: Option<PotentialConfig>,
    /// Grid spacing of the truncated box (penalty).
    pub h: Option<f64>,
    /// Sphere directions (j2-check).
    pub directions: Option<usize>,
    /// Sampled transforms (invariance).
    pub samples: Option<usize>,
    pub max_condition: Option<f64>,
    /// Also solve the classical problem (ground-state).
    #[serde(default)]
    pub classical: bool,
    /// Transforms for critical-check; defaults to a fixed set of five.
    pub transforms: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default)]
    pub bubble: BubbleOptions,
    #[serde(default)]
    pub profiles: ProfileOptions,
    /// Normalize each element before extraction (profiles).
    #[serde(default)]
    pub normalize: bool,
    /// Region, maps, prefix, sample count and window (liminf).
    pub region: Option<MaskConfig>,
    pub maps: Option<MapsConfig>,
    pub prefix: Option<usize>,
    pub window: Option<WindowConfig>,
    /// Base seed for sampling; `--seed` overrides it.
    #[serde(default)]
    pub seed: u64,
    #[serde(flatten)]
    pub solver: SolverConfig,
}

#[derive(Debug, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum GridConfig {
    Nodes { shape: Vec<usize>, spacing: Option<Vec<f64>>, origin: Option<Vec<f64>> },
    Box { lo: Vec<f64>, hi: Vec<f64>, h: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Full,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    LogStrip,
    /// Inside flags of a masked AFLD field.
    File { path: PathBuf },
}

#[derive(Debug, Deserialize)]
pub struct MaskConfig {
    #[serde(flatten)]
    pub shape: Shape,
    /// Optional `x ↦ M x + t` applied to the shape.
    pub transform: Option<MapConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub matrix: Vec<Vec<f64>>,
    #[serde(default)]
    pub translation: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    File { path: PathBuf },
    Const { value: f64 },
    /// `Σ_i coeffs[i] |x − center|^{2i}`.
    Radial { coeffs: Vec<f64>, center: Option<Vec<f64>> },
    /// `amplitude · exp(−½ (x−c)ᵀ M (x−c))`.
    Gaussian { matrix: Vec<Vec<f64>>, center: Option<Vec<f64>>, amplitude: Option<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Const { value: f64 },
    /// `1 − depth · exp(−|x|²/width²)`.
    Well { depth: f64, width: f64 },
    File { path: PathBuf },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapsConfig {
    List { maps: Vec<MapConfig> },
    /// `T_k = I`, `y_k = k · step` for `k = 1..=count`.
    Translation { step: Vec<f64>, count: usize },
    /// `T_k = diag(k, k^{−1/(N−1)}, …)`, `y_k = 0` for `k = 1..=count`.
    Diagonal { count: usize },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ProblemConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ProblemConfig = serde_json::from_str(text).map_err(|e| bad(format!("config: {e}")))?;
        cfg.solver.validate().map_err(|e| bad(e.to_string()))?;
        Ok(cfg)
    }

    pub fn dim(&self) -> Result<usize, CliError> {
        let n = self.n.ok_or_else(|| bad("missing N"))?;
        if !(1..=4).contains(&n) {
            return Err(bad(format!("N = {n} outside 1..=4")));
        }
        Ok(n)
    }

    pub fn exponent(&self) -> Result<f64, CliError> {
        self.p.ok_or_else(|| bad("missing p"))
    }

    pub fn grid(&self) -> Result<GridSpec, CliError> {
        let n = self.dim()?;
        let g = match self.grid.as_ref().ok_or_else(|| bad("missing grid"))? {
            GridConfig::Nodes { shape, spacing, origin } => {
                let spacing = spacing.clone().unwrap_or_else(|| shape.iter().map(|&s| 1.0 / (s.max(2) - 1) as f64).collect());
                let origin = origin.clone().unwrap_or_else(|| vec![0.0; shape.len()]);
                GridSpec::new(shape.clone(), spacing, origin)
            }
            GridConfig::Box { lo, hi, h } => GridSpec::covering(lo, hi, *h),
        }
        .map_err(|e| bad(e.to_string()))?;
        if g.dim() != n {
            return Err(bad(format!("grid has dimension {}, N = {n}", g.dim())));
        }
        Ok(g)
    }

    pub fn mask(&self, base: &Path) -> Result<Arc<DomainMask>, CliError> {
        let grid = self.grid()?;
        let mask = match &self.mask {
            None => DomainMask::full(grid),
            Some(MaskConfig { shape: Shape::Full, transform: None }) => DomainMask::full(grid),
            Some(m) => {
                if let Shape::File { path } = &m.shape {
                    let u = load_afld(&base.join(path))?;
                    let inside = u.mask().ok_or_else(|| bad("mask file holds an unmasked field"))?;
                    if !u.grid().same_as(&grid) {
                        return Err(bad("mask file grid differs from the configured grid"));
                    }
                    return Ok(inside.clone());
                }
                let region = m.region(grid.dim(), base)?;
                DomainMask::from_region(grid, region.as_ref())
            }
        };
        Ok(Arc::new(mask.map_err(|e| bad(e.to_string()))?))
    }

    pub fn solver_config(&self, seed: u64) -> SolverConfig {
        let mut cfg = self.solver.clone();
        if let Some(p) = self.p {
            cfg.p = p;
        }
        // seed 0 stays the deterministic centred start
        for s in cfg.seeds.iter_mut().filter(|s| **s != 0) {
            *s = s.wrapping_add(seed);
        }
        cfg
    }
}

impl MaskConfig {
    pub fn region(&self, n: usize, base: &Path) -> Result<Box<dyn Region>, CliError> {
        let check = |v: &[f64]| if v.len() == n { Ok(()) } else { Err(bad("region dimension differs from N")) };
        let r: Box<dyn Region> = match &self.shape {
            Shape::Full => return Err(bad("a full mask has no region")),
            Shape::Box { lo, hi } => {
                check(lo)?;
                check(hi)?;
                Box::new(AxisBox { lo: lo.clone(), hi: hi.clone() })
            }
            Shape::Ball { center, radius } => {
                check(center)?;
                Box::new(Ball { center: center.clone(), radius: *radius })
            }
            Shape::LogStrip => Box::new(LogStrip { dim: n }),
            Shape::File { path } => {
                let u = load_afld(&base.join(path))?;
                let m = u.mask().ok_or_else(|| bad("region file holds an unmasked field"))?;
                Box::new(DomainMask::clone(m))
            }
        };
        match &self.transform {
            None => Ok(r),
            Some(t) => Ok(Box::new(Transformed::new(r, t.to_map(n)?).map_err(|e| bad(e.to_string()))?)),
        }
    }
}

impl MapConfig {
    pub fn to_map(&self, n: usize) -> Result<AffineMap, CliError> {
        let m = matrix(&self.matrix, n)?;
        let y = self.translation.clone().unwrap_or_else(|| vec![0.0; n]);
        AffineMap::new(m, y).map_err(|e| bad(e.to_string()))
    }
}

pub fn matrix(rows: &[Vec<f64>], n: usize) -> Result<Mat, CliError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(bad(format!("expected a {n}×{n} matrix")));
    }
    Ok(Mat::from_rows(rows))
}

impl FieldConfig {
    /// Loads or samples the field; analytic kinds need `grid`.
    pub fn build(&self, grid: Option<&GridSpec>, base: &Path) -> Result<ScalarField, CliError> {
        if let FieldConfig::File { path } = self {
            return Ok(load_afld(&base.join(path))?);
        }
        let grid = grid.ok_or_else(|| bad("analytic field needs a grid"))?.clone();
        let n = grid.dim();
        let centre = |c: &Option<Vec<f64>>| -> Result<Vec<f64>, CliError> {
            let c = c.clone().unwrap_or_else(|| vec![0.0; n]);
            if c.len() == n {
                Ok(c)
            } else {
                Err(bad("centre dimension differs from the grid"))
            }
        };
        let f = match self {
            FieldConfig::File { .. } => unreachable!(),
            FieldConfig::Const { value } => ScalarField::from_fn(grid, |_| *value),
            FieldConfig::Radial { coeffs, center } => {
                let c = centre(center)?;
                ScalarField::from_fn(grid, |x| {
                    let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                    coeffs.iter().rev().fold(0.0, |acc, k| acc * r2 + k)
                })
            }
            FieldConfig::Gaussian { matrix: rows, center, amplitude } => {
                let m = matrix(rows, n)?;
                let c = centre(center)?;
                let a = amplitude.unwrap_or(1.0);
                ScalarField::from_fn(grid, |x| {
                    let d: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
                    let q: f64 = (0..n).map(|i| (0..n).map(|j| d[i] * m[(i, j)] * d[j]).sum::<f64>()).sum();
                    a * (-0.5 * q).exp()
                })
            }
        };
        f.map_err(|e| bad(e.to_string()))
    }
}

impl PotentialConfig {
    /// Samples `V` on `[−L, L]^N` at spacing `h`.
    pub fn build(&self, n: usize, halfwidth: f64, h: f64, base: &Path) -> Result<ScalarField, CliError> {
        if let PotentialConfig::File { path } = self {
            return Ok(load_afld(&base.join(path))?);
        }
        let grid = GridSpec::covering(&vec![-halfwidth; n], &vec![halfwidth; n], h).map_err(|e| bad(e.to_string()))?;
        let f = match self {
            PotentialConfig::File { .. } => unreachable!(),
            PotentialConfig::Const { value } => ScalarField::from_fn(grid, |_| *value),
            PotentialConfig::Well { depth, width } => ScalarField::from_fn(grid, |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                1.0 - depth * (-r2 / (width * width)).exp()
            }),
        };
        f.map_err(|e| bad(e.to_string()))
    }
}

impl MapsConfig {
    pub fn build(&self, n: usize) -> Result<Vec<AffineMap>, CliError> {
        match self {
            MapsConfig::List { maps } => maps.iter().map(|m| m.to_map(n)).collect(),
            MapsConfig::Translation { step, count } => {
                if step.len() != n {
                    return Err(bad("step dimension differs from N"));
                }
                Ok((1..=*count).map(|k| AffineMap::translation(step.iter().map(|s| s * k as f64).collect())).collect())
            }
            MapsConfig::Diagonal { count } => {
                if n < 2 {
                    return Err(bad("diagonal maps need N ≥ 2"));
                }
                Ok((1..=*count)
                    .map(|k| {
                        let k = k as f64;
                        let rest = k.powf(-1.0 / (n as f64 - 1.0));
                        let mut m = Mat::identity(n).scale(rest);
                        m[(0, 0)] = k;
                        AffineMap::linear(m)
                    })
                    .collect())
            }
        }
    }
}

/// Identity, `diag(2, 1, …, 1/2)`, a unit shear, a rotation and one random
/// unimodular matrix.
pub fn default_transforms(n: usize, max_cond: f64, seed: u64) -> Vec<Mat> {
    let mut diag = Mat::identity(n);
    diag[(0, 0)] = 2.0;
    diag[(n - 1, n - 1)] = 0.5;
    let mut shear = Mat::identity(n);
    shear[(0, 1)] = 1.0;
    let (s, c) = (std::f64::consts::FRAC_PI_6.sin(), std::f64::consts::FRAC_PI_6.cos());
    let mut rot = Mat::identity(n);
    rot[(0, 0)] = c;
    rot[(0, 1)] = -s;
    rot[(1, 0)] = s;
    rot[(1, 1)] = c;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random = random_unimodular(n, max_cond.min(4.0), &mut rng);
    vec![Mat::identity(n), diag, shear, rot, random]
}
