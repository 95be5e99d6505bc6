//! Finite-sample diagnostics for profile decompositions: per-element SL(N)
//! normalization, greedy extraction of shifted and dyadically rescaled
//! profiles, and L^p mass accounting.
//!
//! Weak limits are replaced by the pointwise median of the pulled-back tail
//! elements; each extracted profile is subtracted from every element before
//! the next one is searched for.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::energy::{affine_energy, gram_matrix, normalizing_transform, omega_n};
use crate::error::{Error, Result};
use crate::field::stencil::lp_norm_pow;
use crate::field::{dyadic_rescale, resample, AffineMap, GridSpec, ScalarField, UnimodularTransform};
use crate::solvers::critical_exponent;

#[derive(Clone, Debug)]
pub struct NormalizedElement {
    /// `None` when the element was skipped as degenerate.
    pub transform: Option<UnimodularTransform>,
    pub field: Option<ScalarField>,
    pub degenerate: bool,
}

/// Node cap for the grids that hold `u_k ∘ T_k`.
pub const NORMALIZE_MAX_NODES: usize = 1 << 22;

/// `v_k = u_k ∘ T_k` with `T_k` the normalizing transform of `A[u_k]`, so
/// `‖∇v_k‖₂² = E₂(u_k)` up to resampling.
pub fn normalize_sequence(fields: &[ScalarField]) -> Result<Vec<NormalizedElement>> {
    fields
        .iter()
        .map(|u| {
            let a = gram_matrix(u);
            if a.is_degenerate() {
                return Ok(NormalizedElement { transform: None, field: None, degenerate: true });
            }
            let t = normalizing_transform(&a)?.composed;
            let v = if *t.matrix() == crate::linalg::Mat::identity(u.dim()) {
                u.unmasked()
            } else {
                let (lo, hi) = u.support_box(1e-10);
                let target = GridSpec::fitted(
                    &lo,
                    &hi,
                    t.matrix(),
                    t.translation(),
                    u.grid().min_spacing(),
                    NORMALIZE_MAX_NODES,
                )?;
                resample(u, t.map(), &target)?
            };
            Ok(NormalizedElement { transform: Some(t), field: Some(v), degenerate: false })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleClass {
    /// Bounded scales.
    Fixed,
    /// `j_k` increasing: concentration.
    Shrinking,
    /// `j_k` decreasing: spreading.
    Expanding,
}

impl ScaleClass {
    pub fn from_scales(scales: &[i32]) -> ScaleClass {
        match (scales.first(), scales.last()) {
            (Some(a), Some(b)) if b > a => ScaleClass::Shrinking,
            (Some(a), Some(b)) if b < a => ScaleClass::Expanding,
            _ => ScaleClass::Fixed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProfileItem {
    pub profile: ScalarField,
    /// Centre `y_k` per tail element, in the element's coordinates.
    pub shifts: Vec<Vec<f64>>,
    /// Dyadic level `j_k` per tail element.
    pub scales: Vec<i32>,
    /// `‖w‖_p^p`.
    pub mass: f64,
    pub grad_norm_sq: f64,
    pub scale_class: ScaleClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileOptions {
    pub max_profiles: usize,
    /// Stop once the residual mass is below this fraction of the total.
    pub threshold: f64,
    /// Number of trailing elements used.
    pub tail: usize,
    /// Largest `|j|`; `None` uses `log₂(max shape)/2`.
    pub max_level: Option<i32>,
    /// Half-maximum radius of a profile at level 0; `None` uses two cells.
    pub unit_width: Option<f64>,
    /// Half-width of the profile grid in units of `unit_width`.
    pub window: f64,
    /// Re-estimation sweeps over the extracted profiles.
    pub backfit_sweeps: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            max_profiles: 4,
            threshold: 0.01,
            tail: 5,
            max_level: None,
            unit_width: None,
            window: 2.5,
            backfit_sweeps: 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Extraction {
    pub items: Vec<ProfileItem>,
    /// Mean `‖r_k‖_p^p` over the tail after extraction.
    pub residual_mass: f64,
    /// Mean `‖u_k‖_p^p` over the tail.
    pub total_mass: f64,
    /// Residual mass after each accepted extraction, starting from the total.
    pub residual_history: Vec<f64>,
}

/// Peak node of `|r|` (lowest index on ties) and the connected set of
/// nodes around it where `|r|` is at least half the peak.
fn peak_and_halfmax(r: &ScalarField) -> Option<(usize, usize)> {
    let v = r.values();
    let (mut best, mut peak) = (0usize, 0.0f64);
    for (i, x) in v.iter().enumerate() {
        if x.abs() > peak {
            peak = x.abs();
            best = i;
        }
    }
    if peak == 0.0 {
        return None;
    }
    let g = r.grid();
    let strides = g.strides();
    let mut seen = vec![false; v.len()];
    let mut queue = VecDeque::from([best]);
    seen[best] = true;
    let mut count = 0;
    let sign = v[best].signum();
    while let Some(i) = queue.pop_front() {
        count += 1;
        for k in 0..g.dim() {
            let a = g.axis_index(i, k, strides[k]);
            let mut nb = Vec::with_capacity(2);
            if a > 0 {
                nb.push(i - strides[k]);
            }
            if a + 1 < g.shape()[k] {
                nb.push(i + strides[k]);
            }
            for j in nb {
                if !seen[j] && v[j] * sign >= 0.5 * peak {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    Some((best, count))
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len();
    if m % 2 == 1 {
        xs[m / 2]
    } else {
        0.5 * (xs[m / 2 - 1] + xs[m / 2])
    }
}

/// `x ↦ 2^{−(N−2)j/2} u(2^{−j} x + y)` on `target`.
fn pull_back(u: &ScalarField, j: i32, y: &[f64], target: &GridSpec) -> Result<ScalarField> {
    let s = 2f64.powi(-j);
    let n = u.dim();
    let map = AffineMap::new(crate::linalg::Mat::identity(n).scale(s), y.to_vec())?;
    let factor = 2f64.powf(-(n as f64 - 2.0) * j as f64 / 2.0);
    Ok(resample(&u.unmasked(), &map, target)?.scaled(factor))
}

struct Located {
    shifts: Vec<Vec<f64>>,
    scales: Vec<i32>,
}

struct Ctx<'a> {
    p: f64,
    critical: bool,
    max_level: i32,
    unit_width: f64,
    profile_grid: GridSpec,
    grids: Vec<&'a GridSpec>,
}

impl Ctx<'_> {
    fn locate(&self, residuals: &[ScalarField]) -> Option<Located> {
        let mut shifts = Vec::new();
        let mut scales = Vec::new();
        for r in residuals {
            let (peak, count) = peak_and_halfmax(r)?;
            let n = r.dim();
            let ball = omega_n(n) / n as f64;
            let radius = (count as f64 * r.grid().cell_volume() / ball).powf(1.0 / n as f64);
            let j = if self.critical {
                ((self.unit_width / radius).log2().round() as i32).clamp(-self.max_level, self.max_level)
            } else {
                0
            };
            shifts.push(r.grid().coords(peak));
            scales.push(j);
        }
        Some(Located { shifts, scales })
    }

    fn estimate(&self, residuals: &[ScalarField], loc: &Located) -> Result<ScalarField> {
        let pulled = residuals
            .iter()
            .zip(loc.scales.iter().zip(&loc.shifts))
            .map(|(r, (&j, y))| pull_back(r, j, y, &self.profile_grid))
            .collect::<Result<Vec<_>>>()?;
        let mut buf = vec![0.0; pulled.len()];
        let values = (0..self.profile_grid.len())
            .map(|i| {
                for (b, f) in buf.iter_mut().zip(&pulled) {
                    *b = f.values()[i];
                }
                median(&mut buf)
            })
            .collect();
        ScalarField::new(self.profile_grid.clone(), values)
    }

    /// Copies of `w` placed into each element's grid.
    fn place(&self, w: &ScalarField, loc: &Located) -> Result<Vec<ScalarField>> {
        self.grids
            .iter()
            .zip(loc.scales.iter().zip(&loc.shifts))
            .map(|(g, (&j, y))| dyadic_rescale(w, j, y, g).or_else(|_| Ok(ScalarField::zeros((*g).clone()))))
            .collect()
    }

    fn mass(&self, fields: &[ScalarField]) -> Result<f64> {
        let mut s = 0.0;
        for f in fields {
            s += lp_norm_pow(f, self.p)?;
        }
        Ok(s / fields.len() as f64)
    }
}

/// Largest `|w|` on the outer face of the profile grid, relative to the peak,
/// above which the half-maximum region is not resolved inside the window.
const EDGE_LIMIT: f64 = 0.5;

/// Whether `w` decays inside its window; spreading residuals do not.
fn localized(w: &ScalarField) -> bool {
    let g = w.grid();
    let peak = w.max_abs();
    let edge = (0..g.len()).filter(|&i| g.on_grid_edge(i)).map(|i| w.values()[i].abs()).fold(0.0, f64::max);
    peak > 0.0 && edge < EDGE_LIMIT * peak
}

fn subtract(a: &[ScalarField], b: &[ScalarField], sign: f64) -> Result<Vec<ScalarField>> {
    a.iter().zip(b).map(|(x, y)| x.add_scaled(y, -sign)).collect()
}

/// Greedy profile extraction on the last `opts.tail` elements.
///
/// Each round locates, per element, the peak of the residual and (for the
/// critical exponent only) the dyadic level matching its half-maximum
/// radius; the profile is the median of the recentred, rescaled residuals.
/// A round is kept only if the profile decays inside its window and lowers
/// the residual mass.
pub fn extract_profiles(fields: &[ScalarField], p: f64, opts: &ProfileOptions) -> Result<Extraction> {
    if !(opts.threshold > 0.0) {
        return Err(Error::InvalidArgument("threshold must be positive".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("exponent {p} below 1")));
    }
    if fields.is_empty() {
        return Ok(Extraction { items: Vec::new(), residual_mass: 0.0, total_mass: 0.0, residual_history: vec![0.0] });
    }
    let tail = &fields[fields.len().saturating_sub(opts.tail.max(1))..];
    let n = tail[0].dim();
    if tail.iter().any(|f| f.dim() != n) {
        return Err(Error::GridMismatch("elements of different dimension".into()));
    }
    let h = tail.iter().map(|f| f.grid().min_spacing()).fold(f64::INFINITY, f64::min);
    let unit_width = opts.unit_width.unwrap_or(2.0 * h);
    let max_shape = tail.iter().flat_map(|f| f.grid().shape().iter().copied()).max().unwrap_or(3);
    let max_level = opts.max_level.unwrap_or(((max_shape as f64).log2() / 2.0).floor() as i32);
    // odd node count so the profile centre is a node
    let m = (opts.window * unit_width / h).ceil().max(1.0) as usize;
    let profile_grid = GridSpec::new(vec![2 * m + 1; n], vec![h; n], vec![-(m as f64) * h; n])?;
    let ctx = Ctx {
        p,
        critical: (p - critical_exponent(n)).abs() <= 1e-12,
        max_level,
        unit_width,
        profile_grid,
        grids: tail.iter().map(|f| f.grid()).collect(),
    };
    let mut residuals: Vec<ScalarField> = tail.iter().map(|f| f.unmasked()).collect();
    let total = ctx.mass(&residuals)?;
    let mut current = total;
    let mut history = vec![total];
    // (profile, location, placed copies)
    let mut found: Vec<(ScalarField, Located, Vec<ScalarField>)> = Vec::new();
    while found.len() < opts.max_profiles && current > opts.threshold * total {
        let Some(loc) = ctx.locate(&residuals) else { break };
        let w = ctx.estimate(&residuals, &loc)?;
        if lp_norm_pow(&w, p)? <= opts.threshold * total || !localized(&w) {
            break;
        }
        let placed = ctx.place(&w, &loc)?;
        let next = subtract(&residuals, &placed, 1.0)?;
        let m = ctx.mass(&next)?;
        if !(m < current) {
            break;
        }
        residuals = next;
        current = m;
        found.push((w, loc, placed));
        // re-estimate each profile against the others
        for _ in 0..opts.backfit_sweeps {
            for idx in 0..found.len() {
                let with = subtract(&residuals, &found[idx].2, -1.0)?;
                let w = ctx.estimate(&with, &found[idx].1)?;
                if !localized(&w) {
                    continue;
                }
                let placed = ctx.place(&w, &found[idx].1)?;
                let next = subtract(&with, &placed, 1.0)?;
                let m = ctx.mass(&next)?;
                if m < current {
                    residuals = next;
                    current = m;
                    found[idx].0 = w;
                    found[idx].2 = placed;
                }
            }
        }
        history.push(current);
    }
    let mut items = found
        .into_iter()
        .map(|(w, loc, _)| {
            Ok(ProfileItem {
                mass: lp_norm_pow(&w, p)?,
                grad_norm_sq: gram_matrix(&w).trace(),
                scale_class: ScaleClass::from_scales(&loc.scales),
                profile: w,
                shifts: loc.shifts,
                scales: loc.scales,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    items.sort_by(|a, b| b.mass.total_cmp(&a.mass));
    Ok(Extraction { items, residual_mass: current, total_mass: total, residual_history: history })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    pub masses: Vec<f64>,
    pub total: f64,
    pub deficit: f64,
    /// `Σ ‖∇w^{(n)}‖₂²`.
    pub gradient_sum: f64,
    /// `max_k E₂(u_k)`.
    pub max_energy: f64,
}

/// Tolerance on `‖u_k‖_p = 1` for mass accounting.
pub const NORMALIZATION_TOL: f64 = 1e-6;

pub fn brezis_lieb_masses(items: &[ProfileItem], fields: &[ScalarField], p: f64) -> Result<MassReport> {
    let mut max_energy: f64 = 0.0;
    for (k, u) in fields.iter().enumerate() {
        let norm = lp_norm_pow(u, p)?.powf(1.0 / p);
        if (norm - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Precondition(format!("element {k} has ‖u‖_p = {norm}, expected 1")));
        }
        max_energy = max_energy.max(affine_energy(&gram_matrix(u))?);
    }
    let masses: Vec<f64> = items.iter().map(|i| i.mass).collect();
    let total: f64 = masses.iter().sum();
    Ok(MassReport {
        deficit: 1.0 - total,
        gradient_sum: items.iter().map(|i| i.grad_norm_sq).sum(),
        masses,
        total,
        max_energy,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileReportItem {
    pub index: usize,
    pub mass: f64,
    pub scale_class: ScaleClass,
    pub shifts: Vec<Vec<f64>>,
    pub scales: Vec<i32>,
    pub grad_norm_sq: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileReport {
    pub items: Vec<ProfileReportItem>,
    pub residual_mass: f64,
    pub total_mass: f64,
}

impl From<&Extraction> for ProfileReport {
    fn from(e: &Extraction) -> Self {
        ProfileReport {
            items: e
                .items
                .iter()
                .enumerate()
                .map(|(index, it)| ProfileReportItem {
                    index,
                    mass: it.mass,
                    scale_class: it.scale_class,
                    shifts: it.shifts.clone(),
                    scales: it.scales.clone(),
                    grad_norm_sq: it.grad_norm_sq,
                })
                .collect(),
            residual_mass: e.residual_mass,
            total_mass: e.total_mass,
        }
    }
}
