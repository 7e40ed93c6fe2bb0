//! Scene-to-sensor transfer matrices from physical geometry.
//!
//! A far-field source at angle theta casts a shadow of the mask onto the
//! sensor, shifted by d * tan(theta). Each sensor pixel accepts light only
//! from directions within +/- theta_CRA of its normal, so the scene is
//! sampled on N directions uniform in tan(theta) over that field of view.
//! The shadow of a single open feature is the convolution of a box of width
//! Delta (the feature footprint) with a box of width 2.44 lambda d / Delta
//! (diffraction), so the mask transmittance profile is blurred by the
//! diffraction box and averaged over each pixel's extent.

use crate::error::{Error, Result};
use crate::recon::SeparableSystem;
use crate::seq::MaskPattern;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Physical parameters of the mask-sensor geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsConfig {
    /// Mask-to-sensor spacing in micrometers.
    pub d_um: f64,
    /// Mask feature size Delta in micrometers.
    pub delta_um: f64,
    /// Sensor pixel pitch in micrometers.
    pub pixel_um: f64,
    /// Chief ray angle in degrees; pixels accept light within +/- this angle.
    pub cra_deg: f64,
    /// Wavelength in micrometers.
    pub lambda_um: f64,
    /// Scene samples per axis (N).
    pub n_scene: usize,
    /// Sensor pixels per axis (M).
    pub m_sensor: usize,
}

impl OpticsConfig {
    pub fn new(
        d_um: f64,
        delta_um: f64,
        pixel_um: f64,
        cra_deg: f64,
        lambda_um: f64,
        n_scene: usize,
        m_sensor: usize,
    ) -> Result<Self> {
        let cfg = Self {
            d_um,
            delta_um,
            pixel_um,
            cra_deg,
            lambda_um,
            n_scene,
            m_sensor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_um", self.d_um),
            ("delta_um", self.delta_um),
            ("pixel_um", self.pixel_um),
            ("lambda_um", self.lambda_um),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.cra_deg > 0.0 && self.cra_deg < 90.0) {
            return Err(Error::Validation(format!(
                "cra_deg must lie in (0, 90), got {}",
                self.cra_deg
            )));
        }
        if self.n_scene == 0 || self.m_sensor == 0 {
            return Err(Error::Validation(
                "n_scene and m_sensor must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn tan_cra(&self) -> f64 {
        self.cra_deg.to_radians().tan()
    }

    /// Scene directions sampled uniformly in tan(theta), cell-centered over
    /// [-tan theta_CRA, +tan theta_CRA].
    pub fn scene_tangents(&self) -> Vec<f64> {
        let t = self.tan_cra();
        let n = self.n_scene as f64;
        (0..self.n_scene)
            .map(|j| t * (2.0 * j as f64 + 1.0 - n) / n)
            .collect()
    }

    /// Pixel center positions, centered on the optical axis.
    pub fn pixel_centers(&self) -> Vec<f64> {
        let m = self.m_sensor as f64;
        (0..self.m_sensor)
            .map(|i| (i as f64 - (m - 1.0) / 2.0) * self.pixel_um)
            .collect()
    }
}

/// Width of the mask window seen by one pixel: w = 2 d tan(theta_CRA).
pub fn pixel_window_width(cfg: &OpticsConfig) -> f64 {
    2.0 * cfg.d_um * cfg.tan_cra()
}

/// Spacing that puts exactly `n_scene` mask features inside each pixel's
/// window: d = N Delta / (2 tan theta_CRA).
pub fn ideal_spacing(n_scene: usize, delta_um: f64, cra_deg: f64) -> f64 {
    n_scene as f64 * delta_um / (2.0 * cra_deg.to_radians().tan())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlurSizes {
    pub diffraction_um: f64,
    pub geometric_um: f64,
    pub optimal_delta_um: f64,
}

/// Diffraction blur 2.44 lambda d / Delta, geometric blur Delta, and the
/// feature size that balances them.
pub fn blur_sizes(cfg: &OpticsConfig) -> BlurSizes {
    BlurSizes {
        diffraction_um: 2.44 * cfg.lambda_um * cfg.d_um / cfg.delta_um,
        geometric_um: cfg.delta_um,
        optimal_delta_um: (2.44 * cfg.lambda_um * cfg.d_um).sqrt(),
    }
}

/// Total support of the single-feature point-spread function (box * box).
pub fn psf_support_width(cfg: &OpticsConfig) -> f64 {
    let b = blur_sizes(cfg);
    b.geometric_um + b.diffraction_um
}

/// Knobs for the transfer-matrix quadrature.
#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Profile grid refinement relative to min(Delta, pixel pitch).
    pub supersample: u32,
    /// Apply the diffraction box blur. Disabling it yields the pure
    /// geometric shadow used by the cyclic-shift idealization.
    pub blur: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            supersample: 8,
            blur: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferAxis {
    Left,
    Right,
}

/// A 1-D transfer matrix: rows index sensor pixels, columns index scene
/// directions.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    entries: Array2<f64>,
    axis: TransferAxis,
}

impl TransferMatrix {
    pub fn from_entries(entries: Array2<f64>, axis: TransferAxis) -> Self {
        Self { entries, axis }
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<f64> {
        self.entries
    }

    pub fn axis(&self) -> TransferAxis {
        self.axis
    }

    pub fn with_axis(mut self, axis: TransferAxis) -> Self {
        self.axis = axis;
        self
    }

    pub fn dim(&self) -> (usize, usize) {
        self.entries.dim()
    }
}

/// Exact running integrals of a cell-quantized transmittance profile.
///
/// `prefix[k]` is the integral of the profile from the grid origin to node k,
/// and `prefix2[k]` integrates the piecewise-linear interpolant of `prefix`.
/// Box means and box-of-box means then come out of interpolated differences.
struct LineProfile {
    u0: f64,
    h: f64,
    prefix: Vec<f64>,
    prefix2: Vec<f64>,
}

impl LineProfile {
    /// Profile from exact cell means `cells` on a grid starting at `u0`.
    fn from_cells(u0: f64, h: f64, cells: &[f64]) -> Self {
        let k = cells.len();
        let mut prefix = Vec::with_capacity(k + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &c in cells {
            acc += c * h;
            prefix.push(acc);
        }
        let mut prefix2 = Vec::with_capacity(k + 1);
        prefix2.push(0.0);
        let mut acc2 = 0.0;
        for i in 0..k {
            acc2 += 0.5 * h * (prefix[i] + prefix[i + 1]);
            prefix2.push(acc2);
        }
        Self {
            u0,
            h,
            prefix,
            prefix2,
        }
    }

    fn cell_count(&self) -> usize {
        self.prefix.len() - 1
    }

    /// Integral of the profile from the origin to x (linear interpolation
    /// between exact nodes; x is clamped to the grid).
    fn integral(&self, x: f64) -> f64 {
        let k = self.cell_count();
        let t = (x - self.u0) / self.h;
        if t <= 0.0 {
            return 0.0;
        }
        if t >= k as f64 {
            return self.prefix[k];
        }
        let i = t.floor() as usize;
        let frac = t - i as f64;
        self.prefix[i] + frac * (self.prefix[i + 1] - self.prefix[i])
    }

    /// Integral of `integral` from the origin to x (quadratic within a cell).
    fn integral2(&self, x: f64) -> f64 {
        let k = self.cell_count();
        let t = (x - self.u0) / self.h;
        if t <= 0.0 {
            return 0.0;
        }
        if t >= k as f64 {
            // Profile is zero beyond the grid; integral grows linearly.
            let extra = (t - k as f64) * self.h;
            return self.prefix2[k] + self.prefix[k] * extra;
        }
        let i = t.floor() as usize;
        let xi = (t - i as f64) * self.h;
        let slope = (self.prefix[i + 1] - self.prefix[i]) / self.h;
        self.prefix2[i] + self.prefix[i] * xi + 0.5 * slope * xi * xi
    }

    /// Mean of the profile over a box of width `w` centered at `x`.
    fn box_mean(&self, x: f64, w: f64) -> f64 {
        (self.integral(x + 0.5 * w) - self.integral(x - 0.5 * w)) / w
    }

    /// Mean over a box of width `w_outer` of the mean over a box of width
    /// `w_inner`, centered at `x`.
    fn double_box_mean(&self, x: f64, w_outer: f64, w_inner: f64) -> f64 {
        let a = x - 0.5 * w_outer;
        let b = x + 0.5 * w_outer;
        let beta = 0.5 * w_inner;
        let num = self.integral2(b + beta) - self.integral2(a + beta) - self.integral2(b - beta)
            + self.integral2(a - beta);
        num / (w_inner * w_outer)
    }
}

/// Per-cell overlap of a fine grid against a feature grid of pitch `delta`
/// starting at `lo`. With cell width <= delta a cell touches at most two
/// features.
struct CellOverlap {
    /// (first feature index, weight of first, weight of second) per cell;
    /// weights sum to the cell width.
    spans: Vec<(usize, f64, f64)>,
}

fn cell_overlaps(u0: f64, h: f64, cells: usize, mask_lo: f64, delta: f64, n_feat: usize) -> CellOverlap {
    let mut spans = Vec::with_capacity(cells);
    for k in 0..cells {
        let a = u0 + k as f64 * h;
        let b = a + h;
        let fa = ((a - mask_lo) / delta).floor();
        let idx = fa.max(0.0) as usize;
        let idx = idx.min(n_feat.saturating_sub(1));
        let edge = mask_lo + (idx as f64 + 1.0) * delta;
        if b <= edge || idx + 1 >= n_feat {
            spans.push((idx, b - a, 0.0));
        } else {
            spans.push((idx, edge - a, b - edge));
        }
    }
    CellOverlap { spans }
}

/// Exact cell means of a piecewise-constant 1-D pattern.
fn pattern_cell_means(
    pattern: &[f64],
    delta: f64,
    mask_lo: f64,
    u0: f64,
    h: f64,
    cells: usize,
) -> Vec<f64> {
    let ov = cell_overlaps(u0, h, cells, mask_lo, delta, pattern.len());
    ov.spans
        .iter()
        .map(|&(idx, w0, w1)| {
            let second = if idx + 1 < pattern.len() {
                pattern[idx + 1]
            } else {
                0.0
            };
            (pattern[idx] * w0 + second * w1) / h
        })
        .collect()
}

struct Geometry {
    pixels: Vec<f64>,
    shifts: Vec<f64>,
    lo: f64,
    h: f64,
    cells: usize,
    blur_um: f64,
}

/// Mask coordinate range the model evaluates: sensor extent plus the angular
/// window plus half a pixel and half the blur width on each side.
fn needed_range(cfg: &OpticsConfig, blur_um: f64) -> (f64, f64) {
    let pixels = cfg.pixel_centers();
    let shifts: Vec<f64> = cfg.scene_tangents().iter().map(|t| cfg.d_um * t).collect();
    let margin = 0.5 * cfg.pixel_um + 0.5 * blur_um;
    let lo = pixels[0] + shifts[0] - margin;
    let hi = pixels[pixels.len() - 1] + shifts[shifts.len() - 1] + margin;
    (lo, hi)
}

/// Smallest pattern length (in features) that covers the field of view of
/// this configuration, including blur margins when enabled.
pub fn required_pattern_len(cfg: &OpticsConfig, opts: &BuildOptions) -> Result<usize> {
    cfg.validate()?;
    let blur_um = if opts.blur {
        blur_sizes(cfg).diffraction_um
    } else {
        0.0
    };
    let (lo, hi) = needed_range(cfg, blur_um);
    let extent = 2.0 * hi.abs().max(lo.abs());
    Ok((extent / cfg.delta_um).ceil() as usize + 1)
}

fn geometry(cfg: &OpticsConfig, opts: &BuildOptions, mask_extent_um: f64) -> Result<Geometry> {
    cfg.validate()?;
    if opts.supersample == 0 {
        return Err(Error::BadSampling("supersample factor must be >= 1".into()));
    }
    let blur_um = if opts.blur {
        blur_sizes(cfg).diffraction_um
    } else {
        0.0
    };
    let pixels = cfg.pixel_centers();
    let shifts: Vec<f64> = cfg.scene_tangents().iter().map(|t| cfg.d_um * t).collect();
    let (lo, hi) = needed_range(cfg, blur_um);
    let mask_lo = -0.5 * mask_extent_um;
    let mask_hi = 0.5 * mask_extent_um;
    if lo < mask_lo - 1e-9 || hi > mask_hi + 1e-9 {
        return Err(Error::OutOfFieldOfView {
            needed_lo: lo,
            needed_hi: hi,
            mask_lo,
            mask_hi,
        });
    }
    let h = cfg.delta_um.min(cfg.pixel_um) / f64::from(opts.supersample);
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::BadSampling(format!("grid step {h} is degenerate")));
    }
    let cells = ((hi - lo) / h).ceil() as usize;
    if cells == 0 || cells > 50_000_000 {
        return Err(Error::BadSampling(format!(
            "grid of {cells} cells is out of range"
        )));
    }
    Ok(Geometry {
        pixels,
        shifts,
        lo,
        h,
        cells,
        blur_um,
    })
}

/// Build the M x N transfer matrix of a 1-D mask pattern.
///
/// Entry (i, j) is the diffraction-blurred mask transmittance around position
/// p_i + d tan(theta_j), averaged over the extent of pixel i. The pattern is
/// centered on the optical axis with one value per feature of width Delta;
/// it must cover every shifted window or `OutOfFieldOfView` is returned.
pub fn build_1d_transfer(pattern: &[f64], cfg: &OpticsConfig) -> Result<TransferMatrix> {
    build_1d_transfer_with(pattern, cfg, &BuildOptions::default())
}

pub fn build_1d_transfer_with(
    pattern: &[f64],
    cfg: &OpticsConfig,
    opts: &BuildOptions,
) -> Result<TransferMatrix> {
    if pattern.is_empty() {
        return Err(Error::Validation("mask pattern is empty".into()));
    }
    let extent = pattern.len() as f64 * cfg.delta_um;
    let geo = geometry(cfg, opts, extent)?;
    let means = pattern_cell_means(
        pattern,
        cfg.delta_um,
        -0.5 * extent,
        geo.lo,
        geo.h,
        geo.cells,
    );
    let profile = LineProfile::from_cells(geo.lo, geo.h, &means);
    let mut entries = Array2::zeros((cfg.m_sensor, cfg.n_scene));
    for (i, &p) in geo.pixels.iter().enumerate() {
        for (j, &s) in geo.shifts.iter().enumerate() {
            let x = p + s;
            entries[[i, j]] = if geo.blur_um > 0.0 {
                profile.double_box_mean(x, cfg.pixel_um, geo.blur_um)
            } else {
                profile.box_mean(x, cfg.pixel_um)
            };
        }
    }
    Ok(TransferMatrix {
        entries,
        axis: TransferAxis::Left,
    })
}

/// Build the separable system Y = Phi_L X Phi_R^T.
///
/// `row_pattern` is the mask factor that varies along the scene's row index
/// (it becomes Phi_L, which mixes the rows of X); `col_pattern` becomes
/// Phi_R. With column-major vectorization the dense equivalent is
/// kron(Phi_R, Phi_L).
pub fn build_separable_system(
    row_pattern: &[f64],
    col_pattern: &[f64],
    cfg: &OpticsConfig,
) -> Result<SeparableSystem> {
    build_separable_system_with(row_pattern, col_pattern, cfg, &BuildOptions::default())
}

pub fn build_separable_system_with(
    row_pattern: &[f64],
    col_pattern: &[f64],
    cfg: &OpticsConfig,
    opts: &BuildOptions,
) -> Result<SeparableSystem> {
    let phi_l = build_1d_transfer_with(row_pattern, cfg, opts)?;
    let phi_r =
        build_1d_transfer_with(col_pattern, cfg, opts)?.with_axis(TransferAxis::Right);
    SeparableSystem::new(phi_l, phi_r)
}

/// Dense M^2 x N^2 transfer matrix of a 2-D (possibly non-separable) mask.
#[derive(Debug, Clone)]
pub struct DenseSystem {
    phi: Array2<f64>,
    n_scene: usize,
    m_sensor: usize,
}

impl DenseSystem {
    pub fn phi(&self) -> &Array2<f64> {
        &self.phi
    }

    pub fn n_scene(&self) -> usize {
        self.n_scene
    }

    pub fn m_sensor(&self) -> usize {
        self.m_sensor
    }
}

const DENSE_LIMIT: usize = 128;

/// Build the dense transfer matrix column by column: column (r + N c) holds
/// the vectorized (column-major) sensor image of a unit point source at scene
/// location (r, c), under the same shadow/blur model as [`build_1d_transfer`].
pub fn build_dense_transfer(mask: &MaskPattern, cfg: &OpticsConfig) -> Result<DenseSystem> {
    build_dense_transfer_with(mask, cfg, &BuildOptions::default())
}

pub fn build_dense_transfer_with(
    mask: &MaskPattern,
    cfg: &OpticsConfig,
    opts: &BuildOptions,
) -> Result<DenseSystem> {
    let n = cfg.n_scene;
    let m = cfg.m_sensor;
    if n > DENSE_LIMIT || m > DENSE_LIMIT {
        return Err(Error::TooLarge {
            n,
            m,
            limit: DENSE_LIMIT,
        });
    }
    let t = mask.transmittance();
    let (rows, cols) = t.dim();
    let extent_u = rows as f64 * cfg.delta_um;
    let extent_v = cols as f64 * cfg.delta_um;
    // The row (u) axis maps to sensor rows i1 / scene rows r; both axes share
    // the same pixel and angle grids.
    let geo_u = geometry(cfg, opts, extent_u)?;
    let geo_v = geometry(cfg, opts, extent_v)?;

    let ov_u = cell_overlaps(geo_u.lo, geo_u.h, geo_u.cells, -0.5 * extent_u, cfg.delta_um, rows);
    let ov_v = cell_overlaps(geo_v.lo, geo_v.h, geo_v.cells, -0.5 * extent_v, cfg.delta_um, cols);
    let h2 = geo_u.h * geo_v.h;

    // Pass 1: apply the u-axis operator at every (pixel row, scene row) pair
    // for each v grid cell.
    let pairs = m * n;
    let mut partial = Array2::zeros((pairs, geo_v.cells));
    let mut column = vec![0.0; geo_u.cells];
    for kv in 0..geo_v.cells {
        let (jv, wv0, wv1) = ov_v.spans[kv];
        for (ku, cell) in column.iter_mut().enumerate() {
            let (iu, wu0, wu1) = ov_u.spans[ku];
            let mut acc = t[[iu, jv]] * wu0 * wv0;
            if wu1 > 0.0 {
                acc += t[[iu + 1, jv]] * wu1 * wv0;
            }
            if wv1 > 0.0 {
                acc += t[[iu, jv + 1]] * wu0 * wv1;
                if wu1 > 0.0 {
                    acc += t[[iu + 1, jv + 1]] * wu1 * wv1;
                }
            }
            *cell = acc / h2;
        }
        let profile = LineProfile::from_cells(geo_u.lo, geo_u.h, &column);
        for (i1, &p) in geo_u.pixels.iter().enumerate() {
            for (r, &s) in geo_u.shifts.iter().enumerate() {
                let x = p + s;
                let v = if geo_u.blur_um > 0.0 {
                    profile.double_box_mean(x, cfg.pixel_um, geo_u.blur_um)
                } else {
                    profile.box_mean(x, cfg.pixel_um)
                };
                partial[[i1 * n + r, kv]] = v;
            }
        }
    }

    // Pass 2: apply the v-axis operator along each partial row.
    let mut phi = Array2::zeros((m * m, n * n));
    for i1 in 0..m {
        for r in 0..n {
            let row = partial.row(i1 * n + r);
            let profile = LineProfile::from_cells(geo_v.lo, geo_v.h, row.as_slice().unwrap());
            for (i2, &q) in geo_v.pixels.iter().enumerate() {
                for (c, &s) in geo_v.shifts.iter().enumerate() {
                    let x = q + s;
                    let v = if geo_v.blur_um > 0.0 {
                        profile.double_box_mean(x, cfg.pixel_um, geo_v.blur_um)
                    } else {
                        profile.box_mean(x, cfg.pixel_um)
                    };
                    phi[[i1 + m * i2, r + n * c]] = v;
                }
            }
        }
    }
    Ok(DenseSystem {
        phi,
        n_scene: n,
        m_sensor: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, max_abs_diff, relative_frobenius_diff};
    use crate::seq::{gen_m_sequence_default, outer_mask, tile_pattern, to_optical};

    fn toy_config(n: usize, m: usize) -> OpticsConfig {
        OpticsConfig::new(500.0, 30.0, 30.0, 45.0, 0.55, n, m).unwrap()
    }

    #[test]
    fn window_width_formula() {
        let cfg = toy_config(8, 8);
        assert!((pixel_window_width(&cfg) - 1000.0).abs() < 1e-9);
        let far = OpticsConfig { d_um: 5000.0, ..cfg.clone() };
        assert!((pixel_window_width(&far) - 10_000.0).abs() < 1e-9);
        let double = OpticsConfig { d_um: 1000.0, ..cfg };
        assert!((pixel_window_width(&double) - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn ideal_spacing_formula() {
        assert!((ideal_spacing(255, 30.0, 45.0) - 3825.0).abs() < 1e-9);
        assert!((ideal_spacing(2, 1.0, 45.0) - 1.0).abs() < 1e-12);
        // window width at the ideal spacing equals N * Delta
        let d = ideal_spacing(64, 30.0, 45.0);
        let cfg = OpticsConfig::new(d, 30.0, 30.0, 45.0, 0.55, 64, 64).unwrap();
        assert!((pixel_window_width(&cfg) - 64.0 * 30.0).abs() < 1e-9);
    }

    #[test]
    fn blur_size_formulas() {
        let cfg = toy_config(8, 8);
        let b = blur_sizes(&cfg);
        assert!((b.diffraction_um - 2.44 * 0.55 * 500.0 / 30.0).abs() < 1e-9);
        assert!((b.diffraction_um - 22.366_666).abs() < 1e-3);
        assert!((b.geometric_um - 30.0).abs() < 1e-12);
        assert!((b.optimal_delta_um - 671.0f64.sqrt()).abs() < 1e-9);
        // within 20% of the 30 um prototype choice
        assert!((b.optimal_delta_um - 30.0).abs() / 30.0 < 0.2);
        // at the optimum both blurs agree
        let opt = OpticsConfig { delta_um: b.optimal_delta_um, ..cfg };
        let ob = blur_sizes(&opt);
        assert!((ob.diffraction_um - ob.geometric_um).abs() < 1e-9);
    }

    #[test]
    fn psf_support_unimodal_at_optimum() {
        let cfg = toy_config(8, 8);
        let opt = blur_sizes(&cfg).optimal_delta_um;
        let at = |delta: f64| psf_support_width(&OpticsConfig { delta_um: delta, ..cfg.clone() });
        let w0 = at(opt);
        for f in [1.2, 1.5, 2.0] {
            assert!(at(opt * f) > w0);
            assert!(at(opt / f) > w0);
        }
        // monotone on each side
        assert!(at(opt * 2.0) > at(opt * 1.5));
        assert!(at(opt / 2.0) > at(opt / 1.5));
    }

    #[test]
    fn flat_pattern_gives_flat_field() {
        let cfg = toy_config(8, 8);
        let pattern = vec![1.0; 80];
        let t = build_1d_transfer(&pattern, &cfg).unwrap();
        for v in t.entries() {
            assert!((v - 1.0).abs() < 1e-12, "entry {v}");
        }
    }

    #[test]
    fn zero_pattern_gives_zero_matrix() {
        let cfg = toy_config(8, 8);
        let t = build_1d_transfer(&vec![0.0; 80], &cfg).unwrap();
        assert!(t.entries().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn optical_patterns_give_nonnegative_entries() {
        let cfg = toy_config(16, 16);
        let seq = gen_m_sequence_default(5).unwrap();
        let pattern = tile_pattern(&seq.as_optical(), 3);
        let t = build_1d_transfer(&pattern, &cfg).unwrap();
        assert!(t.entries().iter().all(|&v| v >= 0.0));
        assert!(t.entries().iter().any(|&v| v > 0.0));
    }

    #[test]
    fn short_pattern_out_of_field_of_view() {
        let cfg = toy_config(16, 16);
        let err = build_1d_transfer(&vec![1.0; 10], &cfg).unwrap_err();
        assert!(matches!(err, Error::OutOfFieldOfView { .. }));
    }

    #[test]
    fn zero_supersample_is_bad_sampling() {
        let cfg = toy_config(8, 8);
        let opts = BuildOptions { supersample: 0, blur: true };
        assert!(matches!(
            build_1d_transfer_with(&vec![1.0; 80], &cfg, &opts),
            Err(Error::BadSampling(_))
        ));
    }

    /// Independent quadrature oracle: plain midpoint sums over the pixel
    /// extent and the diffraction box, sampling the raw pattern pointwise.
    fn oracle_entry(
        pattern: &[f64],
        cfg: &OpticsConfig,
        x: f64,
        blur_um: f64,
        refine: usize,
    ) -> f64 {
        let mask_lo = -0.5 * pattern.len() as f64 * cfg.delta_um;
        let lookup = |u: f64| -> f64 {
            let idx = ((u - mask_lo) / cfg.delta_um).floor();
            if idx < 0.0 || idx >= pattern.len() as f64 {
                0.0
            } else {
                pattern[idx as usize]
            }
        };
        let step = cfg.delta_um.min(cfg.pixel_um) / refine as f64;
        let np = (cfg.pixel_um / step).ceil() as usize;
        let nb = if blur_um > 0.0 {
            (blur_um / step).ceil() as usize
        } else {
            1
        };
        let mut acc = 0.0;
        for ip in 0..np {
            let p = -0.5 * cfg.pixel_um + (ip as f64 + 0.5) * cfg.pixel_um / np as f64;
            for ib in 0..nb {
                let b = if blur_um > 0.0 {
                    -0.5 * blur_um + (ib as f64 + 0.5) * blur_um / nb as f64
                } else {
                    0.0
                };
                acc += lookup(x + p + b);
            }
        }
        acc / (np * nb) as f64
    }

    #[test]
    fn matches_brute_force_quadrature_oracle() {
        let cfg = toy_config(8, 8);
        let seq = gen_m_sequence_default(5).unwrap();
        let pattern = tile_pattern(&seq.as_optical(), 3);
        let t = build_1d_transfer(&pattern, &cfg).unwrap();
        let blur = blur_sizes(&cfg).diffraction_um;
        let pixels = cfg.pixel_centers();
        let shifts: Vec<f64> = cfg.scene_tangents().iter().map(|t| cfg.d_um * t).collect();
        let mut oracle = Array2::zeros((8, 8));
        for i in 0..8 {
            for j in 0..8 {
                oracle[[i, j]] = oracle_entry(&pattern, &cfg, pixels[i] + shifts[j], blur, 64);
            }
        }
        let rel = relative_frobenius_diff(&t.entries().view(), &oracle.view());
        assert!(rel <= 1e-3, "relative error {rel}");
    }

    #[test]
    fn cyclic_shift_structure_at_ideal_spacing() {
        // periodic pattern, pitch = Delta, d = N Delta / (2 tan cra), no blur
        let n = 31;
        let seq = gen_m_sequence_default(5).unwrap();
        let pattern = tile_pattern(&seq.as_signed(), 2);
        let d = ideal_spacing(n, 30.0, 45.0);
        let cfg = OpticsConfig::new(d, 30.0, 30.0, 45.0, 0.55, n, n).unwrap();
        let opts = BuildOptions { supersample: 8, blur: false };
        let t = build_1d_transfer_with(&pattern, &cfg, &opts).unwrap();
        let e = t.entries();
        for i in 0..n - 1 {
            for j in 0..n {
                let wrapped = (j + 1) % n;
                let expect = e[[i, wrapped]];
                assert!(
                    (e[[i + 1, j]] - expect).abs() < 1e-12,
                    "row {i} col {j}: {} vs {}",
                    e[[i + 1, j]],
                    expect
                );
            }
        }
    }

    #[test]
    fn dense_of_separable_mask_equals_kron_of_factors() {
        let cfg = toy_config(8, 8);
        let a = gen_m_sequence_default(3).unwrap().tiled(2);
        let b = crate::seq::gen_random_binary(6, 0.5, 11).unwrap().tiled(2);
        // pad to cover the field of view
        let row = tile_pattern(&a.as_signed(), 14);
        let col = tile_pattern(&b.as_signed(), 14);
        let mask = MaskPattern::new(
            Array2::from_shape_fn((row.len(), col.len()), |(i, j)| row[i] * col[j]),
            crate::seq::MaskForm::Signed,
        );
        let dense = build_dense_transfer(&mask, &cfg).unwrap();
        let sys = build_separable_system(&row, &col, &cfg).unwrap();
        let k = kron(
            &sys.phi_r().entries().view(),
            &sys.phi_l().entries().view(),
        );
        let rel = relative_frobenius_diff(dense.phi(), &k.view());
        assert!(rel <= 1e-10, "relative error {rel}");
    }

    #[test]
    fn dense_zero_mask_is_zero() {
        let cfg = toy_config(4, 4);
        let mask = MaskPattern::new(Array2::zeros((80, 80)), crate::seq::MaskForm::Optical);
        let dense = build_dense_transfer(&mask, &cfg).unwrap();
        assert!(dense.phi().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dense_guard_rejects_large_scenes() {
        let cfg = OpticsConfig::new(500.0, 30.0, 30.0, 45.0, 0.55, 129, 129).unwrap();
        let mask = MaskPattern::new(Array2::zeros((300, 300)), crate::seq::MaskForm::Optical);
        assert!(matches!(
            build_dense_transfer(&mask, &cfg),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn identical_patterns_give_equal_factors() {
        let cfg = toy_config(8, 8);
        let seq = gen_m_sequence_default(4).unwrap();
        let pattern = tile_pattern(&seq.as_optical(), 6);
        let sys = build_separable_system(&pattern, &pattern, &cfg).unwrap();
        assert!(
            max_abs_diff(
                &sys.phi_l().entries().view(),
                &sys.phi_r().entries().view()
            ) == 0.0
        );
    }

    #[test]
    fn dense_nonnegative_for_optical_masks() {
        let cfg = toy_config(8, 8);
        let seq = gen_m_sequence_default(3).unwrap();
        let mask = to_optical(&outer_mask(&seq, &seq, 14)).unwrap();
        let dense = build_dense_transfer(&mask, &cfg).unwrap();
        assert!(dense.phi().iter().all(|&v| v >= -1e-15));
    }
}
