//! Sensor capture simulation and the row/column mean correction that maps
//! binary-mask measurements onto the signed separable model.

use crate::error::{Error, Result};
use crate::linalg::{singular_values, unvec_col_major, vec_col_major};
use crate::optics::DenseSystem;
use crate::recon::SeparableSystem;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Scene radiance on an N x N grid. Physical scenes are nonnegative; signed
/// values are allowed for calibration difference patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneImage {
    values: Array2<f64>,
}

impl SceneImage {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("scene contains non-finite values".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn side(&self) -> usize {
        self.values.nrows()
    }
}

/// An M x M sensor measurement. `corrected` records whether row/column means
/// have been removed.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorImage {
    values: Array2<f64>,
    corrected: bool,
}

impl SensorImage {
    pub fn raw(values: Array2<f64>) -> Self {
        Self {
            values,
            corrected: false,
        }
    }

    pub fn corrected(values: Array2<f64>) -> Self {
        Self {
            values,
            corrected: true,
        }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn is_corrected(&self) -> bool {
        self.corrected
    }

    pub fn side(&self) -> usize {
        self.values.nrows()
    }
}

fn gaussian_noise(shape: (usize, usize), sigma: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma validated by caller");
    Array2::from_shape_fn(shape, |_| normal.sample(&mut rng))
}

fn check_capture_dims(system: &SeparableSystem, scene: &SceneImage) -> Result<()> {
    let n = system.n_scene();
    if scene.values().dim() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "scene is {:?}, system expects ({n}, {n})",
            scene.values().dim()
        )));
    }
    Ok(())
}

fn check_sigma(noise_sigma: f64) -> Result<()> {
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::Validation(format!(
            "noise sigma must be finite and nonnegative, got {noise_sigma}"
        )));
    }
    Ok(())
}

/// Y = Phi_L X Phi_R^T + E with E i.i.d. Gaussian(0, sigma^2), deterministic
/// for a fixed seed. Output is uncorrected.
pub fn capture(
    system: &SeparableSystem,
    scene: &SceneImage,
    noise_sigma: f64,
    rng_seed: u64,
) -> Result<SensorImage> {
    check_capture_dims(system, scene)?;
    check_sigma(noise_sigma)?;
    let mut y = system.forward(&scene.values().view())?;
    if noise_sigma > 0.0 {
        y += &gaussian_noise(y.dim(), noise_sigma, rng_seed);
    }
    Ok(SensorImage::raw(y))
}

/// Average of `frames` exposures: the same signal with noise variance divided
/// by the frame count.
pub fn capture_frames(
    system: &SeparableSystem,
    scene: &SceneImage,
    noise_sigma: f64,
    frames: usize,
    rng_seed: u64,
) -> Result<SensorImage> {
    if frames == 0 {
        return Err(Error::Validation("frame count must be positive".into()));
    }
    check_sigma(noise_sigma)?;
    let effective = noise_sigma / (frames as f64).sqrt();
    capture(system, scene, effective, rng_seed)
}

/// Dense-model capture: y = Phi vec(X) + e, reshaped to M x M (column-major
/// vectorization on both sides).
pub fn capture_dense(
    dense: &DenseSystem,
    scene: &SceneImage,
    noise_sigma: f64,
    rng_seed: u64,
) -> Result<SensorImage> {
    let n = dense.n_scene();
    let m = dense.m_sensor();
    if scene.values().dim() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "scene is {:?}, dense system expects ({n}, {n})",
            scene.values().dim()
        )));
    }
    check_sigma(noise_sigma)?;
    let x = vec_col_major(&scene.values().view());
    let mut y = dense.phi().dot(&x);
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let normal = Normal::new(0.0, noise_sigma).expect("sigma validated");
        y.mapv_inplace(|v| v + normal.sample(&mut rng));
    }
    Ok(SensorImage::raw(unvec_col_major(&y, m, m)))
}

/// Capture through the physical binary mask obtained by zeroing the -1
/// entries of the signed separable mask. That mask equals
/// (signed mask + all-ones) / 2, so the measurement is half the signed-model
/// capture plus a flat term proportional to the total scene intensity:
/// Y = (Phi_L X Phi_R^T) / 2 + (sum X / 2) 11^T + E.
///
/// The flat term is exact because an all-open mask produces a unit response
/// at every in-field pixel (the transfer builders enforce mask coverage).
pub fn capture_binary_mask(
    system: &SeparableSystem,
    scene: &SceneImage,
    noise_sigma: f64,
    rng_seed: u64,
) -> Result<SensorImage> {
    check_capture_dims(system, scene)?;
    check_sigma(noise_sigma)?;
    let signed = system.forward(&scene.values().view())?;
    let flat = 0.5 * scene.values().sum();
    let mut y = signed.mapv(|v| 0.5 * v + flat);
    if noise_sigma > 0.0 {
        y += &gaussian_noise(y.dim(), noise_sigma, rng_seed);
    }
    Ok(SensorImage::raw(y))
}

/// Double centering: Y' = Y - rowmean 1^T - 1 colmean^T + grandmean 11^T.
/// Every row and column of the result sums to zero; the map is linear and
/// idempotent.
pub fn mean_correct(y: &SensorImage) -> SensorImage {
    let v = y.values();
    let (rows, cols) = v.dim();
    let grand = v.sum() / (rows * cols) as f64;
    let row_means: Vec<f64> = (0..rows).map(|i| v.row(i).sum() / cols as f64).collect();
    let col_means: Vec<f64> = (0..cols).map(|j| v.column(j).sum() / rows as f64).collect();
    let corrected = Array2::from_shape_fn((rows, cols), |(i, j)| {
        v[[i, j]] - row_means[i] - col_means[j] + grand
    });
    SensorImage::corrected(corrected)
}

/// Count of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(matrix: &Array2<f64>, rel_tol: f64) -> Result<usize> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::Validation(format!(
            "rel_tol must lie in (0, 1), got {rel_tol}"
        )));
    }
    let s = singular_values(&matrix.view())?;
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&v| v > rel_tol * smax).count())
}
