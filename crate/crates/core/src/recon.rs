//! Scene recovery from corrected sensor measurements: SVD least squares,
//! closed-form Tikhonov, and smoothed total-variation descent.

use crate::error::{Error, Result};
use crate::linalg::SvdFactors;
use crate::optics::{TransferAxis, TransferMatrix};
use crate::sim::{SceneImage, SensorImage};
use ndarray::{Array2, ArrayView2};
use std::sync::OnceLock;

/// Relative singular-value cutoff used by pseudoinverses unless overridden.
pub const DEFAULT_SV_CUTOFF: f64 = 1e-10;

/// The pair of 1-D transfer matrices of a separable imaging system, with
/// per-factor SVDs computed once on first use.
#[derive(Debug)]
pub struct SeparableSystem {
    phi_l: TransferMatrix,
    phi_r: TransferMatrix,
    svd_l: OnceLock<std::result::Result<SvdFactors, String>>,
    svd_r: OnceLock<std::result::Result<SvdFactors, String>>,
}

impl Clone for SeparableSystem {
    fn clone(&self) -> Self {
        // Cached factorizations are cheap to recompute; don't clone them.
        Self {
            phi_l: self.phi_l.clone(),
            phi_r: self.phi_r.clone(),
            svd_l: OnceLock::new(),
            svd_r: OnceLock::new(),
        }
    }
}

impl SeparableSystem {
    pub fn new(phi_l: TransferMatrix, phi_r: TransferMatrix) -> Result<Self> {
        if phi_l.dim() != phi_r.dim() {
            return Err(Error::DimensionMismatch(format!(
                "transfer factors disagree: {:?} vs {:?}",
                phi_l.dim(),
                phi_r.dim()
            )));
        }
        Ok(Self {
            phi_l: phi_l.with_axis(TransferAxis::Left),
            phi_r: phi_r.with_axis(TransferAxis::Right),
            svd_l: OnceLock::new(),
            svd_r: OnceLock::new(),
        })
    }

    pub fn from_entries(phi_l: Array2<f64>, phi_r: Array2<f64>) -> Result<Self> {
        Self::new(
            TransferMatrix::from_entries(phi_l, TransferAxis::Left),
            TransferMatrix::from_entries(phi_r, TransferAxis::Right),
        )
    }

    pub fn phi_l(&self) -> &TransferMatrix {
        &self.phi_l
    }

    pub fn phi_r(&self) -> &TransferMatrix {
        &self.phi_r
    }

    /// Sensor pixels per axis.
    pub fn m_sensor(&self) -> usize {
        self.phi_l.dim().0
    }

    /// Scene samples per axis.
    pub fn n_scene(&self) -> usize {
        self.phi_l.dim().1
    }

    pub fn svd_l(&self) -> Result<&SvdFactors> {
        self.svd_l
            .get_or_init(|| {
                SvdFactors::compute(&self.phi_l.entries().view()).map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| Error::Linalg(e.clone()))
    }

    pub fn svd_r(&self) -> Result<&SvdFactors> {
        self.svd_r
            .get_or_init(|| {
                SvdFactors::compute(&self.phi_r.entries().view()).map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| Error::Linalg(e.clone()))
    }

    /// Largest singular value of the separable operator X -> Phi_L X Phi_R^T.
    pub fn sigma_max(&self) -> Result<f64> {
        Ok(self.svd_l()?.sigma_max() * self.svd_r()?.sigma_max())
    }

    /// Column-centered copy: each factor is premultiplied by I - 11^T / M,
    /// the system that governs mean-corrected measurements.
    pub fn centered(&self) -> SeparableSystem {
        let center = |a: &Array2<f64>| -> Array2<f64> {
            let m = a.nrows() as f64;
            let mut out = a.clone();
            for j in 0..a.ncols() {
                let mean = a.column(j).sum() / m;
                out.column_mut(j).mapv_inplace(|v| v - mean);
            }
            out
        };
        SeparableSystem {
            phi_l: TransferMatrix::from_entries(center(self.phi_l.entries()), TransferAxis::Left),
            phi_r: TransferMatrix::from_entries(center(self.phi_r.entries()), TransferAxis::Right),
            svd_l: OnceLock::new(),
            svd_r: OnceLock::new(),
        }
    }

    /// Forward model Phi_L X Phi_R^T.
    pub fn forward(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        let n = self.n_scene();
        if x.dim() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "scene is {:?}, system expects ({n}, {n})",
                x.dim()
            )));
        }
        Ok(self.phi_l.entries().dot(x).dot(&self.phi_r.entries().t()))
    }

    /// Adjoint Phi_L^T Y Phi_R.
    pub fn adjoint(&self, y: &ArrayView2<f64>) -> Result<Array2<f64>> {
        let m = self.m_sensor();
        if y.dim() != (m, m) {
            return Err(Error::DimensionMismatch(format!(
                "sensor image is {:?}, system expects ({m}, {m})",
                y.dim()
            )));
        }
        Ok(self.phi_l.entries().t().dot(y).dot(self.phi_r.entries()))
    }
}

/// Solver parameters. `tau`, `lambda`, and `huber_eps` have data-dependent
/// defaults; see [`ReconOptions::defaults_for`].
#[derive(Debug, Clone, Copy)]
pub struct ReconOptions {
    pub tau: f64,
    pub lambda: f64,
    pub huber_eps: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub sv_cutoff: f64,
}

impl Default for ReconOptions {
    fn default() -> Self {
        Self {
            tau: 0.0,
            lambda: 0.0,
            huber_eps: 1e-3,
            max_iters: 500,
            rel_tol: 1e-9,
            sv_cutoff: DEFAULT_SV_CUTOFF,
        }
    }
}

impl ReconOptions {
    /// Documented starting points: tau = 1e-2 * sigma_max^2,
    /// lambda = 1e-2 * ||Y||_F / N, huber_eps = 1e-3 * dynamic range of Y.
    pub fn defaults_for(system: &SeparableSystem, y: &SensorImage) -> Result<Self> {
        let sigma = system.sigma_max()?;
        let yv = y.values();
        let norm = crate::linalg::frobenius(&yv.view());
        let (lo, hi) = yv
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let range = (hi - lo).abs();
        Ok(Self {
            tau: 1e-2 * sigma * sigma,
            lambda: 1e-2 * norm / system.n_scene() as f64,
            huber_eps: (1e-3 * range).max(f64::MIN_POSITIVE),
            ..Self::default()
        })
    }
}

fn check_sensor(system: &SeparableSystem, y: &SensorImage) -> Result<()> {
    let m = system.m_sensor();
    if y.values().dim() != (m, m) {
        return Err(Error::DimensionMismatch(format!(
            "sensor image is {:?}, system expects ({m}, {m})",
            y.values().dim()
        )));
    }
    Ok(())
}

/// Least squares via truncated pseudoinverses: X = Phi_L^+ Y (Phi_R^+)^T.
pub fn reconstruct_ls(system: &SeparableSystem, y: &SensorImage) -> Result<SceneImage> {
    reconstruct_ls_with(system, y, DEFAULT_SV_CUTOFF)
}

pub fn reconstruct_ls_with(
    system: &SeparableSystem,
    y: &SensorImage,
    sv_rel_cutoff: f64,
) -> Result<SceneImage> {
    check_sensor(system, y)?;
    let left = system.svd_l()?.pinv_apply(&y.values().view(), sv_rel_cutoff)?;
    // X = Z (Phi_R^+)^T  <=>  X^T = Phi_R^+ Z^T
    let xt = system
        .svd_r()?
        .pinv_apply(&left.t().to_owned().view(), sv_rel_cutoff)?;
    SceneImage::new(xt.t().to_owned())
}

/// Closed-form Tikhonov solution
/// X = V_L [ (S_L U_L^T Y U_R S_R) ./ (s_L s_R^T + tau) ] V_R^T,
/// where s_L, s_R are the squared singular values of the factors.
pub fn reconstruct_tikhonov(
    system: &SeparableSystem,
    y: &SensorImage,
    tau: f64,
) -> Result<SceneImage> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::Validation(format!(
            "tau must be finite and nonnegative, got {tau}"
        )));
    }
    check_sensor(system, y)?;
    let l = system.svd_l()?;
    let r = system.svd_r()?;
    let core = l.u.t().dot(y.values()).dot(&r.u);
    let kl = l.s.len();
    let kr = r.s.len();
    let mut z = core;
    for i in 0..kl {
        for j in 0..kr {
            let num = l.s[i] * z[[i, j]] * r.s[j];
            let denom = l.s[i] * l.s[i] * r.s[j] * r.s[j] + tau;
            z[[i, j]] = if denom > 0.0 { num / denom } else { 0.0 };
        }
    }
    let x = l.vt.t().dot(&z).dot(&r.vt);
    SceneImage::new(x)
}

/// Outcome of a TV solve: the trace is the objective after each accepted
/// iterate and is nonincreasing.
#[derive(Debug, Clone)]
pub struct TvReport {
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
    pub warning: Option<String>,
}

/// Smoothed total variation of an image: forward differences with replicate
/// boundary (the last row / column gradients are zero), each magnitude
/// smoothed as sqrt(gu^2 + gv^2 + eps^2).
pub fn tv_seminorm(x: &ArrayView2<f64>, eps: f64) -> f64 {
    let (rows, cols) = x.dim();
    let mut acc = 0.0;
    for u in 0..rows {
        for v in 0..cols {
            let gu = if u + 1 < rows { x[[u + 1, v]] - x[[u, v]] } else { 0.0 };
            let gv = if v + 1 < cols { x[[u, v + 1]] - x[[u, v]] } else { 0.0 };
            acc += (gu * gu + gv * gv + eps * eps).sqrt();
        }
    }
    acc
}

/// Analytic gradient of [`tv_seminorm`] with respect to the image.
pub fn tv_gradient(x: &ArrayView2<f64>, eps: f64) -> Array2<f64> {
    let (rows, cols) = x.dim();
    let mut gu = Array2::zeros((rows, cols));
    let mut gv = Array2::zeros((rows, cols));
    let mut w = Array2::zeros((rows, cols));
    for u in 0..rows {
        for v in 0..cols {
            let du = if u + 1 < rows { x[[u + 1, v]] - x[[u, v]] } else { 0.0 };
            let dv = if v + 1 < cols { x[[u, v + 1]] - x[[u, v]] } else { 0.0 };
            gu[[u, v]] = du;
            gv[[u, v]] = dv;
            w[[u, v]] = (du * du + dv * dv + eps * eps).sqrt();
        }
    }
    let mut grad = Array2::zeros((rows, cols));
    for u in 0..rows {
        for v in 0..cols {
            let mut g = 0.0;
            if u + 1 < rows {
                g -= gu[[u, v]] / w[[u, v]];
            }
            if v + 1 < cols {
                g -= gv[[u, v]] / w[[u, v]];
            }
            if u > 0 {
                g += gu[[u - 1, v]] / w[[u - 1, v]];
            }
            if v > 0 {
                g += gv[[u, v - 1]] / w[[u, v - 1]];
            }
            grad[[u, v]] = g;
        }
    }
    grad
}

/// Minimize ||Phi_L X Phi_R^T - Y||_F^2 + lambda * TV_eps(X) by accelerated
/// gradient descent with step 1/L, L = 2 (smax_L smax_R)^2 + 8 lambda / eps.
/// Momentum restarts keep the objective trace nonincreasing. If the iteration
/// budget runs out the best iterate is returned with a warning.
pub fn reconstruct_tv(
    system: &SeparableSystem,
    y: &SensorImage,
    lambda: f64,
    opts: &ReconOptions,
) -> Result<(SceneImage, TvReport)> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Validation(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    if lambda > 0.0 && !(opts.huber_eps > 0.0) {
        return Err(Error::Validation(
            "huber_eps must be positive when the TV term is active".into(),
        ));
    }
    check_sensor(system, y)?;
    let n = system.n_scene();
    let yv = y.values();

    let objective = |x: &Array2<f64>| -> Result<f64> {
        let resid = system.forward(&x.view())? - yv;
        let fit = resid.iter().map(|v| v * v).sum::<f64>();
        let tv = if lambda > 0.0 {
            lambda * tv_seminorm(&x.view(), opts.huber_eps)
        } else {
            0.0
        };
        Ok(fit + tv)
    };
    let gradient = |x: &Array2<f64>| -> Result<Array2<f64>> {
        let resid = system.forward(&x.view())? - yv;
        let mut g = system.adjoint(&resid.view())?;
        g.mapv_inplace(|v| 2.0 * v);
        if lambda > 0.0 {
            g = g + lambda * tv_gradient(&x.view(), opts.huber_eps);
        }
        Ok(g)
    };

    let smax = system.sigma_max()?;
    let mut lipschitz = 2.0 * smax * smax;
    if lambda > 0.0 {
        lipschitz += 8.0 * lambda / opts.huber_eps;
    }
    if !(lipschitz.is_finite() && lipschitz > 0.0) {
        return Err(Error::Validation(format!(
            "degenerate Lipschitz bound {lipschitz}"
        )));
    }
    let step = 1.0 / lipschitz;

    let mut x = Array2::zeros((n, n));
    let mut momentum = x.clone();
    let mut t = 1.0f64;
    let mut f_prev = objective(&x)?;
    if !f_prev.is_finite() {
        return Err(Error::NonFiniteObjective(0));
    }
    let mut trace = vec![f_prev];
    let mut best = (x.clone(), f_prev);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=opts.max_iters {
        iterations = iter;
        let mut candidate = &momentum - &(gradient(&momentum)? * step);
        let mut f_cand = objective(&candidate)?;
        if !f_cand.is_finite() {
            return Err(Error::NonFiniteObjective(iter));
        }
        if f_cand > f_prev {
            // Momentum overshot; restart from the last accepted iterate.
            t = 1.0;
            candidate = &x - &(gradient(&x)? * step);
            f_cand = objective(&candidate)?;
            if !f_cand.is_finite() {
                return Err(Error::NonFiniteObjective(iter));
            }
            if f_cand > f_prev {
                // Descent step cannot make progress at this precision.
                converged = true;
                break;
            }
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        momentum = &candidate + &((&candidate - &x) * ((t - 1.0) / t_next));
        t = t_next;
        let rel_dec = (f_prev - f_cand) / f_prev.abs().max(f64::MIN_POSITIVE);
        x = candidate;
        f_prev = f_cand;
        trace.push(f_cand);
        if f_cand < best.1 {
            best = (x.clone(), f_cand);
        }
        if rel_dec < opts.rel_tol {
            converged = true;
            break;
        }
    }

    let warning = if converged {
        None
    } else {
        Some(format!(
            "did not converge within {} iterations; returning best iterate",
            opts.max_iters
        ))
    };
    let report = TvReport {
        iterations,
        converged,
        objective_trace: trace,
        warning,
    };
    Ok((SceneImage::new(best.0)?, report))
}

/// Reconstruction quality metrics. `psnr` is measured against the dynamic
/// range of the reference and is +infinity for identical images.
#[derive(Debug, Clone, Copy)]
pub struct Metrics {
    pub mse: f64,
    pub psnr: f64,
    pub pearson: f64,
}

pub fn metrics(x_hat: &ArrayView2<f64>, x_ref: &ArrayView2<f64>) -> Result<Metrics> {
    if x_hat.dim() != x_ref.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            x_hat.dim(),
            x_ref.dim()
        )));
    }
    let n = x_hat.len() as f64;
    let mse = x_hat
        .iter()
        .zip(x_ref.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    let (lo, hi) = x_ref
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    let psnr = if mse == 0.0 {
        f64::INFINITY
    } else if range > 0.0 {
        10.0 * (range * range / mse).log10()
    } else {
        f64::NEG_INFINITY
    };
    let mean_a = x_hat.sum() / n;
    let mean_b = x_ref.sum() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (a, b) in x_hat.iter().zip(x_ref.iter()) {
        let da = a - mean_a;
        let db = b - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    let pearson = if var_a > 0.0 && var_b > 0.0 {
        cov / (var_a.sqrt() * var_b.sqrt())
    } else if mse == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(Metrics { mse, psnr, pearson })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::sim::SensorImage;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_system(m: usize, n: usize, seed: u64) -> SeparableSystem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((m, n), |_| rng.random::<f64>() - 0.2);
        let b = Array2::from_shape_fn((m, n), |_| rng.random::<f64>() - 0.2);
        SeparableSystem::from_entries(a, b).unwrap()
    }

    #[test]
    fn identity_system_returns_measurement() {
        let sys = SeparableSystem::from_entries(Array2::eye(6), Array2::eye(6)).unwrap();
        let y = Array2::from_shape_fn((6, 6), |(i, j)| (i * 7 + j) as f64);
        let x = reconstruct_ls(&sys, &SensorImage::corrected(y.clone())).unwrap();
        assert!(max_abs_diff(&x.values().view(), &y.view()) < 1e-12);
    }

    #[test]
    fn ls_round_trip_well_conditioned() {
        let sys = random_system(32, 32, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x_true = Array2::from_shape_fn((32, 32), |_| rng.random::<f64>());
        let y = sys.forward(&x_true.view()).unwrap();
        let x = reconstruct_ls(&sys, &SensorImage::corrected(y)).unwrap();
        let rel = crate::linalg::relative_frobenius_diff(&x.values().view(), &x_true.view());
        assert!(rel <= 1e-8, "relative error {rel}");
    }

    #[test]
    fn tikhonov_zero_tau_matches_ls_on_invertible_system() {
        let sys = random_system(12, 12, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let y = SensorImage::corrected(Array2::from_shape_fn((12, 12), |_| rng.random::<f64>()));
        let ls = reconstruct_ls(&sys, &y).unwrap();
        let tik = reconstruct_tikhonov(&sys, &y, 0.0).unwrap();
        assert!(max_abs_diff(&ls.values().view(), &tik.values().view()) < 1e-10);
    }

    #[test]
    fn tikhonov_large_tau_shrinks_to_zero() {
        let sys = random_system(8, 8, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y_mat = Array2::from_shape_fn((8, 8), |_| rng.random::<f64>());
        let ynorm = crate::linalg::frobenius(&y_mat.view());
        let y = SensorImage::corrected(y_mat);
        let tau = 1e12;
        let x = reconstruct_tikhonov(&sys, &y, tau).unwrap();
        let smax = sys.sigma_max().unwrap();
        let bound = smax * smax * ynorm / tau;
        assert!(x.values().iter().all(|v| v.abs() <= bound.max(1e-12)));
    }

    #[test]
    fn tikhonov_scale_covariance() {
        let sys = random_system(10, 10, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y_mat = Array2::from_shape_fn((10, 10), |_| rng.random::<f64>());
        let alpha = -2.5;
        let x1 = reconstruct_tikhonov(&sys, &SensorImage::corrected(y_mat.clone()), 0.3).unwrap();
        let x2 =
            reconstruct_tikhonov(&sys, &SensorImage::corrected(y_mat.mapv(|v| alpha * v)), 0.3)
                .unwrap();
        let scaled = x1.values().mapv(|v| alpha * v);
        assert!(max_abs_diff(&scaled.view(), &x2.values().view()) < 1e-12);
    }

    #[test]
    fn tikhonov_stationarity() {
        // Eq-solution zeroes the gradient Phi_L^T (Phi_L X Phi_R^T - Y) Phi_R + tau X
        let sys = random_system(16, 16, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let y_mat = Array2::from_shape_fn((16, 16), |_| rng.random::<f64>());
        let y = SensorImage::corrected(y_mat.clone());
        for tau in [1e-3, 1e-1, 1.0] {
            let x = reconstruct_tikhonov(&sys, &y, tau).unwrap();
            let resid = sys.forward(&x.values().view()).unwrap() - &y_mat;
            let grad = sys.adjoint(&resid.view()).unwrap() + x.values().mapv(|v| tau * v);
            let scale =
                crate::linalg::frobenius(&sys.adjoint(&y_mat.view()).unwrap().view());
            let gnorm = crate::linalg::frobenius(&grad.view());
            assert!(gnorm <= 1e-8 * scale, "tau={tau}: {gnorm} vs {scale}");
        }
    }

    #[test]
    fn tv_seminorm_known_values() {
        let flat = Array2::from_elem((5, 5), 3.0);
        assert_eq!(tv_seminorm(&flat.view(), 0.0), 0.0);
        // one unit step between two columns: N unit gradients
        let n = 6;
        let step = Array2::from_shape_fn((n, n), |(_, v)| if v < 3 { 0.0 } else { 1.0 });
        assert!((tv_seminorm(&step.view(), 0.0) - n as f64).abs() < 1e-12);
        // eps adds at most N^2 * eps
        let eps = 0.05;
        let with_eps = tv_seminorm(&step.view(), eps);
        assert!(with_eps >= n as f64);
        assert!(with_eps <= n as f64 + (n * n) as f64 * eps + 1e-12);
        // constant image contributes exactly N^2 * eps
        assert!((tv_seminorm(&flat.view(), eps) - 25.0 * eps).abs() < 1e-12);
    }

    #[test]
    fn tv_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let eps = 1e-2;
        for _ in 0..10 {
            let x = Array2::from_shape_fn((8, 8), |_| rng.random::<f64>());
            let g = tv_gradient(&x.view(), eps);
            let h = 1e-6;
            for _ in 0..5 {
                let i = rng.random_range(0..8);
                let j = rng.random_range(0..8);
                let mut xp = x.clone();
                xp[[i, j]] += h;
                let mut xm = x.clone();
                xm[[i, j]] -= h;
                let fd = (tv_seminorm(&xp.view(), eps) - tv_seminorm(&xm.view(), eps)) / (2.0 * h);
                let denom = fd.abs().max(1e-6);
                assert!(
                    (g[[i, j]] - fd).abs() / denom < 1e-4,
                    "({i},{j}): analytic {} vs fd {fd}",
                    g[[i, j]]
                );
            }
        }
    }

    #[test]
    fn tv_lambda_zero_converges_to_ls() {
        let sys = random_system(10, 10, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x_true = Array2::from_shape_fn((10, 10), |_| rng.random::<f64>());
        let y = SensorImage::corrected(sys.forward(&x_true.view()).unwrap());
        let ls = reconstruct_ls(&sys, &y).unwrap();
        let opts = ReconOptions {
            max_iters: 4000,
            rel_tol: 1e-14,
            ..Default::default()
        };
        let (tv, report) = reconstruct_tv(&sys, &y, 0.0, &opts).unwrap();
        let rel =
            crate::linalg::relative_frobenius_diff(&tv.values().view(), &ls.values().view());
        assert!(rel <= 1e-4, "relative error {rel}");
        for w in report.objective_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn tv_objective_nonincreasing_with_regularizer() {
        let sys = random_system(12, 12, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let x_true = Array2::from_shape_fn((12, 12), |(i, j)| {
            if i / 4 + j / 4 == 1 { 1.0 } else { 0.0 }
        });
        let noise = Array2::from_shape_fn((12, 12), |_| 0.01 * (rng.random::<f64>() - 0.5));
        let y = SensorImage::corrected(sys.forward(&x_true.view()).unwrap() + noise);
        let opts = ReconOptions {
            max_iters: 300,
            huber_eps: 1e-2,
            ..Default::default()
        };
        let (_x, report) = reconstruct_tv(&sys, &y, 0.05, &opts).unwrap();
        assert!(report.objective_trace.len() >= 2);
        for w in report.objective_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-300);
        }
        assert!(report.objective_trace.last().unwrap() <= &report.objective_trace[0]);
    }

    #[test]
    fn tv_requires_positive_eps() {
        let sys = random_system(4, 4, 1);
        let y = SensorImage::corrected(Array2::zeros((4, 4)));
        let opts = ReconOptions {
            huber_eps: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            reconstruct_tv(&sys, &y, 1.0, &opts),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn metrics_basics() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let m = metrics(&a.view(), &a.view()).unwrap();
        assert_eq!(m.mse, 0.0);
        assert!(m.psnr.is_infinite() && m.psnr > 0.0);
        assert_eq!(m.pearson, 1.0);
        // constant offset keeps correlation 1
        let b = a.mapv(|v| v + 1.0);
        let m = metrics(&b.view(), &a.view()).unwrap();
        assert!((m.pearson - 1.0).abs() < 1e-12);
        assert!((m.mse - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_match_direct_formulas() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let a = Array2::from_shape_fn((9, 9), |_| rng.random::<f64>());
        let b = Array2::from_shape_fn((9, 9), |_| rng.random::<f64>());
        let m = metrics(&a.view(), &b.view()).unwrap();
        let n = 81.0;
        let mse: f64 = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            / n;
        assert!((m.mse - mse).abs() < 1e-15);
        let range = b.iter().fold(f64::NEG_INFINITY, |h, &v| h.max(v))
            - b.iter().fold(f64::INFINITY, |l, &v| l.min(v));
        assert!((m.psnr - 10.0 * (range * range / mse).log10()).abs() < 1e-10);
        assert!(m.pearson.abs() < 1.0);
    }

    #[test]
    fn metrics_shape_mismatch() {
        let a = Array2::<f64>::zeros((2, 2));
        let b = Array2::<f64>::zeros((3, 3));
        assert!(matches!(
            metrics(&a.view(), &b.view()),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
