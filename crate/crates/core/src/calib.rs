//! Separable-system calibration from Hadamard display patterns.
//!
//! Each rank-1 scene h_k 1^T (or 1 h_k^T) produces a rank-1 corrected sensor
//! image u_k v^T sharing the same right factor v across k. Truncated SVDs
//! recover the u_k, and Phi is assembled as [u_1 .. u_N] H^T / N. Because
//! every capture is mean-corrected first, the assembled factors equal the
//! column-centered transfer matrices up to one global scalar per axis.

use crate::error::{Error, Result};
use crate::io;
use crate::linalg::{frobenius, SvdFactors};
use crate::recon::SeparableSystem;
use crate::seq::gen_hadamard;
use crate::sim::{self, mean_correct, SceneImage};
use ndarray::{Array1, Array2};
use serde::Deserialize;
use std::path::Path;

/// Which transfer factor a pattern set calibrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationAxis {
    Left,
    Right,
}

impl CalibrationAxis {
    pub fn tag(&self) -> &'static str {
        match self {
            CalibrationAxis::Left => "L",
            CalibrationAxis::Right => "R",
        }
    }
}

/// How the simulated camera forms measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptureModel {
    /// Directly through the signed separable system.
    Separable,
    /// Through the physical binary mask (signed mask with -1 set to 0),
    /// which adds the flat rank-1 term removed by mean correction.
    BinaryMask,
}

/// One display pattern split into its nonnegative halves, so that
/// positive - negative equals the signed Hadamard pattern.
#[derive(Debug, Clone)]
pub struct CalibrationPattern {
    pub axis: CalibrationAxis,
    pub index: usize,
    pub positive: SceneImage,
    pub negative: SceneImage,
}

/// The 2N nonnegative scenes calibrating one axis: for the left axis pattern
/// k is h_k 1^T split into positive and negative parts, for the right axis
/// 1 h_k^T.
pub fn gen_patterns(order: usize, axis: CalibrationAxis) -> Result<Vec<CalibrationPattern>> {
    let h = gen_hadamard(order)?;
    let mut out = Vec::with_capacity(order);
    for k in 0..order {
        let col = h.column(k);
        let value = |r: usize, c: usize| match axis {
            CalibrationAxis::Left => col[r],
            CalibrationAxis::Right => col[c],
        };
        let pos = Array2::from_shape_fn((order, order), |(r, c)| value(r, c).max(0.0));
        let neg = Array2::from_shape_fn((order, order), |(r, c)| (-value(r, c)).max(0.0));
        out.push(CalibrationPattern {
            axis,
            index: k,
            positive: SceneImage::new(pos)?,
            negative: SceneImage::new(neg)?,
        });
    }
    Ok(out)
}

fn mix_seed(base: u64, salt: u64) -> u64 {
    // splitmix64 finalizer over base + salt
    let mut z = base
        .wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn capture_with_model(
    system: &SeparableSystem,
    scene: &SceneImage,
    model: CaptureModel,
    noise_sigma: f64,
    seed: u64,
) -> Result<sim::SensorImage> {
    match model {
        CaptureModel::Separable => sim::capture(system, scene, noise_sigma, seed),
        CaptureModel::BinaryMask => sim::capture_binary_mask(system, scene, noise_sigma, seed),
    }
}

/// Capture both halves of a pattern (independent noise), mean-correct each,
/// and subtract, yielding the corrected measurement of the signed pattern.
pub fn difference_capture(
    system: &SeparableSystem,
    pattern: &CalibrationPattern,
    noise_sigma: f64,
    seed: u64,
) -> Result<Array2<f64>> {
    difference_capture_with(system, pattern, CaptureModel::Separable, noise_sigma, seed)
}

pub fn difference_capture_with(
    system: &SeparableSystem,
    pattern: &CalibrationPattern,
    model: CaptureModel,
    noise_sigma: f64,
    seed: u64,
) -> Result<Array2<f64>> {
    let pos = capture_with_model(system, &pattern.positive, model, noise_sigma, mix_seed(seed, 0))?;
    let neg = capture_with_model(system, &pattern.negative, model, noise_sigma, mix_seed(seed, 1))?;
    let pos = mean_correct(&pos);
    let neg = mean_correct(&neg);
    Ok(pos.values() - neg.values())
}

/// Best rank-1 factorization u v^T of a measurement, with v unit-norm and its
/// largest-magnitude entry positive; u absorbs the singular value and sign.
#[derive(Debug, Clone)]
pub struct Rank1 {
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    /// ||Y - u v^T||_F / ||Y||_F
    pub residual: f64,
}

pub fn extract_rank1(y: &Array2<f64>) -> Result<Rank1> {
    let total = frobenius(&y.view());
    if total == 0.0 {
        return Err(Error::ZeroInput);
    }
    let f = SvdFactors::compute(&y.view())?;
    let sigma1 = f.s[0];
    let mut u = f.u.column(0).to_owned();
    let mut v = f.vt.row(0).to_owned();
    // sign convention: the largest-magnitude entry of v is positive
    let mut arg = 0;
    for (i, val) in v.iter().enumerate() {
        if val.abs() > v[arg].abs() {
            arg = i;
        }
    }
    if v[arg] < 0.0 {
        v.mapv_inplace(|x| -x);
        u.mapv_inplace(|x| -x);
    }
    u.mapv_inplace(|x| x * sigma1);
    let tail: f64 = f.s.iter().skip(1).map(|s| s * s).sum();
    let residual = tail.sqrt() / total;
    Ok(Rank1 { u, v, residual })
}

/// Corrected difference measurements for every pattern of one axis.
#[derive(Debug, Clone)]
pub struct CalibrationRun {
    pub order: usize,
    pub axis: CalibrationAxis,
    pub captures: Vec<Array2<f64>>,
}

/// Per-axis quality of an assembled factor.
#[derive(Debug, Clone, Copy)]
pub struct AxisQuality {
    /// Mean relative rank-1 residual across patterns.
    pub mean_residual: f64,
    pub max_residual: f64,
    /// Mean leading singular value; the strength of the shared factor signal.
    /// Near-zero values mean Phi applied to the all-ones vector almost
    /// vanishes and the rank-1 model is poorly determined.
    pub factor_strength: f64,
    /// Smallest pairwise |<v_i, v_j>| among shared factors.
    pub min_alignment: f64,
}

/// Shared-factor agreement required across a run.
pub const FACTOR_ALIGNMENT_THRESHOLD: f64 = 0.99;

/// Assemble one transfer factor: Phi = [u_1 .. u_N] H^T / N.
pub fn assemble(run: &CalibrationRun) -> Result<(Array2<f64>, AxisQuality)> {
    let n = run.order;
    if run.captures.len() != n {
        return Err(Error::MissingCapture(format!(
            "axis {}: expected {n} captures, found {}",
            run.axis.tag(),
            run.captures.len()
        )));
    }
    let mut extracted = Vec::with_capacity(n);
    for (k, y) in run.captures.iter().enumerate() {
        let r1 = extract_rank1(y).map_err(|e| match e {
            Error::ZeroInput => {
                Error::MissingCapture(format!("axis {} capture {k} is zero", run.axis.tag()))
            }
            other => other,
        })?;
        extracted.push(r1);
    }
    let m = extracted[0].u.len();
    // pairwise shared-factor alignment
    let mut vmat = Array2::zeros((extracted[0].v.len(), n));
    for (k, r1) in extracted.iter().enumerate() {
        vmat.column_mut(k).assign(&r1.v);
    }
    let gram = vmat.t().dot(&vmat);
    let mut min_alignment = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            min_alignment = min_alignment.min(gram[[i, j]].abs());
        }
    }
    if n == 1 {
        min_alignment = 1.0;
    }
    if min_alignment < FACTOR_ALIGNMENT_THRESHOLD {
        return Err(Error::InconsistentFactor {
            alignment: min_alignment,
            threshold: FACTOR_ALIGNMENT_THRESHOLD,
        });
    }
    let mut u_stack = Array2::zeros((m, n));
    for (k, r1) in extracted.iter().enumerate() {
        u_stack.column_mut(k).assign(&r1.u);
    }
    let h = gen_hadamard(n)?.as_f64();
    let phi = u_stack.dot(&h.t()).mapv(|x| x / n as f64);
    let residuals: Vec<f64> = extracted.iter().map(|r| r.residual).collect();
    let quality = AxisQuality {
        mean_residual: residuals.iter().sum::<f64>() / n as f64,
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        factor_strength: extracted
            .iter()
            .map(|r| {
                // u absorbed sigma_1
                r.u.iter().map(|x| x * x).sum::<f64>().sqrt()
            })
            .sum::<f64>()
            / n as f64,
        min_alignment,
    };
    Ok((phi, quality))
}

/// A calibrated system plus per-axis quality metrics.
#[derive(Debug)]
pub struct CalibrationOutcome {
    pub system: SeparableSystem,
    pub left: AxisQuality,
    pub right: AxisQuality,
}

fn pattern_seed(base: u64, axis: CalibrationAxis, k: usize) -> u64 {
    let axis_idx = match axis {
        CalibrationAxis::Left => 0u64,
        CalibrationAxis::Right => 1u64,
    };
    mix_seed(base, 2 + axis_idx * 0x10_0000 + k as u64)
}

/// Run the full two-axis calibration against a simulated camera.
///
/// `order` must be a power of two matching the system's scene size. The
/// returned factors reproduce the column-centered transfer matrices of the
/// simulated system up to one global scalar per axis.
pub fn calibrate_full(
    system: &SeparableSystem,
    order: usize,
    model: CaptureModel,
    noise_sigma: f64,
    seed: u64,
) -> Result<CalibrationOutcome> {
    if order != system.n_scene() {
        return Err(Error::DimensionMismatch(format!(
            "calibration order {order} != system scene size {}",
            system.n_scene()
        )));
    }
    let mut factors = Vec::with_capacity(2);
    let mut qualities = Vec::with_capacity(2);
    for axis in [CalibrationAxis::Left, CalibrationAxis::Right] {
        let patterns = gen_patterns(order, axis)?;
        let mut captures = Vec::with_capacity(order);
        for pattern in &patterns {
            let y = difference_capture_with(
                system,
                pattern,
                model,
                noise_sigma,
                pattern_seed(seed, axis, pattern.index),
            )?;
            captures.push(y);
        }
        let run = CalibrationRun {
            order,
            axis,
            captures,
        };
        let (phi, quality) = assemble(&run)?;
        factors.push(phi);
        qualities.push(quality);
    }
    let right = factors.pop().expect("two factors");
    let left = factors.pop().expect("two factors");
    Ok(CalibrationOutcome {
        system: SeparableSystem::from_entries(left, right)?,
        left: qualities[0],
        right: qualities[1],
    })
}

fn capture_file_name(axis: CalibrationAxis, index: usize, positive: bool) -> String {
    format!(
        "{}_{:04}_{}.fcm1",
        axis.tag(),
        index,
        if positive { "pos" } else { "neg" }
    )
}

/// Simulate and write the raw (uncorrected) calibration captures for both
/// axes into `dir`, named `{L|R}_{index:04}_{pos|neg}.fcm1`.
pub fn write_simulated_captures(
    dir: &Path,
    system: &SeparableSystem,
    order: usize,
    model: CaptureModel,
    noise_sigma: f64,
    seed: u64,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for axis in [CalibrationAxis::Left, CalibrationAxis::Right] {
        for pattern in gen_patterns(order, axis)? {
            let base = pattern_seed(seed, axis, pattern.index);
            for (scene, positive, salt) in [
                (&pattern.positive, true, 0u64),
                (&pattern.negative, false, 1u64),
            ] {
                let y = capture_with_model(system, scene, model, noise_sigma, mix_seed(base, salt))?;
                let path = dir.join(capture_file_name(axis, pattern.index, positive));
                io::write_fcm1(&path, y.values())?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ManifestEntry {
    axis: String,
    index: usize,
    sign: String,
    path: String,
}

#[derive(Debug, Deserialize)]
struct Manifest {
    order: usize,
    captures: Vec<ManifestEntry>,
}

fn read_capture_file(path: &Path) -> Result<Array2<f64>> {
    if !path.exists() {
        return Err(Error::MissingCapture(path.display().to_string()));
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("fcm1") => io::read_fcm1(path),
        Some("pgm") => io::read_pgm_scaled(path).or_else(|_| io::read_pgm(path)),
        _ => Err(Error::Format(format!(
            "{}: calibration captures must be .fcm1 or .pgm",
            path.display()
        ))),
    }
}

/// Calibrate from a directory of raw captures. Files follow the
/// `{L|R}_{index:04}_{pos|neg}.fcm1` convention unless a `manifest.json`
/// (fields: order, captures[{axis, index, sign, path}]) overrides the naming.
pub fn calibrate_from_dir(dir: &Path, order: usize) -> Result<CalibrationOutcome> {
    let manifest_path = dir.join("manifest.json");
    let lookup: Box<dyn Fn(CalibrationAxis, usize, bool) -> std::path::PathBuf> =
        if manifest_path.exists() {
            let text = std::fs::read_to_string(&manifest_path)?;
            let manifest: Manifest = serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("manifest.json: {e}")))?;
            if manifest.order != order {
                return Err(Error::Validation(format!(
                    "manifest order {} != requested order {order}",
                    manifest.order
                )));
            }
            let dir = dir.to_path_buf();
            Box::new(move |axis: CalibrationAxis, index: usize, positive: bool| {
                let want_sign = if positive { "pos" } else { "neg" };
                manifest
                    .captures
                    .iter()
                    .find(|e| e.axis == axis.tag() && e.index == index && e.sign == want_sign)
                    .map(|e| dir.join(&e.path))
                    .unwrap_or_else(|| dir.join(format!("<missing {}_{index}_{want_sign}>", axis.tag())))
            })
        } else {
            let dir = dir.to_path_buf();
            Box::new(move |axis, index, positive| {
                dir.join(capture_file_name(axis, index, positive))
            })
        };

    let mut factors = Vec::with_capacity(2);
    let mut qualities = Vec::with_capacity(2);
    for axis in [CalibrationAxis::Left, CalibrationAxis::Right] {
        let mut captures = Vec::with_capacity(order);
        for k in 0..order {
            let pos = read_capture_file(&lookup(axis, k, true))?;
            let neg = read_capture_file(&lookup(axis, k, false))?;
            if pos.dim() != neg.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "axis {} capture {k}: pos {:?} vs neg {:?}",
                    axis.tag(),
                    pos.dim(),
                    neg.dim()
                )));
            }
            let pos = mean_correct(&sim::SensorImage::raw(pos));
            let neg = mean_correct(&sim::SensorImage::raw(neg));
            captures.push(pos.values() - neg.values());
        }
        let run = CalibrationRun {
            order,
            axis,
            captures,
        };
        let (phi, quality) = assemble(&run)?;
        factors.push(phi);
        qualities.push(quality);
    }
    let right = factors.pop().expect("two factors");
    let left = factors.pop().expect("two factors");
    Ok(CalibrationOutcome {
        system: SeparableSystem::from_entries(left, right)?,
        left: qualities[0],
        right: qualities[1],
    })
}
