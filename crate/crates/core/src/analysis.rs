//! Conditioning and design-space analysis: singular spectra of candidate
//! masks, pinhole/coded-mask feature-size sweeps, and flatness metrics.

use crate::error::{Error, Result};
use crate::linalg::singular_values;
use crate::optics::{
    build_1d_transfer, build_dense_transfer, required_pattern_len, BuildOptions, OpticsConfig,
};
use crate::recon::DEFAULT_SV_CUTOFF;
use crate::seq::{
    gen_m_sequence_default, gen_pinhole_seq, gen_random_binary, gen_random_binary_mask,
    gen_uniform_random, gen_uniform_random_seq, outer_mask, tile_pattern, to_optical, MaskPattern,
};
use ndarray::ArrayView2;
use serde::Serialize;

/// Sorted singular spectrum of one transfer matrix plus condition statistics.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub label: String,
    pub singular_values: Vec<f64>,
    pub sigma_max: f64,
    /// Smallest singular value above the pseudoinverse truncation cutoff.
    pub sigma_min_nonzero: f64,
    pub condition_number: f64,
    pub open_fraction: Option<f64>,
}

/// Full singular spectrum of a matrix, sorted nonincreasing.
pub fn spectrum(matrix: &ArrayView2<f64>, label: impl Into<String>) -> Result<SpectrumReport> {
    let s = singular_values(matrix)?;
    let mut values: Vec<f64> = s.to_vec();
    values.sort_by(|a, b| b.partial_cmp(a).expect("singular values are finite"));
    let sigma_max = values.first().copied().unwrap_or(0.0);
    let cutoff = DEFAULT_SV_CUTOFF * sigma_max;
    let sigma_min_nonzero = values
        .iter()
        .copied()
        .filter(|&v| v > cutoff)
        .last()
        .unwrap_or(0.0);
    let condition_number = if sigma_min_nonzero > 0.0 {
        sigma_max / sigma_min_nonzero
    } else {
        f64::INFINITY
    };
    Ok(SpectrumReport {
        label: label.into(),
        singular_values: values,
        sigma_max,
        sigma_min_nonzero,
        condition_number,
        open_fraction: None,
    })
}

impl SpectrumReport {
    pub fn with_open_fraction(mut self, f: f64) -> Self {
        self.open_fraction = Some(f);
        self
    }
}

/// Spectra of one mask family across seeds.
#[derive(Debug, Clone, Serialize)]
pub struct MaskFamilySpectra {
    pub label: String,
    pub runs: Vec<SpectrumReport>,
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

impl MaskFamilySpectra {
    pub fn median_sigma_min_nonzero(&self) -> f64 {
        median(self.runs.iter().map(|r| r.sigma_min_nonzero).collect())
    }

    pub fn median_condition_number(&self) -> f64 {
        median(self.runs.iter().map(|r| r.condition_number).collect())
    }
}

/// Default comparison geometry: masks at d = 500 um with 30 um features,
/// pixel pitch matching the feature size, 45 degree CRA, 0.55 um light.
pub fn comparison_config(n: usize) -> OpticsConfig {
    OpticsConfig::new(500.0, 30.0, 30.0, 45.0, 0.55, n, n)
        .expect("default comparison parameters are valid")
}

fn mls_degree_for(n: usize) -> u32 {
    let mut degree = 2u32;
    while ((1usize << degree) - 1) < n && degree < 16 {
        degree += 1;
    }
    degree
}

fn repeats_for(base_len: usize, required: usize) -> usize {
    required.div_ceil(base_len).max(1)
}

/// Compare the singular spectra of 1-D transfer matrices for four mask
/// families: random binary at 50% and 75% open, uniform grayscale, and an
/// M-sequence at 50% open. Random families get one run per seed.
pub fn compare_transparency(
    cfg: &OpticsConfig,
    seeds: &[u64],
) -> Result<Vec<MaskFamilySpectra>> {
    if seeds.is_empty() {
        return Err(Error::Validation("at least one seed is required".into()));
    }
    let opts = BuildOptions::default();
    let required = required_pattern_len(cfg, &opts)?;
    let mls = gen_m_sequence_default(mls_degree_for(cfg.n_scene))?;
    let base_len = mls.len();
    let reps = repeats_for(base_len, required);

    let mut families = Vec::with_capacity(4);

    let mls_pattern = tile_pattern(&mls.as_optical(), reps);
    let t = build_1d_transfer(&mls_pattern, cfg)?;
    families.push(MaskFamilySpectra {
        label: "mls-50".into(),
        runs: vec![spectrum(&t.entries().view(), "mls-50")?
            .with_open_fraction(mls.open_fraction())],
    });

    for (label, fraction) in [("random-binary-50", 0.5), ("random-binary-75", 0.75)] {
        let mut runs = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let seq = gen_random_binary(base_len, fraction, seed)?;
            let pattern = tile_pattern(&seq.as_optical(), reps);
            let t = build_1d_transfer(&pattern, cfg)?;
            runs.push(
                spectrum(&t.entries().view(), format!("{label}-seed{seed}"))?
                    .with_open_fraction(seq.open_fraction()),
            );
        }
        families.push(MaskFamilySpectra {
            label: label.into(),
            runs,
        });
    }

    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let base = gen_uniform_random_seq(base_len, seed);
        let pattern = tile_pattern(&base, reps);
        let open = base.iter().sum::<f64>() / base.len() as f64;
        let t = build_1d_transfer(&pattern, cfg)?;
        runs.push(
            spectrum(&t.entries().view(), format!("uniform-random-seed{seed}"))?
                .with_open_fraction(open),
        );
    }
    families.push(MaskFamilySpectra {
        label: "uniform-random".into(),
        runs,
    });

    Ok(families)
}

/// Compare dense transfer spectra of separable and non-separable 2-D masks
/// at an n x n scene/sensor resolution.
pub fn compare_separability(n: usize, seed: u64) -> Result<Vec<SpectrumReport>> {
    let cfg = comparison_config(n);
    let opts = BuildOptions::default();
    let required = required_pattern_len(&cfg, &opts)?;
    let mls = gen_m_sequence_default(mls_degree_for(required))?;
    let features = mls.len().max(required);

    let mut reports = Vec::with_capacity(4);

    let nonsep_binary = to_optical(&gen_random_binary_mask(features, 0.5, seed)?)?;
    let dense = build_dense_transfer(&nonsep_binary, &cfg)?;
    reports.push(
        spectrum(&dense.phi().view(), "nonsep-random-binary")?
            .with_open_fraction(nonsep_binary.open_fraction()),
    );

    let nonsep_uniform = gen_uniform_random(features, seed.wrapping_add(1));
    let dense = build_dense_transfer(&nonsep_uniform, &cfg)?;
    reports.push(
        spectrum(&dense.phi().view(), "nonsep-uniform")?
            .with_open_fraction(nonsep_uniform.open_fraction()),
    );

    // Separable masks follow the prototype recipe: outer product of signed
    // sequences, then -1 entries set to zero.
    let sep_mls = to_optical(&outer_mask(&mls, &mls, 1))?;
    let dense = build_dense_transfer(&sep_mls, &cfg)?;
    reports.push(
        spectrum(&dense.phi().view(), "sep-mls")?.with_open_fraction(sep_mls.open_fraction()),
    );

    let a = gen_random_binary(features, 0.5, seed.wrapping_add(2))?;
    let b = gen_random_binary(features, 0.5, seed.wrapping_add(3))?;
    let sep_binary = to_optical(&outer_mask(&a, &b, 1))?;
    let dense = build_dense_transfer(&sep_binary, &cfg)?;
    reports.push(
        spectrum(&dense.phi().view(), "sep-binary")?
            .with_open_fraction(sep_binary.open_fraction()),
    );

    Ok(reports)
}

/// Compare a single pinhole against an M-sequence mask across feature sizes,
/// under the full blur model with pixel pitch tracking the feature size.
/// Returns 2 x deltas.len() reports: all pinholes first, then all MLS.
pub fn compare_pinhole_mls(deltas_um: &[f64]) -> Result<Vec<SpectrumReport>> {
    let mut reports = Vec::with_capacity(2 * deltas_um.len());
    let opts = BuildOptions::default();
    for &kind in &["pinhole", "mls"] {
        for &delta in deltas_um {
            let cfg = OpticsConfig::new(500.0, delta, delta, 45.0, 0.55, 255, 255)?;
            let required = required_pattern_len(&cfg, &opts)?;
            let label = format!("{kind}-delta{delta}");
            let report = match kind {
                "pinhole" => {
                    let pattern = gen_pinhole_seq(required, 1)?;
                    let t = build_1d_transfer(&pattern, &cfg)?;
                    spectrum(&t.entries().view(), label)?
                        .with_open_fraction(1.0 / required as f64)
                }
                _ => {
                    let mls = gen_m_sequence_default(8)?;
                    let reps = repeats_for(mls.len(), required);
                    let pattern = tile_pattern(&mls.as_optical(), reps);
                    let t = build_1d_transfer(&pattern, &cfg)?;
                    spectrum(&t.entries().view(), label)?.with_open_fraction(mls.open_fraction())
                }
            };
            reports.push(report);
        }
    }
    Ok(reports)
}

/// Camera flatness and light-collection summary.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DesignMetrics {
    /// Thickness-to-width ratio.
    pub twr: f64,
    /// Open-area fraction of the mask.
    pub light_fraction: f64,
}

pub fn design_metrics(
    thickness_um: f64,
    sensor_width_um: f64,
    mask: &MaskPattern,
) -> DesignMetrics {
    DesignMetrics {
        twr: thickness_um / sensor_width_um,
        light_fraction: mask.open_fraction(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron;
    use crate::seq::gen_m_sequence_default;
    use ndarray::{array, Array2};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spectrum_identity_and_diagonal() {
        let r = spectrum(&Array2::<f64>::eye(5).view(), "eye").unwrap();
        assert!(r.singular_values.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!((r.condition_number - 1.0).abs() < 1e-12);

        let d = array![[3.0, 0.0], [0.0, 1.0]];
        let r = spectrum(&d.view(), "diag").unwrap();
        assert!((r.singular_values[0] - 3.0).abs() < 1e-12);
        assert!((r.singular_values[1] - 1.0).abs() < 1e-12);
        assert!((r.condition_number - 3.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_matches_gram_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = Array2::from_shape_fn((16, 16), |_| rng.random::<f64>() - 0.5);
        let r = spectrum(&a.view(), "random").unwrap();
        // eigenvalues of A^T A via the same backend, independent route
        let gram = a.t().dot(&a);
        let mut eig = crate::linalg::singular_values(&gram.view()).unwrap().to_vec();
        // A^T A is symmetric PSD: its singular values are its eigenvalues
        eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for (s, e) in r.singular_values.iter().zip(eig.iter()) {
            assert!((s - e.sqrt()).abs() < 1e-8, "{s} vs {}", e.sqrt());
        }
    }

    #[test]
    fn spectrum_invariant_under_permutation_and_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = Array2::from_shape_fn((10, 10), |_| rng.random::<f64>());
        let base = spectrum(&a.view(), "a").unwrap();
        // reverse rows
        let mut p = Array2::zeros((10, 10));
        for i in 0..10 {
            p[[i, 9 - i]] = 1.0;
        }
        let permuted = spectrum(&p.dot(&a).view(), "pa").unwrap();
        for (x, y) in base
            .singular_values
            .iter()
            .zip(permuted.singular_values.iter())
        {
            assert!((x - y).abs() < 1e-10);
        }
        let scaled = spectrum(&a.mapv(|v| -2.0 * v).view(), "2a").unwrap();
        for (x, y) in base.singular_values.iter().zip(scaled.singular_values.iter()) {
            assert!((2.0 * x - y).abs() < 1e-10);
        }
        assert!((scaled.condition_number - base.condition_number).abs() < 1e-8);
    }

    #[test]
    fn transparency_families_have_positive_spectra() {
        // reduced-size smoke run of the comparison harness
        let cfg = comparison_config(32);
        let fams = compare_transparency(&cfg, &[1, 2, 3]).unwrap();
        assert_eq!(fams.len(), 4);
        for f in &fams {
            for r in &f.runs {
                assert!(r.sigma_max > 0.0, "{}", f.label);
            }
        }
        assert_eq!(fams[0].runs.len(), 1); // deterministic M-sequence
        assert_eq!(fams[1].runs.len(), 3);
    }

    #[test]
    fn separability_dense_spectra_of_separable_mask_factorize() {
        // dense spectrum of a separable mask = sorted tensor products of the
        // factor spectra
        let n = 12;
        let cfg = comparison_config(n);
        let seq = gen_m_sequence_default(6).unwrap();
        let required = required_pattern_len(&cfg, &BuildOptions::default()).unwrap();
        let reps = repeats_for(seq.len(), required);
        let mask = outer_mask(&seq, &seq, reps);
        let (rp, cp) = mask.factors().unwrap();
        let sys = crate::optics::build_separable_system(rp, cp, &cfg).unwrap();
        let dense = build_dense_transfer(&mask, &cfg).unwrap();
        let dense_spec = spectrum(&dense.phi().view(), "dense").unwrap();
        let sl = crate::linalg::singular_values(&sys.phi_l().entries().view()).unwrap();
        let sr = crate::linalg::singular_values(&sys.phi_r().entries().view()).unwrap();
        let mut tensor: Vec<f64> = sl
            .iter()
            .flat_map(|a| sr.iter().map(move |b| a * b))
            .collect();
        tensor.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for (d, t) in dense_spec.singular_values.iter().zip(tensor.iter()) {
            assert!((d - t).abs() <= 1e-8 * tensor[0], "{d} vs {t}");
        }
        // sanity: kron assembles to the same matrix
        let k = kron(
            &sys.phi_r().entries().view(),
            &sys.phi_l().entries().view(),
        );
        assert!(crate::linalg::relative_frobenius_diff(dense.phi(), &k.view()) < 1e-10);
    }

    #[test]
    fn separability_comparison_emits_four_reports() {
        let reports = compare_separability(8, 5).unwrap();
        assert_eq!(reports.len(), 4);
        let labels: Vec<&str> = reports.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(
            labels,
            vec![
                "nonsep-random-binary",
                "nonsep-uniform",
                "sep-mls",
                "sep-binary"
            ]
        );
        for r in &reports {
            assert!(r.sigma_max > 0.0);
            assert!(r.open_fraction.unwrap() > 0.2);
        }
    }

    #[test]
    fn design_metrics_prototype_values() {
        let seq = gen_m_sequence_default(8).unwrap();
        let mask = to_optical(&outer_mask(&seq, &seq, 2)).unwrap();
        let m = design_metrics(500.0, 6700.0, &mask);
        assert!((m.twr - 0.0746).abs() < 5e-4);
        assert!((m.twr - 0.075).abs() < 0.001);
        assert!((m.light_fraction - 0.5).abs() < 0.01);
        let open = crate::seq::gen_pinhole(4, 4).unwrap();
        assert_eq!(design_metrics(1.0, 10.0, &open).light_fraction, 1.0);
    }
}
