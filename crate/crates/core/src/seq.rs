//! Mask pattern generation: maximum-length sequences, Hadamard matrices,
//! random/uniform/pinhole baselines, and the signed <-> optical conversion.

use crate::error::{Error, Result};
use ndarray::Array2;
use rand::prelude::*;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

/// A 1-D pattern with entries in {-1, +1}.
///
/// For a maximum-length sequence of degree `r` the length is `2^r - 1` and the
/// periodic autocorrelation is two-valued: `L` at lag 0 and `-1` everywhere else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignSequence {
    values: Vec<i8>,
}

impl SignSequence {
    /// Build from raw +/-1 values. Panics on any other entry.
    pub fn from_values(values: Vec<i8>) -> Self {
        assert!(
            values.iter().all(|&v| v == 1 || v == -1),
            "sign sequence entries must be +1 or -1"
        );
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    /// Entries as +/-1.0 floats (the signed mask transmittance).
    pub fn as_signed(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }

    /// Entries mapped to {0, 1} via (v + 1) / 2.
    pub fn as_optical(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|&v| (f64::from(v) + 1.0) / 2.0)
            .collect()
    }

    /// Concatenate `repeats` copies of the sequence.
    pub fn tiled(&self, repeats: usize) -> SignSequence {
        assert!(repeats >= 1, "repeats must be positive");
        let mut values = Vec::with_capacity(self.values.len() * repeats);
        for _ in 0..repeats {
            values.extend_from_slice(&self.values);
        }
        SignSequence { values }
    }

    /// Periodic autocorrelation sum_i s[i] * s[(i + lag) mod L].
    pub fn periodic_autocorrelation(&self, lag: usize) -> i64 {
        let l = self.values.len();
        (0..l)
            .map(|i| i64::from(self.values[i]) * i64::from(self.values[(i + lag) % l]))
            .sum()
    }

    /// Fraction of +1 entries (the open fraction of the optical form).
    pub fn open_fraction(&self) -> f64 {
        let ones = self.values.iter().filter(|&&v| v == 1).count();
        ones as f64 / self.values.len() as f64
    }
}

/// Default primitive tap polynomial for a given LFSR degree, as a bitmask of
/// the coefficients of x^0 .. x^(r-1). Degree 8 uses x^8 + x^4 + x^3 + x^2 + 1.
pub fn default_primitive_taps(degree: u32) -> Option<u64> {
    let taps = match degree {
        2 => 0b11,
        3 => 0b011,
        4 => 0b0011,
        5 => 0b0_0101,
        6 => 0b00_0011,
        7 => 0b000_1001,
        8 => 0b0001_1101,
        9 => 0b0_0001_0001,
        10 => 0b00_0000_1001,
        11 => 0b000_0000_0101,
        12 => 0b0000_0101_0011,
        13 => 0b0_0000_0001_1011,
        14 => 0b01_0000_0100_0011,
        15 => 0b000_0000_0000_0011,
        16 => 0b0110_1000_0000_0001,
        _ => return None,
    };
    Some(taps)
}

/// Generate a maximum-length +/-1 sequence from a Fibonacci LFSR.
///
/// `taps` is the polynomial bitmask (bit i = coefficient of x^i); the output
/// bit is the register LSB and feedback enters at bit `degree - 1`. Output
/// bits map to signs as 1 -> +1, 0 -> -1. The full cycle is checked: if the
/// register revisits the seed before 2^degree - 1 steps the tap polynomial is
/// not primitive and `NotMaximalLength` is returned.
pub fn gen_m_sequence(degree: u32, taps: u64, seed_state: u64) -> Result<SignSequence> {
    if !(2..=16).contains(&degree) {
        return Err(Error::Validation(format!(
            "LFSR degree must be in [2, 16], got {degree}"
        )));
    }
    let mask = (1u64 << degree) - 1;
    if taps & mask == 0 {
        return Err(Error::Validation(
            "tap bitmask encodes the zero polynomial".into(),
        ));
    }
    if taps > mask {
        return Err(Error::Validation(format!(
            "tap bitmask 0x{taps:x} has coefficients at or above x^{degree}"
        )));
    }
    let seed = seed_state & mask;
    if seed == 0 {
        return Err(Error::ZeroSeed);
    }

    let expected = (1usize << degree) - 1;
    let mut state = seed;
    let mut values = Vec::with_capacity(expected);
    for step in 0..expected {
        values.push(if state & 1 == 1 { 1i8 } else { -1i8 });
        let feedback = (state & taps).count_ones() as u64 & 1;
        state = (state >> 1) | (feedback << (degree - 1));
        if state == seed && step + 1 < expected {
            return Err(Error::NotMaximalLength {
                period: step + 1,
                expected,
            });
        }
    }
    if state != seed {
        // Cycle longer than 2^r - 1 is impossible for a nonzero LFSR, so the
        // seed sits on a shorter cycle of a non-primitive polynomial.
        return Err(Error::NotMaximalLength {
            period: expected,
            expected,
        });
    }
    Ok(SignSequence { values })
}

/// Convenience wrapper using the default primitive polynomial and an all-ones
/// initial register.
pub fn gen_m_sequence_default(degree: u32) -> Result<SignSequence> {
    let taps = default_primitive_taps(degree).ok_or_else(|| {
        Error::Validation(format!("no default primitive polynomial for degree {degree}"))
    })?;
    gen_m_sequence(degree, taps, (1u64 << degree) - 1)
}

/// Mask representation: signed {-1,+1} mathematics or optical [0,1] transmittance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskForm {
    Signed,
    Optical,
}

/// A 2-D mask pattern. Entries are transmittance values; `Signed` masks hold
/// {-1,+1} and `Optical` masks hold [0,1] (0 = opaque, 1 = transparent).
#[derive(Debug, Clone)]
pub struct MaskPattern {
    transmittance: Array2<f64>,
    form: MaskForm,
    feature_size_um: Option<f64>,
    /// Separable factors (row pattern, column pattern) when the mask was built
    /// as an outer product. Retained through `to_optical` for bookkeeping even
    /// though the 0/1 mask itself is no longer separable.
    factors: Option<(Vec<f64>, Vec<f64>)>,
}

impl MaskPattern {
    pub fn new(transmittance: Array2<f64>, form: MaskForm) -> Self {
        Self {
            transmittance,
            form,
            feature_size_um: None,
            factors: None,
        }
    }

    pub fn with_feature_size(mut self, delta_um: f64) -> Self {
        self.feature_size_um = Some(delta_um);
        self
    }

    pub fn transmittance(&self) -> &Array2<f64> {
        &self.transmittance
    }

    pub fn form(&self) -> MaskForm {
        self.form
    }

    pub fn feature_size_um(&self) -> Option<f64> {
        self.feature_size_um
    }

    pub fn factors(&self) -> Option<(&[f64], &[f64])> {
        self.factors
            .as_ref()
            .map(|(r, c)| (r.as_slice(), c.as_slice()))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.transmittance.dim()
    }

    /// Fraction of transmitted light: mean transmittance of the optical form.
    pub fn open_fraction(&self) -> f64 {
        let n = self.transmittance.len() as f64;
        match self.form {
            MaskForm::Optical => self.transmittance.sum() / n,
            MaskForm::Signed => self.transmittance.mapv(|v| (v + 1.0) / 2.0).sum() / n,
        }
    }
}

/// Outer product of two sign sequences, each tiled `repeats` times.
/// The result is a signed mask M with M[i, j] = row[i] * col[j].
pub fn outer_mask(row_seq: &SignSequence, col_seq: &SignSequence, repeats: usize) -> MaskPattern {
    assert!(!row_seq.is_empty() && !col_seq.is_empty(), "factors must be nonempty");
    assert!(repeats >= 1, "repeats must be positive");
    let r = row_seq.tiled(repeats).as_signed();
    let c = col_seq.tiled(repeats).as_signed();
    let mut m = Array2::zeros((r.len(), c.len()));
    for (i, &ri) in r.iter().enumerate() {
        for (j, &cj) in c.iter().enumerate() {
            m[[i, j]] = ri * cj;
        }
    }
    MaskPattern {
        transmittance: m,
        form: MaskForm::Signed,
        feature_size_um: None,
        factors: Some((r, c)),
    }
}

/// Convert a signed mask to the optically feasible form by mapping every
/// entry v to (v + 1) / 2, i.e. -1 becomes opaque and +1 transparent.
pub fn to_optical(mask: &MaskPattern) -> Result<MaskPattern> {
    if mask.form != MaskForm::Signed {
        return Err(Error::WrongForm { expected: "signed" });
    }
    Ok(MaskPattern {
        transmittance: mask.transmittance.mapv(|v| (v + 1.0) / 2.0),
        form: MaskForm::Optical,
        feature_size_um: mask.feature_size_um,
        factors: mask.factors.clone(),
    })
}

/// Sylvester-construction Hadamard matrix with exact integer entries.
#[derive(Debug, Clone)]
pub struct HadamardMatrix {
    entries: Array2<i32>,
    order: usize,
}

impl HadamardMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entries(&self) -> &Array2<i32> {
        &self.entries
    }

    pub fn as_f64(&self) -> Array2<f64> {
        self.entries.mapv(f64::from)
    }

    /// Column k as +/-1.0 floats.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.entries.column(k).iter().map(|&v| f64::from(v)).collect()
    }
}

/// Sylvester construction: H(2n) = [[H, H], [H, -H]]. `order` must be a power
/// of two; H * H^T = order * I holds exactly in integer arithmetic.
pub fn gen_hadamard(order: usize) -> Result<HadamardMatrix> {
    if order == 0 || !order.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(order));
    }
    let mut h = Array2::from_elem((1, 1), 1i32);
    let mut n = 1;
    while n < order {
        let mut next = Array2::zeros((2 * n, 2 * n));
        for i in 0..n {
            for j in 0..n {
                let v = h[[i, j]];
                next[[i, j]] = v;
                next[[i, j + n]] = v;
                next[[i + n, j]] = v;
                next[[i + n, j + n]] = -v;
            }
        }
        h = next;
        n *= 2;
    }
    Ok(HadamardMatrix { entries: h, order })
}

/// Random +/-1 sequence with exactly floor(open_fraction * n) entries equal
/// to +1, placed by a seeded shuffle. Deterministic for a fixed seed.
pub fn gen_random_binary(n: usize, open_fraction: f64, rng_seed: u64) -> Result<SignSequence> {
    if n == 0 {
        return Err(Error::Validation("sequence length must be positive".into()));
    }
    if !(open_fraction > 0.0 && open_fraction < 1.0) {
        return Err(Error::BadFraction(open_fraction));
    }
    let ones = (open_fraction * n as f64).floor() as usize;
    let mut values = vec![-1i8; n];
    for v in values.iter_mut().take(ones) {
        *v = 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    values.shuffle(&mut rng);
    Ok(SignSequence { values })
}

/// 2-D random binary mask: n x n signed entries with exactly
/// floor(open_fraction * n^2) entries equal to +1.
pub fn gen_random_binary_mask(n: usize, open_fraction: f64, rng_seed: u64) -> Result<MaskPattern> {
    let flat = gen_random_binary(n * n, open_fraction, rng_seed)?;
    let values: Vec<f64> = flat.as_signed();
    let m = Array2::from_shape_vec((n, n), values)
        .expect("length n*n by construction");
    Ok(MaskPattern::new(m, MaskForm::Signed))
}

/// 1-D grayscale pattern with entries drawn uniformly from [0, 1].
pub fn gen_uniform_random_seq(n: usize, rng_seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// 2-D grayscale mask with entries drawn uniformly from [0, 1].
pub fn gen_uniform_random(n: usize, rng_seed: u64) -> MaskPattern {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let m = Array2::from_shape_fn((n, n), |_| rng.random::<f64>());
    MaskPattern::new(m, MaskForm::Optical)
}

/// 1-D pinhole: a centered run of `width_features` open features, opaque
/// elsewhere.
pub fn gen_pinhole_seq(n: usize, width_features: usize) -> Result<Vec<f64>> {
    if width_features == 0 || width_features > n {
        return Err(Error::WidthTooLarge {
            width: width_features,
            len: n,
        });
    }
    let start = (n - width_features) / 2;
    let mut v = vec![0.0; n];
    for x in v.iter_mut().skip(start).take(width_features) {
        *x = 1.0;
    }
    Ok(v)
}

/// 2-D pinhole mask (optical form): a centered square of open features.
pub fn gen_pinhole(n: usize, width_features: usize) -> Result<MaskPattern> {
    let line = gen_pinhole_seq(n, width_features)?;
    let mut m = Array2::zeros((n, n));
    for (i, &ri) in line.iter().enumerate() {
        for (j, &cj) in line.iter().enumerate() {
            m[[i, j]] = ri * cj;
        }
    }
    Ok(MaskPattern {
        transmittance: m,
        form: MaskForm::Optical,
        feature_size_um: None,
        factors: Some((line.clone(), line)),
    })
}

/// Tile a 1-D pattern of transmittance values `repeats` times.
pub fn tile_pattern(pattern: &[f64], repeats: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(pattern.len() * repeats);
    for _ in 0..repeats {
        out.extend_from_slice(pattern);
    }
    out
}
