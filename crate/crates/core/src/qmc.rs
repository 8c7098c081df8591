//! Embedded base-2 rank-1 lattice sequences with a single random shift.
//!
//! Point `i` is `frac(phi(i) z + shift) - 1/2`, where `phi` is the base-2
//! radical inverse (van der Corput) in `m_max` bits. Because `phi` maps
//! `{0, .., 2^m - 1}` onto `{k / 2^m}`, every prefix of length `2^m` is a
//! complete shifted rank-1 lattice rule with generating vector
//! `z mod 2^m`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::coefficient::ParameterPoint;

/// Largest supported `m_max`; indices and `z` products stay inside `u64`.
pub const MAX_LEVEL: u32 = 32;

/// Default multiplier of the Korobov fallback vector.
///
/// Not a published vector: it was picked by a small search over odd
/// multipliers, minimising the shift-averaged worst-case error with
/// product weights `j^-2` (the decay of the sine basis) at `N = 2^8, 2^12,
/// 2^16`, `s = 100`.
pub const DEFAULT_KOROBOV_MULTIPLIER: u64 = 924_681;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QmcError {
    #[error("index {index} outside 0..2^{m_max}")]
    IndexOutOfRange { index: u64, m_max: u32 },
    #[error("m_max = {0} exceeds the supported maximum {MAX_LEVEL}")]
    LevelTooLarge(u32),
    #[error("generating vector must be non-empty")]
    EmptyVector,
    #[error("generating vector component z[{index}] = {value} is even")]
    EvenComponent { index: usize, value: u64 },
    #[error("line {line}: cannot parse {token:?} as a non-negative integer")]
    Parse { line: usize, token: String },
    #[error("line {line}: expected one or two columns, found {found}")]
    Columns { line: usize, found: usize },
    #[error("generating vector has {available} entries, {requested} requested")]
    Dimension { available: usize, requested: usize },
    #[error("shift has {got} components, lattice has {need}")]
    ShiftDimension { got: usize, need: usize },
}

/// Bit reversal of `i` in `m_max` bits: the numerator of the van der
/// Corput point with denominator `2^m_max`.
#[inline]
pub fn reversed_index(i: u64, m_max: u32) -> u64 {
    if m_max == 0 {
        0
    } else {
        i.reverse_bits() >> (64 - m_max)
    }
}

/// Van der Corput point `phi(i)` in `[0, 1)`.
pub fn radical_inverse_base2(i: u64, m_max: u32) -> Result<f64, QmcError> {
    check_index(i, m_max)?;
    Ok(reversed_index(i, m_max) as f64 / (1u64 << m_max) as f64)
}

fn check_index(i: u64, m_max: u32) -> Result<(), QmcError> {
    if m_max > MAX_LEVEL {
        return Err(QmcError::LevelTooLarge(m_max));
    }
    if i >= 1u64 << m_max {
        return Err(QmcError::IndexOutOfRange { index: i, m_max });
    }
    Ok(())
}

/// SplitMix64 generator (Steele, Lea and Flood).
///
/// `state += 0x9E3779B97F4A7C15`, then the output is `state` passed through
/// `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`,
/// `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`, `z ^ (z >> 31)`, all modulo
/// `2^64`.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(Self::GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Top 53 bits scaled into `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// The `s`-dimensional random shift drawn from `seed`.
pub fn random_shift(seed: u64, s: usize) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    (0..s).map(|_| rng.next_f64()).collect()
}

/// Korobov generating vector `z_j = a^(j-1) mod 2^m_max`.
///
/// All components are odd when `a` is odd.
pub fn korobov_vector(a: u64, s: usize, m_max: u32) -> Vec<u64> {
    let mask = level_mask(m_max);
    let mut z = Vec::with_capacity(s);
    let mut power = 1u64 & mask;
    for _ in 0..s {
        z.push(power);
        power = power.wrapping_mul(a) & mask;
    }
    z
}

fn level_mask(m_max: u32) -> u64 {
    if m_max >= 64 {
        u64::MAX
    } else {
        (1u64 << m_max) - 1
    }
}

/// Generating vector read from a text file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedGeneratingVector {
    pub values: Vec<u64>,
    /// Zero-based positions of even entries; such a vector is not
    /// extensible in base 2.
    pub even_entries: Vec<usize>,
}

impl ParsedGeneratingVector {
    pub fn has_even_entries(&self) -> bool {
        !self.even_entries.is_empty()
    }

    /// The first `s` components.
    pub fn take(&self, s: usize) -> Result<Vec<u64>, QmcError> {
        if self.values.len() < s {
            return Err(QmcError::Dimension {
                available: self.values.len(),
                requested: s,
            });
        }
        Ok(self.values[..s].to_vec())
    }
}

/// Parses a generating vector: one integer per line, or `index value`
/// pairs; `#` starts a comment; blank lines are ignored.
pub fn parse_generating_vector(text: &str) -> Result<ParsedGeneratingVector, QmcError> {
    let mut values = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let token = match tokens.as_slice() {
            [value] | [_, value] => *value,
            _ => {
                return Err(QmcError::Columns {
                    line: line_no + 1,
                    found: tokens.len(),
                })
            }
        };
        if let [index, _] = tokens.as_slice() {
            index.parse::<u64>().map_err(|_| QmcError::Parse {
                line: line_no + 1,
                token: index.to_string(),
            })?;
        }
        let value = token.parse::<u64>().map_err(|_| QmcError::Parse {
            line: line_no + 1,
            token: token.to_string(),
        })?;
        values.push(value);
    }
    if values.is_empty() {
        return Err(QmcError::EmptyVector);
    }
    let even_entries = values
        .iter()
        .enumerate()
        .filter(|(_, v)| *v % 2 == 0)
        .map(|(i, _)| i)
        .collect();
    Ok(ParsedGeneratingVector {
        values,
        even_entries,
    })
}

/// How the random shift is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftSpec {
    /// Shift drawn from SplitMix64 with this seed.
    Seeded(u64),
    /// Unshifted lattice (for validation).
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSequence {
    z: Vec<u64>,
    m_max: u32,
    shift: Vec<f64>,
    shift_spec: ShiftSpec,
}

impl LatticeSequence {
    pub fn new(z: Vec<u64>, m_max: u32, shift: ShiftSpec) -> Result<Self, QmcError> {
        if z.is_empty() {
            return Err(QmcError::EmptyVector);
        }
        if m_max > MAX_LEVEL {
            return Err(QmcError::LevelTooLarge(m_max));
        }
        if let Some((index, &value)) = z.iter().enumerate().find(|(_, v)| *v % 2 == 0) {
            return Err(QmcError::EvenComponent { index, value });
        }
        let shift_values = match shift {
            ShiftSpec::Seeded(seed) => random_shift(seed, z.len()),
            ShiftSpec::None => vec![0.0; z.len()],
        };
        Ok(Self {
            z,
            m_max,
            shift: shift_values,
            shift_spec: shift,
        })
    }

    /// Lattice with an explicit shift vector.
    pub fn with_shift_values(z: Vec<u64>, m_max: u32, shift: Vec<f64>) -> Result<Self, QmcError> {
        if shift.len() != z.len() {
            return Err(QmcError::ShiftDimension {
                got: shift.len(),
                need: z.len(),
            });
        }
        let mut seq = Self::new(z, m_max, ShiftSpec::None)?;
        seq.shift = shift;
        Ok(seq)
    }

    pub fn dimension(&self) -> usize {
        self.z.len()
    }

    pub fn m_max(&self) -> u32 {
        self.m_max
    }

    pub fn len(&self) -> u64 {
        1u64 << self.m_max
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn generating_vector(&self) -> &[u64] {
        &self.z
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn shift_spec(&self) -> ShiftSpec {
        self.shift_spec
    }

    /// SHA-256 over the components of `z`, one decimal per line.
    pub fn checksum(&self) -> String {
        generating_vector_checksum(&self.z)
    }

    /// Unshifted point in `[0, 1)^s`.
    pub fn unit_point(&self, i: u64) -> Result<Vec<f64>, QmcError> {
        check_index(i, self.m_max)?;
        let r = reversed_index(i, self.m_max);
        let mask = level_mask(self.m_max);
        let scale = (1u64 << self.m_max) as f64;
        Ok(self
            .z
            .iter()
            .map(|&zj| (r.wrapping_mul(zj & mask) & mask) as f64 / scale)
            .collect())
    }

    /// Writes point `i` of `[-1/2, 1/2)^s` into `out`.
    pub fn point_into(&self, i: u64, out: &mut Vec<f64>) -> Result<(), QmcError> {
        check_index(i, self.m_max)?;
        let r = reversed_index(i, self.m_max);
        let mask = level_mask(self.m_max);
        let scale = (1u64 << self.m_max) as f64;
        out.clear();
        out.extend(self.z.iter().zip(&self.shift).map(|(&zj, &dj)| {
            let mut x = (r.wrapping_mul(zj & mask) & mask) as f64 / scale + dj;
            if x >= 1.0 {
                x -= 1.0;
            }
            x - 0.5
        }));
        Ok(())
    }

    pub fn lattice_point(&self, i: u64) -> Result<ParameterPoint, QmcError> {
        let mut y = Vec::with_capacity(self.z.len());
        self.point_into(i, &mut y)?;
        Ok(ParameterPoint::new(y).expect("lattice points lie in [-1/2, 1/2)"))
    }
}

pub fn generating_vector_checksum(z: &[u64]) -> String {
    let mut hasher = Sha256::new();
    for v in z {
        hasher.update(v.to_string().as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}
