//! Boolean functions as packed truth tables, with the three canonical
//! representations (truth table, algebraic normal form, Walsh spectrum) and
//! the metrics built on them.
//!
//! Indexing convention used everywhere in this crate: the input vector
//! `x = (x1, ..., xn)` maps to the integer `int(x)` with `x1` as the most
//! significant bit, and bit `i` of a truth table holds `f(x)` for the input
//! with `int(x) = i`. The Wolfram number of a rule is `sum bits[i] * 2^i`.

use num_bigint::BigUint;
use std::fmt;

/// Largest supported number of input variables.
pub const MAX_VARS: usize = 16;

/// Errors from truth-table and local-rule construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoolFunError {
    /// Variable count outside the supported 0..=16 range.
    VarCount(usize),
    /// Wolfram number does not fit in `2^(2^n)` values.
    WolframRange { n_vars: usize },
    /// Hex truth table with a length that is not a power of two.
    HexLength(usize),
    /// Non-hexadecimal digit in a truth-table string.
    HexDigit(char),
    /// Local rules need at least two inputs.
    Diameter(usize),
    /// Generating function has the wrong variable count for the diameter.
    GeneratingArity { expected: usize, actual: usize },
}

impl fmt::Display for BoolFunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoolFunError::VarCount(n) => {
                write!(f, "variable count {n} outside supported range 0..={MAX_VARS}")
            }
            BoolFunError::WolframRange { n_vars } => {
                write!(f, "Wolfram number out of range for {n_vars} variables")
            }
            BoolFunError::HexLength(len) => {
                write!(f, "hex truth table length {len} is not a power of two")
            }
            BoolFunError::HexDigit(c) => write!(f, "invalid hex digit {c:?} in truth table"),
            BoolFunError::Diameter(d) => write!(f, "local rule diameter {d} must be at least 2"),
            BoolFunError::GeneratingArity { expected, actual } => write!(
                f,
                "generating function has {actual} variables, diameter requires {expected}"
            ),
        }
    }
}

impl std::error::Error for BoolFunError {}

fn word_count(n_vars: usize) -> usize {
    if n_vars >= 6 {
        1 << (n_vars - 6)
    } else {
        1
    }
}

/// Mask selecting the valid low bits of the single word used when `n < 6`.
fn tail_mask(n_vars: usize) -> u64 {
    if n_vars >= 6 {
        !0
    } else {
        (1u64 << (1 << n_vars)) - 1
    }
}

/// Binary Moebius transform on a packed bit vector, in place.
///
/// Maps a truth table to its ANF coefficient vector and back (the transform
/// is an involution): output bit `u` is the XOR of input bits over all `x`
/// with `supp(x) ⊆ supp(u)`.
pub(crate) fn mobius_in_place(words: &mut [u64], n_vars: usize) {
    const MASKS: [u64; 6] = [
        0x5555_5555_5555_5555,
        0x3333_3333_3333_3333,
        0x0f0f_0f0f_0f0f_0f0f,
        0x00ff_00ff_00ff_00ff,
        0x0000_ffff_0000_ffff,
        0x0000_0000_ffff_ffff,
    ];
    for (p, &mask) in MASKS.iter().enumerate().take(n_vars.min(6)) {
        let shift = 1usize << p;
        for w in words.iter_mut() {
            *w ^= (*w & mask) << shift;
        }
    }
    for p in 6..n_vars {
        let stride = 1usize << (p - 6);
        let mut base = 0;
        while base < words.len() {
            for i in 0..stride {
                words[base + stride + i] ^= words[base + i];
            }
            base += stride * 2;
        }
    }
}

/// Truth table of a Boolean function of `n_vars` inputs, packed 64 inputs
/// per machine word.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TruthTable {
    n_vars: usize,
    words: Vec<u64>,
}

impl TruthTable {
    /// The constant-zero function of `n_vars` inputs.
    pub fn zero(n_vars: usize) -> Result<Self, BoolFunError> {
        if n_vars > MAX_VARS {
            return Err(BoolFunError::VarCount(n_vars));
        }
        Ok(TruthTable {
            n_vars,
            words: vec![0; word_count(n_vars)],
        })
    }

    /// Builds a table by evaluating `f` on every input index.
    pub fn from_fn(n_vars: usize, mut f: impl FnMut(usize) -> bool) -> Result<Self, BoolFunError> {
        let mut t = TruthTable::zero(n_vars)?;
        for x in 0..t.len() {
            if f(x) {
                t.set(x, true);
            }
        }
        Ok(t)
    }

    /// Decodes a Wolfram number: bit `i` of `number` becomes the output on
    /// the input with integer value `i`.
    pub fn from_wolfram(number: &BigUint, n_vars: usize) -> Result<Self, BoolFunError> {
        if n_vars > MAX_VARS {
            return Err(BoolFunError::VarCount(n_vars));
        }
        if number.bits() > (1u64 << n_vars) {
            return Err(BoolFunError::WolframRange { n_vars });
        }
        let mut words = vec![0u64; word_count(n_vars)];
        for (i, digit) in number.iter_u64_digits().enumerate() {
            words[i] = digit;
        }
        Ok(TruthTable { n_vars, words })
    }

    /// `from_wolfram` for numbers that fit a machine word (n_vars <= 6).
    pub fn from_wolfram_u64(number: u64, n_vars: usize) -> Result<Self, BoolFunError> {
        Self::from_wolfram(&BigUint::from(number), n_vars)
    }

    /// Encodes the table back into its Wolfram number.
    pub fn wolfram(&self) -> BigUint {
        let mut bytes = Vec::with_capacity(self.words.len() * 8);
        for w in &self.words {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        BigUint::from_bytes_le(&bytes)
    }

    /// Parses the hex serialization produced by [`TruthTable::to_hex`].
    /// The variable count is inferred from the digit count, so only tables
    /// with at least two variables (one hex digit) are representable.
    pub fn from_hex(s: &str) -> Result<Self, BoolFunError> {
        if s.is_empty() || !s.len().is_power_of_two() {
            return Err(BoolFunError::HexLength(s.len()));
        }
        if let Some(c) = s.chars().find(|c| !c.is_ascii_hexdigit()) {
            return Err(BoolFunError::HexDigit(c));
        }
        // one digit = 4 table bits = 2 variables
        let n_vars = s.len().trailing_zeros() as usize + 2;
        if n_vars > MAX_VARS {
            return Err(BoolFunError::VarCount(n_vars));
        }
        let mut t = TruthTable::zero(n_vars)?;
        for (pos, c) in s.chars().rev().enumerate() {
            let nibble = c.to_digit(16).unwrap() as u64;
            t.words[pos / 16] |= nibble << (4 * (pos % 16));
        }
        Ok(t)
    }

    /// Lowercase hex string, most significant digit first, so the bit at
    /// index `2^n - 1` is the most significant. Rule 150 at d = 3 prints
    /// as `"96"`.
    pub fn to_hex(&self) -> String {
        let digits = (self.len() / 4).max(1);
        let mut out = String::with_capacity(digits);
        for pos in (0..digits).rev() {
            let nibble = (self.words[pos / 16] >> (4 * (pos % 16))) & 0xf;
            out.push(char::from_digit(nibble as u32, 16).unwrap());
        }
        out
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Number of table entries, `2^n_vars`.
    pub fn len(&self) -> usize {
        1 << self.n_vars
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Output on the input with integer value `index`.
    pub fn bit(&self, index: usize) -> bool {
        assert!(index < self.len(), "input index out of range");
        (self.words[index >> 6] >> (index & 63)) & 1 == 1
    }

    pub fn set(&mut self, index: usize, value: bool) {
        assert!(index < self.len(), "input index out of range");
        let mask = 1u64 << (index & 63);
        if value {
            self.words[index >> 6] |= mask;
        } else {
            self.words[index >> 6] &= !mask;
        }
    }

    /// Packed words, least significant input first.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Builds a table from packed words (low `2^n` bits used).
    pub fn from_words(n_vars: usize, mut words: Vec<u64>) -> Result<Self, BoolFunError> {
        if n_vars > MAX_VARS {
            return Err(BoolFunError::VarCount(n_vars));
        }
        words.resize(word_count(n_vars), 0);
        words[word_count(n_vars) - 1] &= tail_mask(n_vars);
        Ok(TruthTable { n_vars, words })
    }

    /// Hamming weight of the truth table.
    pub fn weight(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// A function is balanced when exactly half of its outputs are one.
    pub fn is_balanced(&self) -> bool {
        self.n_vars > 0 && self.weight() as usize == self.len() / 2
    }

    pub fn xor_assign(&mut self, other: &TruthTable) {
        assert_eq!(self.n_vars, other.n_vars, "variable counts differ");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// ANF coefficients via the binary Moebius transform.
    pub fn mobius_transform(&self) -> AnfCoefficients {
        let mut words = self.words.clone();
        mobius_in_place(&mut words, self.n_vars);
        AnfCoefficients {
            n_vars: self.n_vars,
            words,
        }
    }

    /// Degree of the largest monomial in the ANF; 0 for constant functions.
    pub fn algebraic_degree(&self) -> usize {
        self.mobius_transform().degree()
    }

    /// Walsh spectrum computed with the fast butterfly, `W(a)` at index `a`.
    pub fn walsh_transform(&self) -> WalshSpectrum {
        let size = self.len();
        let mut coeffs: Vec<i32> = (0..size).map(|x| if self.bit(x) { -1 } else { 1 }).collect();
        let mut h = 1;
        while h < size {
            let mut i = 0;
            while i < size {
                for j in i..i + h {
                    let (a, b) = (coeffs[j], coeffs[j + h]);
                    coeffs[j] = a + b;
                    coeffs[j + h] = a - b;
                }
                i += 2 * h;
            }
            h *= 2;
        }
        WalshSpectrum {
            n_vars: self.n_vars,
            coeffs,
        }
    }

    /// Minimum Hamming distance to the set of affine functions,
    /// `2^(n-1) - max |W(a)| / 2`.
    pub fn nonlinearity(&self) -> u32 {
        let spectrum = self.walsh_transform();
        (self.len() as u32 - spectrum.max_abs()) / 2
    }

    /// Splits off the generating function `g` when the table has the
    /// bipermutive shape `f(x1, .., xd) = x1 ^ g(x2, .., x_{d-1}) ^ xd`,
    /// and returns `None` otherwise. For d = 2 the generating function is
    /// the 0-variable constant `f(0, 0)`.
    pub fn bipermutive_decompose(&self) -> Option<TruthTable> {
        let d = self.n_vars;
        if d < 2 {
            return None;
        }
        let m = d - 2;
        let mid_mask = (1usize << m) - 1;
        // candidate g read off the x1 = xd = 0 slice
        let mut g = TruthTable::zero(m).expect("m < MAX_VARS");
        for mid in 0..1usize << m {
            g.set(mid, self.bit(mid << 1));
        }
        for x in 0..self.len() {
            let x1 = (x >> (d - 1)) & 1;
            let xd = x & 1;
            let mid = (x >> 1) & mid_mask;
            if self.bit(x) != ((x1 ^ xd == 1) ^ g.bit(mid)) {
                return None;
            }
        }
        Some(g)
    }
}

impl fmt::Display for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// ANF coefficient vector: bit `u` is the coefficient of the monomial
/// `x^u` in the algebraic normal form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnfCoefficients {
    n_vars: usize,
    words: Vec<u64>,
}

impl AnfCoefficients {
    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn len(&self) -> usize {
        1 << self.n_vars
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coefficient of the monomial selected by `u`.
    pub fn coefficient(&self, u: usize) -> bool {
        assert!(u < self.len(), "monomial index out of range");
        (self.words[u >> 6] >> (u & 63)) & 1 == 1
    }

    /// Indices of the monomials with a nonzero coefficient, ascending.
    pub fn monomials(&self) -> Vec<usize> {
        (0..self.len()).filter(|&u| self.coefficient(u)).collect()
    }

    /// Degree of the largest monomial present; 0 for constants.
    pub fn degree(&self) -> usize {
        self.monomials()
            .iter()
            .map(|u| u.count_ones() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Recovers the truth table; the Moebius transform is an involution.
    pub fn to_truth_table(&self) -> TruthTable {
        let mut words = self.words.clone();
        mobius_in_place(&mut words, self.n_vars);
        TruthTable {
            n_vars: self.n_vars,
            words,
        }
    }

    /// Human-readable polynomial, largest monomials first. Variables are
    /// printed 1-based with `x1` the most significant input bit.
    pub fn polynomial_string(&self) -> String {
        let mut mons = self.monomials();
        if mons.is_empty() {
            return "0".to_string();
        }
        mons.sort_by_key(|&u| (std::cmp::Reverse(u.count_ones()), std::cmp::Reverse(u)));
        let n = self.n_vars;
        let terms: Vec<String> = mons
            .iter()
            .map(|&u| {
                if u == 0 {
                    return "1".to_string();
                }
                (1..=n)
                    .filter(|j| (u >> (n - j)) & 1 == 1)
                    .map(|j| format!("x{j}"))
                    .collect::<Vec<_>>()
                    .join("*")
            })
            .collect();
        terms.join(" + ")
    }
}

/// Signed Walsh spectrum, `W(a)` at index `a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalshSpectrum {
    n_vars: usize,
    coeffs: Vec<i32>,
}

impl WalshSpectrum {
    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn coeffs(&self) -> &[i32] {
        &self.coeffs
    }

    pub fn coefficient(&self, a: usize) -> i32 {
        self.coeffs[a]
    }

    pub fn max_abs(&self) -> u32 {
        self.coeffs.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    /// Sum of squared coefficients; equals `2^(2n)` for every Boolean
    /// function (Parseval).
    pub fn energy(&self) -> u64 {
        self.coeffs.iter().map(|&c| (c as i64 * c as i64) as u64).sum()
    }
}

/// A CA local rule: a diameter-`d` truth table plus its cached Wolfram
/// number and bipermutive decomposition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalRule {
    diameter: usize,
    table: TruthTable,
    generating: Option<TruthTable>,
    wolfram: BigUint,
}

impl LocalRule {
    /// Wraps a truth table of at least two variables as a local rule.
    pub fn from_table(table: TruthTable) -> Result<Self, BoolFunError> {
        let diameter = table.n_vars();
        if diameter < 2 {
            return Err(BoolFunError::Diameter(diameter));
        }
        let generating = table.bipermutive_decompose();
        let wolfram = table.wolfram();
        Ok(LocalRule {
            diameter,
            table,
            generating,
            wolfram,
        })
    }

    pub fn from_wolfram(number: &BigUint, diameter: usize) -> Result<Self, BoolFunError> {
        if diameter < 2 {
            return Err(BoolFunError::Diameter(diameter));
        }
        Self::from_table(TruthTable::from_wolfram(number, diameter)?)
    }

    pub fn from_wolfram_u64(number: u64, diameter: usize) -> Result<Self, BoolFunError> {
        Self::from_wolfram(&BigUint::from(number), diameter)
    }

    /// The unique bipermutive rule of diameter `d` with generating
    /// function `g`; inverse of [`TruthTable::bipermutive_decompose`].
    pub fn from_generating(g: &TruthTable, diameter: usize) -> Result<Self, BoolFunError> {
        if diameter < 2 {
            return Err(BoolFunError::Diameter(diameter));
        }
        if g.n_vars() != diameter - 2 {
            return Err(BoolFunError::GeneratingArity {
                expected: diameter - 2,
                actual: g.n_vars(),
            });
        }
        let m = diameter - 2;
        let mid_mask = (1usize << m) - 1;
        let table = TruthTable::from_fn(diameter, |x| {
            let x1 = (x >> (diameter - 1)) & 1;
            let xd = x & 1;
            (x1 ^ xd == 1) ^ g.bit((x >> 1) & mid_mask)
        })?;
        let wolfram = table.wolfram();
        Ok(LocalRule {
            diameter,
            table,
            generating: Some(g.clone()),
            wolfram,
        })
    }

    pub fn diameter(&self) -> usize {
        self.diameter
    }

    pub fn table(&self) -> &TruthTable {
        &self.table
    }

    /// Generating function of the central variables, present exactly when
    /// the rule is bipermutive.
    pub fn generating(&self) -> Option<&TruthTable> {
        self.generating.as_ref()
    }

    pub fn is_bipermutive(&self) -> bool {
        self.generating.is_some()
    }

    pub fn wolfram(&self) -> &BigUint {
        &self.wolfram
    }

    pub fn algebraic_degree(&self) -> usize {
        self.table.algebraic_degree()
    }

    /// Rules of degree at most one are the "linear" rules excluded by the
    /// nonlinear searches.
    pub fn is_affine(&self) -> bool {
        self.algebraic_degree() <= 1
    }
}
