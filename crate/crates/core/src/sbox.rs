//! Vectorial Boolean function metrics: coordinate and component functions,
//! S-box nonlinearity and degree, bijectivity, and the space of linear
//! components.

use crate::boolfun::{LocalRule, TruthTable};
use crate::ca::NoBoundaryCA;
use crate::gf2;
use std::fmt;

/// Errors from S-box construction and component selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SboxError {
    /// Width outside 1..=16.
    Width(usize),
    /// Table length is not `2^n` or an entry does not fit `n` bits.
    MalformedTable,
    /// The zero selector is not a component.
    ZeroSelector,
    /// Selector has bits above the S-box width.
    SelectorRange { v: u16, n: usize },
    /// CA length must cover the rule diameter.
    LengthTooShort { n: usize, diameter: usize },
}

impl fmt::Display for SboxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SboxError::Width(n) => write!(f, "S-box width {n} outside supported range 1..=16"),
            SboxError::MalformedTable => write!(f, "table length or entry range is wrong"),
            SboxError::ZeroSelector => write!(f, "component selector must be nonzero"),
            SboxError::SelectorRange { v, n } => {
                write!(f, "selector {v:#x} does not fit {n} output bits")
            }
            SboxError::LengthTooShort { n, diameter } => {
                write!(f, "CA length {n} shorter than rule diameter {diameter}")
            }
        }
    }
}

impl std::error::Error for SboxError {}

/// Nonzero linear combination of output coordinates; bit `n - j` of the
/// word selects coordinate `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComponentSelector(u16);

impl ComponentSelector {
    pub fn new(v: u16, n: usize) -> Result<Self, SboxError> {
        if v == 0 {
            return Err(SboxError::ZeroSelector);
        }
        if n < 16 && v >> n != 0 {
            return Err(SboxError::SelectorRange { v, n });
        }
        Ok(ComponentSelector(v))
    }

    pub fn word(&self) -> u16 {
        self.0
    }
}

/// Lookup-table S-box on `n` input and output bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SBox {
    n: usize,
    table: Vec<u16>,
}

impl SBox {
    pub fn new(n: usize, table: Vec<u16>) -> Result<Self, SboxError> {
        if n == 0 || n > 16 {
            return Err(SboxError::Width(n));
        }
        if table.len() != 1 << n {
            return Err(SboxError::MalformedTable);
        }
        if n < 16 && table.iter().any(|&e| e >> n != 0) {
            return Err(SboxError::MalformedTable);
        }
        Ok(SBox { n, table })
    }

    pub fn identity(n: usize) -> Result<Self, SboxError> {
        SBox::new(n, (0..1u32 << n).map(|x| x as u16).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &[u16] {
        &self.table
    }

    pub fn get(&self, x: usize) -> u16 {
        self.table[x]
    }

    /// True when the table is a permutation of `{0, .., 2^n - 1}`.
    pub fn is_bijective(&self) -> bool {
        let mut seen = vec![0u64; self.table.len().div_ceil(64)];
        for &e in &self.table {
            let (w, bit) = ((e >> 6) as usize, 1u64 << (e & 63));
            if seen[w] & bit != 0 {
                return false;
            }
            seen[w] |= bit;
        }
        true
    }

    /// Truth table of `x -> parity(v & S(x))`.
    pub fn component_function(&self, v: ComponentSelector) -> TruthTable {
        let v = v.word();
        TruthTable::from_fn(self.n, |x| (v & self.table[x]).count_ones() & 1 == 1)
            .expect("n <= 16")
    }

    /// Truth table of output coordinate `j` (1-based, coordinate 1 is the
    /// most significant output bit).
    pub fn coordinate_function(&self, j: usize) -> TruthTable {
        assert!(j >= 1 && j <= self.n, "coordinate out of range");
        let v = ComponentSelector::new(1 << (self.n - j), self.n).expect("unit selector");
        self.component_function(v)
    }

    /// Minimum nonlinearity over all nonzero components. With `early_exit`
    /// the scan stops at the first linear component; the probing order puts
    /// selectors pairing coordinate `i` with coordinate `i + b` first (the
    /// combinations that collapse first on superposition S-boxes of rules
    /// sharing nonlinear ANF terms), then every selector touching both
    /// output halves, so the common linear case exits after about `b`
    /// probes. Both modes return the same value on every input.
    pub fn nonlinearity(&self, early_exit: bool) -> u32 {
        let mut min = u32::MAX;
        for v in self.selector_scan_order() {
            let sel = ComponentSelector::new(v, self.n).expect("nonzero in-range");
            let nl = self.component_function(sel).nonlinearity();
            min = min.min(nl);
            if early_exit && min == 0 {
                return 0;
            }
        }
        min
    }

    fn selector_scan_order(&self) -> Vec<u16> {
        let n = self.n;
        let all: u32 = 1 << n;
        if !n.is_multiple_of(2) {
            return (1..all).map(|v| v as u16).collect();
        }
        let b = n / 2;
        let lo_mask: u32 = (1 << b) - 1;
        let mut order: Vec<u16> = Vec::with_capacity(all as usize - 1);
        for i in 1..=b {
            order.push(((1 << (n - i)) | (1 << (b - i))) as u16);
        }
        let unit_pair = |v: u32| {
            let hi = v >> b;
            hi == v & lo_mask && hi.is_power_of_two()
        };
        let paired = |v: u32| v >> b != 0 && v & lo_mask != 0;
        order.extend(
            (1..all)
                .filter(|&v| paired(v) && !unit_pair(v))
                .map(|v| v as u16),
        );
        order.extend((1..all).filter(|&v| !paired(v)).map(|v| v as u16));
        debug_assert_eq!(order.len(), all as usize - 1);
        order
    }

    /// Maximum algebraic degree over the `n` coordinate functions.
    pub fn algebraic_degree(&self) -> usize {
        (1..=self.n)
            .map(|j| self.coordinate_function(j).algebraic_degree())
            .max()
            .unwrap_or(0)
    }

    /// All selectors whose component has nonlinearity 0 (affine components,
    /// constant term permitted), together with the dimension and reduced
    /// row echelon basis of the subspace they span with the zero vector.
    ///
    /// Components are scanned in Gray-code order so each candidate table is
    /// one bit-plane XOR away from the previous one; a component is affine
    /// exactly when its ANF has no monomial of degree 2 or more.
    pub fn linear_components_space(&self) -> LcsResult {
        let n = self.n;
        let size = 1usize << n;
        let words = size.div_ceil(64);
        // bit-plane j: packed truth table of output bit j (machine order)
        let mut planes = vec![vec![0u64; words]; n];
        for (x, &e) in self.table.iter().enumerate() {
            for (j, plane) in planes.iter_mut().enumerate() {
                plane[x >> 6] |= (((e >> j) & 1) as u64) << (x & 63);
            }
        }
        let affine_mask = affine_coeff_mask(n);
        let mut current = vec![0u64; words];
        let mut scratch = vec![0u64; words];
        let mut members: Vec<u16> = Vec::new();
        let mut gray_prev = 0u32;
        for i in 1..1u32 << n {
            let gray = i ^ (i >> 1);
            let flipped = (gray ^ gray_prev).trailing_zeros() as usize;
            gray_prev = gray;
            for (c, p) in current.iter_mut().zip(&planes[flipped]) {
                *c ^= p;
            }
            scratch.copy_from_slice(&current);
            if is_affine_anf(&mut scratch, n, &affine_mask) {
                members.push(gray as u16);
            }
        }
        members.sort_unstable();
        let rows: Vec<u64> = members.iter().map(|&v| v as u64).collect();
        let basis: Vec<u16> = gf2::reduced_row_echelon(&rows, n)
            .into_iter()
            .map(|r| r as u16)
            .collect();
        LcsResult {
            n,
            dimension: basis.len(),
            members,
            basis,
        }
    }

    /// Whitespace-separated decimal entries in input order.
    pub fn to_text(&self) -> String {
        self.table
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// JSON array of integers in input order.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(self.table.iter().map(|&e| serde_json::Value::from(e)).collect())
    }
}

impl fmt::Display for SBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Packed mask of monomial indices with Hamming weight at most 1.
fn affine_coeff_mask(n: usize) -> Vec<u64> {
    let size = 1usize << n;
    let mut mask = vec![0u64; size.div_ceil(64)];
    mask[0] |= 1;
    for j in 0..n {
        let u = 1usize << j;
        mask[u >> 6] |= 1u64 << (u & 63);
    }
    mask
}

/// Destructively turns `words` into ANF coefficients and checks degree <= 1.
fn is_affine_anf(words: &mut [u64], n: usize, affine_mask: &[u64]) -> bool {
    crate::boolfun::mobius_in_place(words, n);
    words.iter().zip(affine_mask).all(|(w, m)| w & !m == 0)
}

/// Members of the linear components space with its dimension and canonical
/// basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LcsResult {
    n: usize,
    dimension: usize,
    members: Vec<u16>,
    basis: Vec<u16>,
}

impl LcsResult {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Selectors with a linear component, ascending as integers.
    pub fn members(&self) -> &[u16] {
        &self.members
    }

    /// Reduced row echelon basis, pivot columns leftmost.
    pub fn basis(&self) -> &[u16] {
        &self.basis
    }

    /// `{n, dimension, basis (hex rows), generator_poly (if classified)}`.
    pub fn to_json(&self, generator_poly: Option<String>) -> serde_json::Value {
        let mut obj = serde_json::Map::new();
        obj.insert("n".into(), self.n.into());
        obj.insert("dimension".into(), self.dimension.into());
        obj.insert(
            "basis".into(),
            serde_json::Value::Array(
                self.basis
                    .iter()
                    .map(|r| serde_json::Value::from(format!("{r:x}")))
                    .collect(),
            ),
        );
        if let Some(g) = generator_poly {
            obj.insert("generator_poly".into(), g.into());
        }
        serde_json::Value::Object(obj)
    }
}

/// Checks that every nonzero component of the no-boundary CA of length `n`
/// has the same algebraic degree as the local rule itself. Exhaustive over
/// the `2^(n-d+1) - 1` selectors.
pub fn coordinate_degree_check(rule: &LocalRule, n: usize) -> Result<bool, SboxError> {
    if n < rule.diameter() {
        return Err(SboxError::LengthTooShort {
            n,
            diameter: rule.diameter(),
        });
    }
    if n > 16 {
        return Err(SboxError::Width(n));
    }
    let ca = NoBoundaryCA::new(rule.clone(), n).map_err(|_| SboxError::Width(n))?;
    let out_len = ca.output_len();
    let outputs: Vec<u16> = (0..1u64 << n)
        .map(|x| ca.apply(x).expect("in range") as u16)
        .collect();
    let rule_degree = rule.algebraic_degree();
    for v in 1..1u32 << out_len {
        let t = TruthTable::from_fn(n, |x| (v & outputs[x] as u32).count_ones() & 1 == 1)
            .expect("n <= 16");
        if t.algebraic_degree() != rule_degree {
            return Ok(false);
        }
    }
    Ok(true)
}
