//! Exhaustive enumeration of bipermutive rule pairs per diameter: pairwise
//! balancedness filtering, orthogonality testing against precomputed rule
//! tables, nonlinearity and linear-components aggregation, partitioned and
//! resumable execution, and report export.

use crate::boolfun::{LocalRule, TruthTable};
use crate::codes::{extract_generator, Classification, CodesError, Gf2Poly};
use crate::sbox::SBox;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

/// Hard cap on the precomputed rule-table store.
const TABLE_BUDGET_BYTES: usize = 1 << 30;

const CHECKPOINT_VERSION: u32 = 1;

/// Errors from search configuration, table precomputation, merging and
/// checkpoint handling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchError {
    /// Searches cover diameters 3 through 6.
    Diameter(usize),
    /// At least one worker is required.
    WorkerCount(usize),
    /// Partition range outside the generating-function index space.
    Partition { start: u64, end: u64, max: u64 },
    /// Pairwise balancedness needs equal diameters.
    DiameterMismatch { f: usize, g: usize },
    /// Rule tables need a uniform diameter and outputs that fit a byte.
    BadTableRules,
    /// Precomputed tables would exceed the memory budget.
    ResourceBudget { needed: usize, budget: usize },
    /// Reports with different settings cannot be merged.
    ConfigMismatch,
    /// Reports covering overlapping partitions cannot be merged.
    PartitionOverlap,
    /// Unreadable or inconsistent checkpoint file.
    Checkpoint(String),
    /// Report serialization or file output failed.
    Output(String),
}

impl fmt::Display for SearchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchError::Diameter(d) => write!(f, "diameter {d} outside supported range 3..=6"),
            SearchError::WorkerCount(w) => write!(f, "worker count {w} must be at least 1"),
            SearchError::Partition { start, end, max } => {
                write!(f, "partition {start}..{end} outside 0..{max}")
            }
            SearchError::DiameterMismatch { f: df, g: dg } => {
                write!(f, "rule diameters differ: {df} vs {dg}")
            }
            SearchError::BadTableRules => {
                write!(f, "rule tables need one diameter with at most 8 output bits")
            }
            SearchError::ResourceBudget { needed, budget } => {
                write!(f, "rule tables need {needed} bytes, budget is {budget}")
            }
            SearchError::ConfigMismatch => write!(f, "reports have different search settings"),
            SearchError::PartitionOverlap => write!(f, "reports cover overlapping partitions"),
            SearchError::Checkpoint(msg) => write!(f, "checkpoint: {msg}"),
            SearchError::Output(msg) => write!(f, "output: {msg}"),
        }
    }
}

impl std::error::Error for SearchError {}

/// Settings for one enumeration run.
///
/// `partition` restricts the scan to left rules whose generating-function
/// index falls in the half-open range, enabling split and resumable runs.
/// With `swap_reduced` each unordered pair is visited once (right index at
/// least the left index); the default counts ordered pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub diameter: usize,
    pub use_pb_filter: bool,
    pub exclude_linear_rules: bool,
    pub worker_count: usize,
    pub partition: Option<(u64, u64)>,
    pub swap_reduced: bool,
}

impl SearchConfig {
    pub fn new(diameter: usize) -> Self {
        SearchConfig {
            diameter,
            use_pb_filter: true,
            exclude_linear_rules: true,
            worker_count: 1,
            partition: None,
            swap_reduced: false,
        }
    }

    /// Number of generating functions (= bipermutive rules) at this
    /// diameter, `2^(2^(d-2))`.
    pub fn generating_count(&self) -> u64 {
        1u64 << (1u64 << (self.diameter - 2))
    }

    fn validate(&self) -> Result<(), SearchError> {
        if !(3..=6).contains(&self.diameter) {
            return Err(SearchError::Diameter(self.diameter));
        }
        if self.worker_count == 0 {
            return Err(SearchError::WorkerCount(0));
        }
        if let Some((start, end)) = self.partition {
            let max = self.generating_count();
            if start > end || end > max {
                return Err(SearchError::Partition { start, end, max });
            }
        }
        Ok(())
    }

    fn partition_range(&self) -> (u64, u64) {
        self.partition.unwrap_or((0, self.generating_count()))
    }
}

/// Per-rule output tables: a flat array mapping every `2^(2b)` CA input to
/// its `b`-bit output, shared read-only across workers so each
/// orthogonality test is a single pass of table lookups.
pub struct RuleTables {
    b: usize,
    inputs: usize,
    data: Vec<u8>,
}

impl RuleTables {
    /// Builds tables for rules of one diameter `d = b + 1` with `b <= 8`.
    pub fn precompute(rules: &[LocalRule]) -> Result<Self, SearchError> {
        let d = match rules.first() {
            Some(r) => r.diameter(),
            None => return Err(SearchError::BadTableRules),
        };
        if rules.iter().any(|r| r.diameter() != d) || !(2..=9).contains(&d) {
            return Err(SearchError::BadTableRules);
        }
        let b = d - 1;
        let inputs = 1usize << (2 * b);
        let needed = rules.len() * inputs;
        if needed > TABLE_BUDGET_BYTES {
            return Err(SearchError::ResourceBudget {
                needed,
                budget: TABLE_BUDGET_BYTES,
            });
        }
        let mut data = vec![0u8; needed];
        let n = 2 * b;
        let win_mask = (1usize << d) - 1;
        for (idx, rule) in rules.iter().enumerate() {
            let table = rule.table();
            let row = &mut data[idx * inputs..(idx + 1) * inputs];
            for (x, slot) in row.iter_mut().enumerate() {
                let mut out = 0u8;
                for i in 1..=b {
                    let window = (x >> (n - i - b)) & win_mask;
                    if table.bit(window) {
                        out |= 1 << (b - i);
                    }
                }
                *slot = out;
            }
        }
        Ok(RuleTables { b, inputs, data })
    }

    pub fn output_bits(&self) -> usize {
        self.b
    }

    pub fn input_count(&self) -> usize {
        self.inputs
    }

    pub fn rule_count(&self) -> usize {
        self.data.len() / self.inputs
    }

    pub fn row(&self, rule_index: usize) -> &[u8] {
        &self.data[rule_index * self.inputs..(rule_index + 1) * self.inputs]
    }

    pub fn lookup(&self, rule_index: usize, input: usize) -> u8 {
        self.data[rule_index * self.inputs + input]
    }
}

/// Pairwise balancedness: the map `x -> (f(x), g(x))` takes each of the
/// four output pairs exactly `2^(d-2)` times. Four popcounts over the
/// packed truth tables. Necessary for a bipermutive pair to be orthogonal,
/// which makes it the cheap reject in the search loop.
pub fn pairwise_balanced(f: &LocalRule, g: &LocalRule) -> Result<bool, SearchError> {
    if f.diameter() != g.diameter() {
        return Err(SearchError::DiameterMismatch {
            f: f.diameter(),
            g: g.diameter(),
        });
    }
    let quarter = (1u64 << f.diameter()) / 4;
    let total = 1u64 << f.diameter();
    let (mut n11, mut n10, mut n01) = (0u64, 0u64, 0u64);
    for (&fw, &gw) in f.table().words().iter().zip(g.table().words()) {
        n11 += (fw & gw).count_ones() as u64;
        n10 += (fw & !gw).count_ones() as u64;
        n01 += (!fw & gw).count_ones() as u64;
    }
    let n00 = total - n11 - n10 - n01;
    Ok(n11 == quarter && n10 == quarter && n01 == quarter && n00 == quarter)
}

/// One generator-polynomial class in a report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorClass {
    pub dimension: usize,
    pub generator: String,
    pub generator_mask: u64,
    pub count: u64,
}

/// Aggregated outcome of a search (or a partition of one).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchReport {
    pub diameter: usize,
    pub use_pb_filter: bool,
    pub exclude_linear_rules: bool,
    pub swap_reduced: bool,
    /// Covered left-index ranges, sorted and coalesced.
    pub partitions: Vec<(u64, u64)>,
    pub total_pairs_scanned: u64,
    /// Pairs satisfying pairwise balancedness (counted whether or not the
    /// filter is enabled, so filtered and unfiltered reports agree).
    pub pb_pairs: u64,
    pub oca_pairs: u64,
    pub by_nonlinearity: BTreeMap<u32, u64>,
    /// LCS dimensions of the nonlinearity-0 S-boxes.
    pub by_dimension: BTreeMap<usize, u64>,
    /// Generator classes, dimension descending then mask ascending.
    pub by_generator: Vec<GeneratorClass>,
    /// Linear S-boxes whose LCS failed generator extraction. Expected to
    /// stay zero; anything else is a finding.
    pub non_polynomial: u64,
    pub wall_time_ms: u64,
}

impl SearchReport {
    /// JSON with the timing field zeroed: byte-identical for identical
    /// configurations regardless of worker count or partition merging.
    pub fn canonical_json(&self) -> String {
        let mut copy = self.clone();
        copy.wall_time_ms = 0;
        let mut s = serde_json::to_string_pretty(&copy).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, SearchError> {
        serde_json::from_str(s).map_err(|e| SearchError::Output(e.to_string()))
    }

    /// Rebuilds the classification held in `by_generator`.
    pub fn classification(&self) -> Classification {
        let mut c = Classification::default();
        for class in &self.by_generator {
            c.add_class(
                class.dimension,
                Gf2Poly::from_mask(class.generator_mask),
                class.count,
            );
        }
        c.add_non_polynomial_count(self.non_polynomial);
        c
    }

    /// Human-readable summary shaped like the nl/dim classification table.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "d={}: {} OCA pairs (scanned {}, pairwise balanced {})\n",
            self.diameter, self.oca_pairs, self.total_pairs_scanned, self.pb_pairs
        );
        for (&nl, &count) in self.by_nonlinearity.iter().rev() {
            out.push_str(&format!("  nl={nl}: {count}\n"));
            if nl == 0 {
                for (&dim, &dcount) in &self.by_dimension {
                    out.push_str(&format!("    dim {dim}: {dcount}\n"));
                }
            }
        }
        if self.non_polynomial > 0 {
            out.push_str(&format!(
                "  WARNING: {} LCS failed generator extraction\n",
                self.non_polynomial
            ));
        }
        out
    }

    /// Classification-table CSV rows (diameter, nl, nl_count, dim,
    /// dim_count): one row per positive nonlinearity (dimension 0), then
    /// one row per LCS dimension of the linear S-boxes.
    pub fn write_table_csv<W: Write>(&self, writer: W) -> Result<(), SearchError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["diameter", "nl", "nl_count", "dim", "dim_count"])
            .map_err(|e| SearchError::Output(e.to_string()))?;
        let d = self.diameter.to_string();
        for (&nl, &count) in self.by_nonlinearity.iter().rev() {
            if nl != 0 {
                w.write_record([
                    d.as_str(),
                    &nl.to_string(),
                    &count.to_string(),
                    "0",
                    &count.to_string(),
                ])
                .map_err(|e| SearchError::Output(e.to_string()))?;
            } else {
                for (&dim, &dcount) in &self.by_dimension {
                    w.write_record([
                        d.as_str(),
                        "0",
                        &count.to_string(),
                        &dim.to_string(),
                        &dcount.to_string(),
                    ])
                    .map_err(|e| SearchError::Output(e.to_string()))?;
                }
            }
        }
        w.flush().map_err(|e| SearchError::Output(e.to_string()))
    }

    /// Parses rows produced by [`SearchReport::write_table_csv`] back into
    /// the nl and dimension histograms.
    pub fn parse_table_csv<R: Read>(reader: R) -> Result<TableCsv, SearchError> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let mut parsed = TableCsv::default();
        for record in r.records() {
            let record = record.map_err(|e| SearchError::Output(e.to_string()))?;
            if record.len() != 5 {
                return Err(SearchError::Output("expected 5 columns".into()));
            }
            let field = |i: usize| -> Result<u64, SearchError> {
                record[i]
                    .parse()
                    .map_err(|_| SearchError::Output(format!("bad number {:?}", &record[i])))
            };
            parsed.diameter = Some(field(0)? as usize);
            let nl = field(1)? as u32;
            let nl_count = field(2)?;
            parsed.by_nonlinearity.insert(nl, nl_count);
            if nl == 0 {
                parsed.by_dimension.insert(field(3)? as usize, field(4)?);
            }
        }
        Ok(parsed)
    }

    /// Generator-classification CSV (diameter, dimension, generator,
    /// count), preceded by a comment line stating the codeword
    /// orientation.
    pub fn write_classification_csv<W: Write>(&self, mut writer: W) -> Result<(), SearchError> {
        writeln!(
            writer,
            "# generator orientation: leftmost codeword coordinate = constant term"
        )
        .map_err(|e| SearchError::Output(e.to_string()))?;
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["diameter", "dimension", "generator", "count"])
            .map_err(|e| SearchError::Output(e.to_string()))?;
        let d = self.diameter.to_string();
        for class in &self.by_generator {
            w.write_record([
                d.as_str(),
                &class.dimension.to_string(),
                &class.generator,
                &class.count.to_string(),
            ])
            .map_err(|e| SearchError::Output(e.to_string()))?;
        }
        if self.non_polynomial > 0 {
            w.write_record([
                d.as_str(),
                "-",
                "(not a polynomial code)",
                &self.non_polynomial.to_string(),
            ])
            .map_err(|e| SearchError::Output(e.to_string()))?;
        }
        w.flush().map_err(|e| SearchError::Output(e.to_string()))
    }
}

/// Parsed classification-table CSV.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableCsv {
    pub diameter: Option<usize>,
    pub by_nonlinearity: BTreeMap<u32, u64>,
    pub by_dimension: BTreeMap<usize, u64>,
}

/// Pointwise sum of two disjoint-partition reports with identical
/// settings; associative and commutative.
pub fn merge_reports(a: &SearchReport, b: &SearchReport) -> Result<SearchReport, SearchError> {
    if a.diameter != b.diameter
        || a.use_pb_filter != b.use_pb_filter
        || a.exclude_linear_rules != b.exclude_linear_rules
        || a.swap_reduced != b.swap_reduced
    {
        return Err(SearchError::ConfigMismatch);
    }
    let mut ranges: Vec<(u64, u64)> = a.partitions.iter().chain(&b.partitions).copied().collect();
    ranges.sort_unstable();
    for pair in ranges.windows(2) {
        if pair[1].0 < pair[0].1 {
            return Err(SearchError::PartitionOverlap);
        }
    }
    let mut merged = a.clone();
    merged.partitions = coalesce(ranges);
    merged.total_pairs_scanned += b.total_pairs_scanned;
    merged.pb_pairs += b.pb_pairs;
    merged.oca_pairs += b.oca_pairs;
    for (&k, &v) in &b.by_nonlinearity {
        *merged.by_nonlinearity.entry(k).or_insert(0) += v;
    }
    for (&k, &v) in &b.by_dimension {
        *merged.by_dimension.entry(k).or_insert(0) += v;
    }
    let mut gen: BTreeMap<(usize, u64), (String, u64)> = BTreeMap::new();
    for class in merged.by_generator.iter().chain(&b.by_generator) {
        let entry = gen
            .entry((class.dimension, class.generator_mask))
            .or_insert_with(|| (class.generator.clone(), 0));
        entry.1 += class.count;
    }
    merged.by_generator = sorted_classes(gen);
    merged.non_polynomial += b.non_polynomial;
    merged.wall_time_ms += b.wall_time_ms;
    Ok(merged)
}

fn coalesce(mut ranges: Vec<(u64, u64)>) -> Vec<(u64, u64)> {
    ranges.sort_unstable();
    let mut out: Vec<(u64, u64)> = Vec::new();
    for (s, e) in ranges {
        if s == e {
            continue;
        }
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

fn sorted_classes(map: BTreeMap<(usize, u64), (String, u64)>) -> Vec<GeneratorClass> {
    let mut out: Vec<GeneratorClass> = map
        .into_iter()
        .map(|((dimension, generator_mask), (generator, count))| GeneratorClass {
            dimension,
            generator,
            generator_mask,
            count,
        })
        .collect();
    out.sort_by(|a, b| {
        b.dimension
            .cmp(&a.dimension)
            .then(a.generator_mask.cmp(&b.generator_mask))
    });
    out
}

/// The bipermutive rule whose generating function has Wolfram number
/// `index`; the bijection behind the generating-index enumeration.
pub fn rule_from_generating_index(index: u64, diameter: usize) -> Result<LocalRule, SearchError> {
    if !(3..=6).contains(&diameter) {
        return Err(SearchError::Diameter(diameter));
    }
    let m = diameter - 2;
    if index >= 1u64 << (1u64 << m) {
        return Err(SearchError::Partition {
            start: index,
            end: index,
            max: 1u64 << (1u64 << m),
        });
    }
    let g = TruthTable::from_wolfram(&BigUint::from(index), m).expect("index in range");
    Ok(LocalRule::from_generating(&g, diameter).expect("arity matches"))
}

/// All bipermutive rules of the diameter, indexed by generating function.
fn build_rules(diameter: usize) -> Vec<LocalRule> {
    let m = diameter - 2;
    (0..1u64 << (1u64 << m))
        .map(|gi| {
            let g = TruthTable::from_wolfram(&BigUint::from(gi), m).expect("gi in range");
            LocalRule::from_generating(&g, diameter).expect("arity matches")
        })
        .collect()
}

struct Prep {
    b: usize,
    n_inputs: usize,
    gen_count: u64,
    bits: Vec<u64>,
    nonlinear: Vec<bool>,
    tables: RuleTables,
}

fn prepare(diameter: usize) -> Result<Prep, SearchError> {
    let rules = build_rules(diameter);
    let bits: Vec<u64> = rules.iter().map(|r| r.table().words()[0]).collect();
    let nonlinear: Vec<bool> = rules.iter().map(|r| !r.is_affine()).collect();
    let tables = RuleTables::precompute(&rules)?;
    Ok(Prep {
        b: diameter - 1,
        n_inputs: 1usize << (2 * (diameter - 1)),
        gen_count: rules.len() as u64,
        bits,
        nonlinear,
        tables,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct RowCounts {
    scanned: u64,
    pb: u64,
    oca: u64,
    by_nl: BTreeMap<u32, u64>,
    by_dim: BTreeMap<usize, u64>,
    by_gen: BTreeMap<(usize, u64), u64>,
    non_poly: u64,
}

impl RowCounts {
    fn add(&mut self, other: &RowCounts) {
        self.scanned += other.scanned;
        self.pb += other.pb;
        self.oca += other.oca;
        for (&k, &v) in &other.by_nl {
            *self.by_nl.entry(k).or_insert(0) += v;
        }
        for (&k, &v) in &other.by_dim {
            *self.by_dim.entry(k).or_insert(0) += v;
        }
        for (&k, &v) in &other.by_gen {
            *self.by_gen.entry(k).or_insert(0) += v;
        }
        self.non_poly += other.non_poly;
    }
}

struct Scratch {
    seen: Vec<u64>,
    generation: u64,
}

impl Scratch {
    fn new(n_inputs: usize) -> Self {
        Scratch {
            seen: vec![0; n_inputs],
            generation: 0,
        }
    }
}

/// Scans every admissible right partner of one left rule.
fn scan_left_row(prep: &Prep, config: &SearchConfig, left: usize, scratch: &mut Scratch) -> RowCounts {
    let mut rc = RowCounts::default();
    if config.exclude_linear_rules && !prep.nonlinear[left] {
        return rc;
    }
    let b = prep.b;
    let n = 2 * b;
    let quarter = 1u32 << (b - 1);
    let fb = prep.bits[left];
    let ftab = prep.tables.row(left);
    let right_start = if config.swap_reduced { left } else { 0 };
    for right in right_start..prep.gen_count as usize {
        if config.exclude_linear_rules && !prep.nonlinear[right] {
            continue;
        }
        rc.scanned += 1;
        // both rules are bipermutive, hence balanced, so one popcount
        // settles all four pair counts
        let pb = (fb & prep.bits[right]).count_ones() == quarter;
        if pb {
            rc.pb += 1;
        } else if config.use_pb_filter {
            continue;
        }
        let gtab = prep.tables.row(right);
        scratch.generation += 1;
        let generation = scratch.generation;
        let mut orthogonal = true;
        for x in 0..prep.n_inputs {
            let key = ((ftab[x] as usize) << b) | gtab[x] as usize;
            if scratch.seen[key] == generation {
                orthogonal = false;
                break;
            }
            scratch.seen[key] = generation;
        }
        if !orthogonal {
            continue;
        }
        rc.oca += 1;
        let table: Vec<u16> = (0..prep.n_inputs)
            .map(|x| ((ftab[x] as u16) << b) | gtab[x] as u16)
            .collect();
        let sbox = SBox::new(n, table).expect("entries fit the width");
        let nl = sbox.nonlinearity(true);
        *rc.by_nl.entry(nl).or_insert(0) += 1;
        if nl == 0 {
            let lcs = sbox.linear_components_space();
            *rc.by_dim.entry(lcs.dimension()).or_insert(0) += 1;
            match extract_generator(lcs.members(), n) {
                Ok(code) => {
                    *rc.by_gen.entry((code.k, code.generator.mask())).or_insert(0) += 1;
                }
                Err(CodesError::NotPolynomialCode { .. }) => rc.non_poly += 1,
                Err(e) => panic!("LCS members always form a subspace: {e}"),
            }
        }
    }
    rc
}

/// Execution knobs that are not part of the search definition: checkpoint
/// persistence and resumption, cooperative interruption, progress output.
#[derive(Default)]
pub struct RunOptions<'a> {
    /// Checkpoint file: created when absent, resumed when present. One
    /// record per completed left index.
    pub checkpoint: Option<&'a Path>,
    /// Cooperative stop flag, checked between left indices.
    pub stop: Option<&'a AtomicBool>,
    /// Progress lines on standard error.
    pub progress: bool,
}

/// Result of a run that may have been interrupted; an interrupted report
/// covers only the completed left indices.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub report: SearchReport,
    pub interrupted: bool,
}

/// Runs the full scan for `config` and returns the aggregated report.
pub fn run_search(config: &SearchConfig) -> Result<SearchReport, SearchError> {
    Ok(run_search_with_options(config, &RunOptions::default())?.report)
}

/// [`run_search`] with checkpointing, interruption and progress reporting.
pub fn run_search_with_options(
    config: &SearchConfig,
    options: &RunOptions<'_>,
) -> Result<SearchOutcome, SearchError> {
    config.validate()?;
    let started = Instant::now();
    let prep = prepare(config.diameter)?;
    let (part_start, part_end) = config.partition_range();

    let mut totals = RowCounts::default();
    let mut done: BTreeSet<u64> = BTreeSet::new();
    let mut checkpoint_file = None;
    if let Some(path) = options.checkpoint {
        let (file, loaded) = open_checkpoint(path, config)?;
        checkpoint_file = Some(file);
        for (left, counts) in loaded {
            totals.add(&counts);
            done.insert(left);
        }
    }

    let pending: Vec<u64> = (part_start..part_end).filter(|gi| !done.contains(gi)).collect();
    let expected_pairs = expected_pair_count(config, &prep, part_start, part_end);
    if options.progress {
        eprintln!(
            "search d={}: {} left rows pending, {} pairs expected",
            config.diameter,
            pending.len(),
            expected_pairs
        );
    }

    let next = AtomicUsize::new(0);
    let mut write_error: Option<SearchError> = None;
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(u64, RowCounts)>();
        for _ in 0..config.worker_count {
            let tx = tx.clone();
            let next = &next;
            let prep = &prep;
            let pending = &pending;
            let stop = options.stop;
            scope.spawn(move || {
                let mut scratch = Scratch::new(prep.n_inputs);
                loop {
                    if stop.is_some_and(|s| s.load(Ordering::Relaxed)) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= pending.len() {
                        break;
                    }
                    let left = pending[i];
                    let rc = scan_left_row(prep, config, left as usize, &mut scratch);
                    if tx.send((left, rc)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(tx);

        let mut rows_done = 0usize;
        let report_every = (pending.len() / 100).max(1);
        for (left, rc) in rx {
            totals.add(&rc);
            done.insert(left);
            rows_done += 1;
            if let Some(file) = checkpoint_file.as_mut() {
                if write_error.is_none() {
                    if let Err(e) = append_checkpoint_row(file, left, &rc) {
                        write_error = Some(e);
                    }
                }
            }
            if options.progress && (rows_done.is_multiple_of(report_every) || rows_done == pending.len()) {
                let pct = if expected_pairs == 0 {
                    100.0
                } else {
                    100.0 * totals.scanned as f64 / expected_pairs as f64
                };
                eprintln!(
                    "scanned {}/{} ({:.1}%), oca found {}",
                    totals.scanned, expected_pairs, pct, totals.oca
                );
            }
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }

    let interrupted = done.len() < (part_end - part_start) as usize;
    let report = SearchReport {
        diameter: config.diameter,
        use_pb_filter: config.use_pb_filter,
        exclude_linear_rules: config.exclude_linear_rules,
        swap_reduced: config.swap_reduced,
        partitions: ranges_of(&done),
        total_pairs_scanned: totals.scanned,
        pb_pairs: totals.pb,
        oca_pairs: totals.oca,
        by_nonlinearity: totals.by_nl,
        by_dimension: totals.by_dim,
        by_generator: sorted_classes(
            totals
                .by_gen
                .into_iter()
                .map(|((dim, mask), count)| {
                    ((dim, mask), (Gf2Poly::from_mask(mask).to_string(), count))
                })
                .collect(),
        ),
        non_polynomial: totals.non_poly,
        wall_time_ms: started.elapsed().as_millis() as u64,
    };
    Ok(SearchOutcome {
        report,
        interrupted,
    })
}

/// Exact number of pairs the scan will visit after rule-level exclusion.
fn expected_pair_count(config: &SearchConfig, prep: &Prep, start: u64, end: u64) -> u64 {
    let valid: Vec<bool> = (0..prep.gen_count as usize)
        .map(|gi| !config.exclude_linear_rules || prep.nonlinear[gi])
        .collect();
    if !config.swap_reduced {
        let rights: u64 = valid.iter().filter(|&&v| v).count() as u64;
        let lefts = (start..end).filter(|&gi| valid[gi as usize]).count() as u64;
        return lefts * rights;
    }
    let mut suffix = vec![0u64; valid.len() + 1];
    for gi in (0..valid.len()).rev() {
        suffix[gi] = suffix[gi + 1] + valid[gi] as u64;
    }
    (start..end)
        .filter(|&gi| valid[gi as usize])
        .map(|gi| suffix[gi as usize])
        .sum()
}

fn ranges_of(done: &BTreeSet<u64>) -> Vec<(u64, u64)> {
    let mut out: Vec<(u64, u64)> = Vec::new();
    for &v in done {
        match out.last_mut() {
            Some(last) if last.1 == v => last.1 = v + 1,
            _ => out.push((v, v + 1)),
        }
    }
    out
}

#[derive(Serialize, Deserialize, PartialEq, Eq, Debug)]
struct CheckpointHeader {
    version: u32,
    diameter: usize,
    use_pb_filter: bool,
    exclude_linear_rules: bool,
    swap_reduced: bool,
    partition: Option<(u64, u64)>,
}

impl CheckpointHeader {
    fn of(config: &SearchConfig) -> Self {
        CheckpointHeader {
            version: CHECKPOINT_VERSION,
            diameter: config.diameter,
            use_pb_filter: config.use_pb_filter,
            exclude_linear_rules: config.exclude_linear_rules,
            swap_reduced: config.swap_reduced,
            partition: config.partition,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointRow {
    left_index: u64,
    scanned: u64,
    pb: u64,
    oca: u64,
    by_nl: BTreeMap<u32, u64>,
    by_dim: BTreeMap<usize, u64>,
    by_gen: Vec<(usize, u64, u64)>,
    non_poly: u64,
}

impl CheckpointRow {
    fn pack(left_index: u64, counts: &RowCounts) -> Self {
        CheckpointRow {
            left_index,
            scanned: counts.scanned,
            pb: counts.pb,
            oca: counts.oca,
            by_nl: counts.by_nl.clone(),
            by_dim: counts.by_dim.clone(),
            by_gen: counts
                .by_gen
                .iter()
                .map(|(&(dim, mask), &count)| (dim, mask, count))
                .collect(),
            non_poly: counts.non_poly,
        }
    }

    fn unpack(self) -> (u64, RowCounts) {
        (
            self.left_index,
            RowCounts {
                scanned: self.scanned,
                pb: self.pb,
                oca: self.oca,
                by_nl: self.by_nl,
                by_dim: self.by_dim,
                by_gen: self
                    .by_gen
                    .into_iter()
                    .map(|(dim, mask, count)| ((dim, mask), count))
                    .collect(),
                non_poly: self.non_poly,
            },
        )
    }
}

/// Opens (or creates) a checkpoint file and returns completed rows.
fn open_checkpoint(
    path: &Path,
    config: &SearchConfig,
) -> Result<(std::fs::File, Vec<(u64, RowCounts)>), SearchError> {
    use std::fs::OpenOptions;
    let err = |msg: String| SearchError::Checkpoint(msg);
    let exists = path.exists();
    if !exists {
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| err(format!("{}: {e}", path.display())))?;
        let header = serde_json::to_string(&CheckpointHeader::of(config)).expect("serializes");
        writeln!(file, "{header}").map_err(|e| err(e.to_string()))?;
        file.flush().map_err(|e| err(e.to_string()))?;
        return Ok((file, Vec::new()));
    }
    let content = std::fs::File::open(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
    let mut lines = std::io::BufReader::new(content).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| err("empty checkpoint".into()))?
        .map_err(|e| err(e.to_string()))?;
    let header: CheckpointHeader =
        serde_json::from_str(&header_line).map_err(|e| err(format!("bad header: {e}")))?;
    if header != CheckpointHeader::of(config) {
        return Err(err("checkpoint was written with different settings".into()));
    }
    let (part_start, part_end) = config.partition_range();
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for line in lines {
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: CheckpointRow =
            serde_json::from_str(&line).map_err(|e| err(format!("bad row: {e}")))?;
        let (left, counts) = row.unpack();
        if left < part_start || left >= part_end {
            return Err(err(format!("row {left} outside partition")));
        }
        if !seen.insert(left) {
            return Err(err(format!("duplicate row {left}")));
        }
        rows.push((left, counts));
    }
    let file = OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| err(format!("{}: {e}", path.display())))?;
    Ok((file, rows))
}

fn append_checkpoint_row(
    file: &mut std::fs::File,
    left: u64,
    counts: &RowCounts,
) -> Result<(), SearchError> {
    let row = CheckpointRow::pack(left, counts);
    let line = serde_json::to_string(&row).expect("serializes");
    writeln!(file, "{line}").map_err(|e| SearchError::Checkpoint(e.to_string()))?;
    file.flush().map_err(|e| SearchError::Checkpoint(e.to_string()))
}

/// Visits every orthogonal pair selected by `config` with its superposition
/// S-box, single-threaded, using the same table-driven scan as
/// [`run_search`]. The callback receives the two generating-function
/// indices.
pub fn for_each_oca_pair<F>(config: &SearchConfig, mut visit: F) -> Result<(), SearchError>
where
    F: FnMut(u64, u64, &SBox),
{
    config.validate()?;
    let prep = prepare(config.diameter)?;
    let (part_start, part_end) = config.partition_range();
    let b = prep.b;
    let n = 2 * b;
    let quarter = 1u32 << (b - 1);
    let mut scratch = Scratch::new(prep.n_inputs);
    for left in part_start..part_end {
        let left = left as usize;
        if config.exclude_linear_rules && !prep.nonlinear[left] {
            continue;
        }
        let fb = prep.bits[left];
        let ftab = prep.tables.row(left);
        let right_start = if config.swap_reduced { left } else { 0 };
        for right in right_start..prep.gen_count as usize {
            if config.exclude_linear_rules && !prep.nonlinear[right] {
                continue;
            }
            let pb = (fb & prep.bits[right]).count_ones() == quarter;
            if !pb && config.use_pb_filter {
                continue;
            }
            let gtab = prep.tables.row(right);
            scratch.generation += 1;
            let generation = scratch.generation;
            let mut orthogonal = true;
            for x in 0..prep.n_inputs {
                let key = ((ftab[x] as usize) << b) | gtab[x] as usize;
                if scratch.seen[key] == generation {
                    orthogonal = false;
                    break;
                }
                scratch.seen[key] = generation;
            }
            if !orthogonal {
                continue;
            }
            let table: Vec<u16> = (0..prep.n_inputs)
                .map(|x| ((ftab[x] as u16) << b) | gtab[x] as u16)
                .collect();
            let sbox = SBox::new(n, table).expect("entries fit the width");
            visit(left as u64, right as u64, &sbox);
        }
    }
    Ok(())
}

/// Streams every admissible `(left, right)` rule pair for `config`,
/// applying the linearity exclusion, the partition, the swap reduction and
/// (when enabled) the pairwise-balancedness filter. Intended for tests and
/// small diameters; the search itself works on indices.
pub fn enumerate_pairs(config: &SearchConfig) -> Result<PairStream, SearchError> {
    config.validate()?;
    let rules = build_rules(config.diameter);
    let admissible: Vec<bool> = rules
        .iter()
        .map(|r| !config.exclude_linear_rules || !r.is_affine())
        .collect();
    let (start, end) = config.partition_range();
    Ok(PairStream {
        config: config.clone(),
        rules,
        admissible,
        left: start,
        end,
        right: 0,
        right_primed: false,
    })
}

/// Iterator over enumerated rule pairs; see [`enumerate_pairs`].
pub struct PairStream {
    config: SearchConfig,
    rules: Vec<LocalRule>,
    admissible: Vec<bool>,
    left: u64,
    end: u64,
    right: u64,
    right_primed: bool,
}

impl Iterator for PairStream {
    type Item = (LocalRule, LocalRule);

    fn next(&mut self) -> Option<Self::Item> {
        let total = self.rules.len() as u64;
        loop {
            if self.left >= self.end {
                return None;
            }
            if !self.admissible[self.left as usize] {
                self.left += 1;
                self.right_primed = false;
                continue;
            }
            if !self.right_primed {
                self.right = if self.config.swap_reduced { self.left } else { 0 };
                self.right_primed = true;
            }
            if self.right >= total {
                self.left += 1;
                self.right_primed = false;
                continue;
            }
            let right = self.right;
            self.right += 1;
            if !self.admissible[right as usize] {
                continue;
            }
            let f = &self.rules[self.left as usize];
            let g = &self.rules[right as usize];
            if self.config.use_pb_filter && !pairwise_balanced(f, g).expect("same diameter") {
                continue;
            }
            return Some((f.clone(), g.clone()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ca::NoBoundaryCA;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn rule(w: u64, d: usize) -> LocalRule {
        LocalRule::from_wolfram_u64(w, d).unwrap()
    }

    fn plain_config(d: usize) -> SearchConfig {
        let mut c = SearchConfig::new(d);
        c.use_pb_filter = false;
        c.exclude_linear_rules = false;
        c
    }

    #[test]
    fn pairwise_balanced_examples() {
        let f = rule(150, 3);
        let g = rule(90, 3);
        assert!(pairwise_balanced(&f, &g).unwrap());
        assert!(!pairwise_balanced(&f, &f).unwrap());
        assert!(pairwise_balanced(&f, &rule(150, 4)).is_err());
    }

    #[test]
    fn pairwise_balanced_matches_direct_count() {
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..200 {
            let f = rule(rng.gen::<u64>() & 0xffff, 4);
            let g = rule(rng.gen::<u64>() & 0xffff, 4);
            let mut counts = [0usize; 4];
            for x in 0..16 {
                let key = ((f.table().bit(x) as usize) << 1) | g.table().bit(x) as usize;
                counts[key] += 1;
            }
            let direct = counts.iter().all(|&c| c == 4);
            assert_eq!(pairwise_balanced(&f, &g).unwrap(), direct);
        }
    }

    #[test]
    fn enumerate_counts_without_filters() {
        assert_eq!(enumerate_pairs(&plain_config(3)).unwrap().count(), 16);
        assert_eq!(enumerate_pairs(&plain_config(4)).unwrap().count(), 256);
        assert_eq!(enumerate_pairs(&plain_config(5)).unwrap().count(), 65536);
    }

    #[test]
    fn enumerate_respects_filters_and_partition() {
        // d=4 nonlinear rules: 8 of 16
        let mut c = SearchConfig::new(4);
        c.use_pb_filter = false;
        assert_eq!(enumerate_pairs(&c).unwrap().count(), 64);
        c.swap_reduced = true;
        assert_eq!(enumerate_pairs(&c).unwrap().count(), 36); // 8*9/2
        let mut half = plain_config(4);
        half.partition = Some((0, 8));
        let mut other = plain_config(4);
        other.partition = Some((8, 16));
        assert_eq!(
            enumerate_pairs(&half).unwrap().count() + enumerate_pairs(&other).unwrap().count(),
            256
        );
        let mut bad = plain_config(4);
        bad.partition = Some((0, 17));
        assert!(enumerate_pairs(&bad).is_err());
    }

    #[test]
    fn enumerated_pairs_pass_enabled_filters() {
        let mut c = SearchConfig::new(4);
        c.use_pb_filter = true;
        for (f, g) in enumerate_pairs(&c).unwrap() {
            assert!(!f.is_affine() && !g.is_affine());
            assert!(pairwise_balanced(&f, &g).unwrap());
        }
    }

    #[test]
    fn rule_tables_match_the_reference_evaluator() {
        let rules = build_rules(4);
        let tables = RuleTables::precompute(&rules).unwrap();
        assert_eq!(tables.rule_count(), 16);
        assert_eq!(tables.input_count(), 64);
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..1000 {
            let idx = rng.gen_range(0..rules.len());
            let x = rng.gen_range(0..64u64);
            let ca = NoBoundaryCA::new(rules[idx].clone(), 6).unwrap();
            assert_eq!(tables.lookup(idx, x as usize) as u64, ca.apply(x).unwrap());
        }
    }

    #[test]
    fn rule_tables_reject_mixed_diameters() {
        assert!(RuleTables::precompute(&[rule(150, 3), rule(0x6996, 4)]).is_err());
        assert!(RuleTables::precompute(&[]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(run_search(&SearchConfig::new(2)).is_err());
        assert!(run_search(&SearchConfig::new(7)).is_err());
        let mut c = SearchConfig::new(4);
        c.worker_count = 0;
        assert!(run_search(&c).is_err());
    }

    #[test]
    fn searches_match_independent_pair_scan_at_d4() {
        // cross-check the table-driven scan against the plain library path
        let report = run_search(&SearchConfig::new(4)).unwrap();
        let mut c = SearchConfig::new(4);
        c.use_pb_filter = true;
        let mut oca = 0u64;
        for (f, g) in enumerate_pairs(&c).unwrap() {
            let sbox = crate::ca::superposition_sbox(&f, &g).unwrap();
            if sbox.is_bijective() {
                oca += 1;
                assert_eq!(sbox.nonlinearity(false), 0);
            }
        }
        assert_eq!(report.oca_pairs, oca);
        assert_eq!(report.oca_pairs, 32);
    }

    #[test]
    fn oca_pair_visitor_agrees_with_the_report() {
        let config = SearchConfig::new(4);
        let report = run_search(&config).unwrap();
        let mut count = 0u64;
        for_each_oca_pair(&config, |left, right, sbox| {
            count += 1;
            assert!(sbox.is_bijective());
            let f = rule_from_generating_index(left, 4).unwrap();
            let g = rule_from_generating_index(right, 4).unwrap();
            let direct = crate::ca::superposition_sbox(&f, &g).unwrap();
            assert_eq!(&direct, sbox);
        })
        .unwrap();
        assert_eq!(count, report.oca_pairs);
    }

    #[test]
    fn merge_identity_and_halves() {
        let full = run_search(&SearchConfig::new(4)).unwrap();
        let mut left = SearchConfig::new(4);
        left.partition = Some((0, 8));
        let mut right = SearchConfig::new(4);
        right.partition = Some((8, 16));
        let a = run_search(&left).unwrap();
        let b = run_search(&right).unwrap();
        let merged = merge_reports(&a, &b).unwrap();
        assert_eq!(merged.canonical_json(), full.canonical_json());
        let merged_rev = merge_reports(&b, &a).unwrap();
        assert_eq!(merged_rev.canonical_json(), full.canonical_json());
        // identity element: an empty partition
        let mut empty_cfg = SearchConfig::new(4);
        empty_cfg.partition = Some((0, 0));
        let empty = run_search(&empty_cfg).unwrap();
        let same = merge_reports(&full, &empty).unwrap();
        assert_eq!(same.canonical_json(), full.canonical_json());
        // overlap is rejected
        assert!(merge_reports(&a, &a).is_err());
        // mismatched settings are rejected
        let mut other = SearchConfig::new(4);
        other.use_pb_filter = false;
        let unfiltered = run_search(&other).unwrap();
        assert!(merge_reports(&a, &unfiltered).is_err());
    }

    #[test]
    fn merge_is_order_insensitive_over_quarters() {
        let full = run_search(&SearchConfig::new(5)).unwrap();
        let quarters: Vec<SearchReport> = (0..4)
            .map(|i| {
                let mut c = SearchConfig::new(5);
                c.partition = Some((i * 64, (i + 1) * 64));
                run_search(&c).unwrap()
            })
            .collect();
        for order in [[0, 1, 2, 3], [3, 1, 0, 2], [2, 3, 1, 0]] {
            let mut acc = quarters[order[0]].clone();
            for &i in &order[1..] {
                acc = merge_reports(&acc, &quarters[i]).unwrap();
            }
            assert_eq!(acc.canonical_json(), full.canonical_json());
        }
    }

    #[test]
    fn checkpoint_resume_reproduces_the_full_report() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d4.ndjson");
        let mut config = SearchConfig::new(4);
        config.worker_count = 2;
        // interrupt after the first few rows
        let stop = AtomicBool::new(false);
        let options = RunOptions {
            checkpoint: Some(&path),
            stop: Some(&stop),
            progress: false,
        };
        stop.store(true, Ordering::Relaxed); // workers stop immediately
        let first = run_search_with_options(&config, &options).unwrap();
        assert!(first.interrupted);
        // resume to completion
        let options = RunOptions {
            checkpoint: Some(&path),
            stop: None,
            progress: false,
        };
        let resumed = run_search_with_options(&config, &options).unwrap();
        assert!(!resumed.interrupted);
        let fresh = run_search(&config).unwrap();
        assert_eq!(resumed.report.canonical_json(), fresh.canonical_json());
        // a second resume finds nothing to do and reports the same totals
        let again = run_search_with_options(&config, &options).unwrap();
        assert_eq!(again.report.canonical_json(), fresh.canonical_json());
    }

    #[test]
    fn checkpoint_rejects_mismatched_config_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.ndjson");
        let config = SearchConfig::new(4);
        let options = RunOptions {
            checkpoint: Some(&path),
            stop: None,
            progress: false,
        };
        run_search_with_options(&config, &options).unwrap();
        let mut other = SearchConfig::new(4);
        other.use_pb_filter = false;
        let opts = RunOptions {
            checkpoint: Some(&path),
            stop: None,
            progress: false,
        };
        assert!(matches!(
            run_search_with_options(&other, &opts),
            Err(SearchError::Checkpoint(_))
        ));
        std::fs::write(&path, "not json\n").unwrap();
        assert!(matches!(
            run_search_with_options(&config, &opts),
            Err(SearchError::Checkpoint(_))
        ));
    }

    #[test]
    fn report_count_maps_are_consistent() {
        for d in [3usize, 4, 5] {
            let report = run_search(&SearchConfig::new(d)).unwrap();
            assert_eq!(report.by_nonlinearity.values().sum::<u64>(), report.oca_pairs);
            assert_eq!(
                report.by_dimension.values().sum::<u64>(),
                report.by_nonlinearity.get(&0).copied().unwrap_or(0)
            );
            assert_eq!(
                report.by_generator.iter().map(|c| c.count).sum::<u64>()
                    + report.non_polynomial,
                report.by_dimension.values().sum::<u64>()
            );
            assert!(report.pb_pairs <= report.total_pairs_scanned);
            assert!(report.oca_pairs <= report.pb_pairs);
        }
    }

    #[test]
    fn table_csv_round_trip() {
        let report = run_search(&SearchConfig::new(4)).unwrap();
        let mut buf = Vec::new();
        report.write_table_csv(&mut buf).unwrap();
        let parsed = SearchReport::parse_table_csv(&buf[..]).unwrap();
        assert_eq!(parsed.diameter, Some(4));
        assert_eq!(parsed.by_nonlinearity, report.by_nonlinearity);
        assert_eq!(parsed.by_dimension, report.by_dimension);
    }

    #[test]
    fn report_json_round_trip() {
        let report = run_search(&SearchConfig::new(4)).unwrap();
        let parsed = SearchReport::from_json(&report.to_json()).unwrap();
        assert_eq!(parsed, report);
    }
}
