//! Subcommand implementations.

use crate::{interrupt_flag, CliError, Format};
use num_bigint::BigUint;
use oca_core::boolfun::{LocalRule, TruthTable};
use oca_core::ca::{superposition_sbox, LatinSquare};
use oca_core::codes::{extract_generator, CodesError, Gf2Poly};
use oca_core::sbox::SBox;
use oca_core::search::{
    for_each_oca_pair, run_search_with_options, RunOptions, SearchConfig, SearchError,
    SearchReport,
};
use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn domain(msg: impl Into<String>) -> CliError {
    CliError::Domain(msg.into())
}

/// Both rule forms: a decimal Wolfram number, or `tt:HEX` for a raw truth
/// table.
fn parse_rule_spec(spec: &str, diameter: usize) -> Result<LocalRule, CliError> {
    if let Some(hex) = spec.strip_prefix("tt:") {
        let table = TruthTable::from_hex(hex)
            .map_err(|e| usage(format!("bad truth table {spec:?}: {e}")))?;
        if table.n_vars() != diameter {
            return Err(usage(format!(
                "truth table {spec:?} has {} variables, expected diameter {diameter}",
                table.n_vars()
            )));
        }
        LocalRule::from_table(table).map_err(|e| usage(e.to_string()))
    } else {
        let number = BigUint::from_str(spec)
            .map_err(|_| usage(format!("bad Wolfram number {spec:?} (decimal expected)")))?;
        LocalRule::from_wolfram(&number, diameter).map_err(|e| usage(e.to_string()))
    }
}

/// ANF of `g` printed with variable names shifted by `offset`, so the
/// generating function of a rule reads in the rule's own variables.
fn anf_shifted(g: &TruthTable, offset: usize) -> String {
    let mons = g.mobius_transform().monomials();
    if mons.is_empty() {
        return "0".to_string();
    }
    let n = g.n_vars();
    let mut sorted = mons;
    sorted.sort_by_key(|&u| (std::cmp::Reverse(u.count_ones()), std::cmp::Reverse(u)));
    sorted
        .iter()
        .map(|&u| {
            if u == 0 {
                "1".to_string()
            } else {
                (1..=n)
                    .filter(|j| (u >> (n - j)) & 1 == 1)
                    .map(|j| format!("x{}", j + offset))
                    .collect::<Vec<_>>()
                    .join("*")
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

pub fn rule_info(
    wolfram: Option<String>,
    tt: Option<String>,
    diameter: Option<usize>,
) -> Result<(), CliError> {
    let rule = match (&wolfram, &tt) {
        (Some(_), Some(_)) | (None, None) => {
            return Err(usage("give exactly one of --wolfram and --tt".to_string()))
        }
        (Some(dec), None) => {
            let d = diameter.ok_or_else(|| usage("--wolfram needs --diameter"))?;
            parse_rule_spec(dec, d)?
        }
        (None, Some(hex)) => {
            let table = TruthTable::from_hex(hex)
                .map_err(|e| usage(format!("bad truth table {hex:?}: {e}")))?;
            if let Some(d) = diameter {
                if d != table.n_vars() {
                    return Err(usage(format!(
                        "--tt has {} variables but --diameter is {d}",
                        table.n_vars()
                    )));
                }
            }
            LocalRule::from_table(table).map_err(|e| usage(e.to_string()))?
        }
    };
    let d = rule.diameter();
    let table = rule.table();
    println!("rule {} (diameter {d})", rule.wolfram());
    println!("  truth table : {}", table.to_hex());
    println!("  anf         : {}", table.mobius_transform().polynomial_string());
    println!("  degree      : {}", rule.algebraic_degree());
    println!("  balanced    : {}", if table.is_balanced() { "yes" } else { "no" });
    println!("  nonlinearity: {}", table.nonlinearity());
    match rule.generating() {
        Some(g) => {
            println!(
                "  bipermutive : yes, g({}) = {}",
                (2..d).map(|j| format!("x{j}")).collect::<Vec<_>>().join(","),
                anf_shifted(g, 1)
            );
        }
        None => println!("  bipermutive : no"),
    }
    Ok(())
}

pub fn analyze(
    f_spec: &str,
    g_spec: &str,
    diameter: usize,
    format: Option<Format>,
    output: Option<PathBuf>,
) -> Result<(), CliError> {
    let f = parse_rule_spec(f_spec, diameter)?;
    let g = parse_rule_spec(g_spec, diameter)?;
    for (name, rule) in [("f", &f), ("g", &g)] {
        if !rule.is_bipermutive() {
            return Err(domain(format!(
                "rule {name} = {} is not bipermutive",
                rule.wolfram()
            )));
        }
    }
    let square_f = LatinSquare::from_rule(&f).map_err(|e| domain(e.to_string()))?;
    let square_g = LatinSquare::from_rule(&g).map_err(|e| domain(e.to_string()))?;
    let orthogonal =
        LatinSquare::are_orthogonal(&square_f, &square_g).map_err(|e| domain(e.to_string()))?;
    let sbox = superposition_sbox(&f, &g).map_err(|e| domain(e.to_string()))?;
    let bijective = sbox.is_bijective();
    let nl = sbox.nonlinearity(false);
    let lcs = sbox.linear_components_space();
    let generator = if lcs.dimension() > 0 {
        match extract_generator(lcs.members(), lcs.n()) {
            Ok(code) => Some(code),
            Err(CodesError::NotPolynomialCode { .. }) => None,
            Err(e) => return Err(domain(e.to_string())),
        }
    } else {
        None
    };

    let mut json = serde_json::Map::new();
    json.insert("diameter".into(), diameter.into());
    json.insert("f_wolfram".into(), f.wolfram().to_string().into());
    json.insert("g_wolfram".into(), g.wolfram().to_string().into());
    json.insert("orthogonal".into(), orthogonal.into());
    json.insert("bijective".into(), bijective.into());
    json.insert("sbox".into(), sbox.to_json());
    json.insert("nonlinearity".into(), nl.into());
    json.insert(
        "lcs".into(),
        lcs.to_json(generator.as_ref().map(|c| c.generator.to_string())),
    );
    if let Some(code) = &generator {
        json.insert("generator_cyclic".into(), code.cyclic.into());
    }
    let json = serde_json::Value::Object(json);

    let mut text = String::new();
    text.push_str(&format!(
        "rules f={}, g={} (diameter {diameter})\n",
        f.wolfram(),
        g.wolfram()
    ));
    text.push_str(&format!("orthogonal   : {}\n", if orthogonal { "yes" } else { "no" }));
    text.push_str(&format!("bijective    : {}\n", if bijective { "yes" } else { "no" }));
    text.push_str(&format!("sbox         : {}\n", sbox.to_text()));
    text.push_str(&format!("nonlinearity : {nl}\n"));
    text.push_str(&format!("LCS dimension: {}\n", lcs.dimension()));
    if lcs.dimension() > 0 {
        let rows: Vec<String> = lcs.basis().iter().map(|r| format!("{r:x}")).collect();
        text.push_str(&format!("LCS basis    : {}\n", rows.join(" ")));
        match &generator {
            Some(code) => text.push_str(&format!(
                "generator    : {} ({})\n",
                code.generator,
                if code.cyclic { "cyclic" } else { "not cyclic" }
            )),
            None => text.push_str("generator    : none (not a polynomial code)\n"),
        }
    }

    match format {
        Some(Format::Json) => emit(output.as_deref(), &format!("{:#}\n", json))?,
        Some(Format::Csv) => {
            return Err(usage("analyze has no CSV form; use json or the default text"))
        }
        None => emit(output.as_deref(), &text)?,
    }
    Ok(())
}

fn emit(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| domain(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

pub struct SearchArgs {
    pub diameter: usize,
    pub jobs: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub no_pb_filter: bool,
    pub include_linear_rules: bool,
    pub swap_reduced: bool,
    pub confirm_long_run: bool,
    pub resume: Option<PathBuf>,
    pub partition: Option<String>,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(usize::from).unwrap_or(1)
}

fn parse_partition(s: &str, config: &SearchConfig) -> Result<(u64, u64), CliError> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| usage(format!("bad partition {s:?}, expected START..END")))?;
    let start: u64 = a.parse().map_err(|_| usage(format!("bad partition start {a:?}")))?;
    let end: u64 = b.parse().map_err(|_| usage(format!("bad partition end {b:?}")))?;
    if start > end || end > config.generating_count() {
        return Err(usage(format!(
            "partition {start}..{end} outside 0..{}",
            config.generating_count()
        )));
    }
    Ok((start, end))
}

fn build_config(args: &SearchArgs) -> Result<SearchConfig, CliError> {
    if !(3..=6).contains(&args.diameter) {
        return Err(usage(format!(
            "diameter {} outside supported range 3..=6",
            args.diameter
        )));
    }
    let mut config = SearchConfig::new(args.diameter);
    config.use_pb_filter = !args.no_pb_filter;
    config.exclude_linear_rules = !args.include_linear_rules;
    config.swap_reduced = args.swap_reduced;
    config.worker_count = args.jobs.unwrap_or_else(default_jobs).max(1);
    if let Some(p) = &args.partition {
        config.partition = Some(parse_partition(p, &config)?);
    }
    Ok(config)
}

/// A full-range diameter-6 scan takes hours; smaller runs do not need the
/// acknowledgement flag.
fn gate_long_run(config: &SearchConfig, confirmed: bool) -> Result<(), CliError> {
    let (start, end) = config.partition.unwrap_or((0, config.generating_count()));
    let full = start == 0 && end == config.generating_count();
    if config.diameter == 6 && full && !confirmed {
        return Err(usage(
            "a full diameter-6 search visits about 4.3e9 rule pairs (about 8.4e8 after the \
             pairwise-balancedness filter) and can run for hours; pass --confirm-long-run, \
             or restrict the scan with --partition"
                .to_string(),
        ));
    }
    if config.diameter == 6 && full {
        eprintln!(
            "full diameter-6 run: about 4.3e9 candidate pairs, about 8.4e8 after the \
             pairwise-balancedness filter"
        );
    }
    Ok(())
}

fn map_search_error(e: SearchError) -> CliError {
    match e {
        SearchError::Diameter(_) | SearchError::WorkerCount(_) | SearchError::Partition { .. } => {
            usage(e.to_string())
        }
        other => domain(other.to_string()),
    }
}

pub fn search(args: SearchArgs) -> Result<(), CliError> {
    let config = build_config(&args)?;
    gate_long_run(&config, args.confirm_long_run)?;
    let options = RunOptions {
        checkpoint: args.resume.as_deref(),
        stop: Some(interrupt_flag()),
        progress: true,
    };
    let outcome = run_search_with_options(&config, &options).map_err(map_search_error)?;
    let report = &outcome.report;
    print!("{}", report.summary());
    if outcome.interrupted {
        let note = match &args.resume {
            Some(p) => format!("interrupted; checkpoint persisted at {}", p.display()),
            None => "interrupted; rerun with --resume <path> to make runs resumable".to_string(),
        };
        return Err(CliError::Interrupted(note));
    }
    write_report(report, args.output.as_deref(), args.format)?;
    Ok(())
}

fn write_report(
    report: &SearchReport,
    output: Option<&Path>,
    format: Option<Format>,
) -> Result<(), CliError> {
    let Some(path) = output else {
        // a requested format without a file goes to standard output
        match format {
            Some(Format::Json) => print!("{}", report.to_json()),
            Some(Format::Csv) => {
                let mut buf = Vec::new();
                report.write_table_csv(&mut buf).map_err(map_search_error)?;
                print!("{}", String::from_utf8(buf).expect("csv is utf8"));
            }
            None => {}
        }
        return Ok(());
    };
    let write = |p: &Path, content: &[u8]| {
        std::fs::write(p, content).map_err(|e| domain(format!("cannot write {}: {e}", p.display())))
    };
    match format {
        Some(Format::Json) => write(path, report.to_json().as_bytes()),
        Some(Format::Csv) => {
            let mut buf = Vec::new();
            report.write_table_csv(&mut buf).map_err(map_search_error)?;
            write(path, &buf)
        }
        None => {
            write(&path.with_extension("json"), report.to_json().as_bytes())?;
            let mut buf = Vec::new();
            report.write_table_csv(&mut buf).map_err(map_search_error)?;
            write(&path.with_extension("csv"), &buf)?;
            let mut buf = Vec::new();
            report
                .write_classification_csv(&mut buf)
                .map_err(map_search_error)?;
            write(&path.with_extension("classes.csv"), &buf)
        }
    }
}

const ORIENTATION: &str = "leftmost codeword coordinate = constant term";

pub fn classify(
    diameter: Option<usize>,
    input: Option<PathBuf>,
    jobs: Option<usize>,
    output: Option<PathBuf>,
    format: Option<Format>,
    confirm_long_run: bool,
) -> Result<(), CliError> {
    let report = match input {
        Some(path) => {
            let content = std::fs::read_to_string(&path)
                .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            SearchReport::from_json(&content).map_err(map_search_error)?
        }
        None => {
            let d = diameter.ok_or_else(|| usage("classify needs --diameter or --input"))?;
            let args = SearchArgs {
                diameter: d,
                jobs,
                output: None,
                format: None,
                no_pb_filter: false,
                include_linear_rules: false,
                swap_reduced: false,
                confirm_long_run,
                resume: None,
                partition: None,
            };
            let config = build_config(&args)?;
            gate_long_run(&config, confirm_long_run)?;
            let options = RunOptions {
                checkpoint: None,
                stop: Some(interrupt_flag()),
                progress: true,
            };
            let outcome = run_search_with_options(&config, &options).map_err(map_search_error)?;
            if outcome.interrupted {
                return Err(CliError::Interrupted("classification run interrupted".into()));
            }
            outcome.report
        }
    };

    let n = 2 * (report.diameter - 1);
    let mut text = format!("# generator orientation: {ORIENTATION}\n");
    let linear_total: u64 = report.by_dimension.values().sum();
    text.push_str(&format!(
        "diameter {}, {} linear S-boxes in {} generator classes\n",
        report.diameter,
        linear_total,
        report.by_generator.len()
    ));
    let mut classes_json = Vec::new();
    for class in &report.by_generator {
        let poly = Gf2Poly::from_mask(class.generator_mask);
        let cyclic = poly
            .divides(Gf2Poly::x_pow_plus_one(n))
            .expect("generator nonzero");
        text.push_str(&format!(
            "  dim {}: {}{}  x{}\n",
            class.dimension,
            class.generator,
            if cyclic { " (cyclic)" } else { "" },
            class.count
        ));
        let mut obj = serde_json::Map::new();
        obj.insert("dimension".into(), class.dimension.into());
        obj.insert("generator".into(), class.generator.clone().into());
        obj.insert("generator_mask_hex".into(), poly.mask_hex().into());
        obj.insert("cyclic".into(), cyclic.into());
        obj.insert("count".into(), class.count.into());
        classes_json.push(serde_json::Value::Object(obj));
    }
    if report.non_polynomial > 0 {
        text.push_str(&format!(
            "  not polynomial codes: {}\n",
            report.non_polynomial
        ));
    }

    match format {
        Some(Format::Json) => {
            let mut obj = serde_json::Map::new();
            obj.insert("diameter".into(), report.diameter.into());
            obj.insert("orientation".into(), ORIENTATION.into());
            obj.insert("classes".into(), serde_json::Value::Array(classes_json));
            obj.insert("non_polynomial".into(), report.non_polynomial.into());
            emit(
                output.as_deref(),
                &format!("{:#}\n", serde_json::Value::Object(obj)),
            )?;
        }
        Some(Format::Csv) => {
            let mut buf = Vec::new();
            report
                .write_classification_csv(&mut buf)
                .map_err(map_search_error)?;
            emit(output.as_deref(), std::str::from_utf8(&buf).expect("utf8"))?;
        }
        None => emit(output.as_deref(), &text)?,
    }
    Ok(())
}

pub fn verify(diameter: usize, confirm_long_run: bool) -> Result<(), CliError> {
    if diameter == 3 {
        return Err(usage(
            "diameter 3 has no nonlinear rules, so there is nothing to verify".to_string(),
        ));
    }
    if !(4..=6).contains(&diameter) {
        return Err(usage(format!("diameter {diameter} outside supported range 4..=6")));
    }
    if diameter == 6 && !confirm_long_run {
        return Err(usage(
            "verifying every diameter-6 pair takes hours; pass --confirm-long-run".to_string(),
        ));
    }
    let b = diameter - 1;
    let n = 2 * b;
    let lo_mask: u16 = (1 << b) - 1;
    let config = SearchConfig::new(diameter);

    let mut linear_boxes = 0u64;
    let mut nonlinear_boxes = 0u64;
    let mut support_viol: Vec<String> = Vec::new();
    let mut shift_viol: Vec<String> = Vec::new();
    let mut extract_viol: Vec<String> = Vec::new();
    let describe = |left: u64, right: u64| -> String {
        let f = oca_core::search::rule_from_generating_index(left, diameter).expect("in range");
        let g = oca_core::search::rule_from_generating_index(right, diameter).expect("in range");
        format!("pair f={}, g={}", f.wolfram(), g.wolfram())
    };
    for_each_oca_pair(&config, |left, right, sbox: &SBox| {
        if !sbox.is_bijective() {
            extract_viol.push(format!("{}: S-box is not bijective", describe(left, right)));
            return;
        }
        if sbox.nonlinearity(true) != 0 {
            nonlinear_boxes += 1;
            return;
        }
        linear_boxes += 1;
        let lcs = sbox.linear_components_space();
        let members: BTreeSet<u16> = lcs.members().iter().copied().collect();
        for &v in &members {
            // supports of linear components must touch both output halves
            if v >> b == 0 || v & lo_mask == 0 {
                support_viol.push(format!(
                    "{}: component {v:#x} lives in one half",
                    describe(left, right)
                ));
            }
            // shift closure inside the LCS
            if v & (1 << b) == 0 && v & 1 == 0 && !members.contains(&(v >> 1)) {
                shift_viol.push(format!(
                    "{}: right shift of component {v:#x} left the LCS",
                    describe(left, right)
                ));
            }
            if v & (1 << (n - 1)) == 0
                && v & (1 << (b - 1)) == 0
                && !members.contains(&((v << 1) & ((1 << n) - 1)))
            {
                shift_viol.push(format!(
                    "{}: left shift of component {v:#x} left the LCS",
                    describe(left, right)
                ));
            }
        }
        if members.len() != (1usize << lcs.dimension()) - 1 {
            extract_viol.push(format!(
                "{}: LCS size {} does not match dimension {}",
                describe(left, right),
                members.len(),
                lcs.dimension()
            ));
        }
        if let Err(e) = extract_generator(lcs.members(), n) {
            extract_viol.push(format!(
                "{}: generator extraction failed: {e}",
                describe(left, right)
            ));
        }
    })
    .map_err(map_search_error)?;

    println!(
        "diameter {diameter}: {linear_boxes} linear and {nonlinear_boxes} nonlinear S-boxes checked"
    );
    let status = |v: &Vec<String>| if v.is_empty() { "ok".to_string() } else { format!("{} violations", v.len()) };
    println!("  support spread over both halves : {}", status(&support_viol));
    println!("  shift closure of the LCS        : {}", status(&shift_viol));
    println!("  polynomial-code extraction      : {}", status(&extract_viol));
    let total = support_viol.len() + shift_viol.len() + extract_viol.len();
    if total > 0 {
        for v in support_viol.iter().chain(&shift_viol).chain(&extract_viol).take(20) {
            println!("  counterexample: {v}");
        }
        return Err(CliError::Finding(format!("{total} property violations found")));
    }
    let _ = std::io::stdout().flush();
    Ok(())
}
