//! Command-line front end: class enumeration, products and zeta values,
//! period matrices, the Eichler pairing, the exact power-series checks, and
//! the verification suite. One self-describing JSON document per invocation
//! (CSV where requested); diagnostics go to standard error.
//!
//! Exit codes: 0 success, 1 computation error, 2 invalid input.

use std::fmt::Write as _;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rug::ops::RemRounding;
use rug::{Complex, Float, Rational};
use serde_json::{json, Map, Value};

use schottky_zeta::arithdefo::{f1_series, fk_series, word_multiplier_series, ArithConfig, MultiSeries};
use schottky_zeta::eichler::{default_seeds, normalized_basis};
use schottky_zeta::error::Error;
use schottky_zeta::groupspec::parse_group_spec_with_default;
use schottky_zeta::moebius::MarkedSchottkyGroup;
use schottky_zeta::periods::{check_normalization, period_matrix};
use schottky_zeta::prec::{format_complex, format_float, parse_exact, DEFAULT_PRECISION, MIN_PRECISION};
use schottky_zeta::products::{
    check_ratio_identity, constants, default_m_max, f1_from, fk_from, modified_ruelle_from,
    ruelle_zeta_from, ClassMultipliers, TruncatedValue,
};
use schottky_zeta::verify::{all_passed, run_all};
use schottky_zeta::words::{enumerate_classes, Word};

const SCHEMA: &str = "schottky-zeta/1";

/// Everything one invocation needs: the subcommand plus shared settings.
#[derive(Parser, Debug)]
#[command(name = "schottky-zeta", version, about = "Schottky-group products, zeta values, periods and exact series checks")]
struct RunConfig {
    /// Worker threads for parallel stages (default: one per core). Results
    /// are bit-identical for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct GroupArg {
    /// Path to a JSON group specification
    #[arg(long)]
    group: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate primitive conjugacy classes as JSON lines {word, length}
    Classes {
        #[arg(long)]
        rank: usize,
        #[arg(long = "max-len")]
        max_len: usize,
        /// Emit a single summary document instead of one line per class
        #[arg(long = "count-only")]
        count_only: bool,
    },
    /// Truncated products and zeta values over a group
    Products {
        #[command(flatten)]
        group: GroupArg,
        /// One of f1 | fk | zeta | modified | ratio
        #[arg(long)]
        what: String,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long = "max-len", default_value_t = 10)]
        max_len: usize,
        /// Exponent cutoff; defaults to the smallest value that drives the
        /// dropped factors below the working precision
        #[arg(long = "m-max")]
        m_max: Option<usize>,
        /// Complex argument "RE,IM" for --what zeta
        #[arg(long, allow_hyphen_values = true)]
        s: Option<String>,
        /// Emit the per-shell CSV table instead of JSON
        #[arg(long)]
        csv: bool,
    },
    /// Shortcut for products --what zeta
    Zeta {
        #[command(flatten)]
        group: GroupArg,
        #[arg(long, default_value = "2,0", allow_hyphen_values = true)]
        s: String,
        #[arg(long = "max-len", default_value_t = 10)]
        max_len: usize,
        #[arg(long)]
        csv: bool,
    },
    /// Normalization matrix and period matrix by contour integration
    Periods {
        #[command(flatten)]
        group: GroupArg,
        #[arg(long = "max-len", default_value_t = 8)]
        max_len: usize,
        #[arg(long, default_value_t = 2048)]
        nodes: usize,
    },
    /// Duality-normalized basis of k-differentials
    Eichler {
        #[command(flatten)]
        group: GroupArg,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long = "max-len", default_value_t = 6)]
        max_len: usize,
        #[arg(long, default_value_t = 512)]
        nodes: usize,
    },
    /// Exact Weierstrass-relation residual at a rational point
    TateCheck {
        /// Rational point, e.g. 5/7 or -3
        #[arg(long, allow_hyphen_values = true)]
        z0: String,
        #[arg(long, default_value_t = 40)]
        order: usize,
    },
    /// Exact telescoping-identity residual
    Telescope {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 60)]
        order: usize,
    },
    /// Truncated multivariate expansions over the deformation ring
    Expand {
        #[arg(long)]
        g: usize,
        /// Extra fixed-point values, e.g. "-2=3" or "-2=3,3=9,-3=5/2"
        #[arg(long = "x-values", default_value = "", allow_hyphen_values = true)]
        x_values: String,
        #[arg(long, default_value_t = 10)]
        degree: u32,
        /// Word letters, e.g. "1,2,-1"
        #[arg(long, allow_hyphen_values = true)]
        word: Option<String>,
        /// Expand the eta-like product over all classes
        #[arg(long)]
        f1: bool,
        /// Expand the k-shifted product with its prefactor
        #[arg(long)]
        fk: Option<u32>,
        /// Reduce the coefficients modulo this prime
        #[arg(long = "mod-p")]
        mod_p: Option<u64>,
    },
    /// Closed-form constants at genus g and weight k
    Constants {
        #[arg(long)]
        g: u32,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        precision: Option<u32>,
    },
    /// Run the verification suite
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        precision: Option<u32>,
        /// Recorded in the output; reserved for randomized property checks
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let config = RunConfig::parse();
    if let Some(n) = config.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidInput(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn env_default_precision() -> u32 {
    match std::env::var("SCHOTTKY_PRECISION_BITS") {
        Ok(v) => v.parse().unwrap_or(DEFAULT_PRECISION).max(MIN_PRECISION),
        Err(_) => DEFAULT_PRECISION,
    }
}

fn load_group(path: &str) -> Result<MarkedSchottkyGroup, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {path}: {e}")))?;
    parse_group_spec_with_default(&text, env_default_precision())
}

fn parse_complex_arg(s: &str, prec: u32) -> Result<Complex, Error> {
    let (re, im) = match s.split_once(',') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (s.trim(), "0"),
    };
    let re = parse_exact(re)?;
    let im = parse_exact(im)?;
    Ok(Complex::with_val(prec, (Float::with_val(prec, &re), Float::with_val(prec, &im))))
}

fn emit(doc: &Value) {
    println!("{}", serde_json::to_string_pretty(doc).expect("serializable"));
}

fn complex_json(z: &Complex, prec: u32) -> Value {
    let (re, im) = format_complex(z, prec);
    json!([re, im])
}

fn truncated_value_json(v: &TruncatedValue, what: &str, prec: u32) -> Value {
    let shells: Vec<Value> = v
        .shells
        .iter()
        .map(|s| {
            json!({
                "length": s.length,
                "classes": s.class_count,
                "log_contribution": complex_json(&s.log_contribution, prec),
                "cumulative_log": complex_json(&s.cumulative, prec),
            })
        })
        .collect();
    json!({
        "schema": SCHEMA,
        "what": what,
        "value": complex_json(&v.value, prec),
        "tail": format_float(&v.tail_estimate, prec),
        "max_len": v.max_len,
        "m_max": v.m_max,
        "shells": shells,
        "warnings": v.warnings,
    })
}

/// Per-shell CSV rows: length, class count, shell log contribution and the
/// cumulative log (real and imaginary parts), full precision. An empty
/// truncation emits the header only.
fn emit_shell_table(v: &TruncatedValue, prec: u32) -> String {
    let mut out = String::from(
        "length,classes,shell_log_re,shell_log_im,cumulative_log_re,cumulative_log_im\n",
    );
    for s in &v.shells {
        let (slr, sli) = format_complex(&s.log_contribution, prec);
        let (clr, cli) = format_complex(&s.cumulative, prec);
        let _ = writeln!(out, "{},{},{slr},{sli},{clr},{cli}", s.length, s.class_count);
    }
    out
}

fn run(config: RunConfig) -> Result<(), Error> {
    match config.command {
        Command::Classes { rank, max_len, count_only } => {
            if rank == 0 || max_len == 0 {
                return Err(Error::InvalidInput("rank and max-len must be positive".into()));
            }
            let classes = enumerate_classes(rank, max_len);
            if count_only {
                let mut by_length = vec![0usize; max_len];
                for c in &classes {
                    by_length[c.word.len() - 1] += 1;
                }
                emit(&json!({
                    "schema": SCHEMA,
                    "rank": rank,
                    "max_len": max_len,
                    "total": classes.len(),
                    "by_length": by_length,
                }));
            } else {
                for c in &classes {
                    println!(
                        "{}",
                        serde_json::to_string(&json!({
                            "word": c.word.letters(),
                            "length": c.word.len(),
                        }))
                        .expect("serializable")
                    );
                }
            }
            Ok(())
        }
        Command::Products { group, what, k, max_len, m_max, s, csv } => {
            let g = load_group(&group.group)?;
            let prec = g.precision();
            let cm = ClassMultipliers::compute(&g, max_len)?;
            let m_max = m_max.unwrap_or_else(|| default_m_max(cm.q_top(), prec));
            let tv = match what.as_str() {
                "f1" => f1_from(&cm, max_len, m_max)?,
                "fk" => fk_from(&cm, &g, k, max_len, m_max)?,
                "zeta" => {
                    let s = parse_complex_arg(s.as_deref().unwrap_or("2,0"), prec)?;
                    ruelle_zeta_from(&cm, &s, max_len)?
                }
                "modified" => modified_ruelle_from(&cm, &g, k, max_len)?,
                "ratio" => {
                    let r = check_ratio_identity(&g, k, max_len)?;
                    emit(&json!({
                        "schema": SCHEMA,
                        "what": "ratio",
                        "k": k,
                        "max_len": max_len,
                        "residual": format_float(&r.residual, prec),
                        "combined_tail": format_float(&r.combined_tail, prec),
                        "modified_zeta": complex_json(&r.modified_zeta.value, prec),
                        "f_k": complex_json(&r.f_k.value, prec),
                        "f_k_plus_1": complex_json(&r.f_k_plus_1.value, prec),
                    }));
                    return Ok(());
                }
                other => {
                    return Err(Error::InvalidInput(format!(
                        "unknown --what {other:?}; expected f1|fk|zeta|modified|ratio"
                    )))
                }
            };
            for w in &tv.warnings {
                eprintln!("warning: {w}");
            }
            if csv {
                print!("{}", emit_shell_table(&tv, prec));
            } else {
                emit(&truncated_value_json(&tv, &what, prec));
            }
            Ok(())
        }
        Command::Zeta { group, s, max_len, csv } => {
            let g = load_group(&group.group)?;
            let prec = g.precision();
            let cm = ClassMultipliers::compute(&g, max_len)?;
            let s = parse_complex_arg(&s, prec)?;
            let tv = ruelle_zeta_from(&cm, &s, max_len)?;
            for w in &tv.warnings {
                eprintln!("warning: {w}");
            }
            if csv {
                print!("{}", emit_shell_table(&tv, prec));
            } else {
                emit(&truncated_value_json(&tv, "zeta", prec));
            }
            Ok(())
        }
        Command::Periods { group, max_len, nodes } => {
            let g = load_group(&group.group)?;
            let prec = g.precision();
            let norm = check_normalization(&g, max_len, nodes)?;
            let pm = period_matrix(&g, max_len, nodes)?;
            let tau: Vec<Vec<Value>> = pm
                .tau
                .iter()
                .map(|row| row.iter().map(|z| complex_json(z, prec)).collect())
                .collect();
            emit(&json!({
                "schema": SCHEMA,
                "max_len": max_len,
                "nodes": nodes,
                "tau": tau,
                "normalization_error": format_float(&norm.max_deviation, prec),
                "asymmetry": format_float(&pm.asymmetry, prec),
            }));
            Ok(())
        }
        Command::Eichler { group, k, max_len, nodes } => {
            let g = load_group(&group.group)?;
            let prec = g.precision();
            let seeds = default_seeds(&g, k)?;
            let basis = normalized_basis(&g, k, seeds, max_len, nodes)?;
            emit(&json!({
                "schema": SCHEMA,
                "k": k,
                "max_len": max_len,
                "nodes": nodes,
                "dims": basis.dimension(),
                "gram_residual": format_float(&basis.gram_residual, prec),
                "condition": format_float(&basis.condition, prec),
            }));
            Ok(())
        }
        Command::TateCheck { z0, order } => {
            let z0 = parse_exact(&z0)?;
            let res = schottky_zeta::tate::weierstrass_check(&z0, order)?;
            emit(&json!({
                "schema": SCHEMA,
                "z0": z0.to_string(),
                "order": order,
                "residual_zero": res.is_zero(),
                "first_nonzero_order": res.first_nonzero_order(),
            }));
            Ok(())
        }
        Command::Telescope { k, order } => {
            let res = schottky_zeta::tate::telescoping_check(k, order)?;
            emit(&json!({
                "schema": SCHEMA,
                "k": k,
                "order": order,
                "residual_zero": res.is_zero(),
                "first_nonzero_order": res.first_nonzero_order(),
            }));
            Ok(())
        }
        Command::Expand { g, x_values, degree, word, f1, fk, mod_p } => {
            let mut xs: Vec<(i32, Rational)> = Vec::new();
            for part in x_values.split(',').filter(|p| !p.trim().is_empty()) {
                let (idx, val) = part
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidInput(format!("bad x assignment {part:?}")))?;
                let idx: i32 = idx
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad x index {idx:?}")))?;
                xs.push((idx, parse_exact(val.trim())?));
            }
            let cfg = ArithConfig::new(g, &xs, degree)?;
            let series: MultiSeries = if let Some(ws) = word {
                let letters: Vec<i32> = ws
                    .split(',')
                    .map(|t| t.trim().parse::<i32>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| Error::InvalidInput(format!("bad word {ws:?}")))?;
                word_multiplier_series(&Word::new(letters, g)?, &cfg)?
            } else if f1 {
                f1_series(&cfg)?
            } else if let Some(k) = fk {
                fk_series(&cfg, k)?
            } else {
                return Err(Error::InvalidInput(
                    "choose one of --word, --f1 or --fk K".into(),
                ));
            };
            let monomials: Vec<Value> = match mod_p {
                None => series
                    .terms()
                    .map(|(e, c)| {
                        json!({
                            "exp": e,
                            "num": c.numer().to_string(),
                            "den": c.denom().to_string(),
                        })
                    })
                    .collect(),
                Some(p) => {
                    let pi = rug::Integer::from(p);
                    let mut rows = Vec::new();
                    for (e, c) in series.terms() {
                        if c.denom().is_divisible(&pi) {
                            return Err(Error::InvalidInput(format!(
                                "coefficient at {e:?} is not {p}-integral"
                            )));
                        }
                        let den_inv = c
                            .denom()
                            .clone()
                            .invert(&pi)
                            .map_err(|_| Error::InvalidInput(format!("{p} is not prime")))?;
                        let res = (c.numer().clone() * den_inv).rem_euc(&pi);
                        rows.push(json!({"exp": e, "res": res.to_string()}));
                    }
                    rows
                }
            };
            emit(&json!({
                "schema": SCHEMA,
                "g": g,
                "degree": degree,
                "mod_p": mod_p,
                "monomials": monomials,
            }));
            Ok(())
        }
        Command::Constants { g, k, precision } => {
            let prec = precision.unwrap_or_else(env_default_precision).max(MIN_PRECISION);
            let c = constants(g, k, prec)?;
            emit(&json!({
                "schema": SCHEMA,
                "g": g,
                "k": k,
                "precision_bits": prec,
                "d_k": c.d_k.to_string(),
                "c_g": format_float(&c.c_g, prec),
                "c_g_k": format_float(&c.c_g_k, prec),
                "a_g": format_float(&c.a_g, prec),
                "zeta_prime_minus1": format_float(&c.zeta_prime_minus1, prec),
            }));
            Ok(())
        }
        Command::Verify { suite, precision, seed } => {
            if suite != "all" {
                return Err(Error::InvalidInput(format!(
                    "unknown suite {suite:?}; only \"all\" is available"
                )));
            }
            let prec = precision.unwrap_or_else(env_default_precision).max(MIN_PRECISION);
            let outcomes = run_all(prec);
            let ok = all_passed(&outcomes);
            let criteria: Vec<Value> = outcomes
                .iter()
                .map(|o| {
                    let mut details = Map::new();
                    for (k, v) in &o.details {
                        details.insert(k.clone(), Value::String(v.clone()));
                    }
                    json!({
                        "id": o.id,
                        "name": o.name,
                        "passed": o.passed,
                        "details": details,
                    })
                })
                .collect();
            for o in &outcomes {
                eprintln!("criterion {:>2} {:<34} {}", o.id, o.name, if o.passed { "pass" } else { "FAIL" });
            }
            emit(&json!({
                "schema": SCHEMA,
                "suite": suite,
                "precision_bits": prec,
                "seed": seed,
                "criteria": criteria,
                "all_passed": ok,
            }));
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter("verification suite reported failures".into()))
            }
        }
    }
}
