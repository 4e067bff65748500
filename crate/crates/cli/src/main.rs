use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use serde_json::{json, Value};

use multibook::book_engine::{check_all, run_with, EngineParams, Outcome, Trace};
use multibook::bounds::{appendix_check, book_target_bounds, es_upper, thm51_chain, thm_book_hypotheses};
use multibook::exact::{decode, encode, Rational};
use multibook::geometry::{check_special_bounds, moment_double_sum, moment_tensor, TensorCap, VectorFamily};
use multibook::oracle::{best_book, ramsey_exhaustive, validate_book_engine, RamseyOutcome, SearchBudget};
use multibook::pipeline::{desk_ramsey_driver, lemma53_check, regularise, verify_regularisation, DriverConfig};
use multibook::{product_colouring, random_colouring, EdgeColouring, Error, Exec};

#[derive(Parser)]
#[command(
    name = "multibook",
    version,
    about = "Multicolour book algorithm and Ramsey bound checks"
)]
struct Cli {
    /// Run single-threaded.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a colouring in .rcg format.
    Generate {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        r: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `product` multiplies two independent random colourings on n vertices.
        #[arg(long, value_enum, default_value_t = Kind::Random)]
        kind: Kind,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the book algorithm on X = Y_i = V and write its trace.
    RunBook {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        t: usize,
        #[arg(long, value_parser = rational, required_unless_present_all = ["mu", "p"])]
        lambda0: Option<Rational>,
        #[arg(long, value_parser = rational, required_unless_present_all = ["mu", "p"])]
        delta: Option<Rational>,
        /// With --p, derive delta and lambda0 instead.
        #[arg(long, value_parser = rational, requires = "p", conflicts_with_all = ["lambda0", "delta"])]
        mu: Option<Rational>,
        #[arg(long, value_parser = rational, requires = "mu")]
        p: Option<Rational>,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Replay every monitor over a trace.
    VerifyTrace {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Regularise a colouring and recheck the result.
    Regularise {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, value_parser = rational)]
        eps: Rational,
    },
    #[command(subcommand)]
    Bounds(BoundsCmd),
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Moment positivity and tensor agreement on a random vector family.
    Moments {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dimension of each colour's vectors.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        /// Exponent of each colour.
        #[arg(long, value_delimiter = ',', required = true)]
        ells: Vec<u32>,
        #[arg(long, default_value_t = 6)]
        size: usize,
    },
    /// Check the special-function bound at one point.
    Special {
        #[arg(long, value_delimiter = ',', value_parser = rational, required = true, allow_hyphen_values = true)]
        xs: Vec<Rational>,
    },
    /// Regularise, then escape or run the book algorithm, then search for K_k.
    Drive {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_parser = rational, default_value = "1/20")]
        eps: Rational,
        #[arg(long, default_value_t = 1)]
        t: usize,
        #[arg(long, value_parser = rational, default_value = "10")]
        lambda0: Rational,
        #[arg(long, value_parser = rational, default_value = "1/16")]
        delta: Rational,
        /// Defaults to ceil(eps^2 k).
        #[arg(long)]
        escape_threshold: Option<usize>,
        #[arg(long)]
        partition_seed: Option<u64>,
    },
}

#[derive(Subcommand)]
enum BoundsCmd {
    /// Constant chain of the main bound.
    Thm51 {
        #[arg(long)]
        r: u64,
    },
    /// Multinomial tail bound.
    Appendix {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        t: u64,
        #[arg(long)]
        r: u64,
    },
    /// Hypotheses of the book theorem.
    ThmBook {
        #[arg(long, value_parser = rational)]
        p: Rational,
        #[arg(long, value_parser = rational)]
        mu: Rational,
        #[arg(long)]
        t: BigUint,
        #[arg(long)]
        m: BigUint,
        #[arg(long)]
        r: u64,
        #[arg(long)]
        x: BigUint,
        #[arg(long, value_delimiter = ',', required = true)]
        ys: Vec<BigUint>,
    },
    /// Off-diagonal escape bound.
    Escape {
        #[arg(long)]
        r: u64,
        #[arg(long)]
        k: u64,
        #[arg(long, value_parser = rational)]
        eps: Rational,
        #[arg(long, value_delimiter = ',', required = true)]
        s: Vec<u64>,
    },
    /// Erdős–Szekeres upper bound.
    Es {
        #[arg(long)]
        r: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        ks: Vec<u64>,
    },
    /// Book size needed for the main bound at given k and t.
    BookTarget {
        #[arg(long)]
        r: u64,
        #[arg(long)]
        k: BigUint,
        #[arg(long)]
        t: BigUint,
    },
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Exhaustive search for a colouring of K_n avoiding every K_{k_i} in colour i.
    Ramsey {
        #[arg(long)]
        r: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        ks: Vec<usize>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = SearchBudget::default().node_limit)]
        node_limit: u64,
    },
    /// Largest monochromatic book with a t-vertex spine.
    Book {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        t: usize,
    },
    /// Compare the book algorithm with the best book.
    Validate {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        t: usize,
        #[arg(long, value_parser = rational)]
        lambda0: Rational,
        #[arg(long, value_parser = rational)]
        delta: Rational,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Random,
    Product,
    Pentagon,
}

fn rational(s: &str) -> Result<Rational, String> {
    decode(s)
}

enum Failure {
    /// A checked inequality or invariant failed.
    Verification(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::LemmaViolation { .. } => Failure::Verification(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

type Out = Result<(Value, bool), Failure>;

fn read_colouring(path: &Path) -> Result<EdgeColouring, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(EdgeColouring::parse(&text)?)
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Writes a line to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    };
    match dispatch(cli.command, exec) {
        Ok((value, pass)) => {
            emit(&serde_json::to_string_pretty(&value).expect("serialisable"));
            if pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("verification failed");
                ExitCode::from(1)
            }
        }
        Err(Failure::Verification(msg)) => {
            emit(&json!({ "pass": false, "violation": msg }).to_string());
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            emit(&json!({ "error": msg }).to_string());
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command, exec: Exec) -> Out {
    match cmd {
        Command::Generate {
            n,
            r,
            seed,
            kind,
            output,
        } => {
            let c = match kind {
                Kind::Random => random_colouring(n, r, seed)?,
                Kind::Product => product_colouring(
                    &random_colouring(n, r, seed)?,
                    &random_colouring(n, r, seed.wrapping_add(1))?,
                )?,
                Kind::Pentagon => EdgeColouring::pentagon(),
            };
            write_file(&output, &c.serialize())?;
            eprintln!("wrote K_{} with {} colours to {}", c.n(), c.r(), output.display());
            Ok((
                json!({ "n": c.n(), "r": c.r(), "hash": c.content_hash(), "path": output }),
                true,
            ))
        }
        Command::RunBook {
            input,
            t,
            lambda0,
            delta,
            mu,
            p,
            trace,
        } => {
            let c = read_colouring(&input)?;
            let params = match (mu, p, lambda0, delta) {
                (Some(mu), Some(p), _, _) => EngineParams::from_mu(c.r(), t, &mu, &p)?,
                (_, _, Some(l), Some(d)) => EngineParams::new(c.r(), t, l, d)?,
                _ => return Err(Failure::Usage("need --lambda0 and --delta, or --mu and --p".into())),
            };
            let v = c.vertices();
            let out = run_with(&c, &v, &vec![v.clone(); c.r()], &params, exec)?;
            write_file(&trace, &out.trace.to_jsonl())?;
            let summary = match &out.result {
                Outcome::BookFound { colour, spine, pages } => {
                    format!(
                        "colour-{colour} book, spine {:?}, {} pages",
                        spine.to_vec(),
                        pages.len()
                    )
                }
                other => format!("{other:?}"),
            };
            eprintln!("{} rounds: {summary}", out.trace.steps.len());
            Ok((
                json!({
                    "outcome": out.result,
                    "rounds": out.trace.steps.len(),
                    "lambda0": encode(&params.lambda0),
                    "delta": encode(&params.delta),
                    "trace": trace,
                    "trace_hash": out.trace.content_hash(),
                }),
                true,
            ))
        }
        Command::VerifyTrace { trace } => {
            let text = fs::read_to_string(&trace).map_err(|e| Failure::Usage(format!("{}: {e}", trace.display())))?;
            let t = Trace::from_jsonl(&text)?;
            let reports = check_all(&t)?;
            for m in &reports {
                match &m.skipped {
                    Some(why) => eprintln!("{}: skipped ({why})", m.lemma),
                    None => eprintln!("{}: {} checks passed", m.lemma, m.checked),
                }
            }
            Ok((json!({ "pass": true, "monitors": reports }), true))
        }
        Command::Regularise { input, eps } => {
            let c = read_colouring(&input)?;
            let res = regularise(&c, &eps)?;
            verify_regularisation(&c, &res)?;
            eprintln!("peeled {} vertices, |W| = {}", res.spine_total(), res.w.len());
            Ok((json!({ "pass": true, "result": res }), true))
        }
        Command::Bounds(b) => bounds(b),
        Command::Oracle(o) => oracle(o, exec),
        Command::Moments { seed, dims, ells, size } => {
            if dims.len() != ells.len() {
                return Err(Failure::Usage("--dims and --ells need the same length".into()));
            }
            let f = VectorFamily::random(size, &dims, seed)?;
            let double = moment_double_sum(&f, &ells)?;
            let tensor = moment_tensor(&f, &ells, TensorCap::default())?;
            let nonneg = double >= Rational::from_integer(0.into());
            let agree = double == tensor;
            eprintln!("double sum {double}, tensor {tensor}");
            Ok((
                json!({
                    "double_sum": encode(&double),
                    "tensor": encode(&tensor),
                    "nonnegative": nonneg,
                    "agree": agree,
                }),
                nonneg && agree,
            ))
        }
        Command::Special { xs } => {
            let check = check_special_bounds(&xs)?;
            eprintln!("margin {:.6e}", check.margin);
            Ok((json!(check), true))
        }
        Command::Drive {
            input,
            k,
            eps,
            t,
            lambda0,
            delta,
            escape_threshold,
            partition_seed,
        } => {
            let c = read_colouring(&input)?;
            let cfg = DriverConfig {
                eps,
                t,
                lambda0,
                delta,
                escape_threshold,
                partition_seed,
                budget: SearchBudget::default(),
            };
            let report = desk_ramsey_driver(&c, k, &cfg)?;
            eprintln!("{:?} branch, |W| = {}", report.branch, report.w_size);
            Ok((json!({ "config": cfg, "report": report }), true))
        }
    }
}

fn bounds(cmd: BoundsCmd) -> Out {
    match cmd {
        BoundsCmd::Thm51 { r } => {
            let rep = thm51_chain(r)?;
            for f in rep.failures() {
                eprintln!("link {} fails", f.name);
            }
            let pass = rep.pass();
            Ok((json!(rep), pass))
        }
        BoundsCmd::Appendix { k, t, r } => {
            let rep = appendix_check(k, t, r)?;
            let pass = rep.pass();
            Ok((json!(rep), pass))
        }
        BoundsCmd::ThmBook { p, mu, t, m, r, x, ys } => {
            let rep = thm_book_hypotheses(&p, &mu, &t, &m, r, &x, &ys)?;
            for c in rep.checks.iter().filter(|c| !c.pass) {
                eprintln!("hypothesis {} fails", c.name);
            }
            let pass = rep.pass();
            Ok((json!(rep), pass))
        }
        BoundsCmd::Escape { r, k, eps, s } => {
            let rep = lemma53_check(r, k, &eps, &s)?;
            let pass = rep.pass();
            Ok((json!(rep), pass))
        }
        BoundsCmd::Es { r, ks } => Ok((json!(es_upper(r, &ks)?), true)),
        BoundsCmd::BookTarget { r, k, t } => {
            let rep = book_target_bounds(r, &k, &t)?;
            Ok((json!(rep), true))
        }
    }
}

fn oracle(cmd: OracleCmd, exec: Exec) -> Out {
    let budget = SearchBudget::default();
    match cmd {
        OracleCmd::Ramsey { r, ks, n, node_limit } => {
            let budget = SearchBudget { node_limit, ..budget };
            let value = match ramsey_exhaustive(r, &ks, n, &budget, exec)? {
                RamseyOutcome::AllColouringsContainMono => {
                    eprintln!("every {r}-colouring of K_{n} has a forced clique");
                    json!({ "outcome": "AllColouringsContainMono", "n": n, "ks": ks })
                }
                RamseyOutcome::CounterexampleFound(c) => {
                    eprintln!("counterexample on K_{n}");
                    json!({
                        "outcome": "CounterexampleFound",
                        "n": n,
                        "ks": ks,
                        "colouring": c.serialize(),
                    })
                }
            };
            Ok((value, true))
        }
        OracleCmd::Book { input, t } => {
            let c = read_colouring(&input)?;
            let book = best_book(&c, t, &budget)?;
            match &book {
                Some(b) => eprintln!("best book: {} pages in colour {}", b.m_max, b.colour),
                None => eprintln!("no monochromatic K_{t}"),
            }
            Ok((json!({ "t": t, "book": book }), true))
        }
        OracleCmd::Validate {
            input,
            t,
            lambda0,
            delta,
        } => {
            let c = read_colouring(&input)?;
            let params = EngineParams::new(c.r(), t, lambda0, delta)?;
            let v = validate_book_engine(&c, &params, &budget)?;
            let pass = v.valid;
            Ok((json!(v), pass))
        }
    }
}
