//! The `sumnet` command line. Exit codes: 0 success, 1 domain error, 2 usage error.

use std::collections::BTreeMap;
use std::error::Error;
use std::ffi::OsString;
use std::io::{Read, Write};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sumnet_core::codes::{canonical_reverse_code, is_solution, transfer_matrix, verify_nonlinear};
use sumnet_core::families::{known_code, Family, FamilySpec};
use sumnet_core::gflin::{FieldSpec, MatrixGF};
use sumnet_core::netmodel::{connectivity, min_cut, min_source_terminal_cut, Network};
use sumnet_core::solver::SearchOptions;
use sumnet_core::transforms::{self, TransformTrace};

use crate::dot::export_dot;
use crate::driver;
use crate::formats::{self, report_to_json, witness_to_json};

type Fallible<T = ()> = Result<T, Box<dyn Error>>;

#[derive(Parser, Debug)]
#[command(name = "sumnet", version, about = "Build, transform and search network codes on sum-networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Emit a named network family member as network JSON.
    Family {
        #[arg(long, value_enum)]
        name: FamilyName,
        #[arg(long)]
        m: Option<usize>,
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Apply a construction to a network.
    Transform {
        #[arg(long, value_enum)]
        op: Op,
        #[arg(long)]
        net: String,
        #[arg(short, long)]
        output: Option<String>,
        /// Also write the construction roles of added ids as JSON.
        #[arg(long)]
        trace: Option<String>,
    },
    /// Search for a linear (or, with --nonlinear, a table) solution.
    Search {
        #[arg(long)]
        net: String,
        /// Field characteristic for linear search.
        #[arg(long, required_unless_present = "nonlinear")]
        field: Option<u32>,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Search table codes over Z_Q instead.
        #[arg(long, value_name = "Q")]
        nonlinear: Option<u32>,
        #[command(flatten)]
        tuning: Tuning,
        /// Write the witness code here when one is found.
        #[arg(long)]
        witness: Option<String>,
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Scalar/vector verdicts of a family member for several primes.
    Classify {
        #[arg(long, value_enum)]
        family: FamilyName,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_value = "2,3,5")]
        primes: Vec<u32>,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Check a linear code and dump its transfer matrix.
    Verify {
        #[arg(long)]
        net: String,
        #[arg(long)]
        code: String,
    },
    /// Check a table code on every message assignment.
    VerifyNonlinear {
        #[arg(long)]
        net: String,
        #[arg(long)]
        code: String,
        #[arg(long, default_value_t = 1 << 24)]
        budget: u64,
    },
    /// The canonical code on the reverse network.
    ReverseCode {
        #[arg(long)]
        net: String,
        #[arg(long)]
        code: String,
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Transfer matrix of a linear code as JSON.
    Transfer {
        #[arg(long)]
        net: String,
        #[arg(long)]
        code: String,
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Unit-capacity min-cut between two nodes, or the smallest source-terminal cut.
    Mincut {
        #[arg(long)]
        net: String,
        #[arg(long, requires = "to")]
        from: Option<String>,
        #[arg(long, requires = "from")]
        to: Option<String>,
    },
    /// Source-terminal reachability as JSON.
    Connectivity {
        #[arg(long)]
        net: String,
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Graphviz rendering of a network.
    ExportDot {
        #[arg(long)]
        net: String,
        #[arg(long)]
        trace: Option<String>,
        #[arg(short, long)]
        output: Option<String>,
    },
    /// The explicit solution known for a family member, if any.
    KnownCode {
        #[arg(long, value_enum)]
        family: FamilyName,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        field: u32,
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Multiply source coefficients by per-message scalars.
    ScaleSources {
        #[arg(long)]
        code: String,
        /// MESSAGE=VALUE, scaling that message by VALUE·I.
        #[arg(long = "scale", value_name = "MESSAGE=VALUE", required = true)]
        scales: Vec<String>,
        /// Scale by the inverses instead.
        #[arg(long)]
        inverse: bool,
        #[arg(short, long)]
        output: Option<String>,
    },
}

#[derive(Args, Debug)]
struct Tuning {
    #[arg(long, default_value_t = SearchOptions::default().budget)]
    budget: u64,
    #[arg(long)]
    parallel: bool,
    /// Fix source coefficients to the identity (may make the search inconclusive).
    #[arg(long)]
    normalize_sources: bool,
    /// Also try blocks of less than maximal rank.
    #[arg(long)]
    no_collapse: bool,
    /// Try every matrix rather than one per row space.
    #[arg(long)]
    no_gauge: bool,
}

impl Tuning {
    fn options(&self) -> SearchOptions {
        SearchOptions {
            budget: self.budget,
            normalize_sources: self.normalize_sources,
            collapse_chains: !self.no_collapse,
            canonical_gauge: !self.no_gauge,
            parallel: self.parallel,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FamilyName {
    #[value(name = "s_m")]
    SM,
    #[value(name = "s_m_star")]
    SMStar,
    #[value(name = "component")]
    Component,
    #[value(name = "bottleneck_mun")]
    BottleneckMun,
}

impl FamilyName {
    fn spec(self, m: Option<usize>) -> FamilySpec {
        let family = match self {
            FamilyName::SM => Family::SM,
            FamilyName::SMStar => Family::SMStar,
            FamilyName::Component => Family::Component,
            FamilyName::BottleneckMun => Family::BottleneckMun,
        };
        FamilySpec::new(family, m)
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Op {
    C1,
    C2,
    C3,
    Reverse,
    ToTypeIa,
}

struct Io<'a> {
    stdout: &'a mut dyn Write,
}

impl Io<'_> {
    fn read(&self, path: &str) -> Fallible<String> {
        if path == "-" {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            Ok(s)
        } else {
            std::fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}").into())
        }
    }

    fn write(&mut self, path: Option<&str>, text: &str) -> Fallible {
        match path {
            None | Some("-") => self.stdout.write_all(text.as_bytes())?,
            Some(p) => std::fs::write(p, text).map_err(|e| format!("cannot write {p}: {e}"))?,
        }
        Ok(())
    }

    fn network(&self, path: &str) -> Fallible<Network> {
        formats::network_from_json(&self.read(path)?).map_err(|e| format!("{path}: {e}").into())
    }

    fn code(&self, path: &str) -> Fallible<sumnet_core::codes::LinearCode> {
        formats::code_from_json(&self.read(path)?).map_err(|e| format!("{path}: {e}").into())
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// Parses `args` (program name first) and executes the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut io = Io { stdout };
    match execute(cli.command, &mut io) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

fn execute(command: Command, io: &mut Io) -> Fallible {
    match command {
        Command::Family { name, m, output } => {
            let net = name.spec(m).build()?;
            io.write(output.as_deref(), &formats::network_to_json(&net))
        }
        Command::Transform { op, net, output, trace } => {
            let net = io.network(&net)?;
            let (result, roles) = match op {
                Op::C1 => transforms::c1_traced(&net)?,
                Op::C2 => transforms::c2_traced(&net)?,
                Op::C3 => transforms::c3_traced(&net)?,
                Op::ToTypeIa => transforms::to_type_ia_traced(&net)?,
                Op::Reverse => (transforms::reverse(&net)?, TransformTrace { op: "reverse".into(), ..Default::default() }),
            };
            if let Some(path) = trace {
                io.write(Some(&path), &formats::trace_to_json(&roles))?;
            }
            io.write(output.as_deref(), &formats::network_to_json(&result))
        }
        Command::Search { net, field, k, n, nonlinear, tuning, witness, output } => {
            let net = io.network(&net)?;
            let opts = tuning.options();
            let report = match nonlinear {
                Some(q) => driver::search_nonlinear(&net, q, &opts)?,
                None => {
                    let field = FieldSpec::new(field.expect("required by clap"))?;
                    driver::search_linear(&net, field, k, n, &opts)?
                }
            };
            let mut written = None;
            if let (Some(path), Some(text)) = (witness.as_deref(), witness_to_json(&report.verdict)) {
                io.write(Some(path), &text)?;
                written = Some(path);
            }
            io.write(output.as_deref(), &report_to_json(&net, &report, written))
        }
        Command::Classify { family, m, k, primes, tuning, output } => {
            let spec = family.spec(m);
            let results = driver::classify(&spec, k, &primes, &tuning.options())?;
            #[derive(Serialize)]
            struct Entry {
                verdict: &'static str,
                enumerated: u64,
                elapsed_ms: f64,
            }
            #[derive(Serialize)]
            struct Classification {
                family: &'static str,
                m: Option<usize>,
                k: usize,
                results: BTreeMap<String, Entry>,
            }
            let results = results
                .iter()
                .map(|(p, r)| {
                    let e = Entry {
                        verdict: r.verdict.label(),
                        enumerated: r.enumerated,
                        elapsed_ms: r.elapsed.as_secs_f64() * 1e3,
                    };
                    (p.to_string(), e)
                })
                .collect();
            let c = Classification { family: spec.family.name(), m, k, results };
            io.write(output.as_deref(), &json(&c))
        }
        Command::Verify { net, code } => {
            let net = io.network(&net)?;
            let code = io.code(&code)?;
            code.check_binding(&net)?;
            let t = transfer_matrix(&net, &code)?;
            let verdict = if is_solution(&net, &code) { "SOLUTION" } else { "NOT A SOLUTION" };
            io.write(None, &format!("{verdict}\n{}", formats::transfer_to_text(&t)))
        }
        Command::VerifyNonlinear { net, code, budget } => {
            let net = io.network(&net)?;
            let code = formats::nonlinear_code_from_json(&io.read(&code)?)?;
            let ok = verify_nonlinear(&net, &code, budget)?;
            io.write(None, if ok { "SOLUTION\n" } else { "NOT A SOLUTION\n" })
        }
        Command::ReverseCode { net, code, output } => {
            let net = io.network(&net)?;
            let code = io.code(&code)?;
            let rev = canonical_reverse_code(&net, &code)?;
            io.write(output.as_deref(), &formats::code_to_json(&rev))
        }
        Command::Transfer { net, code, output } => {
            let net = io.network(&net)?;
            let code = io.code(&code)?;
            let t = transfer_matrix(&net, &code)?;
            io.write(output.as_deref(), &formats::transfer_to_json(&t))
        }
        Command::Mincut { net, from, to } => {
            let net = io.network(&net)?;
            let cut = match (from, to) {
                (Some(s), Some(t)) => min_cut(&net, &s, &t)?,
                _ => min_source_terminal_cut(&net).ok_or("the network has no source-terminal pair")?,
            };
            io.write(None, &format!("{cut}\n"))
        }
        Command::Connectivity { net, output } => {
            let net = io.network(&net)?;
            let c = connectivity(&net);
            #[derive(Serialize)]
            struct Reach<'a> {
                sources: &'a [String],
                terminals: &'a [String],
                reach: &'a [Vec<bool>],
                all_connected: bool,
            }
            let r = Reach { sources: &c.sources, terminals: &c.terminals, reach: &c.reach, all_connected: c.all_connected() };
            io.write(output.as_deref(), &json(&r))
        }
        Command::ExportDot { net, trace, output } => {
            let net = io.network(&net)?;
            let trace = match trace {
                Some(p) => Some(formats::trace_from_json(&io.read(&p)?)?),
                None => None,
            };
            io.write(output.as_deref(), &export_dot(&net, trace.as_ref()))
        }
        Command::KnownCode { family, m, field, output } => {
            let spec = family.spec(m);
            spec.build()?;
            let field = FieldSpec::new(field)?;
            let code = known_code(&spec, field)
                .ok_or_else(|| format!("no known code for {} over {field}", spec.family.name()))?;
            io.write(output.as_deref(), &formats::code_to_json(&code))
        }
        Command::ScaleSources { code, scales, inverse, output } => {
            let code = io.code(&code)?;
            let mut a = BTreeMap::new();
            for s in &scales {
                let (msg, value) = s.split_once('=').ok_or_else(|| format!("--scale {s}: expected MESSAGE=VALUE"))?;
                let value: i64 = value.parse().map_err(|_| format!("--scale {s}: VALUE must be an integer"))?;
                let field = code.field();
                a.insert(msg.to_string(), MatrixGF::scalar(field, code.k(), field.reduce(value)));
            }
            let scaled = if inverse {
                transforms::unscale_sources(&code, &a)?
            } else {
                transforms::scale_sources(&code, &a)?
            };
            io.write(output.as_deref(), &formats::code_to_json(&scaled))
        }
    }
}

