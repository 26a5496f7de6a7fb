use std::fmt::Write as _;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use multiscale_core::coeff::{Sign, SignParams};
use multiscale_core::compat::{verdict, Verdict, VerdictReport};
use multiscale_core::diffalg::{render, render_monomial};
use multiscale_core::graded::{dim, product_dim, GradedBasis};
use multiscale_core::oracle::selfcheck;
use multiscale_core::pipeline::{reduce, render_relation, ModelKind, ReducedSystem};

use multiscale_cli::report::Report;

const EXIT_OBSTRUCTED: u8 = 1;
const EXIT_ENGINE: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(
    name = "multiscale",
    version,
    about = "Exact multiple-scale reductions of lattice models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Reduce a model to the KdV hierarchy up to the given order.
    Reduce(RunArgs),
    /// Run the reduction to order 9 and the compatibility checks.
    Verdict(VerdictArgs),
    /// Dimension of the graded space P_n^(r).
    Dim(DimArgs),
    /// List the monomials of P_n^(r).
    Basis(BasisArgs),
    /// Render the flow K_j of a model's reduced hierarchy.
    Flows(FlowArgs),
    /// Run the exact self-check suite.
    Selfcheck(SelfcheckArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,
    #[arg(long = "c-sign", default_value = "+1", allow_hyphen_values = true, value_parser = parse_sign)]
    c_sign: Sign,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = parse_order)]
    order: u32,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct VerdictArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 9, value_parser = parse_verdict_order)]
    order: u32,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Debug)]
struct DimArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    r: u32,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct BasisArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    r: u32,
    /// Drop the linear monomials.
    #[arg(long)]
    products: bool,
}

#[derive(Args, Debug)]
struct FlowArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..=4))]
    j: u32,
    #[arg(long, default_value = "dnls", value_parser = parse_model)]
    model: ModelKind,
    #[arg(long = "c-sign", default_value = "+1", allow_hyphen_values = true, value_parser = parse_sign)]
    c_sign: Sign,
}

#[derive(Args, Debug)]
struct SelfcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

fn parse_sign(s: &str) -> Result<Sign, String> {
    s.parse()
}

fn parse_order(s: &str) -> Result<u32, String> {
    match s.parse::<u32>() {
        Ok(n @ (5 | 7 | 9)) => Ok(n),
        _ => Err(format!("order must be 5, 7 or 9, got {s:?}")),
    }
}

fn parse_verdict_order(s: &str) -> Result<u32, String> {
    match s.parse::<u32>() {
        Ok(n @ (7 | 9)) => Ok(n),
        _ => Err(format!("order must be 7 or 9, got {s:?}")),
    }
}

fn engine_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_ENGINE)
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

fn text_reduction(rs: &ReducedSystem) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "model: {}", rs.model);
    let _ = writeln!(s, "order: {}", rs.max_order);
    let _ = writeln!(s, "c_sign: {}", rs.signs.c_sign);
    let _ = writeln!(s, "zeta^2 = {}", rs.zeta_sq);
    let _ = writeln!(s, "c = {}", rs.c);
    for (i, rel) in rs.nu_relations.iter().enumerate() {
        let _ = writeln!(s, "{}", render_relation(i as u32 + 1, rel));
    }
    let _ = writeln!(s, "a = {}", rs.a());
    let _ = writeln!(s, "e = {}", rs.kdv.e);
    for m in rs.flows.indices() {
        if let (Some(b), Some(k)) = (rs.b(m), rs.flows.flow(m)) {
            let _ = writeln!(s, "b{m} = {b}");
            let _ = writeln!(s, "K{m} = {}", render(k));
        }
    }
    for st in &rs.stages {
        let _ = writeln!(
            s,
            "stage eps{}: alpha = {}, unknowns = [{}]",
            st.order,
            st.alpha,
            st.unknowns.join(", ")
        );
    }
    if let Some(p) = &rs.phi2_rhs {
        let _ = writeln!(s, "phi2 rhs before absorption = {}", render(p));
    }
    let named = [("f2", &rs.f2), ("f3", &rs.f3), ("g2", &rs.g2)];
    for (name, p) in named {
        if let Some(p) = p {
            let _ = writeln!(s, "{name}: {} monomials", p.len());
            for (m, c) in p.terms() {
                let _ = writeln!(s, "  ({c})*{}", render_monomial(m));
            }
        }
    }
    s
}

fn text_verdict(v: &VerdictReport) -> String {
    let mut s = String::new();
    for r in &v.reports {
        let _ = writeln!(
            s,
            "{}: unknowns {}, equations {}, rank {}, forcing coordinates {}, conditions {} ({} raw), free {}, satisfied {}",
            r.stage,
            r.n_unknowns,
            r.n_equations,
            r.rank,
            r.n_params,
            r.n_conditions,
            r.raw_conditions,
            r.n_free,
            r.satisfied
        );
        for (cond, val) in r.conditions.iter().zip(&r.constraints) {
            let _ = writeln!(s, "  {cond} = 0  ->  {val}");
        }
    }
    let _ = writeln!(s, "verdict: {}", v.verdict);
    s
}

fn run_reduce(a: RunArgs) -> ExitCode {
    let signs = SignParams::with_c(a.model.c_sign);
    match reduce(a.model.model, a.order, signs) {
        Ok(rs) => {
            match a.format {
                Format::Text => print!("{}", text_reduction(&rs)),
                Format::Json => println!("{}", to_json(&Report::from_reduction(&rs))),
            }
            ExitCode::SUCCESS
        }
        Err(e) => engine_error(e),
    }
}

fn run_verdict(a: VerdictArgs) -> ExitCode {
    let signs = SignParams::with_c(a.model.c_sign);
    match verdict(a.model.model, a.order, signs) {
        Ok(v) => {
            match a.format {
                Format::Text => print!("{}", text_verdict(&v)),
                Format::Json => println!("{}", to_json(&Report::from_verdict(&v))),
            }
            match v.verdict {
                Verdict::IntegrableConsistent => ExitCode::SUCCESS,
                Verdict::Obstructed => ExitCode::from(EXIT_OBSTRUCTED),
            }
        }
        Err(e) => engine_error(e),
    }
}

const PRODUCTS_P11: usize = 31;

fn run_dim(a: DimArgs) -> ExitCode {
    let raw = dim(a.n, a.r);
    let products = product_dim(a.n, a.r);
    let note = (a.n == 11 && a.r == 2).then(|| {
        format!(
            "the count of {PRODUCTS_P11} excludes the linear monomials (raw {raw}, products {products})"
        )
    });
    match a.format {
        Format::Text => {
            println!("{raw}");
            println!("products: {products}");
            if let Some(n) = note {
                println!("note: {n}");
            }
        }
        Format::Json => {
            let v = serde_json::json!({
                "n": a.n,
                "r": a.r,
                "dim": raw,
                "product_dim": products,
                "note": note,
            });
            println!("{}", to_json(&v));
        }
    }
    ExitCode::SUCCESS
}

fn run_basis(a: BasisArgs) -> ExitCode {
    let b = if a.products {
        GradedBasis::products(a.n, a.r)
    } else {
        GradedBasis::new(a.n, a.r)
    };
    for m in b.monomials() {
        println!("{}", render_monomial(m));
    }
    ExitCode::SUCCESS
}

fn run_flows(a: FlowArgs) -> ExitCode {
    let rs = match reduce(a.model, 2 * a.j + 1, SignParams::with_c(a.c_sign)) {
        Ok(rs) => rs,
        Err(e) => return engine_error(e),
    };
    match (rs.flows.flow(a.j), rs.b(a.j)) {
        (Some(k), Some(b)) => {
            println!("K{} = {}", a.j, render(k));
            println!("b{} = {b}", a.j);
            ExitCode::SUCCESS
        }
        _ => engine_error(format!("flow {} was not produced", a.j)),
    }
}

fn run_selfcheck(a: SelfcheckArgs) -> ExitCode {
    let results = selfcheck(a.seed, a.trials);
    for r in &results {
        println!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.name);
    }
    if results.iter().all(|r| r.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_OBSTRUCTED)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Reduce(a) => run_reduce(a),
        Command::Verdict(a) => run_verdict(a),
        Command::Dim(a) => run_dim(a),
        Command::Basis(a) => run_basis(a),
        Command::Flows(a) => run_flows(a),
        Command::Selfcheck(a) => run_selfcheck(a),
    }
}
