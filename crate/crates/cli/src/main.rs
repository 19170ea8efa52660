//! `howson` — analyze endomorphisms, compute normal forms in descending
//! HNN-extensions, and generate or verify non-Howson certificates.
//!
//! Exit codes partition outcomes: 0 success, 1 verification failure,
//! 2 input error, 3 not applicable (hypotheses unmet), 4 construction
//! failure, 5 depth-guard breach.
//!
//! Any positional spec/expression argument may be written as `@path` to
//! read its content from a file.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use howson::basegroup::{parse_instance, FactorGroup, Instance};
use howson::constructions::{certify_theorem2, certify_theorem3, rank_growth, verify_certificate};
use howson::endo::FreeEndo;
use howson::hnn::{Hnn, HnnError, DEFAULT_DEPTH_LIMIT};

#[derive(Parser)]
#[command(name = "howson", version, about = "Witness machinery for non-Howson HNN-extensions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Report injectivity, surjectivity and image data of an instance spec.
    Analyze {
        /// Instance spec, e.g. `rank 2; a -> a^2; b -> b^2` or `dim 1; [[2]]`.
        spec: String,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Generate a certificate for the free-base construction.
    Certify {
        /// Free-base spec: `rank N; a -> …; b -> …`.
        spec: String,
        /// Deepest witnessed level subgroup.
        #[arg(long, default_value_t = 6)]
        rmax: u32,
        /// Probe seed, recorded in the certificate.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Use one shortest complement word instead of the full basis.
        #[arg(long)]
        single: bool,
        /// Endomorphism-application budget per engine operation.
        #[arg(long, default_value_t = DEFAULT_DEPTH_LIMIT)]
        depth_limit: u64,
        /// Free-product probe sample count.
        #[arg(long, default_value_t = 10_000)]
        fp_samples: u64,
        /// Base-intersection probe sample count (per sign mode).
        #[arg(long, default_value_t = 1_000)]
        l2_samples: u64,
        /// Write the certificate JSON here (atomically) instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Generate a certificate for the direct-product construction.
    Certify3 {
        /// Product spec: `product; A: …; B: …` with free or free-abelian factors.
        spec: String,
        /// Element of the second factor outside its endomorphism image;
        /// defaults to the first such generator.
        #[arg(long)]
        witness: Option<String>,
        /// Verify non-cancellation for powers 1..=depth.
        #[arg(long, default_value_t = 12)]
        depth: u64,
        /// Recorded in the certificate.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Endomorphism-application budget per engine operation.
        #[arg(long, default_value_t = DEFAULT_DEPTH_LIMIT)]
        depth_limit: u64,
        /// Write the certificate JSON here (atomically) instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Re-derive every claim of a certificate file.
    Verify {
        /// Path to a certificate JSON file.
        path: PathBuf,
    },
    /// Canonical normal form `t^m g t^-n` of an expression.
    Nf {
        /// Instance spec (free, free-abelian, or product).
        spec: String,
        /// Expression over the base generators and `t`, e.g. `(t b)^3`.
        expr: String,
        #[arg(long, default_value_t = DEFAULT_DEPTH_LIMIT)]
        depth_limit: u64,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Rank table of the accumulated level subgroups.
    RankGrowth {
        /// Free-base spec: `rank N; a -> …; b -> …`.
        spec: String,
        #[arg(long, default_value_t = 6)]
        rmax: u32,
        /// Use one shortest complement word instead of the full basis.
        #[arg(long)]
        single: bool,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()))
}

fn run(cli: Cli) -> u8 {
    match cli.command {
        Command::Analyze { spec, format } => with_arg(&spec, |spec| cmd_analyze(spec, format)),
        Command::Certify {
            spec,
            rmax,
            seed,
            single,
            depth_limit,
            fp_samples,
            l2_samples,
            out,
            format,
        } => with_arg(&spec, |spec| {
            let opts = howson::constructions::CertifyOptions {
                r_max: rmax,
                seed,
                single_complement: single,
                fp_samples,
                l2_samples,
                depth_limit,
            };
            cmd_certify(spec, &opts, out.as_deref(), format)
        }),
        Command::Certify3 { spec, witness, depth, seed, depth_limit, out, format } => {
            with_arg(&spec, |spec| {
                let witness = match witness.as_deref().map(read_arg).transpose() {
                    Ok(w) => w,
                    Err(message) => return input_error(&message),
                };
                let opts = howson::constructions::Certify3Options { depth, seed, depth_limit };
                cmd_certify3(spec, witness.as_deref(), &opts, out.as_deref(), format)
            })
        }
        Command::Verify { path } => cmd_verify(&path),
        Command::Nf { spec, expr, depth_limit, format } => with_arg(&spec, |spec| {
            let expr = match read_arg(&expr) {
                Ok(e) => e,
                Err(message) => return input_error(&message),
            };
            cmd_nf(spec, &expr, depth_limit, format)
        }),
        Command::RankGrowth { spec, rmax, single, format } => {
            with_arg(&spec, |spec| cmd_rank_growth(spec, rmax, single, format))
        }
    }
}

/// Resolves the `@path` convention and runs the command on the result.
fn with_arg(raw: &str, f: impl FnOnce(&str) -> u8) -> u8 {
    match read_arg(raw) {
        Ok(value) => f(&value),
        Err(message) => input_error(&message),
    }
}

fn read_arg(raw: &str) -> Result<String, String> {
    match raw.strip_prefix('@') {
        Some(path) => fs::read_to_string(path)
            .map(|s| s.trim().to_string())
            .map_err(|e| format!("cannot read `{path}`: {e}")),
        None => Ok(raw.to_string()),
    }
}

fn input_error(message: &dyn std::fmt::Display) -> u8 {
    eprintln!("input error: {message}");
    2
}

fn construction_error(err: &howson::constructions::ConstructionError) -> u8 {
    eprintln!("{err}");
    exit_code_for(err)
}

fn exit_code_for(err: &howson::constructions::ConstructionError) -> u8 {
    use howson::constructions::ConstructionError as E;
    match err {
        E::NotApplicable(_) | E::CyclicBase => 3,
        E::InvalidWitness(_) => 2,
        E::RankDeficit { .. } | E::DegeneratePart { .. } | E::ProbeFailure { .. } | E::SelfCheck(_) => 4,
        E::Hnn(HnnError::DepthGuard { .. }) => 5,
        E::Hnn(_) | E::Expr(_) | E::Word(_) | E::Base(_) => 2,
        E::Graph(_) | E::Endo(_) => 4,
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn cmd_analyze(spec: &str, format: Format) -> u8 {
    let instance = match parse_instance(spec) {
        Ok(i) => i,
        Err(e) => return input_error(&e),
    };
    match format {
        Format::Table => {
            println!("kind: {}", instance.kind_name());
            println!("injective: {}", yes_no(instance.endo_is_injective()));
            println!("surjective: {}", yes_no(instance.endo_is_surjective()));
            println!("identity: {}", yes_no(instance.endo_is_identity()));
            if let Instance::Free(base) = &instance {
                println!("image rank: {}", base.endo().image_graph().rank());
                println!("image index: {}", base.endo().image_graph().index());
            }
            if let Instance::Abelian(base) = &instance {
                println!("determinant: {}", base.endo().det());
            }
        }
        Format::Json => {
            let mut report = serde_json::json!({
                "kind": instance.kind_name(),
                "injective": instance.endo_is_injective(),
                "surjective": instance.endo_is_surjective(),
                "identity": instance.endo_is_identity(),
            });
            if let Instance::Free(base) = &instance {
                report["image_rank"] = base.endo().image_graph().rank().into();
                report["image_index"] = base.endo().image_graph().index().to_string().into();
            }
            if let Instance::Abelian(base) = &instance {
                report["determinant"] = base.endo().det().to_string().into();
            }
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
    }
    0
}

fn require_free_base(spec: &str) -> Result<FreeEndo, u8> {
    match parse_instance(spec) {
        Ok(Instance::Free(base)) => Ok(base.endo().clone()),
        Ok(_) => {
            eprintln!("not applicable: this command needs a free base (`rank N; a -> …`)");
            Err(3)
        }
        Err(e) => Err(input_error(&e)),
    }
}

fn cmd_certify(
    spec: &str,
    opts: &howson::constructions::CertifyOptions,
    out: Option<&Path>,
    format: Format,
) -> u8 {
    let endo = match require_free_base(spec) {
        Ok(e) => e,
        Err(code) => return code,
    };
    match certify_theorem2(&endo, opts) {
        Ok(cert) => emit_certificate(&cert, out, format),
        Err(e) => construction_error(&e),
    }
}

fn cmd_certify3(
    spec: &str,
    witness: Option<&str>,
    opts: &howson::constructions::Certify3Options,
    out: Option<&Path>,
    format: Format,
) -> u8 {
    let instance = match parse_instance(spec) {
        Ok(i) => i,
        Err(e) => return input_error(&e),
    };
    match certify_theorem3(&instance, witness, opts) {
        Ok(cert) => emit_certificate(&cert, out, format),
        Err(e) => construction_error(&e),
    }
}

fn emit_certificate(
    cert: &howson::constructions::Certificate,
    out: Option<&Path>,
    format: Format,
) -> u8 {
    let json = cert.to_json();
    if let Some(path) = out {
        if let Err(e) = write_atomic(path, &json) {
            eprintln!("cannot write `{}`: {e}", path.display());
            return 2;
        }
    }
    match format {
        Format::Json => {
            if out.is_none() {
                print!("{json}");
            }
        }
        Format::Table => print_certificate_table(cert),
    }
    0
}

fn print_certificate_table(cert: &howson::constructions::Certificate) {
    use howson::constructions::CertificateKind;
    let kind = match cert.kind {
        CertificateKind::Theorem2 => "theorem2",
        CertificateKind::Theorem3 => "theorem3",
    };
    println!("kind: {kind}");
    println!("instance: {}", cert.endo);
    if let Some(k) = &cert.complement {
        println!("complement: {}", k.join(", "));
    }
    if let Some(b) = &cert.witness {
        println!("witness: {b}");
    }
    println!("depth: {}", cert.depth);
    println!("seed: {}", cert.seed);
    if !cert.levels.is_empty() {
        println!("level  rank");
        for level in &cert.levels {
            println!("{:>5}  {:>4}", level.r, level.rank);
        }
    }
    println!("obligations: {}", cert.obligations.len());
}

/// Writes via a sibling temp file and rename, so readers never observe a
/// partially written certificate.
fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp = match path.file_name() {
        Some(name) => {
            let mut tmp_name = name.to_os_string();
            tmp_name.push(".tmp");
            path.with_file_name(tmp_name)
        }
        None => path.with_extension("tmp"),
    };
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

fn cmd_verify(path: &Path) -> u8 {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read `{}`: {e}", path.display());
            return 2;
        }
    };
    let cert = match howson::constructions::Certificate::from_json(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return 2;
        }
    };
    match verify_certificate(&cert) {
        Ok(report) => {
            for check in &report.checks {
                if check.passed {
                    println!("ok   {}", check.name);
                } else {
                    println!("FAIL {}: {}", check.name, check.detail);
                }
            }
            match report.first_failure() {
                None => {
                    println!("certificate verified: {} checks passed", report.checks.len());
                    0
                }
                Some(first) => {
                    eprintln!("verification failed at `{}`: {}", first.name, first.detail);
                    1
                }
            }
        }
        Err(e) => {
            eprintln!("{e}");
            2
        }
    }
}

fn cmd_nf(spec: &str, expr: &str, depth_limit: u64, format: Format) -> u8 {
    match parse_instance(spec) {
        Ok(Instance::Free(base)) => nf_in(Hnn::with_depth_limit(base, depth_limit), expr, format),
        Ok(Instance::Abelian(base)) => {
            nf_in(Hnn::with_depth_limit(base, depth_limit), expr, format)
        }
        Ok(Instance::AbelianPair(base)) => {
            nf_in(Hnn::with_depth_limit(base, depth_limit), expr, format)
        }
        Ok(Instance::FreePair(base)) => {
            nf_in(Hnn::with_depth_limit(base, depth_limit), expr, format)
        }
        Err(e) => input_error(&e),
    }
}

fn nf_in<B: FactorGroup>(engine: Hnn<B>, expr: &str, format: Format) -> u8 {
    match engine.eval_text(expr) {
        Ok(x) => {
            match format {
                Format::Table => {
                    println!("normal form: {}", engine.display_elem(&x));
                    println!("m: {}", x.m());
                    println!("g: {}", engine.base().display_elem(x.g()));
                    println!("n: {}", x.n());
                    println!("t exponent: {}", x.t_exponent());
                    println!("in base: {}", yes_no(x.in_base()));
                }
                Format::Json => {
                    let report = serde_json::json!({
                        "display": engine.display_elem(&x),
                        "m": x.m(),
                        "g": engine.base().display_elem(x.g()),
                        "n": x.n(),
                        "t_exponent": x.t_exponent(),
                        "in_base": x.in_base(),
                    });
                    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
                }
            }
            0
        }
        Err(HnnError::DepthGuard { limit }) => {
            eprintln!("depth guard: endomorphism budget of {limit} applications exceeded");
            5
        }
        Err(e) => {
            eprintln!("{e}");
            2
        }
    }
}

fn cmd_rank_growth(spec: &str, rmax: u32, single: bool, format: Format) -> u8 {
    let endo = match require_free_base(spec) {
        Ok(e) => e,
        Err(code) => return code,
    };
    if endo.rank() < 2 {
        eprintln!("{}", howson::constructions::ConstructionError::CyclicBase);
        return 3;
    }
    if !endo.is_injective() {
        eprintln!("not applicable: the endomorphism is not injective");
        return 3;
    }
    if endo.is_surjective() {
        eprintln!("not applicable: the endomorphism is surjective");
        return 3;
    }
    let full = match endo.image_graph().hall_complement() {
        Ok(k) => k,
        Err(e) => {
            eprintln!("{e}");
            return 4;
        }
    };
    let k = if single {
        howson::stallings::Basis::new(vec![full
            .select_shortest()
            .expect("an infinite-index image has a nonempty complement")])
    } else {
        full
    };
    let ranks = match rank_growth(&endo, &k, rmax) {
        Ok(r) => r,
        Err(e) => return construction_error(&e),
    };
    let ctx = howson::expr::NameCtx::new(endo.rank(), 0);
    let complement: Vec<String> =
        k.words().iter().map(|w| howson::expr::render_word(w, &ctx)).collect();
    match format {
        Format::Table => {
            println!("complement: {}", complement.join(", "));
            println!("    r  rank");
            for (r, rank) in ranks.iter().enumerate() {
                println!("{r:>5}  {rank:>4}");
            }
        }
        Format::Json => {
            let report = serde_json::json!({ "complement": complement, "ranks": ranks });
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
    }
    0
}
