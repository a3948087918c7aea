use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use iwahori_core::base_change::{tensor_rep, ResScalarsContext};
use iwahori_core::iwahori::{self, FactorKind, IwahoriMatrix, OneParamFactor};
use iwahori_core::padic::parse_scalar;
use iwahori_core::principal_series::{decay_report, xz_decompose, Character, PrincipalSeries};
use iwahori_core::suite::{self, SuiteConfig};
use iwahori_core::tate::TateSeries;
use iwahori_core::verma;
use iwahori_core::weyl::{self, WeylElement};
use iwahori_core::{Error, PadicScalar, QpCtx, UnramifiedField};

#[derive(Parser, Debug)]
#[command(name = "iwahori", version, about = "Globally analytic principal series of the pro-p Iwahori subgroup of GL(n)")]
struct Cli {
    #[command(flatten)]
    job: JobArgs,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
struct JobArgs {
    #[arg(long, global = true, default_value_t = 7)]
    p: u64,
    #[arg(long, global = true, default_value_t = 2)]
    n: usize,
    /// Relative precision M in p-adic digits.
    #[arg(long, global = true, default_value_t = 12)]
    precision: u32,
    /// Total degree D kept in every series.
    #[arg(long, global = true, default_value_t = 6)]
    truncation: u32,
    /// Character parameters c_1,..,c_n (integers or fractions); zero by default.
    #[arg(long = "char", global = true, allow_hyphen_values = true)]
    chi: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    json_out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Analyticity of the character.
    CheckChar {
        #[arg(long, default_value_t = 1)]
        ramification: u32,
    },
    /// Act on a series by a group element.
    Act {
        #[arg(long)]
        series: PathBuf,
        /// Group element as a JSON matrix file.
        #[arg(long, conflicts_with = "factors")]
        matrix: Option<PathBuf>,
        /// Product of one-parameter factors, e.g. "L2,1=3;D1=8;U1,2=7".
        #[arg(long, allow_hyphen_values = true)]
        factors: Option<String>,
        /// Where to write the acted series.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Symbolic factorization (1 - y E_ij) A = X Z.
    Decompose {
        #[arg(long)]
        i: usize,
        #[arg(long)]
        j: usize,
        /// Use y = p eta.
        #[arg(long)]
        rescaled: bool,
    },
    /// Irreducibility criterion and its violations.
    Irreducible {
        /// Cross-check with the weight-space rank computation.
        #[arg(long)]
        rank_check: bool,
    },
    /// Weight multiplicity of the Verma module at xi.
    Multiplicity {
        #[arg(long, allow_hyphen_values = true)]
        xi: String,
    },
    /// Bruhat components and their twisted characters.
    Weyl {
        /// One-line permutation, e.g. "2,3,1"; all of S_n by default.
        #[arg(long)]
        w: Option<String>,
    },
    /// Base change along the unramified extension of degree N.
    Basechange {
        #[arg(long = "degree", default_value_t = 2)]
        degree: usize,
        /// Series over Q_p to send through b1 and b.
        #[arg(long)]
        series: Option<PathBuf>,
    },
    /// Run every verification criterion.
    Suite {
        /// Include per-criterion timings in the report.
        #[arg(long)]
        timings: bool,
    },
}

enum Failure {
    Violation(String),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::VariableMismatch(_) | Error::SizeLimit(_) => Failure::Input(e.to_string()),
            _ => Failure::Violation(e.to_string()),
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Input(e.to_string())
}

struct Job {
    ctx: QpCtx,
    n: usize,
    trunc: u32,
    chi: Character<PadicScalar>,
    seed: u64,
}

impl Job {
    fn new(a: &JobArgs) -> Result<Self, Failure> {
        let ctx = QpCtx::new(a.p, a.precision).map_err(input)?;
        if a.precision < 4 {
            return Err(input("precision must be at least 4"));
        }
        if a.truncation < 2 {
            return Err(input("truncation must be at least 2"));
        }
        if a.n < 1 {
            return Err(input("n must be positive"));
        }
        iwahori::check_prime_for_rank(ctx, a.n).map_err(|e| input(e))?;
        let chi = match &a.chi {
            None => Character::trivial(&ctx, a.n),
            Some(s) => {
                let c = parse_list(ctx, s)?;
                if c.len() != a.n {
                    return Err(input(format!("--char has {} entries, expected {}", c.len(), a.n)));
                }
                Character::new(c)
            }
        };
        Ok(Job { ctx, n: a.n, trunc: a.truncation, chi, seed: a.seed })
    }
}

fn parse_list(ctx: QpCtx, s: &str) -> Result<Vec<PadicScalar>, Failure> {
    s.split(',').map(|x| parse_scalar(ctx, x).map_err(input)).collect()
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, v: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).map_err(input)?;
    std::fs::write(path, text + "\n").map_err(|e| input(format!("{}: {e}", path.display())))
}

fn read_series(job: &Job, path: &Path) -> Result<TateSeries<PadicScalar>, Failure> {
    let v = read_json(path)?;
    Ok(TateSeries::from_json(&job.ctx, &v, |ctx, x| PadicScalar::from_json(*ctx, x))?)
}

fn parse_factors(ctx: QpCtx, n: usize, text: &str) -> Result<Vec<OneParamFactor>, Failure> {
    let mut out = Vec::new();
    for item in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let bad = || input(format!("cannot parse factor {item:?}"));
        let (head, param) = item.split_once('=').ok_or_else(bad)?;
        let param = parse_scalar(ctx, param)?;
        let (letter, idx) = head.trim().split_at(1);
        let idx: Vec<usize> = idx.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
        let in_range = |k: usize| k >= 1 && k <= n;
        let kind = match (letter, idx.as_slice()) {
            ("L", &[i, j]) if in_range(i) && in_range(j) && i > j => FactorKind::Lower(i, j),
            ("U", &[i, j]) if in_range(i) && in_range(j) && i < j => FactorKind::Upper(i, j),
            ("D", &[k]) if in_range(k) => FactorKind::Diag(k),
            _ => return Err(bad()),
        };
        out.push(OneParamFactor::new(kind, param)?);
    }
    Ok(out)
}

fn check_char(job: &Job, ramification: u32) -> Result<(Value, bool), Failure> {
    let chi = job.chi.clone().with_ramification(ramification);
    let verdict = chi.check_analytic();
    let report = json!({
        "character": chi.to_json(),
        "ramification": ramification,
        "bound": format!("{}/{} - 1", ramification, job.ctx.p() - 1),
        "verdict": verdict.to_json(),
    });
    Ok((report, verdict.analytic))
}

fn act(job: &Job, series: &Path, matrix: Option<&Path>, factors: Option<&str>, out: Option<&Path>) -> Result<(Value, bool), Failure> {
    let rep = PrincipalSeries::standard(job.n, job.chi.clone(), &job.ctx)?;
    let f = read_series(job, series)?.embed_by_name(rep.vars())?;
    let g = match (matrix, factors) {
        (Some(path), _) => {
            let m = IwahoriMatrix::from_json(job.ctx, &read_json(path)?)?;
            if m.n() != job.n {
                return Err(input("matrix size differs from --n"));
            }
            rep.act_group(&m, &f)?
        }
        (None, Some(text)) => {
            let mut g = f.clone();
            for factor in parse_factors(job.ctx, job.n, text)?.iter().rev() {
                g = rep.act_factor(factor, &g)?;
            }
            g
        }
        (None, None) => f.clone(),
    };
    if let Some(path) = out {
        write_json(path, &g.to_json())?;
    }
    let decay: Vec<Value> = rep
        .vars()
        .vars()
        .iter()
        .enumerate()
        .map(|(v, var)| json!({"variable": var.name, "decay": decay_report(&g, v).to_json()}))
        .collect();
    Ok((json!({"series": rep.vector_json(&g), "decay_report": decay}), true))
}

fn decompose(job: &Job, i: usize, j: usize, rescaled: bool) -> Result<(Value, bool), Failure> {
    if !(i >= 1 && i < j && j <= job.n) {
        return Err(input(format!("({i},{j}) is not an upper position for n = {}", job.n)));
    }
    let xz = xz_decompose::<PadicScalar>(&job.ctx, job.n, i, j, job.trunc, rescaled)?;
    let mat = |m: &Vec<Vec<TateSeries<PadicScalar>>>| -> Value {
        Value::Array(m.iter().map(|row| Value::Array(row.iter().map(|s| s.to_json()).collect())).collect())
    };
    Ok((json!({"position": [i, j], "rescaled": rescaled, "x": mat(&xz.x), "z": mat(&xz.z)}), true))
}

fn irreducible(job: &Job, rank_check: bool) -> Result<(Value, bool), Failure> {
    let report = verma::is_irreducible(&job.chi);
    let mut out = json!({"criterion": report.to_json()});
    let mut ok = true;
    if rank_check {
        let phi = verma::phi_weight_rank(&job.chi, &job.ctx, job.trunc)?;
        ok = phi.reducible != report.irreducible;
        out["rank_check"] = phi.to_json(&job.chi);
        out["agree"] = json!(ok);
    }
    Ok((out, ok))
}

fn multiplicity(job: &Job, xi: &str) -> Result<(Value, bool), Failure> {
    let xi = parse_list(job.ctx, xi)?;
    if xi.len() != job.n {
        return Err(input(format!("--xi has {} entries, expected {}", xi.len(), job.n)));
    }
    let m = verma::kostant_multiplicity(&xi, &job.chi);
    Ok((json!({"xi": xi.iter().map(|x| x.to_json()).collect::<Vec<_>>(), "multiplicity": m}), true))
}

fn weyl_cmd(job: &Job, w: Option<&str>) -> Result<(Value, bool), Failure> {
    let elems = match w {
        Some(s) => {
            let perm: Vec<usize> = s.split(',').map(|x| x.trim().parse().map_err(input)).collect::<Result<_, _>>()?;
            if perm.len() != job.n {
                return Err(input("permutation length differs from --n"));
            }
            vec![WeylElement::new(perm)?]
        }
        None => {
            if job.n > weyl::MAX_BRUHAT_RANK {
                return Err(input(format!("n = {} exceeds {}", job.n, weyl::MAX_BRUHAT_RANK)));
            }
            WeylElement::all(job.n)
        }
    };
    let mut comps = Vec::new();
    let mut ok = true;
    for w in &elems {
        let c = weyl::Component::new(w, &job.chi, &job.ctx)?;
        // (1 - E_ij) w = w (1 - E_kl)
        let wm = w.matrix::<PadicScalar>(&job.ctx);
        for i in 1..=job.n {
            for j in 1..=job.n {
                if i == j {
                    continue;
                }
                let (k, l) = weyl::conjugate_root(w, i, j);
                let mut a = wm.clone();
                for col in 0..job.n {
                    a[i - 1][col] = a[i - 1][col].sub(&wm[j - 1][col]);
                }
                let mut b = wm.clone();
                for row in 0..job.n {
                    b[row][l - 1] = b[row][l - 1].sub(&wm[row][k - 1]);
                }
                ok &= a == b;
            }
        }
        comps.push(c.to_json());
    }
    Ok((json!({"components": comps, "conjugation_identity": ok}), ok))
}

fn basechange(job: &Job, degree: usize, series: Option<&Path>) -> Result<(Value, bool), Failure> {
    let field = UnramifiedField::new(job.ctx, degree)?;
    let rep = tensor_rep(&job.chi, job.n, &field, job.trunc)?;
    let t = PadicScalar::one(job.ctx).add(&PadicScalar::from_i64(job.ctx, job.ctx.p() as i64));
    let mut ok = true;
    let mut eig = Vec::new();
    for k in 1..=job.n {
        let (slotwise, via_norm) = rep.constant_eigenvalue(k, &t)?;
        let agree = slotwise.sub(&via_norm).is_zero();
        ok &= agree;
        eig.push(json!({"k": k, "slotwise": slotwise.to_json(), "via_norm": via_norm.to_json(), "agree": agree}));
    }
    let mut out = json!({"context": field.to_json(), "tensor_rep": rep.to_json(), "t": t.to_json(), "constant_eigenvalues": eig});
    if let Some(path) = series {
        let f = read_series(job, path)?;
        let res = ResScalarsContext::new(&field, f.vars())?;
        let b1 = res.holomorphic_bc(&f)?;
        let b = res.full_bc(&f)?;
        let slots = res.identify_slots(&res.tensor_form(&f)?)?;
        let agree = b.agreement(&slots).is_some();
        ok &= agree;
        out["holomorphic"] = b1.to_json();
        out["full"] = b.to_json();
        out["slot_identification"] = json!(agree);
    }
    Ok((out, ok))
}

fn suite_cmd(job: &Job, a: &JobArgs, timings: bool) -> Result<(Value, bool), Failure> {
    let cfg = SuiteConfig { p: a.p, precision: a.precision, truncation: a.truncation, seed: job.seed };
    let outcomes = suite::run_suite(&cfg).map_err(input)?;
    let ok = outcomes.iter().all(|o| o.passed);
    for o in &outcomes {
        eprintln!("[{}] {:>2} {:<24} {}", if o.passed { "PASS" } else { "FAIL" }, o.id, o.name, o.detail);
    }
    let items: Vec<Value> = outcomes
        .iter()
        .map(|o| {
            let mut v = json!({"id": o.id, "name": o.name, "passed": o.passed, "cases": o.cases, "detail": o.detail});
            if timings {
                v["millis"] = json!(o.millis as u64);
            }
            v
        })
        .collect();
    Ok((json!({"config": cfg, "passed": ok, "criteria": items}), ok))
}

fn run(cli: &Cli) -> Result<(Value, bool), Failure> {
    let job = Job::new(&cli.job)?;
    match &cli.cmd {
        Cmd::CheckChar { ramification } => check_char(&job, *ramification),
        Cmd::Act { series, matrix, factors, out } => act(&job, series, matrix.as_deref(), factors.as_deref(), out.as_deref()),
        Cmd::Decompose { i, j, rescaled } => decompose(&job, *i, *j, *rescaled),
        Cmd::Irreducible { rank_check } => irreducible(&job, *rank_check),
        Cmd::Multiplicity { xi } => multiplicity(&job, xi),
        Cmd::Weyl { w } => weyl_cmd(&job, w.as_deref()),
        Cmd::Basechange { degree, series } => basechange(&job, *degree, series.as_deref()),
        Cmd::Suite { timings } => suite_cmd(&job, &cli.job, *timings),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    std::panic::set_hook(Box::new(|_| {}));
    let result = std::panic::catch_unwind(|| run(&cli)).unwrap_or_else(|_| Err(Failure::Input("internal error".into())));
    match result {
        Ok((report, ok)) => {
            if let Some(path) = &cli.job.json_out {
                if let Err(Failure::Input(m) | Failure::Violation(m)) = write_json(path, &report) {
                    eprintln!("error: {m}");
                    return ExitCode::from(2);
                }
            }
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&report).unwrap_or_default());
            ExitCode::from(if ok { 0 } else { 1 })
        }
        Err(Failure::Violation(m)) => {
            eprintln!("violation: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
