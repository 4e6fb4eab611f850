//! Batch driver: problem files in, CSV/JSON out.

use std::io::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use measure_spectra::bc::BoundaryConditions;
use measure_spectra::green::{
    build_schedule, contour_g0_squared, contour_trace_term, green0_diagonal,
};
use measure_spectra::measure::SignedMeasure;
use measure_spectra::problem::ProblemFile;
use measure_spectra::spectrum::{count_in_disc, perturbed_spectrum, unperturbed_spectrum};
use measure_spectra::trace::{regularized_trace, verify, TraceOptions, TraceReport};
use measure_spectra::{asymptotics, Error};

type C = Complex64;

#[derive(Parser)]
#[command(name = "measure-spectra", version, about = "Spectra and regularized traces of measure-perturbed boundary-value operators")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Copy, Clone, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct Common {
    /// Problem description (JSON)
    file: PathBuf,
    /// Write here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the boundary-condition invariants and trace coefficients
    Classify {
        #[command(flatten)]
        common: Common,
    },
    /// Eigenvalues of the (perturbed) problem
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Eigenvalue count
        #[arg(long)]
        terms: Option<usize>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Unperturbed Green-function diagonal on a uniform grid
    Green {
        #[command(flatten)]
        common: Common,
        /// Spectral parameter, real part
        #[arg(long, default_value_t = -1.0)]
        lambda_re: f64,
        /// Spectral parameter, imaginary part
        #[arg(long, default_value_t = 0.0)]
        lambda_im: f64,
        /// Grid size
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Resolvent contour integrals along the counting schedule
    Contour {
        #[command(flatten)]
        common: Common,
        /// Number of schedule radii
        #[arg(long)]
        schedule: Option<usize>,
        /// Diagonal point for the squared-resolvent integral
        #[arg(long, default_value_t = 0.37)]
        point: f64,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Closed-form eigenvalue expansions against computed roots
    Asymptotics {
        #[command(flatten)]
        common: Common,
        /// Largest display index
        #[arg(long)]
        terms: Option<usize>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Full regularized-trace report (JSON)
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        terms: Option<usize>,
        /// Partial sums averaged
        #[arg(long)]
        cesaro: Option<usize>,
        /// Fail with InsufficientTerms if the summation diagnostic exceeds this
        #[arg(long)]
        tolerance: Option<f64>,
        /// Schedule radii reported in the metadata
        #[arg(long)]
        schedule: Option<usize>,
    },
    /// Trace report plus a pass/fail verdict; exits 1 on fail
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        terms: Option<usize>,
        #[arg(long)]
        cesaro: Option<usize>,
        /// Residual and diagnostic tolerance (default 0.02)
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        schedule: Option<usize>,
    },
}

fn main() {
    if let Ok(t) = std::env::var("MEASURE_SPECTRA_THREADS") {
        if let Ok(n) = t.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    std::process::exit(run(Cli::parse()));
}

/// 17-significant-digit float, valid as a JSON number.
fn fnum(x: f64) -> String {
    format!("{x:.16e}")
}

fn cjson(z: C) -> String {
    format!(r#"{{"re":{},"im":{}}}"#, fnum(z.re), fnum(z.im))
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidProblem(_)
        | Error::DegenerateRows(_)
        | Error::IrregularBc(_)
        | Error::UnsupportedForm(_)
        | Error::EndpointAtom(_) => 2,
        _ => 3,
    }
}

struct Loaded {
    bc: BoundaryConditions,
    q: SignedMeasure,
    opts: TraceOptions,
    input_hash: String,
}

fn load(path: &PathBuf) -> Result<Loaded, i32> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return Err(2);
        }
    };
    let parsed = match ProblemFile::parse(&text) {
        Ok(p) => p,
        Err(e) => {
            // serde_json's Display already carries line and column.
            eprintln!("error: {e}");
            return Err(2);
        }
    };
    let bc = parsed.boundary_conditions().map_err(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })?;
    let q = parsed.signed_measure().map_err(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })?;
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    Ok(Loaded {
        bc,
        q,
        opts: parsed.trace_options(),
        input_hash: format!("{:x}", hasher.finalize()),
    })
}

fn emit(output: &Option<PathBuf>, body: &str) -> i32 {
    match output {
        Some(p) => match std::fs::write(p, body) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: cannot write {}: {e}", p.display());
                2
            }
        },
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(body.as_bytes()) {
                Ok(()) => 0,
                Err(_) => 3,
            }
        }
    }
}

/// Column payload for the two tabular formats.
enum Cell {
    Num(f64),
    Int(i64),
    Str(&'static str),
    Bool(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fnum(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Str(s) => (*s).to_string(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Str(s) => format!("\"{s}\""),
            other => other.csv(),
        }
    }
}

fn table(headers: &[&str], rows: &[Vec<Cell>], format: Format) -> String {
    let mut s = String::new();
    match format {
        Format::Csv => {
            s.push_str(&headers.join(","));
            s.push('\n');
            for row in rows {
                let line: Vec<String> = row.iter().map(Cell::csv).collect();
                s.push_str(&line.join(","));
                s.push('\n');
            }
        }
        Format::Json => {
            s.push_str("[\n");
            for (i, row) in rows.iter().enumerate() {
                let fields: Vec<String> = headers
                    .iter()
                    .zip(row)
                    .map(|(h, c)| format!("\"{h}\":{}", c.json()))
                    .collect();
                s.push_str(&format!("  {{{}}}", fields.join(",")));
                s.push_str(if i + 1 < rows.len() { ",\n" } else { "\n" });
            }
            s.push_str("]\n");
        }
    }
    s
}

fn run(cli: Cli) -> i32 {
    match cli.cmd {
        Cmd::Classify { common } => {
            let l = match load(&common.file) {
                Ok(l) => l,
                Err(c) => return c,
            };
            let inv = match l.bc.classify() {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: {e}");
                    return exit_code(&e);
                }
            };
            let coef = match l.bc.trace_coefficients() {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: {e}");
                    return exit_code(&e);
                }
            };
            let alpha = match inv.alpha {
                Some(a) => format!("{} {}", fnum(a.re), fnum(a.im)),
                None => "-".into(),
            };
            let body = format!(
                "class: {:?}\ntag: {:?}\ndegrees: d0={} d1={}\nodd_base: {}\n\
                 A: {} {}\nB: {} {}\nC: {} {}\nalpha: {}\n\
                 trace_coefficient_a: {} {}\ntrace_coefficient_b: {} {}\n",
                inv.class,
                inv.tag,
                inv.d.0,
                inv.d.1,
                inv.odd_base,
                fnum(inv.inv_a.re),
                fnum(inv.inv_a.im),
                fnum(inv.inv_b.re),
                fnum(inv.inv_b.im),
                fnum(inv.inv_c.re),
                fnum(inv.inv_c.im),
                alpha,
                fnum(coef.at_a.re),
                fnum(coef.at_a.im),
                fnum(coef.at_b.re),
                fnum(coef.at_b.im),
            );
            emit(&common.output, &body)
        }
        Cmd::Spectrum {
            common,
            terms,
            format,
        } => {
            let l = match load(&common.file) {
                Ok(l) => l,
                Err(c) => return c,
            };
            let n = terms.unwrap_or(l.opts.eigenvalues);
            let spec = match perturbed_spectrum(&l.bc, &l.q, n) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return exit_code(&e);
                }
            };
            let rows: Vec<Vec<Cell>> = spec
                .eigenvalues
                .iter()
                .map(|e| {
                    vec![
                        Cell::Int(e.index as i64),
                        Cell::Int(e.cluster as i64),
                        Cell::Int(e.multiplicity as i64),
                        Cell::Bool(e.jordan),
                        Cell::Num(e.lambda.re),
                        Cell::Num(e.lambda.im),
                        Cell::Num(e.z.re),
                        Cell::Num(e.z.im),
                    ]
                })
                .collect();
            let body = table(
                &[
                    "index",
                    "cluster",
                    "multiplicity",
                    "jordan",
                    "lambda_re",
                    "lambda_im",
                    "z_re",
                    "z_im",
                ],
                &rows,
                format,
            );
            emit(&common.output, &body)
        }
        Cmd::Green {
            common,
            lambda_re,
            lambda_im,
            points,
            format,
        } => {
            let l = match load(&common.file) {
                Ok(l) => l,
                Err(c) => return c,
            };
            let lambda = C::new(lambda_re, lambda_im);
            let (a, b) = l.bc.interval();
            let n = points.max(2);
            let mut rows = Vec::with_capacity(n);
            for k in 0..n {
                let x = a + (b - a) * k as f64 / (n - 1) as f64;
                match green0_diagonal(&l.bc, x, lambda) {
                    Ok(g) => rows.push(vec![Cell::Num(x), Cell::Num(g.re), Cell::Num(g.im)]),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return exit_code(&e);
                    }
                }
            }
            let body = table(&["x", "g_re", "g_im"], &rows, format);
            emit(&common.output, &body)
        }
        Cmd::Contour {
            common,
            schedule,
            point,
            format,
        } => {
            let l = match load(&common.file) {
                Ok(l) => l,
                Err(c) => return c,
            };
            let len = schedule.or(Some(l.opts.schedule_len)).unwrap().max(1);
            let sched = match build_schedule(&l.bc, len) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return exit_code(&e);
                }
            };
            let target = C::new(0.0, -std::f64::consts::PI / 2.0);
            let mut rows = Vec::new();
            for (i, &r) in sched.radii.iter().enumerate() {
                let enclosed = match count_in_disc(&l.bc, &l.q, r) {
                    Ok(c) => c,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return exit_code(&e);
                    }
                };
                let g2 = match contour_g0_squared(&l.bc, point, r) {
                    Ok(v) => v,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return exit_code(&e);
                    }
                };
                let tr = match contour_trace_term(&l.bc, &l.q, r) {
                    Ok(v) => v,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return exit_code(&e);
                    }
                };
                rows.push(vec![
                    Cell::Int((i + 1) as i64),
                    Cell::Num(r),
                    Cell::Num(sched.margins[i]),
                    Cell::Int(enclosed as i64),
                    Cell::Num(g2.re),
                    Cell::Num(g2.im),
                    Cell::Num((g2 - target).norm()),
                    Cell::Num(tr.re),
                    Cell::Num(tr.im),
                ]);
            }
            let body = table(
                &[
                    "l",
                    "radius",
                    "margin",
                    "enclosed",
                    "g0sq_re",
                    "g0sq_im",
                    "g0sq_defect",
                    "trace_term_re",
                    "trace_term_im",
                ],
                &rows,
                format,
            );
            emit(&common.output, &body)
        }
        Cmd::Asymptotics {
            common,
            terms,
            format,
        } => {
            let l = match load(&common.file) {
                Ok(l) => l,
                Err(c) => return c,
            };
            let n_max = terms.unwrap_or(40).max(1);
            let spec = match unperturbed_spectrum(&l.bc, 2 * n_max + 6) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return exit_code(&e);
                }
            };
            let nearest = |v: C| -> C {
                spec.eigenvalues
                    .iter()
                    .map(|e| e.z)
                    .min_by(|p, q| {
                        (p - v).norm().partial_cmp(&(q - v).norm()).unwrap()
                    })
                    .unwrap()
            };
            let mut rows = Vec::new();
            for n in 1..=n_max {
                let e = match asymptotics::rho_expansion(&l.bc, n) {
                    Ok(v) => v,
                    Err(err) => {
                        eprintln!("error: {err}");
                        return exit_code(&err);
                    }
                };
                let p = e.order.unwrap_or(0);
                let members: Vec<(&'static str, C)> = match e.values {
                    asymptotics::CaseValues::One(v) => vec![("one", v)],
                    asymptotics::CaseValues::Pair { plus, minus } => {
                        vec![("plus", plus), ("minus", minus)]
                    }
                };
                for (name, v) in members {
                    let z = nearest(v);
                    let err = (z - v).norm();
                    rows.push(vec![
                        Cell::Int(n as i64),
                        Cell::Str(name),
                        Cell::Int(p as i64),
                        Cell::Num(v.re),
                        Cell::Num(v.im),
                        Cell::Num(z.re),
                        Cell::Num(z.im),
                        Cell::Num(err),
                        Cell::Num(err * (n as f64).powi(p)),
                    ]);
                }
            }
            let body = table(
                &[
                    "n",
                    "member",
                    "order",
                    "expansion_re",
                    "expansion_im",
                    "numeric_re",
                    "numeric_im",
                    "error",
                    "scaled_error",
                ],
                &rows,
                format,
            );
            emit(&common.output, &body)
        }
        Cmd::Trace {
            common,
            terms,
            cesaro,
            tolerance,
            schedule,
        } => {
            let l = match load(&common.file) {
                Ok(l) => l,
                Err(c) => return c,
            };
            let opts = merge_opts(&l.opts, terms, cesaro, tolerance, schedule);
            match regularized_trace(&l.bc, &l.q, &opts) {
                Ok(report) => emit(
                    &common.output,
                    &report_json(&report, &l.input_hash, None),
                ),
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code(&e)
                }
            }
        }
        Cmd::Verify {
            common,
            terms,
            cesaro,
            tolerance,
            schedule,
        } => {
            let l = match load(&common.file) {
                Ok(l) => l,
                Err(c) => return c,
            };
            let opts = merge_opts(&l.opts, terms, cesaro, tolerance, schedule);
            let tol = opts.tolerance.unwrap_or(0.02);
            match verify(&l.bc, &l.q, tol, &opts) {
                Ok((pass, report)) => {
                    let code = emit(
                        &common.output,
                        &report_json(&report, &l.input_hash, Some((pass, tol))),
                    );
                    if code != 0 {
                        code
                    } else if pass {
                        0
                    } else {
                        1
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code(&e)
                }
            }
        }
    }
}

fn merge_opts(
    base: &TraceOptions,
    terms: Option<usize>,
    cesaro: Option<usize>,
    tolerance: Option<f64>,
    schedule: Option<usize>,
) -> TraceOptions {
    let mut o = base.clone();
    if let Some(t) = terms {
        o.eigenvalues = t;
    }
    if let Some(c) = cesaro {
        o.cesaro_terms = c;
    }
    if let Some(t) = tolerance {
        o.tolerance = Some(t);
    }
    if let Some(s) = schedule {
        o.schedule_len = s;
    }
    o
}

fn cvec_json(v: &[C]) -> String {
    let parts: Vec<String> = v.iter().map(|z| cjson(*z)).collect();
    format!("[{}]", parts.join(","))
}

fn report_json(r: &TraceReport, input_hash: &str, verdict: Option<(bool, f64)>) -> String {
    let mut s = String::new();
    s.push_str("{\n");
    s.push_str(&format!(
        "  \"version\": \"{}\",\n",
        env!("CARGO_PKG_VERSION")
    ));
    s.push_str(&format!("  \"input_sha256\": \"{input_hash}\",\n"));
    if let Some((pass, tol)) = verdict {
        s.push_str(&format!("  \"pass\": {pass},\n"));
        s.push_str(&format!("  \"tolerance\": {},\n", fnum(tol)));
    }
    s.push_str(&format!(
        "  \"numeric\": {{\"estimate\":{},\"diagnostic\":{},\"second_mean\":{},\"terms_used\":{},\"partial_sums\":{},\"means\":{}}},\n",
        cjson(r.numeric.estimate),
        fnum(r.numeric.diagnostic),
        cjson(r.numeric.second_mean),
        r.numeric.terms_used,
        cvec_json(&r.numeric.partial_sums),
        cvec_json(&r.numeric.means),
    ));
    s.push_str(&format!(
        "  \"numeric_value\": {},\n",
        cjson(r.numeric_value)
    ));
    s.push_str(&format!(
        "  \"pairing_correction\": {},\n",
        cjson(r.pairing_correction)
    ));
    s.push_str(&format!("  \"formula\": {},\n", cjson(r.formula)));
    s.push_str(&format!("  \"linear_part\": {},\n", cjson(r.linear_part)));
    s.push_str(&format!(
        "  \"nonlinear_part\": {},\n",
        cjson(r.nonlinear_part)
    ));
    s.push_str(&format!(
        "  \"raw_endpoints\": [{},{}],\n",
        cjson(r.raw_endpoints.0),
        cjson(r.raw_endpoints.1)
    ));
    s.push_str(&format!(
        "  \"adjusted_endpoints\": [{},{}],\n",
        cjson(r.adjusted_endpoints.0),
        cjson(r.adjusted_endpoints.1)
    ));
    s.push_str(&format!("  \"mean_term\": {},\n", cjson(r.mean_term)));
    s.push_str(&format!("  \"residual\": {},\n", fnum(r.residual)));
    s.push_str(&format!(
        "  \"eigenvalues_used\": {},\n",
        r.eigenvalues_used
    ));
    match &r.schedule {
        Some(sc) => {
            let radii: Vec<String> = sc.radii.iter().map(|&x| fnum(x)).collect();
            let margins: Vec<String> = sc.margins.iter().map(|&x| fnum(x)).collect();
            let counts: Vec<String> = sc.counts.iter().map(|c| c.to_string()).collect();
            s.push_str(&format!(
                "  \"schedule\": {{\"radii\":[{}],\"margins\":[{}],\"counts\":[{}],\"strongly_regular\":{}}}\n",
                radii.join(","),
                margins.join(","),
                counts.join(","),
                sc.strongly_regular
            ));
        }
        None => s.push_str("  \"schedule\": null\n"),
    }
    s.push_str("}\n");
    s
}
