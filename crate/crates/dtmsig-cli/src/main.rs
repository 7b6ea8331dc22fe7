mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dtmsig::isotest::{estimate_level_power, run_test, TestParams};
use dtmsig::synth::{sample, GeneratorKind, GeneratorSpec};
use dtmsig::{
    dtm_min, epsilon_m, load_distance_matrix, load_point_cloud, load_weight_vector,
    signature_full, standardness_constant, uniform_volume_lower_bound, FiniteMeasureSpace,
    UniformShape,
};
use manifest::RunManifest;

/// Exit status for validation and I/O failures.
const EXIT_VALIDATION: u8 = 2;
/// Exit status for a degenerate bootstrap under --strict.
const EXIT_DEGENERATE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "dtmsig",
    about = "Compare metric-measure spaces through DTM-signatures",
    version
)]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct InputOpts {
    /// Interpret inputs as N x N distance matrices instead of point clouds.
    #[arg(long)]
    matrix: bool,

    /// Validate the triangle inequality on loaded distance matrices (O(N^3)).
    #[arg(long)]
    strict_metric: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a seeded sample from a named generator and write it as CSV.
    Gen {
        /// Generator, e.g. "spiral:v=10,noise=0.03", "ball:d=2,r=1",
        /// "annulus:d=2,inner=1,outer=2", "graph:mu",
        /// "mixture:centers=0 0;3 0,sigma=0.5".
        #[arg(long)]
        kind: String,
        /// Winding parameter shorthand: `--kind spiral --v 10`.
        #[arg(long)]
        v: Option<f64>,
        /// Noise shorthand for the spiral generator.
        #[arg(long)]
        noise: Option<f64>,
        /// Sample size (ignored by graph generators).
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path (point rows, or the distance matrix for graphs).
        #[arg(long)]
        out: PathBuf,
        /// Optional weight-vector sidecar for weighted graph outputs.
        #[arg(long)]
        weights_out: Option<PathBuf>,
    },

    /// Compute the DTM-signature of one space and write atom and CDF CSVs.
    Signature {
        input: PathBuf,
        #[arg(long)]
        m: f64,
        /// Output stem; writes <out>.atoms.csv, <out>.cdf.csv and
        /// <out>.manifest.json.
        #[arg(long)]
        out: PathBuf,
        /// Also write the raw DTM field as CSV rows of (index,value).
        #[arg(long)]
        dtm_out: Option<PathBuf>,
        /// Weight sidecar (one value per row) for matrix inputs.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[command(flatten)]
        input_opts: InputOpts,
    },

    /// Run the bootstrap isomorphism test on two spaces.
    Test {
        input_p: PathBuf,
        input_q: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        m: f64,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        nmc: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dump the bootstrap sample as a one-column CSV.
        #[arg(long)]
        boot_out: Option<PathBuf>,
        /// Exit 3 when the bootstrap distribution is degenerate.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        input_opts: InputOpts,
    },

    /// Monte Carlo level/power estimation over two generators.
    Mc {
        #[arg(long)]
        gen_p: String,
        #[arg(long)]
        gen_q: String,
        /// Points per generated sample.
        #[arg(long, default_value_t = 2000)]
        n_points: usize,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, default_value_t = 0.05)]
        m: f64,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        nmc: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Closed-form shape quantities as JSON.
    Analytic {
        /// Shape, e.g. "ball:d=2,r=1" or "cube:d=1,side=1".
        #[arg(long)]
        shape: String,
        /// Mass parameter for epsilon and the DTM minimum.
        #[arg(long, default_value_t = 0.05)]
        m: f64,
        /// Second shape: adds the signature-gap lower bound.
        #[arg(long)]
        shape2: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: failed to size thread pool: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}

fn dispatch(command: Command) -> dtmsig::Result<ExitCode> {
    match command {
        Command::Gen {
            kind,
            v,
            noise,
            n,
            seed,
            out,
            weights_out,
        } => {
            let mut kind = kind;
            if let Some(v) = v {
                kind = append_param(&kind, "v", v);
            }
            if let Some(noise) = noise {
                kind = append_param(&kind, "noise", noise);
            }
            cmd_gen(&kind, n, seed, &out, weights_out.as_deref())
        }
        Command::Signature {
            input,
            m,
            out,
            dtm_out,
            weights,
            input_opts,
        } => cmd_signature(
            &input,
            m,
            &out,
            dtm_out.as_deref(),
            weights.as_deref(),
            &input_opts,
        ),
        Command::Test {
            input_p,
            input_q,
            m,
            n,
            nmc,
            alpha,
            seed,
            out,
            boot_out,
            strict,
            input_opts,
        } => {
            let params = TestParams {
                m,
                n,
                n_mc: nmc,
                alpha,
                seed,
                rho: None,
            };
            cmd_test(
                &input_p,
                &input_q,
                &params,
                out.as_deref(),
                boot_out.as_deref(),
                strict,
                &input_opts,
            )
        }
        Command::Mc {
            gen_p,
            gen_q,
            n_points,
            reps,
            m,
            n,
            nmc,
            alpha,
            seed,
            out,
        } => {
            let params = TestParams {
                m,
                n,
                n_mc: nmc,
                alpha,
                seed,
                rho: None,
            };
            cmd_mc(&gen_p, &gen_q, n_points, reps, &params, out.as_deref())
        }
        Command::Analytic {
            shape,
            m,
            shape2,
            out,
        } => cmd_analytic(&shape, m, shape2.as_deref(), out.as_deref()),
    }
}

fn append_param(kind: &str, key: &str, value: f64) -> String {
    if kind.contains(':') {
        format!("{kind},{key}={value}")
    } else {
        format!("{kind}:{key}={value}")
    }
}

fn load_space(
    path: &std::path::Path,
    weights: Option<&std::path::Path>,
    opts: &InputOpts,
) -> dtmsig::Result<FiniteMeasureSpace> {
    let space = if opts.matrix {
        let base = load_distance_matrix(path)?;
        match weights {
            Some(wpath) => {
                let w = load_weight_vector(wpath)?;
                let n = base.len();
                let rows: Vec<Vec<f64>> = (0..n)
                    .map(|i| (0..n).map(|j| base.pairwise_distance(i, j).unwrap()).collect())
                    .collect();
                FiniteMeasureSpace::from_distance_matrix_weighted(rows, w)?
            }
            None => base,
        }
    } else {
        load_point_cloud(path)?
    };
    if opts.strict_metric {
        space.validate_metric()?;
    }
    Ok(space)
}

fn cmd_gen(
    kind_str: &str,
    n: usize,
    seed: u64,
    out: &std::path::Path,
    weights_out: Option<&std::path::Path>,
) -> dtmsig::Result<ExitCode> {
    let kind: GeneratorKind = kind_str.parse()?;
    let is_graph = matches!(kind, GeneratorKind::Graph(_));
    let spec = GeneratorSpec { kind, n, seed };
    let space = sample(&spec)?;
    if is_graph {
        space.save_matrix_csv(out)?;
        if let Some(wpath) = weights_out {
            let mut text = String::from("weight\n");
            for w in space.weights() {
                text.push_str(&format!("{w}\n"));
            }
            std::fs::write(wpath, text)?;
        }
    } else {
        space.save_points_csv(out)?;
    }
    let manifest = RunManifest::new("gen")
        .param("kind", kind_str)
        .param("n", n)
        .param("seed", seed)
        .artifact(out);
    manifest.write_alongside(out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_signature(
    input: &std::path::Path,
    m: f64,
    out: &std::path::Path,
    dtm_out: Option<&std::path::Path>,
    weights: Option<&std::path::Path>,
    opts: &InputOpts,
) -> dtmsig::Result<ExitCode> {
    let mut manifest = RunManifest::new("signature")
        .param("m", m)
        .input("input", input)?;
    let space = load_space(input, weights, opts)?;

    if let Some(path) = dtm_out {
        let field = dtmsig::dtm_field(&space, m)?;
        let mut text = String::from("index,value\n");
        for (i, v) in field.values().iter().enumerate() {
            text.push_str(&format!("{i},{v}\n"));
        }
        std::fs::write(path, text)?;
        manifest = manifest.artifact(path);
    }

    let sig = signature_full(&space, m)?;

    let atoms_path = out.with_extension("atoms.csv");
    let cdf_path = out.with_extension("cdf.csv");
    let mut atoms = String::from("atom,weight\n");
    for (a, w) in sig.dist().atoms().iter().zip(sig.dist().weights()) {
        atoms.push_str(&format!("{a},{w}\n"));
    }
    std::fs::write(&atoms_path, atoms)?;

    let mut cdf = String::from("t,cdf\n0,0\n");
    for (t, f) in sig.dist().cdf_points() {
        cdf.push_str(&format!("{t},{f}\n"));
    }
    std::fs::write(&cdf_path, cdf)?;

    manifest = manifest.artifact(&atoms_path).artifact(&cdf_path);
    manifest.write_alongside(out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_test(
    input_p: &std::path::Path,
    input_q: &std::path::Path,
    params: &TestParams,
    out: Option<&std::path::Path>,
    boot_out: Option<&std::path::Path>,
    strict: bool,
    opts: &InputOpts,
) -> dtmsig::Result<ExitCode> {
    let manifest = RunManifest::new("test")
        .param("m", params.m)
        .param("n", params.n)
        .param("n_mc", params.n_mc)
        .param("alpha", params.alpha)
        .param("seed", params.seed)
        .input("input_p", input_p)?
        .input("input_q", input_q)?;
    let p = load_space(input_p, None, opts)?;
    let q = load_space(input_q, None, opts)?;
    let report = run_test(&p, &q, params)?;

    if let Some(path) = boot_out {
        let mut text = String::from("statistic\n");
        for b in &report.boot {
            text.push_str(&format!("{b}\n"));
        }
        std::fs::write(path, text)?;
    }

    let mut json = serde_json::to_value(&report).expect("report serializes");
    json["run_id"] = serde_json::Value::String(manifest.run_id());
    emit(&json, out)?;
    manifest.write_for_report(out)?;

    if strict && !report.warnings.is_empty() {
        return Ok(ExitCode::from(EXIT_DEGENERATE));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_mc(
    gen_p: &str,
    gen_q: &str,
    n_points: usize,
    reps: usize,
    params: &TestParams,
    out: Option<&std::path::Path>,
) -> dtmsig::Result<ExitCode> {
    let kind_p: GeneratorKind = gen_p.parse()?;
    let kind_q: GeneratorKind = gen_q.parse()?;
    let spec_p = GeneratorSpec {
        kind: kind_p,
        n: n_points,
        seed: 0,
    };
    let spec_q = GeneratorSpec {
        kind: kind_q,
        n: n_points,
        seed: 0,
    };
    let manifest = RunManifest::new("mc")
        .param("gen_p", gen_p)
        .param("gen_q", gen_q)
        .param("n_points", n_points)
        .param("reps", reps)
        .param("m", params.m)
        .param("n", params.n)
        .param("n_mc", params.n_mc)
        .param("alpha", params.alpha)
        .param("seed", params.seed);
    let report = estimate_level_power(&spec_p, &spec_q, params, reps)?;
    let mut json = serde_json::to_value(&report).expect("report serializes");
    json["run_id"] = serde_json::Value::String(manifest.run_id());
    emit(&json, out)?;
    manifest.write_for_report(out)?;
    Ok(ExitCode::SUCCESS)
}

fn parse_shape(s: &str) -> dtmsig::Result<UniformShape> {
    match s.parse::<GeneratorKind>()? {
        GeneratorKind::Shape(shape) => Ok(shape),
        _ => Err(dtmsig::Error::ShapeUnsupported(format!(
            "'{s}' is not a uniform shape"
        ))),
    }
}

fn cmd_analytic(
    shape_str: &str,
    m: f64,
    shape2: Option<&str>,
    out: Option<&std::path::Path>,
) -> dtmsig::Result<ExitCode> {
    let shape = parse_shape(shape_str)?;
    let manifest = RunManifest::new("analytic")
        .param("shape", shape_str)
        .param("m", m);
    let eps = epsilon_m(&shape, m)?;
    let mut json = serde_json::json!({
        "shape": shape,
        "m": m,
        "volume": shape.volume(),
        "reach": shape.reach(),
        "diameter": shape.diameter(),
        "epsilon_m": eps,
    });
    match dtm_min(&shape, m) {
        Ok(v) => json["dtm_min"] = v.into(),
        Err(e) => {
            json["dtm_min"] = serde_json::Value::Null;
            json["dtm_min_error"] = e.to_string().into();
        }
    }
    match standardness_constant(&shape) {
        Ok((a, b)) => json["standardness"] = serde_json::json!({ "a": a, "b": b }),
        Err(e) => {
            json["standardness"] = serde_json::Value::Null;
            json["standardness_error"] = e.to_string().into();
        }
    }
    if let Some(s2) = shape2 {
        let other = parse_shape(s2)?;
        json["signature_gap_lower_bound"] = uniform_volume_lower_bound(&shape, &other, m)?.into();
    }
    json["run_id"] = serde_json::Value::String(manifest.run_id());
    emit(&json, out)?;
    manifest.write_for_report(out)?;
    Ok(ExitCode::SUCCESS)
}

fn emit(json: &serde_json::Value, out: Option<&std::path::Path>) -> dtmsig::Result<()> {
    let text = serde_json::to_string_pretty(json).expect("valid json");
    match out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}
