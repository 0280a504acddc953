mod error;
mod io;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use riswie::align::{align, boosted_distance, BoostBase};
use riswie::harness::{
    bias_variance_experiment, hybrid_matrix, match_accuracy, ordering_agreement, pairwise_matrix, stack_assign,
    BiasVarianceSpec, DistanceConfig,
};
use riswie::matching::Scaled;
use riswie::{
    gaussian_closed_form, gw_bounds, riswie_distance, sriswie_distance, stability_bound, DiffusionParams,
    EmbeddingConfig, GaussianSpec, SoftParams,
};

use error::{CliError, CliResult};

const JOBS_ENV: &str = "RISWIE_JOBS";

#[derive(Parser)]
#[command(name = "riswie", version, about = "Rigid-invariant sliced Wasserstein distances between point clouds")]
struct Cli {
    /// Worker threads (default: logical cores). RISWIE_JOBS overrides.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Seed for randomized steps.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output format (each command has its own default).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Write the main output here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Pca,
    Diffusion,
    Coordinate,
}

#[derive(Clone, Copy, ValueEnum)]
enum Base {
    Sliced,
    Nn,
}

#[derive(Args, Clone)]
struct EmbedArgs {
    #[arg(long, value_enum, default_value = "pca")]
    embedding: Kind,
    /// Axis count (default: smaller ambient dimension).
    #[arg(long)]
    k: Option<usize>,
    /// Diffusion: neighbours per point (default ceil(d ln n)).
    #[arg(long)]
    neighbors: Option<usize>,
    /// Diffusion time.
    #[arg(long, default_value_t = 1)]
    t: u32,
    /// Diffusion kernel bandwidth (default: median squared kNN edge).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Diffusion: leave coordinates unscaled by eigenvalues.
    #[arg(long)]
    unscaled: bool,
}

impl EmbedArgs {
    fn config(&self) -> EmbeddingConfig {
        let diffusion = DiffusionParams {
            neighbors: self.neighbors,
            t: self.t,
            epsilon: self.epsilon,
            scale_by_eigenvalue: !self.unscaled,
        };
        match self.embedding {
            Kind::Pca => EmbeddingConfig::pca(self.k),
            Kind::Diffusion => EmbeddingConfig::diffusion(self.k, diffusion),
            Kind::Coordinate => EmbeddingConfig::coordinate(self.k),
        }
    }
}

#[derive(Args, Clone)]
struct SoftArgs {
    /// Use the entropic soft matching.
    #[arg(long)]
    soft: bool,
    /// Sigmoid sharpness relative to the median sign gap.
    #[arg(long, default_value_t = 10.0)]
    beta: f64,
    /// Absolute sigmoid sharpness (overrides --beta).
    #[arg(long)]
    beta_abs: Option<f64>,
    /// Entropic weight relative to the mean blended cost.
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    /// Absolute entropic weight (overrides --eps).
    #[arg(long)]
    eps_abs: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

impl SoftArgs {
    fn params(&self) -> Option<SoftParams> {
        self.soft.then(|| SoftParams {
            beta: self.beta_abs.map_or(Scaled::Relative(self.beta), Scaled::Absolute),
            eps: self.eps_abs.map_or(Scaled::Relative(self.eps), Scaled::Absolute),
            max_iter: self.max_iter,
            tol: self.tol,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Distance between two point-cloud files.
    Dist {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        embed: EmbedArgs,
        #[command(flatten)]
        soft: SoftArgs,
    },
    /// Pairwise distance matrix over files, or all .csv files in one directory.
    Matrix {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        embed: EmbedArgs,
        #[command(flatten)]
        soft: SoftArgs,
        /// Also write run metadata as JSON.
        #[arg(long)]
        meta: Option<PathBuf>,
    },
    /// Rigidly align B onto A.
    Align {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        embed: EmbedArgs,
        /// Write the aligned copy of B as CSV.
        #[arg(long)]
        aligned: Option<PathBuf>,
        /// Write the transform JSON (used with --format csv).
        #[arg(long)]
        transform: Option<PathBuf>,
        /// Report a base distance after alignment.
        #[arg(long, value_enum)]
        base: Option<Base>,
        /// Directions for the sliced base distance.
        #[arg(long, default_value_t = 64)]
        directions: usize,
    },
    /// Balanced stack assignment from a distance matrix.
    Stacks {
        matrix: PathBuf,
        /// Number of stacks.
        #[arg(long = "stacks", short = 'K')]
        stacks: usize,
        /// Ground-truth labels, for accuracy.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
    },
    /// Blend a spatial and a marker matrix after min-max normalisation.
    Hybrid {
        spatial: PathBuf,
        marker: PathBuf,
        /// Weight of the spatial matrix, in [0, 1].
        #[arg(long)]
        lambda: f64,
    },
    /// Pairwise ordering agreement between two matrices.
    Agree {
        m1: PathBuf,
        m2: PathBuf,
        /// Ignore comparisons whose distances differ by less than this.
        #[arg(long)]
        min_sep: Option<f64>,
    },
    /// Bias/variance scaling experiment from a JSON spec.
    Biasvar { spec: PathBuf },
    /// Gaussian closed form, GW bounds and stability for two spectra.
    Gaussian {
        /// Covariance eigenvalues of A, comma separated.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        a: Vec<f64>,
        /// Covariance eigenvalues of B, comma separated.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        b: Vec<f64>,
        /// Evaluate both bounds at this GW^2 as well.
        #[arg(long)]
        gw2: Option<f64>,
        /// Perturbation norm for the stability bound (default: largest
        /// eigenvalue gap).
        #[arg(long)]
        e_norm: Option<f64>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("riswie: {e}");
        std::process::exit(e.code());
    }
}

fn worker_count(flag: Option<usize>) -> CliResult<Option<usize>> {
    let jobs = match std::env::var(JOBS_ENV) {
        Ok(v) if !v.trim().is_empty() => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("{JOBS_ENV}={v} is not a worker count")))?,
        ),
        _ => flag,
    };
    if jobs == Some(0) {
        return Err(CliError::Config("worker count must be positive".into()));
    }
    Ok(jobs)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = worker_count(cli.jobs)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let out = Output {
        path: cli.output.clone(),
    };
    let seed = cli.seed;
    let format = cli.format;
    match cli.command {
        Command::Dist { a, b, embed, soft } => cmd_dist(&out, format, &a, &b, &embed, &soft),
        Command::Matrix {
            inputs,
            embed,
            soft,
            meta,
        } => cmd_matrix(&out, format, &inputs, &embed, &soft, meta.as_deref()),
        Command::Align {
            a,
            b,
            embed,
            aligned,
            transform,
            base,
            directions,
        } => {
            let base = base.map(|b| match b {
                Base::Sliced => BoostBase::SlicedW2 {
                    directions,
                    seed: seed.unwrap_or(0),
                },
                Base::Nn => BoostBase::MeanNearestNeighbor,
            });
            cmd_align(&out, format, &a, &b, &embed, aligned.as_deref(), transform.as_deref(), base)
        }
        Command::Stacks {
            matrix,
            stacks,
            labels,
            restarts,
        } => cmd_stacks(&out, format, &matrix, stacks, labels.as_deref(), restarts, seed.unwrap_or(0)),
        Command::Hybrid { spatial, marker, lambda } => cmd_hybrid(&out, format, &spatial, &marker, lambda),
        Command::Agree { m1, m2, min_sep } => cmd_agree(&out, format, &m1, &m2, min_sep),
        Command::Biasvar { spec } => cmd_biasvar(&out, format, &spec, seed),
        Command::Gaussian { a, b, gw2, e_norm } => cmd_gaussian(&out, format, a, b, gw2, e_norm),
    }
}

struct Output {
    path: Option<PathBuf>,
}

impl Output {
    fn write(&self, text: &str) -> CliResult<()> {
        match &self.path {
            Some(p) => write_file(p, text),
            None => {
                use std::io::Write;
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                stdout.flush()?;
                Ok(())
            }
        }
    }

    fn json(&self, v: &Value) -> CliResult<()> {
        self.write(&pretty(v))
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values always serialize");
    s.push('\n');
    s
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn one_based(perm: &[usize]) -> Vec<usize> {
    perm.iter().map(|p| p + 1).collect()
}

fn cmd_dist(out: &Output, format: Option<Format>, a: &Path, b: &Path, embed: &EmbedArgs, soft: &SoftArgs) -> CliResult<()> {
    let x = io::read_cloud(a)?;
    let y = io::read_cloud(b)?;
    let config = embed.config();
    let value = match soft.params() {
        None => {
            let r = riswie_distance(&x, &y, &config)?;
            json!({
                "distance": r.distance,
                "squared": r.squared,
                "k": r.k,
                "permutation": one_based(&r.matching.permutation),
                "signs": r.matching.signs,
                "pair_costs": r.matching.pair_costs,
            })
        }
        Some(params) => {
            let (distance, s) = sriswie_distance(&x, &y, &config, &params)?;
            let plan: Vec<Vec<f64>> = s.plan.rows().into_iter().map(|r| r.to_vec()).collect();
            json!({
                "distance": distance,
                "squared": distance * distance,
                "k": s.plan.nrows(),
                "objective": s.objective,
                "transport": s.transport,
                "beta": s.beta,
                "eps": s.eps,
                "iterations": s.iterations,
                "marginal_error": s.marginal_error,
                "plan": plan,
            })
        }
    };
    match format.unwrap_or(Format::Json) {
        Format::Json => out.json(&value),
        Format::Csv => out.write(&format!(
            "distance,squared,k\n{},{},{}\n",
            io::fmt_float(value["distance"].as_f64().unwrap()),
            io::fmt_float(value["squared"].as_f64().unwrap()),
            value["k"]
        )),
    }
}

fn matrix_json(d: &riswie::harness::DistanceMatrix) -> Value {
    let rows: Vec<Vec<f64>> = d.values().rows().into_iter().map(|r| r.to_vec()).collect();
    json!({ "ids": d.ids(), "values": rows })
}

fn emit_matrix(out: &Output, format: Option<Format>, d: &riswie::harness::DistanceMatrix) -> CliResult<()> {
    match format.unwrap_or(Format::Csv) {
        Format::Csv => out.write(&io::matrix_csv(d)),
        Format::Json => out.json(&matrix_json(d)),
    }
}

fn cmd_matrix(
    out: &Output,
    format: Option<Format>,
    inputs: &[PathBuf],
    embed: &EmbedArgs,
    soft: &SoftArgs,
    meta: Option<&Path>,
) -> CliResult<()> {
    let files = io::expand_inputs(inputs)?;
    let clouds = files.iter().map(|f| io::read_cloud(f)).collect::<CliResult<Vec<_>>>()?;
    let mut ids: Vec<&str> = clouds.iter().map(|c| c.id().unwrap_or_default()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::Config(format!("two inputs share the id '{}'", w[0])));
    }
    let config = DistanceConfig {
        embedding: embed.config(),
        soft: soft.params(),
    };
    let d = pairwise_matrix(&clouds, &config)?;
    emit_matrix(out, format, &d)?;
    if let Some(path) = meta {
        let files: Vec<String> = files.iter().map(|f| f.display().to_string()).collect();
        let v = json!({
            "version": env!("CARGO_PKG_VERSION"),
            "ids": d.ids(),
            "files": files,
            "points": clouds.iter().map(|c| c.len()).collect::<Vec<_>>(),
            "dims": clouds.iter().map(|c| c.dim()).collect::<Vec<_>>(),
            "config": config,
        });
        write_file(path, &pretty(&v))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_align(
    out: &Output,
    format: Option<Format>,
    a: &Path,
    b: &Path,
    embed: &EmbedArgs,
    aligned_path: Option<&Path>,
    transform_path: Option<&Path>,
    base: Option<BoostBase>,
) -> CliResult<()> {
    let x = io::read_cloud(a)?;
    let y = io::read_cloud(b)?;
    let config = embed.config();
    let (r, t, boosted) = match base {
        Some(base) => {
            let bd = boosted_distance(&x, &y, base, &config)?;
            (bd.riswie, bd.transform, Some(bd.value))
        }
        None => {
            let (r, t) = align(&x, &y, &config)?;
            (r, t, None)
        }
    };
    let aligned = t.apply(&y)?;
    let mut v = json!({
        "rotation": t.rotation.iter().copied().collect::<Vec<f64>>(),
        "translation": t.translation.to_vec(),
        "permutation": one_based(&r.matching.permutation),
        "signs": r.matching.signs,
        "det": t.determinant(),
        "distance": r.distance,
    });
    if let Some(value) = boosted {
        v["boosted"] = json!(value);
    }
    let csv = io::points_csv(&aligned);
    if let Some(p) = aligned_path {
        write_file(p, &csv)?;
    }
    match format.unwrap_or(Format::Json) {
        Format::Json => {
            if let Some(p) = transform_path {
                write_file(p, &pretty(&v))?;
            }
            out.json(&v)
        }
        Format::Csv => {
            if let Some(p) = transform_path {
                write_file(p, &pretty(&v))?;
            }
            out.write(&csv)
        }
    }
}

fn cmd_stacks(
    out: &Output,
    format: Option<Format>,
    matrix: &Path,
    k: usize,
    labels: Option<&Path>,
    restarts: usize,
    seed: u64,
) -> CliResult<()> {
    let d = io::read_matrix(matrix)?;
    let a = stack_assign(&d, k, restarts, seed)?;
    let truth = labels.map(|p| io::read_labels(p, d.ids())).transpose()?;
    let accuracy = truth.as_ref().map(|t| match_accuracy(&a, t)).transpose()?;
    let assigned = a.labels();
    match format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from(if truth.is_some() { "id,stack,label\n" } else { "id,stack\n" });
            for (i, id) in d.ids().iter().enumerate() {
                write!(s, "{},{}", io::csv_field(id), assigned[i]).unwrap();
                if let Some(t) = &truth {
                    write!(s, ",{}", io::csv_field(&t[i])).unwrap();
                }
                s.push('\n');
            }
            out.write(&s)?;
            eprintln!("cost: {}", io::fmt_float(a.cost));
            if let Some(acc) = accuracy {
                eprintln!("accuracy: {acc}");
            }
            Ok(())
        }
        Format::Json => {
            let stacks: Vec<Vec<&str>> = a
                .stacks
                .iter()
                .map(|s| s.iter().map(|&i| d.ids()[i].as_str()).collect())
                .collect();
            out.json(&json!({ "stacks": stacks, "cost": a.cost, "accuracy": accuracy }))
        }
    }
}

fn cmd_hybrid(out: &Output, format: Option<Format>, spatial: &Path, marker: &Path, lambda: f64) -> CliResult<()> {
    let s = io::read_matrix(spatial)?;
    let m = io::read_matrix(marker)?;
    let h = hybrid_matrix(&s, &m, lambda)?;
    emit_matrix(out, format, &h)
}

fn cmd_agree(out: &Output, format: Option<Format>, m1: &Path, m2: &Path, min_sep: Option<f64>) -> CliResult<()> {
    let d1 = io::read_matrix(m1)?;
    let d2 = io::read_matrix(m2)?;
    let a = ordering_agreement(&d1, &d2, min_sep)?;
    match format.unwrap_or(Format::Json) {
        Format::Json => out.json(&serde_json::to_value(a).expect("plain struct")),
        Format::Csv => out.write(&format!(
            "fraction,compared,mean_abs_percentile_diff\n{},{},{}\n",
            io::fmt_float(a.fraction),
            a.compared,
            io::fmt_float(a.mean_abs_percentile_diff)
        )),
    }
}

fn cmd_biasvar(out: &Output, format: Option<Format>, path: &Path, seed: Option<u64>) -> CliResult<()> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let mut spec: BiasVarianceSpec = serde_json::from_str(&text).map_err(|e| {
        CliError::Parse(format!("{}:{}: {e}", path.display(), e.line()))
    })?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let rows = bias_variance_experiment(&spec)?;
    match format.unwrap_or(Format::Csv) {
        Format::Json => out.json(&serde_json::to_value(&rows).expect("plain structs")),
        Format::Csv => {
            let mut s = String::from("d,n,truth,mean_d,bias,variance,alpha_bias,alpha_var\n");
            for r in &rows {
                let f = io::fmt_float;
                writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    r.d,
                    r.n,
                    f(r.truth),
                    f(r.mean_d),
                    f(r.bias),
                    f(r.variance),
                    f(r.alpha_bias),
                    f(r.alpha_var)
                )
                .unwrap();
            }
            out.write(&s)
        }
    }
}

fn finite_or_null(v: riswie::Result<f64>) -> Value {
    v.ok().filter(|x| x.is_finite()).map_or(Value::Null, |x| json!(x))
}

fn cmd_gaussian(
    out: &Output,
    format: Option<Format>,
    a: Vec<f64>,
    b: Vec<f64>,
    gw2: Option<f64>,
    e_norm: Option<f64>,
) -> CliResult<()> {
    let sa = GaussianSpec::new(a)?;
    let sb = GaussianSpec::new(b)?;
    let d = gaussian_closed_form(&sa, &sb)?;
    let g = gw_bounds(&sa, &sb)?;
    let lambda_min = sa
        .eigenvalues()
        .iter()
        .chain(sb.eigenvalues())
        .fold(f64::INFINITY, |m, &v| m.min(v));
    // for the diagonal perturbation taking A to B, ||E||_2 is the largest gap
    let gap = sa
        .eigenvalues()
        .iter()
        .zip(sb.eigenvalues())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let e = e_norm.unwrap_or(gap);
    let ii = g.bound_ii(g.ggw2);
    let mut v = json!({
        "D": d,
        "D2": g.dg2,
        "lgw2": g.lgw2,
        "ggw2": g.ggw2,
        "alpha": g.alpha,
        "bound_i_rhs_at_ggw": finite_or_null(g.bound_i(g.ggw2)),
        "bound_ii_rhs_at_ggw": ii.value,
        "bound_ii_clamped": ii.clamped,
        "lambda_min": lambda_min,
        "e_norm": e,
        "stability_bound": finite_or_null(stability_bound(lambda_min, e)),
    });
    if let Some(w) = gw2 {
        let ii = g.bound_ii(w);
        v["gw2"] = json!(w);
        v["bound_i_rhs"] = finite_or_null(g.bound_i(w));
        v["bound_ii_rhs"] = json!(ii.value);
        v["bound_ii_rhs_clamped"] = json!(ii.clamped);
    }
    match format.unwrap_or(Format::Json) {
        Format::Json => out.json(&v),
        Format::Csv => {
            let obj = v.as_object().expect("object literal");
            let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
            let vals: Vec<String> = obj.values().map(|x| x.to_string()).collect();
            out.write(&format!("{}\n{}\n", keys.join(","), vals.join(",")))
        }
    }
}
