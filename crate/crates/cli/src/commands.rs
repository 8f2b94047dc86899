use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Result;
use copmix::bshqi::{BshqiDensity, Density, NaiveKernelDensity};
use copmix::copula::{parse_families, CopulaSpec};
use copmix::data::DataMatrix;
use copmix::datagen::{gen_synthetic, gen_univariate, generate, LabeledDataset, Recipe, Synthetic, Univariate};
use copmix::mesh::{BinsRule, UniformMesh, WeightedSample};
use copmix::metrics::ClusteringReport;
use copmix::mixture::{fit, MixtureModel};
use copmix::stat_tests::GofReport;
use serde::{Deserialize, Serialize};

use crate::config::{mixture_config, resolve_seed, ClusterOverrides, RunConfig};
use crate::io::{read_dataset, read_labels, write_dataset, write_json, write_labels, write_text, Dataset};
use crate::{usage, ClusterArgs, Common, DensityArgs, GendataArgs, MetricsArgs};

/// `prefix` + `.suffix`, keeping any dots already in the prefix.
fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(prefix.as_os_str());
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn default_prefix(input: &Path) -> PathBuf {
    input.with_extension("")
}

// ------------------------------------------------------------------ gendata

/// Recipe files as written next to generated data; `seed` is optional on
/// input and the `--seed` flag wins over it.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RecipeFile {
    Univariate {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        distribution: Univariate,
        n: usize,
    },
    Copula {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(flatten)]
        recipe: Recipe,
    },
}

impl RecipeFile {
    fn seed(&self) -> Option<u64> {
        match self {
            RecipeFile::Univariate { seed, .. } | RecipeFile::Copula { seed, .. } => *seed,
        }
    }
}

fn gendata_source(args: &GendataArgs) -> Result<(String, RecipeFile)> {
    if let Some(path) = &args.recipe {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read recipe {}: {e}", path.display())))?;
        let file: RecipeFile =
            serde_json::from_str(&text).map_err(|e| usage(format!("recipe {}: {e}", path.display())))?;
        let name = match &file {
            RecipeFile::Univariate { .. } => "sample".to_string(),
            RecipeFile::Copula { recipe, .. } => recipe.name.clone(),
        };
        return Ok((name, file));
    }
    let Some(which) = args.dataset.as_deref() else {
        return Err(usage("gendata needs a dataset name or --recipe"));
    };
    if let Ok(s) = which.parse::<Synthetic>() {
        return Ok((
            s.name().to_string(),
            RecipeFile::Copula {
                seed: None,
                recipe: copmix::datagen::default_recipe(s),
            },
        ));
    }
    if let Ok(distribution) = which.parse::<Univariate>() {
        if args.n == 0 {
            return Err(usage("-n must be at least 1"));
        }
        return Ok((
            "sample".to_string(),
            RecipeFile::Univariate {
                seed: None,
                distribution,
                n: args.n,
            },
        ));
    }
    Err(usage(format!(
        "unknown dataset `{which}` (expected x1, x2, x3, x4, or a distribution such as normal:5,0.3)"
    )))
}

pub fn gendata(common: &Common, args: GendataArgs) -> Result<()> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let (name, mut source) = gendata_source(&args)?;
    let seed = resolve_seed(common.seed.or(source.seed()), &cfg)?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
    let recipe_path = out.with_extension("recipe.json");

    let (x, labels, clusters) = match &mut source {
        RecipeFile::Univariate { seed: s, distribution, n } => {
            *s = Some(seed);
            let v = gen_univariate(distribution, *n, seed)?;
            (DataMatrix::new(v, 1)?, None, 1)
        }
        RecipeFile::Copula { seed: s, recipe } => {
            *s = Some(seed);
            let LabeledDataset { x, labels, .. } = if recipe.name == name && args.recipe.is_none() {
                gen_synthetic(name.parse()?, seed)?
            } else {
                generate(recipe, seed)?
            };
            (x, Some(labels), recipe.clusters.len())
        }
    };
    write_dataset(&out, &x, labels.as_deref())?;
    write_json(&recipe_path, &source)?;
    println!(
        "wrote {} ({} rows, {} columns, {clusters} cluster(s), seed {seed}) and {}",
        out.display(),
        x.nrows(),
        x.ncols(),
        recipe_path.display()
    );
    Ok(())
}

// ------------------------------------------------------------------ density

#[derive(Serialize)]
struct DensityOutput<'a> {
    column: &'a str,
    n: usize,
    bins: BinsRule,
    bshqi: &'a BshqiDensity,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel: Option<&'a NaiveKernelDensity>,
}

#[derive(Serialize)]
struct GofOutput {
    truth: String,
    seed: u64,
    bshqi: GofReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel: Option<GofReport>,
}

fn pick_column(ds: &Dataset, column: Option<&str>) -> Result<usize> {
    let Some(c) = column else { return Ok(0) };
    if let Some(j) = ds.names.iter().position(|n| n == c) {
        return Ok(j);
    }
    match c.parse::<usize>() {
        Ok(j) if (1..=ds.names.len()).contains(&j) => Ok(j - 1),
        _ => Err(usage(format!(
            "no column `{c}` (columns: {})",
            ds.names.join(", ")
        ))),
    }
}

pub fn density(common: &Common, args: DensityArgs) -> Result<()> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let ds = read_dataset(&args.input)?;
    let j = pick_column(&ds, args.column.as_deref())?;
    let values = ds.x.column(j);
    let rule = match args.bins {
        Some(b) => b,
        None => cfg.bins()?.unwrap_or_default(),
    };
    let padding = args.padding.or(cfg.padding).unwrap_or(0.0);
    if args.grid < 2 {
        return Err(usage("--grid must be at least 2"));
    }
    let truth = args
        .truth
        .as_deref()
        .map(|t| t.parse::<Univariate>().map_err(|e| usage(format!("--truth: {e}"))))
        .transpose()?;
    let seed = resolve_seed(common.seed, &cfg)?;

    let mesh = UniformMesh::from_values(&values, rule, padding)?;
    let sample = WeightedSample::unweighted(values.clone())?;
    let bshqi = BshqiDensity::fit(&sample, &mesh)?;
    let kernel = args
        .baseline
        .then(|| NaiveKernelDensity::fit(&sample, mesh.h()))
        .transpose()?;

    let (a, b) = (mesh.a(), mesh.b());
    let mut plot = String::from("x,pdf,cdf");
    if kernel.is_some() {
        plot.push_str(",kernel_pdf,kernel_cdf");
    }
    plot.push('\n');
    for i in 0..args.grid {
        let x = if i + 1 == args.grid {
            b
        } else {
            a + (b - a) * i as f64 / (args.grid - 1) as f64
        };
        write!(plot, "{x},{},{}", bshqi.pdf(x), bshqi.cdf(x))?;
        if let Some(k) = &kernel {
            write!(plot, ",{},{}", k.pdf(x), k.cdf(x))?;
        }
        plot.push('\n');
    }

    let gof = truth.map(|t| -> Result<GofOutput> {
        let fresh = gen_univariate(&t, values.len(), seed)?;
        Ok(GofOutput {
            truth: t.to_string(),
            seed,
            bshqi: GofReport::single(&bshqi, (a, b), &t, &fresh),
            kernel: kernel.as_ref().map(|k| GofReport::single(k, (a, b), &t, &fresh)),
        })
    });
    let gof = gof.transpose()?;

    let prefix = common.out.clone().unwrap_or_else(|| default_prefix(&args.input));
    let model_path = with_suffix(&prefix, "density.json");
    let plot_path = with_suffix(&prefix, "plot.csv");
    write_json(
        &model_path,
        &DensityOutput {
            column: &ds.names[j],
            n: values.len(),
            bins: rule,
            bshqi: &bshqi,
            kernel: kernel.as_ref(),
        },
    )?;
    write_text(&plot_path, &plot)?;
    println!(
        "column {}: n = {}, N = {} intervals, h = {:.6}, support [{a}, {b}]",
        ds.names[j],
        values.len(),
        mesh.intervals(),
        mesh.h()
    );
    println!("wrote {} and {}", model_path.display(), plot_path.display());
    if let Some(g) = &gof {
        let gof_path = with_suffix(&prefix, "gof.json");
        write_json(&gof_path, g)?;
        println!("\ngoodness of fit against {} (fresh sample, seed {seed})", g.truth);
        println!("bshqi\n{}", g.bshqi.to_table());
        if let Some(k) = &g.kernel {
            println!("kernel baseline\n{}", k.to_table());
        }
        println!("wrote {}", gof_path.display());
    }
    Ok(())
}

// ------------------------------------------------------------------ cluster

fn parameter_string(spec: &CopulaSpec) -> String {
    match spec {
        CopulaSpec::Gaussian(g) => {
            let rows = g.correlation_rows();
            let mut parts = Vec::new();
            for i in 0..rows.len() {
                for j in i + 1..rows.len() {
                    parts.push(format!("rho{}{}={:.4}", i + 1, j + 1, rows[i][j]));
                }
            }
            parts.join(" ")
        }
        other => format!("theta={:.4}", other.theta().unwrap_or(f64::NAN)),
    }
}

/// Per-cluster copula selection with the total log-likelihood.
pub fn selection_table(model: &MixtureModel, labels: &[usize]) -> String {
    let mut out = format!("{:>7} {:>7} {:>8}  {:<9} {}\n", "cluster", "size", "pi", "family", "parameters");
    for (k, c) in model.components.iter().enumerate() {
        let size = labels.iter().filter(|&&l| l == k).count();
        let _ = writeln!(
            out,
            "{k:>7} {size:>7} {:>8.4}  {:<9} {}",
            c.pi,
            c.copula.family().name(),
            parameter_string(&c.copula)
        );
    }
    let _ = writeln!(
        out,
        "total log-likelihood: {:.4}  ({} iterations, {})",
        model.final_loglik(),
        model.n_iter,
        if model.converged { "converged" } else { "not converged" }
    );
    out
}

pub fn cluster(common: &Common, args: ClusterArgs) -> Result<()> {
    let file = RunConfig::load(common.config.as_deref())?;
    let families = args
        .families
        .as_deref()
        .map(|s| parse_families(s).map_err(|e| usage(format!("--families: {e}"))))
        .transpose()?;
    let cfg = mixture_config(
        &file,
        ClusterOverrides {
            k: args.k,
            families,
            init: args.init,
            bins: args.bins,
            restarts: args.restarts,
            tol: args.tol,
            max_iter: args.max_iter,
            marginal_method: args.marginal,
            clamp: args.clamp,
            adaptive_clamp: args.adaptive_clamp,
        },
    )?;
    let seed = resolve_seed(common.seed, &file)?;
    let ds = read_dataset(&args.input)?;
    let (n, d) = (ds.x.nrows(), ds.x.ncols());
    if cfg.k * (d + 1) > n {
        return Err(usage(format!(
            "K = {} is too large for n = {n}, D = {d} (need K <= n / (D + 1) = {})",
            cfg.k,
            n / (d + 1)
        )));
    }

    let model = fit(&ds.x, &cfg, seed)?;
    let labels = model.predict(&ds.x)?;
    let report = ClusteringReport::compute(&ds.x, &labels, ds.labels.as_deref())?;
    let table = selection_table(&model, &labels);

    let prefix = common.out.clone().unwrap_or_else(|| default_prefix(&args.input));
    let paths = [
        with_suffix(&prefix, "model.json"),
        with_suffix(&prefix, "labels.csv"),
        with_suffix(&prefix, "report.json"),
        with_suffix(&prefix, "selection.txt"),
    ];
    let mut model_json = model.to_json()?;
    model_json.push('\n');
    write_text(&paths[0], &model_json)?;
    write_labels(&paths[1], &labels)?;
    write_json(&paths[2], &report)?;
    write_text(&paths[3], &table)?;

    print!("{table}\n{}", report.to_table());
    let names: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    println!("wrote {}", names.join(", "));
    Ok(())
}

// ------------------------------------------------------------------ metrics

pub fn metrics(common: &Common, args: MetricsArgs) -> Result<()> {
    let ds = read_dataset(&args.input)?;
    let pred = read_labels(&args.labels)?;
    if pred.len() != ds.x.nrows() {
        return Err(usage(format!(
            "{} has {} labels for {} rows",
            args.labels.display(),
            pred.len(),
            ds.x.nrows()
        )));
    }
    let report = ClusteringReport::compute(&ds.x, &pred, ds.labels.as_deref())?;
    print!("{}", report.to_table());
    if let Some(out) = &common.out {
        write_json(out, &report)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
