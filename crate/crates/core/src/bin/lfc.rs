use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lfc::codec::{Codec, QuantParam};
use lfc::config::{PipelineConfig, Scheme};
use lfc::eval::{bd_table, rd_sweep, read_rd_csv, svg_plot, write_bd_csv, write_rd_csv, BdMethod};
use lfc::io::{load_lightfield, write_lightfield, Layout};
use lfc::lightfield::LightField;
use lfc::pattern::{PatternKind, PredictionPattern};
use lfc::pipeline::{decode_lightfield, Encoder};
use lfc::Result;

#[derive(Parser)]
#[command(name = "lfc", version, about = "Light-field coding with low-rank multiplicative layers and FDL prediction")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML file overriding pipeline settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum CodecArg {
    Fallback,
    HevcExt,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Hierarchical,
    LayersOnly,
    ViewAnchor,
}

#[derive(Args)]
struct Source {
    /// Directory of view images.
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// View file-name layout, e.g. `view_{r}_{c}.{ext}` or `{s}_{t}.png`.
    #[arg(long)]
    layout: Option<String>,
    /// Use a built-in synthetic light field instead: `3x3` or `9x9`.
    #[arg(long)]
    synthetic: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compress a light field into an .lfc container.
    Encode {
        #[command(flatten)]
        source: Source,
        /// `c2`, `h2` or a pattern JSON file.
        #[arg(long, default_value = "c2")]
        pattern: String,
        #[arg(long, default_value_t = 16)]
        rank: usize,
        #[arg(long, default_value_t = 20)]
        qp: i64,
        #[arg(long, value_enum, default_value = "fallback")]
        codec: CodecArg,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct views from an .lfc container.
    Decode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Pattern JSON, needed only for containers with a custom pattern.
        #[arg(long)]
        pattern: Option<PathBuf>,
        #[arg(long)]
        layout: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Rate-distortion sweep over ranks and qps.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "c2")]
        pattern: String,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,28,44,52,60")]
        ranks: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2,6,10,14,20,26,38")]
        qps: Vec<i64>,
        #[arg(long, value_enum, default_value = "fallback")]
        codec: CodecArg,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        #[arg(long)]
        csv: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Plot a sweep CSV and optionally tabulate BD-rates against an anchor sweep.
    Report {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        svg: PathBuf,
        #[arg(long)]
        title: Option<String>,
        /// Sweep CSV of the anchor scheme.
        #[arg(long, requires = "bd_csv")]
        anchor: Option<PathBuf>,
        #[arg(long)]
        bd_csv: Option<PathBuf>,
        #[arg(long, default_value = "scene")]
        scene: String,
        /// Piecewise-cubic instead of least-squares cubic BD-rate.
        #[arg(long)]
        pchip: bool,
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    Ok(match common.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn load_source(src: &Source, seed: u64) -> Result<LightField> {
    match (&src.input, &src.synthetic) {
        (Some(dir), _) => {
            let layout = match &src.layout {
                Some(l) => Layout::parse(l)?,
                None => Layout::default(),
            };
            load_lightfield(dir, &layout)
        }
        (None, Some(kind)) => match kind.as_str() {
            "3x3" => Ok(lfc::synthetic::fixture_3x3(seed)),
            "9x9" => Ok(lfc::synthetic::fixture_9x9(seed)),
            other => Err(lfc::Error::InvalidConfig(format!("unknown synthetic light field `{other}` (use 3x3 or 9x9)"))),
        },
        (None, None) => Err(lfc::Error::InvalidConfig("give --input DIR or --synthetic 3x3|9x9".into())),
    }
}

fn load_pattern(spec: &str, lf: &LightField) -> Result<PredictionPattern> {
    match spec {
        "c2" => PredictionPattern::builtin(PatternKind::Circular2, lf.grid()),
        "h2" => PredictionPattern::builtin(PatternKind::Hierarchical2, lf.grid()),
        path => PredictionPattern::load(Path::new(path)),
    }
}

fn codec(arg: CodecArg, cfg: &PipelineConfig) -> Result<Codec> {
    match arg {
        CodecArg::Fallback => Ok(Codec::Fallback),
        CodecArg::HevcExt => match &cfg.hevc {
            Some(c) => Ok(Codec::HevcExternal(c.clone())),
            None => Codec::hevc_from_env(),
        },
    }
}

fn apply_scheme(cfg: &mut PipelineConfig, s: Option<SchemeArg>) {
    if let Some(s) = s {
        cfg.scheme = match s {
            SchemeArg::Hierarchical => Scheme::Hierarchical,
            SchemeArg::LayersOnly => Scheme::LayersOnly,
            SchemeArg::ViewAnchor => Scheme::ViewAnchor,
        };
    }
}

fn init_logging(common: &Common) {
    let level = if common.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Encode { source, pattern, rank, qp, codec: c, scheme, out, common } => {
            init_logging(&common);
            let mut cfg = load_config(&common)?;
            apply_scheme(&mut cfg, scheme);
            let lf = load_source(&source, cfg.seed)?;
            let pattern = load_pattern(&pattern, &lf)?;
            let codec = codec(c, &cfg)?;
            let enc = Encoder::new(&lf, pattern, codec, cfg)?.encode(rank, QuantParam::new(qp)?)?;
            let bytes = enc.to_bytes();
            fs::write(&out, &bytes)?;
            let psnr = lfc::metrics::yuv_psnr(&lf, &enc.reconstruction)?.aggregate;
            println!("{}: {} bytes ({:.2}% of raw), YUV-PSNR {:.2} dB", out.display(), bytes.len(), 100.0 * bytes.len() as f64 / lf.raw_bytes() as f64, psnr);
        }
        Cmd::Decode { input, out, pattern, layout, common } => {
            init_logging(&common);
            let cfg = load_config(&common)?;
            let custom = pattern.map(|p| PredictionPattern::load(&p)).transpose()?;
            let lf = decode_lightfield(&fs::read(&input)?, custom.as_ref(), cfg.hevc.as_ref())?;
            let layout = match layout {
                Some(l) => Layout::parse(&l)?,
                None => Layout::default(),
            };
            write_lightfield(&lf, &out, &layout)?;
            println!("{} views written to {}", lf.grid().len(), out.display());
        }
        Cmd::Sweep { source, pattern, ranks, qps, codec: c, scheme, csv, common } => {
            init_logging(&common);
            let mut cfg = load_config(&common)?;
            apply_scheme(&mut cfg, scheme);
            let lf = load_source(&source, cfg.seed)?;
            let pattern = load_pattern(&pattern, &lf)?;
            let codec = codec(c, &cfg)?;
            let qps = qps.into_iter().map(QuantParam::new).collect::<Result<Vec<_>>>()?;
            let points = rd_sweep(&lf, &pattern, &ranks, &qps, &codec, &cfg)?;
            write_rd_csv(&points, fs::File::create(&csv)?)?;
            println!("{} rows written to {}", points.len(), csv.display());
        }
        Cmd::Report { csv, svg, title, anchor, bd_csv, scene, pchip, common } => {
            init_logging(&common);
            let points = read_rd_csv(fs::File::open(&csv)?)?;
            let title = title.unwrap_or_else(|| format!("Rate-distortion: {}", csv.display()));
            fs::write(&svg, svg_plot(&points, &title)?)?;
            println!("plot written to {}", svg.display());
            if let (Some(anchor), Some(out)) = (anchor, bd_csv) {
                let anchor = read_rd_csv(fs::File::open(&anchor)?)?;
                let method = if pchip { BdMethod::Pchip } else { BdMethod::Cubic };
                let rows = bd_table(&scene, &anchor, &points, method);
                write_bd_csv(&rows, fs::File::create(&out)?)?;
                println!("{} BD-rate rows written to {}", rows.len(), out.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
