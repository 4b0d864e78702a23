use std::error::Error;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use plnc_core::clustering::CodebookSelector;
use plnc_core::constellation::{Constellation, Kind};
use plnc_core::latin::{build_codebook, complete_cpls, standard_square, Codebook, CodebookOptions, PartialSquare};
use plnc_core::sim::{
    run_ber, sample_fades, write_csv_header, write_csv_rows, ChannelKind, ChannelModel, Scheme, SimConfig,
};
use plnc_core::singular_fade::{constraints_for_fade, count_formula, enumerate_singular_fades, FadeJson, FadeState};

type CliResult<T> = Result<T, Box<dyn Error>>;

/// Tolerance for matching a typed fade value to a singular fade state.
const INPUT_FADE_TOL: f64 = 1e-6;

#[derive(Parser, Debug)]
#[command(name = "plnc", author, version, about = "Adaptive physical-layer network coding for the two-way relay")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "PLNC_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct SignalSet {
    /// Signal set family: PAM, QAM or PSK.
    #[arg(long, value_parser = parse_kind)]
    family: Kind,
    /// Number of points.
    #[arg(long = "M", alias = "m")]
    m: usize,
}

impl SignalSet {
    fn build(&self) -> CliResult<Constellation> {
        Ok(Constellation::build(self.family, self.m)?)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the singular fade states as JSON.
    SfsList {
        #[command(flatten)]
        set: SignalSet,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Closed-form count of singular fade states, optionally checked by enumeration.
    SfsCount {
        #[command(flatten)]
        set: SignalSet,
        #[arg(long)]
        brute_force: bool,
    },
    /// Print the standard Latin square (removes z = 1).
    LsStandard {
        #[command(flatten)]
        set: SignalSet,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve a removing Latin square for one singular fade state.
    LsSolve {
        #[command(flatten)]
        set: SignalSet,
        /// Fade state as `re,im`.
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        fade: Complex64,
        /// Search node budget per symbol count.
        #[arg(long)]
        node_budget: Option<u64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Build the codebook of removing squares for every singular fade state.
    Codebook {
        #[command(flatten)]
        set: SignalSet,
        #[arg(long)]
        node_budget: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// CSV of the selected map and its minimum cluster distance per fade.
    DistanceReport {
        #[command(flatten)]
        set: SignalSet,
        #[arg(long)]
        codebook: PathBuf,
        /// Fade state `re,im`; repeatable.
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        fade: Vec<Complex64>,
        /// Additional Rayleigh fade ratios to draw.
        #[arg(long, default_value_t = 0)]
        random: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Monte-Carlo end-to-end bit error rate.
    SimBer(SimArgs),
    /// Regenerate the bundled fixtures.
    ExportFixtures {
        #[arg(long, default_value = "crates/core/fixtures")]
        dir: PathBuf,
    },
}

#[derive(Args, Debug)]
struct SimArgs {
    /// JSON or TOML configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind)]
    family: Option<Kind>,
    #[arg(long = "M", alias = "m")]
    m: Option<usize>,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
    /// SNR grid in dB: `start:stop:step` or a comma list.
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    snr: Option<Grid>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_channel)]
    channel: Option<ChannelKind>,
    #[arg(long, allow_hyphen_values = true)]
    rician_k_db: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    link_variance_db: Option<f64>,
    #[arg(long)]
    block_fading: Option<u64>,
    /// Codebook JSON from `plnc codebook` (required for the LS scheme).
    #[arg(long)]
    codebook: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Omit the CSV header line.
    #[arg(long)]
    no_header: bool,
}

fn parse_kind(s: &str) -> Result<Kind, String> {
    s.parse().map_err(|e: plnc_core::Error| e.to_string())
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: plnc_core::Error| e.to_string())
}

fn parse_channel(s: &str) -> Result<ChannelKind, String> {
    s.parse().map_err(|e: plnc_core::Error| e.to_string())
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let (re, im) = s.split_once(',').ok_or_else(|| format!("expected re,im, got {s:?}"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?}"));
    Ok(Complex64::new(num(re)?, num(im)?))
}

#[derive(Clone, Debug)]
struct Grid(Vec<f64>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step <= 0.0 {
                return Err("grid step must be positive".into());
            }
            let n = ((stop - start) / step + 1e-9).floor() as i64;
            Ok(Grid((0..=n.max(-1)).map(|i| start + step * i as f64).collect()))
        }
        [_] => s.split(',').map(num).collect::<Result<_, _>>().map(Grid),
        _ => Err(format!("expected start:stop:step or a comma list, got {s:?}")),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn fades_json(fades: &[FadeState]) -> CliResult<String> {
    let items: Vec<FadeJson> = fades.iter().map(FadeState::to_json).collect();
    Ok(serde_json::to_string_pretty(&items)? + "\n")
}

fn load_codebook(set: &SignalSet, path: &Path) -> CliResult<Codebook> {
    let text = fs::read_to_string(path).map_err(|e| format!("reading codebook {}: {e}", path.display()))?;
    Ok(Codebook::from_json_str(set.family, set.m, &text)?)
}

fn codebook_options(m: usize, node_budget: Option<u64>) -> CodebookOptions {
    let mut opts = CodebookOptions::for_order(m);
    if node_budget.is_some() {
        opts.completion.node_budget = node_budget;
    }
    opts
}

fn find_fade(c: &Constellation, z: Complex64) -> CliResult<FadeState> {
    enumerate_singular_fades(c)
        .into_iter()
        .find(|f| (f.value() - z).norm() < INPUT_FADE_TOL)
        .ok_or_else(|| format!("{z} is not a singular fade state of {}-{}", c.size(), c.kind()).into())
}

fn sim_config(args: &SimArgs) -> CliResult<SimConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
            match path.extension().and_then(|e| e.to_str()) {
                Some("toml") => toml::from_str(&text)?,
                _ => serde_json::from_str(&text)?,
            }
        }
        None => SimConfig {
            constellation: args.family.ok_or("--family is required without --config")?,
            m: args.m.ok_or("--M is required without --config")?,
            scheme: Scheme::Ls,
            snr_grid_db: parse_grid("15:40:5")?.0,
            trials_per_point: 10_000,
            seed: 1,
            channel: ChannelModel::rician(5.0),
            block_fading: 1,
        },
    };
    if let Some(v) = args.family {
        cfg.constellation = v;
    }
    if let Some(v) = args.m {
        cfg.m = v;
    }
    if let Some(v) = args.scheme {
        cfg.scheme = v;
    }
    if let Some(v) = &args.snr {
        cfg.snr_grid_db = v.0.clone();
    }
    if let Some(v) = args.trials {
        cfg.trials_per_point = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.channel {
        cfg.channel.kind = v;
    }
    if let Some(v) = args.rician_k_db {
        cfg.channel.rician_k_db = v;
    }
    if let Some(v) = args.link_variance_db {
        cfg.channel.link_variance_db = v;
    }
    if let Some(v) = args.block_fading {
        cfg.block_fading = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sim_ber(args: &SimArgs) -> CliResult<()> {
    let cfg = sim_config(args)?;
    let set = SignalSet { family: cfg.constellation, m: cfg.m };
    let book = match (cfg.scheme, &args.codebook) {
        (Scheme::Ls, None) => {
            return Err(format!(
                "the LS scheme needs a codebook; create one with `plnc codebook --family {} --M {} -o codebook.json` and pass --codebook codebook.json",
                cfg.constellation, cfg.m
            )
            .into())
        }
        (Scheme::Ls, Some(p)) => Some(load_codebook(&set, p)?),
        (Scheme::Xor, _) => None,
    };
    info!("simulating {} {}-{} over {} SNR points", cfg.scheme, cfg.m, cfg.constellation, cfg.snr_grid_db.len());
    let points = run_ber(&cfg, book.as_ref())?;
    let mut buf = Vec::new();
    if !args.no_header {
        write_csv_header(&mut buf)?;
    }
    write_csv_rows(&mut buf, &cfg, &points)?;
    write_out(args.output.as_deref(), std::str::from_utf8(&buf)?)
}

fn distance_report(
    set: &SignalSet,
    codebook: &Path,
    fades: &[Complex64],
    random: usize,
    seed: u64,
    output: Option<&Path>,
) -> CliResult<()> {
    let c = set.build()?;
    let book = load_codebook(set, codebook)?;
    if book.is_empty() {
        return Err("codebook is empty".into());
    }
    let selector = CodebookSelector::new(&c, &book);
    let mut zs = fades.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        zs.push(sample_fades(&ChannelModel::rayleigh(), &mut rng).ratio());
    }
    let mut out = String::from("fade_re,fade_im,best_key,min_cluster_distance\n");
    for z in zs {
        let s = selector.select(z);
        out.push_str(&format!("{},{},{},{:.12}\n", z.re, z.im, book.entries()[s.index].fade, s.distance));
    }
    write_out(output, &out)
}

/// The bundled fixtures, as `(file name, contents)`.
fn fixtures() -> CliResult<Vec<(&'static str, String)>> {
    let qam16 = Constellation::build(Kind::Qam, 16)?;
    let pam4 = Constellation::build(Kind::Pam, 4)?;
    let qam4 = Constellation::build(Kind::Qam, 4)?;
    Ok(vec![
        ("qam16_standard.txt", standard_square(&qam16)?.to_text()),
        ("pam4_standard.txt", standard_square(&pam4)?.to_text()),
        ("sfs_pam4.json", fades_json(&enumerate_singular_fades(&pam4))?),
        ("sfs_qam4.json", fades_json(&enumerate_singular_fades(&qam4))?),
    ])
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::SfsList { set, output } => {
            let fades = enumerate_singular_fades(&set.build()?);
            info!("{} singular fade states", fades.len());
            write_out(output.as_deref(), &fades_json(&fades)?)
        }
        Command::SfsCount { set, brute_force } => {
            let c = set.build()?;
            let formula = count_formula(c.kind(), c.size())?;
            println!("formula: {formula}");
            if brute_force {
                let n = enumerate_singular_fades(&c).len() as u64;
                println!("enumerated: {n}");
                println!("{}", if n == formula { "AGREE" } else { "DISAGREE" });
            }
            Ok(())
        }
        Command::LsStandard { set, output } => write_out(output.as_deref(), &standard_square(&set.build()?)?.to_text()),
        Command::LsSolve { set, fade, node_budget, output } => {
            let c = set.build()?;
            let h = find_fade(&c, fade)?;
            let p = PartialSquare::from_constraints(c.size(), &constraints_for_fade(&c, &h))?;
            let done = complete_cpls(&p, &codebook_options(c.size(), node_budget).completion)?;
            info!("fade {h}: {} symbols, minimal {}, {} nodes", done.square.symbols(), done.minimal, done.nodes);
            write_out(output.as_deref(), &done.square.to_text())
        }
        Command::Codebook { set, node_budget, output } => {
            let c = set.build()?;
            let book = build_codebook(&c, &codebook_options(c.size(), node_budget))?;
            let stats = book.stats();
            info!(
                "{} entries, {} solved directly, {} need more than {} symbols (max {}), {} not proven minimal",
                stats.entries,
                stats.solved_directly,
                stats.non_minimal,
                c.size(),
                stats.max_symbols,
                stats.unproven
            );
            if stats.unproven > 0 {
                warn!("search budget reached for {} entries", stats.unproven);
            }
            fs::write(&output, book.to_json_string()?)?;
            Ok(())
        }
        Command::DistanceReport { set, codebook, fade, random, seed, output } => {
            distance_report(&set, &codebook, &fade, random, seed, output.as_deref())
        }
        Command::SimBer(args) => sim_ber(&args),
        Command::ExportFixtures { dir } => {
            fs::create_dir_all(&dir)?;
            for (name, text) in fixtures()? {
                fs::write(dir.join(name), text)?;
                info!("wrote {}", dir.join(name).display());
            }
            Ok(())
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
