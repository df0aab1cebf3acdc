use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use scriptoria::config::Settings;
use scriptoria::document::{binarize_auto, load_gray, Medium};
use scriptoria::eval::{
    distance_matrix_csv, evaluate_with_vectors, load_corpus, read_manifest, truth_sidecar,
    write_manifest, CorpusEntry, EvalConfig,
};
use scriptoria::features::NormalizationMode;
use scriptoria::layout::analyze;
use scriptoria::matcher::{search_template_until, Embedder, TemplateQuery};
use scriptoria::synth::{generate, generate_corpus, CorpusSpec, GenConfig, StripePlan, WriterFamily, WriterProfile};
use scriptoria::Error;
use scriptoria_cli::error::{AppError, AppResult};
use scriptoria_cli::server::{serve, AppState};
use scriptoria_cli::store::{to_json_bytes, write_atomic, DocFolder, Store};
use scriptoria_cli::workflow::{self, content_id, layout_config};

/// Handwriting measurement: layout zones, word gaps, character search and writer comparison.
///
/// Exit status: 0 success, 1 usage, 2 I/O, 3 validation, 4 analysis.
#[derive(Parser)]
#[command(name = "scriptoria", version)]
struct Cli {
    /// JSON settings file (matcher, layout, mode, threshold, search budget, CORS origin).
    #[arg(long, global = true, env = "SCRIPTORIA_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Binarize and detect lines and words; prints the layout JSON.
    Analyze {
        image: PathBuf,
        /// Global word-gap threshold in pixels.
        #[arg(long)]
        so: Option<usize>,
        /// Document folder to write all artifacts into.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        mode: Option<NormalizationMode>,
        #[arg(long, default_value = "paper-scan", value_parser = parse_medium)]
        medium: Medium,
    },
    /// Search an image for a template crop; prints matches JSON.
    Search {
        image: PathBuf,
        #[arg(long)]
        template: PathBuf,
        #[arg(long = "tc")]
        t_c: Option<f64>,
        #[arg(long)]
        run_length: Option<usize>,
        #[arg(long, default_value = "template")]
        label: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the stored feature vectors of two document folders.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        mode: Option<NormalizationMode>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pairwise same/different-writer evaluation over a manifest.
    Evaluate {
        /// CSV with columns path,writer_id.
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated character labels to search in every document.
        #[arg(long, value_delimiter = ',', required = true)]
        templates: Vec<String>,
        #[arg(long, default_value_t = 0.3)]
        calib_frac: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        so: Option<usize>,
        #[arg(long = "tc")]
        t_c: Option<f64>,
        #[arg(long)]
        run_length: Option<usize>,
        #[arg(long)]
        mode: Option<NormalizationMode>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the document distance matrix as CSV.
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Generate synthetic pages with ground truth.
    Gen {
        #[arg(long)]
        out: PathBuf,
        /// Corpus description JSON (family, docs_per_writer, page); replaces the sizing flags.
        #[arg(long, conflicts_with = "profile")]
        corpus: Option<PathBuf>,
        /// Render one page for this writer profile instead of a corpus.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        writers: usize,
        #[arg(long, default_value_t = 4)]
        docs: usize,
        #[arg(long, default_value_t = 3.0)]
        separation: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        lines: usize,
        #[arg(long, default_value_t = 6)]
        words: usize,
        #[arg(long, default_value_t = 1)]
        scale: usize,
        /// Plant this many exact-copy stripes per page.
        #[arg(long, default_value_t = 0)]
        stripes: usize,
        #[arg(long, default_value_t = 6)]
        stripe_hits: usize,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "SCRIPTORIA_ROOT")]
        root: PathBuf,
        #[arg(long, env = "SCRIPTORIA_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

fn parse_medium(s: &str) -> Result<Medium, String> {
    match s {
        "paper-scan" => Ok(Medium::PaperScan),
        "tablet" => Ok(Medium::Tablet),
        _ => Err(format!("expected paper-scan or tablet, got {s}")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn emit<T: serde::Serialize>(value: &T, out: Option<&Path>) -> AppResult<()> {
    let bytes = to_json_bytes(value)?;
    if let Some(path) = out {
        write_atomic(path, &bytes).map_err(|e| Error::io(path, e))?;
    }
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}

fn read_file(path: &Path) -> AppResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e).into())
}

fn run(cli: Cli) -> AppResult<()> {
    let settings = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    match cli.command {
        Command::Analyze {
            image,
            so,
            out,
            mode,
            medium,
        } => {
            let bytes = read_file(&image)?;
            let s = Settings {
                layout: layout_config(&settings, so),
                ..settings.clone()
            };
            match out {
                Some(dir) => {
                    let folder = DocFolder::new(dir);
                    let (_, layout) = workflow::ingest(&folder, &content_id(&bytes), &bytes, medium, &s)?;
                    let mode = mode.unwrap_or(s.mode);
                    if let Err(e) = workflow::features(&folder, mode) {
                        log::warn!("no feature vector written: {e}");
                    }
                    emit(&layout, None)
                }
                None => {
                    let gray = scriptoria::document::decode_gray(&bytes)?;
                    let (img, _) = binarize_auto(&gray);
                    emit(&analyze(&img, &s.layout), None)
                }
            }
        }
        Command::Search {
            image,
            template,
            t_c,
            run_length,
            label,
            out,
        } => {
            let mut cfg = settings.matcher.clone();
            if let Some(t) = t_c {
                cfg.t_c = t;
            }
            if let Some(r) = run_length {
                cfg.run_length = r;
            }
            cfg.validate()?;
            let (img, _) = binarize_auto(&load_gray(&image)?);
            let (patch, _) = binarize_auto(&load_gray(&template)?);
            let query = TemplateQuery::from_patch(label, patch)?;
            let layout = analyze(&img, &settings.layout);
            let bands: Vec<_> = layout.lines.iter().map(|l| l.band).collect();
            let embedder = Embedder::from_kind(&cfg.embedder)?;
            let outcome = search_template_until(&img, &bands, &query, &cfg, &embedder, None)?;
            emit(&outcome, out.as_deref())
        }
        Command::Compare {
            a,
            b,
            threshold,
            mode,
            out,
        } => {
            let threshold = threshold.unwrap_or(settings.threshold);
            if !(threshold > 0.0) {
                return Err(AppError::BadRequest(format!("threshold must be positive, got {threshold}")));
            }
            let r = workflow::compare_folders(
                &DocFolder::new(a),
                &DocFolder::new(b),
                mode.unwrap_or(settings.mode),
                threshold,
            )?;
            emit(&r, out.as_deref())
        }
        Command::Evaluate {
            manifest,
            templates,
            calib_frac,
            seed,
            so,
            t_c,
            run_length,
            mode,
            out,
            matrix,
        } => {
            let cfg = EvalConfig {
                templates: templates.into_iter().filter(|t| !t.is_empty()).collect(),
                so,
                t_c: t_c.unwrap_or(settings.matcher.t_c),
                run_length: run_length.unwrap_or(settings.matcher.run_length),
                mode: mode.unwrap_or(settings.mode),
                calib_frac,
                seed,
                embedder: settings.matcher.embedder.clone(),
            };
            let entries = read_manifest(&manifest)?;
            let (report, vectors) = evaluate_with_vectors(load_corpus(&entries), &cfg)?;
            if let Some(path) = matrix {
                let csv = distance_matrix_csv(&vectors)?;
                write_atomic(&path, csv.as_bytes()).map_err(|e| Error::io(&path, e))?;
            }
            emit(&report, out.as_deref())
        }
        Command::Gen {
            out,
            corpus,
            profile,
            writers,
            docs,
            separation,
            seed,
            lines,
            words,
            scale,
            stripes,
            stripe_hits,
        } => {
            let page = GenConfig {
                lines,
                words_per_line: words,
                canvas_width: 1400,
                canvas_height: 1100,
                scale,
                stripes: (stripes > 0).then(|| StripePlan::standard(stripes, stripe_hits)),
                ..GenConfig::default()
            };
            if let Some(profile) = profile {
                let p: WriterProfile = serde_json::from_slice(&read_file(&profile)?)?;
                let (img, truth) = generate(&p, seed, &page)?;
                img.to_gray().save_png(&out)?;
                let side = truth_sidecar(&out);
                write_atomic(&side, &to_json_bytes(&truth)?).map_err(|e| Error::io(&side, e))?;
                return Ok(());
            }
            let spec = match corpus {
                Some(p) => serde_json::from_slice(&read_file(&p)?)?,
                None => CorpusSpec {
                    family: WriterFamily {
                        writers,
                        separation,
                        seed,
                    },
                    docs_per_writer: docs,
                    page,
                },
            };
            write_corpus(&out, &spec)
        }
        Command::Serve { root, port, host } => {
            let state = Arc::new(AppState::new(Store::open(root)?, settings)?);
            let rt = tokio::runtime::Runtime::new().map_err(|e| AppError::Internal(e.to_string()))?;
            rt.block_on(serve(state, SocketAddr::new(host, port)))
        }
    }
}

fn write_corpus(out: &Path, spec: &CorpusSpec) -> AppResult<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let pages = generate_corpus(spec)?;
    let mut entries = Vec::with_capacity(pages.len());
    for p in &pages {
        let name = format!("{}.png", p.name);
        let path = out.join(&name);
        p.image.to_gray().save_png(&path)?;
        let side = truth_sidecar(&path);
        write_atomic(&side, &to_json_bytes(&p.truth)?).map_err(|e| Error::io(&side, e))?;
        entries.push(CorpusEntry {
            path: name.into(),
            writer_id: p.writer_id.clone(),
        });
    }
    write_manifest(out.join("manifest.csv"), &entries)?;
    let profiles = spec.family.profiles()?;
    for (name, bytes) in [
        ("corpus.json", to_json_bytes(spec)?),
        ("profiles.json", to_json_bytes(&profiles)?),
    ] {
        let p = out.join(name);
        write_atomic(&p, &bytes).map_err(|e| Error::io(&p, e))?;
    }
    eprintln!("wrote {} pages to {}", pages.len(), out.display());
    Ok(())
}
