//! `peekc` command-line interface: fetch, validate, annotate, simulate,
//! evaluate, sweep and visualize.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use peekc::annotate::{pagerank, rank_concepts, semantic_graph, ConceptLinkGraph, RankConfig};
use peekc::config::ModelConfig;
use peekc::data_model::{
    group_sessions, parse_events, parse_kc_titles, ColumnLayout, Dataset,
};
use peekc::evaluate::{evaluate, grid_sweep, replay_session, Objective};
use peekc::fetch::{fetch, resolve_url, FileStatus};
use peekc::learners::ModelKind;
use peekc::report::{render, PlotKind, PlotSpec};
use peekc::simulate::{generate, SyntheticConfig};
use peekc::skills::StateSnapshot;
use peekc::ModelFactory;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

#[derive(Parser)]
#[command(
    name = "peekc",
    version,
    about = "Online Bayesian engagement modelling for fragmented educational videos"
)]
struct Cli {
    /// Worker threads for evaluation and sweeps [default: logical cores]
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download train.csv/test.csv with checksum records
    Fetch {
        /// Directory to store the dataset in [default: data]
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        /// Base URL of the dataset repository [env: PEEKC_URL]
        #[arg(long)]
        url: Option<String>,
        /// Verify and record local files instead of downloading
        #[arg(long, default_value_t = false)]
        offline: bool,
    },
    /// Parse the dataset and report basic statistics
    Validate {
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
    },
    /// Rank fragment concept annotations by the 0.8/0.2 combination
    Annotate {
        /// CSV of fragment_id,kc_id,pagerank,cosine rows
        #[arg(long)]
        annotations: PathBuf,
        /// Optional inlink adjacency CSV (concept_id,inlink_id); when
        /// given, PageRank is recomputed over the semantic graph
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Concept universe size for semantic relatedness [default: graph size * 100]
        #[arg(long)]
        total_concepts: Option<u64>,
        /// Number of top concepts kept per fragment
        #[arg(long, default_value_t = 5)]
        top_n: usize,
        /// Combine raw PageRank instead of min-max normalized scores
        #[arg(long, default_value_t = false)]
        raw_pagerank: bool,
        /// Output CSV [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a seeded synthetic dataset in PEEKC layout
    Simulate {
        #[arg(long, default_value = "data")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1000)]
        learners: usize,
        #[arg(long, default_value_t = 10)]
        kcs: usize,
        #[arg(long, default_value_t = 60)]
        fragments: usize,
        #[arg(long, default_value_t = 50)]
        events_per_learner: usize,
        #[arg(long, default_value_t = 1)]
        kcs_per_fragment: usize,
        /// Mean of the ground-truth skill prior
        #[arg(long, default_value_t = 0.6)]
        skill_mean: f64,
        #[arg(long, default_value_t = 0.3)]
        beta: f64,
        #[arg(long, default_value_t = 0.8)]
        draw_probability: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Sequentially evaluate one model on the test split
    Evaluate {
        /// Model name [valid: interest, novelty, ink, kt, cosine,
        /// jaccard-c, jaccard-u, tf-binary, tf-cosine]
        #[arg(long)]
        model: Option<String>,
        /// Flat key = value configuration file
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        /// Report JSON output path
        #[arg(long)]
        report: Option<PathBuf>,
        /// Fit but do not score the first event of each session
        #[arg(long, default_value_t = false)]
        skip_first: bool,
        /// Write the learner-state snapshot of this user id
        #[arg(long)]
        export_state: Option<u64>,
        /// Snapshot output path [default: state.json]
        #[arg(long, default_value = "state.json")]
        state_out: PathBuf,
    },
    /// Exhaustive hyperparameter grid sweep on the training split
    Sweep {
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        /// Grid axis as key=v1,v2,... (repeatable)
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        /// Objective metric [valid: accuracy, precision, recall, f1]
        #[arg(long, default_value = "f1")]
        objective: String,
        /// Best configuration output path
        #[arg(long, default_value = "best.toml")]
        best_out: PathBuf,
        /// Full sweep table JSON output path
        #[arg(long)]
        table_out: Option<PathBuf>,
    },
    /// Render a learner-state snapshot as SVG
    Visualize {
        /// State snapshot JSON produced by evaluate --export-state
        #[arg(long)]
        state: PathBuf,
        /// Plot kind [valid: bar, dot, bubble, line]
        #[arg(long, default_value = "bar")]
        kind: String,
        #[arg(long, default_value_t = 15)]
        top_k: usize,
        #[arg(long, default_value_t = 800)]
        width: u32,
        #[arg(long, default_value_t = 480)]
        height: u32,
        #[arg(long, default_value = "plot.svg")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help / --version print and exit clean
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(EXIT_USAGE);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

enum CliError {
    Usage(String),
    Data(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn load_split(data_dir: &Path, name: &str) -> Result<Dataset, CliError> {
    let path = data_dir.join(name);
    let file = fs::File::open(&path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let events = parse_events(file, ColumnLayout::default())
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut ds = group_sessions(events);
    let titles_path = data_dir.join("kc_titles.csv");
    if titles_path.exists() {
        let file = fs::File::open(&titles_path)?;
        ds.kc_titles = parse_kc_titles(file)
            .map_err(|e| CliError::Data(format!("{}: {e}", titles_path.display())))?;
    }
    Ok(ds)
}

fn load_config(
    model: Option<&str>,
    config: Option<&Path>,
) -> Result<ModelConfig, CliError> {
    let mut cfg = match config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            ModelConfig::parse(&text).map_err(|e| CliError::Usage(e.to_string()))?
        }
        None => ModelConfig::default(),
    };
    if let Some(name) = model {
        cfg.model = ModelKind::parse(name).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown model `{name}` (valid: {})",
                ModelConfig::valid_models()
            ))
        })?;
    }
    Ok(cfg)
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Fetch {
            data_dir,
            url,
            offline,
        } => {
            let base = resolve_url(url.as_deref());
            let statuses = fetch(&base, &data_dir, offline)
                .map_err(|e| CliError::Data(e.to_string()))?;
            for (file, status) in statuses {
                let verb = match status {
                    FileStatus::Downloaded => "downloaded",
                    FileStatus::AlreadyPresent => "up to date",
                };
                println!("{file}: {verb}");
            }
            Ok(())
        }
        Command::Validate { data_dir } => {
            let train = load_split(&data_dir, "train.csv")?;
            let test = load_split(&data_dir, "test.csv")?;
            let overlap = train
                .sessions
                .keys()
                .filter(|u| test.sessions.contains_key(u))
                .count();
            if overlap > 0 {
                return Err(CliError::Data(format!(
                    "{overlap} user ids appear in both train and test"
                )));
            }
            let total_events = train.n_events() + test.n_events();
            let positives: usize = train
                .events()
                .chain(test.events())
                .filter(|e| e.engaged())
                .count();
            println!("train learners: {}", train.n_learners());
            println!("test learners:  {}", test.n_learners());
            println!("total events:   {total_events}");
            println!(
                "positive rate:  {:.4}",
                positives as f64 / total_events as f64
            );
            println!(
                "kc vocabulary:  {}",
                train
                    .kc_vocabulary
                    .union(&test.kc_vocabulary)
                    .count()
            );
            Ok(())
        }
        Command::Annotate {
            annotations,
            graph,
            total_concepts,
            top_n,
            raw_pagerank,
            out,
        } => run_annotate(
            &annotations,
            graph.as_deref(),
            total_concepts,
            top_n,
            raw_pagerank,
            out.as_deref(),
        ),
        Command::Simulate {
            out_dir,
            learners,
            kcs,
            fragments,
            events_per_learner,
            kcs_per_fragment,
            skill_mean,
            beta,
            draw_probability,
            seed,
        } => {
            let config = SyntheticConfig {
                n_learners: learners,
                n_kcs: kcs,
                n_fragments: fragments,
                events_per_learner,
                kcs_per_fragment,
                skill_mean,
                true_beta: beta,
                true_draw_probability: draw_probability,
                seed,
            };
            if !config.validate() {
                return Err(CliError::Usage("invalid synthetic configuration".into()));
            }
            let data = generate(&config);
            let (train, test) = data.split();
            fs::create_dir_all(&out_dir)?;
            for (name, split) in [("train.csv", &train), ("test.csv", &test)] {
                let events: Vec<_> = split.events().cloned().collect();
                let mut buf = Vec::new();
                peekc::data_model::write_events(&mut buf, &events)
                    .map_err(|e| CliError::Data(e.to_string()))?;
                fs::write(out_dir.join(name), buf)?;
            }
            fs::write(
                out_dir.join("ground_truth.json"),
                serde_json::to_vec_pretty(&data.ground_truth)
                    .map_err(|e| CliError::Data(e.to_string()))?,
            )?;
            fs::write(
                out_dir.join("true_config.toml"),
                config.true_model_config().render(),
            )?;
            println!(
                "wrote {} train and {} test learners to {}",
                train.n_learners(),
                test.n_learners(),
                out_dir.display()
            );
            Ok(())
        }
        Command::Evaluate {
            model,
            config,
            data_dir,
            report,
            skip_first,
            export_state,
            state_out,
        } => {
            let cfg = load_config(model.as_deref(), config.as_deref())?;
            let train = load_split(&data_dir, "train.csv")?;
            let test = load_split(&data_dir, "test.csv")?;
            let eval = evaluate(&cfg, &test, Some(&train), skip_first)
                .map_err(|e| CliError::Data(e.to_string()))?;
            println!(
                "model {}: acc {:.4}  prec {:.4}  rec {:.4}  f1 {:.4}  (micro, {} learners, {} events)",
                eval.model,
                eval.micro.accuracy,
                eval.micro.precision,
                eval.micro.recall,
                eval.micro.f1,
                eval.n_learners,
                eval.n_events
            );
            println!(
                "  macro: acc {:.4}  prec {:.4}  rec {:.4}  f1 {:.4}",
                eval.macro_.accuracy, eval.macro_.precision, eval.macro_.recall, eval.macro_.f1
            );
            if let Some(path) = report {
                fs::write(
                    &path,
                    serde_json::to_vec_pretty(&eval).map_err(|e| CliError::Data(e.to_string()))?,
                )?;
                println!("report written to {}", path.display());
            }
            if let Some(user_id) = export_state {
                let session = test
                    .sessions
                    .get(&user_id)
                    .or_else(|| train.sessions.get(&user_id))
                    .ok_or_else(|| CliError::Data(format!("unknown user id {user_id}")))?;
                let factory = ModelFactory::new(cfg, Some(&train))
                    .map_err(|e| CliError::Data(e.to_string()))?;
                let mut model = factory.build(user_id);
                replay_session(model.as_mut(), session, false);
                let snapshot = snapshot_of(&factory, session)?;
                fs::write(
                    &state_out,
                    serde_json::to_vec_pretty(&snapshot)
                        .map_err(|e| CliError::Data(e.to_string()))?,
                )?;
                println!("state snapshot written to {}", state_out.display());
            }
            Ok(())
        }
        Command::Sweep {
            model,
            config,
            data_dir,
            params,
            objective,
            best_out,
            table_out,
        } => {
            let cfg = load_config(model.as_deref(), config.as_deref())?;
            let objective = match objective.as_str() {
                "accuracy" => Objective::Accuracy,
                "precision" => Objective::Precision,
                "recall" => Objective::Recall,
                "f1" => Objective::F1,
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown objective `{other}` (valid: accuracy, precision, recall, f1)"
                    )))
                }
            };
            let grid = parse_grid(&params)?;
            let train = load_split(&data_dir, "train.csv")?;
            let (best_config, result) = grid_sweep(&cfg, &grid, &train, objective)
                .map_err(|e| CliError::Data(e.to_string()))?;
            for row in &result.table {
                let rendered: Vec<String> = row
                    .params
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect();
                println!("{}  ->  {:.4}", rendered.join(" "), row.objective);
            }
            println!("best objective: {:.4}", result.best.objective);
            fs::write(&best_out, best_config.render())?;
            println!("best configuration written to {}", best_out.display());
            if let Some(path) = table_out {
                fs::write(
                    &path,
                    serde_json::to_vec_pretty(&result)
                        .map_err(|e| CliError::Data(e.to_string()))?,
                )?;
            }
            Ok(())
        }
        Command::Visualize {
            state,
            kind,
            top_k,
            width,
            height,
            out,
        } => {
            let kind = PlotKind::parse(&kind).ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown plot kind `{kind}` (valid: bar, dot, bubble, line)"
                ))
            })?;
            let bytes = fs::read(&state)
                .map_err(|e| CliError::Data(format!("{}: {e}", state.display())))?;
            let snapshot: StateSnapshot = serde_json::from_slice(&bytes)
                .map_err(|e| CliError::Data(format!("{}: {e}", state.display())))?;
            let spec = PlotSpec {
                kind,
                top_k,
                width,
                height,
                title: format!("Learner {}", snapshot.user_id),
            };
            let export: Vec<_> = snapshot.skills.iter().take(top_k).copied().collect();
            let svg = render(&export, None, &spec)
                .map_err(|e| CliError::Data(e.to_string()))?;
            fs::write(&out, svg)?;
            println!("plot written to {}", out.display());
            Ok(())
        }
    }
}

fn snapshot_of(factory: &ModelFactory, session: &peekc::Session) -> Result<StateSnapshot, CliError> {
    use peekc::learners::{InkModel, InterestModel, NoveltyModel};
    use peekc::EngagementModel as _;
    let c = &factory.config;
    let state = match c.model {
        ModelKind::Interest => {
            let mut m = InterestModel::new(session.user_id, c.interest);
            session.events.iter().for_each(|e| m.fit(e));
            m.state
        }
        ModelKind::Novelty => {
            let mut m = NoveltyModel::new(session.user_id, c.novelty);
            session.events.iter().for_each(|e| m.fit(e));
            m.state
        }
        ModelKind::Ink => {
            let mut m = InkModel::new(session.user_id, c.interest, c.novelty, c.ink);
            session.events.iter().for_each(|e| m.fit(e));
            m.novelty.state
        }
        _ => {
            return Err(CliError::Usage(
                "state export is only available for interest, novelty and ink".into(),
            ))
        }
    };
    Ok(StateSnapshot::from_state(&state))
}

fn parse_grid(params: &[String]) -> Result<Vec<(String, Vec<f64>)>, CliError> {
    params
        .iter()
        .map(|spec| {
            let (key, values) = spec
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("bad --param `{spec}`, want key=v1,v2")))?;
            let values: Result<Vec<f64>, _> =
                values.split(',').map(|v| v.trim().parse::<f64>()).collect();
            match values {
                Ok(values) if !values.is_empty() => Ok((key.trim().to_string(), values)),
                _ => Err(CliError::Usage(format!(
                    "bad values in --param `{spec}`"
                ))),
            }
        })
        .collect()
}

fn run_annotate(
    annotations: &Path,
    graph: Option<&Path>,
    total_concepts: Option<u64>,
    top_n: usize,
    raw_pagerank: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    // fragment_id,kc_id,pagerank,cosine rows
    let text = fs::read_to_string(annotations)
        .map_err(|e| CliError::Data(format!("{}: {e}", annotations.display())))?;
    let mut per_fragment: BTreeMap<u64, Vec<(u64, f64, f64)>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(CliError::Data(format!(
                "{}:{}: expected fragment_id,kc_id,pagerank,cosine",
                annotations.display(),
                i + 1
            )));
        }
        let parse = |f: &str| {
            f.parse::<f64>().map_err(|_| {
                CliError::Data(format!(
                    "{}:{}: non-numeric field `{f}`",
                    annotations.display(),
                    i + 1
                ))
            })
        };
        per_fragment.entry(parse(fields[0])? as u64).or_default().push((
            parse(fields[1])? as u64,
            parse(fields[2])?,
            parse(fields[3])?,
        ));
    }
    // optional recomputed PageRank over the inlink semantic graph
    let recomputed = match graph {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let mut inlinks: BTreeMap<u64, std::collections::BTreeSet<u64>> = BTreeMap::new();
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let (concept, inlink) = line
                    .trim()
                    .split_once(',')
                    .ok_or_else(|| CliError::Data(format!("bad adjacency line `{line}`")))?;
                let concept = concept.trim().parse::<u64>().map_err(|_| {
                    CliError::Data(format!("bad concept id `{concept}`"))
                })?;
                let inlink = inlink.trim().parse::<u64>().map_err(|_| {
                    CliError::Data(format!("bad inlink id `{inlink}`"))
                })?;
                inlinks.entry(concept).or_default().insert(inlink);
            }
            let total = total_concepts.unwrap_or(inlinks.len() as u64 * 100);
            let link_graph = ConceptLinkGraph::new(inlinks, total);
            let weighted = semantic_graph(&link_graph)
                .map_err(|e| CliError::Data(e.to_string()))?;
            let result = pagerank(&weighted, 0.85, 1e-10, 200);
            if !result.converged {
                eprintln!("warning: PageRank did not converge within 200 iterations");
            }
            Some(result.scores)
        }
        None => None,
    };
    let mut output = String::from("fragment_id,kc_id,pagerank,cosine,combined,rank\n");
    let rank_config = RankConfig {
        normalize_pagerank: !raw_pagerank,
        ..Default::default()
    };
    for (fragment_id, mut rows) in per_fragment {
        if let Some(scores) = &recomputed {
            for row in &mut rows {
                row.1 = scores.get(&row.0).copied().unwrap_or(0.0);
            }
        }
        let ranked = rank_concepts(&rows, top_n, rank_config)
            .map_err(|e| CliError::Data(e.to_string()))?;
        for (rank, ann) in ranked.iter().enumerate() {
            output.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6},{}\n",
                fragment_id,
                ann.kc_id,
                ann.pagerank,
                ann.cosine,
                ann.combined,
                rank + 1
            ));
        }
    }
    match out {
        Some(path) => fs::write(path, output)?,
        None => print!("{output}"),
    }
    Ok(())
}
