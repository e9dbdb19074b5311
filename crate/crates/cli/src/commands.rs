//! The four subcommands: train, eval, query, analyze-radius.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sphere_kge::checkpoint::Checkpoint;
use sphere_kge::eval::{
    evaluate, format_metrics_row, query_distances, radius_occurrence, RetrievalMode,
    BASELINE_LS, METRICS_CSV_HEADER,
};
use sphere_kge::kg::{EntityId, KnowledgeGraph, QueryDirection};
use sphere_kge::model::{ModelConfig, SphereModel};
use sphere_kge::train::{fit, format_log_row, TRAINING_LOG_HEADER};
use sphere_kge::SphereError;

/// Failures mapped onto the process exit codes: 1 usage, 2 data, 3 numeric.
#[derive(Debug)]
pub enum AppError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Data(_) => 2,
            AppError::Numeric(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            AppError::Usage(m) | AppError::Data(m) | AppError::Numeric(m) => m,
        }
    }
}

impl From<SphereError> for AppError {
    fn from(e: SphereError) -> Self {
        match &e {
            SphereError::InvalidConfig { .. } => AppError::Usage(e.to_string()),
            SphereError::NonFinite(_) | SphereError::Diverged { .. } => {
                AppError::Numeric(e.to_string())
            }
            _ => AppError::Data(e.to_string()),
        }
    }
}

impl From<crate::config::ConfigError> for AppError {
    fn from(e: crate::config::ConfigError) -> Self {
        AppError::Usage(e.to_string())
    }
}

fn io_data(context: &str, e: std::io::Error) -> AppError {
    AppError::Data(format!("{context}: {e}"))
}

/// `--data`, or the `SPHERE_KGE_DATA` environment variable.
pub fn resolve_data_dir(flag: Option<PathBuf>) -> Result<PathBuf, AppError> {
    flag.or_else(|| std::env::var_os("SPHERE_KGE_DATA").map(PathBuf::from))
        .ok_or_else(|| {
            AppError::Usage(
                "no data directory: pass --data or set SPHERE_KGE_DATA".to_owned(),
            )
        })
}

/// Parse `--mode sphere,top_l=1,3` / `--l 1,3` into retrieval modes.
///
/// Tokens are `sphere`, `top_l=<n>`, or bare integers (shorthand for more
/// top-l values). Duplicates collapse, order is preserved.
pub fn parse_modes(mode: Option<&str>, l_list: Option<&str>) -> Result<Vec<RetrievalMode>, AppError> {
    let mut modes = Vec::new();
    let mut push = |m: RetrievalMode| {
        if !modes.contains(&m) {
            modes.push(m);
        }
    };
    if let Some(mode) = mode {
        for token in mode.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            if token == "sphere" {
                push(RetrievalMode::Sphere);
            } else if let Some(l) = token.strip_prefix("top_l=") {
                let l: usize = l.parse().map_err(|_| {
                    AppError::Usage(format!("bad top_l value `{l}` in --mode"))
                })?;
                push(RetrievalMode::TopL(l));
            } else if let Ok(l) = token.parse::<usize>() {
                push(RetrievalMode::TopL(l));
            } else {
                return Err(AppError::Usage(format!(
                    "bad --mode token `{token}` (expected `sphere`, `top_l=<n>`, or an integer)"
                )));
            }
        }
    }
    if let Some(l_list) = l_list {
        for token in l_list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let l: usize = token
                .parse()
                .map_err(|_| AppError::Usage(format!("bad --l value `{token}`")))?;
            push(RetrievalMode::TopL(l));
        }
    }
    if modes.is_empty() {
        modes.push(RetrievalMode::Sphere);
        modes.extend(BASELINE_LS.iter().map(|&l| RetrievalMode::TopL(l)));
    }
    if modes.iter().any(|m| matches!(m, RetrievalMode::TopL(0))) {
        return Err(AppError::Usage("top_l requires l ≥ 1".to_owned()));
    }
    Ok(modes)
}

fn load_graph(dir: &Path) -> Result<KnowledgeGraph, AppError> {
    let kg = KnowledgeGraph::load_dir(dir)?;
    log::info!(
        "loaded {}: |E|={} |R|={} train/valid/test = {}/{}/{}",
        dir.display(),
        kg.n_entities(),
        kg.n_relations(),
        kg.train.len(),
        kg.valid.len(),
        kg.test.len()
    );
    Ok(kg)
}

fn load_checkpoint_for(kg: &KnowledgeGraph, path: &Path) -> Result<Checkpoint, AppError> {
    let ckpt = Checkpoint::load_from_path(path)?;
    let found = kg.vocab.stable_hash();
    if ckpt.vocab_hash != found {
        return Err(SphereError::VocabHashMismatch { expected: ckpt.vocab_hash, found }.into());
    }
    Ok(ckpt)
}

pub struct TrainArgs {
    pub config_path: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub log_path: Option<PathBuf>,
    pub dump_vocab: Option<PathBuf>,
}

pub fn cmd_train(args: TrainArgs) -> Result<(), AppError> {
    let mut config = match &args.config_path {
        Some(path) => crate::config::load_config(path)?,
        None => ModelConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;

    let data_dir = resolve_data_dir(args.data)?;
    let kg = load_graph(&data_dir)?;

    let log_path = args
        .log_path
        .unwrap_or_else(|| args.out.with_extension("log.csv"));
    let mut log_file = BufWriter::new(
        File::create(&log_path).map_err(|e| io_data(&log_path.display().to_string(), e))?,
    );
    writeln!(log_file, "{TRAINING_LOG_HEADER}").map_err(|e| io_data("training log", e))?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let seed = config.seed;
    let steps = config.steps;
    let mut model = SphereModel::init(config, kg.n_entities(), kg.n_relations(), &mut rng)?;
    let mut first_loss = None;
    let mut last_loss = None;
    let mut log_err = None;
    fit(&mut model, &kg, &mut rng, |row| {
        first_loss.get_or_insert(row.loss);
        last_loss = Some(row.loss);
        if let Err(e) = writeln!(log_file, "{}", format_log_row(row)) {
            log_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_err {
        return Err(io_data("training log", e));
    }
    log_file.flush().map_err(|e| io_data("training log", e))?;

    let ckpt = Checkpoint {
        model,
        vocab_hash: kg.vocab.stable_hash(),
        trained_steps: steps as u64,
    };
    ckpt.save_to_path(&args.out)?;

    if let Some(dir) = args.dump_vocab {
        std::fs::create_dir_all(&dir).map_err(|e| io_data(&dir.display().to_string(), e))?;
        let ents = dir.join("entities.tsv");
        kg.vocab
            .write_entities_tsv(BufWriter::new(
                File::create(&ents).map_err(|e| io_data(&ents.display().to_string(), e))?,
            ))?;
        let rels = dir.join("relations.tsv");
        kg.vocab
            .write_relations_tsv(BufWriter::new(
                File::create(&rels).map_err(|e| io_data(&rels.display().to_string(), e))?,
            ))?;
    }

    println!(
        "trained {steps} step(s) (seed {seed}); loss {} -> {}; checkpoint: {}; log: {}",
        first_loss.map(|l| format!("{l:.6}")).unwrap_or_else(|| "-".into()),
        last_loss.map(|l| format!("{l:.6}")).unwrap_or_else(|| "-".into()),
        args.out.display(),
        log_path.display(),
    );
    Ok(())
}

pub struct EvalArgs {
    pub ckpt: PathBuf,
    pub data: Option<PathBuf>,
    pub mode: Option<String>,
    pub l: Option<String>,
    pub out: Option<PathBuf>,
}

pub fn cmd_eval(args: EvalArgs) -> Result<(), AppError> {
    let modes = parse_modes(args.mode.as_deref(), args.l.as_deref())?;
    let data_dir = resolve_data_dir(args.data)?;
    let kg = load_graph(&data_dir)?;
    let ckpt = load_checkpoint_for(&kg, &args.ckpt)?;
    let reports = evaluate(&ckpt.model, &kg, &modes)?;
    let mut csv = String::new();
    csv.push_str(METRICS_CSV_HEADER);
    csv.push('\n');
    for report in &reports {
        csv.push_str(&format_metrics_row(report));
        csv.push('\n');
    }
    match args.out {
        Some(path) => std::fs::write(&path, csv)
            .map_err(|e| io_data(&path.display().to_string(), e))?,
        None => print!("{csv}"),
    }
    Ok(())
}

pub struct QueryArgs {
    pub ckpt: PathBuf,
    pub data: Option<PathBuf>,
    pub direction: QueryDirection,
    pub anchor: String,
    pub relation: String,
}

pub fn cmd_query(args: QueryArgs) -> Result<(), AppError> {
    let data_dir = resolve_data_dir(args.data)?;
    let kg = load_graph(&data_dir)?;
    let ckpt = load_checkpoint_for(&kg, &args.ckpt)?;
    let anchor = kg.vocab.entity_id(&args.anchor).ok_or_else(|| {
        AppError::from(SphereError::UnknownEntityName {
            name: args.anchor.clone(),
            candidates: nearest_names(&args.anchor, kg.vocab.entity_names()),
        })
    })?;
    let rel = kg.vocab.relation_id(&args.relation).ok_or_else(|| {
        AppError::from(SphereError::UnknownRelationName {
            name: args.relation.clone(),
            candidates: nearest_names(&args.relation, kg.vocab.relation_names()),
        })
    })?;
    let distances = query_distances(&ckpt.model, args.direction, anchor, rel)?;
    let r_anchor = ckpt.model.radius(anchor);
    let mut retrieved: Vec<EntityId> = (0..distances.len() as EntityId)
        .filter(|&e| distances[e as usize] <= r_anchor + ckpt.model.radius(e))
        .collect();
    retrieved.sort_by(|&a, &b| {
        distances[a as usize]
            .partial_cmp(&distances[b as usize])
            .expect("NaN distance")
            .then(a.cmp(&b))
    });
    let mut stdout = std::io::stdout().lock();
    for e in retrieved {
        writeln!(stdout, "{}", kg.vocab.entity_name(e).unwrap_or("?"))
            .map_err(|e| io_data("stdout", e))?;
    }
    Ok(())
}

pub struct AnalyzeRadiusArgs {
    pub ckpt: PathBuf,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub fn cmd_analyze_radius(args: AnalyzeRadiusArgs) -> Result<(), AppError> {
    let data_dir = resolve_data_dir(args.data)?;
    let kg = load_graph(&data_dir)?;
    let ckpt = load_checkpoint_for(&kg, &args.ckpt)?;
    let stats = radius_occurrence(&ckpt.model, &kg);
    let mut csv = String::new();
    csv.push_str(&format!("# spearman={:.6}\n", stats.spearman));
    csv.push_str("occurrence,n_entities,mean_radius\n");
    for b in &stats.buckets {
        csv.push_str(&format!("{},{},{:.6}\n", b.occurrence, b.n_entities, b.mean_radius));
    }
    match args.out {
        Some(path) => std::fs::write(&path, csv)
            .map_err(|e| io_data(&path.display().to_string(), e))?,
        None => print!("{csv}"),
    }
    Ok(())
}

/// Up to three vocabulary names closest to `target` by edit distance.
fn nearest_names<'a>(target: &str, names: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut scored: Vec<(usize, &str)> =
        names.map(|n| (levenshtein(target, n), n)).collect();
    scored.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(b.1)));
    scored.into_iter().take(3).map(|(_, n)| n.to_owned()).collect()
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
