use std::path::Path;

use anyhow::Context;
use bgmem_core::eval::{build_memories, evaluate, load_locomo, parse_sweep, sweep, Dataset, EvalOptions, SweepParam};
use bgmem_core::model::{validate_memory, LongTermMemory};
use bgmem_core::retrieval::{RetrievalError, Selection};

use crate::config::{self, AppConfig, Layers, ENV_PREFIX};
use crate::engine::{load_conversations, read_snapshot, snapshot_path, write_snapshot, Engine};
use crate::{report, serve, Cli, Command, ConfigArgs, EvalArgs, Failure, GlobalArgs, IngestArgs, QueryArgs, SweepArgs};

pub fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let g = &cli.global;
    let cfg = g.resolve(Layers::process_env())?;
    match &cli.command {
        Command::Ingest(a) => ingest(g, a, &cfg),
        Command::Query(a) => query(g, a, &cfg),
        Command::Eval(a) => eval(a, &cfg),
        Command::Sweep(a) => run_sweep(a, &cfg),
        Command::Serve(a) => {
            let mut cfg = cfg;
            if let Some(b) = &a.bind {
                cfg.serve.bind = b.clone();
                cfg.validate().map_err(Failure::usage)?;
            }
            serve::run_blocking(&cfg, g.snapshot.clone())
        }
        Command::Config(a) => show_config(a, &cfg),
    }
}

/// Backend construction fails only on configuration problems, such as an unset API key variable.
fn engine(cfg: &AppConfig) -> Result<Engine, Failure> {
    Engine::from_config(cfg).map_err(|e| Failure::usage(format!("{e:#}")))
}

fn require_file(path: &Path, what: &str) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage(format!("{what} {} does not exist or is not a file", path.display())))
    }
}

fn show_config(a: &ConfigArgs, cfg: &AppConfig) -> Result<(), Failure> {
    if a.keys {
        for k in config::keys() {
            let (s, key) = k.split_once('.').expect("keys are dotted");
            println!("{k:<32} {ENV_PREFIX}{}_{}", s.to_uppercase(), key.to_uppercase());
        }
    } else if a.example {
        print!("{}", AppConfig::example().to_toml());
    } else {
        print!("{}", cfg.to_toml());
    }
    Ok(())
}

fn ingest(g: &GlobalArgs, a: &IngestArgs, cfg: &AppConfig) -> Result<(), Failure> {
    require_file(&a.input, "input file")?;
    let mut convs = load_conversations(&a.input)?;
    if let Some(id) = &a.conversation {
        convs.retain(|c| &c.id == id);
        if convs.is_empty() {
            return Err(Failure::usage(format!("no conversation {id:?} in {}", a.input.display())));
        }
    }
    if g.snapshot.is_some() && convs.len() > 1 {
        return Err(Failure::usage(format!(
            "--snapshot names one file but {} holds {} conversations; choose one with --conversation or use --out-dir",
            a.input.display(),
            convs.len()
        )));
    }
    let engine = engine(cfg)?;
    let dir = a.out_dir.clone().unwrap_or_else(|| cfg.paths.snapshot_dir.clone());
    let mut rows = Vec::new();
    let mut written = Vec::new();
    let mut tokens = 0;
    for c in &convs {
        let path = g.snapshot.clone().unwrap_or_else(|| snapshot_path(&dir, &c.id));
        let existing = if path.exists() {
            log::info!("extending existing snapshot {}", path.display());
            read_snapshot(&path)?
        } else {
            LongTermMemory::new()
        };
        let (memory, rep) = engine.ingest(&existing, &c.sessions).with_context(|| format!("conversation {}", c.id))?;
        for s in &rep.sessions {
            for w in &s.warnings {
                log::warn!("{} {}: {w}", c.id, s.session_id);
            }
        }
        write_snapshot(&path, &memory)?;
        tokens += rep.usage.total();
        rows.push((c.id.clone(), c.sessions.len(), rep.stats));
        written.push(path);
    }
    print!("{}", report::stats_table(&rows));
    println!("construction tokens {tokens}");
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn query(g: &GlobalArgs, a: &QueryArgs, cfg: &AppConfig) -> Result<(), Failure> {
    let path = g.snapshot.as_deref().ok_or_else(|| Failure::usage("query needs --snapshot FILE"))?;
    require_file(path, "snapshot")?;
    let memory = read_snapshot(path)?;
    let violations = validate_memory(&memory);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().take(5).map(ToString::to_string).collect();
        return Err(anyhow::anyhow!("snapshot {} is invalid: {}", path.display(), list.join("; ")).into());
    }
    let engine = engine(cfg)?;
    let out = match engine.query(&memory, &a.question) {
        Ok(o) => o,
        Err(RetrievalError::EmptyQuery) => return Err(Failure::usage("the question is empty")),
        Err(e) => return Err(anyhow::Error::new(e).into()),
    };
    if a.explain {
        println!("{}", serde_json::to_string_pretty(&out).context("serializing the explanation")?);
    } else {
        println!("{}", out.answer);
    }
    Ok(())
}

/// Reject a grid value the stopping rule cannot take before any work starts.
fn check_grid(opts: &EvalOptions, param: SweepParam, values: &[f64]) -> Result<(), Failure> {
    for &v in values {
        let mut r = opts.retrieval.clone();
        param.apply(&mut r, v);
        r.validate().map_err(|e| Failure::usage(format!("{}={v}: {e}", param.as_str())))?;
    }
    Ok(())
}

fn load_dataset(path: &Path) -> Result<Dataset, Failure> {
    require_file(path, "dataset")?;
    Ok(load_locomo(path).map_err(anyhow::Error::new)?)
}

fn eval(a: &EvalArgs, cfg: &AppConfig) -> Result<(), Failure> {
    let mut opts: EvalOptions = cfg.eval_options();
    if a.no_judge {
        opts.judge = false;
    }
    if let Some(k) = a.top_k {
        if k == 0 {
            return Err(Failure::usage("--top-k must be >= 1"));
        }
        opts.retrieval.selection = Selection::TopK(k);
    }
    let grid = a.sweep.as_deref().map(parse_sweep).transpose().map_err(Failure::usage)?;
    if let Some((param, values)) = &grid {
        check_grid(&opts, *param, values)?;
    }
    let dataset = load_dataset(&a.dataset)?;
    let engine = engine(cfg)?;
    let built = build_memories(&dataset, &engine.backend);
    let r = evaluate(&dataset, &built, &engine.backend, engine.embedder.as_ref(), &opts);
    let out = a.out.clone().unwrap_or_else(|| cfg.paths.out_dir.clone());
    let mut files = report::write_eval(&out, &r)?;
    print!("{}", report::eval_table(&r));
    if r.status != "complete" {
        log::warn!("{} question(s) or conversation(s) failed; see the error column of records.csv", r.failures);
    }
    if let Some((param, values)) = grid {
        let rows = sweep(&dataset, &built, &engine.backend, engine.embedder.as_ref(), &opts, param, &values)
            .map_err(Failure::usage)?;
        files.extend(report::write_sweep(&out, &rows)?);
        print!("{}", report::sweep_table(&rows));
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn run_sweep(a: &SweepArgs, cfg: &AppConfig) -> Result<(), Failure> {
    let (param, values) = parse_sweep(&a.param).map_err(Failure::usage)?;
    check_grid(&cfg.eval_options(), param, &values)?;
    let dataset = load_dataset(&a.dataset)?;
    let engine = engine(cfg)?;
    let built = build_memories(&dataset, &engine.backend);
    let rows = sweep(&dataset, &built, &engine.backend, engine.embedder.as_ref(), &cfg.eval_options(), param, &values)
        .map_err(Failure::usage)?;
    let out = a.out.clone().unwrap_or_else(|| cfg.paths.out_dir.clone());
    let files = report::write_sweep(&out, &rows)?;
    print!("{}", report::sweep_table(&rows));
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
