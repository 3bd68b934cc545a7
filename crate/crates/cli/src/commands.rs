use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use vulspg::embed::train_skipgram;
use vulspg::frontend::Ast;
use vulspg::graphs::export::{cfg_dot, cfg_json, cpg_dot, cpg_json, pdg_dot, pdg_json};
use vulspg::graphs::QualifiedStmt;
use vulspg::pipeline::{
    coverage_report, detect_program, evaluate, generate_corpus, predict_all, pretraining_sentences, read_unit,
    split_dataset, train, ProgramSpgs,
};
use vulspg::slicer::slice;
use vulspg::syvc::{extract_syvcs, load_api_list, parse_kinds};
use vulspg::{build_cpg, DatasetManifest, Embeddings, Metrics, Model, PipelineConfig, Spg, SpgOptions, SyvcKind, VulnerableLines};

use crate::{Cli, Command, Format, GraphKind, Level};

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON value") + "\n"
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn options(cfg: &PipelineConfig, kinds: Option<&str>, api: Option<&Path>) -> Result<SpgOptions> {
    let mut opts = cfg.spg_options()?;
    if let Some(k) = kinds {
        opts.kinds = parse_kinds(k)?;
    }
    if let Some(a) = api {
        opts.api = load_api_list(a)?;
    }
    Ok(opts)
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Parse { file, emit_ast } => {
            let unit = read_unit(file)?;
            write_or_print(emit_ast.as_deref(), &pretty(&unit.ast.to_json(Ast::ROOT)))
        }
        Command::Graph { file, emit, format, out } => graph(file, *emit, *format, out.as_deref()),
        Command::Syvc { file, kinds, api } => {
            let opts = options(&cfg, kinds.as_deref(), api.as_deref())?;
            let unit = read_unit(file)?;
            for s in extract_syvcs(&unit, &opts.api, &opts.kinds) {
                println!("{}\t{}\t{}:{}", s.kind, s.element, s.file, s.line);
            }
            Ok(())
        }
        Command::Slice { file, criterion, api } => slice_cmd(&cfg, file, criterion, api.as_deref()),
        Command::Spg { files, kinds, api, labels, out } => {
            spg_cmd(&cfg, files, kinds.as_deref(), api.as_deref(), labels.as_deref(), out.as_deref())
        }
        Command::Pretrain { corpus, dim, out } => pretrain(&cfg, corpus, *dim, out),
        Command::Train { manifest, embeddings, out } => train_cmd(&cfg, manifest, embeddings.as_deref(), out),
        Command::Detect { files, model, out } => detect(&cfg, files, model, out.as_deref()),
        Command::Eval { manifest, model, all, level, out } => eval(&cfg, manifest, model, *all, *level, out.as_deref()),
        Command::Coverage { manifest, out } => coverage(&cfg, manifest, out.as_deref()),
    }
}

fn graph(file: &Path, emit: GraphKind, format: Format, out: Option<&Path>) -> Result<()> {
    let unit = read_unit(file)?;
    let cpg = build_cpg(std::slice::from_ref(&unit))?;
    let text = match (emit, format) {
        (GraphKind::Cpg, Format::Dot) => cpg_dot(&cpg),
        (GraphKind::Cpg, Format::Json) => pretty(&cpg_json(&cpg)),
        (GraphKind::Pdg, Format::Dot) => cpg.functions.iter().map(pdg_dot).collect(),
        (GraphKind::Pdg, Format::Json) => pretty(&Value::Array(cpg.functions.iter().map(pdg_json).collect())),
        (GraphKind::Cfg, Format::Dot) => cpg.functions.iter().map(|f| cfg_dot(&f.cfg, Some(f))).collect(),
        (GraphKind::Cfg, Format::Json) => pretty(&Value::Array(cpg.functions.iter().map(|f| cfg_json(&f.cfg)).collect())),
    };
    write_or_print(out, &text)
}

fn slice_cmd(cfg: &PipelineConfig, file: &Path, criterion: &str, api: Option<&Path>) -> Result<()> {
    let parts: Vec<&str> = criterion.splitn(3, ':').collect();
    let [kind, element, line] = parts[..] else {
        bail!("criterion `{criterion}` is not kind:element:line");
    };
    let kind: SyvcKind = kind.parse()?;
    let line: u32 = line.parse().with_context(|| format!("line `{line}` in criterion"))?;
    let opts = options(cfg, None, api)?;
    let unit = read_unit(file)?;
    let syvc = extract_syvcs(&unit, &opts.api, &BTreeSet::from([kind]))
        .into_iter()
        .find(|s| s.element == element && s.line == line)
        .ok_or_else(|| anyhow!("no {kind} candidate `{element}` on line {line}"))?;
    let cpg = build_cpg(std::slice::from_ref(&unit))?;
    let func = cpg.find(&syvc.file, syvc.function_index).ok_or_else(|| anyhow!("function of `{element}` not found"))?;
    let sets = slice(&cpg, QualifiedStmt::new(func, syvc.stmt))?;
    let name = |q: &QualifiedStmt| format!("{}:{}", cpg.function(q.func).name, q.stmt.0);
    let local = |s: &BTreeSet<vulspg::frontend::StmtId>| {
        s.iter().map(|&st| name(&QualifiedStmt::new(func, st))).collect::<Vec<_>>().join(" ")
    };
    let inter = |s: &BTreeSet<QualifiedStmt>| s.iter().map(name).collect::<Vec<_>>().join(" ");
    println!("criterion\t{}", name(&sets.criterion));
    println!("FSN\t{}", local(&sets.fsn));
    println!("IFSN\t{}", inter(&sets.ifsn));
    println!("BSN\t{}", local(&sets.bsn));
    println!("IBSN\t{}", inter(&sets.ibsn));
    Ok(())
}

fn manifest_for(files: &[PathBuf], labels: Option<&Path>) -> Result<DatasetManifest> {
    let mut manifest = match labels {
        Some(p) => DatasetManifest::load(p)?,
        None => DatasetManifest::default(),
    };
    for f in files {
        if !manifest.entries.iter().any(|e| e.path == *f) {
            manifest.entries.push(vulspg::pipeline::ManifestEntry { path: f.clone(), vulnerable_lines: BTreeSet::new() });
        }
    }
    if manifest.is_empty() {
        bail!("no source files given");
    }
    Ok(manifest)
}

fn file_stem(path: &str) -> String {
    Path::new(path).file_stem().map_or_else(|| "unit".into(), |s| s.to_string_lossy().into_owned())
}

fn spg_cmd(
    cfg: &PipelineConfig,
    files: &[PathBuf],
    kinds: Option<&str>,
    api: Option<&Path>,
    labels: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let opts = options(cfg, kinds, api)?;
    let manifest = manifest_for(files, labels)?;
    let corpus = generate_corpus(&manifest, &opts)?;
    let labeled = labels.is_some();
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    for program in &corpus {
        for (i, spg) in program.spgs.iter().enumerate() {
            let spg = if labeled { spg.clone() } else { Spg { label: None, ..spg.clone() } };
            match out {
                Some(dir) => {
                    let base = format!("{}_{:03}", file_stem(&program.path), i);
                    fs::write(dir.join(format!("{base}.json")), pretty(&spg.to_json()))?;
                    fs::write(dir.join(format!("{base}.dot")), spg.to_dot())?;
                }
                None => println!("{}", spg.to_json()),
            }
        }
        eprintln!("{}: {} SPGs", program.path, program.spgs.len());
    }
    Ok(())
}

fn c_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).with_context(|| format!("reading {}", d.display()))? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "c") {
                files.push(path);
            }
        }
    }
    files.sort();
    Ok(files)
}

fn pretrain(cfg: &PipelineConfig, corpus: &Path, dim: Option<usize>, out: &Path) -> Result<()> {
    let files = if corpus.is_dir() {
        c_files(corpus)?
    } else {
        DatasetManifest::load(corpus)?.entries.into_iter().map(|e| e.path).collect()
    };
    if files.is_empty() {
        bail!("no C files under {}", corpus.display());
    }
    let units = files.iter().map(|f| read_unit(f)).collect::<Result<Vec<_>, _>>()?;
    let mut sg = cfg.skipgram();
    if let Some(d) = dim {
        sg.dim = d;
    }
    let emb = train_skipgram(&pretraining_sentences(&units, &cfg.spg_options()?), &sg)?;
    fs::write(out, emb.to_json().to_string()).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("{} tokens, width {}, from {} files", emb.vocab.len(), emb.dim(), units.len());
    Ok(())
}

fn split_programs(cfg: &PipelineConfig, corpus: Vec<ProgramSpgs>) -> Result<(Vec<ProgramSpgs>, Vec<ProgramSpgs>)> {
    let (train_idx, test_idx) = split_dataset(corpus.len(), cfg.split_ratio, cfg.seed)?;
    let train_set: BTreeSet<usize> = train_idx.into_iter().collect();
    let (train, test): (Vec<_>, Vec<_>) = corpus.into_iter().partition(|p| train_set.contains(&p.program));
    debug_assert_eq!(test.len(), test_idx.len());
    Ok((train, test))
}

fn train_cmd(cfg: &PipelineConfig, manifest: &Path, embeddings: Option<&Path>, out: &Path) -> Result<()> {
    let opts = cfg.spg_options()?;
    let manifest = DatasetManifest::load(manifest)?;
    let corpus = generate_corpus(&manifest, &opts)?;
    let (train_set, test_set) = split_programs(cfg, corpus)?;
    let emb = match embeddings {
        Some(p) => Embeddings::from_json(&read_json(p)?)?,
        None => {
            let units = train_set.iter().map(|p| read_unit(&manifest.entries[p.program].path)).collect::<Result<Vec<_>, _>>()?;
            train_skipgram(&pretraining_sentences(&units, &opts), &cfg.skipgram())?
        }
    };
    let mut model_cfg = cfg.model();
    model_cfg.node.c = emb.dim();
    let mut model = Model::new(model_cfg, emb)?;
    let report = train(&mut model, &train_set, &cfg.train())?;
    fs::write(out, model.to_json().to_string()).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "trained {} epochs on {} SPGs from {} programs ({} held out for stopping); kept epoch {}",
        report.epochs(),
        report.train_spgs,
        report.train_programs,
        report.held_out_programs,
        report.best_epoch
    );
    if let Some(last) = report.history.last() {
        println!("last epoch: train loss {:.4}, held-out loss {:.4}", last.train_loss, last.held_out_loss);
    }
    let spgs: Vec<Spg> = test_set.iter().flat_map(|p| p.spgs.clone()).collect();
    if !spgs.is_empty() {
        let m = spg_metrics(&model, &spgs)?;
        println!("test split, {} programs:\n{m}", test_set.len());
    }
    Ok(())
}

fn spg_metrics(model: &Model, spgs: &[Spg]) -> Result<Metrics> {
    let preds: Vec<u8> = predict_all(model, spgs)?.into_iter().map(|p| p.1).collect();
    let labels: Vec<u8> = spgs.iter().map(|s| s.label.unwrap_or(0)).collect();
    Ok(evaluate(&preds, &labels)?)
}

fn load_model(path: &Path) -> Result<Model> {
    Model::from_json(&read_json(path)?).with_context(|| format!("loading {}", path.display()))
}

fn detect(cfg: &PipelineConfig, files: &[PathBuf], model: &Path, out: Option<&Path>) -> Result<()> {
    if files.is_empty() {
        bail!("no source files given");
    }
    let model = load_model(model)?;
    let opts = SpgOptions { kinds: SyvcKind::ALL.into_iter().collect(), ..cfg.spg_options()? };
    let mut reports = Vec::new();
    for f in files {
        let unit = read_unit(f)?;
        let r = detect_program(&unit, &model, &opts)?;
        let flagged = r.spgs.iter().filter(|s| s.verdict == 1).count();
        let note = if r.no_coverage { " (no coverage)" } else { "" };
        println!("{}\t{}\t{flagged}/{} SPGs flagged{note}", r.path, r.verdict, r.spgs.len());
        reports.push(r);
    }
    if let Some(p) = out {
        fs::write(p, pretty(&serde_json::to_value(&reports)?))?;
    }
    Ok(())
}

fn eval(cfg: &PipelineConfig, manifest: &Path, model: &Path, all: bool, level: Level, out: Option<&Path>) -> Result<()> {
    let model = load_model(model)?;
    let manifest = DatasetManifest::load(manifest)?;
    let corpus = generate_corpus(&manifest, &cfg.spg_options()?)?;
    let programs = if all { corpus } else { split_programs(cfg, corpus)?.1 };
    let m = match level {
        Level::Spg => {
            let spgs: Vec<Spg> = programs.iter().flat_map(|p| p.spgs.clone()).collect();
            if spgs.is_empty() {
                bail!("the selected programs yield no SPGs");
            }
            spg_metrics(&model, &spgs)?
        }
        Level::Program => {
            let mut preds = Vec::new();
            let mut labels = Vec::new();
            for p in &programs {
                let verdicts = predict_all(&model, &p.spgs)?;
                preds.push(u8::from(verdicts.iter().any(|v| v.1 == 1)));
                labels.push(u8::from(manifest.entries[p.program].is_vulnerable()));
            }
            evaluate(&preds, &labels)?
        }
    };
    println!("{m}");
    let v = json!({ "level": if level == Level::Spg { "spg" } else { "program" }, "programs": programs.len(), "metrics": m });
    match out {
        Some(p) => fs::write(p, pretty(&v))?,
        None => println!("{v}"),
    }
    Ok(())
}

fn coverage(cfg: &PipelineConfig, manifest: &Path, out: Option<&Path>) -> Result<()> {
    let manifest = DatasetManifest::load(manifest)?;
    let mut corpus = Vec::new();
    for e in &manifest.entries {
        let unit = read_unit(&e.path)?;
        let mut lines = VulnerableLines::default();
        for &l in &e.vulnerable_lines {
            lines.insert(unit.path.clone(), l);
        }
        corpus.push((unit, lines));
    }
    let report = coverage_report(&corpus, &cfg.spg_options()?)?;
    print!("{}", report.to_table());
    let v = serde_json::to_value(&report)?;
    match out {
        Some(p) => fs::write(p, pretty(&v))?,
        None => println!("{v}"),
    }
    Ok(())
}
