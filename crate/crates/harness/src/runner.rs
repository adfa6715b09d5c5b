//! Runs tasks against a data directory and writes a run directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use usersim_core::persona::SurnamePool;
use usersim_core::template::{TemplateId, TemplateSet};
use usersim_core::{Baseline, Dataset, Task};

use crate::absa::{extractor_from_config, Extractor};
use crate::config::Config;
use crate::corpus::DataDir;
use crate::embeddings::{provider_from_config, Embedder};
use crate::gateway::Gateway;
use crate::io::{self, sha256_hex};
use crate::manifest::{DatasetVersion, Manifest, RunCommand, MANIFEST_FILE, MANIFEST_SCHEMA_VERSION, RUN_SUBDIRS};
use crate::report::{self, Files};
use crate::surnames;
use crate::tasks::{self, TaskContext, TaskOutput, TaskReport};

pub const PROMPTS_SCHEMA: &str = "usersim.prompts";
pub const REPLIES_SCHEMA: &str = "usersim.replies";

/// Datasets T1 is measured on, in table order.
pub const T1_DATASETS: [Dataset; 3] = [Dataset::Imdb, Dataset::Reddit, Dataset::Redial];

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub tasks: Vec<Task>,
    /// `None` runs every baseline each task supports.
    pub baseline: Option<Baseline>,
    pub config: PathBuf,
    pub seed: u64,
    pub explanations: bool,
    pub reasons: bool,
    pub data: PathBuf,
    pub out: PathBuf,
}

impl RunOptions {
    /// The (task, baseline) pairs to run. A baseline given explicitly must
    /// suit a lone task; with several tasks, tasks that cannot take it are
    /// left out.
    pub fn plan(&self) -> Result<Vec<(Task, Baseline)>> {
        let mut plan = Vec::new();
        for &t in &self.tasks {
            match self.baseline {
                Some(b) if t.baselines().contains(&b) => plan.push((t, b)),
                Some(b) if self.tasks.len() == 1 => bail!(
                    "{t} runs with {}, not {b}",
                    t.baselines().iter().map(|b| b.id()).collect::<Vec<_>>().join(" or ")
                ),
                Some(_) => {}
                None => plan.extend(t.baselines().iter().map(|&b| (t, b))),
            }
        }
        if plan.is_empty() {
            bail!("no task accepts the requested baseline");
        }
        Ok(plan)
    }
}

/// Built-in templates with any `<stem>.txt` overrides from `dir`.
pub fn load_templates(dir: Option<&Path>) -> Result<TemplateSet> {
    let mut set = TemplateSet::builtin();
    if let Some(dir) = dir {
        for id in TemplateId::ALL {
            let p = dir.join(format!("{}.txt", id.stem()));
            if p.is_file() {
                let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                set = set
                    .with_override(id, &text)
                    .with_context(|| format!("template {}", p.display()))?;
            }
        }
    }
    let leaks = set.metric_leaks();
    if !leaks.is_empty() {
        let list: Vec<String> = leaks.iter().map(|(t, w)| format!("{t}: {w}")).collect();
        bail!("templates mention evaluation terms: {}", list.join(", "));
    }
    Ok(set)
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// What a finished run wrote.
#[derive(Debug)]
pub struct RunSummary {
    pub out: PathBuf,
    pub reports: Vec<TaskReport>,
    pub manifest: Manifest,
}

struct Resources {
    word: Option<Embedder>,
    sentence: Option<Embedder>,
    extractor: Option<Arc<dyn Extractor>>,
}

fn resources(cfg: &Config, gateway: &Arc<Gateway>, plan: &[(Task, Baseline)]) -> Result<Resources> {
    let needs = |t: Task| plan.iter().any(|(x, _)| *x == t);
    let mut r = Resources {
        word: None,
        sentence: None,
        extractor: None,
    };
    if needs(Task::T4) {
        let (Some(w), Some(s)) = (&cfg.embeddings.word, &cfg.embeddings.sentence) else {
            bail!("t4 needs [embeddings.word] and [embeddings.sentence] in the config");
        };
        let word = Embedder::new(provider_from_config(w)?);
        let sentence = Embedder::new(provider_from_config(s)?);
        word.preflight().context("word embeddings")?;
        sentence.preflight().context("sentence embeddings")?;
        r.word = Some(word);
        r.sentence = Some(sentence);
    }
    if needs(Task::T3) {
        let ex = extractor_from_config(&cfg.absa, gateway)?;
        ex.preflight().context("aspect extractor")?;
        r.extractor = Some(ex);
    }
    Ok(r)
}

fn require(data: &DataDir, d: Dataset, task: Task) -> Result<()> {
    if !data.has(d) {
        bail!(
            "{task} needs the {} dataset; run `usersim ingest {} <path> --data {}` first",
            d.name(),
            d.name(),
            data.root().display()
        );
    }
    Ok(())
}

/// Runs the plan and writes the run directory.
pub fn run(opts: &RunOptions) -> Result<RunSummary> {
    let config_bytes =
        std::fs::read(&opts.config).with_context(|| format!("reading config {}", opts.config.display()))?;
    let cfg = Config::load(&opts.config)?;
    let gateway = Arc::new(Gateway::from_config(&cfg.backend)?);
    run_with(opts, &cfg, &config_bytes, gateway)
}

/// Like [`run`], with the gateway supplied by the caller.
pub fn run_with(opts: &RunOptions, cfg: &Config, config_bytes: &[u8], gateway: Arc<Gateway>) -> Result<RunSummary> {
    let plan = opts.plan()?;
    let data = DataDir::new(&opts.data);
    let pool: SurnamePool = match &cfg.run.surnames {
        Some(p) => surnames::load(p)?,
        None => surnames::builtin(),
    };
    let templates = load_templates(cfg.run.templates.as_deref())?;
    gateway.preflight().context("backend preflight")?;
    let res = resources(cfg, &gateway, &plan)?;

    let ctx = TaskContext {
        gateway: &gateway,
        templates: &templates,
        surnames: &pool,
        run: &cfg.run,
        seed: opts.seed,
    };

    let mut used: Vec<Dataset> = Vec::new();
    let mut outputs: Vec<TaskOutput> = Vec::new();
    for &(task, baseline) in &plan {
        log::info!("running {task} with {baseline}");
        match task {
            Task::T1 => {
                let present: Vec<Dataset> = T1_DATASETS.into_iter().filter(|d| data.has(*d)).collect();
                if present.is_empty() {
                    bail!(
                        "t1 needs at least one of imdb, reddit, redial in {}",
                        data.root().display()
                    );
                }
                for d in present {
                    let cases = data.cases(d)?;
                    let catalog = data.catalog(d)?;
                    let entropy = data.summary(d)?.human_entropy;
                    outputs.push(tasks::run_t1(&ctx, d, &cases, &catalog, entropy, baseline)?);
                    used.push(d);
                }
            }
            Task::T2 => {
                require(&data, Dataset::Movielens, task)?;
                let stats = data.ratings()?;
                let groups = tasks::movie_groups(&stats, &cfg.run.group_specs()?, opts.seed)?;
                outputs.extend(tasks::run_t2(&ctx, &stats, &groups, baseline)?);
                used.push(Dataset::Movielens);
            }
            Task::T3 => {
                require(&data, Dataset::Imdb, task)?;
                let ex = res.extractor.as_deref().expect("extractor prepared for t3");
                outputs.push(tasks::run_t3(
                    &ctx,
                    &data.cases(Dataset::Imdb)?,
                    ex,
                    cfg.absa.stem,
                    baseline,
                )?);
                used.push(Dataset::Imdb);
            }
            Task::T4 => {
                require(&data, Dataset::Reddit, task)?;
                let (w, s) = (
                    res.word.as_ref().expect("word"),
                    res.sentence.as_ref().expect("sentence"),
                );
                outputs.push(tasks::run_t4(&ctx, &data.cases(Dataset::Reddit)?, w, s)?);
                used.push(Dataset::Reddit);
            }
            Task::T5 => {
                require(&data, Dataset::Reddit, task)?;
                let cases = data.cases(Dataset::Reddit)?;
                outputs.push(tasks::run_t5(&ctx, &cases, opts.explanations, opts.reasons)?);
                used.push(Dataset::Reddit);
            }
        }
    }

    let mut files = Files::new();
    for o in &outputs {
        let stem = o.report.stem();
        files.insert(
            format!("cases/{stem}.jsonl"),
            io::jsonl_bytes(PROMPTS_SCHEMA, &o.prompts)?,
        );
        files.insert(
            format!("replies/{stem}.jsonl"),
            io::jsonl_bytes(REPLIES_SCHEMA, &o.replies)?,
        );
        files.insert(format!("reports/{stem}.json"), json_bytes(&o.report)?);
    }
    let reports: Vec<TaskReport> = outputs.into_iter().map(|o| o.report).collect();
    files.extend(report::render(&reports)?);

    let mut providers = BTreeMap::new();
    if let Some(w) = &res.word {
        providers.insert("embeddings.word".to_string(), w.id().to_string());
    }
    if let Some(s) = &res.sentence {
        providers.insert("embeddings.sentence".to_string(), s.id().to_string());
    }
    if let Some(e) = &res.extractor {
        providers.insert("absa".to_string(), e.id());
    }
    used.sort();
    used.dedup();
    let mut datasets = BTreeMap::new();
    for d in used {
        let files = data
            .files(d)
            .iter()
            .map(|p| {
                Ok((
                    p.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                    io::sha256_file(p)?,
                ))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        let input_sha256 = data.summary(d).map(|s| s.input_sha256).unwrap_or_default();
        datasets.insert(d.name().to_string(), DatasetVersion { input_sha256, files });
    }
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: RunCommand {
            tasks: opts.tasks.iter().map(|t| t.id().to_string()).collect(),
            baseline: opts.baseline.map(|b| b.id().to_string()),
            seed: opts.seed,
            explanations: opts.explanations,
            reasons: opts.reasons,
            config_file: opts
                .config
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
        },
        config_sha256: sha256_hex(config_bytes),
        backend: gateway.info().clone(),
        providers,
        templates: templates
            .iter()
            .map(|t| (t.id().stem().to_string(), sha256_hex(t.source())))
            .collect(),
        datasets,
        outputs: Manifest::hash_outputs(&files),
    };
    write_run_dir(&opts.out, &files, &manifest)?;
    Ok(RunSummary {
        out: opts.out.clone(),
        reports,
        manifest,
    })
}

/// Clears the run subdirectories, then writes `files` and the manifest.
pub fn write_run_dir(out: &Path, files: &Files, manifest: &Manifest) -> Result<()> {
    for sub in RUN_SUBDIRS {
        let d = out.join(sub);
        if d.is_dir() {
            std::fs::remove_dir_all(&d).with_context(|| format!("clearing {}", d.display()))?;
        }
    }
    for (rel, bytes) in files {
        io::write_atomic(&out.join(rel), bytes)?;
    }
    io::write_atomic(&out.join(MANIFEST_FILE), &manifest.to_bytes()?)
}

/// Reads every report in a run directory, sorted by file name.
pub fn load_reports(run_dir: &Path) -> Result<Vec<TaskReport>> {
    let dir = run_dir.join("reports");
    if !dir.is_dir() {
        bail!("{} has no reports/ directory", run_dir.display());
    }
    let reports: Vec<TaskReport> = io::files_with_extension(&dir, "json")?
        .iter()
        .map(|p| io::read_json(p))
        .collect::<Result<_>>()?;
    if reports.is_empty() {
        bail!("{} contains no reports", dir.display());
    }
    Ok(reports)
}

/// Re-renders tables and charts from stored reports. The manifest, when
/// present, is updated with the new hashes.
pub fn rerender(run_dir: &Path) -> Result<Files> {
    let reports = load_reports(run_dir)?;
    let files = report::render(&reports)?;
    for sub in ["tables", "charts"] {
        let d = run_dir.join(sub);
        if d.is_dir() {
            std::fs::remove_dir_all(&d).with_context(|| format!("clearing {}", d.display()))?;
        }
    }
    for (rel, bytes) in &files {
        io::write_atomic(&run_dir.join(rel), bytes)?;
    }
    if run_dir.join(MANIFEST_FILE).is_file() {
        let mut m = Manifest::load(run_dir)?;
        m.outputs
            .retain(|k, _| !(k.starts_with("tables/") || k.starts_with("charts/")));
        m.outputs.extend(Manifest::hash_outputs(&files));
        io::write_atomic(&run_dir.join(MANIFEST_FILE), &m.to_bytes()?)?;
    }
    Ok(files)
}
