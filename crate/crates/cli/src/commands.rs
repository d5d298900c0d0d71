use std::collections::HashSet;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::Path;

use dialsynth::corpus::{
    label_distribution, read_dataset_unchecked, split_dataset, tagged_path, write_dataset, DialogueRecord, Family,
    FamilyRegistry, LabelSet, RawLine, SplitRatios,
};
use dialsynth::gateway::{
    CompletionBackend, FixtureBackend, Gateway, HttpBackend, MockFixture, MockServer, RetryPolicy,
};
use dialsynth::prompt::{build_prompt_with, PromptSpec, TemplateSet};
use dialsynth::rankstats::{
    calibrate_bonferroni, friedman_report, CalibrationReport, CALIBRATION_CANDIDATES, PUBLISHED_P_ROW,
};
use dialsynth::synth::{write_job_output, GenerationJobSpec, JobOutput, JobStatus, SynthError, Synthesizer};
use dialsynth::ExactScoreTable;

use crate::config::{AppConfig, FileConfig, Overrides};
use crate::{Failure, GenerateArgs, MockServerArgs, ModeArg, PromptArgs, RankArgs, SplitArgs, StatsArgs, ValidateArgs};

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::Io(format!("cannot start async runtime: {e}")))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn templates_for(family_id: &str, dir: Option<&Path>) -> Result<TemplateSet, Failure> {
    match dir {
        Some(d) => TemplateSet::with_overrides(family_id, d).map_err(|e| Failure::Config(e.to_string())),
        None => Ok(TemplateSet::bundled(family_id)),
    }
}

async fn run_job<B: CompletionBackend>(
    backend: B,
    retry: RetryPolicy,
    family: Family,
    templates: TemplateSet,
    spec: &GenerationJobSpec,
) -> Result<JobOutput, SynthError> {
    Synthesizer::new(Gateway::new(backend, retry), family).with_templates(templates).run(spec).await
}

pub fn generate(config: Option<&Path>, a: GenerateArgs) -> Result<(), Failure> {
    let usage = |m: &str| Err(Failure::Usage(m.to_string()));
    match (a.mode, a.count, a.quota) {
        (ModeArg::Natural, None, _) => return usage("natural mode needs --count"),
        (ModeArg::Natural, Some(_), Some(_)) => return usage("--quota applies to balanced mode only"),
        (ModeArg::Balanced, _, None) => return usage("balanced mode needs --quota"),
        (ModeArg::Balanced, Some(_), Some(_)) => return usage("--count applies to natural mode only"),
        _ => {}
    }
    let cfg = AppConfig::resolve(
        FileConfig::load(config)?,
        Overrides {
            endpoint: a.endpoint,
            model: a.model,
            seed: a.seed,
            templates: a.templates,
            out_dir: a.out_dir,
            max_in_flight: a.max_in_flight,
            factor: a.factor,
            retries: a.retries,
        },
    )?;
    let family = cfg.families.get(&a.family).map_err(|e| Failure::Usage(e.to_string()))?;
    let Some(endpoint) = cfg.endpoint.clone() else {
        return Err(Failure::Config("no endpoint configured: pass --endpoint or set DIALSYNTH_ENDPOINT".into()));
    };
    let templates = templates_for(&a.family, cfg.templates.as_deref())?;

    let mut spec = match (a.count, a.quota) {
        (Some(count), _) => GenerationJobSpec::natural(&a.family, count, cfg.base_seed),
        (_, Some(quota)) => GenerationJobSpec::balanced(&a.family, quota, cfg.base_seed),
        _ => unreachable!("checked above"),
    };
    spec.params = cfg.params;
    spec.max_in_flight = cfg.max_in_flight;
    if let Some(f) = cfg.over_generation_factor {
        spec.over_generation_factor = f;
    }
    if let Some(r) = cfg.max_retries_per_slot {
        spec.max_retries_per_slot = r;
    }
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let out = a.out.unwrap_or_else(|| cfg.out_dir.join(format!("{}-{}.jsonl", a.family, spec.mode())));

    let rt = runtime()?;
    let result = if let Some(fixture) = endpoint.base_url.strip_prefix("mock:") {
        let fixture = if fixture.is_empty() {
            MockFixture::bundled()
        } else {
            MockFixture::from_path(Path::new(fixture))
                .map_err(|e| Failure::Config(format!("fixture {fixture}: {e}")))?
        };
        rt.block_on(run_job(FixtureBackend::new(fixture), cfg.retry, family, templates, &spec))
    } else {
        let backend = HttpBackend::new(endpoint).map_err(|e| Failure::Config(format!("endpoint: {e}")))?;
        rt.block_on(run_job(backend, cfg.retry, family, templates, &spec))
    };
    let output = result.map_err(|e| match e {
        SynthError::InvalidSpec(m) => Failure::Usage(m),
        SynthError::Io(e) => Failure::Io(e.to_string()),
        other => Failure::Config(other.to_string()),
    })?;

    let report = &output.report;
    if output.records.is_empty() && report.attempts > 0 && report.failed_completion == report.attempts {
        return Err(Failure::Io(format!("all {} completion requests failed; nothing written", report.attempts)));
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    write_job_output(&output, &out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
    print!("{}", report.to_text());
    println!("wrote {} record(s) to {}", output.records.len(), out.display());
    match report.status {
        JobStatus::Complete => Ok(()),
        JobStatus::Partial => Err(Failure::Partial(format!(
            "job fulfilled only partially ({} of {} requested)",
            output.records.len(),
            report.requested
        ))),
    }
}

/// Every problem in a dataset file, one line each.
fn problems(lines: &[RawLine], labels: &LabelSet) -> Vec<String> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for l in lines {
        match &l.record {
            Err(m) => out.push(format!("line {}: malformed record: {m}", l.line)),
            Ok(r) => {
                for v in r.violations(labels) {
                    out.push(format!("line {} ({}): {v}", l.line, r.id));
                }
                if !ids.insert(r.id.as_str()) {
                    out.push(format!("line {} ({}): duplicate id", l.line, r.id));
                }
            }
        }
    }
    out
}

fn read_lines(path: &Path) -> Result<Vec<RawLine>, Failure> {
    if !path.exists() {
        return Err(Failure::Io(format!("{}: no such file", path.display())));
    }
    read_dataset_unchecked(path).map_err(|e| Failure::Io(e.to_string()))
}

fn labels_for(lines: &[RawLine], family: Option<&str>, registry: &FamilyRegistry) -> Result<LabelSet, Failure> {
    let id = match family {
        Some(f) => f.to_string(),
        None => lines
            .iter()
            .find_map(|l| l.record.as_ref().ok().map(|r| r.family_id.clone()))
            .ok_or_else(|| Failure::Usage("no readable record to infer the family from; pass --family".into()))?,
    };
    registry.get(&id).map(|f| f.labels).map_err(|e| Failure::Usage(e.to_string()))
}

/// Reads a dataset that must be free of violations.
fn load_valid(
    config: Option<&Path>,
    path: &Path,
    family: Option<&str>,
) -> Result<(Vec<DialogueRecord>, LabelSet), Failure> {
    let registry = FileConfig::load(config)?.registry()?;
    let lines = read_lines(path)?;
    let labels = labels_for(&lines, family, &registry)?;
    let found = problems(&lines, &labels);
    if let Some(first) = found.first() {
        return Err(Failure::Validation(format!(
            "{} has {} problem(s), first: {first}; run `dialsynth validate` for the full list",
            path.display(),
            found.len()
        )));
    }
    Ok((lines.into_iter().filter_map(|l| l.record.ok()).collect(), labels))
}

pub fn validate(config: Option<&Path>, a: ValidateArgs) -> Result<(), Failure> {
    let registry = FileConfig::load(config)?.registry()?;
    let lines = read_lines(&a.path)?;
    if lines.is_empty() {
        println!("{}: 0 records", a.path.display());
        return Ok(());
    }
    let labels = labels_for(&lines, a.family.as_deref(), &registry)?;
    let found = problems(&lines, &labels);
    for p in &found {
        println!("{p}");
    }
    println!("{}: {} record(s), {} violation(s)", a.path.display(), lines.len(), found.len());
    if found.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("{} violation(s) in {}", found.len(), a.path.display())))
    }
}

pub fn split(config: Option<&Path>, a: SplitArgs) -> Result<(), Failure> {
    let ratios: SplitRatios = a.ratios.parse().map_err(|e| Failure::Usage(format!("--ratios: {e}")))?;
    let (records, _) = load_valid(config, &a.path, a.family.as_deref())?;
    let parts = split_dataset(&records, ratios, a.seed).map_err(|e| Failure::Validation(e.to_string()))?;
    for (tag, part) in [("train", &parts.train), ("val", &parts.validation), ("test", &parts.test)] {
        let out = tagged_path(&a.path, tag, "jsonl");
        write_dataset(part, &out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
        println!("{tag:<6}{:>8}  {}", part.len(), out.display());
    }
    Ok(())
}

pub fn stats(config: Option<&Path>, a: StatsArgs) -> Result<(), Failure> {
    let (records, labels) = load_valid(config, &a.path, a.family.as_deref())?;
    let dist = label_distribution(&records, &labels).map_err(|e| Failure::Validation(e.to_string()))?;
    let hist = tagged_path(&a.path, "hist", "csv");
    std::fs::write(&hist, dist.to_log_histogram_csv()).map_err(io_err(&hist))?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&dist).expect("distribution serializes"));
    } else {
        println!("{} dialogue(s)", records.len());
        print!("{}", dist.to_table());
        println!("histogram: {}", hist.display());
    }
    Ok(())
}

fn calibration() -> Result<CalibrationReport, Failure> {
    calibrate_bonferroni(9, 9, &PUBLISHED_P_ROW, &CALIBRATION_CANDIDATES)
        .map_err(|e| Failure::Validation(e.to_string()))
}

pub fn rank(a: RankArgs) -> Result<(), Failure> {
    for p in [&a.scores, &a.groups] {
        if !p.exists() {
            return Err(Failure::Io(format!("{}: no such file", p.display())));
        }
    }
    let table = ExactScoreTable::from_paths(&a.scores, &a.groups).map_err(|e| Failure::Validation(e.to_string()))?;
    let cal = if a.m.is_none() || a.methodology.is_some() { Some(calibration()?) } else { None };
    let m = match (a.m, &cal) {
        (Some(m), _) => m,
        (None, Some(c)) => {
            print!("{}", c.to_text());
            println!("chosen m = {}\n", c.chosen_m);
            c.chosen_m
        }
        (None, None) => unreachable!("calibration runs when m is omitted"),
    };
    let report = friedman_report(&table, m).map_err(|e| Failure::Validation(e.to_string()))?;
    print!("{}", report.to_text());
    if let Some(path) = &a.json {
        std::fs::write(path, report.to_json() + "\n").map_err(io_err(path))?;
    }
    if let (Some(path), Some(c)) = (&a.methodology, &cal) {
        let mut text = c.to_markdown();
        if m != c.chosen_m {
            text.push_str(&format!("\nThis report was produced with m = {m} given on the command line.\n"));
        }
        std::fs::write(path, text).map_err(io_err(path))?;
    }
    Ok(())
}

pub fn prompt(config: Option<&Path>, a: PromptArgs) -> Result<(), Failure> {
    let registry = FileConfig::load(config)?.registry()?;
    let family = registry.get(&a.family).map_err(|e| Failure::Usage(e.to_string()))?;
    let spec = match &a.target {
        Some(t) => PromptSpec::balanced(&family, t).map_err(|e| Failure::Usage(e.to_string()))?,
        None => PromptSpec::natural(&family),
    };
    let templates = templates_for(&a.family, a.templates.as_deref())?;
    let text = build_prompt_with(&spec, &templates).map_err(|e| Failure::Config(e.to_string()))?;
    println!("{}", text.text);
    Ok(())
}

pub fn mock_server(a: MockServerArgs) -> Result<(), Failure> {
    let fixture = match &a.fixture {
        Some(p) => MockFixture::from_path(p).map_err(|e| Failure::Config(format!("fixture {}: {e}", p.display())))?,
        None => MockFixture::bundled(),
    };
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| Failure::Usage(format!("bad address {}:{}: {e}", a.host, a.port)))?;
    let rt = runtime()?;
    rt.block_on(async {
        let server = MockServer::start(fixture, addr).await.map_err(|e| Failure::Io(format!("bind {addr}: {e}")))?;
        println!("listening on {}", server.base_url());
        let _ = std::io::stdout().flush();
        server.wait().await;
        Ok(())
    })
}
