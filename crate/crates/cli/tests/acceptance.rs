//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use dialsynth::corpus::{
    builtin_labelset, builtin_speakers, content_hash, read_dataset, split_dataset, DialogueRecord, FamilyRegistry,
    Mode, SplitRatios, Turn,
};
use dialsynth::gateway::{
    AttemptError, BackendReply, CompletionBackend, CompletionRequest, FixtureBackend, Gateway, MockFixture, MockServer,
    RetryPolicy,
};
use dialsynth::parser::{canonicalize, parse_dialogue, Provenance};
use dialsynth::rankstats::{
    calibrate_bonferroni, exact_diff_distribution, friedman_report, pairwise_p, CALIBRATION_CANDIDATES, PUBLISHED_P_ROW,
};
use dialsynth::synth::{write_job_output, GenerationJobSpec, JobStatus, Synthesizer};
use dialsynth::ScoreTableF64;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check, Duration);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($msg)+));
        }
    };
}

fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn score_fixture() -> (PathBuf, PathBuf) {
    let dir = workspace().join("crates/core/fixtures/wf1_scores");
    (dir.join("scores.csv"), dir.join("groups.csv"))
}

fn cli() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dialsynth"));
    for (k, _) in std::env::vars() {
        if k.starts_with("DIALSYNTH_") {
            c.env_remove(k);
        }
    }
    c
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap()
}

// ---------------------------------------------------------------- criterion 1

const EXPECTED_RANKS: [[u32; 9]; 9] = [
    [6, 4, 3, 5, 2, 1, 9, 8, 7],
    [7, 1, 3, 6, 2, 5, 9, 4, 8],
    [8, 6, 2, 5, 4, 1, 9, 7, 3],
    [6, 1, 3, 8, 4, 2, 9, 7, 5],
    [6, 2, 5, 8, 4, 3, 9, 1, 7],
    [7, 4, 2, 8, 5, 1, 9, 6, 3],
    [6, 2, 3, 5, 1, 4, 8, 7, 9],
    [9, 1, 6, 8, 2, 5, 7, 3, 4],
    [8, 3, 2, 9, 4, 1, 7, 6, 5],
];

fn rank_block() -> Check {
    let (scores, groups) = score_fixture();
    let out = cli().arg("rank").arg(&scores).arg("--groups").arg(&groups).output().map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "rank exited with {:?}", out.status.code());
    let text = String::from_utf8_lossy(&out.stdout);
    let body: Vec<&str> = text.lines().skip_while(|l| !l.starts_with("Test set")).collect();
    ensure!(body.len() >= 13, "report table not found");
    for (i, expected) in EXPECTED_RANKS.iter().enumerate() {
        let ranks: Vec<u32> =
            body[1 + i].split('(').skip(1).map(|c| c.split(')').next().unwrap().parse().unwrap()).collect();
        ensure!(ranks == expected, "row {} ranks {ranks:?} != {expected:?}", i + 1);
    }
    let row = |name: &str| -> Vec<String> {
        body.iter()
            .find(|l| l.starts_with(name))
            .map(|l| l.split_whitespace().skip(1).map(str::to_string).collect())
            .unwrap_or_default()
    };
    ensure!(row("Sum") == ["63", "24", "29", "62", "28", "23", "76", "49", "51"], "sums {:?}", row("Sum"));
    let diffs: Vec<String> = row("Diff.").into_iter().filter(|d| d != "-").collect();
    ensure!(diffs == ["39", "34", "34", "39", "27", "25"], "diffs {diffs:?}");
    Ok(())
}

// ---------------------------------------------------------------- criterion 2

fn small_oracle() -> Check {
    let k = 3i64;
    let pairs: Vec<i64> = (1..=k).flat_map(|a| (1..=k).filter(move |&b| b != a).map(move |b| a - b)).collect();
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    let mut outcomes = 0;
    for x in &pairs {
        for y in &pairs {
            *counts.entry(x + y).or_default() += 1;
            outcomes += 1;
        }
    }
    ensure!(outcomes == 36, "enumerated {outcomes} outcomes");
    let dist = exact_diff_distribution(3, 2).map_err(|e| e.to_string())?;
    for d in -6..=6 {
        let want = BigUint::from(counts.get(&d).copied().unwrap_or(0));
        ensure!(dist.count(d) == want, "count at {d}: {} != {want}", dist.count(d));
    }
    let p = pairwise_p(3, 2, 3).map_err(|e| e.to_string())?;
    let tail: u64 = counts.iter().filter(|(d, _)| d.abs() >= 3).map(|(_, c)| c).sum();
    ensure!(tail == 10, "oracle tail {tail}");
    ensure!(p.fraction() == "5/18", "p = {}", p.fraction());
    Ok(())
}

// ---------------------------------------------------------------- criterion 3

fn monte_carlo() -> Check {
    const SAMPLES: u64 = 1_000_000;
    let ds = [25i64, 27, 34, 39];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut hits = [0u64; 4];
    for _ in 0..SAMPLES {
        let mut diff = 0i64;
        for _ in 0..9 {
            let a = rng.random_range(1..=9i64);
            let mut b = rng.random_range(1..=8i64);
            if b >= a {
                b += 1;
            }
            diff += a - b;
        }
        for (h, d) in hits.iter_mut().zip(ds) {
            if diff.abs() >= d {
                *h += 1;
            }
        }
    }
    for (h, d) in hits.iter().zip(ds) {
        let exact = pairwise_p(9, 9, d as u64).map_err(|e| e.to_string())?.value();
        let mc = *h as f64 / SAMPLES as f64;
        let se = (exact * (1.0 - exact) / SAMPLES as f64).sqrt();
        ensure!((mc - exact).abs() <= 4.0 * se, "d={d}: exact {exact:.6}, simulated {mc:.6}, se {se:.2e}");
    }
    let dist = exact_diff_distribution(9, 9).map_err(|e| e.to_string())?;
    ensure!(dist.total() == BigUint::from(72u32).pow(9), "mass {}", dist.total());
    ensure!(dist.is_symmetric(), "not symmetric");
    for d in -80i64..=80 {
        if (d == 72 || d == -72) && dist.count(d) == BigUint::from(0u32) {
            return Err(format!("no mass at the support bound {d}"));
        }
        ensure!(d.abs() <= 72 || dist.count(d) == BigUint::from(0u32), "mass beyond the bound at {d}");
    }
    Ok(())
}

// ---------------------------------------------------------------- criterion 4

fn calibrated_p_row() -> Check {
    let cal = calibrate_bonferroni(9, 9, &PUBLISHED_P_ROW, &CALIBRATION_CANDIDATES).map_err(|e| e.to_string())?;
    let fit = cal.chosen();
    for (c, (d, published)) in fit.corrected.iter().zip(PUBLISHED_P_ROW) {
        ensure!((c - published).abs() <= 0.003, "d={d}: {c:.4} vs {published} with m={}", cal.chosen_m);
    }
    let (scores, groups) = score_fixture();
    let table = ScoreTableF64::from_paths(&scores, &groups).map_err(|e| e.to_string())?;
    let report = friedman_report(&table, cal.chosen_m).map_err(|e| e.to_string())?;
    let verdicts: BTreeMap<u64, bool> = report.comparisons.iter().map(|c| (c.diff.ceil(), c.significant)).collect();
    let expected = [(39, true), (34, true), (27, false), (25, false)];
    for (d, sig) in expected {
        ensure!(verdicts.get(&d) == Some(&sig), "verdict at diff {d}: {:?}", verdicts.get(&d));
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let md = dir.path().join("methodology.md");
    let out = cli()
        .arg("rank")
        .arg(&scores)
        .arg("--groups")
        .arg(&groups)
        .arg("--methodology")
        .arg(&md)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "rank --methodology failed");
    let text = std::fs::read_to_string(&md).map_err(|e| e.to_string())?;
    ensure!(text.contains(&format!("Chosen m = {}", cal.chosen_m)), "methodology lacks the chosen m");
    for r in &fit.residuals {
        ensure!(text.contains(&format!("{r:+.5}")), "methodology lacks residual {r:+.5}");
    }
    let committed = std::fs::read_to_string(workspace().join("docs/methodology.md")).unwrap_or_default();
    ensure!(committed == text, "docs/methodology.md is out of date; regenerate it with `dialsynth rank --methodology`");
    Ok(())
}

// ---------------------------------------------------------------- criterion 5

fn generation_determinism() -> Check {
    let rt = runtime();
    let server = rt.block_on(MockServer::start_local(MockFixture::bundled())).map_err(|e| e.to_string())?;
    let url = server.base_url();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let path = dir.path().join(format!("{run}.jsonl"));
        let out = cli()
            .args(["generate", "--family", "meld", "--mode", "natural", "--count", "50", "--seed", "1234"])
            .args(["--endpoint", &url, "--out"])
            .arg(&path)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(
            out.status.success(),
            "generate exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
        let read = |p: PathBuf| std::fs::read(p).map_err(|e| e.to_string());
        outputs.push((
            read(path.clone())?,
            read(dir.path().join(format!("{run}.report.json")))?,
            read(dir.path().join(format!("{run}.report.txt")))?,
        ));
    }
    rt.block_on(server.shutdown());
    let lines = outputs[0].0.iter().filter(|&&b| b == b'\n').count();
    ensure!(lines == 50, "{lines} records");
    ensure!(outputs[0].0 == outputs[1].0, "datasets differ");
    ensure!(outputs[0].1 == outputs[1].1 && outputs[0].2 == outputs[1].2, "reports differ");
    Ok(())
}

// ---------------------------------------------------------------- criterion 6

const MELD: [&str; 7] = ["Neutral", "Disgust", "Anger", "Sadness", "Fear", "Joy", "Surprise"];

/// Leaves the target emotion out of every first-round completion.
struct Stubborn {
    first_round: u64,
    calls: Mutex<HashMap<u64, u32>>,
}

#[async_trait]
impl CompletionBackend for Stubborn {
    async fn send(&self, r: &CompletionRequest) -> Result<BackendReply, AttemptError> {
        let seed = r.params.seed.unwrap_or(0);
        *self.calls.lock().unwrap().entry(seed).or_default() += 1;
        let target = MELD.iter().position(|l| r.prompt.contains(&format!("expressing {l}"))).unwrap();
        let shown = if seed < self.first_round { (target + 1) % 7 } else { target };
        let filler = (target + 2) % 7;
        let text = format!(
            "Speaker: Monica | Utterance: Take {seed}, first line. | Number: {}\n\
             Speaker: Chandler | Utterance: Take {seed}, second line. | Number: {}\n",
            filler + 1,
            shown + 1
        );
        Ok(BackendReply { text, metadata: serde_json::Value::Null })
    }
}

fn balanced_quota() -> Check {
    let family = FamilyRegistry::new().get("meld").map_err(|e| e.to_string())?;
    let backend = Stubborn { first_round: 35, calls: Mutex::new(HashMap::new()) };
    let synth = Synthesizer::new(Gateway::new(backend, RetryPolicy::none()), family);
    let spec = GenerationJobSpec::balanced("meld", 5, 0);
    let out = runtime().block_on(synth.run(&spec)).map_err(|e| e.to_string())?;
    ensure!(out.report.status == JobStatus::Complete, "status {:?}", out.report.status);
    ensure!(
        out.report.rejected_missing_target == 35,
        "missing-target rejections {}",
        out.report.rejected_missing_target
    );
    let f = out.report.fulfillment.clone().unwrap_or_default();
    ensure!(MELD.iter().all(|l| f.get(*l) == Some(&5)), "fulfillment {f:?}");

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("balanced.jsonl");
    write_job_output(&out, &path).map_err(|e| e.to_string())?;
    let persisted = read_dataset(&path, &builtin_labelset("meld").unwrap()).map_err(|e| e.to_string())?;
    ensure!(persisted.len() == 35, "{} persisted", persisted.len());
    let mut per_label: BTreeMap<String, usize> = BTreeMap::new();
    for r in &persisted {
        let target = r.target_label.clone().ok_or("balanced record without target")?;
        ensure!(r.turns.iter().any(|t| t.label == target), "{} lacks {target}", r.id);
        *per_label.entry(target).or_default() += 1;
    }
    ensure!(per_label.len() == 7 && per_label.values().all(|&n| n == 5), "rescan {per_label:?}");
    Ok(())
}

// ---------------------------------------------------------------- criterion 7

const FAMILIES: [&str; 3] = ["meld", "emorynlp", "iemocap6"];
const SNIPPETS: [&str; 16] = [
    "|",
    "\\",
    "\n",
    "Speaker:",
    "utterance -",
    "NUMBER:",
    "Number: 99",
    "Number: 0",
    " | ",
    "\\|",
    "- ",
    "1. ",
    "Ross",
    "Woman",
    "é漢🙂",
    "\r\n",
];

fn random_text(rng: &mut ChaCha8Rng, max: usize) -> String {
    let len = rng.random_range(1..=max);
    (0..len)
        .map(|_| match rng.random_range(0..10) {
            0 => char::from_u32(rng.random_range(0..0x3000)).unwrap_or('?'),
            1 => ['|', '\\', ':', '-'][rng.random_range(0..4)],
            _ => (b'a' + rng.random_range(0..26)) as char,
        })
        .collect()
}

fn random_record(rng: &mut ChaCha8Rng, n: usize) -> DialogueRecord {
    let family = FAMILIES[rng.random_range(0..3)];
    let labels = builtin_labelset(family).unwrap();
    let cast = builtin_speakers(family).unwrap().cast().to_vec();
    let turns: Vec<Turn> = (0..rng.random_range(2..10))
        .map(|_| {
            let number = rng.random_range(1..=labels.size());
            let mut utterance = random_text(rng, 30).trim().to_string();
            if utterance.is_empty() {
                utterance.push('x');
            }
            Turn {
                speaker: cast[rng.random_range(0..cast.len())].clone(),
                utterance,
                label: labels.label_of(number).unwrap().to_string(),
                label_number: number,
            }
        })
        .collect();
    let balanced = rng.random_bool(0.5);
    let target_label = balanced.then(|| turns[rng.random_range(0..turns.len())].label.clone());
    let mut r = DialogueRecord {
        id: format!("{family}-{n:06}"),
        family_id: family.to_string(),
        mode: if balanced { Mode::Balanced } else { Mode::Natural },
        target_label,
        seed: rng.random(),
        raw_hash: String::new(),
        turns,
    };
    r.raw_hash = content_hash(&canonicalize(&r));
    r
}

fn mutate(rng: &mut ChaCha8Rng, text: &str) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    for _ in 0..rng.random_range(1..=4) {
        let at = rng.random_range(0..=chars.len());
        match rng.random_range(0..7) {
            0 if !chars.is_empty() => {
                let end = (at + rng.random_range(1..12)).min(chars.len());
                chars.drain(at.min(end)..end);
            }
            1 => {
                let s = SNIPPETS[rng.random_range(0..SNIPPETS.len())];
                chars.splice(at..at, s.chars());
            }
            2 => {
                let s = random_text(rng, 20);
                chars.splice(at..at, s.chars());
            }
            3 => chars.truncate(at),
            4 => {
                let lines: Vec<String> = chars.iter().collect::<String>().lines().map(str::to_string).collect();
                if !lines.is_empty() {
                    let mut lines = lines;
                    let i = rng.random_range(0..lines.len());
                    let j = rng.random_range(0..lines.len());
                    if rng.random_bool(0.5) {
                        lines.swap(i, j);
                    } else {
                        let dup = lines[i].clone();
                        lines.insert(j, dup);
                    }
                    chars = lines.join("\n").chars().collect();
                }
            }
            5 => {
                if let Some(pos) = chars.iter().rposition(|c| c.is_ascii_digit()) {
                    chars[pos] = (b'0' + rng.random_range(0..10)) as char;
                }
            }
            _ => {
                for c in chars.iter_mut().skip(at).take(8) {
                    *c = if c.is_ascii_lowercase() { c.to_ascii_uppercase() } else { c.to_ascii_lowercase() };
                }
            }
        }
    }
    chars.into_iter().collect()
}

/// Independent check of an accepted record, not using the library's validator.
fn sound(r: &DialogueRecord, family: &str) -> Result<(), String> {
    let labels: Vec<&str> = match family {
        "meld" => MELD.to_vec(),
        "emorynlp" => vec!["Sad", "Mad", "Scared", "Powerful", "Peaceful", "Joyful", "Neutral"],
        _ => vec!["Neutral", "Happiness", "Sadness", "Anger", "Excited", "Frustration"],
    };
    let cast: Vec<&str> = match family {
        "iemocap6" => vec!["Man", "Woman"],
        _ => vec!["Joey", "Ross", "Rachel", "Monica", "Chandler", "Phoebe"],
    };
    ensure!(r.turns.len() >= 2, "{} turns", r.turns.len());
    for t in &r.turns {
        ensure!(t.label_number >= 1 && t.label_number <= labels.len(), "label number {}", t.label_number);
        ensure!(labels[t.label_number - 1] == t.label, "label {} vs number {}", t.label, t.label_number);
        ensure!(cast.contains(&t.speaker.as_str()), "speaker {:?}", t.speaker);
        ensure!(!t.utterance.trim().is_empty(), "empty utterance");
    }
    Ok(())
}

fn parser_robustness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let provenance = |r: &DialogueRecord| Provenance {
        id: r.id.clone(),
        family_id: r.family_id.clone(),
        mode: r.mode,
        target_label: r.target_label.clone(),
        seed: r.seed,
    };
    for n in 0..10_000 {
        let r = random_record(&mut rng, n);
        let labels = builtin_labelset(&r.family_id).unwrap();
        let speakers = builtin_speakers(&r.family_id).unwrap();
        let back = parse_dialogue(&canonicalize(&r), &labels, &speakers).into_record(provenance(&r));
        ensure!(back.as_ref() == Some(&r), "round trip failed for {:?}", canonicalize(&r));
    }

    let seeds: Vec<(String, String)> = (0..200)
        .map(|n| {
            let r = random_record(&mut rng, n);
            (r.family_id.clone(), canonicalize(&r))
        })
        .collect();
    let (mut crashes, mut accepted) = (0, 0);
    for i in 0..100_000 {
        let (family, base) = &seeds[i % seeds.len()];
        let input = mutate(&mut rng, base);
        let labels = builtin_labelset(family).unwrap();
        let speakers = builtin_speakers(family).unwrap();
        match catch_unwind(AssertUnwindSafe(|| parse_dialogue(&input, &labels, &speakers))) {
            Err(_) => crashes += 1,
            Ok(outcome) => {
                let p = Provenance {
                    id: format!("fuzz-{i}"),
                    family_id: family.clone(),
                    mode: Mode::Natural,
                    target_label: None,
                    seed: 0,
                };
                if let Some(rec) = outcome.into_record(p) {
                    accepted += 1;
                    sound(&rec, family).map_err(|e| format!("accepted unsound record from {input:?}: {e}"))?;
                }
            }
        }
    }
    ensure!(crashes == 0, "{crashes} crashes");
    ensure!(accepted > 0, "no mutated input was accepted; the fuzz corpus is degenerate");
    Ok(())
}

// ---------------------------------------------------------------- criterion 8

fn corpus_conservation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rt = runtime();
    let registry = FamilyRegistry::new();
    for trial in 0..100 {
        let family_id = FAMILIES[trial % 3];
        let family = registry.get(family_id).map_err(|e| e.to_string())?;
        let synth =
            Synthesizer::new(Gateway::new(FixtureBackend::new(MockFixture::bundled()), RetryPolicy::none()), family);
        let count = rng.random_range(1..40);
        let spec = GenerationJobSpec::natural(family_id, count, rng.random());
        let records = rt.block_on(synth.run(&spec)).map_err(|e| e.to_string())?.records;

        let (a, b, c) = (rng.random_range(1..10), rng.random_range(0..5), rng.random_range(0..5));
        let t = (a + b + c) as f64;
        let ratios = SplitRatios::new(a as f64 / t, b as f64 / t, c as f64 / t).map_err(|e| e.to_string())?;
        let split = split_dataset(&records, ratios, rng.random()).map_err(|e| e.to_string())?;

        let count_labels = |rs: &[DialogueRecord]| {
            let mut m: BTreeMap<String, u64> = BTreeMap::new();
            for t in rs.iter().flat_map(|r| &r.turns) {
                *m.entry(t.label.clone()).or_default() += 1;
            }
            m
        };
        let whole = count_labels(&records);
        let mut summed: BTreeMap<String, u64> = BTreeMap::new();
        for part in [&split.train, &split.validation, &split.test] {
            for (k, v) in count_labels(part) {
                *summed.entry(k).or_default() += v;
            }
        }
        ensure!(summed == whole, "trial {trial}: label counts not conserved");

        let ids = |rs: &[DialogueRecord]| rs.iter().map(|r| r.id.clone()).collect::<BTreeSet<_>>();
        let parts = [ids(&split.train), ids(&split.validation), ids(&split.test)];
        let total: usize = parts.iter().map(BTreeSet::len).sum();
        let union: BTreeSet<String> = parts.iter().flatten().cloned().collect();
        ensure!(total == records.len() && union == ids(&records), "trial {trial}: not a partition");
        let n = records.len() as f64;
        for (part, ratio) in parts.iter().zip([ratios.train, ratios.validation, ratios.test]) {
            ensure!(
                (part.len() as f64 - ratio * n).abs() <= 1.0 + 1e-9,
                "trial {trial}: size {} vs {}",
                part.len(),
                ratio * n
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- harness

fn main() {
    let criteria: [Criterion; 8] = [
        ("score-table rank block, exact", rank_block, Duration::from_secs(1)),
        ("exact distribution, small-instance oracle", small_oracle, Duration::from_secs(1)),
        ("exact distribution, Monte-Carlo oracle", monte_carlo, Duration::from_secs(30)),
        ("published p row, calibrated", calibrated_p_row, Duration::from_secs(5)),
        ("generation determinism", generation_determinism, Duration::from_secs(10)),
        ("balanced quota enforcement", balanced_quota, Duration::from_secs(10)),
        ("parser robustness", parser_robustness, Duration::from_secs(60)),
        ("corpus conservation", corpus_conservation, Duration::from_secs(10)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| n.to_string() == *f || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let result =
            result.and_then(
                |()| {
                    if took > *budget {
                        Err(format!("took {took:.2?}, budget {budget:?}"))
                    } else {
                        Ok(())
                    }
                },
            );
        match result {
            Ok(()) => println!("criterion {n}: PASS  {name} ({took:.2?})"),
            Err(e) => {
                failed += 1;
                println!("criterion {n}: FAIL  {name} ({took:.2?}): {e}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
