//! Acceptance checks. Prints one PASS or FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kpa_core::evaluation::{
    annotator_kappa, cohen_kappa, confusion_metrics, fleiss_kappa, precision_at_coverage, split_consistency,
    AnnotationRecord, AnnotationSet, Judgment,
};
use kpa_core::extraction::extract_candidates;
use kpa_core::ingest::filter_comments;
use kpa_core::pipeline::{run_matching_eval, Fold, FoldSpec};
use kpa_core::policies::apply_policy;
use kpa_core::scoring::ScoreTable;
use kpa_core::selection::{get_matches, select_key_points, Item, ItemKind, KeyPoint};
use kpa_core::{
    AnalysisConfig, CandidateConfig, Comment, Domain, FilterConfig, LabeledPair, MatchScorer, Policy, Stance,
};

// Tolerances and sizes.
const ORACLE_INSTANCES: usize = 500;
const ORACLE_BUDGET: Duration = Duration::from_secs(5);
const F1_TOLERANCE: f64 = 0.002;
const COVERAGE_SAMPLES: usize = 1000;
const CLI_BUDGET: Duration = Duration::from_secs(10);

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn data(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(path)
}

// ---------------------------------------------------------------------------
// Key point selection, transcribed step by step without library code. Nodes are
// comments or candidates; `score(x, k)` is the directional match score of
// node x against candidate k.

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Node {
    C(usize),
    K(usize),
}

struct Instance {
    comments: usize,
    candidates: usize,
    t: f64,
    // [node][candidate], comment rows first, then candidate rows.
    scores: Vec<Vec<f64>>,
}

impl Instance {
    fn score(&self, x: Node, k: usize) -> f64 {
        match x {
            Node::C(i) => self.scores[i][k],
            Node::K(j) => self.scores[self.comments + j][k],
        }
    }

    fn oracle_get_matches(&self, c: &[Node], k: &[usize]) -> BTreeMap<usize, Vec<Node>> {
        let mut k_to_c: BTreeMap<usize, Vec<Node>> = BTreeMap::new();
        for &x in c {
            let mut match_c = k[0];
            for &kk in &k[1..] {
                if self.score(x, kk) > self.score(x, match_c) {
                    match_c = kk;
                }
            }
            if self.score(x, match_c) > self.t {
                k_to_c.entry(match_c).or_default().push(x);
            }
        }
        k_to_c
    }

    fn oracle_select(&self) -> Vec<(usize, BTreeSet<Node>)> {
        let c: Vec<Node> = (0..self.comments).map(Node::C).collect();
        let all: Vec<usize> = (0..self.candidates).collect();
        let mut k_to_c = self.oracle_get_matches(&c, &all);
        let mut k: Vec<usize> = k_to_c.keys().copied().collect();
        k.sort_by(|a, b| k_to_c[b].len().cmp(&k_to_c[a].len()));
        let mut r: Vec<Node> = Vec::new();
        for (i, &k1) in k.iter().enumerate() {
            for &k2 in &k[..i] {
                let s = (self.score(Node::K(k1), k2) + self.score(Node::K(k2), k1)) / 2.0;
                if s > self.t {
                    r.push(Node::K(k1));
                    r.extend(k_to_c.remove(&k1).unwrap());
                    break;
                }
            }
        }
        let kps: Vec<usize> = k_to_c.keys().copied().collect();
        if !r.is_empty() && !kps.is_empty() {
            for (kp, extra) in self.oracle_get_matches(&r, &kps) {
                k_to_c.get_mut(&kp).unwrap().extend(extra);
            }
        }
        let mut out: Vec<(usize, BTreeSet<Node>)> =
            k_to_c.into_iter().map(|(kp, v)| (kp, v.into_iter().collect())).collect();
        out.sort_by_key(|(_, nodes)| std::cmp::Reverse(nodes.len()));
        out
    }

    fn random(rng: &mut ChaCha8Rng) -> Self {
        let comments = rng.gen_range(1..=15);
        let candidates = rng.gen_range(1..=6);
        let t = rng.gen_range(3..=9) as f64 / 10.0;
        let scores = (0..comments + candidates)
            .map(|_| (0..candidates).map(|_| rng.gen_range(0..=20) as f64 / 20.0).collect())
            .collect();
        Instance {
            comments,
            candidates,
            t,
            scores,
        }
    }

    fn library_select(&self) -> Result<Vec<(usize, BTreeSet<Node>)>, String> {
        let cid = |i: usize| format!("c{i:02}");
        let kid = |j: usize| format!("k{j:02}");
        let mut table = ScoreTable::new().strict(true);
        for j in 0..self.candidates {
            for i in 0..self.comments {
                table.insert(&cid(i), &kid(j), "t", self.scores[i][j]).unwrap();
            }
            for j2 in 0..self.candidates {
                table.insert(&kid(j2), &kid(j), "t", self.scores[self.comments + j2][j]).unwrap();
            }
        }
        let items: Vec<Item> = (0..self.comments).map(|i| Item::comment(cid(i), cid(i))).collect();
        let cands: Vec<KeyPoint> = (0..self.candidates).map(|j| KeyPoint::new(kid(j), kid(j))).collect();
        let results = select_key_points(&items, &cands, self.t, "t", &table).map_err(|e| e.to_string())?;
        let index = |id: &str| id[1..].parse::<usize>().unwrap();
        Ok(results
            .into_iter()
            .map(|r| {
                let nodes = r
                    .matched
                    .iter()
                    .map(|m| match m.kind {
                        ItemKind::Comment => Node::C(index(&m.id)),
                        ItemKind::Candidate => Node::K(index(&m.id)),
                    })
                    .collect();
                (index(&r.key_point.id), nodes)
            })
            .collect())
    }
}

fn selection_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_210_601);
    let mut nonempty = 0;
    for n in 0..ORACLE_INSTANCES {
        let inst = Instance::random(&mut rng);
        let expected = inst.oracle_select();
        let got = inst.library_select()?;
        if got != expected {
            return Err(format!("instance {n} (t={}): oracle {expected:?}, library {got:?}", inst.t));
        }
        nonempty += usize::from(!expected.is_empty());
    }
    let elapsed = start.elapsed();
    if elapsed > ORACLE_BUDGET {
        return Err(format!("took {elapsed:?}, budget {ORACLE_BUDGET:?}"));
    }
    Ok(format!(
        "{ORACLE_INSTANCES} instances identical ({nonempty} with key points) in {:.2}s",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------------------

fn reported_f1() -> Outcome {
    // (tp, fp, fn) with 1000 gold positives: recall = tp / 1000 and
    // precision = tp / (tp + fp) round to the reported pair.
    let rows = [
        ("ALBERT BM+TH", 751, 105, 249, 0.877, 0.751, 0.809),
        ("RoBERTa BM+TH", 711, 126, 289, 0.849, 0.711, 0.773),
    ];
    let mut notes = Vec::new();
    for (name, tp, fp, fn_, p, r, f1) in rows {
        let m = confusion_metrics(tp, fp, fn_, 0).map_err(|e| e.to_string())?;
        if (m.precision - p).abs() > 0.0005 || (m.recall - r).abs() > 0.0005 {
            return Err(format!("{name}: counts give P={:.4} R={:.4}", m.precision, m.recall));
        }
        if (m.f1 - f1).abs() > F1_TOLERANCE {
            return Err(format!("{name}: F1 {:.4} vs {f1}", m.f1));
        }
        notes.push(format!("{name} F1 {:.4} vs {f1}", m.f1));
    }
    Ok(notes.join(", "))
}

// ---------------------------------------------------------------------------

fn coverage_curve() -> Outcome {
    let levels = [0.2, 0.4, 0.6, 0.8, 1.0];
    let fixture = [(true, 0.9), (true, 0.8), (false, 0.7), (true, 0.6), (false, 0.5)];
    let curve = precision_at_coverage(&fixture, &levels).map_err(|e| e.to_string())?;
    if curve.precision_at != [1.0, 1.0, 0.75, 0.75, 0.6] {
        return Err(format!("fixture curve {:?}", curve.precision_at));
    }
    let fine: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 0..COVERAGE_SAMPLES {
        let len = rng.gen_range(1..=40);
        let sample: Vec<(bool, f64)> = (0..len)
            .map(|_| (rng.gen_bool(0.6), rng.gen_range(0..=10) as f64 / 10.0))
            .collect();
        let curve = precision_at_coverage(&sample, &fine).map_err(|e| e.to_string())?;
        if curve.precision_at.windows(2).any(|w| w[1] > w[0]) {
            return Err(format!("sample {n} not nonincreasing: {:?}", curve.precision_at));
        }
    }
    Ok(format!("fixture exact, {COVERAGE_SAMPLES} random samples nonincreasing"))
}

// ---------------------------------------------------------------------------

fn definition_level(scores: &[f64], policy: &Policy) -> BTreeSet<usize> {
    let above = |t: f64| -> BTreeSet<usize> { (0..scores.len()).filter(|&k| scores[k] > t).collect() };
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let best = (0..scores.len()).find(|&k| scores[k] == max).unwrap();
    match *policy {
        Policy::Threshold(t) => above(t),
        Policy::BestMatch => BTreeSet::from([best]),
        Policy::BestMatchThreshold(t) => above(t).intersection(&BTreeSet::from([best])).copied().collect(),
    }
}

fn policy_semantics() -> Outcome {
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut policies = vec![Policy::BestMatch];
    for &t in &grid {
        policies.push(Policy::Threshold(t));
        policies.push(Policy::BestMatchThreshold(t));
    }
    let mut checked = 0usize;
    for n in 1..=4u32 {
        for code in 0..grid.len().pow(n) {
            let mut rest = code;
            let scores: Vec<f64> = (0..n)
                .map(|_| {
                    let s = grid[rest % grid.len()];
                    rest /= grid.len();
                    s
                })
                .collect();
            let map: BTreeMap<usize, f64> = scores.iter().copied().enumerate().collect();
            for policy in &policies {
                let got = apply_policy(&map, policy).map_err(|e| e.to_string())?;
                let expected = definition_level(&scores, policy);
                if got != expected {
                    return Err(format!("{policy} on {scores:?}: {got:?} vs {expected:?}"));
                }
                checked += 1;
            }
        }
    }

    // A score equal to the threshold never matches, through every entry point.
    for &t in &grid {
        let map = BTreeMap::from([(0usize, t)]);
        for policy in [Policy::Threshold(t), Policy::BestMatchThreshold(t)] {
            if !apply_policy(&map, &policy).map_err(|e| e.to_string())?.is_empty() {
                return Err(format!("{policy} matched a score equal to t"));
            }
        }
        let mut table = ScoreTable::new().strict(true);
        table.insert("c", "k", "t", t).unwrap();
        let matches = get_matches(&[Item::comment("c", "c")], &[KeyPoint::new("k", "k")], t, "t", &table)
            .map_err(|e| e.to_string())?;
        if !matches.is_empty() {
            return Err(format!("get_matches matched a score equal to t={t}"));
        }
    }
    Ok(format!("{checked} policy applications agree; equality never matches"))
}

// ---------------------------------------------------------------------------

fn filter_conformance() -> Outcome {
    const TOPIC: &str = "We should subsidize public transport";
    let long_comment = "Cheaper fares would let families, students, retirees and shift workers reach jobs, \
                        schools, clinics and markets across the whole region every single day without owning \
                        or insuring or parking a private car at all";
    let corpus: [(&str, &str, f64); 14] = [
        ("good1", "Cheap buses cut traffic in the city.", 0.95),
        ("good2", "Subsidies make transport affordable for students.", 0.9),
        ("good3", "Public transport reduces air pollution a lot.", 0.88),
        ("good4", "Fare subsidies help low income workers.", 0.85),
        ("good5", "More riders make routes more efficient.", 0.8),
        ("good6", "Subsidized trains ease road congestion.", 0.75),
        ("ascii", "Subsidies make the caf\u{e9} district reachable.", 0.9),
        ("short", "a b c d e", 0.9),
        ("few", "Absolutely essential subsidies.", 0.9),
        ("long", long_comment, 0.9),
        ("lowq", "Buses are buses and that is fine.", 0.1),
        ("pronoun", "They make commuting cheaper for everyone.", 0.9),
        ("captok", "Subsidized public transport gives every single resident a fair chance to travel daily.", 0.9),
        ("subq", "Transport subsidies are a reasonable policy.", 0.65),
    ];
    let mut table = ScoreTable::new().strict(true);
    let comments: Vec<Comment> = corpus
        .iter()
        .map(|(id, text, q)| {
            table.insert_quality(text, TOPIC, *q).unwrap();
            Comment::for_domain(*id, TOPIC, Some(Stance::Pro), *text, Domain::Arguments).unwrap()
        })
        .collect();
    let survivors = filter_comments(&comments, &FilterConfig::for_domain(Domain::Arguments), Some(&table))
        .map_err(|e| e.to_string())?;
    let ids: Vec<&str> = survivors.iter().map(|c| c.id.as_str()).collect();
    let expected = ["good1", "good2", "good3", "good4", "good5", "good6", "pronoun", "captok", "subq"];
    if ids != expected {
        return Err(format!("filter survivors {ids:?}"));
    }
    let candidates = extract_candidates(&survivors, &CandidateConfig::for_domain(Domain::Arguments), &table)
        .map_err(|e| e.to_string())?;
    let ids: BTreeSet<&str> = candidates.iter().map(|c| c.id.as_str()).collect();
    let expected: BTreeSet<&str> = ["good1", "good2", "good3", "good4", "good5", "good6"].into();
    if ids != expected {
        return Err(format!("candidates {ids:?}"));
    }
    Ok("8 violations removed, 6 clean comments survive as candidates".into())
}

// ---------------------------------------------------------------------------

fn agreement() -> Outcome {
    let a = [true, true, true, true, false, false, false, false, true, false];
    let b = [true, true, true, false, false, false, false, true, true, false];
    let k = cohen_kappa(&a, &b).map_err(|e| e.to_string())?;
    if k != 0.6 {
        return Err(format!("Cohen 4/4/2 fixture gives {k}"));
    }
    if cohen_kappa(&a, &a).map_err(|e| e.to_string())? != 1.0 {
        return Err("Cohen perfect agreement is not 1".into());
    }
    let unanimous = vec![vec![5, 0], vec![0, 5], vec![5, 0]];
    if fleiss_kappa(&unanimous).map_err(|e| e.to_string())? != 1.0 {
        return Err("Fleiss unanimous is not 1".into());
    }

    // a0..a5 judge the same 60 items; a6 shares only 3 items with them.
    let record = |c: usize, a: &str, j: Judgment| AnnotationRecord {
        comment_id: format!("c{c}"),
        key_point_id: "k".into(),
        annotator_id: a.into(),
        judgment: j,
    };
    let mut records = Vec::new();
    for c in 0..60 {
        let j = if c % 3 == 0 { Judgment::Match } else { Judgment::NoMatch };
        for a in 0..6 {
            records.push(record(c, &format!("a{a}"), j));
        }
        if c < 3 {
            records.push(record(c, "a6", j));
        }
    }
    let set = AnnotationSet::from_records(records).map_err(|e| e.to_string())?;
    let kappas = annotator_kappa(&set, 50, 5);
    let eligible: Vec<&str> = kappas.keys().map(String::as_str).collect();
    if eligible != ["a0", "a1", "a2", "a3", "a4", "a5"] {
        return Err(format!("eligible annotators {eligible:?}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut set14 = AnnotationSet::new();
    for c in 0..40 {
        for a in 0..14 {
            let j = if rng.gen_bool(0.5) { Judgment::Match } else { Judgment::NoMatch };
            set14.insert(record(c, &format!("r{a:02}"), j)).map_err(|e| e.to_string())?;
        }
    }
    let runs: Vec<f64> = (0..3)
        .map(|_| split_consistency(&set14, 11))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    if runs.iter().any(|r| r != &runs[0]) {
        return Err(format!("split consistency varies for one seed: {runs:?}"));
    }
    Ok(format!(
        "Cohen 0.6, perfect 1, Fleiss unanimous 1, a6 excluded, split consistency {:.3} stable",
        runs[0]
    ))
}

// ---------------------------------------------------------------------------

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let table = format!("table:{}", data("mini/scores.jsonl").display());
    let start = Instant::now();
    let mut reports = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("report{run}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_kpa"))
            .arg("analyze")
            .arg("--input")
            .arg(data("mini/comments.jsonl"))
            .arg("--config")
            .arg(data("mini/config.toml"))
            .args(["--scorer", &table, "--seed", "42", "--out"])
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("kpa analyze exited with {status}"));
        }
        reports.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    let elapsed = start.elapsed();
    if reports[0] != reports[1] {
        return Err("structured reports differ".into());
    }
    if elapsed > CLI_BUDGET {
        return Err(format!("two runs took {elapsed:?}"));
    }
    Ok(format!(
        "two runs byte-identical ({} bytes) in {:.2}s",
        reports[0].len(),
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------------------

fn gold_cross_validation() -> Outcome {
    let mut pairs = Vec::new();
    for t in 0..28 {
        let topic = format!("topic {t:02}");
        for c in 0..3 {
            for k in 0..3 {
                pairs.push(LabeledPair::new(
                    &topic,
                    &format!("comment {t}-{c}"),
                    &format!("key point {t}-{k}"),
                    c == k,
                ));
            }
        }
    }
    let topics: Vec<String> = pairs.iter().map(|p| p.topic.clone()).collect();
    let spec = FoldSpec::build(&topics, 4, 4, 2021).map_err(|e| e.to_string())?;
    let sizes: Vec<(usize, usize, usize)> = spec
        .folds
        .iter()
        .map(|f| (f.train.len(), f.dev.len(), f.test.len()))
        .collect();
    if sizes.iter().any(|s| *s != (17, 4, 7)) {
        return Err(format!("fold sizes {sizes:?}"));
    }
    let gold: Arc<dyn MatchScorer> = Arc::new(ScoreTable::gold(&pairs).strict(true));
    let provider = |_: usize, _: &Fold| -> kpa_core::Result<Arc<dyn MatchScorer>> { Ok(gold.clone()) };
    let table = run_matching_eval(&pairs, &spec, &provider, &kpa_core::PolicyKind::ALL).map_err(|e| e.to_string())?;
    for fold in &table.folds {
        for r in &fold.results {
            let m = &r.metrics;
            if m.precision != 1.0 || m.recall != 1.0 || m.f1 != 1.0 {
                return Err(format!("fold {} {}: {m:?}", fold.fold, r.policy));
            }
        }
    }
    Ok(format!("{} folds x {} policies at P=R=F1=1", table.folds.len(), kpa_core::PolicyKind::ALL.len()))
}

// ---------------------------------------------------------------------------

fn lexical_smoke() -> Outcome {
    let cfg = AnalysisConfig::load(data("smoke/config.toml"), None).map_err(|e| e.to_string())?;
    let output = Command::new(env!("CARGO_BIN_EXE_kpa"))
        .arg("analyze")
        .arg("--input")
        .arg(data("smoke/comments.jsonl"))
        .arg("--config")
        .arg(data("smoke/config.toml"))
        .args(["--scorer", "lexical"])
        .output()
        .map_err(|e| e.to_string())?;
    if !output.status.success() {
        return Err(format!("kpa analyze failed: {}", String::from_utf8_lossy(&output.stderr)));
    }
    let result = kpa_core::pipeline::parse_report(&String::from_utf8_lossy(&output.stdout)).map_err(|e| e.to_string())?;
    let comments: usize = result.units.iter().map(|u| u.comment_count).sum();
    let kps = result.key_point_count();
    if comments != 100 || kps == 0 {
        return Err(format!("{comments} comments, {kps} key points"));
    }
    if result.units.iter().any(|u| u.key_points.len() > cfg.max_kps) {
        return Err("a unit exceeds max_kps".into());
    }
    Ok(format!("{comments} comments, {kps} key points over {} topics", result.units.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 9] = [
        ("selection oracle equivalence", selection_oracle),
        ("reported F1 identity", reported_f1),
        ("precision at coverage", coverage_curve),
        ("policy semantics", policy_semantics),
        ("filter conformance", filter_conformance),
        ("agreement statistics", agreement),
        ("end-to-end determinism", cli_determinism),
        ("oracle-scorer cross-validation", gold_cross_validation),
        ("lexical smoke analysis", lexical_smoke),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
