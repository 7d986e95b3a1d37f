//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Benchmark criteria run the optimizer at desk scale (N = 200, ρ = 0.02)
//! on the 20-topic synthetic benchmark.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::Instant;

use ce_summ::cascade::{prepare_subqueries, tradeoff_profile, CascadeConfig, Mode, SummaryResult, TradeoffRow};
use ce_summ::cem::{optimize, update_policy, CeParams, SearchSpace, Subset};
use ce_summ::corpus::{build_corpus, AnalyzerConfig, DocumentSet, Sentence, Topic};
use ce_summ::lm::TermId;
use ce_summ::predictors::{
    predictor_value, q_cov_feedback, CandidateSummary, FeedbackDistillate, ObjectiveSpec, Predictor,
    PreparedObjective, FACTOR_FLOOR,
};
use ce_summ::rouge::{self, rouge_n, rouge_su4, RougeConfig};
use ce_summ::stats::{mean, sign_test_p, spearman};
use ce_summ::synthetic::{benchmark, SyntheticConfig, SyntheticTopic};
use common::CoverageInstance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { name, pass, detail }
}

fn desk_config(seed: u64) -> CascadeConfig {
    CascadeConfig {
        ce: CeParams {
            sample_count: 200,
            elite_fraction: 0.02,
            seed,
            ..CeParams::default()
        },
        ..CascadeConfig::default()
    }
}

struct Bench {
    topics: Vec<SyntheticTopic>,
    built: Vec<(Topic, DocumentSet)>,
}

impl Bench {
    fn load() -> Self {
        let topics = benchmark(&SyntheticConfig::default());
        let built = topics
            .iter()
            .map(|t| build_corpus(&t.corpus, &AnalyzerConfig::default()).unwrap())
            .collect();
        Self { topics, built }
    }

    fn rouge2(&self, topic: usize, result: &SummaryResult) -> f64 {
        rouge::evaluate(&result.text(), &self.topics[topic].references.references, &RougeConfig::default())
            .unwrap()
            .rouge_2
            .recall
    }

    /// Mean ROUGE-2 recall of `mode` over all topics and `seeds`.
    fn mean_rouge2(&self, seeds: &[u64], mode: Mode, tweak: impl Fn(&mut CascadeConfig) + Sync) -> (f64, Vec<SummaryResult>) {
        let jobs: Vec<(usize, u64)> = (0..self.built.len())
            .flat_map(|t| seeds.iter().map(move |&s| (t, s)))
            .collect();
        let runs: Vec<(f64, SummaryResult)> = jobs
            .par_iter()
            .map(|&(t, seed)| {
                let mut cfg = desk_config(seed);
                tweak(&mut cfg);
                let (topic, docs) = &self.built[t];
                let r = ce_summ::summarize(topic, docs, &cfg, mode).unwrap();
                (self.rouge2(t, &r), r)
            })
            .collect();
        let scores: Vec<f64> = runs.iter().map(|(s, _)| *s).collect();
        (mean(&scores), runs.into_iter().map(|(_, r)| r).collect())
    }
}

fn policy_update_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=60);
        let size = rng.gen_range(1..=100);
        let elite: Vec<Vec<usize>> = (0..size)
            .map(|_| (0..n).filter(|_| rng.gen_bool(0.4)).collect())
            .collect();
        let subsets: Vec<Subset> = elite
            .iter()
            .map(|m| Subset {
                members: m.clone(),
                total_words: 0,
            })
            .collect();
        let refs: Vec<&Subset> = subsets.iter().collect();
        let policy = update_policy(&refs, n);
        for (p, (count, m)) in policy.0.iter().zip(common::literal_policy(&elite, n)) {
            if *p != count as f64 / m as f64 || (*p * m as f64).round() as usize != count {
                mismatches += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        "policy update equals literal elite count",
        mismatches == 0 && secs < 5.0,
        format!("1000 sets, {mismatches} mismatches, {secs:.2}s"),
    )
}

fn optimizer_quality() -> Outcome {
    let start = Instant::now();
    let results: Vec<(f64, f64)> = (0..50u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(10_000 + k);
            let n = rng.gen_range(10..=15);
            let inst = CoverageInstance::random(&mut rng, n);
            let params = CeParams {
                sample_count: 2000,
                elite_fraction: 0.05,
                seed: k,
                ..CeParams::default()
            };
            let space = SearchSpace::new(inst.lengths.clone());
            let out = optimize(&|s: &Subset| inst.value(&s.members), &space, inst.budget, &params, None).unwrap();
            (inst.value(&out.best.members), inst.optimum())
        })
        .collect();
    let good = results.iter().filter(|(got, opt)| *got >= 0.98 * opt).count();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        "optimizer reaches 98% of brute-force optimum",
        good as f64 >= 0.95 * results.len() as f64 && secs < 120.0,
        format!("{good}/50 instances, {secs:.1}s"),
    )
}

fn predictor_oracles() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(20_000 + k);
        let file = common::random_corpus(&mut rng, "t");
        let (topic, docs) = build_corpus(&file, &AnalyzerConfig::default()).unwrap();
        let pool: Vec<Sentence> = docs.sentences().cloned().collect();
        let all: Vec<&Sentence> = pool.iter().collect();
        let mut members: Vec<usize> = (0..pool.len()).filter(|_| rng.gen_bool(0.5)).collect();
        if members.is_empty() {
            members.push(0);
        }
        let chosen: Vec<&Sentence> = members.iter().map(|&i| &pool[i]).collect();
        let mut feedback: Vec<TermId> = (0..docs.vocabulary.len() as u32)
            .filter(|_| rng.gen_bool(0.3))
            .map(TermId)
            .collect();
        feedback.sort_unstable();
        let b = rng.gen_range(0.0..50.0);
        let query = Arc::new(prepare_subqueries(&topic, 100));
        let raw: Vec<Vec<TermId>> = (0..topic.questions.len()).map(|i| topic.subquery_terms(i, 100)).collect();
        let expected = common::all_predictors(&chosen, &all, &raw, &feedback, b);
        let distillate = FeedbackDistillate {
            salient_terms: feedback,
            avg_position: b,
        };
        let summary = CandidateSummary::new(&pool, &members);
        for (p, want) in Predictor::ALL.into_iter().zip(expected) {
            let spec = ObjectiveSpec::new(vec![p], b, Some(distillate.clone()), query.clone()).unwrap();
            let direct = predictor_value(p, &spec, &summary, &docs).unwrap();
            let prepared = PreparedObjective::new(&spec, &docs, &pool, usize::MAX).unwrap().score(&members);
            worst = worst
                .max((direct - want).abs())
                .max((prepared - want.max(FACTOR_FLOOR)).abs());
        }
    }
    outcome(
        "seven predictors match straight-line oracles",
        worst <= 1e-9,
        format!("200 corpora, max abs error {worst:.2e}"),
    )
}

fn tradeoff_shape(bench: &Bench) -> Outcome {
    let budgets = [250, 500, 1000, 1500];
    let xs: Vec<f64> = budgets.iter().map(|&b| b as f64).collect();
    let tables: Vec<Vec<TradeoffRow>> = bench
        .built
        .par_iter()
        .map(|(topic, docs)| tradeoff_profile(topic, docs, &desk_config(0), &budgets).unwrap())
        .collect();
    let (mut sal_up, mut sal_n, mut foc_down, mut foc_n) = (0, 0, 0, 0);
    for rows in &tables {
        let (mut sal, mut foc) = (Vec::new(), Vec::new());
        for row in rows {
            if let TradeoffRow::Solved { saliency, focus, .. } = row {
                sal.push(*saliency);
                foc.push(*focus);
            }
        }
        if sal.len() != budgets.len() {
            continue;
        }
        let (rs, rf) = (spearman(&xs, &sal), spearman(&xs, &foc));
        // Zero correlations are ties and carry no sign.
        sal_n += usize::from(rs != 0.0);
        sal_up += usize::from(rs > 0.0);
        foc_n += usize::from(rf != 0.0);
        foc_down += usize::from(rf < 0.0);
    }
    let (p_sal, p_foc) = (sign_test_p(sal_up, sal_n), sign_test_p(foc_down, foc_n));
    outcome(
        "saliency rises and focus falls with budget",
        p_sal < 0.05 && p_foc < 0.05,
        format!("saliency up {sal_up}/{sal_n} (p={p_sal:.2e}), focus down {foc_down}/{foc_n} (p={p_foc:.2e})"),
    )
}

fn cascade_benefit(bench: &Bench) -> Outcome {
    let seeds: Vec<u64> = (0..30).collect();
    let (dual_r2, dual_runs) = bench.mean_rouge2(&seeds, Mode::Dual, |_| {});
    let (plus_r2, plus_runs) = bench.mean_rouge2(&seeds, Mode::CesPlus, |_| {});
    let (mut fb_dual, mut fb_plus) = (0.0, 0.0);
    for (d, p) in dual_runs.iter().zip(&plus_runs) {
        let fb = d.distillate.as_ref().unwrap();
        fb_dual += f64::from(q_cov_feedback(&d.summary.summary, fb));
        fb_plus += f64::from(q_cov_feedback(&p.summary.summary, fb));
    }
    let runs = dual_runs.len() as f64;
    let (fb_dual, fb_plus) = (fb_dual / runs, fb_plus / runs);
    outcome(
        "two-step cascade beats single-step baseline",
        dual_r2 >= plus_r2 && fb_dual > fb_plus,
        format!(
            "ROUGE-2 R dual {dual_r2:.4} vs ces+ {plus_r2:.4}; distilled-term coverage {fb_dual:.2} vs {fb_plus:.2} ({} runs each)",
            dual_runs.len()
        ),
    )
}

const SWEEP: [usize; 7] = [500, 750, 1000, 1250, 1500, 1750, 2000];
const SWEEP_SEEDS: [u64; 2] = [0, 1];

fn length_sweep(bench: &Bench) -> Vec<f64> {
    SWEEP
        .iter()
        .map(|&l_bar| bench.mean_rouge2(&SWEEP_SEEDS, Mode::Dual, move |c| c.l_bar = l_bar).0)
        .collect()
}

fn sweep_robustness(sweep: &[f64]) -> Outcome {
    let hi = sweep.iter().copied().fold(f64::MIN, f64::max);
    let lo = sweep.iter().copied().fold(f64::MAX, f64::min);
    let spread = (hi - lo) / hi;
    let values: Vec<String> = SWEEP.iter().zip(sweep).map(|(l, v)| format!("{l}:{v:.4}")).collect();
    outcome(
        "saliency budget sweep changes ROUGE-2 by < 5%",
        spread < 0.05,
        format!("relative spread {:.2}% [{}]", spread * 100.0, values.join(" ")),
    )
}

fn adaptive_convergence(bench: &Bench, sweep: &[f64]) -> Outcome {
    let (r2, runs) = bench.mean_rouge2(&SWEEP_SEEDS, Mode::DualAdaptive, |_| {});
    let mut unstable = 0;
    for r in &runs {
        let step1 = r.step1.as_ref().unwrap();
        // Limits in force at each iteration, then the limit after the last update.
        let mut lengths: Vec<f64> = step1.trace.iter().map(|t| t.length_limit).collect();
        lengths.push(step1.final_length.unwrap());
        let tail: Vec<f64> = lengths.iter().rev().take(6).copied().collect();
        if tail.len() < 6 || tail.windows(2).any(|w| (w[0] - w[1]).abs() >= 0.01 * w[1]) {
            unstable += 1;
        }
    }
    let best = sweep.iter().copied().fold(f64::MIN, f64::max);
    let finals: Vec<f64> = runs.iter().map(|r| r.step1.as_ref().unwrap().final_length.unwrap()).collect();
    outcome(
        "adaptive length stabilizes near best fixed budget",
        unstable == 0 && r2 >= 0.98 * best,
        format!(
            "{unstable}/{} traces unstable; ROUGE-2 R {r2:.4} vs best fixed {best:.4} ({:.1}%); mean final L {:.0}",
            runs.len(),
            100.0 * r2 / best,
            mean(&finals)
        ),
    )
}

fn rouge_fixtures() -> Outcome {
    let cfg = RougeConfig {
        stemming: false,
        ..RougeConfig::default()
    };
    let mut mismatches = Vec::new();
    for (i, (cand, refs)) in common::rouge::FIXTURES.iter().enumerate() {
        let c: Vec<String> = cand.split_whitespace().map(str::to_string).collect();
        let r: Vec<Vec<String>> = refs.iter().map(|r| r.split_whitespace().map(str::to_string).collect()).collect();
        let oracle_refs: Vec<Vec<&str>> = refs.iter().map(|r| r.split_whitespace().collect()).collect();
        let oracle = common::rouge::all(&cand.split_whitespace().collect::<Vec<_>>(), &oracle_refs);
        let got = [
            rouge_n(&c, &r, 1, &cfg).unwrap(),
            rouge_n(&c, &r, 2, &cfg).unwrap(),
            rouge_su4(&c, &r, &cfg).unwrap(),
        ];
        for ((name, want), s) in oracle.into_iter().zip(got) {
            if (s.recall, s.precision, s.f) != want {
                mismatches.push(format!("#{i} {name}"));
            }
        }
    }
    outcome(
        "ROUGE fixtures match counting oracle",
        mismatches.is_empty(),
        format!("20 fixtures x 3 metrics, mismatches: {mismatches:?}"),
    )
}

fn run_cli(args: &[&str], threads: usize) -> bool {
    Command::new(env!("CARGO_BIN_EXE_ce-summ"))
        .args(args)
        .env("CE_SUMM_THREADS", threads.to_string())
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let bench = root.join("bench");
    let cfg = root.join("cfg.json");
    fs::write(&cfg, r#"{"ce": {"sample_count": 100, "elite_fraction": 0.05}}"#).unwrap();
    let mut ok = run_cli(&["synth", "--out", bench.to_str().unwrap(), "--topics", "2"], 1);
    let mut outputs = Vec::new();
    for threads in [1, 4, 16] {
        let out = root.join(format!("out{threads}"));
        let o = out.to_str().unwrap();
        let corpus = bench.join("corpus");
        let refs = bench.join("references");
        let (c, r, k) = (corpus.to_str().unwrap(), refs.to_str().unwrap(), cfg.to_str().unwrap());
        for mode in ["dual", "dual-adaptive", "ces-plus"] {
            let dir = format!("{o}/{mode}");
            ok &= run_cli(
                &["summarize", "--corpus", c, "--config", k, "--mode", mode, "--runs", "2", "--references", r, "--out", &dir],
                threads,
            );
            ok &= run_cli(
                &["evaluate", "--summaries", &format!("{dir}/summaries"), "--references", r, "--out", &format!("{dir}/scores.csv")],
                threads,
            );
        }
        ok &= run_cli(
            &["profile", "--corpus", c, "--config", k, "--out", &format!("{o}/profile.csv")],
            threads,
        );
        outputs.push(tree(&out));
    }
    let files = outputs[0].len();
    let same = outputs[1] == outputs[0] && outputs[2] == outputs[0];
    outcome(
        "outputs byte-identical across 1, 4 and 16 workers",
        ok && same && files > 0,
        format!("{files} files per run, commands ok: {ok}"),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut results = vec![policy_update_exactness(), optimizer_quality(), predictor_oracles()];
    let bench = Bench::load();
    results.push(tradeoff_shape(&bench));
    results.push(cascade_benefit(&bench));
    let sweep = length_sweep(&bench);
    results.push(adaptive_convergence(&bench, &sweep));
    results.push(sweep_robustness(&sweep));
    results.push(rouge_fixtures());
    results.push(determinism());

    for r in &results {
        println!("{} {}: {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed in {:.0}s",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
