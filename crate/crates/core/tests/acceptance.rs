//! End-to-end acceptance checks. Each check prints one `PASS`/`FAIL` line;
//! the test fails if any check fails.

use std::fs;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hdp_svb::baselines::{Pcvb0, Pcvb0Config, ScvbConfig};
use hdp_svb::corpus::{split_heldout_documents, Document};
use hdp_svb::counts::TopicWordCounts;
use hdp_svb::eval::{
    csv_path, heldout_perplexity, run_experiment, Algorithm, Execution, ExperimentConfig, HeldOutConfig,
};
use hdp_svb::hdp_state::{batch_update_alpha, batch_update_uv, effective_topics, stick_breaking, update_gamma};
use hdp_svb::numerics::{digamma, ScheduleParams};
use hdp_svb::pcsvb0::{compute_qz, update_doc_counts, update_topic_counts};
use hdp_svb::synthetic::{generate, SyntheticSpec};
use hdp_svb::{Corpus, DocState, GlobalState, Pcsvb0, TrainerConfig};

struct Report {
    lines: Vec<String>,
    failed: usize,
}

impl Report {
    fn new() -> Self {
        Self {
            lines: Vec::new(),
            failed: 0,
        }
    }

    fn check(&mut self, name: &str, ok: bool, detail: String) {
        let line = format!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        println!("{line}");
        if !ok {
            self.failed += 1;
        }
        self.lines.push(line);
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn random_q(rng: &mut impl Rng, t: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..t).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

fn random_corpus(rng: &mut impl Rng, docs: usize, max_len: usize, v: usize) -> Corpus {
    let documents = (0..docs)
        .map(|_| {
            let n = rng.random_range(2..=max_len);
            Document::new((0..n).map(|_| rng.random_range(0..v)).collect())
        })
        .collect();
    Corpus::new(documents, v)
}

fn invariants(report: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = 12;
    let v = 40;
    let corpus = random_corpus(&mut rng, 20, 60, v);
    let mut global = GlobalState::initialize(&corpus, t, 0.01, 1.0, 1.0, &mut rng);
    let mut doc = DocState::uniform(rng.random_range(1..200), t);
    let mut worst_doc: f64 = 0.0;
    let mut worst_corpus: f64 = 0.0;
    let mut worst_q: f64 = 0.0;
    let mut worst_pi: f64 = 0.0;
    let mut negative = false;
    for step in 0..10_000 {
        if step % 100 == 0 {
            doc = DocState::uniform(rng.random_range(1..200), t);
            let u: Vec<f64> = (0..t).map(|_| rng.random_range(0.01..100.0)).collect();
            let w: Vec<f64> = (0..t).map(|_| rng.random_range(0.01..100.0)).collect();
            global.sticks.u = u;
            global.sticks.v = w;
            global.sticks.alpha = rng.random_range(0.01..10.0);
            global.sticks.recompute_pi();
            let pi = stick_breaking(&global.sticks.u, &global.sticks.v).unwrap();
            worst_pi = worst_pi.max((pi.iter().sum::<f64>() - 1.0).abs());
        }
        let w = rng.random_range(0..v);
        let q = if step % 2 == 0 {
            compute_qz(&doc, &global, w).unwrap()
        } else {
            random_q(&mut rng, t)
        };
        worst_q = worst_q.max((q.iter().sum::<f64>() - 1.0).abs());
        let rho_d = rng.random_range(1e-6..=1.0);
        let rho_c = rng.random_range(1e-6..=1.0);
        update_doc_counts(&mut doc, &q, rho_d).unwrap();
        update_topic_counts(&mut global, &q, w, rho_c).unwrap();
        worst_doc = worst_doc.max(rel(doc.n_dk.iter().sum(), doc.n_d));
        worst_corpus = worst_corpus.max(rel(global.counts.total_mass(), global.n_total));
        negative |= doc.n_dk.iter().any(|&x| x < 0.0) || global.counts.to_topic_major().iter().any(|&x| x < 0.0);
    }
    let elapsed = start.elapsed();
    let ok = worst_doc <= 1e-6
        && worst_corpus <= 1e-6
        && worst_q <= 1e-12
        && worst_pi <= 1e-12
        && !negative
        && elapsed < Duration::from_secs(10);
    report.check(
        "1 invariant suite",
        ok,
        format!(
            "doc mass {worst_doc:.2e}, corpus mass {worst_corpus:.2e}, q sum {worst_q:.2e}, pi sum {worst_pi:.2e}, negative={negative}, {elapsed:.2?}"
        ),
    );
}

/// Recomputes every excluded count from the stored posteriors for each token.
fn brute_force_sweep(
    corpus: &Corpus,
    store: &mut [Vec<Vec<f64>>],
    prior: &[f64],
    beta: f64,
    t: usize,
) -> Vec<Vec<f64>> {
    let v = corpus.vocab_size;
    let mut out = Vec::new();
    for (d, doc) in corpus.documents.iter().enumerate() {
        for (i, &w) in doc.tokens.iter().enumerate() {
            let mut n_dk = vec![0.0; t];
            let mut n_kw = vec![0.0; t];
            let mut n_k = vec![0.0; t];
            for (d2, doc2) in corpus.documents.iter().enumerate() {
                for (i2, &w2) in doc2.tokens.iter().enumerate() {
                    if d2 == d && i2 == i {
                        continue;
                    }
                    for k in 0..t {
                        let q = store[d2][i2][k];
                        n_k[k] += q;
                        if d2 == d {
                            n_dk[k] += q;
                        }
                        if w2 == w {
                            n_kw[k] += q;
                        }
                    }
                }
            }
            let mut q: Vec<f64> = (0..t)
                .map(|k| (n_dk[k] + prior[k]) * (n_kw[k] + beta) / (n_k[k] + v as f64 * beta))
                .collect();
            let s: f64 = q.iter().sum();
            q.iter_mut().for_each(|x| *x /= s);
            store[d][i] = q.clone();
            out.push(q);
        }
    }
    out
}

fn pcvb0_oracle(report: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let corpus = Corpus::new(
        (0..3)
            .map(|_| Document::new((0..rng.random_range(10..=16)).map(|_| rng.random_range(0..5)).collect()))
            .collect(),
        5,
    );
    let t = 4;
    let config = Pcvb0Config {
        num_topics: t,
        alpha_init: 0.7,
        gamma_init: 1.3,
        seed: 5,
        ..Default::default()
    };
    let mut model = Pcvb0::new(&corpus, &config).unwrap();
    let mut store: Vec<Vec<Vec<f64>>> = corpus
        .documents
        .iter()
        .enumerate()
        .map(|(d, doc)| (0..doc.len()).map(|i| model.store.get(d, i).to_vec()).collect())
        .collect();
    let prior: Vec<f64> = model.sticks.pi.iter().map(|p| p * model.sticks.alpha).collect();
    let expected = brute_force_sweep(&corpus, &mut store, &prior, model.beta, t);
    let mut got = Vec::new();
    for (d, doc) in corpus.documents.iter().enumerate() {
        for (i, &w) in doc.tokens.iter().enumerate() {
            got.push(model.token_update(d, i, w).unwrap().to_vec());
        }
    }
    let worst = got
        .iter()
        .flatten()
        .zip(expected.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();
    report.check(
        "2 batch sweep oracle",
        worst <= 1e-12 && corpus.num_tokens() <= 50 && elapsed < Duration::from_secs(1),
        format!("{} tokens, max |dq| {worst:.2e}, {elapsed:.2?}", corpus.num_tokens()),
    );
}

fn analytic_hyper(report: &mut Report) {
    let gamma = update_gamma(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
    let alpha = batch_update_alpha(&[vec![0.25, 0.75]], &[1], 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..400 {
        let x = 0.01 + i as f64 * 0.37;
        let lhs = digamma(x + 1.0).unwrap();
        let rhs = digamma(x).unwrap() + 1.0 / x;
        worst = worst.max((lhs - rhs).abs());
    }
    let ok = (gamma - 1.0).abs() <= 1e-10 && (alpha - 1.0).abs() <= 1e-10 && worst <= 1e-10;
    report.check(
        "3 analytic hyper updates",
        ok,
        format!("gamma {gamma:.12}, alpha {alpha:.12}, recurrence {worst:.2e}"),
    );
}

fn lazy_decay(report: &mut Report) {
    let start = Instant::now();
    let (t, v) = (20, 1000);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mass = 5_000.0;
    let dense0: Vec<f64> = {
        let raw: Vec<f64> = (0..t * v).map(|_| rng.random::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x * mass / s).collect()
    };
    let mut lazy = TopicWordCounts::from_topic_major(t, v, &dense0);
    let mut dense = dense0;
    for _ in 0..1000 {
        let w = rng.random_range(0..v);
        let q = random_q(&mut rng, t);
        let rho = rng.random_range(0.01..0.2);
        lazy.decay_and_add(w, &q, rho, mass);
        for x in dense.iter_mut() {
            *x *= 1.0 - rho;
        }
        for k in 0..t {
            dense[k * v + w] += rho * mass * q[k];
        }
    }
    let got = lazy.to_topic_major();
    let worst = got.iter().zip(&dense).map(|(a, b)| rel(*a, *b)).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    report.check(
        "4 lazy decay fidelity",
        worst <= 1e-8 && elapsed < Duration::from_secs(5),
        format!("max relative error {worst:.2e}, {elapsed:.2?}"),
    );
}

fn uniform_perplexity(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for v in [3, 17, 250] {
        let corpus = random_corpus(&mut rng, 12, 40, v);
        let heldout = split_heldout_documents(&corpus.documents, 0.7, 9).unwrap();
        let model = GlobalState::empty(8, v, 0.05, 2.0, 1.5);
        let p = heldout_perplexity(&model, &heldout, &HeldOutConfig::default(), Execution::Sequential).unwrap();
        worst = worst.max(rel(p, v as f64));
    }
    report.check(
        "5 uniform model perplexity",
        worst <= 1e-9,
        format!("max relative error {worst:.2e}"),
    );
}

fn desk_config(dir: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig {
        algorithms: vec![Algorithm::Pcsvb0, Algorithm::Scvb0, Algorithm::Pcvb0],
        pcsvb0: TrainerConfig {
            num_topics: 20,
            epochs: 30,
            ..Default::default()
        },
        pcvb0: Pcvb0Config {
            num_topics: 20,
            iterations: 30,
            ..Default::default()
        },
        scvb0: Some(ScvbConfig {
            alpha: 0.1,
            epochs: 30,
            ..ScvbConfig::new(50)
        }),
        record_wall_time: false,
        execution: Execution::Sequential,
        output_dir: Some(dir.to_path_buf()),
        ..Default::default()
    }
}

fn desk_scale(report: &mut Report) {
    let start = Instant::now();
    let corpus = generate(&SyntheticSpec::default()).unwrap();
    let first = tempfile::tempdir().unwrap();
    let runs = run_experiment(&corpus, &desk_config(first.path())).unwrap();
    let elapsed = start.elapsed();

    let mut drops = Vec::new();
    let mut all_drop = true;
    for run in &runs {
        let a = run.records.first().unwrap().perplexity;
        let b = run.records.last().unwrap().perplexity;
        let drop = (a - b) / a;
        all_drop &= drop >= 0.10 && run.records.len() == 30;
        drops.push(format!("{} {a:.3}->{b:.3} ({:.1}%)", run.algorithm, 100.0 * drop));
    }
    report.check("6a final at least 10% below first epoch", all_drop, drops.join(", "));

    let last = |alg| {
        runs.iter()
            .find(|r| r.algorithm == alg)
            .unwrap()
            .records
            .last()
            .unwrap()
            .perplexity
    };
    let (p, s) = (last(Algorithm::Pcsvb0), last(Algorithm::Scvb0));
    report.check("6b PCSVB0 not worse than SCVB0", p <= s, format!("{p:.3} vs {s:.3}"));

    let pcsvb0 = runs.iter().find(|r| r.algorithm == Algorithm::Pcsvb0).unwrap();
    let used = effective_topics(&pcsvb0.final_topic_mass, 0.9);
    report.check(
        "6c PCSVB0 mass in at most 10 of 20 sticks",
        used <= 10,
        format!("90% of mass in {used} sticks"),
    );
    report.check(
        "6 runtime under 5 minutes",
        elapsed < Duration::from_secs(300),
        format!("{elapsed:.2?}"),
    );

    let second = tempfile::tempdir().unwrap();
    run_experiment(&corpus, &desk_config(second.path())).unwrap();
    let mut identical = true;
    for alg in [Algorithm::Pcsvb0, Algorithm::Scvb0, Algorithm::Pcvb0] {
        let a = fs::read(csv_path(first.path(), alg)).unwrap();
        let b = fs::read(csv_path(second.path(), alg)).unwrap();
        identical &= !a.is_empty() && a == b;
    }
    report.check("7 rerun gives byte-identical CSVs", identical, "3 CSVs compared".into());
}

fn unit_step_consistency(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let corpus = random_corpus(&mut rng, 1, 80, 30);
    let config = TrainerConfig {
        num_topics: 10,
        hyper_schedule: ScheduleParams::new(1.0, 1.0, 0.9),
        gamma_init: 2.5,
        seed: 3,
        ..Default::default()
    };
    let mut trainer = Pcsvb0::new(&corpus, config).unwrap();
    let gamma_before = trainer.global().sticks.gamma;
    let mut qs: Vec<Vec<f64>> = Vec::new();
    trainer
        .process_document_observed(0, &corpus.documents[0], |q| qs.push(q.to_vec()))
        .unwrap();
    let sticks = &trainer.global().sticks;
    let mut miss = [1.0; 10];
    for q in &qs {
        for (m, qk) in miss.iter_mut().zip(q) {
            *m *= 1.0 - qk;
        }
    }
    let presence: Vec<f64> = sticks.order.iter().map(|&slot| 1.0 - miss[slot]).collect();
    let (u, v) = batch_update_uv(&[presence], gamma_before).unwrap();
    let worst = u
        .iter()
        .zip(&sticks.u)
        .chain(v.iter().zip(&sticks.v))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    report.check(
        "8 unit-step stochastic equals batch",
        worst <= 1e-12,
        format!("max |d(u,v)| {worst:.2e}"),
    );
}

#[test]
fn acceptance() {
    let mut report = Report::new();
    invariants(&mut report);
    pcvb0_oracle(&mut report);
    analytic_hyper(&mut report);
    lazy_decay(&mut report);
    uniform_perplexity(&mut report);
    desk_scale(&mut report);
    unit_step_consistency(&mut report);
    assert_eq!(report.failed, 0, "failed checks:\n{}", report.lines.join("\n"));
}
