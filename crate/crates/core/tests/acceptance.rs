//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashSet;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctxfuse::context_bank::ContextVector;
use ctxfuse::credit::shapley;
use ctxfuse::metrics::{jaccard, summarize};
use ctxfuse::signals::guardrail;
use ctxfuse::simulator::{generate_dataset, tiered_profiles};
use ctxfuse::wire::{read_jsonl, write_jsonl, Codec, WireRound};
use ctxfuse::*;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// 1. Shapley exactness against a separate brute-force path

/// Value of a coalition given as a membership list, computed from scratch.
#[allow(clippy::too_many_arguments)]
fn oracle_value(
    members: &[bool],
    priors: &[f64],
    llr: &[f64],
    reports: &[Vec<bool>],
    rho: &CorrelationMatrix,
    w: &[f64],
    truth: &[bool],
    eps: f64,
) -> f64 {
    if !members.iter().any(|&m| m) {
        return 0.0;
    }
    let n = members.len();
    let l = priors.len();
    let mut v = 0.0;
    for k in 0..l {
        let mut s = 0.0;
        for i in (0..n).filter(|&i| members[i]) {
            let mut denom = 1.0;
            for j in (0..n).filter(|&j| j != i && members[j]) {
                if reports[j][k] == reports[i][k] {
                    denom += rho.get(i, j, k);
                }
            }
            s += w[i] * llr[i * l + k] / denom;
        }
        let p = priors[k];
        let z = (p / (1.0 - p)).ln() + s;
        let q = (1.0 / (1.0 + (-z).exp())).clamp(eps, 1.0 - eps);
        let score = |x: f64| if truth[k] { x.ln() } else { (1.0 - x).ln() };
        v += score(q) - score(p);
    }
    v
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

fn oracle_shapley(
    priors: &[f64],
    llr: &[f64],
    reports: &[Vec<bool>],
    rho: &CorrelationMatrix,
    w: &[f64],
    truth: &[bool],
    eps: f64,
) -> (Vec<f64>, f64) {
    let n = w.len();
    let subsets: Vec<Vec<bool>> = (0..1usize << n)
        .map(|m| (0..n).map(|i| m >> i & 1 == 1).collect())
        .collect();
    let value = |s: &[bool]| oracle_value(s, priors, llr, reports, rho, w, truth, eps);
    let mut phi = vec![0.0; n];
    for (i, p) in phi.iter_mut().enumerate() {
        for s in subsets.iter().filter(|s| !s[i]) {
            let size = s.iter().filter(|&&m| m).count();
            let weight = factorial(size) * factorial(n - size - 1) / factorial(n);
            let mut with = s.clone();
            with[i] = true;
            *p += weight * (value(&with) - value(s));
        }
    }
    (phi, value(&vec![true; n]))
}

fn criterion_1() -> ctxfuse::Result<Verdict> {
    let start = Instant::now();
    let sim = SimConfig { n_rounds: 1000, seed: 101, ..SimConfig::default() };
    let mut profiles = tiered_profiles(sim.n_regimes, sim.n_labels);
    profiles[2] = profiles[2].clone().with_partner(1, 0.5);
    let ds = generate_dataset(&sim, &profiles)?;
    let cfg = GameConfig {
        experts: ds.experts.clone(),
        eta: 0.2,
        decision_threshold: DecisionThreshold::Fixed(0.5),
        ..GameConfig::default()
    };
    let eps = cfg.epsilon;
    let mut engine = Engine::new(cfg)?;
    let (mut worst_phi, mut worst_eff) = (0.0f64, 0.0f64);
    let mut checked = 0;
    for round in &ds.rounds {
        let rho = engine.state().correlations.clone();
        let out = engine.run_round(round)?;
        let truth = round.truth.as_ref().expect("all rounds labelled");
        let credit = out.credit.expect("labelled round has credit");
        let (phi, v_full) = oracle_shapley(
            &out.diagnostics.priors,
            &out.diagnostics.llr,
            &round.reports,
            &rho,
            out.reputation_before.as_slice(),
            truth,
            eps,
        );
        worst_phi = worst_phi.max(max_abs_diff(&credit.phi, &phi));
        worst_eff = worst_eff
            .max((credit.phi.iter().sum::<f64>() - credit.v_full).abs())
            .max((credit.v_full - v_full).abs());
        checked += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(Verdict::new(
        checked == 1000 && worst_phi <= 1e-9 && worst_eff <= 1e-9 && secs < 10.0,
        format!("{checked} rounds, max |dphi| {worst_phi:.2e}, max efficiency gap {worst_eff:.2e}, {secs:.2}s"),
    ))
}

// ---------------------------------------------------------------------------
// 2. Golden trace

fn flat(v: &serde_json::Value) -> Vec<f64> {
    match v {
        serde_json::Value::Array(items) => items.iter().flat_map(flat).collect(),
        serde_json::Value::Number(n) => vec![n.as_f64().expect("finite number")],
        other => panic!("unexpected value in fixture: {other}"),
    }
}

fn criterion_2() -> ctxfuse::Result<Verdict> {
    let text = include_str!("fixtures/golden_trace.json");
    let fixture: serde_json::Value = serde_json::from_str(text).expect("fixture parses");
    let names = |key: &str| -> Vec<String> {
        fixture[key]
            .as_array()
            .expect("name list")
            .iter()
            .map(|s| s.as_str().expect("string").to_string())
            .collect()
    };
    let (labels, experts) = (names("labels"), names("experts"));
    let wires: Vec<WireRound> =
        serde_json::from_value(fixture["rounds"].clone()).expect("fixture rounds parse");
    let rounds = Codec::new(&labels, &experts).decode_all(&wires)?;
    let cfg = GameConfig {
        labels,
        experts,
        decision_threshold: DecisionThreshold::Fixed(0.5),
        ..GameConfig::default()
    };
    let mut engine = Engine::new(cfg)?;
    let trace = fixture["trace"].as_array().expect("trace");
    let mut worst = 0.0f64;
    let mut worst_field = String::new();
    for (round, expected) in rounds.iter().zip(trace) {
        let out = engine.run_round(round)?;
        let credit = out.credit.as_ref().expect("fixture rounds are labelled");
        let d = &out.diagnostics;
        let got: [(&str, Vec<f64>); 10] = [
            ("theta_pos", d.theta_pos.clone()),
            ("theta_neg", d.theta_neg.clone()),
            ("prior", d.priors.clone()),
            ("llr", d.llr.clone()),
            ("llr_guarded", d.llr_guarded.clone()),
            ("posterior", out.posteriors.0.clone()),
            ("phi", credit.phi.clone()),
            ("team_value", vec![credit.v_full]),
            ("reputation_before", out.reputation_before.as_slice().to_vec()),
            ("reputation_after", out.reputation_after.as_slice().to_vec()),
        ];
        for (field, values) in got {
            let diff = max_abs_diff(&values, &flat(&expected[field]));
            if diff > worst || worst_field.is_empty() {
                worst = worst.max(diff);
                worst_field = format!("{field} @ round {}", out.round_id);
            }
        }
    }
    Ok(Verdict::new(
        rounds.len() == 5 && worst <= 1e-9,
        format!("{} rounds, max deviation {worst:.2e} ({worst_field})", rounds.len()),
    ))
}

// ---------------------------------------------------------------------------
// 3. Axioms

struct Random {
    priors: Vec<f64>,
    llr: Vec<f64>,
    reports: Vec<Vec<bool>>,
    rho: CorrelationMatrix,
    weights: Vec<f64>,
    truth: Vec<bool>,
}

impl Random {
    fn draw(rng: &mut ChaCha8Rng, n: usize, l: usize) -> Self {
        let mut rho = CorrelationMatrix::zeros(n, l);
        for k in 0..l {
            for i in 0..n {
                for j in i + 1..n {
                    rho.set(i, j, k, rng.random_range(0.0..0.5));
                }
            }
        }
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        Random {
            priors: (0..l).map(|_| rng.random_range(0.01..0.99)).collect(),
            llr: (0..n * l).map(|_| rng.random_range(-4.0..4.0)).collect(),
            reports: (0..n).map(|_| (0..l).map(|_| rng.random_bool(0.5)).collect()).collect(),
            rho,
            weights: raw.iter().map(|w| w / sum).collect(),
            truth: (0..l).map(|_| rng.random_bool(0.4)).collect(),
        }
    }

    fn signals(&self) -> RoundSignals<'_> {
        RoundSignals {
            priors: &self.priors,
            llr: &self.llr,
            reports: &self.reports,
            rho: &self.rho,
            weights: &self.weights,
            epsilon: 1e-6,
        }
    }
}

fn criterion_3() -> ctxfuse::Result<Verdict> {
    const SEEDS: u64 = 500;
    let mut violations: Vec<String> = Vec::new();
    let (mut sym_gap, mut shift_gap, mut simplex_gap) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(0xA710 + seed);
        let n = rng.random_range(3..=6);
        let l = rng.random_range(1..=14);

        // symmetry: expert 1 is a copy of expert 0
        let mut r = Random::draw(&mut rng, n, l);
        r.reports[1] = r.reports[0].clone();
        r.weights[1] = r.weights[0];
        for k in 0..l {
            r.llr[l + k] = r.llr[k];
            for j in 2..n {
                let v = r.rho.get(0, j, k);
                r.rho.set(1, j, k, v);
            }
        }
        let phi = shapley(&r.signals(), Some(&r.truth))?.phi;
        let gap = (phi[0] - phi[1]).abs();
        sym_gap = sym_gap.max(gap);
        if gap > 1e-12 {
            violations.push(format!("symmetry seed {seed}"));
        }

        // null player: last expert has no signal and no correlation
        let mut r = Random::draw(&mut rng, n, l);
        let null = n - 1;
        for k in 0..l {
            r.llr[null * l + k] = 0.0;
            for j in 0..null {
                r.rho.set(j, null, k, 0.0);
            }
        }
        if shapley(&r.signals(), Some(&r.truth))?.phi[null] != 0.0 {
            violations.push(format!("null player seed {seed}"));
        }

        // guardrail shrinkage in every coalition
        let r = Random::draw(&mut rng, n, l);
        for mask in 0..1u32 << n {
            let c = Coalition(mask);
            for i in c.members() {
                for k in 0..l {
                    let raw = r.llr[i * l + k];
                    let g = guardrail(raw, i, k, &r.reports, &r.rho, c);
                    if g.abs() > raw.abs() || g * raw < 0.0 {
                        violations.push(format!("shrinkage seed {seed}"));
                    }
                }
            }
        }

        // simplex closure and shift invariance of the reputation update
        let w = ReputationVector::from_weights(r.weights.clone())?;
        let scale = 10f64.powf(rng.random_range(-2.0..3.0));
        let phi: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
        let eta = rng.random_range(0.001..5.0);
        let floor = if seed % 2 == 0 { 1e-8 } else { 0.0 };
        let next = w.update(&phi, eta, floor);
        let sum: f64 = next.as_slice().iter().sum();
        simplex_gap = simplex_gap.max((sum - 1.0).abs());
        if (sum - 1.0).abs() > 1e-12 || next.as_slice().iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            violations.push(format!("simplex seed {seed}"));
        }
        let c = rng.random_range(-100.0..100.0);
        let shifted: Vec<f64> = phi.iter().map(|p| p + c).collect();
        let gap = max_abs_diff(next.as_slice(), w.update(&shifted, eta, floor).as_slice());
        shift_gap = shift_gap.max(gap);
        if gap > 1e-12 {
            violations.push(format!("shift seed {seed}"));
        }
    }
    Ok(Verdict::new(
        violations.is_empty(),
        format!(
            "{SEEDS} seeds x 5 axioms, {} violations, max symmetry gap {sym_gap:.1e}, \
             max simplex gap {simplex_gap:.1e}, max shift gap {shift_gap:.1e}{}",
            violations.len(),
            violations.first().map(|v| format!(", first: {v}")).unwrap_or_default()
        ),
    ))
}

// ---------------------------------------------------------------------------
// 4. Metrics against brute-force recounts

fn criterion_4() -> ctxfuse::Result<Verdict> {
    const INSTANCES: u64 = 500;
    let mut failures = 0;
    let mut worst = 0.0f64;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(0x3E7 + seed);
        let n_rounds = rng.random_range(1..=8);
        let l = rng.random_range(1..=6);
        let density = rng.random_range(0.0..1.0);
        let rounds: Vec<(Vec<bool>, Vec<bool>)> = (0..n_rounds)
            .map(|_| {
                let y = (0..l).map(|_| rng.random_bool(density)).collect();
                let yhat = (0..l).map(|_| rng.random_bool(density)).collect();
                (y, yhat)
            })
            .collect();

        let mut tp = vec![0u64; l];
        let mut fp = vec![0u64; l];
        let mut fneg = vec![0u64; l];
        let (mut ham, mut jac, mut jac_sets) = (0.0, 0.0, 0.0);
        for (y, yhat) in &rounds {
            let mut wrong = 0;
            let (mut inter, mut union) = (0, 0);
            for k in 0..l {
                match (y[k], yhat[k]) {
                    (true, true) => tp[k] += 1,
                    (false, true) => fp[k] += 1,
                    (true, false) => fneg[k] += 1,
                    _ => {}
                }
                wrong += (y[k] != yhat[k]) as usize;
                inter += (y[k] && yhat[k]) as usize;
                union += (y[k] || yhat[k]) as usize;
            }
            ham += wrong as f64 / l as f64;
            jac += if union == 0 { 1.0 } else { inter as f64 / union as f64 };
            let idx = |v: &[bool]| (0..l).filter(|&k| v[k]).collect::<Vec<_>>();
            jac_sets += jaccard(&idx(y), &idx(yhat));
        }
        let f1 = |tp: u64, fp: u64, fneg: u64| {
            let den = 2 * tp + fp + fneg;
            if den == 0 {
                0.0
            } else {
                2.0 * tp as f64 / den as f64
            }
        };
        let (ttp, tfp, tfn) = (tp.iter().sum(), fp.iter().sum(), fneg.iter().sum());
        let micro = f1(ttp, tfp, tfn);
        let per_label: Vec<f64> = (0..l).map(|k| f1(tp[k], fp[k], fneg[k])).collect();
        let macro_all = per_label.iter().sum::<f64>() / l as f64;
        let active: Vec<f64> = (0..l)
            .filter(|&k| tp[k] + fp[k] + fneg[k] > 0)
            .map(|k| per_label[k])
            .collect();
        let macro_active = if active.is_empty() { 0.0 } else { active.iter().sum::<f64>() / active.len() as f64 };

        let s = summarize(&rounds, false)?;
        let s_skip = summarize(&rounds, true)?;
        let counts_ok = (0..l).all(|k| {
            let c = s.per_label[k];
            c.tp == tp[k] && c.fp == fp[k] && c.fn_ == fneg[k]
        }) && s.n_rounds == rounds.len();
        let n = n_rounds as f64;
        let diffs = [
            s.mean_hamming - ham / n,
            s.micro_f1 - micro,
            s.macro_f1 - macro_all,
            s_skip.macro_f1 - macro_active,
            s.mean_jaccard - jac / n,
            s.mean_jaccard - jac_sets / n,
        ];
        let d = diffs.iter().map(|x| x.abs()).fold(0.0, f64::max);
        worst = worst.max(d);
        if !counts_ok || d > 1e-12 || s.micro_degenerate != (ttp == 0) {
            failures += 1;
        }
    }
    Ok(Verdict::new(
        failures == 0,
        format!("{INSTANCES} instances, {failures} mismatches, max ratio deviation {worst:.1e}"),
    ))
}

// ---------------------------------------------------------------------------
// 5. Context recovery

fn probe_theta_pos(rounds: &[RoundRecord], cfg: GameConfig, at: &ContextVector, expert: usize) -> ctxfuse::Result<Vec<f64>> {
    let l = cfg.n_labels();
    let n = cfg.n_experts();
    let mut engine = Engine::new(cfg)?;
    for r in rounds {
        engine.run_round(r)?;
    }
    let probe = RoundRecord::new(
        rounds.last().map_or(0, |r| r.round_id) + 1,
        at.clone(),
        vec![vec![false; l]; n],
        None,
        l,
    )?;
    let out = engine.run_round(&probe)?;
    Ok(out.diagnostics.theta_pos[expert * l..(expert + 1) * l].to_vec())
}

fn criterion_5() -> ctxfuse::Result<Verdict> {
    let start = Instant::now();
    let l = 14;
    let sim = SimConfig {
        n_experts: 2,
        n_rounds: 5000,
        n_regimes: 2,
        base_rates: Some(vec![vec![0.5; l]; 2]),
        seed: 5,
        ..SimConfig::default()
    };
    let mut target = SyntheticExpertProfile::uniform("target", 2, l, 0.9, 0.1);
    target.tpr[1] = vec![0.6; l];
    let other = SyntheticExpertProfile::uniform("other", 2, l, 0.8, 0.1);
    let ds = generate_dataset(&sim, &[target.clone(), other])?;

    let base = GameConfig {
        experts: ds.experts.clone(),
        labels: ds.labels.clone(),
        k_reliability: 1000,
        decision_threshold: DecisionThreshold::Fixed(0.5),
        ..GameConfig::default()
    };
    let aware = probe_theta_pos(&ds.rounds, base.clone(), &ds.centroids[0], 0)?;
    let agnostic_cfg = GameConfig { context_agnostic: true, ..base };
    let agnostic = probe_theta_pos(&ds.rounds, agnostic_cfg, &ds.centroids[0], 0)?;

    // positive-weighted mixture of the two regime rates, per label
    let mixture: Vec<f64> = (0..l)
        .map(|k| {
            let mut pos = [0.0f64; 2];
            for (r, &regime) in ds.rounds.iter().zip(&ds.regimes) {
                if r.truth.as_ref().is_some_and(|t| t[k]) {
                    pos[regime] += 1.0;
                }
            }
            (pos[0] * target.tpr[0][k] + pos[1] * target.tpr[1][k]) / (pos[0] + pos[1])
        })
        .collect();
    let aware_dev = aware.iter().map(|t| (t - 0.9).abs()).fold(0.0, f64::max);
    let agnostic_dev = max_abs_diff(&agnostic, &mixture);
    let secs = start.elapsed().as_secs_f64();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(Verdict::new(
        aware_dev <= 0.05 && agnostic_dev <= 0.05 && secs < 60.0,
        format!(
            "contextual mean {:.4} (max dev from 0.9 {aware_dev:.4}), agnostic mean {:.4} vs mixture {:.4} \
             (max dev {agnostic_dev:.4}), {secs:.1}s",
            mean(&aware),
            mean(&agnostic),
            mean(&mixture)
        ),
    ))
}

// ---------------------------------------------------------------------------
// 6-8. Simulation studies

const STUDY_SEEDS: usize = 20;

fn study_config(experts: &[String]) -> GameConfig {
    GameConfig {
        experts: experts.to_vec(),
        eta: 1e-4,
        k_reliability: 1000,
        ..GameConfig::default()
    }
}

fn study_split() -> SplitSpec {
    SplitSpec::TrainIds((1..=2000).collect::<HashSet<u64>>())
}

fn study_dataset(seed: u64, correlated: bool) -> ctxfuse::Result<SyntheticDataset> {
    let sim = SimConfig { n_rounds: 3000, seed, ..SimConfig::default() };
    let mut profiles = tiered_profiles(sim.n_regimes, sim.n_labels);
    if correlated {
        profiles[2] = profiles[2].clone().with_partner(1, 0.8);
    }
    generate_dataset(&sim, &profiles)
}

struct Study {
    fused_micro: f64,
    fused_hamming: f64,
    best_micro: f64,
    best_hamming: f64,
    reputation: Vec<f64>,
}

fn run_study(seed: u64) -> ctxfuse::Result<Study> {
    let ds = study_dataset(seed, false)?;
    let report = replay(&ds.rounds, &study_config(&ds.experts), &study_split())?;
    let fused = report.fused.expect("evaluation rounds are labelled");
    Ok(Study {
        fused_micro: fused.micro_f1,
        fused_hamming: fused.mean_hamming,
        best_micro: report.experts.iter().map(|e| e.metrics.micro_f1).fold(f64::MIN, f64::max),
        best_hamming: report.experts.iter().map(|e| e.metrics.mean_hamming).fold(f64::MAX, f64::min),
        reputation: report.final_reputation,
    })
}

fn criteria_6_7() -> ctxfuse::Result<(Verdict, Verdict)> {
    let studies: Vec<Study> = par::map_range(STUDY_SEEDS, |s| run_study(s as u64))
        .into_iter()
        .collect::<ctxfuse::Result<_>>()?;
    let dominant = studies
        .iter()
        .filter(|s| s.fused_micro > s.best_micro && s.fused_hamming < s.best_hamming)
        .count();
    // experts are ordered high, med, low
    let ordered = studies
        .iter()
        .filter(|s| s.reputation.windows(2).all(|p| p[0] > p[1]))
        .count();
    let margin = studies.iter().map(|s| s.fused_micro - s.best_micro).fold(f64::MAX, f64::min);
    let avg_w: Vec<f64> = (0..3)
        .map(|i| studies.iter().map(|s| s.reputation[i]).sum::<f64>() / STUDY_SEEDS as f64)
        .collect();
    Ok((
        Verdict::new(
            dominant >= 18,
            format!("{dominant}/{STUDY_SEEDS} seeds, smallest micro-F1 margin {margin:+.4}"),
        ),
        Verdict::new(
            ordered >= 18,
            format!(
                "{ordered}/{STUDY_SEEDS} seeds, mean final w [{:.3}, {:.3}, {:.3}]",
                avg_w[0], avg_w[1], avg_w[2]
            ),
        ),
    ))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

fn criterion_8() -> ctxfuse::Result<Verdict> {
    let pairs: Vec<(f64, f64)> = par::map_range(STUDY_SEEDS, |s| -> ctxfuse::Result<(f64, f64)> {
        let ds = study_dataset(s as u64, true)?;
        let cfg = study_config(&ds.experts);
        let full = replay(&ds.rounds, &cfg, &study_split())?;
        let bare = replay(&ds.rounds, &GameConfig { no_guardrail: true, ..cfg }, &study_split())?;
        let micro = |r: ReplayReport| r.fused.expect("labelled evaluation").micro_f1;
        Ok((micro(full), micro(bare)))
    })
    .into_iter()
    .collect::<ctxfuse::Result<_>>()?;
    let full = median(pairs.iter().map(|p| p.0).collect());
    let bare = median(pairs.iter().map(|p| p.1).collect());
    Ok(Verdict::new(
        full >= bare,
        format!("median micro-F1 full {full:.4} vs no_guardrail {bare:.4} over {STUDY_SEEDS} seeds"),
    ))
}

// ---------------------------------------------------------------------------
// 9. Determinism

fn replay_artifacts(jsonl: &[u8], labels: &[String], experts: &[String]) -> ctxfuse::Result<(String, String)> {
    let wires = read_jsonl(jsonl)?;
    let rounds = Codec::new(labels, experts).decode_all(&wires)?;
    let cfg = GameConfig { experts: experts.to_vec(), labels: labels.to_vec(), ..GameConfig::default() };
    let report = replay(&rounds, &cfg, &SplitSpec::Fraction(0.6))?;
    Ok((report.metrics_json(), report.trajectory_csv(labels, experts)))
}

fn criterion_9() -> ctxfuse::Result<Verdict> {
    let sim = SimConfig { n_rounds: 600, labelled_fraction: 0.8, seed: 9, ..SimConfig::default() };
    let ds = generate_dataset(&sim, &tiered_profiles(sim.n_regimes, sim.n_labels))?;
    let codec = Codec::new(&ds.labels, &ds.experts);
    let mut jsonl = Vec::new();
    write_jsonl(&mut jsonl, &ds.rounds.iter().map(|r| codec.encode(r)).collect::<Vec<_>>())?;
    let a = replay_artifacts(&jsonl, &ds.labels, &ds.experts)?;
    let b = replay_artifacts(&jsonl, &ds.labels, &ds.experts)?;
    Ok(Verdict::new(
        a == b,
        format!(
            "metrics JSON {} bytes {}, trajectory CSV {} bytes {}",
            a.0.len(),
            if a.0 == b.0 { "identical" } else { "differ" },
            a.1.len(),
            if a.1 == b.1 { "identical" } else { "differ" }
        ),
    ))
}

// ---------------------------------------------------------------------------
// 10. Unlabelled gap

fn criterion_10() -> ctxfuse::Result<Verdict> {
    let sim = SimConfig { n_rounds: 400, seed: 10, ..SimConfig::default() };
    let ds = generate_dataset(&sim, &tiered_profiles(sim.n_regimes, sim.n_labels))?;
    let gap = 151..=250u64;
    let rounds: Vec<RoundRecord> = ds
        .rounds
        .iter()
        .map(|r| if gap.contains(&r.round_id) { r.without_truth() } else { r.clone() })
        .collect();
    let cfg = GameConfig {
        experts: ds.experts.clone(),
        eta: 0.5,
        alpha: 0.5,
        prize: 1.0,
        ..GameConfig::default()
    };
    let mut engine = Engine::new(cfg)?;
    let bits = |w: &ReputationVector| w.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let mut frozen = None;
    let (mut gap_rounds, mut w_changes, mut nonzero_u) = (0, 0, 0);
    let mut moved_after = false;
    for r in &rounds {
        let before = bits(&engine.state().reputation);
        let out = engine.run_round(r)?;
        if gap.contains(&r.round_id) {
            gap_rounds += 1;
            let start = *frozen.get_or_insert_with(|| before.clone()) == before;
            if !start || bits(&out.reputation_after) != before {
                w_changes += 1;
            }
            nonzero_u += out.payoffs.iter().filter(|&&u| u != 0.0).count();
        } else if r.round_id > *gap.end() && bits(&out.reputation_after) != before {
            moved_after = true;
        }
    }
    Ok(Verdict::new(
        gap_rounds == 100 && w_changes == 0 && nonzero_u == 0 && moved_after,
        format!(
            "{gap_rounds} gap rounds, {w_changes} reputation changes, {nonzero_u} non-zero payoffs, \
             reputation resumes moving after the gap: {moved_after}"
        ),
    ))
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let (c6, c7) = match criteria_6_7() {
        Ok((a, b)) => (Ok(a), Ok(b)),
        Err(e) => (Err(e.clone()), Err(e)),
    };
    let results: Vec<(&str, ctxfuse::Result<Verdict>)> = vec![
        ("shapley exactness", criterion_1()),
        ("golden trace", criterion_2()),
        ("axiom suite", criterion_3()),
        ("metrics oracle", criterion_4()),
        ("context recovery", criterion_5()),
        ("fusion dominance", c6),
        ("reputation ordering", c7),
        ("guardrail value", criterion_8()),
        ("determinism", criterion_9()),
        ("unlabelled gap", criterion_10()),
    ];
    let mut failed = 0;
    for (i, (name, result)) in results.into_iter().enumerate() {
        let (pass, detail) = match result {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += (!pass) as usize;
        println!("criterion {:>2} {:<20} {}  {detail}", i + 1, name, if pass { "PASS" } else { "FAIL" });
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
