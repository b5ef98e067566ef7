//! End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.
//!
//! Reference values are computed here from first principles (closed forms,
//! exact enumeration, linear solves) rather than taken from the library's own
//! oracle code.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use causalkit::cli::{self, RunConfig, RunManifest, SweepParam};
use causalkit::machine::{count_histories, reconstruct, HistoryTable, Reconstruction};
use causalkit::proxies::{compression_bps, lz78_normalized, Codec};
use causalkit::scopes::{pooled_series, VariableConfig};
use causalkit::symbolize::{self, FitScope, Strategy, Symbol, SymbolSeries};
use causalkit::synthetic::{self, DatasetSpec, ProcessKind, ProcessSpec, VariableRegimes};
use causalkit::{EpsilonMachine, MachineParams};

fn h2(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Solves pi P = pi, sum(pi) = 1 by Gaussian elimination with partial pivoting.
fn stationary(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    // rows: (P^T - I) with the last equation replaced by sum = 1
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n)
                .map(|j| p[j][i] - if i == j { 1.0 } else { 0.0 })
                .collect();
            row.push(0.0);
            row
        })
        .collect();
    a[n - 1] = vec![1.0; n + 1];
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=n {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..n).map(|i| a[i][n] / a[i][i]).collect()
}

struct Suite {
    lines: Vec<(usize, bool, String)>,
    machines: Vec<(String, EpsilonMachine, HistoryTable)>,
}

impl Suite {
    fn report(&mut self, id: usize, pass: bool, detail: String) {
        let line = format!(
            "criterion {id:>2}: {} {detail}\n",
            if pass { "PASS" } else { "FAIL" }
        );
        // written straight to the process stdout so the lines show up in the
        // test log even when the harness captures output
        let mut out = std::io::stdout().lock();
        out.write_all(line.as_bytes()).unwrap();
        out.flush().unwrap();
        self.lines.push((id, pass, detail));
    }

    fn keep(&mut self, label: &str, r: &Reconstruction) {
        self.machines
            .push((label.to_string(), r.machine.clone(), r.table.clone()));
    }
}

fn series_of(kind: ProcessKind, seed: u64, n: usize) -> SymbolSeries {
    synthetic::generate(&ProcessSpec { kind, seed, n }).unwrap()
}

fn check(ok: &mut bool, cond: bool, what: String, notes: &mut Vec<String>) {
    if !cond {
        *ok = false;
    }
    notes.push(format!("{}{what}", if cond { "" } else { "!" }));
}

fn criterion_1(suite: &mut Suite) {
    let start = Instant::now();
    let s = series_of(
        ProcessKind::Iid {
            probs: vec![0.5, 0.5],
        },
        1,
        100_000,
    );
    let r = reconstruct(&s, &MachineParams::default()).unwrap();
    let elapsed = start.elapsed();
    let m = &r.metrics;
    let (mut ok, mut notes) = (true, Vec::new());
    check(
        &mut ok,
        m.l_selected == 0,
        format!("L={}", m.l_selected),
        &mut notes,
    );
    check(
        &mut ok,
        m.n_states == 1,
        format!("states={}", m.n_states),
        &mut notes,
    );
    check(
        &mut ok,
        (m.h_mu - 1.0).abs() <= 0.01,
        format!("h={:.5}", m.h_mu),
        &mut notes,
    );
    check(&mut ok, m.c_mu == 0.0, format!("C={}", m.c_mu), &mut notes);
    check(
        &mut ok,
        m.e.abs() <= 0.02,
        format!("E={:.5}", m.e),
        &mut notes,
    );
    check(
        &mut ok,
        elapsed <= Duration::from_secs(5),
        format!("t={:.2}s", elapsed.as_secs_f64()),
        &mut notes,
    );
    suite.keep("iid", &r);
    suite.report(1, ok, format!("iid fair coin: {}", notes.join(" ")));
}

fn criterion_2(suite: &mut Suite) {
    // two equally likely phases, deterministic emission: h = 0, C = E = 1 bit
    let s = series_of(
        ProcessKind::Periodic {
            pattern: vec![0, 1],
        },
        2,
        1000,
    );
    let r = reconstruct(&s, &MachineParams::default()).unwrap();
    let m = &r.metrics;
    let (mut ok, mut notes) = (true, Vec::new());
    check(
        &mut ok,
        m.n_states == 2,
        format!("states={}", m.n_states),
        &mut notes,
    );
    check(
        &mut ok,
        m.h_mu <= 0.001,
        format!("h={:.6}", m.h_mu),
        &mut notes,
    );
    check(
        &mut ok,
        (m.c_mu - 1.0).abs() <= 0.001,
        format!("C={:.6}", m.c_mu),
        &mut notes,
    );
    check(
        &mut ok,
        (m.e - 1.0).abs() <= 0.01,
        format!("E={:.5}", m.e),
        &mut notes,
    );
    suite.keep("period-2", &r);
    suite.report(2, ok, format!("period-2: {}", notes.join(" ")));
}

/// Exact E for the Golden Mean process from all 2^len words.
fn golden_mean_block_oracle(p: f64, len: usize) -> (f64, f64, f64) {
    // state 0: last symbol 0 (emit 1 w.p. p); state 1: last symbol 1 (emit 0)
    let pi = [1.0 / (1.0 + p), p / (1.0 + p)];
    let h = pi[0] * h2(&[p, 1.0 - p]);
    let mut block = 0.0;
    for word in 0u32..(1 << len) {
        let mut dist = pi;
        for i in 0..len {
            let x = (word >> i) & 1;
            let next = if x == 1 {
                [0.0, dist[0] * p]
            } else {
                [dist[0] * (1.0 - p) + dist[1], 0.0]
            };
            dist = next;
        }
        let prob = dist[0] + dist[1];
        if prob > 0.0 {
            block -= prob * prob.log2();
        }
    }
    (h, h2(&pi), block - len as f64 * h)
}

fn criterion_3(suite: &mut Suite) {
    let (h_oracle, c_oracle, e_oracle) = golden_mean_block_oracle(0.5, 10);
    let start = Instant::now();
    let s = series_of(ProcessKind::GoldenMean { p: 0.5 }, 3, 100_000);
    let r = reconstruct(&s, &MachineParams::default()).unwrap();
    let elapsed = start.elapsed();
    let m = &r.metrics;
    let (mut ok, mut notes) = (true, Vec::new());
    check(
        &mut ok,
        (h_oracle - 2.0 / 3.0).abs() < 1e-12,
        format!("h*={h_oracle:.6}"),
        &mut notes,
    );
    check(
        &mut ok,
        (c_oracle - 0.9183).abs() < 1e-4,
        format!("C*={c_oracle:.6}"),
        &mut notes,
    );
    check(
        &mut ok,
        m.n_states == 2,
        format!("states={}", m.n_states),
        &mut notes,
    );
    check(
        &mut ok,
        (m.h_mu - 2.0 / 3.0).abs() <= 0.02,
        format!("h={:.5}", m.h_mu),
        &mut notes,
    );
    check(
        &mut ok,
        (m.c_mu - 0.9183).abs() <= 0.02,
        format!("C={:.5}", m.c_mu),
        &mut notes,
    );
    check(
        &mut ok,
        (m.e - e_oracle).abs() <= 0.05,
        format!("E={:.5} (E*={e_oracle:.5})", m.e),
        &mut notes,
    );
    check(
        &mut ok,
        elapsed <= Duration::from_secs(10),
        format!("t={:.2}s", elapsed.as_secs_f64()),
        &mut notes,
    );
    suite.keep("golden-mean", &r);
    suite.report(3, ok, format!("golden mean: {}", notes.join(" ")));
}

fn random_separated_chain(rng: &mut ChaCha8Rng, k: usize) -> Vec<Vec<f64>> {
    loop {
        let rows: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let e: Vec<f64> = (0..k).map(|_| -(1.0 - uniform(rng)).ln()).collect();
                let total: f64 = e.iter().sum();
                e.iter().map(|x| x / total).collect()
            })
            .collect();
        let separated = (0..k).all(|i| {
            (i + 1..k).all(|j| {
                rows[i]
                    .iter()
                    .zip(&rows[j])
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    >= 0.4
            })
        });
        if separated {
            return rows;
        }
    }
}

fn criterion_4(suite: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let params = MachineParams {
        delta: 0.1,
        ..MachineParams::default()
    };
    let mut recovered = 0;
    let mut worst_h: f64 = 0.0;
    let mut misses = Vec::new();
    for chain in 0..20 {
        let k = 2 + chain % 2;
        let matrix = random_separated_chain(&mut rng, k);
        let pi = stationary(&matrix);
        let h_analytic: f64 = pi.iter().zip(&matrix).map(|(w, row)| w * h2(row)).sum();
        let s = series_of(ProcessKind::Markov1 { matrix }, 100 + chain as u64, 100_000);
        let r = reconstruct(&s, &params).unwrap();
        if r.metrics.n_states == k {
            recovered += 1;
            worst_h = worst_h.max((r.metrics.h_mu - h_analytic).abs());
        } else {
            misses.push(format!("#{chain}(k={k}, got {})", r.metrics.n_states));
        }
        suite.keep(&format!("markov-{chain}"), &r);
    }
    let ok = recovered >= 18 && worst_h <= 0.02;
    suite.report(
        4,
        ok,
        format!("markov suite: recovered {recovered}/20, max |h - h*| = {worst_h:.5}; misses {misses:?}"),
    );
}

fn criterion_5(suite: &mut Suite) {
    let n = 100_000;
    let constant = SymbolSeries::single(2, vec![0; n], "constant").unwrap();
    let period2 = series_of(
        ProcessKind::Periodic {
            pattern: vec![0, 1],
        },
        5,
        n,
    );
    let iid = series_of(
        ProcessKind::Iid {
            probs: vec![0.5, 0.5],
        },
        5,
        n,
    );
    let (mut ok, mut notes) = (true, Vec::new());
    for codec in Codec::ALL {
        let c = compression_bps(&constant, codec).unwrap();
        let p = compression_bps(&period2, codec).unwrap();
        let i = compression_bps(&iid, codec).unwrap();
        check(
            &mut ok,
            c <= 0.05 && c < p && p < i && (0.95..=1.5).contains(&i),
            format!("{codec}: const={c:.5} p2={p:.5} iid={i:.4}"),
            &mut notes,
        );
    }
    let lc = lz78_normalized(&constant).unwrap();
    let li = lz78_normalized(&iid).unwrap();
    check(
        &mut ok,
        lc <= 0.02,
        format!("lz78 const={lc:.4}"),
        &mut notes,
    );
    check(
        &mut ok,
        (0.8..=1.2).contains(&li),
        format!("lz78 iid={li:.4}"),
        &mut notes,
    );
    suite.report(5, ok, format!("proxy ordering: {}", notes.join("; ")));
}

fn dataset_spec(n_dyads: usize, ticks: usize, seed: u64) -> DatasetSpec {
    DatasetSpec {
        n_dyads,
        ticks,
        seed,
        default_regime: VariableRegimes::default(),
        dyad_regimes: BTreeMap::new(),
    }
}

fn criterion_6(suite: &mut Suite) {
    let ds = synthetic::gen_dyad_dataset(&dataset_spec(10, 600, 66)).unwrap();
    let (mut ok, mut notes) = (true, Vec::new());
    for var in VariableConfig::defaults() {
        let values = ds.pooled_values(&var.name).unwrap();
        let spec = symbolize::fit(&values, var.strategy, var.k, FitScope::Pooled).unwrap();
        let pooled = pooled_series(&ds, &var.name, &spec).unwrap();
        let mut tables_equal = true;
        for order in 0..=4 {
            let pooled_table = count_histories(&pooled, order).unwrap();
            let mut summed: BTreeMap<Vec<Symbol>, Vec<u64>> = BTreeMap::new();
            let mut total = 0u64;
            for segment in pooled.segments() {
                let single =
                    SymbolSeries::single(spec.alphabet_size, segment.clone(), "dyad").unwrap();
                // naive count of this segment alone
                for t in order..segment.len() {
                    let row = summed
                        .entry(segment[t - order..t].to_vec())
                        .or_insert_with(|| vec![0; spec.alphabet_size]);
                    row[segment[t] as usize] += 1;
                    total += 1;
                }
                let dyad_table = count_histories(&single, order).unwrap();
                let naive_total = segment.len().saturating_sub(order) as u64;
                tables_equal &= dyad_table.total_transitions == naive_total;
            }
            tables_equal &=
                pooled_table.counts == summed && pooled_table.total_transitions == total;
        }
        check(
            &mut ok,
            tables_equal,
            format!("{}: tables", var.name),
            &mut notes,
        );

        let forward = reconstruct(&pooled, &MachineParams::default()).unwrap();
        let mut segments = pooled.segments().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for i in (1..segments.len()).rev() {
            segments.swap(i, (rng.next_u64() % (i as u64 + 1)) as usize);
        }
        segments.reverse();
        let permuted = SymbolSeries::new(spec.alphabet_size, segments, "permuted").unwrap();
        let shuffled = reconstruct(&permuted, &MachineParams::default()).unwrap();
        let (a, b) = (&forward.metrics, &shuffled.metrics);
        let same = (a.h_mu - b.h_mu).abs() <= 1e-12
            && (a.c_mu - b.c_mu).abs() <= 1e-12
            && (a.e - b.e).abs() <= 1e-12;
        check(
            &mut ok,
            same,
            format!("{}: permutation", var.name),
            &mut notes,
        );
        suite.keep(&format!("pooled-{}", var.name), &forward);
        suite.keep(&format!("permuted-{}", var.name), &shuffled);
    }
    suite.report(6, ok, format!("segments: {}", notes.join(" ")));
}

fn criterion_8(suite: &mut Suite) {
    let (mut ok, mut notes) = (true, Vec::new());
    // synthetic level-valued hrsncared with P(0) = 0.4
    let ds = synthetic::gen_dyad_dataset(&dataset_spec(1, 10_000, 88)).unwrap();
    let raw = ds.extract_series("D0001", "hrsncared").unwrap().values;
    // continuous positives with exactly 40% zeros
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut continuous: Vec<f64> = (0..10_000)
        .map(|i| {
            if i < 4000 {
                0.0
            } else {
                0.01 + 5.0 * uniform(&mut rng)
            }
        })
        .collect();
    for i in (1..continuous.len()).rev() {
        continuous.swap(i, (rng.next_u64() % (i as u64 + 1)) as usize);
    }
    for (label, values) in [("levels", raw), ("continuous", continuous)] {
        let spec = symbolize::fit(&values, Strategy::Hurdle, 4, FitScope::PerSeries).unwrap();
        let symbols = symbolize::symbolize_values(&values, &spec).unwrap();
        let zeros = values.iter().filter(|&&v| v == 0.0).count();
        let sym0 = symbols.iter().filter(|&&s| s == 0).count();
        let positive_on_zero = values
            .iter()
            .zip(&symbols)
            .any(|(&v, &s)| v > 0.0 && s == 0);
        check(
            &mut ok,
            zeros == sym0 && !positive_on_zero,
            format!(
                "{label}: zero fraction {:.4} = symbol-0 fraction {:.4}",
                zeros as f64 / 1e4,
                sym0 as f64 / 1e4
            ),
            &mut notes,
        );
    }
    suite.report(8, ok, format!("hurdle: {}", notes.join("; ")));
}

fn run_analyze(dir: &Path, config: &Path, input: &Path, out: &str) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_causalkit"))
        .env_remove("CAUSALKIT_SEED")
        .arg("analyze")
        .arg("--config")
        .arg(config)
        .arg("--input")
        .arg(input)
        .arg("--out")
        .arg(dir.join(out))
        .output()
        .unwrap()
}

fn criterion_9(suite: &mut Suite) {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let ds = synthetic::gen_dyad_dataset(&dataset_spec(6, 400, 99)).unwrap();
    std::fs::write(dir.join("data.csv"), ds.to_csv()).unwrap();
    std::fs::write(
        dir.join("config.json"),
        r#"{"cluster": {"k": 2, "seed": 9}}"#,
    )
    .unwrap();
    let a = run_analyze(dir, &dir.join("config.json"), &dir.join("data.csv"), "a");
    let b = run_analyze(dir, &dir.join("config.json"), &dir.join("data.csv"), "b");
    let (mut ok, mut notes) = (true, Vec::new());
    check(
        &mut ok,
        a.status.success() && b.status.success(),
        "exit 0".into(),
        &mut notes,
    );
    for file in ["signatures.csv", "manifest.json", "pooled_machine.dot"] {
        let x = std::fs::read(dir.join("a").join(file)).unwrap_or_default();
        let y = std::fs::read(dir.join("b").join(file)).unwrap_or(vec![1]);
        check(
            &mut ok,
            !x.is_empty() && x == y,
            format!("{file} identical"),
            &mut notes,
        );
    }
    let manifest: Option<RunManifest> = std::fs::read_to_string(dir.join("a/manifest.json"))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());
    check(
        &mut ok,
        manifest.is_some_and(|m| m.hash_matches()),
        "manifest hash recomputes".into(),
        &mut notes,
    );
    suite.report(9, ok, format!("determinism: {}", notes.join(", ")));
}

fn criterion_10(suite: &mut Suite) {
    let mut spec = dataset_spec(8, 2500, 1010);
    spec.default_regime.overwhelmed = ProcessKind::GoldenMean { p: 0.5 };
    let ds = synthetic::gen_dyad_dataset(&spec).unwrap();
    let cfg = RunConfig {
        variables: vec![VariableConfig::new("overwhelmed", Strategy::Binary, 2)],
        ..RunConfig::default()
    };
    let deltas = ["0.05", "0.1", "0.5", "1.0", "2.0"].map(String::from);
    let report = cli::run_sensitivity(&cfg, &ds, SweepParam::Delta, &deltas).unwrap();
    let pooled: Vec<usize> = report
        .points
        .iter()
        .map(|p| p.pooled[0].n_states.unwrap_or(0))
        .collect();
    let mut ok = pooled.windows(2).all(|w| w[1] <= w[0]) && pooled.last() == Some(&1);
    let mut per_dyad_monotone = true;
    for i in 0..ds.n_dyads() {
        let counts: Vec<Option<usize>> = report
            .points
            .iter()
            .map(|p| p.run.signatures[i].n_states)
            .collect();
        per_dyad_monotone &=
            counts.windows(2).all(|w| w[1] <= w[0]) && counts.last() == Some(&Some(1));
    }
    ok &= per_dyad_monotone;

    // keep the pooled machines for the unifilarity audit
    let binning = symbolize::BinningSpec::binary(FitScope::Pooled);
    let series = pooled_series(&ds, "overwhelmed", &binning).unwrap();
    for d in &deltas {
        let params = MachineParams {
            delta: d.parse().unwrap(),
            ..MachineParams::default()
        };
        let r = reconstruct(&series, &params).unwrap();
        suite.keep(&format!("sweep-delta-{d}"), &r);
    }
    suite.report(
        10,
        ok,
        format!("delta sweep {deltas:?}: pooled states {pooled:?}, per-dyad monotone={per_dyad_monotone}"),
    );
}

/// (state, symbol) -> successor must be unique, checked from the raw table.
fn independently_unifilar(m: &EpsilonMachine, table: &HistoryTable) -> bool {
    let mut seen: BTreeMap<(usize, Symbol), usize> = BTreeMap::new();
    for (ctx, row) in &table.counts {
        let Some(from) = m.state_of(ctx) else {
            return false;
        };
        for (x, &n) in row.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let mut next = ctx.clone();
            next.push(x as Symbol);
            let next = next[next.len() - table.order..].to_vec();
            if !table.counts.contains_key(&next) {
                continue;
            }
            let Some(to) = m.state_of(&next) else {
                return false;
            };
            if *seen.entry((from, x as Symbol)).or_insert(to) != to {
                return false;
            }
            if m.successor(from, x as Symbol) != Some(to) {
                return false;
            }
        }
    }
    true
}

fn criterion_7(suite: &mut Suite) {
    let total = suite.machines.len();
    let failing: Vec<&str> = suite
        .machines
        .iter()
        .filter(|(_, m, t)| !(m.check_unifilar(t) && independently_unifilar(m, t)))
        .map(|(label, _, _)| label.as_str())
        .collect();
    let ok = total > 0 && failing.is_empty();
    let detail = format!(
        "unifilarity: {}/{total} machines unifilar {failing:?}",
        total - failing.len()
    );
    suite.report(7, ok, detail);
}

#[test]
fn acceptance_criteria() {
    let mut suite = Suite {
        lines: Vec::new(),
        machines: Vec::new(),
    };
    criterion_1(&mut suite);
    criterion_2(&mut suite);
    criterion_3(&mut suite);
    criterion_4(&mut suite);
    criterion_5(&mut suite);
    criterion_6(&mut suite);
    criterion_8(&mut suite);
    criterion_9(&mut suite);
    criterion_10(&mut suite);
    // audits every machine reconstructed above
    criterion_7(&mut suite);

    let failed: Vec<usize> = suite.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    assert!(failed.is_empty(), "failed acceptance criteria: {failed:?}");
}
