//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use memex_core::gateway::{chat_to_window, ChatMessage, GatewayConfig, GatewayError, GatewayPolicy};
use memex_core::gateway::{window_to_chat, Gateway};
use memex_core::memory::{extract_span, AnchorError, AnchorKind};
use memex_core::message::{count_tokens, MessageKind};
use memex_core::prompt::SYSTEM_PROMPT;
use memex_core::reward::episode_return;
use memex_core::toolcall::{parse_assistant_output, MalformedClass};
use memex_core::trajectory::{group_advantages, segment, TrajectoryLog};
use memex_core::world::{run_household, OracleFullContext, OracleIndexed, RandomPolicy};
use memex_core::{ContextWindow, EpisodeConfig, EpisodeResult, Outcome, Policy};
use memex_testkit::{MockRequest, MockResponse, MockServer};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const TAU_SIGMA: usize = 300;
const READS: usize = 2;
const COMPRESS_EVERY: usize = 3;

fn episode(seed: u64, t_max: usize) -> EpisodeConfig {
    EpisodeConfig {
        seed,
        t_max,
        tau_sigma: TAU_SIGMA,
        ..Default::default()
    }
}

fn indexed(seed: u64, reads: usize) -> EpisodeResult {
    let mut policy = OracleIndexed::new(reads, COMPRESS_EVERY);
    run_household(&mut policy, episode(seed, 150), SYSTEM_PROMPT).expect("valid config").0
}

fn fuzzed(seed: u64) -> TrajectoryLog {
    let cfg = EpisodeConfig {
        seed,
        t_max: 50,
        tau: 400,
        ..Default::default()
    };
    let mut policy = RandomPolicy::new(seed, (seed % 6) as usize);
    run_household(&mut policy, cfg, SYSTEM_PROMPT).expect("valid config").0.trajectory
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let elapsed = start.elapsed();
    if elapsed < limit {
        Ok(elapsed)
    } else {
        Err(format!("took {elapsed:.1?}, limit {limit:?}"))
    }
}

fn working_context_bound() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut min_ratio = f64::INFINITY;
    let mut long = 0;
    for seed in 0..200 {
        let r = indexed(seed, READS);
        let l = r.store.entries().map(|(_, content)| count_tokens(content)).max().unwrap_or(0);
        let bound = TAU_SIGMA + READS * l;
        for s in &r.trajectory.steps {
            let measured = s.working_before.max(s.working_after);
            ensure!(measured <= bound, "seed {seed} step {}: {measured} > {bound}", s.t);
            worst = worst.max(measured as f64 / bound as f64);
        }
        let last = r.trajectory.steps.last().ok_or(format!("seed {seed}: empty trajectory"))?;
        if r.trajectory.steps.len() > 30 {
            long += 1;
            let ratio = last.full_history_tokens as f64 / last.working_after as f64;
            ensure!(ratio > 2.0, "seed {seed}: compression ratio {ratio:.2}");
            min_ratio = min_ratio.min(ratio);
        }
    }
    ensure!(long > 0, "no episode longer than 30 steps");
    let elapsed = within(Duration::from_secs(60), start)?;
    Ok(format!(
        "200 episodes, peak/bound {worst:.2}, min ratio {min_ratio:.2} over {long} long episodes, {elapsed:.1?}"
    ))
}

fn indexed_matches_full_context() -> Check {
    let start = Instant::now();
    let (mut full, mut idx, mut ablated) = (0, 0, 0);
    for seed in 0..100 {
        let (r, _) = run_household(&mut OracleFullContext, episode(seed, 60), SYSTEM_PROMPT).expect("valid config");
        full += r.trajectory.terminal.goal_satisfied as usize;
        idx += indexed(seed, READS).trajectory.terminal.goal_satisfied as usize;
        ablated += indexed(seed, 0).trajectory.terminal.goal_satisfied as usize;
    }
    ensure!(full == 100 && idx == 100, "success: full {full}/100, indexed {idx}/100");
    ensure!(ablated < idx, "B=0 ablation solved {ablated}/100");
    let elapsed = within(Duration::from_secs(60), start)?;
    Ok(format!("full 100/100, indexed 100/100, B=0 {ablated}/100, {elapsed:.1?}"))
}

fn reward_equivalence() -> Check {
    let mut penalised = 0;
    for seed in 0..500 {
        let t = fuzzed(seed);
        let parsed = TrajectoryLog::from_jsonl(&t.to_jsonl()).map_err(|e| format!("seed {seed}: {e}"))?;
        let b = episode_return(&parsed, parsed.terminal.goal_satisfied, parsed.header.config.tau);
        ensure!(b.bit_eq(&t.terminal.breakdown), "seed {seed}: {b:?} != {:?}", t.terminal.breakdown);
        for p in [b.p_context, b.p_redundancy, b.p_format] {
            ensure!((0.0..=1.0).contains(&p), "seed {seed}: penalty {p}");
        }
        ensure!(b.total <= b.r_task && b.total >= b.r_task - 3.0, "seed {seed}: total {}", b.total);
        penalised += (b.total < b.r_task) as usize;
    }
    Ok(format!("500 episodes bit-equal, {penalised} with nonzero penalty"))
}

fn advantage_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut flat = 0;
    for g in 0..1000 {
        let rewards: Vec<f64> = match g % 4 {
            0 => vec![rng.random_range(-3.0..=1.0); 8],
            1 => (0..8).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect(),
            _ => (0..8).map(|_| rng.random_range(-3.0..=1.0)).collect(),
        };
        let a = group_advantages(&rewards);
        ensure!(a.len() == 8, "group {g}: {} advantages", a.len());
        let mean = rewards.iter().sum::<f64>() / 8.0;
        let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / 8.0;
        if rewards.iter().all(|&r| r == rewards[0]) {
            flat += 1;
            ensure!(a.iter().all(|&x| x == 0.0), "group {g}: flat rewards gave {a:?}");
        } else if var.sqrt() > 0.0 {
            let m = a.iter().sum::<f64>() / 8.0;
            ensure!(m.abs() <= 1e-9, "group {g}: mean advantage {m:e}");
            worst = worst.max(m.abs());
        }
    }
    let hand = group_advantages(&[1.0, 0.0]);
    ensure!(
        (hand[0] - 1.0).abs() <= 1e-6 && (hand[1] + 1.0).abs() <= 1e-6,
        "[1, 0] gave {hand:?}"
    );
    Ok(format!("1000 groups, max |mean| {worst:.1e}, {flat} flat groups zeroed, [1,0] -> {hand:.6?}"))
}

fn segmentation_coverage() -> Check {
    let mut by_k = [0usize; 6];
    for seed in 0..300 {
        let t = fuzzed(seed);
        let k = t.compressions();
        ensure!(k <= 5, "seed {seed}: {k} compressions");
        by_k[k] += 1;
        let segs = segment(&t).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure!(segs.len() == k + 1, "seed {seed}: {} segments for k={k}", segs.len());
        let steps: Vec<usize> = segs.iter().flat_map(|s| s.steps()).collect();
        ensure!(
            steps == (1..=t.steps.len()).collect::<Vec<_>>(),
            "seed {seed}: step coverage {steps:?}"
        );
        let summaries: Vec<&str> = t
            .steps
            .iter()
            .filter(|s| s.compressed)
            .map(|s| s.compress_report.as_ref().map(|r| r.summary_message.as_str()).unwrap_or_default())
            .collect();
        for (i, s) in segs.iter().enumerate() {
            ensure!(s.reward.to_bits() == t.terminal.breakdown.total.to_bits(), "seed {seed}: reward differs");
            ensure!(s.segment_idx == i, "seed {seed}: segment index {}", s.segment_idx);
            ensure!(
                s.messages[0].content == SYSTEM_PROMPT && s.messages[1].content == t.header.task,
                "seed {seed} segment {i}: prefix differs"
            );
            if i > 0 {
                let m = &s.messages[2];
                ensure!(
                    m.kind == MessageKind::IndexedSummary && m.content == summaries[i - 1],
                    "seed {seed} segment {i}: summary differs"
                );
            }
        }
    }
    ensure!(by_k.iter().all(|&n| n > 0), "compression counts not all exercised: {by_k:?}");
    Ok(format!("300 episodes, episodes per k=0..5: {by_k:?}"))
}

/// Byte-wise search independent of `str::find`.
fn naive_find(hay: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    (from..=hay.len().checked_sub(needle.len())?).find(|&i| &hay[i..i + needle.len()] == needle)
}

fn naive_extract(doc: &str, start: &str, mid: &str, end: &str) -> Result<std::ops::Range<usize>, AnchorError> {
    for (a, kind) in [(start, AnchorKind::Start), (mid, AnchorKind::Mid), (end, AnchorKind::End)] {
        if a.is_empty() {
            return Err(AnchorError::EmptyAnchor(kind));
        }
    }
    let d = doc.as_bytes();
    let s = naive_find(d, start.as_bytes(), 0).ok_or(AnchorError::AnchorNotFound(AnchorKind::Start))?;
    let inner = s + start.len();
    let e = naive_find(d, end.as_bytes(), inner).ok_or(AnchorError::AnchorNotFound(AnchorKind::End))?;
    naive_find(&d[..e], mid.as_bytes(), inner).ok_or(AnchorError::MidAnchorVerificationFailed)?;
    Ok(s..e + end.len())
}

fn anchor_fuzz() -> Check {
    let alphabet = ['a', 'b', 'c', ' ', 'é'];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut counts = [0usize; 4];
    for case in 0..1000 {
        let chars: Vec<char> = (0..rng.random_range(0..60)).map(|_| *alphabet.choose(&mut rng).unwrap()).collect();
        let doc: String = chars.iter().collect();
        let anchor = |rng: &mut ChaCha8Rng| -> String {
            if rng.random_bool(0.03) {
                return String::new();
            }
            let len = rng.random_range(1..4);
            if !chars.is_empty() && rng.random_bool(0.7) {
                let from = rng.random_range(0..chars.len());
                chars[from..(from + len).min(chars.len())].iter().collect()
            } else {
                (0..len).map(|_| *alphabet.choose(rng).unwrap()).collect()
            }
        };
        let (start, mid, end) = (anchor(&mut rng), anchor(&mut rng), anchor(&mut rng));
        let got = extract_span(&doc, &start, &mid, &end).map(|x| x.range);
        let want = naive_extract(&doc, &start, &mid, &end);
        ensure!(got == want, "case {case}: doc {doc:?} anchors ({start:?}, {mid:?}, {end:?}): {got:?} vs {want:?}");
        match got {
            Ok(range) => {
                let span = &doc[range];
                let inner = &span[start.len()..span.len() - end.len()];
                ensure!(
                    span.starts_with(&start) && span.ends_with(&end) && inner.contains(&mid),
                    "case {case}: false match {span:?}"
                );
                counts[0] += 1;
            }
            Err(AnchorError::MidAnchorVerificationFailed) => counts[1] += 1,
            Err(AnchorError::AnchorNotFound(_)) => counts[2] += 1,
            Err(AnchorError::EmptyAnchor(_)) => counts[3] += 1,
        }
    }
    ensure!(counts.iter().all(|&n| n > 0), "outcome classes not all exercised: {counts:?}");
    Ok(format!(
        "1000 cases: {} spans, {} mid rejections, {} not found, {} empty",
        counts[0], counts[1], counts[2], counts[3]
    ))
}

fn malformation_corpus() -> Check {
    use MalformedClass::{InvalidJson as IJ, MissingField as MF, TagMismatch as TM};
    const OK: &str = r#"{"name": "execute_action", "arguments": {"action": "look"}}"#;
    let call = |body: &str| format!("<tool_call>\n{body}\n</tool_call>");
    let corpus: Vec<(String, Vec<MalformedClass>, usize)> = vec![
        (format!("<tool_call>{OK}"), vec![TM], 0),
        ("thinking <tool_call>".into(), vec![TM], 0),
        (format!("<tool_call>{}", call(OK)), vec![TM], 1),
        (format!("{}<tool_call>{OK}", call(OK)), vec![TM], 1),
        (format!("<tool_call>{OK}</tool_cal>"), vec![TM], 0),
        (format!("<tool_call>{OK}</TOOL_CALL>"), vec![TM], 0),
        ("<tool_call><tool_call><tool_call>".into(), vec![TM, TM, TM], 0),
        (format!("<tool_call>\n{OK}\n<tool_call"), vec![TM], 0),
        (call(r#"{name: "a", "arguments": {}}"#), vec![IJ], 0),
        (call(r#"{"name": "a", "arguments": {}"#), vec![IJ], 0),
        ("<tool_call></tool_call>".into(), vec![IJ], 0),
        (call(r#"{"name": "a", "arguments": {},}"#), vec![IJ], 0),
        (call("{'name': 'a', 'arguments': {}}"), vec![IJ], 0),
        (call(r#"{"name": "a", "arguments": {}} trailing"#), vec![IJ], 0),
        (call("name=a"), vec![IJ], 0),
        (call(r#"{"name": "a", "arguments": {"x": NaN}}"#), vec![IJ], 0),
        (call(r#"{"name": "a" "arguments": {}}"#), vec![IJ], 0),
        (call(r#"""""#), vec![IJ], 0),
        (call(r#"{"arguments": {}}"#), vec![MF], 0),
        (call(r#"{"name": "a"}"#), vec![MF], 0),
        (call(r#"{"name": "", "arguments": {}}"#), vec![MF], 0),
        (call(r#"{"name": 3, "arguments": {}}"#), vec![MF], 0),
        (call(r#"{"name": "a", "arguments": [1]}"#), vec![MF], 0),
        (call(r#"{"name": "a", "arguments": "x"}"#), vec![MF], 0),
        (call("[1, 2]"), vec![MF], 0),
        (call(r#""just a string""#), vec![MF], 0),
        (call("null"), vec![MF], 0),
        (call(r#"{"tool": "a", "args": {}}"#), vec![MF], 0),
        (format!("{} and a stray </tool_call>", call("{}")), vec![MF], 0),
        (format!("{}{}{}", call("{bad}"), call(r#"{"name": "a"}"#), call(OK)), vec![IJ, MF], 1),
        (format!("{}\n{}", call(OK), call(OK)), vec![], 2),
        (call(OK), vec![], 1),
        ("I will look around first.".into(), vec![], 0),
        ("stray </tool_call> only".into(), vec![], 0),
    ];
    let mut per_class = [0usize; 3];
    for (i, (text, classes, calls)) in corpus.iter().enumerate() {
        let out = parse_assistant_output(text);
        let got: Vec<MalformedClass> = out.malformed.iter().map(|m| m.class).collect();
        ensure!(&got == classes && out.calls.len() == *calls, "entry {i} {text:?}: {got:?}, {} calls", out.calls.len());
        for c in classes {
            per_class[*c as usize] += 1;
        }
    }
    ensure!(per_class.iter().all(|&n| n > 0), "classes not all covered: {per_class:?}");
    Ok(format!(
        "{} outputs, 0 misclassified (tag {}, json {}, field {})",
        corpus.len(),
        per_class[0],
        per_class[1],
        per_class[2]
    ))
}

fn compression_postcondition() -> Check {
    let mut checked = 0;
    let trajectories = (0..200).map(|s| indexed(s, READS).trajectory).chain((0..300).map(fuzzed));
    for (n, t) in trajectories.enumerate() {
        for s in t.steps.iter().filter(|s| s.compressed) {
            ensure!(
                s.messages_after == 3 && s.working_after <= 300,
                "episode {n} step {}: {} messages, {} tokens",
                s.t,
                s.messages_after,
                s.working_after
            );
            checked += 1;
        }
    }
    ensure!(checked > 0, "no compressions observed");
    Ok(format!("{checked} compressions over 500 episodes"))
}

fn memex_run(out: &Path, policy: &str) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_memex"))
        .args(["run", "--seeds", "0..12", "--policy", policy, "--workers", "3", "--out"])
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(status.status.success(), "memex run exited with {:?}", status.status.code());
    Ok(())
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).into_iter().flatten().flatten() {
        let path = entry.path();
        if path.is_dir() {
            out.extend(files(&path));
        } else {
            out.push(path);
        }
    }
    out.sort();
    out
}

fn end_to_end_determinism() -> Check {
    let mut compared = 0;
    for policy in ["oracle_indexed", "oracle_full"] {
        let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
        memex_run(a.path(), policy)?;
        memex_run(b.path(), policy)?;
        let (fa, fb) = (files(a.path()), files(b.path()));
        let rel = |d: &Path, fs: &[PathBuf]| fs.iter().map(|f| f.strip_prefix(d).unwrap().to_path_buf()).collect::<Vec<_>>();
        ensure!(rel(a.path(), &fa) == rel(b.path(), &fb), "{policy}: file sets differ");
        ensure!(fa.iter().any(|f| f.starts_with(a.path().join("trajectories"))), "{policy}: no trajectories");
        for (x, y) in fa.iter().zip(&fb) {
            ensure!(std::fs::read(x).ok() == std::fs::read(y).ok(), "{policy}: {} differs", x.display());
            compared += 1;
        }
    }
    Ok(format!("{compared} files byte-identical across paired runs"))
}

fn oracle_brain(r: &MockRequest) -> MockResponse {
    let messages: Vec<ChatMessage> = r.messages().into_iter().map(|(role, content)| ChatMessage { role, content }).collect();
    match chat_to_window(&messages) {
        Some(window) => MockResponse::completion(&OracleFullContext.act(&window).expect("oracle never fails")),
        None => MockResponse::status(400),
    }
}

fn gateway_config(server: &MockServer) -> GatewayConfig {
    GatewayConfig {
        endpoint: server.endpoint(),
        model: "mock".into(),
        token_env: "MEMEX_ACCEPTANCE_TOKEN_UNSET".into(),
        timeout_ms: 2_000,
        max_retries: 3,
        temperature: 0.0,
        backoff_ms: 5,
    }
}

fn gateway_contract() -> Check {
    let asset = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/assets/alfworld_system_prompt.txt");
    let on_disk = std::fs::read_to_string(&asset).map_err(|e| format!("{}: {e}", asset.display()))?;
    ensure!(on_disk == SYSTEM_PROMPT, "embedded system prompt differs from asset file");

    let injected = Arc::new(AtomicUsize::new(0));
    let counter = injected.clone();
    let server = MockServer::start(move |r: &MockRequest| {
        if r.index % 4 == 1 {
            counter.fetch_add(1, Ordering::SeqCst);
            return if r.index % 8 == 1 { MockResponse::status(503) } else { MockResponse::status(429) };
        }
        oracle_brain(r)
    });
    let mut policy = GatewayPolicy::new(gateway_config(&server)).map_err(|e| e.to_string())?;
    let cfg = episode(3, 60);
    let (r, _) = run_household(&mut policy, cfg.clone(), SYSTEM_PROMPT).map_err(|e| e.to_string())?;
    ensure!(matches!(r.outcome, Outcome::Finished { .. }), "episode outcome {:?}", r.outcome);
    ensure!(r.trajectory.terminal.goal_satisfied, "goal not satisfied");
    let requests = server.requests();
    ensure!(
        requests.iter().all(|q| q.messages().first().map(|m| m.1.as_str()) == Some(SYSTEM_PROMPT)),
        "system prompt not sent verbatim"
    );
    let (direct, _) = run_household(&mut OracleFullContext, cfg, SYSTEM_PROMPT).map_err(|e| e.to_string())?;
    ensure!(direct.trajectory == r.trajectory, "gateway trajectory differs from direct run");
    let faults = injected.load(Ordering::SeqCst);
    ensure!(faults > 0, "no faults injected");

    let request = window_to_chat(&ContextWindow::new("s", "t"));
    let server = MockServer::start(|r: &MockRequest| if r.index < 2 { MockResponse::status(503) } else { MockResponse::completion("ok") });
    let out = Gateway::new(gateway_config(&server)).unwrap().complete(&request);
    ensure!(out.as_deref().ok() == Some("ok") && server.request_count() == 3, "retry: {out:?}");

    let server = MockServer::start(|_: &MockRequest| MockResponse::status(500));
    let err = Gateway::new(gateway_config(&server)).unwrap().complete(&request);
    ensure!(
        matches!(err, Err(GatewayError::GatewayTimeout { attempts: 4, .. })) && server.request_count() == 4,
        "exhaustion: {err:?}"
    );

    let server = MockServer::start(|_: &MockRequest| MockResponse::completion("late").delayed(Duration::from_millis(500)));
    let slow = GatewayConfig {
        timeout_ms: 100,
        max_retries: 1,
        ..gateway_config(&server)
    };
    let err = Gateway::new(slow).unwrap().complete(&request);
    ensure!(matches!(err, Err(GatewayError::GatewayTimeout { attempts: 2, .. })), "timeout: {err:?}");

    let server = MockServer::start(|_: &MockRequest| MockResponse::status(400));
    let err = Gateway::new(gateway_config(&server)).unwrap().complete(&request);
    ensure!(
        matches!(err, Err(GatewayError::GatewayProtocolError(_))) && server.request_count() == 1,
        "client error: {err:?}"
    );
    Ok(format!(
        "{} steps via gateway with {faults} injected faults, retry/exhaustion/timeout/protocol verified",
        r.trajectory.steps.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("working-context bound", working_context_bound),
        ("indexed memory matches full context", indexed_matches_full_context),
        ("reward oracle equivalence", reward_equivalence),
        ("group advantage properties", advantage_properties),
        ("segmentation coverage", segmentation_coverage),
        ("anchor extraction fuzz", anchor_fuzz),
        ("malformation classification", malformation_corpus),
        ("compression postcondition", compression_postcondition),
        ("end-to-end determinism", end_to_end_determinism),
        ("gateway contract", gateway_contract),
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
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
