//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Runs with `cargo test --test acceptance`.

#[path = "../../core/tests/support/mod.rs"]
mod oracle;

use std::collections::BTreeMap;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use argllm::builder::{build_qbaf, expected_size, GenerationConfig};
use argllm::core::semantics::{dfquad_combine, euler_strength, evaluate, evaluate_iterative, qe_strength};
use argllm::core::{Argument, ArgumentId, NewArgument, Polarity, Provenance, Qbaf, Semantics};
use argllm::gateway::{BackendConfig, Gateway, MockBackend};
use argllm::ingest::{fixtures, pdf_to_markdown};
use argllm::service::{self, ServiceConfig, Store};
use rand::Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn mock_gateway(seed: u64) -> Gateway {
    Gateway::with_backend(Arc::new(MockBackend::new(seed, vec![])), 4)
}

fn gen_config(depth: u8, breadth: u8) -> GenerationConfig {
    GenerationConfig::new(Semantics::DfQuad, depth, breadth, BackendConfig::mock(7))
}

fn worked_tree() -> Qbaf {
    let a0 = ArgumentId::numbered(0);
    let q = Qbaf::new(Argument::new(a0.clone(), "claim", 0.5, Provenance::Claim).unwrap());
    let q = q.add_argument(&a0, Polarity::Attack, NewArgument::new("attacker", 0.8, Provenance::UserAdded)).unwrap().0;
    q.add_argument(&a0, Polarity::Support, NewArgument::new("supporter", 0.4, Provenance::UserAdded)).unwrap().0
}

/// Strengths from the scalar oracle formulas, recursing from the root.
fn oracle_strengths(q: &Qbaf, sem: Semantics) -> BTreeMap<ArgumentId, f64> {
    fn go(q: &Qbaf, id: &ArgumentId, sem: Semantics, out: &mut BTreeMap<ArgumentId, f64>) -> f64 {
        let tau = q.get(id).unwrap().base_score();
        let (mut att, mut sup) = (Vec::new(), Vec::new());
        for (child, pol) in q.children_of(id).unwrap() {
            let v = go(q, &child, sem, out);
            match pol {
                Polarity::Attack => att.push(v),
                Polarity::Support => sup.push(v),
            }
        }
        let v = if att.is_empty() && sup.is_empty() {
            tau
        } else {
            let energy = sup.iter().sum::<f64>() - att.iter().sum::<f64>();
            match sem {
                Semantics::DfQuad => {
                    oracle::oracle_combine(tau, oracle::oracle_aggregate(&att), oracle::oracle_aggregate(&sup))
                }
                Semantics::Euler => oracle::oracle_euler(tau, energy),
                Semantics::QuadraticEnergy => oracle::oracle_qe(tau, energy),
            }
        };
        out.insert(id.clone(), v);
        v
    }
    let mut out = BTreeMap::new();
    go(q, q.root(), sem, &mut out);
    out
}

fn seven_argument_tree(rt: &tokio::runtime::Runtime) -> Outcome {
    let q = rt.block_on(build_qbaf(&mock_gateway(7), "The claim under debate", &gen_config(2, 1), &[])).map_err(|e| e.to_string())?;
    let (att, sup) = (q.count_edges(Polarity::Attack), q.count_edges(Polarity::Support));
    ensure!(q.len() == 7 && att == 3 && sup == 3, "{} arguments, {att} attacks, {sup} supports", q.len());
    Ok(format!("{} arguments, {att} attacks, {sup} supports", q.len()))
}

fn node_count_law(rt: &tokio::runtime::Runtime) -> Outcome {
    let mut sizes = Vec::new();
    for depth in 1..=2u8 {
        for breadth in 1..=4u8 {
            let q = rt.block_on(build_qbaf(&mock_gateway(3), "Claim", &gen_config(depth, breadth), &[])).map_err(|e| e.to_string())?;
            let b = breadth as usize;
            let law = if depth == 1 { 1 + 2 * b } else { 1 + 2 * b + 4 * b * b };
            ensure!(q.len() == law && law == expected_size(depth, breadth), "depth {depth} breadth {breadth}: {} != {law}", q.len());
            sizes.push(q.len().to_string());
        }
    }
    Ok(format!("sizes {}", sizes.join(",")))
}

fn oracle_equivalence() -> Outcome {
    let mut rng = oracle::rng(0x5EED);
    let mut worst: f64 = 0.0;
    let trees = 200;
    for _ in 0..trees {
        let q = oracle::random_tree(&mut rng);
        for sem in Semantics::ALL {
            let direct = evaluate(&q, sem).map_err(|e| e.to_string())?;
            let iter = evaluate_iterative(&q, sem, 1e-12, 10).map_err(|e| e.to_string())?;
            let diff = direct.max_abs_diff(&iter.strengths).ok_or("strength maps differ in shape")?;
            let reference = oracle_strengths(&q, sem);
            for (id, v) in &reference {
                worst = worst.max((direct.get(id).unwrap() - v).abs());
            }
            worst = worst.max(diff);
            ensure!(worst <= 1e-9, "{sem}: deviation {worst:e}");
        }
    }
    Ok(format!("{trees} trees x 3 semantics, max deviation {worst:e}"))
}

fn scalar_identities() -> Outcome {
    let mut rng = oracle::rng(0x1D);
    for _ in 0..300 {
        let q = oracle::random_tree(&mut rng);
        for sem in Semantics::ALL {
            let s = evaluate(&q, sem).map_err(|e| e.to_string())?;
            for a in q.arguments() {
                if q.children_of(a.id()).unwrap().is_empty() {
                    ensure!(s.get(a.id()) == Some(a.base_score()), "leaf law broken for {} under {sem}", a.id());
                }
            }
        }
    }
    let mut zero_energy: f64 = 0.0;
    for i in 0..=1000 {
        let tau = i as f64 / 1000.0;
        for j in 0..=20 {
            let x = j as f64 / 20.0;
            ensure!(dfquad_combine(tau, x, x).unwrap() == tau, "balance law at tau={tau} x={x}");
        }
        zero_energy = zero_energy.max((euler_strength(tau, 0.0).unwrap() - tau).abs());
        zero_energy = zero_energy.max((qe_strength(tau, 0.0).unwrap() - tau).abs());
    }
    ensure!(zero_energy <= 1e-12, "zero-energy deviation {zero_energy:e}");
    let mut violations = 0usize;
    let g = |i: usize| i as f64 / 50.0;
    for t in 0..=50 {
        for a in 0..=50 {
            for s in 0..=50 {
                let here = dfquad_combine(g(t), g(a), g(s)).unwrap();
                if s < 50 && dfquad_combine(g(t), g(a), g(s + 1)).unwrap() < here {
                    violations += 1;
                }
                if a < 50 && dfquad_combine(g(t), g(a + 1), g(s)).unwrap() > here {
                    violations += 1;
                }
            }
        }
        let tau = g(t);
        let (mut pe, mut pq) = (euler_strength(tau, -8.0).unwrap(), qe_strength(tau, -8.0).unwrap());
        for step in 1..=1600 {
            let e = -8.0 + step as f64 * 0.01;
            let (ve, vq) = (euler_strength(tau, e).unwrap(), qe_strength(tau, e).unwrap());
            violations += usize::from(ve < pe) + usize::from(vq < pq);
            pe = ve;
            pq = vq;
        }
    }
    ensure!(violations == 0, "{violations} monotonicity violations");
    Ok(format!("leaf law exact, zero-energy max deviation {zero_energy:e}, 0 monotonicity violations"))
}

fn worked_values() -> Outcome {
    // the oracle is checked before the implementation
    ensure!((oracle::oracle_combine(0.5, 0.8, 0.0) - 0.10).abs() < 1e-12, "oracle combine");
    ensure!((oracle::oracle_qe(0.5, 0.4 - 0.8) - 0.431034).abs() < 1e-6, "oracle qe");
    let c = dfquad_combine(0.5, 0.8, 0.0).map_err(|e| e.to_string())?;
    ensure!((c - 0.10).abs() < 1e-12, "dfquad_combine(0.5,0.8,0) = {c}");
    let q = worked_tree();
    let root = q.root().clone();
    let df = evaluate(&q, Semantics::DfQuad).unwrap().get(&root).unwrap();
    let qe = evaluate(&q, Semantics::QuadraticEnergy).unwrap().get(&root).unwrap();
    ensure!((df - 0.30).abs() < 1e-12, "df-quad root {df}");
    ensure!((qe - 0.431034).abs() < 1e-6, "quadratic-energy root {qe}");
    Ok(format!("combine {c:.2}, df-quad root {df:.2}, quadratic-energy root {qe:.6}"))
}

fn range_law() -> Outcome {
    let mut rng = oracle::rng(0xBEEF);
    let mut values = 0usize;
    for _ in 0..1000 {
        let mut q = oracle::random_tree(&mut rng);
        if rng.gen_bool(0.2) {
            // push some scores to the ends
            let ids: Vec<ArgumentId> = q.arguments().map(|a| a.id().clone()).collect();
            for id in ids {
                q = q.set_base_score(&id, if rng.gen_bool(0.5) { 0.0 } else { 1.0 }).unwrap();
            }
        }
        for sem in Semantics::ALL {
            let s = evaluate(&q, sem).map_err(|e| e.to_string())?;
            for (id, v) in s.iter() {
                ensure!((0.0..=1.0).contains(&v), "{sem} {id} = {v}");
                values += 1;
            }
        }
    }
    Ok(format!("1000 trees x 3 semantics, {values} strengths in [0,1]"))
}

async fn request(client: &reqwest::Client, method: reqwest::Method, url: String, body: Option<Value>) -> Result<(u16, Value), String> {
    let mut req = client.request(method, url);
    if let Some(b) = body {
        req = req.json(&b);
    }
    let resp = req.send().await.map_err(|e| e.to_string())?;
    let status = resp.status().as_u16();
    Ok((status, resp.json().await.unwrap_or(Value::Null)))
}

async fn start(store: Store) -> Result<(String, tokio::task::JoinHandle<()>), String> {
    let config = ServiceConfig { store, default_backend: BackendConfig::mock(7), ..Default::default() };
    let (_, app) = service::app(&config).map_err(|e| e.to_string())?;
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.map_err(|e| e.to_string())?;
    let addr = listener.local_addr().map_err(|e| e.to_string())?;
    let task = tokio::spawn(async move {
        let _ = axum::serve(listener, app).await;
    });
    Ok((format!("http://{addr}"), task))
}

fn api_end_to_end(rt: &tokio::runtime::Runtime) -> Outcome {
    use reqwest::Method;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let client = reqwest::Client::new();
        let store = Store::at(dir.path()).map_err(|e| e.to_string())?;
        let (base, task) = start(store.clone()).await?;
        let (status, created) = request(&client, Method::POST, format!("{base}/sessions"), None).await?;
        ensure!(status == 201, "create: {status}");
        let sid = created["id"].as_str().unwrap_or_default().to_owned();
        let s = format!("{base}/sessions/{sid}");
        request(&client, Method::PUT, format!("{s}/settings"), Some(json!({ "depth": 1, "breadth": 1 }))).await?;
        let (status, _) = request(&client, Method::POST, format!("{s}/claim"), Some(json!({ "text": "The bill will pass" }))).await?;
        ensure!(status == 200, "claim: {status}");
        for (id, v) in [("a0", 0.5), ("a1", 0.8), ("a2", 0.4)] {
            let (status, _) = request(&client, Method::PATCH, format!("{s}/arguments/{id}"), Some(json!({ "base_score": v }))).await?;
            ensure!(status == 200, "patch {id}: {status}");
        }
        let (status, body) = request(&client, Method::PATCH, format!("{s}/arguments/a1"), Some(json!({ "base_score": 1.0 }))).await?;
        ensure!(status == 200, "patch attacker: {status}");
        let old = body["root_shift"]["old"].as_f64().unwrap_or(f64::NAN);
        let new = body["root_shift"]["new"].as_f64().unwrap_or(f64::NAN);
        let mut predicted_tree = worked_tree();
        predicted_tree = predicted_tree.set_base_score(&ArgumentId::numbered(1), 1.0).unwrap();
        let predicted = oracle_strengths(&predicted_tree, Semantics::DfQuad)[&ArgumentId::numbered(0)];
        ensure!((old - 0.30).abs() < 1e-12 && (new - predicted).abs() < 1e-12 && (new - 0.20).abs() < 1e-12,
            "root moved {old} -> {new}, oracle predicts {predicted}");
        let (_, before) = request(&client, Method::GET, s.clone(), None).await?;
        task.abort();

        let on_disk = std::fs::read(store.snapshot_path(&sid).unwrap()).map_err(|e| e.to_string())?;
        let reloaded = store.load_all().map_err(|e| e.to_string())?;
        ensure!(reloaded.len() == 1 && reloaded[0].snapshot() == on_disk, "snapshot does not round-trip byte for byte");
        let (base2, task2) = start(Store::at(dir.path()).map_err(|e| e.to_string())?).await?;
        let (_, after) = request(&client, Method::GET, format!("{base2}/sessions/{sid}"), None).await?;
        task2.abort();
        let (b, a) = (serde_json::to_vec(&before).unwrap(), serde_json::to_vec(&after).unwrap());
        ensure!(a == b, "session differs after reload");
        Ok(format!("root {old:.2} -> {new:.2} (oracle {predicted:.2}), reload byte-identical ({} bytes)", on_disk.len()))
    })
}

fn cli_golden() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_argllm");
    let manifest = env!("CARGO_MANIFEST_DIR");
    let ask = || {
        Command::new(bin)
            .args(["ask", "Remote work raises productivity", "--mock", "--seed", "7", "--depth", "2", "--breadth", "1"])
            .env_remove("LLM_API_KEY")
            .output()
            .map_err(|e| e.to_string())
    };
    let (a, b) = (ask()?, ask()?);
    ensure!(a.status.code() == Some(0), "ask exited {:?}", a.status.code());
    ensure!(a.stdout == b.stdout, "ask output differs between runs");
    let golden = std::fs::read(format!("{manifest}/tests/golden/ask_seed7.json")).map_err(|e| e.to_string())?;
    ensure!(a.stdout == golden, "ask output differs from the golden file");
    let eval = |file: &str| {
        Command::new(bin).args(["eval", &format!("{manifest}/tests/fixtures/{file}")]).output().map_err(|e| e.to_string())
    };
    let ok = eval("worked.json")?;
    let bad = eval("cyclic.json")?;
    ensure!(ok.status.code() == Some(0), "eval worked exited {:?}", ok.status.code());
    ensure!(bad.status.code() == Some(2), "eval cyclic exited {:?}", bad.status.code());
    ensure!(String::from_utf8_lossy(&bad.stderr).contains("not-a-tree"), "cyclic report lacks not-a-tree");
    Ok(format!("ask golden stable ({} bytes), eval exits 0/2", golden.len()))
}

fn pdf_ingestion(rt: &tokio::runtime::Runtime) -> Outcome {
    let sentence = "Hello world, this sentence comes from a generated PDF.";
    let pdf = fixtures::text_pdf(&[vec![fixtures::line(sentence, 12.0)]]);
    let ex = pdf_to_markdown(&pdf).map_err(|e| e.to_string())?;
    ensure!(ex.markdown.contains(sentence) && ex.page_count == 1, "extracted {:?}", ex.markdown);
    let status = rt.block_on(async {
        let client = reqwest::Client::new();
        let (base, task) = start(Store::in_memory()).await?;
        let (_, created) = request(&client, reqwest::Method::POST, format!("{base}/sessions"), None).await?;
        let sid = created["id"].as_str().unwrap_or_default().to_owned();
        let boundary = "acceptance-boundary";
        let body = format!(
            "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"notes.txt\"\r\nContent-Type: text/plain\r\n\r\nplain text\r\n--{boundary}--\r\n"
        );
        let resp = client
            .post(format!("{base}/sessions/{sid}/documents"))
            .header("content-type", format!("multipart/form-data; boundary={boundary}"))
            .body(body)
            .send()
            .await
            .map_err(|e| e.to_string())?;
        task.abort();
        Ok::<_, String>(resp.status().as_u16())
    })?;
    ensure!(status == 415, "non-PDF upload returned {status}");
    Ok("fixture sentence extracted, non-PDF upload 415".into())
}

fn main() {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().expect("runtime");
    let criteria: Vec<(&str, Duration, Box<dyn Fn() -> Outcome>)> = vec![
        ("seven-argument-tree", Duration::from_secs(1), Box::new(|| seven_argument_tree(&rt))),
        ("node-count-law", Duration::from_secs(5), Box::new(|| node_count_law(&rt))),
        ("semantics-oracle-equivalence", Duration::from_secs(10), Box::new(oracle_equivalence)),
        ("scalar-identities", Duration::from_secs(10), Box::new(scalar_identities)),
        ("worked-values", Duration::from_secs(1), Box::new(worked_values)),
        ("range-law", Duration::from_secs(60), Box::new(range_law)),
        ("api-end-to-end", Duration::from_secs(5), Box::new(|| api_end_to_end(&rt))),
        ("cli-golden", Duration::from_secs(30), Box::new(cli_golden)),
        ("pdf-ingestion", Duration::from_secs(5), Box::new(|| pdf_ingestion(&rt))),
    ];
    let mut failed = 0;
    for (name, budget, check) in &criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > *budget => Err(format!("{detail}; took {elapsed:.2?}, budget {budget:.0?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{elapsed:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} [{elapsed:.2?}]");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
