#[path = "../../core/tests/support/mod.rs"]
mod oracle;

use std::sync::Arc;

use argllm::builder::{build_qbaf, expected_size, GenerationConfig};
use argllm::core::Semantics;
use argllm::format::{from_json, to_json};
use argllm::gateway::parse::parse_score;
use argllm::gateway::{BackendConfig, Gateway, MockBackend};
use argllm::ingest::{pdf_to_markdown, truncate_for_prompt, TRUNCATION_MARKER};
use proptest::prelude::*;

proptest! {
    #[test]
    fn parsed_scores_stay_in_range(reply in ".{0,40}") {
        if let Some(v) = parse_score(&reply) {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn written_scores_parse_back(x in 0.0f64..=1.0, pct in 0u32..=100) {
        prop_assert_eq!(parse_score(&format!("Confidence: {x}")), Some(x));
        prop_assert_eq!(parse_score(&format!("about {pct}% sure")), Some(pct as f64 / 100.0));
    }

    #[test]
    fn truncation_respects_the_budget(paras in prop::collection::vec("[a-z ]{1,30}", 1..12), max in 1usize..200) {
        let md = paras.join("\n\n");
        let out = truncate_for_prompt(&md, max);
        if md.chars().count() <= max {
            prop_assert_eq!(out, md);
        } else {
            prop_assert!(out.chars().count() <= max + TRUNCATION_MARKER.chars().count());
            let kept = out.strip_suffix(TRUNCATION_MARKER).unwrap_or("");
            prop_assert!(md.starts_with(kept));
            prop_assert!(out.ends_with(TRUNCATION_MARKER.trim_start()));
        }
    }

    #[test]
    fn arbitrary_bytes_never_panic_extraction(body in prop::collection::vec(any::<u8>(), 0..512), header in any::<bool>()) {
        let mut bytes = if header { b"%PDF-1.5\n".to_vec() } else { Vec::new() };
        bytes.extend(body);
        let _ = pdf_to_markdown(&bytes);
    }

    #[test]
    fn interchange_json_round_trips(seed in any::<u64>()) {
        let q = oracle::random_tree(&mut oracle::rng(seed));
        let bytes = to_json(&q);
        let back = from_json(&bytes).unwrap();
        prop_assert_eq!(to_json(&back), bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mock_builds_obey_the_size_law(seed in any::<u64>(), depth in 1u8..=2, breadth in 1u8..=4, sem in 0usize..3) {
        let rt = tokio::runtime::Builder::new_current_thread().build().unwrap();
        let gateway = Gateway::with_backend(Arc::new(MockBackend::new(seed, vec![])), 4);
        let config = GenerationConfig::new(Semantics::ALL[sem], depth, breadth, BackendConfig::mock(seed));
        let q = rt.block_on(build_qbaf(&gateway, "A claim", &config, &[])).unwrap();
        prop_assert_eq!(q.len(), expected_size(depth, breadth));
        prop_assert!(q.arguments().all(|a| (0.0..=1.0).contains(&a.base_score())));
        let again = rt.block_on(build_qbaf(&gateway, "A claim", &config, &[])).unwrap();
        prop_assert_eq!(to_json(&again), to_json(&q));
    }
}
