use evloop::corpus::{chunk_text, window_offsets, ChunkingConfig, VectorIndex};
use evloop::domain::{
    ClinicalSchema, CostCounters, EvidenceDoc, EvidenceSet, RetrievalTrajectory, RoundRecord, SufficiencyVerdict,
    Termination,
};
use evloop::interpreter::{linearize, parse_schema};
use proptest::prelude::*;

fn verdict() -> impl Strategy<Value = SufficiencyVerdict> {
    (
        any::<bool>(),
        "[a-z ]{0,20}",
        prop::collection::vec("[a-z]{1,8}( [a-z]{1,8})?", 0..5),
        1usize..4,
    )
        .prop_map(|(s, gap, qs, m)| SufficiencyVerdict::new(s, gap, qs, m))
}

fn trajectory() -> impl Strategy<Value = RetrievalTrajectory> {
    prop::collection::vec(
        (
            prop::collection::vec("[a-z ]{1,30}", 1..4),
            prop::collection::vec("[0-9a-f]{16}", 0..5),
            verdict(),
            any::<bool>(),
        ),
        1..5,
    )
    .prop_flat_map(|rounds| {
        let n = rounds.len();
        let mut size = 0;
        let rounds: Vec<RoundRecord> = rounds
            .into_iter()
            .enumerate()
            .map(|(i, (queries, newly_added, verdict, audit_failed))| {
                size += newly_added.len();
                RoundRecord {
                    round_index: i + 1,
                    queries,
                    newly_added,
                    evidence_size: size,
                    verdict,
                    audit_failed,
                }
            })
            .collect();
        (
            Just(rounds),
            prop_oneof![
                Just(Termination::Sufficient),
                Just(Termination::MaxRounds),
                Just(Termination::Stagnation)
            ],
            any::<[u32; 7]>(),
        )
            .prop_map(move |(rounds, termination, c)| RetrievalTrajectory {
                rounds,
                rounds_executed: n,
                termination,
                counters: CostCounters {
                    llm_calls: c[0] as u64,
                    retries: c[1] as u64,
                    cache_hits: c[2] as u64,
                    retrieval_ops: c[3] as u64,
                    tokens_in: c[4] as u64,
                    tokens_out: c[5] as u64,
                    wall_ms: c[6] as u64,
                },
            })
    })
}

proptest! {
    #[test]
    fn trajectory_serde_round_trip(t in trajectory()) {
        let text = serde_json::to_string(&t).unwrap();
        let back: RetrievalTrajectory = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn verdict_invariants(v in verdict()) {
        if v.is_sufficient() {
            prop_assert!(v.next_queries().is_empty());
        }
        prop_assert!(v.next_queries().iter().all(|q| !q.trim().is_empty()));
        let back: SufficiencyVerdict = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        prop_assert_eq!(back, v);
    }

    #[test]
    fn evidence_set_round_trips_and_rejects_duplicates(texts in prop::collection::vec("[a-c]{1,3}", 1..20)) {
        let mut set = EvidenceSet::new();
        set.absorb(texts.iter().map(|t| EvidenceDoc::new("s", "t", t.clone())));
        let json = serde_json::to_string(&set).unwrap();
        let back: EvidenceSet = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(&back, &set);
        let mut docs: Vec<EvidenceDoc> = set.docs().to_vec();
        docs.push(docs[0].clone());
        prop_assert!(serde_json::from_str::<EvidenceSet>(&serde_json::to_string(&docs).unwrap()).is_err());
    }

    #[test]
    fn schema_survives_reply_round_trip(
        q in "[a-z][a-z ]{0,20}[a-z]",
        intent in "([a-z][a-z ]{0,10}[a-z])?",
        entities in prop::collection::vec("[a-z][a-z0-9 +/]{0,10}[a-z]", 0..4),
        constraints in prop::collection::vec("[a-z0-9][a-z0-9 ]{0,10}[a-z0-9]", 0..4),
    ) {
        let schema = ClinicalSchema::new(intent, entities, constraints, q).unwrap();
        let reply = format!("Here is the schema:\n{}\nDone.", serde_json::to_string(&schema).unwrap());
        let parsed = parse_schema(&reply, false).unwrap();
        prop_assert_eq!(linearize(&parsed), linearize(&schema));
        prop_assert_eq!(parsed, schema);
    }

    #[test]
    fn chunk_windows_cover_text(len in 0usize..6000, max in 50usize..1500, overlap_frac in 0usize..90) {
        let cfg = ChunkingConfig { max_chars: max, overlap: max * overlap_frac / 100 };
        let offs = window_offsets(len, cfg);
        prop_assert_eq!(offs[0], 0);
        prop_assert!(offs.windows(2).all(|w| w[1] - w[0] == cfg.stride()));
        prop_assert!(offs.last().unwrap() + max >= len);
        if len > max {
            // the last window is the first that reaches the end
            prop_assert!(offs[offs.len() - 2] + max < len);
        } else {
            prop_assert_eq!(offs.len(), 1);
        }
    }

    #[test]
    fn index_save_load_preserves_search(n in 1usize..40, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let entries: Vec<(EvidenceDoc, Vec<f64>)> = (0..n)
            .map(|i| (EvidenceDoc::new("s", format!("{i}"), "x"), (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let index = VectorIndex::build(8, "t", entries).unwrap();
        let dir = tempfile::tempdir().unwrap();
        index.save(dir.path()).unwrap();
        let loaded = VectorIndex::load(dir.path()).unwrap();
        let q: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        prop_assert_eq!(index.search_vector(&q, 5).unwrap(), loaded.search_vector(&q, 5).unwrap());
        prop_assert_eq!(index.content_hash(), loaded.content_hash());
    }
}

#[test]
fn long_text_chunks_at_expected_offsets() {
    let text: String = (0..2500).map(|i| char::from(b'a' + (i % 26) as u8)).collect();
    let chunks = chunk_text(None, "src", "title", &text, ChunkingConfig::default());
    let offsets: Vec<usize> = chunks.iter().map(|c| c.offset).collect();
    assert_eq!(offsets, vec![0, 800, 1600]);
    assert!(chunks.iter().all(|c| c.doc.text.chars().count() <= 1000));
    assert_eq!(
        chunk_text(None, "s", "t", "short text", ChunkingConfig::default()).len(),
        1
    );
}
