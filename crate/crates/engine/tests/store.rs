mod common;

use std::path::PathBuf;

use common::{build_dir, default_dir, sharded};
use infgram_core::memory::index_of;
use infgram_core::{LmConfig, Sign};
use infgram_engine::build::{verify, BuildOptions};
use infgram_engine::ingest::TOKENS_FILE;
use infgram_engine::manifest::Manifest;
use infgram_engine::store::CorpusIndex;
use infgram_testkit::{naive_count, random_docs, random_query, toy_corpus, ChaCha8Rng, SeedableRng};

fn open(dirs: &[(&PathBuf, Sign)]) -> CorpusIndex {
    CorpusIndex::open(&dirs.iter().map(|(p, s)| ((*p).clone(), *s)).collect::<Vec<_>>()).unwrap()
}

#[test]
fn toy_directory_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = default_dir(tmp.path(), "toy", &toy_corpus());
    let ci = open(&[(&dir, Sign::Plus)]);
    let s = ci.stats();
    assert_eq!((s.n, s.d, s.shards), (10, 2, 1));
    assert_eq!(s.index_bytes, 2 * 10 + 10);
    assert_eq!(ci.index.count(&[2, 3]).unwrap(), 2);
    assert_eq!(ci.index.count(&[]).unwrap(), 10);
    let r = ci.index.lm(LmConfig::default()).infgram_prob(&[1, 2], 3).unwrap();
    assert_eq!((r.prob.numerator, r.prob.denominator, r.effective_n), (1, 2, 3));
    let m = Manifest::load(&dir).unwrap();
    assert_eq!(m.shards[0].p, 1);
    assert!(verify(&dir, 1 << 20, 0, 0).unwrap().iter().all(|r| r.passed()));
}

#[test]
fn file_backed_matches_in_memory() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let docs = random_docs(&mut rng, 20_000, 6, 300);
    let tmp = tempfile::tempdir().unwrap();
    let dir = build_dir(tmp.path(), "a", &docs, sharded(3_000));
    let ci = open(&[(&dir, Sign::Plus)]);
    assert!(ci.stats().shards > 1);
    let mem = index_of(&docs).unwrap();
    for _ in 0..300 {
        let q = random_query(&mut rng, &docs, 6, 12);
        assert_eq!(ci.index.count(&q).unwrap(), mem.count(&q).unwrap(), "{q:?}");
        assert_eq!(ci.index.count(&q).unwrap(), naive_count(&docs, &q), "{q:?}");
    }
}

#[test]
fn signed_directories_add_and_subtract() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = random_docs(&mut rng, 4_000, 5, 80);
    let b = random_docs(&mut rng, 3_000, 5, 80);
    let both: Vec<Vec<u16>> = a.iter().chain(&b).cloned().collect();
    let tmp = tempfile::tempdir().unwrap();
    let (da, db, dab) =
        (default_dir(tmp.path(), "a", &a), default_dir(tmp.path(), "b", &b), default_dir(tmp.path(), "ab", &both));
    let sum = open(&[(&da, Sign::Plus), (&db, Sign::Plus)]);
    let diff = open(&[(&dab, Sign::Plus), (&db, Sign::Minus)]);
    assert_eq!(diff.stats().n, a.iter().map(|d| d.len() as i128 + 1).sum::<i128>());
    for _ in 0..300 {
        let q = random_query(&mut rng, &both, 5, 8);
        assert_eq!(sum.index.count(&q).unwrap(), naive_count(&both, &q));
        assert_eq!(diff.index.count(&q).unwrap(), naive_count(&a, &q));
    }
    let neg = open(&[(&da, Sign::Plus), (&db, Sign::Minus)]);
    let only_b = b.iter().flat_map(|d| d.windows(6)).find(|w| naive_count(&a, w) == 0).unwrap();
    assert!(neg.index.count(only_b).is_err());
}

#[test]
fn opening_rejects_inconsistent_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = default_dir(tmp.path(), "toy", &toy_corpus());

    let other = tmp.path().join("words");
    std::fs::create_dir_all(&other).unwrap();
    let input = tmp.path().join("words.jsonl");
    std::fs::write(&input, "{\"text\": \"a b c\"}\n").unwrap();
    infgram_engine::ingest::ingest(&input, "reference-word".parse().unwrap(), &other).unwrap();
    infgram_engine::build::build_sa(&other, BuildOptions::default()).unwrap();
    let e = CorpusIndex::open(&[(dir.clone(), Sign::Plus), (other, Sign::Plus)]).unwrap_err();
    assert!(format!("{e:#}").contains("mixed tokenizers"), "{e:#}");

    let table = dir.join(&Manifest::load(&dir).unwrap().shards[0].path);
    let bytes = std::fs::read(&table).unwrap();
    std::fs::write(&table, &bytes[..bytes.len() - 1]).unwrap();
    assert!(CorpusIndex::open(&[(dir.clone(), Sign::Plus)]).is_err());
    std::fs::write(&table, &bytes).unwrap();

    let tokens = std::fs::read(dir.join(TOKENS_FILE)).unwrap();
    std::fs::write(dir.join(TOKENS_FILE), &tokens[..tokens.len() - 2]).unwrap();
    assert!(CorpusIndex::open(&[(dir.clone(), Sign::Plus)]).is_err());
    std::fs::write(dir.join(TOKENS_FILE), &tokens).unwrap();
    assert!(CorpusIndex::open(&[(dir, Sign::Plus)]).is_ok());
}

#[test]
fn verify_reports_corruption() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let docs = random_docs(&mut rng, 2_000, 4, 50);
    let tmp = tempfile::tempdir().unwrap();
    let dir = default_dir(tmp.path(), "a", &docs);
    assert!(verify(&dir, 1 << 20, 0, 0).unwrap().iter().all(|r| r.passed()));
    let m = Manifest::load(&dir).unwrap();
    let table = dir.join(&m.shards[0].path);
    let mut bytes = std::fs::read(&table).unwrap();
    let p = m.shards[0].p;
    let (x, y) = (p * 10, p * 500);
    for i in 0..p {
        bytes.swap(x + i, y + i);
    }
    std::fs::write(&table, bytes).unwrap();
    assert!(!verify(&dir, 1 << 20, 0, 0).unwrap()[0].passed());
    assert!(!verify(&dir, 0, 100_000, 1).unwrap()[0].passed());
}

#[test]
fn forced_width_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = build_dir(tmp.path(), "w", &toy_corpus(), BuildOptions { width: Some(5), ..sharded(1 << 20) });
    let m = Manifest::load(&dir).unwrap();
    assert_eq!(m.shards[0].p, 5);
    assert_eq!(std::fs::metadata(dir.join(&m.shards[0].path)).unwrap().len(), 50);
    assert_eq!(open(&[(&dir, Sign::Plus)]).index.count(&[2, 3]).unwrap(), 2);
    let tmp2 = tempfile::tempdir().unwrap();
    let d = tmp2.path().join("bad");
    common::write_jsonl(&tmp2.path().join("x.jsonl"), &[serde_json::json!({"tokens": [1, 2]})]);
    infgram_engine::ingest::ingest(&tmp2.path().join("x.jsonl"), "pretokenized".parse().unwrap(), &d).unwrap();
    assert!(infgram_engine::build::build_sa(&d, BuildOptions { width: Some(9), ..Default::default() }).is_err());
}
