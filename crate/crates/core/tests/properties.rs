use infgram_core::cnf::{CnfQuery, SearchOptions};
use infgram_core::memory::{build_part, index_of, BuildOptions};
use infgram_core::table::{build_table, read_entry};
use infgram_core::token::{decode, encode};
use infgram_core::{Index, LmConfig, Ratio, Sign};
use infgram_testkit::*;
use proptest::collection::vec;
use proptest::prelude::*;

fn corpus(vocab: u16) -> impl Strategy<Value = Vec<Vec<u16>>> {
    vec(vec(0..vocab, 1..40), 1..8)
}

fn query(vocab: u16) -> impl Strategy<Value = Vec<u16>> {
    vec(0..vocab, 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn encoding_round_trips(tokens in vec(0u16..0xFFFF, 0..64)) {
        prop_assert_eq!(decode(&encode(&tokens)), tokens);
    }

    #[test]
    fn table_matches_naive_sort(docs in corpus(6)) {
        let flat = flatten(&docs);
        let (table, w) = build_table(&token_bytes(&docs), None).unwrap();
        let got: Vec<u64> = (0..flat.len()).map(|r| read_entry(&table, w, r)).collect();
        prop_assert_eq!(got, naive_token_suffix_array(&flat));
    }

    #[test]
    fn counts_match_scan(docs in corpus(4), q in query(4), shard in 1u64..30) {
        let idx = Index::single(
            build_part(&docs, &[], BuildOptions { max_shard_tokens: shard, ..Default::default() }).unwrap(),
        )
        .unwrap();
        prop_assert_eq!(idx.count(&q).unwrap(), naive_count(&docs, &q));
        let pos = idx.positions(&q, usize::MAX, 0).unwrap();
        let got: Vec<u64> = pos.locations.iter().map(|l| l.offset).collect();
        prop_assert_eq!(got, naive_byte_positions(&docs, &q));
    }

    #[test]
    fn extending_a_query_shrinks_its_segments(docs in corpus(3), q in query(3), t in 0u16..3) {
        let idx = index_of(&docs).unwrap();
        let short = idx.find_segments(&q, None).unwrap();
        let mut longer = q.clone();
        longer.push(t);
        let long = idx.find_segments(&longer, None).unwrap();
        for (a, b) in short.ranges.iter().zip(&long.ranges) {
            prop_assert!(b.is_empty() || a.contains(b));
        }
        prop_assert_eq!(idx.find_segments(&longer, Some(&short)).unwrap(), long);
    }

    #[test]
    fn distributions_sum_to_one(docs in corpus(5), ctx in vec(0u16..5, 0..6)) {
        let idx = index_of(&docs).unwrap();
        let lm = idx.lm(LmConfig::default());
        let d = lm.infgram_dist(&ctx).unwrap();
        prop_assert!(d.is_normalized());
        let k = lm.longest_suffix(&ctx).unwrap().suffix_len;
        prop_assert_eq!(k, naive_longest_suffix(&docs, &ctx, 1));
        let expected = naive_continuations(&docs, &ctx[ctx.len() - k..]);
        let got: Vec<(u16, u64)> = d.entries.iter().map(|e| (e.token, e.count)).collect();
        prop_assert_eq!(got, expected.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn infgram_prob_matches_dist(docs in corpus(4), ctx in vec(0u16..4, 0..8), t in 0u16..4) {
        let idx = index_of(&docs).unwrap();
        let lm = idx.lm(LmConfig::default());
        let r = lm.infgram_prob(&ctx, t).unwrap();
        let d = lm.infgram_dist(&ctx).unwrap();
        let expected = d.get(t).map(|e| e.prob).unwrap_or(Ratio::new(0, d.total));
        prop_assert_eq!(r.prob, expected);
        prop_assert_eq!(r.sparse, d.is_sparse());
        prop_assert_eq!(r.effective_n, d.effective_n);
    }

    #[test]
    fn dense_scan_agrees_with_pointwise(docs in corpus(3), doc in vec(0u16..3, 1..30), min_count in 1u64..3) {
        let idx = index_of(&docs).unwrap();
        let lm = idx.lm(LmConfig { min_count, ..Default::default() });
        let scan = lm.dense_scan(&doc).unwrap();
        for (i, r) in scan.iter().enumerate() {
            prop_assert_eq!(*r, lm.infgram_prob(&doc[..i], doc[i]).unwrap());
            prop_assert_eq!(r.effective_n - 1, naive_longest_suffix(&docs, &doc[..i], min_count));
        }
    }

    #[test]
    fn difference_of_parts_subtracts(base in corpus(3), removed_mask in vec(any::<bool>(), 8), q in query(3)) {
        let removed: Vec<Vec<u16>> = base
            .iter()
            .zip(removed_mask.iter().cycle())
            .filter(|(_, &m)| m)
            .map(|(d, _)| d.clone())
            .collect();
        prop_assume!(!removed.is_empty() && removed.len() < base.len());
        let idx = Index::new(vec![
            build_part(&base, &[], BuildOptions::default()).unwrap(),
            build_part(&removed, &[], BuildOptions { sign: Sign::Minus, ..Default::default() }).unwrap(),
        ])
        .unwrap();
        prop_assert_eq!(idx.count(&q).unwrap(), naive_count(&base, &q) - naive_count(&removed, &q));
    }

    #[test]
    fn cnf_matches_scan(docs in corpus(4), a in query(4), b in query(4), c in query(4)) {
        let idx = index_of(&docs).unwrap();
        let clauses = vec![vec![a.clone(), b.clone()], vec![c.clone()]];
        let q = CnfQuery::new(clauses.clone()).unwrap();
        let r = idx.search_docs(&q, SearchOptions { maxnum: usize::MAX, seed: 0 }).unwrap();
        let got: Vec<usize> = r.documents.iter().map(|d| d.doc as usize).collect();
        prop_assert_eq!(r.total as usize, got.len());
        prop_assert_eq!(got, naive_cnf(&docs, &clauses).into_iter().collect::<Vec<_>>());
    }
}
