mod support;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use citequery::analytics::{meso_log_ratio, rate_by, CitanceInfo, DisagreementFlag, GroupBy, GroupKey, RateRow};
use citequery::catalog::{builtin_catalog, parse_query_file, serialize_queries, QuerySpec};
use citequery::ingest::{
    parse_corpus, parse_markers, split_sentences, write_corpus, CitanceKey, IngestMode, MainField,
    SelfCitation,
};
use citequery::matching::{run_query, tokenize, words, Engine, Scratch};
use citequery::validation::{
    cohens_kappa, gate_queries, percent_agreement, percent_valid, sample_matches, Kappa, Label,
    ValidationStats,
};

fn catalog() -> &'static [QuerySpec] {
    static C: std::sync::OnceLock<Vec<QuerySpec>> = std::sync::OnceLock::new();
    C.get_or_init(builtin_catalog)
}

fn sentence() -> impl Strategy<Value = String> {
    any::<u64>().prop_map(|seed| support::random_sentence(&mut ChaCha8Rng::seed_from_u64(seed), 24))
}

const PIECES: &[&str] = &[
    "Dr. Smith", "et al.", "e.g.", "Fig. 2", "3.5", "results differ", "data", "Then", "the",
    "conflict", "model", ".", "!", "?", "; ", ", ", "\n",
];

fn body() -> impl Strategy<Value = String> {
    prop::collection::vec((0..PIECES.len() + 2, any::<bool>()), 1..40).prop_map(|parts| {
        let mut s = String::new();
        for (n, (i, cap)) in parts.into_iter().enumerate() {
            match PIECES.get(i) {
                Some(p) => s.push_str(p),
                None => s.push_str(&format!("<ref id=\"r{n}\"/>")),
            }
            s.push(if cap { ' ' } else { '.' });
        }
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn sentence_split_keeps_markers_whole(text in body()) {
        let spans: Vec<_> = parse_markers(&text).unwrap().into_iter().map(|m| m.span).collect();
        let ranges = split_sentences(&text, &spans);
        for w in ranges.windows(2) {
            prop_assert!(w[0].end <= w[1].start);
        }
        for m in &spans {
            prop_assert!(ranges.iter().any(|r| r.start <= m.start && m.end <= r.end), "{m:?} split in {ranges:?}");
        }
    }

    #[test]
    fn engine_reference_and_naive_agree(text in sentence()) {
        let doc = format!(
            "{{\"doc_id\":\"d\",\"year\":2000,\"sentences\":[{{\"text\":{}}}]}}",
            serde_json::to_string(&text).unwrap()
        );
        let report = parse_corpus(&doc, IngestMode::Presegmented);
        prop_assert!(report.errors.is_empty(), "{:?}", report.errors);
        let citance = &citequery::pipeline::citances_of(&report)[0];
        let w = citance.words();
        let engine = Engine::new(catalog());
        let mut got = Vec::new();
        engine.match_words(&w, &mut Scratch::default(), |qi, s, f| got.push((qi, s, f)));
        let naive: Vec<_> = catalog()
            .iter()
            .enumerate()
            .filter_map(|(qi, q)| support::naive_eval(&w, q).map(|(s, f)| (qi, s, f)))
            .collect();
        prop_assert_eq!(&got, &naive, "{}", text);
        let reference: Vec<_> = catalog()
            .iter()
            .enumerate()
            .filter_map(|(qi, q)| run_query(citance, q).map(|m| (qi, m.signal_span, m.filter_span)))
            .collect();
        prop_assert_eq!(&got, &reference);
    }

    #[test]
    fn filtered_match_implies_standalone(text in sentence()) {
        let toks = tokenize(&text, &[]);
        let w = words(&toks);
        let hits: Vec<&str> = catalog()
            .iter()
            .filter(|q| support::naive_eval(&w, q).is_some())
            .map(|q| q.query_id.as_str())
            .collect();
        for q in catalog().iter().filter(|q| hits.contains(&q.query_id.as_str())) {
            let standalone = format!("{}_standalone", q.signal_id);
            prop_assert!(hits.contains(&standalone.as_str()), "{} without {}", q.query_id, standalone);
        }
    }

    #[test]
    fn corpus_round_trip(texts in prop::collection::vec(body(), 1..6), years in prop::collection::vec(1950i32..2030, 1..6)) {
        let mut jsonl = String::new();
        for (i, t) in texts.iter().enumerate() {
            jsonl.push_str(&serde_json::json!({
                "doc_id": format!("d{i}"),
                "year": years[i % years.len()],
                "main_field": "SocHum",
                "meso_field": i,
                "authors": [{"family": "Doe", "given": "J"}],
                "body": t,
            }).to_string());
            jsonl.push('\n');
        }
        let first = parse_corpus(&jsonl, IngestMode::Rawtext);
        prop_assert!(first.errors.is_empty(), "{:?}", first.errors);
        let mut out = Vec::new();
        write_corpus(&first.documents, &mut out).unwrap();
        let second = parse_corpus(std::str::from_utf8(&out).unwrap(), IngestMode::Presegmented);
        prop_assert!(second.errors.is_empty());
        prop_assert_eq!(first.documents, second.documents);
    }

    #[test]
    fn query_file_round_trip(picks in prop::collection::btree_set(0usize..65, 1..20), gap in 0usize..9) {
        let mut qs: Vec<QuerySpec> = picks.into_iter().map(|i| catalog()[i].clone()).collect();
        for q in &mut qs {
            q.max_gap = gap;
        }
        let text = serialize_queries(&qs);
        prop_assert_eq!(parse_query_file(&text).unwrap(), qs);
    }

    #[test]
    fn valid_never_exceeds_agreement(labels in prop::collection::vec((any::<bool>(), any::<bool>()), 1..200)) {
        let pairs: Vec<(Label, Label)> = labels.iter().map(|&(a, b)| (lab(a), lab(b))).collect();
        let agree = percent_agreement(&pairs).unwrap();
        let valid = percent_valid(&pairs).unwrap();
        prop_assert!((0.0..=1.0).contains(&agree));
        prop_assert!(valid <= agree + 1e-12);
        if let Kappa::Value(k) = cohens_kappa(&pairs).unwrap() {
            prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&k));
        }
    }

    #[test]
    fn gate_is_monotone(valid in prop::collection::vec(0u32..=20, 1..40), a in 0u32..=20, b in 0u32..=20) {
        let stats: Vec<ValidationStats> = valid
            .iter()
            .enumerate()
            .map(|(i, &v)| ValidationStats {
                query_id: format!("q{i}"),
                n: 20,
                pct_agree: 1.0,
                pct_valid: v as f64 / 20.0,
                kappa: Kappa::Undefined,
            })
            .collect();
        let (lo, hi) = (a.min(b) as f64 / 20.0, a.max(b) as f64 / 20.0);
        let strict = gate_queries(&stats, hi);
        let loose = gate_queries(&stats, lo);
        prop_assert!(strict.query_ids.is_subset(&loose.query_ids));
    }

    #[test]
    fn sample_ignores_input_order(n_keys in 1usize..120, n in 1usize..60, seed in any::<u64>(), shuffle in any::<u64>()) {
        let keys: Vec<CitanceKey> = (0..n_keys)
            .map(|i| CitanceKey { doc_id: format!("d{}", i % 7), sentence_index: i })
            .collect();
        let mut other = keys.clone();
        use rand::seq::SliceRandom;
        other.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        other.extend(keys.iter().take(3).cloned());
        let a = sample_matches(&keys, n, seed).unwrap();
        let b = sample_matches(&other, n, seed).unwrap();
        prop_assert_eq!(a.len(), n.min(n_keys));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn meso_ratios_are_clamped(rates in prop::collection::vec(0u64..50, 1..30)) {
        let rows: Vec<RateRow> = rates
            .iter()
            .enumerate()
            .map(|(i, &d)| RateRow {
                group: GroupKey::Meso(i as u32),
                disagreement_count: d,
                citance_count: 100,
                rate: d as f64,
            })
            .collect();
        for r in meso_log_ratio(&rows).unwrap() {
            prop_assert!((-2.0..=2.0).contains(&r.log_ratio));
            prop_assert_eq!(r.zero_rate, r.rate == 0.0);
        }
    }

    #[test]
    fn partitions_sum_to_total(cites in prop::collection::vec((0usize..5, 2000i32..2006, any::<bool>(), 0u32..4), 1..300)) {
        let infos: Vec<CitanceInfo> = cites
            .iter()
            .enumerate()
            .map(|(i, &(f, year, _, meso))| CitanceInfo {
                key: CitanceKey { doc_id: format!("d{i:04}"), sentence_index: 0 },
                year,
                main_field: Some(MainField::ALL[f]),
                meso_field: Some(meso),
                self_citation: SelfCitation::Unknown,
                age: None,
                position_fraction: 0.0,
                cited_docs: Vec::new(),
            })
            .collect();
        let flags: Vec<DisagreementFlag> = infos
            .iter()
            .zip(&cites)
            .map(|(c, t)| DisagreementFlag { key: c.key.clone(), flagged: t.2 })
            .collect();
        let total = cites.iter().filter(|c| c.2).count() as u64;
        for by in [GroupBy::MainField, GroupBy::Year, GroupBy::FieldYear, GroupBy::MesoField, GroupBy::PositionBin] {
            let rows = rate_by(&infos, &flags, by);
            prop_assert_eq!(rows.iter().map(|r| r.disagreement_count).sum::<u64>(), total);
            prop_assert_eq!(rows.iter().map(|r| r.citance_count).sum::<u64>(), cites.len() as u64);
        }
        let cells = rate_by(&infos, &flags, GroupBy::FieldYear);
        let mut by_field: BTreeMap<GroupKey, (u64, u64)> = BTreeMap::new();
        let mut by_year: BTreeMap<GroupKey, (u64, u64)> = BTreeMap::new();
        for r in &cells {
            let GroupKey::FieldYear(f, y) = r.group else { panic!("group {:?}", r.group) };
            for (m, k) in [(&mut by_field, GroupKey::Field(f)), (&mut by_year, GroupKey::Year(y))] {
                let e = m.entry(k).or_default();
                e.0 += r.disagreement_count;
                e.1 += r.citance_count;
            }
        }
        let flat = |rows: Vec<RateRow>| -> BTreeMap<GroupKey, (u64, u64)> {
            rows.into_iter().map(|r| (r.group, (r.disagreement_count, r.citance_count))).collect()
        };
        prop_assert_eq!(flat(rate_by(&infos, &flags, GroupBy::MainField)), by_field);
        prop_assert_eq!(flat(rate_by(&infos, &flags, GroupBy::Year)), by_year);
    }
}

fn lab(valid: bool) -> Label {
    if valid {
        Label::Valid
    } else {
        Label::Invalid
    }
}
