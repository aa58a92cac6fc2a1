//! Scratch diagnostics: cluster composition and per-sampler view features.

use sst_core::corpus::{generate_synthetic, SyntheticSpec};
use sst_core::matcher::featurize;
use sst_core::sampling::{build_view_pool, SamplerKind};
use sst_core::simgraph::{lexical_similarity, CorpusStats};
use sst_core::subtopic::{choose_cluster_count, spectral_cluster};

fn main() {
    let spec = SyntheticSpec { seed: 2001, ..SyntheticSpec::default() };
    let (pairs, map) = generate_synthetic(&spec, 200).unwrap();
    let stats = CorpusStats::from_documents(pairs.iter().flat_map(|p| [&p.query, &p.candidate]));

    for pair in pairs.iter().take(6) {
        let l_q = pair.query.len();
        let l_d = pair.candidate.len();
        let token_lists: Vec<&[String]> = pair
            .query
            .sentences
            .iter()
            .chain(pair.candidate.sentences.iter())
            .map(|s| s.tokens.as_slice())
            .collect();
        let a = lexical_similarity(&token_lists, l_q).unwrap();
        let m = choose_cluster_count(l_q, l_d, 6);
        let p = spectral_cluster(&a, m, 0);
        let qt = &map[&pair.query.id];
        let dt = &map[&pair.candidate.id];
        let planted: Vec<usize> = qt.iter().chain(dt.iter()).copied().collect();
        let distinct: std::collections::BTreeSet<usize> = planted.iter().copied().collect();

        println!(
            "pair {} label {:?} l_q {l_q} l_d {l_d} m_req {m} m_got {} planted {:?}",
            pair.pair_id(),
            pair.label,
            p.m(),
            distinct
        );
        for c in 0..p.m() {
            let q_topics: Vec<usize> = p.query_members(c).iter().map(|&i| qt[i]).collect();
            let d_topics: Vec<usize> = p.cand_members(c).iter().map(|&i| dt[i]).collect();
            println!(
                "  cluster {c}: |q| {} (topics {:?})  |d| {} (topics {:?})  min {}",
                p.query_size(c),
                q_topics,
                p.cand_size(c),
                d_topics,
                p.aligned_min(c)
            );
        }
        for kind in [SamplerKind::Soft, SamplerKind::Hard, SamplerKind::Uniform, SamplerKind::Random] {
            let pool = build_view_pool(pair, &p, kind, 8, 4, 7).unwrap();
            let mut ov = 0.0;
            let mut jac = 0.0;
            for (vq, vd) in &pool.entries {
                let f = featurize(&vq.tokens(&pair.query), &vd.tokens(&pair.candidate), &stats).unwrap();
                ov += f.0[0];
                jac += f.0[3];
            }
            let n = pool.len() as f64;
            println!("  {kind:>8}: mean overlap {:.1}  mean jaccard {:.3}", ov / n, jac / n);
        }
    }
}
