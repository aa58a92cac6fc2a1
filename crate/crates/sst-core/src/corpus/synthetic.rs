//! Planted-subtopic synthetic corpus.
//!
//! Every document concatenates three blocks: a *main* block whose sentences
//! mix the topic's base lexicon with an event-specific lexicon, a
//! *complementary* block drawn from another topic's base lexicon, and a
//! short *boilerplate* block drawn from the globally shared noise lexicon.
//! Positive pairs share the main topic, the event lexicon, and the
//! complementary topic; negative pairs share the main topic's base lexicon
//! (so raw word overlap alone cannot separate the classes) but describe a
//! different event and carry conflicting complementary topics. The
//! boilerplate block overlaps heavily across every document pair, planting
//! a small aligned cluster whose lexical agreement carries no relevance
//! signal. Per-topic vocabularies are disjoint; noise words are also
//! sprinkled into topic sentences.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Document, DocumentPair, Qrels, RankingTask, Sentence};

/// Ground truth: document id -> planted topic id of each sentence.
pub type TopicMap = BTreeMap<String, Vec<usize>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Number of distinct topics in the universe (>= 3 so that negative
    /// pairs can carry conflicting complementary topics).
    pub topic_count: usize,
    /// Words in each topic's base lexicon (event lexicons are the same size).
    pub vocab_per_topic: usize,
    /// Inclusive range of sentences per topic block.
    pub sentences_per_topic_range: (usize, usize),
    /// Probability that a negative pair shares the query's main topic.
    pub shared_main_topic_rate: f64,
    /// Per-token probability that a negative candidate's complementary
    /// sentence borrows a word from the query's complementary topic: lexical
    /// red herrings that make raw complementary overlap an unreliable
    /// relevance signal.
    pub negative_confusion_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            topic_count: 6,
            vocab_per_topic: 12,
            sentences_per_topic_range: (4, 6),
            shared_main_topic_rate: 0.9,
            negative_confusion_rate: 0.3,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.topic_count < 3 {
            return Err(CorpusError::Spec(format!(
                "topic_count {} < 3: negative pairs need a conflicting complementary topic",
                self.topic_count
            )));
        }
        if self.vocab_per_topic < 2 {
            return Err(CorpusError::Spec("vocab_per_topic must be >= 2".into()));
        }
        let (lo, hi) = self.sentences_per_topic_range;
        if lo < 1 || lo > hi {
            return Err(CorpusError::Spec(format!(
                "sentences_per_topic_range ({lo}, {hi}) is not a valid non-empty range"
            )));
        }
        for (name, p) in [
            ("shared_main_topic_rate", self.shared_main_topic_rate),
            ("negative_confusion_rate", self.negative_confusion_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CorpusError::Spec(format!("{name} {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

const NOISE_VOCAB: usize = 20;
const NOISE_RATE: f64 = 0.1;
const EVENT_POOL: usize = 64;
const SENTENCE_LEN: (usize, usize) = (6, 10);
/// Fraction of a main-block sentence's topic tokens drawn from the event
/// lexicon rather than the base lexicon. Kept below one half so that two
/// documents about different events of the same topic still cluster
/// together (their shared base ties must outweigh within-event ties).
const EVENT_SHARE: f64 = 0.4;
/// Boilerplate block length range (sentences).
const BOILER_LEN: (usize, usize) = (2, 3);

fn base_word(topic: usize, i: usize) -> String {
    format!("t{topic}b{i}")
}

fn event_word(topic: usize, event: usize, i: usize) -> String {
    format!("t{topic}e{event}x{i}")
}

fn noise_word(i: usize) -> String {
    format!("nz{i}")
}

struct Generator<'a> {
    spec: &'a SyntheticSpec,
    rng: ChaCha8Rng,
}

/// Lexicon a block's sentences draw from. Main blocks mix base and event
/// words evenly; complementary blocks use the base lexicon only.
#[derive(Clone, Copy)]
struct BlockLexicon {
    topic: usize,
    event: Option<usize>,
}

impl<'a> Generator<'a> {
    fn new(spec: &'a SyntheticSpec) -> Self {
        Self { spec, rng: ChaCha8Rng::seed_from_u64(spec.seed) }
    }

    fn range(&mut self, (lo, hi): (usize, usize)) -> usize {
        self.rng.random_range(lo..=hi)
    }

    fn word(&mut self, lex: BlockLexicon) -> String {
        let v = self.spec.vocab_per_topic;
        if self.rng.random::<f64>() < NOISE_RATE {
            return noise_word(self.rng.random_range(0..NOISE_VOCAB));
        }
        match lex.event {
            Some(e) if self.rng.random::<f64>() < EVENT_SHARE => {
                event_word(lex.topic, e, self.rng.random_range(0..v))
            }
            _ => base_word(lex.topic, self.rng.random_range(0..v)),
        }
    }

    fn sentence(&mut self, index: usize, lex: BlockLexicon) -> Sentence {
        let len = self.range(SENTENCE_LEN);
        let tokens: Vec<String> = (0..len).map(|_| self.word(lex)).collect();
        let text = format!("{}.", tokens.join(" "));
        Sentence { index, text, tokens }
    }

    fn boiler_sentence(&mut self, index: usize) -> Sentence {
        let len = self.range(SENTENCE_LEN);
        let tokens: Vec<String> = (0..len)
            .map(|_| noise_word(self.rng.random_range(0..NOISE_VOCAB)))
            .collect();
        let text = format!("{}.", tokens.join(" "));
        Sentence { index, text, tokens }
    }

    /// The planted label of boilerplate sentences: one id past the topic
    /// universe.
    fn boiler_topic(&self) -> usize {
        self.spec.topic_count
    }

    fn push_boiler(&mut self, sentences: &mut Vec<Sentence>, topics: &mut Vec<usize>) {
        let boiler_len = self.range(BOILER_LEN);
        let label = self.boiler_topic();
        for _ in 0..boiler_len {
            sentences.push(self.boiler_sentence(sentences.len()));
            topics.push(label);
        }
    }

    /// Build a document of [main, complementary, boilerplate] blocks and
    /// return it with the per-sentence planted topic ids.
    fn document(
        &mut self,
        id: String,
        main: BlockLexicon,
        comp: BlockLexicon,
    ) -> (Document, Vec<usize>) {
        let main_len = self.range(self.spec.sentences_per_topic_range);
        let comp_len = self.range(self.spec.sentences_per_topic_range);
        let mut sentences = Vec::new();
        let mut topics = Vec::new();
        for _ in 0..main_len {
            sentences.push(self.sentence(sentences.len(), main));
            topics.push(main.topic);
        }
        for _ in 0..comp_len {
            sentences.push(self.sentence(sentences.len(), comp));
            topics.push(comp.topic);
        }
        self.push_boiler(&mut sentences, &mut topics);
        (Document { id, sentences }, topics)
    }

    /// Complementary sentence of a hard negative: each token borrows from
    /// the query's complementary topic with probability
    /// `negative_confusion_rate`. The sentence stays dominated by its own
    /// topic (and keeps its label); the borrowed words only pollute the
    /// overlap channel.
    fn confused_sentence(
        &mut self,
        index: usize,
        own: BlockLexicon,
        query_comp: BlockLexicon,
    ) -> Sentence {
        let len = self.range(SENTENCE_LEN);
        let rate = self.spec.negative_confusion_rate;
        let tokens: Vec<String> = (0..len)
            .map(|_| {
                if self.rng.random::<f64>() < rate {
                    let v = self.spec.vocab_per_topic;
                    base_word(query_comp.topic, self.rng.random_range(0..v))
                } else {
                    self.word(own)
                }
            })
            .collect();
        let text = format!("{}.", tokens.join(" "));
        Sentence { index, text, tokens }
    }

    /// Candidate document for a hard negative, with red-herring tokens in
    /// its complementary block.
    fn confused_document(
        &mut self,
        id: String,
        main: BlockLexicon,
        comp: BlockLexicon,
        query_comp: BlockLexicon,
    ) -> (Document, Vec<usize>) {
        let main_len = self.range(self.spec.sentences_per_topic_range);
        let comp_len = self.range(self.spec.sentences_per_topic_range);
        let mut sentences = Vec::new();
        let mut topics = Vec::new();
        for _ in 0..main_len {
            sentences.push(self.sentence(sentences.len(), main));
            topics.push(main.topic);
        }
        for _ in 0..comp_len {
            sentences.push(self.confused_sentence(sentences.len(), comp, query_comp));
            topics.push(comp.topic);
        }
        self.push_boiler(&mut sentences, &mut topics);
        (Document { id, sentences }, topics)
    }

    fn pick_topic_excluding(&mut self, exclude: &[usize]) -> usize {
        loop {
            let t = self.rng.random_range(0..self.spec.topic_count);
            if !exclude.contains(&t) {
                return t;
            }
        }
    }

    fn other_event(&mut self, event: usize) -> usize {
        let offset = self.rng.random_range(1..EVENT_POOL);
        (event + offset) % EVENT_POOL
    }

    fn pair(&mut self, idx: usize, positive: bool) -> (DocumentPair, Vec<usize>, Vec<usize>) {
        let t_main = self.rng.random_range(0..self.spec.topic_count);
        let event = self.rng.random_range(0..EVENT_POOL);
        let c_q = self.pick_topic_excluding(&[t_main]);
        let q_main = BlockLexicon { topic: t_main, event: Some(event) };
        let q_comp = BlockLexicon { topic: c_q, event: None };
        let (query, q_topics) = self.document(format!("q{idx:05}"), q_main, q_comp);

        let cand_id = format!("d{idx:05}");
        let (candidate, d_topics) = if positive {
            // Same event, compatible complementary topic.
            self.document(cand_id, q_main, q_comp)
        } else if self.rng.random::<f64>() < self.spec.shared_main_topic_rate {
            // Hard negative: same main topic, different event, conflicting
            // complementary topic softened by red herrings.
            let own_event = self.other_event(event);
            let c_d = self.pick_topic_excluding(&[t_main, c_q]);
            let d_main = BlockLexicon { topic: t_main, event: Some(own_event) };
            let comp = BlockLexicon { topic: c_d, event: None };
            self.confused_document(cand_id, d_main, comp, q_comp)
        } else {
            // Easy negative: different main topic entirely.
            let t_d = self.pick_topic_excluding(&[t_main]);
            let c_d = self.pick_topic_excluding(&[t_d, c_q]);
            let d_main = BlockLexicon { topic: t_d, event: Some(self.other_event(event)) };
            let d_comp = BlockLexicon { topic: c_d, event: None };
            self.document(cand_id, d_main, d_comp)
        };

        let pair = DocumentPair { query, candidate, label: Some(positive as u8) };
        (pair, q_topics, d_topics)
    }
}

/// Generate `pair_count` labeled pairs (alternating positive/negative, so the
/// classes are balanced) plus the ground-truth topic map. Deterministic in
/// the spec's seed.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    pair_count: usize,
) -> Result<(Vec<DocumentPair>, TopicMap), CorpusError> {
    spec.validate()?;
    let mut g = Generator::new(spec);
    let mut pairs = Vec::with_capacity(pair_count);
    let mut map = TopicMap::new();
    for idx in 0..pair_count {
        let (pair, q_topics, d_topics) = g.pair(idx, idx % 2 == 0);
        map.insert(pair.query.id.clone(), q_topics);
        map.insert(pair.candidate.id.clone(), d_topics);
        pairs.push(pair);
    }
    Ok((pairs, map))
}

/// Generate a graded retrieval task: per query, one strong positive (grade 2,
/// same event and complementary topic), one weak positive (grade 1, same
/// event only), and hard/easy negatives (grade 0). All candidates share one
/// pool. Deterministic in the spec's seed.
pub fn generate_ranking_task(
    spec: &SyntheticSpec,
    query_count: usize,
    cands_per_query: usize,
) -> Result<(RankingTask, TopicMap), CorpusError> {
    spec.validate()?;
    if cands_per_query < 3 {
        return Err(CorpusError::Spec("cands_per_query must be >= 3".into()));
    }
    let mut g = Generator::new(spec);
    let mut queries = Vec::new();
    let mut candidates = Vec::new();
    let mut qrels = Qrels::default();
    let mut map = TopicMap::new();

    for qi in 0..query_count {
        let t_main = g.rng.random_range(0..spec.topic_count);
        let event = g.rng.random_range(0..EVENT_POOL);
        let c_q = g.pick_topic_excluding(&[t_main]);
        let q_main = BlockLexicon { topic: t_main, event: Some(event) };
        let q_comp = BlockLexicon { topic: c_q, event: None };
        let qid = format!("q{qi:04}");
        let (query, q_topics) = g.document(qid.clone(), q_main, q_comp);
        map.insert(query.id.clone(), q_topics);
        queries.push(query);

        for ci in 0..cands_per_query {
            let docid = format!("q{qi:04}c{ci:03}");
            let (doc, topics, grade) = match ci {
                0 => {
                    let (doc, topics) = g.document(docid, q_main, q_comp);
                    (doc, topics, 2)
                }
                1 => {
                    let c_d = g.pick_topic_excluding(&[t_main, c_q]);
                    let comp = BlockLexicon { topic: c_d, event: None };
                    let (doc, topics) = g.document(docid, q_main, comp);
                    (doc, topics, 1)
                }
                _ => {
                    let own_event = g.other_event(event);
                    if g.rng.random::<f64>() < spec.shared_main_topic_rate {
                        let c_d = g.pick_topic_excluding(&[t_main, c_q]);
                        let d_main = BlockLexicon { topic: t_main, event: Some(own_event) };
                        let comp = BlockLexicon { topic: c_d, event: None };
                        let (doc, topics) =
                            g.confused_document(docid, d_main, comp, q_comp);
                        (doc, topics, 0)
                    } else {
                        let t_d = g.pick_topic_excluding(&[t_main]);
                        let c_d = g.pick_topic_excluding(&[t_d]);
                        let d_main = BlockLexicon { topic: t_d, event: Some(own_event) };
                        let d_comp = BlockLexicon { topic: c_d, event: None };
                        let (doc, topics) = g.document(docid, d_main, d_comp);
                        (doc, topics, 0)
                    }
                }
            };
            map.insert(doc.id.clone(), topics);
            if grade > 0 {
                qrels.insert(&qid, &doc.id, grade);
            } else {
                // Record the zero grade so every pool member is judged.
                qrels.insert(&qid, &doc.id, 0);
            }
            candidates.push(doc);
        }
    }
    Ok((RankingTask { queries, candidates, qrels }, map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn spec(seed: u64) -> SyntheticSpec {
        SyntheticSpec { seed, ..SyntheticSpec::default() }
    }

    #[test]
    fn equal_seeds_are_byte_identical() {
        let (a, ma) = generate_synthetic(&spec(7), 20).unwrap();
        let (b, mb) = generate_synthetic(&spec(7), 20).unwrap();
        assert_eq!(a, b);
        assert_eq!(ma, mb);
    }

    #[test]
    fn different_seeds_differ() {
        let (a, _) = generate_synthetic(&spec(7), 20).unwrap();
        let (b, _) = generate_synthetic(&spec(8), 20).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn positive_pairs_share_a_topic_lexicon() {
        let (pairs, _) = generate_synthetic(&spec(3), 40).unwrap();
        for pair in pairs.iter().filter(|p| p.label == Some(1)) {
            let q_words: BTreeSet<&str> = pair.query.all_tokens().collect();
            let d_words: BTreeSet<&str> = pair.candidate.all_tokens().collect();
            let shared_topic_word = q_words
                .intersection(&d_words)
                .any(|w| w.starts_with('t'));
            assert!(shared_topic_word, "positive pair {} shares no topic word", pair.pair_id());
        }
    }

    #[test]
    fn topic_map_partitions_every_sentence() {
        let (pairs, map) = generate_synthetic(&spec(11), 30).unwrap();
        for pair in &pairs {
            for doc in [&pair.query, &pair.candidate] {
                let topics = map.get(&doc.id).expect("doc in topic map");
                assert_eq!(topics.len(), doc.len());
            }
        }
    }

    #[test]
    fn infeasible_spec_is_rejected() {
        let bad = SyntheticSpec { topic_count: 2, ..SyntheticSpec::default() };
        assert!(matches!(generate_synthetic(&bad, 4), Err(CorpusError::Spec(_))));
        let bad = SyntheticSpec { sentences_per_topic_range: (4, 2), ..SyntheticSpec::default() };
        assert!(matches!(generate_synthetic(&bad, 4), Err(CorpusError::Spec(_))));
        let bad = SyntheticSpec { shared_main_topic_rate: 1.5, ..SyntheticSpec::default() };
        assert!(matches!(generate_synthetic(&bad, 4), Err(CorpusError::Spec(_))));
    }

    #[test]
    fn ranking_task_grades_and_pool_are_consistent() {
        let (task, map) = generate_ranking_task(&spec(5), 4, 6).unwrap();
        assert_eq!(task.queries.len(), 4);
        assert_eq!(task.candidates.len(), 24);
        for q in &task.queries {
            let grades = task.qrels.query_grades(&q.id).unwrap();
            assert_eq!(grades.values().filter(|&&g| g == 2).count(), 1);
            assert_eq!(grades.values().filter(|&&g| g == 1).count(), 1);
        }
        for doc in &task.candidates {
            assert_eq!(map.get(&doc.id).unwrap().len(), doc.len());
        }
    }
}
