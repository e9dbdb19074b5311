//! Set retrieval, truncated-ranking baselines, metrics, the inference-pattern
//! suite, and the radius/occurrence analysis.
//!
//! Sphere mode answers a query with every entity whose sphere is non-disjoint
//! from the (inverse-)rotated anchor sphere; top-l mode keeps the l nearest
//! centers instead. Both scan all entities, so results are exact.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, SphereError};
use crate::kg::{
    classify_relations, Category, EntityId, KnowledgeGraph, QueryDirection, RelationId, Triple,
    Vocabulary,
};
use crate::model::{ModelConfig, SphereModel};
use crate::train;

/// How a query is answered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrievalMode {
    /// Exact sphere-intersection set.
    Sphere,
    /// The l entities with smallest center distance (ties by ascending id).
    TopL(usize),
}

impl RetrievalMode {
    pub fn label(&self) -> String {
        match self {
            RetrievalMode::Sphere => "sphere".to_owned(),
            RetrievalMode::TopL(l) => format!("top_{l}"),
        }
    }
}

/// The l values reported for the truncated-ranking baselines.
pub const BASELINE_LS: [usize; 6] = [1, 3, 5, 10, 20, 100];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Query {
    pub direction: QueryDirection,
    pub anchor: EntityId,
    pub rel: RelationId,
}

#[derive(Debug, Clone)]
pub struct QueryResult {
    pub query: Query,
    pub mode: RetrievalMode,
    /// Retrieved entities, ascending by id.
    pub retrieved: Vec<EntityId>,
}

/// Euclidean center distance from the transformed anchor to every entity.
///
/// Tail queries rotate the anchor forward; head queries rotate it through
/// the inverse, so both reuse the same one-transform-then-scan shape.
pub fn query_distances(
    model: &SphereModel,
    direction: QueryDirection,
    anchor: EntityId,
    rel: RelationId,
) -> Result<Vec<f64>> {
    model.check_entity(anchor)?;
    model.check_relation(rel)?;
    let dim = model.dim();
    let mut probe = vec![0.0; dim];
    match direction {
        QueryDirection::Tail => model.transform_head_into(rel, model.center(anchor), &mut probe)?,
        QueryDirection::Head => {
            model.transform_tail_inverse_into(rel, model.center(anchor), &mut probe)?
        }
    }
    let mut out = Vec::with_capacity(model.n_entities);
    for e in 0..model.n_entities {
        let c = &model.centers[e * dim..(e + 1) * dim];
        let d2: f64 = probe.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
        out.push(d2.sqrt());
    }
    Ok(out)
}

fn sphere_set(model: &SphereModel, anchor: EntityId, distances: &[f64]) -> Vec<EntityId> {
    let r_anchor = model.radius(anchor);
    distances
        .iter()
        .enumerate()
        .filter(|&(e, &d)| d <= r_anchor + model.radius(e as EntityId))
        .map(|(e, _)| e as EntityId)
        .collect()
}

/// Entity ids ordered by ascending distance, ties by ascending id.
fn ranked_ids(distances: &[f64]) -> Vec<EntityId> {
    let mut ids: Vec<EntityId> = (0..distances.len() as EntityId).collect();
    ids.sort_unstable_by(|&a, &b| {
        distances[a as usize]
            .partial_cmp(&distances[b as usize])
            .expect("NaN distance")
            .then(a.cmp(&b))
    });
    ids
}

/// Exact sphere-mode retrieval for one query.
pub fn retrieve_set(
    model: &SphereModel,
    direction: QueryDirection,
    anchor: EntityId,
    rel: RelationId,
) -> Result<QueryResult> {
    let distances = query_distances(model, direction, anchor, rel)?;
    Ok(QueryResult {
        query: Query { direction, anchor, rel },
        mode: RetrievalMode::Sphere,
        retrieved: sphere_set(model, anchor, &distances),
    })
}

/// Truncated-ranking retrieval: the min(l, |E|) nearest entities.
pub fn retrieve_top_l(
    model: &SphereModel,
    direction: QueryDirection,
    anchor: EntityId,
    rel: RelationId,
    l: usize,
) -> Result<QueryResult> {
    assert!(l >= 1, "l must be at least 1");
    let distances = query_distances(model, direction, anchor, rel)?;
    let mut retrieved: Vec<EntityId> =
        ranked_ids(&distances).into_iter().take(l.min(distances.len())).collect();
    retrieved.sort_unstable();
    Ok(QueryResult {
        query: Query { direction, anchor, rel },
        mode: RetrievalMode::TopL(l),
        retrieved,
    })
}

/// F1 between a retrieved set and a ground-truth set (both sorted by id).
///
/// Zero when the retrieved set is empty; callers only evaluate queries with
/// non-empty truth.
pub fn f1(retrieved: &[EntityId], truth: &[EntityId]) -> f64 {
    let denom = retrieved.len() + truth.len();
    if denom == 0 {
        return 1.0;
    }
    let mut hits = 0usize;
    let (mut i, mut j) = (0usize, 0usize);
    while i < retrieved.len() && j < truth.len() {
        match retrieved[i].cmp(&truth[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                hits += 1;
                i += 1;
                j += 1;
            }
        }
    }
    2.0 * hits as f64 / denom as f64
}

/// Mean F1 and query count for one relation category.
#[derive(Debug, Clone, Copy)]
pub struct CategoryF1 {
    pub category: Category,
    pub f1: f64,
    pub n_queries: usize,
}

/// The metric row for one retrieval mode.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub mode: RetrievalMode,
    pub head_f1: f64,
    pub tail_f1: f64,
    pub head_rr: f64,
    pub tail_rr: f64,
    /// Mean F1 over queries (both directions) of many-to-many relations.
    pub nn_f1: f64,
    pub by_category: Vec<CategoryF1>,
    pub n_test_triples: usize,
}

struct QueryEval {
    f1: f64,
    hit: bool,
}

/// Per-mode evaluation of one query against its ground-truth set.
fn eval_query(
    model: &SphereModel,
    direction: QueryDirection,
    anchor: EntityId,
    rel: RelationId,
    masked: EntityId,
    truth: &[EntityId],
    modes: &[RetrievalMode],
) -> Result<Vec<QueryEval>> {
    let distances = query_distances(model, direction, anchor, rel)?;
    let need_ranking = modes.iter().any(|m| matches!(m, RetrievalMode::TopL(_)));
    let ranked = if need_ranking { ranked_ids(&distances) } else { Vec::new() };
    let r_anchor = model.radius(anchor);
    modes
        .iter()
        .map(|mode| {
            Ok(match mode {
                RetrievalMode::Sphere => {
                    let mut retrieved = 0usize;
                    let mut hits = 0usize;
                    let mut hit_masked = false;
                    for (e, &d) in distances.iter().enumerate() {
                        if d <= r_anchor + model.radius(e as EntityId) {
                            retrieved += 1;
                            let e = e as EntityId;
                            if truth.binary_search(&e).is_ok() {
                                hits += 1;
                            }
                            if e == masked {
                                hit_masked = true;
                            }
                        }
                    }
                    QueryEval {
                        f1: if retrieved == 0 {
                            0.0
                        } else {
                            2.0 * hits as f64 / (retrieved + truth.len()) as f64
                        },
                        hit: hit_masked,
                    }
                }
                RetrievalMode::TopL(l) => {
                    let kept = &ranked[..(*l).min(ranked.len())];
                    let hits =
                        kept.iter().filter(|e| truth.binary_search(e).is_ok()).count();
                    QueryEval {
                        f1: 2.0 * hits as f64 / (kept.len() + truth.len()) as f64,
                        hit: kept.contains(&masked),
                    }
                }
            })
        })
        .collect()
}

/// Run the full evaluation protocol: for every test triple, mask the tail
/// and the head, retrieve under each mode, and score against the ground
/// truth assembled from train ∪ valid ∪ test.
///
/// Queries repeated by different test triples are each counted (per-triple
/// averaging). Work is parallelized across test triples and reduced in
/// split order, so output is deterministic.
pub fn evaluate(
    model: &SphereModel,
    kg: &KnowledgeGraph,
    modes: &[RetrievalMode],
) -> Result<Vec<MetricsReport>> {
    if kg.test.is_empty() {
        return Err(SphereError::EmptyTestSplit);
    }
    let categories = classify_relations(&kg.train, kg.n_relations(), model.config.rmp_threshold);
    let cat_of: Vec<Category> = categories.iter().map(|c| c.category).collect();

    struct TripleEval {
        rel: RelationId,
        tail: Vec<QueryEval>,
        head: Vec<QueryEval>,
    }
    let per_triple: Vec<TripleEval> = kg
        .test
        .par_iter()
        .map(|t| {
            let tail = eval_query(
                model,
                QueryDirection::Tail,
                t.head,
                t.rel,
                t.tail,
                kg.answers.answers(QueryDirection::Tail, t.head, t.rel),
                modes,
            )?;
            let head = eval_query(
                model,
                QueryDirection::Head,
                t.tail,
                t.rel,
                t.head,
                kg.answers.answers(QueryDirection::Head, t.tail, t.rel),
                modes,
            )?;
            Ok(TripleEval { rel: t.rel, tail, head })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = kg.test.len() as f64;
    let reports = modes
        .iter()
        .enumerate()
        .map(|(mi, &mode)| {
            let mut head_f1 = 0.0;
            let mut tail_f1 = 0.0;
            let mut head_rr = 0.0;
            let mut tail_rr = 0.0;
            let mut nn_sum = 0.0;
            let mut nn_n = 0usize;
            let mut cat_sum = [0.0; 4];
            let mut cat_n = [0usize; 4];
            for te in &per_triple {
                let (th, hd) = (&te.tail[mi], &te.head[mi]);
                tail_f1 += th.f1;
                head_f1 += hd.f1;
                tail_rr += th.hit as u8 as f64;
                head_rr += hd.hit as u8 as f64;
                let cat = cat_of[te.rel as usize];
                if cat == Category::ManyToMany {
                    nn_sum += th.f1 + hd.f1;
                    nn_n += 2;
                }
                let ci = Category::ALL.iter().position(|c| *c == cat).unwrap();
                cat_sum[ci] += th.f1 + hd.f1;
                cat_n[ci] += 2;
            }
            MetricsReport {
                mode,
                head_f1: head_f1 / n,
                tail_f1: tail_f1 / n,
                head_rr: head_rr / n,
                tail_rr: tail_rr / n,
                nn_f1: if nn_n == 0 { 0.0 } else { nn_sum / nn_n as f64 },
                by_category: Category::ALL
                    .iter()
                    .enumerate()
                    .map(|(ci, &category)| CategoryF1 {
                        category,
                        f1: if cat_n[ci] == 0 { 0.0 } else { cat_sum[ci] / cat_n[ci] as f64 },
                        n_queries: cat_n[ci],
                    })
                    .collect(),
                n_test_triples: kg.test.len(),
            }
        })
        .collect();
    Ok(reports)
}

/// CSV header matching [`format_metrics_row`].
pub const METRICS_CSV_HEADER: &str = "mode,head_f1,tail_f1,head_rr,tail_rr,nn_f1,one_to_one_f1,one_to_many_f1,many_to_one_f1,many_to_many_f1,n_test_triples";

pub fn format_metrics_row(r: &MetricsReport) -> String {
    let cat = |c: Category| {
        r.by_category
            .iter()
            .find(|x| x.category == c)
            .map(|x| x.f1)
            .unwrap_or(0.0)
    };
    format!(
        "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
        r.mode.label(),
        r.head_f1,
        r.tail_f1,
        r.head_rr,
        r.tail_rr,
        r.nn_f1,
        cat(Category::OneToOne),
        cat(Category::OneToMany),
        cat(Category::ManyToOne),
        cat(Category::ManyToMany),
        r.n_test_triples,
    )
}

// ---------------------------------------------------------------------------
// Inference-pattern suite
// ---------------------------------------------------------------------------

/// The nine synthetic inference patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    Symmetry,
    AntiSymmetry,
    Inversion,
    Composition,
    /// Non-commutative composition: r1∘r2 holds, r2∘r1 must not leak in.
    NcComposition,
    /// Two distinct relations share a (head, tail) pair.
    Multiplicity,
    RmpOneToMany,
    RmpManyToOne,
    RmpManyToMany,
}

impl Pattern {
    pub const ALL: [Pattern; 9] = [
        Pattern::Symmetry,
        Pattern::AntiSymmetry,
        Pattern::Inversion,
        Pattern::Composition,
        Pattern::NcComposition,
        Pattern::Multiplicity,
        Pattern::RmpOneToMany,
        Pattern::RmpManyToOne,
        Pattern::RmpManyToMany,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Pattern::Symmetry => "symmetry",
            Pattern::AntiSymmetry => "anti-symmetry",
            Pattern::Inversion => "inversion",
            Pattern::Composition => "composition",
            Pattern::NcComposition => "nc-composition",
            Pattern::Multiplicity => "multiplicity",
            Pattern::RmpOneToMany => "rmp-1n",
            Pattern::RmpManyToOne => "rmp-n1",
            Pattern::RmpManyToMany => "rmp-nn",
        }
    }

    pub fn from_label(s: &str) -> Option<Pattern> {
        Pattern::ALL.iter().copied().find(|p| p.label() == s)
    }
}

/// A synthetic KG embodying one pattern, plus facts that must *not* be
/// retrieved after training.
pub struct PatternSetup {
    pub kg: KnowledgeGraph,
    pub forbidden: Vec<Triple>,
}

/// Build the minimal KG for a pattern. All facts go into train; valid and
/// test stay empty.
pub fn pattern_setup(pattern: Pattern) -> PatternSetup {
    let mut vocab = Vocabulary::new();
    let mut facts: Vec<(String, String, String)> = Vec::new();
    let mut forbidden: Vec<(String, String, String)> = Vec::new();
    let f = |h: &str, r: &str, t: &str| (h.to_owned(), r.to_owned(), t.to_owned());
    match pattern {
        Pattern::Symmetry => {
            facts.push(f("a", "r", "b"));
            facts.push(f("b", "r", "a"));
            facts.push(f("c", "r", "d"));
            facts.push(f("d", "r", "c"));
        }
        Pattern::AntiSymmetry => {
            facts.push(f("a", "r", "b"));
            facts.push(f("c", "r", "d"));
            forbidden.push(f("b", "r", "a"));
            forbidden.push(f("d", "r", "c"));
        }
        Pattern::Inversion => {
            facts.push(f("a", "r1", "b"));
            facts.push(f("b", "r2", "a"));
            facts.push(f("c", "r1", "d"));
            facts.push(f("d", "r2", "c"));
        }
        Pattern::Composition => {
            for (x, y, z) in [("a", "b", "c"), ("d", "e", "g")] {
                facts.push(f(x, "r1", y));
                facts.push(f(y, "r2", z));
                facts.push(f(x, "r3", z));
            }
        }
        Pattern::NcComposition => {
            // Two witnesses of r3 = r1∘r2 alongside r2-then-r1 paths whose
            // endpoints r3 must not reach.
            for i in 0..2 {
                let (x, a, y, b, z) = (
                    format!("x{i}"),
                    format!("a{i}"),
                    format!("y{i}"),
                    format!("b{i}"),
                    format!("z{i}"),
                );
                facts.push((x.clone(), "r1".into(), a.clone()));
                facts.push((a, "r2".into(), y.clone()));
                facts.push((x.clone(), "r3".into(), y));
                facts.push((x.clone(), "r2".into(), b.clone()));
                facts.push((b, "r1".into(), z.clone()));
                forbidden.push((x, "r3".into(), z));
            }
        }
        Pattern::Multiplicity => {
            facts.push(f("a", "r1", "b"));
            facts.push(f("a", "r2", "b"));
            facts.push(f("c", "r1", "d"));
            forbidden.push(f("c", "r2", "d"));
        }
        Pattern::RmpOneToMany => {
            for t in ["b1", "b2", "b3", "b4", "b5"] {
                facts.push(f("a", "r", t));
            }
        }
        Pattern::RmpManyToOne => {
            for h in ["a1", "a2", "a3", "a4", "a5"] {
                facts.push(f(h, "r", "b"));
            }
        }
        Pattern::RmpManyToMany => {
            for h in ["h1", "h2", "h3"] {
                for t in ["t1", "t2", "t3"] {
                    facts.push(f(h, "r", t));
                }
            }
        }
    }
    let train: Vec<Triple> = facts
        .iter()
        .map(|(h, r, t)| {
            Triple::new(vocab.intern_entity(h), vocab.intern_relation(r), vocab.intern_entity(t))
        })
        .collect();
    let forbidden: Vec<Triple> = forbidden
        .iter()
        .map(|(h, r, t)| {
            Triple::new(vocab.intern_entity(h), vocab.intern_relation(r), vocab.intern_entity(t))
        })
        .collect();
    let kg = KnowledgeGraph::from_splits(vocab, train, Vec::new(), Vec::new());
    PatternSetup { kg, forbidden }
}

/// Outcome of one (k, pattern) run.
#[derive(Debug, Clone)]
pub struct ExpressivenessReport {
    pub pattern: Pattern,
    pub k: usize,
    /// Mean sphere-retrieval F1 over both queries of every training fact.
    pub retrieval_f1: f64,
    /// Forbidden facts the trained model retrieves.
    pub forbidden_hits: usize,
    pub steps_run: usize,
    pub passed: bool,
}

/// Mean training-fact retrieval F1 plus forbidden-fact count for a model.
pub fn pattern_score(model: &SphereModel, setup: &PatternSetup) -> Result<(f64, usize)> {
    let kg = &setup.kg;
    let mut f1_sum = 0.0;
    for t in &kg.train {
        let tail = retrieve_set(model, QueryDirection::Tail, t.head, t.rel)?;
        f1_sum += f1(&tail.retrieved, kg.answers.answers(QueryDirection::Tail, t.head, t.rel));
        let head = retrieve_set(model, QueryDirection::Head, t.tail, t.rel)?;
        f1_sum += f1(&head.retrieved, kg.answers.answers(QueryDirection::Head, t.tail, t.rel));
    }
    let f1_mean = f1_sum / (2 * kg.train.len()) as f64;
    let mut forbidden_hits = 0;
    for t in &setup.forbidden {
        if model.is_retrieved(t.head, t.rel, t.tail)? {
            forbidden_hits += 1;
        }
    }
    Ok((f1_mean, forbidden_hits))
}

/// Train a fresh SpherE-kD model on the pattern's synthetic KG and score it.
///
/// Trains in bursts and stops as soon as the pattern is modeled exactly
/// (retrieval F1 = 1 and no forbidden facts), up to `max_steps`.
pub fn expressiveness_suite(k: usize, pattern: Pattern, max_steps: usize) -> Result<ExpressivenessReport> {
    let setup = pattern_setup(pattern);
    let n_blocks = match k {
        2 => 4,
        3 => 2,
        _ => 2,
    };
    let burst = 250;
    let config = ModelConfig {
        k,
        n_blocks,
        gamma: 4.0,
        alpha: 0.1,
        beta: 0.1,
        adv_temperature: 1.0,
        learning_rate: 0.02,
        neg_count: 4,
        batch_size: setup.kg.train.len(),
        steps: burst,
        seed: 7,
        log_every: burst,
        // Tiny dense graphs: raw corruption mostly lands on other true
        // answers, which the adversarial weighting then unlearns.
        filter_negatives: true,
        ..ModelConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model =
        SphereModel::init(config, setup.kg.n_entities(), setup.kg.n_relations(), &mut rng)?;
    let mut steps_run = 0;
    let (mut f1_mean, mut forbidden_hits) = pattern_score(&model, &setup)?;
    while steps_run < max_steps {
        train::fit(&mut model, &setup.kg, &mut rng, |_| {})?;
        steps_run += burst;
        let scored = pattern_score(&model, &setup)?;
        f1_mean = scored.0;
        forbidden_hits = scored.1;
        if f1_mean == 1.0 && forbidden_hits == 0 {
            break;
        }
    }
    Ok(ExpressivenessReport {
        pattern,
        k,
        retrieval_f1: f1_mean,
        forbidden_hits,
        steps_run,
        passed: f1_mean == 1.0 && forbidden_hits == 0,
    })
}

// ---------------------------------------------------------------------------
// Radius / occurrence analysis
// ---------------------------------------------------------------------------

/// Entities bucketed by how often they appear across all splits.
#[derive(Debug, Clone)]
pub struct RadiusBucket {
    pub occurrence: usize,
    pub n_entities: usize,
    pub mean_radius: f64,
}

#[derive(Debug, Clone)]
pub struct RadiusOccurrenceStats {
    /// Ascending by occurrence count; entities that never appear are excluded.
    pub buckets: Vec<RadiusBucket>,
    /// Spearman rank correlation between occurrence count and radius.
    pub spearman: f64,
}

/// Count appearances (as head or as tail; a self-loop counts twice) over
/// train ∪ valid ∪ test and relate them to the learned radii.
pub fn radius_occurrence(model: &SphereModel, kg: &KnowledgeGraph) -> RadiusOccurrenceStats {
    let mut occurrence = vec![0usize; model.n_entities];
    for t in kg.all_triples() {
        occurrence[t.head as usize] += 1;
        occurrence[t.tail as usize] += 1;
    }
    let mut buckets: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    let mut occ = Vec::new();
    let mut rad = Vec::new();
    for (e, &count) in occurrence.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let entry = buckets.entry(count).or_insert((0, 0.0));
        entry.0 += 1;
        entry.1 += model.radii[e];
        occ.push(count as f64);
        rad.push(model.radii[e]);
    }
    RadiusOccurrenceStats {
        buckets: buckets
            .into_iter()
            .map(|(occurrence, (n, sum))| RadiusBucket {
                occurrence,
                n_entities: n,
                mean_radius: sum / n as f64,
            })
            .collect(),
        spearman: spearman(&occ, &rad),
    }
}

/// Average ranks, ties shared.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("NaN rank input").then(a.cmp(&b)));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &slot in &idx[i..=j] {
            out[slot] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with tie-averaged ranks; 0 when either side is
/// constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    if x.len() != y.len() || x.len() < 2 {
        return 0.0;
    }
    let rx = ranks(x);
    let ry = ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx.sqrt() * vy.sqrt())
}
