//! Triple files, vocabularies, splits, the ground-truth answer index, and
//! relation mapping properties.
//!
//! Input files are UTF-8 TSV with one `head<TAB>relation<TAB>tail` fact per
//! line (LF or CRLF). Ids are dense integers assigned in first-seen order
//! across train → valid → test so that runs are reproducible.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Result, SphereError};

pub type EntityId = u32;
pub type RelationId = u32;

/// One integer-encoded fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: EntityId,
    pub rel: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, rel: RelationId, tail: EntityId) -> Self {
        Triple { head, rel, tail }
    }
}

/// Which side of a triple a query masks.
///
/// `Tail` is the query (h, r, ?): the anchor is the head and answers are
/// tails. `Head` is (?, r, t): the anchor is the tail and answers are heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryDirection {
    Tail,
    Head,
}

/// Bijective name ↔ dense-id maps for entities and relations.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    entity_names: Vec<String>,
    entity_ids: HashMap<String, EntityId>,
    relation_names: Vec<String>,
    relation_ids: HashMap<String, RelationId>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relation_names.len()
    }

    /// Id for `name`, interning it if unseen.
    pub fn intern_entity(&mut self, name: &str) -> EntityId {
        if let Some(&id) = self.entity_ids.get(name) {
            return id;
        }
        let id = self.entity_names.len() as EntityId;
        self.entity_names.push(name.to_owned());
        self.entity_ids.insert(name.to_owned(), id);
        id
    }

    pub fn intern_relation(&mut self, name: &str) -> RelationId {
        if let Some(&id) = self.relation_ids.get(name) {
            return id;
        }
        let id = self.relation_names.len() as RelationId;
        self.relation_names.push(name.to_owned());
        self.relation_ids.insert(name.to_owned(), id);
        id
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_ids.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_ids.get(name).copied()
    }

    pub fn entity_name(&self, id: EntityId) -> Option<&str> {
        self.entity_names.get(id as usize).map(String::as_str)
    }

    pub fn relation_name(&self, id: RelationId) -> Option<&str> {
        self.relation_names.get(id as usize).map(String::as_str)
    }

    pub fn entity_names(&self) -> impl Iterator<Item = &str> {
        self.entity_names.iter().map(String::as_str)
    }

    pub fn relation_names(&self) -> impl Iterator<Item = &str> {
        self.relation_names.iter().map(String::as_str)
    }

    /// Stable 64-bit FNV-1a hash over the sorted name–id pairs of both maps.
    ///
    /// Used to detect checkpoint/data mismatches; independent of insertion
    /// order of the underlying hash maps.
    pub fn stable_hash(&self) -> u64 {
        const FNV_OFFSET: u64 = 0xcbf29ce484222325;
        const FNV_PRIME: u64 = 0x00000100000001b3;
        let mut h = FNV_OFFSET;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(FNV_PRIME);
            }
        };
        let mut entities: Vec<(&String, &EntityId)> = self.entity_ids.iter().collect();
        entities.sort();
        for (name, id) in entities {
            eat(b"E");
            eat(name.as_bytes());
            eat(&[0]);
            eat(&id.to_le_bytes());
        }
        let mut relations: Vec<(&String, &RelationId)> = self.relation_ids.iter().collect();
        relations.sort();
        for (name, id) in relations {
            eat(b"R");
            eat(name.as_bytes());
            eat(&[0]);
            eat(&id.to_le_bytes());
        }
        h
    }

    /// Two-column TSV dump (`name<TAB>id`), one row per entity, id order.
    pub fn write_entities_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for (id, name) in self.entity_names.iter().enumerate() {
            writeln!(w, "{name}\t{id}")?;
        }
        Ok(())
    }

    pub fn write_relations_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for (id, name) in self.relation_names.iter().enumerate() {
            writeln!(w, "{name}\t{id}")?;
        }
        Ok(())
    }
}

/// Triples parsed from one split, plus the number of duplicated lines that
/// were dropped.
#[derive(Debug)]
pub struct ParsedSplit {
    pub triples: Vec<Triple>,
    pub duplicates: usize,
}

/// Parse one TSV split, interning names into `vocab` in first-seen order.
///
/// Duplicate triples within the stream are dropped and counted. Empty lines
/// are skipped; a line with the wrong field count is an error carrying its
/// 1-based line number.
pub fn parse_triples<R: BufRead>(reader: R, vocab: &mut Vocabulary) -> Result<ParsedSplit> {
    let mut triples = Vec::new();
    let mut seen: HashSet<Triple> = HashSet::new();
    let mut duplicates = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (head, rel, tail) = match (fields.next(), fields.next(), fields.next(), fields.next())
        {
            (Some(h), Some(r), Some(t), None) => (h, r, t),
            _ => {
                return Err(SphereError::MalformedLine {
                    line: idx + 1,
                    found: line.split('\t').count(),
                })
            }
        };
        let triple = Triple::new(
            vocab.intern_entity(head),
            vocab.intern_relation(rel),
            vocab.intern_entity(tail),
        );
        if seen.insert(triple) {
            triples.push(triple);
        } else {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        log::warn!("dropped {duplicates} duplicate line(s) within split");
    }
    Ok(ParsedSplit { triples, duplicates })
}

/// Ground-truth answer sets for both query directions over all splits.
#[derive(Debug, Default)]
pub struct AnswerIndex {
    tails: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    heads: HashMap<(EntityId, RelationId), Vec<EntityId>>,
}

impl AnswerIndex {
    /// Index the union of the given triple lists.
    pub fn build(splits: &[&[Triple]]) -> Self {
        let mut tails: HashMap<(EntityId, RelationId), Vec<EntityId>> = HashMap::new();
        let mut heads: HashMap<(EntityId, RelationId), Vec<EntityId>> = HashMap::new();
        for split in splits {
            for t in *split {
                tails.entry((t.head, t.rel)).or_default().push(t.tail);
                heads.entry((t.tail, t.rel)).or_default().push(t.head);
            }
        }
        for v in tails.values_mut().chain(heads.values_mut()) {
            v.sort_unstable();
            v.dedup();
        }
        AnswerIndex { tails, heads }
    }

    /// Sorted answer set for `(direction, anchor, rel)`; empty if unseen.
    pub fn answers(&self, direction: QueryDirection, anchor: EntityId, rel: RelationId) -> &[EntityId] {
        let map = match direction {
            QueryDirection::Tail => &self.tails,
            QueryDirection::Head => &self.heads,
        };
        map.get(&(anchor, rel)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.tails.is_empty() && self.heads.is_empty()
    }
}

/// A fully ingested dataset: vocabulary, splits, and answer index.
#[derive(Debug)]
pub struct KnowledgeGraph {
    pub vocab: Vocabulary,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    pub answers: AnswerIndex,
}

impl KnowledgeGraph {
    /// Assemble a graph from already-parsed splits.
    ///
    /// Triples appearing in more than one split are kept in both and
    /// reported with a warning.
    pub fn from_splits(
        vocab: Vocabulary,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Self {
        let train_set: HashSet<&Triple> = train.iter().collect();
        let cross = valid
            .iter()
            .chain(test.iter())
            .filter(|t| train_set.contains(t))
            .count();
        if cross > 0 {
            log::warn!("{cross} triple(s) appear in train and in valid/test; keeping both");
        }
        let answers = AnswerIndex::build(&[&train, &valid, &test]);
        KnowledgeGraph { vocab, train, valid, test, answers }
    }

    /// Read `train.txt`, `valid.txt`, `test.txt` from a directory.
    pub fn load_dir<P: AsRef<Path>>(dir: P) -> Result<Self> {
        let dir = dir.as_ref();
        let mut vocab = Vocabulary::new();
        let mut read = |file: &str| -> Result<Vec<Triple>> {
            let path = dir.join(file);
            let reader = BufReader::new(File::open(&path).map_err(|e| {
                SphereError::Io(std::io::Error::new(
                    e.kind(),
                    format!("{}: {e}", path.display()),
                ))
            })?);
            Ok(parse_triples(reader, &mut vocab)?.triples)
        };
        let train = read("train.txt")?;
        let valid = read("valid.txt")?;
        let test = read("test.txt")?;
        Ok(Self::from_splits(vocab, train, valid, test))
    }

    pub fn n_entities(&self) -> usize {
        self.vocab.n_entities()
    }

    pub fn n_relations(&self) -> usize {
        self.vocab.n_relations()
    }

    pub fn all_triples(&self) -> impl Iterator<Item = &Triple> {
        self.train.iter().chain(self.valid.iter()).chain(self.test.iter())
    }
}

/// Relation mapping property of one relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    OneToOne,
    OneToMany,
    ManyToOne,
    ManyToMany,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::OneToOne,
        Category::OneToMany,
        Category::ManyToOne,
        Category::ManyToMany,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Category::OneToOne => "one_to_one",
            Category::OneToMany => "one_to_many",
            Category::ManyToOne => "many_to_one",
            Category::ManyToMany => "many_to_many",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RelationCategory {
    pub rel: RelationId,
    pub category: Category,
    pub tails_per_head: f64,
    pub heads_per_tail: f64,
    /// False when the relation never occurs in train (ratios reported as 0).
    pub in_train: bool,
}

/// Classify every relation id in `[0, n_relations)` by its average answer
/// multiplicity over the train split.
///
/// `tails_per_head` is the number of distinct train facts of the relation
/// divided by its number of distinct heads; `heads_per_tail` analogously.
/// A side counts as "many" when its ratio exceeds `threshold`.
pub fn classify_relations(
    train: &[Triple],
    n_relations: usize,
    threshold: f64,
) -> Vec<RelationCategory> {
    assert!(threshold > 0.0, "threshold must be positive");
    let mut facts: Vec<HashSet<(EntityId, EntityId)>> = vec![HashSet::new(); n_relations];
    for t in train {
        facts[t.rel as usize].insert((t.head, t.tail));
    }
    facts
        .iter()
        .enumerate()
        .map(|(rel, pairs)| {
            if pairs.is_empty() {
                log::warn!("relation {rel} absent from train; defaulting to one-to-one");
                return RelationCategory {
                    rel: rel as RelationId,
                    category: Category::OneToOne,
                    tails_per_head: 0.0,
                    heads_per_tail: 0.0,
                    in_train: false,
                };
            }
            let heads: HashSet<EntityId> = pairs.iter().map(|&(h, _)| h).collect();
            let tails: HashSet<EntityId> = pairs.iter().map(|&(_, t)| t).collect();
            let tails_per_head = pairs.len() as f64 / heads.len() as f64;
            let heads_per_tail = pairs.len() as f64 / tails.len() as f64;
            let category = match (tails_per_head > threshold, heads_per_tail > threshold) {
                (true, true) => Category::ManyToMany,
                (true, false) => Category::OneToMany,
                (false, true) => Category::ManyToOne,
                (false, false) => Category::OneToOne,
            };
            RelationCategory {
                rel: rel as RelationId,
                category,
                tails_per_head,
                heads_per_tail,
                in_train: true,
            }
        })
        .collect()
}
