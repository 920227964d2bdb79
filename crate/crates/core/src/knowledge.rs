//! Knowledge atoms, layered belief stores, edits and disagreement sets.
//!
//! A [`KnowledgeBase`] holds three layers. Lookups consult the context
//! overlay first (latest entry wins), then local overrides, then base facts.
//! Edits never touch the base layer; every edit method writes into one of
//! the two upper layers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::seed::rng_from;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum KnowledgeError {
    #[error("empty {0} identifier")]
    EmptyIdentifier(&'static str),
    #[error("edit on {key} leaves the object unchanged ({object})")]
    NoOpEdit { key: FactKey, object: String },
    #[error("side-effect rate {0} is outside [0, 1]")]
    SideEffectRateOutOfRange(f64),
    #[error("side-effect rate {rate} is only meaningful for global overrides, got method {method}")]
    SideEffectOnLocalMethod { method: EditMethod, rate: f64 },
    #[error("disagreement entry for {0} needs at least two distinct objects")]
    NotContested(FactKey),
    #[error("line {line}: {message}")]
    Jsonl { line: usize, message: String },
}

fn non_empty(s: String, what: &'static str) -> Result<String, KnowledgeError> {
    if s.is_empty() {
        Err(KnowledgeError::EmptyIdentifier(what))
    } else {
        Ok(s)
    }
}

/// The `(subject, relation)` half of an atom.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "KeyRepr")]
pub struct FactKey {
    subject: String,
    relation: String,
}

#[derive(Deserialize)]
struct KeyRepr {
    subject: String,
    relation: String,
}

impl TryFrom<KeyRepr> for FactKey {
    type Error = KnowledgeError;

    fn try_from(r: KeyRepr) -> Result<Self, Self::Error> {
        FactKey::new(r.subject, r.relation)
    }
}

impl FactKey {
    pub fn new(
        subject: impl Into<String>,
        relation: impl Into<String>,
    ) -> Result<Self, KnowledgeError> {
        Ok(Self {
            subject: non_empty(subject.into(), "subject")?,
            relation: non_empty(relation.into(), "relation")?,
        })
    }

    pub fn subject(&self) -> &str {
        &self.subject
    }

    pub fn relation(&self) -> &str {
        &self.relation
    }

    pub fn with_object(&self, object: impl Into<String>) -> Result<Atom, KnowledgeError> {
        Ok(Atom {
            key: self.clone(),
            object: non_empty(object.into(), "object")?,
        })
    }
}

impl fmt::Display for FactKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.subject, self.relation)
    }
}

/// A `(subject, relation, object)` triple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "AtomRepr", into = "AtomRepr")]
pub struct Atom {
    key: FactKey,
    object: String,
}

#[derive(Serialize, Deserialize)]
struct AtomRepr {
    subject: String,
    relation: String,
    object: String,
}

impl TryFrom<AtomRepr> for Atom {
    type Error = KnowledgeError;

    fn try_from(r: AtomRepr) -> Result<Self, Self::Error> {
        Atom::new(r.subject, r.relation, r.object)
    }
}

impl From<Atom> for AtomRepr {
    fn from(a: Atom) -> Self {
        AtomRepr {
            subject: a.key.subject,
            relation: a.key.relation,
            object: a.object,
        }
    }
}

impl Atom {
    pub fn new(
        subject: impl Into<String>,
        relation: impl Into<String>,
        object: impl Into<String>,
    ) -> Result<Self, KnowledgeError> {
        FactKey::new(subject, relation)?.with_object(object)
    }

    pub fn key(&self) -> &FactKey {
        &self.key
    }

    pub fn subject(&self) -> &str {
        &self.key.subject
    }

    pub fn relation(&self) -> &str {
        &self.key.relation
    }

    pub fn object(&self) -> &str {
        &self.object
    }

    /// Two atoms conflict iff they share a key but differ in object.
    pub fn conflicts_with(&self, other: &Atom) -> bool {
        self.key == other.key && self.object != other.object
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.key.subject, self.key.relation, self.object)
    }
}

/// An agent's layered belief store.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    base_facts: BTreeMap<FactKey, String>,
    local_overrides: BTreeMap<FactKey, String>,
    context_overlay: Vec<Atom>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a store whose base layer holds `facts`. Later duplicates of a
    /// key replace earlier ones.
    pub fn from_facts<I: IntoIterator<Item = Atom>>(facts: I) -> Self {
        let mut kb = Self::new();
        for a in facts {
            kb.base_facts.insert(a.key, a.object);
        }
        kb
    }

    pub fn base_facts(&self) -> &BTreeMap<FactKey, String> {
        &self.base_facts
    }

    pub fn local_overrides(&self) -> &BTreeMap<FactKey, String> {
        &self.local_overrides
    }

    pub fn context_overlay(&self) -> &[Atom] {
        &self.context_overlay
    }

    pub fn is_empty(&self) -> bool {
        self.base_facts.is_empty()
            && self.local_overrides.is_empty()
            && self.context_overlay.is_empty()
    }

    /// Resolves `key`: overlay (latest wins), then overrides, then base.
    pub fn believed_object(&self, key: &FactKey) -> Option<&str> {
        self.context_overlay
            .iter()
            .rev()
            .find(|a| &a.key == key)
            .map(|a| a.object.as_str())
            .or_else(|| self.local_overrides.get(key).map(String::as_str))
            .or_else(|| self.base_facts.get(key).map(String::as_str))
    }

    /// Every key any layer mentions.
    pub fn keys(&self) -> BTreeSet<&FactKey> {
        self.base_facts
            .keys()
            .chain(self.local_overrides.keys())
            .chain(self.context_overlay.iter().map(|a| &a.key))
            .collect()
    }

    /// The resolution function as a set of atoms.
    pub fn resolved_atoms(&self) -> BTreeSet<Atom> {
        self.keys()
            .into_iter()
            .filter_map(|k| {
                self.believed_object(k).map(|o| Atom {
                    key: k.clone(),
                    object: o.to_owned(),
                })
            })
            .collect()
    }

    /// Writes `atom` into the override layer. Used by belief revision.
    pub(crate) fn set_override(&mut self, atom: Atom) {
        self.local_overrides.insert(atom.key, atom.object);
    }

    /// Belief revision: records `atom` in the override layer, and also on top
    /// of the overlay when the overlay already speaks about that key, so the
    /// adopted object is what resolution returns.
    pub(crate) fn adopt(&mut self, atom: Atom) {
        if self.context_overlay.iter().any(|a| a.key == atom.key) {
            self.context_overlay.push(atom.clone());
        }
        self.set_override(atom);
    }

    /// Serializes the store as JSON Lines, one record per layer entry.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |rec: LayerRecord| {
            out.push_str(&serde_json::to_string(&rec).expect("layer record serializes"));
            out.push('\n');
        };
        for (k, o) in &self.base_facts {
            push(LayerRecord::new(Layer::Base, k, o, None));
        }
        for (k, o) in &self.local_overrides {
            push(LayerRecord::new(Layer::Local, k, o, None));
        }
        for (i, a) in self.context_overlay.iter().enumerate() {
            push(LayerRecord::new(Layer::Overlay, &a.key, &a.object, Some(i as u64)));
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, KnowledgeError> {
        let mut kb = Self::new();
        let mut overlay: Vec<(u64, Atom)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let err = |message: String| KnowledgeError::Jsonl { line, message };
            let rec: LayerRecord =
                serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
            let atom = Atom::new(rec.subject, rec.relation, rec.object)
                .map_err(|e| err(e.to_string()))?;
            let layer_map = match (rec.layer, rec.order) {
                (Layer::Overlay, Some(order)) => {
                    overlay.push((order, atom));
                    continue;
                }
                (Layer::Overlay, None) => return Err(err("overlay entry without order".into())),
                (_, Some(_)) => return Err(err("order is only valid on overlay entries".into())),
                (Layer::Base, None) => &mut kb.base_facts,
                (Layer::Local, None) => &mut kb.local_overrides,
            };
            if layer_map.insert(atom.key.clone(), atom.object).is_some() {
                return Err(err(format!("duplicate key {}", atom.key)));
            }
        }
        overlay.sort_by_key(|(order, _)| *order);
        if overlay.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(KnowledgeError::Jsonl {
                line: 0,
                message: "duplicate overlay order".into(),
            });
        }
        kb.context_overlay = overlay.into_iter().map(|(_, a)| a).collect();
        Ok(kb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Layer {
    Base,
    Local,
    Overlay,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    layer: Layer,
    subject: String,
    relation: String,
    object: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order: Option<u64>,
}

impl LayerRecord {
    fn new(layer: Layer, key: &FactKey, object: &str, order: Option<u64>) -> Self {
        Self {
            layer,
            subject: key.subject.clone(),
            relation: key.relation.clone(),
            object: object.to_owned(),
            order,
        }
    }
}

/// How an edit reaches the agent's beliefs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EditMethod {
    /// In-context editing: the fact is appended to the prompt-like overlay.
    ContextOverlay,
    /// Local parametric editing: exact-key override.
    LocalOverride,
    /// Global parametric editing: exact-key override plus collateral damage
    /// to other facts sharing the relation.
    GlobalOverride,
}

impl EditMethod {
    pub const ALL: [EditMethod; 3] = [
        EditMethod::ContextOverlay,
        EditMethod::LocalOverride,
        EditMethod::GlobalOverride,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            EditMethod::ContextOverlay => "overlay",
            EditMethod::LocalOverride => "local",
            EditMethod::GlobalOverride => "global",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.tag() == tag)
    }
}

impl fmt::Display for EditMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Collateral corruption rate used for global overrides unless configured.
pub const DEFAULT_SIDE_EFFECT_RATE: f64 = 0.05;

/// A counterfactual edit of one fact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditSpec {
    key: FactKey,
    true_object: String,
    new_object: String,
    method: EditMethod,
    side_effect_rate: f64,
}

impl EditSpec {
    pub fn new(
        key: FactKey,
        true_object: impl Into<String>,
        new_object: impl Into<String>,
        method: EditMethod,
        side_effect_rate: f64,
    ) -> Result<Self, KnowledgeError> {
        let spec = Self {
            key,
            true_object: non_empty(true_object.into(), "object")?,
            new_object: non_empty(new_object.into(), "object")?,
            method,
            side_effect_rate,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), KnowledgeError> {
        if self.new_object == self.true_object {
            return Err(KnowledgeError::NoOpEdit {
                key: self.key.clone(),
                object: self.new_object.clone(),
            });
        }
        if !(0.0..=1.0).contains(&self.side_effect_rate) {
            return Err(KnowledgeError::SideEffectRateOutOfRange(self.side_effect_rate));
        }
        if self.method != EditMethod::GlobalOverride && self.side_effect_rate != 0.0 {
            return Err(KnowledgeError::SideEffectOnLocalMethod {
                method: self.method,
                rate: self.side_effect_rate,
            });
        }
        Ok(())
    }

    pub fn key(&self) -> &FactKey {
        &self.key
    }

    pub fn true_object(&self) -> &str {
        &self.true_object
    }

    pub fn new_object(&self) -> &str {
        &self.new_object
    }

    pub fn method(&self) -> EditMethod {
        self.method
    }

    pub fn side_effect_rate(&self) -> f64 {
        self.side_effect_rate
    }

    /// The counterfactual atom this edit plants.
    pub fn edited_atom(&self) -> Atom {
        Atom {
            key: self.key.clone(),
            object: self.new_object.clone(),
        }
    }
}

/// Returns a copy of `kb` with `edit` applied; `kb` itself is untouched.
///
/// Global overrides walk the base facts sharing the edit's relation in key
/// order and corrupt each one independently with probability
/// `side_effect_rate`, drawing from a generator seeded with `rng_seed`. The
/// corrupted value shadows the base fact from the override layer.
pub fn apply_edit(
    kb: &KnowledgeBase,
    edit: &EditSpec,
    rng_seed: u64,
) -> Result<KnowledgeBase, KnowledgeError> {
    edit.validate()?;
    let mut out = kb.clone();
    match edit.method {
        EditMethod::ContextOverlay => out.context_overlay.push(edit.edited_atom()),
        EditMethod::LocalOverride => {
            out.local_overrides
                .insert(edit.key.clone(), edit.new_object.clone());
        }
        EditMethod::GlobalOverride => {
            let mut rng = rng_from(rng_seed);
            for (key, object) in &kb.base_facts {
                if key == &edit.key || key.relation != edit.key.relation {
                    continue;
                }
                if rng.gen_bool(edit.side_effect_rate) {
                    let tag: u32 = rng.gen();
                    out.local_overrides
                        .insert(key.clone(), corrupted_identifier(object, tag));
                }
            }
            out.local_overrides
                .insert(edit.key.clone(), edit.new_object.clone());
        }
    }
    Ok(out)
}

/// Marker that appears only in identifiers produced by collateral damage.
pub const CORRUPTION_MARKER: &str = "#corrupt";

fn corrupted_identifier(object: &str, tag: u32) -> String {
    format!("{object}{CORRUPTION_MARKER}{tag:08x}")
}

/// Keys on which at least two agents hold different objects, with the
/// objects held.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisagreementSet {
    contested: BTreeMap<FactKey, BTreeSet<String>>,
}

impl DisagreementSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entry; rejects fewer than two distinct objects.
    pub fn insert<I, S>(&mut self, key: FactKey, objects: I) -> Result<(), KnowledgeError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let objects: BTreeSet<String> = objects.into_iter().map(Into::into).collect();
        if objects.len() < 2 {
            return Err(KnowledgeError::NotContested(key));
        }
        self.contested.insert(key, objects);
        Ok(())
    }

    pub fn contested(&self) -> &BTreeMap<FactKey, BTreeSet<String>> {
        &self.contested
    }

    pub fn contains_key(&self, key: &FactKey) -> bool {
        self.contested.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &FactKey> {
        self.contested.keys()
    }

    pub fn len(&self) -> usize {
        self.contested.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contested.is_empty()
    }

    /// True when `self`'s keys are a subset of `other`'s.
    pub fn is_subset_of(&self, other: &DisagreementSet) -> bool {
        self.contested.keys().all(|k| other.contains_key(k))
    }
}

/// Collects believed objects per probe key across `kbs`; keys with at least
/// two distinct objects form the disagreement set. Absences are ignored.
pub fn conflict_set<'a, I>(kbs: I, keys: &BTreeSet<FactKey>) -> DisagreementSet
where
    I: IntoIterator<Item = &'a KnowledgeBase>,
    I::IntoIter: Clone,
{
    let kbs = kbs.into_iter();
    let mut delta = DisagreementSet::new();
    for key in keys {
        let objects: BTreeSet<String> = kbs
            .clone()
            .filter_map(|kb| kb.believed_object(key))
            .map(str::to_owned)
            .collect();
        if objects.len() >= 2 {
            delta.contested.insert(key.clone(), objects);
        }
    }
    delta
}

/// Jaccard index of the two resolved atom sets; two empty stores count as
/// identical.
pub fn kb_overlap<T: Scalar>(a: &KnowledgeBase, b: &KnowledgeBase) -> T {
    let ra = a.resolved_atoms();
    let rb = b.resolved_atoms();
    jaccard(&ra, &rb)
}

pub(crate) fn jaccard<T: Scalar, E: Ord>(a: &BTreeSet<E>, b: &BTreeSet<E>) -> T {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        T::one()
    } else {
        T::ratio(inter, union)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn key(s: &str, r: &str) -> FactKey {
        FactKey::new(s, r).unwrap()
    }

    fn atom(s: &str, r: &str, o: &str) -> Atom {
        Atom::new(s, r, o).unwrap()
    }

    #[test]
    fn empty_identifiers_rejected() {
        assert!(Atom::new("", "r", "o").is_err());
        assert!(Atom::new("s", "", "o").is_err());
        assert!(Atom::new("s", "r", "").is_err());
    }

    #[test]
    fn overlay_shadows_base() {
        let mut kb = KnowledgeBase::from_facts([atom("Tetris", "createdBy", "AlexeyPajitnov")]);
        kb.context_overlay.push(atom("Tetris", "createdBy", "MarkBurnett"));
        assert_eq!(
            kb.believed_object(&key("Tetris", "createdBy")),
            Some("MarkBurnett")
        );
    }

    #[test]
    fn overlay_latest_entry_wins() {
        let mut kb = KnowledgeBase::new();
        kb.context_overlay.push(atom("a", "r", "x"));
        kb.context_overlay.push(atom("a", "r", "y"));
        kb.local_overrides.insert(key("a", "r"), "z".into());
        assert_eq!(kb.believed_object(&key("a", "r")), Some("y"));
    }

    #[test]
    fn empty_and_single_layer_lookups() {
        assert_eq!(KnowledgeBase::new().believed_object(&key("a", "r")), None);
        let kb = KnowledgeBase::from_facts([atom("a", "r", "x")]);
        assert_eq!(kb.believed_object(&key("a", "r")), Some("x"));
    }

    #[test]
    fn local_override_keeps_base_intact() {
        let kb = KnowledgeBase::from_facts([atom("a", "r", "x")]);
        let e = EditSpec::new(key("a", "r"), "x", "y", EditMethod::LocalOverride, 0.0).unwrap();
        let edited = apply_edit(&kb, &e, 1).unwrap();
        assert_eq!(edited.believed_object(&key("a", "r")), Some("y"));
        assert_eq!(edited.base_facts(), kb.base_facts());
        assert_eq!(kb.believed_object(&key("a", "r")), Some("x"));
    }

    #[test]
    fn global_with_zero_rate_matches_local() {
        let facts: Vec<Atom> = (0..6).map(|i| atom(&format!("s{i}"), "r", "o")).collect();
        let kb = KnowledgeBase::from_facts(facts);
        let k = key("s0", "r");
        let local = EditSpec::new(k.clone(), "o", "p", EditMethod::LocalOverride, 0.0).unwrap();
        let global = EditSpec::new(k, "o", "p", EditMethod::GlobalOverride, 0.0).unwrap();
        let a = apply_edit(&kb, &local, 9).unwrap();
        let b = apply_edit(&kb, &global, 9).unwrap();
        assert_eq!(a.resolved_atoms(), b.resolved_atoms());
    }

    #[test]
    fn global_with_full_rate_corrupts_every_sibling() {
        let mut facts: Vec<Atom> = (0..10).map(|i| atom(&format!("s{i}"), "r", "o")).collect();
        facts.push(atom("s0", "other", "q"));
        let kb = KnowledgeBase::from_facts(facts);
        let e = EditSpec::new(key("s0", "r"), "o", "p", EditMethod::GlobalOverride, 1.0).unwrap();
        let edited = apply_edit(&kb, &e, 3).unwrap();
        // enumerate the base map and count keys whose resolution moved
        let corrupted = kb
            .base_facts()
            .iter()
            .filter(|(k, _)| *k != e.key())
            .filter(|(k, o)| edited.believed_object(k) != Some(o.as_str()))
            .count();
        assert_eq!(corrupted, 9);
        assert_eq!(edited.believed_object(&key("s0", "other")), Some("q"));
        assert_eq!(edited.base_facts(), kb.base_facts());
    }

    #[test]
    fn edit_spec_validation() {
        let k = key("a", "r");
        assert!(EditSpec::new(k.clone(), "x", "x", EditMethod::LocalOverride, 0.0).is_err());
        assert!(EditSpec::new(k.clone(), "x", "y", EditMethod::LocalOverride, 0.1).is_err());
        assert!(matches!(
            EditSpec::new(k.clone(), "x", "y", EditMethod::GlobalOverride, 1.5),
            Err(KnowledgeError::SideEffectRateOutOfRange(_))
        ));
        assert!(EditSpec::new(k, "x", "y", EditMethod::GlobalOverride, -0.1).is_err());
    }

    #[test]
    fn conflict_set_examples() {
        let k = key("Tetris", "createdBy");
        let a = KnowledgeBase::from_facts([atom("Tetris", "createdBy", "AlexeyPajitnov")]);
        let b = KnowledgeBase::from_facts([atom("Tetris", "createdBy", "MarkBurnett")]);
        let keys = BTreeSet::from([k.clone()]);
        let delta = conflict_set([&a, &b], &keys);
        let expected: BTreeSet<String> =
            ["AlexeyPajitnov", "MarkBurnett"].map(String::from).into();
        assert_eq!(delta.contested().get(&k), Some(&expected));

        assert!(conflict_set([&a, &a, &a], &keys).is_empty());

        let x = KnowledgeBase::from_facts([atom("a", "r", "x")]);
        let z = KnowledgeBase::from_facts([atom("a", "r", "z")]);
        let keys = BTreeSet::from([key("a", "r")]);
        let delta = conflict_set([&x, &x, &z], &keys);
        assert_eq!(delta.len(), 1);
        assert_eq!(
            delta.contested()[&key("a", "r")],
            BTreeSet::from(["x".to_string(), "z".to_string()])
        );
    }

    #[test]
    fn absence_never_contests() {
        let x = KnowledgeBase::from_facts([atom("a", "r", "x")]);
        let keys = BTreeSet::from([key("a", "r")]);
        assert!(conflict_set([&x, &KnowledgeBase::new()], &keys).is_empty());
    }

    #[test]
    fn overlap_examples() {
        let a = KnowledgeBase::from_facts([atom("a", "r", "x"), atom("b", "r", "y")]);
        let b = KnowledgeBase::from_facts([atom("a", "r", "x"), atom("c", "r", "z")]);
        assert_eq!(kb_overlap::<Ratio<i64>>(&a, &a), Ratio::from_integer(1));
        assert_eq!(kb_overlap::<Ratio<i64>>(&a, &b), Ratio::new(1, 3));
        let c = KnowledgeBase::from_facts([atom("q", "r", "x")]);
        let d = KnowledgeBase::from_facts([atom("w", "r", "x")]);
        assert_eq!(kb_overlap::<f64>(&c, &d), 0.0);
        assert_eq!(kb_overlap::<f64>(&KnowledgeBase::new(), &KnowledgeBase::new()), 1.0);
    }

    #[test]
    fn jsonl_layout() {
        let mut kb = KnowledgeBase::from_facts([atom("a", "r", "x")]);
        kb.local_overrides.insert(key("b", "r"), "y".into());
        kb.context_overlay.push(atom("a", "r", "z"));
        let text = kb.to_jsonl();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines,
            [
                r#"{"layer":"base","subject":"a","relation":"r","object":"x"}"#,
                r#"{"layer":"local","subject":"b","relation":"r","object":"y"}"#,
                r#"{"layer":"overlay","subject":"a","relation":"r","object":"z","order":0}"#,
            ]
        );
        assert_eq!(KnowledgeBase::from_jsonl(&text).unwrap(), kb);
    }

    #[test]
    fn jsonl_rejects_malformed_records() {
        let no_order = r#"{"layer":"overlay","subject":"a","relation":"r","object":"z"}"#;
        assert!(matches!(
            KnowledgeBase::from_jsonl(no_order),
            Err(KnowledgeError::Jsonl { line: 1, .. })
        ));
        let stray_order = r#"{"layer":"base","subject":"a","relation":"r","object":"z","order":3}"#;
        assert!(KnowledgeBase::from_jsonl(stray_order).is_err());
        let dup = "{\"layer\":\"base\",\"subject\":\"a\",\"relation\":\"r\",\"object\":\"x\"}\n\
                   {\"layer\":\"base\",\"subject\":\"a\",\"relation\":\"r\",\"object\":\"y\"}";
        assert!(matches!(
            KnowledgeBase::from_jsonl(dup),
            Err(KnowledgeError::Jsonl { line: 2, .. })
        ));
    }
}
