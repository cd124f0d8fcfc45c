//! The seven display categories, their colors, and the many-to-one
//! compaction from the 40 fine emotion labels.
//!
//! Aggregation inside a group is `max`, so the argmax over the seven
//! compacted scores always agrees with the argmax over the fine labels
//! (with ties broken by [`Category::ALL`] order in both cases).

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Number of fine labels a compaction map must cover.
pub const FINE_LABEL_COUNT: usize = 40;

const BUILTIN_COMPACTION: &str = include_str!("../data/compaction_map.json");
const BUILTIN_COLORS: &str = include_str!("../data/color_map.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Joy,
    Anger,
    Sadness,
    Anticipation,
    Tired,
    Fear,
    Neutral,
}

impl Category {
    /// Fixed order; doubles as the tie-break order for every argmax.
    pub const ALL: [Category; 7] = [
        Category::Joy,
        Category::Anger,
        Category::Sadness,
        Category::Anticipation,
        Category::Tired,
        Category::Fear,
        Category::Neutral,
    ];

    /// Fallback for empty or unclassifiable input.
    pub const FALLBACK: Category = Category::Neutral;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Joy => "Joy",
            Category::Anger => "Anger",
            Category::Sadness => "Sadness",
            Category::Anticipation => "Anticipation",
            Category::Tired => "Tired",
            Category::Fear => "Fear",
            Category::Neutral => "Neutral",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Schema(format!("unknown category {s:?}")))
    }
}

/// Seven scores indexed by [`Category::index`]. A category without any
/// mapped fine label carries `f64::NEG_INFINITY`, which never wins an argmax.
///
/// On the wire the scores are an object keyed by category name; the
/// sentinel is written as `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompactScores(pub [f64; 7]);

impl CompactScores {
    pub const SENTINEL: f64 = f64::NEG_INFINITY;

    pub fn sentinel() -> Self {
        CompactScores([Self::SENTINEL; 7])
    }

    pub fn get(&self, category: Category) -> f64 {
        self.0[category.index()]
    }

    pub fn set(&mut self, category: Category, value: f64) {
        self.0[category.index()] = value;
    }

    pub fn values(&self) -> &[f64; 7] {
        &self.0
    }

    pub fn is_all_sentinel(&self) -> bool {
        self.0.iter().all(|v| !v.is_finite())
    }

    /// Strict argmax; earlier categories win ties. Non-finite entries are
    /// treated as the sentinel. `None` when every entry is the sentinel.
    pub fn argmax(&self) -> Option<Category> {
        let mut best: Option<(Category, f64)> = None;
        for c in Category::ALL {
            let v = self.get(c);
            if !v.is_finite() {
                continue;
            }
            match best {
                Some((_, b)) if v <= b => {}
                _ => best = Some((c, v)),
            }
        }
        best.map(|(c, _)| c)
    }
}

impl Serialize for CompactScores {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(7))?;
        for c in Category::ALL {
            let v = self.get(c);
            if v.is_finite() {
                map.serialize_entry(c.name(), &v)?;
            } else {
                map.serialize_entry(c.name(), &Option::<f64>::None)?;
            }
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for CompactScores {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct ScoresVisitor;

        impl<'de> Visitor<'de> for ScoresVisitor {
            type Value = CompactScores;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object with one score per category")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> std::result::Result<Self::Value, A::Error> {
                let mut scores = CompactScores::sentinel();
                let mut seen = [false; 7];
                while let Some((key, value)) = access.next_entry::<String, Option<f64>>()? {
                    let c: Category = key.parse().map_err(de::Error::custom)?;
                    if seen[c.index()] {
                        return Err(de::Error::custom(format!("duplicate category {key}")));
                    }
                    seen[c.index()] = true;
                    scores.set(c, value.unwrap_or(CompactScores::SENTINEL));
                }
                if let Some(c) = Category::ALL.into_iter().find(|c| !seen[c.index()]) {
                    return Err(de::Error::custom(format!("missing category {c}")));
                }
                Ok(scores)
            }
        }

        deserializer.deserialize_map(ScoresVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorEntry {
    pub hex: String,
    pub name: String,
}

/// Total, injective assignment of a color to every category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorMap {
    entries: [ColorEntry; 7],
}

impl ColorMap {
    pub fn new(entries: BTreeMap<Category, ColorEntry>) -> Result<Self> {
        if let Some(c) = Category::ALL.into_iter().find(|c| !entries.contains_key(c)) {
            return Err(Error::Schema(format!("color map has no entry for {c}")));
        }
        let mut seen = HashSet::new();
        for (c, e) in &entries {
            if !is_hex_color(&e.hex) {
                return Err(Error::Schema(format!("{c}: {:?} is not a #RRGGBB color", e.hex)));
            }
            if !seen.insert(e.hex.to_ascii_uppercase()) {
                return Err(Error::Schema(format!("{c}: color {} is used twice", e.hex)));
            }
        }
        let entries = Category::ALL.map(|c| entries[&c].clone());
        Ok(ColorMap { entries })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let raw: BTreeMap<String, ColorEntry> = serde_json::from_str(json)?;
        if raw.len() != 7 {
            return Err(Error::Schema(format!("color map must have exactly 7 keys, found {}", raw.len())));
        }
        let entries = raw
            .into_iter()
            .map(|(k, v)| Ok((k.parse()?, v)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let raw: BTreeMap<&str, &ColorEntry> =
            Category::ALL.iter().map(|c| (c.name(), &self.entries[c.index()])).collect();
        serde_json::to_string_pretty(&raw).expect("color map serializes")
    }

    pub fn get(&self, category: Category) -> &ColorEntry {
        &self.entries[category.index()]
    }

    pub fn hex(&self, category: Category) -> &str {
        &self.get(category).hex
    }
}

impl Default for ColorMap {
    fn default() -> Self {
        ColorMap::from_json(BUILTIN_COLORS).expect("builtin color map is valid")
    }
}

fn is_hex_color(s: &str) -> bool {
    s.len() == 7 && s.starts_with('#') && s[1..].chars().all(|c| c.is_ascii_hexdigit())
}

#[derive(Serialize, Deserialize)]
struct CompactionFile {
    version: String,
    groups: BTreeMap<String, Category>,
}

/// Grouping of the 40 fine labels into the seven categories.
///
/// Fine labels are kept in sorted order; that order is the canonical label
/// order for score vectors and model bundles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompactionMap {
    version: String,
    labels: Vec<String>,
    groups: Vec<Category>,
}

impl CompactionMap {
    pub fn new(version: impl Into<String>, groups: BTreeMap<String, Category>) -> Result<Self> {
        if groups.len() != FINE_LABEL_COUNT {
            return Err(Error::Schema(format!(
                "compaction map must have exactly {FINE_LABEL_COUNT} fine labels, found {}",
                groups.len()
            )));
        }
        for c in Category::ALL.into_iter().filter(|&c| c != Category::FALLBACK) {
            if !groups.values().any(|&g| g == c) {
                return Err(Error::Schema(format!("no fine label maps to {c}")));
            }
        }
        let (labels, groups) = groups.into_iter().unzip();
        Ok(CompactionMap {
            version: version.into(),
            labels,
            groups,
        })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: CompactionFile = serde_json::from_str(json)?;
        Self::new(file.version, file.groups)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let file = CompactionFile {
            version: self.version.clone(),
            groups: self.iter().map(|(l, c)| (l.to_owned(), c)).collect(),
        };
        serde_json::to_string_pretty(&file).expect("compaction map serializes")
    }

    /// The map shipped with the crate.
    pub fn builtin() -> Self {
        CompactionMap::from_json(BUILTIN_COMPACTION).expect("builtin compaction map is valid")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    pub fn category_of(&self, label: &str) -> Option<Category> {
        self.index_of(label).map(|i| self.groups[i])
    }

    /// Category of the label at canonical position `index`.
    pub fn category_at(&self, index: usize) -> Category {
        self.groups[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Category)> + '_ {
        self.labels.iter().map(String::as_str).zip(self.groups.iter().copied())
    }

    /// Group-wise max over scores given in canonical label order.
    pub fn compact_slice(&self, scores: &[f64]) -> CompactScores {
        debug_assert_eq!(scores.len(), self.labels.len());
        let mut out = CompactScores::sentinel();
        for (&s, &c) in scores.iter().zip(&self.groups) {
            let slot = &mut out.0[c.index()];
            if s > *slot {
                *slot = s;
            }
        }
        out
    }

    /// Puts named scores into canonical order, rejecting missing or unknown labels.
    pub fn align(&self, raw: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
        if let Some(extra) = raw.keys().find(|k| self.index_of(k).is_none()) {
            return Err(Error::Schema(format!("unknown fine label {extra:?}")));
        }
        self.labels
            .iter()
            .map(|l| {
                raw.get(l)
                    .copied()
                    .ok_or_else(|| Error::Schema(format!("missing fine label {l:?}")))
            })
            .collect()
    }

    /// Index of the best fine label; ties go to the label whose category
    /// comes first, then to the earlier label.
    pub fn fine_argmax(&self, scores: &[f64]) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &s) in scores.iter().enumerate() {
            if !s.is_finite() {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) if s > scores[b] || (s == scores[b] && self.groups[i] < self.groups[b]) => Some(i),
                keep => keep,
            };
        }
        best
    }

    /// Index of the highest-scoring fine label inside `category`.
    pub fn top_label_in(&self, category: Category, scores: &[f64]) -> Option<usize> {
        (0..self.labels.len())
            .filter(|&i| self.groups[i] == category && scores[i].is_finite())
            .fold(None, |best, i| match best {
                Some(b) if scores[b] >= scores[i] => Some(b),
                _ => Some(i),
            })
    }
}

impl Default for CompactionMap {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Group-wise max of named fine-label scores.
pub fn compact_to_7(raw: &BTreeMap<String, f64>, map: &CompactionMap) -> Result<CompactScores> {
    let aligned = map.align(raw)?;
    Ok(map.compact_slice(&aligned))
}

/// Winning category with its color; all-sentinel input falls back to Neutral.
pub fn pick_category<'a>(scores: &CompactScores, colors: &'a ColorMap) -> (Category, &'a ColorEntry) {
    let category = scores.argmax().unwrap_or(Category::FALLBACK);
    (category, colors.get(category))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn named(map: &CompactionMap, values: &[f64]) -> BTreeMap<String, f64> {
        map.labels().iter().cloned().zip(values.iter().copied()).collect()
    }

    #[test]
    fn builtin_map_is_valid() {
        let map = CompactionMap::builtin();
        assert_eq!(map.len(), FINE_LABEL_COUNT);
        assert_eq!(map.category_of("tired"), Some(Category::Tired));
        assert_eq!(map.category_of("pissed off"), Some(Category::Anger));
        let back = CompactionMap::from_json(&map.to_json()).unwrap();
        assert_eq!(back, map);
    }

    #[test]
    fn single_max_at_joy_label_wins() {
        let map = CompactionMap::builtin();
        let mut v = vec![0.0; 40];
        let happy = map.index_of("happy").unwrap();
        v[happy] = 3.5;
        let compact = compact_to_7(&named(&map, &v), &map).unwrap();
        assert_eq!(compact.get(Category::Joy), 3.5);
        assert_eq!(compact.argmax(), Some(Category::Joy));
    }

    #[test]
    fn all_equal_scores_tie_to_joy() {
        let map = CompactionMap::builtin();
        let compact = compact_to_7(&named(&map, &[0.3; 40]), &map).unwrap();
        for c in Category::ALL {
            assert_eq!(compact.get(c), 0.3);
        }
        assert_eq!(compact.argmax(), Some(Category::Joy));
    }

    #[test]
    fn group_max_matches_brute_force_grouping() {
        let map = CompactionMap::builtin();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let v: Vec<f64> = (0..40).map(|_| rng.random_range(-3.0..3.0)).collect();
            let compact = compact_to_7(&named(&map, &v), &map).unwrap();
            for c in Category::ALL {
                let mut expected = f64::NEG_INFINITY;
                for (label, group) in map.iter() {
                    if group == c {
                        let s = v[map.index_of(label).unwrap()];
                        if s > expected {
                            expected = s;
                        }
                    }
                }
                assert_eq!(compact.get(c), expected);
            }
        }
    }

    #[test]
    fn missing_and_extra_labels_are_named() {
        let map = CompactionMap::builtin();
        let mut raw = named(&map, &[0.0; 40]);
        raw.remove("sleepy");
        let err = compact_to_7(&raw, &map).unwrap_err().to_string();
        assert!(err.contains("sleepy"), "{err}");

        let mut raw = named(&map, &[0.0; 40]);
        raw.insert("grumpy".into(), 1.0);
        let err = compact_to_7(&raw, &map).unwrap_err().to_string();
        assert!(err.contains("grumpy"), "{err}");
    }

    #[test]
    fn pick_category_cases() {
        let colors = ColorMap::default();
        let mut s = CompactScores([0.0; 7]);
        s.set(Category::Joy, 2.0);
        let (c, e) = pick_category(&s, &colors);
        assert_eq!((c, e.name.as_str()), (Category::Joy, "yellow"));

        let (c, e) = pick_category(&CompactScores::sentinel(), &colors);
        assert_eq!((c, e.name.as_str()), (Category::Neutral, "grey"));

        let mut s = CompactScores([0.0; 7]);
        s.set(Category::Joy, 1.000);
        s.set(Category::Tired, 1.001);
        let (c, e) = pick_category(&s, &colors);
        assert_eq!((c, e.name.as_str()), (Category::Tired, "purple"));
    }

    #[test]
    fn neutral_may_be_empty_but_others_may_not() {
        let map = CompactionMap::builtin();
        let mut groups: BTreeMap<String, Category> = map.iter().map(|(l, c)| (l.to_owned(), c)).collect();
        for c in groups.values_mut() {
            if *c == Category::Neutral {
                *c = Category::Joy;
            }
        }
        let no_neutral = CompactionMap::new("x", groups.clone()).unwrap();
        let compact = no_neutral.compact_slice(&[0.0; 40]);
        assert_eq!(compact.get(Category::Neutral), f64::NEG_INFINITY);

        for c in groups.values_mut() {
            if *c == Category::Fear {
                *c = Category::Joy;
            }
        }
        let err = CompactionMap::new("x", groups).unwrap_err().to_string();
        assert!(err.contains("Fear"), "{err}");
    }

    #[test]
    fn color_map_rejects_duplicates_and_gaps() {
        let mut entries: BTreeMap<Category, ColorEntry> =
            Category::ALL.iter().map(|&c| (c, ColorMap::default().get(c).clone())).collect();
        entries.get_mut(&Category::Fear).unwrap().hex = "#ffd700".into();
        assert!(ColorMap::new(entries.clone()).is_err());
        entries.remove(&Category::Fear);
        assert!(ColorMap::new(entries).is_err());
        assert!(ColorMap::from_json(&ColorMap::default().to_json()).is_ok());
    }

    #[test]
    fn compact_scores_wire_form_keeps_sentinel() {
        let mut s = CompactScores([0.25; 7]);
        s.set(Category::Neutral, CompactScores::SENTINEL);
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"Neutral\":null"), "{json}");
        let back: CompactScores = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
