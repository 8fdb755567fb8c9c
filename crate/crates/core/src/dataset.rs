//! Interaction-log ingestion, k-core filtering and leave-one-out splitting.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Catalog, CategoryMap, ItemId, UserSequence};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: u64,
    pub item: String,
    pub timestamp: i64,
}

/// Parsed interaction rows, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InteractionLog {
    pub rows: Vec<Interaction>,
    /// Rows that could not be parsed.
    pub malformed: usize,
    pub warnings: Vec<String>,
}

impl InteractionLog {
    pub fn from_rows(rows: Vec<Interaction>) -> Self {
        InteractionLog {
            rows,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn num_users(&self) -> usize {
        self.rows.iter().map(|r| r.user).collect::<BTreeSet<_>>().len()
    }

    pub fn num_items(&self) -> usize {
        self.rows.iter().map(|r| r.item.as_str()).collect::<BTreeSet<_>>().len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Delimiter {
    Tab,
    Comma,
    /// MovieLens `ratings.dat` style.
    DoubleColon,
    /// Per line: `::`, then tab, then comma.
    #[default]
    Auto,
}

impl Delimiter {
    fn split(self, line: &str) -> Vec<&str> {
        let sep = match self {
            Delimiter::Tab => "\t",
            Delimiter::Comma => ",",
            Delimiter::DoubleColon => "::",
            Delimiter::Auto => {
                if line.contains("::") {
                    "::"
                } else if line.contains('\t') {
                    "\t"
                } else {
                    ","
                }
            }
        };
        line.split(sep).map(str::trim).collect()
    }
}

/// Reads `user<SEP>item<SEP>timestamp` rows. A four-column row is read as
/// `user item rating timestamp` and the rating is ignored. Lines starting
/// with `#` are comments.
pub fn load_interactions(path: impl AsRef<Path>, delimiter: Delimiter) -> Result<InteractionLog> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let log = parse_interactions(&text, delimiter);
    if log.rows.is_empty() {
        return Err(Error::ZeroValidRows(path.to_path_buf()));
    }
    Ok(log)
}

pub fn parse_interactions(text: &str, delimiter: Delimiter) -> InteractionLog {
    let mut log = InteractionLog::default();
    let mut first = true;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = delimiter.split(line);
        if first {
            first = false;
            if fields[0].parse::<u64>().is_err() {
                // header
                continue;
            }
        }
        match parse_row(&fields) {
            Some(row) => log.rows.push(row),
            None => {
                log.malformed += 1;
                log.warnings
                    .push(format!("line {}: malformed row {:?}", lineno + 1, line));
            }
        }
    }
    log
}

fn parse_row(fields: &[&str]) -> Option<Interaction> {
    let (user, item, ts) = match fields {
        [u, i, t] => (u, i, t),
        [u, i, _rating, t] => (u, i, t),
        _ => return None,
    };
    if item.is_empty() {
        return None;
    }
    Some(Interaction {
        user: user.parse().ok()?,
        item: item.to_string(),
        timestamp: ts.parse().ok()?,
    })
}

/// Iteratively drops users and items with fewer than `k` interactions until
/// every survivor has at least `k`. Row order is preserved.
pub fn k_core_filter(log: &InteractionLog, k: usize) -> Result<InteractionLog> {
    if k == 0 {
        return Err(Error::InvalidConfig("k-core k must be >= 1".into()));
    }
    let mut rows: Vec<&Interaction> = log.rows.iter().collect();
    loop {
        let mut user_counts: HashMap<u64, usize> = HashMap::new();
        let mut item_counts: HashMap<&str, usize> = HashMap::new();
        for r in &rows {
            *user_counts.entry(r.user).or_default() += 1;
            *item_counts.entry(r.item.as_str()).or_default() += 1;
        }
        let before = rows.len();
        rows.retain(|r| user_counts[&r.user] >= k && item_counts[r.item.as_str()] >= k);
        if rows.len() == before {
            break;
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyAfterFilter(k));
    }
    Ok(InteractionLog {
        rows: rows.into_iter().cloned().collect(),
        malformed: log.malformed,
        warnings: log.warnings.clone(),
    })
}

/// Leave-one-out split with item catalog and (initially empty) category map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub catalog: Catalog,
    pub categories: CategoryMap,
    pub train: BTreeMap<u64, UserSequence>,
    pub validation: BTreeMap<u64, ItemId>,
    pub test: BTreeMap<u64, ItemId>,
}

impl SplitDataset {
    pub fn users(&self) -> impl Iterator<Item = u64> + '_ {
        self.train.keys().copied()
    }

    pub fn max_len(&self) -> usize {
        self.train
            .values()
            .next()
            .map(UserSequence::max_len)
            .unwrap_or(crate::types::DEFAULT_MAX_LEN)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Item occurrence totals over the training sequences.
    pub fn train_popularity(&self) -> Vec<u64> {
        let mut freq = vec![0u64; self.catalog.num_items()];
        for seq in self.train.values() {
            for it in seq.items() {
                freq[it.index()] += 1;
            }
        }
        freq
    }
}

/// Sort key for external ids: numeric ids numerically, then the rest as strings.
fn external_id_key(id: &str) -> (u8, u64, &str) {
    match id.parse::<u64>() {
        Ok(v) => (0, v, id),
        Err(_) => (1, 0, id),
    }
}

/// A user's chronological history with repeated items collapsed onto their
/// most recent occurrence. Timestamp ties keep input order.
pub fn user_histories(log: &InteractionLog) -> BTreeMap<u64, Vec<&str>> {
    let mut by_user: BTreeMap<u64, Vec<(i64, usize, &str)>> = BTreeMap::new();
    for (idx, r) in log.rows.iter().enumerate() {
        by_user
            .entry(r.user)
            .or_default()
            .push((r.timestamp, idx, r.item.as_str()));
    }
    by_user
        .into_iter()
        .map(|(user, mut events)| {
            events.sort_by_key(|&(ts, idx, _)| (ts, idx));
            let mut seen = BTreeSet::new();
            let mut hist: Vec<&str> = events
                .iter()
                .rev()
                .filter(|&&(_, _, item)| seen.insert(item))
                .map(|&(_, _, item)| item)
                .collect();
            hist.reverse();
            (user, hist)
        })
        .collect()
}

/// Last item to test, second-to-last to validation, the rest (most recent
/// `max_len`) to train.
pub fn leave_one_out_split(log: &InteractionLog, max_len: usize) -> Result<SplitDataset> {
    if max_len == 0 {
        return Err(Error::InvalidConfig("max_len must be >= 1".into()));
    }
    let mut labels: Vec<&str> = log
        .rows
        .iter()
        .map(|r| r.item.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    labels.sort_by_key(|l| external_id_key(l));
    let index: HashMap<&str, ItemId> = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| (l, ItemId(i as u32)))
        .collect();
    let catalog = Catalog::with_labels(labels.iter().map(|s| s.to_string()).collect())?;

    let mut train = BTreeMap::new();
    let mut validation = BTreeMap::new();
    let mut test = BTreeMap::new();
    for (user, hist) in user_histories(log) {
        if hist.len() < 3 {
            return Err(Error::TooFewInteractions {
                user,
                count: hist.len(),
            });
        }
        let ids: Vec<ItemId> = hist.iter().map(|l| index[l]).collect();
        let n = ids.len();
        let head = &ids[..n - 2];
        let start = head.len().saturating_sub(max_len);
        train.insert(user, UserSequence::new(user, head[start..].to_vec(), max_len)?);
        validation.insert(user, ids[n - 2]);
        test.insert(user, ids[n - 1]);
    }
    let categories = CategoryMap::empty(catalog.num_items());
    Ok(SplitDataset {
        catalog,
        categories,
        train,
        validation,
        test,
    })
}

/// Reads `item<TAB>label1|label2|...` rows. Items absent from the file get
/// no categories; repeated rows for an item are unioned.
pub fn load_categories(path: impl AsRef<Path>, catalog: &Catalog) -> Result<CategoryMap> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rows: Vec<(String, Vec<String>)> = text
        .lines()
        .filter(|line| !line.starts_with('#'))
        .filter_map(|line| {
            let (item, labels) = line.trim_end_matches('\r').split_once('\t')?;
            let labels = labels
                .split('|')
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect();
            Some((item.trim().to_string(), labels))
        })
        .collect();
    categories_from_rows(catalog, &rows)
}

/// Builds a category map from `(external item id, labels)` rows. Category
/// ids follow sorted label order.
pub fn categories_from_rows(
    catalog: &Catalog,
    rows: &[(String, Vec<String>)],
) -> Result<CategoryMap> {
    let labels: Vec<String> = rows
        .iter()
        .flat_map(|(_, ls)| ls.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let label_id: HashMap<&str, u32> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i as u32))
        .collect();
    let mut categories_of = vec![Vec::new(); catalog.num_items()];
    for (item, ls) in rows {
        if let Some(id) = catalog.lookup(item) {
            categories_of[id.index()].extend(ls.iter().map(|l| label_id[l.as_str()]));
        }
    }
    CategoryMap::new(categories_of, labels)
}
