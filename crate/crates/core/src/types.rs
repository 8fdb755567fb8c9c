//! Domain types shared across the engine.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default model window length.
pub const DEFAULT_MAX_LEN: usize = 50;

/// Dense 0-based index into a [`Catalog`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u32);

impl ItemId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for ItemId {
    fn from(v: u32) -> Self {
        ItemId(v)
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A temporally ordered, duplicate-free interaction history for one user.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSequence")]
pub struct UserSequence {
    user: u64,
    items: Vec<ItemId>,
    max_len: usize,
}

#[derive(Deserialize)]
struct RawSequence {
    user: u64,
    items: Vec<ItemId>,
    max_len: usize,
}

impl TryFrom<RawSequence> for UserSequence {
    type Error = Error;

    fn try_from(raw: RawSequence) -> Result<Self> {
        UserSequence::new(raw.user, raw.items, raw.max_len)
    }
}

impl UserSequence {
    /// Builds a sequence, rejecting duplicates and lengths outside `1..=max_len`.
    pub fn new(user: u64, items: Vec<ItemId>, max_len: usize) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptySequence);
        }
        if items.len() > max_len {
            return Err(Error::InvalidSequence(format!(
                "length {} exceeds max_len {}",
                items.len(),
                max_len
            )));
        }
        if let Some(dup) = first_duplicate(&items) {
            return Err(Error::InvalidSequence(format!("duplicate item {dup}")));
        }
        Ok(UserSequence {
            user,
            items,
            max_len,
        })
    }

    /// Caller guarantees the invariants hold.
    pub(crate) fn from_parts_unchecked(user: u64, items: Vec<ItemId>, max_len: usize) -> Self {
        debug_assert!(!items.is_empty() && items.len() <= max_len);
        debug_assert!(first_duplicate(&items).is_none());
        UserSequence {
            user,
            items,
            max_len,
        }
    }

    /// Appends an item, failing if it is already present or the window is full.
    pub fn push(&mut self, item: ItemId) -> Result<()> {
        if self.contains(item) {
            return Err(Error::InvalidSequence(format!("duplicate item {item}")));
        }
        if self.items.len() >= self.max_len {
            return Err(Error::InvalidSequence(format!(
                "sequence already at max_len {}",
                self.max_len
            )));
        }
        self.items.push(item);
        Ok(())
    }

    pub fn user(&self) -> u64 {
        self.user
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.items.contains(&item)
    }

    pub fn last(&self) -> ItemId {
        *self.items.last().expect("sequence is non-empty")
    }

    /// Same user and window, different items. Validates.
    pub fn with_items(&self, items: Vec<ItemId>) -> Result<Self> {
        UserSequence::new(self.user, items, self.max_len)
    }

    pub fn check_catalog(&self, catalog: &Catalog) -> Result<()> {
        for &item in &self.items {
            catalog.check(item)?;
        }
        Ok(())
    }
}

fn first_duplicate(items: &[ItemId]) -> Option<ItemId> {
    let mut seen = std::collections::HashSet::with_capacity(items.len());
    items.iter().copied().find(|&it| !seen.insert(it))
}

/// The item universe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    num_items: usize,
    #[serde(default)]
    item_labels: Vec<String>,
}

impl Catalog {
    pub fn new(num_items: usize) -> Result<Self> {
        if num_items < 2 {
            return Err(Error::CatalogTooSmall(num_items));
        }
        Ok(Catalog {
            num_items,
            item_labels: Vec::new(),
        })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        let mut catalog = Catalog::new(labels.len())?;
        catalog.item_labels = labels;
        Ok(catalog)
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn labels(&self) -> &[String] {
        &self.item_labels
    }

    /// External id of an item, or its dense index when unlabeled.
    pub fn label(&self, item: ItemId) -> String {
        self.item_labels
            .get(item.index())
            .cloned()
            .unwrap_or_else(|| item.0.to_string())
    }

    pub fn lookup(&self, label: &str) -> Option<ItemId> {
        if self.item_labels.is_empty() {
            return label
                .parse::<u32>()
                .ok()
                .filter(|&v| (v as usize) < self.num_items)
                .map(ItemId);
        }
        self.item_labels
            .iter()
            .position(|l| l == label)
            .map(|p| ItemId(p as u32))
    }

    pub fn check(&self, item: ItemId) -> Result<()> {
        if item.index() >= self.num_items {
            return Err(Error::ItemOutOfRange {
                item: item.0,
                num_items: self.num_items,
            });
        }
        Ok(())
    }

    pub fn items(&self) -> impl Iterator<Item = ItemId> {
        (0..self.num_items as u32).map(ItemId)
    }
}

/// Category labels attached to each catalog item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryMap {
    categories_of: Vec<Vec<u32>>,
    num_categories: usize,
    category_labels: Vec<String>,
}

impl CategoryMap {
    /// A map where every item has no categories.
    pub fn empty(num_items: usize) -> Self {
        CategoryMap {
            categories_of: vec![Vec::new(); num_items],
            num_categories: 0,
            category_labels: Vec::new(),
        }
    }

    /// `categories_of[item]` lists category ids; they are sorted and deduplicated here.
    pub fn new(mut categories_of: Vec<Vec<u32>>, category_labels: Vec<String>) -> Result<Self> {
        let num_categories = category_labels.len();
        for cats in &mut categories_of {
            cats.sort_unstable();
            cats.dedup();
            if let Some(&bad) = cats.iter().find(|&&c| c as usize >= num_categories) {
                return Err(Error::InvalidSetting(format!(
                    "category id {bad} out of range for {num_categories} categories"
                )));
            }
        }
        Ok(CategoryMap {
            categories_of,
            num_categories,
            category_labels,
        })
    }

    pub fn num_items(&self) -> usize {
        self.categories_of.len()
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    pub fn labels(&self) -> &[String] {
        &self.category_labels
    }

    pub fn categories(&self, item: ItemId) -> &[u32] {
        self.categories_of
            .get(item.index())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn has(&self, item: ItemId, category: u32) -> bool {
        self.categories(item).binary_search(&category).is_ok()
    }

    /// True when the two items share no category.
    pub fn disjoint(&self, a: ItemId, b: ItemId) -> bool {
        let cb = self.categories(b);
        !self
            .categories(a)
            .iter()
            .any(|c| cb.binary_search(c).is_ok())
    }

    pub fn items_in(&self, category: u32) -> Vec<ItemId> {
        self.categories_of
            .iter()
            .enumerate()
            .filter(|(_, cats)| cats.binary_search(&category).is_ok())
            .map(|(i, _)| ItemId(i as u32))
            .collect()
    }

    pub fn category_id(&self, label: &str) -> Option<u32> {
        self.category_labels
            .iter()
            .position(|l| l == label)
            .map(|p| p as u32)
    }
}
