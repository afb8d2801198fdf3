//! Dense storage indexed by integer sites, growing in both directions.

/// A table over a contiguous range of sites `first..first + len`.
///
/// Reads outside the stored range return `None`; writes grow the range and
/// fill the gap with `T::default()`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SiteTable<T> {
    first: i64,
    items: Vec<T>,
}

impl<T> Default for SiteTable<T> {
    fn default() -> Self {
        Self {
            first: 0,
            items: Vec::new(),
        }
    }
}

impl<T: Clone + Default> SiteTable<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(first: i64, items: Vec<T>) -> Self {
        Self { first, items }
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    /// First stored site, if any.
    pub fn first(&self) -> Option<i64> {
        (!self.items.is_empty()).then_some(self.first)
    }

    /// Last stored site, if any.
    pub fn last(&self) -> Option<i64> {
        (!self.items.is_empty()).then(|| self.first + self.items.len() as i64 - 1)
    }

    pub fn get(&self, site: i64) -> Option<&T> {
        let idx = site.checked_sub(self.first)?;
        if idx < 0 {
            return None;
        }
        self.items.get(idx as usize)
    }

    /// Value at `site`, or the default outside the stored range.
    pub fn get_or_default(&self, site: i64) -> T {
        self.get(site).cloned().unwrap_or_default()
    }

    pub fn get_mut(&mut self, site: i64) -> &mut T {
        self.ensure(site);
        let idx = (site - self.first) as usize;
        &mut self.items[idx]
    }

    fn ensure(&mut self, site: i64) {
        if self.items.is_empty() {
            self.first = site;
            self.items.push(T::default());
            return;
        }
        if site < self.first {
            // Grow geometrically at the front so repeated extensions stay amortized O(1).
            let need = (self.first - site) as usize;
            let grow = need.max(self.items.len() / 2).max(8);
            self.items
                .splice(0..0, std::iter::repeat_n(T::default(), grow));
            self.first -= grow as i64;
        } else {
            let idx = (site - self.first) as usize;
            if idx >= self.items.len() {
                self.items.resize(idx + 1, T::default());
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &T)> {
        self.items
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.first + i as i64, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grows_both_ways() {
        let mut t: SiteTable<u32> = SiteTable::new();
        *t.get_mut(3) = 7;
        *t.get_mut(-4) = 1;
        *t.get_mut(5) = 2;
        assert_eq!(t.get_or_default(3), 7);
        assert_eq!(t.get_or_default(-4), 1);
        assert_eq!(t.get_or_default(5), 2);
        assert_eq!(t.get_or_default(0), 0);
        assert_eq!(t.get_or_default(100), 0);
        assert!(t.first().unwrap() <= -4);
        assert_eq!(t.last(), Some(5));
        let sum: u32 = t.iter().map(|(_, v)| *v).sum();
        assert_eq!(sum, 10);
    }
}
