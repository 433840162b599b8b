//! Finitely supported rational vectors.
//!
//! A `QVec` is a finite map coordinate -> nonzero rational; it is the dense
//! element type of every Banach presentation in this crate. All vector
//! operations are exact.

use std::collections::BTreeMap;
use std::fmt;

use crate::rat::Rat;

#[derive(Clone, PartialEq, Eq, Default, Hash)]
pub struct QVec(BTreeMap<u64, Rat>);

impl QVec {
    pub fn zero() -> QVec {
        QVec(BTreeMap::new())
    }

    /// Standard basis vector e_i.
    pub fn unit(i: u64) -> QVec {
        let mut m = BTreeMap::new();
        m.insert(i, Rat::one());
        QVec(m)
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (u64, Rat)>) -> QVec {
        let mut m = BTreeMap::new();
        for (i, q) in entries {
            if !q.is_zero() {
                m.insert(i, q);
            }
        }
        QVec(m)
    }

    /// Coordinates 0..vals.len() from a plain list.
    pub fn from_slice(vals: &[Rat]) -> QVec {
        QVec::from_entries(vals.iter().cloned().enumerate().map(|(i, q)| (i as u64, q)))
    }

    pub fn get(&self, i: u64) -> Rat {
        self.0.get(&i).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn set(&mut self, i: u64, q: Rat) {
        if q.is_zero() {
            self.0.remove(&i);
        } else {
            self.0.insert(i, q);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = u64> + '_ {
        self.0.keys().cloned()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &Rat)> {
        self.0.iter().map(|(i, q)| (*i, q))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_support(&self) -> Option<u64> {
        self.0.keys().next_back().cloned()
    }

    pub fn add(&self, other: &QVec) -> QVec {
        let mut out = self.0.clone();
        for (i, q) in other.0.iter() {
            let v = out.get(i).map(|a| a + q).unwrap_or_else(|| q.clone());
            if v.is_zero() {
                out.remove(i);
            } else {
                out.insert(*i, v);
            }
        }
        QVec(out)
    }

    pub fn neg(&self) -> QVec {
        QVec(self.0.iter().map(|(i, q)| (*i, -q)).collect())
    }

    pub fn sub(&self, other: &QVec) -> QVec {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Rat) -> QVec {
        if c.is_zero() {
            return QVec::zero();
        }
        QVec(self.0.iter().map(|(i, q)| (*i, c * q)).collect())
    }

    /// Reindex every coordinate through `f` (must be injective on the support).
    pub fn map_support(&self, f: impl Fn(u64) -> u64) -> QVec {
        let out: BTreeMap<u64, Rat> = self.0.iter().map(|(i, q)| (f(*i), q.clone())).collect();
        assert_eq!(out.len(), self.0.len(), "support reindexing must be injective");
        QVec(out)
    }

    pub fn l1_norm(&self) -> Rat {
        self.0.values().fold(Rat::zero(), |acc, q| acc + q.abs())
    }

    pub fn sup_norm(&self) -> Rat {
        self.0.values().fold(Rat::zero(), |acc, q| acc.max(q.abs()))
    }
}

impl fmt::Display for QVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (k, (i, q)) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{i}:{q}")?;
        }
        write!(f, "]")
    }
}

impl fmt::Debug for QVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
