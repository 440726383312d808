//! User subsets and their canonical ordering.
//!
//! A [`SubsetId`] is a set of 1-based user indices stored as a bitmask
//! (user `k` is bit `k - 1`), so simulated systems are limited to 64 users.
//! Subsets order lexicographically by their sorted member lists, which is
//! also the order [`enumerate_subsets`] produces.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

pub const MAX_USERS: usize = 64;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "Vec<usize>", try_from = "Vec<usize>")]
pub struct SubsetId(u64);

impl SubsetId {
    pub const EMPTY: SubsetId = SubsetId(0);

    pub fn from_mask(mask: u64) -> Self {
        SubsetId(mask)
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn from_members<I: IntoIterator<Item = usize>>(members: I) -> Result<Self> {
        let mut mask = 0u64;
        for k in members {
            if k == 0 || k > MAX_USERS {
                return Err(param(alloc::format!(
                    "user index {k} outside 1..={MAX_USERS}"
                )));
            }
            mask |= 1 << (k - 1);
        }
        Ok(SubsetId(mask))
    }

    pub fn singleton(user: usize) -> Self {
        debug_assert!((1..=MAX_USERS).contains(&user));
        SubsetId(1 << (user - 1))
    }

    /// All of `{1..users}`.
    pub fn full(users: usize) -> Self {
        debug_assert!(users <= MAX_USERS);
        if users == MAX_USERS {
            SubsetId(u64::MAX)
        } else {
            SubsetId((1u64 << users) - 1)
        }
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, user: usize) -> bool {
        (1..=MAX_USERS).contains(&user) && self.0 >> (user - 1) & 1 == 1
    }

    pub fn with(self, user: usize) -> Self {
        SubsetId(self.0 | SubsetId::singleton(user).0)
    }

    pub fn without(self, user: usize) -> Self {
        SubsetId(self.0 & !SubsetId::singleton(user).0)
    }

    pub fn is_subset_of(self, other: SubsetId) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersects(self, other: SubsetId) -> bool {
        self.0 & other.0 != 0
    }

    /// Members in ascending order.
    pub fn members(self) -> Members {
        Members(self.0)
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.members().collect()
    }

    /// Position of this subset in the lexicographic enumeration of all
    /// subsets of `{1..users}` with the same size.
    pub fn rank(self, users: usize) -> Result<u128> {
        let size = self.len();
        if size > users || (users < MAX_USERS && self.0 >> users != 0) {
            return Err(param("subset is not contained in the user set"));
        }
        let mut rank = 0u128;
        let mut prev = 0usize;
        for (i, c) in self.members().enumerate() {
            for j in prev + 1..c {
                rank += binomial(users - j, size - i - 1).ok_or_else(overflow)?;
            }
            prev = c;
        }
        Ok(rank)
    }

    /// Compact label such as `123` or `∅`; members above 9 are comma separated.
    pub fn label(self) -> String {
        if self.is_empty() {
            return String::from("∅");
        }
        let members = self.to_vec();
        let sep = if members.iter().any(|&m| m > 9) {
            ","
        } else {
            ""
        };
        let parts: Vec<String> = members.iter().map(|m| alloc::format!("{m}")).collect();
        parts.join(sep)
    }
}

pub struct Members(u64);

impl Iterator for Members {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let low = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(low + 1)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Members {}

impl Ord for SubsetId {
    fn cmp(&self, other: &Self) -> Ordering {
        let mut a = self.members();
        let mut b = other.members();
        loop {
            match (a.next(), b.next()) {
                (None, None) => return Ordering::Equal,
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
                (Some(x), Some(y)) if x != y => return x.cmp(&y),
                _ => {}
            }
        }
    }
}

impl PartialOrd for SubsetId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for SubsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members()).finish()
    }
}

impl fmt::Display for SubsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl From<SubsetId> for Vec<usize> {
    fn from(s: SubsetId) -> Self {
        s.to_vec()
    }
}

impl TryFrom<Vec<usize>> for SubsetId {
    type Error = crate::Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        let s = SubsetId::from_members(v.iter().copied())?;
        if s.len() != v.len() {
            return Err(param("duplicate member in subset"));
        }
        Ok(s)
    }
}

fn overflow() -> crate::Error {
    param("binomial coefficient overflows 128 bits")
}

/// `C(n, k)`, or `None` when it does not fit in 128 bits.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        let num = (n - i) as u128;
        let den = (i + 1) as u128;
        let g = gcd(acc, den);
        let (a, d) = (acc / g, den / g);
        acc = a.checked_mul(num / d)?;
    }
    Some(acc)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Every `size`-subset of `{1..users}` in lexicographic order.
pub fn enumerate_subsets(users: usize, size: usize) -> Result<Vec<SubsetId>> {
    if size > users {
        return Err(param(alloc::format!(
            "subset size {size} exceeds user count {users}"
        )));
    }
    if users > MAX_USERS {
        return Err(param(alloc::format!(
            "at most {MAX_USERS} users are supported"
        )));
    }
    let count = binomial(users, size).ok_or_else(overflow)?;
    let count = usize::try_from(count).map_err(|_| param("too many subsets to enumerate"))?;
    let mut out = Vec::with_capacity(count);
    let mut current: Vec<usize> = (1..=size).collect();
    loop {
        out.push(SubsetId::from_members(current.iter().copied())?);
        // Rightmost position that can still advance.
        let Some(i) = (0..size)
            .rev()
            .find(|&i| current[i] < users - (size - 1 - i))
        else {
            break;
        };
        current[i] += 1;
        for j in i + 1..size {
            current[j] = current[j - 1] + 1;
        }
    }
    Ok(out)
}

/// Every nonempty subset of `{1..users}`, by size descending then
/// lexicographically.
pub fn nonempty_subsets_by_size_desc(users: usize) -> Result<Vec<SubsetId>> {
    let mut out = Vec::new();
    for size in (1..=users).rev() {
        out.extend(enumerate_subsets(users, size)?);
    }
    Ok(out)
}
