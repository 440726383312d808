//! Domain types shared by both schemes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bits::BitBlock;
use crate::error::{integrity, param, Error, Result};
use crate::rng::{Pad, SeededStream};
use crate::subset::{binomial, SubsetId, MAX_USERS};

/// Largest user count the decentralized simulator accepts (it keeps
/// `2^K` fragments per file and `2^K - 1` keys).
pub const MAX_DECENTRALIZED_USERS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Centralized,
    Decentralized,
}

impl core::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centralized" => Ok(Scheme::Centralized),
            "decentralized" => Ok(Scheme::Decentralized),
            other => Err(param(format!("unknown scheme {other:?}"))),
        }
    }
}

impl core::fmt::Display for Scheme {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Scheme::Centralized => "centralized",
            Scheme::Decentralized => "decentralized",
        })
    }
}

/// Placement parameter. Centralized `t` counts the users sharing each
/// subfile; decentralized `t` is the data share of the cache, `M_D`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Layout {
    Centralized { t: usize },
    Decentralized { t: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub files: usize,
    pub users: usize,
    pub file_bits: usize,
    pub layout: Layout,
    pub seed: u64,
}

impl SystemParams {
    pub fn centralized(
        files: usize,
        users: usize,
        file_bits: usize,
        t: usize,
        seed: u64,
    ) -> Result<Self> {
        let p = SystemParams {
            files,
            users,
            file_bits,
            layout: Layout::Centralized { t },
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn decentralized(
        files: usize,
        users: usize,
        file_bits: usize,
        t: f64,
        seed: u64,
    ) -> Result<Self> {
        let p = SystemParams {
            files,
            users,
            file_bits,
            layout: Layout::Decentralized { t },
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    /// Decentralized parameters from the cache size `M`, `t = N(M-1)/(N-1)`.
    pub fn decentralized_from_cache(
        files: usize,
        users: usize,
        file_bits: usize,
        m: f64,
        seed: u64,
    ) -> Result<Self> {
        if files < 2 {
            return Err(param("decentralized placement needs at least 2 files"));
        }
        if m.is_nan() || m <= 1.0 {
            return Err(Error::Infeasible(format!(
                "decentralized data placement needs M > 1, got {m}"
            )));
        }
        let t = if m == files as f64 {
            files as f64
        } else {
            files as f64 * (m - 1.0) / (files as f64 - 1.0)
        };
        Self::decentralized(files, users, file_bits, t, seed)
    }

    pub fn scheme(&self) -> Scheme {
        match self.layout {
            Layout::Centralized { .. } => Scheme::Centralized,
            Layout::Decentralized { .. } => Scheme::Decentralized,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.files == 0 || self.users == 0 || self.file_bits == 0 {
            return Err(param("N, K and F must all be at least 1"));
        }
        if u32::try_from(self.file_bits).is_err() {
            return Err(param("file size must fit in 32 bits"));
        }
        match self.layout {
            Layout::Centralized { t } => {
                if self.users > MAX_USERS {
                    return Err(param(format!("at most {MAX_USERS} users can be simulated")));
                }
                if t > self.users {
                    return Err(param(format!("t = {t} exceeds K = {}", self.users)));
                }
                if self.files < 2 && t > 0 {
                    return Err(param("t > 0 needs at least 2 files"));
                }
                let divisor =
                    binomial(self.users, t).ok_or_else(|| param("C(K, t) overflows 128 bits"))?;
                if !(self.file_bits as u128).is_multiple_of(divisor) {
                    return Err(Error::Indivisible {
                        file_bits: self.file_bits,
                        divisor,
                    });
                }
            }
            Layout::Decentralized { t } => {
                if self.users > MAX_DECENTRALIZED_USERS {
                    return Err(param(format!(
                        "at most {MAX_DECENTRALIZED_USERS} users in the decentralized simulator"
                    )));
                }
                if self.files < 2 {
                    return Err(param("decentralized placement needs at least 2 files"));
                }
                if t.is_nan() || t <= 0.0 {
                    return Err(Error::Infeasible(format!(
                        "decentralized data placement needs t > 0 (M > 1), got t = {t}"
                    )));
                }
                if t > self.files as f64 {
                    return Err(param(format!("t = {t} exceeds N = {}", self.files)));
                }
            }
        }
        Ok(())
    }

    /// Normalized cache size `M`.
    pub fn cache_size(&self) -> f64 {
        let n = self.files as f64;
        match self.layout {
            Layout::Centralized { t } => {
                if t == self.users {
                    n
                } else {
                    (n - 1.0) * t as f64 / self.users as f64 + 1.0
                }
            }
            Layout::Decentralized { t } => {
                if t == n {
                    n
                } else {
                    (n - 1.0) * t / n + 1.0
                }
            }
        }
    }

    /// Per-user cache budget `M F` in bits.
    pub fn budget_bits(&self) -> f64 {
        match self.layout {
            // F (K + (N-1) t) / K is an integer whenever C(K,t) divides F.
            Layout::Centralized { t } => {
                let num = self.file_bits as u128 * (self.users + (self.files - 1) * t) as u128;
                (num / self.users as u128) as f64
            }
            Layout::Decentralized { .. } => self.cache_size() * self.file_bits as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileLibrary {
    files: Vec<BitBlock>,
}

impl FileLibrary {
    pub fn new(files: Vec<BitBlock>) -> Result<Self> {
        let Some(first) = files.first() else {
            return Err(param("library needs at least one file"));
        };
        if files.iter().any(|f| f.len() != first.len()) {
            return Err(param("all files must have the same length"));
        }
        Ok(FileLibrary { files })
    }

    /// `files` independent uniform files of `file_bits` bits.
    pub fn random(files: usize, file_bits: usize, stream: &mut SeededStream) -> Self {
        FileLibrary {
            files: (0..files)
                .map(|_| stream.uniform_block(file_bits))
                .collect(),
        }
    }

    /// File `n`, 1-based.
    pub fn file(&self, n: usize) -> &BitBlock {
        &self.files[n - 1]
    }

    pub fn files(&self) -> &[BitBlock] {
        &self.files
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn file_bits(&self) -> usize {
        self.files[0].len()
    }

    pub fn check_matches(&self, params: &SystemParams) -> Result<()> {
        if self.len() != params.files || self.file_bits() != params.file_bits {
            return Err(param(format!(
                "library is {} x {} bits, parameters expect {} x {}",
                self.len(),
                self.file_bits(),
                params.files,
                params.file_bits
            )));
        }
        Ok(())
    }
}

/// Requested file per user, 1-based on both sides.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DemandVector(Vec<usize>);

impl DemandVector {
    pub fn new(demand: Vec<usize>, files: usize) -> Result<Self> {
        if let Some(bad) = demand.iter().find(|&&d| d == 0 || d > files) {
            return Err(param(format!("demanded file {bad} outside 1..={files}")));
        }
        Ok(DemandVector(demand))
    }

    /// All-distinct requests as far as possible: `1, 2, .., min(N,K)`,
    /// then cycling.
    pub fn worst_case(files: usize, users: usize) -> Self {
        let span = files.min(users).max(1);
        DemandVector((0..users).map(|k| k % span + 1).collect())
    }

    /// Every demand vector in `[N]^K`, in lexicographic order.
    pub fn all(files: usize, users: usize) -> impl Iterator<Item = DemandVector> {
        let total = (files as u64).pow(users as u32);
        (0..total).map(move |mut idx| {
            let mut d = alloc::vec![1; users];
            for slot in d.iter_mut().rev() {
                *slot = (idx % files as u64) as usize + 1;
                idx /= files as u64;
            }
            DemandVector(d)
        })
    }

    /// File requested by user `k` (1-based).
    pub fn of(&self, k: usize) -> usize {
        self.0[k - 1]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_matches(&self, params: &SystemParams) -> Result<()> {
        if self.len() != params.users {
            return Err(param(format!(
                "demand has {} entries for {} users",
                self.len(),
                params.users
            )));
        }
        if let Some(bad) = self.0.iter().find(|&&d| d == 0 || d > params.files) {
            return Err(param(format!(
                "demanded file {bad} outside 1..={}",
                params.files
            )));
        }
        Ok(())
    }
}

/// Data piece `W_{file, subset}`: the part of a file tied to a user subset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubfileId {
    pub file: usize,
    pub subset: SubsetId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserCache {
    pub user: usize,
    pub data: BTreeMap<SubfileId, BitBlock>,
    pub keys: BTreeMap<SubsetId, BitBlock>,
    pub budget_bits: f64,
}

impl UserCache {
    pub fn new(user: usize, budget_bits: f64) -> Self {
        UserCache {
            user,
            data: BTreeMap::new(),
            keys: BTreeMap::new(),
            budget_bits,
        }
    }

    pub fn data_bits(&self) -> u64 {
        self.data.values().map(|b| b.len() as u64).sum()
    }

    pub fn key_bits(&self) -> u64 {
        self.keys.values().map(|b| b.len() as u64).sum()
    }

    pub fn total_bits(&self) -> u64 {
        self.data_bits() + self.key_bits()
    }

    pub fn subfile(&self, file: usize, subset: SubsetId) -> Result<&BitBlock> {
        self.data.get(&SubfileId { file, subset }).ok_or_else(|| {
            integrity(format!(
                "user {} does not cache W_{{{file},{subset}}}",
                self.user
            ))
        })
    }

    pub fn key(&self, subset: SubsetId) -> Result<&BitBlock> {
        self.keys
            .get(&subset)
            .ok_or_else(|| integrity(format!("user {} holds no key K_{subset}", self.user)))
    }
}

/// Server-side copy of every key, by the user subset sharing it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyRegistry {
    keys: BTreeMap<SubsetId, Pad>,
}

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, subset: SubsetId, pad: Pad) -> Option<Pad> {
        self.keys.insert(subset, pad)
    }

    pub fn get(&self, subset: SubsetId) -> Option<&Pad> {
        self.keys.get(&subset)
    }

    pub fn get_mut(&mut self, subset: SubsetId) -> Option<&mut Pad> {
        self.keys.get_mut(&subset)
    }

    pub fn remove(&mut self, subset: SubsetId) -> Option<Pad> {
        self.keys.remove(&subset)
    }

    pub fn iter(&self) -> impl Iterator<Item = (SubsetId, &Pad)> {
        self.keys.iter().map(|(s, p)| (*s, p))
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn total_bits(&self) -> u64 {
        self.keys.values().map(|p| p.len() as u64).sum()
    }

    pub(crate) fn pad(&self, subset: SubsetId) -> Result<&Pad> {
        self.get(subset)
            .ok_or_else(|| integrity(format!("no key registered for subset {subset}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PayloadRecord {
    pub subset: SubsetId,
    pub ciphertext: BitBlock,
}

/// The multicast transmission, exactly as an eavesdropper on the shared
/// link sees it.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeliveryPayload {
    pub records: Vec<PayloadRecord>,
}

impl DeliveryPayload {
    pub fn total_bits(&self) -> u64 {
        self.records.iter().map(|r| r.ciphertext.len() as u64).sum()
    }

    /// Transmitted bits normalized by the file size.
    pub fn rate(&self, file_bits: usize) -> f64 {
        self.total_bits() as f64 / file_bits as f64
    }

    pub fn record(&self, subset: SubsetId) -> Option<&PayloadRecord> {
        self.records.iter().find(|r| r.subset == subset)
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub(crate) fn push(&mut self, subset: SubsetId, ciphertext: BitBlock) -> Result<()> {
        if self.records.iter().any(|r| r.subset == subset) {
            return Err(integrity(format!(
                "subset {subset} appears twice in the payload"
            )));
        }
        self.records.push(PayloadRecord { subset, ciphertext });
        Ok(())
    }
}
