//! Centralized secure coded caching.
//!
//! Each file is cut into `C(K,t)` equal subfiles, one per `t`-subset `τ`
//! of users, and user `k` caches every subfile whose `τ` contains `k`.
//! One key per `(t+1)`-subset `S` is stored by the members of `S`. For a
//! demand `d`, the server multicasts, for every `S`,
//!
//! ```text
//! K_S ⊕ (⊕_{k ∈ S} W_{d_k, S \ {k}})
//! ```
//!
//! Each member of `S` caches all but one of the XOR-ed subfiles and the key,
//! so it can strip them and keep the subfile it is missing.

use alloc::format;
use alloc::vec::Vec;

use crate::bits::BitBlock;
use crate::error::{integrity, param, Error, Result};
use crate::model::{
    DeliveryPayload, DemandVector, FileLibrary, KeyRegistry, Layout, SubfileId, SystemParams,
    UserCache,
};
use crate::rng::KeySource;
use crate::subset::{binomial, enumerate_subsets, SubsetId};

/// `M = (N-1) t / K + 1`.
pub fn cache_size_from_t(files: usize, users: usize, t: usize) -> Result<f64> {
    check_t(files, users, t)?;
    if t == users {
        return Ok(files as f64);
    }
    Ok((files as f64 - 1.0) * t as f64 / users as f64 + 1.0)
}

/// Inverse of [`cache_size_from_t`]: `t = K (M-1) / (N-1)`, not rounded.
pub fn t_from_cache_size(files: usize, users: usize, m: f64) -> Result<f64> {
    if files < 2 {
        return Err(param("t is undetermined for a single file"));
    }
    if m < 1.0 {
        return Err(infeasible_m());
    }
    if m > files as f64 {
        return Err(param(format!("M = {m} exceeds N = {files}")));
    }
    Ok(users as f64 * (m - 1.0) / (files as f64 - 1.0))
}

/// `(M_D, M_K) = (N t / K, 1 - t / K)`.
pub fn memory_split(files: usize, users: usize, t: usize) -> Result<(f64, f64)> {
    check_t(files, users, t)?;
    let frac = t as f64 / users as f64;
    Ok((files as f64 * frac, 1.0 - frac))
}

fn check_t(files: usize, users: usize, t: usize) -> Result<()> {
    if files == 0 || users == 0 {
        return Err(param("N and K must be at least 1"));
    }
    if t > users {
        return Err(param(format!("t = {t} outside 0..={users}")));
    }
    if files < 2 && t > 0 {
        return Err(param("t > 0 needs at least 2 files"));
    }
    Ok(())
}

pub(crate) fn infeasible_m() -> Error {
    Error::Infeasible("M < 1 infeasible under secure delivery".into())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CentralizedPlacement {
    pub params: SystemParams,
    pub caches: Vec<UserCache>,
    pub key_registry: KeyRegistry,
    pub subfile_len: usize,
}

impl CentralizedPlacement {
    pub fn t(&self) -> usize {
        match self.params.layout {
            Layout::Centralized { t } => t,
            Layout::Decentralized { .. } => {
                unreachable!("centralized placement with decentralized layout")
            }
        }
    }

    /// Cache of user `k` (1-based).
    pub fn cache(&self, k: usize) -> &UserCache {
        &self.caches[k - 1]
    }
}

fn centralized_t(params: &SystemParams) -> Result<usize> {
    params.validate()?;
    match params.layout {
        Layout::Centralized { t } => Ok(t),
        Layout::Decentralized { .. } => Err(param("expected centralized parameters")),
    }
}

/// Subfiles of `file`, one per `t`-subset in enumeration order.
pub fn split_file(file: &BitBlock, users: usize, t: usize) -> Result<Vec<(SubsetId, BitBlock)>> {
    let taus = enumerate_subsets(users, t)?;
    if !file.len().is_multiple_of(taus.len()) {
        return Err(Error::Indivisible {
            file_bits: file.len(),
            divisor: taus.len() as u128,
        });
    }
    let len = file.len() / taus.len();
    Ok(taus
        .into_iter()
        .enumerate()
        .map(|(i, tau)| (tau, file.slice(i * len..(i + 1) * len)))
        .collect())
}

/// Splits the library, draws one key per `(t+1)`-subset (in enumeration
/// order) and fills every user cache.
pub fn place_centralized(
    library: &FileLibrary,
    params: &SystemParams,
    keys: &mut dyn KeySource,
) -> Result<CentralizedPlacement> {
    let t = centralized_t(params)?;
    library.check_matches(params)?;
    let users = params.users;
    let pieces = binomial(users, t).ok_or_else(|| param("C(K,t) overflows"))?;
    let subfile_len = params.file_bits / pieces as usize;

    let mut caches: Vec<UserCache> = (1..=users)
        .map(|k| UserCache::new(k, params.budget_bits()))
        .collect();

    for n in 1..=params.files {
        for (tau, piece) in split_file(library.file(n), users, t)? {
            for k in tau.members() {
                caches[k - 1].data.insert(
                    SubfileId {
                        file: n,
                        subset: tau,
                    },
                    piece.clone(),
                );
            }
        }
    }

    let mut key_registry = KeyRegistry::new();
    if t < users {
        for s in enumerate_subsets(users, t + 1)? {
            let pad = keys.draw_pad(subfile_len);
            for k in s.members() {
                caches[k - 1].keys.insert(s, pad.bits.clone());
            }
            key_registry.insert(s, pad);
        }
    }

    Ok(CentralizedPlacement {
        params: *params,
        caches,
        key_registry,
        subfile_len,
    })
}

/// One keyed record per `(t+1)`-subset, in enumeration order. Repeated
/// demands are not exploited: the payload is always the worst case.
pub fn deliver_centralized(
    placement: &CentralizedPlacement,
    library: &FileLibrary,
    demand: &DemandVector,
) -> Result<DeliveryPayload> {
    let params = &placement.params;
    let t = placement.t();
    library.check_matches(params)?;
    demand.check_matches(params)?;
    let mut payload = DeliveryPayload::default();
    if t == params.users {
        return Ok(payload);
    }

    let split: Vec<Vec<(SubsetId, BitBlock)>> = (1..=params.files)
        .map(|n| split_file(library.file(n), params.users, t))
        .collect::<Result<_>>()?;
    let subfile = |n: usize, tau: SubsetId| -> Result<&BitBlock> {
        split[n - 1]
            .iter()
            .find(|(s, _)| *s == tau)
            .map(|(_, b)| b)
            .ok_or_else(|| integrity(format!("no subfile W_{{{n},{tau}}}")))
    };

    for s in enumerate_subsets(params.users, t + 1)? {
        let pad = placement.key_registry.pad(s)?;
        let mut ct = pad.bits.clone();
        for k in s.members() {
            ct.xor_assign_padded(subfile(demand.of(k), s.without(k))?);
        }
        payload.push(s, ct)?;
    }
    Ok(payload)
}

/// Recovers the file requested by `cache.user` from its cache and the
/// payload. Subfiles are reassembled in `τ`-enumeration order.
pub fn decode_centralized(
    params: &SystemParams,
    cache: &UserCache,
    payload: &DeliveryPayload,
    demand: &DemandVector,
) -> Result<BitBlock> {
    let t = centralized_t(params)?;
    demand.check_matches(params)?;
    let k = cache.user;
    let wanted = demand.of(k);

    let mut parts = Vec::new();
    for tau in enumerate_subsets(params.users, t)? {
        if tau.contains(k) {
            parts.push(cache.subfile(wanted, tau)?.clone());
            continue;
        }
        let s = tau.with(k);
        let record = payload
            .record(s)
            .ok_or_else(|| integrity(format!("payload has no record for subset {s}")))?;
        let mut piece = record.ciphertext.clone();
        piece.xor_assign_padded(cache.key(s)?);
        for j in s.members().filter(|&j| j != k) {
            piece.xor_assign_padded(cache.subfile(demand.of(j), s.without(j))?);
        }
        parts.push(piece);
    }
    let file = BitBlock::concat(parts.iter());
    if file.len() != params.file_bits {
        return Err(integrity(format!(
            "user {k} reassembled {} bits, expected {}",
            file.len(),
            params.file_bits
        )));
    }
    Ok(file)
}

/// Rate at grid point `t` as the exact ratio `C(K,t+1) / C(K,t)`,
/// returned as `(numerator, denominator)`.
pub fn grid_rate_exact(users: usize, t: usize) -> Option<(u128, u128)> {
    Some((binomial(users, t + 1)?, binomial(users, t)?))
}

/// `(K - t) / (t + 1)`, equal to `C(K,t+1) / C(K,t)`.
pub fn grid_rate(users: usize, t: usize) -> f64 {
    (users.saturating_sub(t)) as f64 / (t as f64 + 1.0)
}

/// Grid tolerance used to decide whether an `M` is an achievable corner.
const GRID_TOL: f64 = 1e-9;

/// Secure centralized rate at cache size `M`. On the grid
/// `M = (N-1)t/K + 1` this is `K(1-q)/(1+Kq)` with `q = (M-1)/(N-1)`;
/// between grid points it is the linear interpolation of the two adjacent
/// corners, which is the lower convex envelope since the corner rates are
/// convex in `t`.
pub fn centralized_rate(files: usize, users: usize, m: f64) -> Result<f64> {
    if files == 0 || users == 0 {
        return Err(param("N and K must be at least 1"));
    }
    if m.is_nan() || m < 1.0 {
        return Err(infeasible_m());
    }
    let n = files as f64;
    if m > n * (1.0 + GRID_TOL) {
        return Err(param(format!("M = {m} exceeds N = {files}")));
    }
    if files == 1 || m >= n {
        return Ok(0.0);
    }
    let t = users as f64 * (m - 1.0) / (n - 1.0);
    let lo = libm::floor(t);
    if t - lo < GRID_TOL {
        return Ok(grid_rate(users, lo as usize));
    }
    if libm::ceil(t) - t < GRID_TOL {
        return Ok(grid_rate(users, libm::ceil(t) as usize));
    }
    let lo_t = lo as usize;
    let frac = t - lo;
    let (r0, r1) = (grid_rate(users, lo_t), grid_rate(users, lo_t + 1));
    Ok(r0 + (r1 - r0) * frac)
}
