//! Decentralized secure coded caching.
//!
//! Users cache `round(qF)` uniformly chosen bits of every file on their
//! own, `q = (M-1)/(N-1)`. Afterwards the server groups the bits of each
//! file by the exact set of users holding them (the fragment map), places
//! one key per nonempty user subset, and delivers
//!
//! ```text
//! K_S ⊕ (⊕_{k ∈ S} W_{d_k, S \ {k}})      for |S| = K, K-1, .., 1
//! ```
//!
//! with every fragment zero-padded to the longest one in the record. The
//! conventional alternative unicasts each user's missing bits under a
//! per-user key; the server sends whichever is shorter.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::bits::BitBlock;
use crate::centralized::infeasible_m;
use crate::error::{integrity, param, Result};
use crate::model::{
    DeliveryPayload, DemandVector, FileLibrary, KeyRegistry, Layout, SubfileId, SystemParams,
    UserCache,
};
use crate::rng::{KeySource, SeededStream};
use crate::subset::{binomial, nonempty_subsets_by_size_desc, SubsetId};

fn decentralized_t(params: &SystemParams) -> Result<f64> {
    params.validate()?;
    match params.layout {
        Layout::Decentralized { t } => Ok(t),
        Layout::Centralized { .. } => Err(param("expected decentralized parameters")),
    }
}

/// Per-bit caching probability `q = t / N = (M-1)/(N-1)`.
pub fn cache_fraction(params: &SystemParams) -> Result<f64> {
    let t = decentralized_t(params)?;
    Ok(t / params.files as f64)
}

/// Bits of each file a user stores, `round(qF)`.
pub fn cached_bits_per_file(params: &SystemParams) -> Result<usize> {
    let q = cache_fraction(params)?;
    Ok(libm::round(q * params.file_bits as f64) as usize)
}

/// Positions each user picked, `positions[user-1][file-1]`, ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selections {
    pub positions: Vec<Vec<Vec<u32>>>,
}

impl Selections {
    pub fn of(&self, user: usize, file: usize) -> &[u32] {
        &self.positions[user - 1][file - 1]
    }
}

/// Draws every user's selection, users outer and files inner, each a
/// uniform `round(qF)`-subset of bit positions without replacement.
pub fn sample_selections(params: &SystemParams, stream: &mut SeededStream) -> Result<Selections> {
    let count = cached_bits_per_file(params)?;
    let f = params.file_bits;
    let positions = (0..params.users)
        .map(|_| {
            (0..params.files)
                .map(|_| {
                    let mut picked: Vec<u32> = index::sample(stream.rng_mut(), f, count)
                        .into_iter()
                        .map(|i| i as u32)
                        .collect();
                    picked.sort_unstable();
                    picked
                })
                .collect()
        })
        .collect();
    Ok(Selections { positions })
}

/// User caches straight after the decentralized data phase: positions and
/// the bits found there.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledCaches {
    pub params: SystemParams,
    pub selections: Selections,
    /// `bits[user-1][file-1]`, bit `i` is the file bit at `positions[..][i]`.
    pub bits: Vec<Vec<BitBlock>>,
}

impl SampledCaches {
    pub fn from_selections(
        library: &FileLibrary,
        params: &SystemParams,
        selections: Selections,
    ) -> Result<Self> {
        decentralized_t(params)?;
        library.check_matches(params)?;
        if selections.positions.len() != params.users
            || selections.positions.iter().any(|u| u.len() != params.files)
        {
            return Err(param("selection shape does not match parameters"));
        }
        let bits = selections
            .positions
            .iter()
            .map(|per_file| {
                per_file
                    .iter()
                    .enumerate()
                    .map(|(n, pos)| {
                        let file = library.file(n + 1);
                        BitBlock::from_bools(pos.iter().map(|&p| file.get(p as usize)))
                    })
                    .collect()
            })
            .collect();
        Ok(SampledCaches {
            params: *params,
            selections,
            bits,
        })
    }

    /// Bit at `position` of `file` as stored by `user`, if cached.
    pub fn lookup(&self, user: usize, file: usize, position: u32) -> Option<bool> {
        let pos = self.selections.of(user, file);
        pos.binary_search(&position)
            .ok()
            .map(|i| self.bits[user - 1][file - 1].get(i))
    }

    pub fn data_bits(&self, user: usize) -> u64 {
        self.bits[user - 1].iter().map(|b| b.len() as u64).sum()
    }
}

/// Random data placement: sample positions, then read the bits.
pub fn place_decentralized(
    library: &FileLibrary,
    params: &SystemParams,
    stream: &mut SeededStream,
) -> Result<SampledCaches> {
    let selections = sample_selections(params, stream)?;
    SampledCaches::from_selections(library, params, selections)
}

/// For each file, the bit positions held by exactly each user subset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FragmentMap {
    pub users: usize,
    pub file_bits: usize,
    /// `fragments[file-1][mask]`, positions ascending.
    fragments: Vec<Vec<Vec<u32>>>,
}

impl FragmentMap {
    pub fn positions(&self, file: usize, subset: SubsetId) -> &[u32] {
        &self.fragments[file - 1][subset.mask() as usize]
    }

    pub fn size(&self, file: usize, subset: SubsetId) -> usize {
        self.positions(file, subset).len()
    }

    pub fn files(&self) -> usize {
        self.fragments.len()
    }

    /// Fragment sizes per file (index `file-1`), all `2^K` subsets.
    pub fn sizes(&self) -> Vec<BTreeMap<SubsetId, usize>> {
        self.fragments
            .iter()
            .map(|per_mask| {
                per_mask
                    .iter()
                    .enumerate()
                    .map(|(mask, pos)| (SubsetId::from_mask(mask as u64), pos.len()))
                    .collect()
            })
            .collect()
    }

    /// Bits of `file` in fragment `subset`, read from the library.
    pub fn extract(&self, library: &FileLibrary, file: usize, subset: SubsetId) -> BitBlock {
        let w = library.file(file);
        BitBlock::from_bools(
            self.positions(file, subset)
                .iter()
                .map(|&p| w.get(p as usize)),
        )
    }
}

/// Groups bit positions by the set of users caching them.
pub fn map_fragments(selections: &Selections, params: &SystemParams) -> Result<FragmentMap> {
    decentralized_t(params)?;
    let users = params.users;
    let f = params.file_bits;
    let mut fragments = Vec::with_capacity(params.files);
    for n in 1..=params.files {
        let mut holders = alloc::vec![0u64; f];
        for k in 1..=users {
            for &p in selections.of(k, n) {
                holders[p as usize] |= 1 << (k - 1);
            }
        }
        let mut per_mask: Vec<Vec<u32>> = alloc::vec![Vec::new(); 1 << users];
        for (p, &mask) in holders.iter().enumerate() {
            per_mask[mask as usize].push(p as u32);
        }
        fragments.push(per_mask);
    }
    Ok(FragmentMap {
        users,
        file_bits: f,
        fragments,
    })
}

/// Key `K_S` length for demand `d`: `max_{k ∈ S} |W_{d_k, S \ {k}}|`.
pub fn key_length(fragments: &FragmentMap, demand: &DemandVector, s: SubsetId) -> usize {
    s.members()
        .map(|k| fragments.size(demand.of(k), s.without(k)))
        .max()
        .unwrap_or(0)
}

/// One key per nonempty subset, drawn in size-descending lexicographic
/// order and sized for `demand`.
pub fn place_keys_decentralized(
    fragments: &FragmentMap,
    demand: &DemandVector,
    keys: &mut dyn KeySource,
) -> Result<KeyRegistry> {
    if demand.len() != fragments.users {
        return Err(param("demand length does not match the user count"));
    }
    let mut registry = KeyRegistry::new();
    for s in nonempty_subsets_by_size_desc(fragments.users)? {
        let pad = keys.draw_pad(key_length(fragments, demand, s));
        registry.insert(s, pad);
    }
    Ok(registry)
}

/// Per-user keys for the conventional unicast, one `(F - round(qF))`-bit
/// pad per user in user order.
pub fn provision_unicast_keys(
    params: &SystemParams,
    keys: &mut dyn KeySource,
) -> Result<KeyRegistry> {
    let missing = params.file_bits - cached_bits_per_file(params)?;
    let mut registry = KeyRegistry::new();
    for k in 1..=params.users {
        registry.insert(SubsetId::singleton(k), keys.draw_pad(missing));
    }
    Ok(registry)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecentralizedPlacement {
    pub params: SystemParams,
    /// Fragment-labelled data plus the coded-delivery keys.
    pub caches: Vec<UserCache>,
    pub sampled: SampledCaches,
    pub fragment_map: FragmentMap,
    pub key_registry: KeyRegistry,
    pub unicast_keys: KeyRegistry,
    pub demand_bound: DemandVector,
}

impl DecentralizedPlacement {
    /// Installs keys and fragment-labelled views of each user's own cached
    /// bits into per-user caches.
    pub fn assemble(
        sampled: SampledCaches,
        fragment_map: FragmentMap,
        key_registry: KeyRegistry,
        unicast_keys: KeyRegistry,
        demand: DemandVector,
    ) -> Result<Self> {
        let params = sampled.params;
        demand.check_matches(&params)?;
        let users = params.users;
        let mut caches = Vec::with_capacity(users);
        for k in 1..=users {
            let mut cache = UserCache::new(k, params.budget_bits());
            for n in 1..=params.files {
                for mask in 0..(1u64 << users) {
                    let t = SubsetId::from_mask(mask);
                    if !t.contains(k) {
                        continue;
                    }
                    let bits = fragment_map
                        .positions(n, t)
                        .iter()
                        .map(|&p| {
                            sampled.lookup(k, n, p).ok_or_else(|| {
                                integrity(format!("user {k} lacks bit {p} of file {n}"))
                            })
                        })
                        .collect::<Result<Vec<bool>>>()?;
                    cache
                        .data
                        .insert(SubfileId { file: n, subset: t }, BitBlock::from_bools(bits));
                }
            }
            for (s, pad) in key_registry.iter() {
                if s.contains(k) {
                    cache.keys.insert(s, pad.bits.clone());
                }
            }
            caches.push(cache);
        }
        Ok(DecentralizedPlacement {
            params,
            caches,
            sampled,
            fragment_map,
            key_registry,
            unicast_keys,
            demand_bound: demand,
        })
    }

    /// Whole pipeline on one stream: data placement, fragment mapping,
    /// coded keys for `demand`, then unicast keys.
    pub fn build(
        library: &FileLibrary,
        params: &SystemParams,
        demand: &DemandVector,
        stream: &mut SeededStream,
    ) -> Result<Self> {
        let sampled = place_decentralized(library, params, stream)?;
        let fragment_map = map_fragments(&sampled.selections, params)?;
        let keys = place_keys_decentralized(&fragment_map, demand, stream)?;
        let unicast = provision_unicast_keys(params, stream)?;
        Self::assemble(sampled, fragment_map, keys, unicast, demand.clone())
    }

    pub fn cache(&self, k: usize) -> &UserCache {
        &self.caches[k - 1]
    }
}

/// Coded delivery for `|S| = K` down to `1`; zero-length records are
/// left out.
pub fn deliver_decentralized_coded(
    placement: &DecentralizedPlacement,
    library: &FileLibrary,
    demand: &DemandVector,
) -> Result<DeliveryPayload> {
    library.check_matches(&placement.params)?;
    demand.check_matches(&placement.params)?;
    if *demand != placement.demand_bound {
        return Err(integrity("keys were sized for a different demand"));
    }
    let fm = &placement.fragment_map;
    let mut payload = DeliveryPayload::default();
    for s in nonempty_subsets_by_size_desc(placement.params.users)? {
        let pad = placement.key_registry.pad(s)?;
        if pad.is_empty() {
            continue;
        }
        let mut ct = pad.bits.clone();
        for k in s.members() {
            let frag = fm.extract(library, demand.of(k), s.without(k));
            if frag.len() > pad.len() {
                return Err(integrity(format!(
                    "key K_{s} is shorter than its fragments"
                )));
            }
            ct.xor_assign_padded(&frag);
        }
        payload.push(s, ct)?;
    }
    Ok(payload)
}

/// Missing bits of a user's requested file, in position order.
fn missing_bits(
    sampled: &SampledCaches,
    library: &FileLibrary,
    user: usize,
    file: usize,
) -> BitBlock {
    let held = sampled.selections.of(user, file);
    let w = library.file(file);
    let mut it = held.iter().peekable();
    let mut out = BitBlock::new();
    for p in 0..w.len() as u32 {
        if it.peek() == Some(&&p) {
            it.next();
        } else {
            out.push(w.get(p as usize));
        }
    }
    out
}

/// Unicast of each user's uncached bits under its own key.
pub fn deliver_conventional(
    placement: &DecentralizedPlacement,
    library: &FileLibrary,
    demand: &DemandVector,
) -> Result<DeliveryPayload> {
    library.check_matches(&placement.params)?;
    demand.check_matches(&placement.params)?;
    let mut payload = DeliveryPayload::default();
    for k in 1..=placement.params.users {
        let s = SubsetId::singleton(k);
        let pad = placement.unicast_keys.pad(s)?;
        let plain = missing_bits(&placement.sampled, library, k, demand.of(k));
        if plain.len() != pad.len() {
            return Err(integrity(format!(
                "unicast key of user {k} has the wrong length"
            )));
        }
        if pad.is_empty() {
            continue;
        }
        let mut ct = pad.bits.clone();
        ct.xor_assign_padded(&plain);
        payload.push(s, ct)?;
    }
    Ok(payload)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryMode {
    Coded,
    Conventional,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Delivery {
    pub mode: DeliveryMode,
    pub payload: DeliveryPayload,
    pub coded_bits: u64,
    pub conventional_bits: u64,
}

/// Builds both deliveries and keeps the shorter one (coded on ties).
pub fn deliver_decentralized(
    placement: &DecentralizedPlacement,
    library: &FileLibrary,
    demand: &DemandVector,
) -> Result<Delivery> {
    let coded = deliver_decentralized_coded(placement, library, demand)?;
    let conv = deliver_conventional(placement, library, demand)?;
    let (coded_bits, conventional_bits) = (coded.total_bits(), conv.total_bits());
    let (mode, payload) = if conventional_bits < coded_bits {
        (DeliveryMode::Conventional, conv)
    } else {
        (DeliveryMode::Coded, coded)
    };
    Ok(Delivery {
        mode,
        payload,
        coded_bits,
        conventional_bits,
    })
}

/// Recovers `demand.of(cache.user)` from a coded payload.
pub fn decode_decentralized(
    fragments: &FragmentMap,
    cache: &UserCache,
    payload: &DeliveryPayload,
    demand: &DemandVector,
) -> Result<BitBlock> {
    let k = cache.user;
    let users = fragments.users;
    if demand.len() != users {
        return Err(param("demand length does not match the user count"));
    }
    let wanted = demand.of(k);
    let mut file = BitBlock::zeros(fragments.file_bits);
    let mut write = |subset: SubsetId, bits: &BitBlock| {
        for (i, &p) in fragments.positions(wanted, subset).iter().enumerate() {
            file.set(p as usize, bits.get(i));
        }
    };
    for mask in 0..(1u64 << users) {
        let t = SubsetId::from_mask(mask);
        if t.contains(k) {
            write(t, cache.subfile(wanted, t)?);
            continue;
        }
        let need = fragments.size(wanted, t);
        if need == 0 {
            continue;
        }
        let s = t.with(k);
        let record = payload
            .record(s)
            .ok_or_else(|| integrity(format!("payload has no record for subset {s}")))?;
        let mut piece = record.ciphertext.clone();
        piece.xor_assign_padded(cache.key(s)?);
        for j in s.members().filter(|&j| j != k) {
            piece.xor_assign_padded(cache.subfile(demand.of(j), s.without(j))?);
        }
        if piece.len() < need {
            return Err(integrity(format!(
                "record {s} is shorter than fragment {t}"
            )));
        }
        piece.truncate(need);
        write(t, &piece);
    }
    Ok(file)
}

/// Recovers a user's file from a conventional payload.
pub fn decode_conventional(
    sampled: &SampledCaches,
    user: usize,
    unicast_key: &BitBlock,
    payload: &DeliveryPayload,
    demand: &DemandVector,
) -> Result<BitBlock> {
    let wanted = demand.of(user);
    let f = sampled.params.file_bits;
    let mut plain = match payload.record(SubsetId::singleton(user)) {
        Some(r) => r.ciphertext.clone(),
        None => BitBlock::new(),
    };
    plain.xor_assign_padded(unicast_key);
    let held = sampled.selections.of(user, wanted);
    let own = &sampled.bits[user - 1][wanted - 1];
    if held.len() + plain.len() != f {
        return Err(integrity(format!("user {user} cannot cover all {f} bits")));
    }
    let mut file = BitBlock::zeros(f);
    let (mut i, mut j) = (0, 0);
    for p in 0..f {
        if held.get(i) == Some(&(p as u32)) {
            file.set(p, own.get(i));
            i += 1;
        } else {
            file.set(p, plain.get(j));
            j += 1;
        }
    }
    Ok(file)
}

/// Expected coded rate `Σ_s C(K,s) q^{s-1} (1-q)^{K-s+1}`, for `0 < q ≤ 1`.
pub fn expected_coded_rate(users: usize, q: f64) -> f64 {
    (1..=users)
        .map(|s| {
            binomial(users, s).map_or(f64::INFINITY, |c| c as f64)
                * libm::pow(q, (s - 1) as f64)
                * libm::pow(1.0 - q, (users - s + 1) as f64)
        })
        .sum()
}

/// Conventional rate `K (1 - q)`.
pub fn conventional_rate(users: usize, q: f64) -> f64 {
    users as f64 * (1.0 - q)
}

/// Secure decentralized rate: `K` at `M = 1`, otherwise
/// `K(1-q) · min{ (1 - (1-q)^K) / (K q), 1 }` with `q = (M-1)/(N-1)`.
pub fn decentralized_rate(files: usize, users: usize, m: f64) -> Result<f64> {
    if files == 0 || users == 0 {
        return Err(param("N and K must be at least 1"));
    }
    if m.is_nan() || m < 1.0 {
        return Err(infeasible_m());
    }
    let n = files as f64;
    if m > n * (1.0 + 1e-12) {
        return Err(param(format!("M = {m} exceeds N = {files}")));
    }
    if m >= n {
        return Ok(0.0);
    }
    if m == 1.0 {
        return Ok(users as f64);
    }
    let q = (m - 1.0) / (n - 1.0);
    let k = users as f64;
    let coded = (1.0 - libm::pow(1.0 - q, k)) / (k * q);
    Ok(k * (1.0 - q) * coded.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn setup(
        n: usize,
        k: usize,
        f: usize,
        m: f64,
        seed: u64,
    ) -> (SystemParams, FileLibrary, SeededStream) {
        let params = SystemParams::decentralized_from_cache(n, k, f, m, seed).unwrap();
        let mut stream = SeededStream::new(seed);
        let library = FileLibrary::random(n, f, &mut stream);
        (params, library, stream)
    }

    #[test]
    fn rate_examples() {
        assert!((decentralized_rate(3, 3, 5.0 / 3.0).unwrap() - 38.0 / 27.0).abs() < 1e-12);
        assert_eq!(decentralized_rate(3, 3, 3.0).unwrap(), 0.0);
        assert_eq!(decentralized_rate(4, 6, 1.0).unwrap(), 6.0);
        assert!(decentralized_rate(3, 3, 0.9).is_err());
        assert!(decentralized_rate(3, 3, 3.5).is_err());
        // N = K = 2, M = 3/2: q = 1/2, coded sum = 2·(1/2)^2 + 1·(1/2)·(1/2) = 3/4.
        let r = decentralized_rate(2, 2, 1.5).unwrap();
        assert!((r - 0.75).abs() < 1e-12);
        assert!((expected_coded_rate(2, 0.5) - 0.75).abs() < 1e-12);
        assert!((conventional_rate(2, 0.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_coded_sum() {
        for n in 2..10usize {
            for k in 1..10usize {
                for i in 1..20 {
                    let m = 1.0 + (n as f64 - 1.0) * i as f64 / 20.0;
                    let q = (m - 1.0) / (n as f64 - 1.0);
                    let expected = expected_coded_rate(k, q).min(conventional_rate(k, q));
                    assert!((decentralized_rate(n, k, m).unwrap() - expected).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn placement_counts() {
        let (params, library, mut stream) = setup(3, 3, 300, 5.0 / 3.0, 11);
        let sampled = place_decentralized(&library, &params, &mut stream).unwrap();
        for k in 1..=3 {
            for n in 1..=3 {
                assert_eq!(sampled.selections.of(k, n).len(), 100);
            }
            assert_eq!(sampled.data_bits(k), 300);
        }
    }

    #[test]
    fn seeds_control_selection() {
        let p = SystemParams::decentralized_from_cache(3, 3, 300, 2.0, 0).unwrap();
        let a = sample_selections(&p, &mut SeededStream::new(1)).unwrap();
        let b = sample_selections(&p, &mut SeededStream::new(1)).unwrap();
        let c = sample_selections(&p, &mut SeededStream::new(2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn full_cache_puts_everything_in_the_full_fragment() {
        let (params, library, mut stream) = setup(3, 3, 64, 3.0, 3);
        let demand = DemandVector::worst_case(3, 3);
        let placement =
            DecentralizedPlacement::build(&library, &params, &demand, &mut stream).unwrap();
        let fm = &placement.fragment_map;
        for n in 1..=3 {
            assert_eq!(fm.size(n, SubsetId::full(3)), 64);
        }
        for (s, pad) in placement.key_registry.iter() {
            assert_eq!(pad.len(), 0, "key {s}");
        }
        let payload = deliver_decentralized_coded(&placement, &library, &demand).unwrap();
        assert!(payload.is_empty());
        assert_eq!(
            deliver_conventional(&placement, &library, &demand)
                .unwrap()
                .total_bits(),
            0
        );
        for k in 1..=3 {
            let got = decode_decentralized(fm, placement.cache(k), &payload, &demand).unwrap();
            assert_eq!(&got, library.file(demand.of(k)));
        }
    }

    #[test]
    fn three_user_structure() {
        let (params, library, mut stream) = setup(3, 3, 3000, 5.0 / 3.0, 5);
        let demand = DemandVector::new(vec![1, 2, 3], 3).unwrap();
        let placement =
            DecentralizedPlacement::build(&library, &params, &demand, &mut stream).unwrap();
        let fm = &placement.fragment_map;

        // 8 fragments per file partition all bits.
        for n in 1..=3 {
            let sizes = &fm.sizes()[n - 1];
            assert_eq!(sizes.len(), 8);
            assert_eq!(sizes.values().sum::<usize>(), 3000);
            let mut all: Vec<u32> = (0..8u64)
                .flat_map(|m| fm.positions(n, SubsetId::from_mask(m)).to_vec())
                .collect();
            all.sort_unstable();
            assert_eq!(all, (0..3000).collect::<Vec<u32>>());
        }

        // 7 keys; |K_123| = max{|A_23|, |B_13|, |C_12|}.
        assert_eq!(placement.key_registry.len(), 7);
        let s = |m: &[usize]| SubsetId::from_members(m.iter().copied()).unwrap();
        let k123 = placement.key_registry.get(s(&[1, 2, 3])).unwrap().len();
        let expect = fm
            .size(1, s(&[2, 3]))
            .max(fm.size(2, s(&[1, 3])))
            .max(fm.size(3, s(&[1, 2])));
        assert_eq!(k123, expect);
        for k in 1..=3 {
            assert_eq!(placement.cache(k).keys.len(), 4);
        }

        let payload = deliver_decentralized_coded(&placement, &library, &demand).unwrap();
        let order: Vec<Vec<usize>> = payload.records.iter().map(|r| r.subset.to_vec()).collect();
        assert_eq!(
            order,
            vec![
                vec![1, 2, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3],
                vec![1],
                vec![2],
                vec![3]
            ]
        );
        // s = 3 record: A_23 ⊕ B_13 ⊕ C_12 ⊕ K_123.
        let mut expected = placement
            .key_registry
            .get(s(&[1, 2, 3]))
            .unwrap()
            .bits
            .clone();
        expected.xor_assign_padded(&fm.extract(&library, 1, s(&[2, 3])));
        expected.xor_assign_padded(&fm.extract(&library, 2, s(&[1, 3])));
        expected.xor_assign_padded(&fm.extract(&library, 3, s(&[1, 2])));
        assert_eq!(payload.records[0].ciphertext, expected);
        // s = 1 record for user 1: A_∅ ⊕ K_1.
        let mut expected = placement.key_registry.get(s(&[1])).unwrap().bits.clone();
        expected.xor_assign_padded(&fm.extract(&library, 1, SubsetId::EMPTY));
        assert_eq!(payload.records[4].ciphertext, expected);

        for k in 1..=3 {
            let got = decode_decentralized(fm, placement.cache(k), &payload, &demand).unwrap();
            assert_eq!(&got, library.file(k));
        }
    }

    #[test]
    fn conventional_roundtrip_and_size() {
        let (params, library, mut stream) = setup(2, 2, 1000, 1.5, 8);
        let demand = DemandVector::new(vec![1, 2], 2).unwrap();
        let placement =
            DecentralizedPlacement::build(&library, &params, &demand, &mut stream).unwrap();
        let payload = deliver_conventional(&placement, &library, &demand).unwrap();
        assert_eq!(payload.rate(1000), 1.0);
        for k in 1..=2 {
            let key = &placement
                .unicast_keys
                .get(SubsetId::singleton(k))
                .unwrap()
                .bits;
            let got = decode_conventional(&placement.sampled, k, key, &payload, &demand).unwrap();
            assert_eq!(&got, library.file(k));
        }
        let d = deliver_decentralized(&placement, &library, &demand).unwrap();
        assert_eq!(
            d.payload.total_bits(),
            d.coded_bits.min(d.conventional_bits)
        );
    }

    #[test]
    fn demand_mismatch_is_rejected() {
        let (params, library, mut stream) = setup(3, 3, 300, 2.0, 8);
        let demand = DemandVector::new(vec![1, 2, 3], 3).unwrap();
        let placement =
            DecentralizedPlacement::build(&library, &params, &demand, &mut stream).unwrap();
        let other = DemandVector::new(vec![3, 2, 1], 3).unwrap();
        assert!(matches!(
            deliver_decentralized_coded(&placement, &library, &other),
            Err(crate::Error::Integrity(_))
        ));
    }

    #[test]
    fn decode_flags_missing_key() {
        let (params, library, mut stream) = setup(3, 3, 300, 2.0, 8);
        let demand = DemandVector::new(vec![1, 2, 3], 3).unwrap();
        let placement =
            DecentralizedPlacement::build(&library, &params, &demand, &mut stream).unwrap();
        let payload = deliver_decentralized_coded(&placement, &library, &demand).unwrap();
        let mut cache = placement.cache(2).clone();
        cache.keys.clear();
        assert!(matches!(
            decode_decentralized(&placement.fragment_map, &cache, &payload, &demand),
            Err(crate::Error::Integrity(_))
        ));
    }
}
