//! Leakage verification.
//!
//! At tiny scale the mutual information `I(X; W_1..W_N)` between the
//! payload and the library is computed exactly by enumerating every
//! library and every key realization. Counts stay integral until the last
//! step and a term whose ratio `c(w,x)·|W| / c(x)` is exactly one
//! contributes exactly zero, so a secure scheme yields `0.0`, not a small
//! float.
//!
//! At simulation scale [`structural_otp_audit`] checks the premises the
//! zero-leakage argument consumes: one fresh, uniformly drawn, full-length
//! pad per record.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bits::BitBlock;
use crate::centralized::{deliver_centralized, place_centralized};
use crate::decentralized::{
    deliver_conventional, deliver_decentralized_coded, map_fragments, place_keys_decentralized,
    provision_unicast_keys, DecentralizedPlacement, DeliveryMode, SampledCaches, Selections,
};
use crate::error::{integrity, Error, Result};
use crate::model::{DeliveryPayload, DemandVector, FileLibrary, KeyRegistry, SystemParams};
use crate::rng::{KeySource, Pad, PadOrigin};

/// Default cap on `log2(#libraries · #key realizations)`.
pub const ENUMERATION_LIMIT_BITS: u32 = 24;

/// A delivery procedure with its placement folded in: given a library and
/// a key source, produce the payload.
pub trait TinyScheme {
    fn files(&self) -> usize;
    fn file_bits(&self) -> usize;
    fn deliver(&self, library: &FileLibrary, keys: &mut dyn KeySource) -> Result<DeliveryPayload>;
}

pub struct CentralizedInstance {
    pub params: SystemParams,
    pub demand: DemandVector,
}

impl TinyScheme for CentralizedInstance {
    fn files(&self) -> usize {
        self.params.files
    }

    fn file_bits(&self) -> usize {
        self.params.file_bits
    }

    fn deliver(&self, library: &FileLibrary, keys: &mut dyn KeySource) -> Result<DeliveryPayload> {
        let placement = place_centralized(library, &self.params, keys)?;
        deliver_centralized(&placement, library, &self.demand)
    }
}

/// Decentralized delivery conditioned on a fixed data placement; only
/// files and keys are random.
pub struct DecentralizedInstance {
    pub params: SystemParams,
    pub demand: DemandVector,
    pub selections: Selections,
    pub mode: DeliveryMode,
}

impl TinyScheme for DecentralizedInstance {
    fn files(&self) -> usize {
        self.params.files
    }

    fn file_bits(&self) -> usize {
        self.params.file_bits
    }

    fn deliver(&self, library: &FileLibrary, keys: &mut dyn KeySource) -> Result<DeliveryPayload> {
        let sampled =
            SampledCaches::from_selections(library, &self.params, self.selections.clone())?;
        let fm = map_fragments(&sampled.selections, &self.params)?;
        let (coded, unicast) = match self.mode {
            DeliveryMode::Coded => (
                place_keys_decentralized(&fm, &self.demand, keys)?,
                KeyRegistry::new(),
            ),
            DeliveryMode::Conventional => (
                KeyRegistry::new(),
                provision_unicast_keys(&self.params, keys)?,
            ),
        };
        let placement =
            DecentralizedPlacement::assemble(sampled, fm, coded, unicast, self.demand.clone())?;
        match self.mode {
            DeliveryMode::Coded => deliver_decentralized_coded(&placement, library, &self.demand),
            DeliveryMode::Conventional => deliver_conventional(&placement, library, &self.demand),
        }
    }
}

/// Adapter for ad-hoc (typically deliberately broken) schemes.
pub struct FnScheme<F> {
    pub files: usize,
    pub file_bits: usize,
    pub deliver: F,
}

impl<F> TinyScheme for FnScheme<F>
where
    F: Fn(&FileLibrary, &mut dyn KeySource) -> Result<DeliveryPayload>,
{
    fn files(&self) -> usize {
        self.files
    }

    fn file_bits(&self) -> usize {
        self.file_bits
    }

    fn deliver(&self, library: &FileLibrary, keys: &mut dyn KeySource) -> Result<DeliveryPayload> {
        (self.deliver)(library, keys)
    }
}

/// Hands out all-zero pads and counts the bits requested.
#[derive(Default)]
struct CountingKeys {
    bits: usize,
    draws: u64,
}

impl KeySource for CountingKeys {
    fn draw_pad(&mut self, len: usize) -> Pad {
        self.bits += len;
        let draw = self.draws;
        self.draws += 1;
        Pad {
            bits: BitBlock::zeros(len),
            origin: PadOrigin::Uniform { draw },
        }
    }
}

/// Serves consecutive slices of one fixed key realization.
struct EnumeratedKeys {
    value: u64,
    width: usize,
    offset: usize,
    draws: u64,
    overrun: bool,
}

impl KeySource for EnumeratedKeys {
    fn draw_pad(&mut self, len: usize) -> Pad {
        let mut bits = BitBlock::zeros(len);
        for i in 0..len {
            let pos = self.offset + i;
            if pos >= self.width {
                self.overrun = true;
                break;
            }
            bits.set(i, (self.value >> pos) & 1 == 1);
        }
        self.offset += len;
        let draw = self.draws;
        self.draws += 1;
        Pad {
            bits,
            origin: PadOrigin::Uniform { draw },
        }
    }
}

fn library_from_index(index: u64, files: usize, file_bits: usize) -> Result<FileLibrary> {
    let all = BitBlock::from_u64(index, files * file_bits);
    FileLibrary::new(
        (0..files)
            .map(|n| all.slice(n * file_bits..(n + 1) * file_bits))
            .collect(),
    )
}

/// Total key bits one delivery consumes (assumed independent of the files).
pub fn key_bits_required(scheme: &dyn TinyScheme) -> Result<usize> {
    let library =
        FileLibrary::new(alloc::vec![BitBlock::zeros(scheme.file_bits()); scheme.files()])?;
    let mut counter = CountingKeys::default();
    scheme.deliver(&library, &mut counter)?;
    Ok(counter.bits)
}

/// Joint payload/library counts over the full enumeration.
struct JointCounts {
    libraries: u64,
    key_realizations: u64,
    /// `per_library[w]`: (payload id, count) pairs.
    per_library: Vec<BTreeMap<u32, u64>>,
    payload_totals: Vec<u64>,
    payload_ids: BTreeMap<DeliveryPayload, u32>,
}

fn enumerate(scheme: &dyn TinyScheme, limit_bits: u32) -> Result<JointCounts> {
    let lib_bits = scheme.files() * scheme.file_bits();
    let key_bits = key_bits_required(scheme)?;
    let required = lib_bits + key_bits;
    if required > limit_bits as usize || required > 63 {
        return Err(Error::EnumerationBound {
            required_bits: required as u32,
            limit_bits,
        });
    }
    let libraries = 1u64 << lib_bits;
    let key_realizations = 1u64 << key_bits;
    let mut counts = JointCounts {
        libraries,
        key_realizations,
        per_library: Vec::with_capacity(libraries as usize),
        payload_totals: Vec::new(),
        payload_ids: BTreeMap::new(),
    };
    for w in 0..libraries {
        let library = library_from_index(w, scheme.files(), scheme.file_bits())?;
        let mut row: BTreeMap<u32, u64> = BTreeMap::new();
        for kv in 0..key_realizations {
            let mut keys = EnumeratedKeys {
                value: kv,
                width: key_bits,
                offset: 0,
                draws: 0,
                overrun: false,
            };
            let payload = scheme.deliver(&library, &mut keys)?;
            if keys.overrun || keys.offset != key_bits {
                return Err(integrity("key consumption depends on the library"));
            }
            let next = counts.payload_ids.len() as u32;
            let id = *counts.payload_ids.entry(payload).or_insert(next);
            if id == next {
                counts.payload_totals.push(0);
            }
            counts.payload_totals[id as usize] += 1;
            *row.entry(id).or_insert(0) += 1;
        }
        counts.per_library.push(row);
    }
    Ok(counts)
}

/// `I(X; W_1..W_N)` in bits, by exhaustive enumeration over uniform
/// libraries and uniform, independent keys.
pub fn exact_leakage(scheme: &dyn TinyScheme, limit_bits: u32) -> Result<f64> {
    let c = enumerate(scheme, limit_bits)?;
    let total = (c.libraries * c.key_realizations) as f64;
    let mut info = 0.0;
    for row in &c.per_library {
        for (&id, &joint) in row {
            let marginal = c.payload_totals[id as usize];
            // p(x|w) / p(x) = joint·|W| / marginal.
            let num = joint as u128 * c.libraries as u128;
            if num == marginal as u128 {
                continue;
            }
            info += joint as f64 / total * libm::log2(num as f64 / marginal as f64);
        }
    }
    Ok(info)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub libraries: u64,
    /// Libraries consistent with the observed payload.
    pub candidates: u64,
    /// Posterior over libraries equals the uniform prior.
    pub posterior_uniform: bool,
    /// The eavesdropper learned something: the posterior moved.
    pub success: bool,
}

/// Bayesian reconstruction attempt from the payload alone, knowing the
/// scheme but no cache contents.
pub fn wiretap_reconstruction_attack(
    scheme: &dyn TinyScheme,
    observed: &DeliveryPayload,
    limit_bits: u32,
) -> Result<AttackOutcome> {
    let c = enumerate(scheme, limit_bits)?;
    let id = c.payload_ids.get(observed).copied();
    let likelihood: Vec<u64> = c
        .per_library
        .iter()
        .map(|row| id.and_then(|i| row.get(&i).copied()).unwrap_or(0))
        .collect();
    let candidates = likelihood.iter().filter(|&&l| l > 0).count() as u64;
    let first = likelihood.first().copied().unwrap_or(0);
    let posterior_uniform = first > 0 && likelihood.iter().all(|&l| l == first);
    Ok(AttackOutcome {
        libraries: c.libraries,
        candidates,
        posterior_uniform,
        success: !posterior_uniform,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuditFailure {
    /// A record has no registry key for its subset.
    MissingPad { subset: String },
    /// Two records are padded by the same key material.
    PadReuse { first: String, second: String },
    /// Pad and ciphertext lengths differ.
    LengthMismatch {
        subset: String,
        pad_bits: usize,
        ciphertext_bits: usize,
    },
    /// The pad was not drawn from a uniform key source.
    NonUniformPad { subset: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OtpAudit {
    pub records: usize,
    pub registry_keys: usize,
    pub every_record_padded: bool,
    pub no_pad_reuse: bool,
    pub lengths_match: bool,
    pub uniform_pads: bool,
    pub failures: Vec<AuditFailure>,
}

impl OtpAudit {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks that each record is padded by its own registry key, that no key
/// material pads two records, that every pad is exactly as long as its
/// ciphertext, and that every pad came from a uniform source.
pub fn structural_otp_audit(payload: &DeliveryPayload, registry: &KeyRegistry) -> OtpAudit {
    let mut failures = Vec::new();
    let mut seen: BTreeMap<PadOrigin, String> = BTreeMap::new();
    for record in &payload.records {
        let label = format!("{}", record.subset);
        let Some(pad) = registry.get(record.subset) else {
            failures.push(AuditFailure::MissingPad { subset: label });
            continue;
        };
        match pad.origin {
            PadOrigin::Uniform { .. } => {
                if let Some(first) = seen.insert(pad.origin, label.clone()) {
                    failures.push(AuditFailure::PadReuse {
                        first,
                        second: label.clone(),
                    });
                }
            }
            PadOrigin::Fixed => failures.push(AuditFailure::NonUniformPad {
                subset: label.clone(),
            }),
        }
        if pad.len() != record.ciphertext.len() {
            failures.push(AuditFailure::LengthMismatch {
                subset: label,
                pad_bits: pad.len(),
                ciphertext_bits: record.ciphertext.len(),
            });
        }
    }
    let has = |f: fn(&AuditFailure) -> bool| failures.iter().any(f);
    OtpAudit {
        records: payload.records.len(),
        registry_keys: registry.len(),
        every_record_padded: !has(|f| matches!(f, AuditFailure::MissingPad { .. })),
        no_pad_reuse: !has(|f| matches!(f, AuditFailure::PadReuse { .. })),
        lengths_match: !has(|f| matches!(f, AuditFailure::LengthMismatch { .. })),
        uniform_pads: !has(|f| matches!(f, AuditFailure::NonUniformPad { .. })),
        failures,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakageMethod {
    Exhaustive,
    Structural,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub params: SystemParams,
    pub demand: DemandVector,
    pub method: LeakageMethod,
    pub mutual_information_bits: Option<f64>,
    pub audits: OtpAudit,
}

impl LeakageReport {
    /// Zero leakage by the chosen method and a clean audit.
    pub fn secure(&self) -> bool {
        self.audits.passed() && self.mutual_information_bits.is_none_or(|i| i <= 1e-12)
    }
}

/// Exhaustive leakage when the instance fits in `limit_bits`, structural
/// audit only otherwise. The audit always runs on `payload`/`registry`.
pub fn leakage_report(
    scheme: &dyn TinyScheme,
    params: &SystemParams,
    demand: &DemandVector,
    payload: &DeliveryPayload,
    registry: &KeyRegistry,
    limit_bits: u32,
) -> Result<LeakageReport> {
    let audits = structural_otp_audit(payload, registry);
    let (method, mutual_information_bits) = match exact_leakage(scheme, limit_bits) {
        Ok(bits) => (LeakageMethod::Exhaustive, Some(bits)),
        Err(Error::EnumerationBound { .. }) => (LeakageMethod::Structural, None),
        Err(e) => return Err(e),
    };
    Ok(LeakageReport {
        params: *params,
        demand: demand.clone(),
        method,
        mutual_information_bits,
        audits,
    })
}
