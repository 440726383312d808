//! Rate analysis: cut-set lower bound, multiplicative gaps, the non-secure
//! baseline, the key/data memory split and key exposure under cache
//! compromise.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::centralized::{centralized_rate, infeasible_m};
use crate::decentralized::decentralized_rate;
use crate::error::{param, Result};
use crate::model::Scheme;
use crate::subset::binomial;

/// Slack for comparing `M` against regime boundaries.
const M_TOL: f64 = 1e-12;

/// Lower bound on the optimal secure rate:
/// `max_s ( s - s(M-1) / (⌊N/s⌋ - 1) )` over `s ≤ min(N,K)` with
/// `⌊N/s⌋ ≥ 2`, floored at zero.
pub fn lower_bound(files: usize, users: usize, m: f64) -> Result<f64> {
    if files == 0 || users == 0 {
        return Err(param("N and K must be at least 1"));
    }
    if m.is_nan() || m < 1.0 {
        return Err(infeasible_m());
    }
    if m > files as f64 * (1.0 + M_TOL) {
        return Err(param(format!("M = {m} exceeds N = {files}")));
    }
    let mut best = 0.0f64;
    for s in 1..=files.min(users) {
        let blocks = files / s;
        if blocks < 2 {
            // ⌊N/s⌋ is non-increasing in s.
            break;
        }
        let s = s as f64;
        best = best.max(s - s * (m - 1.0) / (blocks as f64 - 1.0));
    }
    Ok(best)
}

/// Lower end of the cache range where the centralized gap is bounded:
/// `max{ (K-N)(N-1)/(KN) + 1, 1 }`.
pub fn centralized_regime_start(files: usize, users: usize) -> f64 {
    let (n, k) = (files as f64, users as f64);
    ((k - n) * (n - 1.0) / (k * n) + 1.0).max(1.0)
}

/// Lower end of the decentralized bounded-gap range, `(N-1)/N + 1`.
pub fn decentralized_regime_start(files: usize) -> f64 {
    let n = files as f64;
    (n - 1.0) / n + 1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    /// Achievable over lower bound; `None` when the bound is zero but the
    /// rate is not.
    pub ratio: Option<f64>,
    pub regime_valid: bool,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if den > 0.0 {
        Some(num / den)
    } else if num == 0.0 {
        Some(1.0)
    } else {
        None
    }
}

pub fn gap_centralized(files: usize, users: usize, m: f64) -> Result<Gap> {
    let rate = centralized_rate(files, users, m)?;
    let lb = lower_bound(files, users, m)?;
    Ok(Gap {
        ratio: ratio(rate, lb),
        regime_valid: m >= centralized_regime_start(files, users) - M_TOL,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecentralizedGap {
    pub to_lower_bound: Option<f64>,
    /// Decentralized over centralized rate.
    pub to_centralized: Option<f64>,
    pub regime_valid: bool,
}

pub fn gap_decentralized(files: usize, users: usize, m: f64) -> Result<DecentralizedGap> {
    let rate = decentralized_rate(files, users, m)?;
    let lb = lower_bound(files, users, m)?;
    let cen = centralized_rate(files, users, m)?;
    Ok(DecentralizedGap {
        to_lower_bound: ratio(rate, lb),
        to_centralized: ratio(rate, cen),
        regime_valid: files >= 2 && m >= decentralized_regime_start(files) - M_TOL,
    })
}

/// Non-secure centralized coded caching rate `K(1-M/N)/(1+KM/N)` on the
/// grid `M = Nt/K`, linearly interpolated between grid points.
pub fn nonsecure_baseline_rate(files: usize, users: usize, m: f64) -> Result<f64> {
    if files == 0 || users == 0 {
        return Err(param("N and K must be at least 1"));
    }
    let n = files as f64;
    if m.is_nan() || m < 0.0 || m > n * (1.0 + M_TOL) {
        return Err(param(format!("M = {m} outside [0, {files}]")));
    }
    if m >= n {
        return Ok(0.0);
    }
    let k = users as f64;
    let t = k * m / n;
    let grid = |t: usize| (users - t) as f64 / (t as f64 + 1.0);
    let lo = libm::floor(t);
    let frac = t - lo;
    let lo = lo as usize;
    if frac < 1e-9 {
        return Ok(grid(lo));
    }
    if 1.0 - frac < 1e-9 {
        return Ok(grid(lo + 1));
    }
    Ok(grid(lo) + (grid(lo + 1) - grid(lo)) * frac)
}

/// Cache sizes of the centralized secure grid, `t = 0..K`.
pub fn centralized_grid(files: usize, users: usize) -> Vec<f64> {
    (0..=users)
        .map(|t| {
            if t == users {
                files as f64
            } else {
                (files as f64 - 1.0) * t as f64 / users as f64 + 1.0
            }
        })
        .collect()
}

/// Cache sizes of the decentralized grid `M = (N-1)t/N + 1`, `t = 1..N`.
pub fn decentralized_grid(files: usize) -> Vec<f64> {
    (1..=files)
        .map(|t| {
            if t == files {
                files as f64
            } else {
                (files as f64 - 1.0) * t as f64 / files as f64 + 1.0
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyMemorySplit {
    pub t: usize,
    pub m: f64,
    pub m_data: f64,
    pub m_key: f64,
    pub num_keys: u128,
    /// Fewest compromised caches that reveal every key; `None` without keys.
    pub exposure_threshold: Option<usize>,
    /// `M_D ≥ M_K`, equivalently `M ≥ 2N/(N+1)`.
    pub data_dominates: bool,
    /// `M ≤ (N-1)(K-1)/K + 1`.
    pub below_single_key_bound: bool,
    /// At least two distinct keys exist.
    pub multi_key: bool,
    /// `2N/(N+1) ≤ M ≤ (N-1)(K-1)/K + 1`.
    pub desirable: bool,
    /// `regime-j` where `j = K + 1 - exposure_threshold`; `no-keys` at `t = K`.
    pub regime: String,
}

/// One row per centralized grid point `t = 0..K`.
pub fn keymem_tradeoff(files: usize, users: usize) -> Result<Vec<KeyMemorySplit>> {
    if files < 2 || users == 0 {
        return Err(param("key/data trade-off needs N ≥ 2 and K ≥ 1"));
    }
    let (n, k) = (files as f64, users as f64);
    let crossing = 2.0 * n / (n + 1.0);
    let single_key_bound = (n - 1.0) * (k - 1.0) / k + 1.0;
    let grid = centralized_grid(files, users);
    (0..=users)
        .map(|t| {
            let frac = t as f64 / k;
            let (m_data, m_key) = (n * frac, 1.0 - frac);
            let m = grid[t];
            let num_keys = binomial(users, t + 1).ok_or_else(|| param("key count overflows"))?;
            let exposure_threshold = (t < users).then(|| users - t);
            Ok(KeyMemorySplit {
                t,
                m,
                m_data,
                m_key,
                num_keys,
                exposure_threshold,
                data_dominates: m_data >= m_key,
                below_single_key_bound: m <= single_key_bound + M_TOL,
                multi_key: num_keys >= 2,
                desirable: m >= crossing - M_TOL && m <= single_key_bound + M_TOL,
                regime: match exposure_threshold {
                    Some(r) => format!("regime-{}", users + 1 - r),
                    None => String::from("no-keys"),
                },
            })
        })
        .collect()
}

/// Whether any `r` compromised caches jointly hold every key of the
/// centralized scheme at parameter `t`: true iff `t ≥ K - r`.
pub fn compromise_exposure(users: usize, t: usize, r: usize) -> Result<bool> {
    if users == 0 || t >= users {
        return Err(param(format!("t = {t} outside 0..{users}")));
    }
    if r > users {
        return Err(param(format!("r = {r} exceeds K = {users}")));
    }
    Ok(t + r >= users)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub scheme: Scheme,
    #[serde(rename = "N")]
    pub files: usize,
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "R_secure")]
    pub r_secure: f64,
    #[serde(rename = "R_baseline")]
    pub r_baseline: Option<f64>,
    #[serde(rename = "R_lower")]
    pub r_lower: f64,
    pub gap: Option<f64>,
    pub regime_valid: bool,
}

/// Achievable rate, bound and gap for one scheme at one cache size.
pub fn rate_report(scheme: Scheme, files: usize, users: usize, m: f64) -> Result<RateReport> {
    let r_lower = lower_bound(files, users, m)?;
    let (r_secure, r_baseline, gap, regime_valid) = match scheme {
        Scheme::Centralized => {
            let g = gap_centralized(files, users, m)?;
            (
                centralized_rate(files, users, m)?,
                Some(nonsecure_baseline_rate(files, users, m)?),
                g.ratio,
                g.regime_valid,
            )
        }
        Scheme::Decentralized => {
            let g = gap_decentralized(files, users, m)?;
            (
                decentralized_rate(files, users, m)?,
                None,
                g.to_lower_bound,
                g.regime_valid,
            )
        }
    };
    Ok(RateReport {
        scheme,
        files,
        users,
        m,
        r_secure,
        r_baseline,
        r_lower,
        gap,
        regime_valid,
    })
}

fn scheme_order(s: Scheme) -> u8 {
    match s {
        Scheme::Centralized => 0,
        Scheme::Decentralized => 1,
    }
}

/// Rows for every scheme and cache size, ordered by scheme then `M`.
pub fn tradeoff_curve(
    files: usize,
    users: usize,
    schemes: &[Scheme],
    grid: &[f64],
) -> Result<Vec<RateReport>> {
    let mut schemes = schemes.to_vec();
    schemes.sort_by_key(|s| scheme_order(*s));
    schemes.dedup();
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut rows = Vec::with_capacity(schemes.len() * grid.len());
    for scheme in schemes {
        for &m in &grid {
            rows.push(rate_report(scheme, files, users, m)?);
        }
    }
    Ok(rows)
}

/// `points + 1` evenly spaced cache sizes on `[1, N]` merged with the
/// centralized grid.
pub fn default_grid(files: usize, users: usize, points: usize) -> Vec<f64> {
    let n = files as f64;
    let mut grid = centralized_grid(files, users);
    if files > 1 {
        grid.extend((0..=points).map(|i| 1.0 + (n - 1.0) * i as f64 / points.max(1) as f64));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    grid
}

/// Largest gap over the in-regime grid points of one `(N, K)`, as the
/// report at the maximizing `M`. Decentralized sweeps cover the union of
/// both grids inside the decentralized regime.
pub fn max_gap(scheme: Scheme, files: usize, users: usize) -> Result<Option<RateReport>> {
    let candidates: Vec<f64> = match scheme {
        Scheme::Centralized => {
            let start = centralized_regime_start(files, users) - M_TOL;
            centralized_grid(files, users)
                .into_iter()
                .filter(|&m| m >= start)
                .collect()
        }
        Scheme::Decentralized => {
            if files < 2 {
                return Ok(None);
            }
            let start = decentralized_regime_start(files) - M_TOL;
            let mut g = decentralized_grid(files);
            g.extend(
                centralized_grid(files, users)
                    .into_iter()
                    .filter(|&m| m >= start),
            );
            g.sort_by(f64::total_cmp);
            g.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            g
        }
    };
    let mut best: Option<RateReport> = None;
    for m in candidates {
        let row = rate_report(scheme, files, users, m)?;
        let worse = match (&best, row.gap) {
            (None, _) => true,
            (Some(b), Some(g)) => b.gap.is_some_and(|bg| g > bg),
            (Some(_), None) => true,
        };
        if worse {
            best = Some(row);
        }
    }
    Ok(best)
}

/// One max-gap row per scheme and `(N, K)` in `1..=n_max × 1..=k_max`.
pub fn gap_sweep(n_max: usize, k_max: usize, schemes: &[Scheme]) -> Result<Vec<RateReport>> {
    let mut rows = Vec::new();
    let mut schemes = schemes.to_vec();
    schemes.sort_by_key(|s| scheme_order(*s));
    schemes.dedup();
    for scheme in schemes {
        for files in 1..=n_max {
            for users in 1..=k_max {
                if let Some(row) = max_gap(scheme, files, users)? {
                    rows.push(row);
                }
            }
        }
    }
    Ok(rows)
}

/// `max_M (R^C_s(M) - R_baseline(M))` over `[1, N]`. Both curves are
/// piecewise linear, so the maximum sits on a breakpoint of either grid.
pub fn security_cost(files: usize, users: usize) -> Result<f64> {
    let n = files as f64;
    let mut points = centralized_grid(files, users);
    points.extend(
        (0..=users)
            .map(|t| n * t as f64 / users as f64)
            .filter(|&m| m >= 1.0),
    );
    let mut best = f64::NEG_INFINITY;
    for m in points {
        let m = m.min(n);
        best = best
            .max(centralized_rate(files, users, m)? - nonsecure_baseline_rate(files, users, m)?);
    }
    Ok(best)
}

/// `max_M (R^D_s(M) - R^C_s(M))` over `samples + 1` evenly spaced points
/// of `[1, N]` plus the centralized grid.
pub fn decentralization_cost(files: usize, users: usize, samples: usize) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for m in default_grid(files, users, samples) {
        best = best.max(decentralized_rate(files, users, m)? - centralized_rate(files, users, m)?);
    }
    Ok(best)
}
