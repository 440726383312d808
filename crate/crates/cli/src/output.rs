//! File formats: CSV sweeps, the binary payload dump and the fragment map.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use securecache_core::analysis::{KeyMemorySplit, RateReport};
use securecache_core::decentralized::FragmentMap;
use securecache_core::{BitBlock, DeliveryPayload, PayloadRecord, SubsetId};

pub const RATE_HEADER: [&str; 9] = [
    "scheme",
    "N",
    "K",
    "M",
    "R_secure",
    "R_baseline",
    "R_lower",
    "gap",
    "regime_valid",
];

pub const KEYMEM_HEADER: [&str; 13] = [
    "N",
    "K",
    "t",
    "M",
    "M_data",
    "M_key",
    "num_keys",
    "exposure_threshold",
    "data_dominates",
    "below_single_key_bound",
    "multi_key",
    "desirable",
    "regime",
];

/// Shortest rendering with at most 12 significant digits, `%.12g` style.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn opt(x: Option<f64>, missing: &str) -> String {
    x.map_or_else(|| missing.to_string(), fmt_sig)
}

/// Rows in the shared rate CSV format. A missing baseline is an empty
/// field; an unbounded gap is `inf`.
pub fn write_rate_csv<W: Write>(out: W, rows: &[RateReport]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RATE_HEADER)?;
    for r in rows {
        w.write_record([
            r.scheme.to_string(),
            r.files.to_string(),
            r.users.to_string(),
            fmt_sig(r.m),
            fmt_sig(r.r_secure),
            opt(r.r_baseline, ""),
            fmt_sig(r.r_lower),
            opt(r.gap, "inf"),
            r.regime_valid.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_keymem_csv<W: Write>(
    out: W,
    files: usize,
    users: usize,
    rows: &[KeyMemorySplit],
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(KEYMEM_HEADER)?;
    for r in rows {
        w.write_record([
            files.to_string(),
            users.to_string(),
            r.t.to_string(),
            fmt_sig(r.m),
            fmt_sig(r.m_data),
            fmt_sig(r.m_key),
            r.num_keys.to_string(),
            r.exposure_threshold
                .map_or_else(String::new, |x| x.to_string()),
            r.data_dominates.to_string(),
            r.below_single_key_bound.to_string(),
            r.multi_key.to_string(),
            r.desirable.to_string(),
            r.regime.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Payload dump: per record, one byte with the member count, one byte per
/// member (1-based user index), then the ciphertext as an 8-byte
/// little-endian bit length followed by the packed bits.
pub fn write_payload_dump<W: Write>(mut out: W, payload: &DeliveryPayload) -> io::Result<()> {
    for record in &payload.records {
        let members = record.subset.to_vec();
        if members.iter().any(|&m| m > u8::MAX as usize) {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                "user index exceeds one byte",
            ));
        }
        out.write_all(&[members.len() as u8])?;
        out.write_all(&members.iter().map(|&m| m as u8).collect::<Vec<_>>())?;
        out.write_all(&record.ciphertext.to_bytes())?;
    }
    out.flush()
}

pub fn read_payload_dump<R: Read>(mut input: R) -> io::Result<DeliveryPayload> {
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut records = Vec::new();
    let mut at = 0;
    while at < bytes.len() {
        let count = bytes[at] as usize;
        at += 1;
        let members = bytes
            .get(at..at + count)
            .ok_or_else(|| bad("truncated member list"))?;
        let subset = SubsetId::from_members(members.iter().map(|&m| m as usize))
            .map_err(|e| bad(&e.to_string()))?;
        at += count;
        let (ciphertext, used) =
            BitBlock::from_bytes(&bytes[at..]).map_err(|e| bad(&e.to_string()))?;
        at += used;
        records.push(PayloadRecord { subset, ciphertext });
    }
    Ok(DeliveryPayload { records })
}

/// `{file: {subset label: bits}}`, files numbered from 1; subsets whose
/// fragment is empty are included so every file lists all `2^K` labels.
pub fn fragment_map_json(map: &FragmentMap) -> serde_json::Value {
    let files: BTreeMap<String, BTreeMap<String, usize>> = map
        .sizes()
        .into_iter()
        .enumerate()
        .map(|(i, sizes)| {
            let per = sizes.into_iter().map(|(s, n)| (s.label(), n)).collect();
            ((i + 1).to_string(), per)
        })
        .collect();
    serde_json::to_value(files).expect("string keys")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_formatting() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(0.5), "0.5");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(38.0 / 27.0), "1.40740740741");
        assert_eq!(fmt_sig(5.0 / 3.0), "1.66666666667");
        assert_eq!(fmt_sig(123456789012345.0), "1.23456789012e14");
        assert_eq!(fmt_sig(1e-7), "1e-7");
        assert_eq!(fmt_sig(-2.25), "-2.25");
        assert_eq!(fmt_sig(f64::INFINITY), "inf");
    }

    #[test]
    fn dump_round_trip() {
        let payload = DeliveryPayload {
            records: vec![
                PayloadRecord {
                    subset: SubsetId::from_members([1, 3]).unwrap(),
                    ciphertext: BitBlock::parse("10110").unwrap(),
                },
                PayloadRecord {
                    subset: SubsetId::singleton(2),
                    ciphertext: BitBlock::new(),
                },
            ],
        };
        let mut buf = Vec::new();
        write_payload_dump(&mut buf, &payload).unwrap();
        // 1 + 2 + (8 + 1) then 1 + 1 + 8.
        assert_eq!(buf.len(), 12 + 10);
        assert_eq!(&buf[..3], &[2, 1, 3]);
        assert_eq!(read_payload_dump(buf.as_slice()).unwrap(), payload);
        assert!(read_payload_dump(&buf[..5]).is_err());
    }
}
