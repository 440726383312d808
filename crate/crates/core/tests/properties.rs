use proptest::prelude::*;

use securecache_core::analysis::{lower_bound, nonsecure_baseline_rate, rate_report};
use securecache_core::centralized::{
    centralized_rate, decode_centralized, deliver_centralized, place_centralized,
};
use securecache_core::decentralized::{
    decentralized_rate, decode_decentralized, deliver_decentralized, DecentralizedPlacement,
    DeliveryMode,
};
use securecache_core::secrecy::structural_otp_audit;
use securecache_core::{binomial, DemandVector, FileLibrary, Scheme, SeededStream, SystemParams};

fn demand_strategy(files: usize, users: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(1..=files, users)
}

fn centralized_case() -> impl Strategy<Value = (usize, usize, usize, Vec<usize>, u64)> {
    (2..=5usize, 1..=5usize)
        .prop_flat_map(|(n, k)| (Just(n), Just(k), 0..=k, demand_strategy(n, k), any::<u64>()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn centralized_round_trip((n, k, t, d, seed) in centralized_case(), scale in 1..4usize) {
        let f = binomial(k, t).unwrap() as usize * scale;
        let params = SystemParams::centralized(n, k, f, t, seed).unwrap();
        let mut stream = SeededStream::new(seed);
        let library = FileLibrary::random(n, f, &mut stream);
        let placement = place_centralized(&library, &params, &mut stream).unwrap();
        let demand = DemandVector::new(d.clone(), n).unwrap();
        let payload = deliver_centralized(&placement, &library, &demand).unwrap();
        prop_assert!(structural_otp_audit(&payload, &placement.key_registry).passed());
        for user in 1..=k {
            let got = decode_centralized(&params, placement.cache(user), &payload, &demand).unwrap();
            prop_assert_eq!(&got, library.file(d[user - 1]));
        }
    }

    #[test]
    fn decentralized_round_trip(
        (n, k, d) in (2..=4usize, 1..=4usize).prop_flat_map(|(n, k)| (Just(n), Just(k), demand_strategy(n, k))),
        q in 0.05f64..=1.0,
        f in 1..400usize,
        seed in any::<u64>(),
    ) {
        let m = 1.0 + (n as f64 - 1.0) * q;
        let params = SystemParams::decentralized_from_cache(n, k, f, m, seed).unwrap();
        let mut stream = SeededStream::new(seed);
        let library = FileLibrary::random(n, f, &mut stream);
        let demand = DemandVector::new(d.clone(), n).unwrap();
        let p = DecentralizedPlacement::build(&library, &params, &demand, &mut stream).unwrap();
        let delivery = deliver_decentralized(&p, &library, &demand).unwrap();
        prop_assert_eq!(delivery.payload.total_bits(), delivery.coded_bits.min(delivery.conventional_bits));
        if delivery.mode == DeliveryMode::Coded {
            prop_assert!(structural_otp_audit(&delivery.payload, &p.key_registry).passed());
            for user in 1..=k {
                let got = decode_decentralized(&p.fragment_map, p.cache(user), &delivery.payload, &demand).unwrap();
                prop_assert_eq!(&got, library.file(d[user - 1]));
            }
        } else {
            prop_assert!(structural_otp_audit(&delivery.payload, &p.unicast_keys).passed());
        }
    }

    #[test]
    fn same_seed_same_payload((n, k, t, d, seed) in centralized_case()) {
        let f = binomial(k, t).unwrap() as usize;
        let params = SystemParams::centralized(n, k, f, t, seed).unwrap();
        let run = || {
            let mut stream = SeededStream::new(seed);
            let library = FileLibrary::random(n, f, &mut stream);
            let placement = place_centralized(&library, &params, &mut stream).unwrap();
            deliver_centralized(&placement, &library, &DemandVector::new(d.clone(), n).unwrap()).unwrap()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn rate_ordering(n in 2..60usize, k in 1..60usize, frac in 0.0f64..=1.0) {
        let m = 1.0 + (n as f64 - 1.0) * frac;
        let lb = lower_bound(n, k, m).unwrap();
        let c = centralized_rate(n, k, m).unwrap();
        let d = decentralized_rate(n, k, m).unwrap();
        let base = nonsecure_baseline_rate(n, k, m).unwrap();
        let eps = 1e-9;
        prop_assert!(lb <= c + eps, "lower bound {} above centralized {}", lb, c);
        prop_assert!(c <= d + eps, "centralized {} above decentralized {}", c, d);
        prop_assert!(base <= c + eps, "baseline {} above secure {}", base, c);
    }

    #[test]
    fn rates_non_increasing(n in 2..40usize, k in 1..40usize, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let m = |x: f64| 1.0 + (n as f64 - 1.0) * x;
        for scheme in [Scheme::Centralized, Scheme::Decentralized] {
            let r_lo = rate_report(scheme, n, k, m(lo)).unwrap().r_secure;
            let r_hi = rate_report(scheme, n, k, m(hi)).unwrap().r_secure;
            prop_assert!(r_hi <= r_lo + 1e-9);
        }
    }
}

#[test]
fn infeasible_cache_is_rejected() {
    for scheme in [Scheme::Centralized, Scheme::Decentralized] {
        let err = rate_report(scheme, 3, 3, 0.5).unwrap_err();
        assert_eq!(err.to_string(), "M < 1 infeasible under secure delivery");
    }
}
