mod common;

use bimcp::ifc::guid;
use common::oracles::{oracle_decode, oracle_encode};
use rand::{Rng, SeedableRng};

#[test]
fn round_trips_against_bigint_oracle() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    for _ in 0..10_000 {
        let x: u128 = rng.gen();
        let s = guid::encode(x);
        assert_eq!(s.len(), 22);
        assert!(s.as_bytes()[0] <= b'3');
        assert_eq!(s, oracle_encode(x));
        assert_eq!(guid::decode(&s).unwrap(), x);
        assert_eq!(oracle_decode(&s), x);
    }
}

#[test]
fn fresh_guids_are_valid_and_distinct() {
    let set: std::collections::HashSet<String> = (0..1000).map(|_| guid::new_guid()).collect();
    assert_eq!(set.len(), 1000);
    assert!(set.iter().all(|g| guid::is_valid(g)));
}
