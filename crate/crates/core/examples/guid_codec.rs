//! Encode and decode IFC GlobalIds.
//!
//! cargo run --example guid_codec -- 2tqW1LM$p_3lUDeYAlL5aM

use bimcp::ifc::guid::{self, GuidGenerator};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() {
        let mut g = GuidGenerator::seeded([7; 32]);
        for _ in 0..3 {
            let bits = g.next_bits();
            println!("{bits:032x} -> {}", guid::encode(bits));
        }
        return;
    }
    for a in args {
        match guid::decode(&a) {
            Ok(bits) => println!("{a} -> {bits:032x} (round trip {})", guid::encode(bits) == a),
            Err(e) => println!("{a}: {e}"),
        }
    }
}
