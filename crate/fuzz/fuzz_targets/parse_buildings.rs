#![no_main]

use lcfuse_core::geo::UtmZone;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let zone = UtmZone::parse("17N").unwrap();
    let _ = lcfuse_core::io::parse_buildings(data, zone);
});
