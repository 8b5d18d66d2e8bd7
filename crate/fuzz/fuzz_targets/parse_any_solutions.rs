#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = lcfuse_core::io::parse_any_solutions(data);
});
