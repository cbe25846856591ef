#![no_main]

use libfuzzer_sys::fuzz_target;

// The store parser must reject arbitrary bytes without panicking or
// allocating from hostile headers.
fuzz_target!(|data: &[u8]| {
    let _ = lebench::store::EmbeddingStore::from_bytes(data);
});
