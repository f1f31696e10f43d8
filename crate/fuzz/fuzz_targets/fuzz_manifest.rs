#![no_main]

use libfuzzer_sys::fuzz_target;

// A manifest parsed back from its own serialization must round-trip
// byte-identically; arbitrary input must never panic.
fuzz_target!(|data: &[u8]| {
    if let Ok(manifest) = illumdet::dataset::load_manifest(data) {
        let mut buf = Vec::new();
        illumdet::dataset::save_manifest(&manifest, &mut buf).unwrap();
        let reloaded = illumdet::dataset::load_manifest(buf.as_slice()).unwrap();
        let mut buf2 = Vec::new();
        illumdet::dataset::save_manifest(&reloaded, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }
});
