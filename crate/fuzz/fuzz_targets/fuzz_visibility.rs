#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = illumdet::sim::load_visibility(data) {
        let mut buf = Vec::new();
        illumdet::sim::save_visibility(&table, &mut buf).unwrap();
        let reloaded = illumdet::sim::load_visibility(buf.as_slice()).unwrap();
        assert_eq!(reloaded.entries(), table.entries());
    }
});
