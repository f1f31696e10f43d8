#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(split) = illumdet::dataset::load_split(data) {
        let mut buf = Vec::new();
        illumdet::dataset::save_split(&split, &mut buf).unwrap();
        assert_eq!(
            illumdet::dataset::load_split(buf.as_slice()).unwrap(),
            split
        );
    }
});
