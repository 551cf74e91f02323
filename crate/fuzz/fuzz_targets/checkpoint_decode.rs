#![no_main]

use libfuzzer_sys::fuzz_target;
use smote_cls::checkpoint::{decode, encode};

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = decode(data) {
        let bytes = encode(&model);
        assert_eq!(decode(&bytes).unwrap(), model);
    }
});
