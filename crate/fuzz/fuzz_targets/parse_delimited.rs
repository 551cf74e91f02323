#![no_main]

use libfuzzer_sys::fuzz_target;
use smote_cls::data::{parse_delimited, write_delimited};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ds) = parse_delimited(text, "class", "positive") {
        assert_eq!(ds.features.rows(), ds.labels.len());
        // whatever parses must survive a write and re-read unchanged
        let mut out = Vec::new();
        write_delimited(&mut out, &ds, &[]).unwrap();
        let again = parse_delimited(std::str::from_utf8(&out).unwrap(), "class", "positive").unwrap();
        assert_eq!(again, ds);
    }
});
