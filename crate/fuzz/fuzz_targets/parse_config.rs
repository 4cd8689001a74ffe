#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = gasket_core::io::parse_config_str(text) {
        // an accepted config survives its own serialization
        let again = gasket_core::io::parse_config_str(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }
});
