#![no_main]

use holonomic::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = RunConfig::from_json(text) else { return };
    // Resolution may reject the values but must not panic.
    if let Ok(run) = cfg.resolve() {
        let _ = run.schedule();
    }
    let _ = cfg.scan_grid();
});
