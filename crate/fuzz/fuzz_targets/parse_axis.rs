#![no_main]

use holonomic::scans::Axis;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(axis) = text.parse::<Axis>() {
        let values = axis.values();
        assert_eq!(values.len(), axis.points);
        assert!(values.iter().all(|v| v.is_finite()));
    }
});
