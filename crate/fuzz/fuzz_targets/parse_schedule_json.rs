#![no_main]

use holonomic::Schedule;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(schedule) = Schedule::from_json(text) {
        assert!(schedule.validate().is_ok());
        let back = Schedule::from_json(&schedule.to_json().unwrap()).unwrap();
        assert_eq!(back.segments.len(), schedule.segments.len());
    }
});
