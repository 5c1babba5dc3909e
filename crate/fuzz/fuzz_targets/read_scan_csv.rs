#![no_main]

use holonomic::scans::ScanTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(table) = ScanTable::read_csv_from(data) else { return };
    let mut out = Vec::new();
    table.write_csv_to(&mut out).unwrap();
    let again = ScanTable::read_csv_from(out.as_slice()).unwrap();
    assert_eq!(again.rows.len(), table.rows.len());
});
