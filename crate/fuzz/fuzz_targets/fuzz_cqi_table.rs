#![no_main]
use libfuzzer_sys::fuzz_target;

use beamgraph::channel::{cqi_rate, CqiTable};

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = CqiTable::parse_csv(data) {
        table.validate().unwrap();
        // lookups stay monotone over the accepted table
        let mut last = -1.0;
        for db in -30..40 {
            let r = cqi_rate(db as f64, &table, 1.0);
            assert!(r >= last);
            last = r;
        }
    }
});
