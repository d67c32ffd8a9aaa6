#![no_main]
use libfuzzer_sys::fuzz_target;

use beamgraph::scenario::Trace;

fuzz_target!(|data: &[u8]| {
    // parsing untrusted trace CSV must never panic, and a successful parse
    // must uphold the trace invariants
    if let Ok(trace) = Trace::parse_csv(data, 1.0) {
        let mut last = f64::NEG_INFINITY;
        for r in &trace.records {
            assert!(r.time_s >= last);
            assert!(r.time_s <= trace.horizon_s);
            last = r.time_s;
        }
        // round trip stays identical
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let reloaded = Trace::parse_csv(buf.as_slice(), 1.0).unwrap();
        assert_eq!(trace, reloaded);
    }
});
