#![no_main]
use libfuzzer_sys::fuzz_target;

use beamgraph::scenario::parse_gnbs_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(sites) = parse_gnbs_csv(data) {
        let mut ids: Vec<u32> = sites.iter().map(|s| s.id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), sites.len(), "ids must be unique");
        assert!(sites
            .iter()
            .all(|s| s.position.x.is_finite() && s.position.y.is_finite()));
    }
});
