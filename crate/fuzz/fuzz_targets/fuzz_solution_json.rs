#![no_main]
use libfuzzer_sys::fuzz_target;

use beamgraph::matching::{random_instance, solution_weight, Solution};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(sol) = Solution::from_json(text) {
        // validating against a fixed graph must never panic, and an
        // accepted solution must support weight recomputation or report a
        // consistency error
        let inst = random_instance(1);
        if sol.validate_against(&inst.graph).is_ok() {
            let _ = solution_weight(&sol, &inst.graph);
        }
    }
});
