#![no_main]
use libfuzzer_sys::fuzz_target;

use beamgraph::graphbuild::ConflictGraph;
use beamgraph::matching::{check_feasible, greedy_match, is_maximal};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // a graph dump that deserializes and validates must be safe to solve
    if let Ok(graph) = ConflictGraph::from_json(text) {
        let sol = greedy_match(&graph, 4, 2);
        assert!(check_feasible(&sol, &graph, 4, 2).ok);
        assert!(is_maximal(&sol, &graph, 4, 2));
    }
});
