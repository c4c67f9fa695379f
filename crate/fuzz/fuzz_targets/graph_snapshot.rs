#![no_main]

use libfuzzer_sys::fuzz_target;
use onionsel::LatencyGraph;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(graph) = LatencyGraph::from_json(text) {
        let again = LatencyGraph::from_json(&graph.to_json().expect("serializable")).expect("round trip");
        assert_eq!(graph, again);
        let _ = graph.analytical_graph();
    }
});
