#![no_main]

use gasket_core::io::SolutionFile;
use gasket_core::PrefractalGraph;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(sol) = SolutionFile::from_json(text) else {
        return;
    };
    if sol.n > 6 || sol.level > 3 {
        return;
    }
    let Ok(graph) = PrefractalGraph::build(sol.n, sol.level) else {
        return;
    };
    if let Ok(field) = sol.field_for(&graph) {
        assert_eq!(field.len(), graph.vertex_count());
    }
});
