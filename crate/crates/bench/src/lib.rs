//! Shared setup for the criterion benches: prebuilt diagrams, colorings and
//! log-colorings so the benchmarks measure the kernels, not fixture setup.

use holoknot_core::coloring::{load_shadow, parameters};
use holoknot_core::diagram::{builtin, OpenDiagram};
use holoknot_core::fixtures::trefoil_generic_rep;
use holoknot_core::quantize::LogColoring;
use holoknot_core::Tolerances;

pub fn trefoil_setup() -> (OpenDiagram, LogColoring) {
    let d = builtin("trefoil").expect("builtin");
    let tol = Tolerances::default();
    let doc = trefoil_generic_rep();
    let shadow = load_shadow(&d, &doc, &tol).expect("fixture loads");
    let params = parameters(&shadow, &d, &tol);
    let lc = LogColoring::from_parameters(&params, None).expect("normalized fixture");
    (d, lc)
}
