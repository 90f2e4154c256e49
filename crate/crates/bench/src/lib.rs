//! Benchmarks live in `benches/`; run them with `cargo bench -p pnpgl-bench`.

use pnpgl::graph_filter::build_filter;
use pnpgl::signals::{add_noise, make_signal_1d};
use pnpgl::{GraphFilter, KernelConfig, NoiseModel, Provenance, Signal};

/// Invertible kernel: the spatial factor keeps `W` nonsingular.
pub fn kernel() -> KernelConfig {
    KernelConfig {
        h: 0.3,
        patch_size: 5,
        search_radius: None,
        spatial_sigma: Some(1.5),
    }
}

/// Clean signal, noisy copy and oracle filter of length `n`.
pub fn fixture(n: usize) -> (Signal, Signal, GraphFilter) {
    let x = make_signal_1d(n, 1).expect("signal");
    let y = add_noise(&x, &NoiseModel::new(0.05, 2).expect("noise"));
    let w = build_filter(&x, &kernel(), Provenance::Oracle).expect("filter");
    (x, y, w)
}
