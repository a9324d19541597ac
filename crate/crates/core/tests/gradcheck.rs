mod common;

use common::{network_check, op_checks, Check};
use spsn::network::NeuronKind;

const OP_TOL: f64 = 1e-4;
const NET_TOL: f64 = 1e-3;

fn assert_close(name: &str, c: Check, tol: f64) {
    println!(
        "{name}: max rel err {:.3e} over {} coords",
        c.max_rel, c.coords
    );
    assert!(c.max_rel < tol, "{name}: {:.3e} >= {tol:.0e}", c.max_rel);
}

#[test]
fn every_op_matches_central_differences() {
    let checks = op_checks().unwrap();
    assert!(checks.len() >= 15);
    for (name, c) in checks {
        assert_close(&name, c, OP_TOL);
    }
}

#[test]
fn networks_match_central_differences() {
    for kind in NeuronKind::ALL {
        for layers in [1, 2] {
            let c = network_check(kind, layers, 24).unwrap();
            assert_close(&format!("{kind} with {layers} hidden"), c, NET_TOL);
        }
    }
}
