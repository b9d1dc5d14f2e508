// Scratch diagnosis: which update stalls, and where the cost goes.
use shiftsep::model::parseval_cost;
use shiftsep::solver::{init_random, solve_from, update_h, update_tau, update_w, SolverConfig};
use shiftsep::synth::presets;

fn main() {
    let data = presets::build("random-3x18", 42, None).unwrap();
    let v = &data.v;
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);

    // Reproduce the stalled state quickly.
    let config = SolverConfig {
        max_iterations: 2000,
        seed,
        ..SolverConfig::default()
    };
    let init = init_random(18, 3, 128, seed).unwrap();
    let stalled = solve_from(v, init, &config).unwrap().solution;
    let c0 = parseval_cost(v, &stalled).unwrap();
    println!("cost at stall: {c0:.6e}, R={:.5}", stalled.r);

    let mut sol = stalled;
    for step in 0..40 {
        let after_h = update_h(v, &sol).unwrap();
        let ch = parseval_cost(v, &after_h).unwrap();
        let dh: f64 = after_h
            .h
            .data()
            .iter()
            .zip(sol.h.data().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let after_w = update_w(v, &after_h).unwrap();
        let cw = parseval_cost(v, &after_w).unwrap();
        let dw: f64 = after_w
            .w
            .data()
            .iter()
            .zip(after_h.w.data().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let after_t = update_tau(v, &after_w).unwrap();
        let ct = parseval_cost(v, &after_t).unwrap();
        let dt: f64 = after_t
            .tau
            .data()
            .iter()
            .zip(after_w.tau.data().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if step % 5 == 0 {
            println!(
                "step {step}: cost {:.6e} -> H {:.3e} (dH {:.2e}) -> W {:.3e} (dW {:.2e}) -> tau {:.3e} (dtau {:.2e})",
                parseval_cost(v, &sol).unwrap(),
                ch,
                dh,
                cw,
                dw,
                ct,
                dt
            );
        }
        sol = after_t;
    }
}
