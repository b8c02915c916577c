//! Write the SDPA exports used by the external cross-check fixtures.

use ncts_core::cases;
use ncts_core::lmi::{export_sdpa, known_fault_system, uncertain_fault_system, SdpaObjective, SynthesisScalars};

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/sdpa".into());
    std::fs::create_dir_all(&out).unwrap();
    let sc = SynthesisScalars::default();

    let case1 = cases::case1();
    let g0 = case1.model.fault.g0();
    let known = known_fault_system(&case1.model, &g0, &sc).unwrap();
    std::fs::write(
        format!("{out}/case1_known.dat-s"),
        export_sdpa(&known, SdpaObjective::Feasibility).unwrap(),
    )
    .unwrap();

    for case in [cases::case1(), cases::case2(), cases::case3()] {
        let sys = uncertain_fault_system(&case.model, &sc).unwrap();
        std::fs::write(
            format!("{out}/{}_uncertain.dat-s", case.name),
            export_sdpa(&sys, SdpaObjective::Feasibility).unwrap(),
        )
        .unwrap();
    }
    println!("wrote SDPA exports to {out}");
}
