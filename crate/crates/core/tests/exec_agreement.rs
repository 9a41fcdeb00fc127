//! Mini interpreter vs. Icarus Verilog on the same stimuli. Skips when
//! `iverilog` is not installed.

use std::process::Command;

use verirank_core::exec::{
    Design, ExecStatus, Executor, ExternalConfig, ExternalSimulator, MiniBackend, StimulusTable,
};

fn have_iverilog() -> bool {
    Command::new("iverilog").arg("-V").output().is_ok()
}

const DESIGNS: &[&str] = &[
    "module d(input [3:0] a, input [3:0] b, output [4:0] s); assign s = a + b; endmodule",
    "module d(input [3:0] a, input [3:0] b, output [4:0] s); assign s = a - b; endmodule",
    "module d(input [3:0] a, input [3:0] b, output [4:0] s); assign s = {1'b0, a ^ b}; endmodule",
    "module d(input [3:0] a, input [3:0] b, output [4:0] s); assign s = (a > b) ? a : {b[0], b}; endmodule",
    "module d(input [3:0] a, input [3:0] b, output [4:0] s); wire [3:0] t = a & ~b; assign s = t << 1; endmodule",
];

#[test]
fn mini_and_simulator_agree() {
    if !have_iverilog() {
        eprintln!("iverilog not found; skipping agreement check");
        return;
    }
    let reference = Design::elaborate(DESIGNS[0]).unwrap();
    let mut table = StimulusTable::default();
    for (a, b) in [(0u64, 0u64), (3, 5), (15, 15), (9, 12), (7, 1)] {
        table
            .inputs
            .push([("a".into(), a.into()), ("b".into(), b.into())].into());
        table.expected.push([("s".into(), (a + b).into())].into());
    }
    let json = serde_json::to_string(&table).unwrap();
    let tb = table.to_testbench(reference.interface()).unwrap();
    let sim = ExternalSimulator::new(ExternalConfig::icarus());
    for src in DESIGNS {
        let mini = MiniBackend.execute(src, &json).status;
        let ext = sim.execute(src, &tb);
        assert_ne!(ext.status, ExecStatus::InfraError, "{}", ext.stdout_excerpt);
        assert_eq!(mini, ext.status, "{src}\n{}", ext.stdout_excerpt);
    }
}

#[test]
fn generated_testbench_parses() {
    let d = Design::elaborate(DESIGNS[0]).unwrap();
    let table = StimulusTable::parse(r#"{"inputs":[{"a":1,"b":2}],"expected":[{"s":3}]}"#).unwrap();
    let tb = table.to_testbench(d.interface()).unwrap();
    assert!(verirank_core::syntax::check_syntax(&tb).is_valid());
}
