mod common;

use evalplan::optimizer::{optimize, oracle_optimize};
use evalplan::plan::write_plan;

#[test]
#[ignore]
fn debug_seed_67() {
    let case = common::random_input(0xACCE_0000 + 67, 200_000);
    println!("program:\n{}", case.program_text);
    println!("constraints:\n{}", case.constraints_text);
    println!("strategy: {}", case.strategy_text);
    let oracle = oracle_optimize(&case.input, 10_000_000).unwrap();
    println!("oracle cost {} with {} optima", oracle.cost, oracle.optimal.len());
    println!(
        "oracle plan:\n{}",
        write_plan(&oracle.optimal[0], case.input.program())
    );
    match optimize(&case.input) {
        Ok(o) => println!("optimizer cost {}\n{}", o.cost, write_plan(&o.plan, case.input.program())),
        Err(e) => println!("optimizer error {}", e),
    }
}
