//! Parse Blockly XML, validate it against a catalog and print it back.
//!
//! cargo run --example parse_program [FILE]

use gridblock::block_ast::{
    parse_program, serialize_program, validate_program, BlockCatalog, Statement,
};

fn describe(stmts: &[Statement], depth: usize) {
    for s in stmts {
        let pad = "  ".repeat(depth);
        match s {
            Statement::Repeat { times, body } => {
                println!("{pad}repeat {times}");
                describe(body, depth + 1);
            }
            other => println!("{pad}{other:?}"),
        }
    }
}

fn main() {
    let xml = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path).expect("readable file"),
        None => include_str!("../tests/fixtures/tile_reference.xml").to_string(),
    };
    let program = match parse_program(&xml) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("parse error: {e}");
            std::process::exit(2);
        }
    };
    println!("{} blocks", program.block_count());
    for (name, body) in &program.procedures {
        println!("procedure {name}:");
        describe(body, 1);
    }
    println!("main:");
    describe(&program.main, 1);

    let report = validate_program(&program, &BlockCatalog::full());
    for v in &report.violations {
        println!("violation: {v}");
    }
    print!("{}", serialize_program(&program));
}
