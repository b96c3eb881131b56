//! Prints the usages detected in a compiled AST file as JSON.

use std::path::PathBuf;

use scrcheck_core::features::compiler::load_ast_file;
use scrcheck_core::features::{build_composite_graph, detect_scr_usages};

fn main() {
    let path = PathBuf::from(std::env::args().nth(1).expect("usage: dump_usages <file.ast.json>"));
    let model = load_ast_file(&path).expect("load AST");
    let graph = build_composite_graph(&model);
    let usages = detect_scr_usages(&model, &graph);
    println!("{}", serde_json::to_string_pretty(&usages).expect("serialize"));
}
