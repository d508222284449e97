use std::fs;

fn main() {
    for name in ["madd", "gemm", "atax", "bicg", "2mm", "3mm", "3mm_medium"] {
        let c = fs::read_to_string(format!("crates/tiledflow/assets/kernels/{name}.c")).unwrap();
        let k = tiledflow::frontend::affine_c::parse(&c).unwrap();
        let j = tiledflow::frontend::json::print(&k);
        fs::write(format!("crates/tiledflow/assets/kernels/{name}.json"), j).unwrap();
        println!("{name}: {} loops {} statements", k.loops.len(), k.statements.len());
    }
}
