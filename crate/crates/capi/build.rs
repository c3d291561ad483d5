fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR");
    let header = std::path::Path::new(&crate_dir).join("include").join("evalplan.h");
    std::fs::create_dir_all(header.parent().unwrap()).expect("create include dir");
    match cbindgen::generate(&crate_dir) {
        Ok(bindings) => {
            bindings.write_to_file(&header);
        }
        // Keep a stale committed header usable when cbindgen cannot run
        // (e.g. syntax the parser does not know yet).
        Err(e) => println!("cargo:warning=cbindgen failed: {}", e),
    }
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
