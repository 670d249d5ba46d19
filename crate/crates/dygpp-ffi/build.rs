//! Generate the C header for the FFI surface at build time.

use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").expect("manifest dir"));
    let header = crate_dir.join("include").join("dygpp.h");
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    let config = cbindgen::Config::from_root_or_default(&crate_dir);
    match cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
    {
        Ok(bindings) => {
            std::fs::create_dir_all(header.parent().unwrap()).expect("include dir");
            bindings.write_to_file(&header);
        }
        // Never fail the build over header generation (e.g. during vendored
        // builds where cbindgen's parser chokes); the header is a artifact
        // convenience, not a compile dependency.
        Err(e) => println!("cargo:warning=cbindgen failed: {e}"),
    }
}
