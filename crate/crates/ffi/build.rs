use std::env;
use std::path::PathBuf;

fn main() {
    let dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").unwrap());
    std::fs::create_dir_all(dir.join("include")).unwrap();
    cbindgen::Builder::new()
        .with_crate(&dir)
        .with_config(cbindgen::Config::from_file(dir.join("cbindgen.toml")).unwrap())
        .generate()
        .expect("unable to generate bindings")
        .write_to_file(dir.join("include").join("renege.h"));
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
