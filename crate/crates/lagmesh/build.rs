fn main() {
    // Link the system OpenBLAS (provides BLAS + LAPACK) for ndarray-linalg.
    println!("cargo:rustc-link-lib=dylib=openblas");
    println!("cargo:rustc-link-search=native=/usr/lib/x86_64-linux-gnu");
}
