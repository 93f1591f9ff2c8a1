fn main() {
    print!("{}", tfm_cli::runner::golden_matrix_text());
}
