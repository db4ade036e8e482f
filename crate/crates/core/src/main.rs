use std::io::Write;

fn main() {
    let out = fmha_sim::cli::run_from_args(std::env::args_os());
    print!("{}", out.text);
    eprint!("{}", out.diagnostics);
    std::io::stdout().flush().ok();
    std::process::exit(out.code);
}
