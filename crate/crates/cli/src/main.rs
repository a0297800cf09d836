use clap::Parser;

fn main() {
    let cli = match leafspace_cli::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(leafspace_cli::execute(&cli));
}
