use clap::Parser;

fn main() {
    let cli = perfhom_cli::Cli::parse();
    if let Err(e) = perfhom_cli::execute(cli) {
        eprintln!("perfhom: {e}");
        std::process::exit(e.exit_code());
    }
}
