use clap::Parser;

fn main() {
    let cli = seqcf_cli::Cli::parse();
    if let Err(e) = seqcf_cli::run(cli) {
        let msg = format!("{e:#}").replace('\n', " ");
        eprintln!("error: {msg}");
        std::process::exit(1);
    }
}
