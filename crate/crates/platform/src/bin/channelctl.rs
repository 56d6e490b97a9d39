use clap::Parser;

use chanplat::cli::{self, Cli, Command};

fn init_logging(fallback: &str) {
    let mut builder = env_logger::Builder::new();
    match std::env::var("CHANNELCTL_LOG") {
        Ok(filter) => builder.parse_filters(&filter),
        Err(_) => builder.parse_filters(fallback),
    };
    let _ = builder.try_init();
}

fn main() {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Send(args) => {
            init_logging(&args.common.log);
            cli::run_send(args)
        }
        Command::Serve(args) => {
            init_logging(&args.common.log);
            cli::run_serve(args)
        }
        Command::Echo(args) => {
            init_logging(&args.common.log);
            cli::run_echo(args)
        }
    };
    std::process::exit(code);
}
