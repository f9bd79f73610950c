use clap::Parser;

use svrpll_cli::args::Cli;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SVRPLL_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help and version are successful exits; everything else is a
            // usage error with the sysexits code.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => svrpll_cli::EXIT_USAGE,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(svrpll_cli::run(&cli.command));
}
