mod al;
mod args;
mod pipeline;
mod report;
mod util;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use trustlens_service::ServiceConfig;

use args::{AlCommand, Cli, Command, ServeArgs};
use util::{invalid, Invalid};

fn serve(args: &ServeArgs) -> Result<()> {
    let mut cfg = ServiceConfig::load(args.config.as_deref()).map_err(invalid)?;
    if let Some(bind) = &args.bind {
        cfg.bind = bind.clone();
    }
    if let Some(dir) = &args.state_dir {
        cfg.state_dir = Some(dir.clone());
    }
    if let Some(dir) = &args.static_dir {
        cfg.static_dir = Some(dir.clone());
    }
    serve_config(cfg)
}

pub(crate) fn serve_config(cfg: ServiceConfig) -> Result<()> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&cfg.bind).await?;
        // stdout is line-buffered; tests read the bound address from here
        println!("listening on http://{}", listener.local_addr()?);
        trustlens_service::serve_on(listener, cfg).await.map_err(|e| match e {
            trustlens_service::ServiceError::Io(io) => anyhow::Error::from(io),
            other => invalid(other),
        })
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => pipeline::ingest(&a),
        Command::Score(a) => pipeline::score(&a),
        Command::Normalize(a) => pipeline::normalize(&a),
        Command::Train(a) => pipeline::train(&a),
        Command::Al(AlCommand::Run(a)) => al::run(&a),
        Command::Al(AlCommand::Simulate(a)) => al::simulate(&a),
        Command::Serve(a) => serve(&a),
        Command::Report(a) => report::report(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Invalid>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
