use clap::Parser;
use mixdialog::EngineConfig;
use mixdialog_service::{serve, ServeArgs};

#[derive(Parser)]
#[command(about = "Serve dialog sessions over HTTP")]
struct Cli {
    #[command(flatten)]
    serve: ServeArgs,
}

#[tokio::main]
async fn main() {
    let cli = Cli::parse();
    if let Err(e) = serve(cli.serve, EngineConfig::default()).await {
        eprintln!("error: {e}");
        std::process::exit(2);
    }
}
