use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;
use maskforge::geometry::CanonicalLayout;
use maskforge::parsing::ParsingLabels;
use maskforge::synth::StyleLibrary;
use maskforge_service::{router, AppState};

#[derive(Debug, Parser)]
#[command(
    name = "maskforge-service",
    version,
    about = "HTTP service for makeup masks"
)]
struct Args {
    #[arg(long, env = "MASKFORGE_ADDR", default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Style library directory; the builtin library when omitted.
    #[arg(long)]
    lib: Option<PathBuf>,
    #[arg(long)]
    canonical: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
}

fn load(args: &Args) -> maskforge::error::Result<AppState> {
    let canon = match &args.canonical {
        Some(p) => CanonicalLayout::load(p)?,
        None => CanonicalLayout::builtin(),
    };
    let labels = match &args.labels {
        Some(p) => ParsingLabels::load(p)?,
        None => ParsingLabels::default(),
    };
    let lib = match &args.lib {
        Some(p) => StyleLibrary::load(p)?,
        None => StyleLibrary::builtin(&canon),
    };
    Ok(AppState::new(lib, canon, labels))
}

#[tokio::main]
async fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MASKFORGE_LOG", "info")).init();
    let args = Args::parse();
    let state = match load(&args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    let listener = match tokio::net::TcpListener::bind(args.addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {}: {e}", args.addr);
            std::process::exit(2);
        }
    };
    log::info!("listening on {}", args.addr);
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    if let Err(e) = axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
    {
        eprintln!("error: {e}");
        std::process::exit(3);
    }
}
