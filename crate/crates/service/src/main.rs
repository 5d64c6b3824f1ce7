use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;
use salmanip_service::{router, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "salmanip-service", version, about = "HTTP job service for saliency-driven image manipulation")]
struct Args {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    /// Built web UI assets, served under `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
    /// Also write finished job artifacts under this directory.
    #[arg(long)]
    persist_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    max_concurrent_jobs: usize,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let cfg = ServiceConfig {
        max_concurrent_jobs: args.max_concurrent_jobs,
        persist_dir: args.persist_dir,
        static_dir: args.static_dir,
        ..ServiceConfig::default()
    };
    let addr = SocketAddr::new(args.host, args.port);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{addr}");
    axum::serve(listener, router(cfg)).await
}
