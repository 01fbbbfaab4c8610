use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::Parser;
use warpcrop::{ImportanceCache, RetargetConfig};
use warpcrop_service::{router, AppState};

/// Serve retarget previews over HTTP.
#[derive(Parser, Debug)]
#[command(name = "retarget-service", version)]
struct Args {
    /// Address to listen on.
    #[arg(long, env = "RETARGET_SERVICE_ADDR", default_value = "127.0.0.1:8080")]
    addr: SocketAddr,

    /// Persist importance maps here; memory only when unset.
    #[arg(long, env = "RETARGET_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let cache = match &args.cache_dir {
        Some(dir) => ImportanceCache::persistent(dir),
        None => ImportanceCache::in_memory(),
    };
    let state = Arc::new(AppState::new(cache, RetargetConfig::default()));

    let listener = tokio::net::TcpListener::bind(args.addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
