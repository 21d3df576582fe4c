use clap::Parser;
use tokio::net::TcpListener;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(version, about = "Online Wiener-model identification over HTTP/JSON")]
struct Args {
    /// Address to listen on.
    #[arg(long, env = "WIENER_BIND", default_value = "127.0.0.1:8787")]
    bind: String,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    tracing_subscriber::fmt().with_env_filter(EnvFilter::from_default_env()).init();
    let args = Args::parse();
    let listener = TcpListener::bind(&args.bind).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    tokio::select! {
        r = wiener_service::serve(listener) => r,
        _ = tokio::signal::ctrl_c() => Ok(()),
    }
}
