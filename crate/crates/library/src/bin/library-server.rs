use std::path::PathBuf;

use clap::Parser;

/// Serve the reservation endpoints over HTTP.
#[derive(Parser)]
struct Args {
    /// Database file; seeded with the sample data when missing.
    #[arg(long, default_value = "library.db")]
    db: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Implementation to serve: direct-sql, capabilities or contracts.
    #[arg(long, default_value = "contracts")]
    service: String,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args = Args::parse();
    if !args.db.exists() {
        let dir = args.db.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(std::path::Path::new("."));
        let created = library::fixture::create(dir)?;
        if created != args.db {
            std::fs::rename(&created, &args.db)?;
        }
    }
    let service = library::by_name(&args.service).ok_or_else(|| format!("unknown service {}", args.service))??;
    let app = library::http::router(library::fixture::authority(&args.db), service);
    let listener = tokio::net::TcpListener::bind(&args.addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}
