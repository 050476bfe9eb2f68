use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "mpve", version, about = "Motion-prior video retrieval and keyframe extraction")]
pub struct Cli {
    /// JSON engine config; flags and MPVE_* variables override it.
    #[arg(long, global = true, env = "MPVE_CONFIG")]
    pub config: Option<PathBuf>,

    /// Log filter (error, warn, info, debug, trace).
    #[arg(long, global = true, env = "MPVE_LOG")]
    pub log_level: Option<String>,

    /// Raise the log level to info (-v) or debug (-vv).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an index from a JSON-lines manifest.
    Ingest(IngestArgs),
    /// Rank indexed captions against a prompt.
    Query(QueryArgs),
    /// Retrieve the best reference video and plan its keyframes.
    Extract(ExtractArgs),
    /// Top-1 scores of fixed prompts on shrinking corpus subsets.
    Ablate(AblateArgs),
    /// Serve /health, /search and /vectorize over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderChoice {
    Mock,
    Remote,
    CachedMock,
    CachedRemote,
}

#[derive(Debug, Clone, Args)]
pub struct ProviderArgs {
    /// Embedding provider; read commands default to the one recorded in the index.
    #[arg(long, env = "MPVE_PROVIDER", value_enum)]
    pub provider: Option<ProviderChoice>,

    #[arg(long, env = "MPVE_DIM")]
    pub dim: Option<usize>,

    /// Base URL of the embedding service.
    #[arg(long, env = "MPVE_EMBED_ENDPOINT")]
    pub endpoint: Option<String>,

    /// Embedding cache file for the cached providers.
    #[arg(long, env = "MPVE_EMBED_CACHE")]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ParseArgs {
    /// CoNLL-U parses keyed by sent_id or text; may be repeated.
    #[arg(long, env = "MPVE_PARSES", value_delimiter = ',')]
    pub parses: Vec<PathBuf>,

    /// NLP sidecar base URL, used for parses not found in --parses.
    #[arg(long, env = "MPVE_SIDECAR_ENDPOINT")]
    pub sidecar: Option<String>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub manifest: PathBuf,

    #[arg(long)]
    pub out: PathBuf,

    /// Overwrite an existing index at --out.
    #[arg(long)]
    pub force: bool,

    #[command(flatten)]
    pub provider: ProviderArgs,

    #[command(flatten)]
    pub parse: ParseArgs,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long, env = "MPVE_INDEX")]
    pub index: Option<PathBuf>,

    #[arg(long)]
    pub prompt: String,

    #[arg(long, env = "MPVE_TOP_K")]
    pub top_k: Option<usize>,

    #[arg(long)]
    pub json: bool,

    /// Print the score decomposition under each result.
    #[arg(long)]
    pub explain: bool,

    #[command(flatten)]
    pub provider: ProviderArgs,

    #[command(flatten)]
    pub parse: ParseArgs,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long, env = "MPVE_INDEX")]
    pub index: Option<PathBuf>,

    #[arg(long)]
    pub prompt: String,

    /// JSON array of detections on the reference video.
    #[arg(long)]
    pub detections: Option<PathBuf>,

    #[arg(long)]
    pub out: PathBuf,

    /// Keyframe count.
    #[arg(long)]
    pub n: Option<usize>,

    /// Reference frame size as WIDTHxHEIGHT; the target size when omitted.
    #[arg(long, value_parser = parse_size)]
    pub frame_size: Option<(u32, u32)>,

    /// Write cropped frames using this ffmpeg binary.
    #[arg(long)]
    pub ffmpeg: Option<PathBuf>,

    #[command(flatten)]
    pub provider: ProviderArgs,

    #[command(flatten)]
    pub parse: ParseArgs,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long, env = "MPVE_INDEX")]
    pub index: Option<PathBuf>,

    /// One prompt per line; the built-in ten prompts when omitted.
    #[arg(long)]
    pub prompts: Option<PathBuf>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long)]
    pub out: PathBuf,

    /// Descending corpus fractions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub fractions: Vec<f64>,

    #[command(flatten)]
    pub provider: ProviderArgs,

    #[command(flatten)]
    pub parse: ParseArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "MPVE_INDEX")]
    pub index: Option<PathBuf>,

    #[arg(long, env = "MPVE_LISTEN", default_value = "127.0.0.1:8080")]
    pub listen: String,

    #[command(flatten)]
    pub provider: ProviderArgs,

    #[command(flatten)]
    pub parse: ParseArgs,
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
    let dim = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("`{v}`: {e}"));
    match (dim(w)?, dim(h)?) {
        (0, _) | (_, 0) => Err("frame size must be positive".into()),
        size => Ok(size),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_sizes() {
        assert_eq!(parse_size("576x320"), Ok((576, 320)));
        assert!(parse_size("576").is_err());
        assert!(parse_size("0x10").is_err());
    }

    #[test]
    fn cli_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
