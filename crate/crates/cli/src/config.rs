//! Layered settings: flags, then MPVE_* variables (both resolved by clap),
//! then the JSON config file, then built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mpve_core::ablation::DEFAULT_PROMPT_PARSES;
use mpve_core::embed::BaseMode;
use mpve_core::parse_source::{ChainedParses, SidecarParser};
use mpve_core::{
    ConlluStore, CorpusIndex, Embedder, Engine, ExtractorConfig, MatchConfig, ParseSource, ProviderConfig,
    ProviderMode, SidecarClient, Vectorizer,
};
use serde::{Deserialize, Serialize};

use crate::args::{ParseArgs, ProviderArgs, ProviderChoice};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub index_path: Option<PathBuf>,
    /// Unset means: take the provider recorded in the index.
    pub provider: Option<ProviderConfig>,
    #[serde(rename = "match")]
    pub match_cfg: MatchConfig,
    pub extractor: ExtractorConfig,
    pub sidecar_endpoint: Option<String>,
    pub parses: Vec<PathBuf>,
    pub log_level: Option<String>,
}

impl EngineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("bad config {}: {e}", path.display())))
    }

    pub fn load_or_default(path: Option<&Path>) -> CliResult<Self> {
        path.map(Self::load).transpose().map(Option::unwrap_or_default)
    }

    pub fn index_path(&self, flag: Option<&PathBuf>) -> CliResult<PathBuf> {
        flag.or(self.index_path.as_ref())
            .cloned()
            .ok_or_else(|| CliError::usage("no index given; pass --index or set MPVE_INDEX"))
    }

    pub fn sidecar(&self, args: &ParseArgs) -> Option<String> {
        args.sidecar.clone().or_else(|| self.sidecar_endpoint.clone())
    }

    /// Provider settings for building an index: config file, then flags.
    pub fn ingest_provider(&self, args: &ProviderArgs) -> ProviderConfig {
        let mut cfg = self.provider.clone().unwrap_or_default();
        apply_flags(&mut cfg, args);
        cfg
    }

    /// Provider settings for reading `index`. Without an explicit choice the
    /// provider recorded in the index fingerprint is rebuilt, and the width
    /// always follows the index unless --dim says otherwise.
    pub fn read_provider(&self, args: &ProviderArgs, index: &CorpusIndex) -> ProviderConfig {
        let mut cfg = match &self.provider {
            Some(p) => p.clone(),
            None => ProviderConfig::from_fingerprint(index.fingerprint()).unwrap_or_else(|| {
                log::warn!(
                    "cannot rebuild a provider from fingerprint `{}`; using the mock",
                    index.fingerprint()
                );
                ProviderConfig::default()
            }),
        };
        cfg.dim = index.dim();
        apply_flags(&mut cfg, args);
        cfg
    }

    /// Parse files from flags (or the config), then the built-in prompt
    /// parses when `with_prompts`, then the sidecar.
    pub fn parse_source(&self, args: &ParseArgs, with_prompts: bool, timeout_ms: u64) -> CliResult<Arc<dyn ParseSource>> {
        let files = if args.parses.is_empty() { &self.parses } else { &args.parses };
        let mut chain: Vec<Arc<dyn ParseSource>> = Vec::new();
        for path in files {
            let store = ConlluStore::from_path(path)
                .map_err(|e| CliError::usage(format!("cannot load parses {}: {e}", path.display())))?;
            chain.push(Arc::new(store));
        }
        if with_prompts {
            chain.push(Arc::new(ConlluStore::from_str(DEFAULT_PROMPT_PARSES)?));
        }
        if let Some(url) = self.sidecar(args) {
            chain.push(Arc::new(SidecarParser::new(Arc::new(SidecarClient::new(url, timeout_ms)))));
        }
        Ok(Arc::new(ChainedParses(chain)))
    }

    /// Loads the index and binds it to a provider and parse source.
    pub fn engine(&self, index_flag: Option<&PathBuf>, provider: &ProviderArgs, parse: &ParseArgs) -> CliResult<Engine> {
        let path = self.index_path(index_flag)?;
        if !path.exists() {
            return Err(CliError::usage(format!("index {} does not exist", path.display())));
        }
        let index = CorpusIndex::load(&path)?;
        let pcfg = self.read_provider(provider, &index);
        let embedder: Arc<dyn Embedder> = pcfg.build()?;
        let parser = self.parse_source(parse, true, pcfg.timeout_ms)?;
        let vectorizer = Vectorizer::new(embedder, parser);
        Ok(Engine::new(
            Arc::new(index),
            vectorizer,
            self.match_cfg.clone(),
            self.extractor.clone(),
        )?)
    }
}

fn apply_flags(cfg: &mut ProviderConfig, args: &ProviderArgs) {
    if let Some(choice) = args.provider {
        cfg.mode = match choice {
            ProviderChoice::Mock => ProviderMode::Mock,
            ProviderChoice::Remote => ProviderMode::Remote,
            ProviderChoice::CachedMock => ProviderMode::Cached(BaseMode::Mock),
            ProviderChoice::CachedRemote => ProviderMode::Cached(BaseMode::Remote),
        };
    }
    if let Some(dim) = args.dim {
        cfg.dim = dim;
    }
    if let Some(endpoint) = &args.endpoint {
        cfg.endpoint = Some(endpoint.clone());
    }
    if let Some(cache) = &args.cache {
        cfg.cache_path = Some(cache.clone());
    }
}
