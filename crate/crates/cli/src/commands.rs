use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use mpve_core::ablation::parse_prompt_list;
use mpve_core::index::ingest_manifest;
use mpve_core::keyframe::{export_package, load_detections, FfmpegAccessor, FrameAccessor};
use mpve_core::{
    run_ablation, AblationConfig, Detection, DetectionSource, Engine, ExtractOptions, RankedMatch, SidecarClient,
    Vectorizer,
};
use serde::{Deserialize, Serialize};

use crate::args::{AblateArgs, ExtractArgs, IngestArgs, QueryArgs};
use crate::config::EngineConfig;
use crate::error::{CliError, CliResult};

/// One search result as printed by `query --json` and returned by `/search`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub rank: usize,
    #[serde(flatten)]
    pub matched: RankedMatch,
    pub caption: String,
    pub video_ref: String,
}

pub fn hits(engine: &Engine, matches: Vec<RankedMatch>) -> Vec<Hit> {
    let index = engine.index();
    matches
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            let pos = index.position(&m.entry_id).expect("ranked ids come from the index");
            Hit {
                rank: i + 1,
                caption: index.caption(pos).to_string(),
                video_ref: index.video_ref(pos).to_string(),
                matched: m,
            }
        })
        .collect()
}

pub fn ingest(cfg: &EngineConfig, args: &IngestArgs) -> CliResult<String> {
    if args.out.exists() && !args.force {
        return Err(CliError::usage(format!(
            "{} already exists; pass --force to overwrite",
            args.out.display()
        )));
    }
    let manifest = File::open(&args.manifest)
        .map_err(|e| CliError::usage(format!("cannot open manifest {}: {e}", args.manifest.display())))?;
    let pcfg = cfg.ingest_provider(&args.provider);
    let parser = cfg.parse_source(&args.parse, false, pcfg.timeout_ms)?;
    if args.parse.parses.is_empty() && cfg.parses.is_empty() && cfg.sidecar(&args.parse).is_none() {
        log::warn!("no --parses or --sidecar given; entries will have no semantic units");
    }
    let vectorizer = Vectorizer::new(pcfg.build()?, parser);
    let index = ingest_manifest(BufReader::new(manifest), &vectorizer)?;
    index.save(&args.out)?;
    Ok(format!(
        "{} entries\ndim {}\nfingerprint {}\n",
        index.len(),
        index.dim(),
        index.fingerprint()
    ))
}

pub fn query(cfg: &EngineConfig, args: &QueryArgs) -> CliResult<String> {
    let engine = cfg.engine(args.index.as_ref(), &args.provider, &args.parse)?;
    let found = hits(&engine, engine.search(&args.prompt, args.top_k)?);
    if args.json {
        let mut out = serde_json::to_string_pretty(&found).map_err(mpve_core::Error::from)?;
        out.push('\n');
        return Ok(out);
    }
    let mut out = String::new();
    for h in &found {
        let m = &h.matched;
        let _ = writeln!(out, "{}\t{}\t{:.6}\t{}", h.rank, m.entry_id, m.score, h.caption);
        if args.explain {
            let p = &m.parts;
            let _ = writeln!(
                out,
                "\ttotal_sim={:.6} core_mot_sim={:.6} core_atr_sim={:.6} unit_set_sim={:.6} survived_rounds={} via_failsafe={}",
                p.total_sim, p.core_mot_sim, p.core_atr_sim, p.unit_set_sim, m.survived_rounds, m.via_failsafe
            );
        }
    }
    Ok(out)
}

/// A detections file holding only whitespace counts as an empty list.
fn read_detections(path: &Path) -> CliResult<Vec<Detection>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read detections {}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    Ok(load_detections(path)?)
}

pub fn extract(cfg: &EngineConfig, args: &ExtractArgs) -> CliResult<String> {
    let sidecar = cfg.sidecar(&args.parse);
    if args.detections.is_none() && sidecar.is_none() {
        return Err(CliError::usage("extract needs --detections or --sidecar"));
    }
    let fixture = args.detections.as_deref().map(read_detections).transpose()?;
    let engine = cfg.engine(args.index.as_ref(), &args.provider, &args.parse)?;
    let client;
    let source = match fixture {
        Some(dets) => DetectionSource::Fixture(dets),
        None => {
            let timeout = cfg.provider.as_ref().map_or(30_000, |p| p.timeout_ms);
            client = SidecarClient::new(sidecar.expect("checked above"), timeout);
            DetectionSource::Sidecar(&client)
        }
    };
    let opts = ExtractOptions {
        n: args.n,
        frame_size: args.frame_size,
    };
    let pkg = engine.extract(&args.prompt, source, &opts)?;
    let accessor: Option<Arc<dyn FrameAccessor>> = args.ffmpeg.as_ref().map(|program| {
        Arc::new(FfmpegAccessor {
            program: program.clone(),
        }) as Arc<dyn FrameAccessor>
    });
    let path = export_package(&pkg, &args.out, accessor.as_deref())?;
    Ok(format!("{}\n", path.display()))
}

pub fn ablate(cfg: &EngineConfig, args: &AblateArgs) -> CliResult<String> {
    let engine = cfg.engine(args.index.as_ref(), &args.provider, &args.parse)?;
    let mut acfg = AblationConfig {
        seed: args.seed,
        match_cfg: engine.match_config().clone(),
        ..AblationConfig::default()
    };
    if let Some(path) = &args.prompts {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read prompts {}: {e}", path.display())))?;
        acfg.prompts = parse_prompt_list(&text);
    }
    if !args.fractions.is_empty() {
        acfg.fractions = args.fractions.clone();
    }
    let table = run_ablation(engine.index(), engine.vectorizer(), &acfg)?;

    let mut w = BufWriter::new(File::create(&args.out)?);
    table.write_csv(&mut w)?;
    w.flush()?;

    let mut out = String::from("fraction\tentries\tavg_score\n");
    for ((f, avg), n) in table.averages.iter().zip(&table.sizes) {
        let _ = writeln!(out, "{f}\t{n}\t{avg:.6}");
    }
    Ok(out)
}
