//! Run reports: the verdict plus what is needed to reproduce it.

use std::path::Path;
use std::process::Command;

use anyhow::{Context, Result};
use contraglot::engine::{EngineConfig, Verdict};
use serde::Serialize;

use crate::project::Project;

#[derive(Debug, Serialize)]
pub struct ToolInfo {
    pub path: String,
    /// First line of `--version`, or `unavailable`.
    pub version: String,
    /// Extra arguments, including any unwinding bound.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Environment {
    pub contraglot: &'static str,
    pub solver: ToolInfo,
    pub cbmc: ToolInfo,
    pub kani: ToolInfo,
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
pub struct RunReport<'a> {
    pub model: &'a str,
    pub property: String,
    pub config: &'a EngineConfig,
    pub environment: Environment,
    #[serde(flatten)]
    pub verdict: &'a Verdict,
}

pub fn tool_info(path: &Path) -> ToolInfo {
    let version = Command::new(path)
        .arg("--version")
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| {
            String::from_utf8_lossy(&o.stdout)
                .lines()
                .next()
                .map(|l| l.trim().to_string())
        })
        .unwrap_or_else(|| "unavailable".into());
    ToolInfo {
        path: path.display().to_string(),
        version,
        args: Vec::new(),
    }
}

pub fn environment(p: &Project, seed: Option<u64>) -> Environment {
    let o = &p.file.oracles;
    let uses = |lang| {
        p.model
            .used_procedures()
            .iter()
            .any(|n| p.model.procedures[n].language == lang)
    };
    let probe = |used: bool, path: Option<&std::path::PathBuf>, default: &str, args: &[String]| {
        let path = path.cloned().unwrap_or_else(|| default.into());
        let info = if used {
            tool_info(&path)
        } else {
            ToolInfo {
                path: path.display().to_string(),
                version: "unused".into(),
                args: Vec::new(),
            }
        };
        ToolInfo {
            args: args.to_vec(),
            ..info
        }
    };
    Environment {
        contraglot: env!("CARGO_PKG_VERSION"),
        solver: tool_info(&o.solver),
        cbmc: probe(
            uses(contraglot::model::Language::C),
            o.cbmc.as_ref(),
            "cbmc",
            &o.cbmc_args,
        ),
        kani: probe(
            uses(contraglot::model::Language::Rust),
            o.kani.as_ref(),
            "kani",
            &o.kani_args,
        ),
        seed,
    }
}

/// Writes `report.json` and `report.txt` into `dir`.
pub fn write(dir: &Path, report: &RunReport<'_>) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let json = serde_json::to_string_pretty(report)? + "\n";
    std::fs::write(dir.join("report.json"), json).context("cannot write report.json")?;
    let mut text = format!("model: {}\nproperty: {}\n\n", report.model, report.property);
    text.push_str(&report.verdict.render_text());
    std::fs::write(dir.join("report.txt"), text).context("cannot write report.txt")?;
    Ok(())
}
