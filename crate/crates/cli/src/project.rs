//! Project files: a model, a property, oracle settings and budgets.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use contraglot::checker::SolverConfig;
use contraglot::engine::{EngineConfig, SynthOracleKind, UnknownPolicy};
use contraglot::il::{parse_contract, Contract};
use contraglot::model::{load_model, parse_property_table, PolyglotModel, Property, PropertySpec};
use contraglot::oracles::{
    CbmcVerifier, EnumSynthesizer, HttpTransport, KaniVerifier, LanguageRouter, LlmSynthesizer,
    MiniVerifier, OracleError, ProcedureRef, ScriptedSynthesizer, SynthBudget, SynthQuery,
    Synthesizer, ToolConfig, Transcript, TranscriptTransport,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectFile {
    pub model: PathBuf,
    #[serde(default)]
    pub property: Option<PropertySpec>,
    #[serde(default)]
    pub oracles: OracleSection,
    #[serde(default)]
    pub budgets: BudgetSection,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub synth: SynthOracleKind,
    /// Contracts replayed by the scripted synthesizer.
    pub script: Option<PathBuf>,
    /// Recorded LLM conversation replayed instead of calling an endpoint.
    pub transcript: Option<PathBuf>,
    pub llm_endpoint: Option<String>,
    pub llm_model: Option<String>,
    pub solver: PathBuf,
    pub cbmc: Option<PathBuf>,
    pub kani: Option<PathBuf>,
    /// Extra CBMC arguments, such as `--unwind 10`.
    pub cbmc_args: Vec<String>,
    pub kani_args: Vec<String>,
    /// Seconds per solver, tool or synthesis call.
    pub timeout: Option<u64>,
    pub unknown: UnknownPolicy,
}

impl Default for OracleSection {
    fn default() -> OracleSection {
        OracleSection {
            synth: SynthOracleKind::Enum,
            script: None,
            transcript: None,
            llm_endpoint: None,
            llm_model: None,
            solver: PathBuf::from("z3"),
            cbmc: None,
            kani: None,
            cbmc_args: Vec::new(),
            kani_args: Vec::new(),
            timeout: None,
            unknown: UnknownPolicy::Abort,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSection {
    pub bound: usize,
    pub max_cegis: usize,
    pub max_cegar: usize,
    pub max_candidates: usize,
    pub concurrent_synthesis: bool,
}

impl Default for BudgetSection {
    fn default() -> BudgetSection {
        let e = EngineConfig::default();
        BudgetSection {
            bound: e.bound,
            max_cegis: e.max_cegis,
            max_cegar: e.max_cegar,
            max_candidates: e.synth_budget.max_candidates,
            concurrent_synthesis: e.concurrent_synthesis,
        }
    }
}

/// Command-line overrides of project settings.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub bound: Option<usize>,
    pub max_cegis: Option<usize>,
    pub max_cegar: Option<usize>,
    pub synth: Option<SynthOracleKind>,
    pub solver: Option<PathBuf>,
    pub cbmc: Option<PathBuf>,
    pub kani: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub timeout: Option<u64>,
}

/// A loaded project with paths resolved against its directory.
pub struct Project {
    pub file: ProjectFile,
    pub model: PolyglotModel,
    /// From the project, else from the model file.
    pub property: Option<Property>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Tools given by bare name are looked up on `PATH`; others resolve
/// against the project directory.
fn resolve_tool(base: &Path, p: &Path) -> PathBuf {
    if p.components().count() == 1 {
        p.to_path_buf()
    } else {
        resolve(base, p)
    }
}

impl Project {
    /// Loads a project file, or a model file used with default settings.
    pub fn load(path: &Path) -> Result<Project> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let table: toml::Table = toml::from_str(&text)
            .with_context(|| format!("{} is not valid TOML", path.display()))?;
        let (mut file, model_path) = if table.contains_key("modes") {
            (
                ProjectFile {
                    model: path.to_path_buf(),
                    ..Default::default()
                },
                path.to_path_buf(),
            )
        } else {
            let file: ProjectFile = toml::from_str(&text)
                .with_context(|| format!("invalid project file {}", path.display()))?;
            let m = resolve(&base, &file.model);
            (file, m)
        };
        let (model, model_prop) = load_model(&model_path)
            .with_context(|| format!("cannot load model {}", model_path.display()))?;
        let property = match &file.property {
            Some(spec) => Some(parse_property_table(spec, &model).context("invalid property")?),
            None => model_prop,
        };
        for p in [&mut file.oracles.script, &mut file.oracles.transcript]
            .into_iter()
            .flatten()
        {
            *p = resolve(&base, p);
        }
        for p in [&mut file.oracles.cbmc, &mut file.oracles.kani]
            .into_iter()
            .flatten()
        {
            *p = resolve_tool(&base, p);
        }
        file.oracles.solver = resolve_tool(&base, &file.oracles.solver);
        file.out = file.out.map(|o| resolve(&base, &o));
        file.model = model_path;
        Ok(Project {
            file,
            model,
            property,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        let b = &mut self.file.budgets;
        let f = &mut self.file.oracles;
        b.bound = o.bound.unwrap_or(b.bound);
        b.max_cegis = o.max_cegis.unwrap_or(b.max_cegis);
        b.max_cegar = o.max_cegar.unwrap_or(b.max_cegar);
        f.synth = o.synth.unwrap_or(f.synth);
        if let Some(s) = &o.solver {
            f.solver = s.clone();
        }
        if o.cbmc.is_some() {
            f.cbmc = o.cbmc.clone();
        }
        if o.kani.is_some() {
            f.kani = o.kani.clone();
        }
        if o.timeout.is_some() {
            f.timeout = o.timeout;
        }
        if o.out.is_some() {
            self.file.out = o.out.clone();
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.file
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn procedure(&self, name: &str) -> Result<ProcedureRef> {
        match self.model.procedure(name) {
            Some(p) => Ok(ProcedureRef::new(p, &self.model.vars)),
            None => bail!(
                "unknown procedure `{name}`; the model defines {}",
                self.model
                    .procedures
                    .keys()
                    .cloned()
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        }
    }

    pub fn engine_config(&self) -> EngineConfig {
        let o = &self.file.oracles;
        let b = &self.file.budgets;
        let mut cfg = EngineConfig {
            synth_oracle: o.synth,
            bound: b.bound,
            max_cegis: b.max_cegis,
            max_cegar: b.max_cegar,
            unknown_policy: o.unknown,
            synth_budget: SynthBudget {
                max_candidates: b.max_candidates,
                ..SynthBudget::default()
            },
            solver: SolverConfig::with_path(&o.solver),
            concurrent_synthesis: b.concurrent_synthesis,
            ..EngineConfig::default()
        };
        if let Some(t) = o.timeout {
            cfg.solver.timeout = Duration::from_secs(t);
            cfg.synth_budget.wall_clock = Duration::from_secs(t);
        }
        cfg
    }

    pub fn verifier(&self) -> LanguageRouter {
        let o = &self.file.oracles;
        let tool = |p: &PathBuf, args: &[String]| {
            let mut t = ToolConfig::new(p);
            t.args = args.to_vec();
            if let Some(s) = o.timeout {
                t.timeout = Duration::from_secs(s);
            }
            t
        };
        LanguageRouter {
            mini: Box::new(MiniVerifier::default()),
            c: Some(Box::new(CbmcVerifier::new(tool(
                o.cbmc.as_ref().unwrap_or(&PathBuf::from("cbmc")),
                &o.cbmc_args,
            )))),
            rust: Some(Box::new(KaniVerifier::new(tool(
                o.kani.as_ref().unwrap_or(&PathBuf::from("kani")),
                &o.kani_args,
            )))),
        }
    }

    pub fn synthesizer(&self) -> Result<Box<dyn Synthesizer>> {
        let o = &self.file.oracles;
        Ok(match o.synth {
            SynthOracleKind::Enum => Box::new(EnumSynthesizer::default()),
            SynthOracleKind::Scripted => {
                let path = o
                    .script
                    .as_ref()
                    .context("the scripted synthesizer needs `oracles.script`")?;
                Box::new(PerProcedureScript::load(path, &self.model)?)
            }
            SynthOracleKind::Llm => {
                if let Some(path) = &o.transcript {
                    let t = Transcript::load(path).map_err(anyhow::Error::new)?;
                    Box::new(LlmSynthesizer::new(Arc::new(TranscriptTransport::new(t))))
                } else {
                    let mut t = HttpTransport::from_env().map_err(anyhow::Error::new)?;
                    if let Some(e) = &o.llm_endpoint {
                        t.endpoint = e.clone();
                    }
                    if let Some(m) = &o.llm_model {
                        t.model = m.clone();
                    }
                    if let Some(s) = o.timeout {
                        t.timeout = Duration::from_secs(s);
                    }
                    Box::new(LlmSynthesizer::new(Arc::new(t)))
                }
            }
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptFile {
    /// Contracts per procedure, in the order they are proposed.
    contracts: BTreeMap<String, Vec<String>>,
}

/// One scripted synthesizer per procedure.
struct PerProcedureScript {
    scripts: BTreeMap<String, ScriptedSynthesizer>,
}

impl PerProcedureScript {
    fn load(path: &Path, m: &PolyglotModel) -> Result<PerProcedureScript> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        let doc: ScriptFile =
            toml::from_str(&text).with_context(|| format!("invalid script {}", path.display()))?;
        let mut scripts = BTreeMap::new();
        for (name, texts) in doc.contracts {
            let p = m
                .procedure(&name)
                .with_context(|| format!("script names unknown procedure `{name}`"))?;
            let ctx = p.context(&m.vars);
            let cs: Vec<Contract> = texts
                .iter()
                .map(|t| {
                    parse_contract(t, &ctx).with_context(|| format!("bad contract for `{name}`"))
                })
                .collect::<Result<_>>()?;
            scripts.insert(name, ScriptedSynthesizer::new(cs));
        }
        Ok(PerProcedureScript { scripts })
    }
}

impl Synthesizer for PerProcedureScript {
    fn name(&self) -> &str {
        "scripted"
    }

    fn synthesize(
        &self,
        f: &ProcedureRef,
        q: &SynthQuery<'_>,
        b: &SynthBudget,
    ) -> Result<Contract, OracleError> {
        match self.scripts.get(f.name()) {
            Some(s) => s.synthesize(f, q, b),
            None => Err(OracleError::ScriptExhausted),
        }
    }
}
