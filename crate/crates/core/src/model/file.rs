//! TOML model files. See `docs/model-format.md` for the schema.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use super::{Binding, Init, Language, PolyglotModel, Procedure, Property, Transition};
use crate::il::{parse_expr, parse_predicate, Expr, IlError, Position, SemType, VarContext};
use crate::minilang::{parse_mini, MiniError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed model file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{location}: {message}")]
    Schema { location: String, message: String },
    #[error("{location}: {error}")]
    Il { location: String, error: IlError },
    #[error("procedure `{procedure}`: {error}")]
    Mini { procedure: String, error: MiniError },
}

fn schema(location: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Schema {
        location: location.into(),
        message: message.into(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    #[serde(default)]
    name: Option<String>,
    modes: Vec<String>,
    #[serde(default)]
    terminal: Vec<String>,
    vars: toml::Table,
    init: InitDoc,
    #[serde(default)]
    procedures: BTreeMap<String, ProcDoc>,
    #[serde(default)]
    transitions: Vec<TransitionDoc>,
    #[serde(default)]
    property: Option<PropertySpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InitDoc {
    mode: String,
    #[serde(default)]
    predicate: Option<String>,
    #[serde(default)]
    procedures: Vec<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BindingDoc {
    Target(String),
    Full(Binding),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProcDoc {
    language: Language,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    path: Option<String>,
    #[serde(default)]
    reads: Option<Vec<String>>,
    #[serde(default)]
    writes: Option<Vec<String>>,
    #[serde(default)]
    entry: Option<String>,
    #[serde(default)]
    bindings: BTreeMap<String, BindingDoc>,
    #[serde(default)]
    preamble: Option<String>,
    #[serde(default)]
    preamble_path: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionDoc {
    id: String,
    from: String,
    to: String,
    #[serde(default)]
    guard: Option<String>,
    update: Vec<String>,
    #[serde(default)]
    duration: u64,
}

/// `[property]` table, shared by model and project files.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct PropertySpec {
    /// `invariant` or `eventually_within`.
    pub kind: String,
    #[serde(default)]
    pub time: Option<u64>,
    pub predicate: String,
}

/// Elaborates a property table against a model.
pub fn parse_property_table(
    spec: &PropertySpec,
    m: &PolyglotModel,
) -> Result<Property, ModelError> {
    let ctx = m.property_context().map_err(|error| ModelError::Il {
        location: "property".into(),
        error,
    })?;
    let predicate =
        parse_predicate(&spec.predicate, &ctx, Position::Pre).map_err(|error| ModelError::Il {
            location: "property predicate".into(),
            error,
        })?;
    match (spec.kind.as_str(), spec.time) {
        ("invariant", None) => Ok(Property::invariant(predicate)),
        ("invariant", Some(_)) => Err(schema(
            "property",
            "`time` is only meaningful for eventually_within",
        )),
        ("eventually_within", Some(t)) => Ok(Property::eventually_within(t, predicate)),
        ("eventually_within", None) => Err(schema("property", "eventually_within needs `time`")),
        (other, _) => Err(schema("property", format!("unknown kind `{other}`"))),
    }
}

fn parse_type(value: &toml::Value, location: &str) -> Result<SemType, ModelError> {
    match value {
        toml::Value::String(s) => {
            SemType::parse_scalar(s).ok_or_else(|| schema(location, format!("unknown type `{s}`")))
        }
        toml::Value::Table(t) => {
            let mut fields = Vec::new();
            for (k, v) in t {
                fields.push((k.clone(), parse_type(v, &format!("{location}.{k}"))?));
            }
            SemType::record(fields).map_err(|error| ModelError::Il {
                location: location.into(),
                error,
            })
        }
        _ => Err(schema(
            location,
            "a type is a string like \"u8\" or a table of fields",
        )),
    }
}

fn read_rel(base: Option<&Path>, rel: &str) -> Result<String, ModelError> {
    let path = match base {
        Some(b) => b.join(rel),
        None => PathBuf::from(rel),
    };
    std::fs::read_to_string(&path).map_err(|source| ModelError::Io { path, source })
}

fn expr_at(
    text: &str,
    ctx: &VarContext,
    pos: Position,
    location: String,
) -> Result<Expr, ModelError> {
    parse_expr(text, ctx, pos).map_err(|error| ModelError::Il { location, error })
}

/// Parses a model document. Relative procedure paths resolve against `base`.
/// Returns the model and its `[property]`, if any. Semantic problems that
/// survive parsing are reported by [`super::validate_model`].
pub fn parse_model(
    text: &str,
    base: Option<&Path>,
) -> Result<(PolyglotModel, Option<Property>), ModelError> {
    let doc: ModelDoc = toml::from_str(text)?;
    let mut vars = Vec::new();
    for (name, ty) in &doc.vars {
        vars.push((name.clone(), parse_type(ty, &format!("vars.{name}"))?));
    }
    let vars = VarContext::new(vars).map_err(|error| ModelError::Il {
        location: "vars".into(),
        error,
    })?;

    let init = Init {
        mode: doc.init.mode.clone(),
        predicate: match &doc.init.predicate {
            Some(p) => expr_at(p, &vars, Position::Pre, "init predicate".into())?,
            None => Expr::tt(),
        },
        procedures: doc.init.procedures.clone(),
    };

    let mut procedures = BTreeMap::new();
    for (name, pd) in doc.procedures {
        let source = match (&pd.source, &pd.path) {
            (Some(s), None) => s.clone(),
            (None, Some(p)) => read_rel(base, p)?,
            _ => {
                return Err(schema(
                    format!("procedures.{name}"),
                    "give exactly one of `source` or `path`",
                ))
            }
        };
        let preamble = match (&pd.preamble, &pd.preamble_path) {
            (Some(s), None) => s.clone(),
            (None, Some(p)) => read_rel(base, p)?,
            (None, None) => String::new(),
            _ => {
                return Err(schema(
                    format!("procedures.{name}"),
                    "give at most one of `preamble` or `preamble_path`",
                ))
            }
        };
        let (reads, writes) = match (pd.reads, pd.writes) {
            (Some(r), Some(w)) => (r.into_iter().collect(), w.into_iter().collect()),
            (r, w) if pd.language == Language::Mini => {
                let body = parse_mini(&source, &vars).map_err(|error| ModelError::Mini {
                    procedure: name.clone(),
                    error,
                })?;
                let reads: BTreeSet<String> = r
                    .map(|v| v.into_iter().collect())
                    .unwrap_or_else(|| body.reads());
                let writes: BTreeSet<String> = w
                    .map(|v| v.into_iter().collect())
                    .unwrap_or_else(|| body.writes());
                (reads, writes)
            }
            _ => {
                return Err(schema(
                    format!("procedures.{name}"),
                    "c and rust procedures must declare `reads` and `writes`",
                ))
            }
        };
        let bindings = pd
            .bindings
            .into_iter()
            .map(|(k, b)| {
                let b = match b {
                    BindingDoc::Target(target) => Binding {
                        target,
                        access: Default::default(),
                    },
                    BindingDoc::Full(b) => b,
                };
                (k, b)
            })
            .collect();
        procedures.insert(
            name.clone(),
            Procedure {
                name,
                language: pd.language,
                source,
                reads,
                writes,
                entry: pd.entry,
                bindings,
                preamble,
            },
        );
    }

    let mut transitions = Vec::new();
    for td in doc.transitions {
        // Post position admits old(..); validate_model reports it as OldInGuard.
        let guard = match &td.guard {
            Some(g) => expr_at(g, &vars, Position::Post, format!("guard of `{}`", td.id))?,
            None => Expr::tt(),
        };
        transitions.push(Transition {
            id: td.id,
            from: td.from,
            to: td.to,
            guard,
            update: td.update,
            duration: td.duration,
        });
    }

    let model = PolyglotModel {
        name: doc.name.unwrap_or_else(|| "model".into()),
        modes: doc.modes,
        terminal: doc.terminal.into_iter().collect(),
        vars,
        init,
        transitions,
        procedures,
    };
    let property = match &doc.property {
        Some(spec) => Some(parse_property_table(spec, &model)?),
        None => None,
    };
    Ok((model, property))
}

/// Reads and parses a model file.
pub fn load_model(path: &Path) -> Result<(PolyglotModel, Option<Property>), ModelError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_model(&text, path.parent())
}
