//! Aggregated world knowledge: symbols published by components, boolean
//! signals from their continuous inputs, and the predicates evaluated over
//! them.
//!
//! Relational predicates are frame-relative: `LeftOf(a, ref)` holds when `a`
//! lies strictly in the +y half-space of the `ref` frame, `RightOf` in the -y
//! half-space and `InFrontOf` in the +x half-space. Points on a dividing plane
//! satisfy neither side.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose;
use crate::object::ObjectInstance;

pub const DEFAULT_NEAR_RADIUS: f64 = 0.1;
/// Prefix marking a free variable in a query template argument.
pub const VARIABLE_PREFIX: char = '?';

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredicateError {
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("`{name}` takes {expected} argument(s), got {got}")]
    ArityMismatch {
        name: String,
        expected: String,
        got: usize,
    },
    #[error("symbol `{0}` has no pose")]
    MissingPose(String),
    #[error("argument `{arg}` of `{name}` is not a valid {expected}")]
    InvalidArgument {
        name: String,
        arg: String,
        expected: &'static str,
    },
    #[error("query needs exactly one free variable shared by all templates: {0}")]
    FreeVariable(String),
    #[error("cannot parse predicate `{0}`")]
    Syntax(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolKind {
    Waypoint,
    Object,
    Region,
    Frame,
    JointState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Symbol {
    pub name: String,
    pub kind: SymbolKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<Pose>,
    #[serde(default, rename = "class", skip_serializing_if = "Option::is_none")]
    pub class_label: Option<String>,
    pub source: String,
}

impl Symbol {
    pub fn waypoint(name: &str, pose: Pose, source: &str) -> Self {
        Self::posed(name, SymbolKind::Waypoint, pose, source)
    }

    pub fn frame(name: &str, pose: Pose, source: &str) -> Self {
        Self::posed(name, SymbolKind::Frame, pose, source)
    }

    pub fn posed(name: &str, kind: SymbolKind, pose: Pose, source: &str) -> Self {
        Self {
            name: name.to_string(),
            kind,
            pose: Some(pose),
            class_label: None,
            source: source.to_string(),
        }
    }

    pub fn object(o: &ObjectInstance, source: &str) -> Self {
        Self {
            name: o.id.clone(),
            kind: SymbolKind::Object,
            pose: Some(o.pose),
            class_label: Some(o.class_label.clone()),
            source: source.to_string(),
        }
    }
}

/// A predicate applied to arguments. Arguments name symbols, except where
/// the predicate declares a text or number parameter.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PredicateStatement {
    pub name: String,
    pub args: Vec<String>,
}

impl PredicateStatement {
    pub fn new<S: Into<String>>(name: &str, args: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.to_string(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    fn variables(&self) -> BTreeSet<&str> {
        self.args
            .iter()
            .filter(|a| a.starts_with(VARIABLE_PREFIX))
            .map(String::as_str)
            .collect()
    }

    fn substitute(&self, var: &str, value: &str) -> PredicateStatement {
        PredicateStatement {
            name: self.name.clone(),
            args: self
                .args
                .iter()
                .map(|a| if a == var { value.to_string() } else { a.clone() })
                .collect(),
        }
    }
}

/// Parses `Name(arg, arg)`. Arguments may be quoted.
impl std::str::FromStr for PredicateStatement {
    type Err = PredicateError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = || PredicateError::Syntax(text.trim().to_string());
        let (name, rest) = text.trim().split_once('(').ok_or_else(err)?;
        let inner = rest.strip_suffix(')').ok_or_else(err)?;
        let name = name.trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(err());
        }
        let args = if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner
                .split(',')
                .map(|a| {
                    let a = a.trim();
                    let a = a.strip_prefix('"').and_then(|x| x.strip_suffix('"')).unwrap_or(a);
                    if a.is_empty() {
                        Err(err())
                    } else {
                        Ok(a.to_string())
                    }
                })
                .collect::<Result<_, _>>()?
        };
        Ok(PredicateStatement {
            name: name.to_string(),
            args,
        })
    }
}

/// Parses statements separated by `;`.
pub fn parse_statements(text: &str) -> Result<Vec<PredicateStatement>, PredicateError> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

impl fmt::Display for PredicateStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(", "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Symbol,
    Text,
    Number,
}

/// Everything a predicate may look at: symbols plus boolean signals derived
/// from the components' continuous inputs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub symbols: BTreeMap<String, Symbol>,
    pub signals: BTreeMap<String, bool>,
}

impl KnowledgeBase {
    pub fn symbol(&self, name: &str) -> Result<&Symbol, PredicateError> {
        self.symbols
            .get(name)
            .ok_or_else(|| PredicateError::UnknownSymbol(name.to_string()))
    }

    pub fn pose(&self, name: &str) -> Result<Pose, PredicateError> {
        self.symbol(name)?
            .pose
            .ok_or_else(|| PredicateError::MissingPose(name.to_string()))
    }

    pub fn signal(&self, key: &str) -> bool {
        self.signals.get(key).copied().unwrap_or(false)
    }

    fn class_labels(&self) -> BTreeSet<String> {
        self.symbols
            .values()
            .filter_map(|s| s.class_label.clone())
            .collect()
    }
}

pub type Evaluator = Arc<dyn Fn(&KnowledgeBase, &[String]) -> Result<bool, PredicateError> + Send + Sync>;

#[derive(Clone)]
pub struct PredicateDef {
    pub name: String,
    pub params: Vec<ParamKind>,
    /// Number of trailing parameters that may be omitted.
    pub optional: usize,
    /// Excluded from the enumerated true set.
    pub enumeration_exempt: bool,
    pub source: String,
    pub eval: Evaluator,
}

impl fmt::Debug for PredicateDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PredicateDef")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("optional", &self.optional)
            .finish()
    }
}

/// Serializable description of a registered predicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredicateSignature {
    pub name: String,
    pub params: Vec<ParamKind>,
    pub optional: usize,
    pub source: String,
}

impl PredicateDef {
    pub fn new(
        name: &str,
        params: Vec<ParamKind>,
        source: &str,
        eval: impl Fn(&KnowledgeBase, &[String]) -> Result<bool, PredicateError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.to_string(),
            params,
            optional: 0,
            enumeration_exempt: false,
            source: source.to_string(),
            eval: Arc::new(eval),
        }
    }

    pub fn signature(&self) -> PredicateSignature {
        PredicateSignature {
            name: self.name.clone(),
            params: self.params.clone(),
            optional: self.optional,
            source: self.source.clone(),
        }
    }

    fn check_arity(&self, got: usize) -> Result<(), PredicateError> {
        let max = self.params.len();
        let min = max - self.optional;
        if got < min || got > max {
            let expected = if min == max {
                max.to_string()
            } else {
                format!("{min}..={max}")
            };
            return Err(PredicateError::ArityMismatch {
                name: self.name.clone(),
                expected,
                got,
            });
        }
        Ok(())
    }

    fn required_params(&self) -> &[ParamKind] {
        &self.params[..self.params.len() - self.optional]
    }
}

fn half_space(
    kb: &KnowledgeBase,
    args: &[String],
    test: impl Fn(&nalgebra::Vector3<f64>) -> bool,
) -> Result<bool, PredicateError> {
    let a = kb.pose(&args[0])?;
    let reference = kb.pose(&args[1])?;
    Ok(test(&reference.inverse_transform_point(&a.position)))
}

fn number_arg(name: &str, arg: &str) -> Result<f64, PredicateError> {
    arg.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite() && *v >= 0.0)
        .ok_or_else(|| PredicateError::InvalidArgument {
            name: name.to_string(),
            arg: arg.to_string(),
            expected: "non-negative number",
        })
}

/// The built-in predicate set.
pub fn builtin_predicates() -> Vec<PredicateDef> {
    use ParamKind::*;
    let mut near = PredicateDef::new("Near", vec![Symbol, Symbol, Number], "predicator", |kb, args| {
        let radius = match args.get(2) {
            Some(r) => number_arg("Near", r)?,
            None => DEFAULT_NEAR_RADIUS,
        };
        Ok(kb.pose(&args[0])?.distance(&kb.pose(&args[1])?) <= radius)
    });
    near.optional = 1;
    vec![
        PredicateDef::new("LeftOf", vec![Symbol, Symbol], "predicator", |kb, args| {
            half_space(kb, args, |p| p.y > 0.0)
        }),
        PredicateDef::new("RightOf", vec![Symbol, Symbol], "predicator", |kb, args| {
            half_space(kb, args, |p| p.y < 0.0)
        }),
        PredicateDef::new("InFrontOf", vec![Symbol, Symbol], "predicator", |kb, args| {
            half_space(kb, args, |p| p.x > 0.0)
        }),
        near,
        PredicateDef::new("IsClass", vec![Symbol, Text], "perception", |kb, args| {
            Ok(kb.symbol(&args[0])?.class_label.as_deref() == Some(args[1].as_str()))
        }),
        PredicateDef::new("GripperClosed", vec![Symbol], "gripper", |kb, args| {
            kb.symbol(&args[0])?;
            Ok(kb.signal(&format!("{}.closed", args[0])))
        }),
        PredicateDef::new("ToolInPosition", vec![Symbol], "power_tool", |kb, args| {
            kb.symbol(&args[0])?;
            Ok(kb.signal(&format!("{}.in_position", args[0])))
        }),
        PredicateDef::new("ToolPowered", vec![Symbol], "power_tool", |kb, args| {
            kb.symbol(&args[0])?;
            Ok(kb.signal(&format!("{}.powered", args[0])))
        }),
    ]
}

#[derive(Clone, Debug)]
pub struct Predicator {
    kb: KnowledgeBase,
    defs: BTreeMap<String, PredicateDef>,
}

impl Default for Predicator {
    fn default() -> Self {
        Self::new()
    }
}

impl Predicator {
    /// A predicator with the built-in predicates registered.
    pub fn new() -> Self {
        let mut p = Self::empty();
        for d in builtin_predicates() {
            p.register(d);
        }
        p
    }

    pub fn empty() -> Self {
        Self {
            kb: KnowledgeBase::default(),
            defs: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, def: PredicateDef) {
        self.defs.insert(def.name.clone(), def);
    }

    pub fn definitions(&self) -> impl Iterator<Item = &PredicateDef> {
        self.defs.values()
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn kb_mut(&mut self) -> &mut KnowledgeBase {
        &mut self.kb
    }

    pub fn upsert_symbol(&mut self, symbol: Symbol) {
        self.kb.symbols.insert(symbol.name.clone(), symbol);
    }

    pub fn remove_symbol(&mut self, name: &str) -> Option<Symbol> {
        self.kb.symbols.remove(name)
    }

    pub fn symbols(&self) -> impl Iterator<Item = &Symbol> {
        self.kb.symbols.values()
    }

    pub fn set_signal(&mut self, key: &str, value: bool) {
        self.kb.signals.insert(key.to_string(), value);
    }

    /// Drops every object symbol and inserts `objects` in their place.
    pub fn replace_objects(&mut self, objects: &[ObjectInstance], source: &str) {
        self.kb.symbols.retain(|_, s| s.kind != SymbolKind::Object);
        for o in objects {
            self.upsert_symbol(Symbol::object(o, source));
        }
    }

    fn definition(&self, name: &str) -> Result<&PredicateDef, PredicateError> {
        self.defs
            .get(name)
            .ok_or_else(|| PredicateError::UnknownPredicate(name.to_string()))
    }

    pub fn evaluate(&self, statement: &PredicateStatement) -> Result<bool, PredicateError> {
        let def = self.definition(&statement.name)?;
        def.check_arity(statement.args.len())?;
        (def.eval)(&self.kb, &statement.args)
    }

    /// Names of all symbols that satisfy every template once substituted for
    /// the single free variable, in lexicographic order.
    pub fn query_symbols(&self, templates: &[PredicateStatement]) -> Result<Vec<String>, PredicateError> {
        if templates.is_empty() {
            return Err(PredicateError::FreeVariable("no templates".into()));
        }
        let all: BTreeSet<&str> = templates.iter().flat_map(|t| t.variables()).collect();
        if all.len() != 1 {
            return Err(PredicateError::FreeVariable(format!(
                "found {} variables",
                all.len()
            )));
        }
        let var = *all.iter().next().expect("one variable");
        for t in templates {
            if !t.variables().contains(var) {
                return Err(PredicateError::FreeVariable(format!("`{t}` does not use {var}")));
            }
            self.definition(&t.name)?.check_arity(t.args.len())?;
        }
        let mut out = Vec::new();
        'symbols: for name in self.kb.symbols.keys() {
            for t in templates {
                match self.evaluate(&t.substitute(var, name)) {
                    Ok(true) => {}
                    Ok(false) | Err(PredicateError::MissingPose(_)) => continue 'symbols,
                    Err(e) => return Err(e),
                }
            }
            out.push(name.clone());
        }
        Ok(out)
    }

    /// Every grounded statement that currently holds. Symbol parameters range
    /// over all symbols (distinct within one statement), text parameters over
    /// the known class labels, and optional parameters take their defaults.
    pub fn list_true(&self) -> Vec<PredicateStatement> {
        let names: Vec<&str> = self.kb.symbols.keys().map(String::as_str).collect();
        let labels: Vec<String> = self.kb.class_labels().into_iter().collect();
        let mut out = Vec::new();
        for def in self.defs.values().filter(|d| !d.enumeration_exempt) {
            let params = def.required_params();
            if params.contains(&ParamKind::Number) {
                continue;
            }
            let domains: Vec<Vec<String>> = params
                .iter()
                .map(|k| match k {
                    ParamKind::Symbol => names.iter().map(|s| s.to_string()).collect(),
                    ParamKind::Text => labels.clone(),
                    ParamKind::Number => unreachable!(),
                })
                .collect();
            for args in cartesian(&domains) {
                let distinct = {
                    let syms: Vec<&String> = args
                        .iter()
                        .zip(params)
                        .filter(|(_, k)| **k == ParamKind::Symbol)
                        .map(|(a, _)| a)
                        .collect();
                    syms.iter().collect::<BTreeSet<_>>().len() == syms.len()
                };
                if !distinct {
                    continue;
                }
                if matches!((def.eval)(&self.kb, &args), Ok(true)) {
                    out.push(PredicateStatement {
                        name: def.name.clone(),
                        args,
                    });
                }
            }
        }
        out
    }
}

fn cartesian(domains: &[Vec<String>]) -> Vec<Vec<String>> {
    domains.iter().fold(vec![Vec::new()], |acc, domain| {
        acc.into_iter()
            .flat_map(|prefix| {
                domain.iter().map(move |v| {
                    let mut next = prefix.clone();
                    next.push(v.clone());
                    next
                })
            })
            .collect()
    })
}
