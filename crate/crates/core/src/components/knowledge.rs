use serde_json::json;

use super::smart_move::QUERY_VARIABLE;
use super::{
    param_f64, param_name, required_name, unknown_op, Component, ComponentClass, ComponentDescriptor, OpError,
    OpOutcome, OperationSignature, ParamKind, ParamSpec, Params, World,
};
use crate::predicator::{parse_statements, PredicateStatement};

pub const DEFAULT_WAIT_TIMEOUT: u64 = 1000;

/// Plan-level access to the predicator: checks, waits and symbol queries.
#[derive(Debug)]
pub struct Knowledge {
    name: String,
    waiting: Option<Wait>,
}

#[derive(Debug)]
struct Wait {
    statements: Vec<PredicateStatement>,
    deadline: u64,
    timeout: u64,
}

impl Knowledge {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            waiting: None,
        }
    }
}

fn statements(params: &Params) -> Result<Vec<PredicateStatement>, OpError> {
    let parsed = parse_statements(required_name(params, "expr")?)?;
    if parsed.is_empty() {
        return Err(OpError::MissingParam("expr".into()));
    }
    Ok(parsed)
}

fn all_true(world: &World, stmts: &[PredicateStatement]) -> Result<bool, OpError> {
    for s in stmts {
        if !world.predicator.evaluate(s)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Templates over `?X` from `class`, `relation` with `ref`, and `where`.
fn templates(params: &Params) -> Result<Vec<PredicateStatement>, OpError> {
    let mut out = Vec::new();
    if let Some(class) = param_name(params, "class")? {
        out.push(PredicateStatement::new("IsClass", [QUERY_VARIABLE, class]));
    }
    if let Some(rel) = param_name(params, "relation")? {
        let reference = required_name(params, "ref")?;
        out.push(PredicateStatement::new(rel, [QUERY_VARIABLE, reference]));
    }
    if let Some(text) = param_name(params, "where")? {
        out.extend(parse_statements(text)?);
    }
    if out.is_empty() {
        return Err(OpError::MissingParam("class, relation or where".into()));
    }
    Ok(out)
}

impl Component for Knowledge {
    fn descriptor(&self) -> ComponentDescriptor {
        use ParamKind::*;
        let expr = ParamSpec::new("expr", Text, true, "statements such as `ToolInPosition(polisher)`, `;`-separated");
        let query = vec![
            ParamSpec::new("class", Text, false, "object class"),
            ParamSpec::new("relation", Text, false, "relational predicate"),
            ParamSpec::new("ref", Symbol, false, "reference frame"),
            ParamSpec::new("where", Text, false, "templates over ?X"),
        ];
        let mut exists = query.clone();
        exists.push(ParamSpec::new("min", Number, false, "required match count, default 1"));
        ComponentDescriptor {
            name: self.name.clone(),
            class: ComponentClass::Knowledge,
            operations: vec![
                OperationSignature::new("Check", vec![expr.clone()]).knowledge(),
                OperationSignature::new(
                    "WaitFor",
                    vec![expr, ParamSpec::new("timeout", Number, false, "ticks before failing")],
                )
                .knowledge(),
                OperationSignature::new("Exists", exists).knowledge(),
                OperationSignature::new("Query", query).knowledge(),
            ],
            predicates: vec![],
            symbol_kinds: vec![],
            input_topics: vec![],
            output_topics: vec![],
        }
    }

    fn start(&mut self, op: &str, params: &Params, world: &mut World) -> Result<OpOutcome, OpError> {
        match op {
            "Check" => {
                let stmts = statements(params)?;
                Ok(if all_true(world, &stmts)? {
                    OpOutcome::Success(json!(true))
                } else {
                    OpOutcome::Failure(format!("{} is false", stmts.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("; ")))
                })
            }
            "WaitFor" => {
                let stmts = statements(params)?;
                let timeout = param_f64(params, "timeout")?.map_or(DEFAULT_WAIT_TIMEOUT, |t| t.max(0.0) as u64);
                if all_true(world, &stmts)? {
                    return Ok(OpOutcome::Success(json!({ "waited": 0 })));
                }
                self.waiting = Some(Wait {
                    statements: stmts,
                    deadline: world.sim.tick() + timeout,
                    timeout,
                });
                Ok(OpOutcome::Running)
            }
            "Exists" | "Query" => {
                let found = world.predicator.query_symbols(&templates(params)?)?;
                let min = param_f64(params, "min")?.unwrap_or(1.0);
                if op == "Exists" && (found.len() as f64) < min {
                    return Ok(OpOutcome::Failure(format!("{} match(es), need {min}", found.len())));
                }
                Ok(OpOutcome::Success(json!({ "symbols": found })))
            }
            other => Err(unknown_op(&self.name, other)),
        }
    }

    fn poll(&mut self, world: &mut World) -> Result<OpOutcome, OpError> {
        let Some(w) = &self.waiting else {
            return Ok(OpOutcome::Success(json!(null)));
        };
        if all_true(world, &w.statements)? {
            self.waiting = None;
            return Ok(OpOutcome::Success(json!({ "tick": world.sim.tick() })));
        }
        if world.sim.tick() >= w.deadline {
            let timeout = w.timeout;
            self.waiting = None;
            return Err(OpError::Timeout(timeout));
        }
        Ok(OpOutcome::Running)
    }

    fn halt(&mut self, _world: &mut World) {
        self.waiting = None;
    }
}
