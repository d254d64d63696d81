//! JSON experiment configuration and its validation.
//!
//! Validation never stops at the first problem: every violation is collected
//! with the JSON path it refers to.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Curvature,
    Eigen,
    Flow,
    Solve,
    Gns,
    Minimize,
    Soliton,
    Criteria,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Curvature,
        Command::Eigen,
        Command::Flow,
        Command::Solve,
        Command::Gns,
        Command::Minimize,
        Command::Soliton,
        Command::Criteria,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Curvature => "curvature",
            Command::Eigen => "eigen",
            Command::Flow => "flow",
            Command::Solve => "solve",
            Command::Gns => "gns",
            Command::Minimize => "minimize",
            Command::Soliton => "soliton",
            Command::Criteria => "criteria",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    fn schema(self) -> &'static [(&'static str, Kind)] {
        use Kind::*;
        match self {
            Command::Curvature => &[("w", Field)],
            Command::Eigen => &[("tol", Positive)],
            Command::Flow => {
                &[("normalized", Bool), ("t_end", NonNegative), ("dt", Positive), ("sample_every", Count), ("w0", Field)]
            }
            Command::Solve => {
                &[("epsilon", OpenUnit), ("delta", OpenUnit), ("tol", Positive), ("max_iter", Count), ("newton_check", Bool)]
            }
            Command::Gns => &[("epsilon", Positive), ("x0", Numbers), ("w", Field)],
            Command::Minimize => {
                &[("init", Field), ("tol", Positive), ("max_iter", Count), ("starts", Count), ("perturbation", OpenUnit)]
            }
            Command::Soliton => &[("f", Field), ("lambda", Number)],
            Command::Criteria => &[("only", Ids)],
        }
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Command::Soliton => &["f", "lambda"],
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// JSON pointer style location, `/` for the document root.
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Number,
    Positive,
    NonNegative,
    /// Strictly between 0 and 1.
    OpenUnit,
    Bool,
    /// Integer >= 1.
    Count,
    Field,
    Numbers,
    /// Criterion ids 1 to 9.
    Ids,
}

/// Where the values of a node or boundary field come from.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldRef {
    Constant(f64),
    Values(Vec<f64>),
    /// CSV file with a header; `column` defaults to `value`, then the last column.
    File {
        path: PathBuf,
        column: Option<String>,
    },
    /// `sum coef * prod x_a^e_a` over the domain coordinates.
    Polynomial(Vec<(f64, Vec<u32>)>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    Interval { nodes: usize, length: f64 },
    RadialBall { nodes: usize },
    HalfspaceCylinder { nr: usize, nt: usize, r_max: f64, t_max: f64 },
    HalfspaceBox { nx: usize, nt: usize, x_half: f64, t_max: f64 },
}

impl DomainSpec {
    pub fn is_halfspace(&self) -> bool {
        matches!(self, DomainSpec::HalfspaceCylinder { .. } | DomainSpec::HalfspaceBox { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmmsSpec {
    pub domain: DomainSpec,
    pub n: usize,
    pub m: f64,
    pub phi0: FieldRef,
    pub r_g0: FieldRef,
    pub h_g0: FieldRef,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    Number(f64),
    Bool(bool),
    Count(usize),
    Field(FieldRef),
    Numbers(Vec<f64>),
    Ids(Vec<u32>),
}

/// Validated command parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params(BTreeMap<String, Param>);

impl Params {
    pub fn number(&self, key: &str) -> Option<f64> {
        match self.0.get(key) {
            Some(Param::Number(x)) => Some(*x),
            _ => None,
        }
    }

    pub fn flag(&self, key: &str) -> Option<bool> {
        match self.0.get(key) {
            Some(Param::Bool(b)) => Some(*b),
            _ => None,
        }
    }

    pub fn count(&self, key: &str) -> Option<usize> {
        match self.0.get(key) {
            Some(Param::Count(c)) => Some(*c),
            _ => None,
        }
    }

    pub fn field(&self, key: &str) -> Option<&FieldRef> {
        match self.0.get(key) {
            Some(Param::Field(f)) => Some(f),
            _ => None,
        }
    }

    pub fn numbers(&self, key: &str) -> Option<&[f64]> {
        match self.0.get(key) {
            Some(Param::Numbers(v)) => Some(v),
            _ => None,
        }
    }

    pub fn ids(&self, key: &str) -> Option<&[u32]> {
        match self.0.get(key) {
            Some(Param::Ids(v)) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub smms: Option<SmmsSpec>,
    pub params: Params,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// The document as given, echoed into the manifest.
    pub raw: Value,
}

/// Parses and validates a configuration. `command` is the subcommand of the
/// invocation; when the document also names one they must agree.
pub fn validate_config(text: &str, command: Option<Command>) -> Result<ExperimentConfig, Vec<Violation>> {
    let mut ck = Checker::default();
    if text.trim().is_empty() {
        ck.push("/", "configuration is empty");
        if command.is_none() {
            ck.push("/command", "missing; name one of the subcommands");
        }
        return Err(ck.out);
    }
    let raw: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            ck.push("/", &format!("not valid JSON: {e}"));
            return Err(ck.out);
        }
    };
    let Some(top) = ck.object(&raw, "/") else {
        return Err(ck.out);
    };
    ck.unknown(top, &["command", "smms", "params", "out", "seed"], "");

    let named = match top.get("command") {
        None => None,
        Some(Value::String(s)) => match Command::from_name(s) {
            Some(c) => Some(c),
            None => {
                let names: Vec<_> = Command::ALL.iter().map(|c| c.name()).collect();
                ck.push("/command", &format!("unknown command `{s}`; expected one of {}", names.join(", ")));
                None
            }
        },
        Some(_) => {
            ck.push("/command", "must be a string");
            None
        }
    };
    let effective = match (command, named) {
        (Some(a), Some(b)) if a != b => {
            ck.push("/command", &format!("config is for `{}` but `{}` was invoked", b.name(), a.name()));
            Some(a)
        }
        (Some(a), _) => Some(a),
        (None, Some(b)) => Some(b),
        (None, None) => {
            if top.get("command").is_none() {
                ck.push("/command", "missing; name one of the subcommands");
            }
            None
        }
    };

    let smms = match top.get("smms") {
        Some(v) => ck.smms(v),
        None => None,
    };
    if let Some(c) = effective {
        let given = top.contains_key("smms");
        if c == Command::Criteria && given {
            ck.push("/smms", "criteria builds its own backgrounds; remove `smms`");
        } else if c != Command::Criteria && !given {
            ck.push("/smms", &format!("required by `{}`", c.name()));
        }
        if c == Command::Gns {
            if let Some(s) = &smms {
                if !s.domain.is_halfspace() {
                    ck.push("/smms/domain/kind", "gns needs halfspace_cylinder or halfspace_box");
                }
            }
        }
    }

    let params = match (top.get("params"), effective) {
        (Some(v), Some(c)) => ck.params(v, c),
        (Some(v), None) => {
            ck.object(v, "/params");
            Params::default()
        }
        (None, Some(c)) => {
            for key in c.required() {
                ck.push(&format!("/params/{key}"), &format!("required by `{}`", c.name()));
            }
            Params::default()
        }
        (None, None) => Params::default(),
    };

    let out = match top.get("out") {
        None => None,
        Some(Value::String(s)) if !s.is_empty() => Some(PathBuf::from(s)),
        Some(_) => {
            ck.push("/out", "must be a non-empty string");
            None
        }
    };
    let seed = match top.get("seed") {
        None => None,
        Some(v) => match v.as_u64() {
            Some(s) => Some(s),
            None => {
                ck.push("/seed", "must be a non-negative integer");
                None
            }
        },
    };

    match effective {
        Some(command) if ck.out.is_empty() => Ok(ExperimentConfig { command, smms, params, out, seed, raw }),
        _ => Err(ck.out),
    }
}

#[derive(Default)]
struct Checker {
    out: Vec<Violation>,
}

impl Checker {
    fn push(&mut self, path: &str, message: &str) {
        self.out.push(Violation { path: path.to_string(), message: message.to_string() });
    }

    fn object<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a Map<String, Value>> {
        match v {
            Value::Object(m) => Some(m),
            _ => {
                self.push(path, "must be an object");
                None
            }
        }
    }

    fn unknown(&mut self, map: &Map<String, Value>, allowed: &[&str], path: &str) {
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                self.push(&format!("{path}/{key}"), &format!("unknown key `{key}`; allowed: {}", allowed.join(", ")));
            }
        }
    }

    fn count(&mut self, map: &Map<String, Value>, key: &str, path: &str, min: usize) -> Option<usize> {
        let p = format!("{path}/{key}");
        match map.get(key) {
            None => {
                self.push(&p, "required");
                None
            }
            Some(v) => match v.as_u64() {
                Some(c) if c as usize >= min => Some(c as usize),
                _ => {
                    self.push(&p, &format!("must be an integer >= {min}"));
                    None
                }
            },
        }
    }

    fn positive(&mut self, map: &Map<String, Value>, key: &str, path: &str, default: Option<f64>) -> Option<f64> {
        let p = format!("{path}/{key}");
        match map.get(key) {
            None => {
                if default.is_none() {
                    self.push(&p, "required");
                }
                default
            }
            Some(v) => match v.as_f64() {
                Some(x) if x > 0.0 && x.is_finite() => Some(x),
                _ => {
                    self.push(&p, "must be a positive number");
                    None
                }
            },
        }
    }

    fn domain(&mut self, v: &Value, path: &str) -> Option<DomainSpec> {
        let map = self.object(v, path)?;
        let kind = match map.get("kind") {
            Some(Value::String(s)) => s.as_str(),
            Some(_) => {
                self.push(&format!("{path}/kind"), "must be a string");
                return None;
            }
            None => {
                self.push(&format!("{path}/kind"), "required");
                return None;
            }
        };
        match kind {
            "interval" => {
                self.unknown(map, &["kind", "nodes", "length"], path);
                let nodes = self.count(map, "nodes", path, 3);
                let length = self.positive(map, "length", path, Some(1.0));
                Some(DomainSpec::Interval { nodes: nodes?, length: length? })
            }
            "radial_ball" => {
                self.unknown(map, &["kind", "nodes"], path);
                Some(DomainSpec::RadialBall { nodes: self.count(map, "nodes", path, 4)? })
            }
            "halfspace_cylinder" => {
                self.unknown(map, &["kind", "nr", "nt", "r_max", "t_max"], path);
                let nr = self.count(map, "nr", path, 4);
                let nt = self.count(map, "nt", path, 4);
                let r_max = self.positive(map, "r_max", path, None);
                let t_max = self.positive(map, "t_max", path, None);
                Some(DomainSpec::HalfspaceCylinder { nr: nr?, nt: nt?, r_max: r_max?, t_max: t_max? })
            }
            "halfspace_box" => {
                self.unknown(map, &["kind", "nx", "nt", "x_half", "t_max"], path);
                let nx = self.count(map, "nx", path, 4);
                let nt = self.count(map, "nt", path, 4);
                let x_half = self.positive(map, "x_half", path, None);
                let t_max = self.positive(map, "t_max", path, None);
                Some(DomainSpec::HalfspaceBox { nx: nx?, nt: nt?, x_half: x_half?, t_max: t_max? })
            }
            other => {
                self.push(
                    &format!("{path}/kind"),
                    &format!(
                        "unknown domain kind `{other}`; expected interval, radial_ball, halfspace_cylinder or halfspace_box"
                    ),
                );
                None
            }
        }
    }

    fn smms(&mut self, v: &Value) -> Option<SmmsSpec> {
        let path = "/smms";
        let map = self.object(v, path)?;
        self.unknown(map, &["domain", "n", "m", "phi0", "R_g0", "H_g0"], path);
        let domain = match map.get("domain") {
            Some(d) => self.domain(d, "/smms/domain"),
            None => {
                self.push("/smms/domain", "required");
                None
            }
        };
        let is_box = matches!(domain, Some(DomainSpec::HalfspaceBox { .. }));
        let n = match map.get("n") {
            None if is_box => Some(3),
            None => {
                self.push("/smms/n", "required");
                None
            }
            Some(v) => match v.as_u64() {
                Some(n) if is_box && n != 3 => {
                    self.push("/smms/n", &format!("halfspace_box has n = 3, got {n}"));
                    None
                }
                Some(n) if n >= 1 => Some(n as usize),
                _ => {
                    self.push("/smms/n", "must be an integer >= 1");
                    None
                }
            },
        };
        let m = match map.get("m") {
            None => Some(0.0),
            Some(v) => match v.as_f64() {
                Some(x) if x >= 0.0 && x.is_finite() => Some(x),
                _ => {
                    self.push("/smms/m", "must be a number >= 0");
                    None
                }
            },
        };
        let mut field = |key: &str| match map.get(key) {
            None => Some(FieldRef::Constant(0.0)),
            Some(v) => self.field_ref(v, &format!("/smms/{key}")),
        };
        let phi0 = field("phi0");
        let r_g0 = field("R_g0");
        let h_g0 = field("H_g0");
        Some(SmmsSpec { domain: domain?, n: n?, m: m?, phi0: phi0?, r_g0: r_g0?, h_g0: h_g0? })
    }

    fn field_ref(&mut self, v: &Value, path: &str) -> Option<FieldRef> {
        match v {
            Value::Number(x) => x.as_f64().map(FieldRef::Constant),
            Value::Array(items) => {
                let vals: Vec<Option<f64>> = items.iter().map(Value::as_f64).collect();
                if items.is_empty() || vals.iter().any(Option::is_none) {
                    self.push(path, "an inline field must be a non-empty array of numbers");
                    return None;
                }
                Some(FieldRef::Values(vals.into_iter().flatten().collect()))
            }
            Value::String(s) if !s.is_empty() => Some(FieldRef::File { path: PathBuf::from(s), column: None }),
            Value::Object(map) => {
                if let Some(terms) = map.get("polynomial") {
                    self.unknown(map, &["polynomial"], path);
                    return self.polynomial(terms, &format!("{path}/polynomial"));
                }
                if let Some(file) = map.get("file") {
                    self.unknown(map, &["file", "column"], path);
                    let column = match map.get("column") {
                        None => None,
                        Some(Value::String(c)) => Some(c.clone()),
                        Some(_) => {
                            self.push(&format!("{path}/column"), "must be a string");
                            return None;
                        }
                    };
                    return match file {
                        Value::String(s) if !s.is_empty() => Some(FieldRef::File { path: PathBuf::from(s), column }),
                        _ => {
                            self.push(&format!("{path}/file"), "must be a non-empty string");
                            None
                        }
                    };
                }
                self.push(path, "a field object needs `polynomial` or `file`");
                None
            }
            _ => {
                self.push(path, "a field is a number, an array, a CSV path, {\"file\": ..} or {\"polynomial\": ..}");
                None
            }
        }
    }

    fn polynomial(&mut self, v: &Value, path: &str) -> Option<FieldRef> {
        let Value::Array(terms) = v else {
            self.push(path, "must be an array of [coefficient, [exponents]] terms");
            return None;
        };
        let mut out = Vec::with_capacity(terms.len());
        let mut ok = true;
        for (i, t) in terms.iter().enumerate() {
            let parsed = t.as_array().filter(|a| a.len() == 2).and_then(|a| {
                let coef = a[0].as_f64()?;
                let exps = a[1].as_array()?.iter().map(|e| e.as_u64().map(|x| x as u32)).collect::<Option<Vec<_>>>()?;
                Some((coef, exps))
            });
            match parsed {
                Some(term) => out.push(term),
                None => {
                    self.push(&format!("{path}/{i}"), "must be [coefficient, [non-negative integer exponents]]");
                    ok = false;
                }
            }
        }
        ok.then_some(FieldRef::Polynomial(out))
    }

    fn params(&mut self, v: &Value, command: Command) -> Params {
        let mut out = Params::default();
        let Some(map) = self.object(v, "/params") else {
            return out;
        };
        let schema = command.schema();
        let allowed: Vec<&str> = schema.iter().map(|(k, _)| *k).collect();
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                let hint = if allowed.is_empty() { "none".to_string() } else { allowed.join(", ") };
                self.push(&format!("/params/{key}"), &format!("unknown key `{key}` for `{}`; allowed: {hint}", command.name()));
            }
        }
        for key in command.required() {
            if !map.contains_key(*key) {
                self.push(&format!("/params/{key}"), &format!("required by `{}`", command.name()));
            }
        }
        for &(key, kind) in schema {
            let Some(v) = map.get(key) else { continue };
            let path = format!("/params/{key}");
            let num = v.as_f64().filter(|x| x.is_finite());
            let parsed = match kind {
                Kind::Number => num.map(Param::Number),
                Kind::Positive => num.filter(|&x| x > 0.0).map(Param::Number),
                Kind::NonNegative => num.filter(|&x| x >= 0.0).map(Param::Number),
                Kind::OpenUnit => num.filter(|&x| x > 0.0 && x < 1.0).map(Param::Number),
                Kind::Bool => v.as_bool().map(Param::Bool),
                Kind::Count => v.as_u64().filter(|&c| c >= 1).map(|c| Param::Count(c as usize)),
                Kind::Field => match self.field_ref(v, &path) {
                    Some(f) => Some(Param::Field(f)),
                    None => continue,
                },
                Kind::Numbers => v
                    .as_array()
                    .and_then(|a| a.iter().map(|x| x.as_f64().filter(|y| y.is_finite())).collect::<Option<Vec<_>>>())
                    .map(Param::Numbers),
                Kind::Ids => v
                    .as_array()
                    .filter(|a| !a.is_empty())
                    .and_then(|a| {
                        a.iter().map(|x| x.as_u64().filter(|i| (1..=9).contains(i)).map(|i| i as u32)).collect::<Option<Vec<_>>>()
                    })
                    .map(Param::Ids),
            };
            match parsed {
                Some(p) => {
                    out.0.insert(key.to_string(), p);
                }
                None => {
                    let expect = match kind {
                        Kind::Number => "a finite number",
                        Kind::Positive => "a positive number",
                        Kind::NonNegative => "a number >= 0",
                        Kind::OpenUnit => "a number strictly between 0 and 1",
                        Kind::Bool => "true or false",
                        Kind::Count => "an integer >= 1",
                        Kind::Field => unreachable!(),
                        Kind::Numbers => "an array of numbers",
                        Kind::Ids => "a non-empty array of criterion ids 1 to 9",
                    };
                    self.push(&path, &format!("must be {expect}"));
                }
            }
        }
        out
    }
}
