//! Declarative feature expressions and per-occasion design rows.
//!
//! A feature is a small arithmetic expression over the history available just
//! before the treatment decision at occasion `t`:
//!
//! ```text
//! 1                  constant
//! s                  covariate column at t
//! t, t^2             occasion index (polynomial time bases)
//! lag(y, 1)          previous response Y_t
//! lag(trt, 1)        previous treatment A_{t-1}
//! urge * (t < 4)     products and 0/1 indicator comparisons
//! ```
//!
//! `trt` and `y` at the current occasion are post-decision quantities and may
//! only appear inside `lag(.., j)` with `j >= 1`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{IndividualSeries, PanelDataset};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("cannot parse feature `{expr}`: {message}")]
    Syntax { expr: String, message: String },
    #[error("feature `{0}` uses information recorded after the treatment decision")]
    NotInHistory(String),
    #[error("unknown column `{column}` in feature `{feature}`")]
    UnknownColumn { feature: String, column: String },
    #[error(
        "feature `{feature}` at t={t} reaches before the first occasion and `{column}` has no declared initial value"
    )]
    FeatureEvaluation { feature: String, column: String, t: usize },
    #[error("numerator features use `{0}`, which does not feed any effect feature")]
    NumeratorOutsideModerators(String),
    #[error("invalid feature specification: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Column {
    Time,
    Treatment,
    Availability,
    Response,
    Covariate(String),
}

impl Column {
    fn from_ident(name: &str) -> Self {
        match name {
            "t" => Column::Time,
            "trt" => Column::Treatment,
            "avail" => Column::Availability,
            "y" => Column::Response,
            other => Column::Covariate(other.to_string()),
        }
    }

    fn name(&self) -> &str {
        match self {
            Column::Time => "t",
            Column::Treatment => "trt",
            Column::Availability => "avail",
            Column::Response => "y",
            Column::Covariate(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Const(f64),
    Var(Column),
    Lag(Column, usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
}

/// Expression with covariate names resolved to column positions.
#[derive(Debug, Clone, PartialEq)]
enum Compiled {
    Const(f64),
    Time,
    Value(Slot),
    Lag(Slot, usize, Option<f64>),
    Neg(Box<Compiled>),
    Bin(BinOp, Box<Compiled>, Box<Compiled>),
    Cmp(CmpOp, Box<Compiled>, Box<Compiled>),
    Pow(Box<Compiled>, i32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Treatment,
    Availability,
    Response,
    Covariate(usize),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    Comma,
    Op(String),
}

fn tokenize(src: &str) -> Result<Vec<Token>, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let s: String = chars[start..i].iter().collect();
            out.push(Token::Num(s.parse().map_err(|_| format!("bad number `{s}`"))?));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            match two.as_str() {
                "<=" | ">=" | "==" | "!=" => {
                    out.push(Token::Op(two));
                    i += 2;
                    continue;
                }
                _ => {}
            }
            match c {
                '(' => out.push(Token::LParen),
                ')' => out.push(Token::RParen),
                ',' => out.push(Token::Comma),
                '+' | '-' | '*' | '/' | '^' | '<' | '>' => out.push(Token::Op(c.to_string())),
                other => return Err(format!("unexpected character `{other}`")),
            }
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn peek_op(&self, ops: &[&str]) -> Option<String> {
        match self.peek() {
            Some(Token::Op(o)) if ops.contains(&o.as_str()) => Some(o.clone()),
            _ => None,
        }
    }

    fn expect(&mut self, tok: Token) -> Result<(), String> {
        match self.next() {
            Some(t) if t == tok => Ok(()),
            other => Err(format!("expected {tok:?}, found {other:?}")),
        }
    }

    fn comparison(&mut self) -> Result<Expr, String> {
        let lhs = self.sum()?;
        if let Some(op) = self.peek_op(&["<", "<=", ">", ">=", "==", "!="]) {
            self.pos += 1;
            let rhs = self.sum()?;
            let op = match op.as_str() {
                "<" => CmpOp::Lt,
                "<=" => CmpOp::Le,
                ">" => CmpOp::Gt,
                ">=" => CmpOp::Ge,
                "==" => CmpOp::Eq,
                _ => CmpOp::Ne,
            };
            return Ok(Expr::Cmp(op, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn sum(&mut self) -> Result<Expr, String> {
        let mut lhs = self.product()?;
        while let Some(op) = self.peek_op(&["+", "-"]) {
            self.pos += 1;
            let rhs = self.product()?;
            let op = if op == "+" { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, String> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_op(&["*", "/"]) {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if op == "*" { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, String> {
        if self.peek_op(&["-"]).is_some() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, String> {
        let base = self.atom()?;
        if self.peek_op(&["^"]).is_some() {
            self.pos += 1;
            let negative = if self.peek_op(&["-"]).is_some() {
                self.pos += 1;
                true
            } else {
                false
            };
            match self.next() {
                Some(Token::Num(v)) if v.fract() == 0.0 && v.abs() < 64.0 => {
                    let e = if negative { -(v as i32) } else { v as i32 };
                    return Ok(Expr::Pow(Box::new(base), e));
                }
                other => return Err(format!("exponent must be a small integer, found {other:?}")),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, String> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::LParen) => {
                let e = self.comparison()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            Some(Token::Ident(name)) if name == "lag" => {
                self.expect(Token::LParen)?;
                let col = match self.next() {
                    Some(Token::Ident(c)) => Column::from_ident(&c),
                    other => return Err(format!("lag() needs a column name, found {other:?}")),
                };
                if col == Column::Time {
                    return Err("lag() of the occasion index is not supported".into());
                }
                self.expect(Token::Comma)?;
                let j = match self.next() {
                    Some(Token::Num(v)) if v.fract() == 0.0 && v >= 1.0 => v as usize,
                    other => return Err(format!("lag order must be a positive integer, found {other:?}")),
                };
                self.expect(Token::RParen)?;
                Ok(Expr::Lag(col, j))
            }
            Some(Token::Ident(name)) => Ok(Expr::Var(Column::from_ident(&name))),
            other => Err(format!("unexpected token {other:?}")),
        }
    }
}

impl Expr {
    fn parse(src: &str) -> Result<Self, FeatureError> {
        let syntax = |message: String| FeatureError::Syntax {
            expr: src.to_string(),
            message,
        };
        let tokens = tokenize(src).map_err(syntax)?;
        if tokens.is_empty() {
            return Err(syntax("empty expression".into()));
        }
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.comparison().map_err(syntax)?;
        if parser.pos != parser.tokens.len() {
            return Err(syntax(format!("trailing input at token {}", parser.pos + 1)));
        }
        Ok(expr)
    }

    fn columns(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(c) | Expr::Lag(c, _) => {
                out.insert(c.name().to_string());
            }
            Expr::Neg(e) | Expr::Pow(e, _) => e.columns(out),
            Expr::Bin(_, a, b) | Expr::Cmp(_, a, b) => {
                a.columns(out);
                b.columns(out);
            }
        }
    }

    fn in_history(&self) -> bool {
        match self {
            Expr::Var(Column::Treatment) | Expr::Var(Column::Response) => false,
            Expr::Const(_) | Expr::Var(_) | Expr::Lag(..) => true,
            Expr::Neg(e) | Expr::Pow(e, _) => e.in_history(),
            Expr::Bin(_, a, b) | Expr::Cmp(_, a, b) => a.in_history() && b.in_history(),
        }
    }

    fn compile(
        &self,
        data: &PanelDataset,
        initial: &BTreeMap<String, f64>,
        feature: &str,
    ) -> Result<Compiled, FeatureError> {
        let slot = |c: &Column| -> Result<Slot, FeatureError> {
            Ok(match c {
                Column::Treatment => Slot::Treatment,
                Column::Availability => Slot::Availability,
                Column::Response => Slot::Response,
                Column::Covariate(name) => {
                    Slot::Covariate(data.covariate_index(name).ok_or_else(|| FeatureError::UnknownColumn {
                        feature: feature.to_string(),
                        column: name.clone(),
                    })?)
                }
                Column::Time => unreachable!("time has no data slot"),
            })
        };
        let rec = |e: &Expr| e.compile(data, initial, feature).map(Box::new);
        Ok(match self {
            Expr::Const(v) => Compiled::Const(*v),
            Expr::Var(Column::Time) => Compiled::Time,
            Expr::Var(c) => Compiled::Value(slot(c)?),
            Expr::Lag(c, j) => Compiled::Lag(slot(c)?, *j, initial.get(c.name()).copied()),
            Expr::Neg(e) => Compiled::Neg(rec(e)?),
            Expr::Pow(e, k) => Compiled::Pow(rec(e)?, *k),
            Expr::Bin(op, a, b) => Compiled::Bin(*op, rec(a)?, rec(b)?),
            Expr::Cmp(op, a, b) => Compiled::Cmp(*op, rec(a)?, rec(b)?),
        })
    }
}

impl Compiled {
    /// Evaluate at 1-based occasion `t`. `Err(slot)` names the column whose
    /// lag reached before the first occasion without an initial value.
    fn eval(&self, series: &IndividualSeries, t: usize) -> Result<f64, Slot> {
        let value = |slot: Slot, u: usize| -> f64 {
            let occ = &series.occasions[u - 1];
            match slot {
                Slot::Treatment => f64::from(occ.treatment),
                Slot::Availability => f64::from(u8::from(occ.available)),
                Slot::Response => occ.response,
                Slot::Covariate(j) => occ.covariates[j],
            }
        };
        Ok(match self {
            Compiled::Const(v) => *v,
            Compiled::Time => t as f64,
            Compiled::Value(slot) => value(*slot, t),
            Compiled::Lag(slot, j, init) => {
                if t > *j {
                    value(*slot, t - j)
                } else {
                    init.ok_or(*slot)?
                }
            }
            Compiled::Neg(e) => -e.eval(series, t)?,
            Compiled::Pow(e, k) => e.eval(series, t)?.powi(*k),
            Compiled::Bin(op, a, b) => {
                let (a, b) = (a.eval(series, t)?, b.eval(series, t)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Compiled::Cmp(op, a, b) => {
                let (a, b) = (a.eval(series, t)?, b.eval(series, t)?);
                let hit = match op {
                    CmpOp::Lt => a < b,
                    CmpOp::Le => a <= b,
                    CmpOp::Gt => a > b,
                    CmpOp::Ge => a >= b,
                    CmpOp::Eq => a == b,
                    CmpOp::Ne => a != b,
                };
                if hit {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }
}

/// A parsed feature expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    name: String,
    expr: Expr,
}

impl Feature {
    pub fn parse(src: &str) -> Result<Self, FeatureError> {
        let expr = Expr::parse(src)?;
        Ok(Self {
            name: src.trim().to_string(),
            expr,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Base columns referenced by the expression (`t` included).
    pub fn columns(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.expr.columns(&mut out);
        out
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Serializable form of a [`FeatureSpec`], as written in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureDecl {
    #[serde(default = "default_lag")]
    pub lag: usize,
    /// Effect features `f_kt(S_kt)`.
    pub effect: Vec<String>,
    /// Working-model features `g_kt(H_t)`.
    pub working: Vec<String>,
    #[serde(default)]
    pub numerator: Vec<String>,
    #[serde(default)]
    pub denominator: Vec<String>,
    /// Values taken by `lag(col, j)` before the first occasion. `trt`
    /// defaults to 0 when absent.
    #[serde(default)]
    pub initial: BTreeMap<String, f64>,
    /// Skip the check that numerator features only use moderator inputs.
    /// Such numerators bias marginal effects; simulation studies use this
    /// to demonstrate that bias.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_unmoderated_numerator: bool,
}

fn default_lag() -> usize {
    1
}

impl FeatureDecl {
    pub fn new(lag: usize, effect: &[&str], working: &[&str]) -> Self {
        Self {
            lag,
            effect: effect.iter().map(|s| s.to_string()).collect(),
            working: working.iter().map(|s| s.to_string()).collect(),
            numerator: Vec::new(),
            denominator: Vec::new(),
            initial: BTreeMap::new(),
            allow_unmoderated_numerator: false,
        }
    }

    pub fn numerator(mut self, features: &[&str]) -> Self {
        self.numerator = features.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn denominator(mut self, features: &[&str]) -> Self {
        self.denominator = features.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn initial(mut self, column: &str, value: f64) -> Self {
        self.initial.insert(column.to_string(), value);
        self
    }

    pub fn allow_unmoderated_numerator(mut self) -> Self {
        self.allow_unmoderated_numerator = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    lag: usize,
    effect: Vec<Feature>,
    working: Vec<Feature>,
    numerator: Vec<Feature>,
    denominator: Vec<Feature>,
    initial: BTreeMap<String, f64>,
}

impl FeatureSpec {
    pub fn compile(decl: &FeatureDecl) -> Result<Self, FeatureError> {
        let parse_all = |srcs: &[String]| -> Result<Vec<Feature>, FeatureError> {
            srcs.iter()
                .map(|s| {
                    let f = Feature::parse(s)?;
                    if !f.expr.in_history() {
                        return Err(FeatureError::NotInHistory(f.name.clone()));
                    }
                    Ok(f)
                })
                .collect()
        };
        if decl.lag < 1 {
            return Err(FeatureError::InvalidSpec("lag must be at least 1".into()));
        }
        let effect = parse_all(&decl.effect)?;
        let working = parse_all(&decl.working)?;
        if effect.is_empty() {
            return Err(FeatureError::InvalidSpec(
                "at least one effect feature is required".into(),
            ));
        }
        if working.is_empty() {
            return Err(FeatureError::InvalidSpec(
                "at least one working-model feature is required".into(),
            ));
        }
        let numerator = parse_all(&decl.numerator)?;
        let denominator = parse_all(&decl.denominator)?;
        if !decl.allow_unmoderated_numerator {
            let moderators: BTreeSet<String> = effect.iter().flat_map(Feature::columns).collect();
            for f in &numerator {
                if let Some(extra) = f.columns().into_iter().find(|c| !moderators.contains(c)) {
                    return Err(FeatureError::NumeratorOutsideModerators(extra));
                }
            }
        }
        let mut initial = decl.initial.clone();
        initial.entry("trt".to_string()).or_insert(0.0);
        Ok(Self {
            lag: decl.lag,
            effect,
            working,
            numerator,
            denominator,
            initial,
        })
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    /// The same features at a different lag.
    pub fn with_lag(&self, lag: usize) -> Self {
        Self { lag, ..self.clone() }
    }

    pub fn effect(&self) -> &[Feature] {
        &self.effect
    }

    pub fn working(&self) -> &[Feature] {
        &self.working
    }

    pub fn numerator(&self) -> &[Feature] {
        &self.numerator
    }

    pub fn denominator(&self) -> &[Feature] {
        &self.denominator
    }

    /// Dimension `p` of the effect vector.
    pub fn p(&self) -> usize {
        self.effect.len()
    }

    /// Dimension `q` of the working model.
    pub fn q(&self) -> usize {
        self.working.len()
    }
}

/// One summand of the estimating equation: individual `i` at occasion `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    /// Position of the individual in the dataset.
    pub individual: usize,
    /// 1-based occasion.
    pub t: usize,
    pub available: bool,
    pub treatment: u8,
    pub effect: Vec<f64>,
    pub working: Vec<f64>,
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
    /// `Y_{t+k}`.
    pub response: f64,
}

/// Design rows for a dataset, ordered by individual then occasion.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub rows: Vec<DesignRow>,
    n: usize,
    occasions: usize,
    lag: usize,
    p: usize,
    q: usize,
}

impl Design {
    /// Assemble a design from rows that are already grouped by individual.
    pub fn from_rows(rows: Vec<DesignRow>, n: usize, occasions: usize, lag: usize) -> Result<Self, FeatureError> {
        let first = rows
            .first()
            .ok_or_else(|| FeatureError::InvalidSpec("design has no rows".into()))?;
        let (p, q) = (first.effect.len(), first.working.len());
        let mut last = None;
        for r in &rows {
            if r.effect.len() != p || r.working.len() != q {
                return Err(FeatureError::InvalidSpec("rows have inconsistent dimensions".into()));
            }
            if r.individual >= n || last.is_some_and(|l| r.individual < l) {
                return Err(FeatureError::InvalidSpec(
                    "rows must be grouped by individual in order".into(),
                ));
            }
            last = Some(r.individual);
        }
        Ok(Self {
            rows,
            n,
            occasions,
            lag,
            p,
            q,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn occasions(&self) -> usize {
        self.occasions
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row ranges belonging to each individual, indexed by individual.
    pub fn blocks(&self) -> Vec<Range<usize>> {
        let mut out = vec![0..0; self.n];
        let mut start = 0;
        while start < self.rows.len() {
            let id = self.rows[start].individual;
            let mut end = start;
            while end < self.rows.len() && self.rows[end].individual == id {
                end += 1;
            }
            out[id] = start..end;
            start = end;
        }
        out
    }
}

pub fn build_design(data: &PanelDataset, spec: &FeatureSpec) -> Result<Design, FeatureError> {
    let big_t = data.occasions();
    let k = spec.lag;
    if k > big_t {
        return Err(FeatureError::InvalidSpec(format!(
            "lag {k} exceeds the number of occasions {big_t}"
        )));
    }
    let compile = |features: &[Feature]| -> Result<Vec<(String, Compiled)>, FeatureError> {
        features
            .iter()
            .map(|f| Ok((f.name.clone(), f.expr.compile(data, &spec.initial, &f.name)?)))
            .collect()
    };
    let effect = compile(&spec.effect)?;
    let working = compile(&spec.working)?;
    let numerator = compile(&spec.numerator)?;
    let denominator = compile(&spec.denominator)?;

    let slot_name = |slot: Slot| -> String {
        match slot {
            Slot::Treatment => "trt".into(),
            Slot::Availability => "avail".into(),
            Slot::Response => "y".into(),
            Slot::Covariate(j) => data.covariate_names()[j].clone(),
        }
    };
    let eval_all = |features: &[(String, Compiled)], series: &IndividualSeries, t: usize| {
        features
            .iter()
            .map(|(name, c)| {
                c.eval(series, t).map_err(|slot| FeatureError::FeatureEvaluation {
                    feature: name.clone(),
                    column: slot_name(slot),
                    t,
                })
            })
            .collect::<Result<Vec<f64>, FeatureError>>()
    };

    let rows_per = big_t - k + 1;
    let mut rows = Vec::with_capacity(data.n() * rows_per);
    for (i, series) in data.individuals().iter().enumerate() {
        for t in 1..=rows_per {
            let occ = &series.occasions[t - 1];
            rows.push(DesignRow {
                individual: i,
                t,
                available: occ.available,
                treatment: occ.treatment,
                effect: eval_all(&effect, series, t)?,
                working: eval_all(&working, series, t)?,
                numerator: eval_all(&numerator, series, t)?,
                denominator: eval_all(&denominator, series, t)?,
                // Y_{t+k} is stored at occasion t+k-1
                response: series.occasions[t + k - 2].response,
            });
        }
    }
    Ok(Design {
        rows,
        n: data.n(),
        occasions: big_t,
        lag: k,
        p: spec.p(),
        q: spec.q(),
    })
}
