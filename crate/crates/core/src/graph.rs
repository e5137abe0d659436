//! Discrete graphical models over Boolean variables.
//!
//! A [`GraphicalModel`] pairs a set of Boolean variables with a collection of
//! non-negative real-valued factors, each over a scope of one or two
//! variables. The model denotes the unnormalized product of its factor
//! tables; dividing by the partition function `Z` (the sum of that product
//! over all assignments) yields a joint probability distribution, and summing
//! it per variable yields posterior marginals.
//!
//! This module deliberately stays small: representation, validation, an
//! exhaustive-enumeration oracle for tests (guarded by
//! [`ENUMERATION_LIMIT`]), and a plain-text dump format for golden files.
//! Scalable inference lives in [`crate::inference`].

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Hard cap on the number of variables the exhaustive-enumeration routines
/// accept. The oracle exists to validate the real engines on small models;
/// past this size enumeration is no longer a reasonable test tool.
pub const ENUMERATION_LIMIT: usize = 20;

/// Index of a variable within its model. Dense, starting at zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VariableId(pub usize);

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// What a variable stands for: an atomic claim extracted from a response, or
/// a retrieved evidence passage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Atom,
    Context,
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarKind::Atom => f.write_str("atom"),
            VarKind::Context => f.write_str("context"),
        }
    }
}

/// A declared model variable: its index, what it represents, and the
/// identifier of the atom/context it was built from (empty for synthetic
/// variables constructed directly in tests).
#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub id: VariableId,
    pub kind: VarKind,
    pub source_id: String,
}

/// Errors raised by model construction, enumeration, and inference.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelError {
    /// Factor scopes are limited to one or two variables.
    UnsupportedArity { arity: usize },
    /// Table length must be 2^arity.
    TableLength { expected: usize, actual: usize },
    /// A factor scope lists the same variable twice.
    DuplicateScopeVariable { variable: VariableId },
    /// A table entry is negative, NaN, or infinite.
    InvalidEntry { index: usize, value: f64 },
    /// Every table entry is zero; such a factor annihilates the model.
    AllZeroFactor,
    /// A factor references a variable the model never declared.
    UnknownVariable { variable: VariableId },
    /// An assignment does not cover exactly the declared variables.
    AssignmentLength { expected: usize, actual: usize },
    /// The model exceeds [`ENUMERATION_LIMIT`].
    TooManyVariables { count: usize, limit: usize },
    /// The partition function is zero: no assignment has positive weight.
    DegenerateModel,
    /// An elimination order is not a permutation of the model's variables.
    InvalidOrder { reason: &'static str },
    /// An inference configuration value is out of range.
    InvalidConfig { reason: &'static str },
    /// A model dump could not be parsed.
    Parse { line: usize, message: &'static str },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::UnsupportedArity { arity } => {
                write!(f, "factor scope must have one or two variables, got {arity}")
            }
            ModelError::TableLength { expected, actual } => {
                write!(f, "factor table needs {expected} entries for its scope, got {actual}")
            }
            ModelError::DuplicateScopeVariable { variable } => {
                write!(f, "factor scope repeats variable {variable}")
            }
            ModelError::InvalidEntry { index, value } => {
                write!(f, "factor table entry {index} is negative or not finite ({value})")
            }
            ModelError::AllZeroFactor => f.write_str("factor table has no positive entry"),
            ModelError::UnknownVariable { variable } => {
                write!(f, "factor references undeclared variable {variable}")
            }
            ModelError::AssignmentLength { expected, actual } => {
                write!(f, "assignment covers {actual} variables, model declares {expected}")
            }
            ModelError::TooManyVariables { count, limit } => {
                write!(f, "model has {count} variables, enumeration is capped at {limit}")
            }
            ModelError::DegenerateModel => {
                f.write_str("partition function is zero: the model admits no positive-weight assignment")
            }
            ModelError::InvalidOrder { reason } => write!(f, "invalid elimination order: {reason}"),
            ModelError::InvalidConfig { reason } => {
                write!(f, "invalid inference configuration: {reason}")
            }
            ModelError::Parse { line, message } => write!(f, "model dump line {line}: {message}"),
        }
    }
}

impl core::error::Error for ModelError {}

/// A non-negative real-valued function over one or two Boolean variables.
///
/// Tables are stored row-major in scope order with `false = 0` and
/// `true = 1`, the first scope variable being the most significant position.
/// A unary table is `[f(false), f(true)]`; a binary table over `(a, b)` is
/// `[f(false,false), f(false,true), f(true,false), f(true,true)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    scope: Vec<VariableId>,
    table: Vec<f64>,
}

impl Factor {
    /// Builds a factor after validating scope and table.
    ///
    /// Requirements: scope of one or two distinct variables, table of length
    /// `2^arity`, every entry finite and `>= 0`, at least one entry `> 0`.
    pub fn new(scope: Vec<VariableId>, table: Vec<f64>) -> Result<Self, ModelError> {
        let arity = scope.len();
        if !(1..=2).contains(&arity) {
            return Err(ModelError::UnsupportedArity { arity });
        }
        if arity == 2 && scope[0] == scope[1] {
            return Err(ModelError::DuplicateScopeVariable { variable: scope[0] });
        }
        let expected = 1usize << arity;
        if table.len() != expected {
            return Err(ModelError::TableLength { expected, actual: table.len() });
        }
        let mut any_positive = false;
        for (index, &value) in table.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::InvalidEntry { index, value });
            }
            any_positive |= value > 0.0;
        }
        if !any_positive {
            return Err(ModelError::AllZeroFactor);
        }
        Ok(Factor { scope, table })
    }

    /// Unary factor with the given values for `false` and `true`.
    pub fn unary(variable: VariableId, value_false: f64, value_true: f64) -> Result<Self, ModelError> {
        Factor::new(alloc::vec![variable], alloc::vec![value_false, value_true])
    }

    /// Binary factor over `(first, second)`; `table` is
    /// `[f(f,f), f(f,t), f(t,f), f(t,t)]`.
    pub fn binary(first: VariableId, second: VariableId, table: [f64; 4]) -> Result<Self, ModelError> {
        Factor::new(alloc::vec![first, second], table.to_vec())
    }

    pub fn scope(&self) -> &[VariableId] {
        &self.scope
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn arity(&self) -> usize {
        self.scope.len()
    }

    /// Table value for an assignment given in scope order.
    ///
    /// Panics if `assignment.len() != arity` — this is an internal indexing
    /// aid, not a validated entry point.
    pub fn value_at(&self, assignment: &[bool]) -> f64 {
        assert_eq!(assignment.len(), self.scope.len(), "assignment must match scope");
        let index = assignment.iter().fold(0usize, |acc, &bit| (acc << 1) | usize::from(bit));
        self.table[index]
    }

    /// Table value under a full model assignment (indexed by variable).
    pub(crate) fn value_under(&self, full_assignment: &[bool]) -> f64 {
        let index = self
            .scope
            .iter()
            .fold(0usize, |acc, v| (acc << 1) | usize::from(full_assignment[v.0]));
        self.table[index]
    }
}

/// Posterior marginals for every variable of a model.
///
/// Row `i` holds `[P(x_i = false), P(x_i = true)]`; rows are normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalTable {
    rows: Vec<[f64; 2]>,
}

impl MarginalTable {
    pub fn from_rows(rows: Vec<[f64; 2]>) -> Self {
        MarginalTable { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[[f64; 2]] {
        &self.rows
    }

    pub fn p_true(&self, variable: VariableId) -> f64 {
        self.rows[variable.0][1]
    }

    pub fn p_false(&self, variable: VariableId) -> f64 {
        self.rows[variable.0][0]
    }

    /// Largest absolute difference between any two corresponding entries.
    /// Panics if the tables cover different variable counts.
    pub fn max_abs_difference(&self, other: &MarginalTable) -> f64 {
        assert_eq!(self.rows.len(), other.rows.len(), "tables cover different models");
        let mut worst = 0.0f64;
        for (a, b) in self.rows.iter().zip(other.rows.iter()) {
            for side in 0..2 {
                let d = (a[side] - b[side]).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }
}

/// A factored distribution over Boolean variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GraphicalModel {
    variables: Vec<Variable>,
    factors: Vec<Factor>,
}

impl GraphicalModel {
    pub fn new() -> Self {
        GraphicalModel::default()
    }

    /// Declares a fresh variable and returns its id. `source_id` names the
    /// atom or context the variable represents; pass `""` for synthetic
    /// variables.
    pub fn add_variable(&mut self, kind: VarKind, source_id: &str) -> VariableId {
        let id = VariableId(self.variables.len());
        self.variables.push(Variable { id, kind, source_id: String::from(source_id) });
        id
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Adds a factor after checking that its scope refers to declared
    /// variables.
    pub fn add_factor(&mut self, factor: Factor) -> Result<(), ModelError> {
        for &v in factor.scope() {
            if v.0 >= self.variables.len() {
                return Err(ModelError::UnknownVariable { variable: v });
            }
        }
        self.factors.push(factor);
        Ok(())
    }

    /// Variable id of the first variable whose `source_id` matches, if any.
    pub fn variable_by_source(&self, source_id: &str) -> Option<VariableId> {
        self.variables.iter().find(|v| v.source_id == source_id).map(|v| v.id)
    }

    /// Unnormalized weight of a full assignment: the product over all
    /// factors of the table entry the assignment selects.
    pub fn joint_weight(&self, assignment: &[bool]) -> Result<f64, ModelError> {
        if assignment.len() != self.variables.len() {
            return Err(ModelError::AssignmentLength {
                expected: self.variables.len(),
                actual: assignment.len(),
            });
        }
        Ok(self.factors.iter().map(|f| f.value_under(assignment)).product())
    }

    /// Partition function `Z`: the sum of [`Self::joint_weight`] over all
    /// `2^n` assignments. Exhaustive; refuses models beyond
    /// [`ENUMERATION_LIMIT`] and models whose `Z` is zero.
    pub fn partition_function(&self) -> Result<f64, ModelError> {
        let n = self.variables.len();
        if n > ENUMERATION_LIMIT {
            return Err(ModelError::TooManyVariables { count: n, limit: ENUMERATION_LIMIT });
        }
        let mut z = 0.0f64;
        let mut assignment = alloc::vec![false; n];
        for mask in 0u64..(1u64 << n) {
            for (i, slot) in assignment.iter_mut().enumerate() {
                *slot = (mask >> i) & 1 == 1;
            }
            z += self.joint_weight(&assignment)?;
        }
        if z <= 0.0 {
            return Err(ModelError::DegenerateModel);
        }
        Ok(z)
    }

    /// Posterior marginals by exhaustive enumeration. The test oracle for
    /// the scalable engines; same guard as [`Self::partition_function`].
    pub fn brute_force_marginals(&self) -> Result<MarginalTable, ModelError> {
        let n = self.variables.len();
        if n > ENUMERATION_LIMIT {
            return Err(ModelError::TooManyVariables { count: n, limit: ENUMERATION_LIMIT });
        }
        let mut true_mass = alloc::vec![0.0f64; n];
        let mut z = 0.0f64;
        let mut assignment = alloc::vec![false; n];
        for mask in 0u64..(1u64 << n) {
            for (i, slot) in assignment.iter_mut().enumerate() {
                *slot = (mask >> i) & 1 == 1;
            }
            let w = self.joint_weight(&assignment)?;
            z += w;
            for (i, &bit) in assignment.iter().enumerate() {
                if bit {
                    true_mass[i] += w;
                }
            }
        }
        if z <= 0.0 {
            return Err(ModelError::DegenerateModel);
        }
        let rows = true_mass.iter().map(|&t| [(z - t) / z, t / z]).collect();
        Ok(MarginalTable::from_rows(rows))
    }

    /// Serializes the model to the plain-text dump format.
    ///
    /// One line per variable, then one per factor:
    ///
    /// ```text
    /// var <index> <kind> [<source_id>]
    /// factor <v0> [<v1>] | <entries...>
    /// ```
    ///
    /// `kind` is `atom` or `context`; table entries are written false-first
    /// in scope order (first listed variable most significant). Blank lines
    /// and lines starting with `#` are ignored by the parser. Float
    /// formatting round-trips exactly.
    pub fn dump(&self) -> String {
        use core::fmt::Write;
        let mut out = String::new();
        for v in &self.variables {
            if v.source_id.is_empty() {
                let _ = writeln!(out, "var {} {}", v.id.0, v.kind);
            } else {
                let _ = writeln!(out, "var {} {} {}", v.id.0, v.kind, v.source_id);
            }
        }
        for f in &self.factors {
            let _ = write!(out, "factor");
            for v in f.scope() {
                let _ = write!(out, " {}", v.0);
            }
            let _ = write!(out, " |");
            for e in f.table() {
                let _ = write!(out, " {e}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses the dump format produced by [`Self::dump`].
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut model = GraphicalModel::new();
        for (zero_based, raw) in text.lines().enumerate() {
            let line = zero_based + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut tokens = trimmed.split_whitespace();
            match tokens.next() {
                Some("var") => {
                    let index: usize = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or(ModelError::Parse { line, message: "expected variable index" })?;
                    if index != model.num_variables() {
                        return Err(ModelError::Parse { line, message: "variable indices must be consecutive from 0" });
                    }
                    let kind = match tokens.next() {
                        Some("atom") => VarKind::Atom,
                        Some("context") => VarKind::Context,
                        _ => return Err(ModelError::Parse { line, message: "expected kind `atom` or `context`" }),
                    };
                    let source_id = tokens.next().unwrap_or("");
                    if tokens.next().is_some() {
                        return Err(ModelError::Parse { line, message: "unexpected trailing tokens" });
                    }
                    model.add_variable(kind, source_id);
                }
                Some("factor") => {
                    let mut scope = Vec::new();
                    let mut entries = Vec::new();
                    let mut seen_bar = false;
                    for token in tokens {
                        if token == "|" {
                            if seen_bar {
                                return Err(ModelError::Parse { line, message: "duplicate `|` separator" });
                            }
                            seen_bar = true;
                        } else if seen_bar {
                            let value: f64 = token
                                .parse()
                                .map_err(|_| ModelError::Parse { line, message: "invalid table entry" })?;
                            entries.push(value);
                        } else {
                            let index: usize = token
                                .parse()
                                .map_err(|_| ModelError::Parse { line, message: "invalid scope index" })?;
                            scope.push(VariableId(index));
                        }
                    }
                    if !seen_bar {
                        return Err(ModelError::Parse { line, message: "missing `|` separator" });
                    }
                    let factor = Factor::new(scope, entries)
                        .map_err(|_| ModelError::Parse { line, message: "invalid factor" })?;
                    model
                        .add_factor(factor)
                        .map_err(|_| ModelError::Parse { line, message: "factor references undeclared variable" })?;
                }
                _ => return Err(ModelError::Parse { line, message: "unknown directive" }),
            }
        }
        Ok(model)
    }
}
