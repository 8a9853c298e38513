use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RrlError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "categories", rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Discrete(Vec<String>),
    Label(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

/// Column layout of a tabular dataset.
///
/// The sidecar text format has one line per column, `name,kind[,categories...]`,
/// where `kind` is `continuous`, `discrete` or `label`. Blank lines and lines
/// starting with `#` are ignored. Category order is significant: it fixes the
/// one-hot layout and, for the label, the class index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    columns: Vec<Column>,
}

impl FeatureSchema {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let schema = Self { columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut columns = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() < 2 || fields[0].is_empty() {
                return Err(RrlError::Schema(format!(
                    "line {}: expected `name,kind[,categories...]`",
                    lineno + 1
                )));
            }
            let cats = || fields[2..].iter().map(|s| s.to_string()).collect::<Vec<_>>();
            let kind = match fields[1] {
                "continuous" if fields.len() == 2 => ColumnKind::Continuous,
                "continuous" => {
                    return Err(RrlError::Schema(format!(
                        "line {}: continuous column `{}` cannot list categories",
                        lineno + 1,
                        fields[0]
                    )))
                }
                "discrete" => ColumnKind::Discrete(cats()),
                "label" => ColumnKind::Label(cats()),
                other => {
                    return Err(RrlError::Schema(format!(
                        "line {}: unknown column kind `{other}`",
                        lineno + 1
                    )))
                }
            };
            columns.push(Column {
                name: fields[0].to_string(),
                kind,
            });
        }
        Self::new(columns)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| RrlError::io(path, e))?;
        Self::parse(&text).map_err(|e| RrlError::Schema(format!("{}: {e}", path.display())))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.columns {
            let _ = match &c.kind {
                ColumnKind::Continuous => writeln!(out, "{},continuous", c.name),
                ColumnKind::Discrete(cats) => writeln!(out, "{},discrete,{}", c.name, cats.join(",")),
                ColumnKind::Label(cats) => writeln!(out, "{},label,{}", c.name, cats.join(",")),
            };
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        let mut labels = 0;
        for c in &self.columns {
            if !names.insert(c.name.as_str()) {
                return Err(RrlError::Schema(format!("duplicate column `{}`", c.name)));
            }
            let cats = match &c.kind {
                ColumnKind::Continuous => continue,
                ColumnKind::Discrete(cats) => cats,
                ColumnKind::Label(cats) => {
                    labels += 1;
                    if cats.len() < 2 {
                        return Err(RrlError::Schema(format!(
                            "label `{}` needs at least two classes",
                            c.name
                        )));
                    }
                    cats
                }
            };
            if cats.is_empty() {
                return Err(RrlError::Schema(format!("column `{}` has no categories", c.name)));
            }
            let mut seen = HashSet::new();
            for cat in cats {
                if cat.is_empty() || !seen.insert(cat.as_str()) {
                    return Err(RrlError::Schema(format!(
                        "column `{}` has an empty or duplicate category `{cat}`",
                        c.name
                    )));
                }
            }
        }
        if labels != 1 {
            return Err(RrlError::Schema(format!(
                "exactly one label column required, found {labels}"
            )));
        }
        Ok(())
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn continuous_names(&self) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Continuous)
            .map(|c| c.name.as_str())
            .collect()
    }

    /// Discrete features with their categories, in schema order.
    pub fn discrete_features(&self) -> Vec<(&str, &[String])> {
        self.columns
            .iter()
            .filter_map(|c| match &c.kind {
                ColumnKind::Discrete(cats) => Some((c.name.as_str(), cats.as_slice())),
                _ => None,
            })
            .collect()
    }

    pub fn label(&self) -> (&str, &[String]) {
        self.columns
            .iter()
            .find_map(|c| match &c.kind {
                ColumnKind::Label(cats) => Some((c.name.as_str(), cats.as_slice())),
                _ => None,
            })
            .expect("validated schema has a label")
    }

    pub fn class_names(&self) -> &[String] {
        self.label().1
    }

    /// Number of classes `M`.
    pub fn class_count(&self) -> usize {
        self.label().1.len()
    }

    /// Number of continuous features `m`.
    pub fn continuous_count(&self) -> usize {
        self.continuous_names().len()
    }

    /// Width `b` of the one-hot block.
    pub fn binary_width(&self) -> usize {
        self.discrete_features().iter().map(|(_, c)| c.len()).sum()
    }
}
