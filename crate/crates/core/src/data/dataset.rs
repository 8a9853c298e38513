use std::collections::HashMap;
use std::path::Path;

use crate::data::schema::{ColumnKind, FeatureSchema};
use crate::error::{Result, RrlError};
use crate::numerics::DenseMatrix;

/// Typed tabular data: continuous block `C` (N × m), one-hot binary block
/// `B` (N × b) and one-hot labels `Y` (N × M).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    continuous: DenseMatrix,
    binary: DenseMatrix,
    labels: DenseMatrix,
    classes: Vec<usize>,
}

impl Dataset {
    /// Assembles a dataset from already-encoded blocks.
    pub fn from_parts(
        schema: FeatureSchema,
        continuous: DenseMatrix,
        binary: DenseMatrix,
        classes: Vec<usize>,
    ) -> Result<Self> {
        let n = classes.len();
        let m_classes = schema.class_count();
        if continuous.shape() != (n, schema.continuous_count()) {
            return Err(RrlError::Shape(format!(
                "continuous block is {:?}, expected ({n}, {})",
                continuous.shape(),
                schema.continuous_count()
            )));
        }
        if binary.shape() != (n, schema.binary_width()) {
            return Err(RrlError::Shape(format!(
                "binary block is {:?}, expected ({n}, {})",
                binary.shape(),
                schema.binary_width()
            )));
        }
        if let Some(&bad) = classes.iter().find(|&&c| c >= m_classes) {
            return Err(RrlError::OutOfRange(format!(
                "class index {bad} with only {m_classes} classes"
            )));
        }
        continuous.ensure_finite("continuous features")?;
        let mut offset = 0;
        for (name, cats) in schema.discrete_features() {
            for i in 0..n {
                let block = &binary.row(i)[offset..offset + cats.len()];
                let ones = block.iter().filter(|&&v| v == 1.0).count();
                let zeros = block.iter().filter(|&&v| v == 0.0).count();
                if ones != 1 || zeros + 1 != cats.len() {
                    return Err(RrlError::Data(format!(
                        "row {i}: one-hot block of `{name}` is not a unit vector"
                    )));
                }
            }
            offset += cats.len();
        }
        let mut labels = DenseMatrix::zeros(n, m_classes);
        for (i, &c) in classes.iter().enumerate() {
            labels.set(i, c, 1.0);
        }
        Ok(Self {
            schema,
            continuous,
            binary,
            labels,
            classes,
        })
    }

    /// Reads a CSV file (header row, comma separated, `.` decimal point)
    /// laid out according to `schema`.
    pub fn from_csv_reader<R: std::io::Read>(reader: R, schema: FeatureSchema) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| RrlError::Data(format!("cannot read header: {e}")))?
            .clone();
        let mut position: HashMap<&str, usize> = HashMap::new();
        for (i, h) in header.iter().enumerate() {
            if position.insert(h, i).is_some() {
                return Err(RrlError::Data(format!("duplicate header column `{h}`")));
            }
        }
        for h in header.iter() {
            if !schema.columns().iter().any(|c| c.name == h) {
                return Err(RrlError::Data(format!("column `{h}` is not in the schema")));
            }
        }
        let mut layout = Vec::with_capacity(schema.columns().len());
        for c in schema.columns() {
            let idx = *position
                .get(c.name.as_str())
                .ok_or_else(|| RrlError::Data(format!("missing column `{}`", c.name)))?;
            layout.push(idx);
        }

        let m = schema.continuous_count();
        let b = schema.binary_width();
        let mut cont = Vec::new();
        let mut bin = Vec::new();
        let mut classes = Vec::new();
        for (row_no, record) in rdr.records().enumerate() {
            let line = row_no + 2;
            let record = record.map_err(|e| RrlError::Data(format!("line {line}: {e}")))?;
            let mut bin_row = vec![0.0; b];
            let mut offset = 0;
            for (c, &idx) in schema.columns().iter().zip(&layout) {
                let field = record.get(idx).unwrap_or("");
                if field.is_empty() || field == "?" {
                    return Err(RrlError::Data(format!(
                        "line {line}, column `{}`: missing value",
                        c.name
                    )));
                }
                match &c.kind {
                    ColumnKind::Continuous => {
                        let v: f64 = field.parse().map_err(|_| {
                            RrlError::Data(format!(
                                "line {line}, column `{}`: cannot parse `{field}` as a number",
                                c.name
                            ))
                        })?;
                        if !v.is_finite() {
                            return Err(RrlError::Data(format!(
                                "line {line}, column `{}`: non-finite value `{field}`",
                                c.name
                            )));
                        }
                        cont.push(v);
                    }
                    ColumnKind::Discrete(cats) => {
                        let k = category_index(cats, field, &c.name, line)?;
                        bin_row[offset + k] = 1.0;
                        offset += cats.len();
                    }
                    ColumnKind::Label(cats) => {
                        classes.push(category_index(cats, field, &c.name, line)?);
                    }
                }
            }
            bin.extend(bin_row);
        }
        let n = classes.len();
        if n == 0 {
            return Err(RrlError::Data("dataset has no rows".into()));
        }
        Self::from_parts(
            schema,
            DenseMatrix::from_vec(n, m, cont)?,
            DenseMatrix::from_vec(n, b, bin)?,
            classes,
        )
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn continuous(&self) -> &DenseMatrix {
        &self.continuous
    }

    pub fn binary(&self) -> &DenseMatrix {
        &self.binary
    }

    pub fn labels(&self) -> &DenseMatrix {
        &self.labels
    }

    /// Class index of every row.
    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn class_count(&self) -> usize {
        self.schema.class_count()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count()];
        for &c in &self.classes {
            counts[c] += 1;
        }
        counts
    }

    /// Rows `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            continuous: self.continuous.select_rows(indices),
            binary: self.binary.select_rows(indices),
            labels: self.labels.select_rows(indices),
            classes: indices.iter().map(|&i| self.classes[i]).collect(),
        }
    }

    /// Category of each discrete feature of row `i`, recovered from the
    /// one-hot block.
    pub fn discrete_values(&self, i: usize) -> Vec<&str> {
        let row = self.binary.row(i);
        let mut offset = 0;
        let mut out = Vec::new();
        for (_, cats) in self.schema.discrete_features() {
            let k = row[offset..offset + cats.len()]
                .iter()
                .position(|&v| v == 1.0)
                .expect("one-hot invariant");
            out.push(cats[k].as_str());
            offset += cats.len();
        }
        out
    }
}

fn category_index(cats: &[String], field: &str, column: &str, line: usize) -> Result<usize> {
    cats.iter().position(|c| c == field).ok_or_else(|| {
        RrlError::Data(format!(
            "line {line}, column `{column}`: unknown category `{field}`"
        ))
    })
}

/// Loads `data_path` (CSV) using the schema sidecar at `schema_path`.
pub fn load_dataset(data_path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<Dataset> {
    let schema = FeatureSchema::load(schema_path)?;
    let path = data_path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| RrlError::io(path, e))?;
    Dataset::from_csv_reader(std::io::BufReader::new(file), schema)
        .map_err(|e| RrlError::Data(format!("{}: {e}", path.display())))
}
