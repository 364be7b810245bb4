use crate::error::{Error, Result};

use super::library::{Kind, TokenId, TokenLibrary};

/// Training or test data: column-major inputs and a target vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    columns: Vec<Vec<f64>>,
    y: Vec<f64>,
}

impl Dataset {
    /// Builds from column-major inputs. Requires at least two points, finite
    /// values, and a target with nonzero variance.
    pub fn new(columns: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::Dataset(format!("need at least 2 points, got {n}")));
        }
        for (j, c) in columns.iter().enumerate() {
            if c.len() != n {
                return Err(Error::Dataset(format!(
                    "column {} has {} values, target has {n}",
                    j + 1,
                    c.len()
                )));
            }
            if let Some(i) = c.iter().position(|v| !v.is_finite()) {
                return Err(Error::Dataset(format!(
                    "non-finite input at row {}, column {}",
                    i + 1,
                    j + 1
                )));
            }
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Dataset(format!("non-finite target at row {}", i + 1)));
        }
        if variance(&y) <= 0.0 {
            return Err(Error::Dataset(
                "target has zero variance; the normalized error is undefined".into(),
            ));
        }
        Ok(Dataset { columns, y })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dataset("rows have differing lengths".into()));
        }
        let columns = (0..d).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Self::new(columns, y)
    }

    pub fn n_points(&self) -> usize {
        self.y.len()
    }

    pub fn n_vars(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn check_library(&self, lib: &TokenLibrary) -> Result<()> {
        if lib.variable_count() > self.n_vars() {
            return Err(Error::Dataset(format!(
                "library uses {} variables but the dataset has {} input columns",
                lib.variable_count(),
                self.n_vars()
            )));
        }
        Ok(())
    }
}

/// Population variance.
pub fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Result of evaluating an expression on a batch of points.
#[derive(Clone, Debug, PartialEq)]
pub enum Evaluation {
    Valid(Vec<f64>),
    /// Some output was NaN or infinite.
    Invalid,
}

impl Evaluation {
    pub fn is_invalid(&self) -> bool {
        matches!(self, Evaluation::Invalid)
    }

    pub fn values(&self) -> Option<&[f64]> {
        match self {
            Evaluation::Valid(v) => Some(v),
            Evaluation::Invalid => None,
        }
    }
}

/// Evaluates a pre-order kind sequence with a reverse-order stack machine.
///
/// `constants` are consumed in pre-order of the `Const` placeholders.
/// Panics if the sequence is not complete or a variable column is missing.
pub fn evaluate_kinds(kinds: &[Kind], constants: &[f64], columns: &[Vec<f64>]) -> Evaluation {
    evaluate_perturbed(kinds, constants, columns, None)
}

/// Like [`evaluate_kinds`], but shifts the value of pre-order node `node` by
/// `delta * (1 + |v|)` before it is consumed by its parent.
pub(crate) fn evaluate_perturbed(
    kinds: &[Kind],
    constants: &[f64],
    columns: &[Vec<f64>],
    perturb: Option<(usize, f64)>,
) -> Evaluation {
    let n = columns.first().map_or(1, Vec::len);
    let mut const_idx = kinds.iter().filter(|k| matches!(k, Kind::Const)).count();
    assert!(
        constants.len() >= const_idx,
        "missing values for constant placeholders"
    );
    let mut stack: Vec<Vec<f64>> = Vec::with_capacity(8);
    for (pos, kind) in kinds.iter().enumerate().rev() {
        match *kind {
            Kind::Variable(j) => stack.push(columns[j].clone()),
            Kind::Literal(v) => stack.push(vec![v; n]),
            Kind::Const => {
                const_idx -= 1;
                stack.push(vec![constants[const_idx]; n]);
            }
            Kind::Unary(op) => {
                let a = stack.last_mut().expect("incomplete expression");
                for v in a.iter_mut() {
                    *v = op.apply(*v);
                }
            }
            Kind::Binary(op) => {
                let mut left = stack.pop().expect("incomplete expression");
                let right = stack.pop().expect("incomplete expression");
                for (l, r) in left.iter_mut().zip(&right) {
                    *l = op.apply(*l, *r);
                }
                stack.push(left);
            }
        }
        if let Some((node, delta)) = perturb {
            if node == pos {
                for v in stack.last_mut().unwrap().iter_mut() {
                    *v += delta * (1.0 + v.abs());
                }
            }
        }
    }
    assert_eq!(stack.len(), 1, "traversal is not a single complete expression");
    let out = stack.pop().unwrap();
    if out.iter().all(|v| v.is_finite()) {
        Evaluation::Valid(out)
    } else {
        Evaluation::Invalid
    }
}

pub fn evaluate_traversal(
    ids: &[TokenId],
    lib: &TokenLibrary,
    constants: &[f64],
    columns: &[Vec<f64>],
) -> Evaluation {
    let kinds: Vec<Kind> = ids.iter().map(|id| lib.kind(*id)).collect();
    evaluate_kinds(&kinds, constants, columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![vec![1.0]], vec![1.0]).is_err());
        assert!(Dataset::new(vec![vec![1.0, 2.0]], vec![3.0, 3.0]).is_err());
        assert!(Dataset::new(vec![vec![1.0, f64::NAN]], vec![1.0, 2.0]).is_err());
        let d = Dataset::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]], vec![0.0, 1.0]).unwrap();
        assert_eq!(d.columns()[1], vec![2.0, 4.0]);
    }

    #[test]
    fn sub_and_div_operand_order() {
        let lib = TokenLibrary::from_symbols(&["sub", "div", "x1", "x2"]).unwrap();
        let cols = vec![vec![6.0], vec![2.0]];
        let t = lib.parse_traversal("sub x1 x2").unwrap();
        assert_eq!(
            evaluate_traversal(t.ids(), &lib, &[], &cols),
            Evaluation::Valid(vec![4.0])
        );
        let t = lib.parse_traversal("div x1 x2").unwrap();
        assert_eq!(
            evaluate_traversal(t.ids(), &lib, &[], &cols),
            Evaluation::Valid(vec![3.0])
        );
    }

    #[test]
    fn constants_fill_in_preorder() {
        let lib = TokenLibrary::from_symbols(&["sub", "const", "x1"]).unwrap();
        let t = lib.parse_traversal("sub const const").unwrap();
        let cols = vec![vec![0.0]];
        assert_eq!(
            evaluate_traversal(t.ids(), &lib, &[5.0, 2.0], &cols),
            Evaluation::Valid(vec![3.0])
        );
    }

    #[test]
    fn division_by_zero_is_invalid() {
        let lib = TokenLibrary::from_symbols(&["div", "sub", "x1"]).unwrap();
        let t = lib.parse_traversal("div x1 sub x1 x1").unwrap();
        assert!(evaluate_traversal(t.ids(), &lib, &[], &[vec![1.0, 2.0]]).is_invalid());
    }
}
