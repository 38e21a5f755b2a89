//! Nonlinear least-squares test problems with known minimizers.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::denselin::{damped_normal_solve, DenseMatrix};
use crate::error::{Error, Result};
use crate::qcalc::ResidualMap;

/// A residual map with its standard start and known optimum.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub residuals: Arc<dyn ResidualMap + Send + Sync>,
    pub x0_default: Vec<f64>,
    pub x_star: Option<Vec<f64>>,
    pub sse_star: Option<f64>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("n", &self.residuals.num_params())
            .field("m", &self.residuals.num_residuals())
            .field("x0_default", &self.x0_default)
            .field("x_star", &self.x_star)
            .field("sse_star", &self.sse_star)
            .finish()
    }
}

impl Problem {
    pub fn n(&self) -> usize {
        self.residuals.num_params()
    }

    pub fn m(&self) -> usize {
        self.residuals.num_residuals()
    }

    pub fn sse_at(&self, x: &[f64]) -> f64 {
        self.residuals.residuals(x).iter().map(|r| r * r).sum()
    }

    /// `(10(x₂ − x₁²), 1 − x₁)`, minimized at (1, 1).
    pub fn rosenbrock() -> Self {
        Self {
            name: "rosenbrock".into(),
            residuals: Arc::new(Rosenbrock),
            x0_default: vec![-1.2, 1.0],
            x_star: Some(vec![1.0, 1.0]),
            sse_star: Some(0.0),
        }
    }

    /// Powell's singular function; its Jacobian is singular at the origin.
    pub fn powell_singular() -> Self {
        Self {
            name: "powell_singular".into(),
            residuals: Arc::new(PowellSingular),
            x0_default: vec![3.0, -1.0, 0.0, 1.0],
            x_star: Some(vec![0.0; 4]),
            sse_star: Some(0.0),
        }
    }

    /// Residuals `A·x − b`. The minimizer comes from the normal equations.
    pub fn linear_ls(a: DenseMatrix, b: Vec<f64>) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(Error::InvalidProblemParam {
                key: "b".into(),
                reason: format!("expected {} entries, found {}", a.rows(), b.len()),
            });
        }
        if a.rows() < a.cols() {
            return Err(Error::InvalidProblemParam {
                key: "A".into(),
                reason: format!(
                    "needs at least as many rows as columns ({}x{})",
                    a.rows(),
                    a.cols()
                ),
            });
        }
        let x_star = damped_normal_solve(&a, &b, 0.0).map_err(|e| Error::InvalidProblemParam {
            key: "A".into(),
            reason: format!("normal equations not solvable: {e}"),
        })?;
        let map = Linear { a, b };
        let sse_star = map.residuals(&x_star).iter().map(|r| r * r).sum();
        Ok(Self {
            name: "linear_ls".into(),
            x0_default: vec![1.0; map.a.cols()],
            residuals: Arc::new(map),
            x_star: Some(x_star),
            sse_star: Some(sse_star),
        })
    }

    /// Fits `y = a·exp(b·t)` to the given points.
    ///
    /// When the data lie exactly on a model curve the generating parameters
    /// are not known here, so `x_star` is left unset.
    pub fn exponential_fit(t: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if t.len() != y.len() {
            return Err(Error::InvalidProblemParam {
                key: "y".into(),
                reason: format!("expected {} entries to match t, found {}", t.len(), y.len()),
            });
        }
        if t.len() < 2 {
            return Err(Error::InvalidProblemParam {
                key: "t".into(),
                reason: "at least two data points are required".into(),
            });
        }
        Ok(Self {
            name: "exponential_fit".into(),
            residuals: Arc::new(ExpFit { t, y }),
            x0_default: vec![1.0, -1.0],
            x_star: None,
            sse_star: None,
        })
    }

    /// Noiseless data from `a = 2, b = −0.5` at `t = 0, 1, 2, 3`.
    pub fn exponential_fit_default() -> Self {
        let (a, b) = (2.0, -0.5);
        let t = vec![0.0, 1.0, 2.0, 3.0];
        let y = t.iter().map(|&t: &f64| a * (b * t).exp()).collect();
        let mut p = Self::exponential_fit(t, y).expect("default data is well formed");
        p.x_star = Some(vec![a, b]);
        p.sse_star = Some(0.0);
        p
    }
}

/// Catalog line: problem name with its default dimensions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub n: usize,
    pub m: usize,
}

impl fmt::Display for CatalogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (n={}, m={})", self.name, self.n, self.m)
    }
}

/// Problem names with default dimensions, sorted by name.
pub fn catalog() -> Vec<CatalogEntry> {
    let mut entries = vec![
        CatalogEntry {
            name: "exponential_fit",
            n: 2,
            m: 4,
        },
        CatalogEntry {
            name: "linear_ls",
            n: 2,
            m: 2,
        },
        CatalogEntry {
            name: "powell_singular",
            n: 4,
            m: 4,
        },
        CatalogEntry {
            name: "rosenbrock",
            n: 2,
            m: 2,
        },
    ];
    entries.sort();
    entries
}

fn catalog_listing() -> String {
    catalog()
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Builds a catalog problem from string parameters.
///
/// * `linear_ls`: `A` as rows separated by `;` with comma-separated entries,
///   `b` comma-separated. Defaults: `A = I₂`, `b = (3, 4)`.
/// * `exponential_fit`: `t` and `y` comma-separated. Without both, the
///   default noiseless data set is used.
/// * `rosenbrock`, `powell_singular`: no parameters.
pub fn make_problem(name: &str, params: &BTreeMap<String, String>) -> Result<Problem> {
    let allowed: &[&str] = match name {
        "rosenbrock" | "powell_singular" => &[],
        "linear_ls" => &["A", "b"],
        "exponential_fit" => &["t", "y"],
        _ => {
            return Err(Error::UnknownProblem {
                name: name.to_string(),
                catalog: catalog_listing(),
            })
        }
    };
    if let Some(key) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::InvalidProblemParam {
            key: key.clone(),
            reason: format!("not accepted by {name}"),
        });
    }
    match name {
        "rosenbrock" => Ok(Problem::rosenbrock()),
        "powell_singular" => Ok(Problem::powell_singular()),
        "linear_ls" => {
            let a = match params.get("A") {
                Some(s) => parse_matrix("A", s)?,
                None => DenseMatrix::identity(2),
            };
            let b = match params.get("b") {
                Some(s) => parse_list("b", s)?,
                None => vec![3.0, 4.0],
            };
            Problem::linear_ls(a, b)
        }
        _ => match (params.get("t"), params.get("y")) {
            (None, None) => Ok(Problem::exponential_fit_default()),
            (Some(t), Some(y)) => {
                Problem::exponential_fit(parse_list("t", t)?, parse_list("y", y)?)
            }
            (None, Some(_)) => Err(missing("t")),
            (Some(_), None) => Err(missing("y")),
        },
    }
}

fn missing(key: &str) -> Error {
    Error::InvalidProblemParam {
        key: key.into(),
        reason: "must be given together with its counterpart".into(),
    }
}

fn parse_list(key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidProblemParam {
                    key: key.into(),
                    reason: format!("{tok:?} is not a finite number"),
                })
        })
        .collect()
}

fn parse_matrix(key: &str, s: &str) -> Result<DenseMatrix> {
    let rows = s
        .split(';')
        .map(|row| parse_list(key, row))
        .collect::<Result<Vec<_>>>()?;
    DenseMatrix::from_rows(&rows).map_err(|e| Error::InvalidProblemParam {
        key: key.into(),
        reason: e.to_string(),
    })
}

struct Rosenbrock;

impl ResidualMap for Rosenbrock {
    fn num_params(&self) -> usize {
        2
    }

    fn num_residuals(&self) -> usize {
        2
    }

    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]
    }

    fn analytic_jacobian(&self, x: &[f64]) -> Option<DenseMatrix> {
        DenseMatrix::new(2, 2, vec![-20.0 * x[0], 10.0, -1.0, 0.0]).ok()
    }
}

struct PowellSingular;

impl ResidualMap for PowellSingular {
    fn num_params(&self) -> usize {
        4
    }

    fn num_residuals(&self) -> usize {
        4
    }

    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        vec![
            x[0] + 10.0 * x[1],
            5f64.sqrt() * (x[2] - x[3]),
            (x[1] - 2.0 * x[2]).powi(2),
            10f64.sqrt() * (x[0] - x[3]).powi(2),
        ]
    }

    fn analytic_jacobian(&self, x: &[f64]) -> Option<DenseMatrix> {
        let s5 = 5f64.sqrt();
        let s10 = 10f64.sqrt();
        let u = 2.0 * (x[1] - 2.0 * x[2]);
        let v = 2.0 * s10 * (x[0] - x[3]);
        DenseMatrix::from_rows(&[
            vec![1.0, 10.0, 0.0, 0.0],
            vec![0.0, 0.0, s5, -s5],
            vec![0.0, u, -2.0 * u, 0.0],
            vec![v, 0.0, 0.0, -v],
        ])
        .ok()
    }
}

struct Linear {
    a: DenseMatrix,
    b: Vec<f64>,
}

impl ResidualMap for Linear {
    fn num_params(&self) -> usize {
        self.a.cols()
    }

    fn num_residuals(&self) -> usize {
        self.a.rows()
    }

    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        (0..self.a.rows())
            .map(|i| {
                let ax: f64 = self.a.row(i).iter().zip(x).map(|(a, x)| a * x).sum();
                ax - self.b[i]
            })
            .collect()
    }

    fn analytic_jacobian(&self, _x: &[f64]) -> Option<DenseMatrix> {
        Some(self.a.clone())
    }
}

struct ExpFit {
    t: Vec<f64>,
    y: Vec<f64>,
}

impl ResidualMap for ExpFit {
    fn num_params(&self) -> usize {
        2
    }

    fn num_residuals(&self) -> usize {
        self.t.len()
    }

    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        self.t
            .iter()
            .zip(&self.y)
            .map(|(&t, &y)| x[0] * (x[1] * t).exp() - y)
            .collect()
    }

    fn analytic_jacobian(&self, x: &[f64]) -> Option<DenseMatrix> {
        DenseMatrix::from_fn(self.t.len(), 2, |i, j| {
            let e = (x[1] * self.t[i]).exp();
            if j == 0 {
                e
            } else {
                x[0] * self.t[i] * e
            }
        })
        .ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_params() -> BTreeMap<String, String> {
        BTreeMap::new()
    }

    #[test]
    fn rosenbrock_entry() {
        let p = make_problem("rosenbrock", &no_params()).unwrap();
        assert_eq!(p.residuals.residuals(&[0.5, 2.0]), vec![17.5, 0.5]);
        assert_eq!(p.x_star, Some(vec![1.0, 1.0]));
        assert_eq!(p.x0_default, vec![-1.2, 1.0]);
        assert_eq!(p.sse_star, Some(0.0));
    }

    #[test]
    fn linear_identity_entry() {
        let mut params = no_params();
        params.insert("A".into(), "1,0;0,1".into());
        params.insert("b".into(), "3,4".into());
        let p = make_problem("linear_ls", &params).unwrap();
        assert_eq!(p.x_star, Some(vec![3.0, 4.0]));
        assert_eq!(p.sse_star, Some(0.0));
    }

    #[test]
    fn overdetermined_linear_entry() {
        let mut params = no_params();
        params.insert("A".into(), "1,0;0,1;1,1".into());
        params.insert("b".into(), "1,1,1".into());
        let p = make_problem("linear_ls", &params).unwrap();
        // Normal equations [[2,1],[1,2]] x = (2,2) give x = (2/3, 2/3).
        let x = p.x_star.clone().unwrap();
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-15 && (x[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.sse_star.unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn exponential_default_is_zero_residual() {
        let p = make_problem("exponential_fit", &no_params()).unwrap();
        assert_eq!(p.x_star, Some(vec![2.0, -0.5]));
        assert!(p.sse_at(&[2.0, -0.5]) <= 1e-20);
        assert_eq!(p.m(), 4);
    }

    #[test]
    fn unknown_name_lists_catalog() {
        let err = make_problem("himmelblau", &no_params()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("rosenbrock (n=2, m=2)"), "{msg}");
        assert!(msg.contains("powell_singular (n=4, m=4)"), "{msg}");
    }

    #[test]
    fn malformed_params() {
        let mut params = no_params();
        params.insert("A".into(), "1,0;0".into());
        assert!(matches!(
            make_problem("linear_ls", &params),
            Err(Error::InvalidProblemParam { .. })
        ));
        let mut params = no_params();
        params.insert("b".into(), "1,x".into());
        assert!(make_problem("linear_ls", &params).is_err());
        let mut params = no_params();
        params.insert("n".into(), "3".into());
        assert!(make_problem("rosenbrock", &params).is_err());
        let mut params = no_params();
        params.insert("t".into(), "0,1".into());
        assert!(make_problem("exponential_fit", &params).is_err());
        let mut params = no_params();
        params.insert("A".into(), "1,1;2,2".into());
        assert!(make_problem("linear_ls", &params).is_err());
    }

    #[test]
    fn catalog_is_sorted_and_stable() {
        let names: Vec<String> = catalog().iter().map(|e| e.to_string()).collect();
        assert!(names.contains(&"rosenbrock (n=2, m=2)".to_string()));
        assert!(names.contains(&"powell_singular (n=4, m=4)".to_string()));
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        assert_eq!(catalog(), catalog());
    }
}
