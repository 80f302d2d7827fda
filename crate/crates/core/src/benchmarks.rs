//! Synthetic test functions and user-defined external problems.

use std::f64::consts::{E, PI};
use std::io::Write as _;
use std::path::Path;
use std::process::{Command, Stdio};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::RunRecord;
use crate::rng::Rng;
use crate::space::Bounds;

/// The built-in closed-form functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Function {
    Ackley,
    Beale,
    Bukin,
    Cosine8,
    DixonPrice,
    DropWave,
    EggHolder,
    Griewank,
    Hartmann6,
    HolderTable,
    Levy,
    Michalewicz,
    StyblinskiTang,
    Shekel,
    SixHumpCamel,
}

const STYBLINSKI_TANG_PER_DIM: f64 = -39.166_165_703_771_41;

impl Function {
    pub const ALL: [Function; 15] = [
        Function::Ackley,
        Function::Beale,
        Function::Bukin,
        Function::Cosine8,
        Function::DixonPrice,
        Function::DropWave,
        Function::EggHolder,
        Function::Griewank,
        Function::Hartmann6,
        Function::HolderTable,
        Function::Levy,
        Function::Michalewicz,
        Function::StyblinskiTang,
        Function::Shekel,
        Function::SixHumpCamel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Function::Ackley => "Ackley",
            Function::Beale => "Beale",
            Function::Bukin => "Bukin",
            Function::Cosine8 => "Cosine8",
            Function::DixonPrice => "DixonPrice",
            Function::DropWave => "DropWave",
            Function::EggHolder => "EggHolder",
            Function::Griewank => "Griewank",
            Function::Hartmann6 => "Hartmann",
            Function::HolderTable => "HolderTable",
            Function::Levy => "Levy",
            Function::Michalewicz => "Michalewicz",
            Function::StyblinskiTang => "StyblinskiTang",
            Function::Shekel => "Shekel",
            Function::SixHumpCamel => "SixHumpCamel",
        }
    }

    /// Registry dimensionality.
    pub fn default_dim(self) -> usize {
        match self {
            Function::Ackley => 50,
            Function::Cosine8 => 8,
            Function::DixonPrice => 15,
            Function::Griewank => 9,
            Function::Hartmann6 => 6,
            Function::Levy => 13,
            Function::Michalewicz => 10,
            Function::StyblinskiTang => 21,
            Function::Shekel => 4,
            _ => 2,
        }
    }

    /// Whether the function is defined for any dimension.
    pub fn scalable(self) -> bool {
        matches!(
            self,
            Function::Ackley
                | Function::DixonPrice
                | Function::Griewank
                | Function::Levy
                | Function::Michalewicz
                | Function::StyblinskiTang
        )
    }

    fn bounds(self, dim: usize) -> Bounds {
        let b = match self {
            Function::Ackley => vec![(-32.768, 32.768); dim],
            Function::Beale => vec![(-4.5, 4.5); 2],
            Function::Bukin => vec![(-15.0, -5.0), (-3.0, 3.0)],
            Function::Cosine8 => vec![(-1.0, 1.0); 8],
            Function::DixonPrice | Function::Levy => vec![(-10.0, 10.0); dim],
            Function::DropWave => vec![(-5.12, 5.12); 2],
            Function::EggHolder => vec![(-512.0, 512.0); 2],
            Function::Griewank => vec![(-600.0, 600.0); dim],
            Function::Hartmann6 => vec![(0.0, 1.0); 6],
            Function::HolderTable => vec![(-10.0, 10.0); 2],
            Function::Michalewicz => vec![(0.0, PI); dim],
            Function::StyblinskiTang => vec![(-5.0, 5.0); dim],
            Function::Shekel => vec![(0.0, 10.0); 4],
            Function::SixHumpCamel => vec![(-3.0, 3.0), (-2.0, 2.0)],
        };
        Bounds::new(b).expect("static bounds are valid")
    }

    fn known_optimum(self, dim: usize) -> Option<f64> {
        match self {
            Function::Ackley | Function::Beale | Function::Bukin | Function::DixonPrice | Function::Griewank => Some(0.0),
            Function::Levy => Some(0.0),
            Function::Cosine8 => Some(-0.8),
            Function::DropWave => Some(-1.0),
            Function::EggHolder => Some(-959.640_662_720_850_7),
            Function::Hartmann6 => Some(-3.322_368_011_415_514),
            Function::HolderTable => Some(-19.208_502_567_886_725),
            Function::Michalewicz => (dim == 10).then_some(-9.660_151_715_641_34),
            Function::StyblinskiTang => Some(STYBLINSKI_TANG_PER_DIM * dim as f64),
            Function::Shekel => Some(-10.536_443_153_483_512),
            Function::SixHumpCamel => Some(-1.031_628_453_489_877_2),
        }
    }

    /// Closed-form value; `x` must have the right length.
    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            Function::Ackley => ackley(x),
            Function::Beale => {
                let (a, b) = (x[0], x[1]);
                (1.5 - a + a * b).powi(2) + (2.25 - a + a * b * b).powi(2) + (2.625 - a + a * b.powi(3)).powi(2)
            }
            Function::Bukin => 100.0 * (x[1] - 0.01 * x[0] * x[0]).abs().sqrt() + 0.01 * (x[0] + 10.0).abs(),
            // negated so that the minimum is -0.8 at the origin
            Function::Cosine8 => x.iter().map(|v| v * v - 0.1 * (5.0 * PI * v).cos()).sum(),
            Function::DixonPrice => {
                let head = (x[0] - 1.0).powi(2);
                head + x
                    .windows(2)
                    .enumerate()
                    .map(|(i, w)| (i + 2) as f64 * (2.0 * w[1] * w[1] - w[0]).powi(2))
                    .sum::<f64>()
            }
            Function::DropWave => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                -(1.0 + (12.0 * r2.sqrt()).cos()) / (0.5 * r2 + 2.0)
            }
            Function::EggHolder => {
                let (a, b) = (x[0], x[1]);
                -(b + 47.0) * (b + a / 2.0 + 47.0).abs().sqrt().sin() - a * (a - (b + 47.0)).abs().sqrt().sin()
            }
            Function::Griewank => {
                let s: f64 = x.iter().map(|v| v * v / 4000.0).sum();
                let p: f64 = x.iter().enumerate().map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos()).product();
                s - p + 1.0
            }
            Function::Hartmann6 => hartmann6(x),
            Function::HolderTable => {
                let (a, b) = (x[0], x[1]);
                let r = (a * a + b * b).sqrt();
                -(a.sin() * b.cos() * (1.0 - r / PI).abs().exp()).abs()
            }
            Function::Levy => levy(x),
            Function::Michalewicz => -x
                .iter()
                .enumerate()
                .map(|(i, v)| v.sin() * ((i + 1) as f64 * v * v / PI).sin().powi(20))
                .sum::<f64>(),
            Function::StyblinskiTang => 0.5 * x.iter().map(|v| v.powi(4) - 16.0 * v * v + 5.0 * v).sum::<f64>(),
            Function::Shekel => shekel(x),
            Function::SixHumpCamel => {
                let (a, b) = (x[0], x[1]);
                (4.0 - 2.1 * a * a + a.powi(4) / 3.0) * a * a + a * b + (-4.0 + 4.0 * b * b) * b * b
            }
        }
    }
}

fn ackley(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
    let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
    -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E
}

fn hartmann6(x: &[f64]) -> f64 {
    const ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
    const A: [[f64; 6]; 4] = [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ];
    const P: [[f64; 6]; 4] = [
        [1312.0, 1696.0, 5569.0, 124.0, 8283.0, 5886.0],
        [2329.0, 4135.0, 8307.0, 3736.0, 1004.0, 9991.0],
        [2348.0, 1451.0, 3522.0, 2883.0, 3047.0, 6650.0],
        [4047.0, 8828.0, 8732.0, 5743.0, 1091.0, 381.0],
    ];
    -(0..4)
        .map(|i| {
            let inner: f64 = (0..6).map(|j| A[i][j] * (x[j] - 1e-4 * P[i][j]).powi(2)).sum();
            ALPHA[i] * (-inner).exp()
        })
        .sum::<f64>()
}

fn levy(x: &[f64]) -> f64 {
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let d = w.len();
    let head = (PI * w[0]).sin().powi(2);
    let mid: f64 = w[..d - 1]
        .iter()
        .map(|wi| (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2)))
        .sum();
    let tail = (w[d - 1] - 1.0).powi(2) * (1.0 + (2.0 * PI * w[d - 1]).sin().powi(2));
    head + mid + tail
}

fn shekel(x: &[f64]) -> f64 {
    const BETA: [f64; 10] = [1.0, 2.0, 2.0, 4.0, 4.0, 6.0, 3.0, 7.0, 5.0, 5.0];
    const C: [[f64; 10]; 4] = [
        [4.0, 1.0, 8.0, 6.0, 3.0, 2.0, 5.0, 8.0, 6.0, 7.0],
        [4.0, 1.0, 8.0, 6.0, 7.0, 9.0, 3.0, 1.0, 2.0, 3.6],
        [4.0, 1.0, 8.0, 6.0, 3.0, 2.0, 5.0, 8.0, 6.0, 7.0],
        [4.0, 1.0, 8.0, 6.0, 7.0, 9.0, 3.0, 1.0, 2.0, 3.6],
    ];
    -(0..10)
        .map(|i| {
            let d: f64 = (0..4).map(|j| (x[j] - C[j][i]).powi(2)).sum();
            1.0 / (d + 0.1 * BETA[i])
        })
        .sum::<f64>()
}

/// How a problem is evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Builtin(Function),
    /// Shell command reading a JSON array on stdin and printing one float.
    External(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub dim: usize,
    pub bounds: Bounds,
    pub objective: Objective,
    pub known_optimum: Option<f64>,
    #[serde(default)]
    pub noise_std: f64,
}

impl Problem {
    pub fn builtin(function: Function, dim: usize) -> Result<Self> {
        if dim == 0 || (!function.scalable() && dim != function.default_dim()) {
            return Err(Error::arg(format!("{} is not defined in {dim} dimensions", function.name())));
        }
        if function == Function::DixonPrice && dim < 1 {
            return Err(Error::arg("DixonPrice needs at least one dimension"));
        }
        let name = if dim == function.default_dim() {
            function.name().to_string()
        } else {
            format!("{}-{dim}D", function.name())
        };
        Ok(Problem {
            name,
            dim,
            bounds: function.bounds(dim),
            objective: Objective::Builtin(function),
            known_optimum: function.known_optimum(dim),
            noise_std: 0.0,
        })
    }

    pub fn with_noise(mut self, noise_std: f64) -> Result<Self> {
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::arg(format!("noise_std must be non-negative, got {noise_std}")));
        }
        self.noise_std = noise_std;
        Ok(self)
    }

    /// Noiseless value at `x`.
    pub fn evaluate_true(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::arg(format!("{} expects {} coordinates, got {}", self.name, self.dim, x.len())));
        }
        if !self.bounds.contains(x) {
            return Err(Error::arg(format!("point outside the bounds of {}", self.name)));
        }
        match &self.objective {
            Objective::Builtin(f) => Ok(f.eval(x)),
            Objective::External(cmd) => run_external(cmd, x),
        }
    }

    /// Value at `x` plus Gaussian noise of `noise_std` drawn from `rng` when
    /// both are present.
    pub fn evaluate(&self, x: &[f64], rng: Option<&mut Rng>) -> Result<f64> {
        let y = self.evaluate_true(x)?;
        match rng {
            Some(rng) if self.noise_std > 0.0 => {
                let e: f64 = StandardNormal.sample(rng);
                Ok(y + self.noise_std * e)
            }
            _ => Ok(y),
        }
    }
}

fn run_external(cmd: &str, x: &[f64]) -> Result<f64> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::Evaluation(format!("cannot start evaluator: {e}")))?;
    {
        let mut stdin = child.stdin.take().expect("piped stdin");
        let payload = serde_json::to_string(x)?;
        stdin
            .write_all(payload.as_bytes())
            .and_then(|_| stdin.write_all(b"\n"))
            .map_err(|e| Error::Evaluation(format!("cannot write to evaluator: {e}")))?;
    }
    let out = child.wait_with_output().map_err(|e| Error::Evaluation(format!("evaluator failed: {e}")))?;
    if !out.status.success() {
        return Err(Error::Evaluation(format!(
            "evaluator exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    let text = String::from_utf8_lossy(&out.stdout);
    let y: f64 = text
        .trim()
        .parse()
        .map_err(|_| Error::Evaluation(format!("evaluator printed '{}', expected a number", text.trim())))?;
    if !y.is_finite() {
        return Err(Error::Evaluation(format!("evaluator returned non-finite value {y}")));
    }
    Ok(y)
}

/// The fifteen built-in problems at their registry dimensionality.
pub fn problem_registry() -> Vec<Problem> {
    Function::ALL
        .iter()
        .map(|&f| Problem::builtin(f, f.default_dim()).expect("registry dims are valid"))
        .collect()
}

/// Looks a problem up by name. Besides the registry names, `Name-kD` gives a
/// scalable function in `k` dimensions (`Ackley-4D`, `Griewank-2D`).
pub fn find_problem(name: &str) -> Result<Problem> {
    let lookup = |n: &str| Function::ALL.into_iter().find(|f| f.name().eq_ignore_ascii_case(n));
    if let Some(f) = lookup(name) {
        return Problem::builtin(f, f.default_dim());
    }
    if let Some((base, suffix)) = name.rsplit_once('-') {
        let dim = suffix.strip_suffix(['D', 'd']).and_then(|k| k.parse::<usize>().ok());
        if let (Some(f), Some(dim)) = (lookup(base), dim) {
            let mut p = Problem::builtin(f, dim).map_err(|_| Error::NotFound(format!("problem '{name}'")))?;
            p.name = name.to_string();
            return Ok(p);
        }
    }
    Err(Error::NotFound(format!("problem '{name}'")))
}

/// Manifest entry for a problem evaluated by an external command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalProblemSpec {
    pub name: String,
    pub dim: usize,
    pub bounds: Vec<(f64, f64)>,
    pub command: String,
    #[serde(default)]
    pub known_optimum: Option<f64>,
}

impl ExternalProblemSpec {
    pub fn into_problem(self) -> Result<Problem> {
        if self.bounds.len() != self.dim {
            return Err(Error::Config(format!("{}: {} bounds for dim {}", self.name, self.bounds.len(), self.dim)));
        }
        Ok(Problem {
            name: self.name,
            dim: self.dim,
            bounds: Bounds::new(self.bounds)?,
            objective: Objective::External(self.command),
            known_optimum: self.known_optimum,
            noise_std: 0.0,
        })
    }
}

/// Reads an external problem manifest (JSON object).
pub fn load_external_problem(path: &Path) -> Result<Problem> {
    let text = std::fs::read_to_string(path)?;
    let spec: ExternalProblemSpec =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    spec.into_problem()
}

/// The reference optimum for regret: the known optimum when present,
/// otherwise the smallest value observed for this problem in any record.
pub fn empirical_optimum(records: &[RunRecord], problem: &Problem) -> Result<f64> {
    if let Some(v) = problem.known_optimum {
        return Ok(v);
    }
    records
        .iter()
        .filter(|r| r.header.problem == problem.name)
        .flat_map(|r| r.all_values())
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
        .ok_or_else(|| Error::Data(format!("no records and no known optimum for {}", problem.name)))
}
