use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{csv_table, num};
use crate::domain::{ExteriorSpec, GraphFunction};
use crate::energy::Window;
use crate::error::{Error, Result};
use crate::kernels::{GraphOperator, KernelSpec};

const EXHAUSTIVE_PAIRS: usize = 1_000_000;

/// Centered difference of order `k` at lattice point `(i, j)`, flattened
/// (value, gradient or Hessian entries).
fn derivative(w: &GraphFunction, k: usize, i: i64, j: i64) -> Vec<f64> {
    let h = w.spacing();
    let at = |a: i64, b: i64| w.lattice_value(a, b);
    let axes: Vec<(i64, i64)> = if w.dim() == 1 { vec![(1, 0)] } else { vec![(1, 0), (0, 1)] };
    match k {
        0 => vec![at(i, j)],
        1 => axes.iter().map(|(a, b)| (at(i + a, j + b) - at(i - a, j - b)) / (2.0 * h)).collect(),
        _ => {
            let mut out = Vec::new();
            for (p, &(a, b)) in axes.iter().enumerate() {
                for &(c, d) in &axes[p..] {
                    let v = if (a, b) == (c, d) {
                        (at(i + a, j + b) - 2.0 * at(i, j) + at(i - a, j - b)) / (h * h)
                    } else {
                        (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1)) / (4.0 * h * h)
                    };
                    out.push(v);
                }
            }
            out
        }
    }
}

/// Discrete Hölder seminorm `[D^k w]_{C^beta}` over the cells whose centers lie
/// in `region`.
///
/// All pairs are visited when there are at most a million of them; otherwise
/// a million pairs are drawn from `seed`.
pub fn holder_seminorm(w: &GraphFunction, k: usize, beta: f64, region: &Window, seed: u64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::input(format!("Hölder exponent {beta} outside (0, 1]")));
    }
    if k > 2 {
        return Err(Error::input("derivative order must be 0, 1 or 2"));
    }
    if region.lower.len() != w.dim() {
        return Err(Error::input("region dimension differs from the graph dimension"));
    }
    let cells: Vec<usize> = (0..w.len()).filter(|&i| region.contains(&w.center(i))).collect();
    for a in 0..w.dim() {
        let mut coords: Vec<usize> = cells.iter().map(|&i| w.multi_index(i)[a]).collect();
        coords.sort_unstable();
        coords.dedup();
        if coords.len() < 4 {
            return Err(Error::input("region must contain at least 4 cells per direction"));
        }
    }
    let data: Vec<(Vec<f64>, Vec<f64>)> = cells
        .iter()
        .map(|&idx| {
            let [i, j] = w.multi_index(idx);
            (w.center(idx), derivative(w, k, i as i64, j as i64))
        })
        .collect();
    let quotient = |a: usize, b: usize| -> f64 {
        let (xa, da) = &data[a];
        let (xb, db) = &data[b];
        let dist = xa.iter().zip(xb).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let diff = da.iter().zip(db).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        diff / dist.powf(beta)
    };
    let n = data.len();
    let total = n * (n - 1) / 2;
    if total <= EXHAUSTIVE_PAIRS {
        Ok((0..n)
            .into_par_iter()
            .map(|a| (a + 1..n).map(|b| quotient(a, b)).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max))
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs: Vec<(usize, usize)> = (0..EXHAUSTIVE_PAIRS)
            .map(|_| {
                let a = rng.random_range(0..n);
                let b = (a + 1 + rng.random_range(0..n - 1)) % n;
                (a, b)
            })
            .collect();
        Ok(pairs.par_iter().map(|&(a, b)| quotient(a, b)).reduce(|| 0.0, f64::max))
    }
}

/// Smallest constant `C` with `|g(x1) - g(x2)| <= C M(x1, x2)` over the
/// sampled pairs, where `g = 2 L u - K` is the linearization error and
/// `M = max(|x1|,|x2|)^{2 beta} |x1 - x2|^{beta - 2s} + |x1 - x2|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusFit {
    pub c_hat: f64,
    pub beta: f64,
    /// `(x1, x2, |g1 - g2|, M)` per pair.
    pub samples: Vec<(Vec<f64>, Vec<f64>, f64, f64)>,
}

impl ModulusFit {
    pub fn to_csv(&self) -> Result<String> {
        let dim = self.samples.first().map_or(1, |s| s.0.len());
        let mut header: Vec<String> = Vec::new();
        for p in ["x1", "x2"] {
            for a in 0..dim {
                header.push(format!("{p}_{a}"));
            }
        }
        header.extend(["difference".into(), "modulus".into(), "ratio".into()]);
        let rows: Vec<Vec<String>> = self
            .samples
            .iter()
            .map(|(a, b, d, m)| a.iter().chain(b).map(|v| num(*v)).chain([num(*d), num(*m), num(d / m)]).collect())
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        csv_table(&header, &rows)
    }
}

/// Draws `count` pairs of distinct points in the ball of radius `radius`
/// with separation at least `min_sep`.
pub fn sample_pairs(dim: usize, radius: f64, count: usize, min_sep: f64, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let point = |rng: &mut ChaCha8Rng| loop {
        let p: Vec<f64> = (0..dim).map(|_| rng.random_range(-radius..radius)).collect();
        if p.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
            return p;
        }
    };
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = point(&mut rng);
        let b = point(&mut rng);
        let d = a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        if d >= min_sep {
            out.push((a, b));
        }
    }
    out
}

/// Fits the linearization-error modulus of `u` over the given point pairs;
/// `g` is interpolated from its cell-center values.
pub fn linearization_modulus(
    u: &GraphFunction,
    spec: &KernelSpec,
    beta: f64,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<ModulusFit> {
    if pairs.is_empty() {
        return Err(Error::input("no sample pairs"));
    }
    let op = GraphOperator::new(spec, u)?;
    let lap = op.laplacian_all(u)?;
    let curv = op.curvature_all(u)?;
    let g: Vec<f64> = lap.iter().zip(&curv).map(|(l, k)| 2.0 * l - k).collect();
    let gf = u.with_values(g)?.with_exterior(ExteriorSpec::Zero)?;
    let s = spec.order.s();
    let samples = pairs
        .iter()
        .map(|(a, b)| {
            let diff = (gf.evaluate(a)? - gf.evaluate(b)?).abs();
            let dist = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let big = norm(a).max(norm(b));
            let m = big.powf(2.0 * beta) * dist.powf(beta - 2.0 * s) + dist;
            Ok((a.clone(), b.clone(), diff, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let c_hat = samples.iter().map(|(_, _, d, m)| d / m).fold(0.0, f64::max);
    Ok(ModulusFit { c_hat, beta, samples })
}
