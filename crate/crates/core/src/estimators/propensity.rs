//! Kernel regression of the response flag on the instruments.

use nalgebra::{DMatrix, DVector};

use super::local_poly::{rule_of_thumb, LocalPolyConfig, LocalPolySmoother};
use crate::table::Table;
use crate::{Error, Result};

/// Interpolation grid size for the univariate fast path.
const GRID: usize = 2048;

/// `pi(z) = E[R | Z = z]` at each row of `eval`, clipped to `[0, 1]`.
///
/// One instrument: local polynomial fit on a fine grid spanning the
/// evaluation points, linearly interpolated. Several instruments: local
/// linear fit with a product kernel (one rule-of-thumb bandwidth per
/// coordinate unless `config.bandwidth` fixes a common one).
pub fn estimate_propensity(r: &[u8], z: &Table, eval: &Table, config: &LocalPolyConfig) -> Result<Vec<f64>> {
    if r.len() != z.len() {
        return Err(Error::Precondition("response flags and instruments differ in length".into()));
    }
    if z.width() == 0 || z.width() != eval.width() {
        return Err(Error::Precondition("instrument width mismatch or no instruments".into()));
    }
    let rf: Vec<f64> = r.iter().map(|&v| v as f64).collect();
    let out = if z.width() == 1 {
        univariate(&rf, &z.column(0), &eval.column(0), config)?
    } else {
        product_kernel(&rf, z, eval, config)?
    };
    Ok(out.into_iter().map(|p| p.clamp(0.0, 1.0)).collect())
}

fn univariate(r: &[f64], z: &[f64], eval: &[f64], config: &LocalPolyConfig) -> Result<Vec<f64>> {
    let sm = LocalPolySmoother::new(z, r, config)?;
    if eval.len() <= GRID {
        return eval.iter().map(|&x| sm.fit_at(x).map(|f| f.value)).collect();
    }
    let (lo, hi) = eval
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if lo == hi {
        let v = sm.fit_at(lo)?.value;
        return Ok(vec![v; eval.len()]);
    }
    let step = (hi - lo) / (GRID - 1) as f64;
    let grid: Vec<f64> = (0..GRID)
        .map(|j| sm.fit_at(lo + step * j as f64).map(|f| f.value))
        .collect::<Result<_>>()?;
    Ok(eval
        .iter()
        .map(|&x| {
            let pos = ((x - lo) / step).clamp(0.0, (GRID - 1) as f64);
            let j = (pos.floor() as usize).min(GRID - 2);
            let t = pos - j as f64;
            grid[j] * (1.0 - t) + grid[j + 1] * t
        })
        .collect())
}

fn product_kernel(r: &[f64], z: &Table, eval: &Table, config: &LocalPolyConfig) -> Result<Vec<f64>> {
    let k = z.width();
    let h: Vec<f64> = (0..k)
        .map(|j| match config.bandwidth {
            Some(b) if b > 0.0 => Ok(b),
            Some(b) => Err(Error::Precondition(format!("bandwidth must be positive, got {b}"))),
            None => Ok(rule_of_thumb(&z.column(j)) * (z.len() as f64).powf(0.2 - 1.0 / (4.0 + k as f64))),
        })
        .collect::<Result<_>>()?;
    let first = z.column(0);
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| first[a].total_cmp(&first[b]));
    let sorted_first: Vec<f64> = order.iter().map(|&i| first[i]).collect();
    let dim = if config.degree == 0 { 1 } else { k + 1 };
    eval.rows()
        .map(|e| {
            let mut scale = 1.0;
            for _ in 0..12 {
                let lo = sorted_first.partition_point(|&x| x <= e[0] - h[0] * scale);
                let hi = sorted_first.partition_point(|&x| x < e[0] + h[0] * scale);
                let mut xtx = DMatrix::<f64>::zeros(dim, dim);
                let mut xty = DVector::<f64>::zeros(dim);
                let mut row = vec![0.0; dim];
                for &i in &order[lo..hi] {
                    let zi = z.row(i);
                    let w: f64 = (0..k).map(|j| config.kernel.weight((zi[j] - e[j]) / (h[j] * scale))).product();
                    if w == 0.0 {
                        continue;
                    }
                    row[0] = 1.0;
                    if dim > 1 {
                        for j in 0..k {
                            row[1 + j] = (zi[j] - e[j]) / (h[j] * scale);
                        }
                    }
                    for a in 0..dim {
                        xty[a] += w * row[a] * r[i];
                        for b in 0..dim {
                            xtx[(a, b)] += w * row[a] * row[b];
                        }
                    }
                }
                if xtx[(0, 0)] > 0.0 {
                    if let Some(sol) = xtx.clone().cholesky().map(|c| c.solve(&xty)) {
                        if sol[0].is_finite() {
                            return Ok(sol[0]);
                        }
                    }
                }
                scale *= 2.0;
            }
            Err(Error::InsufficientData(format!("no usable kernel window around {e:?}")))
        })
        .collect()
}
