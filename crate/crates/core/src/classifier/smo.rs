//! Two-coordinate dual descent for the linear soft-margin SVM with bias.
//!
//! Dual: `min 1/2 a'Qa - sum(a)` subject to `y'a = 0`, `0 <= a_i <= C_i`,
//! with `Q_ij = y_i y_j <x_i, x_j>`. Working pairs use second-order
//! selection; the primal bias is recovered exactly for the final `w`.

const TAU: f64 = 1e-12;

pub(crate) struct Problem<'a> {
    pub x: &'a [&'a [f64]],
    pub y: &'a [f64],
    pub cost: &'a [f64],
    pub dim: usize,
}

pub(crate) struct Solution {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lazily computed Gram columns.
struct Gram<'a> {
    x: &'a [&'a [f64]],
    cols: Vec<Option<Vec<f64>>>,
    diag: Vec<f64>,
}

impl<'a> Gram<'a> {
    fn new(x: &'a [&'a [f64]]) -> Self {
        Self {
            x,
            cols: vec![None; x.len()],
            diag: x.iter().map(|v| dot(v, v)).collect(),
        }
    }

    fn column(&mut self, i: usize) -> &[f64] {
        let x = self.x;
        self.cols[i].get_or_insert_with(|| x.iter().map(|v| dot(v, x[i])).collect())
    }
}

/// Bias minimizing `sum C_i max(0, 1 - y_i (s_i + b))` for fixed scores `s`.
/// The objective is piecewise linear with breakpoints `y_i - s_i`; a flat
/// optimal segment resolves to its midpoint.
pub(crate) fn optimal_bias(scores: &[f64], y: &[f64], cost: &[f64]) -> f64 {
    let mut points: Vec<(f64, f64)> = scores
        .iter()
        .zip(y)
        .zip(cost)
        .map(|((s, y), c)| (y - s, *c))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut slope: f64 = -y.iter().zip(cost).filter(|(y, _)| **y > 0.0).map(|(_, c)| c).sum::<f64>();
    if slope >= 0.0 {
        // No positive terms: any b at or below the smallest breakpoint.
        return points.first().map_or(0.0, |p| p.0);
    }
    let mut k = 0;
    while k < points.len() {
        let at = points[k].0;
        while k < points.len() && points[k].0 == at {
            slope += points[k].1;
            k += 1;
        }
        if slope > 0.0 {
            return at;
        }
        if slope == 0.0 {
            return match points.get(k) {
                Some(next) => 0.5 * (at + next.0),
                None => at,
            };
        }
    }
    points.last().map_or(0.0, |p| p.0)
}

fn hinge_sum(scores: &[f64], y: &[f64], cost: &[f64], bias: f64) -> f64 {
    scores
        .iter()
        .zip(y)
        .zip(cost)
        .map(|((s, y), c)| c * (1.0 - y * (s + bias)).max(0.0))
        .sum()
}

pub(crate) fn solve(p: &Problem, tolerance: f64, max_iter: usize) -> Solution {
    let n = p.x.len();
    let mut alpha = vec![0.0f64; n];
    let mut grad = vec![-1.0f64; n];
    let mut gram = Gram::new(p.x);
    let check_every = n.max(16);

    let weights_of = |alpha: &[f64]| {
        let mut w = vec![0.0f64; p.dim];
        for ((a, y), x) in alpha.iter().zip(p.y).zip(p.x) {
            if *a != 0.0 {
                for (wk, xk) in w.iter_mut().zip(x.iter()) {
                    *wk += a * y * xk;
                }
            }
        }
        w
    };
    let relative_gap = |alpha: &[f64]| {
        let w = weights_of(alpha);
        let ww = dot(&w, &w);
        let scores: Vec<f64> = p.x.iter().map(|x| dot(&w, x)).collect();
        let b = optimal_bias(&scores, p.y, p.cost);
        let primal = 0.5 * ww + hinge_sum(&scores, p.y, p.cost, b);
        let dual = alpha.iter().sum::<f64>() - 0.5 * ww;
        (primal - dual) / primal.abs().max(f64::MIN_POSITIVE)
    };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        if iterations % check_every == 0 && iterations > 0 && relative_gap(&alpha) <= tolerance {
            converged = true;
            break;
        }
        // i: maximal -y G over the "up" set.
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let up = if p.y[t] > 0.0 { alpha[t] < p.cost[t] } else { alpha[t] > 0.0 };
            if up && (-p.y[t] * grad[t] > gmax || i == usize::MAX) {
                gmax = -p.y[t] * grad[t];
                i = t;
            }
        }
        if i == usize::MAX {
            converged = true;
            break;
        }
        let qi: Vec<f64> = gram.column(i).to_vec();
        // j: best second-order decrease over the "low" set.
        let mut gmin = f64::INFINITY;
        let mut best = f64::INFINITY;
        let mut j = usize::MAX;
        for t in 0..n {
            let low = if p.y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < p.cost[t] };
            if !low {
                continue;
            }
            let v = -p.y[t] * grad[t];
            gmin = gmin.min(v);
            let b = gmax - v;
            if b > 0.0 {
                let a = (gram.diag[i] + gram.diag[t] - 2.0 * qi[t]).max(TAU);
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j = t;
                }
            }
        }
        if j == usize::MAX || gmax - gmin < 1e-12 {
            converged = relative_gap(&alpha) <= tolerance || gmax - gmin < 1e-12;
            break;
        }
        let qj: Vec<f64> = gram.column(j).to_vec();
        let (yi, yj) = (p.y[i], p.y[j]);
        let (ci, cj) = (p.cost[i], p.cost[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = qi[j];
        if yi != yj {
            let quad = (gram.diag[i] + gram.diag[j] - 2.0 * kij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let quad = (gram.diag[i] + gram.diag[j] - 2.0 * kij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += p.y[t] * (yi * qi[t] * di + yj * qj[t] * dj);
        }
        iterations += 1;
    }
    if !converged && iterations >= max_iter {
        converged = relative_gap(&alpha) <= tolerance;
    }

    let weights = weights_of(&alpha);
    let scores: Vec<f64> = p.x.iter().map(|x| dot(&weights, x)).collect();
    let bias = optimal_bias(&scores, p.y, p.cost);
    Solution {
        weights,
        bias,
        iterations,
        converged,
    }
}
