//! Exhaustive reference solver and random problem generator shared by the
//! MILP tests.

#![allow(dead_code, clippy::needless_range_loop)]

use atmplace_milp::{LinExpr, MilpProblem, Sense, VarKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

/// Row in `a x <= b` form over the continuous variables only.
struct Half {
    a: Vec<f64>,
    b: f64,
}

fn solve_square(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let k = r.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for i in 0..k {
            if i != col {
                let f = m[i][col] / m[col][col];
                for j in col..k {
                    m[i][j] -= f * m[col][j];
                }
                r[i] -= f * r[col];
            }
        }
    }
    Some((0..k).map(|i| r[i] / m[i][i]).collect())
}

fn combos(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut dyn FnMut(&[usize])) {
    if cur.len() == k {
        out(cur);
        return;
    }
    for i in start..n {
        cur.push(i);
        combos(n, k, i + 1, cur, out);
        cur.pop();
    }
}

/// Minimum of `c x` over `{x : halves}` by vertex enumeration (bounded
/// polytope assumed).
fn lp_by_vertices(c: &[f64], halves: &[Half]) -> Option<f64> {
    let k = c.len();
    if k == 0 {
        return halves.iter().all(|h| h.b >= -TOL).then_some(0.0);
    }
    let mut best: Option<f64> = None;
    combos(halves.len(), k, 0, &mut Vec::new(), &mut |idx| {
        let m: Vec<Vec<f64>> = idx.iter().map(|&i| halves[i].a.clone()).collect();
        let r: Vec<f64> = idx.iter().map(|&i| halves[i].b).collect();
        if let Some(x) = solve_square(m, r) {
            let ok = halves.iter().all(|h| {
                let lhs: f64 = h.a.iter().zip(&x).map(|(a, v)| a * v).sum();
                lhs <= h.b + 1e-7 * (1.0 + h.b.abs())
            });
            if ok {
                let v: f64 = c.iter().zip(&x).map(|(a, v)| a * v).sum();
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
    });
    best
}

/// Optimum over all binary assignments, each followed by an exact LP over
/// the continuous variables. `None` means infeasible.
pub fn brute_force(p: &MilpProblem) -> Option<f64> {
    let bins: Vec<usize> = (0..p.vars.len())
        .filter(|&j| p.vars[j].kind == VarKind::Binary)
        .collect();
    let conts: Vec<usize> = (0..p.vars.len())
        .filter(|&j| p.vars[j].kind == VarKind::Continuous)
        .collect();
    let mut pos = vec![usize::MAX; p.vars.len()];
    for (k, &j) in conts.iter().enumerate() {
        pos[j] = k;
    }
    // dense rows: coefficients on binaries and continuous separately
    let rows: Vec<(Vec<f64>, Vec<f64>, Sense, f64)> = p
        .constraints
        .iter()
        .map(|c| {
            let mut full = vec![0.0; p.vars.len()];
            for &(v, coef) in &c.expr.terms {
                full[v.index()] += coef;
            }
            let b: Vec<f64> = bins.iter().map(|&j| full[j]).collect();
            let x: Vec<f64> = conts.iter().map(|&j| full[j]).collect();
            (b, x, c.sense, c.rhs)
        })
        .collect();
    let mut cfull = vec![0.0; p.vars.len()];
    for &(v, coef) in &p.objective.terms {
        cfull[v.index()] += coef;
    }
    let cb: Vec<f64> = bins.iter().map(|&j| cfull[j]).collect();
    let cx: Vec<f64> = conts.iter().map(|&j| cfull[j]).collect();

    let mut best: Option<f64> = None;
    let nb = bins.len();
    for mask in 0u64..(1u64 << nb) {
        let z: Vec<f64> = (0..nb).map(|k| ((mask >> k) & 1) as f64).collect();
        let mut halves = Vec::new();
        let mut dead = false;
        for (b, x, sense, rhs) in &rows {
            let fixed: f64 = b.iter().zip(&z).map(|(a, v)| a * v).sum();
            let rest = rhs - fixed;
            let all_zero = x.iter().all(|&v| v == 0.0);
            if all_zero {
                let ok = match sense {
                    Sense::Le => rest >= -TOL,
                    Sense::Ge => rest <= TOL,
                    Sense::Eq => rest.abs() <= TOL,
                };
                if !ok {
                    dead = true;
                    break;
                }
                continue;
            }
            if matches!(sense, Sense::Le | Sense::Eq) {
                halves.push(Half { a: x.clone(), b: rest });
            }
            if matches!(sense, Sense::Ge | Sense::Eq) {
                halves.push(Half {
                    a: x.iter().map(|v| -v).collect(),
                    b: -rest,
                });
            }
        }
        if dead {
            continue;
        }
        for (k, &j) in conts.iter().enumerate() {
            let mut a = vec![0.0; conts.len()];
            a[k] = 1.0;
            halves.push(Half { a: a.clone(), b: p.vars[j].upper });
            a[k] = -1.0;
            halves.push(Half { a, b: -p.vars[j].lower });
        }
        let _ = &pos;
        if let Some(v) = lp_by_vertices(&cx, &halves) {
            let total = v + cb.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
            best = Some(best.map_or(total, |b: f64| b.min(total)));
        }
    }
    best.map(|b| b + p.objective.constant)
}

/// Random mixed problem with `nb` binaries and `nc` boxed continuous
/// variables. Rows are built around a random reference point so most
/// instances are feasible.
pub fn random_problem(seed: u64, nb: usize, nc: usize) -> MilpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = MilpProblem::new(format!("rand{seed}"));
    let mut vars = Vec::new();
    let mut point = Vec::new();
    for k in 0..nb {
        vars.push(p.add_binary(format!("b{k}")));
        point.push(rng.gen_range(0..=1) as f64);
    }
    for k in 0..nc {
        let hi = rng.gen_range(1.0..6.0f64).round();
        vars.push(p.add_continuous(format!("x{k}"), 0.0, hi));
        point.push(rng.gen_range(0.0..hi));
    }
    let rows = rng.gen_range(1..=(2 + (nb + nc) / 3).min(8));
    for r in 0..rows {
        let mut e = LinExpr::new();
        let mut lhs = 0.0;
        for (k, &v) in vars.iter().enumerate() {
            if rng.gen_bool(0.6) {
                let c = rng.gen_range(-5..=5) as f64;
                e.add_term(v, c);
                lhs += c * point[k];
            }
        }
        let slack = rng.gen_range(0..=3) as f64;
        let roll = rng.gen_range(0..10);
        if roll < 6 {
            p.add_constraint(format!("r{r}"), e, Sense::Le, (lhs + slack).round());
        } else if roll < 9 {
            p.add_constraint(format!("r{r}"), e, Sense::Ge, (lhs - slack).round());
        } else if nc > 0 {
            p.add_constraint(format!("r{r}"), e, Sense::Eq, lhs);
        } else {
            p.add_constraint(format!("r{r}"), e, Sense::Eq, lhs.round());
        }
    }
    let mut obj = LinExpr::new();
    for &v in &vars {
        obj.add_term(v, rng.gen_range(-10..=10) as f64);
    }
    p.set_objective(obj);
    p
}
