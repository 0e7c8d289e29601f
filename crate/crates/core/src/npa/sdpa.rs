//! Writer for the SDPA sparse text format (`.dat-s`).
//!
//! SDPA solves `min c·x  s.t.  Σ F_i x_i − F_0 ⪰ 0`. The moment LMI
//! `F0 + Σ y F ⪰ 0` maps onto it with `x = y`, `c = −objective` and
//! `F_0 = −F0`. Equalities become pairs of opposite entries in a diagonal
//! block, inequalities single entries.

use std::fmt::Write;

use super::sdp::SdpProblem;

pub fn write_sdpa(problem: &SdpProblem, title: &str) -> String {
    let mut out = String::new();
    let lp_rows = 2 * problem.equalities.len() + problem.inequalities.len();
    writeln!(out, "\"{title}").unwrap();
    writeln!(
        out,
        "* maximise objective·x + {}; SDPA minimises the negated objective",
        problem.objective_constant
    )
    .unwrap();
    writeln!(out, "{}", problem.num_vars).unwrap();
    if lp_rows > 0 {
        writeln!(out, "2").unwrap();
        writeln!(out, "{} -{}", problem.psd_dim, lp_rows).unwrap();
    } else {
        writeln!(out, "1").unwrap();
        writeln!(out, "{}", problem.psd_dim).unwrap();
    }
    let c: Vec<String> = problem
        .objective
        .iter()
        .map(|v| format!("{}", -v + 0.0))
        .collect();
    writeln!(out, "{}", c.join(" ")).unwrap();

    // Diagonal rows as (matrix, value) lists, in row order.
    let mut lp: Vec<(f64, Vec<(usize, f64)>)> = Vec::with_capacity(lp_rows);
    for row in &problem.equalities {
        lp.push((row.rhs, row.coeffs.clone()));
        lp.push((-row.rhs, row.coeffs.iter().map(|&(k, v)| (k, -v)).collect()));
    }
    for row in &problem.inequalities {
        lp.push((row.rhs, row.coeffs.clone()));
    }

    let mut entry = |mat: usize, block: usize, r: usize, col: usize, v: f64| {
        if v != 0.0 {
            writeln!(out, "{mat} {block} {} {} {}", r + 1, col + 1, v).unwrap();
        }
    };
    for &(r, col, v) in &problem.constant {
        entry(0, 1, r, col, -v);
    }
    for (d, (rhs, _)) in lp.iter().enumerate() {
        entry(0, 2, d, d, *rhs);
    }
    for (k, f) in problem.coefficients.iter().enumerate() {
        for &(r, col, v) in f {
            entry(k + 1, 1, r, col, v);
        }
        for (d, (_, coeffs)) in lp.iter().enumerate() {
            let v: f64 = coeffs.iter().filter(|(q, _)| *q == k).map(|(_, v)| v).sum();
            entry(k + 1, 2, d, d, v);
        }
    }
    out
}
