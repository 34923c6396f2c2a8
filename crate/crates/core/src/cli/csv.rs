//! Trajectory CSV: `t,x1..xn,lam1..lamn,u1..um,mu,S,S1,H`, one row per
//! sample, every value with 17 significant digits so that parsing restores
//! the exact `f64`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::trajectory::TrajectorySolution;

pub fn header(state_dim: usize, control_dim: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=state_dim).map(|i| format!("x{i}")));
    cols.extend((1..=state_dim).map(|i| format!("lam{i}")));
    cols.extend((1..=control_dim).map(|i| format!("u{i}")));
    cols.extend(["mu", "S", "S1", "H"].map(String::from));
    cols.join(",")
}

fn push_value(line: &mut String, v: f64) {
    if !line.is_empty() {
        line.push(',');
    }
    write!(line, "{v:.16e}").expect("writing to a String cannot fail");
}

pub fn to_csv_string(solution: &TrajectorySolution) -> String {
    let mut out = header(solution.state_dim, solution.control_dim);
    out.push('\n');
    for p in &solution.points {
        let mut line = String::new();
        push_value(&mut line, p.t);
        for &v in p.x.iter().chain(&p.lam).chain(&p.u) {
            push_value(&mut line, v);
        }
        for v in [p.mu, p.s, p.s1, p.hamiltonian] {
            push_value(&mut line, v);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn export_csv(solution: &TrajectorySolution, path: &Path) -> io::Result<()> {
    fs::write(path, to_csv_string(solution))
}
