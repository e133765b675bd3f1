//! Time-indexed trajectory container and its CSV form.
//!
//! A trajectory holds N+1 knot configurations with N input/multiplier
//! intervals. Knot velocities use the midpoint convention
//! v_k = (q_{k+1} − q_k)/h, with a backward difference at the final knot.

use crate::real::{lit, Real};
use nalgebra::DVector;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum TrajectoryError {
    #[error("trajectory parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Rollout or plan data: the unit of file I/O.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T: Real> {
    /// Time step [ms].
    pub h: T,
    /// Knot configurations q_0..q_N.
    pub states: Vec<DVector<T>>,
    /// Interval inputs u_0..u_{N-1} [V].
    pub inputs: Vec<DVector<T>>,
    /// Normal impulses per interval.
    pub gammas: Vec<DVector<T>>,
    /// Friction-direction impulses per interval.
    pub betas: Vec<DVector<T>>,
    /// Loop-constraint impulses per interval.
    pub lambdas: Vec<DVector<T>>,
    /// Signed distances at each knot.
    pub phis: Vec<DVector<T>>,
    /// Complementarity relaxation slacks per interval (plans only; empty
    /// for plain rollouts).
    pub slacks: Vec<T>,
    /// DEL residual ∞-norm per interval.
    pub resid: Vec<T>,
    /// Max complementarity group product per interval.
    pub comp_viol: Vec<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn n_knots(&self) -> usize {
        self.states.len()
    }

    pub fn n_intervals(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    /// Knot velocity by the midpoint convention (backward at the last knot).
    pub fn velocity(&self, k: usize) -> DVector<T> {
        let last = self.states.len() - 1;
        if k < last {
            (&self.states[k + 1] - &self.states[k]) / self.h
        } else {
            (&self.states[last] - &self.states[last - 1]) / self.h
        }
    }

    pub fn time(&self, k: usize) -> T {
        lit::<T>(k as f64) * self.h
    }

    /// Serialize to CSV with a column-map comment line and a header row.
    /// Interval quantities on the final knot row are written as zeros.
    pub fn to_csv(&self) -> String {
        let nq = self.states.first().map_or(0, |q| q.len());
        let nu = self.inputs.first().map_or(0, |u| u.len());
        let ng = self.gammas.first().map_or(0, |g| g.len());
        let nb = self.betas.first().map_or(0, |b| b.len());
        let nl = self.lambdas.first().map_or(0, |l| l.len());
        let np = self.phis.first().map_or(0, |p| p.len());
        let ns = usize::from(!self.slacks.is_empty());

        let mut out = String::new();
        let _ = writeln!(
            out,
            "# columns: t q[0..{nq}) v[0..{nq}) u[0..{nu}) gamma[0..{ng}) beta[0..{nb}) \
             lambda[0..{nl}) phi[0..{np}) s[0..{ns}) resid comp_viol ; h={:e} ; \
             interval quantities are zero on the final row",
            self.h.to_f64().unwrap_or(f64::NAN)
        );
        let mut header: Vec<String> = vec!["t".into()];
        for i in 0..nq {
            header.push(format!("q{i}"));
        }
        for i in 0..nq {
            header.push(format!("v{i}"));
        }
        for i in 0..nu {
            header.push(format!("u{i}"));
        }
        for i in 0..ng {
            header.push(format!("gamma{i}"));
        }
        for i in 0..nb {
            header.push(format!("beta{i}"));
        }
        for i in 0..nl {
            header.push(format!("lambda{i}"));
        }
        for i in 0..np {
            header.push(format!("phi{i}"));
        }
        if ns == 1 {
            header.push("s".into());
        }
        header.push("resid".into());
        header.push("comp_viol".into());
        let _ = writeln!(out, "{}", header.join(","));

        let fmt = |x: T| format!("{:e}", x.to_f64().unwrap_or(f64::NAN));
        for k in 0..self.n_knots() {
            let mut row: Vec<String> = vec![fmt(self.time(k))];
            let v = self.velocity(k);
            row.extend(self.states[k].iter().map(|&x| fmt(x)));
            row.extend(v.iter().map(|&x| fmt(x)));
            let interval = k < self.n_intervals();
            let push_block = |row: &mut Vec<String>, data: &[DVector<T>], width: usize| {
                if interval && k < data.len() {
                    row.extend(data[k].iter().map(|&x| fmt(x)));
                } else {
                    row.extend(std::iter::repeat_n("0".to_string(), width));
                }
            };
            push_block(&mut row, &self.inputs, nu);
            push_block(&mut row, &self.gammas, ng);
            push_block(&mut row, &self.betas, nb);
            push_block(&mut row, &self.lambdas, nl);
            if k < self.phis.len() {
                row.extend(self.phis[k].iter().map(|&x| fmt(x)));
            } else {
                row.extend(std::iter::repeat_n("0".to_string(), np));
            }
            if ns == 1 {
                if interval && k < self.slacks.len() {
                    row.push(fmt(self.slacks[k]));
                } else {
                    row.push("0".to_string());
                }
            }
            if interval && k < self.resid.len() {
                row.push(fmt(self.resid[k]));
                row.push(fmt(self.comp_viol[k]));
            } else {
                row.push("0".to_string());
                row.push("0".to_string());
            }
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    /// Parse the CSV form written by [`Trajectory::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self, TrajectoryError> {
        let mut h = None;
        let mut widths: Option<[usize; 8]> = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(cols) = comment.trim().strip_prefix("columns:") {
                    let mut w = [0usize; 8];
                    for (i, name) in [
                        "q", "v", "u", "gamma", "beta", "lambda", "phi", "s",
                    ]
                    .iter()
                    .enumerate()
                    {
                        let tag = format!("{name}[0..");
                        if let Some(pos) = cols.find(&tag) {
                            let rest = &cols[pos + tag.len()..];
                            let end = rest.find(')').ok_or_else(|| TrajectoryError::Parse {
                                line: line_no,
                                message: "malformed column map".into(),
                            })?;
                            w[i] = rest[..end].parse().map_err(|_| TrajectoryError::Parse {
                                line: line_no,
                                message: "bad column width".into(),
                            })?;
                        }
                    }
                    widths = Some(w);
                    if let Some(hpos) = cols.find("h=") {
                        let rest = &cols[hpos + 2..];
                        let end = rest.find(' ').unwrap_or(rest.len());
                        h = rest[..end].trim().parse::<f64>().ok();
                    }
                }
                continue;
            }
            if line.starts_with('t') {
                continue; // header row
            }
            let row: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
            rows.push(row.map_err(|e| TrajectoryError::Parse {
                line: line_no,
                message: format!("bad number: {e}"),
            })?);
        }
        let widths = widths.ok_or_else(|| TrajectoryError::Parse {
            line: 1,
            message: "missing `# columns:` map".into(),
        })?;
        let [nq, _nv, nu, ng, nb, nl, np, ns] = widths;
        let expected = 1 + nq + nq + nu + ng + nb + nl + np + ns + 2;
        let mut traj = Trajectory {
            h: lit(h.ok_or_else(|| TrajectoryError::Parse {
                line: 1,
                message: "missing h in column map".into(),
            })?),
            states: Vec::new(),
            inputs: Vec::new(),
            gammas: Vec::new(),
            betas: Vec::new(),
            lambdas: Vec::new(),
            phis: Vec::new(),
            slacks: Vec::new(),
            resid: Vec::new(),
            comp_viol: Vec::new(),
        };
        let n_rows = rows.len();
        for (ri, row) in rows.iter().enumerate() {
            if row.len() != expected {
                return Err(TrajectoryError::Parse {
                    line: ri + 1,
                    message: format!("expected {expected} columns, got {}", row.len()),
                });
            }
            let mut pos = 1; // skip t
            let mut take = |k: usize, pos: &mut usize| {
                let v = DVector::from_iterator(k, row[*pos..*pos + k].iter().map(|&x| lit(x)));
                *pos += k;
                v
            };
            traj.states.push(take(nq, &mut pos));
            let _v = take(nq, &mut pos);
            let interval = ri + 1 < n_rows;
            let u = take(nu, &mut pos);
            let g = take(ng, &mut pos);
            let b = take(nb, &mut pos);
            let l = take(nl, &mut pos);
            let p = take(np, &mut pos);
            traj.phis.push(p);
            if interval {
                traj.inputs.push(u);
                traj.gammas.push(g);
                traj.betas.push(b);
                traj.lambdas.push(l);
            }
            if ns == 1 {
                let s = row[pos];
                pos += 1;
                if interval {
                    traj.slacks.push(lit(s));
                }
            }
            if interval {
                traj.resid.push(lit(row[pos]));
                traj.comp_viol.push(lit(row[pos + 1]));
            }
        }
        Ok(traj)
    }
}
