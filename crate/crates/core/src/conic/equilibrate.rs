//! Ruiz equilibration with block-constant row scaling on SOC and PSD blocks,
//! so that scaled slacks stay in the same cones.

use super::{Cone, ConicProblem, Triplet};

const PASSES: usize = 20;
const MIN_SCALE: f64 = 1e-4;
const MAX_SCALE: f64 = 1e4;

pub(crate) struct Equilibration {
    d: Vec<f64>,
    e: Vec<f64>,
    sb: f64,
    sc: f64,
}

impl Equilibration {
    pub fn new(p: &ConicProblem, enabled: bool) -> Self {
        let m = p.n_rows();
        let n = p.n_vars();
        let mut d = vec![1.0; m];
        let mut e = vec![1.0; n];
        if !enabled {
            return Self { d, e, sb: 1.0, sc: 1.0 };
        }
        let blocks = p.cones.blocks();
        for _ in 0..PASSES {
            let mut rmax = vec![0.0f64; m];
            let mut cmax = vec![0.0f64; n];
            for t in &p.a {
                let v = (t.val * d[t.row] * e[t.col]).abs();
                rmax[t.row] = rmax[t.row].max(v);
                cmax[t.col] = cmax[t.col].max(v);
            }
            for (off, cone) in &blocks {
                let r = *off..*off + cone.dim();
                match cone {
                    Cone::Zero(_) | Cone::NonNeg(_) => {
                        for i in r {
                            d[i] *= factor(rmax[i]);
                        }
                    }
                    Cone::Soc(_) | Cone::Psd(_) => {
                        let bm = rmax[r.clone()].iter().copied().fold(0.0, f64::max);
                        let f = factor(bm);
                        for i in r {
                            d[i] *= f;
                        }
                    }
                }
            }
            for j in 0..n {
                e[j] *= factor(cmax[j]);
            }
        }
        let bnorm = p.b.iter().zip(&d).map(|(b, di)| (b * di).abs()).fold(0.0, f64::max);
        let cnorm = p.c.iter().zip(&e).map(|(c, ej)| (c * ej).abs()).fold(0.0, f64::max);
        let sb = if bnorm > 0.0 { (1.0 / bnorm).clamp(MIN_SCALE, MAX_SCALE) } else { 1.0 };
        let sc = if cnorm > 0.0 { (1.0 / cnorm).clamp(MIN_SCALE, MAX_SCALE) } else { 1.0 };
        Self { d, e, sb, sc }
    }

    pub fn scaled_problem(&self, p: &ConicProblem) -> ConicProblem {
        ConicProblem {
            c: p.c.iter().zip(&self.e).map(|(c, e)| self.sc * c * e).collect(),
            a: p.a
                .iter()
                .map(|t| Triplet {
                    row: t.row,
                    col: t.col,
                    val: t.val * self.d[t.row] * self.e[t.col],
                })
                .collect(),
            b: p.b.iter().zip(&self.d).map(|(b, d)| self.sb * b * d).collect(),
            cones: p.cones.clone(),
        }
    }

    pub fn unscale(&self, x: &[f64], y: &[f64], s: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (
            x.iter().zip(&self.e).map(|(v, e)| v * e / self.sb).collect(),
            y.iter().zip(&self.d).map(|(v, d)| v * d / self.sc).collect(),
            s.iter().zip(&self.d).map(|(v, d)| v / (d * self.sb)).collect(),
        )
    }
}

fn factor(norm: f64) -> f64 {
    if norm > 0.0 {
        (1.0 / norm.sqrt()).clamp(MIN_SCALE, MAX_SCALE)
    } else {
        1.0
    }
}
