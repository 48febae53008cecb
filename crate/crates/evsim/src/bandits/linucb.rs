//! LinUCB with disjoint and hybrid context models.
//!
//! Sufficient statistics are kept explicitly (`A_a`, `b_a`, and for the
//! hybrid model `B_a`, `A_0`, `b_0`) and every prediction solves the small
//! SPD systems from scratch via Cholesky. Dimensions stay tiny here, so a
//! dense solve per decision is cheap and easy to audit.
//!
//! Hybrid scoring, with `beta_hat = A_0^-1 b_0` and
//! `theta_hat_a = A_a^-1 (b_a - B_a beta_hat)`:
//!
//! ```text
//! s = z' A_0^-1 z
//!   - 2 z' A_0^-1 B_a' A_a^-1 x
//!   + x' A_a^-1 x
//!   + x' A_a^-1 B_a A_0^-1 B_a' A_a^-1 x
//! p = z' beta_hat + x' theta_hat_a + alpha * sqrt(s)
//! ```
//!
//! and the hybrid update of the chosen arm:
//!
//! ```text
//! A_0 += B_a' A_a^-1 B_a          b_0 += B_a' A_a^-1 b_a
//! A_a += x x'    B_a += x z'      b_a += r x
//! A_0 += z z' - B_a' A_a^-1 B_a   b_0 += r z - B_a' A_a^-1 b_a   (new values)
//! ```

use rand::Rng;
use std::fmt::Write as _;

use super::ContextVector;
use crate::error::{EvsimError, Result};
use crate::linalg::{cholesky, dot, Matrix};
use crate::rng::RunRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinUcbConfig {
    /// Exploration width, alpha >= 0.
    pub alpha: f64,
    /// Per-arm context dimension d.
    pub dimension: usize,
    /// Shared context dimension k; 0 selects the disjoint model.
    pub shared_dimension: usize,
    pub arm_count: usize,
}

impl LinUcbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(EvsimError::contract("alpha must be finite and >= 0"));
        }
        if self.dimension < 1 {
            return Err(EvsimError::contract("dimension must be >= 1"));
        }
        if self.arm_count < 2 {
            return Err(EvsimError::contract("arm_count must be >= 2"));
        }
        Ok(())
    }

    pub fn is_hybrid(&self) -> bool {
        self.shared_dimension > 0
    }
}

/// Per-arm history: `A_a` starts as the identity and only ever gains
/// outer products, so it stays symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmState {
    pub arm_id: usize,
    pub design_matrix: Matrix,
    pub reward_vector: Vec<f64>,
    /// `B_a`, d x k; present only in hybrid mode.
    pub hybrid_cross: Option<Matrix>,
}

impl ArmState {
    pub fn new(arm_id: usize, dimension: usize, shared_dimension: usize) -> Self {
        Self {
            arm_id,
            design_matrix: Matrix::identity(dimension),
            reward_vector: vec![0.0; dimension],
            hybrid_cross: if shared_dimension > 0 {
                Some(Matrix::zeros(dimension, shared_dimension))
            } else {
                None
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.reward_vector.len()
    }
}

/// Shared history `A_0`, `b_0` for the hybrid model.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedState {
    pub shared_matrix: Matrix,
    pub shared_reward: Vec<f64>,
}

impl SharedState {
    pub fn new(shared_dimension: usize) -> Self {
        Self {
            shared_matrix: Matrix::identity(shared_dimension),
            shared_reward: vec![0.0; shared_dimension],
        }
    }

    pub fn dim(&self) -> usize {
        self.shared_reward.len()
    }
}

/// Solves `A_a X = B_a` column by column; returns `A_a^-1 B_a`.
fn solve_mat(a: &Matrix, b: &Matrix) -> Matrix {
    let f = cholesky(a).expect("design matrix must stay SPD");
    let mut out = Matrix::zeros(b.n_rows, b.n_cols);
    let mut col = vec![0.0; b.n_rows];
    for c in 0..b.n_cols {
        for r in 0..b.n_rows {
            col[r] = b.get(r, c);
        }
        let x = f.solve(&col);
        for r in 0..b.n_rows {
            out.set(r, c, x[r]);
        }
    }
    out
}

/// Expected-reward upper bound `p_{t,a}` for one arm. Pure; never
/// mutates the histories.
pub fn linucb_predict(
    arm: &ArmState,
    shared: Option<&SharedState>,
    x: &ContextVector,
    z: Option<&ContextVector>,
    alpha: f64,
) -> Result<f64> {
    if x.dim() != arm.dim() {
        return Err(EvsimError::contract(format!(
            "context dimension {} does not match arm dimension {}",
            x.dim(),
            arm.dim()
        )));
    }
    let fa = cholesky(&arm.design_matrix)
        .ok_or_else(|| EvsimError::contract("design matrix is not SPD"))?;
    let xs = x.as_slice();

    match (shared, z, &arm.hybrid_cross) {
        (None, None, None) => {
            // disjoint: p = theta_hat' x + alpha * sqrt(x' A^-1 x)
            let theta_hat = fa.solve(&arm.reward_vector);
            let a_inv_x = fa.solve(xs);
            Ok(dot(&theta_hat, xs) + alpha * dot(xs, &a_inv_x).max(0.0).sqrt())
        }
        (Some(sh), Some(z), Some(b_a)) => {
            if z.dim() != sh.dim() {
                return Err(EvsimError::contract("shared context dimension mismatch"));
            }
            let f0 = cholesky(&sh.shared_matrix)
                .ok_or_else(|| EvsimError::contract("shared matrix is not SPD"))?;
            let zs = z.as_slice();
            let beta_hat = f0.solve(&sh.shared_reward);
            // theta_hat = A_a^-1 (b_a - B_a beta_hat)
            let mut rhs = arm.reward_vector.clone();
            for (r, v) in b_a.mat_vec(&beta_hat).iter().enumerate() {
                rhs[r] -= v;
            }
            let theta_hat = fa.solve(&rhs);

            let a_inv_x = fa.solve(xs);
            let a0_inv_z = f0.solve(zs);
            // t = A_0^-1 B_a' A_a^-1 x
            let t = f0.solve(&b_a.mat_tvec(&a_inv_x));
            let s = dot(zs, &a0_inv_z) - 2.0 * dot(zs, &t) + dot(xs, &a_inv_x)
                + dot(&b_a.mat_tvec(&a_inv_x), &t);
            Ok(dot(zs, &beta_hat) + dot(&theta_hat, xs) + alpha * s.max(0.0).sqrt())
        }
        _ => Err(EvsimError::contract(
            "shared state, shared context and cross matrix must all be present (hybrid) or all absent (disjoint)",
        )),
    }
}

/// Argmax of `linucb_predict` over the valid arms; ties are broken
/// uniformly at random from the tied set.
pub fn linucb_select(
    arms: &[ArmState],
    shared: Option<&SharedState>,
    contexts: &[ContextVector],
    shared_contexts: Option<&[ContextVector]>,
    valid: &[usize],
    alpha: f64,
    rng: &mut RunRng,
) -> Result<usize> {
    if valid.is_empty() {
        return Err(EvsimError::contract("valid arm set is empty"));
    }
    if contexts.len() != arms.len() {
        return Err(EvsimError::contract("one context per arm required"));
    }
    let mut best = f64::NEG_INFINITY;
    let mut tied: Vec<usize> = Vec::new();
    for &a in valid {
        let z = shared_contexts.map(|zs| &zs[a]);
        let p = linucb_predict(&arms[a], shared, &contexts[a], z, alpha)?;
        if p > best {
            best = p;
            tied.clear();
            tied.push(a);
        } else if p == best {
            tied.push(a);
        }
    }
    Ok(tied[rng.gen_range(0..tied.len())])
}

/// Applies the observed reward to the chosen arm's histories (and the
/// shared histories in hybrid mode).
pub fn linucb_update(
    arm: &mut ArmState,
    shared: Option<&mut SharedState>,
    x: &ContextVector,
    z: Option<&ContextVector>,
    reward: f64,
) -> Result<()> {
    if x.dim() != arm.dim() {
        return Err(EvsimError::contract("context dimension mismatch"));
    }
    if !reward.is_finite() {
        return Err(EvsimError::contract("reward must be finite"));
    }
    let xs = x.as_slice();
    match (shared, z, &mut arm.hybrid_cross) {
        (None, None, None) => {
            arm.design_matrix.add_outer(xs, xs, 1.0);
            for (b, &xi) in arm.reward_vector.iter_mut().zip(xs) {
                *b += reward * xi;
            }
            Ok(())
        }
        (Some(sh), Some(z), Some(b_a)) => {
            let zs = z.as_slice();
            if zs.len() != sh.dim() {
                return Err(EvsimError::contract("shared context dimension mismatch"));
            }
            // A_0 += B_a' A_a^-1 B_a ; b_0 += B_a' A_a^-1 b_a   (old values)
            let a_inv_b = solve_mat(&arm.design_matrix, b_a);
            sh.shared_matrix.add_assign(&b_a.transpose().mat_mul(&a_inv_b));
            let a_inv_ba = cholesky(&arm.design_matrix).unwrap().solve(&arm.reward_vector);
            for (s, v) in sh.shared_reward.iter_mut().zip(b_a.mat_tvec(&a_inv_ba)) {
                *s += v;
            }
            // per-arm histories
            arm.design_matrix.add_outer(xs, xs, 1.0);
            b_a.add_outer(xs, zs, 1.0);
            for (b, &xi) in arm.reward_vector.iter_mut().zip(xs) {
                *b += reward * xi;
            }
            // A_0 += z z' - B_a' A_a^-1 B_a ; b_0 += r z - B_a' A_a^-1 b_a   (new values)
            let a_inv_b = solve_mat(&arm.design_matrix, b_a);
            sh.shared_matrix.add_outer(zs, zs, 1.0);
            sh.shared_matrix.sub_assign(&b_a.transpose().mat_mul(&a_inv_b));
            let a_inv_ba = cholesky(&arm.design_matrix).unwrap().solve(&arm.reward_vector);
            let corr = b_a.mat_tvec(&a_inv_ba);
            for ((s, &zi), c) in sh.shared_reward.iter_mut().zip(zs).zip(corr) {
                *s += reward * zi - c;
            }
            Ok(())
        }
        _ => Err(EvsimError::contract(
            "hybrid update requires shared state, shared context and cross matrix together",
        )),
    }
}

/// A complete learner: configuration plus all arm and shared histories.
#[derive(Debug, Clone)]
pub struct LinUcb {
    pub config: LinUcbConfig,
    pub arms: Vec<ArmState>,
    pub shared: Option<SharedState>,
}

impl LinUcb {
    pub fn new(config: LinUcbConfig) -> Result<Self> {
        config.validate()?;
        let arms = (0..config.arm_count)
            .map(|a| ArmState::new(a, config.dimension, config.shared_dimension))
            .collect();
        let shared = if config.is_hybrid() {
            Some(SharedState::new(config.shared_dimension))
        } else {
            None
        };
        Ok(Self { config, arms, shared })
    }

    pub fn select(
        &self,
        contexts: &[ContextVector],
        shared_contexts: Option<&[ContextVector]>,
        valid: &[usize],
        rng: &mut RunRng,
    ) -> Result<usize> {
        linucb_select(
            &self.arms,
            self.shared.as_ref(),
            contexts,
            shared_contexts,
            valid,
            self.config.alpha,
            rng,
        )
    }

    pub fn update(
        &mut self,
        arm: usize,
        x: &ContextVector,
        z: Option<&ContextVector>,
        reward: f64,
    ) -> Result<()> {
        linucb_update(&mut self.arms[arm], self.shared.as_mut(), x, z, reward)
    }

    /// Versioned text snapshot. Layout: header with mode and dimensions,
    /// then per arm `b_a`, row-major `A_a` and (hybrid) row-major `B_a`,
    /// then the shared `A_0`/`b_0`. Floats use Rust's shortest
    /// round-trippable decimal form.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        let mode = if self.config.is_hybrid() { "hybrid" } else { "disjoint" };
        writeln!(
            out,
            "evsim-linucb v1 mode={} d={} k={} arms={} alpha={}",
            mode,
            self.config.dimension,
            self.config.shared_dimension,
            self.config.arm_count,
            self.config.alpha
        )
        .unwrap();
        let write_vec = |out: &mut String, tag: &str, v: &[f64]| {
            write!(out, "{tag}").unwrap();
            for x in v {
                write!(out, " {x}").unwrap();
            }
            writeln!(out).unwrap();
        };
        for arm in &self.arms {
            write_vec(&mut out, "b", &arm.reward_vector);
            write_vec(&mut out, "A", &arm.design_matrix.data);
            if let Some(b_a) = &arm.hybrid_cross {
                write_vec(&mut out, "B", &b_a.data);
            }
        }
        if let Some(sh) = &self.shared {
            write_vec(&mut out, "A0", &sh.shared_matrix.data);
            write_vec(&mut out, "b0", &sh.shared_reward);
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| EvsimError::parse("empty snapshot"))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("evsim-linucb") || fields.next() != Some("v1") {
            return Err(EvsimError::parse("not an evsim-linucb v1 snapshot"));
        }
        let mut mode = None;
        let mut d = None;
        let mut k = None;
        let mut arms_n = None;
        let mut alpha = None;
        for kv in fields {
            let (key, val) = kv
                .split_once('=')
                .ok_or_else(|| EvsimError::parse("malformed header field"))?;
            match key {
                "mode" => mode = Some(val.to_string()),
                "d" => d = val.parse::<usize>().ok(),
                "k" => k = val.parse::<usize>().ok(),
                "arms" => arms_n = val.parse::<usize>().ok(),
                "alpha" => alpha = val.parse::<f64>().ok(),
                _ => return Err(EvsimError::parse(format!("unknown header field {key}"))),
            }
        }
        let (d, k, arms_n, alpha) = match (d, k, arms_n, alpha) {
            (Some(d), Some(k), Some(a), Some(al)) => (d, k, a, al),
            _ => return Err(EvsimError::parse("incomplete snapshot header")),
        };
        let config = LinUcbConfig {
            alpha,
            dimension: d,
            shared_dimension: k,
            arm_count: arms_n,
        };
        let hybrid = match mode.as_deref() {
            Some("hybrid") => true,
            Some("disjoint") => false,
            _ => return Err(EvsimError::parse("bad mode")),
        };
        if hybrid != config.is_hybrid() {
            return Err(EvsimError::parse("mode/k mismatch"));
        }
        let mut parse_vec = |tag: &str, len: usize| -> Result<Vec<f64>> {
            let line = lines
                .next()
                .ok_or_else(|| EvsimError::parse("truncated snapshot"))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(tag) {
                return Err(EvsimError::parse(format!("expected {tag} row")));
            }
            let v: std::result::Result<Vec<f64>, _> = parts.map(|p| p.parse::<f64>()).collect();
            let v = v.map_err(|e| EvsimError::parse(format!("bad float: {e}")))?;
            if v.len() != len {
                return Err(EvsimError::parse(format!("wrong {tag} length")));
            }
            Ok(v)
        };
        let mut arms = Vec::with_capacity(arms_n);
        for arm_id in 0..arms_n {
            let b = parse_vec("b", d)?;
            let a = parse_vec("A", d * d)?;
            let cross = if hybrid {
                Some(Matrix {
                    n_rows: d,
                    n_cols: k,
                    data: parse_vec("B", d * k)?,
                })
            } else {
                None
            };
            arms.push(ArmState {
                arm_id,
                design_matrix: Matrix {
                    n_rows: d,
                    n_cols: d,
                    data: a,
                },
                reward_vector: b,
                hybrid_cross: cross,
            });
        }
        let shared = if hybrid {
            Some(SharedState {
                shared_matrix: Matrix {
                    n_rows: k,
                    n_cols: k,
                    data: parse_vec("A0", k * k)?,
                },
                shared_reward: parse_vec("b0", k)?,
            })
        } else {
            None
        };
        Ok(Self { config, arms, shared })
    }
}
