//! Multinomial No-U-Turn transitions with a diagonal Euclidean metric.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::LogDensity;
use crate::special::log_add_exp;

/// Energy error beyond which a trajectory is declared divergent.
const MAX_DELTA_H: f64 = 1000.0;

#[derive(Debug, Clone)]
pub(crate) struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub grad: Vec<f64>,
    pub logp: f64,
}

pub(crate) struct Transition {
    pub accept_stat: f64,
    pub divergent: bool,
    pub depth: usize,
    pub n_leapfrog: usize,
}

pub(crate) struct Nuts<'t, T: LogDensity + ?Sized> {
    target: &'t T,
    pub inv_metric: Vec<f64>,
    pub step: f64,
    max_depth: usize,
    pub rng: ChaCha8Rng,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add_assign(acc: &mut [f64], x: &[f64]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a += v;
    }
}

fn sum(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// No-U-turn check across a span whose end velocities are `sharp_minus`, `sharp_plus`.
fn no_u_turn(sharp_minus: &[f64], sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(sharp_plus, rho) > 0.0 && dot(sharp_minus, rho) > 0.0
}

struct TreeState {
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
}

impl<'t, T: LogDensity + ?Sized> Nuts<'t, T> {
    pub fn new(target: &'t T, rng: ChaCha8Rng, max_depth: usize) -> Self {
        Self {
            target,
            inv_metric: vec![1.0; target.dim()],
            step: 1.0,
            max_depth,
            rng,
        }
    }

    pub fn point_at(&self, q: Vec<f64>) -> PhasePoint {
        let mut grad = vec![0.0; q.len()];
        let logp = self.target.log_density_and_gradient(&q, &mut grad);
        PhasePoint {
            p: vec![0.0; q.len()],
            q,
            grad,
            logp,
        }
    }

    fn hamiltonian(&self, z: &PhasePoint) -> f64 {
        let kinetic: f64 = z.p.iter().zip(&self.inv_metric).map(|(p, m)| p * p * m).sum::<f64>() * 0.5;
        let h = kinetic - z.logp;
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn velocity(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.inv_metric).map(|(p, m)| p * m).collect()
    }

    fn sample_momentum(&mut self, z: &mut PhasePoint) {
        for (p, m) in z.p.iter_mut().zip(&self.inv_metric) {
            let n: f64 = self.rng.sample(StandardNormal);
            *p = n / m.sqrt();
        }
    }

    fn leapfrog(&self, z: &mut PhasePoint, eps: f64) {
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(&self.inv_metric) {
            *q += eps * m * p;
        }
        z.logp = self.target.log_density_and_gradient(&z.q, &mut z.grad);
        if !z.logp.is_finite() || z.grad.iter().any(|g| !g.is_finite()) {
            z.logp = f64::NEG_INFINITY;
            return;
        }
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
    }

    /// Heuristic initial step: double or halve until one leapfrog step's
    /// acceptance crosses 0.8. Returns false if no usable step exists.
    pub fn init_step_size(&mut self, z: &PhasePoint) -> bool {
        let log_08 = 0.8f64.ln();
        let trial = |this: &mut Self| {
            let mut w = z.clone();
            this.sample_momentum(&mut w);
            let h0 = this.hamiltonian(&w);
            this.leapfrog(&mut w, this.step);
            h0 - this.hamiltonian(&w)
        };
        let direction = if trial(self) > log_08 { 1 } else { -1 };
        loop {
            let delta_h = trial(self);
            if direction == 1 && !(delta_h > log_08) {
                break;
            }
            if direction == -1 && !(delta_h < log_08) {
                break;
            }
            if direction == 1 {
                self.step *= 2.0;
            } else {
                self.step *= 0.5;
            }
            if self.step > 1e7 || self.step == 0.0 {
                return false;
            }
        }
        true
    }

    /// One NUTS transition from `z`; `z` is replaced by the selected point.
    pub fn transition(&mut self, z: &mut PhasePoint) -> Transition {
        self.sample_momentum(z);
        let h0 = self.hamiltonian(z);

        let mut z_fwd = z.clone();
        let mut z_bwd = z.clone();
        let mut z_sample = z.clone();

        let p0 = z.p.clone();
        let v0 = self.velocity(&z.p);
        let (mut p_fwd_bwd, mut p_fwd_fwd, mut p_bwd_fwd, mut p_bwd_bwd) = (p0.clone(), p0.clone(), p0.clone(), p0.clone());
        let (mut v_fwd_bwd, mut v_fwd_fwd, mut v_bwd_fwd, mut v_bwd_bwd) = (v0.clone(), v0.clone(), v0.clone(), v0);
        let mut rho = p0;

        let mut log_sum_weight = 0.0;
        let mut depth = 0;
        let mut state = TreeState {
            n_leapfrog: 0,
            sum_metro_prob: 0.0,
            divergent: false,
        };

        while depth < self.max_depth {
            let dim = rho.len();
            let mut rho_fwd = vec![0.0; dim];
            let mut rho_bwd = vec![0.0; dim];
            let mut log_sum_weight_subtree = f64::NEG_INFINITY;
            let mut z_propose;

            let valid = if self.rng.random::<f64>() > 0.5 {
                rho_bwd.clone_from(&rho);
                p_bwd_fwd.clone_from(&p_fwd_bwd);
                v_bwd_fwd.clone_from(&v_fwd_bwd);
                let mut edge = z_fwd.clone();
                z_propose = edge.clone();
                let ok = self.build_tree(
                    depth,
                    &mut edge,
                    &mut z_propose,
                    &mut v_fwd_bwd,
                    &mut v_fwd_fwd,
                    &mut rho_fwd,
                    &mut p_fwd_bwd,
                    &mut p_fwd_fwd,
                    h0,
                    1.0,
                    &mut log_sum_weight_subtree,
                    &mut state,
                );
                z_fwd = edge;
                ok
            } else {
                rho_fwd.clone_from(&rho);
                p_fwd_bwd.clone_from(&p_bwd_fwd);
                v_fwd_bwd.clone_from(&v_bwd_fwd);
                let mut edge = z_bwd.clone();
                z_propose = edge.clone();
                let ok = self.build_tree(
                    depth,
                    &mut edge,
                    &mut z_propose,
                    &mut v_bwd_fwd,
                    &mut v_bwd_bwd,
                    &mut rho_bwd,
                    &mut p_bwd_fwd,
                    &mut p_bwd_bwd,
                    h0,
                    -1.0,
                    &mut log_sum_weight_subtree,
                    &mut state,
                );
                z_bwd = edge;
                ok
            };

            if !valid {
                break;
            }
            depth += 1;

            if log_sum_weight_subtree > log_sum_weight {
                z_sample = z_propose;
            } else {
                let accept = (log_sum_weight_subtree - log_sum_weight).exp();
                if self.rng.random::<f64>() < accept {
                    z_sample = z_propose;
                }
            }
            log_sum_weight = log_add_exp(log_sum_weight, log_sum_weight_subtree);

            rho = sum(&rho_bwd, &rho_fwd);
            let mut persist = no_u_turn(&v_bwd_bwd, &v_fwd_fwd, &rho);
            let rho_ext = sum(&rho_bwd, &p_fwd_bwd);
            persist &= no_u_turn(&v_bwd_bwd, &v_fwd_bwd, &rho_ext);
            let rho_ext = sum(&rho_fwd, &p_bwd_fwd);
            persist &= no_u_turn(&v_bwd_fwd, &v_fwd_fwd, &rho_ext);
            if !persist {
                break;
            }
        }

        *z = z_sample;
        Transition {
            accept_stat: if state.n_leapfrog > 0 {
                state.sum_metro_prob / state.n_leapfrog as f64
            } else {
                0.0
            },
            divergent: state.divergent,
            depth,
            n_leapfrog: state.n_leapfrog,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn build_tree(
        &mut self,
        depth: usize,
        z: &mut PhasePoint,
        z_propose: &mut PhasePoint,
        v_beg: &mut Vec<f64>,
        v_end: &mut Vec<f64>,
        rho: &mut [f64],
        p_beg: &mut Vec<f64>,
        p_end: &mut Vec<f64>,
        h0: f64,
        sign: f64,
        log_sum_weight: &mut f64,
        state: &mut TreeState,
    ) -> bool {
        if depth == 0 {
            self.leapfrog(z, sign * self.step);
            state.n_leapfrog += 1;
            let h = self.hamiltonian(z);
            if h - h0 > MAX_DELTA_H {
                state.divergent = true;
            }
            *log_sum_weight = log_add_exp(*log_sum_weight, h0 - h);
            state.sum_metro_prob += if h0 - h > 0.0 { 1.0 } else { (h0 - h).exp() };
            z_propose.clone_from(z);
            *v_beg = self.velocity(&z.p);
            v_end.clone_from(v_beg);
            add_assign(rho, &z.p);
            p_beg.clone_from(&z.p);
            p_end.clone_from(&z.p);
            return !state.divergent;
        }

        let dim = rho.len();
        let mut log_sum_weight_init = f64::NEG_INFINITY;
        let mut p_init_end = vec![0.0; dim];
        let mut v_init_end = vec![0.0; dim];
        let mut rho_init = vec![0.0; dim];
        let valid_init = self.build_tree(
            depth - 1,
            z,
            z_propose,
            v_beg,
            &mut v_init_end,
            &mut rho_init,
            p_beg,
            &mut p_init_end,
            h0,
            sign,
            &mut log_sum_weight_init,
            state,
        );
        if !valid_init {
            return false;
        }

        let mut z_propose_final = z.clone();
        let mut log_sum_weight_final = f64::NEG_INFINITY;
        let mut p_final_beg = vec![0.0; dim];
        let mut v_final_beg = vec![0.0; dim];
        let mut rho_final = vec![0.0; dim];
        let valid_final = self.build_tree(
            depth - 1,
            z,
            &mut z_propose_final,
            &mut v_final_beg,
            v_end,
            &mut rho_final,
            &mut p_final_beg,
            p_end,
            h0,
            sign,
            &mut log_sum_weight_final,
            state,
        );
        if !valid_final {
            return false;
        }

        let log_sum_weight_subtree = log_add_exp(log_sum_weight_init, log_sum_weight_final);
        *log_sum_weight = log_add_exp(*log_sum_weight, log_sum_weight_subtree);
        if log_sum_weight_final > log_sum_weight_subtree {
            *z_propose = z_propose_final;
        } else {
            let accept = (log_sum_weight_final - log_sum_weight_subtree).exp();
            if self.rng.random::<f64>() < accept {
                *z_propose = z_propose_final;
            }
        }

        let rho_subtree = sum(&rho_init, &rho_final);
        add_assign(rho, &rho_subtree);
        let mut persist = no_u_turn(v_beg, v_end, &rho_subtree);
        let rho_ext = sum(&rho_init, &p_final_beg);
        persist &= no_u_turn(v_beg, &v_final_beg, &rho_ext);
        let rho_ext = sum(&rho_final, &p_init_end);
        persist &= no_u_turn(&v_init_end, v_end, &rho_ext);
        persist
    }
}
