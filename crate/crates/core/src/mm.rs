//! Element design on the Lorentzian circle by majorization-minimization.
//!
//! With `q = (j 1 + q_hat) / 2` the element problem becomes a quadratic in a
//! unit-modulus vector, `(1/4) q_hat^H A_o q_hat - Re{c^T q_hat}` with
//! `c^T = b_o^T + (j/2) 1^T A_o`. Each step minimizes the linear majorizer
//! obtained from `lambda_max(A_o) I - A_o >= 0`, which has a closed-form
//! phase-only solution.

use num_complex::Complex64;

use crate::binary::ElementDesignProblem;
use crate::linalg::{self, cr, CMat, CVec, J};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 500;

/// `s q^H A q - Re{c^T q}` over `|q_m| = 1`.
#[derive(Debug, Clone)]
pub struct UnitModulusQuadratic {
    pub a: CMat,
    pub c: CVec,
    pub s: f64,
    pub lambda_max: f64,
}

impl UnitModulusQuadratic {
    pub fn new(a: CMat, c: CVec, s: f64) -> Self {
        let a = linalg::hermitian_part(&a);
        let lambda_max = linalg::lambda_max_hermitian(&a);
        Self {
            a,
            c,
            s,
            lambda_max,
        }
    }

    /// Lorentzian form of an element problem.
    pub fn lorentzian(p: &ElementDesignProblem) -> Self {
        let ones = CVec::from_element(p.elements(), cr(1.0));
        let c = &p.b_o + (p.a_o.transpose() * ones) * (J * 0.5);
        Self::new(p.a_o.clone(), c, 0.25)
    }

    /// The element problem itself restricted to unit-modulus responses.
    pub fn unit_modulus(p: &ElementDesignProblem) -> Self {
        Self::new(p.a_o.clone(), &p.b_o * cr(2.0), 1.0)
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn objective(&self, q: &CVec) -> f64 {
        self.s * q.dotc(&(&self.a * q)).re - self.c.dot(q).re
    }

    fn slack(&self) -> CMat {
        let mut b = -&self.a;
        for i in 0..b.nrows() {
            b[(i, i)] += cr(self.lambda_max);
        }
        b
    }

    /// `z` such that the majorizer at `q0` is `-Re{z^H q} + const`.
    pub fn linear_term(&self, q0: &CVec) -> CVec {
        (self.slack() * q0) * cr(2.0 * self.s) + self.c.conjugate()
    }

    /// Majorizer of the objective built at `q0`, evaluated at `q`.
    pub fn surrogate(&self, q: &CVec, q0: &CVec) -> f64 {
        let b = self.slack();
        let m = self.dim() as f64;
        let constant = self.s * (self.lambda_max * m + q0.dotc(&(&b * q0)).re);
        constant - self.linear_term(q0).dotc(q).re
    }

    /// One majorize-minimize update from `q0`.
    pub fn step(&self, q0: &CVec) -> CVec {
        let z = self.linear_term(q0);
        CVec::from_fn(self.dim(), |m, _| {
            if z[m].norm() > 0.0 {
                Complex64::from_polar(1.0, z[m].arg())
            } else {
                q0[m]
            }
        })
    }

    pub fn solve(&self, q_init: &CVec, tol: f64, max_iters: usize) -> MmOutcome {
        let mut q = q_init.map(|z| {
            if z.norm() > 0.0 {
                z / z.norm()
            } else {
                cr(1.0)
            }
        });
        let mut f = self.objective(&q);
        let mut trace = vec![f];
        let mut converged = false;
        for _ in 0..max_iters {
            let next = self.step(&q);
            let fn_ = self.objective(&next);
            trace.push(fn_);
            let change = (f - fn_).abs();
            q = next;
            f = fn_;
            if change < tol * (1.0 + f.abs()) {
                converged = true;
                break;
            }
        }
        MmOutcome {
            q_hat: q,
            objective: f,
            iterations: trace.len() - 1,
            trace,
            converged,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MmOutcome {
    /// Unit-modulus iterate.
    pub q_hat: CVec,
    pub objective: f64,
    /// Objective before the first step and after each step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl MmOutcome {
    /// Element responses `(j + q_hat) / 2` on the Lorentzian circle.
    pub fn lorentzian_response(&self) -> CVec {
        lorentzian_from_unit(&self.q_hat)
    }
}

pub fn lorentzian_from_unit(q_hat: &CVec) -> CVec {
    q_hat.map(|z| (z + J) * 0.5)
}

/// Inverse of [`lorentzian_from_unit`]; points off the circle are first
/// pushed radially onto it.
pub fn unit_from_lorentzian(q: &CVec) -> CVec {
    q.map(|z| {
        let u = z * 2.0 - J;
        if u.norm() > 0.0 {
            u / u.norm()
        } else {
            cr(1.0)
        }
    })
}

/// `(1/4) q_hat^H A_o q_hat - Re{(b_o^T + (j/2) 1^T A_o) q_hat}`.
pub fn mm_objective(q_hat: &CVec, p: &ElementDesignProblem) -> f64 {
    UnitModulusQuadratic::lorentzian(p).objective(q_hat)
}

pub fn mm_step(q_hat: &CVec, p: &ElementDesignProblem) -> CVec {
    UnitModulusQuadratic::lorentzian(p).step(q_hat)
}

/// Run MM to convergence from `q_init` (unit-modulus) with the default
/// tolerance and iteration budget.
pub fn mm_solve(p: &ElementDesignProblem, q_init: &CVec) -> MmOutcome {
    UnitModulusQuadratic::lorentzian(p).solve(q_init, DEFAULT_TOL, DEFAULT_MAX_ITERS)
}

/// Random unit-modulus vector, used for initial points and tests.
pub fn random_unit<R: rand::Rng + ?Sized>(m: usize, rng: &mut R) -> CVec {
    CVec::from_fn(m, |_, _| {
        Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(m: usize, seed: u64) -> ElementDesignProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMat::from_fn(m, m, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        ElementDesignProblem {
            a_o: &g * g.adjoint(),
            b_o: CVec::from_fn(m, |_, _| {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            }),
        }
    }

    #[test]
    fn null_form_is_zero() {
        let p = ElementDesignProblem {
            a_o: CMat::zeros(3, 3),
            b_o: CVec::zeros(3),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(mm_objective(&random_unit(3, &mut rng), &p), 0.0);
    }

    #[test]
    fn affine_agreement_with_element_objective() {
        let p = random_problem(3, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let diffs: Vec<f64> = (0..10)
            .map(|_| {
                let qh = random_unit(3, &mut rng);
                mm_objective(&qh, &p) - p.objective(&lorentzian_from_unit(&qh))
            })
            .collect();
        for d in &diffs {
            assert!((d - diffs[0]).abs() < 1e-12, "{diffs:?}");
        }
    }

    #[test]
    fn positive_real_z_gives_ones() {
        let u = UnitModulusQuadratic::new(
            CMat::zeros(2, 2),
            CVec::from_vec(vec![cr(1.0), cr(3.0)]),
            1.0,
        );
        let q = u.step(&CVec::from_vec(vec![J, -J]));
        assert!((q - CVec::from_element(2, cr(1.0))).camax() < 1e-15);
    }

    #[test]
    fn scaled_identity_converges_in_one_step() {
        let p = ElementDesignProblem {
            a_o: CMat::identity(3, 3) * cr(2.0),
            b_o: CVec::from_vec(vec![c(1.0, 1.0), c(-0.5, 0.2), c(0.0, -1.0)]),
        };
        let u = UnitModulusQuadratic::lorentzian(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q1 = u.step(&random_unit(3, &mut rng));
        let q2 = u.step(&q1);
        assert!((q1 - q2).camax() < 1e-14);
    }

    #[test]
    fn zero_z_keeps_previous_phase() {
        let u = UnitModulusQuadratic::new(
            CMat::zeros(2, 2),
            CVec::from_vec(vec![cr(0.0), cr(1.0)]),
            1.0,
        );
        let q0 = CVec::from_vec(vec![J, J]);
        let q = u.step(&q0);
        assert_eq!(q[0], J);
        assert!((q[1] - cr(1.0)).norm() < 1e-15);
    }

    #[test]
    fn null_quadratic_converges_immediately() {
        let p = ElementDesignProblem {
            a_o: CMat::zeros(2, 2),
            b_o: CVec::from_vec(vec![c(0.0, 1.0), c(-1.0, 0.0)]),
        };
        let out = mm_solve(&p, &CVec::from_element(2, cr(1.0)));
        assert!(out.iterations <= 2);
        let expect = p.b_o.conjugate().map(|z| z / z.norm());
        assert!((out.q_hat - expect).camax() < 1e-15);
    }

    #[test]
    fn output_lies_on_circle() {
        let p = random_problem(6, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = mm_solve(&p, &random_unit(6, &mut rng));
        for z in out.lorentzian_response().iter() {
            assert!(((z - J * 0.5).norm() - 0.5).abs() < 1e-12);
        }
        let back = unit_from_lorentzian(&out.lorentzian_response());
        assert!((back - &out.q_hat).camax() < 1e-12);
    }

    #[test]
    fn majorization_and_descent() {
        for seed in 0..30 {
            let p = random_problem(5, 100 + seed);
            let u = UnitModulusQuadratic::lorentzian(&p);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q0 = random_unit(5, &mut rng);
            let q = random_unit(5, &mut rng);
            let scale = 1.0 + u.objective(&q0).abs();
            assert!(u.surrogate(&q, &q0) >= u.objective(&q) - 1e-10 * scale);
            assert!((u.surrogate(&q0, &q0) - u.objective(&q0)).abs() <= 1e-10 * scale);
            let out = u.solve(&q0, 0.0, 50);
            for w in out.trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-10 * (1.0 + w[0].abs()));
            }
        }
    }

    #[test]
    fn slack_is_psd() {
        let p = random_problem(8, 5);
        let u = UnitModulusQuadratic::lorentzian(&p);
        let min = nalgebra::SymmetricEigen::new(u.slack()).eigenvalues.min();
        assert!(min >= -1e-8 * u.lambda_max);
    }
}
