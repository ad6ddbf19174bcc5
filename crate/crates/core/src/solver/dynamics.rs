//! Crank–Nicolson (average-acceleration Newmark) time stepping.

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

use super::{LinearSolver, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub qddot: Vec<f64>,
}

impl State {
    pub fn at_rest(n: usize) -> State {
        State { t: 0.0, q: vec![0.0; n], qdot: vec![0.0; n], qddot: vec![0.0; n] }
    }
}

/// How the boundary damping enters the update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DampingScheme {
    /// Damping force evaluated with the velocity at the start of the step.
    #[default]
    Explicit,
    /// Damping force averaged over the step like the inertia.
    Trapezoidal,
}

impl std::str::FromStr for DampingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(DampingScheme::Explicit),
            "trapezoidal" => Ok(DampingScheme::Trapezoidal),
            _ => Err(Error::Config(format!("unknown damping scheme '{s}' (explicit|trapezoidal)"))),
        }
    }
}

/// Integrator for `M q̈ + C q̇ + A q = L(t)` with diagonal `M`.
/// The step matrix is factored once.
pub struct CrankNicolson {
    stiffness: SparseMatrix,
    mass: Vec<f64>,
    damping: SparseMatrix,
    dt: f64,
    scheme: DampingScheme,
    solver: LinearSolver,
}

impl CrankNicolson {
    pub fn new(
        stiffness: SparseMatrix,
        mass: Vec<f64>,
        damping: SparseMatrix,
        dt: f64,
        scheme: DampingScheme,
        config: SolverConfig,
    ) -> Result<CrankNicolson> {
        if !(dt > 0.0) {
            return Err(Error::Config("time step must be positive".into()));
        }
        if mass.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::Solve("mass matrix has non-positive entries".into()));
        }
        let n = mass.len();
        if stiffness.nrows() != n || damping.nrows() != n {
            return Err(Error::DimensionMismatch("mass, damping and stiffness sizes differ".into()));
        }
        let m4: Vec<f64> = mass.iter().map(|m| 4.0 / (dt * dt) * m).collect();
        let mut k_eff = stiffness.add(&SparseMatrix::diagonal(&m4));
        if scheme == DampingScheme::Trapezoidal {
            k_eff = k_eff.linear_combination(1.0, &damping, 2.0 / dt);
        }
        let solver = LinearSolver::new(k_eff, config)?;
        Ok(CrankNicolson { stiffness, mass, damping, dt, scheme, solver })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Consistent start: `M q̈⁰ = L(0) − C q̇⁰ − A q⁰`.
    pub fn initial_state(&self, q: Vec<f64>, qdot: Vec<f64>, load: &[f64]) -> State {
        let cv = self.damping.matvec(&qdot);
        let aq = self.stiffness.matvec(&q);
        let qddot = (0..q.len()).map(|i| (load[i] - cv[i] - aq[i]) / self.mass[i]).collect();
        State { t: 0.0, q, qdot, qddot }
    }

    /// Advance one step given the load at the end of the step.
    pub fn step(&self, s: &State, load_next: &[f64]) -> Result<State> {
        let dt = self.dt;
        let n = s.q.len();
        let c4 = 4.0 / (dt * dt);
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| load_next[i] + self.mass[i] * (c4 * s.q[i] + 4.0 / dt * s.qdot[i] + s.qddot[i]))
            .collect();
        match self.scheme {
            DampingScheme::Explicit => {
                let cv = self.damping.matvec(&s.qdot);
                rhs.iter_mut().zip(&cv).for_each(|(r, c)| *r -= c);
            }
            DampingScheme::Trapezoidal => {
                let w: Vec<f64> = (0..n).map(|i| 2.0 / dt * s.q[i] + s.qdot[i]).collect();
                let cw = self.damping.matvec(&w);
                rhs.iter_mut().zip(&cw).for_each(|(r, c)| *r += c);
            }
        }
        let q = self.solver.solve(&rhs)?;
        let qddot: Vec<f64> = (0..n).map(|i| c4 * (q[i] - s.q[i] - dt * s.qdot[i]) - s.qddot[i]).collect();
        let qdot = (0..n).map(|i| s.qdot[i] + 0.5 * dt * (s.qddot[i] + qddot[i])).collect();
        Ok(State { t: s.t + dt, q, qdot, qddot })
    }

    /// Run `steps` steps; `observer` sees the initial state and every step.
    pub fn run(
        &self,
        initial: State,
        steps: usize,
        mut load: impl FnMut(f64) -> Vec<f64>,
        mut observer: impl FnMut(usize, &State) -> Result<()>,
    ) -> Result<State> {
        observer(0, &initial)?;
        let mut state = initial;
        for k in 1..=steps {
            let t = state.t + self.dt;
            state = self
                .step(&state, &load(t))
                .map_err(|e| Error::Step { step: k, source: Box::new(e) })?;
            if state.q.iter().any(|v| !v.is_finite()) {
                return Err(Error::Step { step: k, source: Box::new(Error::Solve("non-finite state".into())) });
            }
            observer(k, &state)?;
        }
        Ok(state)
    }

    /// ½ q̇ᵀ M q̇ + ½ qᵀ K q for a given symmetric `K`.
    pub fn energy(&self, s: &State, k: &SparseMatrix) -> f64 {
        let kin: f64 = s.qdot.iter().zip(&self.mass).map(|(v, m)| m * v * v).sum();
        let kq = k.matvec(&s.q);
        let pot: f64 = s.q.iter().zip(&kq).map(|(a, b)| a * b).sum();
        0.5 * (kin + pot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator_error(steps_per_period: usize) -> f64 {
        let (m, k) = (2.0, 8.0);
        let omega = (k / m as f64).sqrt();
        let period = 2.0 * std::f64::consts::PI / omega;
        let dt = period / steps_per_period as f64;
        let cn = CrankNicolson::new(
            SparseMatrix::diagonal(&[k]),
            vec![m],
            SparseMatrix::zeros(1, 1),
            dt,
            DampingScheme::Explicit,
            SolverConfig::default(),
        )
        .unwrap();
        let s0 = cn.initial_state(vec![1.0], vec![0.0], &[0.0]);
        let mut err: f64 = 0.0;
        cn.run(s0, 4 * steps_per_period, |_| vec![0.0], |_, s| {
            err = err.max((s.q[0] - (omega * s.t).cos()).abs());
            Ok(())
        })
        .unwrap();
        err
    }

    #[test]
    fn harmonic_oscillator_is_second_order() {
        let e1 = oscillator_error(50);
        let e2 = oscillator_error(100);
        let ratio = e1 / e2;
        assert!((3.4..=4.6).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn zero_load_stays_zero() {
        let cn = CrankNicolson::new(
            SparseMatrix::diagonal(&[1.0, 2.0]),
            vec![1.0, 1.0],
            SparseMatrix::diagonal(&[0.5, 0.0]),
            0.1,
            DampingScheme::Explicit,
            SolverConfig::default(),
        )
        .unwrap();
        let end = cn.run(State::at_rest(2), 20, |_| vec![0.0; 2], |_, _| Ok(())).unwrap();
        assert_eq!(end.q, vec![0.0, 0.0]);
    }

    #[test]
    fn undamped_energy_is_conserved() {
        let k = SparseMatrix::from_triplets(2, 2, &[(0, 0, 3.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)]);
        let cn = CrankNicolson::new(k.clone(), vec![1.0, 0.5], SparseMatrix::zeros(2, 2), 0.05, DampingScheme::Explicit, SolverConfig::default()).unwrap();
        let s0 = cn.initial_state(vec![0.3, -0.2], vec![0.1, 0.0], &[0.0, 0.0]);
        let e0 = cn.energy(&s0, &k);
        let mut drift: f64 = 0.0;
        cn.run(s0, 1000, |_| vec![0.0; 2], |_, s| {
            drift = drift.max((cn.energy(s, &k) - e0).abs() / e0);
            Ok(())
        })
        .unwrap();
        assert!(drift < 1e-10, "{drift}");
    }

    #[test]
    fn trapezoidal_damping_dissipates() {
        let k = SparseMatrix::diagonal(&[4.0]);
        let cn = CrankNicolson::new(k.clone(), vec![1.0], SparseMatrix::diagonal(&[0.4]), 0.01, DampingScheme::Trapezoidal, SolverConfig::default()).unwrap();
        let s0 = cn.initial_state(vec![1.0], vec![0.0], &[0.0]);
        let e0 = cn.energy(&s0, &k);
        let end = cn.run(s0, 500, |_| vec![0.0], |_, _| Ok(())).unwrap();
        assert!(cn.energy(&end, &k) < 0.5 * e0);
    }
}
