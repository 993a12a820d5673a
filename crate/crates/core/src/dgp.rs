//! Simulation of VECM and common-factor data generating processes.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Integration, Panel};
use crate::rng::{self, Rng};

/// One-time scale shift of the innovation standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceBreak {
    /// First retained row (0-based) with the new scale.
    pub at: usize,
    /// Multiplier applied to the innovation standard deviation.
    pub scale: f64,
}

/// Parameters of `Δζ_t = A B' ζ_{t-1} + Σ_j Φ_j Δζ_{t-j} + ε_t`, `z_t = μ + τ t + ζ_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VecmParams {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub phi: Vec<DMatrix<f64>>,
    pub mu: DVector<f64>,
    pub tau: DVector<f64>,
    pub sigma: DMatrix<f64>,
    #[serde(default)]
    pub variance_break: Option<VarianceBreak>,
    /// Added to the stochastic state at the first retained observation.
    #[serde(default)]
    pub initial_offset: Option<DVector<f64>>,
}

impl VecmParams {
    pub fn n(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    pub fn lags(&self) -> usize {
        self.phi.len()
    }

    /// `N` independent standard Gaussian random walks.
    pub fn random_walks(n: usize) -> Self {
        VecmParams {
            a: DMatrix::zeros(n, 0),
            b: DMatrix::zeros(n, 0),
            phi: Vec::new(),
            mu: DVector::zeros(n),
            tau: DVector::zeros(n),
            sigma: DMatrix::identity(n, n),
            variance_break: None,
            initial_offset: None,
        }
    }

    /// Rank-`r` system with Gaussian `B` and `A = -speed B (B'B)^{-1}`, so that
    /// `B'A = -speed I`; `speed` in `(0, 2)` keeps the error correction stable.
    pub fn random_cointegrated(n: usize, r: usize, speed: f64, seed: u64) -> Result<Self> {
        if r > n {
            return Err(Error::param(format!("rank {r} exceeds N = {n}")));
        }
        if !(speed > 0.0 && speed < 2.0) {
            return Err(Error::param(format!("adjustment speed {speed} outside (0, 2)")));
        }
        let mut rng = rng::substream(seed, &[rng::stream::SIMULATE, 0xB]);
        let b = gaussian_matrix(&mut rng, n, r);
        let a = if r > 0 {
            let inv = (b.transpose() * &b)
                .try_inverse()
                .ok_or_else(|| Error::numerical("drawn cointegrating matrix is rank deficient"))?;
            &b * inv * -speed
        } else {
            DMatrix::zeros(n, 0)
        };
        Ok(VecmParams { a, b, ..VecmParams::random_walks(n) })
    }

    /// Independent series, each either a stationary AR(1) with coefficient `rho`
    /// (flag false) or a random walk (flag true).
    pub fn mixed_ar_rw(unit_root: &[bool], rho: f64) -> Self {
        let n = unit_root.len();
        let stationary: Vec<usize> = (0..n).filter(|&i| !unit_root[i]).collect();
        let r = stationary.len();
        let mut a = DMatrix::zeros(n, r);
        let mut b = DMatrix::zeros(n, r);
        for (c, &i) in stationary.iter().enumerate() {
            a[(i, c)] = rho - 1.0;
            b[(i, c)] = 1.0;
        }
        VecmParams {
            a,
            b,
            ..VecmParams::random_walks(n)
        }
    }

    /// Matrices `Ψ_1..Ψ_{p+1}` of the equivalent levels VAR `ζ_t = Σ Ψ_j ζ_{t-j} + ε_t`.
    pub fn levels_var(&self) -> Vec<DMatrix<f64>> {
        let n = self.n();
        let p = self.lags();
        let pi = &self.a * self.b.transpose();
        let mut psi = Vec::with_capacity(p + 1);
        let eye = DMatrix::<f64>::identity(n, n);
        for j in 1..=p + 1 {
            let mut m = DMatrix::zeros(n, n);
            if j == 1 {
                m += &eye + &pi;
            }
            if j <= p {
                m += &self.phi[j - 1];
            }
            if j >= 2 {
                m -= &self.phi[j - 2];
            }
            psi.push(m);
        }
        psi
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        let r = self.rank();
        if self.sigma.ncols() != n {
            return Err(Error::param("Sigma must be square"));
        }
        if self.a.nrows() != n || self.b.nrows() != n || self.b.ncols() != r {
            return Err(Error::param("A and B must both be N x r"));
        }
        if self.mu.len() != n || self.tau.len() != n {
            return Err(Error::param("mu and tau must have length N"));
        }
        if self.phi.iter().any(|m| m.shape() != (n, n)) {
            return Err(Error::param("every Phi_j must be N x N"));
        }
        if let Some(off) = &self.initial_offset {
            if off.len() != n {
                return Err(Error::param("initial offset must have length N"));
            }
        }
        if let Some(vb) = &self.variance_break {
            if !(vb.scale > 0.0) {
                return Err(Error::param("variance break scale must be positive"));
            }
        }
        if (&self.sigma - self.sigma.transpose()).amax() > 1e-10 * (1.0 + self.sigma.amax())
            || self.sigma.clone().cholesky().is_none()
        {
            return Err(Error::param("Sigma is not symmetric positive definite"));
        }
        if r > 0 {
            if numerical_rank(&self.a) != r {
                return Err(Error::param(format!("rank(A) != r = {r}")));
            }
            if numerical_rank(&self.b) != r {
                return Err(Error::param(format!("rank(B) != r = {r}")));
            }
        }
        let diag = check_i1_conditions(self);
        if !diag.pass {
            return Err(Error::param(format!(
                "I(1) condition violated: {} unit roots (expected {}), largest other modulus {:.6}",
                diag.unit_roots,
                n - r,
                diag.max_other_modulus
            )));
        }
        Ok(())
    }
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > 1e-10 * max.max(1e-300)).count()
}

/// Result of the companion-matrix root check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct I1Diagnostics {
    /// Moduli of the roots of `det C(z)` (reciprocals of nonzero companion eigenvalue moduli), ascending.
    pub root_moduli: Vec<f64>,
    /// Companion eigenvalues within 1e-6 of one.
    pub unit_roots: usize,
    /// Largest companion eigenvalue modulus among the non-unit eigenvalues.
    pub max_other_modulus: f64,
    pub pass: bool,
}

/// Count unit roots of the lag polynomial via the levels-VAR companion matrix.
pub fn check_i1_conditions(params: &VecmParams) -> I1Diagnostics {
    let n = params.n();
    let psi = params.levels_var();
    let m = psi.len();
    let dim = n * m;
    let mut comp = DMatrix::zeros(dim, dim);
    for (j, pj) in psi.iter().enumerate() {
        comp.view_mut((0, j * n), (n, n)).copy_from(pj);
    }
    for i in n..dim {
        comp[(i, i - n)] = 1.0;
    }
    let eig = companion_eigenvalues(comp);
    let mut unit_roots = 0;
    let mut max_other: f64 = 0.0;
    let mut root_moduli = Vec::new();
    for z in eig.iter() {
        let modulus = z.norm();
        if (z - nalgebra::Complex::new(1.0, 0.0)).norm() < 1e-6 {
            unit_roots += 1;
        } else {
            max_other = max_other.max(modulus);
        }
        if modulus > 1e-12 {
            root_moduli.push(1.0 / modulus);
        }
    }
    root_moduli.sort_by(f64::total_cmp);
    let r = params.rank();
    I1Diagnostics {
        pass: unit_roots == n - r && max_other < 1.0 - 1e-9,
        root_moduli,
        unit_roots,
        max_other_modulus: max_other,
    }
}

fn companion_eigenvalues(comp: DMatrix<f64>) -> Vec<nalgebra::Complex<f64>> {
    let dim = comp.nrows();
    match nalgebra::linalg::Schur::try_new(comp.clone(), 1e-15, 2000 * dim.max(1)) {
        Some(s) => s.complex_eigenvalues().iter().copied().collect(),
        None => {
            // QR sweeps can stall on exactly repeated eigenvalues; a similarity
            // transform with a generic orthogonal matrix breaks the symmetry
            let q = DMatrix::from_fn(dim, dim, |i, j| ((i * 7 + j * 13 + 1) as f64).sin())
                .qr()
                .q();
            let rotated = q.transpose() * comp * &q;
            nalgebra::linalg::Schur::try_new(rotated, 1e-15, 20000 * dim.max(1))
                .map(|s| s.complex_eigenvalues().iter().copied().collect())
                .unwrap_or_default()
        }
    }
}

/// Output of [`simulate_vecm`].
#[derive(Debug, Clone)]
pub struct SimulatedVecm {
    pub panel: Panel,
    /// Innovations of every simulated period including burn-in, `(burn_in + T) x N`.
    pub innovations: DMatrix<f64>,
}

fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Simulate `T` observations after `burn_in` discarded periods.
pub fn simulate_vecm(params: &VecmParams, t: usize, burn_in: usize, seed: u64) -> Result<SimulatedVecm> {
    params.validate()?;
    let n = params.n();
    if t < n + params.lags() + 2 {
        return Err(Error::param(format!(
            "T = {t} is below N + p + 2 = {}",
            n + params.lags() + 2
        )));
    }
    let total = burn_in + t;
    let mut rng = rng::substream(seed, &[rng::stream::SIMULATE]);
    let chol = params.sigma.clone().cholesky().expect("validated SPD");
    let raw = gaussian_matrix(&mut rng, total, n);
    let mut innovations = raw * chol.l().transpose();
    if let Some(vb) = params.variance_break {
        for row in (burn_in + vb.at.min(t))..total {
            for j in 0..n {
                innovations[(row, j)] *= vb.scale;
            }
        }
    }
    let values = replay_vecm(params, &innovations, burn_in)?;
    let panel = Panel::from_matrix(values)?;
    Ok(SimulatedVecm { panel, innovations })
}

/// Run the recursion on given innovations and return the retained levels `T x N`.
pub fn replay_vecm(params: &VecmParams, innovations: &DMatrix<f64>, burn_in: usize) -> Result<DMatrix<f64>> {
    let n = params.n();
    let p = params.lags();
    let total = innovations.nrows();
    if innovations.ncols() != n || total <= burn_in {
        return Err(Error::param("innovation matrix does not match the parameters"));
    }
    let pi = &params.a * params.b.transpose();
    // zeta[s] for s = 0..total; state zero before the first period
    let mut zeta = DMatrix::<f64>::zeros(total, n);
    let mut prev = DVector::<f64>::zeros(n);
    let mut dprev: Vec<DVector<f64>> = vec![DVector::zeros(n); p];
    for s in 0..total {
        if s == burn_in {
            if let Some(off) = &params.initial_offset {
                prev += off;
            }
        }
        let mut dz = &pi * &prev;
        for (j, phi) in params.phi.iter().enumerate() {
            dz += phi * &dprev[j];
        }
        dz += innovations.row(s).transpose();
        let cur = &prev + &dz;
        zeta.set_row(s, &cur.transpose());
        if p > 0 {
            dprev.rotate_right(1);
            dprev[0] = dz;
        }
        prev = cur;
    }
    let t = total - burn_in;
    Ok(DMatrix::from_fn(t, n, |i, j| {
        params.mu[j] + params.tau[j] * (i + 1) as f64 + zeta[(burn_in + i, j)]
    }))
}

/// Parameters of `z_t = μ + τ t + Λ f_t + u_t` with per-component I(0)/I(1) flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorDgpParams {
    pub lambda: DMatrix<f64>,
    /// True marks an I(1) factor.
    pub factor_i1: Vec<bool>,
    /// AR(1) coefficient of each I(0) factor.
    pub factor_ar: Vec<f64>,
    /// True marks an I(1) idiosyncratic component.
    pub idio_i1: Vec<bool>,
    /// AR(1) coefficient of each I(0) idiosyncratic component.
    pub idio_ar: Vec<f64>,
    /// Innovation standard deviation of each idiosyncratic component.
    pub idio_sd: Vec<f64>,
    pub mu: DVector<f64>,
    pub tau: DVector<f64>,
}

impl FactorDgpParams {
    fn validate(&self) -> Result<()> {
        let (n, k) = self.lambda.shape();
        if self.factor_i1.len() != k || self.factor_ar.len() != k {
            return Err(Error::param("factor flags and AR coefficients must have length k"));
        }
        if self.idio_i1.len() != n || self.idio_ar.len() != n || self.idio_sd.len() != n {
            return Err(Error::param("idiosyncratic flags, AR coefficients and scales must have length N"));
        }
        if self.mu.len() != n || self.tau.len() != n {
            return Err(Error::param("mu and tau must have length N"));
        }
        for (i, (&i1, &ar)) in self.factor_i1.iter().zip(&self.factor_ar).enumerate() {
            if !i1 && ar.abs() >= 1.0 {
                return Err(Error::param(format!("I(0) factor {i} has |AR| >= 1")));
            }
        }
        for (i, (&i1, &ar)) in self.idio_i1.iter().zip(&self.idio_ar).enumerate() {
            if !i1 && ar.abs() >= 1.0 {
                return Err(Error::param(format!("I(0) idiosyncratic component {i} has |AR| >= 1")));
            }
        }
        if self.idio_sd.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::param("idiosyncratic scales must be non-negative"));
        }
        Ok(())
    }
}

/// Output of [`simulate_factor_dgp`].
#[derive(Debug, Clone)]
pub struct SimulatedFactors {
    pub panel: Panel,
    /// `T x k` latent factors.
    pub factors: DMatrix<f64>,
    /// `T x N` idiosyncratic components.
    pub idio: DMatrix<f64>,
}

fn ar_or_walk(rng: &mut Rng, t: usize, unit_root: bool, ar: f64, sd: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(t);
    let mut x: f64 = if unit_root {
        0.0
    } else {
        // stationary start
        sd / (1.0 - ar * ar).sqrt() * rng.sample::<f64, _>(StandardNormal)
    };
    for s in 0..t {
        let e: f64 = sd * rng.sample::<f64, _>(StandardNormal);
        if unit_root {
            x += e;
        } else if s > 0 {
            x = ar * x + e;
        }
        out.push(x);
    }
    out
}

pub fn simulate_factor_dgp(params: &FactorDgpParams, t: usize, seed: u64) -> Result<SimulatedFactors> {
    params.validate()?;
    if t < 3 {
        return Err(Error::param("T must be at least 3"));
    }
    let (n, k) = params.lambda.shape();
    let mut rng = rng::substream(seed, &[rng::stream::SIMULATE, 0xFAC]);
    let mut factors = DMatrix::zeros(t, k);
    for j in 0..k {
        let path = ar_or_walk(&mut rng, t, params.factor_i1[j], params.factor_ar[j], 1.0);
        factors.set_column(j, &DVector::from_vec(path));
    }
    let mut idio = DMatrix::zeros(t, n);
    for i in 0..n {
        let path = ar_or_walk(&mut rng, t, params.idio_i1[i], params.idio_ar[i], params.idio_sd[i]);
        idio.set_column(i, &DVector::from_vec(path));
    }
    let common = &factors * params.lambda.transpose();
    let values = DMatrix::from_fn(t, n, |s, i| {
        params.mu[i] + params.tau[i] * (s + 1) as f64 + common[(s, i)] + idio[(s, i)]
    });
    Ok(SimulatedFactors {
        panel: Panel::from_matrix(values)?,
        factors,
        idio,
    })
}

/// Independent series of prescribed integration orders: I(0) series are AR(1)
/// with coefficient `rho`, I(1) are random walks, I(2) are cumulated random walks.
pub fn simulate_mixed_orders(
    orders: &[Integration],
    rho: f64,
    t: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Panel> {
    if rho.abs() >= 1.0 {
        return Err(Error::param("|rho| must be below one"));
    }
    let unit: Vec<bool> = orders.iter().map(|o| *o != Integration::I0).collect();
    let sim = simulate_vecm(&VecmParams::mixed_ar_rw(&unit, rho), t, burn_in, seed)?;
    let mut values = sim.panel.values().clone();
    for (j, o) in orders.iter().enumerate() {
        if *o == Integration::I2 {
            let mut acc = 0.0;
            for i in 0..t {
                acc += values[(i, j)];
                values[(i, j)] = acc;
            }
        }
    }
    Panel::from_matrix(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_rank_negative_identity_is_white_noise() {
        let n = 3;
        let params = VecmParams {
            a: -DMatrix::identity(n, n),
            b: DMatrix::identity(n, n),
            ..VecmParams::random_walks(n)
        };
        let sim = simulate_vecm(&params, 50, 10, 1).unwrap();
        for i in 0..50 {
            for j in 0..n {
                assert!((sim.panel.values()[(i, j)] - sim.innovations[(10 + i, j)]).abs() < 1e-12);
            }
        }
        let d = check_i1_conditions(&params);
        assert_eq!(d.unit_roots, 0);
        assert!(d.pass);
    }

    #[test]
    fn rank_zero_is_random_walk() {
        let params = VecmParams::random_walks(2);
        let sim = simulate_vecm(&params, 40, 0, 3).unwrap();
        let v = sim.panel.values();
        for j in 0..2 {
            assert!((v[(0, j)] - sim.innovations[(0, j)]).abs() < 1e-15);
            for i in 1..40 {
                assert!((v[(i, j)] - v[(i - 1, j)] - sim.innovations[(i, j)]).abs() < 1e-12);
            }
        }
        let d = check_i1_conditions(&VecmParams::random_walks(1));
        assert_eq!(d.unit_roots, 1);
    }

    #[test]
    fn replay_is_bit_exact_and_seed_deterministic() {
        let mut params = VecmParams::mixed_ar_rw(&[true, false, true], 0.4);
        params.phi = vec![DMatrix::from_diagonal_element(3, 3, 0.2)];
        params.tau = DVector::from_vec(vec![0.1, 0.0, -0.05]);
        let a = simulate_vecm(&params, 80, 50, 9).unwrap();
        let b = simulate_vecm(&params, 80, 50, 9).unwrap();
        assert_eq!(a.panel, b.panel);
        let replay = replay_vecm(&params, &a.innovations, 50).unwrap();
        assert_eq!(&replay, a.panel.values());
    }

    #[test]
    fn invalid_params_name_condition() {
        let mut params = VecmParams::random_walks(2);
        params.a = DMatrix::from_row_slice(2, 1, &[0.5, 0.0]);
        params.b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        // explosive root 1.5
        let err = simulate_vecm(&params, 50, 0, 1).unwrap_err();
        assert!(err.to_string().contains("I(1) condition"));
        let mut bad = VecmParams::random_walks(2);
        bad.sigma[(0, 1)] = 5.0;
        bad.sigma[(1, 0)] = 5.0;
        assert!(simulate_vecm(&bad, 50, 0, 1).unwrap_err().to_string().contains("Sigma"));
    }

    #[test]
    fn random_admissible_params_have_n_minus_r_unit_roots() {
        use rand::SeedableRng;
        let mut rng = Rng::seed_from_u64(11);
        for trial in 0..20 {
            let n = 4;
            let r = trial % 4;
            let b = gaussian_matrix(&mut rng, n, r);
            // A = -0.3 * B (B'B)^{-1} gives B'A = -0.3 I: stable error correction
            let btb = b.transpose() * &b;
            let a = if r > 0 {
                &b * btb.try_inverse().unwrap() * -0.3
            } else {
                DMatrix::zeros(n, 0)
            };
            let params = VecmParams {
                a,
                b,
                phi: vec![DMatrix::from_diagonal_element(n, n, 0.1)],
                ..VecmParams::random_walks(n)
            };
            let d = check_i1_conditions(&params);
            assert_eq!(d.unit_roots, n - r, "trial {trial}");
            assert!(d.pass);
        }
    }

    #[test]
    fn random_cointegrated_is_admissible() {
        for r in 0..=3 {
            let p = VecmParams::random_cointegrated(5, r, 0.5, 7).unwrap();
            assert_eq!(p.rank(), r);
            assert_eq!(check_i1_conditions(&p).unit_roots, 5 - r);
        }
        assert!(VecmParams::random_cointegrated(3, 4, 0.5, 1).is_err());
    }

    #[test]
    fn cointegrating_residual_variance_does_not_grow() {
        let params = VecmParams {
            a: DMatrix::from_row_slice(2, 1, &[-0.5, 0.0]),
            b: DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            ..VecmParams::random_walks(2)
        };
        let mut early = (0.0, 0.0);
        let mut late = (0.0, 0.0);
        let reps = 200;
        for s in 0..reps {
            let sim = simulate_vecm(&params, 400, 0, s).unwrap();
            let v = sim.panel.values();
            let ec = |i: usize| v[(i, 0)] - v[(i, 1)];
            early.0 += ec(49).powi(2);
            late.0 += ec(399).powi(2);
            early.1 += v[(49, 1)].powi(2);
            late.1 += v[(399, 1)].powi(2);
        }
        // stationary combination: ratio near 1; random walk component: ratio near 8
        let ratio_ec = late.0 / early.0;
        let ratio_rw = late.1 / early.1;
        assert!(ratio_ec < 2.0, "ec ratio {ratio_ec}");
        assert!(ratio_rw > 4.0, "rw ratio {ratio_rw}");
    }

    #[test]
    fn burn_in_forgets_stationary_initial_state() {
        // state offset decays as 0.5^burn
        let params = VecmParams {
            initial_offset: None,
            ..VecmParams::mixed_ar_rw(&[false], 0.5)
        };
        let mut inn = DMatrix::zeros(260, 1);
        inn[(0, 0)] = 1.0;
        let out = replay_vecm(&params, &inn, 200).unwrap();
        assert!(out[(0, 0)].abs() < 1e-8);
    }

    #[test]
    fn factor_dgp_identity_and_degenerate_cases() {
        let n = 4;
        let params = FactorDgpParams {
            lambda: DMatrix::from_column_slice(n, 1, &[1.0, 2.0, -1.0, 0.5]),
            factor_i1: vec![true],
            factor_ar: vec![0.0],
            idio_i1: vec![false; n],
            idio_ar: vec![0.3; n],
            idio_sd: vec![0.0; n],
            mu: DVector::from_element(n, 1.0),
            tau: DVector::zeros(n),
        };
        let sim = simulate_factor_dgp(&params, 30, 5).unwrap();
        let v = sim.panel.values();
        for s in 0..30 {
            // perfect pairwise cointegration: z2 - 2 z1 is constant
            let comb = (v[(s, 1)] - 1.0) - 2.0 * (v[(s, 0)] - 1.0);
            assert!(comb.abs() < 1e-12);
            for i in 0..n {
                let rebuilt = 1.0 + params.lambda[(i, 0)] * sim.factors[(s, 0)] + sim.idio[(s, i)];
                assert_eq!(v[(s, i)], rebuilt);
            }
        }
        let zero = FactorDgpParams {
            lambda: DMatrix::zeros(n, 1),
            idio_sd: vec![1.0; n],
            ..params
        };
        let sim = simulate_factor_dgp(&zero, 30, 5).unwrap();
        for s in 0..30 {
            for i in 0..n {
                assert_eq!(sim.panel.values()[(s, i)], 1.0 + sim.idio[(s, i)]);
            }
        }
    }

    #[test]
    fn mixed_orders_shapes() {
        let orders = [Integration::I0, Integration::I1, Integration::I2];
        let p = simulate_mixed_orders(&orders, 0.5, 100, 50, 2).unwrap();
        assert_eq!(p.nseries(), 3);
        assert!(p.is_balanced());
    }
}
