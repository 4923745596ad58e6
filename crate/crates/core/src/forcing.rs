//! The power-law normalization `λ(s) = B/s^β`, its antiderivative, the
//! stationary volume and the shape energy `J = Per − Λ(|E|)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{area, perimeter, StarShape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawSpec", into = "LawSpec")]
pub struct ForcingLaw {
    b: f64,
    beta: f64,
    n: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LawSpec {
    #[serde(rename = "B")]
    b: f64,
    beta: f64,
    n: u32,
}

impl TryFrom<LawSpec> for ForcingLaw {
    type Error = Error;
    fn try_from(s: LawSpec) -> Result<Self> {
        ForcingLaw::new(s.b, s.beta, s.n)
    }
}

impl From<ForcingLaw> for LawSpec {
    fn from(l: ForcingLaw) -> Self {
        LawSpec {
            b: l.b,
            beta: l.beta,
            n: l.n,
        }
    }
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: u32) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * PI / n as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyValue {
    pub perimeter_term: f64,
    pub potential_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub pass: bool,
    /// Root of `λ(|B_{5ρ}|) = (n−1)/ρ`; the inequality holds exactly for `ρ < rho_max`.
    pub rho_max: f64,
}

impl ForcingLaw {
    pub fn new(b: f64, beta: f64, n: u32) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::param("B", "must be positive"));
        }
        if n < 2 {
            return Err(Error::param("n", "ambient dimension must be at least 2"));
        }
        if !(beta > 1.0 / n as f64 && beta.is_finite()) {
            return Err(Error::param("beta", format!("must exceed 1/n = {}", 1.0 / n as f64)));
        }
        Ok(Self { b, beta, n })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn unit_ball(&self) -> f64 {
        unit_ball_volume(self.n)
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    pub fn lambda(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::NonPositiveVolume(s));
        }
        Ok(self.b / s.powf(self.beta))
    }

    /// `λ′(s) = −β·B·s^{−β−1}`.
    pub fn lambda_prime(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::NonPositiveVolume(s));
        }
        Ok(-self.beta * self.b * s.powf(-self.beta - 1.0))
    }

    /// `λ̃(s) = s^{1/n}·λ(s)`.
    pub fn lambda_tilde(&self, s: f64) -> Result<f64> {
        Ok(s.powf(1.0 / self.nf()) * self.lambda(s)?)
    }

    /// `Λ` with `Λ′ = λ` and zero additive constant.
    pub fn antiderivative(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::NonPositiveVolume(s));
        }
        Ok(if self.beta == 1.0 {
            self.b * s.ln()
        } else {
            self.b * s.powf(1.0 - self.beta) / (1.0 - self.beta)
        })
    }

    /// `Λ(a + delta) − Λ(a)`, accurate when `|delta| ≪ a`.
    pub fn antiderivative_change(&self, a: f64, delta: f64) -> Result<f64> {
        if !(a > 0.0) || !(a + delta > 0.0) {
            return Err(Error::NonPositiveVolume(a.min(a + delta)));
        }
        let l = (delta / a).ln_1p();
        Ok(if self.beta == 1.0 {
            self.b * l
        } else {
            self.b / (1.0 - self.beta) * a.powf(1.0 - self.beta) * ((1.0 - self.beta) * l).exp_m1()
        })
    }

    /// `(s₀, R*)`: the volume where `λ̃(s₀) = (n−1)·w_n^{1/n}` and the radius of
    /// the ball with that volume.
    pub fn stationary_volume(&self) -> (f64, f64) {
        let n = self.nf();
        let wn = self.unit_ball();
        let s0 = (self.b / ((n - 1.0) * wn.powf(1.0 / n))).powf(n / (n * self.beta - 1.0));
        (s0, (s0 / wn).powf(1.0 / n))
    }

    pub fn stationary_radius(&self) -> f64 {
        self.stationary_volume().1
    }

    pub fn ball_volume(&self, r: f64) -> f64 {
        self.unit_ball() * r.powi(self.n as i32)
    }

    pub fn check_assumption_a(&self, rho: f64) -> Result<AssumptionCheck> {
        if !(rho > 0.0) {
            return Err(Error::param("rho", "must be positive"));
        }
        let n = self.nf();
        let rho_max = (self.b
            / ((n - 1.0) * (self.unit_ball() * 5f64.powf(n)).powf(self.beta)))
        .powf(1.0 / (n * self.beta - 1.0));
        let pass = self.lambda(self.ball_volume(5.0 * rho))? > (n - 1.0) / rho;
        Ok(AssumptionCheck { pass, rho_max })
    }

    pub fn energy(&self, shape: &StarShape) -> Result<EnergyValue> {
        let perimeter_term = perimeter(shape);
        let potential_term = self.antiderivative(area(shape))?;
        Ok(EnergyValue {
            perimeter_term,
            potential_term,
            total: perimeter_term - potential_term,
        })
    }

    /// `J(B_r)` in closed form, general `n`.
    pub fn ball_energy(&self, r: f64) -> Result<f64> {
        let n = self.nf();
        let per = n * self.unit_ball() * r.powf(n - 1.0);
        Ok(per - self.antiderivative(self.ball_volume(r))?)
    }

    /// `dJ(B_r)/dr = n·w_n^{1−1/n}·r^{n−2}·((n−1)·w_n^{1/n} − λ̃(w_n rⁿ))`.
    pub fn ball_energy_derivative(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::param("r", "must be positive"));
        }
        let n = self.nf();
        let wn = self.unit_ball();
        Ok(n * wn.powf(1.0 - 1.0 / n)
            * r.powf(n - 2.0)
            * ((n - 1.0) * wn.powf(1.0 / n) - self.lambda_tilde(self.ball_volume(r))?))
    }

    /// Largest volume compatible with `J(E) ≤ j0` under the isoperimetric
    /// inequality `Per(E) ≥ n·w_n^{1/n}·|E|^{(n−1)/n}`.
    pub fn isoperimetric_volume_bound(&self, j0: f64) -> Result<f64> {
        let n = self.nf();
        let c = n * self.unit_ball().powf(1.0 / n);
        let g = |v: f64| -> Result<f64> { Ok(c * v.powf((n - 1.0) / n) - self.antiderivative(v)? - j0) };
        // g → +∞ as v → ∞; start the bracket at the stationary volume, where J is minimal
        let (s0, _) = self.stationary_volume();
        let mut lo = s0;
        if g(lo)? > 0.0 {
            return Ok(lo);
        }
        let mut hi = 2.0 * lo;
        while g(hi)? <= 0.0 {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::param("j0", "no finite volume bound"));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid)? <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// Largest `a` with `λ(|B_{(5+a)ρ}|) > (n−1)/((1+a)ρ)` and `(1+a)ρ < inner0`:
    /// the ball `B_{(1+a)ρ}` the flow never uncovers.
    pub fn inner_confinement_radius(&self, rho: f64, inner0: f64) -> Result<f64> {
        let n = self.nf();
        let holds = |a: f64| -> Result<bool> {
            Ok(self.lambda(self.ball_volume((5.0 + a) * rho))? > (n - 1.0) / ((1.0 + a) * rho))
        };
        if !holds(0.0)? {
            return Err(Error::Hypothesis(format!(
                "λ(|B_5ρ|) ≤ (n−1)/ρ at ρ = {rho}"
            )));
        }
        let cap = inner0 / rho - 1.0;
        if cap <= 0.0 {
            return Err(Error::Hypothesis(format!("B_ρ not inside the initial set (ρ = {rho})")));
        }
        let (mut lo, mut hi) = (0.0, cap);
        if holds(hi)? {
            return Ok((1.0 + hi) * rho);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if holds(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((1.0 + lo) * rho)
    }

    /// Smallest `R` admitted by the outer barrier: some `r_* < R` with
    /// `|B_{r_*}| > s₀`, `R ≥ outer0`, `|B_{R−4ρ}| > s₀` and
    /// `4ρ(n−1)/R < (n−1) − r_*·λ(|B_{r_*}|)`.
    pub fn outer_confinement_radius(&self, rho: f64, outer0: f64) -> Result<f64> {
        let n = self.nf();
        let (_, r_star) = self.stationary_volume();
        let mut best = f64::INFINITY;
        for j in 1..=4000 {
            let rs = r_star * (1.0 + 4.0 * j as f64 / 4000.0);
            let eps = (n - 1.0) - rs * self.lambda(self.ball_volume(rs))?;
            if eps <= 0.0 {
                continue;
            }
            let r = outer0
                .max(r_star + 4.0 * rho)
                .max(rs)
                .max(4.0 * rho * (n - 1.0) / eps)
                * (1.0 + 1e-9);
            best = best.min(r);
        }
        if best.is_finite() {
            Ok(best)
        } else {
            Err(Error::Hypothesis("no admissible outer barrier".into()))
        }
    }
}
