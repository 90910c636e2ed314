//! Closed-form query-complexity bounds, planted-query concentration bounds,
//! the hypergeometric tail bound, a Monte Carlo estimate of the chi-square
//! between the observed null and planted laws, and the phase classifier.

use std::fmt;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergences::{self, bernoulli_kl_nats, binom2, ln_choose, BernPair, LogBase};
use crate::error::{Error, Result};
use crate::oracle::{Pair, PairMap};
use crate::seed::{self, tag};
use crate::strategies::NonAdaptivePlan;

/// Inputs to [`query_complexity_bounds`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: u64,
    pub k: u64,
    pub p: f64,
    pub q: f64,
    /// Slack ε in `[0, 2)`; 0 gives the limiting constant 2.
    pub epsilon: f64,
    /// Adaptive confidence δ in `(0, 1]`.
    pub delta: f64,
    /// Constant multiplying the chi-square form of the scan condition.
    pub c_const: f64,
    /// Hidden constant of the degree-test budget.
    pub degree_const: f64,
    /// Slack ε₀ of the minimum planted size.
    pub epsilon0: f64,
    pub log_base: LogBase,
}

impl BoundInputs {
    pub fn new(n: u64, k: u64, p: f64, q: f64) -> Self {
        Self {
            n,
            k,
            p,
            q,
            epsilon: 0.0,
            delta: 0.5,
            c_const: 8.0,
            degree_const: 1.0,
            epsilon0: 0.0,
            log_base: LogBase::Natural,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub chi_square: f64,
    pub kl: f64,
    /// Non-adaptive impossibility threshold `(2−ε)·n²/(k²χ⁴)·log²(n/k)`.
    pub statistical_lower_q: f64,
    /// Same threshold with `log² n` in place of `log²(n/k)`, reported when
    /// the two differ by more than 1%.
    pub statistical_lower_q_log_n: Option<f64>,
    /// Adaptive impossibility threshold, `δ` times the non-adaptive one.
    pub adaptive_lower_q: f64,
    /// Scan sufficiency `(2+ε)·n²/(k²·d_KL²)·log²(n/k)`.
    pub scan_sufficient_q: f64,
    /// Scan sufficiency in chi-square form, `(2+ε)·C·n²/(k²χ⁴)·log²(n/k)`.
    pub scan_sufficient_q_chi: f64,
    /// Degree-test budget `c·n³/k³·log³ n / χ²`.
    pub degree_sufficient_q: f64,
    /// Minimum planted size `(2+ε₀)·log n / d_KL`.
    pub min_k: f64,
}

impl BoundReport {
    /// `(label, value)` rows for tabular output.
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        let mut rows = vec![
            ("chi_square", self.chi_square),
            ("kl", self.kl),
            ("statistical_lower_q", self.statistical_lower_q),
        ];
        if let Some(v) = self.statistical_lower_q_log_n {
            rows.push(("statistical_lower_q_log_n", v));
        }
        rows.extend([
            ("adaptive_lower_q", self.adaptive_lower_q),
            ("scan_sufficient_q", self.scan_sufficient_q),
            ("scan_sufficient_q_chi", self.scan_sufficient_q_chi),
            ("degree_sufficient_q", self.degree_sufficient_q),
            ("min_k", self.min_k),
        ]);
        rows
    }
}

pub fn query_complexity_bounds(inputs: &BoundInputs) -> Result<BoundReport> {
    let BoundInputs { n, k, p, q, epsilon, delta, c_const, degree_const, epsilon0, log_base } = *inputs;
    let pair = BernPair::new(p, q)?;
    if q >= p {
        return Err(Error::Domain(format!("need q < p, got p = {p}, q = {q}")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("need q in (0, 1), got {q}")));
    }
    if !(0.0..2.0).contains(&epsilon) {
        return Err(Error::Domain(format!("epsilon = {epsilon} outside [0, 2)")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!("delta = {delta} outside (0, 1]")));
    }
    if !(k >= 1 && k <= n && n >= 2) {
        return Err(Error::Domain(format!("need 1 <= k <= n and n >= 2, got n = {n}, k = {k}")));
    }
    if !(c_const > 0.0 && degree_const > 0.0 && epsilon0 >= 0.0) {
        return Err(Error::Domain("constants must be positive".into()));
    }

    let chi2 = divergences::chi_square(&pair.to_pair())?;
    let kl = divergences::kl(&pair.to_pair(), log_base)?;
    let (nf, kf) = (n as f64, k as f64);
    let ratio2 = (nf / kf).powi(2);
    let log_nk2 = log_base.log(nf / kf).powi(2);
    let log_n = log_base.log(nf);
    let chi4 = chi2 * chi2;

    let statistical = (2.0 - epsilon) * ratio2 / chi4 * log_nk2;
    let with_log_n = (2.0 - epsilon) * ratio2 / chi4 * log_n * log_n;
    let differs = (with_log_n - statistical).abs() > 0.01 * statistical.abs().max(f64::MIN_POSITIVE);

    Ok(BoundReport {
        inputs: *inputs,
        chi_square: chi2,
        kl,
        statistical_lower_q: statistical,
        statistical_lower_q_log_n: differs.then_some(with_log_n),
        adaptive_lower_q: delta * statistical,
        scan_sufficient_q: (2.0 + epsilon) * ratio2 / (kl * kl) * log_nk2,
        scan_sufficient_q_chi: (2.0 + epsilon) * c_const * ratio2 / chi4 * log_nk2,
        degree_sufficient_q: degree_const * (nf / kf).powi(3) * log_n.powi(3) / chi2,
        min_k: (2.0 + epsilon0) * log_n / kl,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adaptivity {
    NonAdaptive,
    Adaptive,
}

/// High-probability upper bound on the number of planted queries.
///
/// Non-adaptive: `Q·(k²/n²)·(1 + n/(√δ·k·√Q))`.
/// Adaptive: `Q·k²/(δn²)·√(1 + n²/(Qk²))·√(1 + χ′²)`, where `χ′²` is the
/// chi-square between the observed planted and null laws.
pub fn planted_query_bound(
    budget: f64,
    n: f64,
    k: f64,
    delta: f64,
    mode: Adaptivity,
    chi2_prime: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!("delta = {delta} outside (0, 1]")));
    }
    let valid = budget >= 1.0 && n > 0.0 && k > 0.0 && chi2_prime >= 0.0;
    if !valid {
        return Err(Error::Domain("need Q >= 1, n, k > 0 and chi2' >= 0".into()));
    }
    let base = budget * k * k / (n * n);
    Ok(match mode {
        Adaptivity::NonAdaptive => base * (1.0 + n / (delta.sqrt() * k * budget.sqrt())),
        Adaptivity::Adaptive => {
            base / delta * (1.0 + n * n / (budget * k * k)).sqrt() * (1.0 + chi2_prime).sqrt()
        }
    })
}

/// `P(H >= h) <= exp(−k·d_KL(h/k ‖ k/n))` for `H ~ Hypergeometric(n, k, k)`,
/// valid when `h/k >= k/n`.
pub fn hypergeom_tail_upper(n: u64, k: u64, h: u64) -> Result<f64> {
    if !(k >= 1 && k <= n) || h > k {
        return Err(Error::Domain(format!("need 1 <= k <= n and h <= k, got n = {n}, k = {k}, h = {h}")));
    }
    let rho = k as f64 / n as f64;
    let frac = h as f64 / k as f64;
    // h·n >= k² is the exact form of h/k >= ρ.
    if (h as u128) * (n as u128) < (k as u128) * (k as u128) {
        return Err(Error::Domain(format!("tail bound needs h/k >= k/n, got {frac} < {rho}")));
    }
    let frac = frac.max(rho);
    Ok((-(k as f64) * bernoulli_kl_nats(frac, rho)?).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMethod {
    /// Draw `𝒦₁`, average over `𝒦₂` analytically where the structure allows.
    #[default]
    Conditional,
    /// Draw both planted sets and average the raw weight.
    PairSampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapEstimate {
    /// Estimated `E[(1+χ²)^{overlap}] − 1`.
    pub estimate: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Below this many touched vertices, non-clique overlap graphs are
/// averaged over `𝒦₂` by subset enumeration.
const ENUMERATION_VERTICES: usize = 16;

/// Monte Carlo estimate of the chi-square between the planted and null laws
/// of the answers to a non-adaptive plan, through the decomposition
/// `χ² + 1 = E_{𝒦₁,𝒦₂}[(1+χ²(𝒫,𝒬))^{|W₁ ∩ W₂|}]`, with `Wᵢ` the plan pairs
/// inside `𝒦ᵢ × 𝒦ᵢ`.
///
/// With [`OverlapMethod::Conditional`] only `𝒦₁` is sampled; the inner
/// expectation over `𝒦₂` is exact when the plan pairs inside `𝒦₁` form a
/// clique (hypergeometric sum) or touch few vertices (subset enumeration),
/// and otherwise falls back to one sampled `𝒦₂`. Each per-sample value is an
/// unbiased estimate of the same conditional mean.
pub fn chi_square_overlap_estimate(
    plan: &NonAdaptivePlan,
    n: u32,
    k: u32,
    chi2: f64,
    samples: u64,
    seed: u64,
    method: OverlapMethod,
) -> Result<OverlapEstimate> {
    if !(chi2 >= 0.0 && chi2.is_finite()) {
        return Err(Error::Domain(format!("per-entry chi-square must be finite and >= 0, got {chi2}")));
    }
    if k > n || k < 1 {
        return Err(Error::Parameter(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    if samples < 2 {
        return Err(Error::Parameter("need at least two samples".into()));
    }
    if let Some(p) = plan.pairs.iter().find(|p| p.hi >= n) {
        return Err(Error::VertexOutOfRange { vertex: p.hi, n });
    }
    if chi2 == 0.0 || plan.is_empty() {
        return Ok(OverlapEstimate { estimate: 0.0, std_error: 0.0, samples });
    }

    let ctx = OverlapContext::new(plan, n, k, chi2);
    let (sum, sum_sq) = (0..samples)
        .into_par_iter()
        .map(|i| {
            let v = ctx.sample_value(seed, i, method);
            (v, v * v)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let s = samples as f64;
    let mean = sum / s;
    let var = ((sum_sq - s * mean * mean) / (s - 1.0)).max(0.0);
    Ok(OverlapEstimate {
        estimate: mean - 1.0,
        std_error: (var / s).sqrt(),
        samples,
    })
}

struct OverlapContext {
    n: u32,
    k: u32,
    ln_base: f64,
    in_plan: Vec<bool>,
    pairs: PairMap<()>,
    ln_total: f64,
}

impl OverlapContext {
    fn new(plan: &NonAdaptivePlan, n: u32, k: u32, chi2: f64) -> Self {
        let mut in_plan = vec![false; n as usize];
        let mut pairs = PairMap::default();
        for p in &plan.pairs {
            in_plan[p.lo as usize] = true;
            in_plan[p.hi as usize] = true;
            pairs.insert(p.key(), ());
        }
        Self {
            n,
            k,
            ln_base: chi2.ln_1p(),
            in_plan,
            pairs,
            ln_total: ln_choose(n as u64, k as u64),
        }
    }

    fn draw_set(&self, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<u32> {
        index::sample(rng, self.n as usize, self.k as usize)
            .into_iter()
            .map(|v| v as u32)
            .filter(|&v| self.in_plan[v as usize])
            .collect()
    }

    /// Plan pairs with both endpoints in `vertices`.
    fn induced(&self, vertices: &[u32]) -> Vec<Pair> {
        let mut out = Vec::new();
        for (a, &i) in vertices.iter().enumerate() {
            for &j in &vertices[a + 1..] {
                let p = Pair::new(i, j);
                if self.pairs.contains_key(&p.key()) {
                    out.push(p);
                }
            }
        }
        out
    }

    fn sample_value(&self, seed: u64, index: u64, method: OverlapMethod) -> f64 {
        let mut rng = seed::rng(seed, tag::OVERLAP, index);
        let first = self.draw_set(&mut rng);
        match method {
            OverlapMethod::PairSampling => {
                let second = self.draw_set(&mut rng);
                let mut marked = vec![false; self.n as usize];
                for &v in &second {
                    marked[v as usize] = true;
                }
                let both: Vec<u32> = first.into_iter().filter(|&v| marked[v as usize]).collect();
                (self.induced(&both).len() as f64 * self.ln_base).exp()
            }
            OverlapMethod::Conditional => {
                let edges = self.induced(&first);
                if edges.is_empty() {
                    return 1.0;
                }
                let mut touched: Vec<u32> = edges.iter().flat_map(|p| [p.lo, p.hi]).collect();
                touched.sort_unstable();
                touched.dedup();
                let u = touched.len();
                if edges.len() as u64 == binom2(u as u64) {
                    self.clique_expectation(u as u64)
                } else if u <= ENUMERATION_VERTICES {
                    self.enumerated_expectation(&touched, &edges)
                } else {
                    let second = self.draw_set(&mut rng);
                    let mut marked = vec![false; self.n as usize];
                    for &v in &second {
                        marked[v as usize] = true;
                    }
                    let hits = edges
                        .iter()
                        .filter(|p| marked[p.lo as usize] && marked[p.hi as usize])
                        .count();
                    (hits as f64 * self.ln_base).exp()
                }
            }
        }
    }

    /// `E[(1+χ²)^{C(X,2)}]` with `X = |𝒦₂ ∩ U|`, `|U| = u`.
    fn clique_expectation(&self, u: u64) -> f64 {
        let (n, k) = (self.n as u64, self.k as u64);
        let lo = (k + u).saturating_sub(n);
        (lo..=u.min(k))
            .map(|x| {
                let ln_pmf = ln_choose(u, x) + ln_choose(n - u, k - x) - self.ln_total;
                (ln_pmf + binom2(x) as f64 * self.ln_base).exp()
            })
            .sum()
    }

    /// Exact average over every possible `𝒦₂ ∩ U`.
    fn enumerated_expectation(&self, touched: &[u32], edges: &[Pair]) -> f64 {
        let (n, k) = (self.n as u64, self.k as u64);
        let u = touched.len();
        let bit = |v: u32| touched.binary_search(&v).expect("touched vertex");
        let masks: Vec<u32> = edges.iter().map(|p| (1u32 << bit(p.lo)) | (1u32 << bit(p.hi))).collect();
        let mut total = 0.0;
        for subset in 0u32..(1u32 << u) {
            let size = subset.count_ones() as u64;
            if size > k || k - size > n - u as u64 {
                continue;
            }
            let ln_p = ln_choose(n - u as u64, k - size) - self.ln_total;
            let hits = masks.iter().filter(|&&m| subset & m == m).count();
            total += (ln_p + hits as f64 * self.ln_base).exp();
        }
        total
    }
}

/// Exponents of `Q = Θ(n^α)` and `k = Θ(n^β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseRegion {
    Impossible,
    ConjecturallyHard,
    Hard,
    Easy,
}

impl fmt::Display for PhaseRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseRegion::Impossible => "impossible",
            PhaseRegion::ConjecturallyHard => "conjecturally_hard",
            PhaseRegion::Hard => "hard",
            PhaseRegion::Easy => "easy",
        })
    }
}

/// Region of the `(β, α)` plane.
///
/// On `α = 2 − 2β` the point is impossible. Otherwise, on `β = 1/2` it is
/// conjecturally hard up to and including `α = 3 − 3β` and hard above; on
/// `α = 3 − 3β` with `β > 1/2` it is conjecturally hard.
pub fn classify_phase(point: PhasePoint) -> Result<PhaseRegion> {
    let PhasePoint { alpha, beta } = point;
    if !(alpha > 0.0 && alpha < 2.0) || !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!(
            "phase point (alpha = {alpha}, beta = {beta}) outside (0,2) x (0,1)"
        )));
    }
    let statistical = 2.0 - 2.0 * beta;
    let computational = 3.0 - 3.0 * beta;
    Ok(if alpha <= statistical {
        PhaseRegion::Impossible
    } else if beta < 0.5 {
        PhaseRegion::Hard
    } else if alpha <= computational {
        PhaseRegion::ConjecturallyHard
    } else if beta > 0.5 {
        PhaseRegion::Easy
    } else {
        PhaseRegion::Hard
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategies::{clique_pattern_plan, uniform_plan};
    use rand::SeedableRng;
    use rand_distr::{Distribution, Hypergeometric};

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn planted_clique_statistical_lower() {
        let r = query_complexity_bounds(&BoundInputs::new(1000, 100, 1.0, 0.5)).unwrap();
        let expected = 2.0 * 100.0 * 10f64.ln().powi(2);
        assert!(close(r.statistical_lower_q, expected, 1e-12));
        assert!((r.statistical_lower_q - 1060.4).abs() < 0.05);
        assert!(close(r.scan_sufficient_q_chi, 8.0 * 2.0 * 100.0 * 10f64.ln().powi(2), 1e-12));
        // log² n vs log²(n/k) differ by 4x here.
        assert!(r.statistical_lower_q_log_n.is_some());
    }

    #[test]
    fn delta_one_collapses_adaptive_bound() {
        let mut inputs = BoundInputs::new(1000, 100, 0.8, 0.3);
        inputs.delta = 1.0;
        let r = query_complexity_bounds(&inputs).unwrap();
        assert_eq!(r.adaptive_lower_q, r.statistical_lower_q);
    }

    #[test]
    fn bound_domain_errors() {
        assert!(matches!(query_complexity_bounds(&BoundInputs::new(100, 10, 0.5, 0.5)), Err(Error::Domain(_))));
        assert!(matches!(query_complexity_bounds(&BoundInputs::new(100, 10, 1.0, 0.0)), Err(Error::Domain(_))));
        assert!(matches!(query_complexity_bounds(&BoundInputs::new(100, 10, 1.3, 0.5)), Err(Error::Domain(_))));
        let mut bad = BoundInputs::new(100, 10, 1.0, 0.5);
        bad.epsilon = 2.0;
        assert!(query_complexity_bounds(&bad).is_err());
    }

    #[test]
    fn bounds_monotone_in_n_and_k() {
        let q_formulas = |r: &BoundReport| {
            [r.statistical_lower_q, r.adaptive_lower_q, r.scan_sufficient_q, r.scan_sufficient_q_chi, r.degree_sufficient_q]
        };
        for &(p, q) in &[(1.0, 0.5), (0.7, 0.3), (0.2, 0.1)] {
            for n in [200u64, 1000, 5000] {
                for k in [5u64, 20, 60, 150] {
                    let base = q_formulas(&query_complexity_bounds(&BoundInputs::new(n, k, p, q)).unwrap());
                    let more_k = q_formulas(&query_complexity_bounds(&BoundInputs::new(n, k + 1, p, q)).unwrap());
                    let more_n = q_formulas(&query_complexity_bounds(&BoundInputs::new(n + 1, k, p, q)).unwrap());
                    for i in 0..base.len() {
                        assert!(more_k[i] < base[i], "formula {i} not decreasing in k");
                        assert!(more_n[i] > base[i], "formula {i} not increasing in n");
                    }
                }
            }
        }
    }

    #[test]
    fn planted_query_bound_values() {
        let v = planted_query_bound(1000.0, 100.0, 10.0, 0.25, Adaptivity::NonAdaptive, 0.0).unwrap();
        let expected = 10.0 * (1.0 + 2.0 * 100.0 / (10.0 * 1000f64.sqrt()));
        assert!(close(v, expected, 1e-12));
        assert!((v - 16.32).abs() < 0.01);
        // Large Q: ratio to Q·k²/n² tends to 1.
        let q = 1e12;
        let v = planted_query_bound(q, 100.0, 10.0, 0.999_999, Adaptivity::NonAdaptive, 0.0).unwrap();
        assert!(close(v / (q * 0.01), 1.0, 1e-4));
        let v = planted_query_bound(q, 100.0, 10.0, 1.0, Adaptivity::Adaptive, 0.0).unwrap();
        assert!(close(v / (q * 0.01), 1.0, 1e-6));
        assert!(planted_query_bound(10.0, 100.0, 10.0, 0.0, Adaptivity::Adaptive, 0.0).is_err());
    }

    #[test]
    fn hypergeom_tail_examples() {
        // h = kρ exactly: n = 100, k = 10, h = 1.
        assert_eq!(hypergeom_tail_upper(100, 10, 1).unwrap(), 1.0);
        let v = hypergeom_tail_upper(100, 10, 10).unwrap();
        assert!(close(v, 0.1f64.powi(10), 1e-9));
        assert!(matches!(hypergeom_tail_upper(100, 20, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn hypergeom_tail_dominates_samples() {
        let dist = Hypergeometric::new(100, 10, 10).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let draws = 1_000_000u64;
        let hits = (0..draws).filter(|_| dist.sample(&mut rng) >= 5).count() as f64 / draws as f64;
        let se = (hits * (1.0 - hits) / draws as f64).sqrt();
        assert!(hypergeom_tail_upper(100, 10, 5).unwrap() >= hits - 5.0 * se);
    }

    /// Exact `E[(1+c)^{|W₁∩W₂|}] − 1` by enumerating every pair of k-subsets.
    fn exact_overlap(plan: &NonAdaptivePlan, n: u32, k: u32, c: f64) -> f64 {
        let subsets: Vec<u32> = (0u32..(1 << n)).filter(|m| m.count_ones() == k).collect();
        let mut total = 0.0;
        for &a in &subsets {
            for &b in &subsets {
                let both = a & b;
                let hits = plan
                    .pairs
                    .iter()
                    .filter(|p| both & (1 << p.lo) != 0 && both & (1 << p.hi) != 0)
                    .count();
                total += (1.0 + c).powi(hits as i32);
            }
        }
        total / (subsets.len() * subsets.len()) as f64 - 1.0
    }

    #[test]
    fn overlap_estimators_match_enumeration() {
        let n = 9;
        let k = 4;
        let c = 1.0;
        let plans = [
            clique_pattern_plan(n, 6, 1).unwrap().plan,
            uniform_plan(n, 14, 2).unwrap(),
            uniform_plan(n, 30, 3).unwrap(),
        ];
        for plan in &plans {
            let exact = exact_overlap(plan, n, k, c);
            for method in [OverlapMethod::Conditional, OverlapMethod::PairSampling] {
                let est = chi_square_overlap_estimate(plan, n, k, c, 200_000, 11, method).unwrap();
                assert!(
                    (est.estimate - exact).abs() <= 5.0 * est.std_error + 1e-12,
                    "{method:?}: {} vs {exact} (se {})",
                    est.estimate,
                    est.std_error
                );
            }
        }
    }

    #[test]
    fn overlap_trivial_cases() {
        let plan = clique_pattern_plan(100, 10, 0).unwrap().plan;
        let est = chi_square_overlap_estimate(&plan, 100, 10, 0.0, 100, 0, OverlapMethod::default()).unwrap();
        assert_eq!(est.estimate, 0.0);
        let empty = NonAdaptivePlan { pairs: vec![], nominal_budget: 0 };
        let est = chi_square_overlap_estimate(&empty, 100, 10, 1.0, 100, 0, OverlapMethod::default()).unwrap();
        assert_eq!(est.estimate, 0.0);
    }

    #[test]
    fn overlap_monotone_in_nested_plans() {
        // Same sampling seed, so the first 40 sorted vertices nest within 80.
        let n = 400;
        let k = 60;
        let mut prev = -1.0;
        for m in [20u32, 40, 80] {
            let pattern = clique_pattern_plan(n, m, 3).unwrap();
            let est = chi_square_overlap_estimate(&pattern.plan, n, k, 0.5, 20_000, 4, OverlapMethod::Conditional).unwrap();
            assert!(est.estimate >= prev, "m = {m}: {} < {prev}", est.estimate);
            prev = est.estimate;
        }
    }

    #[test]
    fn phase_examples() {
        let at = |alpha, beta| classify_phase(PhasePoint { alpha, beta }).unwrap();
        assert_eq!(at(1.8, 0.6), PhaseRegion::Easy);
        assert_eq!(at(0.5, 0.6), PhaseRegion::Impossible);
        assert_eq!(at(1.0, 0.6), PhaseRegion::ConjecturallyHard);
        assert_eq!(at(1.5, 0.4), PhaseRegion::Hard);
        // boundaries
        assert_eq!(at(0.8, 0.6), PhaseRegion::Impossible);
        assert_eq!(at(1.2, 0.6), PhaseRegion::ConjecturallyHard);
        assert_eq!(at(1.2, 0.5), PhaseRegion::ConjecturallyHard);
        assert_eq!(at(1.7, 0.5), PhaseRegion::Hard);
        assert!(classify_phase(PhasePoint { alpha: 2.0, beta: 0.5 }).is_err());
        assert!(classify_phase(PhasePoint { alpha: 1.0, beta: 0.0 }).is_err());
    }
}
