//! Trial statistics: mean ± unbiased std, Welch's t-test and Cohen's d.
//!
//! The t-distribution tail is evaluated through the regularized incomplete
//! beta function, computed with a modified-Lentz continued fraction.

use serde::Serialize;

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n − 1) sample variance. Zero for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

/// Lanczos approximation (g = 7, 9 terms), accurate to ~1e-15 for x > 0.
#[allow(clippy::excessive_precision)]
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 500;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)` for `a, b > 0`, `x ∈ [0, 1]`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The continued fraction converges fast below the mean; use symmetry above it.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Student t CDF with `df` degrees of freedom (real-valued `df > 0`).
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    let tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided p-value `P(|T| ≥ |t|)`.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of freedom.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Degenerate(format!(
            "welch t-test needs at least 2 values per sample (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a) / na, sample_variance(b) / nb);
    if va + vb <= 0.0 {
        return Err(Error::Degenerate("both samples have zero variance".into()));
    }
    let t = (mean(a) - mean(b)) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(WelchTest {
        t,
        df,
        p_two_sided: student_t_two_sided_p(t, df),
    })
}

/// Cohen's d with the (n − 1)-weighted pooled standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() + b.len() < 3 || a.is_empty() || b.is_empty() {
        return Err(Error::Degenerate("cohen's d needs a pooled variance".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = ((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / (na + nb - 2.0);
    if pooled <= 0.0 {
        return Err(Error::Degenerate("zero pooled variance".into()));
    }
    Ok((mean(a) - mean(b)) / pooled.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        Self {
            mean: mean(xs),
            std: sample_std(xs),
        }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let p = f.precision().unwrap_or(3);
        write!(f, "{:.p$}±{:.p$}", self.mean, self.std)
    }
}

/// End-of-run values for one seed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TrialFinal {
    pub seed: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub balanced_accuracy: f64,
    pub jain: f64,
    pub mean_round_time_s: f64,
    pub total_time_s: f64,
    pub total_comm_mb: f64,
    pub total_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub finals: Vec<TrialFinal>,
    pub accuracy: MeanStd,
    pub macro_f1: MeanStd,
    pub balanced_accuracy: MeanStd,
    pub jain: MeanStd,
    pub mean_round_time_s: MeanStd,
    pub total_time_s: MeanStd,
    pub total_comm_mb: MeanStd,
    pub total_energy: MeanStd,
    /// Set when fewer than two seeds were run; every std is then 0.
    pub degenerate: bool,
}

impl TrialSummary {
    pub fn accuracies(&self) -> Vec<f64> {
        self.finals.iter().map(|f| f.accuracy).collect()
    }
}

/// Aggregates per-seed finals into mean ± unbiased std per metric.
pub fn summarize_trials(finals: &[TrialFinal]) -> TrialSummary {
    let col = |f: fn(&TrialFinal) -> f64| MeanStd::of(&finals.iter().map(f).collect::<Vec<_>>());
    TrialSummary {
        finals: finals.to_vec(),
        accuracy: col(|f| f.accuracy),
        macro_f1: col(|f| f.macro_f1),
        balanced_accuracy: col(|f| f.balanced_accuracy),
        jain: col(|f| f.jain),
        mean_round_time_s: col(|f| f.mean_round_time_s),
        total_time_s: col(|f| f.total_time_s),
        total_comm_mb: col(|f| f.total_comm_mb),
        total_energy: col(|f| f.total_energy),
        degenerate: finals.len() < 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StudentT};

    #[test]
    fn ln_gamma_known_values() {
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(5.0), 24f64.ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), epsilon = 1e-13);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x; I_x(a, 1) = x^a.
        for x in [0.1, 0.37, 0.9] {
            assert_abs_diff_eq!(regularized_incomplete_beta(1.0, 1.0, x), x, epsilon = 1e-13);
            assert_abs_diff_eq!(regularized_incomplete_beta(3.0, 1.0, x), x.powi(3), epsilon = 1e-13);
        }
    }

    #[test]
    fn t_cdf_closed_forms() {
        // df = 1 is Cauchy; df = 2 has F(t) = 1/2 + t / (2 sqrt(t^2 + 2)).
        for t in [-3.0, -0.5, 0.0, 0.8, 4.0] {
            let cauchy = 0.5 + f64::atan(t) / std::f64::consts::PI;
            assert_abs_diff_eq!(student_t_cdf(t, 1.0), cauchy, epsilon = 1e-12);
            let df2 = 0.5 + t / (2.0 * (t * t + 2.0f64).sqrt());
            assert_abs_diff_eq!(student_t_cdf(t, 2.0), df2, epsilon = 1e-12);
        }
    }

    #[test]
    fn t_cdf_matches_monte_carlo() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for df in [3.0, 7.5] {
            let dist = StudentT::new(df).unwrap();
            let n = 1_000_000;
            let draws: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
            for t in [-2.0, -1.0, -0.25, 0.0, 0.5, 1.5, 3.0] {
                let empirical = draws.iter().filter(|&&x| x <= t).count() as f64 / n as f64;
                assert!(
                    (empirical - student_t_cdf(t, df)).abs() < 2e-3,
                    "df={df} t={t}: {empirical} vs {}",
                    student_t_cdf(t, df)
                );
            }
        }
    }

    #[test]
    fn welch_examples() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0];
        let w = welch_t(&a, &b).unwrap();
        assert_abs_diff_eq!(w.t, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(w.df, 8.0, epsilon = 1e-9);
        assert_abs_diff_eq!(w.p_two_sided, 0.3466, epsilon = 1e-3);

        let same = welch_t(&a, &a).unwrap();
        assert_eq!(same.t, 0.0);
        assert_abs_diff_eq!(same.p_two_sided, 1.0, epsilon = 1e-15);

        let swapped = welch_t(&b, &a).unwrap();
        assert_eq!(swapped.t, -w.t);
        assert_eq!(swapped.p_two_sided, w.p_two_sided);

        assert!(welch_t(&[1.0], &a).is_err());
        assert!(welch_t(&[1.0, 1.0], &[2.0, 2.0]).is_err());
    }

    #[test]
    fn cohens_d_examples() {
        assert_abs_diff_eq!(cohens_d(&[2.0, 4.0, 6.0], &[1.0, 3.0, 5.0]).unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(cohens_d(&[1.0, 3.0], &[3.0, 1.0]).unwrap(), 0.0);
        assert!(cohens_d(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn summary_examples() {
        let finals: Vec<TrialFinal> = [0.3, 0.35, 0.4]
            .iter()
            .enumerate()
            .map(|(i, &accuracy)| TrialFinal {
                seed: i as u64,
                accuracy,
                ..Default::default()
            })
            .collect();
        let s = summarize_trials(&finals);
        assert_abs_diff_eq!(s.accuracy.mean, 0.35, epsilon = 1e-12);
        assert_abs_diff_eq!(s.accuracy.std, 0.05, epsilon = 1e-12);
        assert!(!s.degenerate);

        let mut rev = finals.clone();
        rev.reverse();
        let r = summarize_trials(&rev);
        assert_abs_diff_eq!(r.accuracy.mean, s.accuracy.mean, epsilon = 1e-15);
        assert_abs_diff_eq!(r.accuracy.std, s.accuracy.std, epsilon = 1e-15);

        let one = summarize_trials(&finals[..1]);
        assert!(one.degenerate);
        assert_eq!(one.accuracy.std, 0.0);
    }

    proptest! {
        #[test]
        fn welch_p_in_unit_interval_and_decreasing_in_shift(
            base in prop::collection::vec(-5.0f64..5.0, 3..10),
            other in prop::collection::vec(-5.0f64..5.0, 3..10),
        ) {
            prop_assume!(sample_variance(&base) > 1e-6 && sample_variance(&other) > 1e-6);
            let offset = mean(&base) - mean(&other);
            let centered: Vec<f64> = other.iter().map(|x| x + offset).collect();
            let mut last = 1.0 + 1e-12;
            for step in 0..8 {
                let shifted: Vec<f64> = centered.iter().map(|x| x + 0.5 * step as f64).collect();
                let p = welch_t(&base, &shifted).unwrap().p_two_sided;
                prop_assert!(p > 0.0 && p <= 1.0 + 1e-12);
                prop_assert!(p <= last);
                last = p;
            }
        }
    }
}
