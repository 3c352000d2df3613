use serde::Serialize;

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Paired sign test of `a` against `b`; ties are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// `P[X >= wins]`, `X ~ Bin(wins + losses, 1/2)`: evidence that `a > b`.
    pub p_greater: f64,
    /// `P[X <= wins]`: evidence that `a < b`.
    pub p_less: f64,
}

/// `rel_tie` treats pairs closer than `rel_tie * max(|a|, |b|)` as ties.
pub fn sign_test(a: &[f64], b: &[f64], rel_tie: f64) -> SignTest {
    assert_eq!(a.len(), b.len());
    let (mut wins, mut losses, mut ties) = (0, 0, 0);
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() <= rel_tie * x.abs().max(y.abs()) {
            ties += 1;
        } else if x > y {
            wins += 1;
        } else {
            losses += 1;
        }
    }
    let n = wins + losses;
    let pmf: Vec<f64> = (0..=n).map(|k| binomial_half(n, k)).collect();
    SignTest {
        wins,
        losses,
        ties,
        p_greater: pmf[wins..].iter().sum::<f64>().min(1.0),
        p_less: pmf[..=wins].iter().sum::<f64>().min(1.0),
    }
}

fn binomial_half(n: usize, k: usize) -> f64 {
    let ln_choose = ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k);
    (ln_choose - n as f64 * std::f64::consts::LN_2).exp()
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}
