//! Compensated summation, log-sum-exp and exact log-factorial tables.

/// Neumaier-compensated accumulator. Keeps sums of many small terms accurate
/// to a few ulps regardless of ordering.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    s: f64,
    c: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.s + self.c
    }
}

/// log(sum(exp(terms))) with a two-pass max shift and compensated summation.
/// Empty input yields -inf.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let mut acc = NeumaierSum::new();
    for &t in terms {
        acc.add((t - max).exp());
    }
    max + acc.value().ln()
}

/// Streaming log-sum-exp for sums too large to buffer.
#[derive(Clone, Copy, Debug)]
pub struct StreamingLse {
    max: f64,
    sum: NeumaierSum,
}

impl Default for StreamingLse {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: NeumaierSum::new(),
        }
    }
}

impl StreamingLse {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, t: f64) {
        if t == f64::NEG_INFINITY {
            return;
        }
        if t > self.max {
            // rescale the running sum to the new maximum
            if self.max.is_finite() {
                let scale = (self.max - t).exp();
                let mut rescaled = NeumaierSum::new();
                rescaled.add(self.sum.value() * scale);
                self.sum = rescaled;
            }
            self.max = t;
        }
        self.sum.add((t - self.max).exp());
    }

    pub fn value(&self) -> f64 {
        if !self.max.is_finite() {
            return f64::NEG_INFINITY;
        }
        self.max + self.sum.value().ln()
    }
}

/// Exact table of ln(i!) built by cumulative compensated summation of ln(i).
/// Accurate to a few ulps for every entry, unlike Stirling approximations.
pub struct LnFactorialTable {
    table: Vec<f64>,
}

impl LnFactorialTable {
    pub fn new(max_n: usize) -> Self {
        let mut table = Vec::with_capacity(max_n + 1);
        let mut acc = NeumaierSum::new();
        table.push(0.0);
        for i in 1..=max_n {
            acc.add((i as f64).ln());
            table.push(acc.value());
        }
        Self { table }
    }

    #[inline]
    pub fn ln_factorial(&self, n: usize) -> f64 {
        self.table[n]
    }

    /// ln C(n, r); -inf when r > n.
    #[inline]
    pub fn ln_binomial(&self, n: usize, r: usize) -> f64 {
        if r > n {
            return f64::NEG_INFINITY;
        }
        self.table[n] - self.table[r] - self.table[n - r]
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

/// Number of unordered vertex pairs C(n, 2).
#[inline]
pub fn pair_count(n: usize) -> u64 {
    let n = n as u64;
    n * (n.saturating_sub(1)) / 2
}

/// Rank of the pair (u, v), u < v, in lexicographic order over C(n, 2).
#[inline]
pub fn pair_rank(n: usize, u: usize, v: usize) -> u64 {
    debug_assert!(u < v && v < n);
    let (n, u, v) = (n as u64, u as u64, v as u64);
    u * (2 * n - u - 1) / 2 + (v - u - 1)
}

/// Inverse of `pair_rank`.
pub fn pair_unrank(n: usize, rank: u64) -> (usize, usize) {
    debug_assert!(rank < pair_count(n));
    let nf = n as f64;
    // initial guess from the quadratic, then correct exactly
    let disc = (2.0 * nf - 1.0) * (2.0 * nf - 1.0) - 8.0 * rank as f64;
    let mut u = (((2.0 * nf - 1.0) - disc.max(0.0).sqrt()) / 2.0).floor() as i64;
    u = u.clamp(0, n as i64 - 2);
    let row_start = |u: i64| -> u64 { (u as u64) * (2 * n as u64 - u as u64 - 1) / 2 };
    while u > 0 && row_start(u) > rank {
        u -= 1;
    }
    while u < n as i64 - 2 && row_start(u + 1) <= rank {
        u += 1;
    }
    let v = (rank - row_start(u)) as usize + u as usize + 1;
    (u as usize, v)
}
