//! Degree bookkeeping: graded dimensions, parity, shifts, duals.

use std::collections::BTreeMap;
use std::fmt;

/// Parity of an integer degree; only parities enter commutation signs.
pub fn parity(d: i64) -> u8 {
    (d & 1) as u8
}

/// Sign `(-1)^(|a||b|)` for two degrees, through their parities.
pub fn koszul_pair_sign(a: i64, b: i64) -> i64 {
    if parity(a) == 1 && parity(b) == 1 {
        -1
    } else {
        1
    }
}

/// Normalization sign `(-1)^(d(d+1)/2)` attached to a dual coordinate of
/// degree `-d`. It satisfies `mu(d) mu(-d) = (-1)^(d^2)`, which is exactly
/// what cancels the graded double-dual twist and makes dualizing transition
/// data an involution.
pub fn dual_norm_sign(d: i64) -> i64 {
    // d(d+1)/2 mod 2 cycles with period 4: 0,1,1,0 for d = 0,1,2,3.
    match d.rem_euclid(4) {
        1 | 2 => -1,
        _ => 1,
    }
}

/// Entry sign of the dual-frame transition: the relation between a frame
/// transition and the dual-frame transition, with the `mu` normalization
/// folded in. For row/column degrees in {0,1} it reduces to
/// `(-1)^(|k^a|(|k^a| - |k^b|))`.
pub fn dual_entry_sign(row_deg: i64, col_deg: i64) -> i64 {
    let mut s = dual_norm_sign(row_deg) * dual_norm_sign(col_deg);
    if parity(col_deg) == 1 && parity(row_deg) == 0 {
        s = -s;
    }
    s
}

/// Finitely supported map from integer degree to a nonnegative count.
/// Zero counts are never stored, so equality is structural.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GradedDimension {
    counts: BTreeMap<i64, u64>,
}

impl GradedDimension {
    pub fn new() -> Self {
        GradedDimension {
            counts: BTreeMap::new(),
        }
    }

    pub fn from_pairs(pairs: &[(i64, u64)]) -> Self {
        let mut d = GradedDimension::new();
        for &(deg, count) in pairs {
            d.add(deg, count);
        }
        d
    }

    /// Counts occurrences of each degree in a list.
    pub fn from_degrees(degrees: &[i64]) -> Self {
        let mut d = GradedDimension::new();
        for &deg in degrees {
            d.add(deg, 1);
        }
        d
    }

    pub fn add(&mut self, degree: i64, count: u64) {
        if count == 0 {
            return;
        }
        *self.counts.entry(degree).or_insert(0) += count;
    }

    pub fn count(&self, degree: i64) -> u64 {
        self.counts.get(&degree).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.counts.iter().map(|(&d, &c)| (d, c))
    }

    /// Degree shift: `result[k] = self[k + l]`.
    pub fn shift(&self, l: i64) -> Self {
        let mut out = GradedDimension::new();
        for (&d, &c) in &self.counts {
            out.add(d - l, c);
        }
        out
    }

    /// Dual: `result[j] = self[-j]`.
    pub fn dual(&self) -> Self {
        let mut out = GradedDimension::new();
        for (&d, &c) in &self.counts {
            out.add(-d, c);
        }
        out
    }

    /// Convolution: the rank of a tensor product,
    /// `result[j] = sum_i self[i] * other[j - i]`.
    pub fn convolve(&self, other: &Self) -> Self {
        let mut out = GradedDimension::new();
        for (&da, &ca) in &self.counts {
            for (&db, &cb) in &other.counts {
                out.add(da + db, ca * cb);
            }
        }
        out
    }

    /// Pointwise sum, the rank of a direct sum.
    pub fn sum(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&d, &c) in &other.counts {
            out.add(d, c);
        }
        out
    }

    /// JSON object with string-degree keys, e.g. `{"-1":2,"0":1}`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (&d, &c) in &self.counts {
            map.insert(d.to_string(), serde_json::Value::from(c));
        }
        serde_json::Value::Object(map)
    }
}

impl fmt::Display for GradedDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}
