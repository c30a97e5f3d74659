//! Convex piecewise-linear functions on a closed interval.
//!
//! A function is stored as its left end, its value there and a list of
//! `(length, slope)` segments with nondecreasing slopes. Infimal
//! convolution of two such functions is a merge of their segment lists,
//! which is what makes the lookahead solver exact and cheap.

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPwl {
    lo: f64,
    value_lo: f64,
    segs: Vec<(f64, f64)>,
}

impl ConvexPwl {
    /// The zero function on `[lo, hi]`.
    pub fn zero(lo: f64, hi: f64) -> Self {
        assert!(hi >= lo);
        ConvexPwl {
            lo,
            value_lo: 0.0,
            segs: if hi > lo { vec![(hi - lo, 0.0)] } else { vec![] },
        }
    }

    /// Builds a function from breakpoints, the value at the first one and
    /// the slope on each gap. Slopes must be nondecreasing.
    pub fn from_breakpoints(xs: &[f64], value_lo: f64, slopes: &[f64]) -> Self {
        assert_eq!(xs.len(), slopes.len() + 1);
        let mut f = ConvexPwl {
            lo: xs[0],
            value_lo,
            segs: Vec::with_capacity(slopes.len()),
        };
        for (w, s) in xs.windows(2).zip(slopes) {
            f.push(w[1] - w[0], *s);
        }
        f
    }

    fn push(&mut self, len: f64, slope: f64) {
        if len <= 0.0 {
            return;
        }
        match self.segs.last_mut() {
            Some(last) if last.1 == slope => last.0 += len,
            _ => self.segs.push((len, slope)),
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.segs.iter().map(|s| s.0).sum::<f64>()
    }

    pub fn segments(&self) -> &[(f64, f64)] {
        &self.segs
    }

    pub fn is_convex(&self) -> bool {
        self.segs.windows(2).all(|w| w[0].1 <= w[1].1)
    }

    /// Value at `x`, with `x` clamped into the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let mut pos = self.lo;
        let mut v = self.value_lo;
        for &(len, slope) in &self.segs {
            if x <= pos + len {
                return v + slope * (x - pos).max(0.0);
            }
            pos += len;
            v += slope * len;
        }
        v
    }

    /// `x -> f(-x)`.
    pub fn reflect(&self) -> Self {
        let hi = self.hi();
        let mut f = ConvexPwl {
            lo: -hi,
            value_lo: self.eval(hi),
            segs: Vec::with_capacity(self.segs.len()),
        };
        for &(len, slope) in self.segs.iter().rev() {
            f.push(len, -slope);
        }
        f
    }

    /// `x -> f(x + shift)` on the shifted domain.
    pub fn shift(&self, shift: f64) -> Self {
        ConvexPwl {
            lo: self.lo - shift,
            value_lo: self.value_lo,
            segs: self.segs.clone(),
        }
    }

    /// Restriction to `[a, b]` intersected with the domain.
    pub fn restrict(&self, a: f64, b: f64) -> Self {
        let a = a.max(self.lo);
        let mut f = ConvexPwl {
            lo: a,
            value_lo: self.eval(a),
            segs: Vec::new(),
        };
        let mut pos = self.lo;
        for &(len, slope) in &self.segs {
            let s0 = pos.max(a);
            let s1 = (pos + len).min(b);
            if s1 > s0 {
                f.push(s1 - s0, slope);
            }
            pos += len;
            if pos >= b {
                break;
            }
        }
        f
    }

    /// `y -> min { f(x1) + g(x2) : x1 + x2 = y }`.
    pub fn inf_convolve(&self, other: &ConvexPwl) -> Self {
        let mut f = ConvexPwl {
            lo: self.lo + other.lo,
            value_lo: self.value_lo + other.value_lo,
            segs: Vec::with_capacity(self.segs.len() + other.segs.len()),
        };
        let (mut i, mut j) = (0, 0);
        while i < self.segs.len() || j < other.segs.len() {
            let take_self = match (self.segs.get(i), other.segs.get(j)) {
                (Some(a), Some(b)) => a.1 <= b.1,
                (Some(_), None) => true,
                _ => false,
            };
            if take_self {
                f.push(self.segs[i].0, self.segs[i].1);
                i += 1;
            } else {
                f.push(other.segs[j].0, other.segs[j].1);
                j += 1;
            }
        }
        f
    }

    /// Pointwise sum on the intersection of the domains.
    pub fn add(&self, other: &ConvexPwl) -> Self {
        let lo = self.lo.max(other.lo);
        let hi = self.hi().min(other.hi());
        let a = self.restrict(lo, hi);
        let b = other.restrict(lo, hi);
        let mut f = ConvexPwl {
            lo,
            value_lo: a.value_lo + b.value_lo,
            segs: Vec::with_capacity(a.segs.len() + b.segs.len()),
        };
        let (mut i, mut j) = (0, 0);
        let (mut ra, mut rb) = (
            a.segs.first().map_or(0.0, |s| s.0),
            b.segs.first().map_or(0.0, |s| s.0),
        );
        while i < a.segs.len() && j < b.segs.len() {
            let step = ra.min(rb);
            f.push(step, a.segs[i].1 + b.segs[j].1);
            ra -= step;
            rb -= step;
            if ra <= 0.0 {
                i += 1;
                ra = a.segs.get(i).map_or(0.0, |s| s.0);
            }
            if rb <= 0.0 {
                j += 1;
                rb = b.segs.get(j).map_or(0.0, |s| s.0);
            }
        }
        f
    }

    /// Interval of minimizers, treating slopes within `tol` of zero as flat.
    pub fn argmin_interval(&self, tol: f64) -> (f64, f64) {
        let mut pos = self.lo;
        let mut idx = 0;
        while idx < self.segs.len() && self.segs[idx].1 < -tol {
            pos += self.segs[idx].0;
            idx += 1;
        }
        let left = pos;
        while idx < self.segs.len() && self.segs[idx].1 <= tol {
            pos += self.segs[idx].0;
            idx += 1;
        }
        (left, pos)
    }
}
