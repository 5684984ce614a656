//! Shared helpers for the integration suites: a double-double number type
//! for high-accuracy loss oracles, a golden-section minimizer over it, and
//! verdict printing.

#![allow(dead_code)]

use std::io::Write;
use std::sync::{Mutex, MutexGuard};

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi));
        Dd { hi, lo }
    }

    pub fn lt(self, o: Dd) -> bool {
        let d = self.sub(o);
        d.hi < 0.0 || (d.hi == 0.0 && d.lo < 0.0)
    }
}

/// Minimizes a unimodal `f` by a dense scan of `[lo, hi]` followed by
/// golden-section refinement of the best cell until the bracket stops
/// shrinking in f64.
pub fn scan_minimize(f: impl Fn(f64) -> Dd, lo: f64, hi: f64, points: usize) -> f64 {
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = (lo, f(lo));
    for i in 1..points {
        let t = lo + i as f64 * step;
        let v = f(t);
        if v.lt(best.1) {
            best = (t, v);
        }
    }
    let mut a = best.0 - step;
    let mut b = best.0 + step;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..400 {
        if fc.lt(fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if !(c > a && d > c && b > d) {
            break;
        }
    }
    0.5 * (a + b)
}

static SERIAL: Mutex<()> = Mutex::new(());

/// Runs the timed criteria one at a time so their runtimes are not
/// inflated by each other.
pub fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Prints the verdict line of a criterion and returns `pass`.
pub fn verdict(id: u32, title: &str, pass: bool, detail: &str) -> bool {
    // Written to stdout directly so the line survives the harness's capture.
    let line = format!("criterion {id:>2} [{title}]: {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    pass
}
