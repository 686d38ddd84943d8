//! The parameter schedule guiding the iterated colouring procedure.
//!
//! Five coupled recurrences track per-iteration targets: `L_i` (list size),
//! `N_i` (colour-neighbourhood cap), `R_i` (reserved-edge cap), and the two
//! derived probabilities `retain_i` (an edge keeps an assigned colour) and
//! `keep_i` (a list keeps a colour at one endpoint). The schedule stops at
//! `i0`, the first index where `L_i` drops below `3 ln^7 Delta`, after which
//! the reserved colours take over. `log` means natural logarithm throughout.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("schedule did not terminate within {0} iterations")]
    NonTermination(u64),
    #[error("domain error: {0}")]
    Domain(String),
}

// NaN-closed comparisons for the bound checks: incomparable values count as
// failing the bound.
fn exceeds(a: f64, b: f64) -> bool {
    matches!(a.partial_cmp(&b), Some(std::cmp::Ordering::Greater))
}

fn within(a: f64, b: f64) -> bool {
    matches!(
        a.partial_cmp(&b),
        Some(std::cmp::Ordering::Less | std::cmp::Ordering::Equal)
    )
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScheduleParams {
    pub delta: f64,
    pub log_delta: f64,
    pub p: f64,
    pub ell: u32,
}

impl ScheduleParams {
    /// `ell` defaults to `ceil(2 ln Delta)`.
    pub fn new(delta: f64, p: f64) -> Result<Self, ScheduleError> {
        Self::with_log(delta, delta.ln(), p)
    }

    /// Construct from an exact exponent, so `--delta e20` computes with
    /// `log_delta = 20` rather than `ln(round(e^20))`.
    pub fn from_exponent(exponent: f64, p: f64) -> Result<Self, ScheduleError> {
        Self::with_log(exponent.exp(), exponent, p)
    }

    fn with_log(delta: f64, log_delta: f64, p: f64) -> Result<Self, ScheduleError> {
        if delta.is_nan() || delta < 2.0 {
            return Err(ScheduleError::Params(format!("delta must be >= 2, got {delta}")));
        }
        if p.is_nan() || p <= 0.0 || p >= 1.0 {
            return Err(ScheduleError::Params(format!("p must be in (0,1), got {p}")));
        }
        let ell = (2.0 * log_delta).ceil().max(1.0) as u32;
        Ok(ScheduleParams {
            delta,
            log_delta,
            p,
            ell,
        })
    }

    pub fn with_ell(mut self, ell: u32) -> Result<Self, ScheduleError> {
        if ell == 0 {
            return Err(ScheduleError::Params("ell must be >= 1".into()));
        }
        self.ell = ell;
        Ok(self)
    }

    fn log_pow(&self, e: f64) -> f64 {
        self.log_delta.powf(e)
    }
}

/// Probability that an edge retains an assigned colour, squared per endpoint:
/// `(1 - p/L)^(N-1)`.
pub fn retain_probability(p: f64, big_l: f64, big_n: f64) -> f64 {
    if !exceeds(big_l, 0.0) {
        return f64::NAN;
    }
    (1.0 - p / big_l).powf(big_n - 1.0)
}

/// Probability that a list keeps a colour at one endpoint:
/// `1 - p (N/L) retain^2`.
pub fn keep_probability(p: f64, big_l: f64, big_n: f64, retain: f64) -> f64 {
    if !exceeds(big_l, 0.0) {
        return f64::NAN;
    }
    1.0 - p * (big_n / big_l) * retain * retain
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScheduleRow {
    pub i: u32,
    pub big_l: f64,
    pub big_n: f64,
    pub big_r: f64,
    pub retain: f64,
    pub keep: f64,
}

impl ScheduleRow {
    fn derive(i: u32, big_l: f64, big_n: f64, big_r: f64, p: f64) -> Self {
        let retain = retain_probability(p, big_l, big_n);
        let keep = keep_probability(p, big_l, big_n, retain);
        ScheduleRow {
            i,
            big_l,
            big_n,
            big_r,
            retain,
            keep,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Schedule {
    pub params: ScheduleParams,
    /// Rows `0..=i0`.
    pub rows: Vec<ScheduleRow>,
    pub i0: u32,
}

const ITERATION_GUARD: u64 = 10_000_000;

/// Evaluate the recurrences from row 0 until `L_i < 3 ln^7 Delta`.
pub fn build_schedule(params: ScheduleParams) -> Result<Schedule, ScheduleError> {
    let lg = params.log_delta;
    let log2 = lg * lg;
    let log4 = log2 * log2;
    let sqrt_delta = params.delta.sqrt();
    let row0 = ScheduleRow::derive(
        0,
        params.delta + 6.0 * sqrt_delta * log4,
        params.delta,
        2.0 * sqrt_delta * log4,
        params.p,
    );
    let stop = 3.0 * params.log_pow(7.0);
    let guard = (params.delta as u64).min(ITERATION_GUARD);
    let mut rows = vec![row0];
    loop {
        let row = *rows.last().unwrap();
        if row.big_l < stop || !row.big_l.is_finite() {
            break;
        }
        if row.i as u64 >= guard {
            return Err(ScheduleError::NonTermination(guard));
        }
        let shrink = 1.0 - params.p * row.retain * row.retain;
        let next = ScheduleRow::derive(
            row.i + 1,
            row.big_l * row.keep * row.keep - row.big_l.sqrt() * log2,
            row.big_n * row.keep * shrink + row.big_n.sqrt() * log2,
            row.big_r * shrink + row.big_r.sqrt() * log2,
            params.p,
        );
        rows.push(next);
    }
    let i0 = rows.last().unwrap().i;
    Ok(Schedule {
        params,
        rows,
        i0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyCheck {
    pub id: String,
    pub description: String,
    pub pass: bool,
    pub failures: Vec<String>,
}

impl FamilyCheck {
    fn new(id: &str, description: String) -> Self {
        FamilyCheck {
            id: id.into(),
            description,
            pass: true,
            failures: Vec::new(),
        }
    }

    fn flag(&mut self, msg: String) {
        self.pass = false;
        if self.failures.len() < 8 {
            self.failures.push(msg);
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScheduleBoundsReport {
    pub families: Vec<FamilyCheck>,
}

impl ScheduleBoundsReport {
    pub fn pass(&self) -> bool {
        self.families.iter().all(|f| f.pass)
    }
}

/// Check the terminal-size and per-row inequalities the finishing phase
/// relies on. Diagnostic: for small `Delta` the bounds are expected to fail,
/// the report is still produced.
pub fn check_schedule_bounds(s: &Schedule) -> ScheduleBoundsReport {
    let lg = s.params.log_delta;
    let log7 = s.params.log_pow(7.0);
    let last = *s.rows.last().unwrap();
    let mut families = Vec::new();

    let mut f = FamilyCheck::new(
        "terminal_sizes",
        format!("L,N,R at i0 all exceed ln^7 Delta = {log7}"),
    );
    for (name, value) in [("L", last.big_l), ("N", last.big_n), ("R", last.big_r)] {
        if !exceeds(value, log7) {
            f.flag(format!("{name}_i0 = {value} <= {log7}"));
        }
    }
    families.push(f);

    let r_cap = 3.0 * s.params.log_pow(7.5);
    let mut f = FamilyCheck::new(
        "terminal_reserved",
        format!("R at i0 is at most 3 ln^7.5 Delta = {r_cap}"),
    );
    if !within(last.big_r, r_cap) {
        f.flag(format!("R_i0 = {} > {r_cap}", last.big_r));
    }
    families.push(f);

    let mut ratio = FamilyCheck::new("ratio", format!("R_i/L_i <= ln Delta = {lg} for i <= i0"));
    let mut order = FamilyCheck::new("order", "L_i > N_i for i <= i0".into());
    let mut half = FamilyCheck::new("half", "N_i > L_i/2 for i <= i0".into());
    for row in &s.rows {
        if !within(row.big_r / row.big_l, lg) {
            ratio.flag(format!("i={}: R/L = {}", row.i, row.big_r / row.big_l));
        }
        if !exceeds(row.big_l, row.big_n) {
            order.flag(format!("i={}: L = {}, N = {}", row.i, row.big_l, row.big_n));
        }
        if !exceeds(row.big_n, row.big_l / 2.0) {
            half.flag(format!("i={}: N = {}, L/2 = {}", row.i, row.big_n, row.big_l / 2.0));
        }
    }
    families.push(ratio);
    families.push(order);
    families.push(half);

    ScheduleBoundsReport { families }
}

/// The error-free companion sequences: same shrink factors, no additive
/// error terms, seeded at `L* = N* = Delta` and `R* = 2 sqrt(Delta) ln^4`.
/// Rows are defined for `i >= 1`; the retain factors come from the real
/// schedule.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct UntaintedRow {
    pub i: u32,
    pub l_star: f64,
    pub n_star: f64,
    pub r_star: f64,
    pub keep_star: f64,
}

pub fn build_untainted(s: &Schedule) -> Vec<UntaintedRow> {
    let p = s.params.p;
    let lg = s.params.log_delta;
    let log4 = (lg * lg) * (lg * lg);
    let mut rows = Vec::with_capacity(s.rows.len());
    let mut l_star = s.params.delta;
    let mut n_star = s.params.delta;
    let mut r_star = 2.0 * s.params.delta.sqrt() * log4;
    for i in 1..=s.i0 {
        let retain = s.rows[i as usize].retain;
        let keep_star = 1.0 - p * (n_star / l_star) * retain * retain;
        rows.push(UntaintedRow {
            i,
            l_star,
            n_star,
            r_star,
            keep_star,
        });
        let shrink = 1.0 - p * retain * retain;
        l_star *= keep_star * keep_star;
        n_star *= keep_star * shrink;
        r_star *= shrink;
    }
    rows
}

/// The relations tying the real schedule to its untainted companion.
pub fn check_untainted_relations(s: &Schedule, rows: &[UntaintedRow]) -> ScheduleBoundsReport {
    let lg = s.params.log_delta;
    let log7 = s.params.log_pow(7.0);
    let log25 = s.params.log_pow(2.5);
    let mut families = Vec::new();

    let mut f = FamilyCheck::new("star_identity", "L*_i = N*_i for i >= 1".into());
    for row in rows {
        if row.l_star != row.n_star {
            f.flag(format!("i={}: L* = {}, N* = {}", row.i, row.l_star, row.n_star));
        }
    }
    families.push(f);

    let mut f = FamilyCheck::new(
        "product_form",
        "L*_i and R*_i equal their closed-form products (within f64 range)".into(),
    );
    let p = s.params.p;
    let mut prod = 1.0f64;
    for row in rows {
        let l_closed = s.params.delta * prod * prod;
        let r_closed = 2.0 * s.params.delta.sqrt() * s.params.log_pow(4.0) * prod;
        // deep in the decay both routes underflow; compare only meaningful
        // magnitudes
        let in_range = row.l_star.min(l_closed) > 1e-250 && row.r_star.min(r_closed) > 1e-250;
        if in_range
            && (relative_gap(row.l_star, l_closed) > 1e-9
                || relative_gap(row.r_star, r_closed) > 1e-9)
        {
            f.flag(format!(
                "i={}: L* = {} vs {}, R* = {} vs {}",
                row.i, row.l_star, l_closed, row.r_star, r_closed
            ));
        }
        let retain = s.rows[row.i as usize].retain;
        prod *= 1.0 - p * retain * retain;
    }
    families.push(f);

    let mut f = FamilyCheck::new(
        "star_ratio",
        format!("R*_i/L*_i < 2 sqrt(ln Delta) while L*_i > ln^7 Delta = {log7}"),
    );
    for row in rows {
        if row.l_star > log7 && !exceeds(2.0 * lg.sqrt(), row.r_star / row.l_star) {
            f.flag(format!("i={}: R*/L* = {}", row.i, row.r_star / row.l_star));
        }
    }
    families.push(f);

    let mut f = FamilyCheck::new(
        "tainted_gap",
        "R_i <= R*_i + sqrt(R*_i) ln^2.5 Delta for 1 <= i <= i0".into(),
    );
    for row in rows {
        let real = s.rows[row.i as usize].big_r;
        let cap = row.r_star + row.r_star.sqrt() * log25;
        if !within(real, cap) {
            f.flag(format!("i={}: R = {real} > {cap}", row.i));
        }
    }
    families.push(f);

    ScheduleBoundsReport { families }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Per-edge expected count of monitored paths realized in one step:
/// `L (2 (pN/L)^ell + (p/L) sum_{k=0}^{ell-1} (pN/L)^k)`.
/// Requires `pN/L < 1`.
pub fn expected_danger_bound(
    big_l: f64,
    big_n: f64,
    p: f64,
    ell: u32,
) -> Result<f64, ScheduleError> {
    if !exceeds(big_l, 0.0) {
        return Err(ScheduleError::Domain(format!("L must be positive, got {big_l}")));
    }
    let ratio = p * big_n / big_l;
    if !exceeds(1.0, ratio) {
        return Err(ScheduleError::Domain(format!("need pN/L < 1, got {ratio}")));
    }
    let mut geometric = 0.0;
    let mut term = 1.0;
    for _ in 0..ell {
        geometric += term;
        term *= ratio;
    }
    // after the loop, term == ratio^ell
    Ok(big_l * (2.0 * term + (p / big_l) * geometric))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_e(exp: f64) -> ScheduleParams {
        ScheduleParams::from_exponent(exp, 0.25).unwrap()
    }

    #[test]
    fn row_zero_matches_setup() {
        let params = params_e(20.0);
        let s = build_schedule(params).unwrap();
        let sqrt_delta = params.delta.sqrt();
        let log4 = 20.0f64.powi(4);
        let row0 = s.rows[0];
        assert_eq!(row0.big_l, params.delta + 6.0 * sqrt_delta * log4);
        assert_eq!(row0.big_n, params.delta);
        assert_eq!(row0.big_r, 2.0 * sqrt_delta * log4);
    }

    #[test]
    fn ell_defaults_to_ceil_of_twice_log() {
        assert_eq!(params_e(20.0).ell, 40);
        let p = ScheduleParams::new(16.0, 0.25).unwrap();
        assert_eq!(p.ell, (2.0 * 16.0f64.ln()).ceil() as u32);
    }

    #[test]
    fn rows_reproduce_from_predecessor_bit_for_bit() {
        let s = build_schedule(params_e(20.0)).unwrap();
        for w in s.rows.windows(2) {
            let (a, b) = (w[0], w[1]);
            let lg2 = s.params.log_delta * s.params.log_delta;
            let shrink = 1.0 - s.params.p * a.retain * a.retain;
            assert_eq!(b.big_l, a.big_l * a.keep * a.keep - a.big_l.sqrt() * lg2);
            assert_eq!(b.big_n, a.big_n * a.keep * shrink + a.big_n.sqrt() * lg2);
            assert_eq!(b.big_r, a.big_r * shrink + a.big_r.sqrt() * lg2);
            assert_eq!(b.retain, retain_probability(s.params.p, b.big_l, b.big_n));
            assert_eq!(
                b.keep,
                keep_probability(s.params.p, b.big_l, b.big_n, b.retain)
            );
        }
    }

    #[test]
    fn list_sizes_strictly_decrease() {
        let s = build_schedule(params_e(20.0)).unwrap();
        for w in s.rows.windows(2) {
            assert!(w[1].big_l < w[0].big_l);
        }
    }

    #[test]
    fn coin_probabilities_stay_in_unit_interval_when_ordered() {
        for exp in [15.0, 20.0, 30.0, 40.0] {
            let s = build_schedule(params_e(exp)).unwrap();
            for row in &s.rows {
                if row.big_l > row.big_n && row.big_n >= 1.0 {
                    assert!((0.0..=1.0).contains(&row.retain), "retain at i={}", row.i);
                    assert!((0.0..=1.0).contains(&row.keep), "keep at i={}", row.i);
                }
            }
        }
    }

    #[test]
    fn stops_at_first_row_below_threshold() {
        let s = build_schedule(params_e(20.0)).unwrap();
        let stop = 3.0 * 20.0f64.powi(7);
        let last = s.rows.last().unwrap();
        assert!(last.big_l < stop);
        for row in &s.rows[..s.rows.len() - 1] {
            assert!(row.big_l >= stop);
        }
        assert_eq!(s.i0 as usize, s.rows.len() - 1);
    }

    #[test]
    fn small_delta_report_is_produced_with_failures() {
        let s = build_schedule(ScheduleParams::new(16.0, 0.25).unwrap()).unwrap();
        let report = check_schedule_bounds(&s);
        assert_eq!(report.families.len(), 5);
        // the bounds target large Delta; at 16 some families are expected to fail
        assert!(!report.pass());
    }

    #[test]
    fn untainted_base_and_identity() {
        let s = build_schedule(params_e(20.0)).unwrap();
        let rows = build_untainted(&s);
        assert_eq!(rows[0].i, 1);
        assert_eq!(rows[0].l_star, s.params.delta);
        assert_eq!(
            rows[0].r_star,
            2.0 * s.params.delta.sqrt() * 20.0f64.powi(4)
        );
        for row in &rows {
            assert_eq!(row.l_star, row.n_star);
            assert_eq!(
                row.keep_star,
                1.0 - s.params.p * s.rows[row.i as usize].retain.powi(2)
            );
        }
        let report = check_untainted_relations(&s, &rows);
        // the algebraic identities hold at any size; the tainted/untainted
        // gap is an asymptotic statement checked in the acceptance suite
        for family in &report.families {
            if family.id != "tainted_gap" {
                assert!(family.pass, "{}: {:?}", family.id, family.failures);
            }
        }
    }

    #[test]
    fn danger_bound_degenerate_and_unit_cases() {
        // N = 0: only the k=0 term of the geometric sum survives
        let v = expected_danger_bound(10.0, 0.0, 0.25, 6).unwrap();
        assert!((v - 0.25).abs() < 1e-15);

        // L = N with p^ell <= p/L gives at most 4p
        let l = 64.0;
        let ell = 12; // 0.25^12 = 6e-8 <= 0.25/64
        let v = expected_danger_bound(l, l, 0.25, ell).unwrap();
        assert!(v <= 1.0, "got {v}");

        assert!(expected_danger_bound(4.0, 16.0, 0.25, 4).is_err());
        assert!(expected_danger_bound(4.0, 16.1, 0.25, 4).is_err());
    }

    #[test]
    fn danger_bound_matches_direct_summation() {
        let (l, n, p, ell) = (8.0, 4.0, 0.25, 6u32);
        let direct = {
            let ratio: f64 = p * n / l;
            let sum: f64 = (0..ell).map(|k| ratio.powi(k as i32)).sum();
            l * (2.0 * ratio.powi(ell as i32) + (p / l) * sum)
        };
        let v = expected_danger_bound(l, n, p, ell).unwrap();
        assert!((v - direct).abs() <= 1e-12 * direct);
    }
}
