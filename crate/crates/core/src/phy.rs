//! Physical-layer and compute model: the uplink Shannon rate, rates under
//! equal sharing among concurrent streams, and the scalar power solvers that
//! both optimizers rely on.

use serde::{Deserialize, Serialize};

use crate::error::{OffloadError, Result};

pub const DEFAULT_P_MAX: f64 = 10.0;

/// Platform constants. `snr_gain` is the composite channel factor
/// gamma / (N0 * B) in 1/W; it is kept together with its dB form so that
/// profiles survive a save/load cycle unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatformProfile {
    /// Local CPU rate, cycles/s.
    pub f_local: f64,
    /// Remote CPU rate, cycles/s.
    pub f_remote: f64,
    /// Local processing power, W.
    pub p_local: f64,
    /// RF circuitry power while transmitting or receiving, W.
    pub p_rf: f64,
    /// Baseband decoding power while receiving, W.
    pub p_rx: f64,
    /// Downlink rate, bits/s.
    pub c_dl: f64,
    /// Uplink bandwidth, Hz.
    pub bandwidth: f64,
    pub snr_gain_db: f64,
    pub snr_gain: f64,
    /// Normalizing bandwidth of the shared-downlink rate, Hz.
    pub dl_bandwidth: f64,
    pub p_max: f64,
    pub p_min: f64,
}

/// On-disk layout of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileFile {
    pub f_local: f64,
    pub f_remote: f64,
    pub p_local: f64,
    pub p_rf: f64,
    pub p_rx: f64,
    pub c_dl: f64,
    pub bandwidth: f64,
    pub snr_gain_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dl_bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_min: Option<f64>,
}

impl PlatformProfile {
    pub fn from_file(file: &ProfileFile) -> Result<Self> {
        let profile = PlatformProfile {
            f_local: file.f_local,
            f_remote: file.f_remote,
            p_local: file.p_local,
            p_rf: file.p_rf,
            p_rx: file.p_rx,
            c_dl: file.c_dl,
            bandwidth: file.bandwidth,
            snr_gain_db: file.snr_gain_db,
            snr_gain: 10f64.powf(file.snr_gain_db / 10.0),
            dl_bandwidth: file.dl_bandwidth.unwrap_or(file.bandwidth),
            p_max: file.p_max.unwrap_or(DEFAULT_P_MAX),
            p_min: file.p_min.unwrap_or(0.0),
        };
        profile.check()?;
        Ok(profile)
    }

    pub fn to_file(&self) -> ProfileFile {
        ProfileFile {
            f_local: self.f_local,
            f_remote: self.f_remote,
            p_local: self.p_local,
            p_rf: self.p_rf,
            p_rx: self.p_rx,
            c_dl: self.c_dl,
            bandwidth: self.bandwidth,
            snr_gain_db: self.snr_gain_db,
            dl_bandwidth: Some(self.dl_bandwidth),
            p_max: Some(self.p_max),
            p_min: Some(self.p_min),
        }
    }

    pub fn check(&self) -> Result<()> {
        let positive = [
            ("f_local", self.f_local),
            ("f_remote", self.f_remote),
            ("p_local", self.p_local),
            ("c_dl", self.c_dl),
            ("bandwidth", self.bandwidth),
            ("snr_gain", self.snr_gain),
            ("dl_bandwidth", self.dl_bandwidth),
            ("p_max", self.p_max),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(OffloadError::InvalidProfile(format!("{name} must be > 0")));
            }
        }
        for (name, value) in [("p_rf", self.p_rf), ("p_rx", self.p_rx), ("p_min", self.p_min)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(OffloadError::InvalidProfile(format!("{name} must be >= 0")));
            }
        }
        if self.p_min >= self.p_max {
            return Err(OffloadError::InvalidProfile("p_min must be < p_max".into()));
        }
        Ok(())
    }

    /// Uplink rate B log2(1 + snr_gain p), without input checks.
    pub fn uplink_rate(&self, p: f64) -> f64 {
        self.bandwidth * (self.snr_gain * p).ln_1p() / std::f64::consts::LN_2
    }

    pub fn local_time(&self, cycles: f64) -> f64 {
        cycles / self.f_local
    }

    pub fn remote_time(&self, cycles: f64) -> f64 {
        cycles / self.f_remote
    }
}

/// Numbers of concurrent uploads, downloads, local and remote computations
/// assumed by the parallel planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcurrencyProfile {
    pub n_ul: u32,
    pub n_dl: u32,
    pub n_l: u32,
    pub n_r: u32,
}

impl ConcurrencyProfile {
    pub fn uniform(n: u32) -> Self {
        ConcurrencyProfile { n_ul: n, n_dl: n, n_l: n, n_r: n }
    }

    pub fn check(&self) -> Result<()> {
        if self.n_ul == 0 || self.n_dl == 0 || self.n_l == 0 || self.n_r == 0 {
            return Err(OffloadError::InvalidArgument("concurrency counts must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for ConcurrencyProfile {
    fn default() -> Self {
        ConcurrencyProfile::uniform(1)
    }
}

pub fn uplink_capacity(p: f64, prof: &PlatformProfile) -> Result<f64> {
    if !(p >= 0.0) {
        return Err(OffloadError::InvalidArgument(format!("negative power {p}")));
    }
    Ok(prof.uplink_rate(p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParallelRates {
    pub ul: f64,
    pub dl: f64,
    pub f_l: f64,
    pub f_r: f64,
}

/// Per-stream uplink rate when the band is split equally among `n_ul` streams.
pub fn parallel_uplink_rate(p: f64, prof: &PlatformProfile, conc: &ConcurrencyProfile) -> f64 {
    let n = f64::from(conc.n_ul);
    prof.uplink_rate(n * p) / n
}

/// Per-stream downlink rate with `n_dl` concurrent streams. The downlink rate
/// is turned into a spectral efficiency over `dl_bandwidth` before sharing.
pub fn parallel_downlink_rate(prof: &PlatformProfile, conc: &ConcurrencyProfile) -> f64 {
    let n = f64::from(conc.n_dl);
    let s = prof.c_dl / prof.dl_bandwidth;
    // log2(1 + (2^s - 1) n) = s + log2(n - (n - 1) 2^-s), finite for any s.
    let log_term = s + (n - (n - 1.0) * (-s).exp2()).log2();
    prof.dl_bandwidth * log_term / n
}

pub fn parallel_rates(
    p: f64,
    prof: &PlatformProfile,
    conc: &ConcurrencyProfile,
) -> Result<ParallelRates> {
    if !(p >= 0.0) {
        return Err(OffloadError::InvalidArgument(format!("negative power {p}")));
    }
    conc.check()?;
    Ok(ParallelRates {
        ul: parallel_uplink_rate(p, prof, conc),
        dl: parallel_downlink_rate(prof, conc),
        f_l: prof.f_local / f64::from(conc.n_l),
        f_r: prof.f_remote / f64::from(conc.n_r),
    })
}

pub const GOLDEN_TOL: f64 = 1e-9;
pub const GOLDEN_MAX_ITER: usize = 200;

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
/// Stops once the bracket is narrower than `tol` relative to its midpoint
/// (floored at `tol` absolute when the bracket sits near zero).
pub fn golden_section_min<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol * mid.abs().max(tol) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Energy-per-bit style ratio (p + c) / rate(p); +inf where the rate vanishes.
fn power_ratio(p: f64, c: f64, rate: f64) -> f64 {
    if rate > 0.0 {
        (p + c) / rate
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerialPower {
    pub power: f64,
    /// Set when p_rf + lambda = 0 and p_min = 0: the ratio has no minimizer,
    /// its infimum is approached as p -> 0.
    pub degenerate: bool,
}

/// Minimizer of (p + p_rf + lambda) / C(p) over [p_min, p_max]. The same
/// power is optimal for every edge.
pub fn optimal_serial_power(prof: &PlatformProfile, lambda: f64) -> Result<SerialPower> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(OffloadError::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    let c = prof.p_rf + lambda;
    if c == 0.0 {
        // p / C(p) is increasing: the floor is optimal.
        return Ok(SerialPower { power: prof.p_min, degenerate: prof.p_min == 0.0 });
    }
    let objective = |p: f64| power_ratio(p, c, prof.uplink_rate(p));
    let (p, fp) = golden_section_min(objective, prof.p_min, prof.p_max, GOLDEN_TOL, GOLDEN_MAX_ITER);
    let power = [(prof.p_min, objective(prof.p_min)), (p, fp), (prof.p_max, objective(prof.p_max))]
        .into_iter()
        .fold((p, fp), |best, cand| if cand.1 < best.1 { cand } else { best })
        .0;
    Ok(SerialPower { power, degenerate: false })
}

/// Minimizes (p + c) * bits / ul_rate(p) over [max(lo, p_min), min(hi, p_max)]
/// using the shared-uplink rate. Returns the power and its cost in J.
pub fn optimal_power_in_interval(
    prof: &PlatformProfile,
    conc: &ConcurrencyProfile,
    bits: f64,
    lo: f64,
    hi: f64,
    c: f64,
) -> Result<(f64, f64)> {
    if !(bits > 0.0) || !(c >= 0.0) || !(lo >= 0.0) || hi.is_nan() {
        return Err(OffloadError::InvalidArgument(format!(
            "bad power-interval problem: bits={bits}, c={c}, lo={lo}, hi={hi}"
        )));
    }
    let lo = lo.max(prof.p_min);
    let hi = hi.min(prof.p_max);
    if lo > hi {
        return Err(OffloadError::InfeasibleRegion { lo, hi });
    }
    let cost = |p: f64| bits * power_ratio(p, c, parallel_uplink_rate(p, prof, conc));
    let (p, fp) = if hi > lo {
        golden_section_min(cost, lo, hi, GOLDEN_TOL, GOLDEN_MAX_ITER)
    } else {
        (lo, cost(lo))
    };
    let mut best = (lo, cost(lo));
    for cand in [(p, fp), (hi, cost(hi))] {
        if cand.1 < best.1 {
            best = cand;
        }
    }
    Ok(best)
}

/// Power at which `bits` are delivered in exactly `duration` seconds over a
/// shared uplink with `n_ul` streams; +inf on overflow. No cap applied.
pub fn required_power(bits: f64, duration: f64, prof: &PlatformProfile, n_ul: u32) -> f64 {
    let n = f64::from(n_ul);
    let exponent = n * bits * std::f64::consts::LN_2 / (prof.bandwidth * duration);
    exponent.exp_m1() / (prof.snr_gain * n)
}

/// Smallest power whose shared-uplink rate delivers `bits` in `duration`.
pub fn power_for_duration(
    bits: f64,
    duration: f64,
    prof: &PlatformProfile,
    conc: &ConcurrencyProfile,
) -> Result<f64> {
    if !(duration > 0.0) {
        return Err(OffloadError::InvalidArgument(format!("duration must be > 0, got {duration}")));
    }
    let p = required_power(bits, duration, prof, conc.n_ul);
    if p > prof.p_max {
        return Err(OffloadError::ExceedsCap { required: p, cap: prof.p_max });
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::paper_profile;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn capacity_values() {
        let prof = paper_profile();
        assert_eq!(uplink_capacity(0.0, &prof).unwrap(), 0.0);
        // 1e6 * log2(1 + 10^2.7) evaluated at high precision.
        let c = uplink_capacity(1.0, &prof).unwrap();
        assert!(rel(c, 8.972_081_543e6) < 1e-9, "{c}");
        assert!(uplink_capacity(-1.0, &prof).is_err());
        let mut louder = prof.clone();
        louder.snr_gain *= 2.0;
        assert!(louder.uplink_rate(0.3) >= prof.uplink_rate(0.3));
    }

    #[test]
    fn capacity_is_concave_and_increasing() {
        let prof = paper_profile();
        let h = 1e-3;
        let mut p = h;
        while p < 10.0 {
            let (a, b, c) = (prof.uplink_rate(p - h), prof.uplink_rate(p), prof.uplink_rate(p + h));
            assert!(b > a && c > b);
            assert!(a - 2.0 * b + c < 0.0);
            p += 0.0371;
        }
    }

    #[test]
    fn parallel_rates_identity_at_one() {
        let prof = paper_profile();
        let r = parallel_rates(0.7, &prof, &ConcurrencyProfile::uniform(1)).unwrap();
        assert_eq!(r.ul, prof.uplink_rate(0.7));
        assert!(rel(r.dl, prof.c_dl) < 1e-15);
        assert_eq!(r.f_l, prof.f_local);
        assert_eq!(r.f_r, prof.f_remote);
    }

    #[test]
    fn shared_downlink_value() {
        let prof = paper_profile();
        let conc = ConcurrencyProfile { n_ul: 1, n_dl: 2, n_l: 1, n_r: 1 };
        // 1e6 * log2(1 + (2^200 - 1) * 2) / 2 = 1e6 * 201 / 2 (to double precision).
        let dl = parallel_downlink_rate(&prof, &conc);
        assert!(rel(dl, 100.5e6) < 1e-12, "{dl}");
        // Direct formula where it does not overflow.
        let mut small = prof.clone();
        small.c_dl = 3e6;
        let direct = 1e6 * (1.0 + (2f64.powi(3) - 1.0) * 2.0).log2() / 2.0;
        assert!(rel(parallel_downlink_rate(&small, &conc), direct) < 1e-14);
    }

    #[test]
    fn degenerate_serial_power() {
        let prof = paper_profile();
        let sp = optimal_serial_power(&prof, 0.0).unwrap();
        assert_eq!(sp.power, 0.0);
        assert!(sp.degenerate);
        assert!(optimal_serial_power(&prof, -1.0).is_err());
    }

    #[test]
    fn serial_power_matches_grid_scan() {
        let prof = paper_profile();
        let sp = optimal_serial_power(&prof, 1.0).unwrap();
        assert!(!sp.degenerate);
        let ratio = |p: f64| (p + 1.0) / prof.uplink_rate(p);
        let n = 1_000_000;
        let best = (1..=n)
            .map(|i| ratio(prof.p_max * i as f64 / n as f64))
            .fold(f64::INFINITY, f64::min);
        assert!(ratio(sp.power) <= best * (1.0 + 1e-12));
        assert!(rel(ratio(sp.power), best) < 1e-6);
        // Stationarity: C(p) = (p + c) C'(p).
        let p = sp.power;
        let dc = prof.bandwidth * prof.snr_gain
            / (std::f64::consts::LN_2 * (1.0 + prof.snr_gain * p));
        assert!(rel(prof.uplink_rate(p), (p + 1.0) * dc) < 1e-6);
    }

    #[test]
    fn serial_power_matches_lambert_closed_form() {
        // With x = 1 + g p the stationarity condition is x (ln x - 1) = g c - 1,
        // solved here by bisection on x.
        let prof = paper_profile();
        for &lambda in &[0.01, 0.1, 1.0, 10.0] {
            let target = prof.snr_gain * lambda - 1.0;
            let (mut lo, mut hi) = (1.0f64, 1e12f64);
            for _ in 0..300 {
                let mid = 0.5 * (lo + hi);
                if mid * (mid.ln() - 1.0) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let p_star = ((0.5 * (lo + hi)) - 1.0) / prof.snr_gain;
            let expected = p_star.clamp(prof.p_min, prof.p_max);
            let got = optimal_serial_power(&prof, lambda).unwrap().power;
            assert!(rel(got, expected) < 1e-6, "lambda={lambda}: {got} vs {expected}");
        }
    }

    #[test]
    fn interval_solver_cases() {
        let prof = paper_profile();
        let conc = ConcurrencyProfile::uniform(1);
        let bits = 2e6;
        // Constraint inactive: same as the serial optimum with lambda = c - p_rf.
        let c = 0.5;
        let free = optimal_serial_power(&prof, c - prof.p_rf).unwrap().power;
        let (p, _) = optimal_power_in_interval(&prof, &conc, bits, 0.0, f64::INFINITY, c).unwrap();
        assert!(rel(p, free) < 1e-6);
        // Interval entirely above the minimizer: the lower end wins.
        let (p, cost) = optimal_power_in_interval(&prof, &conc, bits, 5.0, 8.0, c).unwrap();
        assert_eq!(p, 5.0);
        assert_eq!(cost, bits * ((5.0 + c) / prof.uplink_rate(5.0)));
        // Empty after clamping to p_max.
        assert!(matches!(
            optimal_power_in_interval(&prof, &conc, bits, 11.0, 12.0, c),
            Err(OffloadError::InfeasibleRegion { .. })
        ));
    }

    #[test]
    fn power_for_duration_values() {
        let prof = paper_profile();
        let conc = ConcurrencyProfile::uniform(1);
        let p = power_for_duration(5e6, 1.0, &prof, &conc).unwrap();
        assert!(rel(p, 31.0 / 10f64.powf(2.7)) < 1e-12);
        assert!(rel(p, 0.061_853) < 1e-4);
        assert!(power_for_duration(5e6, 1e9, &prof, &conc).unwrap() < 1e-8);
        assert!(power_for_duration(5e6, 0.0, &prof, &conc).is_err());
        assert!(matches!(
            power_for_duration(5e8, 1.0, &prof, &conc),
            Err(OffloadError::ExceedsCap { .. })
        ));
    }

    proptest! {
        #[test]
        fn shared_uplink_never_exceeds_dedicated(p in 0.0f64..10.0, k in 1u32..8) {
            let prof = paper_profile();
            let conc = ConcurrencyProfile { n_ul: k, n_dl: 1, n_l: 1, n_r: 1 };
            let shared = parallel_uplink_rate(p, &prof, &conc);
            prop_assert!(shared <= prof.uplink_rate(p) * (1.0 + 1e-12));
            if k == 1 {
                prop_assert_eq!(shared, prof.uplink_rate(p));
            }
        }

        #[test]
        fn power_for_duration_round_trip(bits in 1e4f64..2e7, d in 0.5f64..50.0, k in 1u32..5) {
            let prof = paper_profile();
            let conc = ConcurrencyProfile::uniform(k);
            if let Ok(p) = power_for_duration(bits, d, &prof, &conc) {
                let delivered = parallel_uplink_rate(p, &prof, &conc) * d;
                prop_assert!(rel(delivered, bits) < 1e-9);
                let slower = power_for_duration(bits, d * 1.01, &prof, &conc).unwrap();
                prop_assert!(slower < p);
            }
        }

        #[test]
        fn interval_cost_bounded_by_unconstrained(
            bits in 1e5f64..1e7, a in 0.0f64..10.0, b in 0.0f64..10.0, c in 0.01f64..2.0
        ) {
            let prof = paper_profile();
            let conc = ConcurrencyProfile::uniform(1);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-6);
            let (_, unconstrained) = optimal_power_in_interval(&prof, &conc, bits, 0.0, f64::INFINITY, c).unwrap();
            let (p, cost) = optimal_power_in_interval(&prof, &conc, bits, lo, hi, c).unwrap();
            prop_assert!(p >= lo && p <= hi);
            prop_assert!(cost >= unconstrained * (1.0 - 1e-12));
            // Dense scan of the sub-interval.
            let scan = (0..=2000)
                .map(|i| lo + (hi - lo) * i as f64 / 2000.0)
                .map(|q| bits * (q + c) / prof.uplink_rate(q))
                .fold(f64::INFINITY, f64::min);
            prop_assert!(cost <= scan * (1.0 + 1e-9));
            // Fine local scan around the returned point.
            let h = (hi - lo) * 1e-4;
            for i in -50..=50 {
                let q = (p + h * f64::from(i)).clamp(lo, hi);
                prop_assert!(cost <= bits * (q + c) / prof.uplink_rate(q) * (1.0 + 1e-9));
            }
        }
    }
}
