//! Event-level Monte-Carlo of a two-arm photon-pair counting experiment.
//!
//! Pairs are emitted as a Poisson process with both photons at the same
//! instant. Each photon reaches its detector with the arm efficiency, and
//! each arm also sees an independent Poisson background. A detector with
//! dead time ignores any event that arrives before the dead time after the
//! last event it registered (non-paralyzable).
//!
//! Coincidences are tallied in two passes. First, registered photons whose
//! partner was also registered form true coincidences. Among the remaining
//! events, every signal–idler pair closer than ±τ_c/2 counts as one
//! accidental coincidence, so their expected rate is exactly `n_s n_i τ_c`
//! for uncorrelated arms. Pairs have no timing jitter, which means the
//! window only shapes the accidental channel.
//!
//! Random numbers come from ChaCha8 seeded with `seed_from_u64`. Independent
//! runs derived from one seed use separate ChaCha streams, so a power sweep
//! gives the same numbers whatever the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{accidental_rate, model_coincidence_rate, CorrelationCurve, CountRecord, CurvePoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Pairs emitted per second and mW of pump.
    pub pair_rate_per_mw: f64,
    pub pump_power_mw: f64,
    pub eta_s: f64,
    pub eta_i: f64,
    /// Uncorrelated counts per second in each arm.
    pub background_s: f64,
    pub background_i: f64,
    /// Full width of the coincidence window.
    pub window_s: f64,
    /// 0 disables dead time.
    pub dead_time_s: f64,
    pub duration_s: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("pair rate", self.pair_rate_per_mw),
            ("pump power", self.pump_power_mw),
            ("signal background", self.background_s),
            ("idler background", self.background_i),
            ("coincidence window", self.window_s),
            ("dead time", self.dead_time_s),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} = {v} must be a non-negative number")));
            }
        }
        for (name, v) in [("eta_s", self.eta_s), ("eta_i", self.eta_i)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} must lie in [0, 1]")));
            }
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::invalid(format!(
                "duration {} s must be positive",
                self.duration_s
            )));
        }
        Ok(())
    }

    pub fn with_power(self, pump_power_mw: f64) -> Self {
        Self { pump_power_mw, ..self }
    }

    pub fn pair_rate(&self) -> f64 {
        self.pair_rate_per_mw * self.pump_power_mw
    }
}

/// Event tallies over the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCounts {
    pub pairs_emitted: u64,
    pub singles_s: u64,
    pub singles_i: u64,
    pub coincidences: u64,
    pub accidentals: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub singles_s: f64,
    pub singles_i: f64,
    /// True plus accidental coincidences per second.
    pub coincidences: f64,
    pub accidentals: f64,
    pub duration_s: f64,
    pub counts: RawCounts,
}

impl SimOutput {
    pub fn to_record(&self, window_s: f64, pump_power_mw: f64) -> CountRecord {
        CountRecord {
            singles_s: self.singles_s,
            singles_i: self.singles_i,
            coincidences: self.coincidences,
            window_s,
            pump_power_mw,
            duration_s: self.duration_s,
        }
    }
}

#[derive(Clone, Copy)]
struct Event {
    t: f64,
    pair: Option<u64>,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Poisson arrival times, drawn block by block so that long runs never hold
/// the whole timeline.
struct Arrivals {
    exp: Option<Exp<f64>>,
    next: f64,
}

impl Arrivals {
    fn new(rng: &mut ChaCha8Rng, rate: f64) -> Self {
        if rate <= 0.0 {
            return Self {
                exp: None,
                next: f64::INFINITY,
            };
        }
        let exp = Exp::new(rate).expect("positive rate");
        let next = exp.sample(rng);
        Self { exp: Some(exp), next }
    }

    fn until(&mut self, rng: &mut ChaCha8Rng, end: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if let Some(exp) = self.exp {
            while self.next < end {
                out.push(self.next);
                self.next += exp.sample(rng);
            }
        }
        out
    }
}

fn merge(a: Vec<Event>, b: &[f64]) -> Vec<Event> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut j = 0;
    for e in a {
        while j < b.len() && b[j] < e.t {
            out.push(Event { t: b[j], pair: None });
            j += 1;
        }
        out.push(e);
    }
    out.extend(b[j..].iter().map(|&t| Event { t, pair: None }));
    out
}

/// Drops events that arrive while the detector is dead. `free_at` carries
/// the detector state between blocks.
fn apply_dead_time(events: Vec<Event>, dead: f64, free_at: &mut f64) -> Vec<Event> {
    if dead <= 0.0 {
        return events;
    }
    let mut kept = Vec::with_capacity(events.len());
    for e in events {
        if e.t >= *free_at {
            *free_at = e.t + dead;
            kept.push(e);
        }
    }
    kept
}

/// Returns (true coincidences, unmatched signal times, unmatched idler times).
fn match_partners(s: &[Event], i: &[Event]) -> (u64, Vec<f64>, Vec<f64>) {
    // Pair ids increase with time, so the tagged events of each arm are
    // already sorted by id.
    let ids_s: Vec<(usize, u64)> = s
        .iter()
        .enumerate()
        .filter_map(|(k, e)| e.pair.map(|p| (k, p)))
        .collect();
    let ids_i: Vec<(usize, u64)> = i
        .iter()
        .enumerate()
        .filter_map(|(k, e)| e.pair.map(|p| (k, p)))
        .collect();
    let mut used_s = vec![false; s.len()];
    let mut used_i = vec![false; i.len()];
    let (mut a, mut b, mut n) = (0, 0, 0u64);
    while a < ids_s.len() && b < ids_i.len() {
        match ids_s[a].1.cmp(&ids_i[b].1) {
            std::cmp::Ordering::Less => a += 1,
            std::cmp::Ordering::Greater => b += 1,
            std::cmp::Ordering::Equal => {
                used_s[ids_s[a].0] = true;
                used_i[ids_i[b].0] = true;
                n += 1;
                a += 1;
                b += 1;
            }
        }
    }
    let rest = |ev: &[Event], used: &[bool]| -> Vec<f64> {
        ev.iter().zip(used).filter(|(_, &u)| !u).map(|(e, _)| e.t).collect()
    };
    (n, rest(s, &used_s), rest(i, &used_i))
}

/// Number of (signal, idler) pairs closer than `half_window`. Both slices
/// must be sorted.
fn count_window_pairs(s: &[f64], i: &[f64], half_window: f64) -> u64 {
    let mut lo = 0;
    let mut n = 0u64;
    for &t in s {
        while lo < i.len() && i[lo] < t - half_window {
            lo += 1;
        }
        n += i[lo..].iter().take_while(|&&u| u <= t + half_window).count() as u64;
    }
    n
}

/// Expected events per block of the timeline.
const EVENTS_PER_BLOCK: f64 = 1e6;

fn run(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> SimOutput {
    let t_end = cfg.duration_s;
    let half_window = 0.5 * cfg.window_s;
    let load = cfg.pair_rate() * (cfg.eta_s + cfg.eta_i) + cfg.background_s + cfg.background_i;
    let block = (EVENTS_PER_BLOCK / load.max(1.0)).max(1e3 * cfg.window_s).min(t_end);
    let blocks = (t_end / block).ceil().max(1.0) as u64;

    let mut pairs = Arrivals::new(rng, cfg.pair_rate());
    let mut bg_s = Arrivals::new(rng, cfg.background_s);
    let mut bg_i = Arrivals::new(rng, cfg.background_i);
    let (mut free_s, mut free_i) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let (mut tail_s, mut tail_i) = (Vec::new(), Vec::new());
    let mut next_id = 0u64;
    let mut counts = RawCounts {
        pairs_emitted: 0,
        singles_s: 0,
        singles_i: 0,
        coincidences: 0,
        accidentals: 0,
    };

    for b in 1..=blocks {
        let end = if b == blocks { t_end } else { b as f64 * block };
        let mut arm_s = Vec::new();
        let mut arm_i = Vec::new();
        for t in pairs.until(rng, end) {
            let pair = Some(next_id);
            next_id += 1;
            if rng.random_bool(cfg.eta_s) {
                arm_s.push(Event { t, pair });
            }
            if rng.random_bool(cfg.eta_i) {
                arm_i.push(Event { t, pair });
            }
        }
        let arm_s = apply_dead_time(merge(arm_s, &bg_s.until(rng, end)), cfg.dead_time_s, &mut free_s);
        let arm_i = apply_dead_time(merge(arm_i, &bg_i.until(rng, end)), cfg.dead_time_s, &mut free_i);
        counts.singles_s += arm_s.len() as u64;
        counts.singles_i += arm_i.len() as u64;

        let (true_pairs, rest_s, rest_i) = match_partners(&arm_s, &arm_i);
        // Pairs between the previous block's tail and this block, plus
        // pairs within this block; tail–tail pairs were counted already.
        let carried = count_window_pairs(&tail_s, &tail_i, half_window);
        let joined_s: Vec<f64> = tail_s.iter().chain(&rest_s).copied().collect();
        let joined_i: Vec<f64> = tail_i.iter().chain(&rest_i).copied().collect();
        let accidentals = count_window_pairs(&joined_s, &joined_i, half_window) - carried;
        counts.coincidences += true_pairs + accidentals;
        counts.accidentals += accidentals;

        let keep_from = end - half_window;
        tail_s = rest_s.into_iter().filter(|&t| t >= keep_from).collect();
        tail_i = rest_i.into_iter().filter(|&t| t >= keep_from).collect();
    }
    counts.pairs_emitted = next_id;

    SimOutput {
        singles_s: counts.singles_s as f64 / t_end,
        singles_i: counts.singles_i as f64 / t_end,
        coincidences: counts.coincidences as f64 / t_end,
        accidentals: counts.accidentals as f64 / t_end,
        duration_s: t_end,
        counts,
    }
}

/// One acquisition of `cfg.duration_s` seconds.
pub fn simulate_counts(cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    Ok(run(cfg, &mut rng_for(cfg.seed, 0)))
}

/// One acquisition per pump power; the k-th power uses stream k of the
/// configured seed, so the first entry equals `simulate_counts` at that
/// power.
pub fn simulate_power_sweep(cfg: &SimConfig, powers_mw: &[f64]) -> Result<Vec<(f64, SimOutput)>> {
    if powers_mw.is_empty() {
        return Err(Error::invalid("power sweep needs at least one pump power"));
    }
    for &p in powers_mw {
        cfg.with_power(p).validate()?;
    }
    Ok(powers_mw
        .par_iter()
        .enumerate()
        .map(|(k, &p)| {
            let c = cfg.with_power(p);
            (p, run(&c, &mut rng_for(cfg.seed, k as u64)))
        })
        .collect())
}

/// Mean coincidence rate and accidental floor seen by one detector pair of
/// the polarization analyzer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRates {
    /// R̄ of the ψ⁻ model.
    pub mean_rate: f64,
    /// Flat accidental floor added to every setting.
    pub accidentals: f64,
    /// Singles per analyzer port, as (signal, idler).
    pub port_singles: (f64, f64),
}

/// Analyzer rates implied by `cfg`. Each arm splits its photons over two
/// output ports, so one port pair sees a quarter of the detected pairs on
/// average and half of each arm's singles. The accidental floor uses the
/// geometric-mean arm efficiency as η.
pub fn scan_rates(cfg: &SimConfig) -> Result<ScanRates> {
    cfg.validate()?;
    let pairs = cfg.pair_rate();
    let mean_rate = 0.25 * pairs * cfg.eta_s * cfg.eta_i;
    let ns = 0.5 * (pairs * cfg.eta_s + cfg.background_s);
    let ni = 0.5 * (pairs * cfg.eta_i + cfg.background_i);
    let eta = (cfg.eta_s * cfg.eta_i).sqrt();
    Ok(ScanRates {
        mean_rate,
        accidentals: accidental_rate(ns, ni, cfg.window_s, eta)?,
        port_singles: (ns, ni),
    })
}

/// Polarization-correlation scan: for each (φ₁, φ₂) the coincidence count is
/// Poisson with mean `duration · (R̄ (1 − V cos 4(φ₁ − φ₂)) + floor)`.
pub fn simulate_correlation_scan(
    cfg: &SimConfig,
    visibility: f64,
    angles_deg: &[(f64, f64)],
) -> Result<CorrelationCurve> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::invalid(format!("visibility {visibility} must lie in [0, 1]")));
    }
    if angles_deg.is_empty() {
        return Err(Error::invalid("correlation scan needs at least one setting"));
    }
    let rates = scan_rates(cfg)?;
    let mut rng = rng_for(cfg.seed, 0);
    let mut points = Vec::with_capacity(angles_deg.len());
    for &(phi1, phi2) in angles_deg {
        if !(phi1.is_finite() && phi2.is_finite()) {
            return Err(Error::invalid("analyzer angles must be finite"));
        }
        let mean =
            cfg.duration_s * (model_coincidence_rate(phi1, phi2, visibility, rates.mean_rate)? + rates.accidentals);
        let n = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| Error::invalid(format!("Poisson mean {mean}: {e}")))?
                .sample(&mut rng)
        } else {
            0.0
        };
        points.push(CurvePoint {
            phi1_deg: phi1,
            phi2_deg: phi2,
            rate_hz: n / cfg.duration_s,
            duration_s: cfg.duration_s,
        });
    }
    Ok(CorrelationCurve::new(points))
}

/// φ₁ settings `0, step, …` below 180° paired with a fixed φ₂.
pub fn scan_angles(phi2_deg: f64, step_deg: f64) -> Result<Vec<(f64, f64)>> {
    if !(step_deg > 0.0 && step_deg <= 90.0) {
        return Err(Error::invalid(format!("scan step {step_deg}° must lie in (0, 90]")));
    }
    let n = (180.0 / step_deg - 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| (k as f64 * step_deg, phi2_deg)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> SimConfig {
        SimConfig {
            pair_rate_per_mw: 1000.0,
            pump_power_mw: 10.0,
            eta_s: 1.0,
            eta_i: 1.0,
            background_s: 0.0,
            background_i: 0.0,
            window_s: 6.8e-9,
            dead_time_s: 0.0,
            duration_s: 1.0,
            seed: 7,
        }
    }

    #[test]
    fn validation() {
        assert!(base().validate().is_ok());
        assert!(SimConfig { eta_s: 1.2, ..base() }.validate().is_err());
        assert!(SimConfig {
            duration_s: 0.0,
            ..base()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            background_i: -1.0,
            ..base()
        }
        .validate()
        .is_err());
        assert!(simulate_power_sweep(&base(), &[]).is_err());
        assert!(simulate_correlation_scan(&base(), 1.2, &[(0.0, 0.0)]).is_err());
    }

    #[test]
    fn lossless_pairs_all_coincide() {
        let out = simulate_counts(&base()).unwrap();
        assert_eq!(out.counts.singles_s, out.counts.pairs_emitted);
        assert_eq!(out.counts.coincidences, out.counts.singles_s);
        assert_eq!(out.counts.accidentals, 0);
    }

    #[test]
    fn dead_time_spacing() {
        let ev: Vec<Event> = [0.0, 0.5, 1.0, 1.2, 2.1]
            .iter()
            .map(|&t| Event { t, pair: None })
            .collect();
        let mut free = f64::NEG_INFINITY;
        let kept: Vec<f64> = apply_dead_time(ev, 1.0, &mut free).iter().map(|e| e.t).collect();
        assert_eq!(kept, vec![0.0, 1.0, 2.1]);
        assert_eq!(free, 3.1);
    }

    #[test]
    fn window_counts_every_close_pair() {
        assert_eq!(count_window_pairs(&[1.0, 1.05], &[1.02], 0.05), 2);
        assert_eq!(count_window_pairs(&[1.0], &[1.06], 0.05), 0);
        assert_eq!(count_window_pairs(&[1.0, 2.0], &[0.99, 2.04], 0.05), 2);
        assert_eq!(count_window_pairs(&[], &[1.0], 0.05), 0);
    }

    #[test]
    fn partners_take_priority() {
        let s = [Event { t: 1.0, pair: None }, Event { t: 1.0, pair: Some(3) }];
        let i = [Event { t: 1.0, pair: Some(3) }];
        let (n, rs, ri) = match_partners(&s, &i);
        assert_eq!((n, rs.len(), ri.len()), (1, 1, 0));
    }

    #[test]
    fn first_sweep_point_matches_single_run() {
        let cfg = SimConfig {
            eta_s: 0.3,
            eta_i: 0.4,
            background_s: 1e3,
            ..base()
        };
        let sweep = simulate_power_sweep(&cfg, &[5.0, 10.0]).unwrap();
        assert_eq!(sweep[0].1, simulate_counts(&cfg.with_power(5.0)).unwrap());
        assert_ne!(sweep[1].1, simulate_counts(&cfg.with_power(10.0)).unwrap());
    }

    #[test]
    fn scan_floor_and_mean() {
        let cfg = SimConfig {
            eta_s: 0.5,
            eta_i: 0.5,
            ..base()
        };
        let r = scan_rates(&cfg).unwrap();
        assert_eq!(r.mean_rate, 0.25 * 1e4 * 0.25);
        assert_eq!(r.port_singles, (2500.0, 2500.0));
        assert_eq!(scan_angles(0.0, 11.25).unwrap().len(), 16);
        assert!(scan_angles(0.0, 0.0).is_err());
    }
}
