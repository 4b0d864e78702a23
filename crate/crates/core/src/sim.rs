//! Monte-Carlo simulation of the two-way relay: joint ML detection at the
//! relay, adaptive clustering, broadcast, and decoding at both end nodes.
//!
//! Every random draw comes from a ChaCha8 stream addressed by position, so
//! results are bit-identical for any number of worker threads.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::CodebookSelector;
use crate::constellation::{build_qam, Constellation, Kind};
use crate::error::{domain, Error, Result};
use crate::latin::{xor_square, Codebook, LatinSquare};

/// Fade ratios with `|H_A|` below this are redrawn.
pub const FADE_GUARD: f64 = 1e-12;

// Trials per parallel work item and random words reserved per trial/block.
const CHUNK: u64 = 1024;
const WORDS_PER_TRIAL: u128 = 64;
const WORDS_PER_BLOCK: u128 = 64;
const FADE_STREAM: u64 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "LS", alias = "ls")]
    Ls,
    #[serde(rename = "XOR", alias = "xor")]
    Xor,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Ls => "LS",
            Scheme::Xor => "XOR",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LS" => Ok(Scheme::Ls),
            "XOR" => Ok(Scheme::Xor),
            _ => domain(format!("unknown scheme {s:?}, expected LS or XOR")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Rayleigh,
    Rician,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::Rayleigh => "rayleigh",
            ChannelKind::Rician => "rician",
        })
    }
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rayleigh" => Ok(ChannelKind::Rayleigh),
            "rician" => Ok(ChannelKind::Rician),
            _ => domain(format!("unknown channel {s:?}, expected rayleigh or rician")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    /// Rician K factor in dB; ignored for Rayleigh.
    #[serde(default)]
    pub rician_k_db: f64,
    #[serde(default)]
    pub link_variance_db: f64,
}

impl ChannelModel {
    pub fn rayleigh() -> Self {
        ChannelModel { kind: ChannelKind::Rayleigh, rician_k_db: 0.0, link_variance_db: 0.0 }
    }

    pub fn rician(k_db: f64) -> Self {
        ChannelModel { kind: ChannelKind::Rician, rician_k_db: k_db, link_variance_db: 0.0 }
    }

    /// One coefficient with power `10^(link_variance_db/10)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let amp = 10f64.powf(self.link_variance_db / 20.0);
        let scatter = complex_normal(rng);
        let h = match self.kind {
            ChannelKind::Rayleigh => scatter,
            ChannelKind::Rician => {
                let k = 10f64.powf(self.rician_k_db / 10.0);
                Complex64::new((k / (k + 1.0)).sqrt(), 0.0) + scatter * (1.0 / (k + 1.0)).sqrt()
            }
        };
        h * amp
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * FRAC_1_SQRT_2
}

/// Coefficients of one fade block: relay uplinks and the two downlinks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fades {
    pub h_a: Complex64,
    pub h_b: Complex64,
    pub h_a_bc: Complex64,
    pub h_b_bc: Complex64,
}

impl Fades {
    pub fn ratio(&self) -> Complex64 {
        self.h_b / self.h_a
    }
}

pub fn sample_fades<R: Rng + ?Sized>(model: &ChannelModel, rng: &mut R) -> Fades {
    let h_a = loop {
        let h = model.sample(rng);
        if h.norm() >= FADE_GUARD {
            break h;
        }
    };
    Fades { h_a, h_b: model.sample(rng), h_a_bc: model.sample(rng), h_b_bc: model.sample(rng) }
}

/// Joint ML estimate of `(k, l)` from `y = H_A x_A + H_B x_B + n`; the first
/// minimum in row-major order wins.
pub fn ma_phase_ml(points: &[Complex64], h_a: Complex64, h_b: Complex64, y: Complex64) -> (usize, usize) {
    let hb: Vec<Complex64> = points.iter().map(|p| h_b * p).collect();
    let mut best = (f64::INFINITY, 0, 0);
    for (k, pa) in points.iter().enumerate() {
        let r = y - h_a * pa;
        for (l, q) in hb.iter().enumerate() {
            let d = (r - q).norm_sqr();
            if d < best.0 {
                best = (d, k, l);
            }
        }
    }
    (best.1, best.2)
}

/// Broadcast signal set with `t` points for end nodes of size `m`, unit
/// average energy.
///
/// Square QAM when `t` is a power of four, otherwise the `t` lowest-energy
/// points of the smallest square lattice holding `t` points, ties by angle.
pub fn bc_constellation(m: usize, t: usize) -> Result<Vec<Complex64>> {
    if t < m.max(2) || t > m * m {
        return domain(format!("broadcast size {t} outside [{m}, {}]", m * m));
    }
    if t.is_power_of_two() && t.trailing_zeros().is_multiple_of(2) {
        return Ok(build_qam(t)?.normalized_points());
    }
    let s = (1..).find(|s| s * s >= t).expect("t is finite") as i64;
    let mut pts: Vec<(i64, f64, Complex64)> = Vec::with_capacity((s * s) as usize);
    for a in 0..s {
        for b in 0..s {
            let (re, im) = (2 * a - (s - 1), 2 * b - (s - 1));
            let mut arg = (im as f64).atan2(re as f64);
            if arg < 0.0 {
                arg += 2.0 * PI;
            }
            pts.push((re * re + im * im, arg, Complex64::new(re as f64, im as f64)));
        }
    }
    pts.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    pts.truncate(t);
    let energy = pts.iter().map(|p| p.2.norm_sqr()).sum::<f64>() / t as f64;
    Ok(pts.into_iter().map(|p| p.2 / energy.sqrt()).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Node A: owns the row label, recovers the column label.
    A,
    /// Node B: owns the column label, recovers the row label.
    B,
}

/// Recover the partner's label from the broadcast `y = h s + n`.
///
/// If the ML symbol does not occur in the node's own row (column), the
/// decision is ML restricted to the symbols that do.
pub fn end_node_decode(
    bc: &[Complex64],
    map: &LatinSquare,
    side: Side,
    own: usize,
    h: Complex64,
    y: Complex64,
) -> usize {
    let nearest = |cands: &mut dyn Iterator<Item = (usize, usize)>| {
        let mut best = (f64::INFINITY, 0);
        for (label, s) in cands {
            let d = (y - h * bc[s]).norm_sqr();
            if d < best.0 {
                best = (d, label);
            }
        }
        best.1
    };
    let s = nearest(&mut (0..bc.len()).map(|s| (s, s)));
    let hit = match side {
        Side::A => map.col_of(own, s),
        Side::B => map.row_of(own, s),
    };
    hit.unwrap_or_else(|| {
        let m = map.order();
        match side {
            Side::A => nearest(&mut (0..m).map(|l| (l, map.get(own, l)))),
            Side::B => nearest(&mut (0..m).map(|k| (k, map.get(k, own)))),
        }
    })
}

fn default_block() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub constellation: Kind,
    #[serde(rename = "M")]
    pub m: usize,
    pub scheme: Scheme,
    pub snr_grid_db: Vec<f64>,
    pub trials_per_point: u64,
    pub seed: u64,
    pub channel: ChannelModel,
    /// Trials sharing one fade realisation.
    #[serde(default = "default_block")]
    pub block_fading: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials_per_point == 0 {
            return domain("trials_per_point must be at least 1");
        }
        if self.block_fading == 0 {
            return domain("block_fading must be at least 1");
        }
        if self.snr_grid_db.is_empty() {
            return domain("snr grid is empty");
        }
        if self.snr_grid_db.windows(2).any(|w| w[0] >= w[1]) {
            return domain("snr grid must be strictly increasing");
        }
        if self.snr_grid_db.iter().any(|x| !x.is_finite()) {
            return domain("snr grid values must be finite");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub trials: u64,
    pub bit_errors: u64,
    pub bits_sent: u64,
}

impl BerPoint {
    pub fn ber(&self) -> f64 {
        if self.bits_sent == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits_sent as f64
        }
    }
}

/// Noise samples of one trial: relay, node A, node B, at unit variance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Noise {
    pub relay: Complex64,
    pub a: Complex64,
    pub b: Complex64,
}

/// Outcome of one channel use in both directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialOutcome {
    /// Entry of the map list used by the relay.
    pub map: usize,
    /// `B`'s label as decoded at `A`.
    pub at_a: usize,
    /// `A`'s label as decoded at `B`.
    pub at_b: usize,
}

/// Everything needed to run trials for one scheme and constellation.
pub struct Engine {
    points: Vec<Complex64>,
    bits: u32,
    maps: Vec<(LatinSquare, usize)>,
    broadcast: Vec<Vec<Complex64>>,
    selector: Option<CodebookSelector>,
}

impl Engine {
    pub fn new(c: &Constellation, scheme: Scheme, codebook: Option<&Codebook>) -> Result<Self> {
        let squares: Vec<LatinSquare> = match scheme {
            Scheme::Xor => vec![xor_square(c.size())?],
            Scheme::Ls => {
                let book = codebook.ok_or_else(|| Error::Domain("the LS scheme needs a codebook".into()))?;
                if book.kind() != c.kind() || book.order() != c.size() || book.is_empty() {
                    return domain(format!(
                        "codebook is for {}-{} with {} entries, simulation uses {}-{}",
                        book.order(),
                        book.kind(),
                        book.len(),
                        c.size(),
                        c.kind()
                    ));
                }
                book.entries().iter().map(|e| e.square.clone()).collect()
            }
        };
        let mut by_t: HashMap<usize, usize> = HashMap::new();
        let mut broadcast = Vec::new();
        let mut maps = Vec::with_capacity(squares.len());
        for sq in squares {
            let t = sq.symbols();
            let slot = match by_t.get(&t) {
                Some(&i) => i,
                None => {
                    broadcast.push(bc_constellation(c.size(), t)?);
                    by_t.insert(t, broadcast.len() - 1);
                    broadcast.len() - 1
                }
            };
            maps.push((sq, slot));
        }
        let selector = match (scheme, codebook) {
            (Scheme::Ls, Some(book)) => Some(CodebookSelector::new(c, book)),
            _ => None,
        };
        Ok(Engine { points: c.normalized_points(), bits: c.bits_per_symbol(), maps, broadcast, selector })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn map(&self, i: usize) -> &LatinSquare {
        &self.maps[i].0
    }

    /// Map index used for fade ratio `z`.
    pub fn select(&self, z: Complex64) -> usize {
        self.selector.as_ref().map_or(0, |s| s.select(z).index)
    }

    /// Run one exchange of labels `k` (A) and `l` (B) with noise of standard
    /// deviation `sigma` applied to the unit-variance samples in `noise`.
    pub fn trial(&self, fades: &Fades, map: usize, k: usize, l: usize, sigma: f64, noise: &Noise) -> TrialOutcome {
        let pts = &self.points;
        let y = fades.h_a * pts[k] + fades.h_b * pts[l] + noise.relay * sigma;
        let (kh, lh) = ma_phase_ml(pts, fades.h_a, fades.h_b, y);
        let (sq, slot) = &self.maps[map];
        let bc = &self.broadcast[*slot];
        let s = bc[sq.get(kh, lh)];
        let y_a = fades.h_a_bc * s + noise.a * sigma;
        let y_b = fades.h_b_bc * s + noise.b * sigma;
        TrialOutcome {
            map,
            at_a: end_node_decode(bc, sq, Side::A, k, fades.h_a_bc, y_a),
            at_b: end_node_decode(bc, sq, Side::B, l, fades.h_b_bc, y_b),
        }
    }

    fn bits_per_trial(&self) -> u64 {
        2 * self.bits as u64
    }
}

fn stream(seed: u64, id: u64, words: u128) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng.set_word_pos(words);
    rng
}

/// Fades of block `b`; shared by every SNR point and scheme with the same seed.
pub fn block_fades(cfg: &SimConfig, block: u64) -> Fades {
    let mut rng = stream(cfg.seed, FADE_STREAM, block as u128 * WORDS_PER_BLOCK);
    sample_fades(&cfg.channel, &mut rng)
}

/// Bit error rate at every SNR point of `cfg`.
pub fn run_ber(cfg: &SimConfig, codebook: Option<&Codebook>) -> Result<Vec<BerPoint>> {
    cfg.validate()?;
    let c = Constellation::build(cfg.constellation, cfg.m)?;
    let engine = Engine::new(&c, cfg.scheme, codebook)?;
    let m = c.size();
    let chunks = cfg.trials_per_point.div_ceil(CHUNK);
    let mut out = Vec::with_capacity(cfg.snr_grid_db.len());
    for (si, &snr) in cfg.snr_grid_db.iter().enumerate() {
        let sigma = 10f64.powf(-snr / 20.0);
        let bit_errors: u64 = (0..chunks)
            .into_par_iter()
            .map(|ch| {
                let start = ch * CHUNK;
                let end = (start + CHUNK).min(cfg.trials_per_point);
                let mut rng = stream(cfg.seed, 1 + si as u64, start as u128 * WORDS_PER_TRIAL);
                let mut current: Option<(u64, Fades, usize)> = None;
                let mut errors = 0u64;
                for trial in start..end {
                    let block = trial / cfg.block_fading;
                    let (fades, map) = match current {
                        Some((b, f, i)) if b == block => (f, i),
                        _ => {
                            let f = block_fades(cfg, block);
                            let i = engine.select(f.ratio());
                            current = Some((block, f, i));
                            (f, i)
                        }
                    };
                    let k = rng.random_range(0..m);
                    let l = rng.random_range(0..m);
                    let noise = Noise {
                        relay: complex_normal(&mut rng),
                        a: complex_normal(&mut rng),
                        b: complex_normal(&mut rng),
                    };
                    let r = engine.trial(&fades, map, k, l, sigma, &noise);
                    errors += ((l ^ r.at_a).count_ones() + (k ^ r.at_b).count_ones()) as u64;
                }
                errors
            })
            .sum();
        out.push(BerPoint {
            snr_db: snr,
            trials: cfg.trials_per_point,
            bit_errors,
            bits_sent: cfg.trials_per_point * engine.bits_per_trial(),
        });
    }
    Ok(out)
}

pub const CSV_HEADER: &str = "scheme,constellation,M,channel,rician_k_db,snr_db,trials,bit_errors,bits,ber";

pub fn write_csv_header<W: Write>(w: &mut W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    Ok(())
}

pub fn write_csv_rows<W: Write>(w: &mut W, cfg: &SimConfig, points: &[BerPoint]) -> Result<()> {
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{:e}",
            cfg.scheme,
            cfg.constellation,
            cfg.m,
            cfg.channel.kind,
            cfg.channel.rician_k_db,
            p.snr_db,
            p.trials,
            p.bit_errors,
            p.bits_sent,
            p.ber()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::build_pam;
    use crate::latin::{build_codebook, CodebookOptions};

    fn moments(model: ChannelModel, n: usize, seed: u64) -> (f64, Complex64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut power = 0.0;
        let mut mean = Complex64::new(0.0, 0.0);
        for _ in 0..n {
            let h = model.sample(&mut rng);
            power += h.norm_sqr();
            mean += h;
        }
        (power / n as f64, mean / n as f64)
    }

    #[test]
    fn rayleigh_unit_power() {
        let (p, mean) = moments(ChannelModel::rayleigh(), 1_000_000, 1);
        assert!((p - 1.0).abs() < 0.02, "{p}");
        assert!(mean.norm() < 0.01);
    }

    #[test]
    fn rician_power_split() {
        let (p, mean) = moments(ChannelModel::rician(5.0), 1_000_000, 2);
        let k = 10f64.powf(0.5);
        assert!((p - 1.0).abs() < 0.02, "{p}");
        assert!((mean.norm_sqr() / (k / (k + 1.0)) - 1.0).abs() < 0.02);
    }

    #[test]
    fn rician_low_k_is_rayleigh() {
        let (p, mean) = moments(ChannelModel::rician(-40.0), 1_000_000, 3);
        assert!((p - 1.0).abs() < 0.02);
        assert!(mean.norm_sqr() < 1e-3);
    }

    #[test]
    fn link_variance_scales_power() {
        let mut model = ChannelModel::rayleigh();
        model.link_variance_db = 3.0;
        let (p, _) = moments(model, 200_000, 4);
        assert!((p / 10f64.powf(0.3) - 1.0).abs() < 0.02);
    }

    #[test]
    fn fades_repeat_with_seed() {
        let a: Vec<Fades> = (0..10)
            .map(|_| ChaCha8Rng::seed_from_u64(9))
            .map(|mut r| sample_fades(&ChannelModel::rayleigh(), &mut r))
            .collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn ml_noiseless_recovers_pair() {
        let c = build_qam(16).unwrap();
        let pts = c.normalized_points();
        let (ha, hb) = (Complex64::new(0.8, -0.3), Complex64::new(-0.2, 1.1));
        for k in 0..16 {
            for l in 0..16 {
                assert_eq!(ma_phase_ml(&pts, ha, hb, ha * pts[k] + hb * pts[l]), (k, l));
            }
        }
    }

    #[test]
    fn ml_tie_at_singular_fade_takes_first() {
        let c = build_pam(2).unwrap();
        let pts = c.normalized_points();
        let one = Complex64::new(1.0, 0.0);
        // (0,1) and (1,0) both land on 0
        assert_eq!(ma_phase_ml(&pts, one, one, Complex64::new(0.0, 0.0)), (0, 1));
    }

    #[test]
    fn broadcast_sets() {
        let q16 = build_qam(16).unwrap().normalized_points();
        assert_eq!(bc_constellation(16, 16).unwrap(), q16);
        assert_eq!(bc_constellation(4, 4).unwrap(), build_qam(4).unwrap().normalized_points());
        let p20 = bc_constellation(16, 20).unwrap();
        assert_eq!(p20.len(), 20);
        let energy: f64 = p20.iter().map(|p| p.norm_sqr()).sum::<f64>() / 20.0;
        assert!((energy - 1.0).abs() < 1e-12);
        let corner = p20.iter().map(|p| p.re.abs().max(p.im.abs())).fold(0.0, f64::max);
        let max_norm = p20.iter().map(|p| p.norm()).fold(0.0, f64::max);
        // no corners of the 5x5 grid
        assert!(max_norm < corner * 2f64.sqrt() - 1e-9);
        assert!(bc_constellation(16, 15).is_err());
        assert!(bc_constellation(4, 17).is_err());
    }

    #[test]
    fn bpsk_example_decoding() {
        let sq = LatinSquare::from_rows(&[vec![0, 1], vec![1, 0]]).unwrap();
        let bc = bc_constellation(2, 2).unwrap();
        let h = Complex64::new(0.7, 0.2);
        assert_eq!(end_node_decode(&bc, &sq, Side::A, 0, h, h * bc[1]), 1);
        assert_eq!(end_node_decode(&bc, &sq, Side::B, 1, h, h * bc[0]), 1);
    }

    #[test]
    fn row_miss_falls_back_to_row_symbols() {
        let c = build_qam(4).unwrap();
        let book = build_codebook(&c, &CodebookOptions::for_order(4)).unwrap();
        let e = book.entries().iter().find(|e| e.square.symbols() == 5).unwrap();
        let sq = &e.square;
        let bc = bc_constellation(4, 5).unwrap();
        let own = 0;
        let missing = (0..5).find(|&s| sq.col_of(own, s).is_none()).unwrap();
        let h = Complex64::new(1.0, 0.0);
        let y = bc[missing];
        let got = end_node_decode(&bc, sq, Side::A, own, h, y);
        let best = (0..4)
            .min_by(|&a, &b| (y - bc[sq.get(own, a)]).norm().total_cmp(&(y - bc[sq.get(own, b)]).norm()))
            .unwrap();
        assert_eq!(got, best);
    }

    fn config(kind: Kind, m: usize, scheme: Scheme, trials: u64) -> SimConfig {
        SimConfig {
            constellation: kind,
            m,
            scheme,
            snr_grid_db: vec![0.0, 10.0, 60.0],
            trials_per_point: trials,
            seed: 42,
            channel: ChannelModel::rician(5.0),
            block_fading: 1,
        }
    }

    #[test]
    fn high_snr_is_error_free() {
        let c = build_qam(4).unwrap();
        let book = build_codebook(&c, &CodebookOptions::for_order(4)).unwrap();
        let pts = run_ber(&config(Kind::Qam, 4, Scheme::Ls, 3000), Some(&book)).unwrap();
        assert_eq!(pts[2].bit_errors, 0);
        assert!(pts[0].ber() > pts[1].ber());
        assert_eq!(pts[0].bits_sent, 3000 * 4);
    }

    #[test]
    fn same_result_for_any_thread_count() {
        let c = build_qam(4).unwrap();
        let book = build_codebook(&c, &CodebookOptions::for_order(4)).unwrap();
        let mut cfg = config(Kind::Qam, 4, Scheme::Ls, 5000);
        cfg.block_fading = 7;
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_ber(&cfg, Some(&book)).unwrap())
        };
        assert_eq!(run(1), run(3));
        assert_eq!(run(2), run(2));
    }

    #[test]
    fn zero_noise_exchange_is_exact() {
        let c = build_qam(4).unwrap();
        let book = build_codebook(&c, &CodebookOptions::for_order(4)).unwrap();
        let engine = Engine::new(&c, Scheme::Ls, Some(&book)).unwrap();
        let cfg = config(Kind::Qam, 4, Scheme::Ls, 1);
        for b in 0..500 {
            let f = block_fades(&cfg, b);
            let map = engine.select(f.ratio());
            for k in 0..4 {
                for l in 0..4 {
                    let r = engine.trial(&f, map, k, l, 0.0, &Noise::default());
                    assert_eq!((r.at_a, r.at_b), (l, k));
                }
            }
        }
    }

    #[test]
    fn ls_needs_codebook() {
        assert!(run_ber(&config(Kind::Qam, 4, Scheme::Ls, 10), None).is_err());
        let mut cfg = config(Kind::Qam, 4, Scheme::Xor, 10);
        cfg.snr_grid_db = vec![5.0, 5.0];
        assert!(run_ber(&cfg, None).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = config(Kind::Psk, 16, Scheme::Xor, 100);
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"M\":16") && text.contains("\"XOR\"") && text.contains("\"rician\""));
        let back: SimConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn csv_rows() {
        let cfg = config(Kind::Qam, 4, Scheme::Xor, 10);
        let pts = [BerPoint { snr_db: 10.0, trials: 10, bit_errors: 3, bits_sent: 40 }];
        let mut buf = Vec::new();
        write_csv_header(&mut buf).unwrap();
        write_csv_rows(&mut buf, &cfg, &pts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, format!("{CSV_HEADER}\nXOR,QAM,4,rician,5,10,10,3,40,7.5e-2\n"));
    }
}
