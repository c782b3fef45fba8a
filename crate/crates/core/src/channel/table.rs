//! Conditional decoding probabilities for every interference scenario.
//!
//! LOS states are averaged analytically; shadowing and pointing errors are
//! averaged by Monte-Carlo. Every receiver has its own family of random
//! streams, one stream per sample index, with a fixed draw layout: a header
//! for the intended links followed by interferer draws interleaved by
//! interferer index. Consequently
//!
//! - all scenarios at a receiver reuse the same draws (common random
//!   numbers), so entries are exactly monotone in the interferer counts;
//! - an entry does not depend on how many UEs the table was built for;
//! - a standalone [`success_probability`] equals the table entry bit for bit.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sinr::{Channel, InterfererDraw};
use super::{InterferenceScenario, Link, Scheme};
use crate::config::SceneConfig;
use crate::error::{Error, Result};
use crate::numeric::{binomial_pmf, CompensatedSum};

pub const TABLE_FORMAT_VERSION: u32 = 1;

const CHUNK: usize = 2048;
const UE_SLOTS: usize = 8;
const RELAY_SIGNAL_SLOT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Receiver {
    Ap,
    Relay,
}

impl Receiver {
    fn of(link: Link) -> Self {
        match link {
            Link::UeToAp | Link::RelayToAp => Receiver::Ap,
            Link::UeToRelay => Receiver::Relay,
        }
    }

    fn tag(self) -> u64 {
        match self {
            Receiver::Ap => 0x41_50,
            Receiver::Relay => 0x52_4c,
        }
    }

    fn ue_link(self) -> Link {
        match self {
            Receiver::Ap => Link::UeToAp,
            Receiver::Relay => Link::UeToRelay,
        }
    }

    fn n_slots(self) -> usize {
        match self {
            Receiver::Ap => UE_SLOTS + 1,
            Receiver::Relay => UE_SLOTS,
        }
    }
}

fn ue_slot(scheme: Scheme, los: bool, relay_active: bool) -> usize {
    usize::from(relay_active) * 4 + (scheme as usize) * 2 + usize::from(!los)
}

/// Interferer categories in draw order.
const CATEGORIES: [(Scheme, bool); 4] = [
    (Scheme::Fd, true),
    (Scheme::Fd, false),
    (Scheme::Br, true),
    (Scheme::Br, false),
];

struct SampleDraws {
    sig_z: f64,
    sig_u_tx: f64,
    sig_u_rx: f64,
    relay_sig_z: f64,
    relay_sig_u_tx: f64,
    relay_sig_u_rx: f64,
    relay_int_z: f64,
    relay_int_u: f64,
    /// `interferers[k][category] = (shadow z, alignment uniform)`.
    interferers: Vec<[(f64, f64); 4]>,
}

impl SampleDraws {
    fn draw(rng: &mut ChaCha8Rng, max_interferers: usize) -> Self {
        let mut n = || -> f64 { rng.sample(StandardNormal) };
        let sig_z = n();
        let relay_sig_z = n();
        let relay_int_z = n();
        let sig_u_tx = rng.random();
        let sig_u_rx = rng.random();
        let relay_sig_u_tx = rng.random();
        let relay_sig_u_rx = rng.random();
        let relay_int_u = rng.random();
        let interferers = (0..max_interferers)
            .map(|_| {
                let mut row = [(0.0, 0.0); 4];
                for slot in row.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    let u: f64 = rng.random();
                    *slot = (z, u);
                }
                row
            })
            .collect();
        Self {
            sig_z,
            sig_u_tx,
            sig_u_rx,
            relay_sig_z,
            relay_sig_u_tx,
            relay_sig_u_rx,
            relay_int_z,
            relay_int_u,
            interferers,
        }
    }
}

fn base_rng(seed: u64, receiver: Receiver) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ receiver.tag().rotate_left(48))
}

/// All interferer-category count vectors with total at most `m`.
struct ComboIndex {
    m: usize,
    combos: Vec<[u8; 4]>,
    lookup: Vec<u32>,
}

impl ComboIndex {
    fn new(m: usize) -> Self {
        let side = m + 1;
        let mut lookup = vec![u32::MAX; side.pow(4)];
        let mut combos = Vec::new();
        for a in 0..=m {
            for b in 0..=m - a {
                for c in 0..=m - a - b {
                    for e in 0..=m - a - b - c {
                        lookup[((a * side + b) * side + c) * side + e] = combos.len() as u32;
                        combos.push([a as u8, b as u8, c as u8, e as u8]);
                    }
                }
            }
        }
        Self { m, combos, lookup }
    }

    fn index(&self, a: usize, b: usize, c: usize, e: usize) -> usize {
        let side = self.m + 1;
        self.lookup[((a * side + b) * side + c) * side + e] as usize
    }
}

/// Success counts per (interferer combination, intended-signal slot).
struct ReceiverCounts {
    receiver: Receiver,
    samples: u64,
    combos: ComboIndex,
    counts: Vec<u64>,
}

impl ReceiverCounts {
    fn run(ch: &Channel, receiver: Receiver, max_interferers: usize, samples: u32, seed: u64) -> Self {
        let combos = ComboIndex::new(max_interferers);
        let n_slots = receiver.n_slots();
        let width = combos.combos.len() * n_slots;
        let base = base_rng(seed, receiver);
        let chunks: Vec<(u64, u64)> = (0..u64::from(samples))
            .step_by(CHUNK)
            .map(|s| (s, (s + CHUNK as u64).min(u64::from(samples))))
            .collect();
        let counts = chunks
            .par_iter()
            .map(|&(lo, hi)| {
                let mut local = vec![0u32; width];
                let mut scratch = Scratch::new(max_interferers);
                for idx in lo..hi {
                    let mut rng = base.clone();
                    rng.set_stream(idx);
                    let draws = SampleDraws::draw(&mut rng, max_interferers);
                    scratch.evaluate(ch, receiver, &draws, &combos, &mut local);
                }
                local
            })
            .fold(
                || vec![0u64; width],
                |mut acc, local| {
                    for (a, l) in acc.iter_mut().zip(local) {
                        *a += u64::from(l);
                    }
                    acc
                },
            )
            .reduce(
                || vec![0u64; width],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            );
        Self {
            receiver,
            samples: u64::from(samples),
            combos,
            counts,
        }
    }

    fn count(&self, combo: usize, slot: usize) -> u64 {
        self.counts[combo * self.receiver.n_slots() + slot]
    }

    /// LOS-averaged success probability for a signal slot.
    fn assemble(
        &self,
        signal_weights: &[(usize, f64)],
        p_int_los: f64,
        n_fd: usize,
        n_br: usize,
    ) -> f64 {
        let w_fd = binomial_pmf(n_fd as u32, p_int_los);
        let w_br = binomial_pmf(n_br as u32, p_int_los);
        let mut acc = CompensatedSum::new();
        for &(slot, w_sig) in signal_weights {
            if w_sig == 0.0 {
                continue;
            }
            for (a, &wa) in w_fd.iter().enumerate() {
                for (c, &wc) in w_br.iter().enumerate() {
                    let w = w_sig * wa * wc;
                    if w == 0.0 {
                        continue;
                    }
                    let combo = self.combos.index(a, n_fd - a, c, n_br - c);
                    acc.add(w * self.count(combo, slot) as f64);
                }
            }
        }
        (acc.value() / self.samples as f64).clamp(0.0, 1.0)
    }

    fn probability(&self, ch: &Channel, sc: &InterferenceScenario) -> f64 {
        let p_int = ch.ue_budget(sc.link).p_los;
        let (n_fd, n_br) = (sc.n_fd as usize, sc.n_br as usize);
        match sc.link {
            Link::RelayToAp => self.assemble(&[(RELAY_SIGNAL_SLOT, 1.0)], p_int, n_fd, n_br),
            link => {
                let p_sig = ch.ue_budget(link).p_los;
                let slots = [
                    (ue_slot(sc.scheme, true, sc.relay_active), p_sig),
                    (ue_slot(sc.scheme, false, sc.relay_active), 1.0 - p_sig),
                ];
                self.assemble(&slots, p_int, n_fd, n_br)
            }
        }
    }
}

struct Scratch {
    prefix: [Vec<f64>; 4],
    signal: [f64; UE_SLOTS + 1],
    added: [f64; UE_SLOTS + 1],
    extra: [f64; UE_SLOTS + 1],
}

impl Scratch {
    fn new(m: usize) -> Self {
        Self {
            prefix: std::array::from_fn(|_| vec![0.0; m + 1]),
            signal: [0.0; UE_SLOTS + 1],
            added: [0.0; UE_SLOTS + 1],
            extra: [0.0; UE_SLOTS + 1],
        }
    }

    fn evaluate(
        &mut self,
        ch: &Channel,
        receiver: Receiver,
        d: &SampleDraws,
        combos: &ComboIndex,
        counts: &mut [u32],
    ) {
        let link = receiver.ue_link();
        let budget = ch.ue_budget(link);
        let g_rx = if d.sig_u_rx < ch.pg_f { ch.g_f } else { 0.0 };
        for scheme in Scheme::ALL {
            let (g, pg) = ch.tx_gain(scheme);
            let g_tx = if d.sig_u_tx < pg { g } else { 0.0 };
            for los in [true, false] {
                let p = ch.rx_power(budget, g_tx, g_rx, los, d.sig_z);
                for relay_active in [false, true] {
                    self.signal[ue_slot(scheme, los, relay_active)] = p;
                }
            }
        }
        let n_slots = receiver.n_slots();
        for slot in 0..UE_SLOTS {
            let relay_active = slot >= 4;
            let (added, extra) = match (receiver, relay_active) {
                (Receiver::Ap, true) => (
                    ch.relay_interference(&InterfererDraw {
                        los: true,
                        shadow_z: d.relay_int_z,
                        tx_aligned: d.relay_int_u < ch.pg_f,
                    }),
                    0.0,
                ),
                (Receiver::Relay, true) => (0.0, ch.self_interference()),
                (_, false) => (0.0, 0.0),
            };
            self.added[slot] = added;
            self.extra[slot] = extra;
        }
        if receiver == Receiver::Ap {
            let g_tx = if d.relay_sig_u_tx < ch.pg_f { ch.g_f } else { 0.0 };
            let g_rx = if d.relay_sig_u_rx < ch.pg_f { ch.g_f } else { 0.0 };
            self.signal[RELAY_SIGNAL_SLOT] = ch.rx_power(&ch.relay_ap, g_tx, g_rx, true, d.relay_sig_z);
            self.added[RELAY_SIGNAL_SLOT] = 0.0;
            self.extra[RELAY_SIGNAL_SLOT] = 0.0;
        }
        for (cat, &(scheme, los)) in CATEGORIES.iter().enumerate() {
            let pg = ch.tx_gain(scheme).1;
            let prefix = &mut self.prefix[cat];
            for (k, row) in d.interferers.iter().enumerate() {
                let (z, u) = row[cat];
                let p = ch.ue_interference(
                    link,
                    scheme,
                    &InterfererDraw {
                        los,
                        shadow_z: z,
                        tx_aligned: u < pg,
                    },
                );
                prefix[k + 1] = prefix[k] + p;
            }
        }
        let active: Vec<usize> = (0..n_slots).filter(|&s| self.signal[s] > 0.0).collect();
        if active.is_empty() {
            return;
        }
        let [p0, p1, p2, p3] = &self.prefix;
        for (ci, combo) in combos.combos.iter().enumerate() {
            let [a, b, c, e] = combo.map(usize::from);
            let interference = p0[a] + p1[b] + p2[c] + p3[e];
            let row = &mut counts[ci * n_slots..(ci + 1) * n_slots];
            for &s in &active {
                if ch.decodes(self.signal[s], interference + self.added[s], self.extra[s]) {
                    row[s] += 1;
                }
            }
        }
    }
}

/// Provenance of a [`SuccessTable`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub version: u32,
    /// Content hash of the channel-relevant configuration.
    pub config_hash: String,
    /// Largest UE count the table covers.
    pub n_ues: u32,
    pub n_samples: u32,
    pub seed: u64,
}

/// Immutable map from interference scenario to decoding probability.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessTable {
    meta: TableMetadata,
    entries: BTreeMap<InterferenceScenario, f64>,
}

impl SuccessTable {
    /// Every scenario reachable in a network of `n_ues` UEs.
    pub fn scenario_set(n_ues: u32) -> Vec<InterferenceScenario> {
        let mut out = Vec::new();
        for link in [Link::UeToAp, Link::UeToRelay] {
            for scheme in Scheme::ALL {
                for relay_active in [false, true] {
                    for n_fd in 0..n_ues {
                        for n_br in 0..n_ues - n_fd {
                            out.push(InterferenceScenario::new(link, scheme, n_fd, n_br, relay_active));
                        }
                    }
                }
            }
        }
        for n_fd in 0..=n_ues {
            for n_br in 0..=n_ues - n_fd {
                out.push(InterferenceScenario::new(Link::RelayToAp, Scheme::Fd, n_fd, n_br, false));
            }
        }
        out
    }

    /// Table filled by an arbitrary function (synthetic tables for tests and
    /// oracles).
    pub fn from_fn(n_ues: u32, mut f: impl FnMut(&InterferenceScenario) -> f64) -> Self {
        let entries = Self::scenario_set(n_ues)
            .into_iter()
            .map(|sc| {
                let p = f(&sc);
                (sc, p.clamp(0.0, 1.0))
            })
            .collect();
        Self {
            meta: TableMetadata {
                version: TABLE_FORMAT_VERSION,
                config_hash: "synthetic".into(),
                n_ues,
                n_samples: 0,
                seed: 0,
            },
            entries,
        }
    }

    pub fn metadata(&self) -> &TableMetadata {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&InterferenceScenario, f64)> {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    pub fn get(&self, sc: &InterferenceScenario) -> Option<f64> {
        self.entries.get(sc).copied()
    }

    /// Entry lookup that fails loudly on a missing scenario.
    #[inline]
    pub fn prob(&self, link: Link, scheme: Scheme, n_fd: u32, n_br: u32, relay_active: bool) -> Result<f64> {
        let sc = InterferenceScenario::new(link, scheme, n_fd, n_br, relay_active);
        self.get(&sc).ok_or(Error::MissingScenario(sc))
    }

    /// Ensure every scenario of an `n_ues` network is present.
    pub fn check_covers(&self, n_ues: u32) -> Result<()> {
        for sc in Self::scenario_set(n_ues) {
            if !self.entries.contains_key(&sc) {
                return Err(Error::MissingScenario(sc));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# mmrelay-success-table version={} hash={} n_ues={} samples={} seed={}",
            self.meta.version, self.meta.config_hash, self.meta.n_ues, self.meta.n_samples, self.meta.seed
        )?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["link", "scheme", "n_fd", "n_br", "relay_active", "probability"])?;
        for (sc, p) in self.iter() {
            csv.write_record([
                sc.link.as_str().to_string(),
                sc.scheme.as_str().to_string(),
                sc.n_fd.to_string(),
                sc.n_br.to_string(),
                sc.relay_active.to_string(),
                p.to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, origin: &Path) -> Result<Self> {
        let bad = |reason: String| Error::TableFormat {
            path: origin.to_path_buf(),
            reason,
        };
        let mut reader = BufReader::new(r);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let header = header
            .trim()
            .strip_prefix("# mmrelay-success-table ")
            .ok_or_else(|| bad("missing table header".into()))?;
        let mut fields = BTreeMap::new();
        for kv in header.split_whitespace() {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("bad header field `{kv}`")))?;
            fields.insert(k.to_string(), v.to_string());
        }
        let field = |k: &str| fields.get(k).cloned().ok_or_else(|| bad(format!("header lacks `{k}`")));
        let parse_u64 = |k: &str| -> Result<u64> {
            field(k)?.parse().map_err(|_| bad(format!("header field `{k}` is not an integer")))
        };
        let version = parse_u64("version")? as u32;
        if version != TABLE_FORMAT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let meta = TableMetadata {
            version,
            config_hash: field("hash")?,
            n_ues: parse_u64("n_ues")? as u32,
            n_samples: parse_u64("samples")? as u32,
            seed: parse_u64("seed")?,
        };
        let mut csv = csv::Reader::from_reader(reader);
        let mut entries = BTreeMap::new();
        for rec in csv.records() {
            let rec = rec?;
            if rec.len() != 6 {
                return Err(bad(format!("expected 6 columns, got {}", rec.len())));
            }
            let link = Link::parse(&rec[0]).ok_or_else(|| bad(format!("unknown link `{}`", &rec[0])))?;
            let scheme = Scheme::parse(&rec[1]).ok_or_else(|| bad(format!("unknown scheme `{}`", &rec[1])))?;
            let num = |s: &str| -> Result<u32> { s.parse().map_err(|_| bad(format!("bad count `{s}`"))) };
            let relay_active: bool = rec[4].parse().map_err(|_| bad(format!("bad flag `{}`", &rec[4])))?;
            let p: f64 = rec[5].parse().map_err(|_| bad(format!("bad probability `{}`", &rec[5])))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(bad(format!("probability {p} outside [0, 1]")));
            }
            let sc = InterferenceScenario::new(link, scheme, num(&rec[2])?, num(&rec[3])?, relay_active);
            entries.insert(sc, p);
        }
        let table = Self { meta, entries };
        table.check_covers(table.meta.n_ues).map_err(|e| bad(e.to_string()))?;
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let tmp = path.with_extension("csv.tmp");
        {
            let f = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
            self.write_csv(f)?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(f, path)
    }

    /// Cache file location for a configuration.
    pub fn cache_path(cfg: &SceneConfig, dir: &Path) -> PathBuf {
        let hash = cfg.channel_key().hash();
        dir.join(format!("table-{}.csv", &hash[..16]))
    }

    /// Load the cached table for `cfg` if it matches and covers `cfg.n_ues`,
    /// otherwise build and store it. Returns the table and whether the cache
    /// was hit.
    pub fn load_or_build(cfg: &SceneConfig, dir: &Path) -> Result<(Self, bool)> {
        let path = Self::cache_path(cfg, dir);
        let hash = cfg.channel_key().hash();
        let mut capacity = cfg.n_ues;
        if path.exists() {
            if let Ok(t) = Self::load(&path) {
                if t.meta.config_hash == hash && t.meta.n_ues >= cfg.n_ues {
                    return Ok((t, true));
                }
                capacity = capacity.max(t.meta.n_ues);
            }
        }
        let table = build_success_table_for(cfg, capacity)?;
        table.save(&path)?;
        Ok((table, false))
    }
}

/// Build the table covering `cfg.n_ues` UEs.
pub fn build_success_table(cfg: &SceneConfig) -> Result<SuccessTable> {
    build_success_table_for(cfg, cfg.n_ues)
}

/// Build a table covering networks of up to `capacity` UEs.
pub fn build_success_table_for(cfg: &SceneConfig, capacity: u32) -> Result<SuccessTable> {
    let ch = Channel::new(cfg)?;
    let capacity = capacity.max(1);
    let n = capacity as usize;
    let (ap, relay) = rayon::join(
        || ReceiverCounts::run(&ch, Receiver::Ap, n, cfg.n_shadow_samples, cfg.channel_seed),
        || ReceiverCounts::run(&ch, Receiver::Relay, n - 1, cfg.n_shadow_samples, cfg.channel_seed),
    );
    let entries = SuccessTable::scenario_set(capacity)
        .into_iter()
        .map(|sc| {
            let counts = match Receiver::of(sc.link) {
                Receiver::Ap => &ap,
                Receiver::Relay => &relay,
            };
            (sc, counts.probability(&ch, &sc))
        })
        .collect();
    Ok(SuccessTable {
        meta: TableMetadata {
            version: TABLE_FORMAT_VERSION,
            config_hash: cfg.channel_key().hash(),
            n_ues: capacity,
            n_samples: cfg.n_shadow_samples,
            seed: cfg.channel_seed,
        },
        entries,
    })
}

/// Decoding probability of a single scenario. Identical to the
/// corresponding entry of [`build_success_table`].
pub fn success_probability(sc: &InterferenceScenario, cfg: &SceneConfig) -> Result<f64> {
    sc.check(cfg.n_ues)?;
    let ch = Channel::new(cfg)?;
    let receiver = Receiver::of(sc.link);
    let m = (sc.n_fd + sc.n_br) as usize;
    let counts = ReceiverCounts::run(&ch, receiver, m, cfg.n_shadow_samples, cfg.channel_seed);
    Ok(counts.probability(&ch, sc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_sinr, LinkDraw, ShadowAndLosRealization};

    fn small_cfg() -> SceneConfig {
        SceneConfig {
            n_ues: 3,
            n_shadow_samples: 4000,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn scenario_set_sizes() {
        // UE links: 2 links x 2 schemes x 2 flags x N(N+1)/2; relay: (N+1)(N+2)/2.
        for n in 1..6u32 {
            let ue = 8 * n * (n + 1) / 2;
            let relay = (n + 1) * (n + 2) / 2;
            assert_eq!(SuccessTable::scenario_set(n).len() as u32, ue + relay);
        }
        let one = SuccessTable::scenario_set(1);
        assert!(one
            .iter()
            .filter(|s| s.link != Link::RelayToAp)
            .all(|s| s.n_fd == 0 && s.n_br == 0));
    }

    #[test]
    fn entries_are_probabilities_and_monotone() {
        let cfg = small_cfg();
        let t = build_success_table(&cfg).unwrap();
        t.check_covers(3).unwrap();
        for (sc, p) in t.iter() {
            assert!((0.0..=1.0).contains(&p));
            let more_fd = InterferenceScenario { n_fd: sc.n_fd + 1, ..*sc };
            let more_br = InterferenceScenario { n_br: sc.n_br + 1, ..*sc };
            for next in [more_fd, more_br] {
                if let Some(q) = t.get(&next) {
                    assert!(q <= p, "{next} = {q} > {sc} = {p}");
                }
            }
        }
    }

    #[test]
    fn relay_interference_and_self_interference_only_hurt() {
        let mut cfg = small_cfg();
        cfg.beta = 1e-9;
        let t = build_success_table(&cfg).unwrap();
        for (sc, p) in t.iter().filter(|(s, _)| s.relay_active) {
            let quiet = InterferenceScenario { relay_active: false, ..*sc };
            assert!(p <= t.get(&quiet).unwrap());
        }
    }

    #[test]
    fn perfect_cancellation_makes_entries_constant() {
        let mut cfg = small_cfg();
        cfg.alpha = 0.0;
        cfg.beta = 0.0;
        let t = build_success_table(&cfg).unwrap();
        for (sc, p) in t.iter() {
            let base = InterferenceScenario {
                n_fd: 0,
                n_br: 0,
                relay_active: false,
                ..*sc
            };
            assert!((p - t.get(&base).unwrap()).abs() < 1e-12, "{sc}");
        }
    }

    #[test]
    fn standalone_matches_table_and_is_reproducible() {
        let cfg = small_cfg();
        let t = build_success_table(&cfg).unwrap();
        for sc in [
            InterferenceScenario::new(Link::UeToRelay, Scheme::Fd, 0, 0, false),
            InterferenceScenario::new(Link::UeToAp, Scheme::Br, 1, 1, true),
            InterferenceScenario::new(Link::RelayToAp, Scheme::Fd, 2, 1, false),
        ] {
            let a = success_probability(&sc, &cfg).unwrap();
            let b = success_probability(&sc, &cfg).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
            assert_eq!(a.to_bits(), t.get(&sc).unwrap().to_bits(), "{sc}");
        }
    }

    #[test]
    fn entries_do_not_depend_on_capacity() {
        let cfg = small_cfg();
        let small = build_success_table_for(&cfg, 2).unwrap();
        let big = build_success_table_for(&cfg, 4).unwrap();
        for (sc, p) in small.iter() {
            assert_eq!(p.to_bits(), big.get(sc).unwrap().to_bits());
        }
    }

    #[test]
    fn threshold_limits() {
        let mut cfg = small_cfg();
        let sc = InterferenceScenario::new(Link::UeToAp, Scheme::Fd, 1, 1, false);
        cfg.gamma_db = -400.0;
        assert_eq!(success_probability(&sc, &cfg).unwrap(), 1.0);
        cfg.gamma_db = 400.0;
        assert_eq!(success_probability(&sc, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn broadcast_loses_gain() {
        let cfg = small_cfg();
        let t = build_success_table(&cfg).unwrap();
        let br = t.prob(Link::UeToAp, Scheme::Br, 0, 0, false).unwrap();
        let fd = t.prob(Link::UeToAp, Scheme::Fd, 0, 0, false).unwrap();
        assert!(br <= fd);
    }

    /// Re-derive one entry by evaluating `sample_sinr` on the same draws for
    /// every LOS assignment and weighting the outcomes.
    #[test]
    fn fast_path_agrees_with_direct_sinr() {
        let cfg = SceneConfig {
            n_shadow_samples: 300,
            sigma_e_deg: 5.0,
            beta: 1e-7,
            ..small_cfg()
        };
        let ch = Channel::new(&cfg).unwrap();
        let sc = InterferenceScenario::new(Link::UeToAp, Scheme::Br, 1, 1, true);
        let (n_fd, n_br) = (1usize, 1usize);
        let p_sig = ch.ue_ap.p_los;
        let p_i = ch.ue_ap.p_los;
        let base = base_rng(cfg.channel_seed, Receiver::Ap);
        let mut acc = 0.0;
        for idx in 0..u64::from(cfg.n_shadow_samples) {
            let mut rng = base.clone();
            rng.set_stream(idx);
            let d = SampleDraws::draw(&mut rng, n_fd + n_br);
            for sig_los in [true, false] {
                for fd_los in [true, false] {
                    for br_los in [true, false] {
                        let w = (if sig_los { p_sig } else { 1.0 - p_sig })
                            * (if fd_los { p_i } else { 1.0 - p_i })
                            * (if br_los { p_i } else { 1.0 - p_i });
                        let cat = |scheme: Scheme, los: bool| {
                            CATEGORIES.iter().position(|&c| c == (scheme, los)).unwrap()
                        };
                        let (zf, uf) = d.interferers[0][cat(Scheme::Fd, fd_los)];
                        let (zb, ub) = d.interferers[0][cat(Scheme::Br, br_los)];
                        let real = ShadowAndLosRealization {
                            signal: LinkDraw {
                                los: sig_los,
                                shadow_z: d.sig_z,
                                tx_aligned: d.sig_u_tx < ch.pg_b,
                                rx_aligned: d.sig_u_rx < ch.pg_f,
                            },
                            fd_interferers: vec![InterfererDraw { los: fd_los, shadow_z: zf, tx_aligned: uf < ch.pg_f }],
                            br_interferers: vec![InterfererDraw { los: br_los, shadow_z: zb, tx_aligned: ub < ch.pg_b }],
                            relay: Some(InterfererDraw {
                                los: true,
                                shadow_z: d.relay_int_z,
                                tx_aligned: d.relay_int_u < ch.pg_f,
                            }),
                        };
                        if sample_sinr(&sc, &real, &ch, cfg.n_ues).unwrap() >= ch.gamma {
                            acc += w;
                        }
                    }
                }
            }
        }
        let direct = acc / f64::from(cfg.n_shadow_samples);
        let fast = success_probability(&sc, &cfg).unwrap();
        assert!((direct - fast).abs() < 1e-12, "{direct} vs {fast}");
    }

    #[test]
    fn csv_round_trip_and_cache() {
        let cfg = small_cfg();
        let dir = tempfile::tempdir().unwrap();
        let (t1, hit1) = SuccessTable::load_or_build(&cfg, dir.path()).unwrap();
        assert!(!hit1);
        let (t2, hit2) = SuccessTable::load_or_build(&cfg, dir.path()).unwrap();
        assert!(hit2);
        assert_eq!(t1, t2);
        let mut bigger = cfg.clone();
        bigger.n_ues = 4;
        let (t3, hit3) = SuccessTable::load_or_build(&bigger, dir.path()).unwrap();
        assert!(!hit3);
        assert_eq!(t3.metadata().n_ues, 4);
        let mut fewer = cfg.clone();
        fewer.n_ues = 2;
        let (_, hit4) = SuccessTable::load_or_build(&fewer, dir.path()).unwrap();
        assert!(hit4);
    }

    #[test]
    fn malformed_cache_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "link,scheme\n").unwrap();
        assert!(matches!(SuccessTable::load(&p), Err(Error::TableFormat { .. })));
    }
}
