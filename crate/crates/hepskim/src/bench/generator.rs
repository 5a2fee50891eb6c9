use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use hepskim_core::{analysis_schema, Event, Met, Particle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use super::BenchError;
use crate::engine::DatasetKind;
use crate::storage::{write_evt, EvtSummary, WriteOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightDist {
    Constant(f64),
    /// +1 with probability `p_plus`, otherwise -1.
    Signed {
        p_plus: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub n_events: u64,
    pub kind: DatasetKind,
    /// Mean of the exponential MET spectrum, GeV.
    pub met_scale: f64,
    pub mean_jets: f64,
    /// Ignored for data, whose weights are exactly 1.0.
    pub weights: WeightDist,
    /// Event number of the first event minus one.
    pub first_event: u64,
}

impl GeneratorSpec {
    pub fn new(seed: u64, n_events: u64, kind: DatasetKind) -> Self {
        GeneratorSpec {
            seed,
            n_events,
            kind,
            met_scale: 100.0,
            mean_jets: 3.0,
            weights: WeightDist::Constant(1.0),
            first_event: 0,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidSpec(m));
        if !(self.met_scale.is_finite() && self.met_scale > 0.0) {
            return bad(format!("met scale must be finite and > 0, got {}", self.met_scale));
        }
        if !(self.mean_jets.is_finite() && self.mean_jets >= 0.0) {
            return bad(format!(
                "mean jet multiplicity must be finite and >= 0, got {}",
                self.mean_jets
            ));
        }
        match self.weights {
            WeightDist::Constant(w) if !w.is_finite() => bad(format!("constant weight must be finite, got {w}")),
            WeightDist::Signed { p_plus } if !(0.0..=1.0).contains(&p_plus) => {
                bad(format!("p_plus must lie in [0, 1], got {p_plus}"))
            }
            _ => Ok(()),
        }
    }

    /// The events, lazily.
    pub fn events(&self) -> Result<impl Iterator<Item = Event> + '_, BenchError> {
        self.validate()?;
        let mut g = Sampler::new(self);
        Ok((0..self.n_events).map(move |i| g.event(self.first_event + i + 1)))
    }
}

struct Sampler<'a> {
    spec: &'a GeneratorSpec,
    rng: ChaCha8Rng,
    counts: [Option<Poisson<f64>>; 5],
}

/// (mean multiplicity, pt offset GeV, pt scale GeV, mass GeV; negative mass draws exponential)
const SPECIES: [(f64, f64, f64, f64); 4] = [
    (0.3, 5.0, 20.0, 0.105_658),
    (0.3, 5.0, 20.0, 0.000_511),
    (0.1, 20.0, 20.0, 1.776_86),
    (0.2, 10.0, 20.0, 0.0),
];

impl<'a> Sampler<'a> {
    fn new(spec: &'a GeneratorSpec) -> Self {
        let poisson = |mean: f64| (mean > 0.0).then(|| Poisson::new(mean).expect("positive finite mean"));
        Sampler {
            spec,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            counts: [
                poisson(SPECIES[0].0),
                poisson(SPECIES[1].0),
                poisson(SPECIES[2].0),
                poisson(SPECIES[3].0),
                poisson(spec.mean_jets),
            ],
        }
    }

    fn exp(&mut self, scale: f64) -> f64 {
        let x: f64 = Exp1.sample(&mut self.rng);
        scale * x
    }

    fn phi(&mut self) -> f64 {
        self.rng.random_range(-PI..PI)
    }

    fn particles(&mut self, species: usize) -> Vec<Particle> {
        let n = match &self.counts[species] {
            Some(p) => p.sample(&mut self.rng) as usize,
            None => 0,
        };
        let mut out: Vec<Particle> = (0..n)
            .map(|_| {
                let (pt, mass) = match SPECIES.get(species) {
                    Some(&(_, offset, scale, mass)) => (offset + self.exp(scale), mass),
                    None => (20.0 + self.exp(40.0), 2.0 + self.exp(8.0)),
                };
                Particle {
                    pt,
                    eta: self.rng.random_range(-2.5..2.5),
                    phi: self.phi(),
                    mass,
                    id: self.rng.random_range(0..8),
                }
            })
            .collect();
        out.sort_by(|a, b| b.pt.total_cmp(&a.pt));
        out
    }

    fn event(&mut self, number: u64) -> Event {
        let weight = match (self.spec.kind, self.spec.weights) {
            (DatasetKind::Data, _) => 1.0,
            (DatasetKind::Mc, WeightDist::Constant(w)) => w,
            (DatasetKind::Mc, WeightDist::Signed { p_plus }) => {
                if self.rng.random_bool(p_plus) {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        let met = Met {
            pt: self.exp(self.spec.met_scale),
            phi: self.phi(),
        };
        Event {
            run: 1,
            lumi: (number / 1000 + 1) as i64,
            event: number as i64,
            weight,
            met,
            muons: self.particles(0),
            electrons: self.particles(1),
            taus: self.particles(2),
            photons: self.particles(3),
            jets: self.particles(4),
        }
    }
}

/// Writes `spec.n_events` generated events to one EVT file.
pub fn generate(spec: &GeneratorSpec, path: &Path, opts: WriteOptions) -> Result<EvtSummary, BenchError> {
    let events = spec.events()?.map(|e| e.to_value());
    write_evt(path, &analysis_schema(), events, opts).map_err(|source| BenchError::Storage {
        path: path.to_path_buf(),
        source,
    })
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Splits the spec over `n_files` files `<prefix>_NNN.evt` in `dir`. Each
/// file has its own derived seed; event numbers continue across files.
pub fn generate_corpus(
    spec: &GeneratorSpec,
    dir: &Path,
    prefix: &str,
    n_files: usize,
    opts: WriteOptions,
) -> Result<Vec<PathBuf>, BenchError> {
    if n_files == 0 {
        return Err(BenchError::InvalidSpec("file count must be at least 1".into()));
    }
    spec.validate()?;
    let (base, extra) = (spec.n_events / n_files as u64, spec.n_events % n_files as u64);
    let mut first = spec.first_event;
    let mut paths = Vec::with_capacity(n_files);
    for i in 0..n_files {
        let n = base + u64::from((i as u64) < extra);
        let part = GeneratorSpec {
            seed: splitmix64(spec.seed ^ (i as u64).wrapping_mul(0x2545_f491_4f6c_dd1d)),
            n_events: n,
            first_event: first,
            ..spec.clone()
        };
        let path = dir.join(format!("{prefix}_{i:03}.evt"));
        generate(&part, &path, opts)?;
        paths.push(path);
        first += n;
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_are_physical_and_deterministic() {
        let spec = GeneratorSpec {
            weights: WeightDist::Signed { p_plus: 0.7 },
            ..GeneratorSpec::new(7, 500, DatasetKind::Mc)
        };
        let a: Vec<Event> = spec.events().unwrap().collect();
        let b: Vec<Event> = spec.events().unwrap().collect();
        assert_eq!(a, b);
        assert!(a.iter().all(Event::is_physical));
        assert!(a.iter().all(|e| e.weight == 1.0 || e.weight == -1.0));
        assert!(a.iter().any(|e| e.weight < 0.0));
        assert_eq!(a[0].event, 1);
        assert_eq!(a[499].event, 500);
    }

    #[test]
    fn data_weights_are_one() {
        let spec = GeneratorSpec {
            weights: WeightDist::Constant(3.0),
            ..GeneratorSpec::new(1, 200, DatasetKind::Data)
        };
        assert!(spec.events().unwrap().all(|e| e.weight == 1.0));
    }

    #[test]
    fn zero_jets_mean() {
        let spec = GeneratorSpec {
            mean_jets: 0.0,
            ..GeneratorSpec::new(1, 50, DatasetKind::Mc)
        };
        assert!(spec.events().unwrap().all(|e| e.jets.is_empty()));
    }

    #[test]
    fn invalid_specs() {
        let mut s = GeneratorSpec::new(1, 1, DatasetKind::Mc);
        s.met_scale = 0.0;
        assert!(s.validate().is_err());
        let mut s = GeneratorSpec::new(1, 1, DatasetKind::Mc);
        s.weights = WeightDist::Signed { p_plus: 1.5 };
        assert!(s.validate().is_err());
    }
}
