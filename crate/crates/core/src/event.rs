//! The concrete analysis event layout.
//!
//! Datasets are processed as generic [`Value`] records; [`Event`] is the typed
//! view of the layout produced by the synthetic generator and used by
//! host-code selections.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::schema::{PrimitiveKind, Schema, SchemaNode};
use crate::value::Value;

/// Names of the particle collections, in schema order.
pub const COLLECTIONS: [&str; 5] = ["muons", "electrons", "taus", "photons", "jets"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    /// GeV
    pub pt: f64,
    pub eta: f64,
    /// radians, in [-pi, pi)
    pub phi: f64,
    /// GeV
    pub mass: f64,
    /// quality flag bitmask
    pub id: i32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Met {
    pub pt: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Event {
    pub run: i64,
    pub lumi: i64,
    pub event: i64,
    pub weight: f64,
    pub met: Met,
    pub muons: Vec<Particle>,
    pub electrons: Vec<Particle>,
    pub taus: Vec<Particle>,
    pub photons: Vec<Particle>,
    pub jets: Vec<Particle>,
}

impl Default for Met {
    fn default() -> Self {
        Met { pt: 0.0, phi: 0.0 }
    }
}

fn f64_node() -> SchemaNode {
    SchemaNode::Primitive(PrimitiveKind::F64)
}

pub fn particle_node() -> SchemaNode {
    SchemaNode::record([
        ("pt", f64_node()),
        ("eta", f64_node()),
        ("phi", f64_node()),
        ("mass", f64_node()),
        ("id", SchemaNode::Primitive(PrimitiveKind::I32)),
    ])
}

/// Schema of the analysis event layout.
pub fn analysis_schema() -> Schema {
    let mut fields = alloc::vec![
        ("run", SchemaNode::Primitive(PrimitiveKind::I64)),
        ("lumi", SchemaNode::Primitive(PrimitiveKind::I64)),
        ("event", SchemaNode::Primitive(PrimitiveKind::I64)),
        ("genInfo", SchemaNode::record([("weight", f64_node())])),
        ("met", SchemaNode::record([("pt", f64_node()), ("phi", f64_node())])),
    ];
    for name in COLLECTIONS {
        fields.push((name, SchemaNode::array(particle_node())));
    }
    Schema::new(SchemaNode::record(fields)).expect("analysis schema is valid")
}

impl Particle {
    fn to_value(self) -> Value {
        Value::Record(alloc::vec![
            Value::F64(self.pt),
            Value::F64(self.eta),
            Value::F64(self.phi),
            Value::F64(self.mass),
            Value::I32(self.id),
        ])
    }

    fn from_value(v: &Value) -> Option<Self> {
        match v.items()? {
            [Value::F64(pt), Value::F64(eta), Value::F64(phi), Value::F64(mass), Value::I32(id)] => Some(Particle {
                pt: *pt,
                eta: *eta,
                phi: *phi,
                mass: *mass,
                id: *id,
            }),
            _ => None,
        }
    }

    fn is_physical(&self) -> bool {
        self.pt >= 0.0 && self.mass >= 0.0 && (-PI..PI).contains(&self.phi)
    }
}

impl Event {
    pub fn collections(&self) -> [&[Particle]; 5] {
        [&self.muons, &self.electrons, &self.taus, &self.photons, &self.jets]
    }

    pub fn to_value(&self) -> Value {
        let collection = |ps: &[Particle]| Value::Array(ps.iter().map(|p| p.to_value()).collect());
        let mut fields = alloc::vec![
            Value::I64(self.run),
            Value::I64(self.lumi),
            Value::I64(self.event),
            Value::Record(alloc::vec![Value::F64(self.weight)]),
            Value::Record(alloc::vec![Value::F64(self.met.pt), Value::F64(self.met.phi)]),
        ];
        fields.extend(self.collections().into_iter().map(collection));
        Value::Record(fields)
    }

    /// Inverse of [`Event::to_value`]; `None` if the value does not have the analysis layout.
    pub fn from_value(v: &Value) -> Option<Self> {
        let fields = match v {
            Value::Record(f) if f.len() == 10 => f,
            _ => return None,
        };
        let scalar_i64 = |v: &Value| match v {
            Value::I64(x) => Some(*x),
            _ => None,
        };
        let collection = |v: &Value| match v {
            Value::Array(items) => items.iter().map(Particle::from_value).collect::<Option<Vec<_>>>(),
            _ => None,
        };
        let weight = match fields[3].items()? {
            [Value::F64(w)] => *w,
            _ => return None,
        };
        let met = match fields[4].items()? {
            [Value::F64(pt), Value::F64(phi)] => Met { pt: *pt, phi: *phi },
            _ => return None,
        };
        Some(Event {
            run: scalar_i64(&fields[0])?,
            lumi: scalar_i64(&fields[1])?,
            event: scalar_i64(&fields[2])?,
            weight,
            met,
            muons: collection(&fields[5])?,
            electrons: collection(&fields[6])?,
            taus: collection(&fields[7])?,
            photons: collection(&fields[8])?,
            jets: collection(&fields[9])?,
        })
    }

    /// Kinematic invariants: non-negative pt and mass, phi in [-pi, pi).
    pub fn is_physical(&self) -> bool {
        self.met.pt >= 0.0
            && (-PI..PI).contains(&self.met.phi)
            && self.collections().iter().all(|c| c.iter().all(Particle::is_physical))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Event {
        Event {
            run: 1,
            lumi: 2,
            event: 3,
            weight: -0.5,
            met: Met { pt: 300.0, phi: 0.25 },
            jets: alloc::vec![Particle {
                pt: 45.0,
                eta: 1.1,
                phi: -3.0,
                mass: 8.0,
                id: 3
            }],
            ..Default::default()
        }
    }

    #[test]
    fn value_conforms_to_schema() {
        assert!(sample().to_value().conforms_to(analysis_schema().root()));
    }

    #[test]
    fn value_round_trip() {
        let e = sample();
        assert_eq!(Event::from_value(&e.to_value()), Some(e));
    }

    #[test]
    fn physical_invariants() {
        let mut e = sample();
        assert!(e.is_physical());
        e.met.phi = PI;
        assert!(!e.is_physical());
        e.met.phi = 0.0;
        e.jets[0].mass = -1.0;
        assert!(!e.is_physical());
    }
}
