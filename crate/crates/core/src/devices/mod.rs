//! Per-component dynamic-phasor models.
//!
//! Devices work on their own slice of the flat state vector and exchange network
//! quantities as [`SeqTriple`](crate::phasor::SeqTriple) values at k = 1. Complex DPs are
//! stored as interleaved `(re, im)` pairs; k = 0 DPs of real signals take a single slot.

pub mod dc_load;
pub mod exciter;
pub mod fault;
pub mod ibr;
pub mod load;
pub mod network;
pub mod sg;

use crate::phasor::{C64, J};

/// A real signal represented by its DPs at `k in {0, +-2}`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Harm02 {
    pub k0: f64,
    pub k2: C64,
}

impl Harm02 {
    pub const ZERO: Harm02 = Harm02 { k0: 0.0, k2: C64::new(0.0, 0.0) };

    pub fn new(k0: f64, k2: C64) -> Self {
        Self { k0, k2 }
    }

    /// The derivative-property rotation `-j k omega_s x` applied per index.
    pub fn rotation(&self, omega_s: f64) -> Harm02 {
        Harm02::new(0.0, -J * 2.0 * omega_s * self.k2)
    }

    pub fn scale(&self, s: f64) -> Harm02 {
        Harm02::new(self.k0 * s, self.k2 * s)
    }

    /// DC component of the product of two real signals.
    pub fn mean_product(&self, o: &Harm02) -> f64 {
        self.k0 * o.k0 + 2.0 * (self.k2 * o.k2.conj()).re
    }
}

impl std::ops::Add for Harm02 {
    type Output = Harm02;
    fn add(self, o: Harm02) -> Harm02 {
        Harm02::new(self.k0 + o.k0, self.k2 + o.k2)
    }
}

impl std::ops::Sub for Harm02 {
    type Output = Harm02;
    fn sub(self, o: Harm02) -> Harm02 {
        Harm02::new(self.k0 - o.k0, self.k2 - o.k2)
    }
}

impl std::ops::Neg for Harm02 {
    type Output = Harm02;
    fn neg(self) -> Harm02 {
        Harm02::new(-self.k0, -self.k2)
    }
}

impl std::ops::Mul<f64> for Harm02 {
    type Output = Harm02;
    fn mul(self, s: f64) -> Harm02 {
        self.scale(s)
    }
}

/// Sequential reader over a device state slice.
pub(crate) struct Reader<'a> {
    x: &'a [f64],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(x: &'a [f64]) -> Self {
        Self { x, pos: 0 }
    }

    pub fn real(&mut self) -> f64 {
        let v = self.x[self.pos];
        self.pos += 1;
        v
    }

    pub fn complex(&mut self) -> C64 {
        let v = C64::new(self.x[self.pos], self.x[self.pos + 1]);
        self.pos += 2;
        v
    }

    pub fn harm(&mut self) -> Harm02 {
        let k0 = self.real();
        Harm02::new(k0, self.complex())
    }
}

/// Sequential writer over a device state slice.
pub(crate) struct Writer<'a> {
    x: &'a mut [f64],
    pos: usize,
}

impl<'a> Writer<'a> {
    pub fn new(x: &'a mut [f64]) -> Self {
        Self { x, pos: 0 }
    }

    pub fn real(&mut self, v: f64) {
        self.x[self.pos] = v;
        self.pos += 1;
    }

    pub fn complex(&mut self, v: C64) {
        self.x[self.pos] = v.re;
        self.x[self.pos + 1] = v.im;
        self.pos += 2;
    }

    pub fn harm(&mut self, v: Harm02) {
        self.real(v.k0);
        self.complex(v.k2);
    }
}

/// Kind of slot a state symbol occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    /// k = 0 DP of a real signal, one real slot.
    Real,
    /// complex DP at the given index, two slots (re, im).
    Complex(i32),
}

/// Symbol layout description used to build the flat state map.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    pub name: String,
    pub kind: SlotKind,
}

impl Symbol {
    pub fn real(name: &str) -> Self {
        Self { name: name.to_string(), kind: SlotKind::Real }
    }

    pub fn complex(name: &str, k: i32) -> Self {
        Self { name: name.to_string(), kind: SlotKind::Complex(k) }
    }

    pub fn width(&self) -> usize {
        match self.kind {
            SlotKind::Real => 1,
            SlotKind::Complex(_) => 2,
        }
    }
}

pub(crate) fn harm_symbols(out: &mut Vec<Symbol>, name: &str) {
    out.push(Symbol::real(&format!("{name}_0")));
    out.push(Symbol::complex(&format!("{name}_2"), 2));
}

pub(crate) fn seq_symbols(out: &mut Vec<Symbol>, name: &str) {
    for s in ["p", "n", "z"] {
        out.push(Symbol::complex(&format!("{name}_{s}"), 1));
    }
}
