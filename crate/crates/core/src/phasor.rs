//! Dynamic-phasor algebra.
//!
//! A dynamic phasor (DP) `<x>_k(t)` is the k-th Fourier coefficient of a signal over a
//! sliding window one fundamental period wide. Signals here are real, so
//! `<x>_{-k} = conj(<x>_k)` and only `k >= 0` is ever stored. For symmetrical components the
//! equivalent rule is `<x_p>_{-k} = conj(<x_n>_k)`.
//!
//! Angle convention: a device frame is placed at `theta(t) = omega_s t + delta(t)`, the
//! position of the device q-axis measured from the synchronous D-axis. With this choice a
//! balanced positive-sequence voltage `V/sqrt(2) e^{j phi}` seen through a PLL locked at
//! `delta = phi + pi/2` gives `v_d = V`, `v_q = 0`, and `v_q = 0` is the stable PLL
//! equilibrium (`dv_q/d delta < 0`).

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;

pub const J: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Reference frame of a set of dynamic phasors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    AbcPhase,
    Pnz,
    SyncDq0,
    AsyncDq,
}

/// DP coefficients of one real signal. Negative indices are derived by conjugation and
/// absent indices read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DpSet {
    pub frame: Frame,
    pub omega_s: f64,
    coeffs: BTreeMap<u32, C64>,
}

impl DpSet {
    pub fn new(frame: Frame, omega_s: f64) -> Self {
        Self { frame, omega_s, coeffs: BTreeMap::new() }
    }

    /// Sets `<x>_k` for `k >= 0`. The k = 0 coefficient of a real signal is real; any
    /// imaginary part is dropped.
    pub fn set(&mut self, k: u32, value: C64) {
        let value = if k == 0 { c(value.re, 0.0) } else { value };
        self.coeffs.insert(k, value);
    }

    pub fn get(&self, k: i32) -> C64 {
        let v = self.coeffs.get(&k.unsigned_abs()).copied().unwrap_or_default();
        if k < 0 {
            v.conj()
        } else {
            v
        }
    }

    pub fn indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.coeffs.keys().copied()
    }

    /// Truncated Fourier sum `sum_k <x>_k e^{j k omega_s t}` over stored indices and their
    /// mirrors.
    pub fn reconstruct(&self, t: f64) -> f64 {
        reconstruct_waveform(self, t)
    }
}

/// One harmonic of a three-phase quantity in symmetrical components.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SeqTriple {
    pub p: C64,
    pub n: C64,
    pub z: C64,
}

impl SeqTriple {
    pub const ZERO: SeqTriple = SeqTriple { p: C64::new(0.0, 0.0), n: C64::new(0.0, 0.0), z: C64::new(0.0, 0.0) };

    pub fn new(p: C64, n: C64, z: C64) -> Self {
        Self { p, n, z }
    }

    pub fn as_array(&self) -> [C64; 3] {
        [self.p, self.n, self.z]
    }

    pub fn from_array(a: [C64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.p * s, self.n * s, self.z * s)
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

impl std::ops::Add for SeqTriple {
    type Output = SeqTriple;
    fn add(self, o: SeqTriple) -> SeqTriple {
        SeqTriple::new(self.p + o.p, self.n + o.n, self.z + o.z)
    }
}

impl std::ops::Sub for SeqTriple {
    type Output = SeqTriple;
    fn sub(self, o: SeqTriple) -> SeqTriple {
        SeqTriple::new(self.p - o.p, self.n - o.n, self.z - o.z)
    }
}

impl std::ops::AddAssign for SeqTriple {
    fn add_assign(&mut self, o: SeqTriple) {
        *self = *self + o;
    }
}

impl std::ops::SubAssign for SeqTriple {
    fn sub_assign(&mut self, o: SeqTriple) {
        *self = *self - o;
    }
}

/// DP sets of the p, n and z components of a three-phase quantity. `p` and `n` are stored
/// for `k >= 0`; `<x_p>_{-k} = conj(<x_n>_k)`. At k = 0 only `p` is stored and
/// `<x_n>_0 = conj(<x_p>_0)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PnzSet {
    p: BTreeMap<u32, C64>,
    n: BTreeMap<u32, C64>,
    z: BTreeMap<u32, C64>,
}

impl PnzSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, k: u32, value: SeqTriple) {
        self.p.insert(k, value.p);
        if k == 0 {
            self.z.insert(0, c(value.z.re, 0.0));
        } else {
            self.n.insert(k, value.n);
            self.z.insert(k, value.z);
        }
    }

    pub fn p(&self, k: i32) -> C64 {
        match k {
            k if k >= 0 => self.p.get(&(k as u32)).copied().unwrap_or_default(),
            k => self.n(-k).conj(),
        }
    }

    pub fn n(&self, k: i32) -> C64 {
        match k {
            0 => self.p(0).conj(),
            k if k > 0 => self.n.get(&(k as u32)).copied().unwrap_or_default(),
            k => self.p(-k).conj(),
        }
    }

    pub fn z(&self, k: i32) -> C64 {
        let v = self.z.get(&k.unsigned_abs()).copied().unwrap_or_default();
        if k < 0 {
            v.conj()
        } else {
            v
        }
    }

    pub fn get(&self, k: i32) -> SeqTriple {
        SeqTriple::new(self.p(k), self.n(k), self.z(k))
    }

    fn max_index(&self) -> u32 {
        self.p.keys().chain(self.n.keys()).chain(self.z.keys()).copied().max().unwrap_or(0)
    }

    /// Instantaneous phase quantities `x_abc(t) = T x_pnz(t)`.
    pub fn abc_at(&self, t: f64, omega_s: f64) -> [f64; 3] {
        let kmax = self.max_index() as i32;
        let mut seq = SeqTriple::ZERO;
        for k in -kmax..=kmax {
            let rot = C64::from_polar(1.0, k as f64 * omega_s * t);
            seq += self.get(k).scale(rot);
        }
        let abc = pnz_to_abc(seq);
        [abc[0].re, abc[1].re, abc[2].re]
    }
}

/// Angle between the synchronous frame and a device q-axis, radians. Kept continuous while
/// integrating; wrapped only for reporting.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct FrameAngle(pub f64);

impl FrameAngle {
    /// Wrapped into (-pi, pi].
    pub fn wrapped(self) -> f64 {
        let mut a = self.0 % (2.0 * PI);
        if a <= -PI {
            a += 2.0 * PI;
        } else if a > PI {
            a -= 2.0 * PI;
        }
        a
    }
}

/// DP of a time derivative: `<dx/dt>_k = d<x>_k/dt + j k omega_s <x>_k`.
pub fn dp_time_shift(k: i32, value: C64, derivative_of_coeff: C64, omega_s: f64) -> C64 {
    derivative_of_coeff + J * (k as f64 * omega_s) * value
}

/// Synchronous DQ0 at index k to pnz: returns `(<x_p>_{k+1}, <x_n>_{k-1}, <x_z>_k)`.
pub fn dq0_to_pnz(x_d: C64, x_q: C64, x_0: C64) -> (C64, C64, C64) {
    ((x_d - J * x_q) * FRAC_1_SQRT_2, (x_d + J * x_q) * FRAC_1_SQRT_2, x_0)
}

/// Inverse of [`dq0_to_pnz`]: `(<x_p>_{k+1}, <x_n>_{k-1}, <x_z>_k)` to `(x_D, x_Q, x_0)` at k.
pub fn pnz_to_dq0(x_p: C64, x_n: C64, x_z: C64) -> (C64, C64, C64) {
    ((x_p + x_n) * FRAC_1_SQRT_2, -(x_p - x_n) / (SQRT_2 * J), x_z)
}

/// pnz to a device (asynchronous) dq frame at angle `delta`:
/// `<x_p>_{k+1}, <x_n>_{k-1}` to `(<x_d>_k, <x_q>_k)`.
pub fn pnz_to_dq(x_p: C64, x_n: C64, delta: FrameAngle) -> (C64, C64) {
    let ep = C64::from_polar(1.0, delta.0);
    let em = ep.conj();
    ((ep * x_n - em * x_p) / (SQRT_2 * J), (ep * x_n + em * x_p) * FRAC_1_SQRT_2)
}

/// Inverse of [`pnz_to_dq`]: `x_p = e^{j delta}(x_q - j x_d)/sqrt(2)`,
/// `x_n = e^{-j delta}(x_q + j x_d)/sqrt(2)`.
pub fn dq_to_pnz(x_d: C64, x_q: C64, delta: FrameAngle) -> (C64, C64) {
    let ep = C64::from_polar(1.0, delta.0);
    (ep * (x_q - J * x_d) * FRAC_1_SQRT_2, ep.conj() * (x_q + J * x_d) * FRAC_1_SQRT_2)
}

/// `alpha = e^{j 2 pi / 3}`.
pub fn alpha() -> C64 {
    C64::from_polar(1.0, 2.0 * PI / 3.0)
}

/// Symmetrical-component matrix `T = (1/sqrt 3)[1 1 1; a^2 a 1; a a^2 1]`, so that
/// `x_abc = T x_pnz`. T is unitary.
pub fn sym_matrix() -> [[C64; 3]; 3] {
    let a = alpha();
    let a2 = a * a;
    let s = 1.0 / 3f64.sqrt();
    let one = c(1.0, 0.0);
    [[one * s, one * s, one * s], [a2 * s, a * s, one * s], [a * s, a2 * s, one * s]]
}

/// `x_pnz = T^{-1} x_abc = T^H x_abc`.
pub fn abc_to_pnz(abc: [C64; 3]) -> SeqTriple {
    let t = sym_matrix();
    let mut out = [C64::default(); 3];
    for (i, o) in out.iter_mut().enumerate() {
        for (j, x) in abc.iter().enumerate() {
            *o += t[j][i].conj() * x;
        }
    }
    SeqTriple::from_array(out)
}

pub fn pnz_to_abc(seq: SeqTriple) -> [C64; 3] {
    let t = sym_matrix();
    let s = seq.as_array();
    let mut out = [C64::default(); 3];
    for (i, o) in out.iter_mut().enumerate() {
        for (j, x) in s.iter().enumerate() {
            *o += t[i][j] * x;
        }
    }
    out
}

/// Real part of the truncated Fourier sum of a real-signal DP set.
pub fn reconstruct_waveform(dp: &DpSet, t: f64) -> f64 {
    let mut acc = c(0.0, 0.0);
    for k in dp.indices() {
        let k = k as i32;
        acc += dp.get(k) * C64::from_polar(1.0, k as f64 * dp.omega_s * t);
        if k != 0 {
            acc += dp.get(-k) * C64::from_polar(1.0, -(k as f64) * dp.omega_s * t);
        }
    }
    acc.re
}

/// dq-frame harmonics `k in {0, 2}` of a device whose frame angle has DPs
/// `<delta>_0` (real) and `<delta>_2`. Index -2 follows by conjugation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DqHarmonics {
    pub d0: f64,
    pub q0: f64,
    pub d2: C64,
    pub q2: C64,
}

/// Interface between a device dq frame carrying `k in {0, +-2}` DPs and network pnz
/// quantities carrying `k = +-1`. The frame rotation `e^{j delta(t)}` is expanded to first
/// order in the second-harmonic ripple of `delta`, which is exact whenever `<delta>_2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsyncFrame {
    pub delta0: f64,
    pub delta2: C64,
}

impl AsyncFrame {
    pub fn new(delta0: f64, delta2: C64) -> Self {
        Self { delta0, delta2 }
    }

    pub fn aligned(delta0: f64) -> Self {
        Self::new(delta0, C64::default())
    }

    /// `(<x_p>_1, <x_n>_1)` to dq harmonics.
    pub fn pnz_to_dq(&self, xp1: C64, xn1: C64) -> DqHarmonics {
        let e0 = C64::from_polar(1.0, -self.delta0);
        let d2 = self.delta2;
        // DPs of (x_q - j x_d) and (x_q + j x_d)
        let a0 = SQRT_2 * e0 * (xp1 - J * d2 * xn1.conj());
        let a2 = -SQRT_2 * J * e0 * d2 * xp1;
        let b2 = SQRT_2 * e0.conj() * (xn1 + J * d2 * xp1.conj());
        DqHarmonics { d0: -a0.im, q0: a0.re, d2: (b2 - a2) / (2.0 * J), q2: (a2 + b2) * 0.5 }
    }

    /// dq harmonics to `(<x_p>_1, <x_n>_1)`; components landing on `|k| = 3` are dropped.
    pub fn dq_to_pnz(&self, x: &DqHarmonics) -> (C64, C64) {
        let e0 = C64::from_polar(1.0, -self.delta0);
        let d2 = self.delta2;
        let y0 = c(x.q0, -x.d0) * FRAC_1_SQRT_2;
        let y2 = (x.q2 - J * x.d2) * FRAC_1_SQRT_2;
        let ym2 = (x.q2.conj() - J * x.d2.conj()) * FRAC_1_SQRT_2;
        let w0 = c(x.q0, x.d0) * FRAC_1_SQRT_2;
        let w2 = (x.q2 + J * x.d2) * FRAC_1_SQRT_2;
        let p1 = e0.conj() * (y0 + J * d2 * ym2 + J * d2.conj() * y2);
        let n1 = e0 * (w2 - J * d2 * w0);
        (p1, n1)
    }
}
