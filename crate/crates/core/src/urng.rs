//! Multiple-return shift register generator (Galois-form LFSR) and the
//! uniform samples derived from it.
//!
//! The register holds the polynomial `a(x) = a_{n-1} x^{n-1} + ... + a_0`
//! and each step replaces it with `x * a(x) mod f(x)`, where `f` is the
//! characteristic polynomial. The bit shifted out of the top position is
//! the output bit. Every tapped position receives the feedback through its
//! own XOR, which is the "multiple return" wiring of the hardware generator.
//!
//! With a primitive `f` the register walks through all `2^n - 1` nonzero
//! states before repeating.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UrngError {
    #[error("LFSR seed must be nonzero")]
    ZeroSeed,
    #[error("seed {seed:#x} does not fit in {order} bits")]
    SeedTooWide { seed: u64, order: u32 },
    #[error("LFSR order {0} outside supported range 2..=64")]
    BadOrder(u32),
    #[error("polynomial {poly} is not a valid degree-{order} feedback polynomial: {reason}")]
    BadPolynomial {
        poly: String,
        order: u32,
        reason: &'static str,
    },
    #[error("cannot parse polynomial {0:?}")]
    ParsePolynomial(String),
    #[error("no factorization of 2^{0} - 1 available")]
    FactorizationUnavailable(u32),
}

/// A polynomial over GF(2); bit `i` is the coefficient of `x^i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Polynomial(u128);

impl Polynomial {
    pub const fn from_bits(bits: u128) -> Self {
        Polynomial(bits)
    }

    /// Builds a polynomial from the exponents of its nonzero terms.
    pub fn from_exponents(exponents: &[u32]) -> Self {
        Polynomial(exponents.iter().fold(0u128, |acc, &e| acc ^ (1u128 << e)))
    }

    pub const fn bits(self) -> u128 {
        self.0
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(self) -> Option<u32> {
        if self.0 == 0 {
            None
        } else {
            Some(127 - self.0.leading_zeros())
        }
    }

    pub fn has_constant_term(self) -> bool {
        self.0 & 1 == 1
    }

    /// Exponents of the nonzero terms, highest first.
    pub fn exponents(self) -> Vec<u32> {
        (0..128).rev().filter(|&i| self.0 >> i & 1 == 1).collect()
    }

    pub fn to_hex(self) -> String {
        format!("{:#x}", self.0)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return f.write_str("0");
        }
        let terms: Vec<String> = self
            .exponents()
            .into_iter()
            .map(|e| match e {
                0 => "1".to_string(),
                1 => "x".to_string(),
                _ => format!("x^{e}"),
            })
            .collect();
        f.write_str(&terms.join("+"))
    }
}

impl FromStr for Polynomial {
    type Err = UrngError;

    /// Accepts either a hex bitmask (`0x100000125`) or a term list
    /// (`x^32+x^8+x^5+x^2+1`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || UrngError::ParsePolynomial(s.to_string());
        let trimmed = s.trim();
        if let Some(hex) = trimmed
            .strip_prefix("0x")
            .or_else(|| trimmed.strip_prefix("0X"))
        {
            return u128::from_str_radix(&hex.replace('_', ""), 16)
                .map(Polynomial)
                .map_err(|_| err());
        }
        let compact: String = trimmed.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(err());
        }
        let mut bits = 0u128;
        for term in compact.split('+') {
            let exponent = match term {
                "1" => 0,
                "x" | "X" => 1,
                _ => {
                    let e = term
                        .strip_prefix("x^")
                        .or_else(|| term.strip_prefix("X^"))
                        .ok_or_else(err)?;
                    e.parse::<u32>().map_err(|_| err())?
                }
            };
            if exponent >= 128 {
                return Err(err());
            }
            // Repeated terms cancel over GF(2); reject rather than guess intent.
            if bits >> exponent & 1 == 1 {
                return Err(err());
            }
            bits |= 1u128 << exponent;
        }
        Ok(Polynomial(bits))
    }
}

impl Serialize for Polynomial {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Characteristic polynomial used by the reference hardware design.
pub const REFERENCE_POLYNOMIAL: Polynomial =
    Polynomial::from_bits((1 << 32) | (1 << 8) | (1 << 5) | (1 << 2) | 1);

/// Order of the reference generator.
pub const REFERENCE_ORDER: u32 = 32;

/// Order, feedback polynomial and seed of one generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLfsrConfig", into = "RawLfsrConfig")]
pub struct LfsrConfig {
    order: u32,
    taps: Polynomial,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct RawLfsrConfig {
    order: u32,
    taps: Polynomial,
    seed: u64,
}

impl TryFrom<RawLfsrConfig> for LfsrConfig {
    type Error = UrngError;
    fn try_from(raw: RawLfsrConfig) -> Result<Self, Self::Error> {
        LfsrConfig::new(raw.order, raw.taps, raw.seed)
    }
}

impl From<LfsrConfig> for RawLfsrConfig {
    fn from(c: LfsrConfig) -> Self {
        RawLfsrConfig {
            order: c.order,
            taps: c.taps,
            seed: c.seed,
        }
    }
}

impl LfsrConfig {
    pub fn new(order: u32, taps: Polynomial, seed: u64) -> Result<Self, UrngError> {
        check_taps(order, taps)?;
        if seed == 0 {
            return Err(UrngError::ZeroSeed);
        }
        if seed & !order_mask(order) != 0 {
            return Err(UrngError::SeedTooWide { seed, order });
        }
        Ok(LfsrConfig { order, taps, seed })
    }

    /// The reference 32-bit generator with the given seed.
    pub fn reference(seed: u64) -> Result<Self, UrngError> {
        LfsrConfig::new(REFERENCE_ORDER, REFERENCE_POLYNOMIAL, seed)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn taps(&self) -> Polynomial {
        self.taps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Result<Self, UrngError> {
        LfsrConfig::new(self.order, self.taps, seed)
    }
}

fn check_taps(order: u32, taps: Polynomial) -> Result<(), UrngError> {
    if !(2..=64).contains(&order) {
        return Err(UrngError::BadOrder(order));
    }
    let bad = |reason| UrngError::BadPolynomial {
        poly: taps.to_string(),
        order,
        reason,
    };
    if taps.degree() != Some(order) {
        return Err(bad("degree differs from the register order"));
    }
    if !taps.has_constant_term() {
        return Err(bad("missing constant term"));
    }
    Ok(())
}

fn order_mask(order: u32) -> u64 {
    if order >= 64 {
        u64::MAX
    } else {
        (1u64 << order) - 1
    }
}

/// A uniform variate in the open interval (0, 1) with the register word it
/// was derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformSample {
    value: f64,
    source_word: u64,
}

impl UniformSample {
    /// Maps an `order`-bit word to `word / 2^order`. Returns `None` for the
    /// zero word, which has no image inside the open interval.
    ///
    /// Orders above 53 truncate the word to 53 significant bits so that the
    /// quotient never rounds up to 1.0.
    pub fn from_word(word: u64, order: u32) -> Option<Self> {
        if word == 0 || !(1..=64).contains(&order) || word & !order_mask(order) != 0 {
            return None;
        }
        let significant = 64 - word.leading_zeros();
        let kept = if significant > f64::MANTISSA_DIGITS {
            word & !((1u64 << (significant - f64::MANTISSA_DIGITS)) - 1)
        } else {
            word
        };
        let value = kept as f64 * (-(order as f64)).exp2();
        Some(UniformSample {
            value,
            source_word: word,
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn source_word(&self) -> u64 {
        self.source_word
    }

    /// Binary32 image for the single-precision datapath, truncated toward
    /// zero so the result stays strictly below 1.0.
    pub fn to_f32(&self) -> f32 {
        let rounded = self.value as f32;
        if rounded as f64 > self.value {
            f32::from_bits(rounded.to_bits() - 1)
        } else {
            rounded
        }
    }
}

/// Register state of one generator (`LfsrState`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lfsr {
    config: LfsrConfig,
    register: u64,
    feedback: u64,
    top: u32,
    mask: u64,
    steps_taken: u64,
}

impl Lfsr {
    pub fn new(config: LfsrConfig) -> Self {
        let mask = order_mask(config.order);
        Lfsr {
            register: config.seed,
            feedback: (config.taps.bits() as u64) & mask,
            top: config.order - 1,
            mask,
            steps_taken: 0,
            config,
        }
    }

    pub fn config(&self) -> &LfsrConfig {
        &self.config
    }

    pub fn register(&self) -> u64 {
        self.register
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    /// Shifts once and returns the bit leaving the register.
    #[inline]
    pub fn step(&mut self) -> bool {
        let out = (self.register >> self.top) & 1;
        self.register = (self.register << 1) & self.mask;
        // Branch-free: the feedback mask is applied when the output bit is set.
        self.register ^= self.feedback & out.wrapping_neg();
        self.steps_taken += 1;
        out == 1
    }

    /// Packs the next `order` output bits into a word, first bit in the MSB.
    pub fn next_word(&mut self) -> u64 {
        let mut word = 0u64;
        for _ in 0..self.config.order {
            word = (word << 1) | self.step() as u64;
        }
        word
    }

    /// Next uniform sample; zero words are skipped.
    pub fn next_uniform(&mut self) -> UniformSample {
        loop {
            if let Some(u) = UniformSample::from_word(self.next_word(), self.config.order) {
                return u;
            }
        }
    }
}

impl Iterator for Lfsr {
    type Item = bool;
    fn next(&mut self) -> Option<bool> {
        Some(self.step())
    }
}

/// Counts steps until the register first returns to its seed, giving up
/// after `limit` steps.
pub fn measure_period(config: &LfsrConfig, limit: u64) -> Option<u64> {
    let mut lfsr = Lfsr::new(*config);
    for steps in 1..=limit {
        lfsr.step();
        if lfsr.register == config.seed {
            return Some(steps);
        }
    }
    None
}

/// `a * b mod f` over GF(2) for `deg f = order <= 64`.
fn mulmod(mut a: u128, mut b: u128, f: u128, order: u32) -> u128 {
    let mut acc = 0u128;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a >> order & 1 == 1 {
            a ^= f;
        }
    }
    acc
}

/// `x^e mod f`.
fn pow_x(mut e: u128, f: u128, order: u32) -> u128 {
    let mut result = 1u128;
    let mut base = 2u128;
    if order == 1 {
        base ^= f;
    }
    while e != 0 {
        if e & 1 == 1 {
            result = mulmod(result, base, f, order);
        }
        base = mulmod(base, base, f, order);
        e >>= 1;
    }
    result
}

/// Whether the feedback polynomial is primitive over GF(2): the powers of
/// `x` modulo `f` have order exactly `2^n - 1`.
pub fn verify_primitive(config: &LfsrConfig) -> Result<bool, UrngError> {
    is_primitive(config.taps)
}

/// Primitivity test on a bare polynomial with nonzero constant term.
pub fn is_primitive(poly: Polynomial) -> Result<bool, UrngError> {
    let order = poly.degree().ok_or(UrngError::BadPolynomial {
        poly: poly.to_string(),
        order: 0,
        reason: "zero polynomial",
    })?;
    if order == 0 || !poly.has_constant_term() {
        return Ok(false);
    }
    let factors = mersenne_factors(order).ok_or(UrngError::FactorizationUnavailable(order))?;
    let group_order = (1u128 << order) - 1;
    let f = poly.bits();
    if pow_x(group_order, f, order) != 1 {
        return Ok(false);
    }
    Ok(factors
        .iter()
        .all(|&p| pow_x(group_order / p as u128, f, order) != 1))
}

/// Distinct prime factors of `2^n - 1`.
pub fn mersenne_factors(order: u32) -> Option<&'static [u64]> {
    MERSENNE_FACTORS
        .get(order.checked_sub(1)? as usize)
        .copied()
}

static MERSENNE_FACTORS: [&[u64]; 64] = [
    &[],                                            // 1
    &[3],                                           // 2
    &[7],                                           // 3
    &[3, 5],                                        // 4
    &[31],                                          // 5
    &[3, 7],                                        // 6
    &[127],                                         // 7
    &[3, 5, 17],                                    // 8
    &[7, 73],                                       // 9
    &[3, 11, 31],                                   // 10
    &[23, 89],                                      // 11
    &[3, 5, 7, 13],                                 // 12
    &[8191],                                        // 13
    &[3, 43, 127],                                  // 14
    &[7, 31, 151],                                  // 15
    &[3, 5, 17, 257],                               // 16
    &[131071],                                      // 17
    &[3, 7, 19, 73],                                // 18
    &[524287],                                      // 19
    &[3, 5, 11, 31, 41],                            // 20
    &[7, 127, 337],                                 // 21
    &[3, 23, 89, 683],                              // 22
    &[47, 178481],                                  // 23
    &[3, 5, 7, 13, 17, 241],                        // 24
    &[31, 601, 1801],                               // 25
    &[3, 2731, 8191],                               // 26
    &[7, 73, 262657],                               // 27
    &[3, 5, 29, 43, 113, 127],                      // 28
    &[233, 1103, 2089],                             // 29
    &[3, 7, 11, 31, 151, 331],                      // 30
    &[2147483647],                                  // 31
    &[3, 5, 17, 257, 65537],                        // 32
    &[7, 23, 89, 599479],                           // 33
    &[3, 43691, 131071],                            // 34
    &[31, 71, 127, 122921],                         // 35
    &[3, 5, 7, 13, 19, 37, 73, 109],                // 36
    &[223, 616318177],                              // 37
    &[3, 174763, 524287],                           // 38
    &[7, 79, 8191, 121369],                         // 39
    &[3, 5, 11, 17, 31, 41, 61681],                 // 40
    &[13367, 164511353],                            // 41
    &[3, 7, 43, 127, 337, 5419],                    // 42
    &[431, 9719, 2099863],                          // 43
    &[3, 5, 23, 89, 397, 683, 2113],                // 44
    &[7, 31, 73, 151, 631, 23311],                  // 45
    &[3, 47, 178481, 2796203],                      // 46
    &[2351, 4513, 13264529],                        // 47
    &[3, 5, 7, 13, 17, 97, 241, 257, 673],          // 48
    &[127, 4432676798593],                          // 49
    &[3, 11, 31, 251, 601, 1801, 4051],             // 50
    &[7, 103, 2143, 11119, 131071],                 // 51
    &[3, 5, 53, 157, 1613, 2731, 8191],             // 52
    &[6361, 69431, 20394401],                       // 53
    &[3, 7, 19, 73, 87211, 262657],                 // 54
    &[23, 31, 89, 881, 3191, 201961],               // 55
    &[3, 5, 17, 29, 43, 113, 127, 15790321],        // 56
    &[7, 32377, 524287, 1212847],                   // 57
    &[3, 59, 233, 1103, 2089, 3033169],             // 58
    &[179951, 3203431780337],                       // 59
    &[3, 5, 7, 11, 13, 31, 41, 61, 151, 331, 1321], // 60
    &[2305843009213693951],                         // 61
    &[3, 715827883, 2147483647],                    // 62
    &[7, 73, 127, 337, 92737, 649657],              // 63
    &[3, 5, 17, 257, 641, 65537, 6700417],          // 64
];

/// SplitMix64 output function; expands one master seed into stream seeds.
#[derive(Debug, Clone)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// Maximum lanes per shard; fixes the seed layout across lane counts.
pub const MAX_LANES: usize = 64;

/// Seeds for `lanes` generators of the given order in one shard.
///
/// Lane `l` of shard `s` takes output number `s * MAX_LANES + l` of
/// `SplitMix64(master_seed)`, truncated to `order` bits with zero remapped
/// to 1. A seed that repeats an earlier lane of the same shard is replaced by
/// the next unused SplitMix64 output past the shard's block.
pub fn derive_seeds(master_seed: u64, order: u32, shard: u64, lanes: usize) -> Vec<u64> {
    assert!(lanes <= MAX_LANES, "at most {MAX_LANES} lanes per shard");
    let mask = order_mask(order);
    let block = shard.wrapping_mul(MAX_LANES as u64);
    let mut mixer =
        SplitMix64::new(master_seed.wrapping_add(block.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
    let truncate = |v: u64| match v & mask {
        0 => 1,
        s => s,
    };
    let mut seeds: Vec<u64> = (0..lanes).map(|_| truncate(mixer.next_u64())).collect();
    let mut spare = SplitMix64::new(master_seed ^ block ^ 0xD1B5_4A32_D192_ED03);
    for i in 1..seeds.len() {
        while seeds[..i].contains(&seeds[i]) {
            seeds[i] = truncate(spare.next_u64());
        }
    }
    seeds
}

/// A set of independent generators ("lanes"), all sharing one polynomial.
#[derive(Debug, Clone)]
pub struct UniformLanes {
    lanes: Vec<Lfsr>,
    drawn: u64,
}

impl UniformLanes {
    pub fn new(configs: impl IntoIterator<Item = LfsrConfig>) -> Self {
        UniformLanes {
            lanes: configs.into_iter().map(Lfsr::new).collect(),
            drawn: 0,
        }
    }

    /// Lanes seeded from a master seed via [`derive_seeds`].
    pub fn from_master_seed(
        order: u32,
        taps: Polynomial,
        master_seed: u64,
        shard: u64,
        lanes: usize,
    ) -> Result<Self, UrngError> {
        let configs = derive_seeds(master_seed, order, shard, lanes)
            .into_iter()
            .map(|seed| LfsrConfig::new(order, taps, seed))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(UniformLanes::new(configs))
    }

    pub fn lane_count(&self) -> usize {
        self.lanes.len()
    }

    pub fn lane(&self, index: usize) -> &Lfsr {
        &self.lanes[index]
    }

    pub fn draw(&mut self, lane: usize) -> UniformSample {
        self.drawn += 1;
        let count = self.lanes.len();
        self.lanes[lane % count].next_uniform()
    }

    pub fn drawn(&self) -> u64 {
        self.drawn
    }
}
