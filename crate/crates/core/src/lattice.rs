//! Discrete torus geometry and particle configurations.
//!
//! A configuration is a word in `{0,1}^N` stored one bit per site. Site
//! arithmetic is always taken modulo `N`, and node `x` is the pair of
//! neighbouring sites `{x, x+1}`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest torus that may be enumerated exhaustively.
pub const MAX_ENUMERATION_SITES: usize = 24;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    n_sites: usize,
    words: Vec<u64>,
}

impl Configuration {
    pub fn empty(n_sites: usize) -> Self {
        assert!(n_sites >= 2, "a torus needs at least two sites");
        Self {
            n_sites,
            words: vec![0; n_sites.div_ceil(64)],
        }
    }

    pub fn full(n_sites: usize) -> Self {
        let mut eta = Self::empty(n_sites);
        for x in 0..n_sites {
            eta.set(x as i64, 1);
        }
        eta
    }

    /// Builds a configuration from explicit occupation values (site 0 first).
    pub fn from_sites(sites: &[u8]) -> Result<Self> {
        if sites.len() < 2 {
            return Err(Error::TorusTooSmall {
                n_sites: sites.len(),
                required: 2,
            });
        }
        let mut eta = Self::empty(sites.len());
        for (x, &v) in sites.iter().enumerate() {
            match v {
                0 => {}
                1 => eta.set(x as i64, 1),
                _ => return Err(Error::Parse(format!("occupation value {v} at site {x} is not 0 or 1"))),
            }
        }
        Ok(eta)
    }

    /// Decodes a state id: the binary expansion of `id`, most significant bit
    /// first, read as the occupation string. Lexicographic order of strings
    /// therefore matches numeric order of ids.
    pub fn from_state_id(n_sites: usize, id: u64) -> Self {
        assert!((2..=64).contains(&n_sites));
        let mut eta = Self::empty(n_sites);
        eta.words[0] = id.reverse_bits() >> (64 - n_sites);
        eta
    }

    pub fn state_id(&self) -> u64 {
        assert!(self.n_sites <= 64, "state ids need N <= 64");
        self.words[0].reverse_bits() >> (64 - self.n_sites)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    #[inline]
    pub fn site(&self, x: i64) -> usize {
        x.rem_euclid(self.n_sites as i64) as usize
    }

    /// `η(x mod N)`.
    #[inline]
    pub fn occupancy(&self, x: i64) -> u8 {
        let s = self.site(x);
        ((self.words[s / 64] >> (s % 64)) & 1) as u8
    }

    #[inline]
    pub fn set(&mut self, x: i64, value: u8) {
        let s = self.site(x);
        let mask = 1_u64 << (s % 64);
        if value == 0 {
            self.words[s / 64] &= !mask;
        } else {
            self.words[s / 64] |= mask;
        }
    }

    pub fn particle_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// `(shift(η, k))(x) = η(x + k)`.
    pub fn shift(&self, k: i64) -> Self {
        let mut out = Self::empty(self.n_sites);
        for x in 0..self.n_sites as i64 {
            out.set(x, self.occupancy(x + k));
        }
        out
    }

    /// Exchanges the occupation values of the two sites of node `x`.
    pub fn swap(&self, x: i64) -> Self {
        let mut out = self.clone();
        out.swap_in_place(x);
        out
    }

    #[inline]
    pub fn swap_in_place(&mut self, x: i64) {
        let a = self.occupancy(x);
        let b = self.occupancy(x + 1);
        if a != b {
            self.set(x, b);
            self.set(x + 1, a);
        }
    }

    /// Exchanges particles and holes everywhere.
    pub fn particle_hole(&self) -> Self {
        let mut out = self.clone();
        for w in &mut out.words {
            *w = !*w;
        }
        out.clear_padding();
        out
    }

    fn clear_padding(&mut self) {
        let used = self.n_sites % 64;
        if used != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= (1_u64 << used) - 1;
        }
    }

    /// Particles in the window `x + W_j^L`. Rejects tori on which the
    /// window's `L + 2` enclosing sites are not distinct.
    pub fn window_count(&self, x: i64, j: usize, l: usize) -> Result<usize> {
        check_torus(self.n_sites, l + 2)?;
        if j > l {
            return Err(Error::InvalidParameter(format!("window index j = {j} exceeds L = {l}")));
        }
        Ok(window_offsets(j, l).map(|w| self.occupancy(x + w) as usize).sum())
    }

    /// Particles in the box `⟦x, x + L⟧` of `L + 1` sites.
    pub fn box_count(&self, x: i64, l: usize) -> Result<usize> {
        check_torus(self.n_sites, l + 1)?;
        Ok((0..=l as i64).map(|z| self.occupancy(x + z) as usize).sum())
    }

    /// Bits `η(start), …, η(start + len − 1)` packed little-endian into a word.
    #[inline]
    pub fn segment(&self, start: i64, len: usize) -> u64 {
        debug_assert!(len <= 64 && len <= self.n_sites);
        let s = self.site(start);
        if s + len <= self.n_sites {
            self.contiguous_bits(s, len)
        } else {
            let head = self.n_sites - s;
            self.contiguous_bits(s, head) | (self.contiguous_bits(0, len - head) << head)
        }
    }

    #[inline]
    fn contiguous_bits(&self, s: usize, len: usize) -> u64 {
        if len == 0 {
            return 0;
        }
        let (w, o) = (s / 64, s % 64);
        let mut bits = self.words[w] >> o;
        if o + len > 64 {
            bits |= self.words[w + 1] << (64 - o);
        }
        if len == 64 {
            bits
        } else {
            bits & ((1_u64 << len) - 1)
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.n_sites as i64).map(move |x| self.occupancy(x))
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in self.iter() {
            f.write_str(if v == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Configuration({self})")
    }
}

impl FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let sites = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Parse(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::from_sites(&sites)
    }
}

/// The window `W_j^L = ⟦−j, −j+L+1⟧ \ {0,1}` as offsets from the node's left site.
pub fn window_offsets(j: usize, l: usize) -> impl Iterator<Item = i64> + Clone {
    let j = j as i64;
    (-j..=(l as i64 + 1 - j)).filter(|&w| w != 0 && w != 1)
}

/// A window anchored at a concrete site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub j: usize,
    pub l: usize,
    pub anchor: i64,
}

impl Window {
    pub fn new(j: usize, l: usize, anchor: i64) -> Result<Self> {
        if j > l {
            return Err(Error::InvalidParameter(format!("j = {j} > L = {l}")));
        }
        Ok(Self { j, l, anchor })
    }

    /// Canonical site indices covered on a torus of `n_sites`.
    pub fn sites(&self, n_sites: usize) -> Vec<usize> {
        window_offsets(self.j, self.l)
            .map(|w| (self.anchor + w).rem_euclid(n_sites as i64) as usize)
            .collect()
    }

    pub fn contains(&self, site: i64, n_sites: usize) -> bool {
        let site = site.rem_euclid(n_sites as i64) as usize;
        self.sites(n_sites).contains(&site)
    }
}

pub(crate) fn check_torus(n_sites: usize, required: usize) -> Result<()> {
    if n_sites < required {
        Err(Error::TorusTooSmall { n_sites, required })
    } else {
        Ok(())
    }
}

/// All `2^N` configurations in lexicographic order of their occupation strings.
pub fn enumerate_configurations(n_sites: usize) -> Result<impl Iterator<Item = Configuration>> {
    if n_sites > MAX_ENUMERATION_SITES {
        return Err(Error::TooLarge {
            what: "exhaustive enumeration",
            n_sites,
            limit: MAX_ENUMERATION_SITES,
        });
    }
    check_torus(n_sites, 2)?;
    Ok((0..1_u64 << n_sites).map(move |id| Configuration::from_state_id(n_sites, id)))
}
