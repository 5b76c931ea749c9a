use crate::error::{Error, Result};

/// Largest basis `build_system` accepts.
pub const MAX_BASIS: usize = 5_000_000;

pub const MAX_PARTICLES: usize = 4;

/// Multisets of `n` sites out of `sites`, stored as non-decreasing tuples.
///
/// The rank of `a_0 <= ... <= a_{n-1}` is `sum_k C(a_k + k, k + 1)`, the
/// combinatorial number system applied to the strictly increasing
/// `a_k + k`. States are ordered lexicographically in the reversed tuple
/// (largest site first).
#[derive(Clone, Debug)]
pub struct Basis {
    pub sites: usize,
    pub particles: usize,
    states: Vec<[u16; MAX_PARTICLES]>,
    binom: Vec<[u64; MAX_PARTICLES + 1]>,
}

/// C(sites + n - 1, n) without overflow for the sizes we accept.
pub fn basis_size(sites: usize, n: usize) -> u128 {
    let mut c: u128 = 1;
    for k in 0..n {
        c = c * (sites + n - 1 - k) as u128 / (k + 1) as u128;
    }
    c
}

impl Basis {
    pub fn new(sites: usize, particles: usize) -> Result<Self> {
        if particles > MAX_PARTICLES {
            return Err(Error::invalid(format!("at most {MAX_PARTICLES} particles, got {particles}")));
        }
        if sites == 0 || sites > u16::MAX as usize {
            return Err(Error::invalid(format!("site count out of range: {sites}")));
        }
        let size = basis_size(sites, particles);
        if size > MAX_BASIS as u128 {
            return Err(Error::TooLarge {
                what: format!("symmetric basis of {particles} bosons on {sites} sites"),
                estimate: size,
                limit: MAX_BASIS as u128,
            });
        }
        let mut binom = vec![[0u64; MAX_PARTICLES + 1]; sites + MAX_PARTICLES + 1];
        for (n, row) in binom.iter_mut().enumerate() {
            row[0] = 1;
            for k in 1..=MAX_PARTICLES {
                row[k] = if k > n { 0 } else { choose(n as u64, k as u64) };
            }
        }
        let mut states = vec![[0u16; MAX_PARTICLES]; size as usize];
        let mut cur = [0u16; MAX_PARTICLES];
        let mut b = Basis { sites, particles, states: Vec::new(), binom };
        fill(&mut b, &mut states, &mut cur, 0, 0);
        b.states = states;
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Sites of state `i`, non-decreasing.
    pub fn state(&self, i: usize) -> &[u16] {
        &self.states[i][..self.particles]
    }

    /// Rank of a non-decreasing tuple.
    #[inline]
    pub fn rank(&self, sorted: &[u16]) -> usize {
        let mut r = 0u64;
        for (k, &a) in sorted.iter().enumerate() {
            r += self.binom[a as usize + k][k + 1];
        }
        r as usize
    }

    /// Occupation number of `site` in state `i`.
    pub fn occupation(&self, i: usize, site: usize) -> usize {
        self.state(i).iter().filter(|&&s| s as usize == site).count()
    }
}

fn choose(n: u64, k: u64) -> u64 {
    let mut c = 1u64;
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}

fn fill(b: &mut Basis, out: &mut [[u16; MAX_PARTICLES]], cur: &mut [u16; MAX_PARTICLES], k: usize, lo: usize) {
    if k == b.particles {
        let r = b.rank(&cur[..k]);
        out[r] = *cur;
        return;
    }
    for s in lo..b.sites {
        cur[k] = s as u16;
        fill(b, out, cur, k + 1, s);
    }
}

/// Sort a short tuple in place.
#[inline]
pub(crate) fn sort_small(a: &mut [u16]) {
    for i in 1..a.len() {
        let mut j = i;
        while j > 0 && a[j - 1] > a[j] {
            a.swap(j - 1, j);
            j -= 1;
        }
    }
}
