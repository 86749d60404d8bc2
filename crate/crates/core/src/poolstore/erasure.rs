//! Systematic Reed–Solomon coding over GF(2^8).
//!
//! The field uses the primitive polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11d).
//! The generator matrix is an (k+m) x k Vandermonde matrix multiplied by the
//! inverse of its top k x k block, which makes the first k rows the identity
//! (data shards are stored verbatim) while keeping every k-row submatrix
//! invertible.

use thiserror::Error;

const POLY: u16 = 0x11d;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("too many erasures: {available} shards available, {needed} needed")]
    TooManyErasures { available: usize, needed: usize },
    #[error("shard length mismatch: expected {expected} bytes, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid geometry k={k} m={m}")]
    InvalidGeometry { k: usize, m: usize },
    #[error("shard index {0} out of range")]
    IndexOutOfRange(usize),
}

impl CodecError {
    pub fn name(&self) -> &'static str {
        match self {
            CodecError::TooManyErasures { .. } => "TooManyErasures",
            CodecError::LengthMismatch { .. } => "LengthMismatch",
            CodecError::InvalidGeometry { .. } => "InvalidGeometry",
            CodecError::IndexOutOfRange(_) => "IndexOutOfRange",
        }
    }
}

struct Tables {
    exp: [u8; 512],
    log: [u8; 256],
}

const fn build_tables() -> Tables {
    let mut exp = [0u8; 512];
    let mut log = [0u8; 256];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < 255 {
        exp[i] = x as u8;
        log[x as usize] = i as u8;
        x <<= 1;
        if x & 0x100 != 0 {
            x ^= POLY;
        }
        i += 1;
    }
    while i < 512 {
        exp[i] = exp[i - 255];
        i += 1;
    }
    Tables { exp, log }
}

static TABLES: Tables = build_tables();

/// Field multiplication.
pub fn gf_mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        return 0;
    }
    TABLES.exp[TABLES.log[a as usize] as usize + TABLES.log[b as usize] as usize]
}

/// Multiplicative inverse. Panics on zero.
pub fn gf_inv(a: u8) -> u8 {
    assert!(a != 0, "zero has no inverse in GF(2^8)");
    TABLES.exp[255 - TABLES.log[a as usize] as usize]
}

fn gf_pow(a: u8, n: usize) -> u8 {
    if n == 0 {
        return 1;
    }
    if a == 0 {
        return 0;
    }
    TABLES.exp[(TABLES.log[a as usize] as usize * n) % 255]
}

type Matrix = Vec<Vec<u8>>;

fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let cols = b[0].len();
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|c| {
                    row.iter()
                        .zip(b.iter())
                        .fold(0u8, |acc, (&x, brow)| acc ^ gf_mul(x, brow[c]))
                })
                .collect()
        })
        .collect()
}

/// Gauss–Jordan inversion; `None` when singular.
fn mat_invert(m: &Matrix) -> Option<Matrix> {
    let n = m.len();
    let mut work: Matrix = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| u8::from(i == j)));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| work[r][col] != 0)?;
        work.swap(col, pivot);
        let inv = gf_inv(work[col][col]);
        for v in work[col].iter_mut() {
            *v = gf_mul(*v, inv);
        }
        for r in 0..n {
            if r != col && work[r][col] != 0 {
                let factor = work[r][col];
                let pivot_row = work[col].clone();
                for (v, p) in work[r].iter_mut().zip(pivot_row) {
                    *v ^= gf_mul(factor, p);
                }
            }
        }
    }
    Some(work.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// `dst ^= coef * src`, bytewise.
fn mul_add(dst: &mut [u8], src: &[u8], coef: u8) {
    match coef {
        0 => {}
        1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d ^= s),
        _ => {
            let mut row = [0u8; 256];
            for (i, v) in row.iter_mut().enumerate() {
                *v = gf_mul(coef, i as u8);
            }
            dst.iter_mut()
                .zip(src)
                .for_each(|(d, &s)| *d ^= row[s as usize]);
        }
    }
}

/// A k:m systematic Reed–Solomon codec.
#[derive(Debug, Clone)]
pub struct ReedSolomon {
    k: usize,
    m: usize,
    generator: Matrix,
}

impl ReedSolomon {
    pub fn new(k: usize, m: usize) -> Result<Self, CodecError> {
        if k == 0 || m == 0 || k + m > 256 {
            return Err(CodecError::InvalidGeometry { k, m });
        }
        let n = k + m;
        let vandermonde: Matrix = (0..n)
            .map(|r| (0..k).map(|c| gf_pow(r as u8, c)).collect())
            .collect();
        let top: Matrix = vandermonde[..k].to_vec();
        let top_inv = mat_invert(&top).expect("vandermonde top block is invertible");
        let generator = mat_mul(&vandermonde, &top_inv);
        Ok(Self { k, m, generator })
    }

    pub fn data_shards(&self) -> usize {
        self.k
    }

    pub fn parity_shards(&self) -> usize {
        self.m
    }

    pub fn total_shards(&self) -> usize {
        self.k + self.m
    }

    /// Computes the m parity blocks for k equal-length data blocks.
    pub fn encode<T: AsRef<[u8]>>(&self, data: &[T]) -> Result<Vec<Vec<u8>>, CodecError> {
        if data.len() != self.k {
            return Err(CodecError::TooManyErasures {
                available: data.len(),
                needed: self.k,
            });
        }
        let len = data[0].as_ref().len();
        for d in data {
            check_len(len, d.as_ref().len())?;
        }
        let parity = self.generator[self.k..]
            .iter()
            .map(|row| {
                let mut out = vec![0u8; len];
                for (coef, block) in row.iter().zip(data) {
                    mul_add(&mut out, block.as_ref(), *coef);
                }
                out
            })
            .collect();
        Ok(parity)
    }

    /// Recovers the k data blocks from any k of the k+m indexed shards.
    ///
    /// `shards[i]` is the block with shard index `i`, or `None` if erased.
    pub fn decode(&self, shards: &[Option<Vec<u8>>]) -> Result<Vec<Vec<u8>>, CodecError> {
        if shards.len() != self.total_shards() {
            return Err(CodecError::InvalidGeometry {
                k: self.k,
                m: shards.len().saturating_sub(self.k),
            });
        }
        let present: Vec<usize> = (0..shards.len()).filter(|&i| shards[i].is_some()).collect();
        if present.len() < self.k {
            return Err(CodecError::TooManyErasures {
                available: present.len(),
                needed: self.k,
            });
        }
        let len = shards[present[0]].as_ref().map_or(0, Vec::len);
        for &i in &present {
            check_len(len, shards[i].as_ref().map_or(0, Vec::len))?;
        }
        // Fast path: every data shard survived.
        if (0..self.k).all(|i| shards[i].is_some()) {
            return Ok(shards[..self.k].iter().map(|s| s.clone().unwrap()).collect());
        }
        let chosen = &present[..self.k];
        let sub: Matrix = chosen.iter().map(|&i| self.generator[i].clone()).collect();
        let decode = mat_invert(&sub).expect("any k generator rows are independent");
        let mut out = Vec::with_capacity(self.k);
        for (row, decode_row) in decode.iter().enumerate() {
            if let Some(s) = &shards[row] {
                out.push(s.clone());
                continue;
            }
            let mut block = vec![0u8; len];
            for (coef, &src) in decode_row.iter().zip(chosen) {
                mul_add(&mut block, shards[src].as_ref().unwrap(), *coef);
            }
            out.push(block);
        }
        Ok(out)
    }

    /// Splits `payload` into k zero-padded data blocks of `ceil(len/k)` bytes
    /// and appends the parity blocks.
    pub fn encode_payload(&self, payload: &[u8]) -> Vec<Vec<u8>> {
        let shard_size = payload.len().div_ceil(self.k);
        let mut shards: Vec<Vec<u8>> = (0..self.k)
            .map(|i| {
                let start = (i * shard_size).min(payload.len());
                let end = ((i + 1) * shard_size).min(payload.len());
                let mut block = payload[start..end].to_vec();
                block.resize(shard_size, 0);
                block
            })
            .collect();
        let parity = self.encode(&shards).expect("blocks built with equal length");
        shards.extend(parity);
        shards
    }

    /// Inverse of [`encode_payload`](Self::encode_payload): reassembles the
    /// data blocks and strips padding back to `payload_len`.
    pub fn decode_payload(
        &self,
        shards: &[Option<Vec<u8>>],
        payload_len: usize,
    ) -> Result<Vec<u8>, CodecError> {
        let data = self.decode(shards)?;
        let mut out = data.concat();
        out.truncate(payload_len);
        Ok(out)
    }
}

fn check_len(expected: usize, actual: usize) -> Result<(), CodecError> {
    if expected != actual {
        return Err(CodecError::LengthMismatch { expected, actual });
    }
    Ok(())
}
