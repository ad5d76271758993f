use super::antenna::AntennaArray;
use super::cluster::ChannelRealization;
use super::fading::{channel_matrix, Motion};
use super::linalg::{bilinear_gain, inner, norm, normalize, CMatrix, C64};
use crate::error::{Error, Result};

/// A transmit/receive weight pair and the gain `|rx^H H tx|^2` it achieves.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamPair {
    pub tx: Vec<C64>,
    pub rx: Vec<C64>,
    pub gain: f64,
}

pub const DEFAULT_POWER_ITERATIONS: usize = 30;

/// Dominant singular pair of `h` by the power method.
///
/// Iterates on the smaller Gram matrix. Each iteration squares the
/// normalized Gram matrix, so `iterations` steps apply the power
/// `2^iterations`; the deterministic start is the all-ones vector.
pub fn power_iteration_beamforming(h: &CMatrix, iterations: usize) -> Result<BeamPair> {
    let scale = h.frobenius_norm();
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::violation(
            "power iteration on a zero or non-finite matrix",
        ));
    }
    let (rows, cols) = h.shape();
    let tx_side = cols <= rows;
    let mut g = if tx_side {
        h.adjoint().matmul(h)
    } else {
        h.matmul(&h.adjoint())
    };
    g.scale(1.0 / (scale * scale));
    for _ in 0..iterations {
        let next = g.matmul(&g);
        let n = next.frobenius_norm();
        if n == 0.0 || !n.is_finite() {
            break;
        }
        g = next;
        g.scale(1.0 / n);
    }

    let dim = g.rows();
    let mut v = g.mul_vec(&vec![C64::new(1.0, 0.0); dim]);
    // The all-ones start can be orthogonal to the dominant subspace.
    if norm(&v) < 1e-6 {
        let best = (0..dim)
            .max_by(|&a, &b| norm(&g.column(a)).total_cmp(&norm(&g.column(b))))
            .unwrap_or(0);
        v = g.column(best);
    }
    if !normalize(&mut v) {
        return Err(Error::violation("power iteration failed to converge"));
    }

    let (tx, rx) = if tx_side {
        let mut rx = h.mul_vec(&v);
        normalize(&mut rx);
        (v, rx)
    } else {
        let mut tx = h.adjoint_mul_vec(&v);
        normalize(&mut tx);
        (tx, v)
    };
    let gain = bilinear_gain(h, &tx, &rx);
    Ok(BeamPair { tx, rx, gain })
}

/// Exhaustive search over two fixed codebooks on a given channel matrix.
/// Ties keep the lowest (tx, rx) index.
pub fn sector_sweep_matrix(
    h: &CMatrix,
    tx_book: &[Vec<C64>],
    rx_book: &[Vec<C64>],
) -> Result<BeamPair> {
    if tx_book.is_empty() || rx_book.is_empty() {
        return Err(Error::violation("sector sweep needs non-empty codebooks"));
    }
    let mut best: Option<(usize, usize, f64)> = None;
    for (i, wt) in tx_book.iter().enumerate() {
        let hw = h.mul_vec(wt);
        for (j, wr) in rx_book.iter().enumerate() {
            let g = inner(wr, &hw).norm_sqr();
            if best.is_none_or(|(_, _, b)| g > b) {
                best = Some((i, j, g));
            }
        }
    }
    let (i, j, gain) = best.expect("non-empty codebooks");
    Ok(BeamPair {
        tx: tx_book[i].clone(),
        rx: rx_book[j].clone(),
        gain,
    })
}

/// Sector sweep over `codebook_size` azimuth beams per side, evaluated on
/// the channel at time `t` and frequency `f`.
pub fn sector_sweep(
    real: &ChannelRealization,
    tx: &AntennaArray,
    rx: &AntennaArray,
    codebook_size: usize,
    t: f64,
    f: f64,
    motion: &Motion,
) -> Result<BeamPair> {
    if codebook_size == 0 {
        return Err(Error::violation("codebook size must be at least 1"));
    }
    let h = channel_matrix(real, tx, rx, t, f, motion);
    sector_sweep_matrix(&h, &tx.codebook(codebook_size), &rx.codebook(codebook_size))
}
