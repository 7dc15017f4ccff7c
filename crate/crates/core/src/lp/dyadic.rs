use crate::error::{Error, Result};

use super::grid::{Grid, SpectralField};

const INNER: f64 = 1.1;
const OUTER: f64 = 1.9;

/// Radial cutoff: 1 on `[0, 1.1]`, 0 on `[1.9, inf)`, smooth and
/// non-increasing in between.
pub fn chi(r: f64) -> f64 {
    let u = (r - INNER) / (OUTER - INNER);
    if u <= 0.0 {
        return 1.0;
    }
    if u >= 1.0 {
        return 0.0;
    }
    let a = (-1.0 / u).exp();
    let b = (-1.0 / (1.0 - u)).exp();
    b / (a + b)
}

/// `chi_j(r) = chi(2^-j r)`.
#[inline]
pub fn chi_j(j: usize, r: f64) -> f64 {
    chi(r * 0.5f64.powi(j as i32))
}

/// `phi_j(r) = chi(2^-j r) - chi(2^(1-j) r)` for `j >= 1`; `phi_0 = chi`.
#[inline]
pub fn phi_j(j: usize, r: f64) -> f64 {
    if j == 0 {
        chi(r)
    } else {
        chi_j(j, r) - chi_j(j - 1, r)
    }
}

/// Littlewood-Paley decomposition on a grid: blocks `Delta_0 .. Delta_J`
/// with `J = log2(N/2) + 1`, realized as Fourier multipliers.
#[derive(Clone, Debug)]
pub struct DyadicDecomposition {
    pub grid: Grid,
}

impl DyadicDecomposition {
    pub fn new(grid: &Grid) -> Self {
        DyadicDecomposition { grid: grid.clone() }
    }

    pub fn max_block(&self) -> usize {
        self.grid.max_block()
    }

    fn check(&self, j: usize) -> Result<()> {
        if j > self.max_block() {
            return Err(Error::BlockOutOfRange {
                index: j,
                max: self.max_block(),
            });
        }
        Ok(())
    }

    /// `Delta_j u`.
    pub fn block(&self, u: &SpectralField, j: usize) -> Result<SpectralField> {
        self.check(j)?;
        Ok(radial_multiplier(u, |r| phi_j(j, r)))
    }

    /// `S_j u = chi_j(D) u`.
    pub fn low_pass(&self, u: &SpectralField, j: usize) -> SpectralField {
        radial_multiplier(u, |r| chi_j(j, r))
    }

    /// Squared `L^2` norms of all blocks, `||Delta_j u||^2` for `j = 0..=J`.
    pub fn block_norms_sq(&self, u: &SpectralField) -> Vec<f64> {
        let mut out = vec![0.0; self.max_block() + 1];
        let vol = (2.0 * std::f64::consts::PI).powi(self.grid.dim() as i32);
        for (idx, c) in u.coef.iter().enumerate() {
            let a = c.norm_sqr();
            if a == 0.0 {
                continue;
            }
            let r = self.grid.wavenumber(idx);
            for (j, slot) in out.iter_mut().enumerate() {
                let w = phi_j(j, r);
                if w != 0.0 {
                    *slot += w * w * a * vol;
                }
            }
        }
        out
    }
}

fn radial_multiplier(u: &SpectralField, m: impl Fn(f64) -> f64) -> SpectralField {
    u.multiplier(|k| m(((k[0] * k[0] + k[1] * k[1]) as f64).sqrt()))
}

pub fn block(u: &SpectralField, j: usize) -> Result<SpectralField> {
    DyadicDecomposition::new(&u.grid).block(u, j)
}

/// `(sum_k (gamma^2 + |k|^2)^s |u_k|^2)^(1/2)`, scaled like the `L^2` norm.
pub fn sobolev_norm(u: &SpectralField, s: f64, gamma: f64) -> Result<f64> {
    if !(gamma >= 1.0) {
        return Err(Error::param("gamma", format!("{gamma} < 1")));
    }
    let g2 = gamma * gamma;
    let sum: f64 = u
        .coef
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let r = u.grid.wavenumber(i);
            (g2 + r * r).powf(s) * c.norm_sqr()
        })
        .sum();
    Ok(((2.0 * std::f64::consts::PI).powi(u.grid.dim() as i32) * sum).sqrt())
}

/// Dyadic surrogate `(sum_j 2^(2sj) ||Delta_j u||^2)^(1/2)`.
pub fn dyadic_sobolev_norm(u: &SpectralField, s: f64) -> f64 {
    DyadicDecomposition::new(&u.grid)
        .block_norms_sq(u)
        .iter()
        .enumerate()
        .map(|(j, b)| 2f64.powf(2.0 * s * j as f64) * b)
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_shape() {
        assert_eq!(chi(0.0), 1.0);
        assert_eq!(chi(1.1), 1.0);
        assert_eq!(chi(1.9), 0.0);
        let mut prev = 1.0;
        for i in 0..400 {
            let v = chi(i as f64 * 0.01);
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn single_mode_block() {
        let g = Grid::new(1, 64).unwrap();
        let d = DyadicDecomposition::new(&g);
        let u = SpectralField::cosine(&g, [4, 0], 1.0);
        assert_eq!(phi_j(2, 4.0), 1.0);
        for j in 0..=d.max_block() {
            let b = d.block(&u, j).unwrap();
            if j == 2 {
                assert!(b.sub(&u).max_abs() < 1e-15);
            } else {
                assert_eq!(b.max_abs(), 0.0);
            }
        }
        assert!(matches!(d.block(&u, 7), Err(Error::BlockOutOfRange { index: 7, max: 6 })));
    }

    #[test]
    fn single_mode_sobolev() {
        let g = Grid::new(1, 64).unwrap();
        let u = SpectralField::cosine(&g, [8, 0], 1.0);
        let l2 = u.l2();
        assert!((sobolev_norm(&u, 1.0, 1.0).unwrap() - 65f64.sqrt() * l2).abs() < 1e-12);
        assert!((sobolev_norm(&u, 0.0, 7.0).unwrap() - l2).abs() < 1e-12);
    }
}
