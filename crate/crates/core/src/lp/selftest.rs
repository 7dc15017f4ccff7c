use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::dyadic::{chi_j, phi_j, DyadicDecomposition};
use super::grid::{Grid, SpectralField};
use super::paradiff::{Paraproduct, SpatialSymbol};

/// Support of `phi_j`, `j >= 1`, is `0.55 2^j < |k| < 1.9 2^j`.
const LOWER: f64 = 0.55;
const UPPER: f64 = 1.9;

/// Worst defects of the Littlewood-Paley identities over one grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfTestReport {
    pub dim: usize,
    pub n: usize,
    pub fields: usize,
    /// `max_k |sum_j phi_j(|k|) - 1|`.
    pub partition_defect: f64,
    /// `max ||sum_j Delta_j u - u|| / ||u||`.
    pub reconstruction_defect: f64,
    /// `min ||grad Delta_j u|| / (0.55 2^j ||Delta_j u||)`, at least 1 when the lower bound holds.
    pub bernstein_lower: f64,
    /// `max ||grad Delta_j u|| / (1.9 2^j ||Delta_j u||)` (also over `S_j u`), at most 1 when the upper bound holds.
    pub bernstein_upper: f64,
    /// `max ||T_c u - c u|| / ||c u||` over constants `c` and several `gamma`.
    pub constant_defect: f64,
}

impl SelfTestReport {
    pub fn pass(&self, tol: f64) -> bool {
        self.partition_defect <= tol
            && self.reconstruction_defect <= tol
            && self.bernstein_lower >= 1.0
            && self.bernstein_upper <= 1.0
            && self.constant_defect <= tol
    }
}

/// Checks the partition of unity, block reconstruction, Bernstein bounds and
/// `T_c u = c u` on `fields` random fields.
pub fn lp_selftest(dim: usize, n: usize, fields: usize, seed: u64) -> Result<SelfTestReport> {
    let g = Grid::new(dim, n)?;
    let dec = DyadicDecomposition::new(&g);
    let jmax = dec.max_block();
    let mut partition: f64 = 0.0;
    for i in 0..g.len() {
        let r = g.wavenumber(i);
        let s: f64 = (0..=jmax).map(|j| phi_j(j, r)).sum();
        partition = partition.max((s - 1.0).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut recon: f64 = 0.0;
    let mut lower = f64::INFINITY;
    let mut upper: f64 = 0.0;
    let mut constant: f64 = 0.0;
    let gammas = [1.0, 4.0, 32.0];
    let paras: Vec<Paraproduct> = gammas.iter().map(|&gm| Paraproduct::new(&g, gm)).collect::<Result<_>>()?;
    for f in 0..fields {
        let u = SpectralField::random(&g, &mut rng, |_| 1.0);
        let norm = u.l2();
        let mut sum = SpectralField::zeros(&g);
        for j in 0..=jmax {
            let b = dec.block(&u, j)?;
            sum.axpy(1.0, &b);
            let bn = b.l2();
            let scale = 2f64.powi(j as i32);
            if bn > 1e-12 * norm {
                let grad = b.grad_l2_sq().sqrt();
                upper = upper.max(grad / (UPPER * scale * bn));
                if j >= 1 {
                    lower = lower.min(grad / (LOWER * scale * bn));
                }
            }
            let s = u.multiplier(|k| chi_j(j, ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt()));
            let sn = s.l2();
            if sn > 1e-12 * norm {
                upper = upper.max(s.grad_l2_sq().sqrt() / (UPPER * scale * sn));
            }
        }
        recon = recon.max(sum.sub(&u).l2() / norm);
        // the paraproduct check is the expensive part; a tenth of the fields suffices
        if f % 10 == 0 {
            let c = 0.5 + 3.0 * (f as f64 / fields.max(1) as f64);
            let sym = SpatialSymbol(vec![c; g.len()]);
            let mut cu = u.clone();
            cu.scale(c);
            for p in &paras {
                constant = constant.max(p.apply(&sym, &u).sub(&cu).l2() / cu.l2());
            }
        }
    }
    Ok(SelfTestReport {
        dim,
        n,
        fields,
        partition_defect: partition,
        reconstruction_defect: recon,
        bernstein_lower: lower,
        bernstein_upper: upper,
        constant_defect: constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_selftest_passes() {
        let r = lp_selftest(1, 64, 20, 1).unwrap();
        assert!(r.pass(1e-12), "{r:?}");
        let r = lp_selftest(2, 16, 5, 2).unwrap();
        assert!(r.pass(1e-12), "{r:?}");
    }
}
