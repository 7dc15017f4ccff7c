use num_complex::Complex64;

use crate::coefficients::Point;
use crate::error::{Error, Result};

use super::dyadic::{chi_j, phi_j};
use super::grid::{Grid, SpectralField};

/// Modes whose amplitude falls below this fraction of the largest one are skipped.
const MODE_FLOOR: f64 = 1e-15;

/// A symbol `f(x, xi)` that can be sampled on the grid at a frozen frequency.
pub trait Symbol: Sync {
    /// True when `f` does not depend on `xi`.
    fn spatial_only(&self) -> bool {
        false
    }

    /// True when `f(x, -xi) = f(x, xi)`.
    fn even(&self) -> bool {
        true
    }

    /// Writes `f(x_j, xi)` for every grid point `x_j`.
    fn sample(&self, xi: [f64; 2], out: &mut [f64]);

    /// `f(xi)` when the symbol does not depend on `x`, in which case the
    /// paraproduct reduces to a Fourier multiplier.
    fn uniform_value(&self, _xi: [f64; 2]) -> Option<f64> {
        None
    }
}

/// A purely spatial symbol given by its grid values.
pub struct SpatialSymbol(pub Vec<f64>);

impl Symbol for SpatialSymbol {
    fn spatial_only(&self) -> bool {
        true
    }

    fn sample(&self, _xi: [f64; 2], out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }
}

/// A symbol given by a closure of `(x, xi)`, sampled at the grid points.
pub struct FnSymbol<F> {
    points: Vec<Point>,
    f: F,
    even: bool,
}

impl<F: Fn(&Point, [f64; 2]) -> f64 + Sync> FnSymbol<F> {
    pub fn new(grid: &Grid, even: bool, f: F) -> Self {
        FnSymbol {
            points: grid.points(),
            f,
            even,
        }
    }
}

impl<F: Fn(&Point, [f64; 2]) -> f64 + Sync> Symbol for FnSymbol<F> {
    fn even(&self) -> bool {
        self.even
    }

    fn sample(&self, xi: [f64; 2], out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(&self.points) {
            *o = (self.f)(x, xi);
        }
    }
}

/// Frequency weights of the paraproduct with parameter `gamma`:
///
/// ```text
/// T_f u = S_{mu-1} f S_{mu+2} u + sum_{nu=mu}^{J} S_nu f Delta_{nu+3} u,   mu = floor(log2 gamma)
/// ```
///
/// with `S_{mu-1}` read as `S_0` when `mu <= 1`. An input mode `k` and a symbol
/// mode `p` interact with weight `W_k(p)`.
#[derive(Clone, Debug)]
pub struct Paraproduct {
    pub grid: Grid,
    pub gamma: f64,
    mu: usize,
    low: usize,
}

/// `W_k(.)` for a fixed input mode: `c_low chi_low(p) + sum c_nu chi_nu(p)`.
struct ModeWeights {
    terms: Vec<(usize, f64)>,
    pmax: f64,
}

impl ModeWeights {
    #[inline]
    fn at(&self, rp: f64) -> f64 {
        self.terms.iter().map(|&(j, c)| c * chi_j(j, rp)).sum()
    }
}

impl Paraproduct {
    pub fn new(grid: &Grid, gamma: f64) -> Result<Self> {
        if !(gamma >= 1.0) {
            return Err(Error::param("gamma", format!("{gamma} < 1")));
        }
        let mu = gamma.log2().floor() as usize;
        Ok(Paraproduct {
            grid: grid.clone(),
            gamma,
            mu,
            low: mu.saturating_sub(1),
        })
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    fn weights(&self, rk: f64) -> ModeWeights {
        let mut terms = Vec::with_capacity(3);
        let c = chi_j(self.mu + 2, rk);
        if c != 0.0 {
            terms.push((self.low, c));
        }
        for nu in self.mu..=self.grid.max_block() {
            let c = phi_j(nu + 3, rk);
            if c != 0.0 {
                terms.push((nu, c));
            }
        }
        let pmax = terms
            .iter()
            .map(|&(j, _)| 1.9 * 2f64.powi(j as i32))
            .fold(0.0, f64::max);
        ModeWeights { terms, pmax }
    }

    /// Fourier coefficients of `x -> f(x, k)`.
    fn symbol_spectrum(&self, f: &dyn Symbol, k: [i64; 2], buf: &mut [f64]) -> Vec<Complex64> {
        f.sample([k[0] as f64, k[1] as f64], buf);
        self.grid.forward(buf)
    }

    /// `sum_k W_k(0) f(k) u_k e^{ikx}` for a symbol independent of `x`.
    fn apply_multiplier(&self, f: &dyn Symbol, u: &SpectralField) -> Option<SpectralField> {
        let g = &self.grid;
        let mut out = SpectralField::zeros(g);
        for (i, c) in u.coef.iter().enumerate() {
            if *c == Complex64::default() {
                continue;
            }
            let k = g.wavevector(i);
            let v = f.uniform_value([k[0] as f64, k[1] as f64])?;
            out.coef[i] = c * (v * self.weights(g.wavenumber(i)).at(0.0));
        }
        Some(out)
    }

    /// Visits every nonzero `(destination, weight * f_k(p))` pair of input mode `src`.
    fn scatter(
        &self,
        spectrum: &[Complex64],
        src: usize,
        mut emit: impl FnMut(usize, Complex64),
    ) {
        let g = &self.grid;
        let k = g.wavevector(src);
        let w = self.weights(g.wavenumber(src));
        if w.terms.is_empty() {
            return;
        }
        let half = (g.n() / 2) as i64;
        let pm = (w.pmax.floor() as i64).min(half - 1);
        let in_range = |q: i64| q > -half && q < half;
        if g.dim() == 1 {
            for p in -pm..=pm {
                let q = k[0] + p;
                if !in_range(q) {
                    continue;
                }
                let wt = w.at(p.abs() as f64);
                if wt != 0.0 {
                    emit(g.index_of(q), spectrum[g.index_of(p)] * wt);
                }
            }
        } else {
            for p0 in -pm..=pm {
                let q0 = k[0] + p0;
                if !in_range(q0) {
                    continue;
                }
                for p1 in -pm..=pm {
                    let q1 = k[1] + p1;
                    if !in_range(q1) {
                        continue;
                    }
                    let rp = ((p0 * p0 + p1 * p1) as f64).sqrt();
                    let wt = w.at(rp);
                    if wt != 0.0 {
                        emit(g.flat_index([q0, q1]), spectrum[g.flat_index([p0, p1])] * wt);
                    }
                }
            }
        }
    }

    fn active_modes(&self, u: &SpectralField) -> Vec<usize> {
        let floor = MODE_FLOOR * u.max_abs();
        (0..u.coef.len())
            .filter(|&i| u.coef[i].norm() > floor)
            .collect()
    }

    /// `T_f^gamma u`.
    pub fn apply(&self, f: &dyn Symbol, u: &SpectralField) -> SpectralField {
        if let Some(out) = self.apply_multiplier(f, u) {
            return out;
        }
        let modes = self.active_modes(u);
        let mut out = SpectralField::zeros(&self.grid);
        self.for_each_spectrum(f, &modes, |src, spec| {
            let c = u.coef[src];
            self.scatter(spec, src, |dst, v| out.coef[dst] += v * c);
        });
        out
    }

    /// Computes the symbol spectrum once per needed frequency and hands it
    /// to `visit` for every mode in `modes`.
    fn for_each_spectrum(&self, f: &dyn Symbol, modes: &[usize], mut visit: impl FnMut(usize, &[Complex64])) {
        let g = &self.grid;
        let mut buf = vec![0.0; g.len()];
        if f.spatial_only() {
            let spec = self.symbol_spectrum(f, [0, 0], &mut buf);
            for &src in modes {
                visit(src, &spec);
            }
            return;
        }
        let mut done = vec![false; g.len()];
        let wanted: std::collections::HashSet<usize> = modes.iter().copied().collect();
        for &src in modes {
            if done[src] {
                continue;
            }
            let spec = self.symbol_spectrum(f, g.wavevector(src), &mut buf);
            visit(src, &spec);
            done[src] = true;
            if f.even() {
                let neg = g.negate(src);
                if !done[neg] && wanted.contains(&neg) {
                    visit(neg, &spec);
                    done[neg] = true;
                }
            }
        }
    }

    /// Precomputes the action of `T_f^gamma` on each mode of `modes`, for
    /// repeated application to many fields supported there.
    pub fn kernels(&self, f: &dyn Symbol, modes: &[usize]) -> ParaproductKernels {
        let mut entries = Vec::with_capacity(modes.len());
        self.for_each_spectrum(f, modes, |src, spec| {
            let mut row = Vec::new();
            self.scatter(spec, src, |dst, v| row.push((dst, v)));
            entries.push((src, row));
        });
        ParaproductKernels {
            grid: self.grid.clone(),
            entries,
        }
    }
}

/// Precomputed action of a paraproduct on a fixed set of input modes.
pub struct ParaproductKernels {
    grid: Grid,
    entries: Vec<(usize, Vec<(usize, Complex64)>)>,
}

impl ParaproductKernels {
    /// Applies the operator; input modes outside the precomputed set are ignored.
    pub fn apply(&self, u: &SpectralField) -> SpectralField {
        let mut out = SpectralField::zeros(&self.grid);
        for (src, row) in &self.entries {
            let c = u.coef[*src];
            if c == Complex64::default() {
                continue;
            }
            for &(dst, v) in row {
                out.coef[dst] += v * c;
            }
        }
        out
    }
}

/// `T_f^gamma u` for a symbol or spatial field `f`.
pub fn paraproduct(f: &dyn Symbol, u: &SpectralField, gamma: f64) -> Result<SpectralField> {
    Ok(Paraproduct::new(&u.grid, gamma)?.apply(f, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_symbol_is_multiplication() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (dim, n) in [(1, 128), (2, 32)] {
            let g = Grid::new(dim, n).unwrap();
            let u = SpectralField::random(&g, &mut rng, |_| 1.0);
            for gamma in [1.0, 3.0, 8.0, 1000.0] {
                let c = SpatialSymbol(vec![2.5; g.len()]);
                let t = paraproduct(&c, &u, gamma).unwrap();
                let mut cu = u.clone();
                cu.scale(2.5);
                assert!(t.sub(&cu).max_abs() < 1e-12, "dim {dim} gamma {gamma}");
            }
        }
    }

    #[test]
    fn kernels_match_direct_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = Grid::new(1, 64).unwrap();
        let f = FnSymbol::new(&g, true, |x: &Point, xi: [f64; 2]| 2.0 + x[0].sin() / (1.0 + xi[0].abs()));
        let u = SpectralField::random(&g, &mut rng, |_| 1.0);
        let p = Paraproduct::new(&g, 2.0).unwrap();
        let modes: Vec<usize> = (0..g.len()).filter(|&i| g.in_band(i)).collect();
        let k = p.kernels(&f, &modes);
        assert!(k.apply(&u).sub(&p.apply(&f, &u)).max_abs() < 1e-14);
    }

    #[test]
    fn rejects_small_gamma() {
        let g = Grid::new(1, 16).unwrap();
        let u = SpectralField::zeros(&g);
        assert!(paraproduct(&SpatialSymbol(vec![1.0; 16]), &u, 0.5).is_err());
    }
}
