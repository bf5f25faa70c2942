//! Curvature algebra at a single point from a metric jet.

use crate::curvature::jet::Jet;
use crate::linalg;
use crate::scalar::Real;

#[inline]
fn i2(n: usize, a: usize, b: usize) -> usize {
    a * n + b
}
#[inline]
fn i3(n: usize, a: usize, b: usize, c: usize) -> usize {
    (a * n + b) * n + c
}
#[inline]
fn i4(n: usize, a: usize, b: usize, c: usize, d: usize) -> usize {
    ((a * n + b) * n + c) * n + d
}

/// Christoffel symbols, Riemann, Ricci and scalar curvature at one point.
///
/// Layouts: `gamma[(c*n + a)*n + b] = Γ^c_ab`, `riemann[((a*n+b)*n+c)*n+d] = R_abcd`.
#[derive(Clone, Debug)]
pub struct PointCurvature<T> {
    pub n: usize,
    pub g: [T; 16],
    pub ginv: [T; 16],
    pub gamma: [T; 64],
    pub riemann: [T; 256],
    pub ricci: [T; 16],
    pub scalar: T,
}

impl<T: Real> PointCurvature<T> {
    /// Curvature of the metric whose value and derivatives are given by `jet` (`nc = n*n`).
    pub fn from_jet(jet: &Jet<T>) -> Self {
        let n = jet.n;
        let nn = n * n;
        debug_assert_eq!(jet.nc, nn);
        let half = T::lit(0.5);
        let mut g = [T::zero(); 16];
        g[..nn].copy_from_slice(&jet.v[..nn]);
        let mut ginv = [T::zero(); 16];
        linalg::inverse(n, &g[..nn], &mut ginv[..nn]);
        let dg = |e: usize, i: usize, j: usize| jet.d1[e * nn + i2(n, i, j)];
        let ddg = |e: usize, f: usize, i: usize, j: usize| jet.d2[(e * n + f) * nn + i2(n, i, j)];

        // lowered Γ_{r,ab} and its derivative ∂_e Γ_{r,ab}
        let mut gl = [T::zero(); 64];
        let mut dgl = [T::zero(); 256];
        for r in 0..n {
            for a in 0..n {
                for b in a..n {
                    let v = half * (dg(a, b, r) + dg(b, a, r) - dg(r, a, b));
                    gl[i3(n, r, a, b)] = v;
                    gl[i3(n, r, b, a)] = v;
                    for e in 0..n {
                        let w = half * (ddg(e, a, b, r) + ddg(e, b, a, r) - ddg(e, r, a, b));
                        dgl[i4(n, e, r, a, b)] = w;
                        dgl[i4(n, e, r, b, a)] = w;
                    }
                }
            }
        }
        // ∂_e g^{cr} = -g^{cs} ∂_e g_st g^{tr}
        let mut dginv = [T::zero(); 64];
        for e in 0..n {
            let mut tmp = [T::zero(); 16];
            for c in 0..n {
                for t in 0..n {
                    let mut s = T::zero();
                    for q in 0..n {
                        s += ginv[i2(n, c, q)] * dg(e, q, t);
                    }
                    tmp[i2(n, c, t)] = s;
                }
            }
            for c in 0..n {
                for r in 0..n {
                    let mut s = T::zero();
                    for t in 0..n {
                        s += tmp[i2(n, c, t)] * ginv[i2(n, t, r)];
                    }
                    dginv[i3(n, e, c, r)] = -s;
                }
            }
        }
        let mut gamma = [T::zero(); 64];
        let mut dgamma = [T::zero(); 256];
        for c in 0..n {
            for a in 0..n {
                for b in a..n {
                    let mut s = T::zero();
                    for r in 0..n {
                        s += ginv[i2(n, c, r)] * gl[i3(n, r, a, b)];
                    }
                    gamma[i3(n, c, a, b)] = s;
                    gamma[i3(n, c, b, a)] = s;
                    for e in 0..n {
                        let mut t = T::zero();
                        for r in 0..n {
                            t += dginv[i3(n, e, c, r)] * gl[i3(n, r, a, b)] + ginv[i2(n, c, r)] * dgl[i4(n, e, r, a, b)];
                        }
                        dgamma[i4(n, e, c, a, b)] = t;
                        dgamma[i4(n, e, c, b, a)] = t;
                    }
                }
            }
        }
        // R_abc^d = ∂_aΓ^d_bc − ∂_bΓ^d_ac + Γ^m_bc Γ^d_am − Γ^m_ac Γ^d_bm, stored for a < b
        let mut rup = [T::zero(); 256];
        for a in 0..n {
            for b in a + 1..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut v = dgamma[i4(n, a, d, b, c)] - dgamma[i4(n, b, d, a, c)];
                        for m in 0..n {
                            v += gamma[i3(n, m, b, c)] * gamma[i3(n, d, a, m)] - gamma[i3(n, m, a, c)] * gamma[i3(n, d, b, m)];
                        }
                        rup[i4(n, a, b, c, d)] = v;
                    }
                }
            }
        }
        // R_abcd = g_rd R_abc^r, antisymmetrized in (a,b) and (c,d)
        let mut riemann = [T::zero(); 256];
        for a in 0..n {
            for b in a + 1..n {
                for c in 0..n {
                    for d in c + 1..n {
                        let mut s1 = T::zero();
                        let mut s2 = T::zero();
                        for r in 0..n {
                            s1 += g[i2(n, r, d)] * rup[i4(n, a, b, c, r)];
                            s2 += g[i2(n, r, c)] * rup[i4(n, a, b, d, r)];
                        }
                        let v = half * (s1 - s2);
                        riemann[i4(n, a, b, c, d)] = v;
                        riemann[i4(n, b, a, c, d)] = -v;
                        riemann[i4(n, a, b, d, c)] = -v;
                        riemann[i4(n, b, a, d, c)] = v;
                    }
                }
            }
        }
        // R_bc = g^{ad} R_abcd
        let mut ricci = [T::zero(); 16];
        for b in 0..n {
            for c in b..n {
                let mut s = T::zero();
                for a in 0..n {
                    for d in 0..n {
                        s += ginv[i2(n, a, d)] * riemann[i4(n, a, b, c, d)];
                    }
                }
                ricci[i2(n, b, c)] = s;
                ricci[i2(n, c, b)] = s;
            }
        }
        let mut scalar = T::zero();
        for b in 0..n {
            for c in 0..n {
                scalar += ginv[i2(n, b, c)] * ricci[i2(n, b, c)];
            }
        }
        Self { n, g, ginv, gamma, riemann, ricci, scalar }
    }

    /// Schouten tensor `(Ric − R g / (2(n−1))) / (n−2)`; requires n ≥ 3.
    pub fn schouten(&self) -> [T; 16] {
        let n = self.n;
        let nf = T::from_usize_lossy(n);
        let c = self.scalar / (T::lit(2.0) * (nf - T::one()));
        let k = T::one() / (nf - T::lit(2.0));
        let mut p = [T::zero(); 16];
        for i in 0..n * n {
            p[i] = k * (self.ricci[i] - c * self.g[i]);
        }
        p
    }

    /// Weyl tensor `R_abcd + P_ac g_bd − P_bc g_ad + P_bd g_ac − P_ad g_bc`; requires n ≥ 3.
    pub fn weyl(&self) -> [T; 256] {
        let n = self.n;
        let p = self.schouten();
        let g = &self.g;
        let mut w = [T::zero(); 256];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        w[i4(n, a, b, c, d)] = self.riemann[i4(n, a, b, c, d)]
                            + p[i2(n, a, c)] * g[i2(n, b, d)]
                            - p[i2(n, b, c)] * g[i2(n, a, d)]
                            + p[i2(n, b, d)] * g[i2(n, a, c)]
                            - p[i2(n, a, d)] * g[i2(n, b, c)];
                    }
                }
            }
        }
        w
    }

    /// Bianchi-type tensors `M_abcd = R_abcd + R_ac g_bd − R_bc g_ad`, `N_abcd = R_ab g_cd − ½ R g_ab g_cd`.
    pub fn mn(&self) -> ([T; 256], [T; 256]) {
        mn_from(self.n, &self.riemann, &self.ricci, self.scalar, &self.g)
    }

    /// `g^{ac} W_abcd` for the trace-free check.
    pub fn weyl_trace(&self) -> [T; 16] {
        let n = self.n;
        let w = self.weyl();
        let mut t = [T::zero(); 16];
        for b in 0..n {
            for d in 0..n {
                let mut s = T::zero();
                for a in 0..n {
                    for c in 0..n {
                        s += self.ginv[i2(n, a, c)] * w[i4(n, a, b, c, d)];
                    }
                }
                t[i2(n, b, d)] = s;
            }
        }
        t
    }
}

/// M and N tensors from Riemann, Ricci, scalar and metric values.
pub fn mn_from<T: Real>(n: usize, r4: &[T], ric: &[T], r: T, g: &[T]) -> ([T; 256], [T; 256]) {
    let half = T::lit(0.5);
    let mut m = [T::zero(); 256];
    let mut nt = [T::zero(); 256];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let k = i4(n, a, b, c, d);
                    m[k] = r4[k] + ric[i2(n, a, c)] * g[i2(n, b, d)] - ric[i2(n, b, c)] * g[i2(n, a, d)];
                    nt[k] = ric[i2(n, a, b)] * g[i2(n, c, d)] - half * r * g[i2(n, a, b)] * g[i2(n, c, d)];
                }
            }
        }
    }
    (m, nt)
}

/// Weyl tensor rebuilt from `M`, `N`, Ricci, scalar and metric (independent of the Schouten path).
pub fn reassemble_weyl<T: Real>(n: usize, m: &[T], nt: &[T], ric: &[T], r: T, g: &[T]) -> [T; 256] {
    let nf = T::from_usize_lossy(n);
    let two = T::lit(2.0);
    let k3 = (nf - T::lit(3.0)) / (nf - two);
    let k1 = T::one() / (nf - two);
    let kr = r / ((nf - T::one()) * (nf - two));
    let mut w = [T::zero(); 256];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let gac = g[i2(n, a, c)];
                    let gbd = g[i2(n, b, d)];
                    let gad = g[i2(n, a, d)];
                    let gbc = g[i2(n, b, c)];
                    w[i4(n, a, b, c, d)] = m[i4(n, a, b, c, d)] - k3 * nt[i4(n, a, c, b, d)]
                        + k1 * (nt[i4(n, b, d, a, c)] - nt[i4(n, a, d, b, c)])
                        + k3 * ric[i2(n, b, c)] * gad
                        - k3 / two * r * gac * gbd
                        + k1 / two * r * (gbd * gac - gad * gbc)
                        - kr * (gac * gbd - gbc * gad);
                }
            }
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Jet of the stereographic sphere metric 4/(1+|x|²)² δ at x, from closed-form derivatives.
    fn sphere_jet(x: &[f64]) -> Jet<f64> {
        let n = x.len();
        let nn = n * n;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let q = 1.0 + r2;
        let phi = 4.0 / (q * q);
        // ∂_a φ = -16 x_a / q^3; ∂_a∂_b φ = -16 δ_ab / q^3 + 96 x_a x_b / q^4
        let mut j = Jet::zero(n, nn);
        for i in 0..n {
            j.v[i * n + i] = phi;
            for a in 0..n {
                j.d1[a * nn + i * n + i] = -16.0 * x[a] / q.powi(3);
                for b in 0..n {
                    let dab = if a == b { 1.0 } else { 0.0 };
                    j.d2[(a * n + b) * nn + i * n + i] = -16.0 * dab / q.powi(3) + 96.0 * x[a] * x[b] / q.powi(4);
                }
            }
        }
        j
    }

    #[test]
    fn sphere_is_constant_curvature() {
        for n in [3usize, 4] {
            let pc = PointCurvature::from_jet(&sphere_jet(&[0.1, -0.2, 0.05, 0.3][..n]));
            assert!((pc.scalar - (n * (n - 1)) as f64).abs() < 1e-12);
            let w = pc.weyl();
            assert!(w.iter().all(|v| v.abs() < 1e-12));
            // Ricci = (n-1) g
            for i in 0..n * n {
                assert!((pc.ricci[i] - (n as f64 - 1.0) * pc.g[i]).abs() < 1e-12);
            }
            let p = pc.schouten();
            for i in 0..n * n {
                assert!((p[i] - 0.5 * pc.g[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reassembly_matches_schouten_path() {
        // generic jet with non-trivial second derivatives
        let n = 4;
        let nn = 16;
        let mut j = Jet::zero(n, nn);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut rnd = || rng.gen::<f64>() - 0.5;
        for i in 0..n {
            for k in i..n {
                let v = if i == k { 1.0 + 0.2 * rnd() } else { 0.1 * rnd() };
                j.v[i * n + k] = v;
                j.v[k * n + i] = v;
                for a in 0..n {
                    let d = 0.3 * rnd();
                    j.d1[a * nn + i * n + k] = d;
                    j.d1[a * nn + k * n + i] = d;
                    for b in a..n {
                        let e = 0.3 * rnd();
                        for (p, q) in [(a, b), (b, a)] {
                            j.d2[(p * n + q) * nn + i * n + k] = e;
                            j.d2[(p * n + q) * nn + k * n + i] = e;
                        }
                    }
                }
            }
        }
        let pc = PointCurvature::from_jet(&j);
        let w = pc.weyl();
        let (m, nt) = pc.mn();
        let w2 = reassemble_weyl(n, &m, &nt, &pc.ricci, pc.scalar, &pc.g);
        let scale = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(scale > 1e-3, "{scale}");
        for k in 0..256 {
            assert!((w[k] - w2[k]).abs() <= 1e-12 * scale);
        }
        assert!(pc.weyl_trace().iter().all(|v| v.abs() < 1e-12));
        // pair symmetry
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let x = pc.riemann[i4(n, a, b, c, d)] - pc.riemann[i4(n, c, d, a, b)];
                        assert!(x.abs() < 1e-12);
                    }
                }
            }
        }
    }
}
