//! Dense operators that are self-adjoint with respect to the m-weighted
//! inner product ⟨f,g⟩ = Σ m(x) conj(f(x)) g(x). All spectral work happens
//! on the flat-space conjugate M^{1/2} H M^{-1/2}, which is genuinely
//! Hermitian; eigenvectors are mapped back through M^{-1/2}.

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::magnetic::MagneticPotential;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::io::Write;

/// Inclusion tolerance for the counting function N_λ.
pub const COUNTING_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct HermitianOperator {
    matrix: DMatrix<Complex64>,
    measure: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Ascending, with multiplicity.
    eigenvalues: Vec<f64>,
    /// Columns are m-orthonormal eigenvectors.
    eigenvectors: DMatrix<Complex64>,
    measure: Vec<f64>,
}

impl HermitianOperator {
    pub fn new(matrix: DMatrix<Complex64>, measure: Vec<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() != measure.len() {
            return Err(Error::DimensionMismatch);
        }
        let op = HermitianOperator { matrix, measure };
        let dev = op.self_adjointness_deviation();
        let scale = op.norm_estimate().max(1.0);
        if dev > 1e-12 * scale {
            return Err(Error::NonHermitian(dev));
        }
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.measure.len()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    /// max |m_i A_ij - conj(m_j A_ji)| over entries.
    pub fn self_adjointness_deviation(&self) -> f64 {
        let n = self.dim();
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = self.measure[i] * self.matrix[(i, j)];
                let b = (self.measure[j] * self.matrix[(j, i)]).conj();
                dev = dev.max((a - b).norm());
            }
        }
        dev
    }

    fn norm_estimate(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// M^{1/2} A M^{-1/2}, symmetrized.
    fn flat_conjugate(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let sqrt_m: Vec<f64> = self.measure.iter().map(|m| m.sqrt()).collect();
        let mut s = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] = self.matrix[(i, j)] * (sqrt_m[i] / sqrt_m[j]);
            }
        }
        // symmetrize away roundoff
        for i in 0..n {
            for j in i + 1..n {
                let avg = (s[(i, j)] + s[(j, i)].conj()) * 0.5;
                s[(i, j)] = avg;
                s[(j, i)] = avg.conj();
            }
            s[(i, i)] = Complex64::new(s[(i, i)].re, 0.0);
        }
        s
    }

    fn is_real(&self) -> bool {
        self.matrix.iter().all(|z| z.im == 0.0)
    }

    /// Ascending eigenvalues only (no eigenvectors); faster for large
    /// matrices.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let s = self.flat_conjugate();
        let mut vals: Vec<f64> = if self.is_real() {
            let sr = s.map(|z| z.re);
            sr.symmetric_eigenvalues().iter().copied().collect()
        } else {
            s.symmetric_eigenvalues().iter().copied().collect()
        };
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(vals)
    }

    /// Ascending eigenvalues computed with a cyclic Jacobi iteration on
    /// the flat conjugate. Much slower than `eigenvalues`, but for graded
    /// positive-semidefinite matrices (diagonal entries spanning many
    /// orders of magnitude, as with exponentially decaying measures) it
    /// attains high *relative* accuracy on the small eigenvalues, where
    /// QR-type solvers only guarantee absolute accuracy ~eps·‖A‖.
    pub fn eigenvalues_graded(&self) -> Result<Vec<f64>> {
        let mut a = self.flat_conjugate();
        let n = a.nrows();
        let tiny = f64::MIN_POSITIVE;
        for _sweep in 0..60 {
            let mut off_rel: f64 = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    let mag = apq.norm();
                    let scale = (a[(p, p)].re.abs() * a[(q, q)].re.abs()).sqrt().max(tiny);
                    off_rel = off_rel.max(mag / scale);
                    if mag <= 1e-15 * scale {
                        continue;
                    }
                    // unitary plane rotation zeroing (p, q)
                    let u = apq / mag;
                    // zeroing condition: t^2 - 2 tau t - 1 = 0, small root
                    let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
                    let t = if tau >= 0.0 {
                        -1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let su = s * u;
                    let suc = s * u.conj();
                    for i in 0..n {
                        let aip = a[(i, p)];
                        let aiq = a[(i, q)];
                        a[(i, p)] = c * aip + suc * aiq;
                        a[(i, q)] = -su * aip + c * aiq;
                    }
                    for j in 0..n {
                        let apj = a[(p, j)];
                        let aqj = a[(q, j)];
                        a[(p, j)] = c * apj + su * aqj;
                        a[(q, j)] = -suc * apj + c * aqj;
                    }
                    a[(p, q)] = Complex64::new(0.0, 0.0);
                    a[(q, p)] = Complex64::new(0.0, 0.0);
                    a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                    a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
                }
            }
            if off_rel < 1e-14 {
                let mut vals: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
                vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
                return Ok(vals);
            }
        }
        Err(Error::BadParameters(
            "Jacobi eigensolver did not converge in 60 sweeps".to_owned(),
        ))
    }

    /// Full eigendecomposition; the returned eigenvectors are orthonormal
    /// in the m-inner product.
    pub fn eigensolve(&self) -> Result<Spectrum> {
        let n = self.dim();
        let s = self.flat_conjugate();
        let (mut vals, mut vecs): (Vec<f64>, DMatrix<Complex64>) = if self.is_real() {
            let sr = s.map(|z| z.re);
            let se = sr.symmetric_eigen();
            (
                se.eigenvalues.iter().copied().collect(),
                se.eigenvectors.map(|x| Complex64::new(x, 0.0)),
            )
        } else {
            let se = s.symmetric_eigen();
            (se.eigenvalues.iter().copied().collect(), se.eigenvectors)
        };
        // sort ascending, carrying columns
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        let sorted_vals: Vec<f64> = order.iter().map(|&k| vals[k]).collect();
        let mut sorted_vecs = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            sorted_vecs.set_column(dst, &vecs.column(src));
        }
        vals = sorted_vals;
        vecs = sorted_vecs;
        // back to the m-inner product: v = M^{-1/2} u
        for i in 0..n {
            let inv_sqrt = 1.0 / self.measure[i].sqrt();
            for j in 0..n {
                vecs[(i, j)] *= inv_sqrt;
            }
        }
        Ok(Spectrum { eigenvalues: vals, eigenvectors: vecs, measure: self.measure.clone() })
    }

    /// In-place operator application, H v.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += self.matrix[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn inner(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        f.iter()
            .zip(g)
            .zip(&self.measure)
            .map(|((a, b), &m)| a.conj() * b * m)
            .sum()
    }
}

impl Spectrum {
    /// Assemble a spectrum from known eigenpairs (columns m-orthonormal,
    /// eigenvalues ascending).
    pub fn from_parts(
        eigenvalues: Vec<f64>,
        eigenvectors: DMatrix<Complex64>,
        measure: Vec<f64>,
    ) -> Result<Self> {
        if eigenvalues.len() != eigenvectors.ncols()
            || eigenvectors.nrows() != measure.len()
            || eigenvalues.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::DimensionMismatch);
        }
        Ok(Spectrum { eigenvalues, eigenvectors, measure })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.eigenvectors
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// N_λ = #{n : λ_n ≤ λ + tol}.
    pub fn counting_function(&self, lambda: f64) -> usize {
        self.eigenvalues.partition_point(|&x| x <= lambda + COUNTING_TOL)
    }

    pub fn inner(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        f.iter()
            .zip(g)
            .zip(&self.measure)
            .map(|((a, b), &m)| a.conj() * b * m)
            .sum()
    }

    /// e^{itH} v through the eigenbasis.
    pub fn propagator_apply(&self, t: f64, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(v.len(), n);
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            let col = self.eigenvectors.column(k);
            let coeff: Complex64 = col
                .iter()
                .zip(v)
                .zip(&self.measure)
                .map(|((a, b), &m)| a.conj() * b * m)
                .sum();
            let rot = Complex64::from_polar(1.0, self.eigenvalues[k] * t) * coeff;
            for i in 0..n {
                out[i] += rot * col[i];
            }
        }
        out
    }

    /// ‖1_X w‖² in the m-inner product.
    pub fn occupation(&self, w: &[Complex64], window: &[usize]) -> f64 {
        window.iter().map(|&i| self.measure[i] * w[i].norm_sqr()).sum()
    }

    /// Trapezoidal average of ‖1_X e^{itH} v‖² over [0, T].
    pub fn time_averaged_occupation(
        &self,
        v: &[Complex64],
        window: &[usize],
        t_max: f64,
        steps: usize,
    ) -> f64 {
        assert!(steps >= 1);
        let dt = t_max / steps as f64;
        let mut total = 0.0;
        for k in 0..=steps {
            let t = k as f64 * dt;
            let w = self.propagator_apply(t, v);
            let occ = self.occupation(&w, window);
            let weight = if k == 0 || k == steps { 0.5 } else { 1.0 };
            total += weight * occ;
        }
        total * dt / t_max
    }

    /// Max reconstruction residual ‖Hv - λv‖∞ over eigenpairs and max
    /// Gram deviation from identity; both relative to ‖H‖.
    pub fn validate_against(&self, h: &HermitianOperator) -> (f64, f64) {
        let n = self.dim();
        let scale = h.norm_estimate().max(1.0);
        let mut max_resid: f64 = 0.0;
        for k in 0..n {
            let col: Vec<Complex64> = self.eigenvectors.column(k).iter().copied().collect();
            let hv = h.apply(&col);
            for i in 0..n {
                max_resid = max_resid.max((hv[i] - col[i] * self.eigenvalues[k]).norm());
            }
        }
        let mut max_gram: f64 = 0.0;
        for a in 0..n {
            let ca: Vec<Complex64> = self.eigenvectors.column(a).iter().copied().collect();
            for b in a..n {
                let cb: Vec<Complex64> = self.eigenvectors.column(b).iter().copied().collect();
                let g = self.inner(&ca, &cb);
                let target = if a == b { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
                max_gram = max_gram.max((g - target).norm());
            }
        }
        (max_resid / scale, max_gram)
    }
}

/// Δ_{G,θ}: diagonal deg(x), off-diagonal -E(x,y) e^{iθ_{x,y}} / m(x).
pub fn assemble_laplacian(
    g: &WeightedGraph,
    theta: &MagneticPotential,
) -> Result<HermitianOperator> {
    theta.check(g)?;
    let n = g.vertex_count();
    let mut a = DMatrix::zeros(n, n);
    for x in 0..n {
        a[(x, x)] = Complex64::new(g.degree(x), 0.0);
    }
    for (k, e) in g.edges().iter().enumerate() {
        let u_uv = theta.oriented(g, k, e.u).unit();
        a[(e.u, e.v)] = -e.weight * u_uv / g.measure(e.u);
        a[(e.v, e.u)] = -e.weight * u_uv.conj() / g.measure(e.v);
    }
    HermitianOperator::new(a, g.measures().to_vec())
}

/// The degree operator: diagonal multiplication by deg_G(x).
pub fn assemble_degree(g: &WeightedGraph) -> HermitianOperator {
    let n = g.vertex_count();
    let mut a = DMatrix::zeros(n, n);
    for x in 0..n {
        a[(x, x)] = Complex64::new(g.degree(x), 0.0);
    }
    HermitianOperator::new(a, g.measures().to_vec()).expect("diagonal is self-adjoint")
}

/// Q_{G,θ}(f) = (1/2) Σ_{x,y} E(x,y) |f(x) - e^{iθ_{x,y}} f(y)|².
pub fn quadratic_form(g: &WeightedGraph, theta: &MagneticPotential, f: &[Complex64]) -> Result<f64> {
    theta.check(g)?;
    if f.len() != g.vertex_count() {
        return Err(Error::DimensionMismatch);
    }
    let mut q = 0.0;
    for (k, e) in g.edges().iter().enumerate() {
        // the double sum visits each edge twice, once per orientation
        let u_uv = theta.oriented(g, k, e.u).unit();
        q += e.weight * (f[e.u] - u_uv * f[e.v]).norm_sqr();
    }
    Ok(q)
}

/// Form-order verdict for A ⪯ B with a PSD witness.
#[derive(Debug, Clone, Copy)]
pub struct FormOrder {
    pub holds: bool,
    /// Smallest eigenvalue of the preconditioned flat conjugate of B - A.
    pub witness: f64,
}

/// A ⪯ B in the form sense iff B - A is positive semidefinite in the
/// m-inner product. Semidefiniteness is invariant under congruence, so
/// the flat conjugate of B - A is scaled by S = diag(1/sqrt(max(1,
/// |a_ii|, |b_ii|))) before the eigensolve; without this, rows whose
/// diagonal entries are huge (graded operators with tiny measures) would
/// drown the witness in cancellation noise of size eps·‖B‖. The reported
/// witness is λ_min(S·M^{1/2}(B-A)M^{-1/2}·S) and is compared to -tol.
pub fn form_leq(a: &HermitianOperator, b: &HermitianOperator, tol: f64) -> Result<FormOrder> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch);
    }
    if a
        .measure
        .iter()
        .zip(&b.measure)
        .any(|(x, y)| (x - y).abs() > 1e-12 * x.abs().max(1.0))
    {
        return Err(Error::DimensionMismatch);
    }
    let diff = HermitianOperator {
        matrix: &b.matrix - &a.matrix,
        measure: a.measure.clone(),
    };
    let mut flat = diff.flat_conjugate();
    let n = flat.nrows();
    let s: Vec<f64> = (0..n)
        .map(|i| {
            1.0 / a.matrix[(i, i)]
                .re
                .abs()
                .max(b.matrix[(i, i)].re.abs())
                .max(1.0)
                .sqrt()
        })
        .collect();
    for i in 0..n {
        for j in 0..n {
            flat[(i, j)] *= s[i] * s[j];
        }
    }
    let mut vals: Vec<f64> = if flat.iter().all(|z| z.im == 0.0) {
        flat.map(|z| z.re).symmetric_eigenvalues().iter().copied().collect()
    } else {
        flat.symmetric_eigenvalues().iter().copied().collect()
    };
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let witness = vals[0];
    Ok(FormOrder { holds: witness >= -tol, witness })
}

/// Format a float with 17 significant digits, stable across runs.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Spectrum CSV: `index,eigenvalue`.
pub fn write_spectrum_csv<W: Write>(mut w: W, spec: &[f64]) -> std::io::Result<()> {
    writeln!(w, "index,eigenvalue")?;
    for (i, v) in spec.iter().enumerate() {
        writeln!(w, "{},{}", i, fmt_f64(*v))?;
    }
    Ok(())
}

/// Binary eigenvector dump: 16-byte header (magic "CUSPEC01", u32 dimension,
/// u32 count, little endian), then column-major complex doubles.
pub fn write_eigenvectors_bin<W: Write>(mut w: W, spec: &Spectrum) -> std::io::Result<()> {
    w.write_all(b"CUSPEC01")?;
    let dim = spec.dim() as u32;
    let count = spec.dim() as u32;
    w.write_all(&dim.to_le_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    for j in 0..spec.dim() {
        for i in 0..spec.dim() {
            let z = spec.eigenvectors()[(i, j)];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}
