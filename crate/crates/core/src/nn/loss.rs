use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::tensor::{sq_dist, Tensor2};

/// Lower bound applied to probabilities before taking their logarithm.
pub const LOG_CLAMP: f64 = 1e-12;

/// Per-view cluster centers in embedding space, one row per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCenters {
    centers: Tensor2,
}

impl ClusterCenters {
    pub fn new(centers: Tensor2) -> Self {
        Self { centers }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidCenters("no centers given"));
        }
        Ok(Self::new(Tensor2::from_rows(rows)?))
    }

    #[inline]
    pub fn n_clusters(&self) -> usize {
        self.centers.rows()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.centers.cols()
    }

    #[inline]
    pub fn as_tensor(&self) -> &Tensor2 {
        &self.centers
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        self.centers.as_mut_slice()
    }
}

/// Row-stochastic Student's-t membership matrix (instances × clusters).
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAssignment {
    values: Tensor2,
}

impl SoftAssignment {
    #[inline]
    pub fn values(&self) -> &Tensor2 {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }
}

/// Sum over instances of the squared reconstruction error.
pub fn reconstruction_loss(reconstruction: &Tensor2, input: &Tensor2) -> Result<f64> {
    check_dim("reconstruction rows", input.rows(), reconstruction.rows())?;
    check_dim("reconstruction cols", input.cols(), reconstruction.cols())?;
    Ok(sq_dist(reconstruction.as_slice(), input.as_slice()))
}

/// Student's-t kernel `1 / (1 + ‖z − c‖²)`, row-normalized.
pub fn soft_assignment(z: &Tensor2, centers: &ClusterCenters) -> Result<SoftAssignment> {
    if centers.n_clusters() == 0 {
        return Err(Error::InvalidCenters("no centers given"));
    }
    check_dim("embedding width vs centers", centers.dim(), z.cols())?;
    let (_, s) = kernel_and_assignment(z, centers);
    Ok(SoftAssignment { values: s })
}

fn kernel_and_assignment(z: &Tensor2, centers: &ClusterCenters) -> (Tensor2, Tensor2) {
    let k = centers.n_clusters();
    let mut q = Vec::with_capacity(z.rows() * k);
    let mut s = Vec::with_capacity(z.rows() * k);
    for zi in z.iter_rows() {
        let start = q.len();
        let mut total = 0.0;
        for c in centers.as_tensor().iter_rows() {
            let v = 1.0 / (1.0 + sq_dist(zi, c));
            total += v;
            q.push(v);
        }
        s.extend(q[start..].iter().map(|v| v / total));
    }
    (
        Tensor2::from_raw(z.rows(), k, q),
        Tensor2::from_raw(z.rows(), k, s),
    )
}

/// `−Σ_i Σ_j y_ij · ln(max(s_ij, LOG_CLAMP))`.
pub fn cross_entropy_loss(target: &Tensor2, assignment: &SoftAssignment) -> Result<f64> {
    let s = assignment.values();
    check_dim("cross-entropy rows", target.rows(), s.rows())?;
    check_dim("cross-entropy cols", target.cols(), s.cols())?;
    Ok(target
        .as_slice()
        .iter()
        .zip(s.as_slice())
        .filter(|(y, _)| **y != 0.0)
        .map(|(y, p)| -y * libm::log(p.max(LOG_CLAMP)))
        .sum())
}

/// `reconstruction + lambda · cross_entropy`.
pub fn combined_loss(reconstruction: f64, cross_entropy: f64, lambda: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Config(alloc::format!(
            "trade-off coefficient must be non-negative, got {lambda}"
        )));
    }
    Ok(reconstruction + lambda * cross_entropy)
}

/// Cross-entropy value plus its gradients w.r.t. the embeddings and centers.
///
/// With `w_ij = y_ij` (zeroed where `s_ij` is clamped) and `W_i = Σ_j w_ij`:
/// `∂L/∂z_i = 2 Σ_j (w_ij − W_i s_ij) q_ij (z_i − c_j)` and
/// `∂L/∂c_j = −2 Σ_i (w_ij − W_i s_ij) q_ij (z_i − c_j)`.
pub(crate) fn cross_entropy_gradients(
    z: &Tensor2,
    centers: &ClusterCenters,
    target: &Tensor2,
) -> Result<(f64, Tensor2, Tensor2)> {
    check_dim("embedding width vs centers", centers.dim(), z.cols())?;
    check_dim("target rows", z.rows(), target.rows())?;
    check_dim("target cols", centers.n_clusters(), target.cols())?;
    let (q, s) = kernel_and_assignment(z, centers);
    let k = centers.n_clusters();
    let d = z.cols();
    let mut loss = 0.0;
    let mut grad_z = alloc::vec![0.0; z.rows() * d];
    let mut grad_c = alloc::vec![0.0; k * d];
    let mut coeff = alloc::vec![0.0; k];
    for i in 0..z.rows() {
        let mut weight_sum = 0.0;
        for j in 0..k {
            let y = target[(i, j)];
            let p = s[(i, j)];
            coeff[j] = 0.0;
            if y != 0.0 {
                loss -= y * libm::log(p.max(LOG_CLAMP));
                if p >= LOG_CLAMP {
                    coeff[j] = y;
                    weight_sum += y;
                }
            }
        }
        let zi = z.row(i);
        for j in 0..k {
            let a = 2.0 * (coeff[j] - weight_sum * s[(i, j)]) * q[(i, j)];
            if a == 0.0 {
                continue;
            }
            let cj = centers.as_tensor().row(j);
            for t in 0..d {
                let diff = a * (zi[t] - cj[t]);
                grad_z[i * d + t] += diff;
                grad_c[j * d + t] -= diff;
            }
        }
    }
    Ok((
        loss,
        Tensor2::from_raw(z.rows(), d, grad_z),
        Tensor2::from_raw(k, d, grad_c),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[&[f64]]) -> Tensor2 {
        Tensor2::from_rows(rows).unwrap()
    }

    #[test]
    fn reconstruction_examples() {
        let x = t(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(reconstruction_loss(&x, &x).unwrap(), 0.0);
        assert_eq!(
            reconstruction_loss(&t(&[&[0.0, 0.0]]), &t(&[&[1.0, 0.0]])).unwrap(),
            1.0
        );
        assert_eq!(
            reconstruction_loss(&Tensor2::zeros(2, 2), &x).unwrap(),
            30.0
        );
        assert!(reconstruction_loss(&Tensor2::zeros(1, 2), &x).is_err());
    }

    #[test]
    fn soft_assignment_examples() {
        let one = ClusterCenters::from_rows(&[[5.0, 5.0]]).unwrap();
        let s = soft_assignment(&t(&[&[0.0, 1.0]]), &one).unwrap();
        assert_eq!(s.get(0, 0), 1.0);

        let two = ClusterCenters::from_rows(&[[-1.0], [1.0]]).unwrap();
        let s = soft_assignment(&t(&[&[0.0]]), &two).unwrap();
        assert_eq!((s.get(0, 0), s.get(0, 1)), (0.5, 0.5));

        let near_far = ClusterCenters::from_rows(&[[0.0], [1.0]]).unwrap();
        let s = soft_assignment(&t(&[&[0.0]]), &near_far).unwrap();
        assert!((s.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);

        assert!(matches!(
            soft_assignment(&t(&[&[0.0, 0.0]]), &near_far),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            ClusterCenters::from_rows::<[f64; 1]>(&[]),
            Err(Error::InvalidCenters(_))
        ));
    }

    #[test]
    fn cross_entropy_examples() {
        let centers = ClusterCenters::from_rows(&[[-1.0], [1.0]]).unwrap();
        let half = soft_assignment(&t(&[&[0.0], &[0.0]]), &centers).unwrap();
        let y = t(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let ln2 = core::f64::consts::LN_2;
        assert!((cross_entropy_loss(&y, &half).unwrap() - 2.0 * ln2).abs() < 1e-12);

        let single = soft_assignment(&t(&[&[0.0]]), &centers).unwrap();
        assert!((cross_entropy_loss(&t(&[&[1.0, 0.0]]), &single).unwrap() - ln2).abs() < 1e-12);

        let one = ClusterCenters::from_rows(&[[3.0]]).unwrap();
        let certain = soft_assignment(&t(&[&[0.0]]), &one).unwrap();
        assert_eq!(cross_entropy_loss(&t(&[&[1.0]]), &certain).unwrap(), 0.0);
    }

    #[test]
    fn cross_entropy_clamps_vanishing_probability() {
        // Second center is so close that the first gets ~1e-16 probability.
        let centers = ClusterCenters::from_rows(&[[1e8], [0.0]]).unwrap();
        let s = soft_assignment(&t(&[&[0.0]]), &centers).unwrap();
        assert!(s.get(0, 0) < LOG_CLAMP);
        let loss = cross_entropy_loss(&t(&[&[1.0, 0.0]]), &s).unwrap();
        assert!((loss + libm::log(LOG_CLAMP)).abs() < 1e-9);
        let (l2, gz, gc) =
            cross_entropy_gradients(&t(&[&[0.0]]), &centers, &t(&[&[1.0, 0.0]])).unwrap();
        assert_eq!(loss, l2);
        assert_eq!(gz.as_slice(), &[0.0]);
        assert_eq!(gc.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn combined_loss_examples() {
        assert_eq!(combined_loss(3.5, 9.0, 0.0).unwrap(), 3.5);
        assert!((combined_loss(1.0, 2.0, 0.1).unwrap() - 1.2).abs() < 1e-15);
        assert_eq!(combined_loss(0.0, 5.0, 1.0).unwrap(), 5.0);
        assert!(matches!(
            combined_loss(1.0, 1.0, -0.1),
            Err(Error::Config(_))
        ));
    }
}
