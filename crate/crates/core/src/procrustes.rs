use nalgebra::DMatrix;

use crate::embedding::Embedding;
use crate::error::{Error, Result};

/// Rotation (or reflection) plus translation taking one point set onto another.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidTransform {
    dim: usize,
    rotation: DMatrix<f64>,
    from_mean: Vec<f64>,
    to_mean: Vec<f64>,
}

impl RigidTransform {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, point: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|r| {
                self.to_mean[r]
                    + (0..d)
                        .map(|c| self.rotation[(r, c)] * (point[c] - self.from_mean[c]))
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Least-squares rigid transform taking `moving` onto `reference`, matching
/// points by id.
pub fn procrustes_fit(reference: &Embedding, moving: &Embedding) -> Result<RigidTransform> {
    let d = reference.dim();
    if moving.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: moving.dim(),
        });
    }
    if reference.len() != moving.len() {
        return Err(Error::IdSetMismatch);
    }
    let n = reference.len();
    if n == 0 {
        return Ok(RigidTransform {
            dim: d,
            rotation: DMatrix::identity(d, d),
            from_mean: vec![0.0; d],
            to_mean: vec![0.0; d],
        });
    }

    let mut a = DMatrix::<f64>::zeros(n, d);
    let mut b = DMatrix::<f64>::zeros(n, d);
    for (row, (id, pa)) in reference.iter().enumerate() {
        let pb = moving.get(id).ok_or(Error::IdSetMismatch)?;
        for k in 0..d {
            a[(row, k)] = pa[k];
            b[(row, k)] = pb[k];
        }
    }
    let mean_a = a.row_mean();
    let mean_b = b.row_mean();
    for row in 0..n {
        for k in 0..d {
            a[(row, k)] -= mean_a[k];
            b[(row, k)] -= mean_b[k];
        }
    }

    let svd = (a.transpose() * &b).svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    Ok(RigidTransform {
        dim: d,
        rotation: u * v_t,
        from_mean: mean_b.iter().copied().collect(),
        to_mean: mean_a.iter().copied().collect(),
    })
}

/// Rigidly moves `moving` onto `reference`, matching points by id. Returns the
/// aligned copy and the root-mean-square per-point distance after alignment.
pub fn procrustes_align(reference: &Embedding, moving: &Embedding) -> Result<(Embedding, f64)> {
    let transform = procrustes_fit(reference, moving)?;
    let d = transform.dim();
    let n = moving.len();
    if n == 0 {
        return Ok((moving.clone(), 0.0));
    }
    let mut aligned = Vec::with_capacity(n * d);
    let mut sq = 0.0;
    for (id, pb) in moving.iter() {
        let out = transform.apply(pb);
        let pa = reference.get(id).ok_or(Error::IdSetMismatch)?;
        sq += out.iter().zip(pa).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        aligned.extend(out);
    }
    let rmse = (sq / n as f64).sqrt();
    let aligned = Embedding::from_parts(d, moving.seed(), moving.ids().to_vec(), aligned)?;
    Ok((aligned, rmse))
}
