//! Matrix product state compression of dense tensors by sequential SVD.

use nalgebra::DMatrix;

use crate::error::TensorError;
use crate::tensor::{contract, IndexPairing, Tensor};

/// Site tensors of a compressed tensor. Site `k` carries the original label
/// `k` plus internal bonds `__mps{k-1}` and `__mps{k}`.
#[derive(Debug, Clone)]
pub struct MpsChain {
    pub sites: Vec<Tensor>,
    /// Frobenius norm of the discarded singular values at each cut.
    pub truncation_errors: Vec<f64>,
}

fn bond(k: usize) -> String {
    format!("__mps{k}")
}

/// Splits `w` into a chain, keeping at most `chi` singular values per cut.
pub fn mps_truncate(w: &Tensor, chi: Option<usize>) -> Result<MpsChain, TensorError> {
    let dense = w.to_dense();
    let labels = dense.labels().to_vec();
    let dims = dense.dims().to_vec();
    let r = dims.len();
    if r == 0 {
        return Err(TensorError::NotAVector(0));
    }
    let mut rem = dense.to_vec();
    let mut left = 1;
    let mut sites = Vec::with_capacity(r);
    let mut errors = Vec::with_capacity(r.saturating_sub(1));
    for k in 0..r - 1 {
        let rows = left * dims[k];
        let cols = rem.len() / rows;
        let svd = DMatrix::from_row_slice(rows, cols, &rem).svd(true, true);
        let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let keep = chi.unwrap_or(order.len()).clamp(1, order.len());
        let err2: f64 = order[keep..].iter().map(|&i| svd.singular_values[i].powi(2)).sum();
        errors.push(err2.sqrt());

        let mut site = Vec::with_capacity(rows * keep);
        for row in 0..rows {
            for &s in &order[..keep] {
                site.push(u[(row, s)]);
            }
        }
        let (mut names, mut sdims) = (Vec::new(), Vec::new());
        if k > 0 {
            names.push(bond(k - 1));
            sdims.push(left);
        }
        names.extend([labels[k].clone(), bond(k)]);
        sdims.extend([dims[k], keep]);
        sites.push(Tensor::dense_owned(names, sdims, site)?);

        let mut next = Vec::with_capacity(keep * cols);
        for &s in &order[..keep] {
            let sv = svd.singular_values[s];
            for c in 0..cols {
                next.push(sv * vt[(s, c)]);
            }
        }
        rem = next;
        left = keep;
    }
    let (mut names, mut sdims) = (Vec::new(), Vec::new());
    if r > 1 {
        names.push(bond(r - 2));
        sdims.push(left);
    }
    names.push(labels[r - 1].clone());
    sdims.push(dims[r - 1]);
    sites.push(Tensor::dense_owned(names, sdims, rem)?);
    Ok(MpsChain {
        sites,
        truncation_errors: errors,
    })
}

impl MpsChain {
    /// Upper bound on the Frobenius distance to the source tensor.
    pub fn total_error(&self) -> f64 {
        self.truncation_errors.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn max_bond(&self) -> usize {
        self.sites
            .iter()
            .filter_map(|t| t.labels().iter().position(|l| l.starts_with("__mps")).map(|i| t.dims()[i]))
            .max()
            .unwrap_or(1)
    }

    /// Contracts the chain back into one tensor with the original labels.
    pub fn to_tensor(&self) -> Result<Tensor, TensorError> {
        let mut it = self.sites.iter();
        let mut acc = it.next().cloned().ok_or(TensorError::NotAVector(0))?;
        for s in it {
            acc = contract(&acc, s, &IndexPairing::shared(&acc, s))?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Tensor {
        let data: Vec<f64> = (0..24).map(|k| ((k * 7 % 5) as f64) + 0.5).collect();
        Tensor::dense(&["a", "b", "c"], &[2, 3, 4], data).unwrap()
    }

    #[test]
    fn untruncated_roundtrip() {
        let w = sample();
        let back = mps_truncate(&w, None).unwrap().to_tensor().unwrap();
        assert_eq!(back.labels(), w.labels());
        for (x, y) in back.to_vec().iter().zip(w.to_vec()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn truncation_error_bounds_distance() {
        let w = sample();
        let chain = mps_truncate(&w, Some(1)).unwrap();
        assert_eq!(chain.max_bond(), 1);
        let back = chain.to_tensor().unwrap();
        let dist: f64 = back
            .to_vec()
            .iter()
            .zip(w.to_vec())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(dist <= chain.total_error() + 1e-9);
        assert!(chain.total_error() > 0.0);
    }

    #[test]
    fn rank_one_tensor_is_one_site() {
        let v = Tensor::vector("x", vec![1.0, 2.0]);
        let chain = mps_truncate(&v, Some(1)).unwrap();
        assert_eq!(chain.sites.len(), 1);
        assert_eq!(chain.to_tensor().unwrap().to_vec(), vec![1.0, 2.0]);
    }
}
