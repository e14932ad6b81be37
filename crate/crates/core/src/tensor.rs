//! Labeled multi-index tensors with dense or coordinate-sparse storage.

use std::collections::HashMap;

use rand::Rng;

use crate::error::TensorError;

type Result<T> = std::result::Result<T, TensorError>;

/// Element storage. Sparse entries are `(flat row-major offset, value)`,
/// sorted by offset and free of duplicates.
#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Dense(Vec<f64>),
    Sparse(Vec<(usize, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    labels: Vec<String>,
    dims: Vec<usize>,
    storage: Storage,
}

/// Pairs of labels (one from each operand) summed over by [`contract`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IndexPairing(pub Vec<(String, String)>);

impl IndexPairing {
    pub fn new(pairs: &[(&str, &str)]) -> Self {
        Self(pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect())
    }

    /// Pairs every label present in both tensors with itself.
    pub fn shared(a: &Tensor, b: &Tensor) -> Self {
        Self(
            a.labels
                .iter()
                .filter(|l| b.labels.contains(l))
                .map(|l| (l.clone(), l.clone()))
                .collect(),
        )
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

fn check_labels(labels: &[String]) -> Result<()> {
    for (k, l) in labels.iter().enumerate() {
        if labels[..k].contains(l) {
            return Err(TensorError::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

fn owned(labels: &[&str]) -> Vec<String> {
    labels.iter().map(|s| s.to_string()).collect()
}

impl Tensor {
    pub fn dense(labels: &[&str], dims: &[usize], data: Vec<f64>) -> Result<Self> {
        Self::dense_owned(owned(labels), dims.to_vec(), data)
    }

    pub(crate) fn dense_owned(labels: Vec<String>, dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_labels(&labels)?;
        if labels.len() != dims.len() {
            return Err(TensorError::DataLength {
                expected: labels.len(),
                got: dims.len(),
            });
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(TensorError::DataLength {
                expected: n,
                got: data.len(),
            });
        }
        Ok(Self {
            labels,
            dims,
            storage: Storage::Dense(data),
        })
    }

    pub fn sparse(labels: &[&str], dims: &[usize], entries: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        Self::sparse_owned(owned(labels), dims.to_vec(), entries)
    }

    pub(crate) fn sparse_owned(labels: Vec<String>, dims: Vec<usize>, entries: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        check_labels(&labels)?;
        let st = strides(&dims);
        let mut flat = Vec::with_capacity(entries.len());
        for (coord, v) in entries {
            if coord.len() != dims.len() || coord.iter().zip(&dims).any(|(&c, &d)| c >= d) {
                return Err(TensorError::BadCoordinate(coord));
            }
            let off: usize = coord.iter().zip(&st).map(|(c, s)| c * s).sum();
            flat.push((off, v, coord));
        }
        flat.sort_by_key(|e| e.0);
        for w in flat.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(TensorError::BadCoordinate(w[1].2.clone()));
            }
        }
        Ok(Self {
            labels,
            dims,
            storage: Storage::Sparse(flat.into_iter().map(|(o, v, _)| (o, v)).collect()),
        })
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            labels: vec![],
            dims: vec![],
            storage: Storage::Dense(vec![v]),
        }
    }

    pub fn vector(label: &str, data: Vec<f64>) -> Self {
        Self {
            labels: vec![label.to_string()],
            dims: vec![data.len()],
            storage: Storage::Dense(data),
        }
    }

    pub fn ones(label: &str, dim: usize) -> Self {
        Self::vector(label, vec![1.0; dim])
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    /// Number of elements of the dense shape.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| TensorError::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label).map(|p| self.dims[p])
    }

    /// Count of entries different from zero.
    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(d) => d.iter().filter(|v| **v != 0.0).count(),
            Storage::Sparse(e) => e.iter().filter(|(_, v)| *v != 0.0).count(),
        }
    }

    pub fn get(&self, coord: &[usize]) -> Result<f64> {
        if coord.len() != self.dims.len() || coord.iter().zip(&self.dims).any(|(&c, &d)| c >= d) {
            return Err(TensorError::BadCoordinate(coord.to_vec()));
        }
        let off: usize = coord.iter().zip(strides(&self.dims)).map(|(c, s)| c * s).sum();
        Ok(match &self.storage {
            Storage::Dense(d) => d[off],
            Storage::Sparse(e) => e
                .binary_search_by_key(&off, |x| x.0)
                .map(|k| e[k].1)
                .unwrap_or(0.0),
        })
    }

    /// Row-major data of the dense shape.
    pub fn to_vec(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(d) => d.clone(),
            Storage::Sparse(e) => {
                let mut d = vec![0.0; self.len()];
                for &(o, v) in e {
                    d[o] = v;
                }
                d
            }
        }
    }

    pub fn to_dense(&self) -> Self {
        Self {
            labels: self.labels.clone(),
            dims: self.dims.clone(),
            storage: Storage::Dense(self.to_vec()),
        }
    }

    pub fn to_sparse(&self) -> Self {
        let entries = match &self.storage {
            Storage::Sparse(e) => e.clone(),
            Storage::Dense(d) => d
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(o, &v)| (o, v))
                .collect(),
        };
        Self {
            labels: self.labels.clone(),
            dims: self.dims.clone(),
            storage: Storage::Sparse(entries),
        }
    }

    /// Largest entry (0 for an all-zero sparse tensor).
    pub fn max(&self) -> f64 {
        match &self.storage {
            Storage::Dense(d) => d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Storage::Sparse(e) => {
                let m = e.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
                if e.len() < self.len() {
                    m.max(0.0)
                } else {
                    m
                }
            }
        }
    }

    pub fn scale(mut self, f: f64) -> Self {
        match &mut self.storage {
            Storage::Dense(d) => d.iter_mut().for_each(|v| *v *= f),
            Storage::Sparse(e) => e.iter_mut().for_each(|v| v.1 *= f),
        }
        self
    }

    pub fn relabel(mut self, from: &str, to: &str) -> Result<Self> {
        let p = self.position(from)?;
        if from != to && self.labels.iter().any(|l| l == to) {
            return Err(TensorError::DuplicateLabel(to.to_string()));
        }
        self.labels[p] = to.to_string();
        Ok(self)
    }

    /// Reorders the axes to `order`, which must list every label once.
    pub fn permute(&self, order: &[&str]) -> Result<Self> {
        let order: Vec<String> = owned(order);
        self.permute_owned(&order)
    }

    fn permute_owned(&self, order: &[String]) -> Result<Self> {
        if order.len() != self.labels.len() {
            return Err(TensorError::DataLength {
                expected: self.labels.len(),
                got: order.len(),
            });
        }
        check_labels(order)?;
        let perm: Vec<usize> = order.iter().map(|l| self.position(l)).collect::<Result<_>>()?;
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let new_dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let old_st = strides(&self.dims);
        let new_st = strides(&new_dims);
        // stride in the new layout of each old axis
        let mut map = vec![0; perm.len()];
        for (k, &p) in perm.iter().enumerate() {
            map[p] = new_st[k];
        }
        let relocate = |mut off: usize| -> usize {
            let mut out = 0;
            for (ax, &s) in old_st.iter().enumerate() {
                out += (off / s) * map[ax];
                off %= s;
            }
            out
        };
        let storage = match &self.storage {
            Storage::Dense(d) => {
                let mut nd = vec![0.0; d.len()];
                for (o, &v) in d.iter().enumerate() {
                    nd[relocate(o)] = v;
                }
                Storage::Dense(nd)
            }
            Storage::Sparse(e) => {
                let mut ne: Vec<(usize, f64)> = e.iter().map(|&(o, v)| (relocate(o), v)).collect();
                ne.sort_by_key(|x| x.0);
                Storage::Sparse(ne)
            }
        };
        Ok(Self {
            labels: order.to_vec(),
            dims: new_dims,
            storage,
        })
    }

    /// Fixes `label` to `value` and drops the axis.
    pub fn slice(&self, label: &str, value: usize) -> Result<Self> {
        let p = self.position(label)?;
        if value >= self.dims[p] {
            return Err(TensorError::BadCoordinate(vec![value]));
        }
        let outer: usize = self.dims[..p].iter().product();
        let d = self.dims[p];
        let inner: usize = self.dims[p + 1..].iter().product();
        let mut labels = self.labels.clone();
        labels.remove(p);
        let mut dims = self.dims.clone();
        dims.remove(p);
        let storage = match &self.storage {
            Storage::Dense(data) => {
                let mut out = Vec::with_capacity(outer * inner);
                for o in 0..outer {
                    let base = (o * d + value) * inner;
                    out.extend_from_slice(&data[base..base + inner]);
                }
                Storage::Dense(out)
            }
            Storage::Sparse(e) => Storage::Sparse(
                e.iter()
                    .filter_map(|&(off, v)| {
                        let o = off / (d * inner);
                        let r = off % (d * inner);
                        (r / inner == value).then(|| (o * inner + r % inner, v))
                    })
                    .collect(),
            ),
        };
        Ok(Self { labels, dims, storage })
    }

    /// Sums `label` out.
    pub fn trace_index(&self, label: &str) -> Result<Self> {
        let p = self.position(label)?;
        let outer: usize = self.dims[..p].iter().product();
        let d = self.dims[p];
        let inner: usize = self.dims[p + 1..].iter().product();
        let mut labels = self.labels.clone();
        labels.remove(p);
        let mut dims = self.dims.clone();
        dims.remove(p);
        let storage = match &self.storage {
            Storage::Dense(data) => {
                let mut out = vec![0.0; outer * inner];
                for o in 0..outer {
                    for k in 0..d {
                        let base = (o * d + k) * inner;
                        for i in 0..inner {
                            out[o * inner + i] += data[base + i];
                        }
                    }
                }
                Storage::Dense(out)
            }
            Storage::Sparse(e) => {
                let mut acc: HashMap<usize, f64> = HashMap::new();
                for &(off, v) in e {
                    let o = off / (d * inner);
                    let i = off % inner;
                    *acc.entry(o * inner + i).or_insert(0.0) += v;
                }
                let mut v: Vec<(usize, f64)> = acc.into_iter().collect();
                v.sort_by_key(|x| x.0);
                Storage::Sparse(v)
            }
        };
        Ok(Self { labels, dims, storage })
    }

    /// Splits one axis into several consecutive axes whose dims multiply to
    /// the original dim (a pure reshape in row-major order).
    pub fn split_label(mut self, label: &str, parts: &[(&str, usize)]) -> Result<Self> {
        let p = self.position(label)?;
        let prod: usize = parts.iter().map(|x| x.1).product();
        if prod != self.dims[p] {
            return Err(TensorError::DataLength {
                expected: self.dims[p],
                got: prod,
            });
        }
        self.labels
            .splice(p..=p, parts.iter().map(|x| x.0.to_string()));
        self.dims.splice(p..=p, parts.iter().map(|x| x.1));
        check_labels(&self.labels)?;
        Ok(self)
    }

    /// Iterates `(coordinate, value)` over stored entries.
    pub fn entries(&self) -> Vec<(Vec<usize>, f64)> {
        let unravel = |mut off: usize| -> Vec<usize> {
            let mut c = vec![0; self.dims.len()];
            for k in (0..self.dims.len()).rev() {
                c[k] = off % self.dims[k];
                off /= self.dims[k];
            }
            c
        };
        match &self.storage {
            Storage::Dense(d) => d.iter().enumerate().map(|(o, &v)| (unravel(o), v)).collect(),
            Storage::Sparse(e) => e.iter().map(|&(o, v)| (unravel(o), v)).collect(),
        }
    }
}

/// Contracts `a` and `b` over `pairing`; result labels are the unpaired
/// labels of `a` followed by those of `b`.
pub fn contract(a: &Tensor, b: &Tensor, pairing: &IndexPairing) -> Result<Tensor> {
    let mut ops = 0;
    contract_counted(a, b, pairing, &mut ops)
}

enum Operand {
    Dense(Vec<f64>),
    Sparse(Vec<(usize, usize, f64)>),
}

/// Splits every entry offset into `(free offset, paired offset)`.
fn layout(t: &Tensor, paired: &[usize], paired_first: bool) -> (Operand, usize, usize) {
    let free: Vec<usize> = (0..t.rank()).filter(|p| !paired.contains(p)).collect();
    let fdim: usize = free.iter().map(|&p| t.dims[p]).product();
    let kdim: usize = paired.iter().map(|&p| t.dims[p]).product();
    let fst = strides(&free.iter().map(|&p| t.dims[p]).collect::<Vec<_>>());
    let kst = strides(&paired.iter().map(|&p| t.dims[p]).collect::<Vec<_>>());
    let mut fmul = vec![0; t.rank()];
    let mut kmul = vec![0; t.rank()];
    for (k, &p) in free.iter().enumerate() {
        fmul[p] = fst[k];
    }
    for (k, &p) in paired.iter().enumerate() {
        kmul[p] = kst[k];
    }
    let st = strides(&t.dims);
    let split = |mut off: usize| -> (usize, usize) {
        let (mut f, mut k) = (0, 0);
        for ax in 0..st.len() {
            let c = off / st[ax];
            off %= st[ax];
            f += c * fmul[ax];
            k += c * kmul[ax];
        }
        (f, k)
    };
    let op = match &t.storage {
        Storage::Dense(_) => {
            let order: Vec<String> = if paired_first {
                paired.iter().chain(free.iter()).map(|&p| t.labels[p].clone()).collect()
            } else {
                free.iter().chain(paired.iter()).map(|&p| t.labels[p].clone()).collect()
            };
            let pt = t.permute_owned(&order).expect("labels are valid");
            Operand::Dense(pt.to_vec())
        }
        Storage::Sparse(e) => Operand::Sparse(
            e.iter()
                .filter(|x| x.1 != 0.0)
                .map(|&(o, v)| {
                    let (f, k) = split(o);
                    (f, k, v)
                })
                .collect(),
        ),
    };
    (op, fdim, kdim)
}

/// [`contract`] that also adds the number of scalar multiply-adds performed
/// to `ops`.
pub fn contract_counted(a: &Tensor, b: &Tensor, pairing: &IndexPairing, ops: &mut u64) -> Result<Tensor> {
    let mut pa = Vec::new();
    let mut pb = Vec::new();
    for (la, lb) in &pairing.0 {
        let ia = a.position(la)?;
        let ib = b.position(lb)?;
        if pa.contains(&ia) {
            return Err(TensorError::DuplicateLabel(la.clone()));
        }
        if pb.contains(&ib) {
            return Err(TensorError::DuplicateLabel(lb.clone()));
        }
        if a.dims[ia] != b.dims[ib] {
            return Err(TensorError::DimMismatch {
                a: la.clone(),
                b: lb.clone(),
                da: a.dims[ia],
                db: b.dims[ib],
            });
        }
        pa.push(ia);
        pb.push(ib);
    }
    let mut labels = Vec::new();
    let mut dims = Vec::new();
    for (t, paired) in [(a, &pa), (b, &pb)] {
        for p in 0..t.rank() {
            if !paired.contains(&p) {
                labels.push(t.labels[p].clone());
                dims.push(t.dims[p]);
            }
        }
    }
    check_labels(&labels)?;
    let (oa, fa, k) = layout(a, &pa, false);
    let (ob, fb, _) = layout(b, &pb, true);
    let storage = match (oa, ob) {
        (Operand::Dense(am), Operand::Dense(bm)) => {
            let mut out = vec![0.0; fa * fb];
            for i in 0..fa {
                let row = &mut out[i * fb..(i + 1) * fb];
                for kk in 0..k {
                    let x = am[i * k + kk];
                    if x == 0.0 {
                        continue;
                    }
                    *ops += fb as u64;
                    for (r, y) in row.iter_mut().zip(&bm[kk * fb..(kk + 1) * fb]) {
                        *r += x * y;
                    }
                }
            }
            Storage::Dense(out)
        }
        (Operand::Sparse(ae), Operand::Dense(bm)) => {
            let mut out = vec![0.0; fa * fb];
            for (i, kk, x) in ae {
                *ops += fb as u64;
                let row = &mut out[i * fb..(i + 1) * fb];
                for (r, y) in row.iter_mut().zip(&bm[kk * fb..(kk + 1) * fb]) {
                    *r += x * y;
                }
            }
            Storage::Dense(out)
        }
        (Operand::Dense(am), Operand::Sparse(be)) => {
            let mut out = vec![0.0; fa * fb];
            for (j, kk, y) in be {
                for i in 0..fa {
                    let x = am[i * k + kk];
                    if x != 0.0 {
                        *ops += 1;
                        out[i * fb + j] += x * y;
                    }
                }
            }
            Storage::Dense(out)
        }
        (Operand::Sparse(ae), Operand::Sparse(be)) => {
            let mut by_k: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
            for (j, kk, y) in be {
                by_k.entry(kk).or_default().push((j, y));
            }
            let mut acc: HashMap<usize, f64> = HashMap::new();
            for (i, kk, x) in ae {
                if let Some(row) = by_k.get(&kk) {
                    for &(j, y) in row {
                        *ops += 1;
                        *acc.entry(i * fb + j).or_insert(0.0) += x * y;
                    }
                }
            }
            let mut v: Vec<(usize, f64)> = acc.into_iter().collect();
            v.sort_by_key(|x| x.0);
            Storage::Sparse(v)
        }
    };
    Ok(Tensor { labels, dims, storage })
}

/// Picks uniformly among entries within `rel_tol` of the maximum.
///
/// Returns the chosen index and the size of the tie set. The generator is
/// only consumed when there is more than one candidate.
pub fn argmax_with_ties<R: Rng + ?Sized>(v: &Tensor, rel_tol: f64, rng: &mut R) -> Result<(usize, usize)> {
    if v.rank() != 1 {
        return Err(TensorError::NotAVector(v.rank()));
    }
    let data = v.to_vec();
    let max = data.iter().copied().fold(0.0f64, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return Err(TensorError::NoSurvivingState);
    }
    let threshold = (1.0 - rel_tol) * max;
    let ties: Vec<usize> = (0..data.len()).filter(|&i| data[i] >= threshold).collect();
    let pick = if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.gen_range(0..ties.len())]
    };
    Ok((pick, ties.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_times_vector() {
        let id = Tensor::dense(&["i", "j"], &[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let v = Tensor::vector("j", vec![3.0, 4.0]);
        let r = contract(&id, &v, &IndexPairing::new(&[("j", "j")])).unwrap();
        assert_eq!(r.labels(), ["i"]);
        assert_eq!(r.to_vec(), vec![3.0, 4.0]);
    }

    #[test]
    fn matrix_product_matches_triple_loop() {
        let a: Vec<f64> = (0..6).map(|x| x as f64 + 1.0).collect();
        let b: Vec<f64> = (0..6).map(|x| (x as f64) * 0.5 - 1.0).collect();
        let ta = Tensor::dense(&["r", "k"], &[2, 3], a.clone()).unwrap();
        let tb = Tensor::dense(&["k", "c"], &[3, 2], b.clone()).unwrap();
        let r = contract(&ta, &tb, &IndexPairing::new(&[("k", "k")])).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += a[i * 3 + k] * b[k * 2 + j];
                }
                assert_eq!(r.get(&[i, j]).unwrap(), s);
            }
        }
    }

    #[test]
    fn trace_row_sums() {
        let m = Tensor::dense(&["a", "b"], &[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.trace_index("b").unwrap().to_vec(), vec![3.0, 7.0]);
        let s = m.to_sparse().trace_index("b").unwrap();
        assert_eq!(s.to_vec(), vec![3.0, 7.0]);
    }

    #[test]
    fn trace_dim_one() {
        let t = Tensor::dense(&["a", "u", "b"], &[2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = t.trace_index("u").unwrap();
        assert_eq!(r.labels(), ["a", "b"]);
        assert_eq!(r.to_vec(), t.to_vec());
    }

    #[test]
    fn trace_equals_contract_with_ones() {
        let data: Vec<f64> = (0..24).map(|x| (x as f64).sin()).collect();
        let t = Tensor::dense(&["a", "b", "c"], &[2, 3, 4], data).unwrap();
        let via_trace = t.trace_index("b").unwrap();
        let via_ones = contract(&t, &Tensor::ones("b", 3), &IndexPairing::new(&[("b", "b")])).unwrap();
        assert_eq!(via_trace, via_ones);
    }

    #[test]
    fn argmax_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = Tensor::vector("x", vec![0.1, 0.9, 0.3]);
        assert_eq!(argmax_with_ties(&v, 1e-12, &mut rng).unwrap(), (1, 1));
        let v = Tensor::vector("x", vec![0.5, 0.5]);
        let (i, n) = argmax_with_ties(&v, 1e-12, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(n, 2);
        let (j, _) = argmax_with_ties(&v, 1e-12, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(i, j);
        let v = Tensor::vector("x", vec![0.0; 3]);
        assert_eq!(argmax_with_ties(&v, 1e-12, &mut rng), Err(TensorError::NoSurvivingState));
    }

    #[test]
    fn slice_dense_and_sparse_agree() {
        let data: Vec<f64> = (0..12).map(|x| x as f64).collect();
        let t = Tensor::dense(&["a", "b", "c"], &[2, 3, 2], data).unwrap();
        let s = t.slice("b", 2).unwrap();
        assert_eq!(s.labels(), ["a", "c"]);
        assert_eq!(s.to_vec(), vec![4.0, 5.0, 10.0, 11.0]);
        assert_eq!(t.to_sparse().slice("b", 2).unwrap().to_vec(), s.to_vec());
    }

    #[test]
    fn sparse_rejects_duplicates_and_range() {
        assert!(Tensor::sparse(&["a"], &[2], vec![(vec![0], 1.0), (vec![0], 2.0)]).is_err());
        assert!(Tensor::sparse(&["a"], &[2], vec![(vec![2], 1.0)]).is_err());
        assert!(Tensor::dense(&["a", "a"], &[1, 1], vec![1.0]).is_err());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = Tensor::ones("x", 2);
        let b = Tensor::ones("x", 3);
        assert!(matches!(
            contract(&a, &b, &IndexPairing::new(&[("x", "x")])),
            Err(TensorError::DimMismatch { .. })
        ));
    }

    #[test]
    fn permute_roundtrip() {
        let data: Vec<f64> = (0..24).map(|x| x as f64).collect();
        let t = Tensor::dense(&["a", "b", "c"], &[2, 3, 4], data).unwrap();
        let p = t.permute(&["c", "a", "b"]).unwrap();
        assert_eq!(p.get(&[3, 1, 2]).unwrap(), t.get(&[1, 2, 3]).unwrap());
        assert_eq!(p.permute(&["a", "b", "c"]).unwrap(), t);
        let sp = t.to_sparse().permute(&["c", "a", "b"]).unwrap();
        assert_eq!(sp.to_vec(), p.to_vec());
    }

    #[test]
    fn split_label_reshapes() {
        let t = Tensor::vector("e", (0..6).map(|x| x as f64).collect());
        let s = t.split_label("e", &[("n", 2), ("q", 3)]).unwrap();
        assert_eq!(s.get(&[1, 2]).unwrap(), 5.0);
    }
}
