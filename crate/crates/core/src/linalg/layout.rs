use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::operator::LinearOperator;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub dim: usize,
}

/// Ordered tensor factors; the first register is least significant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterLayout {
    registers: Vec<Register>,
    strides: Vec<usize>,
    total: usize,
}

impl RegisterLayout {
    pub fn new<S: Into<String>>(registers: impl IntoIterator<Item = (S, usize)>) -> Self {
        let registers: Vec<Register> = registers
            .into_iter()
            .map(|(name, dim)| Register {
                name: name.into(),
                dim,
            })
            .collect();
        let mut strides = Vec::with_capacity(registers.len());
        let mut total = 1;
        for r in &registers {
            strides.push(total);
            total *= r.dim;
        }
        Self {
            registers,
            strides,
            total,
        }
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.registers
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| Error::Dimension(format!("no register named {name}")))
    }

    pub fn dim(&self, reg: usize) -> usize {
        self.registers[reg].dim
    }

    pub fn stride(&self, reg: usize) -> usize {
        self.strides[reg]
    }

    #[inline]
    pub fn digit(&self, index: usize, reg: usize) -> usize {
        (index / self.strides[reg]) % self.registers[reg].dim
    }

    /// Offsets of the sub-basis spanned by `targets` (first target least significant)
    /// and the base indices of the complementary registers.
    fn split(&self, targets: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let mut offsets = vec![0usize];
        for &t in targets {
            let mut next = Vec::with_capacity(offsets.len() * self.dim(t));
            for d in 0..self.dim(t) {
                next.extend(offsets.iter().map(|o| o + d * self.stride(t)));
            }
            offsets = next;
        }
        let mut bases = vec![0usize];
        for r in 0..self.registers.len() {
            if targets.contains(&r) {
                continue;
            }
            let mut next = Vec::with_capacity(bases.len() * self.dim(r));
            for d in 0..self.dim(r) {
                next.extend(bases.iter().map(|b| b + d * self.stride(r)));
            }
            bases = next;
        }
        (offsets, bases)
    }
}

#[derive(Clone, Debug)]
pub struct StateVector {
    pub layout: RegisterLayout,
    pub amps: Vec<C64>,
}

impl StateVector {
    pub fn zeros(layout: RegisterLayout) -> Self {
        let amps = vec![C64::new(0.0, 0.0); layout.total_dim()];
        Self { layout, amps }
    }

    pub fn basis(layout: RegisterLayout, index: usize) -> Self {
        let mut s = Self::zeros(layout);
        s.amps[index] = C64::new(1.0, 0.0);
        s
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn inner(&self, other: &Self) -> C64 {
        inner(&self.amps, &other.amps)
    }
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Equal superposition over a register of dimension `dim`.
pub fn uniform_state(dim: usize) -> Result<Vec<C64>> {
    if dim == 0 {
        return Err(Error::Dimension("uniform state of a zero-dimensional register".into()));
    }
    let a = 1.0 / (dim as f64).sqrt();
    Ok(vec![C64::new(a, 0.0); dim])
}

/// Applies `op` to the tensor factors named in `targets`, identity elsewhere.
pub fn apply(op: &dyn LinearOperator, state: &StateVector, targets: &[&str]) -> Result<StateVector> {
    let regs = targets
        .iter()
        .map(|t| state.layout.position(t))
        .collect::<Result<Vec<_>>>()?;
    let sub: usize = regs.iter().map(|&r| state.layout.dim(r)).product();
    if sub != op.dim() {
        return Err(Error::Dimension(format!(
            "operator acts on dimension {}, targets span {sub}",
            op.dim()
        )));
    }
    let (offsets, bases) = state.layout.split(&regs);
    let pieces: Vec<Vec<C64>> = bases
        .par_iter()
        .map(|&b| {
            let local: Vec<C64> = offsets.iter().map(|o| state.amps[b + o]).collect();
            op.apply(&local)
        })
        .collect();
    let mut out = StateVector::zeros(state.layout.clone());
    for (b, piece) in bases.iter().zip(pieces) {
        for (o, v) in offsets.iter().zip(piece) {
            out.amps[b + o] = v;
        }
    }
    Ok(out)
}

/// Keeps only basis states whose `register` digit passes `keep`.
pub fn project_basis(state: &StateVector, register: &str, keep: impl Fn(usize) -> bool) -> Result<StateVector> {
    let r = state.layout.position(register)?;
    let mut out = state.clone();
    for (i, a) in out.amps.iter_mut().enumerate() {
        if !keep(state.layout.digit(i, r)) {
            *a = C64::new(0.0, 0.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::operator::DenseOperator;
    use nalgebra::DMatrix;

    #[test]
    fn strides_are_little_endian() {
        let l = RegisterLayout::new([("a", 2), ("b", 3), ("c", 4)]);
        assert_eq!(l.total_dim(), 24);
        assert_eq!(l.stride(2), 6);
        assert_eq!(l.digit(1 + 2 * 2 + 3 * 6, 1), 2);
    }

    #[test]
    fn uniform_state_rejects_empty() {
        assert!(uniform_state(0).is_err());
        let u = uniform_state(3).unwrap();
        assert!((norm_sqr(&u) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn apply_matches_kronecker_product() {
        let l = RegisterLayout::new([("a", 2), ("b", 3)]);
        // Swap |0> and |2> on b.
        let mut m = DMatrix::<C64>::zeros(3, 3);
        m[(2, 0)] = C64::new(1.0, 0.0);
        m[(0, 2)] = C64::new(1.0, 0.0);
        m[(1, 1)] = C64::new(1.0, 0.0);
        let s = StateVector::basis(l.clone(), 1);
        let out = apply(&DenseOperator::new(m), &s, &["b"]).unwrap();
        assert_eq!(out.amps[1 + 2 * 2], C64::new(1.0, 0.0));
        assert!((out.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn projection_keeps_selected_digits() {
        let l = RegisterLayout::new([("a", 2), ("b", 2)]);
        let mut s = StateVector::zeros(l);
        s.amps.iter_mut().for_each(|a| *a = C64::new(0.5, 0.0));
        let p = project_basis(&s, "b", |d| d == 1).unwrap();
        assert!((p.norm_sqr() - 0.5).abs() < 1e-15);
    }
}
