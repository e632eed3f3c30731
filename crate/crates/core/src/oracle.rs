//! Oracle access to a permutation: concrete, superposition database, twirled.
//!
//! A joint state is a sequence of equally sized blocks, one per database
//! basis state `|π>` in mixed-radix order. Each block is the state of the
//! front registers `A ⊗ Z ⊗ X ⊗ Y` (work, optional auxiliary, input, output),
//! `A` least significant. Concrete runs carry a single block.
//!
//! Points of `[N]` are stored as labels `0..N`; the XOR oracle combines
//! labels bitwise, so `N` must be a power of two.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{BasisPermutation, ClassicalQuantumEnsemble, RegisterLayout, StateVector, C64};
use crate::perm::{factorial, Direction, Factorization, Permutation, ENUMERATION_LIMIT};

/// Upper limit on the number of amplitudes in a joint state.
pub const AMPLITUDE_LIMIT: usize = 1 << 28;

const MAX_POINTS: usize = 16;

/// Image and preimage tables for every permutation of `n` points.
#[derive(Clone, Debug)]
pub struct Database {
    n: usize,
    size: usize,
    images: Vec<u8>,
    preimages: Vec<u8>,
    factorials: Vec<usize>,
}

impl Database {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > ENUMERATION_LIMIT {
            return Err(Error::SizeLimit {
                what: "database points",
                requested: n,
                limit: ENUMERATION_LIMIT,
            });
        }
        let size = factorial(n);
        let mut images = vec![0u8; size * n];
        let mut preimages = vec![0u8; size * n];
        images
            .par_chunks_mut(n)
            .zip(preimages.par_chunks_mut(n))
            .enumerate()
            .for_each(|(i, (img, pre))| {
                let p = Factorization::from_index(n, i).compose();
                for x in 0..n {
                    img[x] = p.apply(x) as u8;
                    pre[p.apply(x)] = x as u8;
                }
            });
        Ok(Self {
            n,
            size,
            images,
            preimages,
            factorials: (0..=n).map(factorial).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `n!`, the dimension of the database.
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn image(&self, idx: usize, x: usize) -> usize {
        self.images[idx * self.n + x] as usize
    }

    #[inline]
    pub fn preimage(&self, idx: usize, y: usize) -> usize {
        self.preimages[idx * self.n + y] as usize
    }

    #[inline]
    pub fn lookup(&self, idx: usize, x: usize, direction: Direction) -> usize {
        match direction {
            Direction::Forward => self.image(idx, x),
            Direction::Inverse => self.preimage(idx, x),
        }
    }

    pub fn permutation(&self, idx: usize) -> Permutation {
        let images = self.images[idx * self.n..(idx + 1) * self.n]
            .iter()
            .map(|&v| v as usize)
            .collect();
        Permutation::from_images(images).expect("table rows are permutations")
    }

    /// Factor target `t_k` of permutation `idx`.
    #[inline]
    pub fn digit(&self, idx: usize, k: usize) -> usize {
        (idx / self.factorials[k]) % (k + 1)
    }

    /// Index step between consecutive values of `t_k`.
    #[inline]
    pub fn stride(&self, k: usize) -> usize {
        self.factorials[k]
    }

    pub fn index_of(&self, p: &Permutation) -> usize {
        p.index()
    }

    /// Map `i -> index(left ∘ π_i ∘ right)`.
    pub fn sandwich_map(&self, left: &Permutation, right: &Permutation) -> Vec<usize> {
        let n = self.n;
        (0..self.size)
            .into_par_iter()
            .map(|i| {
                let mut buf = [0usize; MAX_POINTS];
                for (x, slot) in buf.iter_mut().enumerate().take(n) {
                    *slot = left.apply(self.image(i, right.apply(x)));
                }
                index_of_buffer(&mut buf[..n])
            })
            .collect()
    }

    /// Map realising `|π> -> |τ π σ^{-1}>`.
    pub fn twirl_map(&self, sigma: &Permutation, tau: &Permutation) -> Vec<usize> {
        self.sandwich_map(tau, &sigma.inverse())
    }

    /// Database registers `D1..Dn`; `D1` is one-dimensional.
    pub fn registers(&self) -> Vec<(String, usize)> {
        (1..=self.n).map(|k| (format!("D{k}"), k)).collect()
    }
}

/// Mixed-radix index of the permutation in `images`; clobbers the buffer.
pub(crate) fn index_of_buffer(p: &mut [usize]) -> usize {
    let n = p.len();
    let mut inv = [0usize; MAX_POINTS];
    for (x, &y) in p.iter().enumerate() {
        inv[y] = x;
    }
    let mut idx = 0;
    let mut t = [0usize; MAX_POINTS];
    for k in (0..n).rev() {
        let tk = p[k];
        t[k] = tk;
        let j = inv[k];
        p[j] = tk;
        inv[tk] = j;
        p[k] = k;
        inv[k] = k;
    }
    for k in (1..n).rev() {
        idx = idx * (k + 1) + t[k];
    }
    idx
}

/// Front registers of a joint state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum Reg {
    A,
    Z,
    X,
    Y,
}

impl Reg {
    pub fn name(self) -> &'static str {
        match self {
            Reg::A => "A",
            Reg::Z => "Z",
            Reg::X => "X",
            Reg::Y => "Y",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "A" => Some(Reg::A),
            "Z" => Some(Reg::Z),
            "X" => Some(Reg::X),
            "Y" => Some(Reg::Y),
            _ => None,
        }
    }
}

/// Shape of the front registers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Frame {
    pub work: usize,
    pub aux: bool,
    pub n: usize,
}

impl Frame {
    pub fn new(work: usize, aux: bool, n: usize) -> Self {
        Self { work, aux, n }
    }

    pub fn dim(&self, r: Reg) -> usize {
        match r {
            Reg::A => self.work,
            Reg::Z => {
                if self.aux {
                    self.n
                } else {
                    1
                }
            }
            Reg::X | Reg::Y => self.n,
        }
    }

    pub fn stride(&self, r: Reg) -> usize {
        match r {
            Reg::A => 1,
            Reg::Z => self.work,
            Reg::X => self.work * self.dim(Reg::Z),
            Reg::Y => self.work * self.dim(Reg::Z) * self.n,
        }
    }

    pub fn block(&self) -> usize {
        self.work * self.dim(Reg::Z) * self.n * self.n
    }

    #[inline]
    pub fn digit(&self, i: usize, r: Reg) -> usize {
        (i / self.stride(r)) % self.dim(r)
    }

    pub fn index(&self, a: usize, z: usize, x: usize, y: usize) -> usize {
        a + self.stride(Reg::Z) * z + self.stride(Reg::X) * x + self.stride(Reg::Y) * y
    }

    pub fn registers(&self) -> Vec<(String, usize)> {
        let mut regs = vec![("A".to_string(), self.work)];
        if self.aux {
            regs.push(("Z".into(), self.n));
        }
        regs.push(("X".into(), self.n));
        regs.push(("Y".into(), self.n));
        regs
    }

    pub fn layout(&self) -> RegisterLayout {
        RegisterLayout::new(self.registers())
    }

    /// Offsets of the sub-basis of `targets` and the base indices of the rest.
    pub fn split(&self, targets: &[Reg]) -> (Vec<usize>, Vec<usize>) {
        let all = [Reg::A, Reg::Z, Reg::X, Reg::Y];
        let mut offsets = vec![0usize];
        for &t in targets {
            offsets = (0..self.dim(t))
                .flat_map(|d| offsets.iter().map(move |o| o + d * self.stride(t)))
                .collect();
        }
        let mut bases = vec![0usize];
        for r in all.into_iter().filter(|r| !targets.contains(r)) {
            bases = (0..self.dim(r))
                .flat_map(|d| bases.iter().map(move |b| b + d * self.stride(r)))
                .collect();
        }
        (offsets, bases)
    }
}

/// Front registers tensored with either nothing (concrete) or a database.
#[derive(Clone, Debug)]
pub struct JointState {
    pub frame: Frame,
    pub blocks: usize,
    pub amps: Vec<C64>,
}

impl JointState {
    /// `|0>` on the front registers, no database.
    pub fn concrete(frame: Frame) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); frame.block()];
        amps[0] = C64::new(1.0, 0.0);
        Self { frame, blocks: 1, amps }
    }

    pub fn block_len(&self) -> usize {
        self.frame.block()
    }

    pub fn block(&self, d: usize) -> &[C64] {
        let b = self.block_len();
        &self.amps[d * b..(d + 1) * b]
    }

    pub fn norm_sqr(&self) -> f64 {
        crate::linalg::norm_sqr(&self.amps)
    }

    /// Generic view with named registers `A, [Z,] X, Y, D1..Dn`.
    pub fn to_state_vector(&self, db: Option<&Database>) -> StateVector {
        let mut regs = self.frame.registers();
        if let Some(db) = db {
            regs.extend(db.registers());
        }
        StateVector {
            layout: RegisterLayout::new(regs),
            amps: self.amps.clone(),
        }
    }

    pub fn permute_blocks(&self, map: &[usize]) -> Self {
        let b = self.block_len();
        let mut out = vec![C64::new(0.0, 0.0); self.amps.len()];
        for (i, &j) in map.iter().enumerate() {
            out[j * b..(j + 1) * b].copy_from_slice(&self.amps[i * b..(i + 1) * b]);
        }
        Self {
            frame: self.frame,
            blocks: self.blocks,
            amps: out,
        }
    }
}

pub fn check_power_of_two(n: usize) -> Result<()> {
    if n.is_power_of_two() {
        Ok(())
    } else {
        Err(Error::NotPowerOfTwo(n))
    }
}

/// Tensor the front state with the uniform superposition over permutations.
pub fn spo_init(front: &JointState, db: &Database) -> Result<JointState> {
    if front.blocks != 1 {
        return Err(Error::Precondition("database already attached".into()));
    }
    let total = front.amps.len() * db.size();
    if total > AMPLITUDE_LIMIT {
        return Err(Error::SizeLimit {
            what: "joint state amplitudes",
            requested: total,
            limit: AMPLITUDE_LIMIT,
        });
    }
    let scale = 1.0 / (db.size() as f64).sqrt();
    let block: Vec<C64> = front.amps.iter().map(|a| a * scale).collect();
    let mut amps = Vec::with_capacity(total);
    for _ in 0..db.size() {
        amps.extend_from_slice(&block);
    }
    Ok(JointState {
        frame: front.frame,
        blocks: db.size(),
        amps,
    })
}

/// `dst[.., x, y ^ f[x]] = src[.., x, y]`.
fn xor_block(frame: &Frame, src: &[C64], dst: &mut [C64], f: &[usize]) {
    let xs = frame.stride(Reg::X);
    let ys = frame.stride(Reg::Y);
    for (i, &v) in src.iter().enumerate() {
        let x = (i / xs) % frame.n;
        let y = i / ys;
        let j = i - y * ys + (y ^ f[x]) * ys;
        dst[j] = v;
    }
}

fn query_blocks(state: &mut JointState, table: impl Fn(usize, &mut [usize]) + Sync) {
    let frame = state.frame;
    let b = frame.block();
    state.amps.par_chunks_mut(b).enumerate().for_each(|(d, chunk)| {
        let mut f = vec![0usize; frame.n];
        table(d, &mut f);
        let src = chunk.to_vec();
        xor_block(&frame, &src, chunk, &f);
    });
}

/// `|x, y> -> |x, y ⊕ π(x)>` (or `π^{-1}`) for a fixed permutation.
pub fn concrete_query(state: &mut JointState, perm: &Permutation, direction: Direction) -> Result<()> {
    check_power_of_two(perm.len())?;
    let table: Vec<usize> = match direction {
        Direction::Forward => perm.images().to_vec(),
        Direction::Inverse => perm.inverse().images().to_vec(),
    };
    query_blocks(state, |_, f| f.copy_from_slice(&table));
    Ok(())
}

/// `|x, y, π> -> |x, y ⊕ π(x), π>`, or with `π^{-1}(x)` for the inverse.
pub fn spo_query(state: &mut JointState, db: &Database, direction: Direction) -> Result<()> {
    check_power_of_two(db.n())?;
    query_blocks(state, |d, f| {
        for (x, slot) in f.iter_mut().enumerate() {
            *slot = db.lookup(d, x, direction);
        }
    });
    Ok(())
}

/// Twirled database query: `τ^{-1} π σ` forward, `σ^{-1} π^{-1} τ` inverse.
pub fn tspo_query(
    state: &mut JointState,
    db: &Database,
    sigma: &Permutation,
    tau: &Permutation,
    direction: Direction,
) -> Result<()> {
    check_power_of_two(db.n())?;
    let (sigma_inv, tau_inv) = (sigma.inverse(), tau.inverse());
    query_blocks(state, |d, f| {
        for (x, slot) in f.iter_mut().enumerate() {
            *slot = match direction {
                Direction::Forward => tau_inv.apply(db.image(d, sigma.apply(x))),
                Direction::Inverse => sigma_inv.apply(db.preimage(d, tau.apply(x))),
            };
        }
    });
    Ok(())
}

/// `L^τ R^σ |π> = |τ π σ^{-1}>` on the database.
pub fn twirl(state: &JointState, db: &Database, sigma: &Permutation, tau: &Permutation) -> JointState {
    state.permute_blocks(&db.twirl_map(sigma, tau))
}

/// `L^τ |π> = |τ π>`.
pub fn left_twirl(state: &JointState, db: &Database, tau: &Permutation) -> JointState {
    state.permute_blocks(&db.sandwich_map(tau, &Permutation::identity(db.n())))
}

/// `R^σ |π> = |π σ^{-1}>`.
pub fn right_twirl(state: &JointState, db: &Database, sigma: &Permutation) -> JointState {
    state.permute_blocks(&db.sandwich_map(&Permutation::identity(db.n()), &sigma.inverse()))
}

/// Measure the database; each outcome heralds the residual front state.
pub fn spo_recover(state: &JointState, db: &Database) -> ClassicalQuantumEnsemble<Permutation> {
    let mut e = ClassicalQuantumEnsemble::new();
    for d in 0..db.size() {
        e.insert(db.permutation(d), state.block(d).to_vec());
    }
    e
}

/// Recovery for the twirled oracle reports `τ^{-1} π σ`.
pub fn tspo_recover(
    state: &JointState,
    db: &Database,
    sigma: &Permutation,
    tau: &Permutation,
) -> ClassicalQuantumEnsemble<Permutation> {
    let tau_inv = tau.inverse();
    spo_recover(state, db).map_labels(|p| tau_inv.compose(&p).compose(sigma))
}

/// `U^π |x, y> = |x, y ⊕ π(x)>` on `X ⊗ Y` (X least significant).
pub fn u_oracle(perm: &Permutation) -> Result<BasisPermutation> {
    let n = perm.len();
    check_power_of_two(n)?;
    let map = (0..n * n)
        .map(|i| {
            let (x, y) = (i % n, i / n);
            x + n * (y ^ perm.apply(x))
        })
        .collect();
    Ok(BasisPermutation { map })
}

/// `V^π |x> = |π(x)>`.
pub fn v_oracle(perm: &Permutation) -> BasisPermutation {
    BasisPermutation {
        map: perm.images().to_vec(),
    }
}

/// `V^π` on the X factor of `X ⊗ Y`.
pub fn v_oracle_on_x(perm: &Permutation) -> BasisPermutation {
    let n = perm.len();
    BasisPermutation {
        map: (0..n * n).map(|i| perm.apply(i % n) + n * (i / n)).collect(),
    }
}

/// `|x, y> -> |x, y ⊕ x>`.
pub fn cnot_xy(n: usize) -> Result<BasisPermutation> {
    check_power_of_two(n)?;
    Ok(BasisPermutation {
        map: (0..n * n).map(|i| i % n + n * ((i / n) ^ (i % n))).collect(),
    })
}

/// `|x, y> -> |y, x>`.
pub fn swap_xy(n: usize) -> BasisPermutation {
    BasisPermutation {
        map: (0..n * n).map(|i| i / n + n * (i % n)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::LinearOperator;

    fn p(v: &[usize]) -> Permutation {
        Permutation::from_one_line(v).unwrap()
    }

    fn product(ops: &[&dyn LinearOperator]) -> nalgebra::DMatrix<C64> {
        ops.iter()
            .map(|o| o.to_dense().unwrap())
            .reduce(|acc, m| acc * m)
            .unwrap()
    }

    #[test]
    fn u_oracle_example() {
        let u = u_oracle(&p(&[2, 3, 4, 1])).unwrap();
        // |x=1, y=0> -> |1, 2>
        assert_eq!(u.map[1], 1 + 4 * 2);
    }

    #[test]
    fn database_tables_are_consistent() {
        let db = Database::new(4).unwrap();
        for d in 0..db.size() {
            let perm = db.permutation(d);
            assert_eq!(perm.index(), d);
            for x in 0..4 {
                assert_eq!(db.preimage(d, db.image(d, x)), x);
                assert_eq!(db.digit(d, x), perm.factorize().target(x));
            }
        }
    }

    #[test]
    fn simulation_identities() {
        for perm in crate::perm::permutations(4) {
            let inv = perm.inverse();
            let u = u_oracle(&perm).unwrap().to_dense().unwrap();
            let u_inv = u_oracle(&inv).unwrap().to_dense().unwrap();
            let cnot = cnot_xy(4).unwrap();
            let swap = swap_xy(4);
            let v = v_oracle_on_x(&perm);
            let v_inv = v_oracle_on_x(&inv);
            assert_eq!(product(&[&v_inv, &cnot, &v]), u);
            assert_eq!(product(&[&v, &cnot, &v_inv]), u_inv);
            // On Y = |0> the swap sandwich prepares V^π.
            let lhs = product(&[&u_oracle(&inv).unwrap(), &swap, &u_oracle(&perm).unwrap()]);
            let v_dense = v.to_dense().unwrap();
            let lhs_inv = product(&[&u_oracle(&perm).unwrap(), &swap, &u_oracle(&inv).unwrap()]);
            let v_inv_dense = v_inv.to_dense().unwrap();
            for x in 0..4 {
                assert_eq!(lhs.column(x), v_dense.column(x));
                assert_eq!(lhs_inv.column(x), v_inv_dense.column(x));
            }
        }
    }

    #[test]
    fn twirl_maps_compose() {
        let db = Database::new(4).unwrap();
        let sigma = p(&[2, 1, 4, 3]);
        let tau = p(&[3, 1, 2, 4]);
        let map = db.twirl_map(&sigma, &tau);
        for d in 0..db.size() {
            let expect = tau.compose(&db.permutation(d)).compose(&sigma.inverse());
            assert_eq!(db.permutation(map[d]), expect);
        }
    }

    #[test]
    fn spo_rejects_odd_domain() {
        let db = Database::new(3).unwrap();
        let front = JointState::concrete(Frame::new(1, false, 3));
        let mut s = spo_init(&front, &db).unwrap();
        assert!(matches!(spo_query(&mut s, &db, Direction::Forward), Err(Error::NotPowerOfTwo(3))));
    }
}
