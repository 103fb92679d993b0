//! Linear algebra over GF(2): echelon forms with combination tracking, null spaces
//! and affine systems.

use crate::bits::BitVec;

/// Row-echelon form of a list of rows that remembers which input rows were combined.
#[derive(Debug, Clone)]
pub struct Echelon {
    /// Nonzero reduced rows. Row `k` is zero at the pivots of rows `0..k`.
    pub rows: Vec<BitVec>,
    pub pivots: Vec<usize>,
    /// `combos[k]` selects the input rows whose XOR equals `rows[k]`.
    pub combos: Vec<BitVec>,
    /// Independent combinations of input rows that XOR to zero.
    pub kernel: Vec<BitVec>,
}

impl Echelon {
    pub fn new(input: &[BitVec]) -> Self {
        let m = input.len();
        let mut out = Echelon {
            rows: Vec::new(),
            pivots: Vec::new(),
            combos: Vec::new(),
            kernel: Vec::new(),
        };
        for (i, row) in input.iter().enumerate() {
            let mut r = row.clone();
            let mut c = BitVec::zeros(m);
            c.set(i, true);
            out.reduce(&mut r, &mut c);
            match r.first_one() {
                None => out.kernel.push(c),
                Some(p) => {
                    out.rows.push(r);
                    out.pivots.push(p);
                    out.combos.push(c);
                }
            }
        }
        out
    }

    fn reduce(&self, r: &mut BitVec, c: &mut BitVec) {
        for ((row, &p), combo) in self.rows.iter().zip(&self.pivots).zip(&self.combos) {
            if r.get(p) {
                r.xor_assign(row);
                c.xor_assign(combo);
            }
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Input-row combination that XORs to `target`, if `target` is in the row span.
    pub fn express(&self, target: &BitVec, n_inputs: usize) -> Option<BitVec> {
        let mut r = target.clone();
        let mut c = BitVec::zeros(n_inputs);
        self.reduce(&mut r, &mut c);
        r.is_zero().then_some(c)
    }
}

pub fn rank(rows: &[BitVec]) -> usize {
    Echelon::new(rows).rank()
}

/// Basis of `{c : M c = 0}` where `M` has the given rows and `ncols` columns.
pub fn right_kernel(rows: &[BitVec], ncols: usize) -> Vec<BitVec> {
    let mut cols = vec![BitVec::zeros(rows.len()); ncols];
    for (i, row) in rows.iter().enumerate() {
        for j in row.iter_ones() {
            cols[j].set(i, true);
        }
    }
    Echelon::new(&cols).kernel
}

/// A system of parity equations `mask · b = rhs` over `nvars` unknowns.
#[derive(Debug, Clone)]
pub struct AffineSystem {
    nvars: usize,
    rows: Vec<(BitVec, bool)>,
}

impl AffineSystem {
    pub fn new(nvars: usize) -> Self {
        AffineSystem {
            nvars,
            rows: Vec::new(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn push(&mut self, mask: BitVec, rhs: bool) {
        debug_assert_eq!(mask.len(), self.nvars);
        self.rows.push((mask, rhs));
    }

    pub fn extend(&mut self, other: &AffineSystem) {
        debug_assert_eq!(self.nvars, other.nvars);
        self.rows.extend(other.rows.iter().cloned());
    }

    pub fn rows(&self) -> &[(BitVec, bool)] {
        &self.rows
    }

    pub fn is_satisfied_by(&self, b: &BitVec) -> bool {
        self.rows.iter().all(|(m, r)| m.dot(b) == *r)
    }

    /// Reduced row-echelon form, or `None` when the system is inconsistent.
    pub fn reduce(&self) -> Option<ReducedSystem> {
        let mut rows: Vec<(BitVec, bool)> = Vec::new();
        let mut pivots: Vec<usize> = Vec::new();
        for (mask, rhs) in &self.rows {
            let mut m = mask.clone();
            let mut r = *rhs;
            for ((row, rr), &p) in rows.iter().zip(&pivots) {
                if m.get(p) {
                    m.xor_assign(row);
                    r ^= *rr;
                }
            }
            match m.first_one() {
                None if r => return None,
                None => {}
                Some(p) => {
                    for (row, rr) in rows.iter_mut() {
                        if row.get(p) {
                            row.xor_assign(&m);
                            *rr ^= r;
                        }
                    }
                    rows.push((m, r));
                    pivots.push(p);
                }
            }
        }
        Some(ReducedSystem {
            nvars: self.nvars,
            rows,
            pivots,
        })
    }

    /// log2 of the number of solutions, `None` if there are none.
    pub fn log2_solutions(&self) -> Option<usize> {
        self.reduce().map(|r| r.log2_solutions())
    }
}

#[derive(Debug, Clone)]
pub struct ReducedSystem {
    nvars: usize,
    rows: Vec<(BitVec, bool)>,
    pivots: Vec<usize>,
}

impl ReducedSystem {
    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn log2_solutions(&self) -> usize {
        self.nvars - self.rows.len()
    }

    /// The solution with every free variable set to zero.
    pub fn particular(&self) -> BitVec {
        let mut x = BitVec::zeros(self.nvars);
        for ((_, r), &p) in self.rows.iter().zip(&self.pivots) {
            if *r {
                x.set(p, true);
            }
        }
        x
    }

    /// Basis of the homogeneous solution space.
    pub fn null_basis(&self) -> Vec<BitVec> {
        let mut is_pivot = vec![false; self.nvars];
        for &p in &self.pivots {
            is_pivot[p] = true;
        }
        (0..self.nvars)
            .filter(|&f| !is_pivot[f])
            .map(|f| {
                let mut v = BitVec::zeros(self.nvars);
                v.set(f, true);
                for ((row, _), &p) in self.rows.iter().zip(&self.pivots) {
                    if row.get(f) {
                        v.set(p, true);
                    }
                }
                v
            })
            .collect()
    }

    /// Every solution, in a fixed order. Caller bounds the count.
    pub fn solutions(&self) -> Vec<BitVec> {
        let base = self.particular();
        let null = self.null_basis();
        let count = 1usize << null.len();
        (0..count)
            .map(|k| {
                let mut v = base.clone();
                for (j, n) in null.iter().enumerate() {
                    if (k >> j) & 1 == 1 {
                        v.xor_assign(n);
                    }
                }
                v
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(bits: &str) -> BitVec {
        BitVec::from_bools(&bits.chars().map(|c| c == '1').collect::<Vec<_>>())
    }

    #[test]
    fn rank_and_kernel() {
        let rows = vec![bv("110"), bv("011"), bv("101")];
        let e = Echelon::new(&rows);
        assert_eq!(e.rank(), 2);
        assert_eq!(e.kernel.len(), 1);
        assert_eq!(e.kernel[0], bv("111"));
        let k = right_kernel(&rows, 3);
        assert_eq!(k.len(), 1);
        assert_eq!(k[0], bv("111"));
    }

    #[test]
    fn express_finds_combination() {
        let rows = vec![bv("1100"), bv("0110"), bv("0001")];
        let e = Echelon::new(&rows);
        let c = e.express(&bv("1011"), 3).unwrap();
        assert_eq!(c, bv("111"));
        assert!(e.express(&bv("1000"), 3).is_none());
    }

    #[test]
    fn affine_counts_and_enumerates() {
        let mut sys = AffineSystem::new(4);
        sys.push(bv("1100"), true);
        sys.push(bv("0011"), false);
        let red = sys.reduce().unwrap();
        assert_eq!(red.log2_solutions(), 2);
        let sols = red.solutions();
        assert_eq!(sols.len(), 4);
        for s in &sols {
            assert!(sys.is_satisfied_by(s));
        }
        // Brute force over all 16 assignments.
        let brute = (0..16u32)
            .filter(|k| {
                let b = BitVec::from_bools(&(0..4).map(|i| (k >> i) & 1 == 1).collect::<Vec<_>>());
                sys.is_satisfied_by(&b)
            })
            .count();
        assert_eq!(brute, 4);
        sys.push(bv("1111"), false);
        assert!(sys.reduce().is_none());
    }
}
