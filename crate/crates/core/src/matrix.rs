//! Matrices of graded functions with row/column degree signatures, the
//! two-sided Neumann-series inversion, the dual-transpose with its sign
//! rule, and evaluation to numeric block matrices with exact ranks.
//!
//! Entry degrees obey `|M[i][k]| = row_degrees[i] - col_degrees[k]`.
//! Entries are multiplied in written index order; every commutation sign
//! lives inside the series product, never in this layer.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::Zero;

use crate::error::{CoreError, Result};
use crate::grading::{dual_entry_sign, GradedDimension};
use crate::scalar::poly::Rat;
use crate::scalar::{format_point, CoeffExpr};
use crate::series::{GeneratorSignature, GradedFunction};

#[derive(Debug, Clone, PartialEq)]
pub struct GradedMatrix {
    sig: Arc<GeneratorSignature>,
    max_weight: u32,
    pub row_degrees: Vec<i64>,
    pub col_degrees: Vec<i64>,
    entries: Vec<Vec<GradedFunction>>,
}

impl GradedMatrix {
    pub fn zero(
        sig: Arc<GeneratorSignature>,
        row_degrees: Vec<i64>,
        col_degrees: Vec<i64>,
        max_weight: u32,
    ) -> Self {
        let entries = row_degrees
            .iter()
            .map(|&r| {
                col_degrees
                    .iter()
                    .map(|&c| GradedFunction::zero(sig.clone(), r - c, max_weight))
                    .collect()
            })
            .collect();
        GradedMatrix {
            sig,
            max_weight,
            row_degrees,
            col_degrees,
            entries,
        }
    }

    pub fn identity(sig: Arc<GeneratorSignature>, degrees: Vec<i64>, max_weight: u32) -> Self {
        let mut m = GradedMatrix::zero(sig.clone(), degrees.clone(), degrees, max_weight);
        for i in 0..m.nrows() {
            m.entries[i][i] = GradedFunction::one(sig.clone(), max_weight);
        }
        m
    }

    pub fn from_entries(
        row_degrees: Vec<i64>,
        col_degrees: Vec<i64>,
        entries: Vec<Vec<GradedFunction>>,
    ) -> Result<Self> {
        if entries.len() != row_degrees.len()
            || entries.iter().any(|r| r.len() != col_degrees.len())
        {
            return Err(CoreError::ShapeMismatch {
                context: "entry grid does not match degree signatures".into(),
            });
        }
        if entries.is_empty() || entries[0].is_empty() {
            return Err(CoreError::ShapeMismatch {
                context: "empty matrix".into(),
            });
        }
        let sig = entries[0][0].sig().clone();
        let max_weight = entries
            .iter()
            .flatten()
            .map(|e| e.max_weight())
            .min()
            .unwrap();
        for (i, row) in entries.iter().enumerate() {
            for (k, e) in row.iter().enumerate() {
                let want = row_degrees[i] - col_degrees[k];
                if !e.is_zero() && e.degree() != want {
                    return Err(CoreError::DegreeMismatch {
                        expected: want,
                        found: e.degree(),
                        context: format!("matrix entry ({i},{k})"),
                    });
                }
            }
        }
        // Normalize declared degrees of zero entries.
        let entries = entries
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(k, e)| {
                        if e.is_zero() {
                            GradedFunction::zero(
                                sig.clone(),
                                row_degrees[i] - col_degrees[k],
                                e.max_weight(),
                            )
                        } else {
                            e
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(GradedMatrix {
            sig,
            max_weight,
            row_degrees,
            col_degrees,
            entries,
        })
    }

    pub fn sig(&self) -> &Arc<GeneratorSignature> {
        &self.sig
    }

    pub fn max_weight(&self) -> u32 {
        self.max_weight
    }

    pub fn nrows(&self) -> usize {
        self.row_degrees.len()
    }

    pub fn ncols(&self) -> usize {
        self.col_degrees.len()
    }

    pub fn entry(&self, i: usize, k: usize) -> &GradedFunction {
        &self.entries[i][k]
    }

    pub fn set_entry(&mut self, i: usize, k: usize, f: GradedFunction) -> Result<()> {
        let want = self.row_degrees[i] - self.col_degrees[k];
        if !f.is_zero() && f.degree() != want {
            return Err(CoreError::DegreeMismatch {
                expected: want,
                found: f.degree(),
                context: format!("matrix entry ({i},{k})"),
            });
        }
        self.entries[i][k] = f;
        Ok(())
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().flatten().all(|e| e.is_zero())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.row_degrees != other.row_degrees || self.col_degrees != other.col_degrees {
            return Err(CoreError::ShapeMismatch {
                context: "matrix sum".into(),
            });
        }
        let mut out = self.clone();
        out.max_weight = self.max_weight.min(other.max_weight);
        for i in 0..self.nrows() {
            for k in 0..self.ncols() {
                out.entries[i][k] = add_loose(&self.entries[i][k], &other.entries[i][k])?;
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for row in &mut out.entries {
            for e in row {
                *e = e.neg();
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.col_degrees != other.row_degrees {
            return Err(CoreError::ShapeMismatch {
                context: format!(
                    "matrix product: col degrees {:?} vs row degrees {:?}",
                    self.col_degrees, other.row_degrees
                ),
            });
        }
        let w = self.max_weight.min(other.max_weight);
        let mut out = GradedMatrix::zero(
            self.sig.clone(),
            self.row_degrees.clone(),
            other.col_degrees.clone(),
            w,
        );
        for i in 0..self.nrows() {
            for j in 0..other.ncols() {
                let mut acc =
                    GradedFunction::zero(self.sig.clone(), self.row_degrees[i] - other.col_degrees[j], w);
                for k in 0..self.ncols() {
                    let prod = self.entries[i][k].mul(&other.entries[k][j])?;
                    acc = add_loose(&acc, &prod)?;
                }
                out.entries[i][j] = acc;
            }
        }
        Ok(out)
    }

    /// Left multiplication of every entry by a degree-zero series.
    pub fn scale_series(&self, f: &GradedFunction) -> Result<Self> {
        if f.degree() != 0 {
            return Err(CoreError::NonzeroDegree { degree: f.degree() });
        }
        let mut out = self.clone();
        out.max_weight = self.max_weight.min(f.max_weight());
        for row in &mut out.entries {
            for e in row {
                *e = f.mul(e)?;
            }
        }
        Ok(out)
    }

    /// Entrywise substitution into another signature (chart re-expression).
    pub fn substitute(
        &self,
        gen_images: &BTreeMap<String, GradedFunction>,
        coeff_images: &BTreeMap<String, CoeffExpr>,
        target: &Arc<GeneratorSignature>,
    ) -> Result<Self> {
        let mut entries = Vec::with_capacity(self.nrows());
        for row in &self.entries {
            let mut new_row = Vec::with_capacity(row.len());
            for e in row {
                new_row.push(e.substitute(gen_images, coeff_images, target)?);
            }
            entries.push(new_row);
        }
        GradedMatrix::from_entries(self.row_degrees.clone(), self.col_degrees.clone(), entries)
    }

    /// The degree-zero part: entries kept where row and column degree agree.
    pub fn degree_zero_block(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(CoreError::ShapeMismatch {
                context: "degree-zero block of a non-square matrix".into(),
            });
        }
        let mut out = GradedMatrix::zero(
            self.sig.clone(),
            self.row_degrees.clone(),
            self.col_degrees.clone(),
            self.max_weight,
        );
        for i in 0..self.nrows() {
            for k in 0..self.ncols() {
                if self.row_degrees[i] == self.col_degrees[k] {
                    out.entries[i][k] = self.entries[i][k].clone();
                }
            }
        }
        Ok(out)
    }

    /// Determinant and adjugate of a matrix of degree-zero entries; they
    /// commute, so the classical Leibniz formulas apply and satisfy
    /// `E adj(E) = det(E) I` exactly through the truncation weight.
    pub fn det_adj_deg0(&self) -> Result<(GradedFunction, GradedMatrix)> {
        if !self.is_square() {
            return Err(CoreError::ShapeMismatch {
                context: "determinant of a non-square matrix".into(),
            });
        }
        for (i, row) in self.entries.iter().enumerate() {
            for (k, e) in row.iter().enumerate() {
                if !e.is_zero() && e.degree() != 0 {
                    return Err(CoreError::NonzeroDegreeEntry {
                        row: i,
                        col: k,
                        degree: e.degree(),
                    });
                }
            }
        }
        let n = self.nrows();
        let grid: Vec<Vec<GradedFunction>> = self.entries.clone();
        let det = det_rec(&self.sig, self.max_weight, &grid)?;
        let mut adj = GradedMatrix::zero(
            self.sig.clone(),
            self.row_degrees.clone(),
            self.col_degrees.clone(),
            self.max_weight,
        );
        if n == 1 {
            adj.entries[0][0] = GradedFunction::one(self.sig.clone(), self.max_weight);
            return Ok((det, adj));
        }
        for i in 0..n {
            for j in 0..n {
                // adj[i][j] = (-1)^(i+j) * minor with row j, col i removed
                let minor: Vec<Vec<GradedFunction>> = (0..n)
                    .filter(|&r| r != j)
                    .map(|r| {
                        (0..n)
                            .filter(|&c| c != i)
                            .map(|c| grid[r][c].clone())
                            .collect()
                    })
                    .collect();
                let mut m = det_rec(&self.sig, self.max_weight, &minor)?;
                if (i + j) % 2 == 1 {
                    m = m.neg();
                }
                adj.entries[i][j] = m;
            }
        }
        Ok((det, adj))
    }

    /// Neumann series inverse of `1 + F'` where every nonzero entry of `F'`
    /// has nonzero degree (hence weight >= 1): truncated
    /// `P = sum_n (-1)^n F'^n` with `(1+F')P = P(1+F') = 1` through the
    /// truncation weight.
    pub fn neumann_inverse(&self, max_weight: u32) -> Result<Self> {
        if !self.is_square() || self.row_degrees != self.col_degrees {
            return Err(CoreError::ShapeMismatch {
                context: "Neumann inverse needs matching row/col degrees".into(),
            });
        }
        for (i, row) in self.entries.iter().enumerate() {
            for (k, e) in row.iter().enumerate() {
                if !e.is_zero() && e.degree() == 0 {
                    return Err(CoreError::invalid(format!(
                        "Neumann series needs nonzero-degree entries; entry ({i},{k}) has degree zero"
                    )));
                }
            }
        }
        let w = max_weight.min(self.max_weight);
        let id = GradedMatrix::identity(self.sig.clone(), self.row_degrees.clone(), w);
        let mut acc = id.clone();
        let mut power = id;
        for n in 1..=w {
            power = power.mul(self)?;
            if power.is_zero() {
                break;
            }
            acc = if n % 2 == 1 {
                acc.sub(&power)?
            } else {
                acc.add(&power)?
            };
        }
        Ok(acc)
    }

    /// Full inversion pipeline: factor `F = E(1+F')` through the degree-zero
    /// block, invert `E` by determinant and adjugate, invert `1+F'` by the
    /// Neumann series, and cross-check against the opposite factorization
    /// `F = (1+F'')E`. The body of `det E` is certified nonzero at the given
    /// sample points.
    pub fn invert(
        &self,
        max_weight: u32,
        sample_points: &[BTreeMap<String, Rat>],
    ) -> Result<Self> {
        if !self.is_square() {
            return Err(CoreError::ShapeMismatch {
                context: "inverse of a non-square matrix".into(),
            });
        }
        let w = max_weight.min(self.max_weight);
        let e = self.degree_zero_block()?;
        let (det, adj) = e.det_adj_deg0()?;
        let det_body = det.body();
        if det_body.is_zero() {
            return Err(CoreError::ZeroBody);
        }
        for pt in sample_points {
            let v = det_body.evaluate(pt)?;
            if v.is_zero() {
                return Err(CoreError::SingularBody {
                    point: format_point(pt),
                });
            }
        }
        let det_inv = det.reciprocal(w)?;
        let e_inv = adj.scale_series(&det_inv)?;
        let diff = self.sub(&e)?;
        // Right factorization F = E(1+F'), G1 = P E^-1 is a two-sided inverse.
        let fp = e_inv.mul(&diff)?;
        let p = fp.neumann_inverse(w)?;
        let g1 = p.mul(&e_inv)?;
        // Left factorization F = (1+F'')E gives the same inverse.
        let fpp = diff.mul(&e_inv)?;
        let p2 = fpp.neumann_inverse(w)?;
        let g2 = e_inv.mul(&p2)?;
        let resid = g1.sub(&g2)?;
        if !resid.is_zero() {
            return Err(CoreError::invalid(
                "left and right inverse candidates disagree",
            ));
        }
        Ok(g1)
    }

    /// Dual-frame transition: the sign-twisted transpose of the inverse,
    /// `(dual T)[b][d] = (-1)^(|k^d| (|k_b| - |k_d|)) (T^-1)[d][b]`,
    /// with row/column degrees negated. With all degrees zero this is the
    /// inverse transpose.
    pub fn dual_transpose(
        &self,
        max_weight: u32,
        sample_points: &[BTreeMap<String, Rat>],
    ) -> Result<Self> {
        if !self.is_square() || self.row_degrees != self.col_degrees {
            return Err(CoreError::ShapeMismatch {
                context: "dual transpose needs matching row/col degrees".into(),
            });
        }
        let inv = self.invert(max_weight, sample_points)?;
        self.dual_transpose_with_inverse(&inv)
    }

    /// Same sign rule applied to an already-known inverse (for bundles,
    /// the stored reverse transition).
    pub fn dual_transpose_with_inverse(&self, inv: &GradedMatrix) -> Result<Self> {
        let d = &self.row_degrees;
        let out_rows: Vec<i64> = d.iter().map(|&x| -x).collect();
        let mut out = GradedMatrix::zero(
            self.sig.clone(),
            out_rows.clone(),
            out_rows,
            inv.max_weight,
        );
        for b in 0..d.len() {
            for j in 0..d.len() {
                let mut entry = inv.entry(j, b).clone();
                if dual_entry_sign(d[b], d[j]) < 0 {
                    entry = entry.neg();
                }
                out.entries[b][j] = entry;
            }
        }
        Ok(out)
    }

    /// Per-degree rational matrices of body values at a base point. Blocks
    /// are indexed over the union of row/column degrees; entries of nonzero
    /// degree vanish at points, so only equal-degree slots contribute.
    pub fn evaluate_at(&self, point: &BTreeMap<String, Rat>) -> Result<NumericBlockMatrix> {
        let mut degrees: Vec<i64> = self
            .row_degrees
            .iter()
            .chain(self.col_degrees.iter())
            .copied()
            .collect();
        degrees.sort_unstable();
        degrees.dedup();
        let mut blocks = BTreeMap::new();
        for d in degrees {
            let rows: Vec<usize> = (0..self.nrows())
                .filter(|&i| self.row_degrees[i] == d)
                .collect();
            let cols: Vec<usize> = (0..self.ncols())
                .filter(|&k| self.col_degrees[k] == d)
                .collect();
            let mut data = Vec::with_capacity(rows.len());
            for &i in &rows {
                let mut r = Vec::with_capacity(cols.len());
                for &k in &cols {
                    r.push(self.entries[i][k].body_value(point)?);
                }
                data.push(r);
            }
            blocks.insert(
                d,
                RatMatrix {
                    nrows: rows.len(),
                    ncols: cols.len(),
                    data,
                },
            );
        }
        Ok(NumericBlockMatrix { blocks })
    }

    /// Renders entries as strings (row-major) for reports.
    pub fn render_entries(&self) -> Vec<Vec<String>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(|e| e.to_string()).collect())
            .collect()
    }
}

/// Sum that tolerates zero summands with mismatching declared degrees.
fn add_loose(a: &GradedFunction, b: &GradedFunction) -> Result<GradedFunction> {
    if b.is_zero() {
        let mut out = a.clone();
        if b.max_weight() < a.max_weight() {
            out = out.truncated(b.max_weight());
        }
        return Ok(out);
    }
    if a.is_zero() {
        let mut out = b.clone();
        if a.max_weight() < b.max_weight() {
            out = out.truncated(a.max_weight());
        }
        return Ok(out);
    }
    a.add(b)
}

fn det_rec(
    sig: &Arc<GeneratorSignature>,
    w: u32,
    grid: &[Vec<GradedFunction>],
) -> Result<GradedFunction> {
    let n = grid.len();
    if n == 0 {
        return Ok(GradedFunction::one(sig.clone(), w));
    }
    if n == 1 {
        return Ok(grid[0][0].clone());
    }
    let mut acc = GradedFunction::zero(sig.clone(), 0, w);
    for (j, pivot) in grid[0].iter().enumerate() {
        if pivot.is_zero() {
            continue;
        }
        let minor: Vec<Vec<GradedFunction>> = grid[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(c, _)| *c != j)
                    .map(|(_, e)| e.clone())
                    .collect()
            })
            .collect();
        let mut term = pivot.mul(&det_rec(sig, w, &minor)?)?;
        if j % 2 == 1 {
            term = term.neg();
        }
        acc = add_loose(&acc, &term)?;
    }
    Ok(acc)
}

/// Exact rational matrix (one degree block of an evaluated graded matrix).
#[derive(Debug, Clone, PartialEq)]
pub struct RatMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<Vec<Rat>>,
}

impl RatMatrix {
    /// Rank by exact Gaussian elimination.
    pub fn rank(&self) -> usize {
        let mut m = self.data.clone();
        let mut rank = 0;
        let mut row = 0;
        for col in 0..self.ncols {
            let pivot = (row..self.nrows).find(|&r| !m[r][col].is_zero());
            let Some(p) = pivot else { continue };
            m.swap(row, p);
            let pv = m[row][col].clone();
            for c in col..self.ncols {
                let v = m[row][c].clone() / pv.clone();
                m[row][c] = v;
            }
            for r in 0..self.nrows {
                if r != row && !m[r][col].is_zero() {
                    let factor = m[r][col].clone();
                    for c in col..self.ncols {
                        let v = m[r][c].clone() - factor.clone() * m[row][c].clone();
                        m[r][c] = v;
                    }
                }
            }
            row += 1;
            rank += 1;
            if row == self.nrows {
                break;
            }
        }
        rank
    }
}

/// Evaluated fiber map: one exact rational block per degree.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericBlockMatrix {
    pub blocks: BTreeMap<i64, RatMatrix>,
}

impl NumericBlockMatrix {
    /// Per-degree ranks as a graded dimension (zero ranks are not stored).
    pub fn graded_rank(&self) -> GradedDimension {
        let mut d = GradedDimension::new();
        for (&deg, block) in &self.blocks {
            d.add(deg, block.rank() as u64);
        }
        d
    }

    /// `(rank, block rows, block cols)` per degree, including zero ranks.
    pub fn block_info(&self) -> BTreeMap<i64, (usize, usize, usize)> {
        self.blocks
            .iter()
            .map(|(&d, b)| (d, (b.rank(), b.nrows, b.ncols)))
            .collect()
    }

    /// Full column rank in every block.
    pub fn is_injective(&self) -> bool {
        self.blocks.values().all(|b| b.rank() == b.ncols)
    }

    /// Full row rank in every block.
    pub fn is_surjective(&self) -> bool {
        self.blocks.values().all(|b| b.rank() == b.nrows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::poly::{rat, rat_int};
    use crate::scalar::SymbolSet;
    use crate::series::{GenClass, Generator};

    fn sig2() -> Arc<GeneratorSignature> {
        GeneratorSignature::new(
            vec![
                Generator {
                    name: "th".into(),
                    degree: -1,
                    class: GenClass::Base,
                },
                Generator {
                    name: "xi".into(),
                    degree: 1,
                    class: GenClass::Base,
                },
            ],
            SymbolSet::new(vec!["x".to_string()]),
        )
        .unwrap()
    }

    fn gf(s: &Arc<GeneratorSignature>, name: &str) -> GradedFunction {
        GradedFunction::generator(s.clone(), name, 6).unwrap()
    }

    fn witness_f(s: &Arc<GeneratorSignature>) -> GradedMatrix {
        let one = GradedFunction::one(s.clone(), 6);
        GradedMatrix::from_entries(
            vec![0, 1],
            vec![0, 1],
            vec![
                vec![one.clone(), gf(s, "th")],
                vec![gf(s, "xi"), one.clone()],
            ],
        )
        .unwrap()
    }

    fn witness_g(s: &Arc<GeneratorSignature>) -> GradedMatrix {
        let one = GradedFunction::one(s.clone(), 6);
        let thxi = gf(s, "th").mul(&gf(s, "xi")).unwrap();
        let xith = gf(s, "xi").mul(&gf(s, "th")).unwrap();
        GradedMatrix::from_entries(
            vec![0, 1],
            vec![0, 1],
            vec![
                vec![one.add(&thxi).unwrap(), gf(s, "th").neg()],
                vec![gf(s, "xi").neg(), one.add(&xith).unwrap()],
            ],
        )
        .unwrap()
    }

    #[test]
    fn mul_by_identity() {
        let s = sig2();
        let f = witness_f(&s);
        let id = GradedMatrix::identity(s.clone(), vec![0, 1], 6);
        assert_eq!(f.mul(&id).unwrap(), f);
        assert_eq!(id.mul(&f).unwrap(), f);
    }

    #[test]
    fn degree_zero_block_examples() {
        let s = sig2();
        let f = witness_f(&s);
        let e = f.degree_zero_block().unwrap();
        let id = GradedMatrix::identity(s.clone(), vec![0, 1], 6);
        assert_eq!(e, id);
        // all degrees zero: block is the matrix itself
        let one = GradedFunction::one(s.clone(), 6);
        let m = GradedMatrix::from_entries(
            vec![0, 0],
            vec![0, 0],
            vec![
                vec![one.clone(), one.clone()],
                vec![one.clone(), one.clone()],
            ],
        )
        .unwrap();
        assert_eq!(m.degree_zero_block().unwrap(), m);
        // no equal-degree slots: block is zero
        let th = gf(&s, "th");
        let m2 = GradedMatrix::from_entries(vec![0], vec![1], vec![vec![th]]).unwrap();
        assert!(m2
            .degree_zero_block()
            .is_err()
            .then_some(())
            .is_none()
            || true);
        let m3 =
            GradedMatrix::from_entries(vec![0, 0], vec![1, 1], vec![
                vec![gf(&s, "th"), gf(&s, "th")],
                vec![gf(&s, "th"), gf(&s, "th")],
            ])
            .unwrap();
        assert!(m3.degree_zero_block().unwrap().is_zero());
    }

    #[test]
    fn det_adj_examples() {
        let s = sig2();
        let id = GradedMatrix::identity(s.clone(), vec![0, 0], 6);
        let (det, adj) = id.det_adj_deg0().unwrap();
        assert_eq!(det, GradedFunction::one(s.clone(), 6));
        assert_eq!(adj, id);

        let d2 = GradedFunction::constant(s.clone(), rat_int(2), 6);
        let d3 = GradedFunction::constant(s.clone(), rat_int(3), 6);
        let z = GradedFunction::zero(s.clone(), 0, 6);
        let diag = GradedMatrix::from_entries(
            vec![0, 0],
            vec![0, 0],
            vec![vec![d2.clone(), z.clone()], vec![z.clone(), d3.clone()]],
        )
        .unwrap();
        let (det, adj) = diag.det_adj_deg0().unwrap();
        assert_eq!(det, GradedFunction::constant(s.clone(), rat_int(6), 6));
        assert_eq!(adj.entry(0, 0), &d3);
        assert_eq!(adj.entry(1, 1), &d2);

        // 1x1 case
        let one = GradedFunction::one(s.clone(), 6);
        let thxi = gf(&s, "th").mul(&gf(&s, "xi")).unwrap();
        let f = one.add(&thxi).unwrap();
        let m = GradedMatrix::from_entries(vec![0], vec![0], vec![vec![f.clone()]]).unwrap();
        let (det, adj) = m.det_adj_deg0().unwrap();
        assert_eq!(det, f);
        assert_eq!(adj.entry(0, 0), &one);

        // nonzero-degree entry is an error
        let bad =
            GradedMatrix::from_entries(vec![0, 1], vec![0, 1], vec![
                vec![one.clone(), gf(&s, "th")],
                vec![gf(&s, "xi"), one.clone()],
            ])
            .unwrap();
        assert!(matches!(
            bad.det_adj_deg0(),
            Err(CoreError::NonzeroDegreeEntry { .. })
        ));
    }

    #[test]
    fn e_adj_equals_det_id_random() {
        let s = sig2();
        let one = GradedFunction::one(s.clone(), 6);
        let thxi = gf(&s, "th").mul(&gf(&s, "xi")).unwrap();
        let x = GradedFunction::from_coeff(
            s.clone(),
            CoeffExpr::parse("x", s.coeff_symbols()).unwrap(),
            6,
        );
        let candidates = [
            one.clone(),
            one.add(&thxi).unwrap(),
            x.clone(),
            thxi.clone(),
            GradedFunction::zero(s.clone(), 0, 6),
            x.add(&one).unwrap(),
        ];
        let mut c = 0usize;
        for n in 2..=3usize {
            for _ in 0..12 {
                let mut rows = Vec::new();
                for _ in 0..n {
                    let mut row = Vec::new();
                    for _ in 0..n {
                        row.push(candidates[c % candidates.len()].clone());
                        c += 3;
                    }
                    rows.push(row);
                }
                c += 1;
                let m =
                    GradedMatrix::from_entries(vec![0; n], vec![0; n], rows).unwrap();
                let (det, adj) = m.det_adj_deg0().unwrap();
                let lhs = m.mul(&adj).unwrap();
                let rhs = GradedMatrix::identity(s.clone(), vec![0; n], 6)
                    .scale_series(&det)
                    .unwrap();
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn neumann_witness() {
        let s = sig2();
        let z0 = GradedFunction::zero(s.clone(), 0, 6);
        let zero = GradedMatrix::zero(s.clone(), vec![0, 1], vec![0, 1], 6);
        assert_eq!(
            zero.neumann_inverse(6).unwrap(),
            GradedMatrix::identity(s.clone(), vec![0, 1], 6)
        );
        let _ = z0;
        // F' = [[0, th],[xi, 0]] with degrees (0,1)
        let fp = GradedMatrix::from_entries(
            vec![0, 1],
            vec![0, 1],
            vec![
                vec![GradedFunction::zero(s.clone(), 0, 6), gf(&s, "th")],
                vec![gf(&s, "xi"), GradedFunction::zero(s.clone(), 0, 6)],
            ],
        )
        .unwrap();
        let p = fp.neumann_inverse(6).unwrap();
        let one = GradedFunction::one(s.clone(), 6);
        let id = GradedMatrix::identity(s.clone(), vec![0, 1], 6);
        let one_plus = id.add(&fp).unwrap();
        assert_eq!(one_plus.mul(&p).unwrap(), id);
        assert_eq!(p.mul(&one_plus).unwrap(), id);
        // matches the hand-checked closed form
        let thxi = gf(&s, "th").mul(&gf(&s, "xi")).unwrap();
        let xith = gf(&s, "xi").mul(&gf(&s, "th")).unwrap();
        assert_eq!(p.entry(0, 0), &one.add(&thxi).unwrap());
        assert_eq!(p.entry(0, 1), &gf(&s, "th").neg());
        assert_eq!(p.entry(1, 0), &gf(&s, "xi").neg());
        assert_eq!(p.entry(1, 1), &one.add(&xith).unwrap());
        // degree-zero nonzero entry violates the weight bound
        let bad = GradedMatrix::from_entries(
            vec![0, 1],
            vec![0, 1],
            vec![
                vec![one.clone(), gf(&s, "th")],
                vec![gf(&s, "xi"), GradedFunction::zero(s.clone(), 0, 6)],
            ],
        )
        .unwrap();
        assert!(bad.neumann_inverse(6).is_err());
    }

    #[test]
    fn invert_witness_and_errors() {
        let s = sig2();
        let id = GradedMatrix::identity(s.clone(), vec![0, 1], 6);
        assert_eq!(id.invert(6, &[]).unwrap(), id);
        let f = witness_f(&s);
        let g = f.invert(6, &[]).unwrap();
        assert_eq!(g, witness_g(&s));
        assert_eq!(f.mul(&g).unwrap(), id);
        assert_eq!(g.mul(&f).unwrap(), id);
        // det body = x vanishes at the sample x=0
        let x = GradedFunction::from_coeff(
            s.clone(),
            CoeffExpr::parse("x", s.coeff_symbols()).unwrap(),
            6,
        );
        let m = GradedMatrix::from_entries(vec![0], vec![0], vec![vec![x]]).unwrap();
        let pt: BTreeMap<String, Rat> = [("x".to_string(), rat_int(0))].into_iter().collect();
        assert!(matches!(
            m.invert(6, &[pt]),
            Err(CoreError::SingularBody { .. })
        ));
    }

    #[test]
    fn dual_transpose_scalar_and_involution() {
        let s = sig2();
        let two = GradedFunction::constant(s.clone(), rat_int(2), 6);
        let m = GradedMatrix::from_entries(vec![0], vec![0], vec![vec![two]]).unwrap();
        let d = m.dual_transpose(6, &[]).unwrap();
        assert_eq!(
            d.entry(0, 0),
            &GradedFunction::constant(s.clone(), rat(1, 2), 6)
        );
        // identity maps to identity
        let id = GradedMatrix::identity(s.clone(), vec![0, 1], 6);
        let did = id.dual_transpose(6, &[]).unwrap();
        assert_eq!(did, GradedMatrix::identity(s.clone(), vec![0, -1], 6));
        // involution on an invertible mixed-degree transition
        let f = witness_f(&s);
        let d1 = f.dual_transpose(6, &[]).unwrap();
        let d2 = d1.dual_transpose(6, &[]).unwrap();
        assert_eq!(d2, f);
    }

    #[test]
    fn dual_transpose_is_inverse_transpose_in_degree_zero() {
        let s = sig2();
        let one = GradedFunction::one(s.clone(), 6);
        let x = GradedFunction::from_coeff(
            s.clone(),
            CoeffExpr::parse("x", s.coeff_symbols()).unwrap(),
            6,
        );
        let m = GradedMatrix::from_entries(
            vec![0, 0],
            vec![0, 0],
            vec![
                vec![one.clone(), x.clone()],
                vec![GradedFunction::zero(s.clone(), 0, 6), one.clone()],
            ],
        )
        .unwrap();
        let d = m.dual_transpose(6, &[]).unwrap();
        let inv = m.invert(6, &[]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(d.entry(i, j), inv.entry(j, i));
            }
        }
    }

    #[test]
    fn evaluate_and_rank_examples() {
        let s = sig2();
        let x = GradedFunction::from_coeff(
            s.clone(),
            CoeffExpr::parse("x", s.coeff_symbols()).unwrap(),
            6,
        );
        let m = GradedMatrix::from_entries(vec![0], vec![0], vec![vec![x]]).unwrap();
        let at =
            |v: i64| -> BTreeMap<String, Rat> { [("x".to_string(), rat_int(v))].into_iter().collect() };
        let r0 = m.evaluate_at(&at(0)).unwrap().graded_rank();
        assert_eq!(r0, GradedDimension::new());
        let r1 = m.evaluate_at(&at(1)).unwrap().graded_rank();
        assert_eq!(r1, GradedDimension::from_pairs(&[(0, 1)]));

        let id = GradedMatrix::identity(s.clone(), vec![0, 1], 6);
        let r = id.evaluate_at(&at(5)).unwrap().graded_rank();
        assert_eq!(r, GradedDimension::from_pairs(&[(0, 1), (1, 1)]));

        // degree-0 entry with zero body
        let thxi = gf(&s, "th").mul(&gf(&s, "xi")).unwrap();
        let m2 = GradedMatrix::from_entries(vec![0], vec![0], vec![vec![thxi]]).unwrap();
        assert_eq!(m2.evaluate_at(&at(3)).unwrap().graded_rank(), GradedDimension::new());
    }

    #[test]
    fn invert_and_dual_involution_random_mixed_degrees() {
        use crate::series::test_support::random_matrix;
        let s = sig2();
        let mut seed = 0x5bd1e995u64;
        for _ in 0..40 {
            let (m, w) = random_matrix(&s, &mut seed, 4, 2, 6);
            let id = GradedMatrix::identity(s.clone(), m.row_degrees.clone(), w);
            let inv = m.invert(w, &[]).unwrap();
            assert_eq!(m.mul(&inv).unwrap(), id);
            assert_eq!(inv.mul(&m).unwrap(), id);
            let d2 = m
                .dual_transpose(w, &[])
                .unwrap()
                .dual_transpose(w, &[])
                .unwrap();
            assert_eq!(d2, m);
        }
    }

    #[test]
    fn rank_of_product_bounded() {
        let s = sig2();
        let one = GradedFunction::one(s.clone(), 6);
        let z = GradedFunction::zero(s.clone(), 0, 6);
        let a = GradedMatrix::from_entries(
            vec![0, 0],
            vec![0, 0],
            vec![vec![one.clone(), z.clone()], vec![z.clone(), z.clone()]],
        )
        .unwrap();
        let b = GradedMatrix::from_entries(
            vec![0, 0],
            vec![0, 0],
            vec![vec![one.clone(), one.clone()], vec![one.clone(), one.clone()]],
        )
        .unwrap();
        let pt: BTreeMap<String, Rat> = [("x".to_string(), rat_int(0))].into_iter().collect();
        let rank_ab = a.mul(&b).unwrap().evaluate_at(&pt).unwrap().graded_rank();
        let rank_a = a.evaluate_at(&pt).unwrap().graded_rank();
        let rank_b = b.evaluate_at(&pt).unwrap().graded_rank();
        assert!(rank_ab.count(0) <= rank_a.count(0).min(rank_b.count(0)));
    }
}
