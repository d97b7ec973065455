use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::{DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;

use crate::error::{HdgError, Result};
use crate::hdgforms::{DofLayout, FieldState, FormContext, SourceFn};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    /// All unknowns `(L, u, p, u^, p^)` in one sparse system.
    Monolithic,
    /// Cell unknowns eliminated; the global system holds the traces.
    Condensed,
}

impl std::str::FromStr for SolveMode {
    type Err = HdgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monolithic" => Ok(SolveMode::Monolithic),
            "condensed" => Ok(SolveMode::Condensed),
            other => Err(HdgError::Config(format!(
                "unknown mode '{other}' (expected monolithic or condensed)"
            ))),
        }
    }
}

/// Element data kept in condensed mode: the full element system and the
/// factored interior block.
#[derive(Debug, Clone)]
struct CellElement {
    k: DMatrix<f64>,
    f: DVector<f64>,
    lu_ii: LU<f64, Dyn, Dyn>,
    /// Trace index of each local trace dof; `None` for dropped and pinned dofs.
    trace_dofs: Vec<Option<usize>>,
}

#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub mode: SolveMode,
    /// The matrix that gets factored: the full system or its Schur complement.
    pub matrix: SparseColMat<usize, f64>,
    n_cells: usize,
    n_int: usize,
    n_trace: usize,
    pin: usize,
    /// Right-hand side in monolithic mode; empty otherwise.
    monolithic_rhs: Vec<f64>,
    /// Element data in condensed mode; empty otherwise.
    elements: Vec<CellElement>,
}

/// `a + b = s + e` exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Double-word accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn new(v: f64) -> Dd {
        Dd { hi: v, lo: 0.0 }
    }

    fn add(&mut self, v: f64) {
        let (s, e) = two_sum(self.hi, v);
        self.hi = s;
        self.lo += e;
    }

    fn add_prod(&mut self, a: f64, b: f64) {
        let p = a * b;
        self.add(p);
        self.lo += a.mul_add(b, -p);
    }

    fn add_dd(&mut self, o: Dd) {
        self.add(o.hi);
        self.lo += o.lo;
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

impl GlobalSystem {
    /// Size of the factored matrix.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.matrix.compute_nnz()
    }

    /// Size of the full system: cell blocks followed by traces.
    pub fn full_dim(&self) -> usize {
        self.n_cells * self.n_int + self.n_trace
    }

    fn trace_base(&self) -> usize {
        self.n_cells * self.n_int
    }

    /// Right-hand side of the full system.
    fn full_rhs(&self) -> Vec<f64> {
        match self.mode {
            SolveMode::Monolithic => self.monolithic_rhs.clone(),
            SolveMode::Condensed => {
                let mut b = vec![0.0; self.full_dim()];
                let tb = self.trace_base();
                for (c, el) in self.elements.iter().enumerate() {
                    b[c * self.n_int..(c + 1) * self.n_int].copy_from_slice(&el.f.as_slice()[..self.n_int]);
                    for (i, t) in el.trace_dofs.iter().enumerate() {
                        if let Some(t) = t {
                            b[tb + t] += el.f[self.n_int + i];
                        }
                    }
                }
                b
            }
        }
    }

    /// `b - A x` of the full system, accumulated in double-word arithmetic.
    pub fn full_residual(&self, x: &[f64]) -> Vec<f64> {
        let tb = self.trace_base();
        let n_int = self.n_int;
        let mut acc: Vec<Dd>;
        match self.mode {
            SolveMode::Monolithic => {
                acc = self.monolithic_rhs.iter().map(|&v| Dd::new(v)).collect();
                let a = self.matrix.as_ref();
                for j in 0..a.ncols() {
                    let xj = x[j];
                    if xj == 0.0 {
                        continue;
                    }
                    for (i, v) in a.row_idx_of_col(j).zip(a.val_of_col(j)) {
                        acc[i].add_prod(-v, xj);
                    }
                }
            }
            SolveMode::Condensed => {
                let local: Vec<Vec<Dd>> = self
                    .elements
                    .par_iter()
                    .enumerate()
                    .map(|(c, el)| element_residual(&el.k, &el.f, &el.trace_dofs, x, c, n_int, tb))
                    .collect();
                acc = vec![Dd::default(); self.full_dim()];
                for (c, (el, r)) in self.elements.iter().zip(&local).enumerate() {
                    scatter(&mut acc, r, &el.trace_dofs, c, n_int, tb);
                }
                acc[tb + self.pin] = Dd::new(-x[tb + self.pin]);
            }
        }
        acc.into_iter().map(Dd::value).collect()
    }

    /// `||b - A x|| / ||b||` of the full system for `x` in the monolithic ordering.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let r = norm(&self.full_residual(x));
        let b = norm(&self.full_rhs());
        if b > 0.0 {
            r / b
        } else {
            r
        }
    }
}

/// `f_e - K_e x_e` for cell `c`.
fn element_residual(
    k: &DMatrix<f64>,
    f: &DVector<f64>,
    trace_dofs: &[Option<usize>],
    x: &[f64],
    c: usize,
    n_int: usize,
    tb: usize,
) -> Vec<Dd> {
    let xe: Vec<f64> = x[c * n_int..(c + 1) * n_int]
        .iter()
        .copied()
        .chain(trace_dofs.iter().map(|t| t.map_or(0.0, |t| x[tb + t])))
        .collect();
    (0..k.nrows())
        .map(|i| {
            let mut r = Dd::new(f[i]);
            for (j, xj) in xe.iter().enumerate() {
                r.add_prod(-k[(i, j)], *xj);
            }
            r
        })
        .collect()
}

fn scatter(acc: &mut [Dd], r: &[Dd], trace_dofs: &[Option<usize>], c: usize, n_int: usize, tb: usize) {
    acc[c * n_int..(c + 1) * n_int].copy_from_slice(&r[..n_int]);
    for (i, t) in trace_dofs.iter().enumerate() {
        if let Some(t) = t {
            acc[tb + t].add_dd(r[n_int + i]);
        }
    }
}

/// `||b - A x|| / ||b||` of the full system assembled around `frozen`, for
/// `x` in the monolithic ordering. Works cell by cell without storing the
/// global matrix.
pub fn residual_at(
    ctx: &FormContext,
    mesh: &Mesh,
    layout: &DofLayout,
    frozen: Option<&FieldState>,
    f: Option<&SourceFn>,
    x: &[f64],
) -> f64 {
    let n_int = layout.n_interior();
    let tb = layout.n_cells * n_int;
    let pin = layout.pinned_dof();
    let local: Vec<(Vec<Dd>, Vec<f64>, Vec<Option<usize>>)> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let (k, rhs) = ctx.assemble_local(mesh, layout, c, frozen, f).element_system();
            let trace_dofs: Vec<Option<usize>> =
                layout.cell_trace_dofs(mesh, c).iter().map(|t| t.filter(|&t| t != pin)).collect();
            let r = element_residual(&k, &rhs, &trace_dofs, x, c, n_int, tb);
            (r, rhs.as_slice().to_vec(), trace_dofs)
        })
        .collect();
    let dim = tb + layout.condensed_dim();
    let mut acc = vec![Dd::default(); dim];
    let mut b = vec![Dd::default(); dim];
    for (c, (r, rhs, trace_dofs)) in local.iter().enumerate() {
        scatter(&mut acc, r, trace_dofs, c, n_int, tb);
        let rhs: Vec<Dd> = rhs.iter().map(|&v| Dd::new(v)).collect();
        scatter(&mut b, &rhs, trace_dofs, c, n_int, tb);
    }
    acc[tb + pin] = Dd::new(-x[tb + pin]);
    let norm = |v: &[Dd]| v.iter().map(|a| a.value().powi(2)).sum::<f64>().sqrt();
    let (r, b) = (norm(&acc), norm(&b));
    if b > 0.0 {
        r / b
    } else {
        r
    }
}

/// Whether local entry `(i, j)` belongs to the velocity-pair block, whose
/// values change with the convecting field and so must stay in the pattern
/// even when zero.
fn in_velocity_pair(layout: &DofLayout, i: usize, j: usize) -> bool {
    let n_int = layout.n_interior();
    let u = layout.n_l..layout.n_l + layout.n_u;
    let uh = n_int..n_int + 3 * layout.n_uhat;
    (u.contains(&i) || uh.contains(&i)) && (u.contains(&j) || uh.contains(&j))
}

/// Assembles the global system for a frozen convecting field (`None` omits
/// the convective term, giving the Stokes system).
///
/// The element multiplier row and column are dropped and the pinned pressure
/// trace dof gets an identity row, so the matrix is nonsingular; the zero-mean
/// pressure is restored after the solve.
pub fn assemble_global(
    ctx: &FormContext,
    mesh: &Mesh,
    layout: &DofLayout,
    frozen: Option<&FieldState>,
    f: Option<&SourceFn>,
    mode: SolveMode,
) -> Result<GlobalSystem> {
    let n_int = layout.n_interior();
    let pin = layout.pinned_dof();
    let per_cell: Vec<Result<(Vec<Triplet<usize, usize, f64>>, Vec<(usize, f64)>, Option<CellElement>)>> =
        (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let blocks = ctx.assemble_local(mesh, layout, c, frozen, f);
                let (kmat, rhs) = blocks.element_system();
                let trace_dofs = layout.cell_trace_dofs(mesh, c);
                match mode {
                    SolveMode::Monolithic => {
                        let base = layout.interior_range(c).start;
                        let trace_base = layout.n_cells * n_int;
                        let global = |i: usize| -> Option<usize> {
                            if i < n_int {
                                Some(base + i)
                            } else {
                                trace_dofs[i - n_int].filter(|&t| t != pin).map(|t| trace_base + t)
                            }
                        };
                        let mut trips = Vec::new();
                        for j in 0..kmat.ncols() {
                            let Some(gj) = global(j) else { continue };
                            for i in 0..kmat.nrows() {
                                let v = kmat[(i, j)];
                                if v == 0.0 && !in_velocity_pair(layout, i, j) {
                                    continue;
                                }
                                if let Some(gi) = global(i) {
                                    trips.push(Triplet::new(gi, gj, v));
                                }
                            }
                        }
                        let loads = (0..rhs.len())
                            .filter(|&i| rhs[i] != 0.0)
                            .filter_map(|i| global(i).map(|g| (g, rhs[i])))
                            .collect();
                        Ok((trips, loads, None))
                    }
                    SolveMode::Condensed => {
                        let n_t = kmat.nrows() - n_int;
                        let k_ig = kmat.view((0, n_int), (n_int, n_t)).clone_owned();
                        let k_gi = kmat.view((n_int, 0), (n_t, n_int));
                        let k_gg = kmat.view((n_int, n_int), (n_t, n_t));
                        let lu_ii = kmat.view((0, 0), (n_int, n_int)).clone_owned().lu();
                        let map = lu_ii.solve(&k_ig).filter(|m| m.iter().all(|v| v.is_finite())).ok_or(
                            HdgError::SingularLocal {
                                cell: c,
                                context: "interior block during static condensation",
                            },
                        )?;
                        let schur = k_gg - k_gi * &map;
                        let trace_dofs: Vec<Option<usize>> =
                            trace_dofs.iter().map(|t| t.filter(|&t| t != pin)).collect();
                        let mut trips = Vec::with_capacity(n_t * n_t);
                        for j in 0..n_t {
                            let Some(gj) = trace_dofs[j] else { continue };
                            for i in 0..n_t {
                                if let Some(gi) = trace_dofs[i] {
                                    trips.push(Triplet::new(gi, gj, schur[(i, j)]));
                                }
                            }
                        }
                        let el = CellElement {
                            k: kmat,
                            f: rhs,
                            lu_ii,
                            trace_dofs,
                        };
                        Ok((trips, Vec::new(), Some(el)))
                    }
                }
            })
            .collect();

    let dim = match mode {
        SolveMode::Monolithic => layout.monolithic_dim(),
        SolveMode::Condensed => layout.condensed_dim(),
    };
    let pin_global = match mode {
        SolveMode::Monolithic => layout.n_cells * n_int + pin,
        SolveMode::Condensed => pin,
    };
    let mut triplets = vec![Triplet::new(pin_global, pin_global, 1.0)];
    let mut monolithic_rhs = match mode {
        SolveMode::Monolithic => vec![0.0; dim],
        SolveMode::Condensed => Vec::new(),
    };
    let mut elements = Vec::new();
    // ordered merge: cell order, independent of thread scheduling
    for item in per_cell {
        let (trips, loads, el) = item?;
        triplets.extend(trips);
        for (g, v) in loads {
            monolithic_rhs[g] += v;
        }
        elements.extend(el);
    }
    let matrix = SparseColMat::try_new_from_triplets(dim, dim, &triplets).map_err(|e| {
        HdgError::Factorization {
            dim,
            nnz: triplets.len(),
            reason: format!("{e:?}"),
        }
    })?;
    Ok(GlobalSystem {
        mode,
        matrix,
        n_cells: layout.n_cells,
        n_int,
        n_trace: layout.condensed_dim(),
        pin,
        monolithic_rhs,
        elements,
    })
}

/// Sparse LU with a cached symbolic factorization, reused while the sparsity
/// pattern stays the same (as it does across Picard steps).
#[derive(Default)]
pub struct LinearSolver {
    symbolic: Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>,
}

#[derive(Debug, Clone, Copy)]
pub struct LinearSolveInfo {
    pub dim: usize,
    pub nnz: usize,
    pub relative_residual: f64,
}

impl LinearSolver {
    pub fn new() -> LinearSolver {
        LinearSolver::default()
    }

    fn factor(&mut self, system: &GlobalSystem) -> Result<Lu<usize, f64>> {
        let dim = system.dim();
        let nnz = system.nnz();
        let fail = |reason: String| HdgError::Factorization { dim, nnz, reason };
        let a = system.matrix.as_ref();
        let col_ptr = a.symbolic().col_ptr().to_vec();
        let row_idx = a.symbolic().row_idx().to_vec();
        let reuse = matches!(&self.symbolic, Some((cp, ri, _)) if *cp == col_ptr && *ri == row_idx);
        if !reuse {
            let sym = SymbolicLu::try_new(a.symbolic()).map_err(|e| fail(format!("{e:?}")))?;
            self.symbolic = Some((col_ptr, row_idx, sym));
        }
        let sym = self.symbolic.as_ref().map(|(_, _, s)| s.clone()).expect("set above");
        Lu::try_new_with_symbolic(sym, a).map_err(|e| fail(format!("{e:?}")))
    }

    /// Solves the full system, returning the unknowns in the monolithic
    /// ordering. Each sweep forms the residual in double-word arithmetic and
    /// corrects with the factored matrix.
    pub fn solve_vector(&mut self, system: &GlobalSystem) -> Result<(Vec<f64>, LinearSolveInfo)> {
        let lu = self.factor(system)?;
        let dim = system.dim();
        let nnz = system.nnz();
        let mut x = vec![0.0; system.full_dim()];
        for _ in 0..REFINEMENT_SWEEPS {
            let r = system.full_residual(&x);
            if r.iter().all(|&v| v == 0.0) {
                break;
            }
            let dx = correction(system, &lu, &r);
            if !dx.iter().all(|v| v.is_finite()) {
                return Err(HdgError::Factorization {
                    dim,
                    nnz,
                    reason: "non-finite solution".into(),
                });
            }
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        let relative_residual = system.relative_residual(&x);
        Ok((x, LinearSolveInfo { dim, nnz, relative_residual }))
    }

    /// Solves the system and unpacks the coefficients into a [`FieldState`].
    /// The pressure pair is shifted so that `p_h` has zero mean.
    pub fn solve(
        &mut self,
        system: &GlobalSystem,
        mesh: &Mesh,
        layout: &DofLayout,
    ) -> Result<(FieldState, LinearSolveInfo)> {
        let (x, info) = self.solve_vector(system)?;
        let n_int = layout.n_interior();
        let mut state = FieldState::zeros(layout);
        state.set_traces(layout, &x[layout.n_cells * n_int..]);
        for c in 0..layout.n_cells {
            let blk = &x[c * n_int..(c + 1) * n_int];
            state.tensor[c * layout.n_l..(c + 1) * layout.n_l].copy_from_slice(&blk[..layout.n_l]);
            state.velocity[c * layout.n_u..(c + 1) * layout.n_u]
                .copy_from_slice(&blk[layout.n_l..layout.n_l + layout.n_u]);
            state.pressure[c * layout.n_p..(c + 1) * layout.n_p]
                .copy_from_slice(&blk[layout.n_l + layout.n_u..]);
        }
        let mean = state.pressure_mean(mesh, layout);
        state.shift_pressure(layout, -mean);
        Ok((state, info))
    }
}

const REFINEMENT_SWEEPS: usize = 3;

fn lu_solve(lu: &Lu<usize, f64>, r: &[f64]) -> Vec<f64> {
    let b = Mat::from_fn(r.len(), 1, |i, _| r[i]);
    let x = lu.solve(&b);
    (0..r.len()).map(|i| x[(i, 0)]).collect()
}

/// `A^{-1} r` for the full system. In condensed mode the cell blocks are
/// eliminated, the trace part is solved with the Schur complement and the
/// cell blocks are recovered.
fn correction(system: &GlobalSystem, lu: &Lu<usize, f64>, r: &[f64]) -> Vec<f64> {
    match system.mode {
        SolveMode::Monolithic => lu_solve(lu, r),
        SolveMode::Condensed => {
            let n_int = system.n_int;
            let tb = system.trace_base();
            let local: Vec<DVector<f64>> = system
                .elements
                .par_iter()
                .enumerate()
                .map(|(c, el)| {
                    let r_i = DVector::from_column_slice(&r[c * n_int..(c + 1) * n_int]);
                    let y = el.lu_ii.solve(&r_i).expect("factor checked at assembly");
                    let n_t = el.trace_dofs.len();
                    el.k.view((n_int, 0), (n_t, n_int)) * y
                })
                .collect();
            let mut r_g = r[tb..].to_vec();
            for (el, ky) in system.elements.iter().zip(&local) {
                for (i, t) in el.trace_dofs.iter().enumerate() {
                    if let Some(t) = t {
                        r_g[*t] -= ky[i];
                    }
                }
            }
            let d_g = lu_solve(lu, &r_g);
            let blocks: Vec<DVector<f64>> = system
                .elements
                .par_iter()
                .enumerate()
                .map(|(c, el)| {
                    let n_t = el.trace_dofs.len();
                    let dg = DVector::from_iterator(n_t, el.trace_dofs.iter().map(|t| t.map_or(0.0, |t| d_g[t])));
                    let rhs = DVector::from_column_slice(&r[c * n_int..(c + 1) * n_int])
                        - el.k.view((0, n_int), (n_int, n_t)) * dg;
                    el.lu_ii.solve(&rhs).expect("factor checked at assembly")
                })
                .collect();
            let mut dx: Vec<f64> = blocks.iter().flat_map(|b| b.iter().copied()).collect();
            dx.extend(d_g);
            dx
        }
    }
}

/// One-shot linear solve of an assembled system.
pub fn solve_linear(system: &GlobalSystem, mesh: &Mesh, layout: &DofLayout) -> Result<(FieldState, LinearSolveInfo)> {
    LinearSolver::new().solve(system, mesh, layout)
}
