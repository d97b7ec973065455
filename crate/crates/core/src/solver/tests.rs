use super::*;
use crate::hdgforms::{apply_kh, interpolate_state, manufactured_source, Example};
use crate::mesh::Point;
use faer::sparse::{SparseColMat, Triplet};

fn setup(n: usize, k: usize, m: usize, nu: f64) -> (Mesh, DofLayout, FormContext) {
    let mesh = Mesh::uniform(n);
    let layout = DofLayout::new(&mesh, k, m).unwrap();
    let ctx = FormContext::new(&layout, nu).unwrap();
    (mesh, layout, ctx)
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let s: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / s.max(1e-300)
}

#[test]
fn triplet_duplicates_are_summed() {
    let t = [
        Triplet::new(0usize, 0usize, 1.0),
        Triplet::new(0, 0, 2.5),
        Triplet::new(1, 1, 1.0),
        Triplet::new(1, 0, -1.0),
        Triplet::new(1, 0, 0.5),
    ];
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(2, 2, &t).unwrap();
    let d = a.to_dense();
    assert_eq!(d[(0, 0)], 3.5);
    assert_eq!(d[(1, 0)], -0.5);
    assert_eq!(d[(1, 1)], 1.0);
}

#[test]
fn system_dimensions() {
    let (mesh, layout, ctx) = setup(1, 1, 1, 1.0);
    let mono = assemble_global(&ctx, &mesh, &layout, None, None, SolveMode::Monolithic).unwrap();
    let cond = assemble_global(&ctx, &mesh, &layout, None, None, SolveMode::Condensed).unwrap();
    assert_eq!(mono.dim(), 52);
    assert_eq!(cond.dim(), 14);
}

#[test]
fn mode_parsing() {
    assert_eq!("condensed".parse::<SolveMode>().unwrap(), SolveMode::Condensed);
    assert_eq!("monolithic".parse::<SolveMode>().unwrap(), SolveMode::Monolithic);
    assert!("direct".parse::<SolveMode>().is_err());
}

fn example1_source(nu: f64) -> impl Fn(Point) -> [f64; 2] + Sync {
    move |p| manufactured_source(Example::Polynomial, nu, p)
}

#[test]
fn condensed_matches_monolithic() {
    // Oseen system with a nontrivial frozen field, several configurations
    for &(n, k, m, nu) in &[(2, 1, 1, 1.0), (3, 1, 0, 1.0), (2, 2, 2, 0.5), (3, 2, 1, 1.0), (2, 3, 3, 2.0), (2, 3, 2, 1.0)] {
        let (mesh, layout, ctx) = setup(n, k, m, nu);
        let f = example1_source(nu);
        let w = interpolate_state(&ctx, &mesh, &layout, &|p: Point| [p[1] - 0.5, 0.3 * p[0]], None, None);
        let mono = assemble_global(&ctx, &mesh, &layout, Some(&w), Some(&f), SolveMode::Monolithic).unwrap();
        let cond = assemble_global(&ctx, &mesh, &layout, Some(&w), Some(&f), SolveMode::Condensed).unwrap();
        let (sm, im) = solve_linear(&mono, &mesh, &layout).unwrap();
        let (sc, ic) = solve_linear(&cond, &mesh, &layout).unwrap();
        assert!(im.relative_residual <= 1e-10 && ic.relative_residual <= 1e-10);
        let xm = monolithic_vector(&layout, &sm);
        let xc = monolithic_vector(&layout, &sc);
        let r = rel_diff(&xc, &xm);
        assert!(r < 1e-10, "n={n} k={k} m={m}: {r:e}");
    }
}

#[test]
fn zero_source_gives_zero_solution() {
    for mode in [SolveMode::Monolithic, SolveMode::Condensed] {
        let (mesh, layout, ctx) = setup(3, 2, 2, 1.0);
        let (s, rep) = picard_solve(&ctx, &mesh, &layout, None, &PicardOptions { mode, ..Default::default() }).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert!(monolithic_vector(&layout, &s).iter().all(|&v| v == 0.0));
    }
}

#[test]
fn tensor_equals_nu_kh_u() {
    for &(k, m, nu) in &[(1, 1, 1.0), (2, 1, 0.5), (3, 3, 2.0)] {
        let (mesh, layout, ctx) = setup(3, k, m, nu);
        let f = example1_source(nu);
        let (s, rep) = picard_solve(&ctx, &mesh, &layout, Some(&f), &PicardOptions::default()).unwrap();
        assert!(rep.converged);
        let kh = apply_kh(&ctx, &mesh, &layout, &s);
        let scaled: Vec<f64> = kh.iter().map(|v| nu * v).collect();
        let r = rel_diff(&s.tensor, &scaled);
        assert!(r < 1e-10, "k={k} m={m}: {r:e}");
    }
}

#[test]
fn oseen_energy_identity() {
    let nu = 0.7;
    let (mesh, layout, ctx) = setup(4, 2, 2, nu);
    let f = example1_source(nu);
    let w = interpolate_state(&ctx, &mesh, &layout, &|p: Point| [p[1], -p[0]], None, None);
    let sys = assemble_global(&ctx, &mesh, &layout, Some(&w), Some(&f), SolveMode::Condensed).unwrap();
    let (u, _) = solve_linear(&sys, &mesh, &layout).unwrap();
    let lhs = nu * norm_v(&ctx, &mesh, &layout, &u).powi(2);
    let rhs = load_pairing(&ctx, &mesh, &layout, &u, &f);
    assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs(), "{lhs} vs {rhs}");
}

#[test]
fn initial_guess_independence() {
    let (mesh, layout, ctx) = setup(4, 2, 2, 1.0);
    let f = example1_source(1.0);
    let opts = PicardOptions::default();
    let (a, ra) = picard_solve(&ctx, &mesh, &layout, Some(&f), &opts).unwrap();
    let (b, rb) = picard_solve(&ctx, &mesh, &layout, Some(&f), &PicardOptions { initial: InitialGuess::Zero, ..opts }).unwrap();
    assert!(ra.converged && rb.converged);
    let d = norm_v(&ctx, &mesh, &layout, &state_difference(&a, &b));
    assert!(d <= 10.0 * opts.tol, "{d:e}");
    assert!(ra.final_residual <= 1e-8 && rb.final_residual <= 1e-8);
}

#[test]
fn picard_rejects_bad_options() {
    let (mesh, layout, ctx) = setup(1, 1, 1, 1.0);
    let bad = PicardOptions { tol: 0.0, ..Default::default() };
    assert!(picard_solve(&ctx, &mesh, &layout, None, &bad).is_err());
}

#[test]
fn picard_reports_non_convergence() {
    let (mesh, layout, ctx) = setup(2, 1, 1, 1.0);
    let f = example1_source(1.0);
    let opts = PicardOptions { tol: 1e-30, max_iter: 2, ..Default::default() };
    let (_, rep) = picard_solve(&ctx, &mesh, &layout, Some(&f), &opts).unwrap();
    assert!(!rep.converged);
    assert_eq!(rep.increments.len(), 2);
}

/// Velocity `curl psi` and pressure `p` with `psi = x^2 (1-x)^2 y^2 (1-y)^2`;
/// the Stokes source is computed by hand from these fields.
mod stokes_exact {
    use super::*;

    pub fn psi_derivs(x: f64, y: f64) -> (f64, f64, f64, f64) {
        // a(x) = x^2 (1-x)^2 and its derivatives
        let a = x * x * (1.0 - x).powi(2);
        let a1 = 2.0 * x * (1.0 - x) * (1.0 - 2.0 * x);
        let a2 = 2.0 - 12.0 * x + 12.0 * x * x;
        let a3 = -12.0 + 24.0 * x;
        let b = y * y * (1.0 - y).powi(2);
        let b1 = 2.0 * y * (1.0 - y) * (1.0 - 2.0 * y);
        let b2 = 2.0 - 12.0 * y + 12.0 * y * y;
        let b3 = -12.0 + 24.0 * y;
        // u = (psi_y, -psi_x); -lap u = (-(a2 b1 + a b3), a3 b + a1 b2)
        let u1 = a * b1;
        let u2 = -a1 * b;
        let f1 = -(a2 * b1 + a * b3);
        let f2 = a3 * b + a1 * b2;
        let _ = (u1, u2);
        (f1, f2, u1, u2)
    }

    pub fn velocity(p: Point) -> [f64; 2] {
        let (_, _, u1, u2) = psi_derivs(p[0], p[1]);
        [u1, u2]
    }

    pub fn pressure(p: Point) -> f64 {
        // zero mean on the unit square
        p[0] * p[0] * p[1] - 1.0 / 6.0
    }

    pub fn source(nu: f64) -> impl Fn(Point) -> [f64; 2] + Sync {
        move |p: Point| {
            let (f1, f2, _, _) = psi_derivs(p[0], p[1]);
            [nu * f1 + 2.0 * p[0] * p[1], nu * f2 + p[0] * p[0]]
        }
    }
}

#[test]
fn stokes_reproduces_polynomial_solution() {
    // u is degree 7, p degree 3: both lie in the discrete spaces for k = 7
    let nu = 1.3;
    let (mesh, layout, ctx) = setup(2, 7, 7, nu);
    let f = stokes_exact::source(nu);
    let sys = assemble_global(&ctx, &mesh, &layout, None, Some(&f), SolveMode::Condensed).unwrap();
    let (s, info) = solve_linear(&sys, &mesh, &layout).unwrap();
    assert!(info.relative_residual < 1e-10);
    let exact = interpolate_state(&ctx, &mesh, &layout, &stokes_exact::velocity, None, Some(&stokes_exact::pressure));
    let du = rel_diff(&s.velocity, &exact.velocity);
    let dp = rel_diff(&s.pressure, &exact.pressure);
    let dt = rel_diff(&s.vel_trace, &exact.vel_trace);
    assert!(du < 1e-9 && dp < 1e-9 && dt < 1e-9, "{du:e} {dp:e} {dt:e}");
}

#[test]
fn stokes_reproduces_pressure_gradient_flows() {
    // f = grad p with p in P_{k-1}: u = 0 and p_h = p
    for k in 1..=3 {
        let (mesh, layout, ctx) = setup(3, k, k, 1.0);
        let (p, grad): (fn(Point) -> f64, fn(Point) -> [f64; 2]) = match k {
            1 => (|_| 0.0, |_| [0.0, 0.0]),
            2 => (|p| p[0] - 0.5, |_| [1.0, 0.0]),
            _ => (|p| p[0] * p[1] - 0.25, |p| [p[1], p[0]]),
        };
        let f = move |x: Point| grad(x);
        let (s, rep) = picard_solve(&ctx, &mesh, &layout, Some(&f), &PicardOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(s.velocity.iter().all(|v| v.abs() < 1e-12));
        let exact = interpolate_state(&ctx, &mesh, &layout, &|_| [0.0, 0.0], None, Some(&p));
        let err = s.pressure.iter().zip(&exact.pressure).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "k={k}: {err:e}");
    }
}

#[test]
fn norm_v_of_linear_field() {
    // v = (x, y) with matching traces everywhere: K_h V = I
    let (mesh, layout, ctx) = setup(3, 1, 1, 1.0);
    let mut s = interpolate_state(&ctx, &mesh, &layout, &|p: Point| p, None, None);
    // boundary traces are needed for the jump term to vanish
    let tab = &ctx.high_edge_tab;
    for e in 0..mesh.num_edges() {
        let mut cu = vec![0.0; layout.n_uhat];
        for (q, psi) in tab.edge_values[0].iter().enumerate() {
            let x = mesh.edge_point(e, tab.params[q]);
            for b in 0..layout.n_phat {
                cu[b] += tab.weights[q] * x[0] * psi[b];
                cu[layout.n_phat + b] += tab.weights[q] * x[1] * psi[b];
            }
        }
        s.vel_trace[e * layout.n_uhat..(e + 1) * layout.n_uhat].copy_from_slice(&cu);
    }
    let nv = norm_v(&ctx, &mesh, &layout, &s);
    assert!((nv - 2f64.sqrt()).abs() < 1e-12, "{nv}");
    assert_eq!(norm_v(&ctx, &mesh, &layout, &FieldState::zeros(&layout)), 0.0);
}

#[test]
fn norm_v_equivalent_to_broken_h1() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for &(n, k) in &[(2, 1), (4, 2), (3, 3)] {
        let (mesh, layout, ctx) = setup(n, k, k, 1.0);
        for _ in 0..5 {
            let mut s = FieldState::zeros(&layout);
            s.velocity.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            for e in 0..mesh.num_edges() {
                if layout.uhat_range(e).is_some() {
                    s.vel_trace[e * layout.n_uhat..(e + 1) * layout.n_uhat]
                        .iter_mut()
                        .for_each(|v| *v = rng.gen_range(-1.0..1.0));
                }
            }
            // broken H1 seminorm plus jump term, evaluated directly
            let mut grad2 = 0.0;
            let mut jump2 = 0.0;
            for c in 0..mesh.num_cells() {
                let g = CellGeometry::new(&mesh, c);
                let grads = ctx.physical_grads(&ctx.cell_tab, &g);
                let dk = layout.dim_k();
                let u = s.velocity_of(&layout, c);
                for (q, gq) in grads.iter().enumerate() {
                    for comp in 0..2 {
                        let mut d = [0.0; 2];
                        for a in 0..dk {
                            d[0] += u[comp * dk + a] * gq[a][0];
                            d[1] += u[comp * dk + a] * gq[a][1];
                        }
                        grad2 += ctx.cell_tab.weights[q] * g.map.det * (d[0] * d[0] + d[1] * d[1]);
                    }
                }
                let pair = DVector::from_vec(s.local_velocity_pair(&mesh, &layout, c));
                jump2 += pair.dot(&(ctx.jump_matrix(&g) * &pair));
            }
            let rhs = grad2.sqrt() + jump2.sqrt();
            let lhs = norm_v(&ctx, &mesh, &layout, &s);
            let ratio = lhs / rhs;
            assert!(ratio > 0.1 && ratio < 10.0, "n={n} k={k}: {ratio}");
        }
    }
}

#[test]
fn norm_q_zero_for_matching_constant() {
    let (mesh, layout, ctx) = setup(2, 2, 2, 1.0);
    let s = interpolate_state(&ctx, &mesh, &layout, &|_| [0.0, 0.0], None, Some(&|p: Point| p[0]));
    // q - q^ vanishes on edges for a continuous p, leaving ||p||
    let nq = norm_q(&ctx, &mesh, &layout, &s);
    assert!((nq - (1.0f64 / 3.0).sqrt()).abs() < 1e-12, "{nq}");
    assert_eq!(norm_q(&ctx, &mesh, &layout, &FieldState::zeros(&layout)), 0.0);
}

#[test]
fn threads_env_is_validated() {
    std::env::set_var("THREADS", "zero");
    assert!(configure_threads().is_err());
    std::env::set_var("THREADS", "2");
    assert!(configure_threads().unwrap() >= 1);
    std::env::remove_var("THREADS");
}
