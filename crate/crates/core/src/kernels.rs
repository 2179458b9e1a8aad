//! Benchmark kernels expressed through the graph/tensor/cursor APIs: SAXPY,
//! particle advection, FORCE flux differences for the 2-D Euler equations, a
//! fast-iterative eikonal solver, the full shock-capturing Euler pipeline,
//! and the scaling-efficiency formulas used by the harness.
//!
//! Every kernel fixes its per-cell arithmetic order, so results are bitwise
//! identical across block grids, layouts and scheduling orders.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::graph::{
    concurrent_padded, exclusive_padded, plain, Graph, MaxReducer, ReductionResult,
};
use crate::iter::GridCursor;
use crate::layout::{ComponentDescriptor, LayoutKind, RecordSchema, ScalarKind};
use crate::tensor::{BoundaryKind, Tensor};

/// Registered kernel names accepted by the benchmark harness.
pub const KERNEL_NAMES: &[&str] = &["saxpy", "particle", "flux", "eikonal", "euler", "stencil"];

// ---------------------------------------------------------------------------
// SAXPY
// ---------------------------------------------------------------------------

/// y = a*x + y over every interior cell; one node per block.
pub fn saxpy_graph(a: f64, x: &Tensor, y: &Tensor) -> Result<Graph> {
    let mut g = Graph::default();
    g.split(
        move |c| c[1].set_value(a * c[0].value() + c[1].value()),
        &[plain(x), plain(y)],
    )?;
    Ok(g)
}

// ---------------------------------------------------------------------------
// Particle update
// ---------------------------------------------------------------------------

/// Record schema for a particle: position and velocity, three lanes each.
pub fn particle_schema(layout: LayoutKind) -> RecordSchema {
    RecordSchema::new(
        vec![
            ComponentDescriptor::vector(ScalarKind::F64, 3),
            ComponentDescriptor::vector(ScalarKind::F64, 3),
        ],
        layout,
    )
    .unwrap()
}

pub const PARTICLE_POSITION: usize = 0;
pub const PARTICLE_VELOCITY: usize = 1;

/// position += velocity * dt per lane; velocity unchanged.
pub fn particle_update_graph(particles: &Tensor, dt: f64) -> Result<Graph> {
    let mut g = Graph::default();
    g.split(
        move |c| {
            let p = &c[0];
            for l in 0..3 {
                p.set(
                    PARTICLE_POSITION,
                    l,
                    p.get(PARTICLE_POSITION, l) + p.get(PARTICLE_VELOCITY, l) * dt,
                );
            }
        },
        &[plain(particles)],
    )?;
    Ok(g)
}

// ---------------------------------------------------------------------------
// Euler state and FORCE fluxes
// ---------------------------------------------------------------------------

/// Conserved 2-D Euler state: density, total energy, momentum (x, y).
pub fn euler_schema(layout: LayoutKind) -> RecordSchema {
    RecordSchema::new(
        vec![
            ComponentDescriptor::scalar(ScalarKind::F64),
            ComponentDescriptor::scalar(ScalarKind::F64),
            ComponentDescriptor::vector(ScalarKind::F64, 2),
        ],
        layout,
    )
    .unwrap()
}

pub const EULER_RHO: usize = 0;
pub const EULER_ENERGY: usize = 1;
pub const EULER_MOMENTUM: usize = 2;

/// Ideal-gas pressure from a conserved state.
#[inline]
pub fn euler_pressure(u: &[f64; 4], gamma: f64) -> f64 {
    (gamma - 1.0) * (u[1] - 0.5 * (u[2] * u[2] + u[3] * u[3]) / u[0])
}

#[inline]
fn read_state(it: &crate::iter::IndexedIterator<'_>) -> [f64; 4] {
    [
        it.get(EULER_RHO, 0),
        it.get(EULER_ENERGY, 0),
        it.get(EULER_MOMENTUM, 0),
        it.get(EULER_MOMENTUM, 1),
    ]
}

#[inline]
fn write_state(it: &crate::iter::IndexedIterator<'_>, u: &[f64; 4]) {
    it.set(EULER_RHO, 0, u[0]);
    it.set(EULER_ENERGY, 0, u[1]);
    it.set(EULER_MOMENTUM, 0, u[2]);
    it.set(EULER_MOMENTUM, 1, u[3]);
}

/// Physical flux of the conserved state along dimension `d`.
/// Panics (surfacing as a task error) when density or pressure leave the
/// physical domain.
#[inline]
fn physical_flux(u: &[f64; 4], d: usize, gamma: f64) -> [f64; 4] {
    let rho = u[0];
    let p = euler_pressure(u, gamma);
    assert!(
        rho > 0.0 && p > 0.0 && rho.is_finite() && p.is_finite(),
        "state left the physical domain: rho = {rho}, p = {p}"
    );
    let vel = u[2 + d] / rho;
    let mut f = [u[2 + d], vel * (u[1] + p), u[2] * vel, u[3] * vel];
    f[2 + d] += p;
    f
}

/// First-order centered (FORCE) face flux: the average of the
/// Lax-Friedrichs flux and the Richtmyer flux of the two states.
#[inline]
fn force_flux(ul: &[f64; 4], ur: &[f64; 4], d: usize, dt: f64, dx: f64, gamma: f64) -> [f64; 4] {
    let fl = physical_flux(ul, d, gamma);
    let fr = physical_flux(ur, d, gamma);
    let mut lf = [0.0; 4];
    let mut uri = [0.0; 4];
    for k in 0..4 {
        lf[k] = 0.5 * (fl[k] + fr[k]) - 0.5 * (dx / dt) * (ur[k] - ul[k]);
        uri[k] = 0.5 * (ul[k] + ur[k]) - 0.5 * (dt / dx) * (fr[k] - fl[k]);
    }
    let fri = physical_flux(&uri, d, gamma);
    let mut f = [0.0; 4];
    for k in 0..4 {
        f[k] = 0.5 * (lf[k] + fri[k]);
    }
    f
}

/// out = sum over both dimensions of the FORCE face-flux differences of the
/// padded input state (the raw flux-difference benchmark kernel; no time
/// update is applied).
pub fn flux_difference_graph(
    input: &Tensor,
    out: &Tensor,
    dt: f64,
    h: [f64; 2],
    gamma: f64,
) -> Result<Graph> {
    let mut g = Graph::default();
    g.split(
        move |c| {
            let um = read_state(&c[0]);
            let mut sum = [0.0; 4];
            for d in 0..2 {
                let ul = read_state(&c[0].offset(d, -1));
                let ur = read_state(&c[0].offset(d, 1));
                let fm = force_flux(&ul, &um, d, dt, h[d], gamma);
                let fp = force_flux(&um, &ur, d, dt, h[d], gamma);
                for k in 0..4 {
                    sum[k] += fp[k] - fm[k];
                }
            }
            write_state(&c[1], &sum);
        },
        &[concurrent_padded(input), plain(out)],
    )?;
    Ok(g)
}

// ---------------------------------------------------------------------------
// Euler solver pipeline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EulerParams {
    pub gamma: f64,
    pub cfl: f64,
    /// Cell spacing per dimension.
    pub h: [f64; 2],
    /// Physical-boundary treatment for the state tensors.
    pub boundary: BoundaryKind,
    /// Factor applied to the first step's dt, taming the startup transient.
    pub first_step_factor: f64,
}

impl Default for EulerParams {
    fn default() -> Self {
        Self {
            gamma: 1.4,
            cfl: 0.9,
            h: [1.0, 1.0],
            boundary: BoundaryKind::Clamp,
            first_step_factor: 0.2,
        }
    }
}

/// Builds the solver pipeline: per-cell wavespeeds, max-reduction, dt
/// selection, boundary load, x-sweep into `out`, boundary load, y-sweep back
/// into `input`, all wrapped in a conditional that re-activates the pipeline
/// `steps` times. The graph is reusable: the step counter re-arms itself
/// when the loop exits.
pub fn euler_solver_graph(
    input: &Tensor,
    out: &Tensor,
    wavespeeds: &Tensor,
    max_wavespeed: &ReductionResult,
    steps: usize,
    params: EulerParams,
) -> Result<Graph> {
    if steps == 0 {
        return Err(Error::Config("euler solver needs steps >= 1".into()));
    }
    if input.padding() < 1 || out.padding() < 1 {
        return Err(Error::Config("euler state tensors need padding >= 1".into()));
    }
    let gamma = params.gamma;
    let dt_bits = Arc::new(AtomicU64::new(0));
    let step_index = Arc::new(AtomicUsize::new(0));

    let mut g = Graph::default();

    // per-cell maximal signal speed |u_d| + c
    g.split(
        move |c| {
            let u = read_state(&c[0]);
            let p = euler_pressure(&u, gamma);
            assert!(u[0] > 0.0 && p > 0.0, "state left the physical domain");
            let cs = (gamma * p / u[0]).sqrt();
            let sx = (u[2] / u[0]).abs() + cs;
            let sy = (u[3] / u[0]).abs() + cs;
            c[1].set_value(sx.max(sy));
        },
        &[plain(input), plain(wavespeeds)],
    )?;
    g.then_reduce(wavespeeds, max_wavespeed, MaxReducer)?;

    // CFL time step from the reduced maximum
    {
        let dt_bits = dt_bits.clone();
        let step_index = step_index.clone();
        let max_ws = max_wavespeed.clone();
        let hmin = params.h[0].min(params.h[1]);
        let cfl = params.cfl;
        let first = params.first_step_factor;
        g.then(move || {
            let s = max_ws.value_and_reset();
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::Task(format!("invalid max wavespeed {s}")));
            }
            let mut dt = cfl * hmin / s;
            if step_index.load(Ordering::Relaxed) == 0 {
                dt *= first;
            }
            dt_bits.store(dt.to_bits(), Ordering::Release);
            Ok(())
        });
    }

    let boundary = params.boundary.clone();
    let b2 = boundary.clone();
    g.then_split_raw(
        move |ctx| {
            ctx.tensors[0].load_boundary_block(ctx.block, &b2);
            Ok(())
        },
        &[plain(input)],
    )?;

    // x sweep: out = in - dt/hx * (F_{i+1/2} - F_{i-1/2})
    for (d, (src, dst)) in [(input, out), (out, input)].into_iter().enumerate() {
        if d == 1 {
            let b2 = boundary.clone();
            g.then_split_raw(
                move |ctx| {
                    ctx.tensors[0].load_boundary_block(ctx.block, &b2);
                    Ok(())
                },
                &[plain(out)],
            )?;
        }
        let dt_bits = dt_bits.clone();
        let hd = params.h[d];
        g.then_split(
            move |c| {
                let dt = f64::from_bits(dt_bits.load(Ordering::Acquire));
                let um = read_state(&c[0]);
                let ul = read_state(&c[0].offset(d, -1));
                let ur = read_state(&c[0].offset(d, 1));
                let fm = force_flux(&ul, &um, d, dt, hd, gamma);
                let fp = force_flux(&um, &ur, d, dt, hd, gamma);
                let mut u = [0.0; 4];
                for k in 0..4 {
                    u[k] = um[k] - dt / hd * (fp[k] - fm[k]);
                }
                write_state(&c[1], &u);
            },
            &[concurrent_padded(src), plain(dst)],
        )?;
    }

    // loop control: run `steps` activations, then re-arm for the next run
    g.conditional(move || {
        let done = step_index.fetch_add(1, Ordering::AcqRel) + 1;
        if done >= steps {
            step_index.store(0, Ordering::Release);
            false
        } else {
            true
        }
    })?;
    Ok(g)
}

/// Shock-bubble initial data: a normal shock of the given Mach number in
/// air (quiescent right state rho = 1, p = 1) about to hit a circular
/// low-density bubble. All geometry is in physical units of `h`-spaced
/// cells.
#[derive(Debug, Clone)]
pub struct ShockBubbleConfig {
    pub mach: f64,
    pub gamma: f64,
    /// x position of the shock front.
    pub shock_x: f64,
    pub bubble_center: [f64; 2],
    pub bubble_radius: f64,
    /// Bubble density relative to the ambient state.
    pub density_ratio: f64,
    /// Cell spacing per dimension.
    pub h: [f64; 2],
}

impl Default for ShockBubbleConfig {
    fn default() -> Self {
        Self {
            mach: 3.81,
            gamma: 1.4,
            shock_x: 0.1,
            bubble_center: [0.4, 0.5],
            bubble_radius: 0.2,
            density_ratio: 0.1,
            h: [1.0, 1.0],
        }
    }
}

impl ShockBubbleConfig {
    /// Spacing that maps the tensor extents onto a unit-height domain.
    pub fn scaled_to(mut self, extents: &[usize]) -> Self {
        let hy = 1.0 / extents[1] as f64;
        self.h = [hy, hy];
        self
    }

    /// Post-shock (left) primitive state from the normal-shock relations.
    pub fn post_shock_state(&self) -> (f64, f64, f64) {
        let g = self.gamma;
        let m2 = self.mach * self.mach;
        let rho = (g + 1.0) * m2 / ((g - 1.0) * m2 + 2.0);
        let p = 1.0 + 2.0 * g / (g + 1.0) * (m2 - 1.0);
        let c1 = g.sqrt(); // sound speed of the rho = 1, p = 1 ambient state
        let u = 2.0 / (g + 1.0) * (self.mach - 1.0 / self.mach) * c1;
        (rho, p, u)
    }
}

/// Fills a conserved-state tensor with the shock-bubble configuration.
pub fn shock_bubble_init(state: &Tensor, cfg: &ShockBubbleConfig) {
    let (rho_l, p_l, u_l) = cfg.post_shock_state();
    let g = cfg.gamma;
    let exts = state.global_extents();
    for y in 0..exts.size(1) {
        for x in 0..exts.size(0) {
            let px = (x as f64 + 0.5) * cfg.h[0];
            let py = (y as f64 + 0.5) * cfg.h[1];
            let (rho, p, u) = if px < cfg.shock_x {
                (rho_l, p_l, u_l)
            } else {
                let dx = px - cfg.bubble_center[0];
                let dy = py - cfg.bubble_center[1];
                let inside = dx * dx + dy * dy <= cfg.bubble_radius * cfg.bubble_radius;
                (if inside { cfg.density_ratio } else { 1.0 }, 1.0, 0.0)
            };
            let e = p / (g - 1.0) + 0.5 * rho * u * u;
            let coords = [x, y];
            state.set_global_f64(EULER_RHO, 0, &coords, rho);
            state.set_global_f64(EULER_ENERGY, 0, &coords, e);
            state.set_global_f64(EULER_MOMENTUM, 0, &coords, rho * u);
            state.set_global_f64(EULER_MOMENTUM, 1, &coords, 0.0);
        }
    }
}

// ---------------------------------------------------------------------------
// Eikonal solver (fast iterative method)
// ---------------------------------------------------------------------------

/// Eikonal record: arrival value, speed, and FIM state tag.
pub fn eikonal_schema(layout: LayoutKind) -> RecordSchema {
    RecordSchema::new(
        vec![
            ComponentDescriptor::scalar(ScalarKind::F64),
            ComponentDescriptor::scalar(ScalarKind::F64),
            ComponentDescriptor::scalar(ScalarKind::I32),
        ],
        layout,
    )
    .unwrap()
}

pub const EIKONAL_PHI: usize = 0;
pub const EIKONAL_SPEED: usize = 1;
pub const EIKONAL_STATE: usize = 2;

pub const EIKONAL_FAR: f64 = 1.0e100;
pub const EIKONAL_TOLERANCE: f64 = 1.0e-12;

const STATE_FAR: i64 = 0;
const STATE_SOURCE: i64 = 2;

/// Godunov upwind update for the eikonal equation on a uniform grid: with
/// `a` and `b` the minimal axis-neighbor values, either the one-sided or
/// the two-sided quadratic solution.
#[inline]
pub fn eikonal_update(a: f64, b: f64, h: f64, f: f64) -> f64 {
    let hf = h / f;
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if hi - lo >= hf || hi >= EIKONAL_FAR {
        lo + hf
    } else {
        0.5 * (a + b + (2.0 * hf * hf - (a - b) * (a - b)).sqrt())
    }
}

/// Marks sources (phi = 0) and initializes every other cell to far.
pub fn eikonal_init(grid: &Tensor, sources: &[[usize; 2]], speed: f64) {
    let exts = grid.global_extents();
    for y in 0..exts.size(1) {
        for x in 0..exts.size(0) {
            let c = [x, y];
            grid.set_global_f64(EIKONAL_PHI, 0, &c, EIKONAL_FAR);
            grid.set_global_f64(EIKONAL_SPEED, 0, &c, speed);
            grid.set_global_f64(EIKONAL_STATE, 0, &c, f64::from_bits(STATE_FAR as u64));
        }
    }
    for s in sources {
        grid.set_global_f64(EIKONAL_PHI, 0, s, 0.0);
        grid.set_global_f64(EIKONAL_STATE, 0, s, f64::from_bits(STATE_SOURCE as u64));
    }
}

/// Builds the iterative solve: each activation runs a per-block active-list
/// sweep (in place, exclusive padded so halo transfers serialize against
/// the writes), records every block's largest change into `residual`, and a
/// conditional re-activates while the max-reduced change exceeds the
/// tolerance. One submission therefore converges fully.
pub fn eikonal_graph(grid: &Tensor, residual: &Tensor, h: f64) -> Result<Graph> {
    if grid.padding() < 1 {
        return Err(Error::Config("eikonal grid needs padding >= 1".into()));
    }
    let n_blocks = grid.n_blocks();
    // per-block active lists; the first activation seeds every cell
    let lists: Arc<Vec<Mutex<Vec<usize>>>> =
        Arc::new((0..n_blocks).map(|_| Mutex::new(Vec::new())).collect());
    let seeded = Arc::new(std::sync::atomic::AtomicBool::new(false));

    let mut g = Graph::default();
    {
        let lists = lists.clone();
        let seeded = seeded.clone();
        let grid_t = grid.clone();
        let residual_t = residual.clone();
        g.split_raw(
            move |ctx| {
                let max_change = eikonal_block_sweep(
                    &grid_t,
                    ctx.block,
                    h,
                    &mut lists[ctx.block].lock().unwrap(),
                    !seeded.load(Ordering::Acquire),
                );
                let rb = residual_t.block(ctx.block);
                let rs = rb.storage();
                rs.set_f64_unchecked(0, 0, rb.linear(&[0, 0, 0]), max_change);
                Ok(())
            },
            &[exclusive_padded(grid), plain(residual)],
        )?;
    }
    let change = ReductionResult::new();
    g.then_reduce(residual, &change, MaxReducer)?;
    {
        let seeded2 = seeded.clone();
        g.conditional(move || {
            seeded2.store(true, Ordering::Release);
            let again = change.value_and_reset() > EIKONAL_TOLERANCE;
            if !again {
                // re-arm for a later submission
                seeded2.store(false, Ordering::Release);
            }
            again
        })?;
    }
    Ok(g)
}

/// Residual tensor matching `grid`'s block grid: one cell per block.
pub fn eikonal_residual(grid: &Tensor) -> Result<Tensor> {
    let g = grid.grid().to_vec();
    Tensor::new(
        RecordSchema::scalar_f64(LayoutKind::Contiguous),
        crate::tensor::PartitionSpec::new(&g)?,
        0,
        crate::tensor::Extents::new(&g)?,
    )
}

/// Active-list sweep of one block. Processes the worklist to exhaustion
/// (cells whose value improves push their in-block neighbors); boundary-
/// adjacent cells are re-seeded every activation because halo data may have
/// changed. Returns the largest phi decrease seen.
fn eikonal_block_sweep(
    grid: &Tensor,
    block_idx: usize,
    h: f64,
    list: &mut Vec<usize>,
    seed_all: bool,
) -> f64 {
    let block = grid.block(block_idx);
    let nx = block.interior(0);
    let ny = block.interior(1);
    let storage = block.storage();
    let mut cursor = grid.indexed_cursor(block_idx, &storage);
    let mut in_list = vec![false; nx * ny];

    let push = |list: &mut Vec<usize>, in_list: &mut Vec<bool>, x: usize, y: usize| {
        let i = y * nx + x;
        if !in_list[i] {
            in_list[i] = true;
            list.push(i);
        }
    };
    if seed_all {
        list.clear();
        for i in 0..nx * ny {
            in_list[i] = true;
            list.push(i);
        }
    } else {
        // carry-over actives plus the halo-facing strip
        for i in std::mem::take(list) {
            push(list, &mut in_list, i % nx, i / nx);
        }
        for x in 0..nx {
            push(list, &mut in_list, x, 0);
            push(list, &mut in_list, x, ny - 1);
        }
        for y in 0..ny {
            push(list, &mut in_list, 0, y);
            push(list, &mut in_list, nx - 1, y);
        }
    }

    let mut max_change = 0.0f64;
    let mut head = 0;
    while head < list.len() {
        let i = list[head];
        head += 1;
        let (x, y) = (i % nx, i / nx);
        in_list[i] = false;
        cursor.set_pos(&[x, y]);
        let state = cursor.get_scalar(EIKONAL_STATE, 0).unwrap();
        if matches!(state, crate::layout::ScalarValue::I32(s) if s as i64 == STATE_SOURCE) {
            continue;
        }
        let read_phi = |c: &crate::iter::IndexedIterator<'_>, d: usize, off: isize| -> f64 {
            let n = c.offset(d, off);
            if n.valid_in_domain() {
                n.get(EIKONAL_PHI, 0)
            } else {
                EIKONAL_FAR
            }
        };
        let a = read_phi(&cursor, 0, -1).min(read_phi(&cursor, 0, 1));
        let b = read_phi(&cursor, 1, -1).min(read_phi(&cursor, 1, 1));
        let f = cursor.get(EIKONAL_SPEED, 0);
        let old = cursor.get(EIKONAL_PHI, 0);
        let new = eikonal_update(a, b, h, f);
        if new < old - EIKONAL_TOLERANCE {
            cursor.set(EIKONAL_PHI, 0, new);
            max_change = max_change.max(old.min(EIKONAL_FAR) - new);
            if x > 0 {
                push(&mut *list, &mut in_list, x - 1, y);
            }
            if x + 1 < nx {
                push(&mut *list, &mut in_list, x + 1, y);
            }
            if y > 0 {
                push(&mut *list, &mut in_list, x, y - 1);
            }
            if y + 1 < ny {
                push(&mut *list, &mut in_list, x, y + 1);
            }
        }
    }
    list.clear();
    max_change
}

// ---------------------------------------------------------------------------
// Central-difference stencils (double-buffered and in-place)
// ---------------------------------------------------------------------------

/// Double-buffered radius-1 central difference: out = in(+1) - in(-1),
/// clamped to one-sided differences at the physical faces.
pub fn stencil_diff_graph(input: &Tensor, out: &Tensor) -> Result<Graph> {
    let mut g = Graph::default();
    g.split(
        move |c| {
            let l = c[0].offset(0, -1);
            let r = c[0].offset(0, 1);
            let lv = if l.valid_in_domain() { l.value() } else { c[0].value() };
            let rv = if r.valid_in_domain() { r.value() } else { c[0].value() };
            c[1].set_value(rv - lv);
        },
        &[concurrent_padded(input), plain(out)],
    )?;
    Ok(g)
}

/// In-place variant writing the difference back into the same tensor; the
/// exclusive modifier serializes each block against the transfers reading
/// its interior.
pub fn stencil_diff_inplace_graph(x: &Tensor) -> Result<Graph> {
    let mut g = Graph::default();
    g.split(
        move |c| {
            let l = c[0].offset(0, -1);
            let r = c[0].offset(0, 1);
            let lv = if l.valid_in_domain() { l.value() } else { c[0].value() };
            let rv = if r.valid_in_domain() { r.value() } else { c[0].value() };
            c[0].set_value(rv - lv);
        },
        &[exclusive_padded(x)],
    )?;
    Ok(g)
}

// ---------------------------------------------------------------------------
// Scaling metrics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingMetrics {
    pub weak_eff: f64,
    pub strong_eff: f64,
}

/// Weak efficiency t1/tN*100 and strong efficiency t1/(N*tN)*100.
pub fn scaling_metrics(t1: f64, tn: f64, n: usize) -> Result<ScalingMetrics> {
    if !(t1 > 0.0) || !(tn > 0.0) {
        return Err(Error::Input(format!("times must be positive, got t1 = {t1}, tN = {tn}")));
    }
    if n < 1 {
        return Err(Error::Input("N must be >= 1".into()));
    }
    Ok(ScalingMetrics {
        weak_eff: t1 / tn * 100.0,
        strong_eff: t1 / (n as f64 * tn) * 100.0,
    })
}
