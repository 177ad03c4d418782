//! Proximal point minimisation of `E_p = G_p − F`.
//!
//! Outer loop, from `u₀ = f` with a fixed step `c`:
//!
//! 1. `w_k = F'(u_k) = (λ/σ²) r(u_k f/σ²) f`
//! 2. `y_k = u_k + c w_k`
//! 3. `u_{k+1} = (I + c ∂G_p)⁻¹(y_k)`
//! 4. stop when `‖u_{k+1} − u_k‖₂ / ‖u_k‖₂ < tol_outer`
//!
//! Step 3 minimises `R_p(u) + S(u)` with `R_p(u) = (1/p) Σ|∇u|^p` and
//! `S(u) = (λ/2σ²)‖u‖² + ‖u − y_k‖²/(2c)`, written as a saddle point over a
//! dual field `v` and solved by a primal-dual iteration
//!
//! ```text
//! v ← (I + τ_d ∂R_p*)⁻¹(v + τ_d ∇ū)
//! u⁺ ← (I + τ_p ∂S)⁻¹(u + τ_p div v)
//! ū ← 2u⁺ − u
//! ```
//!
//! For `p = 1` the dual resolvent is the projection onto unit balls; for
//! `1 < p < 2` it solves `τ_d|v|^{p'−2}v + v = v̄` pixelwise by Halley's method on the
//! magnitude. Each outer step decreases `E_p` for any `c > 0`.

use std::io::Write;

use crate::error::{domain, Error, Result};
use crate::grid::{Image, VectorField};
use crate::model::{check_p, EnergyBreakdown, RicianModel, RicianParams};
use crate::par;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Exponent of the regulariser, in `[1, 2)`.
    pub p: f64,
    /// Proximal step `c`, held fixed across outer iterations.
    pub c: f64,
    pub tol_outer: f64,
    pub tol_inner: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub tau_d: f64,
    pub tau_p: f64,
    /// Keep the dual field between outer iterations instead of resetting it.
    pub warm_start_dual: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let tau = 1.0 / 12f64.sqrt();
        SolverConfig {
            p: 1.0,
            c: 1.0,
            tol_outer: 1e-6,
            tol_inner: 1e-7,
            max_outer: 500,
            max_inner: 2000,
            tau_d: tau,
            tau_p: tau,
            warm_start_dual: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        check_p(self.p)?;
        let positive = [
            ("c", self.c),
            ("tol_outer", self.tol_outer),
            ("tol_inner", self.tol_inner),
            ("tau_d", self.tau_d),
            ("tau_p", self.tau_p),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(domain("iteration caps must be positive"));
        }
        Ok(())
    }

    pub fn with_p(&self, p: f64) -> Self {
        SolverConfig { p, ..self.clone() }
    }
}

/// One completed outer iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuterRecord {
    pub iter: usize,
    pub energy: EnergyBreakdown,
    pub rel_change: f64,
    pub inner_iterations: usize,
    pub inner_converged: bool,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub p: f64,
    pub result: Image,
    /// Energy of the starting image.
    pub initial_energy: EnergyBreakdown,
    /// Energy after each outer iteration.
    pub energy_trace: Vec<EnergyBreakdown>,
    pub rel_changes: Vec<f64>,
    pub inner_iteration_counts: Vec<usize>,
    pub inner_converged: Vec<bool>,
    pub outer_iterations: usize,
    pub converged: bool,
}

impl SolveReport {
    pub fn records(&self) -> impl Iterator<Item = OuterRecord> + '_ {
        self.energy_trace
            .iter()
            .zip(&self.rel_changes)
            .zip(&self.inner_iteration_counts)
            .zip(&self.inner_converged)
            .enumerate()
            .map(|(k, (((e, r), n), ok))| OuterRecord {
                iter: k + 1,
                energy: *e,
                rel_change: *r,
                inner_iterations: *n,
                inner_converged: *ok,
            })
    }

    pub fn final_energy(&self) -> EnergyBreakdown {
        self.energy_trace
            .last()
            .copied()
            .unwrap_or(self.initial_energy)
    }

    /// Writes the trace as CSV, header included.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for rec in self.records() {
            writeln!(out, "{}", trace_row(&rec))?;
        }
        Ok(())
    }
}

pub const TRACE_HEADER: &str = "iter,regularizer,quadratic,log_bessel,total,rel_change,inner_iters";

/// One CSV row, reals printed with 17 significant digits.
pub fn trace_row(rec: &OuterRecord) -> String {
    let e = &rec.energy;
    format!(
        "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
        rec.iter,
        e.regularizer,
        e.quadratic,
        e.log_bessel,
        e.total,
        rec.rel_change,
        rec.inner_iterations
    )
}

// Slack above unit magnitude before a dual pixel is rescaled; makes the
// projection exactly idempotent despite rounding in the rescale.
const PROJECTION_SLACK: f64 = 4.0 * f64::EPSILON;

#[inline]
fn project_pixel(x: f64, y: f64) -> (f64, f64) {
    let mag = (x * x + y * y).sqrt();
    // written as a select so the hot loop stays branch-free
    let inv = if mag > 1.0 + PROJECTION_SLACK {
        1.0 / mag
    } else {
        1.0
    };
    (x * inv, y * inv)
}

/// Pointwise projection of a dual field onto unit Euclidean balls.
pub fn project_dual_tv(vbar: &VectorField) -> VectorField {
    let mut out = vbar.clone();
    let m = out.cols();
    par::rows2(&mut out.x, &mut out.y, m, |_, rx, ry| {
        for (a, b) in rx.iter_mut().zip(ry.iter_mut()) {
            (*a, *b) = project_pixel(*a, *b);
        }
    });
    out
}

const DUAL_TOL: f64 = 1e-13;
const HALLEY_CAP: usize = 60;

/// Halley iteration for the magnitude `m ∈ [0, a]` solving `τ m^e + m = a`,
/// with `e = p' − 1`.
///
/// Starts from the upper bound `min(a, (a/τ)^{1/e})` and stays inside a sign
/// bracket, bisecting whenever a step would leave it.
#[derive(Clone, Copy)]
struct DualRoot {
    a: f64,
    m: f64,
    lo: f64,
    hi: f64,
    best: (f64, f64),
    done: bool,
}

impl DualRoot {
    fn new(a: f64, tau: f64, e: f64) -> Self {
        Self::with_guess(a, a.min((a / tau).powf(1.0 / e)))
    }

    /// Starts from `guess` when it lies strictly inside `(0, a)`, else from `a`.
    fn with_guess(a: f64, guess: f64) -> Self {
        DualRoot {
            a,
            m: if guess > 0.0 && guess < a { guess } else { a },
            lo: 0.0,
            hi: a,
            best: (f64::INFINITY, a),
            done: a == 0.0,
        }
    }

    fn step(&mut self, tau: f64, e: f64) {
        let (a, m) = (self.a, self.m);
        let pw = m.powf(e - 1.0);
        let g = tau * pw * m + m - a;
        if g.abs() < self.best.0 {
            self.best = (g.abs(), m);
        }
        if g.abs() <= DUAL_TOL * a {
            self.done = true;
            return;
        }
        if g > 0.0 {
            self.hi = m;
        } else {
            self.lo = m;
        }
        let d1 = tau * e * pw + 1.0;
        let d2 = tau * e * (e - 1.0) * pw / m;
        let mut next = m - 2.0 * g * d1 / (2.0 * d1 * d1 - g * d2);
        if !(next > self.lo && next < self.hi) {
            next = 0.5 * (self.lo + self.hi);
        }
        if (next - m).abs() <= 4.0 * f64::EPSILON * m {
            self.done = true;
        }
        self.m = next;
    }

    fn value(&self) -> f64 {
        if self.a == 0.0 {
            0.0
        } else {
            self.best.1
        }
    }
}

#[cfg(test)]
fn dual_magnitude(a: f64, tau: f64, e: f64) -> f64 {
    let mut root = DualRoot::new(a, tau, e);
    for _ in 0..HALLEY_CAP {
        if root.done {
            break;
        }
        root.step(tau, e);
    }
    root.value()
}

// Pixels advanced together; independent root solves overlap in the pipeline.
const DUAL_LANES: usize = 16;

/// Applies the `1 < p < 2` dual resolvent in place to paired component slices.
fn dual_p_slices(xs: &mut [f64], ys: &mut [f64], tau: f64, e: f64) {
    for (cx, cy) in xs.chunks_mut(DUAL_LANES).zip(ys.chunks_mut(DUAL_LANES)) {
        let mut lanes = [DualRoot::with_guess(0.0, 0.0); DUAL_LANES];
        for (k, lane) in lanes.iter_mut().enumerate().take(cx.len()) {
            *lane = DualRoot::new((cx[k] * cx[k] + cy[k] * cy[k]).sqrt(), tau, e);
        }
        solve_lanes(&mut lanes[..cx.len()], cx, cy, tau, e);
    }
}

/// Runs the lanes to convergence and rescales `(cx, cy)` by `m / a`.
fn solve_lanes(lanes: &mut [DualRoot], cx: &mut [f64], cy: &mut [f64], tau: f64, e: f64) {
    for _ in 0..HALLEY_CAP {
        let mut active = false;
        for lane in lanes.iter_mut() {
            if !lane.done {
                lane.step(tau, e);
                active |= !lane.done;
            }
        }
        if !active {
            break;
        }
    }
    for ((x, y), lane) in cx.iter_mut().zip(cy.iter_mut()).zip(lanes.iter()) {
        if lane.a > 0.0 {
            let scale = lane.value() / lane.a;
            *x *= scale;
            *y *= scale;
        } else {
            (*x, *y) = (0.0, 0.0);
        }
    }
}

/// Pixelwise resolvent of `τ_d ∂R_p*` for `1 < p < 2`: solves
/// `τ_d |v|^{p'−2} v + v = v̄` with `p' = p/(p−1)`.
pub fn resolvent_dual_p(vbar: &VectorField, tau_d: f64, p: f64) -> Result<VectorField> {
    if !(p > 1.0 && p < 2.0) {
        return Err(domain(format!("dual resolvent needs 1 < p < 2, got {p}")));
    }
    if !(tau_d.is_finite() && tau_d > 0.0) {
        return Err(domain(format!("tau_d must be positive, got {tau_d}")));
    }
    if vbar.x.iter().chain(&vbar.y).any(|v| !v.is_finite()) {
        return Err(domain("dual resolvent input is not finite"));
    }
    let e = 1.0 / (p - 1.0);
    let mut out = vbar.clone();
    let m = out.cols();
    par::rows2(&mut out.x, &mut out.y, m, |_, rx, ry| {
        dual_p_slices(rx, ry, tau_d, e)
    });
    Ok(out)
}

/// Coefficients of the closed-form resolvent of `τ_p ∂S`:
/// `u = ky·y + ku·ū`.
#[derive(Clone, Copy)]
struct SResolvent {
    ky: f64,
    ku: f64,
}

impl SResolvent {
    fn new(params: RicianParams, c: f64, tau_p: f64) -> Self {
        let s2 = params.sigma2();
        let den = c * tau_p * params.lambda() + s2 * (c + tau_p);
        SResolvent {
            ky: s2 * tau_p / den,
            ku: s2 * c / den,
        }
    }
}

/// `u = σ²(τ_p y_k + c ū) / (c τ_p λ + σ²(c + τ_p))`, pixelwise.
pub fn resolvent_s(
    ubar: &Image,
    y_k: &Image,
    params: RicianParams,
    c: f64,
    tau_p: f64,
) -> Result<Image> {
    ubar.ensure_same_shape(y_k.shape())?;
    if !(c > 0.0 && tau_p > 0.0) {
        return Err(domain("c and tau_p must be positive"));
    }
    let k = SResolvent::new(params, c, tau_p);
    let data = ubar
        .as_slice()
        .iter()
        .zip(y_k.as_slice())
        .map(|(&ub, &y)| k.ky * y + k.ku * ub)
        .collect();
    Ok(Image::from_raw(ubar.rows(), ubar.cols(), data))
}

/// `F'(u) = (λ/σ²) r(u f/σ²) f`, pixelwise.
pub fn f_gradient(u: &Image, model: &RicianModel) -> Result<Image> {
    model.datum().ensure_same_shape(u.shape())?;
    let data = u
        .as_slice()
        .iter()
        .zip(model.datum().as_slice())
        .map(|(&a, &f)| model.params.f_gradient_at(a, f))
        .collect();
    Ok(Image::from_raw(u.rows(), u.cols(), data))
}

/// Result of one proximal step.
#[derive(Clone, Debug)]
pub struct ProxOutcome {
    pub u: Image,
    /// Final dual field.
    pub dual: VectorField,
    pub iterations: usize,
    pub converged: bool,
}

/// Reusable buffers of the primal-dual inner loop.
struct PrimalDual {
    rows: usize,
    cols: usize,
    vx: Vec<f64>,
    vy: Vec<f64>,
    u: Vec<f64>,
    ubar: Vec<f64>,
}

impl PrimalDual {
    fn new(rows: usize, cols: usize) -> Self {
        let n = rows * cols;
        PrimalDual {
            rows,
            cols,
            vx: vec![0.0; n],
            vy: vec![0.0; n],
            u: vec![0.0; n],
            ubar: vec![0.0; n],
        }
    }

    /// Runs the inner iteration for `(I + c ∂G_p)⁻¹(y)`; leaves the answer in `self.u`.
    fn solve(
        &mut self,
        y: &[f64],
        params: RicianParams,
        cfg: &SolverConfig,
        reset_dual: bool,
    ) -> (usize, bool) {
        let (n, m) = (self.rows, self.cols);
        self.u.copy_from_slice(y);
        self.ubar.copy_from_slice(y);
        if reset_dual {
            self.vx.fill(0.0);
            self.vy.fill(0.0);
        }
        let s_res = SResolvent::new(params, cfg.c, cfg.tau_p);
        let (tau_d, tau_p) = (cfg.tau_d, cfg.tau_p);
        let tv = cfg.p == 1.0;
        let e = if tv { 0.0 } else { 1.0 / (cfg.p - 1.0) };

        for it in 1..=cfg.max_inner {
            let ubar = &self.ubar;
            par::rows2(&mut self.vx, &mut self.vy, m, |i, rx, ry| {
                let row = &ubar[i * m..(i + 1) * m];
                // the last row has no forward difference along i
                let next = if i + 1 < n {
                    &ubar[(i + 1) * m..(i + 2) * m]
                } else {
                    row
                };
                let ascent = |j: usize, vx: f64, vy: f64| {
                    let gy = if j + 1 < m { row[j + 1] - row[j] } else { 0.0 };
                    (vx + tau_d * (next[j] - row[j]), vy + tau_d * gy)
                };
                if tv {
                    for j in 0..m {
                        let (bx, by) = ascent(j, rx[j], ry[j]);
                        (rx[j], ry[j]) = project_pixel(bx, by);
                    }
                    return;
                }
                // the previous dual magnitude seeds each root solve
                let mut j0 = 0;
                for (cx, cy) in rx.chunks_mut(DUAL_LANES).zip(ry.chunks_mut(DUAL_LANES)) {
                    let mut lanes = [DualRoot::with_guess(0.0, 0.0); DUAL_LANES];
                    for (k, lane) in lanes.iter_mut().enumerate().take(cx.len()) {
                        let prev = (cx[k] * cx[k] + cy[k] * cy[k]).sqrt();
                        (cx[k], cy[k]) = ascent(j0 + k, cx[k], cy[k]);
                        *lane = DualRoot::with_guess((cx[k] * cx[k] + cy[k] * cy[k]).sqrt(), prev);
                    }
                    solve_lanes(&mut lanes[..cx.len()], cx, cy, tau_d, e);
                    j0 += cx.len();
                }
            });

            let (vx, vy) = (&self.vx, &self.vy);
            let parts = par::rows2(&mut self.u, &mut self.ubar, m, |i, ru, rb| {
                let (mut diff2, mut norm2) = (0.0, 0.0);
                let yr = &y[i * m..(i + 1) * m];
                let xr = &vx[i * m..(i + 1) * m];
                let yv = &vy[i * m..(i + 1) * m];
                let xp = (i > 0).then(|| &vx[(i - 1) * m..i * m]);
                let last_row = i + 1 == n;
                for j in 0..m {
                    let mut div = if last_row { 0.0 } else { xr[j] };
                    if let Some(xp) = xp {
                        div -= xp[j];
                    }
                    if j + 1 < m {
                        div += yv[j];
                    }
                    if j > 0 {
                        div -= yv[j - 1];
                    }
                    let old = ru[j];
                    let new = s_res.ky * yr[j] + s_res.ku * (old + tau_p * div);
                    diff2 += (new - old) * (new - old);
                    norm2 += old * old;
                    rb[j] = 2.0 * new - old;
                    ru[j] = new;
                }
                (diff2, norm2)
            });
            let diff = parts.iter().fold(0.0, |a, p| a + p.0).sqrt();
            let norm = parts.iter().fold(0.0, |a, p| a + p.1).sqrt();
            if diff / norm.max(1e-12) < cfg.tol_inner {
                return (it, true);
            }
        }
        (cfg.max_inner, false)
    }
}

/// Approximates `(I + c ∂G_p)⁻¹(y_k)` with the primal-dual iteration started
/// from `u⁰ = y_k`, `v⁰ = 0`. When `max_inner` is hit the last iterate is
/// returned with `converged = false`.
pub fn prox_g(y_k: &Image, params: RicianParams, cfg: &SolverConfig) -> Result<ProxOutcome> {
    cfg.validate()?;
    let (n, m) = y_k.shape();
    let mut pd = PrimalDual::new(n, m);
    let (iterations, converged) = pd.solve(y_k.as_slice(), params, cfg, true);
    Ok(ProxOutcome {
        u: Image::from_raw(n, m, pd.u),
        dual: VectorField::new(n, m, pd.vx, pd.vy)?,
        iterations,
        converged,
    })
}

/// Runs the proximal point algorithm from `u₀ = f`.
pub fn ppa_denoise(model: &RicianModel, cfg: &SolverConfig) -> Result<SolveReport> {
    ppa_denoise_with(model, cfg, None, |_| {})
}

/// [`ppa_denoise`] with an optional starting image and a callback invoked
/// after every outer iteration.
pub fn ppa_denoise_with(
    model: &RicianModel,
    cfg: &SolverConfig,
    start: Option<&Image>,
    mut observer: impl FnMut(&OuterRecord),
) -> Result<SolveReport> {
    cfg.validate()?;
    let f = model.datum();
    let (n, m) = f.shape();
    let mut u = match start {
        Some(s) => {
            f.ensure_same_shape(s.shape())?;
            s.clone()
        }
        None => f.clone(),
    };
    let params = model.params;
    let initial_energy = model.energy(&u, cfg.p)?;

    let mut pd = PrimalDual::new(n, m);
    let mut y = vec![0.0; n * m];
    let mut report = SolveReport {
        p: cfg.p,
        result: u.clone(),
        initial_energy,
        energy_trace: Vec::new(),
        rel_changes: Vec::new(),
        inner_iteration_counts: Vec::new(),
        inner_converged: Vec::new(),
        outer_iterations: 0,
        converged: false,
    };

    for k in 1..=cfg.max_outer {
        let (us, fs, c) = (u.as_slice(), f.as_slice(), cfg.c);
        par::rows1(&mut y, m, |i, row| {
            for (j, yv) in row.iter_mut().enumerate() {
                let idx = i * m + j;
                *yv = us[idx] + c * params.f_gradient_at(us[idx], fs[idx]);
            }
        });
        let reset = !cfg.warm_start_dual || k == 1;
        let (inner_iterations, inner_converged) = pd.solve(&y, params, cfg, reset);

        let diff = step_distance(us, &pd.u, m);
        let norm = u.norm2();
        let rel_change = if norm >= 1e-12 { diff / norm } else { diff };
        u.as_mut_slice().copy_from_slice(&pd.u);
        if u.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!(
                "solver diverged at outer iteration {k}"
            )));
        }

        let energy = model.energy(&u, cfg.p)?;
        let rec = OuterRecord {
            iter: k,
            energy,
            rel_change,
            inner_iterations,
            inner_converged,
        };
        observer(&rec);
        report.energy_trace.push(energy);
        report.rel_changes.push(rel_change);
        report.inner_iteration_counts.push(inner_iterations);
        report.inner_converged.push(inner_converged);
        report.outer_iterations = k;
        if rel_change < cfg.tol_outer {
            report.converged = true;
            break;
        }
    }
    report.result = u;
    Ok(report)
}

fn step_distance(a: &[f64], b: &[f64], m: usize) -> f64 {
    let parts = par::rows_ro(a.len() / m, |i| {
        let mut acc = 0.0;
        for k in i * m..(i + 1) * m {
            acc += (a[k] - b[k]) * (a[k] - b[k]);
        }
        acc
    });
    par::ordered_sum(&parts).sqrt()
}

/// Runs [`ppa_denoise`] once per exponent, sharing `λ` and every other
/// setting. Reports come back in the order of `ps`.
pub fn p_sweep(model: &RicianModel, base: &SolverConfig, ps: &[f64]) -> Result<Vec<SolveReport>> {
    let cfgs: Vec<SolverConfig> = ps.iter().map(|&p| base.with_p(p)).collect();
    for cfg in &cfgs {
        cfg.validate()?;
    }
    par::map_items(&cfgs, |cfg| ppa_denoise(model, cfg))
        .into_iter()
        .collect()
}
