//! Thin wrapper over the DOP853 integrator of `ode_solvers`.
//!
//! Right-hand sides should be autonomous: the stage abscissae of the
//! wrapped integrator are off, so explicit time dependence loses several
//! digits. Carry time as a state component instead.
//!
//! Components flagged in `angle_mask` are angles: they are reduced mod 2pi
//! at chunk boundaries while integrating, so the relative tolerance is not
//! loosened by an unwrapped angle growing along the solution. Reported
//! states are unwrapped.

use std::cell::Cell;

use nalgebra::SVector;
use ode_solvers::{Dop853, OutputType, System};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: u32,
    /// bit `k` set: component `k` is an angle
    pub angle_mask: u32,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 5_000_000, angle_mask: 0 }
    }
}

/// Longest stretch integrated before angles are reduced again.
const ANGLE_CHUNK: f64 = 8.0;

fn angle_offsets<const N: usize>(y: &SVector<f64, N>, mask: u32) -> SVector<f64, N> {
    let two_pi = 2.0 * std::f64::consts::PI;
    SVector::<f64, N>::from_fn(|k, _| if k < 32 && mask >> k & 1 == 1 { (y[k] / two_pi).round() * two_pi } else { 0.0 })
}

#[derive(Debug, Clone, Copy, Default, serde::Serialize)]
pub struct OdeStats {
    pub evaluations: u64,
    pub accepted: u64,
    pub rejected: u64,
}

impl OdeStats {
    fn add(&mut self, s: ode_solvers::dop_shared::Stats) {
        self.evaluations += u64::from(s.num_eval);
        self.accepted += u64::from(s.accepted_steps);
        self.rejected += u64::from(s.rejected_steps);
    }
}

pub type Rhs<'a, const N: usize> = &'a (dyn Fn(f64, &SVector<f64, N>) -> SVector<f64, N> + Sync);
pub type Stop<'a, const N: usize> = &'a (dyn Fn(&SVector<f64, N>) -> bool + Sync);

struct Sys<'a, const N: usize> {
    rhs: Rhs<'a, N>,
    stop: Stop<'a, N>,
    stopped: &'a Cell<Option<(f64, SVector<f64, N>)>>,
}

impl<const N: usize> System<f64, SVector<f64, N>> for Sys<'_, N> {
    fn system(&self, x: f64, y: &SVector<f64, N>, dy: &mut SVector<f64, N>) {
        *dy = (self.rhs)(x, y);
    }

    fn solout(&mut self, x: f64, y: &SVector<f64, N>, _dy: &SVector<f64, N>) -> bool {
        if (self.stop)(y) {
            self.stopped.set(Some((x, *y)));
            return true;
        }
        false
    }
}

/// Outcome of an integration: accepted steps (including the start) and,
/// when the stop predicate fired, where.
pub struct OdeRun<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<SVector<f64, N>>,
    pub stats: OdeStats,
    pub stopped: Option<(f64, SVector<f64, N>)>,
}

fn map_err(e: ode_solvers::dop_shared::IntegrationError) -> Error {
    Error::Integrator(e.to_string())
}

/// Integrates from `s0` to `s1` (either direction), recording every
/// accepted step.
pub fn solve<const N: usize>(
    rhs: Rhs<'_, N>,
    stop: Stop<'_, N>,
    y0: SVector<f64, N>,
    s0: f64,
    s1: f64,
    opts: OdeOptions,
) -> Result<OdeRun<N>> {
    if opts.angle_mask == 0 || (s1 - s0).abs() <= ANGLE_CHUNK {
        let off = angle_offsets(&y0, opts.angle_mask);
        let mut run = solve_plain(rhs, stop, y0 - off, s0, s1, opts)?;
        run.states.iter_mut().for_each(|y| *y += off);
        if let Some((_, y)) = run.stopped.as_mut() {
            *y += off;
        }
        return Ok(run);
    }
    let chunks = ((s1 - s0).abs() / ANGLE_CHUNK).ceil() as usize;
    let mut times = vec![s0];
    let mut states = vec![y0];
    let mut stats = OdeStats::default();
    let mut y = y0;
    for k in 0..chunks {
        let a = s0 + (s1 - s0) * k as f64 / chunks as f64;
        let b = if k + 1 == chunks { s1 } else { s0 + (s1 - s0) * (k + 1) as f64 / chunks as f64 };
        let off = angle_offsets(&y, opts.angle_mask);
        let run = solve_plain(rhs, stop, y - off, a, b, opts)?;
        stats.evaluations += run.stats.evaluations;
        stats.accepted += run.stats.accepted;
        stats.rejected += run.stats.rejected;
        times.extend_from_slice(&run.times[1..]);
        states.extend(run.states[1..].iter().map(|z| z + off));
        if let Some((x, z)) = run.stopped {
            return Ok(OdeRun { times, states, stats, stopped: Some((x, z + off)) });
        }
        y = *states.last().unwrap();
    }
    Ok(OdeRun { times, states, stats, stopped: None })
}

fn solve_plain<const N: usize>(
    rhs: Rhs<'_, N>,
    stop: Stop<'_, N>,
    y0: SVector<f64, N>,
    s0: f64,
    s1: f64,
    opts: OdeOptions,
) -> Result<OdeRun<N>> {
    let stopped = Cell::new(None);
    let mut times = vec![s0];
    let mut states = vec![y0];
    let mut stats = OdeStats::default();
    if s1 != s0 {
        let sys = Sys { rhs, stop, stopped: &stopped };
        let mut solver = Dop853::from_param(
            sys,
            s0,
            s1,
            0.0,
            y0,
            opts.rtol,
            opts.atol,
            0.9,
            0.0,
            0.333,
            6.0,
            (s1 - s0).abs(),
            0.0,
            opts.max_steps,
            u32::MAX,
            OutputType::Sparse,
        );
        stats.add(solver.integrate().map_err(map_err)?);
        let (x, y) = solver.results().get();
        for (xi, yi) in x.iter().zip(y) {
            if *xi != s0 {
                times.push(*xi);
                states.push(*yi);
            }
        }
    }
    Ok(OdeRun { times, states, stats, stopped: stopped.get() })
}

/// States at the given monotone grid, integrating segment by segment.
pub fn solve_grid<const N: usize>(
    rhs: Rhs<'_, N>,
    stop: Stop<'_, N>,
    y0: SVector<f64, N>,
    grid: &[f64],
    opts: OdeOptions,
) -> Result<OdeRun<N>> {
    let mut states = vec![y0];
    let mut stats = OdeStats::default();
    let mut y = y0;
    for w in grid.windows(2) {
        let run = solve(rhs, stop, y, w[0], w[1], opts)?;
        stats.evaluations += run.stats.evaluations;
        stats.accepted += run.stats.accepted;
        stats.rejected += run.stats.rejected;
        if run.stopped.is_some() {
            let n = states.len();
            return Ok(OdeRun { times: grid[..n].to_vec(), states, stats, stopped: run.stopped });
        }
        y = *run.states.last().unwrap();
        states.push(y);
    }
    Ok(OdeRun { times: grid.to_vec(), states, stats, stopped: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_period() {
        let rhs = |_s: f64, y: &SVector<f64, 2>| SVector::<f64, 2>::new(y[1], -y[0]);
        let stop = |_y: &SVector<f64, 2>| false;
        let y0 = SVector::<f64, 2>::new(1.0, 0.0);
        let run = solve(&rhs, &stop, y0, 0.0, 2.0 * std::f64::consts::PI, OdeOptions::default()).unwrap();
        let y = run.states.last().unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-9);
        let back = solve(&rhs, &stop, *y, 2.0 * std::f64::consts::PI, 0.0, OdeOptions::default()).unwrap();
        assert!((back.states.last().unwrap() - y0).norm() < 1e-9);
        let grid = crate::numerics::linspace(0.0, 1.0, 10);
        let g = solve_grid(&rhs, &stop, y0, &grid, OdeOptions::default()).unwrap();
        assert!((g.states[10][0] - 1f64.cos()).abs() < 1e-10);
    }

    #[test]
    fn time_as_state_integrates_quadrature() {
        let rhs = |_s: f64, y: &SVector<f64, 2>| SVector::<f64, 2>::new(y[1].cos(), 1.0);
        let stop = |_y: &SVector<f64, 2>| false;
        let run = solve(&rhs, &stop, SVector::<f64, 2>::zeros(), 0.0, 3.0, OdeOptions::default()).unwrap();
        assert!((run.states.last().unwrap()[0] - 3f64.sin()).abs() < 1e-11);
        assert!(run.times.len() < 200);
    }

    #[test]
    fn angle_components_are_reported_unwrapped() {
        // uniform rotation: the angle reaches ~100 while the chunks stay reduced
        let rhs = |_s: f64, _y: &SVector<f64, 2>| SVector::<f64, 2>::new(1.0, 0.0);
        let stop = |_y: &SVector<f64, 2>| false;
        let opts = OdeOptions { angle_mask: 0b1, ..Default::default() };
        let run = solve(&rhs, &stop, SVector::<f64, 2>::new(3.0, 0.5), 0.0, 100.0, opts).unwrap();
        assert!((run.states.last().unwrap()[0] - 103.0).abs() < 1e-10);
        assert!(run.times.windows(2).all(|w| w[1] > w[0]));
        assert!(run.states.windows(2).all(|w| w[1][0] > w[0][0]));
    }
}
