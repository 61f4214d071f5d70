//! Logical-time pipeline schedules.
//!
//! One slot is one forward or backward pass of one stage. Stage `i` may start
//! a forward pass for microbatch `k` once stage `i−1` finished it and `τ`
//! slots of communication latency elapsed; backward passes flow the other
//! way. The backward wavefront only starts after the whole forward wavefront
//! is done, so with `τ = 0` a bubbling schedule takes exactly `2(K + Δ − 1)`.

mod executor;

use std::fmt;

use crate::error::{invalid, Result};

pub use executor::{simulate_erm_iteration, simulate_iteration, PipelineExecutor, PipelineOutput};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PassKind {
    Forward,
    Backward,
}

impl fmt::Display for PassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PassKind::Forward => "forward",
            PassKind::Backward => "backward",
        })
    }
}

/// One unit of work: stage `unit` runs a pass for `microbatch` at `slot`.
/// Units, slots and microbatches are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScheduleCell {
    pub unit: usize,
    pub slot: usize,
    pub kind: PassKind,
    pub microbatch: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleMode {
    Bubbling,
    Nse,
    GpipeErm,
}

#[derive(Clone, Debug)]
pub struct PipelineSchedule {
    cells: Vec<ScheduleCell>,
    stages: usize,
    microbatches: usize,
    comm_delay: usize,
    makespan: usize,
    mode: ScheduleMode,
    /// Microbatches per sample in ERM mode.
    per_sample: usize,
}

impl PipelineSchedule {
    /// Wraps hand-built cells; call [`PipelineSchedule::validate`] to check them.
    pub fn from_cells(cells: Vec<ScheduleCell>, stages: usize, microbatches: usize, comm_delay: usize) -> Self {
        let makespan = cells.iter().map(|c| c.slot).max().unwrap_or(0);
        Self {
            cells,
            stages,
            microbatches,
            comm_delay,
            makespan,
            mode: ScheduleMode::Bubbling,
            per_sample: microbatches,
        }
    }

    pub fn cells(&self) -> &[ScheduleCell] {
        &self.cells
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn microbatches(&self) -> usize {
        self.microbatches
    }

    pub fn comm_delay(&self) -> usize {
        self.comm_delay
    }

    pub fn makespan(&self) -> usize {
        self.makespan
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    /// `(sample, k)` for a flattened ERM microbatch index, both 1-based.
    pub fn sample_of(&self, microbatch: usize) -> (usize, usize) {
        ((microbatch - 1) / self.per_sample + 1, (microbatch - 1) % self.per_sample + 1)
    }

    /// Busy fraction of each unit: busy slots / makespan.
    pub fn utilization(&self) -> Vec<f64> {
        let mut busy = vec![0usize; self.stages];
        for c in &self.cells {
            if (1..=self.stages).contains(&c.unit) {
                busy[c.unit - 1] += 1;
            }
        }
        busy.iter()
            .map(|&b| if self.makespan == 0 { 0.0 } else { b as f64 / self.makespan as f64 })
            .collect()
    }

    /// Checks slot/unit/microbatch ranges, per-(unit, slot) exclusivity, the
    /// forward and backward data dependencies, and that every pass appears
    /// exactly once. Reports the first violation in slot order.
    pub fn validate(&self) -> std::result::Result<(), Violation> {
        let mut order: Vec<&ScheduleCell> = self.cells.iter().collect();
        order.sort_unstable_by_key(|c| (c.slot, c.unit, c.kind, c.microbatch));

        // slot of each (kind, unit, microbatch) pass seen so far
        let index = |kind: PassKind, unit: usize, mb: usize| {
            (kind as usize * self.stages + unit - 1) * self.microbatches + mb - 1
        };
        let mut seen: Vec<Option<usize>> = vec![None; 2 * self.stages * self.microbatches];
        let lag = 1 + self.comm_delay;
        let mut previous: Option<&ScheduleCell> = None;
        for c in &order {
            let fail = |kind| Err(Violation { kind, cell: **c });
            if c.slot == 0 || c.unit == 0 || c.unit > self.stages || c.microbatch == 0 || c.microbatch > self.microbatches {
                return fail(ViolationKind::OutOfRange);
            }
            // sorted by (slot, unit): a busy unit shows up as adjacent cells
            if previous.is_some_and(|p| p.slot == c.slot && p.unit == c.unit) {
                return fail(ViolationKind::UnitBusy);
            }
            previous = Some(c);
            if seen[index(c.kind, c.unit, c.microbatch)].is_some() {
                return fail(ViolationKind::Duplicate);
            }
            let ready = |kind, unit, offset: usize| seen[index(kind, unit, c.microbatch)].is_some_and(|s| s + offset <= c.slot);
            match c.kind {
                PassKind::Forward => {
                    if c.unit > 1 && !ready(PassKind::Forward, c.unit - 1, lag) {
                        return fail(ViolationKind::ForwardDependency);
                    }
                }
                PassKind::Backward => {
                    if !ready(PassKind::Forward, c.unit, 1) {
                        return fail(ViolationKind::BackwardBeforeForward);
                    }
                    if c.unit < self.stages && !ready(PassKind::Backward, c.unit + 1, lag) {
                        return fail(ViolationKind::BackwardDependency);
                    }
                }
            }
            seen[index(c.kind, c.unit, c.microbatch)] = Some(c.slot);
        }
        for unit in 1..=self.stages {
            for mb in 1..=self.microbatches {
                for kind in [PassKind::Forward, PassKind::Backward] {
                    if seen[index(kind, unit, mb)].is_none() {
                        return Err(Violation {
                            kind: ViolationKind::Missing,
                            cell: ScheduleCell {
                                unit,
                                slot: 0,
                                kind,
                                microbatch: mb,
                            },
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// `unit,slot,kind,microbatch` rows sorted by slot then unit.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("unit,slot,kind,microbatch\n");
        for c in &self.cells {
            out.push_str(&format!("{},{},{},{}\n", c.unit, c.slot, c.kind, c.microbatch));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    OutOfRange,
    UnitBusy,
    Duplicate,
    ForwardDependency,
    BackwardDependency,
    BackwardBeforeForward,
    Missing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub cell: ScheduleCell,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} at unit {}, microbatch {} ({} pass, slot {})",
            self.kind, self.cell.unit, self.cell.microbatch, self.cell.kind, self.cell.slot
        )
    }
}

/// Runs the as-early-as-possible forward wavefront of `k` microbatches
/// through `delta` stages, calling `visit(stage, microbatch, slot)` with
/// 0-based indices. Returns the slot of the last forward cell.
fn wavefront(delta: usize, k: usize, tau: usize, mut visit: impl FnMut(usize, usize, usize)) -> usize {
    let lag = 1 + tau;
    // previous stage's slots, overwritten in place
    let mut row = vec![0usize; k];
    for i in 0..delta {
        for j in 0..k {
            let mut s = 1;
            if j > 0 {
                s = s.max(row[j - 1] + 1);
            }
            if i > 0 {
                s = s.max(row[j] + lag);
            }
            row[j] = s;
            visit(i, j, s);
        }
    }
    row[k - 1]
}

/// Makespan of [`bubbling_schedule`] without building its cells.
pub fn bubbling_makespan(delta: usize, k: usize, tau: usize) -> Result<usize> {
    if delta == 0 || k == 0 {
        return Err(invalid("pipeline needs delta >= 1 and k >= 1"));
    }
    // the backward wavefront mirrors the forward one, shifted past its end
    Ok(2 * wavefront(delta, k, tau, |_, _, _| {}))
}

/// Forward wavefront of `k` microbatches through `delta` stages, then the
/// backward wavefront, each placed as early as its dependencies allow.
pub fn bubbling_schedule(delta: usize, k: usize, tau: usize) -> Result<PipelineSchedule> {
    if delta == 0 || k == 0 {
        return Err(invalid("pipeline needs delta >= 1 and k >= 1"));
    }
    let mut fwd = vec![0usize; delta * k];
    let forward_end = wavefront(delta, k, tau, |i, j, s| fwd[i * k + j] = s);
    let makespan = 2 * forward_end;
    // backward of stage i on microbatch j mirrors forward of stage delta-1-i
    let slot_of = |kind: PassKind, i: usize, j: usize| match kind {
        PassKind::Forward => fwd[i * k + j],
        PassKind::Backward => forward_end + fwd[(delta - 1 - i) * k + j],
    };
    // counting sort by slot; forward and backward slots never overlap and
    // cells are visited in unit order, so ties come out sorted by unit
    let mut starts = vec![0usize; makespan + 2];
    for kind in [PassKind::Forward, PassKind::Backward] {
        for i in 0..delta {
            for j in 0..k {
                starts[slot_of(kind, i, j) + 1] += 1;
            }
        }
    }
    for s in 1..starts.len() {
        starts[s] += starts[s - 1];
    }
    let blank = ScheduleCell {
        unit: 0,
        slot: 0,
        kind: PassKind::Forward,
        microbatch: 0,
    };
    let mut cells = vec![blank; 2 * delta * k];
    for kind in [PassKind::Forward, PassKind::Backward] {
        for i in 0..delta {
            for j in 0..k {
                let slot = slot_of(kind, i, j);
                cells[starts[slot]] = ScheduleCell {
                    unit: i + 1,
                    slot,
                    kind,
                    microbatch: j + 1,
                };
                starts[slot] += 1;
            }
        }
    }
    Ok(PipelineSchedule {
        cells,
        stages: delta,
        microbatches: k,
        comm_delay: tau,
        makespan,
        mode: ScheduleMode::Bubbling,
        per_sample: k,
    })
}

/// One gradient computed sequentially: forward through every stage, then
/// backward. Costs `2Δ` slots.
pub fn nse_schedule(delta: usize) -> Result<PipelineSchedule> {
    let mut s = bubbling_schedule(delta, 1, 0)?;
    s.mode = ScheduleMode::Nse;
    Ok(s)
}

/// `m` samples with `k` microbatches each, pipelined as `m·k` injections.
/// Makespan of [`gpipe_erm_schedule`] without building its cells.
pub fn gpipe_erm_makespan(delta: usize, m: usize, k: usize) -> Result<usize> {
    if m == 0 {
        return Err(invalid("ERM schedule needs m >= 1"));
    }
    bubbling_makespan(delta, m * k, 0)
}

pub fn gpipe_erm_schedule(delta: usize, m: usize, k: usize) -> Result<PipelineSchedule> {
    if m == 0 {
        return Err(invalid("ERM schedule needs m >= 1"));
    }
    let mut s = bubbling_schedule(delta, m * k, 0)?;
    s.mode = ScheduleMode::GpipeErm;
    s.per_sample = k;
    Ok(s)
}

pub fn utilization(schedule: &PipelineSchedule) -> Vec<f64> {
    schedule.utilization()
}

pub fn validate(schedule: &PipelineSchedule) -> std::result::Result<(), Violation> {
    schedule.validate()
}
