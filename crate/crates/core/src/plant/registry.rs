// SPDX-License-Identifier: Apache-2.0

//! Named scalar variables the plant exposes to the mirror protocol.

use std::collections::HashMap;
use std::sync::OnceLock;

use super::{PlantOutputs, PlantState};

/// Number of read-only probe sensors (`probe_00_c` … `probe_95_c`).
pub const PROBE_COUNT: usize = 96;

pub(crate) const POWER_RANGE: (f64, f64) = (0.0, 3600.0);
pub(crate) const TEMP_RANGE: (f64, f64) = (0.0, 400.0);
pub(crate) const SG_PRESSURE_RANGE: (f64, f64) = (0.05, 12.0);
pub(crate) const LEVEL_RANGE: (f64, f64) = (0.0, 20.0);
pub(crate) const CW_OUT_RANGE: (f64, f64) = (0.0, 100.0);
const CW_IN_RANGE: (f64, f64) = (0.0, 40.0);
const LOOP_TEMP_RANGE: (f64, f64) = (0.0, 450.0);
const FRACTION: (f64, f64) = (0.0, 1.0);
// f64 represents every integer below 2^53 exactly
const CLOCK_RANGE: (f64, f64) = (0.0, 9_007_199_254_740_992.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    ReadOnly,
    ReadWrite,
}

impl Access {
    pub fn code(self) -> &'static str {
        match self {
            Access::ReadOnly => "ro",
            Access::ReadWrite => "rw",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableDescriptor {
    pub name: String,
    pub unit: String,
    pub access: Access,
    pub min: f64,
    pub max: f64,
}

impl VariableDescriptor {
    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }
}

/// Index into [`registry`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(pub usize);

#[derive(Clone, Copy)]
enum Source {
    Value(fn(&PlantState, &PlantOutputs) -> f64),
    Probe(usize),
}

struct Entry {
    desc: VariableDescriptor,
    source: Source,
    write: Option<fn(&mut PlantState, f64)>,
}

struct Table {
    entries: Vec<Entry>,
    descriptors: Vec<VariableDescriptor>,
    index: HashMap<String, VarId>,
}

fn ro(name: &str, unit: &str, range: (f64, f64), f: fn(&PlantState, &PlantOutputs) -> f64) -> Entry {
    Entry {
        desc: VariableDescriptor {
            name: name.into(),
            unit: unit.into(),
            access: Access::ReadOnly,
            min: range.0,
            max: range.1,
        },
        source: Source::Value(f),
        write: None,
    }
}

fn rw(
    name: &str,
    unit: &str,
    range: (f64, f64),
    f: fn(&PlantState, &PlantOutputs) -> f64,
    w: fn(&mut PlantState, f64),
) -> Entry {
    Entry {
        desc: VariableDescriptor {
            name: name.into(),
            unit: unit.into(),
            access: Access::ReadWrite,
            min: range.0,
            max: range.1,
        },
        source: Source::Value(f),
        write: Some(w),
    }
}

fn build() -> Table {
    let mut entries = vec![
        rw("cond_cw_in_c", "degC", CW_IN_RANGE, |s, _| s.inputs.cw_in_c, |s, v| s.inputs.cw_in_c = v),
        ro("cond_cw_out_c", "degC", CW_OUT_RANGE, |s, _| s.cw_out_c),
        ro("core_power_mw", "MW", POWER_RANGE, |s, _| s.p_mw),
        ro("gen_power_mwe", "MW", (0.0, 2000.0), |_, o| o.gen_power_mwe),
        ro("pzr_pressure_mpa", "MPa", (0.0, 25.0), |_, o| o.pzr_pressure_mpa),
        rw("rcp1_speed", "frac", FRACTION, |s, _| s.inputs.rcp_speed[0], |s, v| s.inputs.rcp_speed[0] = v),
        rw("rcp2_speed", "frac", FRACTION, |s, _| s.inputs.rcp_speed[1], |s, v| s.inputs.rcp_speed[1] = v),
        rw("rod_position", "frac", FRACTION, |s, _| s.inputs.rod_position, |s, v| s.inputs.rod_position = v),
        ro("sg1_feed_flow_kgps", "kg/s", (0.0, 1250.0), |_, o| o.feed_flow_kgps[0]),
        rw("sg1_feed_valve", "frac", FRACTION, |s, _| s.inputs.sg_feed_valve[0], |s, v| {
            s.inputs.sg_feed_valve[0] = v
        }),
        ro("sg1_level_m", "m", LEVEL_RANGE, |s, _| s.l_sg_m[0]),
        ro("sg2_feed_flow_kgps", "kg/s", (0.0, 1250.0), |_, o| o.feed_flow_kgps[1]),
        rw("sg2_feed_valve", "frac", FRACTION, |s, _| s.inputs.sg_feed_valve[1], |s, v| {
            s.inputs.sg_feed_valve[1] = v
        }),
        ro("sg2_level_m", "m", LEVEL_RANGE, |s, _| s.l_sg_m[1]),
        ro("sg_pressure_mpa", "MPa", SG_PRESSURE_RANGE, |s, _| s.p_sg_mpa),
        ro("sg_tsat_c", "degC", TEMP_RANGE, |_, o| o.t_sat_c),
        ro("sim_time_ms", "ms", CLOCK_RANGE, |s, _| s.sim_time_ms as f64),
        ro("steam_flow_kgps", "kg/s", (0.0, 4000.0), |_, o| o.steam_flow_kgps),
        ro("t_avg_c", "degC", TEMP_RANGE, |s, _| s.t_avg_c),
        ro("t_cold_c", "degC", LOOP_TEMP_RANGE, |_, o| o.t_cold_c),
        ro("t_hot_c", "degC", LOOP_TEMP_RANGE, |_, o| o.t_hot_c),
        rw("turbine_throttle", "frac", FRACTION, |s, _| s.inputs.turbine_throttle, |s, v| {
            s.inputs.turbine_throttle = v
        }),
    ];
    for k in 0..PROBE_COUNT {
        entries.push(Entry {
            desc: VariableDescriptor {
                name: format!("probe_{k:02}_c"),
                unit: "degC".into(),
                access: Access::ReadOnly,
                min: CW_OUT_RANGE.0,
                max: CW_OUT_RANGE.1,
            },
            source: Source::Probe(k),
            write: None,
        });
    }
    entries.sort_by(|a, b| a.desc.name.cmp(&b.desc.name));
    let descriptors: Vec<_> = entries.iter().map(|e| e.desc.clone()).collect();
    let index = descriptors.iter().enumerate().map(|(i, d)| (d.name.clone(), VarId(i))).collect();
    Table { entries, descriptors, index }
}

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(build)
}

/// All variables, sorted by name.
pub fn registry() -> &'static [VariableDescriptor] {
    &table().descriptors
}

pub(crate) fn lookup(name: &str) -> Option<VarId> {
    table().index.get(name).copied()
}

pub(crate) fn descriptor(id: VarId) -> &'static VariableDescriptor {
    &table().descriptors[id.0]
}

/// Probes sit evenly along the condenser path: probe k reads the
/// circulating-water temperature after (k+1)/96 of the heat pickup, so the
/// last probe equals the outlet temperature.
fn probe_value(k: usize, s: &PlantState) -> f64 {
    let frac = (k + 1) as f64 / PROBE_COUNT as f64;
    s.inputs.cw_in_c + (s.cw_out_c - s.inputs.cw_in_c) * frac
}

pub(crate) fn read(id: VarId, s: &PlantState, out: &PlantOutputs) -> f64 {
    let e = &table().entries[id.0];
    let v = match e.source {
        Source::Value(f) => f(s, out),
        Source::Probe(k) => probe_value(k, s),
    };
    e.desc.clamp(v)
}

pub(crate) fn write(id: VarId, s: &mut PlantState, value: f64) -> f64 {
    let e = &table().entries[id.0];
    let applied = e.desc.clamp(value);
    if let Some(w) = e.write {
        w(s, applied);
    }
    applied
}

pub(crate) fn clamp_stored(s: &mut PlantState) {
    s.p_mw = s.p_mw.clamp(POWER_RANGE.0, POWER_RANGE.1);
    s.t_avg_c = s.t_avg_c.clamp(TEMP_RANGE.0, TEMP_RANGE.1);
    s.p_sg_mpa = s.p_sg_mpa.clamp(SG_PRESSURE_RANGE.0, SG_PRESSURE_RANGE.1);
    for l in &mut s.l_sg_m {
        *l = l.clamp(LEVEL_RANGE.0, LEVEL_RANGE.1);
    }
    s.cw_out_c = s.cw_out_c.clamp(CW_OUT_RANGE.0, CW_OUT_RANGE.1);
}
