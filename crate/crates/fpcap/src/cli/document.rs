//! Solution documents: a flat JSON schema for saved saddle solutions.
//!
//! JSON is the canonical format and is written by hand so the byte layout is
//! deterministic: fixed field order, two-space indentation, and every float
//! rendered with 17 significant digits (`{:.16e}`), which round-trips `f64`
//! exactly. CSV output is a derived layout with the same precision.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::payoff::{CoalitionSize, CodeDistribution, CollusionChannel, SupportAtom};
use crate::solver::{MethodTag, SaddleSolution, SolverOptions};
use crate::util;

pub const SCHEMA_VERSION: &str = "1";

/// 17-significant-digit rendering; parses back to the identical `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct DocumentAtom {
    pub w: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct OptionsEcho {
    pub tolerance: f64,
    pub w_grid: usize,
    pub max_outer_iterations: usize,
    pub atom_merge_distance: f64,
    pub newton_enabled: bool,
    pub seed: u64,
}

impl From<&SolverOptions> for OptionsEcho {
    fn from(o: &SolverOptions) -> Self {
        Self {
            tolerance: o.tolerance,
            w_grid: o.w_grid,
            max_outer_iterations: o.max_outer_iterations,
            atom_merge_distance: o.atom_merge_distance,
            newton_enabled: o.newton_enabled,
            seed: o.seed,
        }
    }
}

impl From<&OptionsEcho> for SolverOptions {
    fn from(e: &OptionsEcho) -> Self {
        Self {
            tolerance: e.tolerance,
            w_grid: e.w_grid,
            max_outer_iterations: e.max_outer_iterations,
            atom_merge_distance: e.atom_merge_distance,
            newton_enabled: e.newton_enabled,
            seed: e.seed,
        }
    }
}

/// Saved form of a [`SaddleSolution`] plus the options that produced it.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SolutionDocument {
    pub schema_version: String,
    pub k: usize,
    pub capacity_bits: f64,
    pub channel: Vec<f64>,
    pub support: Vec<DocumentAtom>,
    pub maxmin: f64,
    pub minmax: f64,
    pub gap: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub method: String,
    pub options: OptionsEcho,
    pub timestamp: String,
    pub tool_version: String,
}

impl SolutionDocument {
    pub fn from_solution(solution: &SaddleSolution, options: &SolverOptions) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            k: solution.k.get(),
            capacity_bits: solution.capacity,
            channel: solution.channel.probs().to_vec(),
            support: solution
                .distribution
                .atoms()
                .iter()
                .map(|a| DocumentAtom {
                    w: a.w,
                    weight: a.weight,
                })
                .collect(),
            maxmin: solution.maxmin_value,
            minmax: solution.minmax_value,
            gap: solution.gap,
            kkt_residual: solution.kkt_residual,
            iterations: solution.iterations,
            method: solution.method.as_str().to_string(),
            options: OptionsEcho::from(options),
            timestamp: util::format_utc(util::timestamp_seconds()),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// Reconstructs the typed solution; fails on structural violations
    /// (marking, weight normalization, atom domain).
    pub fn to_solution(&self) -> Result<(SaddleSolution, SolverOptions)> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::MalformedDocument(format!(
                "unsupported schema version {:?}",
                self.schema_version
            )));
        }
        let k = CoalitionSize::new(self.k)
            .map_err(|e| Error::MalformedDocument(e.to_string()))?;
        if self.channel.len() != k.vector_len() {
            return Err(Error::MalformedDocument(format!(
                "channel has {} entries for k = {}",
                self.channel.len(),
                self.k
            )));
        }
        let channel = CollusionChannel::new(self.channel.clone())
            .map_err(|e| Error::MalformedDocument(e.to_string()))?;
        let distribution = CodeDistribution::new(
            self.support
                .iter()
                .map(|a| SupportAtom {
                    w: a.w,
                    weight: a.weight,
                })
                .collect(),
        )
        .map_err(|e| Error::MalformedDocument(e.to_string()))?;
        let method = MethodTag::parse(&self.method)
            .map_err(|e| Error::MalformedDocument(e.to_string()))?;
        let solution = SaddleSolution {
            k,
            capacity: self.capacity_bits,
            channel,
            distribution,
            maxmin_value: self.maxmin,
            minmax_value: self.minmax,
            gap: self.gap,
            kkt_residual: self.kkt_residual,
            iterations: self.iterations,
            method,
        };
        Ok((solution, SolverOptions::from(&self.options)))
    }

    pub fn to_json(&self) -> String {
        let mut s = String::with_capacity(2048);
        s.push_str("{\n");
        s.push_str(&format!(
            "  \"schema_version\": {},\n",
            json_string(&self.schema_version)
        ));
        s.push_str(&format!("  \"k\": {},\n", self.k));
        s.push_str(&format!(
            "  \"capacity_bits\": {},\n",
            fmt_f64(self.capacity_bits)
        ));
        s.push_str("  \"channel\": [");
        for (i, p) in self.channel.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            s.push_str(&fmt_f64(*p));
        }
        s.push_str("],\n");
        s.push_str("  \"support\": [\n");
        for (i, a) in self.support.iter().enumerate() {
            s.push_str(&format!(
                "    {{\"w\": {}, \"weight\": {}}}{}\n",
                fmt_f64(a.w),
                fmt_f64(a.weight),
                if i + 1 < self.support.len() { "," } else { "" }
            ));
        }
        s.push_str("  ],\n");
        s.push_str(&format!("  \"maxmin\": {},\n", fmt_f64(self.maxmin)));
        s.push_str(&format!("  \"minmax\": {},\n", fmt_f64(self.minmax)));
        s.push_str(&format!("  \"gap\": {},\n", fmt_f64(self.gap)));
        s.push_str(&format!(
            "  \"kkt_residual\": {},\n",
            fmt_f64(self.kkt_residual)
        ));
        s.push_str(&format!("  \"iterations\": {},\n", self.iterations));
        s.push_str(&format!("  \"method\": {},\n", json_string(&self.method)));
        s.push_str("  \"options\": {\n");
        s.push_str(&format!(
            "    \"tolerance\": {},\n",
            fmt_f64(self.options.tolerance)
        ));
        s.push_str(&format!("    \"w_grid\": {},\n", self.options.w_grid));
        s.push_str(&format!(
            "    \"max_outer_iterations\": {},\n",
            self.options.max_outer_iterations
        ));
        s.push_str(&format!(
            "    \"atom_merge_distance\": {},\n",
            fmt_f64(self.options.atom_merge_distance)
        ));
        s.push_str(&format!(
            "    \"newton_enabled\": {},\n",
            self.options.newton_enabled
        ));
        s.push_str(&format!("    \"seed\": {}\n", self.options.seed));
        s.push_str("  },\n");
        s.push_str(&format!(
            "  \"timestamp\": {},\n",
            json_string(&self.timestamp)
        ));
        s.push_str(&format!(
            "  \"tool_version\": {}\n",
            json_string(&self.tool_version)
        ));
        s.push_str("}\n");
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::MalformedDocument(e.to_string()))
    }

    /// Long-format CSV with a fixed header; same 17-digit precision.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("field,index,value\n");
        let mut row = |field: &str, index: String, value: String| {
            s.push_str(&format!("{field},{index},{value}\n"));
        };
        row("schema_version", String::new(), self.schema_version.clone());
        row("k", String::new(), self.k.to_string());
        row("capacity_bits", String::new(), fmt_f64(self.capacity_bits));
        for (z, p) in self.channel.iter().enumerate() {
            row("channel", z.to_string(), fmt_f64(*p));
        }
        for (i, a) in self.support.iter().enumerate() {
            row("support_w", i.to_string(), fmt_f64(a.w));
            row("support_weight", i.to_string(), fmt_f64(a.weight));
        }
        row("maxmin", String::new(), fmt_f64(self.maxmin));
        row("minmax", String::new(), fmt_f64(self.minmax));
        row("gap", String::new(), fmt_f64(self.gap));
        row("kkt_residual", String::new(), fmt_f64(self.kkt_residual));
        row("iterations", String::new(), self.iterations.to_string());
        row("method", String::new(), self.method.clone());
        row("tolerance", String::new(), fmt_f64(self.options.tolerance));
        row("w_grid", String::new(), self.options.w_grid.to_string());
        row(
            "max_outer_iterations",
            String::new(),
            self.options.max_outer_iterations.to_string(),
        );
        row(
            "atom_merge_distance",
            String::new(),
            fmt_f64(self.options.atom_merge_distance),
        );
        row(
            "newton_enabled",
            String::new(),
            self.options.newton_enabled.to_string(),
        );
        row("seed", String::new(), self.options.seed.to_string());
        row("timestamp", String::new(), self.timestamp.clone());
        row("tool_version", String::new(), self.tool_version.clone());
        s
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}
