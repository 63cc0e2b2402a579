#pragma once

// Exact maximum-flow solver (Dinic). Flow amounts are integers on a
// fixed 1e-9 grid: capacities are rounded onto the grid before solving,
// which makes the solver exact on rationals and guarantees termination.

#include <cstdint>
#include <vector>

namespace flowsum {

using FlowUnits = std::int64_t;

inline constexpr double kFlowGrid = 1e-9;

FlowUnits to_flow_units(double value);
double from_flow_units(FlowUnits units);

struct MaxFlowArc {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  FlowUnits capacity = 0;
};

struct MaxFlowResult {
  std::vector<FlowUnits> flow;  // per input arc, same order
  FlowUnits total = 0;
};

// Deterministic for a fixed arc ordering. A sink unreachable from the
// source yields total == 0.
MaxFlowResult max_flow(std::uint32_t node_count, std::uint32_t source,
                       std::uint32_t sink, const std::vector<MaxFlowArc>& arcs);

}  // namespace flowsum
