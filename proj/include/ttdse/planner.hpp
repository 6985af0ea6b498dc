// SPDX-License-Identifier: Apache-2.0
//
// Schedules for one Einsum layer: vectorized loop, register blocking,
// packed core layout, L2 tiling and parallel loop, plus an L/S-counting
// interpreter and C source emission.
//
// Blocking structure shared by the model, the simulator and the emitter:
//   m is split into floor(mt/Rm) blocks of Rm rows followed by the leftover
//   rows one at a time; b (per tile) is split into blocks of Rb followed by a
//   single block holding the remainder. Every (m-block, b-block) pair runs
//   the same micro-kernel body with its own extents.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ttdse/count.hpp"
#include "ttdse/executor.hpp"
#include "ttdse/prune.hpp"

namespace ttdse {

enum class VectorLoop { r, k };
enum class LoopOrder { mbrk, bmrk };
enum class ParallelLoop { m, b };

const char* vector_loop_name(VectorLoop v);
const char* parallel_loop_name(ParallelLoop p);
std::vector<std::string> loop_order_names(LoopOrder o);

struct RBFactors {
    std::uint64_t Rm = 1, Rb = 1, Rr = 1, Rk = 1;
    friend bool operator==(const RBFactors&, const RBFactors&) = default;
};

std::string to_string(const RBFactors& rb);

/// Packed core order [mt, groups, K, lanes] with K = nt * rt_1.
/// r-vectorized: groups = rt / (Rr vl), lanes = Rr vl. k-vectorized: groups = lanes = 1.
struct PackedLayout {
    std::array<std::uint64_t, 4> dims{1, 1, 1, 1};
    std::uint64_t size() const { return dims[0] * dims[1] * dims[2] * dims[3]; }
    friend bool operator==(const PackedLayout&, const PackedLayout&) = default;
};

struct KernelPlan {
    EinsumSpec spec;
    unsigned vl = 8;
    VectorLoop vector_loop = VectorLoop::r;
    RBFactors rb;
    LoopOrder loop_order = LoopOrder::mbrk;
    ParallelLoop parallel_loop = ParallelLoop::m;
    std::optional<std::uint64_t> tile_bt;
    PackedLayout layout;
    unsigned threads = 1;
    Count predicted_ls = 0;

    std::string kernel_name() const;  // einsum_<variant>_<mt>x<bt>x<nt>_r<rt>_k<rt_1>
};

VectorLoop choose_vector_loop(const EinsumSpec& spec);

/// Register budget of the micro-kernel accumulators and operands.
bool registers_fit(const RBFactors& rb, unsigned registers);

/// Throws ConstraintViolation when rb exceeds a loop bound, does not divide
/// the vector-group count, or (when registers given) breaks the budget.
void check_rb(const EinsumSpec& spec, const RBFactors& rb, unsigned vl, VectorLoop loop,
              std::optional<unsigned> registers = std::nullopt);

struct LsBreakdown {
    Count output = 0, input = 0, g = 0;
    Count total() const { return output + input + g; }
    friend bool operator==(const LsBreakdown&, const LsBreakdown&) = default;
};

/// L/S instructions of the untiled blocked loop nest.
LsBreakdown ls_breakdown(const EinsumSpec& spec, const RBFactors& rb, unsigned vl, VectorLoop loop,
                         std::optional<unsigned> registers = std::nullopt);
Count ls_count(const EinsumSpec& spec, const RBFactors& rb, unsigned vl, VectorLoop loop,
               std::optional<unsigned> registers = std::nullopt);
/// Main-term-only variant: every padding contribution dropped.
Count ls_count_steady_state(const EinsumSpec& spec, const RBFactors& rb, unsigned vl, VectorLoop loop);

/// Same as ls_breakdown but honouring the plan's bt tiling.
LsBreakdown plan_ls_breakdown(const KernelPlan& plan);
Count plan_ls_count(const KernelPlan& plan);

RBFactors rb_search(const EinsumSpec& spec, const HardwareConfig& hw, VectorLoop loop);

struct TileDecision {
    bool feasible = true;
    int step = 1;  // 1, 2 or 3
    LoopOrder loop_order = LoopOrder::mbrk;
    ParallelLoop parallel_loop = ParallelLoop::m;
    std::optional<std::uint64_t> tile_bt;
};

bool fits_whole_layer(const EinsumSpec& spec, const HardwareConfig& hw);
bool fits_b_outer(const EinsumSpec& spec, const HardwareConfig& hw);
bool fits_bt_tile(const EinsumSpec& spec, const HardwareConfig& hw, std::uint64_t btl);
TileDecision tiling_decision(const EinsumSpec& spec, const HardwareConfig& hw);

PackedLayout packed_layout(const EinsumSpec& spec, const RBFactors& rb, unsigned vl, VectorLoop loop);

/// Full plan for one Einsum; throws PlannerInfeasible when no tiling fits or
/// the vectorized extent is not a multiple of vl.
KernelPlan make_plan(const EinsumSpec& spec, const HardwareConfig& hw, unsigned threads);

/// Assembles a plan from explicit choices (validated), computing layout and predicted L/S.
KernelPlan build_plan(const EinsumSpec& spec, unsigned vl, VectorLoop loop, const RBFactors& rb, LoopOrder order,
                      ParallelLoop parallel, std::optional<std::uint64_t> tile_bt, unsigned threads);

std::vector<double> pack_core(const Tensor& core, const KernelPlan& plan);
Tensor unpack_core(const std::vector<double>& packed, const KernelPlan& plan);

struct SimulationResult {
    Tensor output;
    LsBreakdown counted;
    bool partition_disjoint = true;
    std::uint64_t parallel_iterations = 0;
};

SimulationResult simulate_plan(const KernelPlan& plan, const Tensor& core, const Tensor& input);

std::string emit_kernel_source(const KernelPlan& plan);
std::string plan_to_json(const KernelPlan& plan);

}  // namespace ttdse
