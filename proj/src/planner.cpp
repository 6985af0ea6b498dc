// SPDX-License-Identifier: Apache-2.0
#include "ttdse/planner.hpp"

#include <algorithm>
#include "json.hpp"
#include <set>
#include <sstream>

#include "ttdse/errors.hpp"

namespace ttdse {

const char* vector_loop_name(VectorLoop v) { return v == VectorLoop::r ? "r" : "k"; }
const char* parallel_loop_name(ParallelLoop p) { return p == ParallelLoop::m ? "mt" : "bt"; }

std::vector<std::string> loop_order_names(LoopOrder o) {
    if (o == LoopOrder::mbrk) return {"mt", "bt", "rt", "nt*rt_1"};
    return {"bt", "mt", "rt", "nt*rt_1"};
}

std::string to_string(const RBFactors& rb) {
    std::ostringstream os;
    os << "{" << rb.Rm << "," << rb.Rb << "," << rb.Rr << "," << rb.Rk << "}";
    return os.str();
}

std::string KernelPlan::kernel_name() const {
    std::ostringstream os;
    os << "einsum_" << variant_name(spec.variant()) << "_" << spec.mt << "x" << spec.bt << "x" << spec.nt << "_r"
       << spec.rt << "_k" << spec.rt_1;
    return os.str();
}

VectorLoop choose_vector_loop(const EinsumSpec& spec) {
    return spec.rt > 1 ? VectorLoop::r : VectorLoop::k;
}

bool registers_fit(const RBFactors& rb, unsigned registers) {
    const Count need = Count(rb.Rm) * rb.Rb * rb.Rr + std::min(Count(rb.Rb) * rb.Rk, Count(rb.Rm) * rb.Rr) + 1;
    return need <= registers;
}

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

// Extents shared by the model, the simulator and the emitter.
struct Geometry {
    std::uint64_t K = 1;       // nt * rt_1
    std::uint64_t R = 1;       // vectors along rt (r-vectorized only)
    std::uint64_t groups = 1;  // rt / (Rr vl), or 1
    std::uint64_t lanes = 1;   // Rr vl, or 1
    std::uint64_t steps = 1;   // reduction steps per group: K, or K / vl
};

Geometry geometry(const EinsumSpec& spec, const RBFactors& rb, unsigned vl, VectorLoop loop) {
    Geometry g;
    g.K = spec.k_extent();
    if (loop == VectorLoop::r) {
        g.R = spec.rt / vl;
        g.groups = g.R / rb.Rr;
        g.lanes = rb.Rr * vl;
        g.steps = g.K;
    } else {
        g.steps = g.K / vl;
    }
    return g;
}

std::vector<std::uint64_t> tile_extents(std::uint64_t bt, std::optional<std::uint64_t> tile) {
    if (!tile) return {bt};
    std::vector<std::uint64_t> out(bt / *tile, *tile);
    if (bt % *tile) out.push_back(bt % *tile);
    return out;
}

LsBreakdown closed_form(const EinsumSpec& spec, const RBFactors& rb, unsigned vl, VectorLoop loop,
                        const std::vector<std::uint64_t>& tiles, bool padding) {
    const Geometry g = geometry(spec, rb, vl, loop);
    Count b_blocks = 0;
    for (std::uint64_t e : tiles) b_blocks += e / rb.Rb + (padding && e % rb.Rb ? 1 : 0);
    const Count m_blocks = spec.mt / rb.Rm + (padding ? spec.mt % rb.Rm : 0);
    LsBreakdown ls;
    if (loop == VectorLoop::r) {
        ls.g = checked_mul(checked_mul(Count(spec.mt), b_blocks), checked_mul(g.R, g.K));
        ls.input = checked_mul(checked_mul(m_blocks, spec.bt), checked_mul(g.R / rb.Rr, g.K));
        ls.output = checked_mul(checked_mul(Count(spec.mt), spec.bt), g.R);
    } else {
        ls.g = checked_mul(checked_mul(Count(spec.mt), b_blocks), g.steps);
        ls.input = checked_mul(checked_mul(m_blocks, spec.bt), g.steps);
        ls.output = checked_mul(Count(spec.mt), spec.bt);
    }
    return ls;
}

}  // namespace

void check_rb(const EinsumSpec& spec, const RBFactors& rb, unsigned vl, VectorLoop loop,
              std::optional<unsigned> registers) {
    spec.validate();
    if (vl == 0) throw ConstraintViolation("vl must be positive");
    if (rb.Rm < 1 || rb.Rb < 1 || rb.Rr < 1 || rb.Rk < 1) throw ConstraintViolation("RB factors must be >= 1");
    if (rb.Rm > spec.mt) throw ConstraintViolation("Rm exceeds mt");
    if (rb.Rb > spec.bt) throw ConstraintViolation("Rb exceeds bt");
    if (loop == VectorLoop::r) {
        if (spec.rt % vl != 0) throw ConstraintViolation("rt is not a multiple of vl");
        if ((spec.rt / vl) % rb.Rr != 0) throw ConstraintViolation("Rr must divide rt/vl");
        if (rb.Rk > spec.k_extent()) throw ConstraintViolation("Rk exceeds nt*rt_1");
    } else {
        if (spec.rt != 1) throw ConstraintViolation("k-vectorization requires rt = 1");
        if (spec.k_extent() % vl != 0) throw ConstraintViolation("nt*rt_1 is not a multiple of vl");
        if (rb.Rr != 1) throw ConstraintViolation("Rr must be 1 when the k-loop is vectorized");
        if (rb.Rk > spec.k_extent() / vl) throw ConstraintViolation("Rk exceeds nt*rt_1/vl");
    }
    if (registers && !registers_fit(rb, *registers)) {
        throw ConstraintViolation("RB factors " + to_string(rb) + " need more than " + std::to_string(*registers) +
                                  " registers");
    }
}

LsBreakdown ls_breakdown(const EinsumSpec& spec, const RBFactors& rb, unsigned vl, VectorLoop loop,
                         std::optional<unsigned> registers) {
    check_rb(spec, rb, vl, loop, registers);
    return closed_form(spec, rb, vl, loop, {spec.bt}, true);
}

Count ls_count(const EinsumSpec& spec, const RBFactors& rb, unsigned vl, VectorLoop loop,
               std::optional<unsigned> registers) {
    return ls_breakdown(spec, rb, vl, loop, registers).total();
}

Count ls_count_steady_state(const EinsumSpec& spec, const RBFactors& rb, unsigned vl, VectorLoop loop) {
    check_rb(spec, rb, vl, loop);
    return closed_form(spec, rb, vl, loop, {spec.bt}, false).total();
}

LsBreakdown plan_ls_breakdown(const KernelPlan& plan) {
    check_rb(plan.spec, plan.rb, plan.vl, plan.vector_loop);
    return closed_form(plan.spec, plan.rb, plan.vl, plan.vector_loop, tile_extents(plan.spec.bt, plan.tile_bt), true);
}

Count plan_ls_count(const KernelPlan& plan) { return plan_ls_breakdown(plan).total(); }

RBFactors rb_search(const EinsumSpec& spec, const HardwareConfig& hw, VectorLoop loop) {
    const unsigned vl = hw.vl();
    const unsigned regs = hw.registers_available;
    check_rb(spec, RBFactors{}, vl, loop);
    const Geometry g = geometry(spec, RBFactors{}, vl, loop);
    std::vector<std::uint64_t> rr_values{1};
    if (loop == VectorLoop::r) {
        rr_values.clear();
        for (std::uint64_t d = 1; d <= g.R && d <= regs; ++d) {
            if (g.R % d == 0) rr_values.push_back(d);
        }
    }
    const std::uint64_t rk_max = std::min<std::uint64_t>(g.steps, regs);
    std::optional<RBFactors> best;
    Count best_ls = 0;
    for (std::uint64_t rm = 1; rm <= std::min<std::uint64_t>(spec.mt, regs); ++rm) {
        for (std::uint64_t rb = 1; rb <= std::min<std::uint64_t>(spec.bt, regs); ++rb) {
            for (std::uint64_t rr : rr_values) {
                for (std::uint64_t rk = 1; rk <= rk_max; ++rk) {
                    const RBFactors f{rm, rb, rr, rk};
                    if (!registers_fit(f, regs)) continue;
                    const Count ls = closed_form(spec, f, vl, loop, {spec.bt}, true).total();
                    const bool better = !best || ls < best_ls ||
                                        (ls == best_ls && (rm > best->Rm || (rm == best->Rm && rb > best->Rb)));
                    if (better) {
                        best = f;
                        best_ls = ls;
                    }
                }
            }
        }
    }
    if (!best) throw ConstraintViolation("no RB factors fit in " + std::to_string(regs) + " registers");
    return *best;
}

bool fits_whole_layer(const EinsumSpec& spec, const HardwareConfig& hw) {
    return fits_bt_tile(spec, hw, spec.bt);
}

bool fits_b_outer(const EinsumSpec& spec, const HardwareConfig& hw) {
    const std::uint64_t way = hw.l2_way_bytes(), e = hw.element_bytes, T = hw.threads;
    const std::uint64_t ways = 1 + ceil_div(spec.mt * spec.rt * spec.nt * spec.rt_1 * e, way) +
                               T * ceil_div(spec.nt * spec.rt_1 * e, way);
    return ways <= hw.l2_assoc;
}

bool fits_bt_tile(const EinsumSpec& spec, const HardwareConfig& hw, std::uint64_t btl) {
    const std::uint64_t way = hw.l2_way_bytes(), e = hw.element_bytes, T = hw.threads;
    const std::uint64_t ways = T * ceil_div(btl * spec.rt * e, way) +
                               T * ceil_div(spec.rt * spec.nt * spec.rt_1 * e, way) +
                               ceil_div(btl * spec.nt * spec.rt_1 * e, way);
    return ways <= hw.l2_assoc;
}

TileDecision tiling_decision(const EinsumSpec& spec, const HardwareConfig& hw) {
    spec.validate();
    hw.validate();
    TileDecision d;
    if (fits_whole_layer(spec, hw)) return d;
    if (fits_b_outer(spec, hw)) {
        d.step = 2;
        d.loop_order = LoopOrder::bmrk;
        d.parallel_loop = ParallelLoop::b;
        return d;
    }
    d.step = 3;
    for (std::uint64_t btl = spec.bt; btl >= 1; --btl) {
        if (fits_bt_tile(spec, hw, btl)) {
            d.tile_bt = btl;
            return d;
        }
    }
    d.feasible = false;
    return d;
}

PackedLayout packed_layout(const EinsumSpec& spec, const RBFactors& rb, unsigned vl, VectorLoop loop) {
    const Geometry g = geometry(spec, rb, vl, loop);
    return PackedLayout{{spec.mt, g.groups, g.K, g.lanes}};
}

KernelPlan build_plan(const EinsumSpec& spec, unsigned vl, VectorLoop loop, const RBFactors& rb, LoopOrder order,
                      ParallelLoop parallel, std::optional<std::uint64_t> tile_bt, unsigned threads) {
    check_rb(spec, rb, vl, loop);
    if (loop != choose_vector_loop(spec)) throw ConstraintViolation("vector loop must be k exactly when rt = 1");
    if ((order == LoopOrder::mbrk) != (parallel == ParallelLoop::m)) {
        throw ConstraintViolation("the parallel loop must be the outermost loop");
    }
    if (tile_bt && (order != LoopOrder::mbrk || *tile_bt < 1 || *tile_bt > spec.bt)) {
        throw ConstraintViolation("bt tiling needs loop order [mt, bt, ...] and 1 <= Btl <= bt");
    }
    if (threads < 1) throw ConstraintViolation("threads must be >= 1");
    KernelPlan p;
    p.spec = spec;
    p.vl = vl;
    p.vector_loop = loop;
    p.rb = rb;
    p.loop_order = order;
    p.parallel_loop = parallel;
    p.tile_bt = tile_bt;
    p.layout = packed_layout(spec, rb, vl, loop);
    p.threads = threads;
    p.predicted_ls = plan_ls_count(p);
    return p;
}

KernelPlan make_plan(const EinsumSpec& spec, const HardwareConfig& hw, unsigned threads) {
    spec.validate();
    hw.validate();
    const VectorLoop loop = choose_vector_loop(spec);
    const unsigned vl = hw.vl();
    if (loop == VectorLoop::r && spec.rt % vl != 0) {
        throw PlannerInfeasible("rt = " + std::to_string(spec.rt) + " is not a multiple of vl = " + std::to_string(vl));
    }
    if (loop == VectorLoop::k && spec.k_extent() % vl != 0) {
        throw PlannerInfeasible("nt*rt_1 = " + std::to_string(spec.k_extent()) + " is not a multiple of vl = " +
                                std::to_string(vl));
    }
    const RBFactors rb = rb_search(spec, hw, loop);
    const TileDecision tiles = tiling_decision(spec, hw);
    if (!tiles.feasible) {
        throw PlannerInfeasible("no bt tile satisfies the L2 constraint for " + std::to_string(spec.mt) + "x" +
                                std::to_string(spec.bt) + "x" + std::to_string(spec.nt));
    }
    return build_plan(spec, vl, loop, rb, tiles.loop_order, tiles.parallel_loop, tiles.tile_bt,
                      std::max(1u, threads));
}

// ---------------------------------------------------------------------------

std::vector<double> pack_core(const Tensor& core, const KernelPlan& plan) {
    const EinsumSpec& s = plan.spec;
    if (core.dims != std::vector<std::size_t>{s.rt, s.nt, s.mt, s.rt_1}) throw ShapeMismatch("core does not match plan");
    const auto& L = plan.layout.dims;
    std::vector<double> out(core.size());
    for (std::uint64_t r = 0; r < s.rt; ++r) {
        const std::uint64_t g = r / L[3], lane = r % L[3];
        for (std::uint64_t n = 0; n < s.nt; ++n) {
            for (std::uint64_t m = 0; m < s.mt; ++m) {
                for (std::uint64_t k = 0; k < s.rt_1; ++k) {
                    const std::uint64_t kk = n * s.rt_1 + k;
                    out[((m * L[1] + g) * L[2] + kk) * L[3] + lane] = core[((r * s.nt + n) * s.mt + m) * s.rt_1 + k];
                }
            }
        }
    }
    return out;
}

Tensor unpack_core(const std::vector<double>& packed, const KernelPlan& plan) {
    const EinsumSpec& s = plan.spec;
    Tensor core({s.rt, s.nt, s.mt, s.rt_1});
    if (packed.size() != core.size()) throw ShapeMismatch("packed core size does not match plan");
    const auto& L = plan.layout.dims;
    for (std::uint64_t r = 0; r < s.rt; ++r) {
        const std::uint64_t g = r / L[3], lane = r % L[3];
        for (std::uint64_t n = 0; n < s.nt; ++n) {
            for (std::uint64_t m = 0; m < s.mt; ++m) {
                for (std::uint64_t k = 0; k < s.rt_1; ++k) {
                    core[((r * s.nt + n) * s.mt + m) * s.rt_1 + k] =
                        packed[((m * L[1] + g) * L[2] + n * s.rt_1 + k) * L[3] + lane];
                }
            }
        }
    }
    return core;
}

// ---------------------------------------------------------------------------

namespace {

struct Block {
    std::uint64_t m0, sm, b0, sb;
    std::int64_t parallel_iter;  // -1 outside the parallel loop
    std::uint64_t parallel_trip;
};

// Micro-kernel invocations in program order.
std::vector<Block> schedule(const KernelPlan& p) {
    const auto& s = p.spec;
    const std::uint64_t Rm = p.rb.Rm, Rb = p.rb.Rb;
    const std::uint64_t m_main = s.mt / Rm * Rm;
    std::vector<Block> out;
    auto b_blocks = [&](std::uint64_t lo, std::uint64_t hi) {
        std::vector<std::pair<std::uint64_t, std::uint64_t>> v;
        std::uint64_t b = lo;
        for (; b + Rb <= hi; b += Rb) v.emplace_back(b, Rb);
        if (b < hi) v.emplace_back(b, hi - b);
        return v;
    };
    auto m_blocks = [&]() {
        std::vector<std::pair<std::uint64_t, std::uint64_t>> v;
        for (std::uint64_t m = 0; m < m_main; m += Rm) v.emplace_back(m, Rm);
        for (std::uint64_t m = m_main; m < s.mt; ++m) v.emplace_back(m, 1);
        return v;
    };
    if (p.loop_order == LoopOrder::mbrk) {
        const std::uint64_t trip = m_main / Rm;
        std::uint64_t lo = 0;
        for (std::uint64_t e : tile_extents(s.bt, p.tile_bt)) {
            const auto bs = b_blocks(lo, lo + e);
            for (std::uint64_t i = 0; i < trip; ++i) {
                for (auto [b0, sb] : bs) out.push_back({i * Rm, Rm, b0, sb, static_cast<std::int64_t>(i), trip});
            }
            for (std::uint64_t m = m_main; m < s.mt; ++m) {
                for (auto [b0, sb] : bs) out.push_back({m, 1, b0, sb, -1, trip});
            }
            lo += e;
        }
    } else {
        const std::uint64_t trip = s.bt / Rb;
        const auto ms = m_blocks();
        for (std::uint64_t i = 0; i < trip; ++i) {
            for (auto [m0, sm] : ms) out.push_back({m0, sm, i * Rb, Rb, static_cast<std::int64_t>(i), trip});
        }
        if (s.bt % Rb) {
            for (auto [m0, sm] : ms) out.push_back({m0, sm, trip * Rb, s.bt % Rb, -1, trip});
        }
    }
    return out;
}

}  // namespace

SimulationResult simulate_plan(const KernelPlan& plan, const Tensor& core, const Tensor& input) {
    const EinsumSpec& s = plan.spec;
    check_rb(s, plan.rb, plan.vl, plan.vector_loop);
    if (input.dims != std::vector<std::size_t>{s.bt, s.nt, s.rt_1}) throw ShapeMismatch("input does not match plan");
    if (plan.layout != packed_layout(s, plan.rb, plan.vl, plan.vector_loop)) {
        throw ShapeMismatch("plan layout inconsistent with its RB factors");
    }
    const std::vector<double> G = pack_core(core, plan);
    const Geometry g = geometry(s, plan.rb, plan.vl, plan.vector_loop);
    const std::uint64_t vl = plan.vl, K = g.K, Rr = plan.rb.Rr;

    SimulationResult res;
    res.output = Tensor({s.mt, s.bt, s.rt});
    std::vector<std::uint32_t> writes(res.output.size(), 0);
    std::vector<std::int64_t> owner(res.output.size(), -2);
    const auto blocks = schedule(plan);

    std::vector<double> acc;
    std::vector<double> gv;
    for (const Block& blk : blocks) {
        std::int64_t thread = 0;
        if (blk.parallel_iter >= 0) {
            thread = static_cast<std::int64_t>(static_cast<std::uint64_t>(blk.parallel_iter) * plan.threads /
                                               blk.parallel_trip);
            res.parallel_iterations = blk.parallel_trip;
        }
        auto store = [&](std::uint64_t m, std::uint64_t b, std::uint64_t r, double v) {
            const std::size_t idx = (m * s.bt + b) * s.rt + r;
            res.output[idx] = v;
            ++writes[idx];
            if (owner[idx] != -2 && owner[idx] != thread) res.partition_disjoint = false;
            owner[idx] = thread;
        };
        if (plan.vector_loop == VectorLoop::r) {
            const std::uint64_t lanes = g.lanes;
            for (std::uint64_t grp = 0; grp < g.groups; ++grp) {
                acc.assign(blk.sb * blk.sm * lanes, 0.0);
                gv.assign(blk.sm * lanes, 0.0);
                for (std::uint64_t kk = 0; kk < K; ++kk) {
                    for (std::uint64_t i = 0; i < blk.sm; ++i) {
                        const double* src = &G[(((blk.m0 + i) * g.groups + grp) * K + kk) * lanes];
                        std::copy(src, src + lanes, &gv[i * lanes]);
                        res.counted.g += Rr;
                    }
                    for (std::uint64_t j = 0; j < blk.sb; ++j) {
                        const double x = input[(blk.b0 + j) * K + kk];
                        res.counted.input += 1;
                        double* a = &acc[j * blk.sm * lanes];
                        for (std::uint64_t l = 0; l < blk.sm * lanes; ++l) a[l] += gv[l] * x;
                    }
                }
                for (std::uint64_t j = 0; j < blk.sb; ++j) {
                    for (std::uint64_t i = 0; i < blk.sm; ++i) {
                        for (std::uint64_t l = 0; l < lanes; ++l) {
                            store(blk.m0 + i, blk.b0 + j, grp * lanes + l, acc[(j * blk.sm + i) * lanes + l]);
                        }
                        res.counted.output += Rr;
                    }
                }
            }
        } else {
            acc.assign(blk.sb * blk.sm * vl, 0.0);
            for (std::uint64_t kv = 0; kv < g.steps; ++kv) {
                gv.assign(blk.sm * vl, 0.0);
                for (std::uint64_t i = 0; i < blk.sm; ++i) {
                    const double* src = &G[(blk.m0 + i) * K + kv * vl];
                    std::copy(src, src + vl, &gv[i * vl]);
                    res.counted.g += 1;
                }
                for (std::uint64_t j = 0; j < blk.sb; ++j) {
                    const double* x = &input.data[(blk.b0 + j) * K + kv * vl];
                    res.counted.input += 1;
                    for (std::uint64_t i = 0; i < blk.sm; ++i) {
                        double* a = &acc[(j * blk.sm + i) * vl];
                        for (std::uint64_t l = 0; l < vl; ++l) a[l] += gv[i * vl + l] * x[l];
                    }
                }
            }
            for (std::uint64_t j = 0; j < blk.sb; ++j) {
                for (std::uint64_t i = 0; i < blk.sm; ++i) {
                    double sum = 0.0;
                    for (std::uint64_t l = 0; l < vl; ++l) sum += acc[(j * blk.sm + i) * vl + l];
                    store(blk.m0 + i, blk.b0 + j, 0, sum);
                    res.counted.output += 1;
                }
            }
        }
    }
    for (std::uint32_t w : writes) {
        if (w != 1) res.partition_disjoint = false;
    }
    return res;
}

// ---------------------------------------------------------------------------

namespace {

class Emitter {
public:
    explicit Emitter(const KernelPlan& p) : p_(p), s_(p.spec) {}

    std::string run() {
        header();
        for (auto [sm, sb] : kernel_shapes()) ukernel(sm, sb);
        driver();
        return os_.str();
    }

private:
    bool rvec() const { return p_.vector_loop == VectorLoop::r; }
    std::uint64_t m_main() const { return s_.mt / p_.rb.Rm * p_.rb.Rm; }

    std::vector<std::uint64_t> b_remainders() const {
        std::set<std::uint64_t> rems;
        for (std::uint64_t e : tile_extents(s_.bt, p_.tile_bt)) {
            if (e % p_.rb.Rb) rems.insert(e % p_.rb.Rb);
        }
        return {rems.rbegin(), rems.rend()};
    }

    std::vector<std::pair<std::uint64_t, std::uint64_t>> kernel_shapes() const {
        std::vector<std::uint64_t> ms{p_.rb.Rm};
        if (s_.mt % p_.rb.Rm && p_.rb.Rm != 1) ms.push_back(1);
        std::vector<std::uint64_t> bs{p_.rb.Rb};
        for (std::uint64_t r : b_remainders()) bs.push_back(r);
        std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
        for (std::uint64_t sm : ms) {
            for (std::uint64_t sb : bs) out.emplace_back(sm, sb);
        }
        return out;
    }

    static std::string kname(std::uint64_t sm, std::uint64_t sb) {
        return "ukernel_" + std::to_string(sm) + "x" + std::to_string(sb);
    }

    std::string acc(std::uint64_t j, std::uint64_t i, std::uint64_t q) const {
        std::string a = "out_" + std::to_string(j) + "_" + std::to_string(i);
        if (p_.rb.Rr > 1) a += "_" + std::to_string(q);
        return a;
    }

    static std::string plus(const std::string& base, std::uint64_t off) {
        return off == 0 ? base + " + 0" : base + " + " + std::to_string(off);
    }

    void header() {
        const auto order = loop_order_names(p_.loop_order);
        const auto& L = p_.layout.dims;
        os_ << "/* " << p_.kernel_name() << "\n"
            << " * " << variant_name(s_.variant()) << " Einsum: mt=" << s_.mt << " bt=" << s_.bt << " nt=" << s_.nt
            << " rt=" << s_.rt << " rt_1=" << s_.rt_1 << "\n"
            << " * vectorized loop: " << vector_loop_name(p_.vector_loop) << ", RB {Rm,Rb,Rr,Rk} = " << to_string(p_.rb)
            << "\n"
            << " * loop order: [" << order[0] << ", " << order[1] << ", " << order[2] << ", " << order[3]
            << "], parallel loop: " << parallel_loop_name(p_.parallel_loop) << ", threads: " << p_.threads
            << ", tile_bt: " << (p_.tile_bt ? std::to_string(*p_.tile_bt) : std::string("none")) << "\n"
            << " * G_t packed as [" << L[0] << ", " << L[1] << ", " << L[2] << ", " << L[3] << "]\n"
            << " * predicted L/S instructions: " << ttdse::to_string(p_.predicted_ls) << "\n"
            << " */\n"
            << "#include <stddef.h>\n"
            << "#include <riscv_vector.h>\n\n"
            << "#define MT " << s_.mt << "\n"
            << "#define BT " << s_.bt << "\n"
            << "#define NT " << s_.nt << "\n"
            << "#define RT " << s_.rt << "\n"
            << "#define RT_1 " << s_.rt_1 << "\n"
            << "#define K (NT * RT_1)\n"
            << "#define VL " << p_.vl << "\n";
        if (rvec()) os_ << "#define RR " << p_.rb.Rr << "\n";
        if (p_.rb.Rk > 1) os_ << "#define RK " << p_.rb.Rk << "\n";
        if (p_.tile_bt) os_ << "#define BTL " << *p_.tile_bt << "\n";
        os_ << "\n";
    }

    void rvec_body(std::uint64_t sm, std::uint64_t sb, const std::string& ind, const std::string& k,
                   const std::string& coff) {
        const std::uint64_t Rr = p_.rb.Rr;
        for (std::uint64_t i = 0; i < sm; ++i) {
            for (std::uint64_t q = 0; q < Rr; ++q) {
                std::string off = coff;
                if (i) off += (off.empty() ? "" : " + ") + std::to_string(i) + " * RT * K";
                if (q) off += (off.empty() ? "" : " + ") + std::to_string(q) + " * VL";
                os_ << ind << "c_" << i;
                if (Rr > 1) os_ << "_" << q;
                os_ << " = vle32_v_f32m1(&G_t[C_index" << (off.empty() ? "" : " + " + off) << "], vl);\n";
            }
        }
        for (std::uint64_t j = 0; j < sb; ++j) {
            os_ << ind << "in0 = vfmv_v_f_f32m1(Input[(b + " << j << ") * K + " << k << "], vl);\n";
            for (std::uint64_t i = 0; i < sm; ++i) {
                for (std::uint64_t q = 0; q < Rr; ++q) {
                    std::string c = "c_" + std::to_string(i) + (Rr > 1 ? "_" + std::to_string(q) : "");
                    os_ << ind << acc(j, i, q) << " = vfmacc_vv_f32m1(" << acc(j, i, q) << ", " << c
                        << ", in0, vl);\n";
                }
            }
        }
    }

    void kvec_body(std::uint64_t sm, std::uint64_t sb, const std::string& ind, const std::string& k) {
        for (std::uint64_t i = 0; i < sm; ++i) {
            os_ << ind << "c_" << i << " = vle32_v_f32m1(&G_t[(m + " << i << ") * K + " << k << "], vl);\n";
        }
        for (std::uint64_t j = 0; j < sb; ++j) {
            os_ << ind << "in0 = vle32_v_f32m1(&Input[(b + " << j << ") * K + " << k << "], vl);\n";
            for (std::uint64_t i = 0; i < sm; ++i) {
                os_ << ind << acc(j, i, 0) << " = vfmacc_vv_f32m1(" << acc(j, i, 0) << ", c_" << i
                    << ", in0, vl);\n";
            }
        }
    }

    void ukernel(std::uint64_t sm, std::uint64_t sb) {
        const std::uint64_t Rr = rvec() ? p_.rb.Rr : 1;
        const std::uint64_t Rk = p_.rb.Rk;
        os_ << "static inline void " << kname(sm, sb)
            << "(const float *G_t, const float *Input, float *Output, size_t m, size_t b, size_t vl)\n{\n";
        std::string ind = "    ";
        if (rvec()) {
            os_ << ind << "for (size_t g = 0; g < RT / (RR * VL); g++) {\n";
            ind += "    ";
            os_ << ind << "size_t C_index = m * RT * K + g * K * RR * VL;\n";
        }
        for (std::uint64_t j = 0; j < sb; ++j) {
            for (std::uint64_t i = 0; i < sm; ++i) {
                for (std::uint64_t q = 0; q < Rr; ++q) {
                    os_ << ind << "vfloat32m1_t " << acc(j, i, q) << " = vfmv_v_f_f32m1(0.0f, vl);\n";
                }
            }
        }
        os_ << ind << "vfloat32m1_t in0";
        for (std::uint64_t i = 0; i < sm; ++i) {
            for (std::uint64_t q = 0; q < Rr; ++q) {
                os_ << ", c_" << i;
                if (Rr > 1) os_ << "_" << q;
            }
        }
        os_ << ";\n";
        const std::string step = rvec() ? "1" : "VL";
        const std::string inner = ind + "    ";
        auto body = [&](const std::string& k, std::uint64_t u) {
            if (rvec()) {
                rvec_body(sm, sb, inner, k, u ? std::to_string(u) + " * RR * VL" : "");
            } else {
                kvec_body(sm, sb, inner, k);
            }
        };
        if (Rk == 1) {
            os_ << ind << "for (size_t k = 0; k < K; k += " << step << ") {\n";
            body("k", 0);
            if (rvec()) os_ << inner << "C_index += RR * VL;\n";
            os_ << ind << "}\n";
        } else {
            const std::string unroll = rvec() ? "RK" : "RK * VL";
            os_ << ind << "size_t k = 0;\n";
            os_ << ind << "for (; k + " << unroll << " <= K; k += " << unroll << ") {\n";
            for (std::uint64_t u = 0; u < Rk; ++u) {
                std::string kexpr = u == 0 ? "k" : (rvec() ? "(k + " + std::to_string(u) + ")"
                                                           : "(k + " + std::to_string(u) + " * VL)");
                body(kexpr, u);
            }
            if (rvec()) os_ << inner << "C_index += RK * RR * VL;\n";
            os_ << ind << "}\n";
            os_ << ind << "for (; k < K; k += " << step << ") {\n";
            body("k", 0);
            if (rvec()) os_ << inner << "C_index += RR * VL;\n";
            os_ << ind << "}\n";
        }
        if (rvec()) {
            for (std::uint64_t j = 0; j < sb; ++j) {
                for (std::uint64_t i = 0; i < sm; ++i) {
                    for (std::uint64_t q = 0; q < Rr; ++q) {
                        os_ << ind << "vse32_v_f32m1(&Output[(m + " << i << ") * BT * RT + (b + " << j
                            << ") * RT + g * RR * VL" << (q ? " + " + std::to_string(q) + " * VL" : "") << "], "
                            << acc(j, i, q) << ", vl);\n";
                    }
                }
            }
            os_ << "    }\n";
        } else {
            os_ << ind << "vfloat32m1_t z = vfmv_s_f_f32m1(0.0f, vl);\n";
            for (std::uint64_t j = 0; j < sb; ++j) {
                for (std::uint64_t i = 0; i < sm; ++i) {
                    os_ << ind << acc(j, i, 0) << " = vfredosum_vs_f32m1_f32m1(" << acc(j, i, 0) << ", z, vl);\n";
                    os_ << ind << "Output[(m + " << i << ") * BT + (b + " << j << ")] = vfmv_f_s_f32m1_f32("
                        << acc(j, i, 0) << ");\n";
                }
            }
        }
        os_ << "}\n\n";
    }

    void call(const std::string& ind, std::uint64_t sm, std::uint64_t sb, const std::string& m, const std::string& b) {
        os_ << ind << kname(sm, sb) << "(G_t, Input, Output, " << m << ", " << b << ", vl);\n";
    }

    // b sweep over [lo, hi) for a fixed m block of height sm.
    void b_sweep(const std::string& ind, std::uint64_t sm, const std::string& lo, const std::string& hi,
                 bool constant_extent) {
        const std::uint64_t Rb = p_.rb.Rb;
        const auto rems = b_remainders();
        if (constant_extent) {
            const std::uint64_t main = s_.bt / Rb * Rb;
            os_ << ind << "for (size_t b = 0; b < " << main << "; b += " << Rb << ")\n";
            call(ind + "    ", sm, Rb, "m", "b");
            if (!rems.empty()) {
                os_ << ind << "/* padding ukernel for the last " << rems[0] << " bt iterations */\n";
                call(ind, sm, rems[0], "m", std::to_string(main));
            }
            return;
        }
        os_ << ind << "size_t b = " << lo << ";\n";
        os_ << ind << "for (; b + " << Rb << " <= " << hi << "; b += " << Rb << ")\n";
        call(ind + "    ", sm, Rb, "m", "b");
        if (rems.empty()) return;
        os_ << ind << "switch (" << hi << " - b) {\n";
        for (std::uint64_t r : rems) {
            os_ << ind << "case " << r << ":\n";
            call(ind + "    ", sm, r, "m", "b");
            os_ << ind << "    break;\n";
        }
        os_ << ind << "default:\n" << ind << "    break;\n" << ind << "}\n";
    }

    void driver() {
        const std::uint64_t Rm = p_.rb.Rm, Rb = p_.rb.Rb;
        const std::uint64_t mm = m_main();
        os_ << "void " << p_.kernel_name()
            << "(const float *restrict G_t, const float *restrict Input, float *restrict Output)\n{\n"
            << "    size_t vl = vsetvl_e32m1(VL);\n";
        const std::string pragma = "#pragma omp parallel for num_threads(" + std::to_string(p_.threads) + ")\n";
        if (p_.loop_order == LoopOrder::mbrk) {
            std::string ind = "    ";
            const bool tiled = p_.tile_bt.has_value();
            std::string lo = "0", hi = "BT";
            if (tiled) {
                os_ << ind << "for (size_t bt0 = 0; bt0 < BT; bt0 += BTL) {\n";
                ind += "    ";
                os_ << ind << "size_t bt1 = bt0 + BTL < BT ? bt0 + BTL : BT;\n";
                lo = "bt0";
                hi = "bt1";
            }
            os_ << pragma;
            os_ << ind << "for (size_t m = 0; m < " << mm << "; m += " << Rm << ") {\n";
            b_sweep(ind + "    ", Rm, lo, hi, !tiled);
            os_ << ind << "}\n";
            if (mm < s_.mt) {
                os_ << ind << "/* padding ukernel for the last " << s_.mt - mm << " mt rows */\n";
                os_ << ind << "for (size_t m = " << mm << "; m < MT; m++) {\n";
                b_sweep(ind + "    ", 1, lo, hi, !tiled);
                os_ << ind << "}\n";
            }
            if (tiled) os_ << "    }\n";
        } else {
            const std::uint64_t bm = s_.bt / Rb * Rb;
            os_ << pragma;
            os_ << "    for (size_t b = 0; b < " << bm << "; b += " << Rb << ") {\n";
            os_ << "        for (size_t m = 0; m < " << mm << "; m += " << Rm << ")\n";
            call("            ", Rm, Rb, "m", "b");
            if (mm < s_.mt) {
                os_ << "        for (size_t m = " << mm << "; m < MT; m++)\n";
                call("            ", 1, Rb, "m", "b");
            }
            os_ << "    }\n";
            if (bm < s_.bt) {
                const std::uint64_t rem = s_.bt - bm;
                os_ << "    /* padding ukernel for the last " << rem << " bt iterations */\n";
                os_ << "    for (size_t m = 0; m < " << mm << "; m += " << Rm << ")\n";
                call("        ", Rm, rem, "m", std::to_string(bm));
                if (mm < s_.mt) {
                    os_ << "    for (size_t m = " << mm << "; m < MT; m++)\n";
                    call("        ", 1, rem, "m", std::to_string(bm));
                }
            }
        }
        os_ << "}\n";
    }

    const KernelPlan& p_;
    const EinsumSpec& s_;
    std::ostringstream os_;
};

}  // namespace

std::string emit_kernel_source(const KernelPlan& plan) {
    check_rb(plan.spec, plan.rb, plan.vl, plan.vector_loop);
    return Emitter(plan).run();
}

std::string plan_to_json(const KernelPlan& plan) {
    const LsBreakdown ls = plan_ls_breakdown(plan);
    nlohmann::ordered_json j;
    j["kernel"] = plan.kernel_name();
    j["variant"] = variant_name(plan.spec.variant());
    j["spec"] = {{"mt", plan.spec.mt}, {"bt", plan.spec.bt}, {"nt", plan.spec.nt}, {"rt", plan.spec.rt},
                 {"rt_1", plan.spec.rt_1}};
    j["vl"] = plan.vl;
    j["vector_loop"] = vector_loop_name(plan.vector_loop);
    j["rb"] = {{"Rm", plan.rb.Rm}, {"Rb", plan.rb.Rb}, {"Rr", plan.rb.Rr}, {"Rk", plan.rb.Rk}};
    j["loop_order"] = loop_order_names(plan.loop_order);
    j["parallel_loop"] = parallel_loop_name(plan.parallel_loop);
    j["tile_bt"] = plan.tile_bt ? nlohmann::ordered_json(*plan.tile_bt) : nlohmann::ordered_json(nullptr);
    j["layout"] = {{"order", {"mt", "rt/(Rr*vl)", "nt*rt_1", "Rr*vl"}},
                   {"dims", {plan.layout.dims[0], plan.layout.dims[1], plan.layout.dims[2], plan.layout.dims[3]}}};
    j["threads"] = plan.threads;
    j["predicted_ls"] = to_string(plan.predicted_ls);
    j["ls_breakdown"] = {{"output", to_string(ls.output)}, {"input", to_string(ls.input)}, {"g", to_string(ls.g)}};
    return j.dump(2) + "\n";
}

}  // namespace ttdse
