// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "ttdse/cli.hpp"
#include "ttdse/errors.hpp"

namespace fs = std::filesystem;
using namespace ttdse;

namespace {

enum Exit { ok = 0, config_error = 2, budget_exceeded = 3, planner_infeasible = 4 };

struct LayerRun {
    PipelineResult result;
    std::optional<std::string> error;
    bool budget = false;
};

// One worker per distinct shape; results land in fixed slots so the merge order never depends on scheduling.
std::vector<LayerRun> run_layers(const std::vector<LayerShape>& shapes, const EnumerationPolicy& policy,
                                 const HardwareConfig& hw, const PipelineOptions& options) {
    std::vector<LayerRun> runs(shapes.size());
    const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), shapes.size()));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < shapes.size();) {
            try {
                runs[i].result = run_pipeline(shapes[i], policy, hw, options);
            } catch (const BudgetExceeded& e) {
                runs[i].error = e.what();
                runs[i].budget = true;
            } catch (const std::exception& e) {
                runs[i].error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    return runs;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    os << text;
    if (!os) throw std::runtime_error("cannot write " + path.string());
}

int explore(const std::string& config_path, const fs::path& out, bool emit, std::optional<Factor> rank,
            const std::vector<Factor>& ranks, std::optional<std::size_t> max_d, std::optional<double> budget,
            bool table) {
    Config cfg;
    try {
        cfg = load_config(config_path);
        if (rank) cfg.policy.ranks = RankSet::list({*rank});
        if (!ranks.empty()) cfg.policy.ranks = RankSet::list(ranks);
        if (max_d) cfg.policy.max_d = *max_d;
        cfg.policy.validate();
    } catch (const ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config_error;
    }

    std::vector<LayerShape> distinct;
    std::map<LayerShape, std::size_t> slot;
    for (const auto& l : cfg.layers) {
        if (slot.emplace(l.layer, distinct.size()).second) distinct.push_back(l.layer);
    }
    PipelineOptions options;
    options.budget_seconds = budget;
    const auto runs = run_layers(distinct, cfg.policy, cfg.hardware, options);

    int status = ok;
    for (const auto& r : runs) {
        if (r.error) {
            std::cerr << (r.budget ? "budget exceeded: " : "error: ") << *r.error << "\n";
            status = r.budget ? budget_exceeded : std::max(status, 1);
        }
    }
    if (status != ok) return status;

    std::vector<ReportRow> rows;
    for (const auto& l : cfg.layers) {
        const PipelineResult& res = runs[slot.at(l.layer)].result;
        rows.push_back(report_reduction(res.report, l.name, l.multiplicity));
        write_text(out / "pareto" / (l.name + ".csv"), export_pareto(res.survivors, l.layer));
    }
    write_text(out / "report.csv", report_csv(rows));
    if (table) std::cout << report_table(rows);

    if (emit) {
        for (const auto& l : cfg.layers) {
            const PipelineResult& res = runs[slot.at(l.layer)].result;
            if (res.survivors.empty()) {
                std::cerr << "layer " << l.name << ": no survivors, nothing to emit\n";
                continue;
            }
            const EmitResult emitted = emit_all(res.survivors.front(), cfg.hardware, out, l.name);
            for (const auto& s : emitted.skipped) {
                std::cerr << "planner infeasible: " << s << "\n";
                status = planner_infeasible;
            }
        }
    }
    return status;
}

int catalog(bool reproduce, std::optional<double> budget) {
    const auto& entries = builtin_catalog();
    if (!reproduce) {
        for (const auto& e : entries) {
            for (const auto& l : e.layers) {
                std::cout << e.model << "\t" << e.dataset << "\t" << l.text << "\t";
                for (std::size_t i = 0; i < kStageCount; ++i) std::cout << (i ? " " : "") << l.published[i];
                std::cout << "\n";
            }
        }
        return ok;
    }
    std::vector<LayerShape> distinct;
    std::map<LayerShape, std::size_t> slot;
    for (const auto& e : entries) {
        for (const auto& l : e.layers) {
            if (slot.emplace(l.layer, distinct.size()).second) distinct.push_back(l.layer);
        }
    }
    PipelineOptions options;
    options.budget_seconds = budget;
    options.keep_survivors = false;
    const HardwareConfig hw;
    const EnumerationPolicy policy = EnumerationPolicy::table_convention();
    const auto runs = run_layers(distinct, policy, hw, options);
    int status = ok;
    for (const auto& e : entries) {
        for (const auto& l : e.layers) {
            const LayerRun& r = runs[slot.at(l.layer)];
            std::cout << e.model << "\t" << e.dataset << "\t" << l.text;
            if (r.error) {
                std::cout << "\t" << *r.error << "\n";
                status = r.budget ? budget_exceeded : 1;
                continue;
            }
            const ReportRow row = report_reduction(r.result.report, l.layer.label(), l.multiplicity);
            const auto ours = row.sci();
            for (std::size_t i = 0; i < kStageCount; ++i) std::cout << "\t" << ours[i] << " (" << l.published[i] << ")";
            std::cout << "\n";
        }
    }
    std::cout << "convention: " << policy.convention() << "\n";
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Design-space exploration and kernel planning for Tensor-Train fully-connected layers"};
    app.require_subcommand(1);

    auto* ex = app.add_subcommand("explore", "Prune the TT design space of the configured layers");
    std::string config_path;
    std::string out = "out";
    bool emit = false, table = false;
    std::optional<Factor> rank;
    std::vector<Factor> ranks;
    std::optional<std::size_t> max_d;
    std::optional<double> budget;
    ex->add_option("--config", config_path, "Configuration JSON")->required()->check(CLI::ExistingFile);
    ex->add_option("--out", out, "Output directory");
    ex->add_flag("--emit-kernels", emit, "Emit kernels and plans for the best survivor of each layer");
    auto* r1 = ex->add_option("--rank", rank, "Single rank value")->check(CLI::PositiveNumber);
    auto* r2 = ex->add_option("--ranks", ranks, "Rank values")->delimiter(',')->check(CLI::PositiveNumber);
    r1->excludes(r2);
    ex->add_option("--max-d", max_d, "Largest factorization length")->check(CLI::PositiveNumber);
    ex->add_option("--budget-seconds", budget, "Wall-clock budget per layer")->check(CLI::PositiveNumber);
    ex->add_flag("--table-report", table, "Print the stage counts as a table");

    auto* cat = app.add_subcommand("catalog", "List the built-in model catalog");
    bool reproduce = false;
    std::optional<double> cat_budget;
    cat->add_flag("--reproduce", reproduce, "Run the pipeline on every catalog layer beside the published counts");
    cat->add_option("--budget-seconds", cat_budget, "Wall-clock budget per layer")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : config_error;
    }
    try {
        if (*ex) return explore(config_path, out, emit, rank, ranks, max_d, budget, table);
        return catalog(reproduce, cat_budget);
    } catch (const BudgetExceeded& e) {
        std::cerr << "budget exceeded: " << e.what() << "\n";
        return budget_exceeded;
    } catch (const PlannerInfeasible& e) {
        std::cerr << "planner infeasible: " << e.what() << "\n";
        return planner_infeasible;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
