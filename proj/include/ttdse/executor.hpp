// SPDX-License-Identifier: Apache-2.0
//
// Reference (fp64) execution of dense and TT-factorized FC layers.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ttdse/count.hpp"
#include "ttdse/ttcore.hpp"

namespace ttdse {

struct Tensor {
    std::vector<std::size_t> dims;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return dims.size(); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }
};

enum class EinsumVariant { first, middle, final };
const char* variant_name(EinsumVariant v);

/// Loop bounds of one Einsum layer. rt is the leading rank r_{t-1} of the
/// core and rt_1 its trailing rank r_t.
struct EinsumSpec {
    std::uint64_t mt = 1, bt = 1, nt = 1, rt = 1, rt_1 = 1;

    void validate() const;
    EinsumVariant variant() const;
    std::uint64_t k_extent() const { return nt * rt_1; }
    Count macs() const;
    friend bool operator==(const EinsumSpec&, const EinsumSpec&) = default;
};

struct TTCores {
    std::vector<Tensor> cores;  // core t-1 has dims [r_{t-1}, n_t, m_t, r_t]
    std::vector<double> bias;   // length M

    CombinationShape shape() const;
    RankList ranks() const;
    void validate() const;
};

/// y = W x + b with W stored row-major M x N.
std::vector<double> dense_forward(const Tensor& W, const std::vector<double>& x, const std::vector<double>& b);

/// Output[m][b][r] = sum_n sum_k G[r][n][m][k] * Input[b][n][k].
Tensor einsum_native(const Tensor& G, const Tensor& input, const EinsumSpec& spec);

/// Einsum specs in execution order (core d first, core 1 last), with bt taken
/// from the reshape bookkeeping of the running activation size.
std::vector<EinsumSpec> chain_specs(const CombinationShape& shape, const RankList& ranks);

struct MacCount {
    std::vector<Count> per_layer;  // index t-1 for core t
    Count total = 0;
};

/// Runs the chain; when `macs` is given it receives the innermost-iteration
/// count of every Einsum.
std::vector<double> tt_forward(const TTCores& cores, const std::vector<double>& x, MacCount* macs = nullptr);

/// Dense M x N matrix represented by the cores.
Tensor tt_reconstruct(const TTCores& cores, std::size_t element_budget = 100'000'000);

MacCount count_macs(const CombinationShape& shape, const RankList& ranks);

/// Cores with entries uniform(-0.5, 0.5) / sqrt(r_{t-1} r_t) and bias uniform(-0.5, 0.5).
TTCores random_cores(const CombinationShape& shape, const RankList& ranks, std::uint64_t seed);

std::vector<double> random_vector(std::size_t n, std::uint64_t seed);

enum class FixtureType : std::uint8_t { f32 = 1, f64 = 2 };

void write_fixture(const std::filesystem::path& path, const Tensor& t, FixtureType type = FixtureType::f64);
Tensor read_fixture(const std::filesystem::path& path);

}  // namespace ttdse
