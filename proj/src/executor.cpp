// SPDX-License-Identifier: Apache-2.0
#include "ttdse/executor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "ttdse/errors.hpp"

namespace ttdse {

static_assert(std::endian::native == std::endian::little, "fixture IO assumes a little-endian host");

namespace {

std::size_t volume(const std::vector<std::size_t>& dims) {
    std::size_t v = 1;
    for (std::size_t d : dims) v *= d;
    return v;
}

std::string dims_string(const std::vector<std::size_t>& dims) {
    std::string s = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(dims[i]);
    }
    return s + "]";
}

void expect_dims(const Tensor& t, const std::vector<std::size_t>& dims, const char* what) {
    if (t.dims != dims || t.data.size() != volume(dims)) {
        throw ShapeMismatch(std::string(what) + ": expected dims " + dims_string(dims) + ", got " +
                            dims_string(t.dims));
    }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> d, double fill) : dims(std::move(d)), data(volume(dims), fill) {}

const char* variant_name(EinsumVariant v) {
    switch (v) {
        case EinsumVariant::first: return "first";
        case EinsumVariant::middle: return "middle";
        case EinsumVariant::final: return "final";
    }
    return "?";
}

void EinsumSpec::validate() const {
    if (mt < 1 || bt < 1 || nt < 1 || rt < 1 || rt_1 < 1) throw ShapeMismatch("einsum bounds must be >= 1");
}

EinsumVariant EinsumSpec::variant() const {
    if (rt == 1) return EinsumVariant::final;
    if (rt_1 == 1) return EinsumVariant::first;
    return EinsumVariant::middle;
}

Count EinsumSpec::macs() const {
    return checked_mul(checked_mul(checked_mul(mt, bt), checked_mul(rt, nt)), rt_1);
}

CombinationShape TTCores::shape() const {
    CombinationShape s;
    for (const auto& c : cores) {
        s.n.push_back(c.dims.at(1));
        s.m.push_back(c.dims.at(2));
    }
    return s;
}

RankList TTCores::ranks() const {
    RankList r;
    if (cores.empty()) return r;
    r.r.push_back(cores.front().dims.at(0));
    for (const auto& c : cores) r.r.push_back(c.dims.at(3));
    return r;
}

void TTCores::validate() const {
    if (cores.empty()) throw ShapeMismatch("TT chain needs at least one core");
    for (std::size_t t = 0; t < cores.size(); ++t) {
        const auto& c = cores[t];
        if (c.rank() != 4 || c.size() != volume(c.dims)) throw ShapeMismatch("core " + std::to_string(t + 1) + " is not rank 4");
        if (t + 1 < cores.size() && c.dims[3] != cores[t + 1].dims[0]) {
            throw ShapeMismatch("rank mismatch between cores " + std::to_string(t + 1) + " and " +
                                std::to_string(t + 2));
        }
    }
    if (cores.front().dims[0] != 1 || cores.back().dims[3] != 1) throw ShapeMismatch("boundary ranks must be 1");
    const CombinationShape s = shape();
    s.validate();
    if (bias.size() != s.m_product()) throw ShapeMismatch("bias length must equal M");
}

std::vector<double> dense_forward(const Tensor& W, const std::vector<double>& x, const std::vector<double>& b) {
    if (W.rank() != 2) throw ShapeMismatch("dense weight must be a matrix");
    const std::size_t M = W.dims[0], N = W.dims[1];
    if (x.size() != N || b.size() != M) throw ShapeMismatch("dense_forward: operand lengths do not match W");
    std::vector<double> y(M);
    for (std::size_t j = 0; j < M; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < N; ++k) acc += W[j * N + k] * x[k];
        y[j] = acc + b[j];
    }
    return y;
}

Tensor einsum_native(const Tensor& G, const Tensor& input, const EinsumSpec& spec) {
    spec.validate();
    const std::size_t mt = spec.mt, bt = spec.bt, nt = spec.nt, rt = spec.rt, rk = spec.rt_1;
    expect_dims(G, {rt, nt, mt, rk}, "einsum core");
    expect_dims(input, {bt, nt, rk}, "einsum input");
    Tensor out({mt, bt, rt});
    for (std::size_t m = 0; m < mt; ++m) {
        for (std::size_t b = 0; b < bt; ++b) {
            for (std::size_t r = 0; r < rt; ++r) {
                double acc = 0.0;
                for (std::size_t n = 0; n < nt; ++n) {
                    for (std::size_t k = 0; k < rk; ++k) {
                        acc += G[((r * nt + n) * mt + m) * rk + k] * input[(b * nt + n) * rk + k];
                    }
                }
                out[(m * bt + b) * rt + r] = acc;
            }
        }
    }
    return out;
}

std::vector<EinsumSpec> chain_specs(const CombinationShape& shape, const RankList& ranks) {
    shape.validate();
    ranks.validate_for(shape);
    std::vector<EinsumSpec> out;
    std::uint64_t size = shape.n_product();
    for (std::size_t t = shape.d(); t >= 1; --t) {
        EinsumSpec s;
        s.mt = shape.m[t - 1];
        s.nt = shape.n[t - 1];
        s.rt = ranks.r[t - 1];
        s.rt_1 = ranks.r[t];
        if (size % (s.nt * s.rt_1) != 0) throw ShapeMismatch("activation size not divisible during reshape");
        s.bt = size / (s.nt * s.rt_1);
        size = s.mt * s.bt * s.rt;
        out.push_back(s);
    }
    return out;
}

std::vector<double> tt_forward(const TTCores& cores, const std::vector<double>& x, MacCount* macs) {
    cores.validate();
    const CombinationShape shape = cores.shape();
    const RankList ranks = cores.ranks();
    if (x.size() != shape.n_product()) throw ShapeMismatch("input length must equal N");
    const auto specs = chain_specs(shape, ranks);
    if (macs) {
        macs->per_layer.assign(shape.d(), 0);
        macs->total = 0;
    }
    Tensor act({x.size()});
    act.data = x;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const EinsumSpec& s = specs[i];
        const std::size_t t = shape.d() - i;
        act.dims = {s.bt, s.nt, s.rt_1};
        act = einsum_native(cores.cores[t - 1], act, s);
        if (macs) {
            macs->per_layer[t - 1] = s.macs();
            macs->total = checked_add(macs->total, s.macs());
        }
    }
    for (std::size_t j = 0; j < act.size(); ++j) act[j] += cores.bias[j];
    return std::move(act.data);
}

Tensor tt_reconstruct(const TTCores& cores, std::size_t element_budget) {
    cores.validate();
    const CombinationShape shape = cores.shape();
    const std::size_t M = shape.m_product(), N = shape.n_product();
    if (static_cast<Count>(M) * N > element_budget) {
        throw BudgetExceeded("reconstruction of " + std::to_string(M) + "x" + std::to_string(N) +
                             " exceeds the element budget");
    }
    std::size_t Mt = 1, Nt = 1, r = 1;
    std::vector<double> acc{1.0};
    for (const Tensor& G : cores.cores) {
        const std::size_t rp = G.dims[0], n = G.dims[1], m = G.dims[2], q = G.dims[3];
        const std::size_t Mn = Mt * m, Nn = Nt * n;
        if (static_cast<Count>(Mn) * Nn * q > element_budget) {
            throw BudgetExceeded("intermediate reconstruction exceeds the element budget");
        }
        std::vector<double> next(Mn * Nn * q, 0.0);
        for (std::size_t I = 0; I < Mt; ++I) {
            for (std::size_t J = 0; J < Nt; ++J) {
                for (std::size_t p = 0; p < rp; ++p) {
                    const double a = acc[(I * Nt + J) * r + p];
                    for (std::size_t i = 0; i < m; ++i) {
                        for (std::size_t j = 0; j < n; ++j) {
                            double* dst = &next[((I * m + i) * Nn + (J * n + j)) * q];
                            const double* g = &G.data[((p * n + j) * m + i) * q];
                            for (std::size_t s = 0; s < q; ++s) dst[s] += a * g[s];
                        }
                    }
                }
            }
        }
        acc = std::move(next);
        Mt = Mn;
        Nt = Nn;
        r = q;
    }
    Tensor W({M, N});
    W.data = std::move(acc);
    return W;
}

MacCount count_macs(const CombinationShape& shape, const RankList& ranks) {
    shape.validate();
    ranks.validate_for(shape);
    MacCount out;
    out.per_layer.assign(shape.d(), 0);
    Count size = shape.n_product();
    for (std::size_t t = shape.d(); t >= 1; --t) {
        const Count nt = shape.n[t - 1], mt = shape.m[t - 1];
        const Count rt = ranks.r[t - 1], rk = ranks.r[t];
        const Count bt = size / (nt * rk);
        Count c = 0;
        // one MAC per (m, b, r, n, k) iteration of the loop nest
        for (Count m = 0; m < mt; ++m) c = checked_add(c, checked_mul(checked_mul(bt, rt), checked_mul(nt, rk)));
        out.per_layer[t - 1] = c;
        out.total = checked_add(out.total, c);
        size = mt * bt * rt;
    }
    return out;
}

TTCores random_cores(const CombinationShape& shape, const RankList& ranks, std::uint64_t seed) {
    shape.validate();
    ranks.validate_for(shape);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    TTCores out;
    for (std::size_t t = 1; t <= shape.d(); ++t) {
        const std::size_t rp = ranks.r[t - 1], q = ranks.r[t];
        Tensor c({rp, shape.n[t - 1], shape.m[t - 1], q});
        const double scale = 1.0 / std::sqrt(static_cast<double>(rp * q));
        for (double& v : c.data) v = dist(rng) * scale;
        out.cores.push_back(std::move(c));
    }
    out.bias.resize(shape.m_product());
    for (double& v : out.bias) v = dist(rng);
    return out;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

void write_fixture(const std::filesystem::path& path, const Tensor& t, FixtureType type) {
    if (t.rank() > 255) throw ShapeMismatch("fixture rank above 255");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os.write("TTDT", 4);
    const std::uint8_t tag = static_cast<std::uint8_t>(type);
    const std::uint8_t rank = static_cast<std::uint8_t>(t.rank());
    const std::uint16_t reserved = 0;
    os.write(reinterpret_cast<const char*>(&tag), 1);
    os.write(reinterpret_cast<const char*>(&rank), 1);
    os.write(reinterpret_cast<const char*>(&reserved), 2);
    for (std::size_t d : t.dims) {
        const std::uint64_t v = d;
        os.write(reinterpret_cast<const char*>(&v), 8);
    }
    if (type == FixtureType::f64) {
        os.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.size() * 8));
    } else {
        for (double v : t.data) {
            const float f = static_cast<float>(v);
            os.write(reinterpret_cast<const char*>(&f), 4);
        }
    }
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

Tensor read_fixture(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    char magic[4];
    std::uint8_t tag = 0, rank = 0;
    std::uint16_t reserved = 0;
    is.read(magic, 4);
    is.read(reinterpret_cast<char*>(&tag), 1);
    is.read(reinterpret_cast<char*>(&rank), 1);
    is.read(reinterpret_cast<char*>(&reserved), 2);
    if (!is || std::memcmp(magic, "TTDT", 4) != 0) throw std::runtime_error("not a tensor fixture: " + path.string());
    if (tag != 1 && tag != 2) throw std::runtime_error("unknown fixture dtype tag " + std::to_string(tag));
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) {
        std::uint64_t v = 0;
        is.read(reinterpret_cast<char*>(&v), 8);
        d = v;
    }
    Tensor t(dims);
    if (tag == 2) {
        is.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.size() * 8));
    } else {
        for (double& v : t.data) {
            float f = 0;
            is.read(reinterpret_cast<char*>(&f), 4);
            v = f;
        }
    }
    if (!is) throw std::runtime_error("truncated fixture: " + path.string());
    return t;
}

}  // namespace ttdse
