// SPDX-License-Identifier: Apache-2.0
#include "ttdse/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <regex>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ttdse/errors.hpp"
#include "ttdse/executor.hpp"
#include "ttdse/planner.hpp"

namespace ttdse {

namespace {

CatalogLayer row(const char* text, const char* a, const char* b, const char* c, const char* d, const char* e) {
    CatalogLayer l;
    l.text = text;
    const ParsedShape p = parse_shape_entry(text);
    l.layer = p.layer;
    l.multiplicity = p.multiplicity;
    l.published = {a, b, c, d, e};
    return l;
}

std::vector<ModelCatalogEntry> make_catalog() {
    return {
        {"LeNet5", "MNIST",
         {row("[400, 120]", "9.5E+08", "1.2E+07", "1.0E+03", "2.2E+02", "2.2E+02"),
          row("[120, 84]", "5.4E+06", "1.1E+05", "3.3E+02", "5.6E+01", "5.6E+01")}},
        {"LeNet300", "MNIST",
         {row("[784 300]", "1.2E+10", "6.8E+07", "2.4E+03", "5.7E+02", "5.6E+02"),
          row("[300 100]", "1.1E+07", "2.1E+05", "4.5E+02", "8.9E+01", "8.9E+01")}},
        {"AlexNet", "CIFAR10",
         {row("[4096, 2048]", "5.4E+20", "5.4E+19", "9.1E+03", "4.1E+03", "3.1E+03"),
          row("[2048, 2048]", "1.3E+19", "1.9E+18", "6.2E+03", "2.6E+03", "2.0E+03")}},
        {"AlexNet", "CIFAR100",
         {row("[4096, 2048]", "5.4E+20", "5.4E+19", "9.1E+03", "4.1E+03", "3.1E+03"),
          row("[2048, 2048]", "1.3E+19", "1.9E+18", "6.2E+03", "2.6E+03", "2.0E+03"),
          row("[2048, 100]", "1.4E+08", "2.5E+06", "6.0E+02", "1.1E+02", "1.1E+02")}},
        {"AlexNet", "ImageNet",
         {row("[9216, 4096]", "2.5E+25", "3.5E+23", "7.7E+04", "3.9E+04", "2.8E+04"),
          row("[4096, 4096]", "4.1E+22", "6.6E+21", "1.5E+04", "6.5E+03", "4.9E+03"),
          row("[4096, 1000]", "2.3E+14", "6.5E+11", "7.1E+03", "2.2E+03", "2.1E+03")}},
        {"VGG", "CIFAR10",
         {row("[512, 512]", "1.1E+13", "1.8E+12", "1.1E+03", "3.8E+02", "3.2E+02"),
          row("[512, 256]", "4.2E+11", "5.0E+10", "6.3E+02", "2.1E+02", "1.3E+02")}},
        {"VGG", "CIFAR100",
         {row("[512, 512]", "1.1E+13", "1.8E+12", "1.1E+03", "3.8E+02", "3.2E+02"),
          row("[512, 256]", "4.2E+11", "5.0E+10", "6.3E+02", "2.1E+02", "1.9E+02"),
          row("[256, 100]", "4.9E+06", "1.7E+05", "2.1E+02", "4.1E+01", "4.1E+01")}},
        {"VGG", "ImageNet",
         {row("[25088, 4096]", "1.5E+26", "2.8E+24", "8.6E+04", "3.6E+04", "2.7E+04"),
          row("[4096, 4096]", "4.1E+22", "6.6E+21", "1.5E+04", "6.5E+03", "4.9E+03"),
          row("[4096, 1000]", "2.3E+14", "6.5E+11", "7.1E+03", "2.2E+03", "2.1E+03")}},
        {"ResNet", "ImageNet", {row("[2048, 1000]", "3.6E+13", "1.5E+11", "4.6E+03", "1.5E+03", "1.5E+03")}},
        {"GoogleNet", "ImageNet", {row("[1024, 1000]", "5.3E+12", "3.5E+10", "3.3E+03", "1.0E+03", "9.8E+02")}},
        {"Xception", "ImageNet", {row("[2048, 1000]", "3.6E+13", "1.5E+11", "4.6E+03", "1.5E+03", "1.5E+03")}},
        {"GPT2-Medium", "WebText",
         {row("24*4*([1024, 1024])", "9.0E+15", "1.6E+15", "2.8E+03", "1.0E+03", "8.5E+02"),
          row("24*([1024, 4096])", "8.2E+18", "5.6E+17", "6.1E+03", "2.4E+03", "1.9E+03"),
          row("24*([4096, 1024])", "8.2E+18", "5.6E+17", "6.1E+03", "2.4E+03", "1.9E+03"),
          row("[1024, 50257]", "3.6E+04", "1.7E+04", "2.1E+03", "1.0E+02", "1.0E+02")}},
        {"GPT2-Large", "WebText",
         {row("36*4*([1280, 1280])", "5.3E+16", "2.5E+15", "9.7E+03", "3.6E+03", "3.0E+03"),
          row("36*([1280, 5120])", "4.6E+19", "9.5E+17", "2.3E+04", "9.2E+03", "7.5E+03"),
          row("36*([5120, 1280])", "4.6E+19", "9.5E+17", "2.3E+04", "9.2E+03", "7.5E+03"),
          row("[1280, 50257]", "6.9E+04", "3.2E+04", "3.9E+03", "1.7E+02", "1.7E+02")}},
        {"GPT2-ExtraLarge", "WebText",
         {row("48*4*([1600, 1600])", "3.1E+16", "4.1E+14", "1.8E+04", "6.1E+03", "5.4E+03"),
          row("48*([1600, 6400])", "2.1E+19", "1.1E+17", "4.7E+04", "1.7E+04", "1.4E+04"),
          row("48*([6400, 1600])", "2.1E+19", "1.1E+17", "4.7E+04", "1.7E+04", "1.4E+04"),
          row("[1600, 50257]", "8.5E+04", "3.9E+04", "4.9E+03", "2.2E+02", "2.2E+02")}},
        {"GPT3-Ada", "WebText",
         {row("12*4*([768, 768])", "3.7E+15", "5.9E+13", "6.7E+03", "2.7E+03", "2.3E+03"),
          row("12*([768, 3072])", "2.4E+18", "2.1E+16", "1.6E+04", "7.0E+03", "5.6E+03"),
          row("12*([3072, 768])", "2.4E+18", "2.1E+16", "1.6E+04", "7.0E+03", "5.6E+03"),
          row("[768, 50257]", "5.4E+04", "2.5E+04", "3.1E+03", "1.3E+02", "1.3E+02")}},
        {"GPT3-Curie", "WebText",
         {row("24*4*([2048, 2048])", "1.3E+19", "1.9E+18", "6.2E+03", "2.6E+03", "2.0E+03"),
          row("24*([2048, 8192])", "2.4E+22", "2.1E+21", "1.4E+04", "5.9E+03", "4.4E+03"),
          row("24*([8192, 2048])", "2.4E+22", "2.1E+21", "1.4E+04", "5.9E+03", "4.4E+03"),
          row("[2048, 50257]", "5.0E+04", "2.3E+04", "2.9E+03", "1.8E+02", "1.8E+02")}},
        {"GPT3-Davinci", "WebText",
         {row("96*4*([12288, 12288])", "4.9E+29", "5.3E+27", "2.5E+05", "1.3E+05", "1.3E+05"),
          row("96*([12288, 49152])", "4.9E+33", "2.9E+31", "5.1E+05", "2.6E+05", "2.6E+05"),
          row("96*([49152, 12288])", "4.9E+33", "2.9E+31", "5.1E+05", "2.6E+05", "2.6E+05"),
          row("[12288, 50257]", "2.7E+05", "1.3E+05", "1.2E+01", "1.2E+01", "1.2E+01")}},
    };
}

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ValidationError(what, path); }

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            fail(path + "/" + key, "unknown key");
        }
    }
}

std::uint64_t positive(const json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<long long>() < 1) fail(path, "expected a positive integer");
    return v.get<std::uint64_t>();
}

double number(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
}

bool boolean(const json& v, const std::string& path) {
    if (!v.is_boolean()) fail(path, "expected true or false");
    return v.get<bool>();
}

LayerShape shape_pair(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2) fail(path, "expected [N, M]");
    return LayerShape{positive(v[0], path + "/0"), positive(v[1], path + "/1")};
}

ConfigLayer parse_layer(const json& v, const std::string& path) {
    ConfigLayer out;
    if (v.is_string()) {
        try {
            const ParsedShape p = parse_shape_entry(v.get<std::string>());
            out.layer = p.layer;
            out.multiplicity = p.multiplicity;
        } catch (const std::invalid_argument& e) {
            fail(path, e.what());
        }
    } else if (v.is_array()) {
        out.layer = shape_pair(v, path);
    } else if (v.is_object()) {
        check_keys(v, path, {"name", "shape", "multiplicity"});
        if (!v.contains("shape")) fail(path + "/shape", "missing required key");
        out.layer = shape_pair(v["shape"], path + "/shape");
        if (v.contains("multiplicity")) out.multiplicity = positive(v["multiplicity"], path + "/multiplicity");
        if (v.contains("name")) {
            if (!v["name"].is_string() || v["name"].get<std::string>().empty()) fail(path + "/name", "expected a name");
            out.name = v["name"].get<std::string>();
        }
    } else {
        fail(path, "expected a layer object, [N, M] pair or shape string");
    }
    if (out.name.empty()) out.name = out.layer.label();
    if (!std::regex_match(out.name, std::regex("[A-Za-z0-9_.-]+"))) fail(path + "/name", "name must be file-safe");
    return out;
}

EnumerationPolicy parse_enumeration(const json& v, const std::string& path) {
    if (!v.is_object()) fail(path, "expected an object");
    check_keys(v, path,
               {"preset", "max_d", "rank_values", "rank_range", "rank_mode", "align_only", "clamp_to_max_rank",
                "uniform_after_vectorization", "initial_layer_rule"});
    EnumerationPolicy p = EnumerationPolicy::table_convention();
    if (v.contains("preset")) {
        const std::string preset = v["preset"].is_string() ? v["preset"].get<std::string>() : "";
        if (preset == "library") {
            p = EnumerationPolicy{};
        } else if (preset != "table") {
            fail(path + "/preset", "expected \"table\" or \"library\"");
        }
    }
    if (v.contains("max_d")) p.max_d = positive(v["max_d"], path + "/max_d");
    if (v.contains("rank_values") && v.contains("rank_range")) fail(path, "rank_values and rank_range are exclusive");
    if (v.contains("rank_values")) {
        const json& r = v["rank_values"];
        if (!r.is_array()) fail(path + "/rank_values", "expected an array");
        if (r.empty()) fail(path + "/rank_values", "rank_values must be non-empty");
        std::vector<Factor> values;
        for (std::size_t i = 0; i < r.size(); ++i) values.push_back(positive(r[i], path + "/rank_values/" + std::to_string(i)));
        p.ranks = RankSet::list(std::move(values));
    }
    if (v.contains("rank_range")) {
        const json& r = v["rank_range"];
        const std::string rp = path + "/rank_range";
        if (!r.is_object()) fail(rp, "expected an object");
        check_keys(r, rp, {"from", "to", "step"});
        Factor from = r.contains("from") ? positive(r["from"], rp + "/from") : 1;
        Factor step = r.contains("step") ? positive(r["step"], rp + "/step") : 1;
        std::optional<Factor> to;
        if (r.contains("to")) {
            if (r["to"].is_string()) {
                if (r["to"] != "max") fail(rp + "/to", "expected a positive integer or \"max\"");
            } else {
                to = positive(r["to"], rp + "/to");
            }
        }
        p.ranks = RankSet::range(from, to, step);
    }
    if (v.contains("rank_mode")) {
        const json& m = v["rank_mode"];
        if (m == "uniform") {
            p.rank_mode = RankMode::uniform;
        } else if (m == "independent") {
            p.rank_mode = RankMode::independent;
        } else {
            fail(path + "/rank_mode", "expected \"uniform\" or \"independent\"");
        }
    }
    if (v.contains("align_only")) p.align_only = boolean(v["align_only"], path + "/align_only");
    if (v.contains("clamp_to_max_rank")) p.clamp_to_max_rank = boolean(v["clamp_to_max_rank"], path + "/clamp_to_max_rank");
    if (v.contains("uniform_after_vectorization")) {
        p.uniform_after_vectorization = boolean(v["uniform_after_vectorization"], path + "/uniform_after_vectorization");
    }
    if (v.contains("initial_layer_rule")) {
        const json& r = v["initial_layer_rule"];
        if (r == "and") {
            p.initial_layer_rule = InitialLayerRule::both_lower;
        } else if (r == "or") {
            p.initial_layer_rule = InitialLayerRule::either_lower;
        } else {
            fail(path + "/initial_layer_rule", "expected \"and\" or \"or\"");
        }
    }
    try {
        p.validate();
    } catch (const ValidationError& e) {
        fail(path, e.what());
    }
    return p;
}

HardwareConfig parse_hardware(const json& v, const std::string& path) {
    if (!v.is_object()) fail(path, "expected an object");
    check_keys(v, path,
               {"vector_bits", "data_bits", "threads", "registers", "l2_size_bytes", "l2_assoc", "element_bytes",
                "thread_thresholds", "scalability_flops_floor", "scalability_d_limit"});
    HardwareConfig hw;
    auto u = [&](const char* key, unsigned& dst) {
        if (v.contains(key)) dst = static_cast<unsigned>(positive(v[key], path + "/" + key));
    };
    u("vector_bits", hw.vector_bits);
    u("data_bits", hw.data_bits);
    u("threads", hw.threads);
    u("registers", hw.registers_available);
    u("l2_assoc", hw.l2_assoc);
    u("element_bytes", hw.element_bytes);
    if (v.contains("l2_size_bytes")) hw.l2_size_bytes = positive(v["l2_size_bytes"], path + "/l2_size_bytes");
    if (v.contains("scalability_d_limit")) {
        hw.scalability_d_limit = positive(v["scalability_d_limit"], path + "/scalability_d_limit");
    }
    if (v.contains("scalability_flops_floor")) {
        hw.scalability_flops_floor = number(v["scalability_flops_floor"], path + "/scalability_flops_floor");
    }
    if (v.contains("thread_thresholds")) {
        const json& t = v["thread_thresholds"];
        if (!t.is_array()) fail(path + "/thread_thresholds", "expected an array");
        hw.thread_thresholds.clear();
        for (std::size_t i = 0; i < t.size(); ++i) {
            hw.thread_thresholds.push_back(number(t[i], path + "/thread_thresholds/" + std::to_string(i)));
        }
    }
    try {
        hw.validate();
    } catch (const ValidationError& e) {
        fail(path, e.what());
    }
    return hw;
}

std::string join_counts(const std::vector<unsigned>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ":" : "") + std::to_string(v[i]);
    return s;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    os << text;
    if (!os) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

const std::vector<ModelCatalogEntry>& builtin_catalog() {
    static const std::vector<ModelCatalogEntry> catalog = make_catalog();
    return catalog;
}

ParsedShape parse_shape_entry(const std::string& text) {
    static const std::regex pattern(R"(^\s*((?:\d+\s*\*\s*)*)\(?\s*\[\s*(\d+)\s*[, ]\s*(\d+)\s*\]\s*\)?\s*$)");
    std::smatch match;
    if (!std::regex_match(text, match, pattern)) throw std::invalid_argument("unrecognized layer shape: " + text);
    ParsedShape out;
    const std::string prefix = match[1].str();
    const bool parenthesized = text.find('(') != std::string::npos;
    if (prefix.empty() == parenthesized) {
        throw std::invalid_argument("multiplicity needs the form k*([N, M]): " + text);
    }
    std::regex num(R"(\d+)");
    for (auto it = std::sregex_iterator(prefix.begin(), prefix.end(), num); it != std::sregex_iterator(); ++it) {
        const std::uint64_t k = std::stoull(it->str());
        if (k < 1) throw std::invalid_argument("multiplicity must be >= 1: " + text);
        out.multiplicity *= k;
    }
    out.layer.n_in = std::stoull(match[2].str());
    out.layer.m_out = std::stoull(match[3].str());
    if (out.layer.n_in < 1 || out.layer.m_out < 1) throw std::invalid_argument("layer dimensions must be >= 1: " + text);
    return out;
}

Config parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed JSON: ") + e.what(), "/");
    }
    if (!root.is_object()) fail("/", "expected a JSON object");
    check_keys(root, "", {"schema", "layers", "enumeration", "hardware"});
    if (!root.contains("schema")) fail("/schema", "missing required key");
    if (root["schema"] != 1) fail("/schema", "unsupported schema version (expected 1)");
    if (!root.contains("layers") || !root["layers"].is_array() || root["layers"].empty()) {
        fail("/layers", "expected a non-empty array");
    }
    Config cfg;
    std::set<std::string> names;
    for (std::size_t i = 0; i < root["layers"].size(); ++i) {
        const std::string path = "/layers/" + std::to_string(i);
        ConfigLayer l = parse_layer(root["layers"][i], path);
        if (!names.insert(l.name).second) fail(path, "duplicate layer name " + l.name);
        cfg.layers.push_back(std::move(l));
    }
    cfg.policy = root.contains("enumeration") ? parse_enumeration(root["enumeration"], "/enumeration")
                                              : EnumerationPolicy::table_convention();
    cfg.hardware = root.contains("hardware") ? parse_hardware(root["hardware"], "/hardware") : HardwareConfig{};
    return cfg;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

std::array<std::string, kStageCount> ReportRow::sci() const {
    std::array<std::string, kStageCount> out;
    for (std::size_t i = 0; i < kStageCount; ++i) out[i] = to_sci2(counts[i]);
    return out;
}

ReportRow report_reduction(const StageReport& report, const std::string& name, std::uint64_t multiplicity) {
    ReportRow r;
    r.name = name;
    r.layer = report.layer;
    r.multiplicity = multiplicity;
    r.counts = report.counts;
    r.convention = report.convention;
    r.empty = report.empty();
    return r;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
    std::ostringstream os;
    os << "layer,N,M,multiplicity";
    for (std::size_t i = 0; i < kStageCount; ++i) os << "," << stage_name(static_cast<Stage>(i));
    for (std::size_t i = 0; i < kStageCount; ++i) os << ",exact_" << stage_name(static_cast<Stage>(i));
    os << ",no_survivors,convention\n";
    std::array<Count, kStageCount> total{};
    std::uint64_t layers = 0;
    for (const auto& r : rows) {
        os << r.name << "," << r.layer.n_in << "," << r.layer.m_out << "," << r.multiplicity;
        for (const auto& s : r.sci()) os << "," << s;
        for (Count c : r.counts) os << "," << to_string(c);
        os << "," << (r.empty ? "yes" : "no") << ",\"" << r.convention << "\"\n";
        for (std::size_t i = 0; i < kStageCount; ++i) total[i] = checked_add(total[i], checked_mul(r.counts[i], r.multiplicity));
        layers += r.multiplicity;
    }
    os << "TOTAL,,," << layers;
    for (Count c : total) os << "," << to_sci2(c);
    for (Count c : total) os << "," << to_string(c);
    os << ",,\n";
    return os.str();
}

std::string report_table(const std::vector<ReportRow>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(28) << "Layer [N, M]";
    const char* headers[] = {"All initial", "Alignment", "Vectorization", "Initial layer", "Scalability"};
    for (const char* h : headers) os << std::right << std::setw(15) << h;
    os << "\n";
    for (const auto& r : rows) {
        std::string label = "[" + std::to_string(r.layer.n_in) + ", " + std::to_string(r.layer.m_out) + "]";
        if (r.multiplicity > 1) label = std::to_string(r.multiplicity) + "*(" + label + ")";
        os << std::left << std::setw(28) << label;
        for (const auto& s : r.sci()) os << std::right << std::setw(15) << s;
        if (r.empty) os << "  (no survivors)";
        os << "\n";
    }
    if (!rows.empty()) os << "convention: " << rows.front().convention << "\n";
    return os.str();
}

std::string export_pareto(const std::vector<TTSolution>& survivors, const LayerShape& layer) {
    struct Row {
        Count flops, params;
        std::string text;
    };
    std::vector<Row> rows;
    const CostMetrics dense = dense_costs(layer);
    rows.push_back({dense.flops, dense.params,
                    "dense," + to_string(dense.params) + "," + to_string(dense.flops) + ",1," +
                        std::to_string(layer.m_out) + "," + std::to_string(layer.n_in) + ",1:1,"});
    for (const auto& s : survivors) {
        std::ostringstream os;
        os << "tt," << to_string(s.costs.params) << "," << to_string(s.costs.flops) << "," << s.shape.d() << ","
           << join_factors(s.shape.m) << "," << join_factors(s.shape.n) << "," << join_factors(s.ranks.r, ':') << ","
           << join_counts(s.threads_per_layer);
        rows.push_back({s.costs.flops, s.costs.params, os.str()});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.flops != b.flops) return a.flops < b.flops;
        return a.params < b.params;
    });
    std::string out = "kind,params,flops,d,m,n,ranks,threads_per_layer\n";
    for (const auto& r : rows) out += r.text + "\n";
    return out;
}

EmitResult emit_all(const TTSolution& solution, const HardwareConfig& hw, const std::filesystem::path& out,
                    const std::string& layer_name) {
    EmitResult res;
    const auto specs = chain_specs(solution.shape, solution.ranks);
    const std::size_t d = solution.shape.d();
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const std::size_t t = d - i;
        const unsigned threads = t - 1 < solution.threads_per_layer.size()
                                     ? solution.threads_per_layer[t - 1]
                                     : assign_threads(2 * specs[i].macs(), hw);
        try {
            const KernelPlan plan = make_plan(specs[i], hw, threads);
            EmittedFile f;
            f.kernel = out / "kernels" / layer_name / (plan.kernel_name() + ".c");
            f.plan = out / "plans" / layer_name / (plan.kernel_name() + ".json");
            write_file(f.kernel, emit_kernel_source(plan));
            write_file(f.plan, plan_to_json(plan));
            res.files.push_back(std::move(f));
        } catch (const PlannerInfeasible& e) {
            res.skipped.push_back("layer " + layer_name + " core " + std::to_string(t) + ": " + e.what());
        }
    }
    return res;
}

}  // namespace ttdse
