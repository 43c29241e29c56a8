#include "padc/config.hpp"

#include "padc/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace padc::config {

namespace {

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> items;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        items.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
    }
    return items;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& key) {
    std::vector<double> out;
    for (const auto& item : split_list(text)) {
        out.push_back(parse_double(item, key));
    }
    return out;
}

template <typename T>
std::string join(const std::vector<T>& values, const std::function<std::string(const T&)>& fmt) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        s += (i ? "," : "") + fmt(values[i]);
    }
    return s;
}

std::uint64_t parse_u64(const std::string& text, const std::string& key) {
    std::uint64_t v = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + text + "'");
    }
    return v;
}

int parse_int(const std::string& text, const std::string& key) {
    int v = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError("key '" + key + "': expected an integer, got '" + text + "'");
    }
    return v;
}

bool parse_bool(const std::string& text, const std::string& key) {
    if (text == "on" || text == "true" || text == "1" || text == "yes") {
        return true;
    }
    if (text == "off" || text == "false" || text == "0" || text == "no") {
        return false;
    }
    throw ConfigError("key '" + key + "': expected on/off, got '" + text + "'");
}

// Dispatches each key of a section to its handler; unknown keys are errors.
using Handlers = std::map<std::string, std::function<void(const std::string&)>>;

void apply(const Tree& section, const std::string& name, const Handlers& handlers) {
    for (const auto& [key, child] : section) {
        auto it = handlers.find(key);
        if (it == handlers.end()) {
            throw ConfigError("unknown key '" + key + "' in section [" + name + "]");
        }
        it->second(child.get_value<std::string>());
    }
}

const char* kind_name(nn::NetKind kind) {
    return kind == nn::NetKind::Matching ? "matching" : "linearization";
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) {
        throw RunError("cannot format number");
    }
    return std::string(buf, ptr);
}

double parse_double(const std::string& text, const std::string& key) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError("key '" + key + "': expected a number, got '" + text + "'");
    }
    return v;
}

Tree frontend_section(const frontend::FrontEndConfig& cfg) {
    Tree t;
    const std::function<std::string(const double&)> f = [](const double& v) { return format_double(v); };
    std::vector<double> delays, gains, offsets;
    for (const auto& m : cfg.mismatches) {
        delays.push_back(m.delay);
        gains.push_back(m.gain);
        offsets.push_back(m.offset);
    }
    t.put("sample_rate", format_double(cfg.sample_rate));
    t.put("n_channels", cfg.n_channels);
    t.put("v_pi", format_double(cfg.mzm.v_pi));
    t.put("bias_error", format_double(cfg.mzm.bias_error));
    t.put("extinction", format_double(cfg.mzm.extinction));
    t.put("delays", join(delays, f));
    t.put("gains", join(gains, f));
    t.put("offsets", join(offsets, f));
    t.put("noise_sigma", format_double(cfg.noise_sigma));
    t.put("jitter_sigma", format_double(cfg.jitter_sigma));
    t.put("quant_bits", cfg.quant_bits ? std::to_string(*cfg.quant_bits) : std::string("none"));
    t.put("full_scale", format_double(cfg.full_scale));
    t.put("seed", cfg.rng_seed);
    return t;
}

frontend::FrontEndConfig read_frontend(const Tree& section, frontend::FrontEndConfig base) {
    if (auto p = section.get_optional<std::string>("preset")) {
        base = frontend::preset(*p);
    }
    std::optional<std::vector<double>> delays, gains, offsets;
    auto& c = base;
    const Handlers h{
        {"preset", [](const std::string&) {}},
        {"sample_rate", [&](const std::string& v) { c.sample_rate = parse_double(v, "sample_rate"); }},
        {"n_channels", [&](const std::string& v) {
             c.n_channels = parse_u64(v, "n_channels");
             c.mismatches.resize(c.n_channels);
         }},
        {"v_pi", [&](const std::string& v) { c.mzm.v_pi = parse_double(v, "v_pi"); }},
        {"bias_error", [&](const std::string& v) { c.mzm.bias_error = parse_double(v, "bias_error"); }},
        {"extinction", [&](const std::string& v) { c.mzm.extinction = parse_double(v, "extinction"); }},
        {"delays", [&](const std::string& v) { delays = parse_doubles(v, "delays"); }},
        {"gains", [&](const std::string& v) { gains = parse_doubles(v, "gains"); }},
        {"offsets", [&](const std::string& v) { offsets = parse_doubles(v, "offsets"); }},
        {"noise_sigma", [&](const std::string& v) { c.noise_sigma = parse_double(v, "noise_sigma"); }},
        {"jitter_sigma", [&](const std::string& v) { c.jitter_sigma = parse_double(v, "jitter_sigma"); }},
        {"quant_bits", [&](const std::string& v) {
             if (v == "none") {
                 c.quant_bits.reset();
             } else {
                 c.quant_bits = parse_int(v, "quant_bits");
             }
         }},
        {"full_scale", [&](const std::string& v) { c.full_scale = parse_double(v, "full_scale"); }},
        {"seed", [&](const std::string& v) { c.rng_seed = parse_u64(v, "seed"); }},
    };
    apply(section, "frontend", h);
    const auto assign = [&](const std::optional<std::vector<double>>& list, const char* key, double frontend::MismatchProfile::*field) {
        if (!list) {
            return;
        }
        if (list->size() != c.n_channels) {
            throw ConfigError(std::string("key '") + key + "' lists " + std::to_string(list->size()) +
                              " values for " + std::to_string(c.n_channels) + " channels");
        }
        for (std::size_t m = 0; m < c.n_channels; ++m) {
            c.mismatches[m].*field = (*list)[m];
        }
    };
    assign(delays, "delays", &frontend::MismatchProfile::delay);
    assign(gains, "gains", &frontend::MismatchProfile::gain);
    assign(offsets, "offsets", &frontend::MismatchProfile::offset);
    c.validate();
    return c;
}

Tree corpus_section(const dataset::CorpusConfig& cfg) {
    Tree t;
    t.put("pairs", cfg.n_pairs);
    t.put("valid", cfg.n_valid);
    t.put("length", cfg.length);
    t.put("f_min", format_double(cfg.f_min));
    t.put("f_max", format_double(cfg.f_max));
    t.put("stop_band", cfg.stop_band ? format_double(cfg.stop_band->first) + "," + format_double(cfg.stop_band->second)
                                     : std::string("none"));
    t.put("dbm_min", format_double(cfg.dbm_min));
    t.put("dbm_max", format_double(cfg.dbm_max));
    t.put("snap_to_bins", cfg.snap_to_bins ? "on" : "off");
    t.put("max_harmonic", cfg.max_harmonic);
    t.put("matching_mode", cfg.matching_mode == dataset::MatchingMode::Cascade ? "cascade" : "clean-tones");
    t.put("seed", cfg.rng_seed);
    return t;
}

dataset::CorpusConfig read_corpus(const Tree& section, dataset::CorpusConfig base) {
    auto& c = base;
    const Handlers h{
        {"pairs", [&](const std::string& v) { c.n_pairs = parse_u64(v, "pairs"); }},
        {"valid", [&](const std::string& v) { c.n_valid = parse_u64(v, "valid"); }},
        {"length", [&](const std::string& v) { c.length = parse_u64(v, "length"); }},
        {"f_min", [&](const std::string& v) { c.f_min = parse_double(v, "f_min"); }},
        {"f_max", [&](const std::string& v) { c.f_max = parse_double(v, "f_max"); }},
        {"stop_band", [&](const std::string& v) {
             if (v == "none") {
                 c.stop_band.reset();
                 return;
             }
             const auto band = parse_doubles(v, "stop_band");
             if (band.size() != 2) {
                 throw ConfigError("key 'stop_band' needs two frequencies or 'none'");
             }
             c.stop_band = std::make_pair(band[0], band[1]);
         }},
        {"dbm_min", [&](const std::string& v) { c.dbm_min = parse_double(v, "dbm_min"); }},
        {"dbm_max", [&](const std::string& v) { c.dbm_max = parse_double(v, "dbm_max"); }},
        {"snap_to_bins", [&](const std::string& v) { c.snap_to_bins = parse_bool(v, "snap_to_bins"); }},
        {"max_harmonic", [&](const std::string& v) { c.max_harmonic = parse_int(v, "max_harmonic"); }},
        {"matching_mode", [&](const std::string& v) {
             if (v == "cascade") {
                 c.matching_mode = dataset::MatchingMode::Cascade;
             } else if (v == "clean-tones") {
                 c.matching_mode = dataset::MatchingMode::CleanTones;
             } else {
                 throw ConfigError("key 'matching_mode' must be clean-tones or cascade");
             }
         }},
        {"seed", [&](const std::string& v) { c.rng_seed = parse_u64(v, "seed"); }},
    };
    apply(section, "corpus", h);
    return c;
}

Tree net_section(const nets::NetSpec& spec) {
    Tree t;
    const std::function<std::string(const int&)> f = [](const int& v) { return std::to_string(v); };
    t.put("kind", kind_name(spec.kind));
    t.put("n_inputs", spec.n_inputs);
    t.put("base_channels", spec.base_channels);
    t.put("pyramid", join(spec.pyramid, f));
    t.put("kernel_width", spec.kernel_width);
    t.put("global_skip", spec.global_skip ? "on" : "off");
    t.put("seed", spec.rng_seed);
    return t;
}

nets::NetSpec read_net(const Tree& section, nets::NetSpec base) {
    auto& s = base;
    const Handlers h{
        {"kind", [&](const std::string& v) {
             if (v == "linearization") {
                 s.kind = nn::NetKind::Linearization;
             } else if (v == "matching") {
                 s.kind = nn::NetKind::Matching;
             } else {
                 throw ConfigError("key 'kind' must be linearization or matching");
             }
         }},
        {"n_inputs", [&](const std::string& v) { s.n_inputs = parse_u64(v, "n_inputs"); }},
        {"base_channels", [&](const std::string& v) { s.base_channels = parse_int(v, "base_channels"); }},
        {"pyramid", [&](const std::string& v) {
             s.pyramid.clear();
             for (const auto& item : split_list(v)) {
                 s.pyramid.push_back(parse_int(item, "pyramid"));
             }
         }},
        {"kernel_width", [&](const std::string& v) { s.kernel_width = parse_int(v, "kernel_width"); }},
        {"global_skip", [&](const std::string& v) { s.global_skip = parse_bool(v, "global_skip"); }},
        {"seed", [&](const std::string& v) { s.rng_seed = parse_u64(v, "seed"); }},
    };
    apply(section, "net", h);
    return s;
}

Tree train_section(const training::TrainConfig& cfg) {
    Tree t;
    t.put("steps", cfg.total_steps);
    t.put("validation_every", cfg.validation_every);
    t.put("learning_rate", format_double(cfg.learning_rate));
    t.put("optimizer", cfg.optimizer == nn::OptimizerKind::AdaGrad ? "adagrad" : "adam");
    t.put("batch_size", cfg.batch_size);
    t.put("seed", cfg.rng_seed);
    t.put("sequence_length", cfg.sequence_length);
    t.put("target_rms", format_double(cfg.target_rms));
    return t;
}

training::TrainConfig read_train(const Tree& section, training::TrainConfig base) {
    auto& c = base;
    const Handlers h{
        {"steps", [&](const std::string& v) { c.total_steps = parse_u64(v, "steps"); }},
        {"validation_every", [&](const std::string& v) { c.validation_every = parse_u64(v, "validation_every"); }},
        {"learning_rate", [&](const std::string& v) { c.learning_rate = parse_double(v, "learning_rate"); }},
        {"optimizer", [&](const std::string& v) {
             if (v == "adam") {
                 c.optimizer = nn::OptimizerKind::Adam;
             } else if (v == "adagrad") {
                 c.optimizer = nn::OptimizerKind::AdaGrad;
             } else {
                 throw ConfigError("key 'optimizer' must be adam or adagrad");
             }
         }},
        {"batch_size", [&](const std::string& v) { c.batch_size = parse_u64(v, "batch_size"); }},
        {"seed", [&](const std::string& v) { c.rng_seed = parse_u64(v, "seed"); }},
        {"sequence_length", [&](const std::string& v) { c.sequence_length = parse_u64(v, "sequence_length"); }},
        {"target_rms", [&](const std::string& v) { c.target_rms = parse_double(v, "target_rms"); }},
    };
    apply(section, "train", h);
    return c;
}

Tree read_ini(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config file " + path.string());
    }
    Tree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("malformed config file " + path.string() + ": " + e.message() + " (line " +
                          std::to_string(e.line()) + ")");
    }
    return tree;
}

void write_ini(const Tree& tree, std::ostream& out) {
    boost::property_tree::ini_parser::write_ini(out, tree);
}

void write_ini(const Tree& tree, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    write_ini(tree, out);
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

std::uint64_t fingerprint(const Tree& tree) {
    std::ostringstream out;
    write_ini(tree, out);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : out.str()) {
        h = (h ^ c) * 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

const Tree& section(const Tree& tree, const std::string& name) {
    static const Tree empty;
    const auto it = tree.find(name);
    return it == tree.not_found() ? empty : it->second;
}

} // namespace padc::config
