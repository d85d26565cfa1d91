#include "auwgcn/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace auwgcn {

void PipelineConfig::validate() const {
    train.validate();
    model.validate();
    spot.validate();
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double to_real(const std::string& v, const std::string& ctx) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing junk");
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument(ctx + ": bad numeric value '" + v + "'");
    }
}

long to_int(const std::string& v, const std::string& ctx) {
    try {
        std::size_t used = 0;
        const long x = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing junk");
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument(ctx + ": bad integer value '" + v + "'");
    }
}

}  // namespace

PipelineConfig parse_config_text(const std::string& text, const std::string& origin) {
    PipelineConfig cfg;
    int gcn_hidden_dim = cfg.model.gcn_hidden.front();

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        const std::string ctx = origin + ":" + std::to_string(lineno);
        if (eq == std::string::npos) throw std::invalid_argument(ctx + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty()) throw std::invalid_argument(ctx + ": empty key or value");

        if (key == "lr") {
            cfg.train.lr = to_real(val, ctx);
        } else if (key == "epochs") {
            cfg.train.epochs = static_cast<int>(to_int(val, ctx));
        } else if (key == "alpha") {
            cfg.train.alpha = to_real(val, ctx);
        } else if (key == "gamma") {
            cfg.train.gamma = to_real(val, ctx);
        } else if (key == "window_seconds") {
            cfg.train.window_seconds = to_real(val, ctx);
        } else if (key == "window_stride_fraction") {
            cfg.train.window_stride_fraction = to_real(val, ctx);
        } else if (key == "boundary_radius_seconds") {
            cfg.train.boundary_radius_seconds = to_real(val, ctx);
        } else if (key == "seed") {
            cfg.train.seed = static_cast<std::uint64_t>(to_int(val, ctx));
        } else if (key == "gcn_layers") {
            cfg.model.gcn_layers = static_cast<int>(to_int(val, ctx));
        } else if (key == "gcn_hidden") {
            gcn_hidden_dim = static_cast<int>(to_int(val, ctx));
        } else if (key == "thr_ap") {
            cfg.spot.thr_ap = to_real(val, ctx);
        } else if (key == "k_dis_seconds_macro") {
            cfg.spot.k_dis_seconds_macro = to_real(val, ctx);
        } else if (key == "k_dis_seconds_micro") {
            cfg.spot.k_dis_seconds_micro = to_real(val, ctx);
        } else if (key == "nms_iou") {
            cfg.spot.nms_iou = to_real(val, ctx);
        } else {
            throw std::invalid_argument(ctx + ": unknown key '" + key + "'");
        }
    }
    if (cfg.model.gcn_layers < 1) throw std::invalid_argument(origin + ": gcn_layers must be >= 1");
    cfg.model.gcn_hidden.assign(static_cast<std::size_t>(cfg.model.gcn_layers), gcn_hidden_dim);
    cfg.validate();
    return cfg;
}

PipelineConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::map<std::string, std::string> config_to_kv(const PipelineConfig& cfg) {
    auto real = [](double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    };
    std::map<std::string, std::string> kv;
    kv["lr"] = real(cfg.train.lr);
    kv["epochs"] = std::to_string(cfg.train.epochs);
    kv["alpha"] = real(cfg.train.alpha);
    kv["gamma"] = real(cfg.train.gamma);
    kv["window_seconds"] = real(cfg.train.window_seconds);
    kv["window_stride_fraction"] = real(cfg.train.window_stride_fraction);
    kv["boundary_radius_seconds"] = real(cfg.train.boundary_radius_seconds);
    kv["seed"] = std::to_string(cfg.train.seed);
    kv["gcn_layers"] = std::to_string(cfg.model.gcn_layers);
    kv["gcn_hidden"] = std::to_string(cfg.model.gcn_hidden.front());
    kv["thr_ap"] = real(cfg.spot.thr_ap);
    kv["k_dis_seconds_macro"] = real(cfg.spot.k_dis_seconds_macro);
    kv["k_dis_seconds_micro"] = real(cfg.spot.k_dis_seconds_micro);
    kv["nms_iou"] = real(cfg.spot.nms_iou);
    return kv;
}

}  // namespace auwgcn
