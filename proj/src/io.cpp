#include "plda/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace plda::io {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path.string() + "' for reading");
    return is;
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    // from_chars, unlike stod, accepts subnormals.
    double v = 0.0;
    const char* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end || s.empty()) {
        throw IoError(where + ": cannot parse '" + s + "' as a number");
    }
    return v;
}

}  // namespace

//==============================================================================
// Series CSV
//==============================================================================

void write_series_csv(std::ostream& os, const TimeSeries& series) {
    for (std::size_t d = 0; d < series.dims; ++d) os << (d ? "," : "") << 'x' << d;
    if (series.has_labels()) os << ",label";
    os << '\n';
    for (std::size_t t = 0; t < series.length; ++t) {
        for (std::size_t d = 0; d < series.dims; ++d) {
            os << (d ? "," : "") << fmt(series.values[t * series.dims + d]);
        }
        if (series.has_labels()) os << ',' << static_cast<int>(series.labels[t]);
        os << '\n';
    }
}

void write_series_csv(const std::filesystem::path& path, const TimeSeries& series) {
    auto os = open_out(path);
    write_series_csv(os, series);
}

TimeSeries read_series_csv(std::istream& is, std::string name) {
    std::string line;
    if (!std::getline(is, line)) throw IoError(name + ": empty file");
    auto header = split(line, ',');
    const bool labeled = !header.empty() && header.back() == "label";
    const std::size_t dims = header.size() - (labeled ? 1 : 0);
    if (dims == 0) throw IoError(name + ": no feature columns");
    Vec values;
    std::vector<std::uint8_t> labels;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        auto cells = split(line, ',');
        const std::string where = name + " line " + std::to_string(row);
        if (cells.size() != header.size()) {
            throw IoError(where + ": expected " + std::to_string(header.size()) + " columns, got " +
                          std::to_string(cells.size()));
        }
        for (std::size_t d = 0; d < dims; ++d) values.push_back(parse_double(cells[d], where));
        if (labeled) {
            const double l = parse_double(cells.back(), where);
            if (l != 0.0 && l != 1.0) throw IoError(where + ": label must be 0 or 1");
            labels.push_back(static_cast<std::uint8_t>(l));
        }
    }
    const std::size_t length = values.size() / dims;
    if (length == 0) throw IoError(name + ": no data rows");
    return TimeSeries(std::move(name), length, dims, std::move(values), std::move(labels));
}

TimeSeries read_series_csv(const std::filesystem::path& path) {
    auto is = open_in(path);
    return read_series_csv(is, path.stem().string());
}

//==============================================================================
// Checkpoints
//==============================================================================

namespace {

void write_network_body(std::ostream& os, const Network& net) {
    os << "layers";
    for (std::size_t n : net.layer_sizes()) os << ' ' << n;
    os << "\nactivations";
    for (Activation a : net.activations()) os << ' ' << to_string(a);
    os << "\nparams " << net.num_params() << '\n';
    for (double p : net.params()) os << fmt(p) << '\n';
}

std::istringstream expect_line(std::istream& is, const std::string& key) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("checkpoint truncated before '" + key + "'");
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word != key) throw IoError("checkpoint: expected '" + key + "', found '" + word + "'");
    return ss;
}

Network read_network_body(std::istream& is) {
    auto ls = expect_line(is, "layers");
    std::vector<std::size_t> sizes;
    for (std::size_t n; ls >> n;) sizes.push_back(n);
    auto as = expect_line(is, "activations");
    std::vector<Activation> acts;
    for (std::string a; as >> a;) acts.push_back(activation_from_string(a));
    auto ps = expect_line(is, "params");
    std::size_t count = 0;
    ps >> count;
    Network net(std::move(sizes), std::move(acts));
    if (count != net.num_params()) {
        throw IoError("checkpoint: declares " + std::to_string(count) + " parameters but the layout has " +
                      std::to_string(net.num_params()));
    }
    Vec params(count);
    std::string line;
    for (std::size_t i = 0; i < count; ++i) {
        if (!std::getline(is, line)) throw IoError("checkpoint truncated in the parameter block");
        params[i] = parse_double(line, "checkpoint parameter " + std::to_string(i));
    }
    net.set_params(params);
    return net;
}

void expect_magic(std::istream& is, const std::string& magic) {
    std::string line;
    if (!std::getline(is, line) || line != magic) {
        throw IoError("not a '" + magic + "' checkpoint (header '" + line + "')");
    }
}

}  // namespace

void save_detector(std::ostream& os, const Detector& det) {
    const auto& c = det.config();
    os << "plda-detector v1\n"
       << "window " << c.window << " features " << c.features << " bottleneck " << c.bottleneck
       << '\n';
    write_network_body(os, det.net());
}

void save_detector(const std::filesystem::path& path, const Detector& det) {
    auto os = open_out(path);
    save_detector(os, det);
}

Detector load_detector(std::istream& is) {
    expect_magic(is, "plda-detector v1");
    auto hs = expect_line(is, "window");
    DetectorConfig cfg;
    std::string k1, k2;
    hs >> cfg.window >> k1 >> cfg.features >> k2 >> cfg.bottleneck;
    if (!hs || k1 != "features" || k2 != "bottleneck") throw IoError("checkpoint: malformed detector header");
    Network net = read_network_body(is);
    const auto& sizes = net.layer_sizes();
    // [in, hidden..., bottleneck, mirrored hidden..., out]
    if (sizes.size() < 3 || sizes.size() % 2 == 0) throw IoError("checkpoint: not an autoencoder layout");
    const std::size_t n_hidden = (sizes.size() - 3) / 2;
    cfg.hidden.assign(sizes.begin() + 1, sizes.begin() + 1 + static_cast<std::ptrdiff_t>(n_hidden));
    if (sizes[n_hidden + 1] != cfg.bottleneck) throw IoError("checkpoint: bottleneck does not match the header");
    return Detector(cfg, std::move(net));
}

Detector load_detector(const std::filesystem::path& path) {
    auto is = open_in(path);
    return load_detector(is);
}

void save_qnet(std::ostream& os, const Network& net) {
    os << "plda-qnet v1\n";
    write_network_body(os, net);
}

void save_qnet(const std::filesystem::path& path, const Network& net) {
    auto os = open_out(path);
    save_qnet(os, net);
}

Network load_qnet(std::istream& is) {
    expect_magic(is, "plda-qnet v1");
    return read_network_body(is);
}

Network load_qnet(const std::filesystem::path& path) {
    auto is = open_in(path);
    return load_qnet(is);
}

//==============================================================================
// JSON
//==============================================================================

namespace {

using Setter = std::function<void(const json&)>;

// Applies one setter per key; anything not listed is an error.
void apply_strict(const json& j, const std::string& section,
                  const std::map<std::string, Setter>& setters) {
    if (!j.is_object()) throw InvalidArgument("config section '" + section + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        auto it = setters.find(key);
        if (it == setters.end()) {
            throw InvalidArgument("unknown config key '" + key + "' in '" + section + "'");
        }
        try {
            it->second(value);
        } catch (const json::exception& e) {
            throw InvalidArgument("config key '" + section + "." + key + "': " + e.what());
        }
    }
}

template <class T>
Setter into(T& field) {
    return [&field](const json& v) { field = v.get<T>(); };
}

HessianMode hessian_from_json(const json& j) {
    std::string kind = "diagonal";
    double damping = 1e-3;
    std::size_t max_iters = 200;
    double tolerance = 1e-8;
    apply_strict(j, "hessian",
                 {{"kind", into(kind)},
                  {"damping", into(damping)},
                  {"max_iters", into(max_iters)},
                  {"tolerance", into(tolerance)}});
    if (kind == "identity") return IdentityHessian{};
    if (kind == "diagonal") return DiagonalHessian{damping};
    if (kind == "cg") return CgHessian{damping, max_iters, tolerance};
    throw InvalidArgument("unknown hessian kind '" + kind + "' (expected identity, diagonal or cg)");
}

json hessian_to_json(const HessianMode& mode) {
    return std::visit(
        [](const auto& m) -> json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, IdentityHessian>) {
                return {{"kind", "identity"}};
            } else if constexpr (std::is_same_v<T, DiagonalHessian>) {
                return {{"kind", "diagonal"}, {"damping", m.damping}};
            } else {
                return {{"kind", "cg"},
                        {"damping", m.damping},
                        {"max_iters", m.max_iters},
                        {"tolerance", m.tolerance}};
            }
        },
        mode);
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    apply_strict(
        j, "run",
        {{"window", into(c.window)},
         {"bottleneck", into(c.bottleneck)},
         {"hidden", into(c.hidden)},
         {"detector_lr", into(c.detector_lr)},
         {"batch_size", into(c.batch_size)},
         {"epochs", into(c.epochs)},
         {"alpha", into(c.alpha)},
         {"key_params", into(c.key_params)},
         {"p_explore", into(c.p_explore)},
         {"n_iters",
          [&](const json& v) {
              if (v.is_null()) {
                  c.n_iters.reset();
              } else {
                  c.n_iters = v.get<std::size_t>();
              }
          }},
         {"hessian", [&](const json& v) { c.hessian = hessian_from_json(v); }},
         {"curvature_batch", into(c.curvature_batch)},
         {"reward_scale",
          [&](const json& v) { c.reward_scale = reward_scale_from_string(v.get<std::string>()); }},
         {"state_rewards", into(c.state_rewards)},
         {"agent",
          [&](const json& v) {
              apply_strict(v, "agent",
                           {{"hidden", into(c.agent.hidden)},
                            {"gamma", into(c.agent.gamma)},
                            {"sync_period", into(c.agent.sync_period)},
                            {"lr", into(c.agent.lr)},
                            {"double_dqn", into(c.agent.double_dqn)},
                            {"clip_bootstrap", into(c.agent.clip_bootstrap)}});
          }},
         {"memory", into(c.memory)},
         {"minibatch", into(c.minibatch)},
         {"warm_start_steps", into(c.warm_start_steps)},
         {"patience", into(c.patience)},
         {"max_epochs", into(c.max_epochs)},
         {"validation_fraction", into(c.validation_fraction)},
         {"seed", into(c.seed)},
         {"seeds", into(c.seeds)}});
    c.validate();
    return c;
}

json to_json(const RunConfig& c) {
    return {{"window", c.window},
            {"bottleneck", c.bottleneck},
            {"hidden", c.hidden},
            {"detector_lr", c.detector_lr},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"alpha", c.alpha},
            {"key_params", c.key_params},
            {"p_explore", c.p_explore},
            {"n_iters", c.n_iters ? json(*c.n_iters) : json(nullptr)},
            {"hessian", hessian_to_json(c.hessian)},
            {"curvature_batch", c.curvature_batch},
            {"reward_scale", std::string(to_string(c.reward_scale))},
            {"state_rewards", c.state_rewards},
            {"agent",
             {{"hidden", c.agent.hidden},
              {"gamma", c.agent.gamma},
              {"sync_period", c.agent.sync_period},
              {"lr", c.agent.lr},
              {"double_dqn", c.agent.double_dqn},
              {"clip_bootstrap", c.agent.clip_bootstrap}}},
            {"memory", c.memory},
            {"minibatch", c.minibatch},
            {"warm_start_steps", c.warm_start_steps},
            {"patience", c.patience},
            {"max_epochs", c.max_epochs},
            {"validation_fraction", c.validation_fraction},
            {"seed", c.seed},
            {"seeds", c.seeds}};
}

BenchmarkLayout layout_from_json(const json& j) {
    BenchmarkLayout l;
    apply_strict(j, "layout",
                 {{"train_length", into(l.train_length)},
                  {"test_length", into(l.test_length)},
                  {"dims", into(l.dims)},
                  {"anomaly_segments", into(l.anomaly_segments)},
                  {"anomaly_min_length", into(l.anomaly_min_length)},
                  {"anomaly_max_length", into(l.anomaly_max_length)},
                  {"train_hard_segments", into(l.train_hard_segments)},
                  {"test_hard_segments", into(l.test_hard_segments)},
                  {"hard_min_length", into(l.hard_min_length)},
                  {"hard_max_length", into(l.hard_max_length)},
                  {"hard_jitter", into(l.hard_jitter)},
                  {"gap", into(l.gap)}});
    require(l.anomaly_min_length >= 1 && l.anomaly_min_length <= l.anomaly_max_length,
            "layout: anomaly length range is empty");
    require(l.hard_min_length >= 1 && l.hard_min_length <= l.hard_max_length,
            "layout: hard segment length range is empty");
    return l;
}

json to_json(const BenchmarkLayout& l) {
    return {{"train_length", l.train_length},
            {"test_length", l.test_length},
            {"dims", l.dims},
            {"anomaly_segments", l.anomaly_segments},
            {"anomaly_min_length", l.anomaly_min_length},
            {"anomaly_max_length", l.anomaly_max_length},
            {"train_hard_segments", l.train_hard_segments},
            {"test_hard_segments", l.test_hard_segments},
            {"hard_min_length", l.hard_min_length},
            {"hard_max_length", l.hard_max_length},
            {"hard_jitter", l.hard_jitter},
            {"gap", l.gap}};
}

json to_json(const SyntheticSpec& s) {
    json base = json::array(), anomalies = json::array(), train_hard = json::array(),
         test_hard = json::array();
    for (const auto& b : s.base) base.push_back({{"period", b.period}, {"amplitude", b.amplitude}, {"phase", b.phase}});
    for (const auto& a : s.anomalies) {
        anomalies.push_back({{"start", a.start},
                             {"length", a.length},
                             {"kind", std::string(to_string(a.kind))},
                             {"magnitude", a.magnitude}});
    }
    for (const auto& h : s.train_hard) train_hard.push_back({{"start", h.start}, {"length", h.length}, {"jitter", h.jitter}});
    for (const auto& h : s.test_hard) test_hard.push_back({{"start", h.start}, {"length", h.length}, {"jitter", h.jitter}});
    return {{"train_length", s.train_length},
            {"test_length", s.test_length},
            {"dims", s.dims},
            {"noise", s.noise},
            {"base", base},
            {"anomalies", anomalies},
            {"train_hard", train_hard},
            {"test_hard", test_hard}};
}

json to_json(const EvalResult& ev) {
    return {{"f1", ev.f1}, {"threshold", ev.threshold}, {"precision", ev.precision}, {"recall", ev.recall}};
}

json to_json(const RunReport& r, bool include_wall_clock) {
    json epochs = json::array();
    for (const auto& e : r.epochs) {
        json row = {{"epoch", e.index},
                    {"phase", e.augment ? "augment" : "final"},
                    {"train_loss_mean", e.train_loss_mean},
                    {"train_loss_max", e.train_loss_max},
                    {"val_loss", e.val_loss},
                    {"set_size", e.set_size}};
        if (e.proportions) row["proportions"] = {{"ac", e.proportions->ac}, {"hs", e.proportions->hs}};
        if (e.augmentation) {
            const auto& a = *e.augmentation;
            row["augmentation"] = {{"expand", a.actions.expand},
                                   {"preserve", a.actions.preserve},
                                   {"delete", a.actions.remove},
                                   {"guard_events", a.guard_events},
                                   {"td_updates", a.td_updates},
                                   {"agent_loss", number_or_null(a.mean_td_loss)},
                                   {"key_params", a.key_params}};
        }
        epochs.push_back(std::move(row));
    }
    json out = {{"seed", r.seed},
                {"initial_set_size", r.initial_set_size},
                {"epochs", epochs},
                {"best_val_loss", r.best_val_loss},
                {"final_epochs", r.final_epochs},
                {"early_stopped", r.early_stopped}};
    if (r.initial_proportions) {
        out["initial_proportions"] = {{"ac", r.initial_proportions->ac}, {"hs", r.initial_proportions->hs}};
    }
    if (r.evaluation) out["evaluation"] = to_json(*r.evaluation);
    if (include_wall_clock) out["wall_clock_seconds"] = r.wall_clock_seconds;
    return out;
}

void write_epochs_csv(std::ostream& os, const RunReport& r) {
    os << "epoch,phase,train_loss_mean,train_loss_max,val_loss,set_size,ac_frac,hs_frac,agent_loss\n";
    for (const auto& e : r.epochs) {
        os << e.index << ',' << (e.augment ? "augment" : "final") << ',' << fmt(e.train_loss_mean)
           << ',' << fmt(e.train_loss_max) << ',' << fmt(e.val_loss) << ',' << e.set_size << ',';
        if (e.proportions) os << fmt(e.proportions->ac) << ',' << fmt(e.proportions->hs);
        else os << ',';
        os << ',';
        if (e.augmentation && std::isfinite(e.augmentation->mean_td_loss)) {
            os << fmt(e.augmentation->mean_td_loss);
        }
        os << '\n';
    }
}

void write_iterations_csv(std::ostream& os, const RunReport& r) {
    os << "epoch,iteration,start,action,reward,td_loss\n";
    for (const auto& it : r.iterations) {
        os << it.epoch << ',' << it.iteration << ',' << it.start << ',' << to_string(it.action) << ','
           << fmt(it.reward) << ',';
        if (std::isfinite(it.td_loss)) os << fmt(it.td_loss);
        os << '\n';
    }
}

json read_json(const std::filesystem::path& path) {
    auto is = open_in(path);
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw InvalidArgument("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const json& j) {
    auto os = open_out(path);
    os << j.dump(2) << '\n';
}

}  // namespace plda::io
