#pragma once
// File formats: series CSV, versioned text checkpoints, JSON configs and
// reports, per-epoch CSV logs.
//
// Series CSV: header "x0,x1,...[,label]", one row per time step.
//
// Checkpoints are line-oriented text:
//     plda-detector v1            (or plda-qnet v1)
//     window <w> features <D> bottleneck <b>       (detector only)
//     layers <n0> <n1> ... <nL>
//     activations <a0> ... <aL-1>
//     params <P>
//     <P lines, one parameter each, %.17g>

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "plda/agent.hpp"
#include "plda/detector.hpp"
#include "plda/evalgen.hpp"
#include "plda/trainer.hpp"

namespace plda::io {

using json = nlohmann::json;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void write_series_csv(std::ostream& os, const TimeSeries& series);
void write_series_csv(const std::filesystem::path& path, const TimeSeries& series);
// A trailing column named "label" becomes the label vector.
TimeSeries read_series_csv(std::istream& is, std::string name);
TimeSeries read_series_csv(const std::filesystem::path& path);

void save_detector(std::ostream& os, const Detector& det);
void save_detector(const std::filesystem::path& path, const Detector& det);
Detector load_detector(std::istream& is);
Detector load_detector(const std::filesystem::path& path);

void save_qnet(std::ostream& os, const Network& net);
void save_qnet(const std::filesystem::path& path, const Network& net);
Network load_qnet(std::istream& is);
Network load_qnet(const std::filesystem::path& path);

// Unknown keys are rejected; missing keys keep their defaults.
RunConfig run_config_from_json(const json& j);
json to_json(const RunConfig& cfg);

BenchmarkLayout layout_from_json(const json& j);
json to_json(const BenchmarkLayout& layout);
json to_json(const SyntheticSpec& spec);

json to_json(const EvalResult& ev);
json to_json(const RunReport& report, bool include_wall_clock = true);

// (epoch, phase, train_loss_mean, train_loss_max, val_loss, set_size, ac_frac, hs_frac, agent_loss)
void write_epochs_csv(std::ostream& os, const RunReport& report);
// (epoch, iteration, start, action, reward, td_loss)
void write_iterations_csv(std::ostream& os, const RunReport& report);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);

}  // namespace plda::io
