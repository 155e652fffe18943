#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

namespace xlalign::train {

struct StepLog {
  long step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
};

struct ValLog {
  long step = 0;
  double loss = 0.0;
};

/// Loss curve, validation checkpoints and lineage of one training run.
struct TrainReport {
  std::string kind;
  std::vector<StepLog> steps;
  std::vector<ValLog> validation;
  nlohmann::ordered_json evals = nlohmann::ordered_json::array();
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
  std::vector<std::string> lineage;  // parameter digests, oldest first
  std::string selected_checkpoint;   // digest
  long selected_step = -1;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = kind;
    j["steps"] = nlohmann::ordered_json::array();
    for (const auto& s : steps)
      j["steps"].push_back({{"step", s.step}, {"loss", s.loss}, {"lr", s.lr}, {"grad_norm", s.grad_norm}});
    j["validation"] = nlohmann::ordered_json::array();
    for (const auto& v : validation) j["validation"].push_back({{"step", v.step}, {"loss", v.loss}});
    j["evals"] = evals;
    j["extra"] = extra;
    j["lineage"] = lineage;
    j["selected_checkpoint"] = selected_checkpoint;
    j["selected_step"] = selected_step;
    return j;
  }

  /// step,loss,lr,grad_norm,val_loss (val_loss empty where not evaluated).
  std::string to_csv() const {
    std::string out = "step,loss,lr,grad_norm,val_loss\n";
    std::size_t vi = 0;
    char buf[160];
    for (const auto& s : steps) {
      std::string val;
      while (vi < validation.size() && validation[vi].step < s.step) ++vi;
      if (vi < validation.size() && validation[vi].step == s.step) {
        std::snprintf(buf, sizeof buf, "%.6g", validation[vi].loss);
        val = buf;
      }
      std::snprintf(buf, sizeof buf, "%ld,%.6g,%.6g,%.6g,", s.step, s.loss, s.lr, s.grad_norm);
      out += buf + val + "\n";
    }
    return out;
  }
};

}  // namespace xlalign::train
