#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

namespace ikit {

struct MixConfig {
    uint64_t batch_interleaved = 0;
    uint64_t laion_batch_multiplier = 2;
    double w_interleaved = 1.0;
    double w_pairs = 0.2;
    double lr_peak = 1e-4;
    uint64_t warmup_steps = 5000;
    double weight_decay_crossattn = 0.1;  // carried for downstream trainers
    double chatgpt_fraction = 0.0;        // of the interleaved stream
    bool freeze_special_embeddings = false;
};

struct StepDirective {
    uint64_t step = 0;
    double lr = 0.0;
    uint64_t draws_interleaved = 0;
    uint64_t draws_pairs = 0;
    double w_interleaved = 1.0;
    double w_pairs = 0.2;
    bool accumulate_within_step = true;  // both sources before the optimizer step
};

struct MixCounts {
    uint64_t mmc4 = 0;
    uint64_t chatgpt = 0;
};

// Lazily generated per-step directives. Cumulative draws meet the budgets
// exactly, with a possibly smaller final step.
class TrainPlan {
  public:
    TrainPlan(uint64_t budget_interleaved, uint64_t budget_pairs, MixConfig cfg);

    uint64_t total_steps() const { return total_steps_; }
    StepDirective directive(uint64_t step) const;
    const std::string & warning() const { return warning_; }
    const MixConfig & config() const { return cfg_; }

  private:
    uint64_t budget_interleaved_ = 0;
    uint64_t budget_pairs_ = 0;
    uint64_t total_steps_ = 0;
    MixConfig cfg_;
    std::string warning_;
};

double lr_at(uint64_t step, const MixConfig & cfg);

// w_interleaved * l_interleaved + w_pairs * l_pairs; NaN inputs are rejected.
double combined_loss(double l_interleaved, double l_pairs, const MixConfig & cfg);

MixCounts interleaved_mix_counts(uint64_t budget_interleaved, double chatgpt_fraction);

nlohmann::json directive_to_json(const StepDirective & d);
nlohmann::json mix_config_to_json(const MixConfig & cfg);
MixConfig mix_config_from_json(const nlohmann::json & j);

}  // namespace ikit
