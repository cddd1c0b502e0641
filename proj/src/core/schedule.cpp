#include "schedule.hpp"

#include "common.hpp"

#include <algorithm>
#include <cmath>

namespace ikit {

TrainPlan::TrainPlan(uint64_t budget_interleaved, uint64_t budget_pairs, MixConfig cfg)
    : budget_interleaved_(budget_interleaved), budget_pairs_(budget_pairs), cfg_(cfg) {
    if (cfg_.batch_interleaved == 0) {
        throw ValidationError("plan: batch_interleaved must be > 0");
    }
    if (budget_pairs != cfg_.laion_batch_multiplier * budget_interleaved) {
        warning_ = "pairs budget " + std::to_string(budget_pairs) + " is not " +
                   std::to_string(cfg_.laion_batch_multiplier) + "x the interleaved budget " +
                   std::to_string(budget_interleaved);
    }
    total_steps_ = (budget_interleaved + cfg_.batch_interleaved - 1) / cfg_.batch_interleaved;
    if (budget_interleaved % cfg_.batch_interleaved != 0) {
        if (!warning_.empty()) {
            warning_ += "; ";
        }
        warning_ += "interleaved budget " + std::to_string(budget_interleaved) +
                    " is not a multiple of the batch size " +
                    std::to_string(cfg_.batch_interleaved) + "; the final step is smaller";
    }
}

StepDirective TrainPlan::directive(uint64_t step) const {
    if (step >= total_steps_) {
        throw ValidationError("plan: step " + std::to_string(step) + " beyond total " +
                              std::to_string(total_steps_));
    }
    StepDirective d;
    d.step = step;
    d.lr = lr_at(step, cfg_);
    const uint64_t consumed_i = step * cfg_.batch_interleaved;
    d.draws_interleaved = std::min(cfg_.batch_interleaved, budget_interleaved_ - consumed_i);
    const uint64_t batch_pairs = cfg_.laion_batch_multiplier * cfg_.batch_interleaved;
    const uint64_t consumed_p = step * batch_pairs;
    d.draws_pairs = std::min(cfg_.laion_batch_multiplier * d.draws_interleaved,
                             budget_pairs_ > consumed_p ? budget_pairs_ - consumed_p : 0);
    d.w_interleaved = cfg_.w_interleaved;
    d.w_pairs = cfg_.w_pairs;
    d.accumulate_within_step = true;
    return d;
}

double lr_at(uint64_t step, const MixConfig & cfg) {
    if (cfg.lr_peak <= 0.0) {
        throw ValidationError("lr_at: lr_peak must be > 0");
    }
    if (cfg.warmup_steps == 0 || step >= cfg.warmup_steps) {
        return cfg.lr_peak;
    }
    return cfg.lr_peak * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps);
}

double combined_loss(double l_interleaved, double l_pairs, const MixConfig & cfg) {
    if (std::isnan(l_interleaved) || std::isnan(l_pairs)) {
        throw ValidationError("combined_loss: NaN input loss");
    }
    return cfg.w_interleaved * l_interleaved + cfg.w_pairs * l_pairs;
}

MixCounts interleaved_mix_counts(uint64_t budget_interleaved, double chatgpt_fraction) {
    if (chatgpt_fraction < 0.0 || chatgpt_fraction > 1.0) {
        throw ValidationError("interleaved_mix_counts: fraction out of [0, 1]");
    }
    MixCounts counts;
    counts.chatgpt = static_cast<uint64_t>(
        std::llround(chatgpt_fraction * static_cast<double>(budget_interleaved)));
    counts.chatgpt = std::min(counts.chatgpt, budget_interleaved);
    counts.mmc4 = budget_interleaved - counts.chatgpt;
    return counts;
}

nlohmann::json directive_to_json(const StepDirective & d) {
    return {
        {"step", d.step},
        {"lr", d.lr},
        {"draws", {{"interleaved", d.draws_interleaved}, {"pairs", d.draws_pairs}}},
        {"loss_weights", {{"interleaved", d.w_interleaved}, {"pairs", d.w_pairs}}},
        {"accumulate_within_step", d.accumulate_within_step},
    };
}

nlohmann::json mix_config_to_json(const MixConfig & cfg) {
    return {
        {"batch_interleaved", cfg.batch_interleaved},
        {"laion_batch_multiplier", cfg.laion_batch_multiplier},
        {"w_interleaved", cfg.w_interleaved},
        {"w_pairs", cfg.w_pairs},
        {"lr_peak", cfg.lr_peak},
        {"warmup_steps", cfg.warmup_steps},
        {"weight_decay_crossattn", cfg.weight_decay_crossattn},
        {"chatgpt_fraction", cfg.chatgpt_fraction},
        {"freeze_special_embeddings", cfg.freeze_special_embeddings},
    };
}

MixConfig mix_config_from_json(const nlohmann::json & j) {
    MixConfig cfg;
    try {
        cfg.batch_interleaved = j.value("batch_interleaved", cfg.batch_interleaved);
        cfg.laion_batch_multiplier = j.value("laion_batch_multiplier", cfg.laion_batch_multiplier);
        cfg.w_interleaved = j.value("w_interleaved", cfg.w_interleaved);
        cfg.w_pairs = j.value("w_pairs", cfg.w_pairs);
        cfg.lr_peak = j.value("lr_peak", cfg.lr_peak);
        cfg.warmup_steps = j.value("warmup_steps", cfg.warmup_steps);
        cfg.weight_decay_crossattn = j.value("weight_decay_crossattn", cfg.weight_decay_crossattn);
        cfg.chatgpt_fraction = j.value("chatgpt_fraction", cfg.chatgpt_fraction);
        cfg.freeze_special_embeddings =
            j.value("freeze_special_embeddings", cfg.freeze_special_embeddings);
    } catch (const nlohmann::json::exception & e) {
        throw ValidationError(std::string("bad mix config: ") + e.what());
    }
    if (cfg.w_interleaved <= 0.0 && cfg.w_pairs <= 0.0) {
        throw ValidationError("mix config: loss weights must not both be zero");
    }
    return cfg;
}

}  // namespace ikit
