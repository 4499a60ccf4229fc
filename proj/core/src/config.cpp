#include "mcva/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mcva/errors.hpp"

namespace mcva {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& origin, int line, const std::string& key,
                            const std::string& what) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": key '" + key + "' " + what);
}

struct Pending {
    bool phase_explicit = false;
    bool steps_explicit = false;
    bool lr_explicit = false;
    bool freeze_ctx_explicit = false;
};

bool parse_bool(const std::string& v, bool& out) {
    if (v == "true" || v == "1") {
        out = true;
        return true;
    }
    if (v == "false" || v == "0") {
        out = false;
        return true;
    }
    return false;
}

} // namespace

const char* phase_name(Phase p) { return p == Phase::kPretrain ? "pretrain" : "finetune"; }

const char* strategy_name(MaskStrategy s) {
    switch (s) {
        case MaskStrategy::kBlock: return "block";
        case MaskStrategy::kRandom: return "random";
        default: return "none";
    }
}

TrainConfig parse_config_text(const std::string& text, const std::string& origin) {
    TrainConfig cfg;
    Pending pending;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;

    const auto as_int = [&](const std::string& v, const std::string& key, int line_no,
                            int min_v) {
        try {
            std::size_t pos = 0;
            const long n = std::stol(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("trail");
            if (n < min_v) bad_value(origin, line_no, key, "out of range (" + v + ")");
            return static_cast<int>(n);
        } catch (const ConfigError&) {
            throw;
        } catch (...) {
            bad_value(origin, line_no, key, "is not an integer (" + v + ")");
        }
    };
    const auto as_double = [&](const std::string& v, const std::string& key, int line_no) {
        try {
            std::size_t pos = 0;
            const double d = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("trail");
            return d;
        } catch (...) {
            bad_value(origin, line_no, key, "is not a number (" + v + ")");
        }
    };

    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));

        if (key == "phase") {
            if (val == "pretrain") cfg.phase = Phase::kPretrain;
            else if (val == "finetune") cfg.phase = Phase::kFinetune;
            else bad_value(origin, lineno, key, "must be pretrain|finetune");
            pending.phase_explicit = true;
        } else if (key == "steps") {
            cfg.steps = as_int(val, key, lineno, 0);
            pending.steps_explicit = true;
        } else if (key == "batch_size") {
            cfg.batch_size = as_int(val, key, lineno, 1);
        } else if (key == "lr_max") {
            cfg.lr_max = as_double(val, key, lineno);
            if (cfg.lr_max <= 0) bad_value(origin, lineno, key, "must be positive");
            pending.lr_explicit = true;
        } else if (key == "seed") {
            try {
                cfg.seed = std::stoull(val);
            } catch (...) {
                bad_value(origin, lineno, key, "is not an unsigned integer (" + val + ")");
            }
        } else if (key == "data.dir") {
            cfg.data_dir = val;
        } else if (key == "eval.dir") {
            cfg.eval_dir = val;
        } else if (key == "eval.every") {
            cfg.eval_every = as_int(val, key, lineno, 0);
        } else if (key == "eval.f1_rule") {
            if (val == "or") cfg.f1_rule_or = true;
            else if (val == "and") cfg.f1_rule_or = false;
            else bad_value(origin, lineno, key, "must be or|and");
        } else if (key == "mask.ratio") {
            cfg.mask_ratio = as_double(val, key, lineno);
            if (cfg.mask_ratio < 0.0 || cfg.mask_ratio > 1.0) {
                bad_value(origin, lineno, key, "out of range [0,1] (" + val + ")");
            }
        } else if (key == "mask.strategy") {
            if (val == "block") cfg.mask_strategy = MaskStrategy::kBlock;
            else if (val == "random") cfg.mask_strategy = MaskStrategy::kRandom;
            else if (val == "none") cfg.mask_strategy = MaskStrategy::kNone;
            else bad_value(origin, lineno, key, "must be block|random|none");
        } else if (key == "mask.block_min") {
            cfg.block_min = as_int(val, key, lineno, 0);
        } else if (key == "mask.block_max") {
            cfg.block_max = as_int(val, key, lineno, 0);
        } else if (key == "pretext.location_mode") {
            if (val == "random") cfg.pretext_location = LocationMode::kRandom;
            else if (val == "fixed") cfg.pretext_location = LocationMode::kFixed;
            else bad_value(origin, lineno, key, "must be random|fixed");
        } else if (key == "pretext.query_mode") {
            if (val == "pe_plus_patch") cfg.pretext_query = QueryMode::kPePlusPatch;
            else if (val == "pe_only") cfg.pretext_query = QueryMode::kPeOnly;
            else bad_value(origin, lineno, key, "must be pe_plus_patch|pe_only");
        } else if (key == "pretext.normalize_side") {
            if (val == "target") cfg.pretext_normalize = NormalizeSide::kTarget;
            else if (val == "prediction") cfg.pretext_normalize = NormalizeSide::kPrediction;
            else bad_value(origin, lineno, key, "must be target|prediction");
        } else if (key == "freeze.image_encoder") {
            if (!parse_bool(val, cfg.freeze_image_encoder)) {
                bad_value(origin, lineno, key, "must be true|false");
            }
        } else if (key == "freeze.context_encoder") {
            if (!parse_bool(val, cfg.freeze_context_encoder)) {
                bad_value(origin, lineno, key, "must be true|false");
            }
            pending.freeze_ctx_explicit = true;
        } else if (key == "decoder.n_iters") {
            cfg.n_iters = as_int(val, key, lineno, 1);
        } else if (key == "train.grad_clip") {
            cfg.grad_clip = as_double(val, key, lineno);
            if (cfg.grad_clip < 0) bad_value(origin, lineno, key, "must be >= 0");
        } else if (key == "train.weight_decay") {
            cfg.weight_decay = as_double(val, key, lineno);
            if (cfg.weight_decay < 0) bad_value(origin, lineno, key, "must be >= 0");
        } else if (key == "model.feature_dim") {
            cfg.feature_dim = as_int(val, key, lineno, 1);
        } else if (key == "model.context_dim") {
            cfg.context_dim = as_int(val, key, lineno, 1);
        } else if (key == "model.patch_feature_dim") {
            cfg.patch_feature_dim = as_int(val, key, lineno, 4);
        } else if (key == "model.token_dim") {
            cfg.token_dim = as_int(val, key, lineno, 4);
        } else if (key == "model.latent_tokens") {
            cfg.latent_tokens = as_int(val, key, lineno, 1);
        } else if (key == "model.agt_pairs") {
            cfg.agt_pairs = as_int(val, key, lineno, 0);
        } else if (key == "threads") {
            cfg.threads = as_int(val, key, lineno, 0);
        } else if (key == "log.path") {
            cfg.log_path = val;
        } else {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key '" +
                              key + "'");
        }
    }

    // phase-dependent defaults
    if (!pending.steps_explicit) cfg.steps = cfg.phase == Phase::kPretrain ? 2000 : 3000;
    if (!pending.lr_explicit) cfg.lr_max = cfg.phase == Phase::kPretrain ? 5e-4 : 1.25e-4;
    if (!pending.freeze_ctx_explicit) {
        cfg.freeze_context_encoder = cfg.phase == Phase::kPretrain;
    }

    if (cfg.phase == Phase::kPretrain) {
        if (cfg.mask_ratio >= 1.0) {
            throw ConfigError(origin + ": pretraining forbids mask.ratio = 1");
        }
        if (!cfg.freeze_image_encoder) {
            throw ConfigError(origin +
                              ": pretraining requires freeze.image_encoder = true");
        }
    }
    if (cfg.token_dim % 4 != 0 || cfg.patch_feature_dim % 4 != 0) {
        throw ConfigError(origin +
                          ": model.token_dim and model.patch_feature_dim must be divisible by 4");
    }
    if (cfg.block_min > cfg.block_max) {
        throw ConfigError(origin + ": mask.block_min exceeds mask.block_max");
    }
    return cfg;
}

TrainConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::string serialize_config(const TrainConfig& c) {
    std::ostringstream o;
    o.precision(17);
    o << "phase = " << phase_name(c.phase) << "\n";
    o << "steps = " << c.steps << "\n";
    o << "batch_size = " << c.batch_size << "\n";
    o << "lr_max = " << c.lr_max << "\n";
    o << "seed = " << c.seed << "\n";
    if (!c.data_dir.empty()) o << "data.dir = " << c.data_dir << "\n";
    if (!c.eval_dir.empty()) o << "eval.dir = " << c.eval_dir << "\n";
    o << "eval.every = " << c.eval_every << "\n";
    o << "eval.f1_rule = " << (c.f1_rule_or ? "or" : "and") << "\n";
    o << "mask.ratio = " << c.mask_ratio << "\n";
    o << "mask.strategy = " << strategy_name(c.mask_strategy) << "\n";
    o << "mask.block_min = " << c.block_min << "\n";
    o << "mask.block_max = " << c.block_max << "\n";
    o << "pretext.location_mode = "
      << (c.pretext_location == LocationMode::kFixed ? "fixed" : "random") << "\n";
    o << "pretext.query_mode = "
      << (c.pretext_query == QueryMode::kPeOnly ? "pe_only" : "pe_plus_patch") << "\n";
    o << "pretext.normalize_side = "
      << (c.pretext_normalize == NormalizeSide::kTarget ? "target" : "prediction") << "\n";
    o << "freeze.image_encoder = " << (c.freeze_image_encoder ? "true" : "false") << "\n";
    o << "freeze.context_encoder = " << (c.freeze_context_encoder ? "true" : "false") << "\n";
    o << "decoder.n_iters = " << c.n_iters << "\n";
    o << "train.grad_clip = " << c.grad_clip << "\n";
    o << "train.weight_decay = " << c.weight_decay << "\n";
    o << "model.feature_dim = " << c.feature_dim << "\n";
    o << "model.context_dim = " << c.context_dim << "\n";
    o << "model.patch_feature_dim = " << c.patch_feature_dim << "\n";
    o << "model.token_dim = " << c.token_dim << "\n";
    o << "model.latent_tokens = " << c.latent_tokens << "\n";
    o << "model.agt_pairs = " << c.agt_pairs << "\n";
    o << "threads = " << c.threads << "\n";
    if (!c.log_path.empty()) o << "log.path = " << c.log_path << "\n";
    return o.str();
}

bool operator==(const TrainConfig& a, const TrainConfig& b) {
    return serialize_config(a) == serialize_config(b);
}

} // namespace mcva
