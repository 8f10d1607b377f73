#include "mcq/mcq.h"

#include <cstring>
#include <exception>
#include <string>

#include "config.hpp"
#include "dataset_io.hpp"
#include "errors.hpp"
#include "runner.hpp"

namespace {

thread_local std::string tl_error;

void set_error(const std::string& msg) { tl_error = msg; }

mcq_status status_for(const mcq::Error& err) {
    switch (err.kind()) {
        case mcq::ErrorKind::config_error:
            return MCQ_ERR_CONFIG;
        case mcq::ErrorKind::io_error:
            return MCQ_ERR_IO;
        case mcq::ErrorKind::bad_magic:
        case mcq::ErrorKind::version_mismatch:
        case mcq::ErrorKind::truncated:
        case mcq::ErrorKind::duplicate_name:
            return MCQ_ERR_FORMAT;
        default:
            return MCQ_ERR_INVALID_ARGUMENT;
    }
}

template <typename Fn>
mcq_status guarded(Fn&& fn) {
    try {
        tl_error.clear();
        return fn();
    } catch (const mcq::Error& err) {
        set_error(err.what());
        return status_for(err);
    } catch (const std::exception& ex) {
        set_error(ex.what());
        return MCQ_ERR_RUNTIME;
    } catch (...) {
        set_error("unknown error");
        return MCQ_ERR_RUNTIME;
    }
}

mcq_status require_arg(bool ok, const char* what) {
    if (ok) return MCQ_OK;
    set_error(std::string("null or invalid argument: ") + what);
    return MCQ_ERR_INVALID_ARGUMENT;
}

}  // namespace

struct mcq_config {
    mcq::Config cfg;
};

struct mcq_dataset {
    mcq::Dataset data;
};

extern "C" {

const char* mcq_version(void) { return "0.1.0"; }

const char* mcq_status_name(mcq_status status) {
    switch (status) {
        case MCQ_OK: return "ok";
        case MCQ_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case MCQ_ERR_CONFIG: return "config_error";
        case MCQ_ERR_IO: return "io_error";
        case MCQ_ERR_FORMAT: return "format_error";
        case MCQ_ERR_VERIFY_FAILED: return "verify_failed";
        case MCQ_ERR_RUNTIME: return "runtime_error";
    }
    return "unknown";
}

const char* mcq_last_error(void) { return tl_error.c_str(); }

mcq_status mcq_config_create(mcq_config** out) {
    if (auto st = require_arg(out != nullptr, "out")) return st;
    return guarded([&] {
        *out = new mcq_config{};
        return MCQ_OK;
    });
}

mcq_status mcq_config_load(const char* path, mcq_config** out) {
    if (auto st = require_arg(path && out, "path/out")) return st;
    return guarded([&] {
        auto cfg = mcq::Config::parse_file(path);
        *out = new mcq_config{std::move(cfg)};
        return MCQ_OK;
    });
}

mcq_status mcq_config_set(mcq_config* cfg, const char* dotted_assignment) {
    if (auto st = require_arg(cfg && dotted_assignment, "cfg/assignment")) return st;
    return guarded([&] {
        cfg->cfg.set_dotted(dotted_assignment);
        return MCQ_OK;
    });
}

mcq_status mcq_config_get(const mcq_config* cfg, const char* section,
                          const char* key, char* buffer, size_t buffer_len) {
    if (auto st = require_arg(cfg && section && key && buffer, "cfg/section/key"))
        return st;
    return guarded([&] {
        if (!cfg->cfg.has(section, key)) {
            set_error(std::string("no such key: ") + section + "." + key);
            return MCQ_ERR_INVALID_ARGUMENT;
        }
        const std::string value = cfg->cfg.get(section, key, "");
        if (value.size() + 1 > buffer_len) {
            set_error("buffer too small");
            return MCQ_ERR_INVALID_ARGUMENT;
        }
        std::memcpy(buffer, value.c_str(), value.size() + 1);
        return MCQ_OK;
    });
}

void mcq_config_free(mcq_config* cfg) { delete cfg; }

mcq_status mcq_verify(const mcq_config* cfg, uint64_t seed, const char* out_dir,
                      int* all_hold) {
    if (auto st = require_arg(cfg && out_dir && all_hold, "cfg/out_dir/all_hold"))
        return st;
    return guarded([&] {
        const auto outcome = mcq::run_verify(cfg->cfg, seed, out_dir);
        *all_hold = outcome.all_hold ? 1 : 0;
        return MCQ_OK;
    });
}

mcq_status mcq_generate_dataset(const mcq_config* cfg, uint64_t seed,
                                char* path_buffer, size_t buffer_len) {
    if (auto st = require_arg(cfg != nullptr, "cfg")) return st;
    return guarded([&] {
        const std::string path = mcq::run_gen_dataset(cfg->cfg, seed);
        if (path_buffer) {
            if (path.size() + 1 > buffer_len) {
                set_error("path buffer too small");
                return MCQ_ERR_INVALID_ARGUMENT;
            }
            std::memcpy(path_buffer, path.c_str(), path.size() + 1);
        }
        return MCQ_OK;
    });
}

mcq_status mcq_train(const mcq_config* cfg, uint64_t seed, const char* out_dir) {
    if (auto st = require_arg(cfg && out_dir, "cfg/out_dir")) return st;
    return guarded([&] {
        mcq::run_train(cfg->cfg, seed, out_dir);
        return MCQ_OK;
    });
}

mcq_status mcq_evaluate(const mcq_config* cfg, uint64_t seed,
                        const char* checkpoint_path, mcq_eval_result* out) {
    if (auto st = require_arg(cfg && checkpoint_path && out, "cfg/checkpoint/out"))
        return st;
    return guarded([&] {
        const auto res = mcq::run_eval(cfg->cfg, seed, checkpoint_path);
        out->mean_return = res.mean_return;
        out->std_return = res.std_return;
        out->normalized_score = res.normalized;
        return MCQ_OK;
    });
}

mcq_status mcq_finetune(const mcq_config* cfg, uint64_t seed,
                        const char* checkpoint_path, const char* out_dir) {
    if (auto st = require_arg(cfg && checkpoint_path && out_dir,
                              "cfg/checkpoint/out_dir"))
        return st;
    return guarded([&] {
        mcq::run_finetune(cfg->cfg, seed, checkpoint_path, out_dir);
        return MCQ_OK;
    });
}

mcq_status mcq_export_plots(const char* const* run_dirs, size_t n_runs,
                            const char* out_dir) {
    if (auto st = require_arg(run_dirs && out_dir && n_runs > 0,
                              "run_dirs/out_dir"))
        return st;
    return guarded([&] {
        std::vector<std::string> dirs(run_dirs, run_dirs + n_runs);
        mcq::run_export_plots(dirs, out_dir);
        return MCQ_OK;
    });
}

mcq_status mcq_dataset_open(const char* path, mcq_dataset** out) {
    if (auto st = require_arg(path && out, "path/out")) return st;
    return guarded([&] {
        auto data = mcq::read_dataset(path);
        *out = new mcq_dataset{std::move(data)};
        return MCQ_OK;
    });
}

size_t mcq_dataset_size(const mcq_dataset* data) {
    return data ? data->data.size() : 0;
}

size_t mcq_dataset_state_dim(const mcq_dataset* data) {
    return data ? data->data.state_dim : 0;
}

size_t mcq_dataset_action_dim(const mcq_dataset* data) {
    return data ? data->data.action_dim : 0;
}

int mcq_dataset_is_discrete(const mcq_dataset* data) {
    return data && data->data.discrete ? 1 : 0;
}

mcq_status mcq_dataset_get(const mcq_dataset* data, size_t index, double* s,
                           double* a, double* r, double* s_next, uint8_t* d) {
    if (auto st = require_arg(data != nullptr, "data")) return st;
    if (index >= data->data.size()) {
        set_error("transition index out of range");
        return MCQ_ERR_INVALID_ARGUMENT;
    }
    const auto& tr = data->data.transitions[index];
    if (s) std::memcpy(s, tr.s.data(), tr.s.size() * sizeof(double));
    if (a) std::memcpy(a, tr.a.data(), tr.a.size() * sizeof(double));
    if (r) *r = tr.r;
    if (s_next)
        std::memcpy(s_next, tr.s_next.data(), tr.s_next.size() * sizeof(double));
    if (d) *d = tr.d;
    return MCQ_OK;
}

void mcq_dataset_free(mcq_dataset* data) { delete data; }

}  // extern "C"
