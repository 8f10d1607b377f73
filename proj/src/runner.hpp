#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "agent.hpp"
#include "config.hpp"
#include "env.hpp"
#include "harness.hpp"

namespace mcq {

// --- config adapters ---

PointEnv env_from_config(const Config& cfg);
BehaviorController controller_from_config(const Config& cfg);
McqHyper hyper_from_config(const Config& cfg);
HarnessConfig harness_from_config(const Config& cfg);
TaskRefs refs_from_config(const Config& cfg, const PointEnv& env);

/// Tabular MDP from the [mdp] section: either inline tables or a generator
/// seed with optional support_fraction. Returns the MDP and the collection
/// policy (uniform over the generated support, or uniform over all actions
/// for inline specs).
std::pair<TabularMdp, TabularPolicy> mdp_from_config(const Config& cfg);

// --- agent persistence ---

/// Quantizes the live agent to checkpoint precision and writes it. The agent
/// keeps the quantized values, so continuing the run is indistinguishable
/// from reloading the file.
void save_agent(AgentState& agent, const std::string& path);

/// Fills a freshly constructed agent (same config) from a checkpoint.
void load_agent(AgentState& agent, const std::string& path);

// --- runs ---

struct MetricsRow {
    std::uint64_t step = 0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double alpha = 0.0;
    double q_in_dist = 0.0;
    double q_ood = 0.0;
    double target_q = 0.0;
    double eval_return = 0.0;
    double normalized_score = 0.0;
};

extern const char* const kMetricsHeader;

struct VerifyOutcome {
    bool all_hold = false;
    std::vector<PropositionCertificate> certificates;
    std::string report_path;
    std::string jsonl_path;
};

/// Runs the five proposition certificates and writes the report pair.
VerifyOutcome run_verify(const Config& cfg, std::uint64_t seed,
                         const std::string& out_dir);

/// Generates a dataset per the [dataset] (and [env] or [mdp]) sections and
/// writes it to [dataset].path. Returns the written path.
std::string run_gen_dataset(const Config& cfg, std::uint64_t seed);

struct TrainOutcome {
    std::string checkpoint_path;
    std::string metrics_path;
    std::vector<MetricsRow> rows;
    double behavior_return = 0.0;  // controller baseline under eval protocol
    TaskRefs refs;
    std::size_t final_buffer_size = 0;
};

/// Offline training per the [train] section. Writes metrics.csv,
/// manifest.txt and checkpoint.mcqc under out_dir.
TrainOutcome run_train(const Config& cfg, std::uint64_t seed,
                       const std::string& out_dir);

struct EvalOutcome {
    double mean_return = 0.0;
    double std_return = 0.0;
    double normalized = 0.0;
};

EvalOutcome run_eval(const Config& cfg, std::uint64_t seed,
                     const std::string& checkpoint_path);

/// Offline-to-online fine-tuning: 1:1 environment and gradient steps, online
/// transitions appended to the offline buffer, hyperparameters unchanged.
TrainOutcome run_finetune(const Config& cfg, std::uint64_t seed,
                          const std::string& checkpoint_path,
                          const std::string& out_dir);

/// Reads metrics.csv + manifest.txt from each run dir and emits per-figure
/// series: one learning-curve CSV per run plus q_vs_lambda.csv and
/// q_vs_n.csv grouping final statistics by the runs' hyperparameters.
void run_export_plots(const std::vector<std::string>& run_dirs,
                      const std::string& out_dir);

/// Parses a metrics CSV written by run_train/run_finetune.
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

}  // namespace mcq
