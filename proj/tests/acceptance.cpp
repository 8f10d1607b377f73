// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Training-based criteria fan out across a small worker pool and
// enforce their wall-clock budgets.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "agent.hpp"
#include "cvae.hpp"
#include "dp.hpp"
#include "env.hpp"
#include "harness.hpp"
#include "runner.hpp"

using namespace mcq;

namespace {

struct Criterion {
    std::string name;
    bool pass = false;
    double seconds = 0.0;
    double limit_seconds = 0.0;
    std::string detail;
};

std::vector<Criterion> g_results;

void run_criterion(const std::string& name, double limit_seconds,
                   const std::function<std::pair<bool, std::string>()>& body) {
    Criterion c;
    c.name = name;
    c.limit_seconds = limit_seconds;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        auto [ok, detail] = body();
        c.pass = ok;
        c.detail = detail;
    } catch (const std::exception& ex) {
        c.pass = false;
        c.detail = std::string("exception: ") + ex.what();
    }
    const auto t1 = std::chrono::steady_clock::now();
    c.seconds = std::chrono::duration<double>(t1 - t0).count();
    if (c.seconds > c.limit_seconds) {
        c.pass = false;
        c.detail += " [over time budget]";
    }
    std::printf("[%s] %-28s %7.1fs / %5.0fs  %s\n", c.pass ? "PASS" : "FAIL",
                c.name.c_str(), c.seconds, c.limit_seconds, c.detail.c_str());
    std::fflush(stdout);
    g_results.push_back(std::move(c));
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// --- shared experiment scaffolding ---

const char* kBaseConfig =
    "[env]\n"
    "dim = 2\n"
    "horizon = 100\n"
    "ref_episodes = 500\n"
    "[dataset]\n"
    "noise = 0.3\n"
    "episodes = 500\n"
    "mix = 0.5\n"
    "[train]\n"
    "steps = 50000\n"
    "eval_every = 1000\n"
    "eval_episodes = 10\n"
    "batch_size = 32\n"
    "n_ood = 10\n"
    "lambda = 0.9\n"
    "actor_hidden = 16 16\n"
    "critic_hidden = 16 16\n"
    "cvae_hidden = 32 32\n"
    "[finetune]\n"
    "online_steps = 20000\n"
    "eval_every = 1000\n"
    "eval_episodes = 10\n";

std::string g_workdir;

struct TrainJob {
    Config cfg;
    std::uint64_t seed = 0;
    std::string out_dir;
    TrainOutcome out;
};

void run_jobs(std::vector<TrainJob>& jobs) {
    std::mutex mu;
    std::size_t next = 0;
    auto worker = [&] {
        for (;;) {
            std::size_t k;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= jobs.size()) return;
                k = next++;
            }
            jobs[k].out = run_train(jobs[k].cfg, jobs[k].seed, jobs[k].out_dir);
        }
    };
    const std::size_t n_workers =
        std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()),
                              jobs.size());
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

// --- tabular criteria ---

std::pair<bool, std::string> contraction_criterion() {
    HarnessConfig cfg;  // defaults: 1000 trials, |S|<=20, |A|<=6, three gammas
    const auto exact = check_contraction(11, ContractionOperator::exact_mcb, cfg);
    const auto practical =
        check_contraction(12, ContractionOperator::practical_mcb, cfg);
    const bool ok = exact.holds() && practical.holds();
    return {ok, "worst margins: exact " + fmt(exact.worst_margin) +
                    ", practical " + fmt(practical.worst_margin) +
                    " (tol -1e-6, 1000 trials each)"};
}

std::pair<bool, std::string> sandwich_criterion() {
    HarnessConfig cfg;
    const auto cert = check_sandwich(13, cfg);
    return {cert.holds(), "worst in-support margin " + fmt(cert.worst_margin) +
                              " over 200 MDPs (tol -1e-6)"};
}

std::pair<bool, std::string> improvement_criterion() {
    HarnessConfig cfg;
    const auto cert = check_policy_improvement(14, cfg);
    return {cert.holds(), "worst J(greedy)-J(mu) = " + fmt(cert.worst_margin) +
                              " over 200 MDPs (tol -1e-6)"};
}

std::pair<bool, std::string> overestimation_criterion() {
    HarnessConfig cfg;  // epsilon {0,.05,.1,.2} x N {1,5,10,20} x 100 pairs
    const auto cert = check_overestimation_bound(15, cfg);
    return {cert.worst_margin >= 0.0,
            "worst margin " + fmt(cert.worst_margin) + " over " +
                std::to_string(cert.trials) + " enumerated instances (exact)"};
}

// --- gradient suite ---

double check_cvae_gradients() {
    Rng rng(21);
    CvaeModel model = CvaeModel::make(2, 1, {8}, rng);
    Mat s(6, 2), a(6, 1);
    for (auto& v : s.data) v = rng.uniform(-1, 1);
    for (auto& v : a.data) v = rng.uniform(-0.9, 0.9);
    auto loss = [&]() {
        Rng noise(77);
        return cvae_loss(model, s, a, noise).loss;
    };
    Rng noise(77);
    const CvaeLossResult res = cvae_loss(model, s, a, noise);
    std::vector<double> analytic;
    std::vector<double*> params;
    auto collect = [&](DenseNet& net, const NetGrads& g) {
        for (std::size_t li = 0; li < net.layers.size(); ++li) {
            analytic.insert(analytic.end(), g.dw[li].data.begin(),
                            g.dw[li].data.end());
            analytic.insert(analytic.end(), g.db[li].begin(), g.db[li].end());
            for (auto& v : net.layers[li].w.data) params.push_back(&v);
            for (auto& v : net.layers[li].b) params.push_back(&v);
        }
    };
    collect(model.encoder, res.encoder_grads);
    collect(model.decoder, res.decoder_grads);
    Rng pick(22);
    return grad_check(loss, params, analytic, 220, pick).max_rel_error;
}

McqHyper grad_hyper(AgentAlgorithm algo) {
    McqHyper h;
    h.algorithm = algo;
    h.batch_size = 6;
    h.n_ood = 3;
    h.lambda = 0.8;
    h.actor_hidden = {8};
    h.critic_hidden = {8};
    h.cvae_hidden = {8};
    return h;
}

Dataset grad_dataset() {
    PointEnvConfig ec;
    ec.dim = 2;
    ec.horizon = 20;
    const PointEnv env(ec);
    BehaviorController ctrl;
    return collect_env_dataset(env, ctrl, 6, 23);
}

double check_critic_gradients(AgentAlgorithm algo) {
    const Dataset data = grad_dataset();
    AgentState agent =
        AgentState::make(4, 2, grad_hyper(algo), 2.0 * std::sqrt(2.0), 24);
    Rng rng(25);
    const Batch batch = sample_batch(data, 6, rng);
    const CriticInputs inputs = build_critic_inputs(batch, agent, 26);
    const CriticLossResult res = critic_loss(agent, inputs, 0.8);
    auto loss = [&]() { return critic_loss(agent, inputs, 0.8).loss; };
    std::vector<double*> params;
    std::vector<double> analytic;
    const NetGrads* grads[2] = {&res.grads1, &res.grads2};
    DenseNet* nets[2] = {&agent.critic1, &agent.critic2};
    for (int i = 0; i < 2; ++i) {
        const auto p = param_pointers(*nets[i]);
        params.insert(params.end(), p.begin(), p.end());
        for (std::size_t li = 0; li < grads[i]->dw.size(); ++li) {
            analytic.insert(analytic.end(), grads[i]->dw[li].data.begin(),
                            grads[i]->dw[li].data.end());
            analytic.insert(analytic.end(), grads[i]->db[li].begin(),
                            grads[i]->db[li].end());
        }
    }
    Rng pick(27);
    return grad_check(loss, params, analytic, 220, pick).max_rel_error;
}

double check_actor_gradients() {
    const Dataset data = grad_dataset();
    AgentState agent = AgentState::make(4, 2, grad_hyper(AgentAlgorithm::sac),
                                        2.0 * std::sqrt(2.0), 28);
    Rng rng(29);
    const Batch batch = sample_batch(data, 6, rng);
    Mat zeta(6, 2);
    for (auto& v : zeta.data) v = rng.normal();
    NetGrads grads = NetGrads::zeros_like(agent.actor);
    actor_loss_grads(batch, agent, zeta, grads);
    auto loss = [&]() {
        NetGrads scratch = NetGrads::zeros_like(agent.actor);
        return actor_loss_grads(batch, agent, zeta, scratch);
    };
    std::vector<double> analytic;
    for (std::size_t li = 0; li < grads.dw.size(); ++li) {
        analytic.insert(analytic.end(), grads.dw[li].data.begin(),
                        grads.dw[li].data.end());
        analytic.insert(analytic.end(), grads.db[li].begin(), grads.db[li].end());
    }
    const auto params = param_pointers(agent.actor);
    Rng pick(30);
    return grad_check(loss, params, analytic, 220, pick).max_rel_error;
}

std::pair<bool, std::string> gradient_criterion() {
    const double cvae_err = check_cvae_gradients();
    const double critic_err = check_critic_gradients(AgentAlgorithm::sac);
    const double actor_err = check_actor_gradients();
    const double det_critic_err = check_critic_gradients(AgentAlgorithm::td3);
    const double worst =
        std::max({cvae_err, critic_err, actor_err, det_critic_err});
    return {worst < 1e-4, "max rel errors: behavior-model " + fmt(cvae_err) +
                              ", critic " + fmt(critic_err) + ", actor " +
                              fmt(actor_err) + ", det-critic " +
                              fmt(det_critic_err) + " (need < 1e-4)"};
}

std::pair<bool, std::string> score_criterion() {
    const TaskRefs halfcheetah{-280.18, 12135.0};
    const TaskRefs hopper{-20.27, 3234.3};
    const double e1 = std::abs(normalized_score(-280.18, halfcheetah) - 0.0);
    const double e2 = std::abs(normalized_score(12135.0, halfcheetah) - 100.0);
    const double e3 = std::abs(normalized_score(-20.27, hopper) - 0.0);
    const double worst = std::max({e1, e2, e3});
    return {worst < 1e-9,
            "anchor errors " + fmt(e1) + " / " + fmt(e2) + " / " + fmt(e3) +
                " (need < 1e-9)"};
}

// --- training criteria ---

Config base_config(const std::string& dataset_kind, const std::string& dataset) {
    Config cfg = Config::parse_string(kBaseConfig);
    cfg.set("dataset", "kind", dataset_kind);
    cfg.set("dataset", "path", dataset);
    return cfg;
}

std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4};

std::pair<bool, std::string> end_to_end_criterion() {
    const std::string dataset = g_workdir + "/medium.mcqd";
    Config cfg = base_config("medium", dataset);
    run_gen_dataset(cfg, 1000);

    std::vector<TrainJob> jobs;
    for (std::uint64_t seed : kSeeds) {
        jobs.push_back({cfg, seed, g_workdir + "/e2e_mcq_s" + std::to_string(seed)});
        Config sac = cfg;
        sac.set("train", "lambda", "1.0");
        jobs.push_back({sac, seed, g_workdir + "/e2e_sac_s" + std::to_string(seed)});
    }
    run_jobs(jobs);

    const PointEnv env = env_from_config(cfg);
    BehaviorController ctrl = controller_from_config(cfg);
    const double behavior =
        evaluate_controller(env, ctrl, 200, 555).mean_return;

    double mcq_return = 0.0, mcq_qood = 0.0, sac_qood = 0.0, mcq_qin_max = -1e300;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& last = jobs[i].out.rows.back();
        if (jobs[i].out_dir.find("mcq") != std::string::npos) {
            mcq_return += last.eval_return / 4.0;
            mcq_qood += last.q_ood / 4.0;
            for (const auto& row : jobs[i].out.rows)
                mcq_qin_max = std::max(mcq_qin_max, row.q_in_dist);
        } else {
            sac_qood += last.q_ood / 4.0;
        }
    }
    const double cap = env.r_max() / (1.0 - 0.99);
    const bool return_ok = mcq_return >= behavior;
    const bool overest_ok = sac_qood >= 2.0 * mcq_qood;
    const bool bounded_ok = mcq_qin_max <= cap + 1.0;
    return {return_ok && overest_ok && bounded_ok,
            "mcq return " + fmt(mcq_return) + " vs behavior " + fmt(behavior) +
                "; ood-Q ablation " + fmt(sac_qood) + " vs mcq " +
                fmt(mcq_qood) + "; in-dist Q max " + fmt(mcq_qin_max) +
                " (cap " + fmt(cap) + ")"};
}

std::pair<bool, std::string> lambda_ordering_criterion() {
    const std::string dataset = g_workdir + "/replay.mcqd";
    Config cfg = base_config("replay-mix", dataset);
    cfg.set("train", "steps", "20000");
    run_gen_dataset(cfg, 2000);

    const std::vector<double> lambdas = {0.3, 0.5, 0.95};
    std::vector<TrainJob> jobs;
    for (double lam : lambdas) {
        for (std::uint64_t seed : kSeeds) {
            Config c = cfg;
            c.set("train", "lambda", fmt(lam));
            jobs.push_back({c, seed,
                            g_workdir + "/lam" + fmt(lam) + "_s" +
                                std::to_string(seed)});
        }
    }
    run_jobs(jobs);

    // q[lambda index][seed index]
    double q[3][4];
    for (std::size_t li = 0; li < 3; ++li)
        for (std::size_t si = 0; si < 4; ++si)
            q[li][si] = jobs[li * 4 + si].out.rows.back().q_in_dist;

    int correct = 0, total = 0;
    for (std::size_t li = 0; li + 1 < 3; ++li)
        for (std::size_t si = 0; si < 4; ++si) {
            ++total;
            if (q[li][si] < q[li + 1][si]) ++correct;
        }
    // Sign test: P(Bin(8, 1/2) >= correct).
    double p_value = 0.0;
    const double comb[9] = {1, 8, 28, 56, 70, 56, 28, 8, 1};
    for (int k = correct; k <= 8; ++k) p_value += comb[k] / 256.0;

    double means[3] = {0, 0, 0};
    for (std::size_t li = 0; li < 3; ++li)
        for (std::size_t si = 0; si < 4; ++si) means[li] += q[li][si] / 4.0;
    const bool increasing = means[0] < means[1] && means[1] < means[2];

    return {increasing && p_value < 0.05,
            "mean in-dist Q " + fmt(means[0]) + " < " + fmt(means[1]) + " < " +
                fmt(means[2]) + "; orderings " + std::to_string(correct) + "/8, p=" +
                fmt(p_value)};
}

std::pair<bool, std::string> n_insensitivity_criterion() {
    const std::string dataset = g_workdir + "/replay.mcqd";
    Config cfg = base_config("replay-mix", dataset);
    cfg.set("train", "steps", "20000");
    cfg.set("train", "lambda", "0.95");
    if (!std::filesystem::exists(dataset)) run_gen_dataset(cfg, 2000);

    const std::vector<std::size_t> ns = {5, 10, 20};
    std::vector<TrainJob> jobs;
    for (std::size_t n : ns) {
        for (std::uint64_t seed : kSeeds) {
            Config c = cfg;
            c.set("train", "n_ood", std::to_string(n));
            jobs.push_back({c, seed,
                            g_workdir + "/n" + std::to_string(n) + "_s" +
                                std::to_string(seed)});
        }
    }
    run_jobs(jobs);

    double means[3] = {0, 0, 0};
    for (std::size_t ni = 0; ni < 3; ++ni)
        for (std::size_t si = 0; si < 4; ++si)
            means[ni] += jobs[ni * 4 + si].out.rows.back().normalized_score / 4.0;
    const double reference = std::abs(means[1]);  // N = 10
    double worst_gap = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            worst_gap = std::max(worst_gap, std::abs(means[i] - means[j]));
    return {worst_gap < 0.15 * reference,
            "normalized means N5/N10/N20: " + fmt(means[0]) + " / " +
                fmt(means[1]) + " / " + fmt(means[2]) + "; worst gap " +
                fmt(worst_gap) + " vs allowance " + fmt(0.15 * reference)};
}

std::pair<bool, std::string> finetune_criterion() {
    Config cfg = base_config("medium", g_workdir + "/medium.mcqd");
    struct FtJob {
        std::uint64_t seed;
        TrainOutcome out;
    };
    std::vector<FtJob> jobs = {{1, {}}, {2, {}}};
    std::vector<std::thread> pool;
    for (auto& job : jobs)
        pool.emplace_back([&job, &cfg] {
            const std::string ckpt = g_workdir + "/e2e_mcq_s" +
                                     std::to_string(job.seed) +
                                     "/checkpoint.mcqc";
            job.out = run_finetune(cfg, job.seed, ckpt,
                                   g_workdir + "/ft_s" + std::to_string(job.seed));
        });
    for (auto& t : pool) t.join();

    bool ok = true;
    std::string detail;
    for (const auto& job : jobs) {
        const double pre = job.out.rows.at(0).normalized_score;
        double worst = 1e300;
        for (const auto& row : job.out.rows)
            worst = std::min(worst, row.normalized_score);
        ok = ok && worst >= 0.9 * pre;
        if (!detail.empty()) detail += "; ";
        detail += "seed " + std::to_string(job.seed) + ": pre " + fmt(pre) +
                  ", worst " + fmt(worst);
    }
    return {ok, detail + " (floor 0.9 x pre, normalized score)"};
}

std::pair<bool, std::string> determinism_criterion() {
    Config cfg = base_config("medium", g_workdir + "/medium.mcqd");
    cfg.set("train", "steps", "3000");
    cfg.set("train", "eval_every", "1000");
    std::vector<TrainJob> jobs = {{cfg, 9, g_workdir + "/det_a"},
                                  {cfg, 9, g_workdir + "/det_b"}};
    run_jobs(jobs);
    auto slurp = [](const std::string& p) {
        std::ifstream is(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(is), {});
    };
    const bool metrics_equal = slurp(g_workdir + "/det_a/metrics.csv") ==
                               slurp(g_workdir + "/det_b/metrics.csv");
    const bool ckpt_equal = slurp(g_workdir + "/det_a/checkpoint.mcqc") ==
                            slurp(g_workdir + "/det_b/checkpoint.mcqc");
    return {metrics_equal && ckpt_equal,
            std::string("metrics ") + (metrics_equal ? "identical" : "DIFFER") +
                ", checkpoints " + (ckpt_equal ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
    const std::string filter = argc > 1 ? argv[1] : "";
    g_workdir = "acceptance_runs";
    std::filesystem::remove_all(g_workdir);
    std::filesystem::create_directories(g_workdir);

    struct Entry {
        const char* name;
        double limit;
        std::function<std::pair<bool, std::string>()> body;
    };
    const std::vector<Entry> entries = {
        {"contraction", 30, contraction_criterion},
        {"value-sandwich", 60, sandwich_criterion},
        {"policy-improvement", 60, improvement_criterion},
        {"overestimation-bound", 30, overestimation_criterion},
        {"gradient-suite", 60, gradient_criterion},
        {"normalized-score", 5, score_criterion},
        {"end-to-end-training", 900, end_to_end_criterion},
        {"lambda-ordering", 1200, lambda_ordering_criterion},
        {"n-insensitivity", 1200, n_insensitivity_criterion},
        {"offline-to-online", 600, finetune_criterion},
        {"determinism", 120, determinism_criterion},
    };
    for (const auto& e : entries) {
        if (!filter.empty() && std::string(e.name).find(filter) == std::string::npos)
            continue;
        run_criterion(e.name, e.limit, e.body);
    }

    std::size_t failed = 0;
    for (const auto& c : g_results) failed += c.pass ? 0 : 1;
    std::printf("%zu/%zu criteria passed\n", g_results.size() - failed,
                g_results.size());
    return failed == 0 ? 0 : 1;
}
