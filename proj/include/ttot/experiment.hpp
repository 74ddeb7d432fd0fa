#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ttot/io.hpp"
#include "ttot/metrics.hpp"
#include "ttot/solvers.hpp"
#include "ttot/tot_model.hpp"

namespace ttot {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Algorithm { iht, rgd, both };

inline std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::iht: return "iht";
        case Algorithm::rgd: return "rgd";
        default: return "both";
    }
}

inline Algorithm parse_algorithm(const std::string& s) {
    if (s == "iht") return Algorithm::iht;
    if (s == "rgd") return Algorithm::rgd;
    if (s == "both") return Algorithm::both;
    throw ConfigError("algorithm must be one of iht, rgd, both (got \"" + s + "\")");
}

/// Parameters of a synthetic Monte-Carlo study. `dim` and `rank` are uniform
/// shorthands expanded to full vectors.
struct ExperimentConfig {
    Index n_covariate_modes{3};  // N
    Index n_response_modes{1};   // M
    Index dim{4};                // uniform d
    Index rank{2};               // uniform r
    Index m{200};
    double noise_variance{0.0};
    Algorithm algorithm{Algorithm::both};
    double step_size{0.5};
    Index max_iters{1000};
    Index trials{20};
    std::uint64_t seed{0};
    double success_threshold{1e-5};
    Index jobs{1};
    double max_wall_s{300.0};
    double stop_tol{1e-12}; // relative loss-decrease early stop; 0 disables
    bool init_from_truth{false}; // start at the ground truth instead of spectral init (testing aid)
    bool tolerate_divergence{false}; // count a diverged trial as a failed recovery instead of aborting

    Index order() const { return n_covariate_modes + n_response_modes; }

    std::vector<Index> dims() const { return std::vector<Index>(static_cast<std::size_t>(order()), dim); }

    std::vector<Index> ranks() const {
        std::vector<Index> r(static_cast<std::size_t>(order() - 1), rank);
        // Clamp boundary ranks to the unfolding dimensions.
        Index n_left = 1;
        const std::vector<Index> d = dims();
        Index n_right = product(d);
        for (std::size_t i = 0; i < r.size(); ++i) {
            n_left *= d[i];
            n_right /= d[i];
            r[i] = std::min({r[i], n_left, n_right});
        }
        return r;
    }

    void validate() const {
        if (n_covariate_modes < 1) throw ConfigError("n_covariate_modes must be >= 1");
        if (n_response_modes < 1) throw ConfigError("n_response_modes must be >= 1");
        if (dim < 1) throw ConfigError("dim must be >= 1");
        if (rank < 1) throw ConfigError("rank must be >= 1");
        if (m < 1) throw ConfigError("samples must be >= 1");
        if (noise_variance < 0.0) throw ConfigError("noise_variance must be >= 0");
        if (step_size <= 0.0) throw ConfigError("step must be > 0");
        if (max_iters < 1) throw ConfigError("iters must be >= 1");
        if (trials < 1) throw ConfigError("trials must be >= 1");
        if (success_threshold <= 0.0) throw ConfigError("success_threshold must be > 0");
        if (jobs < 1) throw ConfigError("jobs must be >= 1");
        if (stop_tol < 0.0) throw ConfigError("stop_tol must be >= 0");
    }
};

struct AlgorithmResult {
    std::string algorithm;
    std::vector<double> per_trial_final_error; // ||X_hat - X*||_F per trial
    std::vector<double> mean_loss;             // indexed by iteration - 1
    std::vector<double> mean_error;            // mean of ||X^t - X*||_F
    std::vector<double> mean_error_sq;         // mean of ||X^t - X*||_F^2
    double success_rate{0.0};
    bool any_timed_out{false};
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<AlgorithmResult> algorithms;
};

namespace detail {

/// Run `count` tasks on up to `jobs` threads; task(i) must be independent of
/// execution order. Exceptions are rethrown on the caller thread.
template <typename Task>
void parallel_for(Index count, Index jobs, Task&& task) {
    if (jobs <= 1 || count <= 1) {
        for (Index i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<Index> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const Index i = next.fetch_add(1);
            if (i >= count) return;
            try {
                task(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const Index n_threads = std::min(jobs, count);
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (Index t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// Value at iteration `i` of a trace, holding the last value after an early
/// stop (the iterate no longer changes).
inline const TraceRecord& trace_at(const SolverTrace& trace, std::size_t i) {
    return i < trace.iterations.size() ? trace.iterations[i] : trace.iterations.back();
}

} // namespace detail

/// One Monte-Carlo study: per trial, generate a problem from a derived
/// sub-seed, spectral-initialize, and run the solver. Traces are averaged
/// entry-wise across trials (trials that stop early hold their final value).
inline AlgorithmResult run_algorithm_trials(const ExperimentConfig& cfg, Algorithm algo) {
    if (algo == Algorithm::both) throw ConfigError("run_algorithm_trials: pick one algorithm");

    std::vector<SolverTrace> traces(static_cast<std::size_t>(cfg.trials));
    std::vector<double> finals(static_cast<std::size_t>(cfg.trials), 0.0);
    std::vector<char> timed_out(static_cast<std::size_t>(cfg.trials), 0);

    detail::parallel_for(cfg.trials, cfg.jobs, [&](Index trial) {
        const std::uint64_t sub = derive_seed(cfg.seed, static_cast<std::uint64_t>(trial));
        try {
            auto [problem, truth] = generate_problem(cfg.dims(), cfg.ranks(), cfg.m, cfg.n_covariate_modes,
                                                     NoiseSpec{cfg.noise_variance, sub}, sub);
            TTTensor init = cfg.init_from_truth ? truth : spectral_init(problem, cfg.ranks());

            std::pair<TTTensor, SolverTrace> out = [&] {
                if (algo == Algorithm::iht) {
                    IhtConfig sc;
                    sc.step_size = cfg.step_size;
                    sc.max_iters = cfg.max_iters;
                    sc.target_ranks = cfg.ranks();
                    sc.max_wall_s = cfg.max_wall_s;
                    sc.stop_tol = cfg.stop_tol;
                    return iht_run(problem, init, sc, truth);
                }
                RgdConfig sc;
                sc.step_size = cfg.step_size;
                sc.max_iters = cfg.max_iters;
                sc.target_ranks = cfg.ranks();
                sc.max_wall_s = cfg.max_wall_s;
                sc.stop_tol = cfg.stop_tol;
                return rgd_run(problem, init, sc, truth);
            }();

            finals[static_cast<std::size_t>(trial)] = std::sqrt(recovery_error_sq(out.first, truth));
            timed_out[static_cast<std::size_t>(trial)] = out.second.timed_out ? 1 : 0;
            traces[static_cast<std::size_t>(trial)] = std::move(out.second);
        } catch (const DivergenceError&) {
            if (!cfg.tolerate_divergence) throw;
            finals[static_cast<std::size_t>(trial)] = std::numeric_limits<double>::infinity();
            SolverTrace t;
            t.iterations.push_back({1, std::numeric_limits<double>::infinity(),
                                    std::numeric_limits<double>::infinity(), 0.0});
            traces[static_cast<std::size_t>(trial)] = std::move(t);
        }
    });

    AlgorithmResult res;
    res.algorithm = algorithm_name(algo);
    res.per_trial_final_error = finals;
    std::size_t n_iters = 0;
    for (const auto& t : traces) n_iters = std::max(n_iters, t.iterations.size());
    res.mean_loss.assign(n_iters, 0.0);
    res.mean_error.assign(n_iters, 0.0);
    res.mean_error_sq.assign(n_iters, 0.0);
    for (const auto& t : traces) {
        res.any_timed_out = res.any_timed_out || t.timed_out;
        for (std::size_t i = 0; i < n_iters; ++i) {
            const TraceRecord& rec = detail::trace_at(t, i);
            res.mean_loss[i] += rec.loss;
            res.mean_error_sq[i] += rec.recovery_error_sq;
            res.mean_error[i] += std::sqrt(rec.recovery_error_sq);
        }
    }
    const double inv = 1.0 / static_cast<double>(cfg.trials);
    for (std::size_t i = 0; i < n_iters; ++i) {
        res.mean_loss[i] *= inv;
        res.mean_error[i] *= inv;
        res.mean_error_sq[i] *= inv;
    }
    Index successes = 0;
    for (double e : finals)
        if (e <= cfg.success_threshold) ++successes;
    res.success_rate = static_cast<double>(successes) / static_cast<double>(cfg.trials);
    return res;
}

inline ExperimentResult run_synth(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentResult result;
    result.config = cfg;
    if (cfg.algorithm == Algorithm::iht || cfg.algorithm == Algorithm::both)
        result.algorithms.push_back(run_algorithm_trials(cfg, Algorithm::iht));
    if (cfg.algorithm == Algorithm::rgd || cfg.algorithm == Algorithm::both)
        result.algorithms.push_back(run_algorithm_trials(cfg, Algorithm::rgd));
    return result;
}

/// Write the mean-trace CSVs (one per algorithm) and the JSON summary.
/// Outputs carry no timing so identical (config, seed) runs are byte-identical.
inline void write_synth_artifacts(const ExperimentResult& result, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    nlohmann::json j;
    const ExperimentConfig& cfg = result.config;
    j["config"] = {{"n_covariate_modes", cfg.n_covariate_modes},
                   {"n_response_modes", cfg.n_response_modes},
                   {"dim", cfg.dim},
                   {"rank", cfg.rank},
                   {"samples", cfg.m},
                   {"noise_variance", cfg.noise_variance},
                   {"algorithm", algorithm_name(cfg.algorithm)},
                   {"step", cfg.step_size},
                   {"iters", cfg.max_iters},
                   {"trials", cfg.trials},
                   {"seed", cfg.seed},
                   {"success_threshold", cfg.success_threshold}};
    for (const AlgorithmResult& a : result.algorithms) {
        std::vector<std::vector<double>> rows;
        rows.reserve(a.mean_loss.size());
        for (std::size_t i = 0; i < a.mean_loss.size(); ++i)
            rows.push_back({static_cast<double>(i + 1), a.mean_loss[i], a.mean_error[i], a.mean_error_sq[i]});
        write_csv(out_dir + "/trace_" + a.algorithm + ".csv",
                  "iter,mean_loss,mean_recovery_error,mean_recovery_error_sq", rows);

        nlohmann::json ja;
        ja["algorithm"] = a.algorithm;
        ja["success_rate"] = a.success_rate;
        ja["per_trial_final_error"] = a.per_trial_final_error;
        ja["timed_out"] = a.any_timed_out;
        j["results"].push_back(ja);
    }
    std::ofstream os(out_dir + "/result.json", std::ios::binary);
    os << j.dump(2) << "\n";
}

struct PhaseGridCell {
    Index n_covariate_modes{0};
    Index m{0};
    double success_rate{0.0};
};

/// Noiseless success-rate grid over (N, m). Each cell reuses the base config
/// with noise off; sub-seeds derive from (seed, cell index, trial).
inline std::vector<PhaseGridCell> run_phase_grid(const ExperimentConfig& base,
                                                 const std::vector<Index>& n_values,
                                                 const std::vector<Index>& m_values) {
    base.validate();
    if (n_values.empty() || m_values.empty()) throw ConfigError("phase-grid: empty N or m range");
    if (base.algorithm == Algorithm::both)
        throw ConfigError("phase-grid: pick a single algorithm");

    std::vector<PhaseGridCell> grid;
    std::uint64_t cell_index = 0;
    for (Index n : n_values) {
        for (Index m : m_values) {
            ExperimentConfig cfg = base;
            cfg.n_covariate_modes = n;
            cfg.m = m;
            cfg.noise_variance = 0.0;
            cfg.tolerate_divergence = true;
            cfg.seed = derive_seed(base.seed, cell_index++);
            cfg.validate();
            AlgorithmResult r = run_algorithm_trials(cfg, cfg.algorithm);
            grid.push_back({n, m, r.success_rate});
        }
    }
    return grid;
}

inline void write_phase_grid_csv(const std::vector<PhaseGridCell>& grid, const std::string& path) {
    std::vector<std::vector<double>> rows;
    rows.reserve(grid.size());
    for (const auto& c : grid)
        rows.push_back({static_cast<double>(c.n_covariate_modes), static_cast<double>(c.m), c.success_rate});
    write_csv(path, "N,m,success_rate", rows);
}

/// Fit a TT coefficient tensor to file-based data from spectral init.
inline std::pair<TTTensor, SolverTrace> fit_problem(const TotProblem& problem,
                                                    const std::vector<Index>& ranks, Algorithm algo,
                                                    double step, Index max_iters) {
    problem.validate();
    if (algo == Algorithm::both) throw ConfigError("fit: pick a single algorithm");
    TTTensor init = spectral_init(problem, ranks);
    if (algo == Algorithm::iht) {
        IhtConfig sc;
        sc.step_size = step;
        sc.max_iters = max_iters;
        sc.target_ranks = ranks;
        return iht_run(problem, init, sc);
    }
    RgdConfig sc;
    sc.step_size = step;
    sc.max_iters = max_iters;
    sc.target_ranks = ranks;
    return rgd_run(problem, init, sc);
}

inline void write_trace_csv(const SolverTrace& trace, const std::string& path) {
    std::vector<std::vector<double>> rows;
    rows.reserve(trace.iterations.size());
    for (const auto& r : trace.iterations)
        rows.push_back({static_cast<double>(r.iter), r.loss, r.recovery_error_sq, r.wall_time_s});
    write_csv(path, "iter,loss,recovery_error_sq,wall_time_s", rows);
}

/// Number of worker threads: TTOT_JOBS overrides the flag value.
inline Index resolve_jobs(Index flag_jobs) {
    if (const char* env = std::getenv("TTOT_JOBS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end && *end == '\0' && v >= 1) return static_cast<Index>(v);
        throw ConfigError("TTOT_JOBS must be a positive integer");
    }
    return flag_jobs;
}

} // namespace ttot
