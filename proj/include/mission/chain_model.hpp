#pragma once

// Two-state Markov task chain: each task of a mission is either
// successfully completed or incomplete, and the outcome of task k+1
// depends only on the outcome of task k through a time-homogeneous kernel.

#include "mission/error.hpp"
#include "mission/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mission::chain {

enum class Outcome : std::uint8_t { Incomplete = 0, Successful = 1 };

constexpr std::string_view outcome_name(Outcome o) noexcept {
    return o == Outcome::Successful ? "successful" : "incomplete";
}

inline std::optional<Outcome> parse_outcome(std::string_view s) noexcept {
    if (s == "successful" || s == "s" || s == "S") return Outcome::Successful;
    if (s == "incomplete" || s == "u" || s == "U") return Outcome::Incomplete;
    return std::nullopt;
}

namespace detail {

inline void require_probability(double p, const char* what) {
    MISSION_REQUIRE(std::isfinite(p) && p >= 0.0 && p <= 1.0, ErrorCode::InvalidArgument,
                    std::string(what) + " must be a probability in [0,1]");
}

/// x^e with the convention 0^0 = 1.
inline double ipow(double x, std::uint64_t e) {
    return e == 0 ? 1.0 : std::pow(x, static_cast<double>(e));
}

}  // namespace detail

/// Conditional task-to-task success probabilities. Only tau(s,s) and
/// tau(u,u) are stored; tau(s,u) and tau(u,s) are their complements.
class TransitionKernel {
public:
    /// Throws DegenerateKernel when |lambda| = 1, i.e. tau(s,s) = tau(u,u) = 0
    /// or tau(s,s) = tau(u,u) = 1. lambda = 0 is a valid (constant) chain.
    static TransitionKernel from_tau(double tau_ss, double tau_uu) {
        detail::require_probability(tau_ss, "tau_ss");
        detail::require_probability(tau_uu, "tau_uu");
        const double lambda = tau_ss + tau_uu - 1.0;
        MISSION_REQUIRE(std::abs(lambda) < 1.0, ErrorCode::DegenerateKernel,
                        "tau_ss + tau_uu - 1 must lie strictly inside (-1, 1)");
        return TransitionKernel(tau_ss, tau_uu, lambda, 1.0 - tau_uu);
    }

    double tau_ss() const noexcept { return tau_ss_; }
    double tau_uu() const noexcept { return tau_uu_; }
    double tau_su() const noexcept { return 1.0 - tau_ss_; }
    double tau_us() const noexcept { return mu_; }
    double lambda() const noexcept { return lambda_; }
    double mu() const noexcept { return mu_; }

    /// mu / (1 - lambda): the stationary success probability.
    double fixed_point() const noexcept { return mu_ / (1.0 - lambda_); }

    /// Probability that the task after one with outcome `prev` succeeds.
    double success_after(Outcome prev) const noexcept {
        return prev == Outcome::Successful ? tau_ss_ : mu_;
    }

    friend bool operator==(const TransitionKernel&, const TransitionKernel&) = default;

private:
    TransitionKernel(double tau_ss, double tau_uu, double lambda, double mu)
        : tau_ss_(tau_ss), tau_uu_(tau_uu), lambda_(lambda), mu_(mu) {}

    double tau_ss_;
    double tau_uu_;
    double lambda_;
    double mu_;
};

inline TransitionKernel kernel_from_tau(double tau_ss, double tau_uu) {
    return TransitionKernel::from_tau(tau_ss, tau_uu);
}

/// A question about task `n` of a chain; `p1` is the first-task success
/// probability when it is known.
struct ChainQuery {
    TransitionKernel kernel;
    std::optional<double> p1;
    std::uint64_t n = 1;

    void validate() const {
        MISSION_REQUIRE(n >= 1, ErrorCode::InvalidArgument, "task index n must be >= 1");
        if (p1) detail::require_probability(*p1, "p1");
    }

    double known_p1() const {
        validate();
        MISSION_REQUIRE(p1.has_value(), ErrorCode::InvalidArgument, "p1 is required for this query");
        return *p1;
    }
};

/// Pr[A_n] by iterating Pr[A_k] = lambda * Pr[A_{k-1}] + mu from Pr[A_1] = p1.
inline double success_prob_recurrence(const ChainQuery& q) {
    double p = q.known_p1();
    const double lambda = q.kernel.lambda();
    const double mu = q.kernel.mu();
    for (std::uint64_t k = 2; k <= q.n; ++k) p = lambda * p + mu;
    return p;
}

/// Pr[A_n] = (p1 - L) * lambda^(n-1) + L with L = mu / (1 - lambda).
inline double success_prob_closed(const ChainQuery& q) {
    const double p1 = q.known_p1();
    const double limit = q.kernel.fixed_point();
    return (p1 - limit) * detail::ipow(q.kernel.lambda(), q.n - 1) + limit;
}

/// Pr[A_{k+1} | A_1].
inline double rho_ss(const TransitionKernel& kernel, std::uint64_t k) {
    MISSION_REQUIRE(k >= 1, ErrorCode::InvalidArgument, "gap k must be >= 1");
    const double limit = kernel.fixed_point();
    return (1.0 - limit) * detail::ipow(kernel.lambda(), k) + limit;
}

/// Pr[A_{k+1} | not A_1].
inline double rho_us(const TransitionKernel& kernel, std::uint64_t k) {
    MISSION_REQUIRE(k >= 1, ErrorCode::InvalidArgument, "gap k must be >= 1");
    return kernel.fixed_point() * (1.0 - detail::ipow(kernel.lambda(), k));
}

inline double rho_su(const TransitionKernel& kernel, std::uint64_t k) { return 1.0 - rho_ss(kernel, k); }
inline double rho_uu(const TransitionKernel& kernel, std::uint64_t k) { return 1.0 - rho_us(kernel, k); }

/// Pr[A_n] assembled by conditioning on the first task:
/// p1 * rho_{n-1}(s,s) + (1 - p1) * rho_{n-1}(u,s). Requires n >= 2.
inline double success_prob_via_rho(const ChainQuery& q) {
    const double p1 = q.known_p1();
    MISSION_REQUIRE(q.n >= 2, ErrorCode::InvalidArgument, "conditioning on task 1 needs n >= 2");
    return p1 * rho_ss(q.kernel, q.n - 1) + (1.0 - p1) * rho_us(q.kernel, q.n - 1);
}

inline double limiting_success_prob(const TransitionKernel& kernel) {
    return std::clamp(kernel.fixed_point(), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Estimation from training-run outcome logs
// ---------------------------------------------------------------------------

struct OutcomeLog {
    std::vector<std::vector<Outcome>> runs;

    void validate() const {
        for (std::size_t i = 0; i < runs.size(); ++i) {
            MISSION_REQUIRE(!runs[i].empty(), ErrorCode::InvalidArgument,
                            "run " + std::to_string(i) + " has no outcomes");
        }
    }
};

struct TransitionCounts {
    std::uint64_t ss = 0;
    std::uint64_t su = 0;
    std::uint64_t us = 0;
    std::uint64_t uu = 0;

    std::uint64_t from_successful() const noexcept { return ss + su; }
    std::uint64_t from_incomplete() const noexcept { return us + uu; }
};

/// Adjacent-task transitions pooled over every run and position.
inline TransitionCounts count_transitions(const OutcomeLog& log) {
    log.validate();
    TransitionCounts c;
    for (const auto& run : log.runs) {
        for (std::size_t i = 1; i < run.size(); ++i) {
            const bool prev = run[i - 1] == Outcome::Successful;
            const bool next = run[i] == Outcome::Successful;
            if (prev) (next ? c.ss : c.su)++;
            else (next ? c.us : c.uu)++;
        }
    }
    return c;
}

/// Maximum-likelihood kernel: tau(s,s) = #(s->s) / #(s->*), tau(u,u) = #(u->u) / #(u->*).
inline TransitionKernel estimate_kernel(const OutcomeLog& log) {
    const TransitionCounts c = count_transitions(log);
    MISSION_REQUIRE(c.from_successful() > 0, ErrorCode::InsufficientData,
                    "no transition out of a successful task");
    MISSION_REQUIRE(c.from_incomplete() > 0, ErrorCode::InsufficientData,
                    "no transition out of an incomplete task");
    return TransitionKernel::from_tau(
        static_cast<double>(c.ss) / static_cast<double>(c.from_successful()),
        static_cast<double>(c.uu) / static_cast<double>(c.from_incomplete()));
}

/// Fraction of runs whose first task succeeded.
inline double estimate_first_task_prob(const OutcomeLog& log) {
    log.validate();
    MISSION_REQUIRE(!log.runs.empty(), ErrorCode::InsufficientData, "outcome log has no runs");
    const auto hits = std::count_if(log.runs.begin(), log.runs.end(),
                                    [](const auto& r) { return r.front() == Outcome::Successful; });
    return static_cast<double>(hits) / static_cast<double>(log.runs.size());
}

/// One run per non-blank line; outcomes are `s`/`u` (either case),
/// optionally separated by commas or whitespace. `#` starts a comment.
inline OutcomeLog parse_outcome_log(std::istream& in) {
    OutcomeLog log;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::vector<Outcome> run;
        for (char ch : line) {
            if (ch == ',' || ch == ' ' || ch == '\t' || ch == '\r') continue;
            const auto o = parse_outcome(std::string_view(&ch, 1));
            MISSION_REQUIRE(o.has_value(), ErrorCode::MalformedFile,
                            "line " + std::to_string(line_no) + ": unexpected outcome symbol '" +
                                std::string(1, ch) + "'");
            run.push_back(*o);
        }
        if (!run.empty()) log.runs.push_back(std::move(run));
    }
    return log;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Outcomes of tasks 1..n: task 1 succeeds with probability p1, each later
/// task is drawn from the kernel row of its predecessor.
inline std::vector<Outcome> sample_path(const TransitionKernel& kernel, double p1, std::size_t n,
                                        Rng& rng) {
    std::vector<Outcome> path;
    path.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = i == 0 ? p1 : kernel.success_after(path.back());
        path.push_back(rng.bernoulli(p) ? Outcome::Successful : Outcome::Incomplete);
    }
    return path;
}

struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;  // binomial standard error of `estimate`
    std::uint64_t successes = 0;
    std::uint64_t samples = 0;
};

/// Samples per independent sub-stream. Chunk c draws from Rng(seed, c), so the
/// result does not depend on how chunks are scheduled.
inline constexpr std::uint64_t kMcChunk = 1ULL << 16;

/// Monte Carlo estimate of Pr[A_n].
inline McEstimate simulate_chain_mc(const ChainQuery& q, std::uint64_t samples, std::uint64_t seed) {
    const double p1 = q.known_p1();
    MISSION_REQUIRE(samples >= 1, ErrorCode::InvalidArgument, "samples must be >= 1");
    const double after_s = q.kernel.tau_ss();
    const double after_u = q.kernel.mu();

    std::uint64_t successes = 0;
    const std::uint64_t chunks = (samples + kMcChunk - 1) / kMcChunk;
    for (std::uint64_t c = 0; c < chunks; ++c) {
        Rng rng(seed, c);
        const std::uint64_t count = std::min(kMcChunk, samples - c * kMcChunk);
        for (std::uint64_t i = 0; i < count; ++i) {
            bool ok = rng.bernoulli(p1);
            for (std::uint64_t t = 2; t <= q.n; ++t) ok = rng.bernoulli(ok ? after_s : after_u);
            successes += ok ? 1 : 0;
        }
    }

    McEstimate r;
    r.successes = successes;
    r.samples = samples;
    r.estimate = static_cast<double>(successes) / static_cast<double>(samples);
    r.std_error = std::sqrt(r.estimate * (1.0 - r.estimate) / static_cast<double>(samples));
    return r;
}

}  // namespace mission::chain
