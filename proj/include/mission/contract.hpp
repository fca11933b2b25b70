#pragma once

// Abort-rule engine evaluated on board after every task. Rules are checked
// in a fixed priority order:
//   1. comms:     both channels to the MC2 down  -> ReturnToBase(CommsLost)
//   2. civilians: civilians detected at/after target identification
//                                                -> AbortRequest(CiviliansPresent)
//   3. odds:      lowest projected success probability of any remaining
//                 task below the threshold      -> AbortRequest(ProbabilityBelowThreshold)
// otherwise Strike on the strike task and Continue everywhere else.

#include "mission/chain_model.hpp"
#include "mission/error.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace mission::contract {

enum class ProjectionMode : std::uint8_t {
    Conditional,    // condition on the latest observed task outcome
    Unconditional,  // Pr[A_k] from p1 regardless of what has been observed
};

struct ContractSpec {
    double success_threshold = 0.0;
    chain::TransitionKernel kernel = chain::kernel_from_tau(0.9, 0.6);
    double p1 = 1.0;
    std::uint64_t task_count = 1;
    bool civilian_rule_enabled = true;
    bool comms_loss_rule_enabled = true;
    std::optional<std::uint64_t> identify_task;  // civilian rule applies from here on
    std::optional<std::uint64_t> strike_task;
    ProjectionMode projection = ProjectionMode::Conditional;

    void validate() const {
        chain::detail::require_probability(success_threshold, "success_threshold");
        chain::detail::require_probability(p1, "p1");
        MISSION_REQUIRE(task_count >= 1, ErrorCode::InvalidArgument, "task_count must be >= 1");
        MISSION_REQUIRE(!identify_task || (*identify_task >= 1 && *identify_task <= task_count),
                        ErrorCode::InvalidArgument, "identify_task out of range");
        MISSION_REQUIRE(!strike_task || (*strike_task >= 1 && *strike_task <= task_count),
                        ErrorCode::InvalidArgument, "strike_task out of range");
    }
};

enum class TaskStatus : std::uint8_t { Successful, Incomplete, Pending };

inline TaskStatus status_of(chain::Outcome o) noexcept {
    return o == chain::Outcome::Successful ? TaskStatus::Successful : TaskStatus::Incomplete;
}

struct MissionState {
    std::uint64_t current_task_index = 1;
    TaskStatus last_outcome = TaskStatus::Pending;
    bool civilians_detected = false;
    bool comms_primary_up = true;
    bool comms_secondary_up = true;

    friend bool operator==(const MissionState&, const MissionState&) = default;
};

enum class Verdict : std::uint8_t { Continue, AbortRequest, ReturnToBase, Strike };

enum class ReasonKind : std::uint8_t {
    None,
    ProbabilityBelowThreshold,
    CiviliansPresent,
    CommsLost,
    Mc2Order,
    TaskIncomplete,
};

/// `task` and `value` are meaningful for ProbabilityBelowThreshold (both)
/// and TaskIncomplete (task only); otherwise they stay zero.
struct Reason {
    ReasonKind kind = ReasonKind::None;
    std::uint64_t task = 0;
    double value = 0.0;

    friend bool operator==(const Reason&, const Reason&) = default;
};

struct Decision {
    Verdict verdict = Verdict::Continue;
    Reason reason;

    friend bool operator==(const Decision&, const Decision&) = default;
};

constexpr std::string_view verdict_name(Verdict v) noexcept {
    switch (v) {
        case Verdict::Continue: return "continue";
        case Verdict::AbortRequest: return "abort_request";
        case Verdict::ReturnToBase: return "return_to_base";
        case Verdict::Strike: return "strike";
    }
    return "";
}

inline std::optional<Verdict> parse_verdict(std::string_view s) noexcept {
    for (Verdict v : {Verdict::Continue, Verdict::AbortRequest, Verdict::ReturnToBase, Verdict::Strike}) {
        if (verdict_name(v) == s) return v;
    }
    return std::nullopt;
}

constexpr std::string_view reason_name(ReasonKind r) noexcept {
    switch (r) {
        case ReasonKind::None: return "none";
        case ReasonKind::ProbabilityBelowThreshold: return "probability_below_threshold";
        case ReasonKind::CiviliansPresent: return "civilians_present";
        case ReasonKind::CommsLost: return "comms_lost";
        case ReasonKind::Mc2Order: return "mc2_order";
        case ReasonKind::TaskIncomplete: return "task_incomplete";
    }
    return "";
}

inline std::optional<ReasonKind> parse_reason(std::string_view s) noexcept {
    for (ReasonKind r : {ReasonKind::None, ReasonKind::ProbabilityBelowThreshold, ReasonKind::CiviliansPresent,
                         ReasonKind::CommsLost, ReasonKind::Mc2Order, ReasonKind::TaskIncomplete}) {
        if (reason_name(r) == s) return r;
    }
    return std::nullopt;
}

/// Success probability of `future_task` as seen from the current state.
/// With a known latest outcome the chain is re-based at the current task
/// (gap k = future_task - current): rho_k(s,s) after a success, rho_k(u,s)
/// after an incomplete task. While the current task is pending, or in
/// Unconditional mode, the unconditional Pr[A_future] is used.
inline double project_task_success(const ContractSpec& spec, const MissionState& state,
                                   std::uint64_t future_task) {
    MISSION_REQUIRE(future_task > state.current_task_index, ErrorCode::InvalidArgument,
                    "future_task must lie after the current task");
    const std::uint64_t gap = future_task - state.current_task_index;
    if (spec.projection == ProjectionMode::Conditional) {
        if (state.last_outcome == TaskStatus::Successful) return chain::rho_ss(spec.kernel, gap);
        if (state.last_outcome == TaskStatus::Incomplete) return chain::rho_us(spec.kernel, gap);
    }
    return chain::success_prob_closed({spec.kernel, spec.p1, future_task});
}

struct Projection {
    std::uint64_t task = 0;
    double value = 0.0;
};

/// Minimum projection over the remaining tasks (earliest task wins ties);
/// empty on the last task.
inline std::optional<Projection> lowest_projection(const ContractSpec& spec, const MissionState& state) {
    std::optional<Projection> best;
    for (std::uint64_t t = state.current_task_index + 1; t <= spec.task_count; ++t) {
        const double p = project_task_success(spec, state, t);
        if (!best || p < best->value) best = Projection{t, p};
    }
    return best;
}

inline Decision evaluate(const ContractSpec& spec, const MissionState& state) {
    MISSION_REQUIRE(state.current_task_index >= 1 && state.current_task_index <= spec.task_count,
                    ErrorCode::InvalidArgument, "current task outside the mission");
    if (spec.comms_loss_rule_enabled && !state.comms_primary_up && !state.comms_secondary_up) {
        return {Verdict::ReturnToBase, {ReasonKind::CommsLost}};
    }
    const bool civilians_relevant = !spec.identify_task || state.current_task_index >= *spec.identify_task;
    if (spec.civilian_rule_enabled && state.civilians_detected && civilians_relevant) {
        return {Verdict::AbortRequest, {ReasonKind::CiviliansPresent}};
    }
    if (const auto low = lowest_projection(spec, state); low && low->value < spec.success_threshold) {
        return {Verdict::AbortRequest, {ReasonKind::ProbabilityBelowThreshold, low->task, low->value}};
    }
    if (spec.strike_task && state.current_task_index == *spec.strike_task) return {Verdict::Strike, {}};
    return {Verdict::Continue, {}};
}

enum class Channel : std::uint8_t { Primary, Secondary };

constexpr std::string_view channel_name(Channel c) noexcept {
    return c == Channel::Primary ? "primary" : "secondary";
}

inline std::optional<Channel> parse_channel(std::string_view s) noexcept {
    if (s == "primary") return Channel::Primary;
    if (s == "secondary") return Channel::Secondary;
    return std::nullopt;
}

constexpr Channel other_channel(Channel c) noexcept {
    return c == Channel::Primary ? Channel::Secondary : Channel::Primary;
}

constexpr bool channel_up(const MissionState& s, Channel c) noexcept {
    return c == Channel::Primary ? s.comms_primary_up : s.comms_secondary_up;
}

enum class Confirmation : std::uint8_t { Confirmed, Unconfirmable };

/// An abort order arriving on one channel must be confirmed on the other.
inline Confirmation confirm_abort(const MissionState& state, Channel order_channel) noexcept {
    return channel_up(state, other_channel(order_channel)) ? Confirmation::Confirmed
                                                           : Confirmation::Unconfirmable;
}

}  // namespace mission::contract
