#pragma once

// Mission scenario configuration (JSON, schema version 1):
//
// {
//   "version": 1,
//   "seed": 42,
//   "mission_epoch_ms": 0,                      optional, default 0
//   "phases": ["takeoff", ..., "return_to_base"], optional, default all seven
//   "contract": {
//     "success_threshold": 0.5, "tau_ss": 0.9, "tau_uu": 0.6, "p1": 0.8,
//     "civilian_rule": true, "comms_loss_rule": true,   optional, default true
//     "projection": "conditional" | "unconditional"     optional, default conditional
//   },
//   "events": [ {"at_task": 6, "kind": "civilians_detected"},
//               {"at_task": 3, "kind": "comms_restore", "channel": "primary"} ],
//   "mc2_abort_response": {"response": "grant" | "deny", "latency_tasks": 0},
//   "halt_on_incomplete": false,                optional
//   "noise_level": 0.3                          optional, sensor noise
// }
//
// Event kinds: comms_loss_primary, comms_loss_secondary, comms_restore,
// civilians_detected, civilians_cleared, mc2_abort_order. comms_restore and
// mc2_abort_order need a "channel". Unknown keys are rejected.

#include "mission/contract.hpp"
#include "mission/error.hpp"
#include "mission/telemetry.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace mission::sim {

inline constexpr int kScenarioVersion = 1;

enum class EventKind : std::uint8_t {
    CommsLossPrimary,
    CommsLossSecondary,
    CommsRestore,
    CiviliansDetected,
    CiviliansCleared,
    Mc2AbortOrder,
};

inline constexpr std::array<std::string_view, 6> kEventNames = {
    "comms_loss_primary", "comms_loss_secondary", "comms_restore",
    "civilians_detected", "civilians_cleared",    "mc2_abort_order",
};

constexpr std::string_view event_name(EventKind k) noexcept { return kEventNames[static_cast<std::size_t>(k)]; }

inline std::optional<EventKind> parse_event_kind(std::string_view s) noexcept {
    for (std::size_t i = 0; i < kEventNames.size(); ++i) {
        if (kEventNames[i] == s) return static_cast<EventKind>(i);
    }
    return std::nullopt;
}

constexpr bool event_needs_channel(EventKind k) noexcept {
    return k == EventKind::CommsRestore || k == EventKind::Mc2AbortOrder;
}

struct ScenarioEvent {
    std::uint64_t at_task = 1;
    EventKind kind = EventKind::CiviliansDetected;
    std::optional<contract::Channel> channel;

    friend bool operator==(const ScenarioEvent&, const ScenarioEvent&) = default;
};

enum class Mc2Response : std::uint8_t { Grant, Deny };

struct MissionScenario {
    contract::ContractSpec contract;
    std::vector<telemetry::Phase> phases{telemetry::kMissionPhases.begin(), telemetry::kMissionPhases.end()};
    std::uint64_t seed = 0;
    std::vector<ScenarioEvent> events;
    Mc2Response mc2_abort_response = Mc2Response::Grant;
    std::uint64_t mc2_latency_tasks = 0;
    bool halt_on_incomplete = false;
    std::uint64_t mission_epoch_ms = 0;
    double noise_level = telemetry::kDefaultNoiseLevel;

    std::uint64_t task_count() const noexcept { return phases.size(); }

    /// Point the contract's task count and rule anchors at the phase list.
    void sync_contract() {
        contract.task_count = phases.size();
        contract.identify_task.reset();
        contract.strike_task.reset();
        for (std::size_t i = 0; i < phases.size(); ++i) {
            if (phases[i] == telemetry::Phase::IdentifyTarget && !contract.identify_task) contract.identify_task = i + 1;
            if (phases[i] == telemetry::Phase::Strike && !contract.strike_task) contract.strike_task = i + 1;
        }
    }

    void validate() const {
        auto bad = [](const std::string& why) { throw Error(ErrorCode::InvalidScenario, why); };
        if (phases.empty()) bad("phase list is empty");
        if (phases.back() != telemetry::Phase::ReturnToBase) bad("phase list must end with return_to_base");
        if (contract.task_count != phases.size()) bad("contract task_count does not match the phase list");
        try {
            contract.validate();
        } catch (const Error& e) {
            bad(std::string("contract: ") + e.what());
        }
        if (contract.identify_task && contract.strike_task && *contract.identify_task > *contract.strike_task) {
            bad("identify_target must come before strike");
        }
        for (const auto& ev : events) {
            if (ev.at_task < 1 || ev.at_task > phases.size()) {
                bad("event " + std::string(event_name(ev.kind)) + " at task " + std::to_string(ev.at_task) +
                    " is outside [1, " + std::to_string(phases.size()) + "]");
            }
            if (event_needs_channel(ev.kind) && !ev.channel) {
                bad("event " + std::string(event_name(ev.kind)) + " needs a channel");
            }
        }
        if (!std::isfinite(noise_level) || noise_level < 0.0) bad("noise_level must be >= 0");
    }
};

namespace detail {

[[noreturn]] inline void scenario_error(const std::string& why) { throw Error(ErrorCode::InvalidScenario, why); }

inline void only_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed, const char* where) {
    for (const auto& [key, _] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            scenario_error(std::string("unknown key '") + key + "' in " + where);
        }
    }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        scenario_error(std::string("key '") + key + "' has the wrong type");
    }
}

template <typename T>
T get_required(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) scenario_error(std::string("missing key '") + key + "'");
    return get_or<T>(j, key, T{});
}

}  // namespace detail

inline MissionScenario parse_scenario(const nlohmann::json& j) {
    using detail::get_or;
    using detail::get_required;
    using detail::scenario_error;
    if (!j.is_object()) scenario_error("scenario must be a JSON object");
    detail::only_keys(j, {"version", "seed", "mission_epoch_ms", "phases", "contract", "events", "mc2_abort_response",
                          "halt_on_incomplete", "noise_level"},
                      "scenario");
    if (get_required<int>(j, "version") != kScenarioVersion) scenario_error("unsupported scenario version");

    MissionScenario s;
    s.seed = get_required<std::uint64_t>(j, "seed");
    s.mission_epoch_ms = get_or<std::uint64_t>(j, "mission_epoch_ms", 0);
    s.halt_on_incomplete = get_or<bool>(j, "halt_on_incomplete", false);
    s.noise_level = get_or<double>(j, "noise_level", telemetry::kDefaultNoiseLevel);

    if (j.contains("phases")) {
        s.phases.clear();
        for (const auto& name : get_required<std::vector<std::string>>(j, "phases")) {
            const auto p = telemetry::parse_phase(name);
            if (!p) scenario_error("unknown phase '" + name + "'");
            s.phases.push_back(*p);
        }
    }

    if (!j.contains("contract") || !j.at("contract").is_object()) scenario_error("missing contract object");
    const auto& c = j.at("contract");
    detail::only_keys(c, {"success_threshold", "tau_ss", "tau_uu", "p1", "civilian_rule", "comms_loss_rule", "projection"},
                      "contract");
    try {
        s.contract.kernel = chain::kernel_from_tau(get_required<double>(c, "tau_ss"), get_required<double>(c, "tau_uu"));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidScenario) throw;
        scenario_error(std::string("contract kernel: ") + e.what());
    }
    s.contract.success_threshold = get_required<double>(c, "success_threshold");
    s.contract.p1 = get_required<double>(c, "p1");
    s.contract.civilian_rule_enabled = get_or<bool>(c, "civilian_rule", true);
    s.contract.comms_loss_rule_enabled = get_or<bool>(c, "comms_loss_rule", true);
    const auto projection = get_or<std::string>(c, "projection", "conditional");
    if (projection == "conditional") s.contract.projection = contract::ProjectionMode::Conditional;
    else if (projection == "unconditional") s.contract.projection = contract::ProjectionMode::Unconditional;
    else scenario_error("unknown projection '" + projection + "'");

    if (j.contains("events")) {
        if (!j.at("events").is_array()) scenario_error("events must be an array");
        for (const auto& e : j.at("events")) {
            if (!e.is_object()) scenario_error("event must be an object");
            detail::only_keys(e, {"at_task", "kind", "channel"}, "event");
            ScenarioEvent ev;
            ev.at_task = get_required<std::uint64_t>(e, "at_task");
            const auto kind = get_required<std::string>(e, "kind");
            const auto k = parse_event_kind(kind);
            if (!k) scenario_error("unknown event kind '" + kind + "'");
            ev.kind = *k;
            if (e.contains("channel")) {
                const auto name = get_required<std::string>(e, "channel");
                ev.channel = contract::parse_channel(name);
                if (!ev.channel) scenario_error("unknown channel '" + name + "'");
            }
            s.events.push_back(ev);
        }
    }

    if (j.contains("mc2_abort_response")) {
        const auto& r = j.at("mc2_abort_response");
        if (!r.is_object()) scenario_error("mc2_abort_response must be an object");
        detail::only_keys(r, {"response", "latency_tasks"}, "mc2_abort_response");
        const auto response = get_or<std::string>(r, "response", "grant");
        if (response == "grant") s.mc2_abort_response = Mc2Response::Grant;
        else if (response == "deny") s.mc2_abort_response = Mc2Response::Deny;
        else scenario_error("unknown mc2 response '" + response + "'");
        s.mc2_latency_tasks = get_or<std::uint64_t>(r, "latency_tasks", 0);
    }

    s.sync_contract();
    s.validate();
    return s;
}

inline MissionScenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    MISSION_REQUIRE(in.good(), ErrorCode::IoError, "cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidScenario, std::string("not valid JSON: ") + e.what());
    }
    return parse_scenario(j);
}

}  // namespace mission::sim
