#pragma once

// Task-level mission simulator and post-flight replay.
//
// Per task, in this order: record the task start, apply the scripted events
// due at this task (and any MC2 answer that has become due), sample the task
// outcome from the chain, record sensor readings and the outcome, evaluate
// the contract and record the decision. An abort request is sent to the MC2
// on the first available channel; a granted abort must be confirmed on the
// other channel. The run ends at the first terminal decision or after the
// last task, and the ledger is sealed.
//
// Every ledger payload (except the closing SEAL) is a compact JSON object
// with a "type" field; replay() rebuilds the report from these alone.

#include "mission/chain_model.hpp"
#include "mission/contract.hpp"
#include "mission/error.hpp"
#include "mission/ledger.hpp"
#include "mission/rng.hpp"
#include "mission/scenario.hpp"
#include "mission/telemetry.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mission::sim {

enum class OutcomeKind : std::uint8_t {
    Completed,       // ran to the end, final task successful
    Incomplete,      // ran to the end, final task incomplete
    Aborted,
    ReturnedToBase,
};

constexpr std::string_view outcome_kind_name(OutcomeKind k) noexcept {
    switch (k) {
        case OutcomeKind::Completed: return "completed";
        case OutcomeKind::Incomplete: return "incomplete";
        case OutcomeKind::Aborted: return "aborted";
        case OutcomeKind::ReturnedToBase: return "returned_to_base";
    }
    return "";
}

inline std::optional<OutcomeKind> parse_outcome_kind(std::string_view s) noexcept {
    for (OutcomeKind k : {OutcomeKind::Completed, OutcomeKind::Incomplete, OutcomeKind::Aborted,
                          OutcomeKind::ReturnedToBase}) {
        if (outcome_kind_name(k) == s) return k;
    }
    return std::nullopt;
}

struct TaskReport {
    std::uint64_t task = 0;
    telemetry::Phase phase = telemetry::Phase::Takeoff;
    chain::Outcome sampled_outcome = chain::Outcome::Incomplete;
    std::optional<double> projected_prob;  // lowest projection over remaining tasks
    contract::Decision decision;

    friend bool operator==(const TaskReport&, const TaskReport&) = default;
};

struct MissionReport {
    OutcomeKind outcome = OutcomeKind::Completed;
    contract::Reason reason;
    std::vector<TaskReport> per_task;
    std::string ledger_path;
    bbx::VerifyResult ledger_status;

    friend bool operator==(const MissionReport&, const MissionReport&) = default;
};

struct SimulationResult {
    MissionReport report;
    bbx::Ledger ledger;
};

/// Simulated time layout: task k starts at (k-1) * kTaskSlotMs after the
/// mission epoch, records within a task are kRecordSpacingMs apart.
inline constexpr std::uint64_t kTaskSlotMs = 120'000;
inline constexpr std::uint64_t kRecordSpacingMs = 250;

/// RNG sub-streams of a scenario seed.
inline constexpr std::uint64_t kOutcomeStream = 0;
inline constexpr std::uint64_t kSensorStream = 1;

namespace detail {

using ojson = nlohmann::ordered_json;

inline void put_reason(ojson& j, const contract::Reason& r) {
    j["reason"] = contract::reason_name(r.kind);
    j["reason_task"] = r.task;
    j["reason_value"] = r.value;
}

class FlightRecorder {
public:
    explicit FlightRecorder(bbx::Ledger& ledger) : ledger_(ledger) {}

    void begin_task(std::uint64_t task) { next_ts_ = std::max(next_ts_, (task - 1) * kTaskSlotMs); }

    void record(const bbx::Provenance& source, const ojson& payload) {
        ledger_.append(source, next_ts_, payload.dump());
        next_ts_ += kRecordSpacingMs;
    }

private:
    bbx::Ledger& ledger_;
    std::uint64_t next_ts_ = 0;
};

inline void record_readings(FlightRecorder& rec, std::uint64_t task, const telemetry::TelemetryRecord& r) {
    using bbx::Provenance;
    rec.record(Provenance::sensor("gps"), {{"type", "reading"},
                                           {"task", task},
                                           {"latitude", r.gps_latitude},
                                           {"longitude", r.gps_longitude},
                                           {"altitude", r.gps_altitude}});
    rec.record(Provenance::sensor("battery"), {{"type", "reading"}, {"task", task}, {"battery_level", r.battery_level}});
    rec.record(Provenance::sensor("eo_camera"),
               {{"type", "reading"}, {"task", task}, {"visibility", r.electro_optical_visibility}});
    rec.record(Provenance::sensor("ir_camera"), {{"type", "reading"}, {"task", task}, {"visibility", r.infrared_visibility}});
    rec.record(Provenance::sensor("anemometer"), {{"type", "reading"}, {"task", task}, {"wind_speed", r.wind_speed}});
    rec.record(Provenance::uav_action(), {{"type", "ai_decision"},
                                          {"task", task},
                                          {"decision", telemetry::ai_decision_name(r.ai_decision)},
                                          {"task_success_ratio", r.task_success_ratio}});
}

struct PendingAbort {
    std::uint64_t due_task = 0;
    contract::Reason reason;
    contract::Channel channel = contract::Channel::Primary;
};

struct Terminal {
    OutcomeKind outcome;
    contract::Reason reason;
};

/// Event loop state for one run.
class MissionRun {
public:
    explicit MissionRun(const MissionScenario& s)
        : s_(s),
          ledger_(s.mission_epoch_ms),
          rec_(ledger_),
          outcome_rng_(s.seed, kOutcomeStream),
          sensor_rng_(s.seed, kSensorStream),
          trace_(telemetry::MissionContext::draw(sensor_rng_), s.noise_level) {}

    SimulationResult run() {
        std::optional<Terminal> end;
        std::optional<chain::Outcome> prev;
        for (std::uint64_t k = 1; k <= s_.task_count() && !end; ++k) {
            const telemetry::Phase phase = s_.phases[k - 1];
            state_.current_task_index = k;
            state_.last_outcome = contract::TaskStatus::Pending;
            rec_.begin_task(k);
            rec_.record(bbx::Provenance::uav_action(),
                        {{"type", "task_start"}, {"task", k}, {"phase", telemetry::phase_name(phase)}});

            end = apply_events(k);
            if (!end && pending_ && pending_->due_task <= k) end = deliver_response(k);
            if (end) break;

            const double p = prev ? s_.contract.kernel.success_after(*prev) : s_.contract.p1;
            const chain::Outcome outcome =
                outcome_rng_.bernoulli(p) ? chain::Outcome::Successful : chain::Outcome::Incomplete;
            prev = outcome;
            record_readings(rec_, k, trace_.next(phase, outcome, sensor_rng_));
            rec_.record(bbx::Provenance::uav_action(),
                        {{"type", "task_outcome"}, {"task", k}, {"outcome", chain::outcome_name(outcome)}});
            state_.last_outcome = contract::status_of(outcome);

            const contract::Decision decision = contract::evaluate(s_.contract, state_);
            const auto low = contract::lowest_projection(s_.contract, state_);
            std::optional<double> projected;
            if (low) projected = low->value;
            ojson d{{"type", "decision"}, {"task", k}, {"verdict", contract::verdict_name(decision.verdict)}};
            put_reason(d, decision.reason);
            d["projected_prob"] = projected ? ojson(*projected) : ojson(nullptr);
            rec_.record(bbx::Provenance::contract_engine(), d);
            report_.per_task.push_back({k, phase, outcome, projected, decision});

            if (decision.verdict == contract::Verdict::ReturnToBase) {
                end = Terminal{OutcomeKind::ReturnedToBase, decision.reason};
            } else if (decision.verdict == contract::Verdict::AbortRequest) {
                end = request_abort(k, decision.reason);
            }
            if (!end && s_.halt_on_incomplete && outcome == chain::Outcome::Incomplete && k < s_.task_count()) {
                end = Terminal{OutcomeKind::ReturnedToBase, {contract::ReasonKind::TaskIncomplete, k, 0.0}};
            }
        }
        if (!end) {
            const bool last_ok = prev && *prev == chain::Outcome::Successful;
            end = Terminal{last_ok ? OutcomeKind::Completed : OutcomeKind::Incomplete, {}};
        }

        ojson fin{{"type", "mission_end"}, {"outcome", outcome_kind_name(end->outcome)}};
        put_reason(fin, end->reason);
        rec_.record(bbx::Provenance::uav_action(), fin);
        ledger_.seal();

        report_.outcome = end->outcome;
        report_.reason = end->reason;
        report_.ledger_status = ledger_.verify();
        return {std::move(report_), std::move(ledger_)};
    }

private:
    using Channel = contract::Channel;

    std::optional<Terminal> apply_events(std::uint64_t k) {
        for (const ScenarioEvent& ev : s_.events) {
            if (ev.at_task != k) continue;
            switch (ev.kind) {
                case EventKind::CommsLossPrimary: state_.comms_primary_up = false; break;
                case EventKind::CommsLossSecondary: state_.comms_secondary_up = false; break;
                case EventKind::CommsRestore:
                    (*ev.channel == Channel::Primary ? state_.comms_primary_up : state_.comms_secondary_up) = true;
                    break;
                case EventKind::CiviliansDetected: state_.civilians_detected = true; break;
                case EventKind::CiviliansCleared: state_.civilians_detected = false; break;
                case EventKind::Mc2AbortOrder: break;
            }
            if (ev.kind == EventKind::Mc2AbortOrder) {
                // An order on a dead channel never reaches the aircraft.
                if (!contract::channel_up(state_, *ev.channel)) continue;
                rec_.record(bbx::Provenance::mc2_command(),
                            {{"type", "mc2_abort_order"}, {"task", k}, {"channel", contract::channel_name(*ev.channel)}});
                return confirm(k, *ev.channel, {contract::ReasonKind::Mc2Order});
            }
            ojson e{{"type", "event"}, {"task", k}, {"event", event_name(ev.kind)}};
            if (ev.channel) e["channel"] = contract::channel_name(*ev.channel);
            rec_.record(bbx::Provenance::uav_action(), e);
        }
        return std::nullopt;
    }

    std::optional<Terminal> confirm(std::uint64_t k, Channel order_channel, const contract::Reason& reason) {
        const auto result = contract::confirm_abort(state_, order_channel);
        const bool ok = result == contract::Confirmation::Confirmed;
        rec_.record(bbx::Provenance::uav_action(), {{"type", "abort_confirmation"},
                                                    {"task", k},
                                                    {"order_channel", contract::channel_name(order_channel)},
                                                    {"confirm_channel", contract::channel_name(contract::other_channel(order_channel))},
                                                    {"result", ok ? "confirmed" : "unconfirmable"}});
        if (ok) return Terminal{OutcomeKind::Aborted, reason};
        return Terminal{OutcomeKind::ReturnedToBase, {contract::ReasonKind::CommsLost}};
    }

    std::optional<Terminal> request_abort(std::uint64_t k, const contract::Reason& reason) {
        if (pending_) return std::nullopt;  // one outstanding request at a time
        std::optional<Channel> channel;
        if (state_.comms_primary_up) channel = Channel::Primary;
        else if (state_.comms_secondary_up) channel = Channel::Secondary;
        if (!channel) {
            ojson e{{"type", "abort_request_unsent"}, {"task", k}};
            put_reason(e, reason);
            rec_.record(bbx::Provenance::uav_action(), e);
            return std::nullopt;
        }
        ojson e{{"type", "abort_request"}, {"task", k}, {"channel", contract::channel_name(*channel)}};
        put_reason(e, reason);
        rec_.record(bbx::Provenance::uav_action(), e);
        pending_ = PendingAbort{k + s_.mc2_latency_tasks, reason, *channel};
        if (s_.mc2_latency_tasks == 0) return deliver_response(k);
        return std::nullopt;
    }

    /// The MC2 answer travels back on the request channel, or the other one
    /// if that is down. With both down it waits for a later task.
    std::optional<Terminal> deliver_response(std::uint64_t k) {
        std::optional<Channel> via;
        if (contract::channel_up(state_, pending_->channel)) via = pending_->channel;
        else if (contract::channel_up(state_, contract::other_channel(pending_->channel)))
            via = contract::other_channel(pending_->channel);
        if (!via) return std::nullopt;

        const PendingAbort p = *pending_;
        pending_.reset();
        const bool grant = s_.mc2_abort_response == Mc2Response::Grant;
        rec_.record(bbx::Provenance::mc2_command(), {{"type", "mc2_response"},
                                                     {"task", k},
                                                     {"response", grant ? "grant" : "deny"},
                                                     {"channel", contract::channel_name(*via)}});
        if (!grant) return std::nullopt;  // denial: carry on
        return confirm(k, *via, p.reason);
    }

    const MissionScenario& s_;
    bbx::Ledger ledger_;
    FlightRecorder rec_;
    Rng outcome_rng_;
    Rng sensor_rng_;
    telemetry::TraceBuilder trace_;
    contract::MissionState state_;
    std::optional<PendingAbort> pending_;
    MissionReport report_;
};

}  // namespace detail

/// Runs the scenario with the ledger kept in memory.
inline SimulationResult simulate(const MissionScenario& scenario) {
    scenario.validate();
    return detail::MissionRun(scenario).run();
}

inline MissionReport run_mission(const MissionScenario& scenario, const std::string& ledger_out) {
    SimulationResult r = simulate(scenario);
    bbx::export_ledger(r.ledger, ledger_out);
    r.report.ledger_path = ledger_out;
    return r.report;
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

namespace detail {

[[noreturn]] inline void bad_record(std::uint64_t seq, const std::string& why) {
    throw Error(ErrorCode::MalformedFile, "entry " + std::to_string(seq) + ": " + why);
}

inline contract::Reason read_reason(const nlohmann::json& j, std::uint64_t seq) {
    const auto kind = contract::parse_reason(j.at("reason").get<std::string>());
    if (!kind) bad_record(seq, "unknown reason");
    return {*kind, j.at("reason_task").get<std::uint64_t>(), j.at("reason_value").get<double>()};
}

}  // namespace detail

/// Rebuild the report of a verified ledger from its records.
inline MissionReport replay_ledger(const bbx::Ledger& ledger, const std::string& ledger_path = {}) {
    const bbx::VerifyResult status = ledger.verify();
    if (!status.valid()) throw TamperedLedgerError(*status.broken_at);

    MissionReport report;
    report.ledger_path = ledger_path;
    report.ledger_status = status;
    std::optional<TaskReport> current;
    bool have_outcome = false;
    bool ended = false;

    for (const bbx::LedgerEntry& e : ledger.entries()) {
        if (bbx::detail::is_seal(e)) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(e.payload_text());
        } catch (const nlohmann::json::exception&) {
            detail::bad_record(e.seq, "payload is not a flight record");
        }
        try {
            const auto type = j.at("type").get<std::string>();
            if (type == "task_start") {
                const auto phase = telemetry::parse_phase(j.at("phase").get<std::string>());
                if (!phase) detail::bad_record(e.seq, "unknown phase");
                current = TaskReport{};
                current->task = j.at("task").get<std::uint64_t>();
                current->phase = *phase;
                have_outcome = false;
            } else if (type == "task_outcome") {
                const auto o = chain::parse_outcome(j.at("outcome").get<std::string>());
                if (!o || !current) detail::bad_record(e.seq, "outcome without a started task");
                current->sampled_outcome = *o;
                have_outcome = true;
            } else if (type == "decision") {
                if (!current || !have_outcome) detail::bad_record(e.seq, "decision before the task outcome");
                const auto verdict = contract::parse_verdict(j.at("verdict").get<std::string>());
                if (!verdict) detail::bad_record(e.seq, "unknown verdict");
                current->decision = {*verdict, detail::read_reason(j, e.seq)};
                const auto& p = j.at("projected_prob");
                current->projected_prob = p.is_null() ? std::nullopt : std::optional<double>(p.get<double>());
                report.per_task.push_back(*current);
            } else if (type == "mission_end") {
                const auto o = parse_outcome_kind(j.at("outcome").get<std::string>());
                if (!o) detail::bad_record(e.seq, "unknown mission outcome");
                report.outcome = *o;
                report.reason = detail::read_reason(j, e.seq);
                ended = true;
            }
        } catch (const nlohmann::json::exception& ex) {
            detail::bad_record(e.seq, ex.what());
        }
    }
    if (!ended) throw Error(ErrorCode::MalformedFile, "ledger has no mission_end record");
    return report;
}

inline MissionReport replay(const std::string& ledger_path) {
    const bbx::LoadedLedger loaded = bbx::load_ledger(ledger_path);
    if (!loaded.status.valid()) throw TamperedLedgerError(*loaded.status.broken_at);
    return replay_ledger(loaded.ledger, ledger_path);
}

// ---------------------------------------------------------------------------
// Report output
// ---------------------------------------------------------------------------

/// One summary line, then one line per evaluated task.
inline std::string report_json_lines(const MissionReport& r) {
    using detail::ojson;
    ojson head{{"outcome", outcome_kind_name(r.outcome)}};
    detail::put_reason(head, r.reason);
    head["tasks_evaluated"] = r.per_task.size();
    head["ledger"] = r.ledger_path;
    head["ledger_status"] = r.ledger_status.to_string();
    std::string out = head.dump() + '\n';
    for (const TaskReport& t : r.per_task) {
        ojson line{{"task", t.task},
                   {"phase", telemetry::phase_name(t.phase)},
                   {"outcome", chain::outcome_name(t.sampled_outcome)},
                   {"projected_prob", t.projected_prob ? ojson(*t.projected_prob) : ojson(nullptr)},
                   {"verdict", contract::verdict_name(t.decision.verdict)}};
        detail::put_reason(line, t.decision.reason);
        out += line.dump() + '\n';
    }
    return out;
}

inline std::string describe_reason(const contract::Reason& r) {
    switch (r.kind) {
        case contract::ReasonKind::ProbabilityBelowThreshold:
            return fmt::format("{}(task {}, {:.6g})", contract::reason_name(r.kind), r.task, r.value);
        case contract::ReasonKind::TaskIncomplete:
            return fmt::format("{}(task {})", contract::reason_name(r.kind), r.task);
        default: return std::string(contract::reason_name(r.kind));
    }
}

inline std::string report_table(const MissionReport& r) {
    std::string out = fmt::format("outcome: {}", outcome_kind_name(r.outcome));
    if (r.reason.kind != contract::ReasonKind::None) out += fmt::format(" ({})", describe_reason(r.reason));
    out += fmt::format("\nledger:  {} [{}]\n", r.ledger_path.empty() ? "-" : r.ledger_path, r.ledger_status.to_string());
    out += fmt::format("{:>4}  {:<16} {:<11} {:>10}  {}\n", "task", "phase", "outcome", "projected", "decision");
    for (const TaskReport& t : r.per_task) {
        std::string decision(contract::verdict_name(t.decision.verdict));
        if (t.decision.reason.kind != contract::ReasonKind::None) decision += " " + describe_reason(t.decision.reason);
        out += fmt::format("{:>4}  {:<16} {:<11} {:>10}  {}\n", t.task, telemetry::phase_name(t.phase),
                           chain::outcome_name(t.sampled_outcome),
                           t.projected_prob ? fmt::format("{:.6f}", *t.projected_prob) : std::string("-"), decision);
    }
    return out;
}

}  // namespace mission::sim
