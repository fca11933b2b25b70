#include "cli.hpp"

#include "mission/mission.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

namespace mission::cli {
namespace {

using ojson = nlohmann::ordered_json;

enum class Format { Table, Csv, JsonLines };

std::string num(double v) { return fmt::format("{:.12g}", v); }

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string("undefined"); }

ojson opt_json(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

struct Options {
    std::optional<std::uint64_t> seed;
    std::string output;
    std::string format;

    // chain
    double tau_ss = 0.0, tau_uu = 0.0;
    std::optional<double> p1;
    std::uint64_t n = 1;
    std::uint64_t samples = 1'000'000;
    std::string method = "closed";
    std::string log_path;

    // simulate / replay / bbx
    std::string scenario_path;
    std::string ledger_out;
    std::string ledger_path;
    std::string bbx_out;

    // gen-data
    std::uint64_t rows = 20000;
    std::string data_out;
    std::optional<double> noise;
    std::optional<double> positive_fraction;
    std::optional<double> data_tau_ss, data_tau_uu, data_p1;

    // metrics / splits
    std::string pred_path;
    std::uint64_t split_n = 0, split_k = 5;
};

/// Thrown for bad flag values that CLI11 cannot see (env seed, format).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::uint64_t resolve_seed(const Options& o) {
    if (o.seed) return *o.seed;
    if (const char* env = std::getenv("MISSION_CHAIN_SEED"); env && *env) {
        try {
            std::size_t used = 0;
            const std::string s(env);
            if (s.find('-') != std::string::npos) throw std::invalid_argument("negative");
            const auto v = std::stoull(s, &used, 0);
            if (used == s.size()) return v;
        } catch (const std::exception&) {
        }
        throw UsageError(std::string("MISSION_CHAIN_SEED is not an unsigned integer: ") + env);
    }
    return 0;
}

Format resolve_format(const Options& o, Format fallback) {
    if (o.format.empty()) return fallback;
    if (o.format == "table") return Format::Table;
    if (o.format == "csv") return Format::Csv;
    return Format::JsonLines;
}

// --- chain -----------------------------------------------------------------

void chain_eval(const Options& o, std::ostream& out) {
    const chain::ChainQuery q{chain::kernel_from_tau(o.tau_ss, o.tau_uu), o.p1, o.n};
    q.validate();
    const Format f = resolve_format(o, Format::Table);
    if (!q.p1) {
        // Unknown first task: report both conditionals on its outcome.
        MISSION_REQUIRE(q.n >= 2, ErrorCode::InvalidArgument, "without --p1 the task index n must be >= 2");
        const double if_s = chain::rho_ss(q.kernel, q.n - 1);
        const double if_u = chain::rho_us(q.kernel, q.n - 1);
        if (f == Format::Table) out << fmt::format("given first successful: {}\ngiven first incomplete: {}\n", num(if_s), num(if_u));
        else if (f == Format::Csv) out << "n,given_first_successful,given_first_incomplete\n" << fmt::format("{},{},{}\n", q.n, num(if_s), num(if_u));
        else out << ojson{{"n", q.n}, {"given_first_successful", if_s}, {"given_first_incomplete", if_u}}.dump() << '\n';
        return;
    }
    double p = 0.0;
    if (o.method == "closed") p = chain::success_prob_closed(q);
    else if (o.method == "recurrence") p = chain::success_prob_recurrence(q);
    else p = chain::success_prob_via_rho(q);
    if (f == Format::Table) out << num(p) << '\n';
    else if (f == Format::Csv) out << "n,probability\n" << q.n << ',' << num(p) << '\n';
    else out << ojson{{"n", q.n}, {"probability", p}}.dump() << '\n';
}

void chain_mc(const Options& o, std::ostream& out) {
    const chain::ChainQuery q{chain::kernel_from_tau(o.tau_ss, o.tau_uu), o.p1, o.n};
    const std::uint64_t seed = resolve_seed(o);
    const chain::McEstimate mc = chain::simulate_chain_mc(q, o.samples, seed);
    const double exact = chain::success_prob_closed(q);
    switch (resolve_format(o, Format::Table)) {
        case Format::Table:
            out << fmt::format("estimate   {}\nstd_error  {}\nclosed     {}\nsamples    {}\nseed       {}\n",
                               num(mc.estimate), num(mc.std_error), num(exact), mc.samples, seed);
            break;
        case Format::Csv:
            out << "estimate,std_error,closed_form,samples,seed\n"
                << fmt::format("{},{},{},{},{}\n", num(mc.estimate), num(mc.std_error), num(exact), mc.samples, seed);
            break;
        case Format::JsonLines:
            out << ojson{{"estimate", mc.estimate}, {"std_error", mc.std_error}, {"closed_form", exact},
                         {"samples", mc.samples}, {"seed", seed}}
                       .dump()
                << '\n';
            break;
    }
}

void chain_estimate(const Options& o, std::ostream& out) {
    std::ifstream in(o.log_path);
    MISSION_REQUIRE(in.good(), ErrorCode::IoError, "cannot open " + o.log_path);
    const chain::OutcomeLog log = chain::parse_outcome_log(in);
    const chain::TransitionCounts c = chain::count_transitions(log);
    const chain::TransitionKernel k = chain::estimate_kernel(log);
    const double p1 = chain::estimate_first_task_prob(log);
    switch (resolve_format(o, Format::Table)) {
        case Format::Table:
            out << fmt::format("tau_ss  {}\ntau_uu  {}\nlambda  {}\nmu      {}\np1      {}\n", num(k.tau_ss()),
                               num(k.tau_uu()), num(k.lambda()), num(k.mu()), num(p1));
            out << fmt::format("runs {}  transitions s->s {}  s->u {}  u->s {}  u->u {}\n", log.runs.size(), c.ss,
                               c.su, c.us, c.uu);
            break;
        case Format::Csv:
            out << "tau_ss,tau_uu,lambda,mu,p1,runs,ss,su,us,uu\n"
                << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", num(k.tau_ss()), num(k.tau_uu()), num(k.lambda()),
                               num(k.mu()), num(p1), log.runs.size(), c.ss, c.su, c.us, c.uu);
            break;
        case Format::JsonLines:
            out << ojson{{"tau_ss", k.tau_ss()}, {"tau_uu", k.tau_uu()}, {"lambda", k.lambda()}, {"mu", k.mu()},
                         {"p1", p1}, {"runs", log.runs.size()}, {"ss", c.ss}, {"su", c.su}, {"us", c.us},
                         {"uu", c.uu}}
                       .dump()
                << '\n';
            break;
    }
}

void chain_limit(const Options& o, std::ostream& out) {
    const auto k = chain::kernel_from_tau(o.tau_ss, o.tau_uu);
    const double v = chain::limiting_success_prob(k);
    switch (resolve_format(o, Format::Table)) {
        case Format::Table: out << num(v) << '\n'; break;
        case Format::Csv: out << "lambda,mu,limit\n" << fmt::format("{},{},{}\n", num(k.lambda()), num(k.mu()), num(v)); break;
        case Format::JsonLines: out << ojson{{"lambda", k.lambda()}, {"mu", k.mu()}, {"limit", v}}.dump() << '\n'; break;
    }
}

// --- simulate / replay -----------------------------------------------------

void write_report(const sim::MissionReport& r, Format f, std::ostream& out) {
    if (f == Format::Table) {
        out << sim::report_table(r);
    } else if (f == Format::JsonLines) {
        out << sim::report_json_lines(r);
    } else {
        out << "task,phase,outcome,projected_prob,verdict,reason,reason_task,reason_value\n";
        for (const auto& t : r.per_task) {
            out << fmt::format("{},{},{},{},{},{},{},{}\n", t.task, telemetry::phase_name(t.phase),
                               chain::outcome_name(t.sampled_outcome),
                               t.projected_prob ? num(*t.projected_prob) : std::string(),
                               contract::verdict_name(t.decision.verdict), contract::reason_name(t.decision.reason.kind),
                               t.decision.reason.task, num(t.decision.reason.value));
        }
        out << fmt::format("end,,{},,,{},{},{}\n", sim::outcome_kind_name(r.outcome), contract::reason_name(r.reason.kind),
                           r.reason.task, num(r.reason.value));
    }
}

void simulate_cmd(const Options& o, std::ostream& out) {
    sim::MissionScenario s = sim::load_scenario(o.scenario_path);
    if (o.seed) s.seed = *o.seed;
    const sim::MissionReport r = sim::run_mission(s, o.ledger_out);
    write_report(r, resolve_format(o, Format::JsonLines), out);
}

void replay_cmd(const Options& o, std::ostream& out) {
    write_report(sim::replay(o.ledger_path), resolve_format(o, Format::JsonLines), out);
}

// --- gen-data --------------------------------------------------------------

void gen_data(const Options& o, std::ostream& out) {
    telemetry::DatasetSpec spec;
    spec.rows = o.rows;
    spec.seed = resolve_seed(o);
    if (o.noise) spec.noise_level = *o.noise;
    if (o.positive_fraction) spec.positive_fraction = *o.positive_fraction;
    if (o.data_tau_ss || o.data_tau_uu) {
        spec.kernel = chain::kernel_from_tau(o.data_tau_ss.value_or(spec.kernel.tau_ss()),
                                             o.data_tau_uu.value_or(spec.kernel.tau_uu()));
    }
    if (o.data_p1) spec.p1 = *o.data_p1;
    const telemetry::DatasetSummary s = telemetry::generate_dataset(spec, o.data_out);
    switch (resolve_format(o, Format::Csv)) {
        case Format::Table:
            out << fmt::format("rows_written    {}\npositive_count  {}\nfile_digest     {}\n", s.rows_written,
                               s.positive_count, s.file_digest);
            break;
        case Format::Csv:
            out << "path,rows_written,positive_count,file_digest\n"
                << fmt::format("{},{},{},{}\n", o.data_out, s.rows_written, s.positive_count, s.file_digest);
            break;
        case Format::JsonLines:
            out << ojson{{"path", o.data_out}, {"rows_written", s.rows_written}, {"positive_count", s.positive_count},
                         {"file_digest", s.file_digest}}
                       .dump()
                << '\n';
            break;
    }
}

// --- bbx -------------------------------------------------------------------

int bbx_verify(const Options& o, std::ostream& out) {
    const bbx::LoadedLedger l = bbx::load_ledger(o.ledger_path);
    const std::string status = l.status.to_string();
    switch (resolve_format(o, Format::Table)) {
        case Format::Table: out << status << '\n'; break;
        case Format::Csv: out << "path,entries,status\n" << fmt::format("{},{},{}\n", o.ledger_path, l.ledger.size(), status); break;
        case Format::JsonLines:
            out << ojson{{"path", o.ledger_path}, {"entries", l.ledger.size()}, {"status", status}}.dump() << '\n';
            break;
    }
    return l.status.valid() ? kExitOk : kExitDomain;
}

void bbx_zeroize(const Options& o, std::ostream& out) {
    bbx::LoadedLedger l = bbx::load_ledger(o.ledger_path);
    l.ledger.zeroize();
    const std::string target = o.bbx_out.empty() ? o.ledger_path : o.bbx_out;
    bbx::export_ledger(l.ledger, target);
    out << fmt::format("zeroized {} entries -> {}\n", l.ledger.size(), target);
}

void bbx_decoy(const Options& o, std::ostream& out) {
    bbx::LoadedLedger l = bbx::load_ledger(o.ledger_path);
    bbx::decoy_fill(l.ledger, resolve_seed(o));
    const std::string target = o.bbx_out.empty() ? o.ledger_path : o.bbx_out;
    bbx::export_ledger(l.ledger, target);
    out << fmt::format("wrote {} entries -> {}\n", l.ledger.size(), target);
}

// --- metrics / splits ------------------------------------------------------

void metrics_cmd(const Options& o, std::ostream& out) {
    metrics::ConfusionMatrix cm;
    const metrics::MetricsReport r = metrics::evaluate_predictions(metrics::load_predictions(o.pred_path), &cm);
    switch (resolve_format(o, Format::Csv)) {
        case Format::Table: {
            auto row = [&](const char* name, const std::optional<double>& v) {
                out << fmt::format("{:<10} {}", name, opt_num(v));
                if (v) out << fmt::format(" ({:.2f})", metrics::round_half_up(*v));
                out << '\n';
            };
            row("accuracy", r.accuracy);
            row("precision", r.precision);
            row("recall", r.recall);
            row("f1", r.f1);
            row("roc_auc", r.roc_auc);
            out << fmt::format("confusion  [[{}, {}], [{}, {}]]\n", cm.tn, cm.fp, cm.fn, cm.tp);
            break;
        }
        case Format::Csv:
            out << "accuracy,precision,recall,f1,roc_auc,tn,fp,fn,tp\n"
                << fmt::format("{},{},{},{},{},{},{},{},{}\n", num(r.accuracy), opt_num(r.precision), opt_num(r.recall),
                               opt_num(r.f1), opt_num(r.roc_auc), cm.tn, cm.fp, cm.fn, cm.tp);
            break;
        case Format::JsonLines:
            out << ojson{{"accuracy", r.accuracy}, {"precision", opt_json(r.precision)}, {"recall", opt_json(r.recall)},
                         {"f1", opt_json(r.f1)}, {"roc_auc", opt_json(r.roc_auc)}, {"tn", cm.tn}, {"fp", cm.fp},
                         {"fn", cm.fn}, {"tp", cm.tp}}
                       .dump()
                << '\n';
            break;
    }
}

void splits_cmd(const Options& o, std::ostream& out) {
    const auto folds = metrics::kfold_splits(o.split_n, o.split_k, resolve_seed(o));
    const Format f = resolve_format(o, Format::Csv);
    if (f == Format::Csv) out << "fold,index\n";
    for (std::size_t i = 0; i < folds.size(); ++i) {
        if (f == Format::Table) {
            out << fmt::format("fold {}: {}\n", i, fmt::join(folds[i], " "));
        } else if (f == Format::Csv) {
            for (auto idx : folds[i]) out << i << ',' << idx << '\n';
        } else {
            out << ojson{{"fold", i}, {"indices", folds[i]}}.dump() << '\n';
        }
    }
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Mission task-chain, black-box ledger and evaluation toolkit", "mission"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--seed", o.seed, "RNG seed (falls back to MISSION_CHAIN_SEED, then 0)");
    app.add_option("--output,-o", o.output, "Write normal output to this file");
    app.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"table", "csv", "json-lines"}));

    std::function<int(std::ostream&)> run;
    auto wrap = [&run](auto fn) {
        return [&run, fn] { run = [fn](std::ostream& s) { return fn(s); }; };
    };

    auto* chain = app.add_subcommand("chain", "Markov task-chain success probabilities");
    chain->require_subcommand(1);
    auto add_kernel = [&](CLI::App* c) {
        c->add_option("--tau-ss", o.tau_ss, "Pr[success | previous success]")->required();
        c->add_option("--tau-uu", o.tau_uu, "Pr[incomplete | previous incomplete]")->required();
    };
    auto* eval = chain->add_subcommand("eval", "Pr[A_n] (or both conditionals when --p1 is omitted)");
    add_kernel(eval);
    eval->add_option("--p1", o.p1, "Success probability of the first task");
    eval->add_option("--n", o.n, "Task index (>= 1)")->required();
    eval->add_option("--method", o.method, "closed | recurrence | rho")
        ->check(CLI::IsMember({"closed", "recurrence", "rho"}));
    eval->callback(wrap([&](std::ostream& s) { chain_eval(o, s); return kExitOk; }));

    auto* mc = chain->add_subcommand("mc", "Monte Carlo estimate of Pr[A_n]");
    add_kernel(mc);
    mc->add_option("--p1", o.p1, "Success probability of the first task")->required();
    mc->add_option("--n", o.n, "Task index (>= 1)")->required();
    mc->add_option("--samples", o.samples, "Number of sampled missions");
    mc->callback(wrap([&](std::ostream& s) { chain_mc(o, s); return kExitOk; }));

    auto* est = chain->add_subcommand("estimate", "Estimate the kernel from a training-run outcome log");
    est->add_option("--log", o.log_path, "One run per line, s/u per task")->required();
    est->callback(wrap([&](std::ostream& s) { chain_estimate(o, s); return kExitOk; }));

    auto* lim = chain->add_subcommand("limit", "Limiting success probability mu / (1 - lambda)");
    add_kernel(lim);
    lim->callback(wrap([&](std::ostream& s) { chain_limit(o, s); return kExitOk; }));

    auto* simc = app.add_subcommand("simulate", "Run a scripted mission and write its ledger");
    simc->add_option("--scenario", o.scenario_path, "Scenario JSON file")->required();
    simc->add_option("--ledger-out", o.ledger_out, "Ledger file to write")->required();
    simc->callback(wrap([&](std::ostream& s) { simulate_cmd(o, s); return kExitOk; }));

    auto* rep = app.add_subcommand("replay", "Rebuild a mission report from a ledger");
    rep->add_option("--ledger", o.ledger_path, "Ledger file")->required();
    rep->callback(wrap([&](std::ostream& s) { replay_cmd(o, s); return kExitOk; }));

    auto* gen = app.add_subcommand("gen-data", "Write the synthetic telemetry CSV");
    gen->add_option("--rows", o.rows, "Row count");
    gen->add_option("--out", o.data_out, "CSV file to write")->required();
    gen->add_option("--noise", o.noise, "Sensor noise level (>= 0)");
    gen->add_option("--positive-fraction", o.positive_fraction, "Target share of positive rows");
    gen->add_option("--tau-ss", o.data_tau_ss, "Kernel tau(s,s)");
    gen->add_option("--tau-uu", o.data_tau_uu, "Kernel tau(u,u)");
    gen->add_option("--p1", o.data_p1, "First-task success probability");
    gen->callback(wrap([&](std::ostream& s) { gen_data(o, s); return kExitOk; }));

    auto* bbxc = app.add_subcommand("bbx", "Black-box ledger maintenance");
    bbxc->require_subcommand(1);
    auto* ver = bbxc->add_subcommand("verify", "Check the hash chain; exit 1 if broken");
    ver->add_option("--ledger", o.ledger_path, "Ledger file")->required();
    ver->callback(wrap([&](std::ostream& s) { return bbx_verify(o, s); }));
    auto* zer = bbxc->add_subcommand("zeroize", "Overwrite the ledger contents with zeros");
    zer->add_option("--ledger", o.ledger_path, "Ledger file")->required();
    zer->add_option("--out", o.bbx_out, "Write here instead of in place");
    zer->callback(wrap([&](std::ostream& s) { bbx_zeroize(o, s); return kExitOk; }));
    auto* dec = bbxc->add_subcommand("decoy", "Replace the ledger with a plausible decoy flight");
    dec->add_option("--ledger", o.ledger_path, "Ledger file")->required();
    dec->add_option("--out", o.bbx_out, "Write here instead of in place");
    dec->callback(wrap([&](std::ostream& s) { bbx_decoy(o, s); return kExitOk; }));

    auto* met = app.add_subcommand("metrics", "Classification metrics from a label,prediction[,score] CSV");
    met->add_option("--pred", o.pred_path, "Prediction file")->required();
    met->callback(wrap([&](std::ostream& s) { metrics_cmd(o, s); return kExitOk; }));

    auto* spl = app.add_subcommand("splits", "Seeded k-fold index partition");
    spl->add_option("--n", o.split_n, "Number of rows")->required();
    spl->add_option("--k", o.split_k, "Number of folds")->required();
    spl->callback(wrap([&](std::ostream& s) { splits_cmd(o, s); return kExitOk; }));

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }
    if (!run) {
        err << "usage error: no command given\n\n" << app.help();
        return kExitUsage;
    }

    std::ostringstream buffer;
    int code = kExitOk;
    try {
        code = run(buffer);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        err << e.what() << '\n';
        code = kExitDomain;
    }
    if (o.output.empty()) {
        out << buffer.str();
    } else if (!buffer.str().empty() || code == kExitOk) {
        std::ofstream file(o.output, std::ios::binary | std::ios::trunc);
        if (!file) {
            err << "IoError: cannot write " << o.output << '\n';
            return kExitDomain;
        }
        file << buffer.str();
    }
    return code;
}

}  // namespace mission::cli
