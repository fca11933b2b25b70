#pragma once

// Decoy substitution for a captured black box: the contents are replaced by
// the record of an uneventful mission generated from a telemetry template.
// The result chains, seals and replays like a genuine flight, and nothing
// in the file marks it as a decoy.

#include "mission/ledger.hpp"
#include "mission/scenario.hpp"
#include "mission/simulator.hpp"
#include "mission/telemetry.hpp"

#include <cstdint>

namespace mission::bbx {

/// Replace `ledger` with a decoy flight. The mission epoch is kept so the
/// header does not change; kernel, p1 and sensor noise come from `tmpl`.
inline Ledger& decoy_fill(Ledger& ledger, std::uint64_t decoy_seed,
                          const telemetry::DatasetSpec& tmpl = telemetry::DatasetSpec{}) {
    tmpl.validate();
    sim::MissionScenario s;
    s.seed = decoy_seed;
    s.mission_epoch_ms = ledger.mission_epoch_ms();
    s.noise_level = tmpl.noise_level;
    s.contract.kernel = tmpl.kernel;
    s.contract.p1 = tmpl.p1;
    s.contract.success_threshold = 0.0;
    s.sync_contract();

    sim::SimulationResult r = sim::simulate(s);
    std::vector<LedgerEntry> entries = r.ledger.entries();
    ledger = Ledger::from_entries(s.mission_epoch_ms, std::move(entries), true, LedgerMode::Decoy);
    return ledger;
}

}  // namespace mission::bbx
