#pragma once

#include "mission/chain_model.hpp"
#include "mission/contract.hpp"
#include "mission/decoy.hpp"
#include "mission/digest.hpp"
#include "mission/error.hpp"
#include "mission/ledger.hpp"
#include "mission/metrics.hpp"
#include "mission/rng.hpp"
#include "mission/scenario.hpp"
#include "mission/simulator.hpp"
#include "mission/telemetry.hpp"
