#pragma once

// On-board black box: an append-only, SHA-256 hash-chained flight record.
//
// Entry hash = SHA-256 over the canonical encoding of
//   seq | timestamp_ms | provenance | payload | prev_hash
// where every field is preceded by its length as a 4-byte big-endian
// integer, seq and timestamp_ms are 8-byte big-endian unsigned integers,
// provenance is the label text (e.g. "sensor:gps"), and prev_hash is the
// 32 raw digest bytes. Entry 0 links to 32 zero bytes.
//
// File format (version 1), one JSON object per line, each line ending in '\n':
//   {"format":"bbx-ledger","version":1,"mission_epoch_ms":E}
//   {"seq":..,"timestamp_ms":..,"provenance":"..","payload_base64":"..",
//    "prev_hash_hex":"..","entry_hash_hex":".."}            (one per entry)
//   {"entry_count":N}
// The text lines are not hashed; only the canonical binary encoding is.

#include "mission/digest.hpp"
#include "mission/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace mission::bbx {

inline constexpr int kFormatVersion = 1;
inline constexpr std::string_view kFormatName = "bbx-ledger";
inline constexpr Digest kGenesisHash{};
inline constexpr std::string_view kSealPayload = "SEAL";

enum class ProvenanceKind : std::uint8_t { Sensor, ContractEngine, Mc2Command, UavAction };

/// Origin of a record. Sensors carry an identifier; the other sources are singletons.
struct Provenance {
    ProvenanceKind kind = ProvenanceKind::UavAction;
    std::string sensor_id;

    static Provenance sensor(std::string id) { return {ProvenanceKind::Sensor, std::move(id)}; }
    static Provenance contract_engine() { return {ProvenanceKind::ContractEngine, {}}; }
    static Provenance mc2_command() { return {ProvenanceKind::Mc2Command, {}}; }
    static Provenance uav_action() { return {ProvenanceKind::UavAction, {}}; }

    std::string label() const {
        switch (kind) {
            case ProvenanceKind::Sensor: return "sensor:" + sensor_id;
            case ProvenanceKind::ContractEngine: return "contract_engine";
            case ProvenanceKind::Mc2Command: return "mc2_command";
            case ProvenanceKind::UavAction: return "uav_action";
        }
        return {};
    }

    static std::optional<Provenance> parse(std::string_view label) {
        if (label == "contract_engine") return contract_engine();
        if (label == "mc2_command") return mc2_command();
        if (label == "uav_action") return uav_action();
        constexpr std::string_view prefix = "sensor:";
        if (label.size() > prefix.size() && label.substr(0, prefix.size()) == prefix) {
            return sensor(std::string(label.substr(prefix.size())));
        }
        return std::nullopt;
    }

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Sensor identifiers are restricted to [A-Za-z0-9_.-]+ so labels stay printable.
inline bool valid_sensor_id(std::string_view id) {
    return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
               c == '_' || c == '.' || c == '-';
    });
}

/// A stored record. Provenance is kept as its label bytes: the ledger
/// stores and hashes bytes, interpretation is left to readers.
struct LedgerEntry {
    std::uint64_t seq = 0;
    std::uint64_t timestamp_ms = 0;
    std::string provenance;
    Bytes payload;
    Digest prev_hash{};
    Digest entry_hash{};

    std::string_view payload_text() const {
        return {reinterpret_cast<const char*>(payload.data()), payload.size()};
    }

    friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

namespace detail {

inline void put_u32(Bytes& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

inline void put_u64(Bytes& out, std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

inline void put_field(Bytes& out, std::span<const std::uint8_t> field) {
    put_u32(out, static_cast<std::uint32_t>(field.size()));
    out.insert(out.end(), field.begin(), field.end());
}

}  // namespace detail

/// Hash preimage of an entry (everything but entry_hash).
inline Bytes canonical_encoding(const LedgerEntry& e) {
    Bytes out;
    out.reserve(4 * 5 + 8 + 8 + e.provenance.size() + e.payload.size() + 32);
    detail::put_u32(out, 8);
    detail::put_u64(out, e.seq);
    detail::put_u32(out, 8);
    detail::put_u64(out, e.timestamp_ms);
    detail::put_field(out, std::span(reinterpret_cast<const std::uint8_t*>(e.provenance.data()),
                                     e.provenance.size()));
    detail::put_field(out, e.payload);
    detail::put_field(out, e.prev_hash);
    return out;
}

inline Digest compute_entry_hash(const LedgerEntry& e) { return sha256(canonical_encoding(e)); }

/// Outcome of a chain verification: either valid, or the first entry whose
/// recomputation disagrees with what is stored.
struct VerifyResult {
    std::optional<std::uint64_t> broken_at;

    bool valid() const noexcept { return !broken_at.has_value(); }
    std::string to_string() const {
        return valid() ? "Valid" : "BrokenAt(" + std::to_string(*broken_at) + ")";
    }
    friend bool operator==(const VerifyResult&, const VerifyResult&) = default;
};

inline VerifyResult verify_chain(std::span<const LedgerEntry> entries) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const LedgerEntry& e = entries[i];
        const Digest& expected_prev = i == 0 ? kGenesisHash : entries[i - 1].entry_hash;
        const bool ok = e.seq == i && e.prev_hash == expected_prev &&
                        (i == 0 || e.timestamp_ms >= entries[i - 1].timestamp_ms) &&
                        compute_entry_hash(e) == e.entry_hash;
        if (!ok) return {i};
    }
    return {};
}

enum class LedgerMode : std::uint8_t { Live, Zeroized, Decoy };

class Ledger {
public:
    explicit Ledger(std::uint64_t mission_epoch_ms = 0) : epoch_ms_(mission_epoch_ms) {}

    /// Adopt already-materialized entries without checking them (loading,
    /// decoy construction). Call verify() to learn whether they chain.
    static Ledger from_entries(std::uint64_t mission_epoch_ms, std::vector<LedgerEntry> entries,
                               bool sealed, LedgerMode mode = LedgerMode::Live) {
        Ledger l(mission_epoch_ms);
        l.entries_ = std::move(entries);
        l.sealed_ = sealed;
        l.mode_ = mode;
        return l;
    }

    const LedgerEntry& append(const Provenance& source, std::uint64_t timestamp_ms,
                              std::span<const std::uint8_t> payload) {
        MISSION_REQUIRE(!sealed_ && mode_ == LedgerMode::Live, ErrorCode::SealedLedger,
                        "ledger no longer accepts entries");
        MISSION_REQUIRE(source.kind != ProvenanceKind::Sensor || valid_sensor_id(source.sensor_id),
                        ErrorCode::InvalidArgument, "invalid sensor id '" + source.sensor_id + "'");
        if (!entries_.empty()) {
            MISSION_REQUIRE(timestamp_ms >= entries_.back().timestamp_ms, ErrorCode::TimestampRegression,
                            "timestamp " + std::to_string(timestamp_ms) + " precedes " +
                                std::to_string(entries_.back().timestamp_ms));
        }
        LedgerEntry e;
        e.seq = entries_.size();
        e.timestamp_ms = timestamp_ms;
        e.provenance = source.label();
        e.payload.assign(payload.begin(), payload.end());
        e.prev_hash = entries_.empty() ? kGenesisHash : entries_.back().entry_hash;
        e.entry_hash = compute_entry_hash(e);
        entries_.push_back(std::move(e));
        return entries_.back();
    }

    const LedgerEntry& append(const Provenance& source, std::uint64_t timestamp_ms, std::string_view payload) {
        return append(source, timestamp_ms,
                      std::span(reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()));
    }

    /// Close out the mission: a final contract-engine "SEAL" record, after
    /// which appends are refused.
    void seal() {
        MISSION_REQUIRE(!sealed_, ErrorCode::SealedLedger, "ledger is already sealed");
        const std::uint64_t ts = entries_.empty() ? 0 : entries_.back().timestamp_ms;
        append(Provenance::contract_engine(), ts, kSealPayload);
        sealed_ = true;
    }

    /// Overwrite every stored byte with zeros, keeping field lengths.
    void zeroize() {
        for (LedgerEntry& e : entries_) {
            e.seq = 0;
            e.timestamp_ms = 0;
            std::fill(e.provenance.begin(), e.provenance.end(), '\0');
            std::fill(e.payload.begin(), e.payload.end(), std::uint8_t{0});
            e.prev_hash.fill(0);
            e.entry_hash.fill(0);
        }
        epoch_ms_ = 0;
        sealed_ = true;
        mode_ = LedgerMode::Zeroized;
    }

    VerifyResult verify() const { return verify_chain(entries_); }

    const std::vector<LedgerEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    bool sealed() const noexcept { return sealed_; }
    LedgerMode mode() const noexcept { return mode_; }
    std::uint64_t mission_epoch_ms() const noexcept { return epoch_ms_; }

    /// Equality of persisted state; the in-memory mode is not part of it.
    friend bool operator==(const Ledger& a, const Ledger& b) {
        return a.epoch_ms_ == b.epoch_ms_ && a.sealed_ == b.sealed_ && a.entries_ == b.entries_;
    }

private:
    std::uint64_t epoch_ms_;
    std::vector<LedgerEntry> entries_;
    bool sealed_ = false;
    LedgerMode mode_ = LedgerMode::Live;
};

inline Ledger ledger_new(std::uint64_t mission_epoch_ms) { return Ledger(mission_epoch_ms); }

inline VerifyResult verify_chain(const Ledger& ledger) { return ledger.verify(); }

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline std::string serialize(const Ledger& ledger) {
    using ojson = nlohmann::ordered_json;
    std::string out;
    ojson header;
    header["format"] = kFormatName;
    header["version"] = kFormatVersion;
    header["mission_epoch_ms"] = ledger.mission_epoch_ms();
    out += header.dump() + '\n';
    for (const LedgerEntry& e : ledger.entries()) {
        ojson line;
        line["seq"] = e.seq;
        line["timestamp_ms"] = e.timestamp_ms;
        line["provenance"] = e.provenance;
        line["payload_base64"] = base64_encode(e.payload);
        line["prev_hash_hex"] = to_hex(e.prev_hash);
        line["entry_hash_hex"] = to_hex(e.entry_hash);
        out += line.dump() + '\n';
    }
    ojson trailer;
    trailer["entry_count"] = ledger.size();
    out += trailer.dump() + '\n';
    return out;
}

inline void export_ledger(const Ledger& ledger, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    MISSION_REQUIRE(out.good(), ErrorCode::IoError, "cannot write " + path);
    const std::string text = serialize(ledger);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    MISSION_REQUIRE(out.good(), ErrorCode::IoError, "write failed for " + path);
}

struct LoadedLedger {
    Ledger ledger;
    VerifyResult status;
};

namespace detail {

[[noreturn]] inline void malformed(std::size_t line, std::size_t offset, const std::string& what) {
    throw Error(ErrorCode::MalformedFile,
                "line " + std::to_string(line) + ", offset " + std::to_string(offset) + ": " + what);
}

inline nlohmann::json parse_line(const std::string& text, std::size_t line, std::size_t offset) {
    try {
        auto j = nlohmann::json::parse(text);
        if (!j.is_object()) malformed(line, offset, "record is not an object");
        return j;
    } catch (const nlohmann::json::exception& ex) {
        malformed(line, offset, ex.what());
    }
}

inline void expect_keys(const nlohmann::json& j, std::initializer_list<const char*> keys, std::size_t line,
                        std::size_t offset) {
    if (j.size() != keys.size()) malformed(line, offset, "unexpected set of fields");
    for (const char* k : keys) {
        if (!j.contains(k)) malformed(line, offset, std::string("missing field '") + k + "'");
    }
}

inline std::uint64_t get_u64(const nlohmann::json& j, const char* key, std::size_t line, std::size_t offset) {
    const auto& v = j.at(key);
    if (!v.is_number_unsigned()) malformed(line, offset, std::string("field '") + key + "' is not unsigned");
    return v.get<std::uint64_t>();
}

inline std::string get_str(const nlohmann::json& j, const char* key, std::size_t line, std::size_t offset) {
    const auto& v = j.at(key);
    if (!v.is_string()) malformed(line, offset, std::string("field '") + key + "' is not a string");
    return v.get<std::string>();
}

inline Digest get_digest(const nlohmann::json& j, const char* key, std::size_t line, std::size_t offset) {
    Digest d{};
    if (!from_hex(get_str(j, key, line, offset), d)) {
        malformed(line, offset, std::string("field '") + key + "' is not a 64-digit lower-case hex digest");
    }
    return d;
}

inline bool is_seal(const LedgerEntry& e) {
    return e.provenance == "contract_engine" && e.payload_text() == kSealPayload;
}

}  // namespace detail

/// Parse a ledger file and verify its chain. Format violations throw
/// MalformedFile; chain breaks are reported in `status`.
inline LoadedLedger parse_ledger(std::istream& in) {
    std::vector<std::string> lines;
    std::vector<std::size_t> offsets;
    std::size_t offset = 0;
    bool last_terminated = true;
    for (std::string line; std::getline(in, line);) {
        last_terminated = !in.eof();
        lines.push_back(line);
        offsets.push_back(offset);
        offset += line.size() + 1;
    }
    if (lines.empty()) detail::malformed(1, 0, "empty file");
    if (!last_terminated) detail::malformed(lines.size(), offsets.back(), "truncated record (no newline)");
    if (lines.size() < 2) detail::malformed(lines.size() + 1, offset, "missing trailer");

    const auto header = detail::parse_line(lines[0], 1, 0);
    detail::expect_keys(header, {"format", "version", "mission_epoch_ms"}, 1, 0);
    if (detail::get_str(header, "format", 1, 0) != kFormatName) detail::malformed(1, 0, "not a bbx-ledger file");
    if (detail::get_u64(header, "version", 1, 0) != kFormatVersion) detail::malformed(1, 0, "unsupported version");
    const std::uint64_t epoch = detail::get_u64(header, "mission_epoch_ms", 1, 0);

    std::vector<LedgerEntry> entries;
    for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
        const std::size_t ln = i + 1;
        const std::size_t off = offsets[i];
        const auto j = detail::parse_line(lines[i], ln, off);
        detail::expect_keys(j, {"seq", "timestamp_ms", "provenance", "payload_base64", "prev_hash_hex",
                                "entry_hash_hex"},
                            ln, off);
        LedgerEntry e;
        e.seq = detail::get_u64(j, "seq", ln, off);
        e.timestamp_ms = detail::get_u64(j, "timestamp_ms", ln, off);
        e.provenance = detail::get_str(j, "provenance", ln, off);
        auto payload = base64_decode(detail::get_str(j, "payload_base64", ln, off));
        if (!payload) detail::malformed(ln, off, "payload_base64 is not canonical base64");
        e.payload = std::move(*payload);
        e.prev_hash = detail::get_digest(j, "prev_hash_hex", ln, off);
        e.entry_hash = detail::get_digest(j, "entry_hash_hex", ln, off);
        entries.push_back(std::move(e));
    }

    const std::size_t tl = lines.size();
    const auto trailer = detail::parse_line(lines.back(), tl, offsets.back());
    detail::expect_keys(trailer, {"entry_count"}, tl, offsets.back());
    if (detail::get_u64(trailer, "entry_count", tl, offsets.back()) != entries.size()) {
        detail::malformed(tl, offsets.back(), "entry_count does not match the number of records");
    }

    const bool sealed = !entries.empty() && detail::is_seal(entries.back());
    Ledger ledger = Ledger::from_entries(epoch, std::move(entries), sealed);
    const VerifyResult status = ledger.verify();
    return {std::move(ledger), status};
}

inline LoadedLedger load_ledger(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    MISSION_REQUIRE(in.good(), ErrorCode::IoError, "cannot open " + path);
    return parse_ledger(in);
}

}  // namespace mission::bbx
