#include "catch_amalgamated.hpp"
#include "oracles.hpp"

#include "mission/decoy.hpp"
#include "mission/digest.hpp"
#include "mission/ledger.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace mission;
using namespace mission::bbx;

namespace {

Ledger sample_ledger(std::size_t n, std::uint64_t epoch = 1'700'000'000'000ULL) {
    Ledger l(epoch);
    const char* sensors[] = {"gps", "battery", "eo_camera", "ir_camera", "anemometer"};
    for (std::size_t i = 0; i < n; ++i) {
        Provenance p = Provenance::uav_action();
        switch (i % 4) {
            case 0: p = Provenance::sensor(sensors[i % 5]); break;
            case 1: p = Provenance::contract_engine(); break;
            case 2: p = Provenance::mc2_command(); break;
            default: break;
        }
        l.append(p, 100 * (i / 3), "{\"i\":" + std::to_string(i) + ",\"reading\":" + std::to_string(i * 7 % 13) + "}");
    }
    return l;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string s;
    for (const auto& l : lines) s += l + '\n';
    return s;
}

LoadedLedger reparse(const std::string& text) {
    std::istringstream in(text);
    return parse_ledger(in);
}

/// First index whose stored fields disagree with an independent recomputation.
std::optional<std::uint64_t> oracle_break(const std::vector<LedgerEntry>& entries) {
    Digest prev{};
    std::uint64_t last_ts = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        const auto h = oracle::entry_hash(e.seq, e.timestamp_ms, e.provenance, e.payload, e.prev_hash);
        if (e.seq != i || e.prev_hash != prev || h != e.entry_hash || (i > 0 && e.timestamp_ms < last_ts)) return i;
        prev = e.entry_hash;
        last_ts = e.timestamp_ms;
    }
    return std::nullopt;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("mission_ledger_" + name);
}

}  // namespace

TEST_CASE("sha256 and encodings", "[digest]") {
    CHECK(to_hex(sha256(std::string_view("abc"))) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(to_hex(sha256(std::string_view(""))) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const Bytes data{0x00, 0xff, 0x10, 0x20, 0x7f};
    const auto b64 = base64_encode(data);
    CHECK(b64 == "AP8QIH8=");
    CHECK(base64_decode(b64) == std::optional<Bytes>(data));
    CHECK(!base64_decode("AP8QIH8"));
    CHECK(!base64_decode("AP8QIH9="));  // non-canonical trailing bits
    CHECK(base64_decode("") == std::optional<Bytes>(Bytes{}));
    Digest d{};
    CHECK(!from_hex("AB", d));
}

TEST_CASE("new ledger", "[ledger]") {
    Ledger l = ledger_new(42);
    CHECK(l.empty());
    CHECK(!l.sealed());
    CHECK(l.mode() == LedgerMode::Live);
    CHECK(verify_chain(l).valid());
    l.append(Provenance::uav_action(), 0, "x");
    CHECK(l.size() == 1);
}

TEST_CASE("append links entries", "[ledger]") {
    Ledger l(0);
    const auto& first = l.append(Provenance::sensor("gps"), 10, "a");
    CHECK(first.seq == 0);
    CHECK(first.prev_hash == kGenesisHash);
    const Digest h0 = first.entry_hash;
    const auto& second = l.append(Provenance::contract_engine(), 10, "b");
    CHECK(second.seq == 1);
    CHECK(second.prev_hash == h0);
    CHECK(verify_chain(l).valid());
    CHECK(l.entries()[0].entry_hash ==
          oracle::entry_hash(0, 10, "sensor:gps", l.entries()[0].payload, kGenesisHash));
}

TEST_CASE("append rejects timestamp regression and bad sensor ids", "[ledger]") {
    Ledger l(0);
    l.append(Provenance::uav_action(), 500, "a");
    try {
        l.append(Provenance::uav_action(), 499, "b");
        FAIL("expected TimestampRegression");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TimestampRegression);
    }
    CHECK_THROWS_AS(l.append(Provenance::sensor("bad id"), 600, "c"), Error);
    CHECK_THROWS_AS(l.append(Provenance::sensor(""), 600, "c"), Error);
    CHECK(l.size() == 1);
}

TEST_CASE("seal", "[ledger]") {
    Ledger empty(0);
    empty.seal();
    CHECK(empty.size() == 1);
    CHECK(empty.sealed());
    CHECK(empty.entries()[0].provenance == "contract_engine");
    CHECK(empty.entries()[0].payload_text() == "SEAL");
    CHECK(verify_chain(empty).valid());
    try {
        empty.append(Provenance::uav_action(), 0, "late");
        FAIL("expected SealedLedger");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SealedLedger);
    }
    CHECK_THROWS_AS(empty.seal(), Error);
}

TEST_CASE("provenance labels round-trip", "[ledger]") {
    for (const auto& p : {Provenance::sensor("ir_camera"), Provenance::contract_engine(), Provenance::mc2_command(),
                          Provenance::uav_action()}) {
        CHECK(Provenance::parse(p.label()) == std::optional<Provenance>(p));
    }
    CHECK(!Provenance::parse("sensor:"));
    CHECK(!Provenance::parse("pilot"));
}

TEST_CASE("verify detects payload flips and swaps", "[ledger]") {
    const Ledger base = sample_ledger(100);
    CHECK(verify_chain(base).valid());

    auto entries = base.entries();
    entries[17].payload[3] ^= 0x01;
    const auto flipped = verify_chain(entries);
    CHECK(flipped.broken_at == std::optional<std::uint64_t>(17));
    CHECK(oracle_break(entries) == flipped.broken_at);

    auto swapped = base.entries();
    std::swap(swapped[5], swapped[6]);
    CHECK(verify_chain(swapped).broken_at == std::optional<std::uint64_t>(5));
    CHECK(oracle_break(swapped) == std::optional<std::uint64_t>(5));
}

TEST_CASE("swapping two lines on disk", "[ledger][file]") {
    auto lines = lines_of(serialize(sample_ledger(100)));
    std::swap(lines[1 + 5], lines[1 + 6]);
    const auto loaded = reparse(join_lines(lines));
    CHECK(loaded.status.to_string() == "BrokenAt(5)");
}

TEST_CASE("export and load round-trip", "[ledger][file]") {
    Ledger l = sample_ledger(30);
    l.seal();
    const auto path = temp_file("roundtrip.bbx");
    export_ledger(l, path.string());
    const auto loaded = load_ledger(path.string());
    CHECK(loaded.ledger == l);
    CHECK(loaded.ledger.sealed());
    CHECK(loaded.status.valid());
    std::ifstream in(path, std::ios::binary);
    const std::string on_disk((std::istreambuf_iterator<char>(in)), {});
    CHECK(on_disk == serialize(l));
    CHECK(serialize(loaded.ledger) == on_disk);
    std::filesystem::remove(path);
}

TEST_CASE("file header and record fields", "[ledger][file]") {
    const auto lines = lines_of(serialize(sample_ledger(3)));
    REQUIRE(lines.size() == 5);
    const auto header = nlohmann::json::parse(lines[0]);
    CHECK(header.at("format") == "bbx-ledger");
    CHECK(header.at("version") == 1);
    const auto rec = nlohmann::json::parse(lines[1]);
    std::set<std::string> keys;
    for (const auto& [k, _] : rec.items()) keys.insert(k);
    CHECK(keys == std::set<std::string>{"seq", "timestamp_ms", "provenance", "payload_base64", "prev_hash_hex",
                                        "entry_hash_hex"});
    CHECK(nlohmann::json::parse(lines[4]).at("entry_count") == 3);
}

TEST_CASE("malformed files", "[ledger][file]") {
    const std::string good = serialize(sample_ledger(10));
    auto expect_malformed = [](const std::string& text, const std::string& where) {
        try {
            reparse(text);
            FAIL("expected MalformedFile");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::MalformedFile);
            CHECK(std::string(e.what()).find(where) != std::string::npos);
        }
    };
    expect_malformed(good.substr(0, good.size() / 2), "line");
    expect_malformed(good.substr(0, good.size() - 1), "truncated");
    expect_malformed("", "empty");

    auto lines = lines_of(good);
    lines.pop_back();
    expect_malformed(join_lines(lines), "line 11");  // trailer missing: last record read as trailer

    auto bad_b64 = lines_of(good);
    auto j = nlohmann::ordered_json::parse(bad_b64[3]);
    j["payload_base64"] = "***";
    bad_b64[3] = j.dump();
    expect_malformed(join_lines(bad_b64), "line 4");

    auto bad_hex = lines_of(good);
    j = nlohmann::ordered_json::parse(bad_hex[2]);
    j["prev_hash_hex"] = "00";
    bad_hex[2] = j.dump();
    expect_malformed(join_lines(bad_hex), "line 3");

    auto extra = lines_of(good);
    j = nlohmann::ordered_json::parse(extra[2]);
    j["decoy"] = false;
    extra[2] = j.dump();
    expect_malformed(join_lines(extra), "line 3");
}

TEST_CASE("hand-edited payload loads but reports the break", "[ledger][file]") {
    auto lines = lines_of(serialize(sample_ledger(20)));
    auto j = nlohmann::ordered_json::parse(lines[1 + 9]);
    j["payload_base64"] = base64_encode(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>("{\"i\":9,\"reading\":0}"), 20));
    lines[1 + 9] = j.dump();
    const auto loaded = reparse(join_lines(lines));
    CHECK(loaded.status.broken_at == std::optional<std::uint64_t>(9));
    CHECK(oracle_break(loaded.ledger.entries()) == std::optional<std::uint64_t>(9));
}

TEST_CASE("single-bit mutations of serialized fields are always caught", "[ledger][fuzz]") {
    Ledger base = sample_ledger(60);
    base.seal();
    const auto lines = lines_of(serialize(base));
    Rng rng(20240611);
    const char* fields[] = {"payload_base64", "timestamp_ms", "provenance", "seq", "prev_hash_hex", "entry_hash_hex"};
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t k = rng.below(base.size());
        const std::string field = fields[rng.below(6)];
        auto mutated = lines;
        auto j = nlohmann::ordered_json::parse(mutated[1 + k]);
        if (field == "payload_base64") {
            Bytes p = *base64_decode(j[field].get<std::string>());
            const std::size_t bit = rng.below(p.size() * 8);
            p[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
            j[field] = base64_encode(p);
        } else if (field == "timestamp_ms" || field == "seq") {
            j[field] = j[field].get<std::uint64_t>() ^ (1ULL << rng.below(64));
        } else if (field == "provenance") {
            auto s = j[field].get<std::string>();
            const std::size_t bit = rng.below(s.size() * 7);
            s[bit / 7] = static_cast<char>(s[bit / 7] ^ (1 << (bit % 7)));
            j[field] = s;
        } else {
            Digest d{};
            REQUIRE(from_hex(j[field].get<std::string>(), d));
            const std::size_t bit = rng.below(256);
            d[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
            j[field] = to_hex(d);
        }
        mutated[1 + k] = j.dump();
        const auto loaded = reparse(join_lines(mutated));
        INFO("trial " << trial << " entry " << k << " field " << field);
        REQUIRE(loaded.status.broken_at == std::optional<std::uint64_t>(k));
        REQUIRE(oracle_break(loaded.ledger.entries()) == std::optional<std::uint64_t>(k));
        // Everything before the break still verifies as a chain of its own.
        const auto& es = loaded.ledger.entries();
        REQUIRE(verify_chain(std::span(es.data(), k)).valid());
    }
}

TEST_CASE("zeroize", "[ledger][erase]") {
    Ledger l = sample_ledger(50);
    l.zeroize();
    CHECK(l.mode() == LedgerMode::Zeroized);
    CHECK(verify_chain(l).broken_at == std::optional<std::uint64_t>(0));
    for (const auto& e : l.entries()) {
        CHECK(e.seq == 0);
        CHECK(e.timestamp_ms == 0);
        CHECK(std::all_of(e.provenance.begin(), e.provenance.end(), [](char c) { return c == 0; }));
        CHECK(std::all_of(e.payload.begin(), e.payload.end(), [](std::uint8_t b) { return b == 0; }));
        CHECK(e.prev_hash == Digest{});
        CHECK(e.entry_hash == Digest{});
    }
    const Ledger once = l;
    l.zeroize();
    CHECK(l == once);
    CHECK_THROWS_AS(l.append(Provenance::uav_action(), 0, "x"), Error);

    // On disk the record bytes decode to zeros, and loading reports BrokenAt(0).
    const auto loaded = reparse(serialize(l));
    CHECK(loaded.status.to_string() == "BrokenAt(0)");
    for (const auto& e : loaded.ledger.entries()) {
        CHECK(std::all_of(e.payload.begin(), e.payload.end(), [](std::uint8_t b) { return b == 0; }));
    }
}

TEST_CASE("decoy fill", "[ledger][erase]") {
    Ledger a = sample_ledger(40, 5000);
    Ledger b = sample_ledger(10, 5000);
    decoy_fill(a, 77);
    decoy_fill(b, 77);
    CHECK(a.mode() == LedgerMode::Decoy);
    CHECK(verify_chain(a).valid());
    CHECK(oracle_break(a.entries()) == std::nullopt);
    CHECK(serialize(a) == serialize(b));
    CHECK(a.mission_epoch_ms() == 5000);

    Ledger c = sample_ledger(10, 5000);
    decoy_fill(c, 78);
    CHECK(serialize(c) != serialize(a));

    // A zeroized ledger can still be replaced by a decoy.
    Ledger z = sample_ledger(5);
    z.zeroize();
    decoy_fill(z, 1);
    CHECK(verify_chain(z).valid());

    // Same record schema and header keys as a genuine ledger.
    Ledger live = sample_ledger(5, 5000);
    live.seal();
    const auto dl = lines_of(serialize(a));
    const auto ll = lines_of(serialize(live));
    auto keyset = [](const std::string& line) {
        std::set<std::string> keys;
        const auto j = nlohmann::json::parse(line);
        for (const auto& [k, _] : j.items()) keys.insert(k);
        return keys;
    };
    CHECK(keyset(dl.front()) == keyset(ll.front()));
    CHECK(keyset(dl[1]) == keyset(ll[1]));
    CHECK(keyset(dl.back()) == keyset(ll.back()));
    CHECK(dl.front() == ll.front());
    const auto reloaded = reparse(serialize(a));
    CHECK(reloaded.ledger.sealed());
    CHECK(reloaded.ledger.mode() == LedgerMode::Live);
}
