#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "tempo/bench.hpp"
#include "tempo/topology.hpp"

using namespace tempo;

namespace {

// Split one CSV line, keeping empty fields (including trailing ones).
std::vector<std::string> fields_of(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

std::vector<std::string> lines_of(const std::vector<BenchRow>& rows) {
    std::ostringstream os;
    emit_csv(rows, os);
    std::vector<std::string> out;
    std::istringstream is(os.str());
    std::string line;
    while (std::getline(is, line)) out.push_back(line);
    return out;
}

// A small event-budget spec that runs in milliseconds.
SweepSpec quick_spec(std::uint64_t events = 400) {
    SweepSpec s;
    s.engines = {EngineKind::sequential};
    s.threads = {1};
    s.samples = 2;
    s.events = events;
    s.seed = 7;
    s.engine.pin_threads = false;
    return s;
}

} // namespace

TEST_CASE("tokens round-trip and reject unknown spellings") {
    CHECK(parse_engine(to_token(EngineKind::sequential)) == EngineKind::sequential);
    CHECK(parse_engine(to_token(EngineKind::conservative)) == EngineKind::conservative);
    CHECK(parse_engine(to_token(EngineKind::optimistic)) == EngineKind::optimistic);
    CHECK(parse_model(to_token(ModelKind::pcs)) == ModelKind::pcs);
    CHECK(parse_model(to_token(ModelKind::highway)) == ModelKind::highway);
    CHECK(parse_load(to_token(LoadLevel::light)) == LoadLevel::light);
    CHECK(parse_load(to_token(LoadLevel::medium)) == LoadLevel::medium);
    CHECK(parse_load(to_token(LoadLevel::heavy)) == LoadLevel::heavy);
    CHECK(parse_balance(to_token(BalanceKind::balanced)) == BalanceKind::balanced);
    CHECK(parse_balance(to_token(BalanceKind::unbalanced)) == BalanceKind::unbalanced);

    CHECK_THROWS_AS((void)parse_engine("turbo"), ConfigError);
    CHECK_THROWS_AS((void)parse_model("grid"), ConfigError);
    CHECK_THROWS_AS((void)parse_load("max"), ConfigError);
    CHECK_THROWS_AS((void)parse_balance("skewed"), ConfigError);
    // Tokens are case-sensitive.
    CHECK_THROWS_AS((void)parse_load("Light"), ConfigError);
}

TEST_CASE("csv layout matches the documented schema") {
    SweepSpec s = quick_spec();
    std::vector<BenchRow> rows = run_sweep(s);
    // engines x threads x (samples + summary)
    REQUIRE(rows.size() == 3);

    std::vector<std::string> lines = lines_of(rows);
    REQUIRE(lines.size() == 2 + rows.size());
    CHECK(lines[0].rfind("# build=", 0) == 0);
    CHECK(lines[1] == std::string(kCsvHeader));

    const std::size_t ncols = fields_of(lines[1]).size();
    REQUIRE(ncols == 16);
    for (std::size_t i = 2; i < lines.size(); ++i) {
        std::vector<std::string> f = fields_of(lines[i]);
        REQUIRE(f.size() == ncols);
        CHECK(f[0] == "seq");
        CHECK(f[1] == "pcs");
        CHECK(f[2] == "medium");
        CHECK(f[3] == "balanced");
        CHECK(f[4] == "1");
    }

    // Sample rows carry measurements and leave the four summary columns empty.
    for (std::size_t i = 2; i < lines.size() - 1; ++i) {
        std::vector<std::string> f = fields_of(lines[i]);
        CHECK(f[5] == std::to_string(i - 2));
        for (std::size_t c = 6; c < 12; ++c) CHECK(!f[c].empty());
        for (std::size_t c = 12; c < 16; ++c) CHECK(f[c].empty());
    }

    // The summary row is the mirror image.
    std::vector<std::string> last = fields_of(lines.back());
    CHECK(last[5] == "summary");
    for (std::size_t c = 6; c < 12; ++c) CHECK(last[c].empty());
    for (std::size_t c = 12; c < 16; ++c) CHECK(!last[c].empty());
}

TEST_CASE("single-sample summaries report zero spread") {
    SweepSpec s = quick_spec();
    s.samples = 1;
    std::vector<BenchRow> rows = run_sweep(s);
    REQUIRE(rows.size() == 2);
    REQUIRE(rows.back().summary);
    CHECK(rows.back().committed_eps_sd == 0.0);
    CHECK(rows.back().total_eps_sd == 0.0);
    CHECK(rows.back().committed_eps_mean == doctest::Approx(rows.front().metrics.committed_eps));

    std::vector<std::string> lines = lines_of(rows);
    std::vector<std::string> last = fields_of(lines.back());
    CHECK(std::stod(last[13]) == 0.0);
    CHECK(std::stod(last[15]) == 0.0);
}

TEST_CASE("committed throughput never exceeds total") {
    Topology topo = Topology::load_file("fixtures/risc.json");
    SweepSpec s = quick_spec();
    s.engines = {EngineKind::sequential, EngineKind::conservative, EngineKind::optimistic};
    s.threads = {1, 2};
    s.samples = 1;
    s.engine.topology = &topo;

    std::vector<BenchRow> rows = run_sweep(s);
    REQUIRE(rows.size() == 3 * 2 * 2);
    for (const BenchRow& r : rows) {
        if (r.summary) {
            CHECK(r.committed_eps_mean <= r.total_eps_mean * (1.0 + 1e-12));
            continue;
        }
        CHECK(r.metrics.committed_events <= r.metrics.processed_events);
        CHECK(r.metrics.committed_eps <= r.metrics.total_eps * (1.0 + 1e-12));
        if (r.engine != EngineKind::optimistic) {
            CHECK(r.metrics.committed_events == r.metrics.processed_events);
            CHECK(r.metrics.rollbacks == 0);
        }
    }
}

TEST_CASE("row order is engine-major, then threads, then samples") {
    Topology topo = Topology::load_file("fixtures/risc.json");
    SweepSpec s = quick_spec();
    s.engines = {EngineKind::conservative, EngineKind::sequential};
    s.threads = {2, 1};
    s.samples = 2;
    s.engine.topology = &topo;

    std::vector<BenchRow> rows = run_sweep(s);
    REQUIRE(rows.size() == 2 * 2 * 3);
    std::size_t i = 0;
    for (EngineKind e : s.engines) {
        for (int t : s.threads) {
            for (int k = 0; k < s.samples; ++k, ++i) {
                CHECK(rows[i].engine == e);
                CHECK(rows[i].threads == t);
                CHECK(rows[i].sample == k);
                CHECK(!rows[i].summary);
            }
            CHECK(rows[i].engine == e);
            CHECK(rows[i].threads == t);
            CHECK(rows[i].summary);
            ++i;
        }
    }
}

TEST_CASE("count columns reproduce exactly under an event budget") {
    Topology topo = Topology::load_file("fixtures/risc.json");
    SweepSpec s = quick_spec(600);
    s.engines = {EngineKind::sequential, EngineKind::conservative};
    s.threads = {1, 2};
    s.samples = 2;
    s.engine.topology = &topo;

    std::vector<std::string> a = lines_of(run_sweep(s));
    std::vector<std::string> b = lines_of(run_sweep(s));
    REQUIRE(a.size() == b.size());
    // Identity and count fields are byte-identical; wall-clock fields are not
    // expected to be.
    for (std::size_t i = 2; i < a.size(); ++i) {
        std::vector<std::string> fa = fields_of(a[i]);
        std::vector<std::string> fb = fields_of(b[i]);
        REQUIRE(fa.size() == fb.size());
        for (std::size_t c : {std::size_t{0}, std::size_t{1}, std::size_t{2}, std::size_t{3},
                              std::size_t{4}, std::size_t{5}, std::size_t{8}, std::size_t{10},
                              std::size_t{11}}) {
            CHECK(fa[c] == fb[c]);
        }
    }
}

TEST_CASE("oversubscription and bad workloads are rejected") {
    SweepSpec s = quick_spec();

    SUBCASE("thread counts beyond the discovered machine") {
        s.threads = {4096};
        CHECK_THROWS_AS((void)run_sweep(s), CapacityIoError);
    }
    SUBCASE("thread counts beyond a topology override") {
        Topology topo = Topology::load_file("fixtures/risc.json");
        s.engine.topology = &topo;
        s.threads = {97}; // the fixture machine has 96 logical cpus
        CHECK_THROWS_AS((void)run_sweep(s), CapacityIoError);
        s.threads = {0};
        CHECK_THROWS_AS((void)run_sweep(s), ConfigError);
    }
    SUBCASE("unbalanced cellular workloads are undefined") {
        s.workload.model = ModelKind::pcs;
        s.workload.balance = BalanceKind::unbalanced;
        CHECK_THROWS_AS((void)run_sweep(s), ConfigError);
    }
    SUBCASE("degenerate sweeps") {
        SweepSpec bad = quick_spec();
        bad.engines.clear();
        CHECK_THROWS_AS((void)run_sweep(bad), ConfigError);
        bad = quick_spec();
        bad.threads.clear();
        CHECK_THROWS_AS((void)run_sweep(bad), ConfigError);
        bad = quick_spec();
        bad.samples = 0;
        CHECK_THROWS_AS((void)run_sweep(bad), ConfigError);
        bad = quick_spec();
        bad.events = 0;
        bad.duration_s = 0.0;
        CHECK_THROWS_AS((void)run_sweep(bad), ConfigError);
        bad = quick_spec();
        bad.workload.channels = 0;
        CHECK_THROWS_AS((void)run_sweep(bad), ConfigError);
    }
}

TEST_CASE("csv file errors name the path") {
    std::vector<BenchRow> rows = run_sweep(quick_spec());
    const std::string path = "/nonexistent-dir/rows.csv";
    try {
        emit_csv(rows, path);
        FAIL("expected CapacityIoError");
    } catch (const CapacityIoError& e) {
        CHECK(std::string(e.what()).find(path) != std::string::npos);
    }
}

TEST_CASE("verification passes honest engines") {
    Topology topo = Topology::load_file("fixtures/risc.json");
    SweepSpec s = quick_spec(1200);
    s.engines = {EngineKind::conservative, EngineKind::optimistic};
    s.threads = {1, 2};
    s.engine.topology = &topo;

    VerifyReport report = verify_mode(s);
    CHECK(report.ok());
    // probe + (3 window checks + 2 speculative checks) x 2 thread counts
    CHECK(report.checks.size() == 11);
    for (const VerifyCheck& c : report.checks) {
        INFO(c.name, ": ", c.detail);
        CHECK(c.pass);
    }
}

TEST_CASE("corrupted tiebreaks are caught and named") {
    SweepSpec s = quick_spec(1200);
    s.engines = {EngineKind::conservative};
    s.threads = {1};
    s.corrupt_tiebreak = true;

    VerifyReport report = verify_mode(s);
    CHECK(!report.ok());
    bool found = false;
    for (const VerifyCheck& c : report.checks) {
        if (c.pass) continue;
        found = true;
        CHECK(c.name.find("matches the sequential oracle") != std::string::npos);
        CHECK(c.detail.find("object") != std::string::npos);
        CHECK(c.detail.find("ts=") != std::string::npos);
        CHECK(c.detail.find("expected") != std::string::npos);
    }
    CHECK(found);
}

TEST_CASE("verification requires an event budget") {
    SweepSpec s = quick_spec();
    s.events = 0;
    CHECK_THROWS_AS((void)verify_mode(s), ConfigError);
}
