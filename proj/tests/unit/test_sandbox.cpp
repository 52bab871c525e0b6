#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <random>

#include "wrangle/errors.hpp"
#include "wrangle/sandbox.hpp"

using namespace wrangle;
using Clock = std::chrono::steady_clock;

namespace {

const std::string kEcho = "def transform(row):\n    return row['v']\n";

std::vector<RowMessage> value_rows(std::size_t n) {
  std::vector<RowMessage> rows;
  for (std::size_t i = 0; i < n; ++i) rows.push_back({i, {{"v", "x" + std::to_string(i)}, {"t", std::nullopt}}});
  return rows;
}

SubprocessOptions runner(std::chrono::milliseconds batch = std::chrono::milliseconds(5000)) {
  SubprocessOptions o;
  o.command = {WRANGLE_PYTHON, std::string(WRANGLE_TEST_DIR) + "/fixtures/fake_runner.py"};
  o.batch_timeout = batch;
  o.handshake_timeout = std::chrono::milliseconds(5000);
  return o;
}

// Sets FAKE_RUNNER_MODE for the lifetime of the guard.
struct Mode {
  explicit Mode(const char* mode) { ::setenv("FAKE_RUNNER_MODE", mode, 1); }
  ~Mode() { ::unsetenv("FAKE_RUNNER_MODE"); }
};

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

}  // namespace

TEST_SUITE("protocol") {
  TEST_CASE("row messages round-trip") {
    std::mt19937_64 rng(4);
    const std::vector<std::string> pieces = {"a", "\"", "\\", "\n", "é", ";", "{}", " ", "null", "\t"};
    for (int trial = 0; trial < 500; ++trial) {
      RowMessage m;
      m.id = rng();
      const int cols = static_cast<int>(rng() % 5);
      for (int c = 0; c < cols; ++c) {
        std::string name = "c" + std::to_string(c) + pieces[rng() % pieces.size()];
        if (rng() % 4 == 0) {
          m.row[name] = std::nullopt;
        } else {
          std::string v;
          for (int k = static_cast<int>(rng() % 6); k > 0; --k) v += pieces[rng() % pieces.size()];
          m.row[name] = v;
        }
      }
      const std::string line = encode_row(m);
      CHECK(line.find('\n') == std::string::npos);
      const RowMessage back = decode_row(line);
      CHECK(back.id == m.id);
      CHECK(back.row == m.row);
    }
  }

  TEST_CASE("result messages round-trip") {
    const ResultMessage v{3, "x\ny", std::nullopt};
    const auto dv = decode_result(encode_result(v));
    CHECK(dv.id == 3);
    CHECK(dv.value == "x\ny");
    CHECK(dv.ok());
    const ResultMessage e{9, std::nullopt, "KeyError: 'a'"};
    const auto de = decode_result(encode_result(e));
    CHECK_FALSE(de.ok());
    CHECK(de.error == "KeyError: 'a'");
  }

  TEST_CASE("malformed results are protocol errors") {
    for (const char* line : {"not json", "[]", R"({"value": "x"})", R"({"id": -1, "value": "x"})",
                             R"({"id": 1})", R"({"id": 1, "value": "x", "error": "y"})",
                             R"({"id": 1, "value": 5})", R"({"id": "1", "value": "x"})"}) {
      CHECK_THROWS_AS(decode_result(line), ProtocolError);
    }
    CHECK_THROWS_AS(decode_row(R"({"id": 1, "row": {"a": 1}})"), ProtocolError);
    CHECK_THROWS_AS(decode_row(R"({"id": 1})"), ProtocolError);
  }

  TEST_CASE("ready lines") {
    CHECK(decode_ready(encode_ready()) == 1);
    CHECK(decode_ready(R"({"ready": true, "protocol": 2})") == 2);
    CHECK_THROWS_AS(decode_ready(R"({"ready": false, "protocol": 1})"), ProtocolError);
    CHECK_THROWS_AS(decode_ready(R"({"fatal": "boom"})"), ProtocolError);
  }

  TEST_CASE("row messages mask the requested column") {
    const Table t("t", {"a", "b"}, {{"1", "x"}, {"2", std::nullopt}, {"3", "z"}});
    const std::vector<std::size_t> rows = {2, 0};
    const auto msgs = make_row_messages(t, rows, std::string_view("b"));
    REQUIRE(msgs.size() == 2);
    CHECK(msgs[0].id == 0);
    CHECK(msgs[1].id == 1);
    CHECK(msgs[0].row.at("a") == "3");
    CHECK(msgs[0].row.at("b") == std::nullopt);
    CHECK(make_row_messages(t, rows, std::nullopt)[0].row.at("b") == "z");
    CHECK_THROWS_AS(make_row_messages(t, rows, std::string_view("zz")), DataError);
  }
}

TEST_SUITE("stub executor") {
  TEST_CASE("behaviours are found by marker") {
    StubExecutor ex;
    ex.add_behavior("MARK", [](const RowMap& r) -> std::optional<std::string> {
      const auto& v = r.at("v");
      if (*v == "x1") throw std::runtime_error("bad row");
      if (*v == "x2") return std::nullopt;
      return *v + "!";
    });
    const auto rows = value_rows(4);
    const auto out = ex.run_session("# MARK\ndef transform(row): ...", rows);
    REQUIRE(out.size() == 4);
    CHECK(out[0].value == "x0!");
    CHECK_FALSE(out[1].ok());
    CHECK(out[2].value == "Unknown");
    CHECK(out[3].id == 3);
    CHECK_THROWS_AS(ex.run_session("nothing here", rows), SnippetLoadError);
    CHECK(ex.sessions() == 2);
  }
}

TEST_SUITE("subprocess executor") {
  TEST_CASE("identity echo over ten thousand rows") {
    SubprocessExecutor ex(runner());
    const auto rows = value_rows(10000);
    const auto out = ex.run_session(kEcho, rows);
    REQUIRE(out.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(out[i].id == i);
      CHECK(out[i].value == rows[i].row.at("v"));
    }
  }

  TEST_CASE("per-row exceptions become error results") {
    SubprocessExecutor ex(runner());
    const std::string src =
        "def transform(row):\n"
        "    n = int(row['v'][1:])\n"
        "    if n % 15 == 4:\n"
        "        raise ValueError('row %d' % n)\n"
        "    return None if n == 0 else row['v']\n";
    const auto out = ex.run_session(src, value_rows(100));
    REQUIRE(out.size() == 100);
    std::size_t errors = 0;
    for (const auto& r : out) errors += !r.ok();
    CHECK(errors == 7);
    CHECK_FALSE(out[4].ok());
    CHECK(out[4].error->find("ValueError") != std::string::npos);
    CHECK(out[0].value == "Unknown");
  }

  TEST_CASE("an empty session still completes the handshake") {
    SubprocessExecutor ex(runner());
    CHECK(ex.run_session(kEcho, {}).empty());
  }

  TEST_CASE("snippet load failure") {
    SubprocessExecutor ex(runner());
    CHECK_THROWS_AS(ex.run_session("def transform(row)\n    return 1\n", value_rows(3)),
                    SnippetLoadError);
    CHECK_THROWS_AS(ex.run_session("x = 1\n", value_rows(3)), SnippetLoadError);
  }

  TEST_CASE("wrong protocol version aborts the session") {
    Mode m("protocol2");
    SubprocessExecutor ex(runner());
    CHECK_THROWS_AS(ex.run_session(kEcho, value_rows(3)), SandboxLaunchError);
  }

  TEST_CASE("no ready line within the handshake timeout") {
    Mode m("silent");
    auto o = runner();
    o.handshake_timeout = std::chrono::milliseconds(300);
    SubprocessExecutor ex(o);
    const auto start = Clock::now();
    CHECK_THROWS_AS(ex.run_session(kEcho, value_rows(3)), SandboxLaunchError);
    CHECK(seconds_since(start) < 5.0);
  }

  TEST_CASE("malformed result line") {
    Mode m("malformed");
    SubprocessExecutor ex(runner());
    CHECK_THROWS_AS(ex.run_session(kEcho, value_rows(3)), ProtocolError);
  }

  TEST_CASE("out-of-order id") {
    Mode m("wrong_id");
    SubprocessExecutor ex(runner());
    CHECK_THROWS_AS(ex.run_session(kEcho, value_rows(3)), ProtocolError);
  }

  TEST_CASE("exit code 3 is a protocol violation") {
    Mode m("exit3");
    SubprocessExecutor ex(runner());
    CHECK_THROWS_AS(ex.run_session(kEcho, value_rows(3)), ProtocolError);
  }

  TEST_CASE("a hanging runner is killed within twice its budget") {
    Mode m("hang");
    const auto budget = std::chrono::milliseconds(1000);
    SubprocessExecutor ex(runner(budget));
    const auto start = Clock::now();
    CHECK_THROWS_AS(ex.run_session(kEcho, value_rows(10)), SandboxTimeout);
    CHECK(seconds_since(start) < 2.0);
  }

  TEST_CASE("launch failures") {
    SubprocessOptions empty;
    CHECK_THROWS_AS(SubprocessExecutor(empty).run_session(kEcho, value_rows(1)),
                    SandboxLaunchError);
    SubprocessOptions missing;
    missing.command = {"/nonexistent/wrangle-runner"};
    CHECK_THROWS_AS(SubprocessExecutor(missing).run_session(kEcho, value_rows(1)),
                    SandboxLaunchError);
  }
}
